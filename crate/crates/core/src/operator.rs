//! The constant-step transition operator P_γ, its conjugate Q_γ, and a grid
//! solver for the absorption probability x ↦ P_x(X_∞ = 1).
//!
//! Grid functions are piecewise linear, so P_γ acting on them is again a
//! stochastic matrix on the grid with 0 and 1 absorbing. Linear
//! interpolation reproduces affine functions exactly, hence on the grid
//! P_γ(id) = id + πγh holds to rounding and the solver output equals
//! x + πγψ_γ(x) for the discretized chain.

use serde::{Deserialize, Serialize};

use crate::error::{check_open_unit, check_unit, invalid, Error, Result};
use crate::numeric::fmt_f64;

pub const DEFAULT_GRID_POINTS: usize = 4097;
pub const DEFAULT_TOL: f64 = 1e-10;
pub const DEFAULT_MAX_ITER: usize = 1_000_000;

/// Anything that can be evaluated on [0, 1].
pub trait Evaluate {
    fn eval(&self, x: f64) -> f64;
}

impl<F: Fn(f64) -> f64> Evaluate for F {
    fn eval(&self, x: f64) -> f64 {
        self(x)
    }
}

/// h(x) = x(1 - x).
pub fn h(x: f64) -> f64 {
    x * (1.0 - x)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridFunction {
    grid: Vec<f64>,
    values: Vec<f64>,
    uniform: bool,
}

impl GridFunction {
    /// Samples `f` on `points` equally spaced points from 0 to 1.
    pub fn uniform(points: usize, f: impl Evaluate) -> Result<Self> {
        if points < 2 {
            return Err(invalid("grid", format!("{points} points; need at least 2")));
        }
        let last = (points - 1) as f64;
        let grid: Vec<f64> = (0..points).map(|i| i as f64 / last).collect();
        let values = grid.iter().map(|x| f.eval(*x)).collect();
        Ok(Self {
            grid,
            values,
            uniform: true,
        })
    }

    pub fn new(grid: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if grid.len() < 2 || grid.len() != values.len() {
            return Err(invalid("grid", "need at least 2 points and one value per point"));
        }
        if grid[0] != 0.0 || *grid.last().unwrap() != 1.0 {
            return Err(invalid("grid", "grid must start at 0 and end at 1"));
        }
        if grid.windows(2).any(|w| w[0] >= w[1]) {
            return Err(invalid("grid", "grid must be strictly increasing"));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(invalid("values", "values must be finite"));
        }
        Ok(Self {
            grid,
            values,
            uniform: false,
        })
    }

    pub fn grid(&self) -> &[f64] {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.grid.len()
    }

    pub fn is_empty(&self) -> bool {
        self.grid.is_empty()
    }

    /// Same grid, new values.
    pub fn with_values(&self, values: Vec<f64>) -> Self {
        debug_assert_eq!(values.len(), self.grid.len());
        Self {
            grid: self.grid.clone(),
            values,
            uniform: self.uniform,
        }
    }

    pub fn map(&self, f: impl Fn(f64, f64) -> f64) -> Self {
        let values = self.grid.iter().zip(&self.values).map(|(x, v)| f(*x, *v)).collect();
        self.with_values(values)
    }

    pub fn sup_norm(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Rows `x,value` with a header line.
    pub fn to_csv(&self, header: &str) -> String {
        let mut out = format!("x,{header}\n");
        for (x, v) in self.grid.iter().zip(&self.values) {
            out.push_str(&format!("{},{}\n", fmt_f64(*x), fmt_f64(*v)));
        }
        out
    }

    #[inline]
    fn cell(&self, x: f64) -> usize {
        let n = self.grid.len();
        if self.uniform {
            ((x * (n - 1) as f64) as usize).min(n - 2)
        } else {
            self.grid.partition_point(|g| *g <= x).clamp(1, n - 1) - 1
        }
    }
}

impl Evaluate for GridFunction {
    #[inline]
    fn eval(&self, x: f64) -> f64 {
        let i = self.cell(x);
        let (x0, x1) = (self.grid[i], self.grid[i + 1]);
        let t = (x - x0) / (x1 - x0);
        self.values[i] + t * (self.values[i + 1] - self.values[i])
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OperatorParams {
    pub gamma: f64,
    pub p_a: f64,
    pub p_b: f64,
}

impl OperatorParams {
    pub fn new(gamma: f64, p_a: f64, p_b: f64) -> Result<Self> {
        check_open_unit("gamma", gamma)?;
        check_unit("p_a", p_a)?;
        check_unit("p_b", p_b)?;
        Ok(Self { gamma, p_a, p_b })
    }

    pub fn pi(&self) -> f64 {
        self.p_a - self.p_b
    }
}

/// P_γ f(x) = p_A x f(x + γ(1-x)) + p_B (1-x) f(x(1-γ)) + (1 - p_A x - p_B(1-x)) f(x).
#[inline]
pub fn p_gamma_at(f: &impl Evaluate, x: f64, p: &OperatorParams) -> f64 {
    let up = x + p.gamma * (1.0 - x);
    let down = x * (1.0 - p.gamma);
    let stay = 1.0 - p.p_a * x - p.p_b * (1.0 - x);
    p.p_a * x * f.eval(up) + p.p_b * (1.0 - x) * f.eval(down) + stay * f.eval(x)
}

/// Q_γ g(x) = (1-γ)(p_A y g(y) + p_B (1-z) g(z)) + (1 - p_A x - p_B(1-x)) g(x)
/// with y = x + γ(1-x) and z = x(1-γ).
#[inline]
pub fn q_gamma_at(g: &impl Evaluate, x: f64, p: &OperatorParams) -> f64 {
    let up = x + p.gamma * (1.0 - x);
    let down = x * (1.0 - p.gamma);
    let stay = 1.0 - p.p_a * x - p.p_b * (1.0 - x);
    (1.0 - p.gamma) * (p.p_a * up * g.eval(up) + p.p_b * (1.0 - down) * g.eval(down))
        + stay * g.eval(x)
}

pub fn p_gamma_apply(f: &GridFunction, p: &OperatorParams) -> GridFunction {
    let values = f.grid.iter().map(|x| p_gamma_at(f, *x, p)).collect();
    f.with_values(values)
}

pub fn q_gamma_apply(g: &GridFunction, p: &OperatorParams) -> GridFunction {
    let values = g.grid.iter().map(|x| q_gamma_at(g, *x, p)).collect();
    g.with_values(values)
}

/// Truncated Neumann series Σ_{n<terms} P_γ^n h on the grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NeumannSum {
    pub psi: GridFunction,
    pub terms: usize,
    /// sup-norm of P_γ^terms h, the first term left out.
    pub last_term: f64,
}

impl NeumannSum {
    pub fn at(&self, x: f64) -> f64 {
        self.psi.eval(x)
    }
}

/// ψ_γ = Σ_n P_γ^n h on a uniform grid, summed until a term's sup-norm falls
/// below `tol`.
pub fn psi_neumann_grid(
    p: &OperatorParams,
    grid_points: usize,
    depth: usize,
    tol: f64,
) -> Result<NeumannSum> {
    if p.pi() <= 0.0 {
        return Err(invalid("p_a", "ψ_γ needs p_A > p_B"));
    }
    let mut term = GridFunction::uniform(grid_points, h)?;
    let mut sum = vec![0.0; grid_points];
    for n in 0..depth {
        let last_term = term.sup_norm();
        if last_term < tol {
            return Ok(NeumannSum {
                psi: term.with_values(sum),
                terms: n,
                last_term,
            });
        }
        for (s, v) in sum.iter_mut().zip(&term.values) {
            *s += v;
        }
        term = p_gamma_apply(&term, p);
    }
    let last_term = term.sup_norm();
    if last_term < tol {
        return Ok(NeumannSum {
            psi: term.with_values(sum),
            terms: depth,
            last_term,
        });
    }
    Err(Error::NonConvergence {
        depth,
        tol,
        last_term,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NeumannValue {
    pub value: f64,
    pub terms: usize,
    pub last_term: f64,
}

/// ψ_γ(x) from [`psi_neumann_grid`].
pub fn psi_neumann(
    p: &OperatorParams,
    x: f64,
    depth: usize,
    grid_points: usize,
    tol: f64,
) -> Result<NeumannValue> {
    check_unit("x", x)?;
    let s = psi_neumann_grid(p, grid_points, depth, tol)?;
    Ok(NeumannValue {
        value: s.at(x),
        terms: s.terms,
        last_term: s.last_term,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    pub grid_points: usize,
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            grid_points: DEFAULT_GRID_POINTS,
            tol: DEFAULT_TOL,
            max_iter: DEFAULT_MAX_ITER,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AbsorptionSolution {
    pub gamma: f64,
    pub p_a: f64,
    pub p_b: f64,
    pub u: GridFunction,
    pub iterations: usize,
    pub residual: f64,
}

impl AbsorptionSolution {
    pub fn at(&self, x: f64) -> f64 {
        self.u.eval(x)
    }

    /// JSON convergence report (without the grid values).
    pub fn report_json(&self) -> String {
        serde_json::json!({
            "gamma": self.gamma,
            "p_a": self.p_a,
            "p_b": self.p_b,
            "grid_points": self.u.len(),
            "iterations": self.iterations,
            "residual": self.residual,
        })
        .to_string()
    }
}

/// Iterates u ← P_γ u from u(x) = x until the sup-norm change is at most
/// `tol`. The result is checked to be nondecreasing; a drop larger than
/// 10·tol is an error.
pub fn absorption_solve(p: &OperatorParams, cfg: &SolverConfig) -> Result<AbsorptionSolution> {
    if p.pi() <= 0.0 {
        return Err(invalid("p_a", "absorption solver expects p_A > p_B"));
    }
    if !(cfg.tol > 0.0) {
        return Err(invalid("tol", format!("{} must be positive", cfg.tol)));
    }
    let mut u = GridFunction::uniform(cfg.grid_points, |x: f64| x)?;
    let last = u.len() - 1;
    let mut residual = f64::INFINITY;
    let mut iterations = 0;
    let mut next = vec![0.0; u.len()];
    while iterations < cfg.max_iter {
        iterations += 1;
        residual = 0.0;
        for (i, slot) in next.iter_mut().enumerate() {
            let v = if i == 0 {
                0.0
            } else if i == last {
                1.0
            } else {
                p_gamma_at(&u, u.grid[i], p)
            };
            residual = f64::max(residual, (v - u.values[i]).abs());
            *slot = v;
        }
        std::mem::swap(&mut u.values, &mut next);
        if residual <= cfg.tol {
            break;
        }
    }
    if residual > cfg.tol {
        return Err(Error::MaxIterExceeded {
            max_iter: cfg.max_iter,
            tol: cfg.tol,
            residual,
        });
    }
    let allowed = 10.0 * cfg.tol;
    for i in 1..u.len() {
        let drop = u.values[i - 1] - u.values[i];
        if drop > allowed {
            return Err(Error::MonotonicityViolation {
                x: u.grid[i],
                drop,
                allowed,
            });
        }
    }
    Ok(AbsorptionSolution {
        gamma: p.gamma,
        p_a: p.p_a,
        p_b: p.p_b,
        u,
        iterations,
        residual,
    })
}
