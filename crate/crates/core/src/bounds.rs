//! Closed-form bounds and limit laws.

use serde::{Deserialize, Serialize};

use crate::error::{check_open_unit, check_unit, invalid, Error, Result};
use crate::schedule::StepSchedule;

/// Cap on explicit factors in an infinite product.
pub const MAX_PRODUCT_TERMS: u64 = 10_000_000;

/// Factors closer to 1 than this end an infinite product.
const FACTOR_TOL: f64 = 1e-15;

/// Prefix over which Δ_n is checked to be nonincreasing.
const DELTA_CHECK_PREFIX: u64 = 1000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Direction {
    LowerBoundsFailure,
    LowerBoundsSuccess,
    UpperBoundsMoment,
    ExactIdentity,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    pub name: String,
    pub inputs: serde_json::Value,
    pub value: f64,
    pub direction: Direction,
}

impl BoundReport {
    pub fn new(name: &str, inputs: serde_json::Value, value: f64, direction: Direction) -> Self {
        Self {
            name: name.to_string(),
            inputs,
            value,
            direction,
        }
    }
}

/// (1 - x)^{1/(p_B γ)}: lower bound on the probability of ending at 0 with
/// a constant step γ.
pub fn failure_lb_constant(x: f64, p_b: f64, gamma: f64) -> Result<f64> {
    check_unit("x", x)?;
    if !(p_b > 0.0 && p_b <= 1.0) {
        return Err(invalid("p_b", format!("{p_b} is outside (0, 1]")));
    }
    check_open_unit("gamma", gamma)?;
    Ok((1.0 - x).powf(1.0 / (p_b * gamma)))
}

/// max(0, 1 - (2 p_A γ / (π (1-γ)²)) (1/x - 1)): lower bound on the
/// probability of ending at 1 with a constant step γ.
pub fn success_lb_theorem2(x: f64, p_a: f64, p_b: f64, gamma: f64) -> Result<f64> {
    if !(x > 0.0 && x <= 1.0) {
        return Err(invalid("x", format!("{x} is outside (0, 1]")));
    }
    check_unit("p_a", p_a)?;
    check_unit("p_b", p_b)?;
    if p_a <= p_b {
        return Err(invalid("p_a", format!("need p_A > p_B, got {p_a} <= {p_b}")));
    }
    check_open_unit("gamma", gamma)?;
    let pi = p_a - p_b;
    let c = 2.0 * p_a * gamma / (pi * (1.0 - gamma) * (1.0 - gamma));
    Ok((1.0 - c * (1.0 / x - 1.0)).max(0.0))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Horizon {
    Finite(u64),
    Limit,
}

/// A value together with an interval certified to contain the exact result.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Certified {
    pub value: f64,
    pub lo: f64,
    pub hi: f64,
    pub terms: u64,
}

/// x(1-x) ∏_{k<=n} (1 - p_A γ_k²), the mean of X_n(1 - X_n) when p_A = p_B.
pub fn interior_mass_formula(x: f64, p_a: f64, schedule: &StepSchedule, n: Horizon) -> Result<f64> {
    Ok(interior_mass_certified(x, p_a, schedule, n)?.value)
}

/// [`interior_mass_formula`] with an enclosure of the truncated tail.
///
/// At the limit the product stops once a factor is within 1e-15 of 1 or
/// after 10^7 factors. The remaining factors multiply to some R with
/// -ln R <= p_A T / (1 - p_A T), where T bounds the tail of squared steps.
pub fn interior_mass_certified(
    x: f64,
    p_a: f64,
    schedule: &StepSchedule,
    n: Horizon,
) -> Result<Certified> {
    check_unit("x", x)?;
    check_unit("p_a", p_a)?;
    let base = x * (1.0 - x);
    match n {
        Horizon::Finite(n) => {
            schedule.check_horizon(n)?;
            let value = base * product(schedule, p_a, n);
            Ok(Certified {
                value,
                lo: value,
                hi: value,
                terms: n,
            })
        }
        Horizon::Limit => {
            if !schedule.is_square_summable() {
                return Ok(Certified {
                    value: 0.0,
                    lo: 0.0,
                    hi: 0.0,
                    terms: 0,
                });
            }
            let cap = match schedule.len() {
                Some(len) => (len as u64).min(MAX_PRODUCT_TERMS),
                None => MAX_PRODUCT_TERMS,
            };
            let mut p = 1.0f64;
            let mut terms = 0u64;
            for g in schedule.gammas().take(cap as usize) {
                let a = p_a * g * g;
                p *= 1.0 - a;
                terms += 1;
                if a < FACTOR_TOL {
                    break;
                }
            }
            let tail = p_a * schedule.tail_sq_sum_ub(terms.max(1))?;
            let floor = if tail < 1.0 {
                (-tail / (1.0 - tail)).exp()
            } else {
                0.0
            };
            let value = base * p;
            Ok(Certified {
                value,
                lo: value * floor,
                hi: value,
                terms,
            })
        }
    }
}

fn product(schedule: &StepSchedule, p_a: f64, n: u64) -> f64 {
    schedule
        .gammas()
        .take(n as usize)
        .fold(1.0, |p, g| p * (1.0 - p_a * g * g))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum MomentSide {
    /// Bound on E[X_∞^{m+1}].
    XInfinity,
    /// Bound on E[(1 - X_∞)^{m+1}].
    OneMinusXInfinity,
}

/// ∏_{k=0}^m (1 - c / S_k) with c = 1 - x for [`MomentSide::XInfinity`]
/// and c = x for the other side. Requires (Δ_n)_{n>=1} nonincreasing, which
/// is checked over the first max(m + 1, 1000) terms.
pub fn moment_ub(x: f64, schedule: &StepSchedule, m: u32, which: MomentSide) -> Result<f64> {
    check_unit("x", x)?;
    let prefix = (m as u64 + 1).max(DELTA_CHECK_PREFIX);
    let prefix = schedule.len().map_or(prefix, |len| prefix.min(len as u64));
    if !delta_nonincreasing(schedule, prefix)? {
        return Err(Error::NotApplicable(format!(
            "Δ_n increases within the first {prefix} terms"
        )));
    }
    schedule.check_horizon(m as u64)?;
    let c = match which {
        MomentSide::XInfinity => 1.0 - x,
        MomentSide::OneMinusXInfinity => x,
    };
    let mut p = 1.0 - c;
    for item in schedule.delta_s_iter().take(m as usize) {
        let (_, s) = item?;
        p *= 1.0 - c / s;
    }
    Ok(p)
}

/// Whether Δ_{k+1} <= Δ_k (up to 1e-12 relative) for 1 <= k < n.
pub fn delta_nonincreasing(schedule: &StepSchedule, n: u64) -> Result<bool> {
    let mut prev: Option<f64> = None;
    for item in schedule.delta_s_iter().take(n as usize) {
        let (d, _) = match item {
            Ok(v) => v,
            // S_n only overflows when Δ_n grows without bound
            Err(Error::Overflow { .. }) => return Ok(false),
            Err(e) => return Err(e),
        };
        if let Some(p) = prev {
            if d > p * (1.0 + 1e-12) {
                return Ok(false);
            }
        }
        prev = Some(d);
    }
    Ok(true)
}

/// E[X_∞^{m+1}] = ∏_{k=0}^m (x/Δ + k) / (1/Δ + k) for the Beta(x/Δ, (1-x)/Δ)
/// limit of a constant-Δ schedule.
pub fn beta_limit_moment(x: f64, delta: f64, m: u32) -> Result<f64> {
    check_unit("x", x)?;
    if !(delta.is_finite() && delta > 0.0) {
        return Err(invalid("delta", format!("{delta} must be positive and finite")));
    }
    let a = x / delta;
    let t = 1.0 / delta;
    Ok((0..=m).fold(1.0, |p, k| p * (a + k as f64) / (t + k as f64)))
}
