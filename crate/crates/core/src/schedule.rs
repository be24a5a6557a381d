//! Gain sequences γ_n, their partial sums and transforms, and the
//! fallibility classifiers for the parametrized step families.
//!
//! Steps are 1-indexed: `gamma(1)` is the gain used for the first update
//! X_0 -> X_1. Every supported family keeps each step strictly inside
//! (0, 1).
//!
//! The JSON form of a schedule is an object tagged by `kind`:
//!
//! ```json
//! {"kind": "constant", "gamma": 0.1}
//! {"kind": "power_i", "c": 1.0, "alpha": 1.0}
//! {"kind": "ratio_form", "c": 1.0, "alpha": 1.0, "p": 0.5}
//! {"kind": "custom", "values": [0.5, 0.25], "tail_sq_bound": 0.1}
//! ```

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::numeric::CompensatedSum;

/// Explicit prefix length summed before the analytic remainder kicks in
/// for ratio-form tail bounds.
pub const RATIO_TAIL_PREFIX: u64 = 1_000_000;

/// Relative inflation applied to numerically summed tails so rounding in
/// the summation cannot push the result below the true tail.
const TAIL_ROUNDING_SLACK: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum StepSchedule {
    /// γ_n = gamma.
    Constant { gamma: f64 },
    /// γ_n = (c / (n + c))^alpha.
    #[serde(rename = "power_i")]
    PowerI { c: f64, alpha: f64 },
    /// γ_n = Δ_n / S_n with Δ_0 = 1, Δ_1 = c and
    /// Δ_n = c · n^(1/p - 1) · (ln n)^alpha for n >= 2.
    RatioForm { c: f64, alpha: f64, p: f64 },
    /// Tabulated steps γ_1..γ_len, with an optional user-certified bound
    /// on Σ_{k > len} γ_k² (absent means the tail is not known to be finite).
    Custom {
        values: Vec<f64>,
        #[serde(default)]
        tail_sq_bound: Option<f64>,
    },
}

/// Outcome of the fallibility classifiers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Fallibility {
    /// P_x(X_∞ = 0) > 0 for x in (0, 1).
    Fallible,
    /// P_x(X_∞ = 0) = 0 for every x in (0, 1].
    Infallible,
    /// Outside the families with an exact criterion.
    Unknown,
}

impl fmt::Display for Fallibility {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Fallibility::Fallible => "Fallible",
            Fallibility::Infallible => "Infallible",
            Fallibility::Unknown => "Unknown",
        };
        f.write_str(s)
    }
}

impl fmt::Display for StepSchedule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            StepSchedule::Constant { gamma } => write!(f, "constant(gamma={gamma})"),
            StepSchedule::PowerI { c, alpha } => write!(f, "power_i(c={c},alpha={alpha})"),
            StepSchedule::RatioForm { c, alpha, p } => {
                write!(f, "ratio_form(c={c},alpha={alpha},p={p})")
            }
            StepSchedule::Custom {
                values,
                tail_sq_bound,
            } => match tail_sq_bound {
                Some(t) => write!(f, "custom(len={},tail_sq_bound={t})", values.len()),
                None => write!(f, "custom(len={})", values.len()),
            },
        }
    }
}

/// Parses either the JSON form or a shorthand `constant:γ`,
/// `power_i:C,α`, `ratio_form:C,α,p`.
impl FromStr for StepSchedule {
    type Err = Error;

    fn from_str(text: &str) -> Result<Self> {
        let text = text.trim();
        if text.starts_with('{') {
            return Self::from_json(text);
        }
        let (kind, args) = text.split_once(':').unwrap_or((text, ""));
        let nums = args
            .split(',')
            .filter(|a| !a.trim().is_empty())
            .map(|a| {
                a.trim()
                    .parse::<f64>()
                    .map_err(|_| Error::Parse(format!("bad number {a:?} in schedule {text:?}")))
            })
            .collect::<Result<Vec<f64>>>()?;
        match (kind.trim(), nums.as_slice()) {
            ("constant", [g]) => Self::constant(*g),
            ("power_i", [c, a]) => Self::power_i(*c, *a),
            ("ratio_form", [c, a, p]) => Self::ratio_form(*c, *a, *p),
            _ => Err(Error::Parse(format!(
                "unknown schedule {text:?}; expected constant:γ, power_i:C,α or ratio_form:C,α,p"
            ))),
        }
    }
}

impl StepSchedule {
    pub fn constant(gamma: f64) -> Result<Self> {
        let s = StepSchedule::Constant { gamma };
        s.validate()?;
        Ok(s)
    }

    pub fn power_i(c: f64, alpha: f64) -> Result<Self> {
        let s = StepSchedule::PowerI { c, alpha };
        s.validate()?;
        Ok(s)
    }

    pub fn ratio_form(c: f64, alpha: f64, p: f64) -> Result<Self> {
        let s = StepSchedule::RatioForm { c, alpha, p };
        s.validate()?;
        Ok(s)
    }

    pub fn custom(values: Vec<f64>, tail_sq_bound: Option<f64>) -> Result<Self> {
        let s = StepSchedule::Custom {
            values,
            tail_sq_bound,
        };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            StepSchedule::Constant { gamma } => {
                if !(*gamma > 0.0 && *gamma < 1.0) {
                    return Err(invalid("gamma", format!("{gamma} is outside (0, 1)")));
                }
            }
            StepSchedule::PowerI { c, alpha } => {
                if !(c.is_finite() && *c > 0.0) {
                    return Err(invalid("c", format!("{c} must be positive and finite")));
                }
                if !(*alpha > 0.0 && *alpha <= 1.0) {
                    return Err(invalid("alpha", format!("{alpha} is outside (0, 1]")));
                }
            }
            StepSchedule::RatioForm { c, alpha, p } => {
                if !(c.is_finite() && *c > 0.0) {
                    return Err(invalid("c", format!("{c} must be positive and finite")));
                }
                if !(alpha.is_finite() && *alpha > 0.0) {
                    return Err(invalid("alpha", format!("{alpha} must be positive and finite")));
                }
                if !(*p > 0.0 && *p <= 1.0) {
                    return Err(invalid("p", format!("{p} is outside (0, 1]")));
                }
            }
            StepSchedule::Custom {
                values,
                tail_sq_bound,
            } => {
                if values.is_empty() {
                    return Err(invalid("values", "custom schedule needs at least one step"));
                }
                if let Some((i, v)) = values
                    .iter()
                    .enumerate()
                    .find(|(_, v)| !(**v > 0.0 && **v < 1.0))
                {
                    return Err(invalid(
                        "values",
                        format!("step {} = {v} is outside (0, 1)", i + 1),
                    ));
                }
                if let Some(t) = tail_sq_bound {
                    if !(t.is_finite() && *t >= 0.0) {
                        return Err(invalid("tail_sq_bound", format!("{t} must be finite and >= 0")));
                    }
                }
            }
        }
        Ok(())
    }

    /// Parses and validates the JSON form.
    pub fn from_json(text: &str) -> Result<Self> {
        let s: StepSchedule =
            serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
        s.validate()?;
        Ok(s)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("schedule serializes")
    }

    /// Number of available steps, `None` for unbounded families.
    pub fn len(&self) -> Option<usize> {
        match self {
            StepSchedule::Custom { values, .. } => Some(values.len()),
            _ => None,
        }
    }

    /// Checks that steps 1..=n exist.
    pub fn check_horizon(&self, n: u64) -> Result<()> {
        match self.len() {
            Some(len) if n > len as u64 => Err(Error::BeyondTable { index: n, len }),
            _ => Ok(()),
        }
    }

    /// The gain γ_n. Ratio-form steps depend on the running sum S_n, so this
    /// is O(n) for that family; use [`StepSchedule::gammas`] to walk a prefix.
    pub fn gamma(&self, n: u64) -> Result<f64> {
        if n == 0 {
            return Err(Error::ZeroIndex(0));
        }
        match self {
            StepSchedule::Constant { gamma } => Ok(*gamma),
            StepSchedule::PowerI { c, alpha } => Ok(power_i_step(*c, *alpha, n)),
            StepSchedule::RatioForm { .. } => Ok(self
                .gammas()
                .nth((n - 1) as usize)
                .expect("ratio-form schedule is unbounded")),
            StepSchedule::Custom { values, .. } => {
                values
                    .get((n - 1) as usize)
                    .copied()
                    .ok_or(Error::BeyondTable {
                        index: n,
                        len: values.len(),
                    })
            }
        }
    }

    /// Iterator over γ_1, γ_2, ... (finite only for custom tables).
    pub fn gammas(&self) -> Gammas<'_> {
        Gammas {
            schedule: self,
            n: 0,
            s_prev: 1.0,
        }
    }

    /// Γ_n = γ_1 + ... + γ_n, compensated.
    pub fn big_gamma(&self, n: u64) -> Result<f64> {
        if let StepSchedule::Constant { gamma } = self {
            return Ok(*gamma * n as f64);
        }
        self.check_horizon(n)?;
        Ok(self
            .gammas()
            .take(n as usize)
            .collect::<CompensatedSum>()
            .value())
    }

    /// Steps γ_1..γ_n and partial sums Γ_0..Γ_n in one pass.
    pub fn prefix(&self, n: u64) -> Result<StepPrefix> {
        self.check_horizon(n)?;
        let mut gamma = Vec::with_capacity(n as usize + 1);
        let mut big_gamma = Vec::with_capacity(n as usize + 1);
        gamma.push(f64::NAN);
        big_gamma.push(0.0);
        let mut acc = CompensatedSum::new();
        for g in self.gammas().take(n as usize) {
            acc += g;
            gamma.push(g);
            big_gamma.push(acc.value());
        }
        Ok(StepPrefix { gamma, big_gamma })
    }

    /// (Δ_n, S_n) with Δ_0 = S_0 = 1, Δ_n = γ_n / ∏_{k<=n}(1 - γ_k) and
    /// S_n = Δ_0 + ... + Δ_n.
    pub fn delta_s(&self, n: u64) -> Result<(f64, f64)> {
        self.check_horizon(n)?;
        let mut last = (1.0, 1.0);
        for item in self.delta_s_iter().take(n as usize) {
            last = item?;
        }
        Ok(last)
    }

    /// Iterator over (Δ_n, S_n) for n = 1, 2, ...
    ///
    /// Uses S_n = S_{n-1} / (1 - γ_n) and Δ_n = S_{n-1} γ_n / (1 - γ_n); the
    /// product form of the denominator underflows long before S_n overflows.
    pub fn delta_s_iter(&self) -> impl Iterator<Item = Result<(f64, f64)>> + '_ {
        let mut s_prev = 1.0f64;
        let mut failed = false;
        self.gammas().enumerate().map_while(move |(i, g)| {
            if failed {
                return None;
            }
            let q = 1.0 - g;
            let delta = s_prev * g / q;
            let s = s_prev / q;
            if !s.is_finite() || !delta.is_finite() {
                failed = true;
                return Some(Err(Error::Overflow { n: i as u64 + 1 }));
            }
            s_prev = s;
            Some(Ok((delta, s)))
        })
    }

    /// Whether Σ γ_n² < ∞ for this schedule.
    pub fn is_square_summable(&self) -> bool {
        match self {
            StepSchedule::Constant { .. } => false,
            StepSchedule::PowerI { alpha, .. } => *alpha > 0.5,
            StepSchedule::RatioForm { .. } => true,
            StepSchedule::Custom { tail_sq_bound, .. } => tail_sq_bound.is_some(),
        }
    }

    /// Certified upper bound on Σ_{k>=n} γ_{k+1}², or `f64::INFINITY` when
    /// the series diverges (or is not known to converge).
    pub fn tail_sq_sum_ub(&self, n: u64) -> Result<f64> {
        if n == 0 {
            return Err(Error::ZeroIndex(0));
        }
        match self {
            StepSchedule::Constant { .. } => Ok(f64::INFINITY),
            StepSchedule::PowerI { c, alpha } => Ok(power_i_tail(*c, *alpha, n)),
            StepSchedule::RatioForm { alpha, p, .. } => {
                let k_max = n + RATIO_TAIL_PREFIX;
                let mut acc = CompensatedSum::new();
                for (i, g) in self.gammas().take(k_max as usize).enumerate() {
                    if i as u64 + 1 > n {
                        acc += g * g;
                    }
                }
                let total = acc.value() + ratio_remainder(*alpha, *p, k_max);
                Ok(total * (1.0 + TAIL_ROUNDING_SLACK))
            }
            StepSchedule::Custom {
                values,
                tail_sq_bound,
            } => {
                let Some(rest) = tail_sq_bound else {
                    return Ok(f64::INFINITY);
                };
                let explicit: CompensatedSum = values
                    .iter()
                    .skip(n as usize)
                    .map(|g| g * g)
                    .collect();
                Ok((explicit.value() + rest) * (1.0 + TAIL_ROUNDING_SLACK))
            }
        }
    }

    /// `tail_sq_sum_ub(n)` for every n in 1..=horizon, computed in one pass.
    /// Entry 0 holds the bound on the full sum Σ_{k>=1} γ_k².
    pub fn tail_sq_table(&self, horizon: u64) -> Result<Vec<f64>> {
        let len = horizon as usize + 1;
        match self {
            StepSchedule::Constant { .. } => Ok(vec![f64::INFINITY; len]),
            StepSchedule::PowerI { c, alpha } => {
                let mut out: Vec<f64> = (0..=horizon)
                    .map(|n| if n == 0 { 0.0 } else { power_i_tail(*c, *alpha, n) })
                    .collect();
                out[0] = if len > 1 {
                    out[1] + power_i_step(*c, *alpha, 1).powi(2)
                } else {
                    power_i_tail(*c, *alpha, 1) + power_i_step(*c, *alpha, 1).powi(2)
                };
                Ok(out)
            }
            StepSchedule::RatioForm { alpha, p, .. } => {
                let k_max = horizon + RATIO_TAIL_PREFIX;
                let sq: Vec<f64> = self.gammas().take(k_max as usize).map(|g| g * g).collect();
                Ok(suffix_bounds(&sq, ratio_remainder(*alpha, *p, k_max), len))
            }
            StepSchedule::Custom {
                values,
                tail_sq_bound,
            } => match tail_sq_bound {
                None => Ok(vec![f64::INFINITY; len]),
                Some(rest) => {
                    let sq: Vec<f64> = values.iter().map(|g| g * g).collect();
                    Ok(suffix_bounds(&sq, *rest, len))
                }
            },
        }
    }

    /// Fallibility class for this schedule when arm B succeeds with
    /// probability `p_b`.
    pub fn classify(&self, p_b: f64) -> Result<Fallibility> {
        check_pb(p_b)?;
        match self {
            StepSchedule::Constant { .. } => Ok(Fallibility::Fallible),
            StepSchedule::PowerI { c, alpha } => classify_power_i(*c, *alpha, p_b),
            StepSchedule::RatioForm { alpha, p, .. } if *p == p_b => {
                classify_power_iii(*alpha, p_b)
            }
            StepSchedule::RatioForm { .. } | StepSchedule::Custom { .. } => {
                Ok(Fallibility::Unknown)
            }
        }
    }

    /// Finite-prefix probes of the fallibility and infallibility conditions.
    /// Asymptotic conditions cannot be decided from a prefix, so the report
    /// is always flagged heuristic.
    pub fn diagnostics_fallibility(&self, p_b: f64, n_max: u64) -> Result<FallibilityDiagnostics> {
        if n_max < 10 {
            return Err(invalid("n_max", format!("{n_max} < 10")));
        }
        crate::error::check_unit("p_b", p_b)?;
        self.check_horizon(n_max)?;
        let checkpoints = checkpoints(n_max);
        let mut next = checkpoints.iter().copied().peekable();
        let mut points = Vec::with_capacity(checkpoints.len());

        let mut product = 1.0f64;
        let mut partial = CompensatedSum::new();
        partial += 1.0; // n = 0 term, empty product
        let mut big_gamma = CompensatedSum::new();
        let mut ratio_sup = 0.0f64;
        for (i, g) in self.gammas().take(n_max as usize).enumerate() {
            let n = i as u64 + 1;
            product *= 1.0 - p_b * g;
            partial += product;
            big_gamma += g;
            let gam = big_gamma.value();
            let ratio = g / (gam * (-p_b * gam).exp());
            ratio_sup = ratio_sup.max(ratio);
            if next.peek() == Some(&n) {
                next.next();
                points.push(DiagnosticPoint {
                    n,
                    product_partial_sum: partial.value(),
                    ratio_sup,
                });
            }
        }
        Ok(FallibilityDiagnostics {
            heuristic: true,
            p_b,
            points,
        })
    }
}

/// Steps and partial sums for a prefix; index 0 of `gamma` is unused.
#[derive(Debug, Clone)]
pub struct StepPrefix {
    pub gamma: Vec<f64>,
    pub big_gamma: Vec<f64>,
}

impl StepPrefix {
    pub fn horizon(&self) -> u64 {
        (self.gamma.len() - 1) as u64
    }
}

pub struct Gammas<'a> {
    schedule: &'a StepSchedule,
    n: u64,
    s_prev: f64,
}

impl Iterator for Gammas<'_> {
    type Item = f64;

    #[inline]
    fn next(&mut self) -> Option<f64> {
        self.n += 1;
        let n = self.n;
        match self.schedule {
            StepSchedule::Constant { gamma } => Some(*gamma),
            StepSchedule::PowerI { c, alpha } => Some(power_i_step(*c, *alpha, n)),
            StepSchedule::RatioForm { c, alpha, p } => {
                let delta = ratio_delta(*c, *alpha, *p, n);
                let s = self.s_prev + delta;
                self.s_prev = s;
                Some(delta / s)
            }
            StepSchedule::Custom { values, .. } => values.get((n - 1) as usize).copied(),
        }
    }
}

/// Report of [`StepSchedule::diagnostics_fallibility`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FallibilityDiagnostics {
    pub heuristic: bool,
    pub p_b: f64,
    pub points: Vec<DiagnosticPoint>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticPoint {
    pub n: u64,
    /// Σ_{j=0}^n ∏_{k<=j} (1 - p_B γ_k).
    pub product_partial_sum: f64,
    /// max_{k<=n} γ_k / (Γ_k e^{-p_B Γ_k}).
    pub ratio_sup: f64,
}

/// Exact classifier for γ_n = (C/(n+C))^α.
pub fn classify_power_i(c: f64, alpha: f64, p_b: f64) -> Result<Fallibility> {
    check_pb(p_b)?;
    StepSchedule::PowerI { c, alpha }.validate()?;
    if alpha == 1.0 && c <= 1.0 / p_b {
        Ok(Fallibility::Infallible)
    } else {
        Ok(Fallibility::Fallible)
    }
}

/// Exact classifier for the ratio-form family with p = p_B.
pub fn classify_power_iii(alpha: f64, p_b: f64) -> Result<Fallibility> {
    check_pb(p_b)?;
    if !(alpha.is_finite() && alpha > 0.0) {
        return Err(invalid("alpha", format!("{alpha} must be positive and finite")));
    }
    if alpha <= 1.0 / p_b {
        Ok(Fallibility::Infallible)
    } else {
        Ok(Fallibility::Fallible)
    }
}

fn check_pb(p_b: f64) -> Result<()> {
    if p_b > 0.0 && p_b <= 1.0 {
        Ok(())
    } else {
        Err(invalid("p_b", format!("{p_b} is outside (0, 1]")))
    }
}

#[inline]
fn power_i_step(c: f64, alpha: f64, n: u64) -> f64 {
    let base = c / (n as f64 + c);
    if alpha == 1.0 {
        base
    } else if alpha == 0.5 {
        base.sqrt()
    } else {
        base.powf(alpha)
    }
}

/// C^{2α} / ((2α - 1)(n + C - 1)^{2α - 1}) for α > 1/2, else ∞.
fn power_i_tail(c: f64, alpha: f64, n: u64) -> f64 {
    if alpha <= 0.5 {
        return f64::INFINITY;
    }
    let e = 2.0 * alpha - 1.0;
    c.powf(2.0 * alpha) / (e * (n as f64 + c - 1.0).powf(e))
}

#[inline]
fn ratio_delta(c: f64, alpha: f64, p: f64, n: u64) -> f64 {
    if n == 1 {
        return c;
    }
    let nf = n as f64;
    let beta = 1.0 / p - 1.0;
    let power = if beta == 0.0 { 1.0 } else { nf.powf(beta) };
    c * power * nf.ln().powf(alpha)
}

/// Upper bound on Σ_{k>K} γ_k² for the ratio form.
///
/// Δ(s) = c s^β (ln s)^α is increasing, so S_k >= ∫_{√k}^k Δ(s) ds, which
/// gives γ_k <= 2^α (β + 1) / (k (1 - k^{-(β+1)/2})) and hence the tail is
/// at most c_K² / K with c_K the same constant evaluated at K.
fn ratio_remainder(alpha: f64, p: f64, k: u64) -> f64 {
    let beta = 1.0 / p - 1.0;
    let kf = k as f64;
    let c_k = 2f64.powf(alpha) * (beta + 1.0) / (1.0 - kf.powf(-(beta + 1.0) / 2.0));
    c_k * c_k / kf
}

/// Given squared steps γ_1²..γ_K² (0-indexed) and a bound on the remainder
/// beyond K, returns bounds on Σ_{k>n} γ_k² for n = 0..len.
fn suffix_bounds(sq: &[f64], remainder: f64, len: usize) -> Vec<f64> {
    let k = sq.len();
    let mut suffix = vec![0.0; k + 1];
    let mut acc = CompensatedSum::new();
    for i in (0..k).rev() {
        acc += sq[i];
        suffix[i] = acc.value();
    }
    (0..len)
        .map(|n| {
            let explicit = if n < k { suffix[n] } else { 0.0 };
            (explicit + remainder) * (1.0 + TAIL_ROUNDING_SLACK)
        })
        .collect()
}

/// 1, 2, 5, 10, 20, 50, ... up to n_max, always ending at n_max.
fn checkpoints(n_max: u64) -> Vec<u64> {
    let mut out = Vec::new();
    let mut decade = 1u64;
    'outer: loop {
        for m in [1, 2, 5] {
            let v = decade.saturating_mul(m);
            if v >= n_max {
                break 'outer;
            }
            out.push(v);
        }
        decade = decade.saturating_mul(10);
    }
    out.push(n_max);
    out
}
