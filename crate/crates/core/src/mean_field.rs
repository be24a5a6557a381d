//! The algorithm in average, x_{n+1} = x_n + π γ_{n+1} x_n (1 - x_n), its
//! ODE flow, and rate diagnostics for mean and random paths.

use serde::{Deserialize, Serialize};

use crate::bandit::Trajectory;
use crate::error::{check_unit, invalid, Error, Result};
use crate::numeric::{fmt_f64, CompensatedSum};
use crate::schedule::StepSchedule;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeanPath {
    pub x0: f64,
    pub pi: f64,
    /// x_0..x_N.
    pub values: Vec<f64>,
    /// 1 - x_n, carried by its own product recursion.
    pub one_minus: Vec<f64>,
    /// Γ_0..Γ_N.
    pub big_gamma: Vec<f64>,
    /// e^{πΓ_n} (1 - x_n).
    pub rate: Vec<f64>,
    /// (1 - x_0) exp(-π Σ_{k<=n} γ_k x_{k-1}).
    pub upper_chain: Vec<f64>,
    /// x_0 ∈ {0, 1}: the path is constant.
    pub boundary: bool,
}

/// Iterates the mean recursion for N steps.
pub fn mean_path(x0: f64, pi: f64, schedule: &StepSchedule, n: u64) -> Result<MeanPath> {
    check_unit("x0", x0)?;
    if !(pi.abs() <= 1.0) {
        return Err(invalid("pi", format!("|{pi}| > 1")));
    }
    schedule.check_horizon(n)?;
    let len = n as usize + 1;
    let mut values = Vec::with_capacity(len);
    let mut one_minus = Vec::with_capacity(len);
    let mut big_gamma = Vec::with_capacity(len);
    let mut upper_chain = Vec::with_capacity(len);
    let (mut x, mut y) = (x0, 1.0 - x0);
    let mut gam = CompensatedSum::new();
    let mut drift = CompensatedSum::new();
    values.push(x);
    one_minus.push(y);
    big_gamma.push(0.0);
    upper_chain.push(y);
    for g in schedule.gammas().take(n as usize) {
        drift += g * x;
        let step = pi * g * x * y;
        y *= 1.0 - pi * g * x;
        x += step;
        gam += g;
        values.push(x);
        one_minus.push(y);
        big_gamma.push(gam.value());
        upper_chain.push((1.0 - x0) * (-pi * drift.value()).exp());
    }
    let rate = one_minus
        .iter()
        .zip(&big_gamma)
        .map(|(y, g)| (pi * g).exp() * y)
        .collect();
    Ok(MeanPath {
        x0,
        pi,
        values,
        one_minus,
        big_gamma,
        rate,
        upper_chain,
        boundary: x0 == 0.0 || x0 == 1.0,
    })
}

impl MeanPath {
    /// (1 - x_0) e^{-π x_0 Γ_n}.
    pub fn upper_bound(&self, n: usize) -> f64 {
        (1.0 - self.x0) * (-self.pi * self.x0 * self.big_gamma[n]).exp()
    }

    /// (1 - x_0) exp((1/x_0 - 1) e^{π x_0}), the constant bounding the rate
    /// sequence from above when π > 0.
    pub fn rate_constant(&self) -> f64 {
        let x = self.x0;
        (1.0 - x) * ((1.0 / x - 1.0) * (self.pi * x).exp()).exp()
    }

    /// Rows `n,x,rate` with a header line.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("n,x,rate\n");
        for (i, (x, r)) in self.values.iter().zip(&self.rate).enumerate() {
            out.push_str(&format!("{i},{},{}\n", fmt_f64(*x), fmt_f64(*r)));
        }
        out
    }
}

/// (1 - x_0) ∏_{k<=n} (1 - π γ_k) for n = 0..N.
pub fn lower_bound_products(x0: f64, pi: f64, schedule: &StepSchedule, n: u64) -> Result<Vec<f64>> {
    schedule.check_horizon(n)?;
    let mut out = Vec::with_capacity(n as usize + 1);
    let mut p = 1.0 - x0;
    out.push(p);
    for g in schedule.gammas().take(n as usize) {
        p *= 1.0 - pi * g;
        out.push(p);
    }
    Ok(out)
}

/// Φ(x, t) = x / ((1 - x) e^{-πt} + x).
pub fn ode_flow(x: f64, t: f64, pi: f64) -> Result<f64> {
    check_unit("x", x)?;
    if !(t >= 0.0) {
        return Err(invalid("t", format!("{t} < 0")));
    }
    if x == 0.0 {
        return Ok(0.0);
    }
    Ok(x / ((1.0 - x) * (-pi * t).exp() + x))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RateBand {
    pub lo: f64,
    pub hi: f64,
    pub boundary: bool,
}

/// inf and sup of e^{πΓ_n}(1 - x_n) over n in 1..=N.
pub fn mean_rate_band(path: &MeanPath, schedule: &StepSchedule) -> Result<RateBand> {
    if !schedule.tail_sq_sum_ub(1)?.is_finite() {
        return Err(Error::NotApplicable(
            "rate band needs a square-summable schedule".into(),
        ));
    }
    if path.rate.len() < 2 {
        return Err(invalid("N", "path has no steps"));
    }
    let (lo, hi) = path.rate[1..]
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), r| (lo.min(*r), hi.max(*r)));
    Ok(RateBand {
        lo,
        hi,
        boundary: path.boundary,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathRate {
    pub n: Vec<u64>,
    /// e^{p_A Γ_n} (1 - X_n) at the sampled times.
    pub value: Vec<f64>,
    pub boundary: bool,
}

impl PathRate {
    /// (max - min) / max over the samples with n >= (1 - frac) N.
    pub fn late_variation(&self, frac: f64) -> f64 {
        let horizon = *self.n.last().unwrap_or(&0) as f64;
        let start = ((1.0 - frac) * horizon).ceil() as u64;
        let (lo, hi) = self
            .n
            .iter()
            .zip(&self.value)
            .filter(|(n, _)| **n >= start)
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), (_, v)| {
                (lo.min(*v), hi.max(*v))
            });
        if hi > 0.0 {
            (hi - lo) / hi
        } else {
            0.0
        }
    }
}

/// e^{p_A Γ_n}(1 - X_n) along a path still on the pure-ascent event.
pub fn path_rate_diagnostic(
    trajectory: &Trajectory,
    p_a: f64,
    schedule: &StepSchedule,
) -> Result<PathRate> {
    if !trajectory.flags.ascent_alive {
        return Err(Error::NotApplicable(
            "path left the pure-ascent event".into(),
        ));
    }
    let prefix = schedule.prefix(trajectory.horizon)?;
    let mut n = Vec::with_capacity(trajectory.samples.len());
    let mut value = Vec::with_capacity(trajectory.samples.len());
    for s in &trajectory.samples {
        n.push(s.n);
        value.push((p_a * prefix.big_gamma[s.n as usize]).exp() * s.one_minus_x);
    }
    Ok(PathRate {
        n,
        value,
        boundary: trajectory.params.x0 == 1.0,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mean_path_examples() {
        let s = StepSchedule::constant(0.1).unwrap();
        let p = mean_path(0.5, 0.2, &s, 1).unwrap();
        assert!((p.values[1] - 0.505).abs() < 1e-15);
        for x0 in [0.0, 1.0] {
            let p = mean_path(x0, 0.3, &s, 100).unwrap();
            assert!(p.values.iter().all(|v| *v == x0));
            assert!(p.boundary);
        }
    }

    #[test]
    fn mean_path_increases_toward_one() {
        let s = StepSchedule::power_i(1.0, 1.0).unwrap();
        let p = mean_path(0.3, 0.4, &s, 10_000).unwrap();
        assert!(p.values.windows(2).all(|w| w[0] < w[1] && w[1] < 1.0));
        for (x, y) in p.values.iter().zip(&p.one_minus) {
            assert!((x + y - 1.0).abs() < 1e-14);
        }
    }

    #[test]
    fn flow_examples() {
        for x in [0.0, 0.2, 0.5, 1.0] {
            assert_eq!(ode_flow(x, 0.0, 0.7).unwrap(), x);
            assert_eq!(ode_flow(1.0, 3.0 + x, 0.7).unwrap(), 1.0);
        }
        let v = ode_flow(0.5, 3f64.ln(), 1.0).unwrap();
        assert!((v - 0.75).abs() < 1e-15);
    }

    #[test]
    fn band_examples() {
        let s = StepSchedule::power_i(1.0, 1.0).unwrap();
        let b = mean_rate_band(&mean_path(0.5, 0.2, &s, 100_000).unwrap(), &s).unwrap();
        assert!(b.lo > 0.0 && b.hi.is_finite() && b.lo <= b.hi);

        let b = mean_rate_band(&mean_path(0.5, 0.0, &s, 1000).unwrap(), &s).unwrap();
        assert_eq!((b.lo, b.hi), (0.5, 0.5));

        let b = mean_rate_band(&mean_path(1.0, 0.2, &s, 1000).unwrap(), &s).unwrap();
        assert!(b.boundary && b.lo == 0.0 && b.hi == 0.0);

        let c = StepSchedule::constant(0.1).unwrap();
        assert!(mean_rate_band(&mean_path(0.5, 0.2, &c, 10).unwrap(), &c).is_err());
    }

    #[test]
    fn euler_iterates_track_flow() {
        let (pi, x0) = (0.2, 0.5);
        for gamma in [0.01, 0.001] {
            let n = ((1.0 / (gamma * gamma)) as u64).min(1_000_000);
            let coarse = mean_path(x0, pi, &StepSchedule::constant(gamma).unwrap(), n).unwrap();
            let fine_s = StepSchedule::constant(gamma / 10.0).unwrap();
            let fine = mean_path(x0, pi, &fine_s, (10 * n).min(10_000_000)).unwrap();
            for k in (0..=n as usize).step_by(97) {
                let flow = ode_flow(x0, gamma * k as f64, pi).unwrap();
                assert!((coarse.values[k] - flow).abs() <= 5.0 * gamma);
                if 10 * k < fine.values.len() {
                    // the finer scheme sits closer to the flow than the coarse one
                    assert!((fine.values[10 * k] - flow).abs() <= 5.0 * gamma / 10.0);
                }
            }
        }
    }

    #[test]
    fn csv_has_header_and_rows() {
        let s = StepSchedule::constant(0.1).unwrap();
        let csv = mean_path(0.5, 0.2, &s, 3).unwrap().to_csv();
        assert_eq!(csv.lines().count(), 5);
        assert!(csv.starts_with("n,x,rate\n0,"));
    }
}
