//! Online stopping rule: stop once the conditional probability of ending at
//! the wrong equilibrium is provably below ε.
//!
//! Given X_n and T_n >= Σ_{k>=n} γ_{k+1}², that probability is at most
//!
//! ```text
//! max( min((1-X_n)/X_n, T_n/X_n), min(X_n/(1-X_n), T_n/(1-X_n)) )
//! ```
//!
//! whatever p_A != p_B are, so the monitor only needs the path and the
//! schedule.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bandit::{BanditParams, BanditState};
use crate::error::{invalid, Error, Result};
use crate::noise::DriverNoise;
use crate::schedule::StepSchedule;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Target {
    /// The path is declared to converge to 1.
    ArmA,
    /// The path is declared to converge to 0.
    ArmB,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StoppingCertificate {
    pub n: u64,
    pub x_n: f64,
    pub bound: f64,
    pub target: Target,
    pub epsilon: f64,
    pub tail_sq_used: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum MonitorOutcome {
    Certified(StoppingCertificate),
    RanOut { horizon: u64, last_bound: f64 },
}

impl MonitorOutcome {
    pub fn certificate(&self) -> Option<&StoppingCertificate> {
        match self {
            MonitorOutcome::Certified(c) => Some(c),
            MonitorOutcome::RanOut { .. } => None,
        }
    }
}

/// The bound above for x_n in (0, 1), clamped to [0, 1].
pub fn error_bound(x_n: f64, tail_sq: f64) -> Result<f64> {
    if !(x_n > 0.0 && x_n < 1.0) {
        return Err(invalid("x_n", format!("{x_n} is outside (0, 1)")));
    }
    check_tail(tail_sq)?;
    Ok(bound_xy(x_n, 1.0 - x_n, tail_sq))
}

fn check_tail(tail_sq: f64) -> Result<()> {
    if tail_sq.is_infinite() {
        return Err(Error::InapplicableSchedule);
    }
    if !(tail_sq >= 0.0) {
        return Err(invalid("tail_sq", format!("{tail_sq} must be >= 0")));
    }
    Ok(())
}

#[inline]
fn bound_xy(x: f64, y: f64, t: f64) -> f64 {
    let near_one = f64::min(y / x, t / x);
    let near_zero = f64::min(x / y, t / y);
    near_one.max(near_zero).clamp(0.0, 1.0)
}

/// A stopping rule at level ε with the schedule's tail bounds tabulated up
/// to a horizon.
#[derive(Debug, Clone)]
pub struct StopRule {
    epsilon: f64,
    tails: Vec<f64>,
}

impl StopRule {
    pub fn new(schedule: &StepSchedule, epsilon: f64, horizon: u64) -> Result<Self> {
        if !(epsilon > 0.0 && epsilon <= 1.0) {
            return Err(invalid("epsilon", format!("{epsilon} is outside (0, 1]")));
        }
        if !schedule.is_square_summable() || !schedule.tail_sq_sum_ub(1)?.is_finite() {
            return Err(Error::InapplicableSchedule);
        }
        Ok(Self {
            epsilon,
            tails: schedule.tail_sq_table(horizon)?,
        })
    }

    pub fn horizon(&self) -> u64 {
        (self.tails.len() - 1) as u64
    }

    /// Checks the state (x, 1 - x) = (x, y) at time n >= 1.
    #[inline]
    pub fn check(&self, n: u64, x: f64, y: f64) -> (f64, Option<StoppingCertificate>) {
        let t = self.tails[n as usize];
        let bound = if x == 0.0 || y == 0.0 {
            0.0
        } else {
            bound_xy(x, y, t)
        };
        if bound <= self.epsilon {
            let cert = StoppingCertificate {
                n,
                x_n: x,
                bound,
                target: if x > 0.5 { Target::ArmA } else { Target::ArmB },
                epsilon: self.epsilon,
                tail_sq_used: t,
            };
            (bound, Some(cert))
        } else {
            (bound, None)
        }
    }

    /// Runs the rule along a recorded path of (n, X_n); n = 0 is skipped.
    pub fn run(&self, path: &[(u64, f64)]) -> Result<MonitorOutcome> {
        let mut last_bound = 1.0;
        for &(n, x) in path {
            if n == 0 {
                continue;
            }
            if n > self.horizon() {
                return Err(invalid("n", format!("{n} is beyond the tabulated horizon")));
            }
            if !(0.0..=1.0).contains(&x) {
                return Err(invalid("x", format!("{x} is outside [0, 1] at n = {n}")));
            }
            let (b, cert) = self.check(n, x, 1.0 - x);
            if let Some(c) = cert {
                return Ok(MonitorOutcome::Certified(c));
            }
            last_bound = b;
        }
        Ok(MonitorOutcome::RanOut {
            horizon: path.last().map_or(0, |p| p.0),
            last_bound,
        })
    }

    /// Simulates path `stream` of the batch keyed by `seed` and stops at
    /// the first certificate.
    pub fn run_simulated(
        &self,
        params: &BanditParams,
        schedule: &StepSchedule,
        seed: u64,
        stream: u64,
    ) -> Result<MonitorOutcome> {
        params.validate()?;
        let horizon = self.horizon();
        let mut noise = DriverNoise::for_path(seed, stream);
        let mut s = BanditState::new(params.x0);
        let mut last_bound = 1.0;
        for (n, g) in (1..=horizon).zip(schedule.gammas()) {
            let (u, v) = noise.pair();
            s.advance(u, v, params.p_a, params.p_b, g);
            let (b, cert) = self.check(n, s.x, s.y);
            if let Some(c) = cert {
                return Ok(MonitorOutcome::Certified(c));
            }
            last_bound = b;
        }
        s.check(horizon)?;
        Ok(MonitorOutcome::RanOut {
            horizon,
            last_bound,
        })
    }
}

/// Runs the rule over a recorded path whose last time is the horizon.
pub fn monitor(path: &[(u64, f64)], schedule: &StepSchedule, epsilon: f64) -> Result<MonitorOutcome> {
    let horizon = path.iter().map(|p| p.0).max().unwrap_or(0).max(1);
    StopRule::new(schedule, epsilon, horizon)?.run(path)
}

/// Simulates one path with the rule attached.
pub fn monitor_simulated(
    params: &BanditParams,
    schedule: &StepSchedule,
    horizon: u64,
    seed: u64,
    epsilon: f64,
) -> Result<MonitorOutcome> {
    StopRule::new(schedule, epsilon, horizon)?.run_simulated(params, schedule, seed, 0)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ValidityReport {
    pub epsilon: f64,
    pub certified: u64,
    pub wrong: u64,
    pub paths_used: u64,
    pub wrong_rate: f64,
    /// Binomial standard error of `wrong_rate`.
    pub se: f64,
}

/// Simulates paths 0, 1, 2, ... of the batch keyed by `master_seed` until
/// `certified_target` of them have stopped, and counts the certificates
/// that point away from x_∞ = 1{p_A > p_B}.
pub fn stopping_validity(
    params: &BanditParams,
    schedule: &StepSchedule,
    horizon: u64,
    epsilon: f64,
    master_seed: u64,
    certified_target: u64,
    max_paths: u64,
) -> Result<ValidityReport> {
    if params.p_a == params.p_b {
        return Err(invalid("p_a", "the target needs p_A != p_B"));
    }
    let truth = if params.p_a > params.p_b {
        Target::ArmA
    } else {
        Target::ArmB
    };
    let rule = StopRule::new(schedule, epsilon, horizon)?;
    const CHUNK: u64 = 1024;
    let mut certified = 0;
    let mut wrong = 0;
    let mut next = 0;
    while certified < certified_target && next < max_paths {
        let end = (next + CHUNK).min(max_paths);
        let outcomes: Vec<MonitorOutcome> = (next..end)
            .into_par_iter()
            .map(|i| rule.run_simulated(params, schedule, master_seed, i))
            .collect::<Result<_>>()?;
        for o in outcomes {
            next += 1;
            if let Some(c) = o.certificate() {
                certified += 1;
                if c.target != truth {
                    wrong += 1;
                }
                if certified == certified_target {
                    break;
                }
            }
        }
    }
    let rate = if certified > 0 {
        wrong as f64 / certified as f64
    } else {
        f64::NAN
    };
    Ok(ValidityReport {
        epsilon,
        certified,
        wrong,
        paths_used: next,
        wrong_rate: rate,
        se: (rate * (1.0 - rate) / certified as f64).sqrt(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bound_examples() {
        for t in [0.0, 0.01, 0.2, 0.6, 3.0] {
            let b = error_bound(0.5, t).unwrap();
            assert!((b - f64::min(1.0, 2.0 * t)).abs() < 1e-15, "t={t}");
        }
        let b = error_bound(0.99, 0.01).unwrap();
        assert!((b - 1.0).abs() < 1e-12, "{b}");
        assert_eq!(error_bound(0.3, 0.0).unwrap(), 0.0);
        assert!(error_bound(0.0, 0.1).is_err());
        assert!(error_bound(1.0, 0.1).is_err());
        assert_eq!(error_bound(0.5, f64::INFINITY), Err(Error::InapplicableSchedule));
    }

    #[test]
    fn vacuous_level_stops_at_once() {
        let s = StepSchedule::power_i(1.0, 1.0).unwrap();
        let p = BanditParams::new(0.9, 0.1, 0.5).unwrap();
        for seed in 0..20 {
            let o = monitor_simulated(&p, &s, 100, seed, 1.0).unwrap();
            assert_eq!(o.certificate().unwrap().n, 1);
        }
    }

    #[test]
    fn flat_path_runs_out() {
        // tail bound at n = 200 is 10^4 / 299, far above X_n
        let s = StepSchedule::power_i(100.0, 1.0).unwrap();
        let path: Vec<(u64, f64)> = (0..=200).map(|n| (n, 0.5)).collect();
        match monitor(&path, &s, 0.05).unwrap() {
            MonitorOutcome::RanOut { horizon, .. } => assert_eq!(horizon, 200),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn constant_steps_are_inapplicable() {
        let s = StepSchedule::constant(0.1).unwrap();
        assert_eq!(
            StopRule::new(&s, 0.05, 10).unwrap_err(),
            Error::InapplicableSchedule
        );
    }

    #[test]
    fn absorbed_path_certifies_with_zero_bound() {
        let s = StepSchedule::power_i(1.0, 1.0).unwrap();
        let o = monitor(&[(0, 1.0), (1, 1.0)], &s, 0.01).unwrap();
        let c = o.certificate().unwrap();
        assert_eq!((c.bound, c.target), (0.0, Target::ArmA));
    }

    #[test]
    fn simulated_and_recorded_agree() {
        let s = StepSchedule::power_i(1.0, 1.0).unwrap();
        let p = BanditParams::new(0.9, 0.1, 0.5).unwrap();
        let rule = StopRule::new(&s, 0.1, 5000).unwrap();
        for seed in 0..10 {
            let live = rule.run_simulated(&p, &s, seed, 0).unwrap();
            let t = crate::bandit::simulate_path(&p, &s, 5000, seed, 1).unwrap();
            let path: Vec<(u64, f64)> = t.samples.iter().map(|q| (q.n, q.x)).collect();
            let replay = rule.run(&path).unwrap();
            match (live, replay) {
                (MonitorOutcome::Certified(a), MonitorOutcome::Certified(b)) => {
                    assert_eq!(a.n, b.n);
                    assert_eq!(a.target, b.target);
                }
                (MonitorOutcome::RanOut { .. }, MonitorOutcome::RanOut { .. }) => {}
                other => panic!("{other:?}"),
            }
        }
    }
}
