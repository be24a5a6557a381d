//! The acceptance suite: eleven end-to-end checks of the library against
//! exact identities, closed-form bounds and Monte Carlo statistics.
//!
//! `Suite::Full` runs every check at its reference scale. `Suite::Quick`
//! shrinks path counts and horizons for a fast smoke run; tolerances are
//! the same in both.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::bandit::{coupled_pair, BanditParams};
use crate::bounds::{beta_limit_moment, failure_lb_constant, success_lb_theorem2};
use crate::error::Result;
use crate::mean_field::{lower_bound_products, mean_path, mean_rate_band};
use crate::montecarlo::{
    estimate_interior_mass, estimate_moments, run_batch, run_batch_with_workers, Batch,
    ClassifierConfig, McEstimate,
};
use crate::noise::DriverNoise;
use crate::operator::{absorption_solve, psi_neumann_grid, OperatorParams, SolverConfig};
use crate::polya::{exact_replay, urn_bandit_equivalence};
use crate::schedule::StepSchedule;
use crate::stopping::stopping_validity;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Suite {
    Quick,
    Full,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CriterionResult {
    pub id: u32,
    pub name: String,
    pub passed: bool,
    pub detail: String,
    pub seconds: f64,
}

impl CriterionResult {
    pub fn line(&self) -> String {
        format!(
            "[{}] {:>2} {}: {} ({:.1}s)",
            if self.passed { "PASS" } else { "FAIL" },
            self.id,
            self.name,
            self.detail,
            self.seconds
        )
    }
}

const SEED: u64 = 20_240_601;

struct Scale {
    quick: bool,
}

impl Scale {
    fn paths(&self, full: u64) -> u64 {
        if self.quick {
            (full / 10).max(100)
        } else {
            full
        }
    }

    fn horizon(&self, full: u64) -> u64 {
        if self.quick {
            (full / 10).max(100)
        } else {
            full
        }
    }
}

/// Runs the suite in criterion order.
pub fn run_suite(suite: Suite) -> Vec<CriterionResult> {
    run_suite_with(suite, |_| {})
}

/// Like [`run_suite`], calling `report` as soon as each criterion finishes.
pub fn run_suite_with(suite: Suite, mut report: impl FnMut(&CriterionResult)) -> Vec<CriterionResult> {
    let scale = Scale {
        quick: suite == Suite::Quick,
    };
    let mut out = Vec::with_capacity(11);
    let mut c5_batches = Vec::new();
    for id in 1..=11 {
        let start = Instant::now();
        let (name, r) = match id {
            1 => ("Beta limit moments", criterion_1(&scale)),
            2 => ("interior-mass identity", criterion_2(&scale)),
            3 => ("Bernoulli limit", criterion_3(&scale)),
            4 => ("constant-step failure bound", criterion_4(&scale)),
            5 => (
                "constant-step sandwich and solver",
                criterion_5(&scale).map(|(r, b)| {
                    c5_batches = b;
                    r
                }),
            ),
            6 => ("coupling dominance", criterion_6(&scale)),
            7 => ("urn equivalence", criterion_7()),
            8 => ("infallible-regime ceiling", criterion_8(&scale)),
            9 => ("stopping-rule validity", criterion_9(&scale)),
            10 => ("mean-field inequalities", criterion_10()),
            _ => ("determinism across workers", criterion_11(&c5_batches)),
        };
        let (passed, detail) = r.unwrap_or_else(|e| (false, format!("error: {e}")));
        let result = CriterionResult {
            id,
            name: name.to_string(),
            passed,
            detail,
            seconds: start.elapsed().as_secs_f64(),
        };
        report(&result);
        out.push(result);
    }
    out
}

fn criterion_1(scale: &Scale) -> Result<(bool, String)> {
    let params = BanditParams::new(1.0, 1.0, 0.5)?;
    let schedule = StepSchedule::power_i(1.0, 1.0)?;
    let moments = estimate_moments(
        &Batch {
            params: &params,
            schedule: &schedule,
            horizon: scale.horizon(100_000),
            paths: scale.paths(20_000),
            master_seed: SEED + 1,
        },
        4,
    )?;
    let mut ok = true;
    let mut parts = Vec::new();
    for m in &moments {
        let exact = beta_limit_moment(0.5, 1.0, m.order - 1)?;
        let z = (m.mean - exact) / m.se;
        ok &= z.abs() <= 4.0;
        parts.push(format!("m={} z={z:+.2}", m.order));
    }
    Ok((ok, parts.join(", ")))
}

fn criterion_2(scale: &Scale) -> Result<(bool, String)> {
    let params = BanditParams::new(0.5, 0.5, 0.5)?;
    let schedule = StepSchedule::power_i(1.0, 1.0)?;
    let r = estimate_interior_mass(&Batch {
        params: &params,
        schedule: &schedule,
        horizon: scale.horizon(10_000),
        paths: scale.paths(20_000),
        master_seed: SEED + 2,
    })?;
    let z = (r.empirical - r.formula) / r.se;
    Ok((
        z.abs() <= 4.0,
        format!("empirical {:.6} formula {:.6} z={z:+.2}", r.empirical, r.formula),
    ))
}

fn criterion_3(scale: &Scale) -> Result<(bool, String)> {
    let schedule = StepSchedule::constant(0.5)?;
    let cfg = ClassifierConfig::default();
    let mut ok = true;
    let mut parts = Vec::new();
    for (i, x0) in [0.1, 0.5, 0.9].into_iter().enumerate() {
        let params = BanditParams::new(0.5, 0.5, x0)?;
        let est = run_batch(
            &Batch {
                params: &params,
                schedule: &schedule,
                horizon: 1000,
                paths: scale.paths(10_000),
                master_seed: SEED + 30 + i as u64,
            },
            &cfg,
            0.99,
        )?;
        let inside = est.ci.at_one.contains(x0);
        ok &= inside && est.counts.interior == 0;
        parts.push(format!(
            "x0={x0}: P(AtOne)={:.4} [{:.4}, {:.4}] interior={}",
            est.estimates.at_one, est.ci.at_one.lo, est.ci.at_one.hi, est.counts.interior
        ));
    }
    Ok((ok, parts.join("; ")))
}

fn criterion_4(scale: &Scale) -> Result<(bool, String)> {
    let params = BanditParams::new(1.0, 1.0, 0.5)?;
    let schedule = StepSchedule::constant(0.5)?;
    let est = run_batch(
        &Batch {
            params: &params,
            schedule: &schedule,
            horizon: 1000,
            paths: scale.paths(10_000),
            master_seed: SEED + 4,
        },
        &ClassifierConfig::default(),
        0.99,
    )?;
    let bound = failure_lb_constant(0.5, 1.0, 0.5)?;
    let p = est.estimates.at_zero;
    let se = (p * (1.0 - p) / est.paths as f64).sqrt();
    Ok((
        p >= bound - 4.0 * se,
        format!("P(AtZero)={p:.4} se={se:.4} bound={bound}"),
    ))
}

/// (params, schedule, N, M, seed) of each Monte Carlo batch.
type Batches = Vec<(BanditParams, StepSchedule, u64, u64, u64)>;

fn criterion_5(scale: &Scale) -> Result<((bool, String), Batches)> {
    let (p_a, p_b) = (0.6, 0.4);
    let mut ok = true;
    let mut worst_identity = 0.0f64;
    let mut worst_mc_excess = f64::NEG_INFINITY;
    let mut parts = Vec::new();
    let mut batches = Vec::new();
    let n_mc = scale.horizon(100_000);
    let m_mc = scale.paths(20_000);
    for (gi, gamma) in [0.05, 0.1].into_iter().enumerate() {
        let op = OperatorParams::new(gamma, p_a, p_b)?;
        let sol = absorption_solve(&op, &SolverConfig::default())?;
        let psi = psi_neumann_grid(&op, sol.u.len(), 10_000_000, 1e-13)?;
        let schedule = StepSchedule::constant(gamma)?;
        for (xi, x) in [0.3, 0.5, 0.7].into_iter().enumerate() {
            let u = sol.at(x);
            let lo = success_lb_theorem2(x, p_a, p_b, gamma)?;
            let hi = 1.0 - failure_lb_constant(x, p_b, gamma)?;
            let in_sandwich = lo <= u && u <= hi;
            let identity = (u - (x + op.pi() * gamma * psi.at(x))).abs();
            worst_identity = worst_identity.max(identity);

            let params = BanditParams::new(p_a, p_b, x)?;
            let seed = SEED + 50 + (gi * 3 + xi) as u64;
            let est = run_batch(
                &Batch {
                    params: &params,
                    schedule: &schedule,
                    horizon: n_mc,
                    paths: m_mc,
                    master_seed: seed,
                },
                &ClassifierConfig::default(),
                0.99,
            )?;
            let excess = (u - est.estimates.at_one).abs() - est.ci.at_one.half_width - 1e-3;
            worst_mc_excess = worst_mc_excess.max(excess);
            ok &= in_sandwich && identity <= 1e-6 && excess <= 0.0;
            parts.push(format!(
                "γ={gamma} x={x}: {lo:.4} <= u={u:.4} <= {hi:.4}, MC {:.4}±{:.4}",
                est.estimates.at_one, est.ci.at_one.half_width
            ));
            batches.push((params, schedule.clone(), n_mc, m_mc, seed));
        }
    }
    parts.push(format!(
        "max |u - (x + πγψ)| = {worst_identity:.2e}; max MC excess over CI + 1e-3 = {worst_mc_excess:.2e}"
    ));
    Ok(((ok, parts.join("; ")), batches))
}

fn criterion_6(scale: &Scale) -> Result<(bool, String)> {
    let mut draw = DriverNoise::new(SEED + 6);
    let mut violations = 0;
    let pairs = if scale.quick { 50 } else { 200 };
    for i in 0..pairs {
        let (a, b) = (draw.uniform(), draw.uniform());
        let (pa, pa2) = (draw.uniform(), draw.uniform());
        let p_b = draw.uniform();
        let lower = BanditParams::new(pa.min(pa2), p_b, a.min(b))?;
        let upper = BanditParams::new(pa.max(pa2), p_b, a.max(b))?;
        let schedule = if i % 2 == 0 {
            StepSchedule::constant(0.01 + 0.5 * draw.uniform())?
        } else {
            StepSchedule::power_i(0.5 + 3.0 * draw.uniform(), 0.5 + 0.5 * draw.uniform())?
        };
        let seed = (draw.uniform() * 1e15) as u64;
        violations += coupled_pair(&lower, &upper, &schedule, 10_000, seed)?.violations;
    }
    Ok((violations == 0, format!("{pairs} pairs, {violations} violations")))
}

fn criterion_7() -> Result<(bool, String)> {
    let mut draw = DriverNoise::new(SEED + 7);
    let mut worst = 0.0f64;
    let mut replay_ok = true;
    for _ in 0..50 {
        let r = 1 + (draw.uniform() * 20.0) as u64;
        let b = 1 + (draw.uniform() * 20.0) as u64;
        let seed = (draw.uniform() * 1e15) as u64;
        worst = worst.max(urn_bandit_equivalence(r, b, 10_000, seed)?);
        let rep = exact_replay(r, b, 100, seed)?;
        replay_ok &= rep.rational_match && rep.draws_match;
    }
    Ok((
        worst <= 1e-12 && replay_ok,
        format!("max discrepancy {worst:.2e}, exact replay {}", if replay_ok { "agrees" } else { "differs" }),
    ))
}

fn criterion_8(scale: &Scale) -> Result<(bool, String)> {
    let params = BanditParams::new(0.6, 0.5, 0.2)?;
    let schedule = StepSchedule::power_i(1.0, 1.0)?;
    let est = run_batch(
        &Batch {
            params: &params,
            schedule: &schedule,
            horizon: scale.horizon(1_000_000),
            paths: scale.paths(10_000),
            master_seed: SEED + 8,
        },
        &ClassifierConfig::default(),
        0.99,
    )?;
    Ok((
        est.counts.at_zero == 0,
        format!(
            "AtZero {} of {} (P(AtZero) <= {:.1e} by the rule of three)",
            est.counts.at_zero,
            est.paths,
            3.0 / est.paths as f64
        ),
    ))
}

fn criterion_9(scale: &Scale) -> Result<(bool, String)> {
    let params = BanditParams::new(0.9, 0.1, 0.5)?;
    let schedule = StepSchedule::power_i(1.0, 1.0)?;
    let target = scale.paths(10_000);
    let r = stopping_validity(&params, &schedule, 100_000, 0.05, SEED + 9, target, 50 * target)?;
    let ok = r.certified == target && r.wrong_rate <= 0.05 + 3.0 * r.se;
    Ok((
        ok,
        format!(
            "{} certified of {} paths, wrong {} (rate {:.4}, se {:.4})",
            r.certified, r.paths_used, r.wrong, r.wrong_rate, r.se
        ),
    ))
}

fn criterion_10() -> Result<(bool, String)> {
    const SLACK: f64 = 1e-12;
    let n = 100_000;
    let mut ok = true;
    let mut checked = 0u64;
    let mut bands = Vec::new();
    for schedule in [StepSchedule::power_i(1.0, 1.0)?, StepSchedule::power_i(1.0, 0.75)?] {
        for pi in [0.1, 0.5] {
            for x0 in [0.1, 0.5, 0.9] {
                let path = mean_path(x0, pi, &schedule, n)?;
                let lower = lower_bound_products(x0, pi, &schedule, n)?;
                let c = path.rate_constant();
                for k in 0..=n as usize {
                    let y = path.one_minus[k];
                    ok &= y <= path.upper_chain[k] * (1.0 + SLACK);
                    ok &= path.upper_chain[k] <= path.upper_bound(k) * (1.0 + SLACK);
                    ok &= y <= path.upper_bound(k) * (1.0 + SLACK);
                    ok &= lower[k] <= y * (1.0 + SLACK);
                    ok &= path.rate[k] <= c * (1.0 + SLACK);
                    checked += 1;
                }
                let band = mean_rate_band(&path, &schedule)?;
                ok &= band.lo > 0.0 && band.hi.is_finite();
                bands.push(band.hi / band.lo);
            }
        }
    }
    let widest = bands.iter().fold(0.0f64, |m, r| m.max(*r));
    Ok((
        ok,
        format!("{checked} (n, π, x0, schedule) points; widest band ratio {widest:.3}"),
    ))
}

fn criterion_11(batches: &Batches) -> Result<(bool, String)> {
    if batches.is_empty() {
        return Ok((false, "criterion 5 batches unavailable".into()));
    }
    let cfg = ClassifierConfig::default();
    let mut ok = true;
    for (params, schedule, horizon, paths, seed) in batches {
        let batch = Batch {
            params,
            schedule,
            horizon: *horizon,
            paths: *paths,
            master_seed: *seed,
        };
        let runs: Vec<McEstimate> = [1, 4, 8]
            .into_iter()
            .map(|w| run_batch_with_workers(&batch, &cfg, 0.99, w))
            .collect::<Result<_>>()?;
        let json: Vec<String> = runs.iter().map(McEstimate::to_json).collect();
        ok &= json.windows(2).all(|w| w[0] == w[1]);
    }
    Ok((
        ok,
        format!("{} batches x workers {{1, 4, 8}}: JSON {}", batches.len(), if ok { "identical" } else { "differs" }),
    ))
}
