//! Batches of seeded paths, finite-horizon absorption classes and their
//! frequencies.
//!
//! Path `i` of a batch is driven by `DriverNoise::for_path(master_seed, i)`.
//! Results are gathered in path order and counted sequentially, so a batch
//! gives the same answer on any number of worker threads.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::bandit::{BanditParams, BanditState, Trajectory};
use crate::error::{invalid, Error, Result};
use crate::noise::DriverNoise;
use crate::numeric::{fmt_f64, mean_and_se};
use crate::schedule::StepSchedule;

/// Smallest positive uniform the noise can emit. Below it arm A is never
/// checked again, so the path can only keep decreasing.
const MIN_UNIFORM: f64 = 1.0 / (1u64 << 53) as f64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Outcome {
    AtZero,
    AtOne,
    Interior,
    Undecided,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ClassifierConfig {
    pub eps_zero: f64,
    pub eps_one: f64,
    pub interior_band: [f64; 2],
    /// Absorption classes also require the path to have moved monotonically
    /// toward the limit over the last tenth of the horizon.
    pub require_monotone_tail: bool,
}

impl Default for ClassifierConfig {
    fn default() -> Self {
        Self {
            eps_zero: 1e-6,
            eps_one: 1e-6,
            interior_band: [0.01, 0.99],
            require_monotone_tail: false,
        }
    }
}

impl ClassifierConfig {
    pub fn validate(&self) -> Result<()> {
        let [lo, hi] = self.interior_band;
        let ok = 0.0 < self.eps_zero
            && self.eps_zero < lo
            && lo < hi
            && hi < 1.0 - self.eps_one
            && self.eps_one > 0.0;
        if ok {
            Ok(())
        } else {
            Err(invalid(
                "classifier",
                format!(
                    "need 0 < eps_zero < lo < hi < 1 - eps_one < 1, got eps_zero={}, band=[{lo}, {hi}], eps_one={}",
                    self.eps_zero, self.eps_one
                ),
            ))
        }
    }

    fn decide(&self, end: &PathEnd, square_summable: bool) -> Outcome {
        let monotone_ok = |flag: bool| flag || !self.require_monotone_tail;
        let [lo, hi] = self.interior_band;
        if end.x <= self.eps_zero && monotone_ok(end.late_nonincreasing) {
            Outcome::AtZero
        } else if end.y <= self.eps_one && monotone_ok(end.late_nondecreasing) {
            Outcome::AtOne
        } else if square_summable && end.x >= lo && end.x <= hi {
            Outcome::Interior
        } else {
            Outcome::Undecided
        }
    }
}

/// Finite-horizon class of a completed path.
pub fn classify(trajectory: &Trajectory, config: &ClassifierConfig) -> Outcome {
    let n = trajectory.horizon;
    let start = late_window_start(n);
    let late: Vec<f64> = trajectory
        .samples
        .iter()
        .filter(|s| s.n >= start)
        .map(|s| s.x)
        .collect();
    let end = PathEnd {
        x: trajectory.x_final,
        y: trajectory.one_minus_x_final,
        late_nonincreasing: late.windows(2).all(|w| w[1] <= w[0]),
        late_nondecreasing: late.windows(2).all(|w| w[1] >= w[0]),
        steps: n,
    };
    config.decide(&end, trajectory.square_summable)
}

/// First step index of the late window: the last tenth of the horizon.
fn late_window_start(n: u64) -> u64 {
    n - n / 10
}

#[derive(Debug, Clone, Copy)]
struct PathEnd {
    x: f64,
    y: f64,
    late_nonincreasing: bool,
    late_nondecreasing: bool,
    steps: u64,
}

/// Runs one path. With `stop_when_decided`, the walk ends as soon as the
/// class can no longer change: below the smallest uniform the path never
/// checks arm A again, and at exactly 1.0 it never checks arm B again.
fn walk(
    params: &BanditParams,
    schedule: &StepSchedule,
    n: u64,
    mut noise: DriverNoise,
    stop_when_decided: Option<&ClassifierConfig>,
) -> Result<PathEnd> {
    let start = late_window_start(n);
    let mut s = BanditState::new(params.x0);
    let mut down = true;
    let mut up = true;
    let mut k = 0u64;
    for g in schedule.gammas().take(n as usize) {
        k += 1;
        let (u, v) = noise.pair();
        let prev = s.x;
        s.advance(u, v, params.p_a, params.p_b, g);
        if k > start {
            down &= s.x <= prev;
            up &= s.x >= prev;
        }
        if let Some(cfg) = stop_when_decided {
            let at_zero = s.x < MIN_UNIFORM && s.x <= cfg.eps_zero;
            let at_one = s.x == 1.0 && s.y <= cfg.eps_one;
            if at_zero || at_one {
                s.check(k)?;
                break;
            }
        }
    }
    s.check(k)?;
    Ok(PathEnd {
        x: s.x,
        y: s.y,
        late_nonincreasing: down,
        late_nondecreasing: up,
        steps: k,
    })
}

/// Per-path result of a batch.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PathRecord {
    pub index: u64,
    pub outcome: Outcome,
    /// Step at which the walk ended (earlier than N once the class was settled).
    pub steps: u64,
    pub x: f64,
    pub one_minus_x: f64,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Counts {
    pub at_zero: u64,
    pub at_one: u64,
    pub interior: u64,
    pub undecided: u64,
}

impl Counts {
    pub fn record(&mut self, outcome: Outcome) {
        match outcome {
            Outcome::AtZero => self.at_zero += 1,
            Outcome::AtOne => self.at_one += 1,
            Outcome::Interior => self.interior += 1,
            Outcome::Undecided => self.undecided += 1,
        }
    }

    pub fn merge(self, other: Counts) -> Counts {
        Counts {
            at_zero: self.at_zero + other.at_zero,
            at_one: self.at_one + other.at_one,
            interior: self.interior + other.interior,
            undecided: self.undecided + other.undecided,
        }
    }

    pub fn total(&self) -> u64 {
        self.at_zero + self.at_one + self.interior + self.undecided
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassValues {
    pub at_zero: f64,
    pub at_one: f64,
    pub interior: f64,
    pub undecided: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
    pub half_width: f64,
}

impl Interval {
    pub fn contains(&self, v: f64) -> bool {
        self.lo <= v && v <= self.hi
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassIntervals {
    pub level: f64,
    pub at_zero: Interval,
    pub at_one: Interval,
    pub interior: Interval,
    pub undecided: Interval,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McEstimate {
    pub params: BanditParams,
    pub schedule: StepSchedule,
    #[serde(rename = "N")]
    pub horizon: u64,
    #[serde(rename = "M")]
    pub paths: u64,
    pub seed: u64,
    pub counts: Counts,
    pub estimates: ClassValues,
    pub ci: ClassIntervals,
    pub classifier: ClassifierConfig,
}

impl McEstimate {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("estimate serializes")
    }
}

/// Two-sided normal quantile for confidence `level`.
pub fn z_for_level(level: f64) -> Result<f64> {
    if !(level > 0.0 && level < 1.0) {
        return Err(invalid("level", format!("{level} is outside (0, 1)")));
    }
    let normal = Normal::new(0.0, 1.0).expect("standard normal");
    Ok(normal.inverse_cdf(1.0 - (1.0 - level) / 2.0))
}

/// Wilson score interval for `k` successes out of `m`.
pub fn wilson_interval(k: u64, m: u64, level: f64) -> Result<Interval> {
    if m == 0 || k > m {
        return Err(invalid("m", format!("need 0 <= k <= m and m >= 1, got k={k}, m={m}")));
    }
    let z = z_for_level(level)?;
    let mf = m as f64;
    let p = k as f64 / mf;
    let z2 = z * z;
    let denom = 1.0 + z2 / mf;
    let center = (p + z2 / (2.0 * mf)) / denom;
    let half = z / denom * (p * (1.0 - p) / mf + z2 / (4.0 * mf * mf)).sqrt();
    Ok(Interval {
        lo: (center - half).max(0.0),
        hi: (center + half).min(1.0),
        half_width: half,
    })
}

/// Batch request shared by the estimators.
#[derive(Debug, Clone, PartialEq)]
pub struct Batch<'a> {
    pub params: &'a BanditParams,
    pub schedule: &'a StepSchedule,
    pub horizon: u64,
    pub paths: u64,
    pub master_seed: u64,
}

impl Batch<'_> {
    fn validate(&self) -> Result<()> {
        self.params.validate()?;
        self.schedule.validate()?;
        if self.horizon == 0 {
            return Err(invalid("N", "horizon must be >= 1"));
        }
        if self.paths == 0 {
            return Err(invalid("M", "need at least one path"));
        }
        self.schedule.check_horizon(self.horizon)
    }

    fn ends(&self, stop: Option<&ClassifierConfig>) -> Result<Vec<PathEnd>> {
        (0..self.paths)
            .into_par_iter()
            .map(|i| {
                walk(
                    self.params,
                    self.schedule,
                    self.horizon,
                    DriverNoise::for_path(self.master_seed, i),
                    stop,
                )
            })
            .collect()
    }
}

/// Classifies every path of a batch.
pub fn simulate_batch(batch: &Batch<'_>, config: &ClassifierConfig) -> Result<Vec<PathRecord>> {
    batch.validate()?;
    config.validate()?;
    let square_summable = batch.schedule.is_square_summable();
    let ends = batch.ends(Some(config))?;
    Ok(ends
        .iter()
        .enumerate()
        .map(|(i, e)| PathRecord {
            index: i as u64,
            outcome: config.decide(e, square_summable),
            steps: e.steps,
            x: e.x,
            one_minus_x: e.y,
        })
        .collect())
}

/// Rows `index,outcome,steps,x,one_minus_x`.
pub fn records_to_csv(records: &[PathRecord]) -> String {
    let mut out = String::from("index,outcome,steps,x,one_minus_x\n");
    for r in records {
        out.push_str(&format!(
            "{},{:?},{},{},{}\n",
            r.index,
            r.outcome,
            r.steps,
            fmt_f64(r.x),
            fmt_f64(r.one_minus_x)
        ));
    }
    out
}

/// Frequencies of the four classes with Wilson intervals at `level`.
pub fn run_batch(batch: &Batch<'_>, config: &ClassifierConfig, level: f64) -> Result<McEstimate> {
    let records = simulate_batch(batch, config)?;
    estimate_from_records(batch, config, level, &records)
}

/// Same as [`run_batch`] on a dedicated pool of `workers` threads.
pub fn run_batch_with_workers(
    batch: &Batch<'_>,
    config: &ClassifierConfig,
    level: f64,
    workers: usize,
) -> Result<McEstimate> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| Error::Internal(e.to_string()))?;
    pool.install(|| run_batch(batch, config, level))
}

pub fn estimate_from_records(
    batch: &Batch<'_>,
    config: &ClassifierConfig,
    level: f64,
    records: &[PathRecord],
) -> Result<McEstimate> {
    let counts = records.iter().fold(Counts::default(), |mut c, r| {
        c.record(r.outcome);
        c
    });
    let m = counts.total();
    let frac = |k: u64| k as f64 / m as f64;
    Ok(McEstimate {
        params: *batch.params,
        schedule: batch.schedule.clone(),
        horizon: batch.horizon,
        paths: m,
        seed: batch.master_seed,
        counts,
        estimates: ClassValues {
            at_zero: frac(counts.at_zero),
            at_one: frac(counts.at_one),
            interior: frac(counts.interior),
            undecided: frac(counts.undecided),
        },
        ci: ClassIntervals {
            level,
            at_zero: wilson_interval(counts.at_zero, m, level)?,
            at_one: wilson_interval(counts.at_one, m, level)?,
            interior: wilson_interval(counts.interior, m, level)?,
            undecided: wilson_interval(counts.undecided, m, level)?,
        },
        classifier: *config,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InteriorMass {
    pub empirical: f64,
    pub se: f64,
    pub formula: f64,
}

/// Empirical E[X_N(1 - X_N)] against x(1-x) ∏_{k<=N}(1 - p_A γ_k²).
pub fn estimate_interior_mass(batch: &Batch<'_>) -> Result<InteriorMass> {
    batch.validate()?;
    if batch.params.p_a != batch.params.p_b {
        return Err(invalid("p_b", "interior-mass identity needs p_A = p_B"));
    }
    let ends = batch.ends(None)?;
    let values: Vec<f64> = ends.iter().map(|e| e.x * e.y).collect();
    let (empirical, se) = mean_and_se(&values);
    let formula = crate::bounds::interior_mass_formula(
        batch.params.x0,
        batch.params.p_a,
        batch.schedule,
        crate::bounds::Horizon::Finite(batch.horizon),
    )?;
    Ok(InteriorMass {
        empirical,
        se,
        formula,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MomentEstimate {
    pub order: u32,
    pub mean: f64,
    pub se: f64,
}

/// Empirical E[X_N^m] for m = 1..=m_max with standard errors.
pub fn estimate_moments(batch: &Batch<'_>, m_max: u32) -> Result<Vec<MomentEstimate>> {
    if !(1..=8).contains(&m_max) {
        return Err(invalid("m_max", format!("{m_max} is outside 1..=8")));
    }
    batch.validate()?;
    let ends = batch.ends(None)?;
    Ok((1..=m_max)
        .map(|order| {
            let values: Vec<f64> = ends.iter().map(|e| e.x.powi(order as i32)).collect();
            let (mean, se) = mean_and_se(&values);
            MomentEstimate { order, mean, se }
        })
        .collect())
}
