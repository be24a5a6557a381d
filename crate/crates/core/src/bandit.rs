//! Seeded simulation of the reward-inaction recursion.
//!
//! At step n the pair (U_n, V_n) decides everything: arm A is checked when
//! U_n <= X_{n-1}, arm B otherwise; the checked arm pays off when V_n is
//! at most its success probability, and a payoff moves a fraction γ_n of
//! the other arm's share over to the checked arm.

use serde::{Deserialize, Serialize};

use crate::error::{check_unit, invalid, Error, Result};
use crate::noise::DriverNoise;
use crate::schedule::StepSchedule;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BanditParams {
    pub p_a: f64,
    pub p_b: f64,
    pub x0: f64,
}

impl BanditParams {
    pub fn new(p_a: f64, p_b: f64, x0: f64) -> Result<Self> {
        let p = BanditParams { p_a, p_b, x0 };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        check_unit("p_a", self.p_a)?;
        check_unit("p_b", self.p_b)?;
        check_unit("x0", self.x0)
    }

    /// π = p_A - p_B.
    pub fn pi(&self) -> f64 {
        self.p_a - self.p_b
    }
}

/// Which branch a step took.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Move {
    RewardA,
    RewardB,
    Idle,
}

/// Running state of one path.
///
/// `y` carries 1 - X_n separately. Near 1 the representation of X_n
/// saturates at 1.0 while 1 - X_n keeps shrinking geometrically, and the
/// classifiers need that distance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BanditState {
    pub x: f64,
    pub y: f64,
    pub flags: MonotoneFlags,
}

/// Whether the path is still on the pure-descent event (every step so far
/// checked B) or on the pure-ascent event (every step so far checked A with
/// U_n strictly below the current state).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct MonotoneFlags {
    pub descent_alive: bool,
    pub ascent_alive: bool,
}

impl Default for MonotoneFlags {
    fn default() -> Self {
        Self {
            descent_alive: true,
            ascent_alive: true,
        }
    }
}

impl MonotoneFlags {
    /// Updates the flags for a draw `u` made while the state was `x_prev`.
    #[inline]
    pub fn update(&mut self, x_prev: f64, u: f64) {
        self.descent_alive &= u > x_prev;
        self.ascent_alive &= u < x_prev;
    }
}

impl BanditState {
    pub fn new(x0: f64) -> Self {
        Self {
            x: x0,
            y: 1.0 - x0,
            flags: MonotoneFlags::default(),
        }
    }

    /// One update. Rewards never decrease the rewarded share, and each
    /// branch is a monotone function of the state, so two paths fed the
    /// same noise keep their order exactly. The rewarded share is also kept
    /// at least 1 minus the other share, so x reaches 1.0 once 1 - x is
    /// below half an ulp instead of stalling at the largest double below 1.
    #[inline]
    pub fn advance(&mut self, u: f64, v: f64, p_a: f64, p_b: f64, gamma: f64) -> Move {
        let x = self.x;
        self.flags.update(x, u);
        let q = 1.0 - gamma;
        if u <= x {
            if v <= p_a {
                self.y *= q;
                self.x = x.max(q * x + gamma).max(1.0 - self.y);
                return Move::RewardA;
            }
        } else if v <= p_b {
            self.x = q * x;
            self.y = self.y.max(q * self.y + gamma).max(1.0 - self.x);
            return Move::RewardB;
        }
        Move::Idle
    }

    #[inline]
    pub(crate) fn check(&self, n: u64) -> Result<()> {
        if (0.0..=1.0).contains(&self.x) && (0.0..=1.0).contains(&self.y) {
            Ok(())
        } else {
            Err(Error::Internal(format!(
                "x = {}, 1 - x = {} at n = {n}",
                self.x, self.y
            )))
        }
    }
}

/// A single update from `x`.
pub fn step(x: f64, u: f64, v: f64, params: &BanditParams, gamma: f64) -> f64 {
    let mut s = BanditState::new(x);
    s.advance(u, v, params.p_a, params.p_b, gamma);
    s.x
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub n: u64,
    pub x: f64,
    pub one_minus_x: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub params: BanditParams,
    pub schedule: String,
    pub seed: u64,
    pub stream: u64,
    #[serde(rename = "N")]
    pub horizon: u64,
    pub thin: u64,
    pub samples: Vec<Sample>,
    pub x_final: f64,
    pub one_minus_x_final: f64,
    pub flags: MonotoneFlags,
    pub square_summable: bool,
}

#[derive(Serialize)]
struct TrajectorySummary<'a> {
    seed: u64,
    #[serde(rename = "N")]
    horizon: u64,
    x_final: f64,
    flags: &'a MonotoneFlags,
}

impl Trajectory {
    /// Rows `n,x` with a header line.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("n,x\n");
        for s in &self.samples {
            out.push_str(&format!("{},{}\n", s.n, crate::numeric::fmt_f64(s.x)));
        }
        out
    }

    /// `{seed, N, x_final, flags}`.
    pub fn summary_json(&self) -> String {
        serde_json::to_string(&TrajectorySummary {
            seed: self.seed,
            horizon: self.horizon,
            x_final: self.x_final,
            flags: &self.flags,
        })
        .expect("summary serializes")
    }
}

/// Parses `n,x` rows as written by [`Trajectory::to_csv`]. A header line is
/// optional, extra columns are ignored, times must strictly increase and
/// every x must lie in [0, 1].
pub fn parse_path_csv(text: &str) -> Result<Vec<(u64, f64)>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let mut out: Vec<(u64, f64)> = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let record = record.map_err(|e| Error::Parse(e.to_string()))?;
        let row = record.position().map_or(i as u64 + 1, |p| p.line());
        let first = record.get(0).unwrap_or_default();
        if i == 0 && first == "n" {
            continue;
        }
        if record.len() == 1 && first.is_empty() {
            continue;
        }
        let n: u64 = first
            .parse()
            .map_err(|_| Error::Parse(format!("line {row}: bad time {first:?}")))?;
        let field = record
            .get(1)
            .ok_or_else(|| Error::Parse(format!("line {row}: missing x")))?;
        let x: f64 = field
            .parse()
            .map_err(|_| Error::Parse(format!("line {row}: bad x {field:?}")))?;
        if !(0.0..=1.0).contains(&x) {
            return Err(Error::Parse(format!("line {row}: x = {x} is outside [0, 1]")));
        }
        if let Some(&(prev, _)) = out.last() {
            if n <= prev {
                return Err(Error::Parse(format!("line {row}: time {n} after {prev}")));
            }
        }
        out.push((n, x));
    }
    Ok(out)
}

/// Sampling stride used when none is given: ceil(N / 1000).
pub fn default_thin(n: u64) -> u64 {
    n.div_ceil(1000).max(1)
}

/// Simulates N steps driven by `DriverNoise::new(seed)`.
pub fn simulate_path(
    params: &BanditParams,
    schedule: &StepSchedule,
    n: u64,
    seed: u64,
    thin: u64,
) -> Result<Trajectory> {
    simulate_stream(params, schedule, n, seed, 0, thin)
}

/// Simulates path `stream` of the batch keyed by `seed`.
pub fn simulate_stream(
    params: &BanditParams,
    schedule: &StepSchedule,
    n: u64,
    seed: u64,
    stream: u64,
    thin: u64,
) -> Result<Trajectory> {
    let mut t = simulate_with_noise(params, schedule, n, DriverNoise::for_path(seed, stream), thin)?;
    t.seed = seed;
    t.stream = stream;
    Ok(t)
}

/// Simulates N steps on caller-supplied noise (seed fields are left 0).
pub fn simulate_with_noise<I>(
    params: &BanditParams,
    schedule: &StepSchedule,
    n: u64,
    noise: I,
    thin: u64,
) -> Result<Trajectory>
where
    I: IntoIterator<Item = (f64, f64)>,
{
    params.validate()?;
    if n == 0 {
        return Err(invalid("N", "horizon must be >= 1"));
    }
    if thin == 0 {
        return Err(invalid("thin", "stride must be >= 1"));
    }
    schedule.check_horizon(n)?;
    let mut state = BanditState::new(params.x0);
    let mut samples = Vec::with_capacity((n / thin) as usize + 2);
    samples.push(Sample {
        n: 0,
        x: state.x,
        one_minus_x: state.y,
    });
    let mut noise = noise.into_iter();
    for (i, g) in schedule.gammas().take(n as usize).enumerate() {
        let k = i as u64 + 1;
        let (u, v) = noise
            .next()
            .ok_or_else(|| invalid("noise", format!("stream ended before step {k}")))?;
        state.advance(u, v, params.p_a, params.p_b, g);
        state.check(k)?;
        if k.is_multiple_of(thin) || k == n {
            samples.push(Sample {
                n: k,
                x: state.x,
                one_minus_x: state.y,
            });
        }
    }
    Ok(Trajectory {
        params: *params,
        schedule: schedule.to_string(),
        seed: 0,
        stream: 0,
        horizon: n,
        thin,
        samples,
        x_final: state.x,
        one_minus_x_final: state.y,
        flags: state.flags,
        square_summable: schedule.is_square_summable(),
    })
}

/// Replays the monotone-event flags over a noise prefix.
pub fn monotone_flags<I>(params: &BanditParams, schedule: &StepSchedule, noise: I) -> MonotoneFlags
where
    I: IntoIterator<Item = (f64, f64)>,
{
    let mut state = BanditState::new(params.x0);
    for ((u, v), g) in noise.into_iter().zip(schedule.gammas()) {
        state.advance(u, v, params.p_a, params.p_b, g);
    }
    state.flags
}

#[derive(Debug, Clone, PartialEq)]
pub struct CoupledPair {
    pub lower: Trajectory,
    pub upper: Trajectory,
    /// Steps n at which X_n > X'_n was observed.
    pub violations: u64,
}

/// Two paths from (x, p_A) <= (x', p_A') with a shared p_B, driven by the
/// same noise and compared at every step.
pub fn coupled_pair(
    lower: &BanditParams,
    upper: &BanditParams,
    schedule: &StepSchedule,
    n: u64,
    seed: u64,
) -> Result<CoupledPair> {
    lower.validate()?;
    upper.validate()?;
    if lower.x0 > upper.x0 {
        return Err(invalid("x0", format!("{} > {}", lower.x0, upper.x0)));
    }
    if lower.p_a > upper.p_a {
        return Err(invalid("p_a", format!("{} > {}", lower.p_a, upper.p_a)));
    }
    if lower.p_b != upper.p_b {
        return Err(invalid("p_b", "coupled paths must share p_B"));
    }
    let noise: Vec<(f64, f64)> = DriverNoise::new(seed).take(n as usize).collect();
    let thin = default_thin(n);
    let mut a = BanditState::new(lower.x0);
    let mut b = BanditState::new(upper.x0);
    let mut violations = 0;
    for (&(u, v), g) in noise.iter().zip(schedule.gammas()) {
        a.advance(u, v, lower.p_a, lower.p_b, g);
        b.advance(u, v, upper.p_a, upper.p_b, g);
        if a.x > b.x {
            violations += 1;
        }
    }
    let mut lo = simulate_with_noise(lower, schedule, n, noise.iter().copied(), thin)?;
    let mut hi = simulate_with_noise(upper, schedule, n, noise.iter().copied(), thin)?;
    for t in [&mut lo, &mut hi] {
        t.seed = seed;
    }
    Ok(CoupledPair {
        lower: lo,
        upper: hi,
        violations,
    })
}
