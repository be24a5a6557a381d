//! The regular Pólya urn and its identity with the bandit recursion at
//! p_A = p_B = 1, γ_n = 1/(r + b + n).

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Zero};
use serde::{Deserialize, Serialize};

use crate::bandit::BanditState;
use crate::error::{invalid, Result};
use crate::noise::DriverNoise;
use crate::numeric::fmt_f64;
use crate::schedule::StepSchedule;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UrnPath {
    pub r: u64,
    pub b: u64,
    /// Black counts β_0..β_N.
    pub beta: Vec<u64>,
    /// Proportions β_n / (r + b + n).
    pub x: Vec<f64>,
}

impl UrnPath {
    /// Rows `n,beta,x` with a header line.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("n,beta,x\n");
        for (n, (beta, x)) in self.beta.iter().zip(&self.x).enumerate() {
            out.push_str(&format!("{n},{beta},{}\n", fmt_f64(*x)));
        }
        out
    }
}

fn check_counts(r: u64, b: u64) -> Result<()> {
    if r == 0 || b == 0 {
        return Err(invalid("r, b", format!("ball counts must be >= 1, got r={r}, b={b}")));
    }
    Ok(())
}

/// Draws N balls; a black ball comes out when U_{n+1} <= X_n.
pub fn urn_path(r: u64, b: u64, n: u64, seed: u64) -> Result<UrnPath> {
    check_counts(r, b)?;
    urn_path_with_noise(r, b, n, DriverNoise::new(seed))
}

pub fn urn_path_with_noise(
    r: u64,
    b: u64,
    n: u64,
    noise: impl IntoIterator<Item = (f64, f64)>,
) -> Result<UrnPath> {
    check_counts(r, b)?;
    let mut beta = Vec::with_capacity(n as usize + 1);
    let mut x = Vec::with_capacity(n as usize + 1);
    let mut count = b;
    beta.push(count);
    x.push(count as f64 / (r + b) as f64);
    for (k, (u, _v)) in (1..=n).zip(noise) {
        if u <= x[(k - 1) as usize] {
            count += 1;
        }
        beta.push(count);
        x.push(count as f64 / (r + b + k) as f64);
    }
    if beta.len() as u64 != n + 1 {
        return Err(invalid("noise", "stream ended early"));
    }
    Ok(UrnPath { r, b, beta, x })
}

/// γ_n = 1/(r + b + n) for n = 1..=N, with the tail bound 1/(r + b + N).
pub fn urn_schedule(r: u64, b: u64, n: u64) -> Result<StepSchedule> {
    check_counts(r, b)?;
    if n == 0 {
        return Err(invalid("N", "urn schedule needs at least one step"));
    }
    let values = (1..=n).map(|k| 1.0 / (r + b + k) as f64).collect();
    StepSchedule::custom(values, Some(1.0 / (r + b + n) as f64))
}

/// max_{n<=N} |X_n^urn - X_n^bandit| with both driven by the same pairs.
pub fn urn_bandit_equivalence(r: u64, b: u64, n: u64, seed: u64) -> Result<f64> {
    check_counts(r, b)?;
    if n == 0 {
        return Ok(0.0);
    }
    let urn = urn_path(r, b, n, seed)?;
    let schedule = urn_schedule(r, b, n)?;
    let mut state = BanditState::new(b as f64 / (r + b) as f64);
    let mut worst = (state.x - urn.x[0]).abs();
    for ((k, (u, v)), g) in (1..=n).zip(DriverNoise::new(seed)).zip(schedule.gammas()) {
        state.advance(u, v, 1.0, 1.0, g);
        worst = worst.max((state.x - urn.x[k as usize]).abs());
    }
    Ok(worst)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReplayReport {
    pub steps: u64,
    /// Exact bandit iterate equals β_n/(r+b+n) at every step.
    pub rational_match: bool,
    /// The floating-point urn took the same draws as the exact replay.
    pub draws_match: bool,
}

/// Replays both recursions in exact rational arithmetic on the same
/// uniforms (which are dyadic rationals k/2^53).
pub fn exact_replay(r: u64, b: u64, n: u64, seed: u64) -> Result<ReplayReport> {
    check_counts(r, b)?;
    let noise: Vec<(f64, f64)> = DriverNoise::new(seed).take(n as usize).collect();
    let urn = urn_path_with_noise(r, b, n, noise.iter().copied())?;
    let two53: BigInt = BigInt::one() << 53usize;
    let mut x = BigRational::new(BigInt::from(b), BigInt::from(r + b));
    let mut count = b;
    let mut rational_match = true;
    let mut draws_match = true;
    for (k, (u, _)) in (1..=n).zip(noise) {
        let u_exact = BigRational::new(BigInt::from((u * (1u64 << 53) as f64) as u64), two53.clone());
        let black = u_exact <= x;
        let gamma = BigRational::new(BigInt::one(), BigInt::from(r + b + k));
        let indicator = if black {
            BigRational::one()
        } else {
            BigRational::zero()
        };
        x = &x + gamma * (indicator - &x);
        if black {
            count += 1;
        }
        let urn_exact = BigRational::new(BigInt::from(count), BigInt::from(r + b + k));
        rational_match &= x == urn_exact;
        draws_match &= urn.beta[k as usize] == count;
    }
    Ok(ReplayReport {
        steps: n,
        rational_match,
        draws_match,
    })
}
