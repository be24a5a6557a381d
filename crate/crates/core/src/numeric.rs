//! Small numeric helpers shared across modules.

use std::ops::AddAssign;

/// Neumaier-compensated running sum.
///
/// Prefix sums of step sequences run to 10^6 terms; plain accumulation
/// drifts in the last few digits depending on the platform's FMA usage.
#[derive(Debug, Default, Clone, Copy, PartialEq)]
pub struct CompensatedSum {
    sum: f64,
    comp: f64,
}

impl CompensatedSum {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, value: f64) {
        let t = self.sum + value;
        if self.sum.abs() >= value.abs() {
            self.comp += (self.sum - t) + value;
        } else {
            self.comp += (value - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

impl AddAssign<f64> for CompensatedSum {
    fn add_assign(&mut self, rhs: f64) {
        self.add(rhs);
    }
}

impl FromIterator<f64> for CompensatedSum {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        let mut s = CompensatedSum::new();
        for v in iter {
            s.add(v);
        }
        s
    }
}

/// Formats a float with 17 significant digits, enough to round-trip any f64.
pub fn fmt_f64(value: f64) -> String {
    format!("{value:.16e}")
}

/// Sample mean and standard error of the mean.
///
/// The standard error is the jackknife estimate; for a plain mean the
/// leave-one-out pseudo-values reduce it to `s / sqrt(M)`, which is what
/// is computed, in index order, so the result does not depend on how the
/// values were produced.
pub fn mean_and_se(values: &[f64]) -> (f64, f64) {
    let m = values.len();
    if m == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = values.iter().copied().collect::<CompensatedSum>().value() / m as f64;
    if m == 1 {
        return (mean, f64::INFINITY);
    }
    let ss = values
        .iter()
        .map(|v| (v - mean) * (v - mean))
        .collect::<CompensatedSum>()
        .value();
    let var = ss / (m - 1) as f64;
    (mean, (var / m as f64).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn compensated_sum_recovers_small_terms() {
        let mut s = CompensatedSum::new();
        s += 1.0;
        for _ in 0..10_000 {
            s += 1e-16;
        }
        assert!((s.value() - (1.0 + 1e-12)).abs() < 1e-22 + 1e-16);
        let naive: f64 = std::iter::once(1.0)
            .chain(std::iter::repeat_n(1e-16, 10_000))
            .sum();
        assert_eq!(naive, 1.0);
    }

    #[test]
    fn seventeen_digits_round_trip() {
        for v in [0.1, 1.0 / 3.0, 2.0f64.sqrt(), 1e-300, 0.999_999_999_999_999_9] {
            let s = fmt_f64(v);
            assert_eq!(s.parse::<f64>().unwrap(), v);
        }
    }

    #[test]
    fn jackknife_matches_direct_leave_one_out() {
        let xs = [0.3, 0.9, 0.1, 0.55, 0.72, 0.05];
        let (mean, se) = mean_and_se(&xs);
        let m = xs.len() as f64;
        let loo: Vec<f64> = (0..xs.len())
            .map(|i| (xs.iter().sum::<f64>() - xs[i]) / (m - 1.0))
            .collect();
        let loo_mean = loo.iter().sum::<f64>() / m;
        let jk = ((m - 1.0) / m * loo.iter().map(|v| (v - loo_mean).powi(2)).sum::<f64>()).sqrt();
        assert!((mean - xs.iter().sum::<f64>() / m).abs() < 1e-15);
        assert!((se - jk).abs() < 1e-14);
    }
}
