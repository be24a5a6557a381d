use proptest::prelude::*;
use twoarm::bandit::{simulate_stream, BanditParams};
use twoarm::montecarlo::{
    classify, estimate_moments, run_batch, run_batch_with_workers, simulate_batch, wilson_interval,
    Batch, ClassifierConfig, Outcome,
};
use twoarm::StepSchedule;

const Z99: f64 = 2.5758293035489004;

fn wilson_oracle(k: u64, m: u64, z: f64) -> (f64, f64) {
    let (k, m) = (k as f64, m as f64);
    let p = k / m;
    let denom = 1.0 + z * z / m;
    let center = (p + z * z / (2.0 * m)) / denom;
    let half = z / denom * (p * (1.0 - p) / m + z * z / (4.0 * m * m)).sqrt();
    (center - half, center + half)
}

#[test]
fn wilson_matches_reference_values() {
    let ci = wilson_interval(10, 100, 0.95).unwrap();
    assert!((ci.lo - 0.055_229_1).abs() < 1e-6 && (ci.hi - 0.174_365_7).abs() < 1e-6);
    for (k, m) in [(0, 50), (1, 10_000), (5000, 10_000), (9999, 10_000), (50, 50)] {
        let ci = wilson_interval(k, m, 0.99).unwrap();
        let (lo, hi) = wilson_oracle(k, m, Z99);
        assert!((ci.lo - lo.max(0.0)).abs() < 1e-12, "k={k} m={m}");
        assert!((ci.hi - hi.min(1.0)).abs() < 1e-12, "k={k} m={m}");
    }
}

#[test]
fn worker_count_does_not_change_estimates() {
    let p = BanditParams::new(0.6, 0.4, 0.5).unwrap();
    let s = StepSchedule::constant(0.1).unwrap();
    let batch = Batch { params: &p, schedule: &s, horizon: 2000, paths: 3000, master_seed: 99 };
    let cfg = ClassifierConfig::default();
    let one = run_batch_with_workers(&batch, &cfg, 0.99, 1).unwrap();
    for w in [2, 4, 8] {
        let many = run_batch_with_workers(&batch, &cfg, 0.99, w).unwrap();
        assert_eq!(one, many, "workers={w}");
        assert_eq!(one.to_json(), many.to_json(), "workers={w}");
    }
}

#[test]
fn batch_outcomes_agree_with_full_trajectories() {
    let cfg = ClassifierConfig::default();
    let cases = [
        (BanditParams::new(0.6, 0.4, 0.5).unwrap(), StepSchedule::constant(0.2).unwrap()),
        (BanditParams::new(0.5, 0.5, 0.5).unwrap(), StepSchedule::power_i(1.0, 1.0).unwrap()),
        (BanditParams::new(0.3, 0.7, 0.5).unwrap(), StepSchedule::power_i(2.0, 0.6).unwrap()),
    ];
    for (p, s) in &cases {
        let batch = Batch { params: p, schedule: s, horizon: 3000, paths: 200, master_seed: 4 };
        let records = simulate_batch(&batch, &cfg).unwrap();
        for r in &records {
            let t = simulate_stream(p, s, 3000, 4, r.index, 1).unwrap();
            assert_eq!(classify(&t, &cfg), r.outcome, "{p:?} {s} path {}", r.index);
        }
    }
}

#[test]
fn bernoulli_limit_for_martingale_with_constant_steps() {
    let s = StepSchedule::constant(0.5).unwrap();
    let cfg = ClassifierConfig::default();
    for x0 in [0.1, 0.5, 0.9] {
        let p = BanditParams::new(0.5, 0.5, x0).unwrap();
        let batch = Batch { params: &p, schedule: &s, horizon: 1000, paths: 10_000, master_seed: 8 };
        let est = run_batch(&batch, &cfg, 0.99).unwrap();
        assert_eq!(est.counts.interior, 0);
        assert!(est.ci.at_one.contains(x0), "x0={x0}: {:?}", est.ci.at_one);
        assert_eq!(est.counts.total(), 10_000);
    }
}

#[test]
fn interior_class_needs_square_summable_steps() {
    // Σγ² = ∞ rules out an interior limit, so stalled paths are undecided
    let s = StepSchedule::power_i(1.0, 0.5).unwrap();
    let p = BanditParams::new(0.5, 0.5, 0.5).unwrap();
    let batch = Batch { params: &p, schedule: &s, horizon: 200, paths: 500, master_seed: 1 };
    let est = run_batch(&batch, &ClassifierConfig::default(), 0.99).unwrap();
    assert_eq!(est.counts.interior, 0);
    assert!(est.counts.undecided > 0);
}

#[test]
fn first_moment_tracks_start_in_martingale_case() {
    let s = StepSchedule::power_i(1.0, 1.0).unwrap();
    let p = BanditParams::new(0.7, 0.7, 0.35).unwrap();
    let batch = Batch { params: &p, schedule: &s, horizon: 1000, paths: 5000, master_seed: 12 };
    let m = estimate_moments(&batch, 2).unwrap();
    assert!((m[0].mean - 0.35).abs() <= 4.0 * m[0].se);
    assert!(m[1].mean <= m[0].mean);
}

#[test]
fn classifier_rejects_inconsistent_thresholds() {
    let bad = ClassifierConfig { eps_zero: 0.2, ..ClassifierConfig::default() };
    assert!(bad.validate().is_err());
    let p = BanditParams::new(0.6, 0.4, 0.5).unwrap();
    let s = StepSchedule::constant(0.1).unwrap();
    let batch = Batch { params: &p, schedule: &s, horizon: 10, paths: 10, master_seed: 0 };
    assert!(run_batch(&batch, &bad, 0.99).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn class_counts_sum_to_paths(
        p_a in 0.0f64..=1.0,
        p_b in 0.0f64..=1.0,
        x0 in 0.0f64..=1.0,
        gamma in 0.05f64..0.95,
        paths in 1u64..300,
        seed in any::<u64>(),
    ) {
        let p = BanditParams::new(p_a, p_b, x0).unwrap();
        let s = StepSchedule::constant(gamma).unwrap();
        let batch = Batch { params: &p, schedule: &s, horizon: 300, paths, master_seed: seed };
        let est = run_batch(&batch, &ClassifierConfig::default(), 0.99).unwrap();
        prop_assert_eq!(est.counts.total(), paths);
        let e = est.estimates;
        prop_assert!((e.at_zero + e.at_one + e.interior + e.undecided - 1.0).abs() < 1e-12);
        prop_assert_eq!(est.counts.interior, 0);
    }
}

#[test]
fn outcome_names_serialize() {
    assert_eq!(serde_json::to_string(&Outcome::AtZero).unwrap(), "\"AtZero\"");
}
