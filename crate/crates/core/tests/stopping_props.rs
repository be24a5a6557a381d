use proptest::prelude::*;
use twoarm::bandit::{simulate_path, BanditParams};
use twoarm::stopping::{error_bound, monitor, stopping_validity, MonitorOutcome, StopRule};
use twoarm::StepSchedule;

fn assert_valid(p: &BanditParams, eps: f64, seed: u64) {
    let s = StepSchedule::power_i(1.0, 1.0).unwrap();
    let r = stopping_validity(p, &s, 20_000, eps, seed, 2000, 400_000).unwrap();
    assert_eq!(r.certified, 2000, "ε={eps}");
    assert!(r.wrong_rate <= eps + 3.0 * r.se, "ε={eps}: {r:?}");
}

#[test]
fn certificates_are_valid_at_level_0_01() {
    assert_valid(&BanditParams::new(0.9, 0.1, 0.5).unwrap(), 0.01, 7);
}

#[test]
fn certificates_are_valid_at_level_0_05() {
    assert_valid(&BanditParams::new(0.9, 0.1, 0.5).unwrap(), 0.05, 7);
}

#[test]
fn certificates_are_valid_at_level_0_1() {
    assert_valid(&BanditParams::new(0.9, 0.1, 0.5).unwrap(), 0.1, 7);
}

#[test]
fn certificates_are_valid_when_b_is_better() {
    assert_valid(&BanditParams::new(0.1, 0.9, 0.5).unwrap(), 0.05, 3);
}

#[test]
fn validity_run_is_deterministic() {
    let p = BanditParams::new(0.9, 0.1, 0.5).unwrap();
    let s = StepSchedule::power_i(1.0, 1.0).unwrap();
    let a = stopping_validity(&p, &s, 5000, 0.05, 11, 300, 10_000).unwrap();
    let b = stopping_validity(&p, &s, 5000, 0.05, 11, 300, 10_000).unwrap();
    assert_eq!(a, b);
}

#[test]
fn stopping_time_depends_only_on_path_and_schedule() {
    let s = StepSchedule::power_i(1.0, 1.0).unwrap();
    let p = BanditParams::new(0.8, 0.3, 0.5).unwrap();
    for seed in 0..20 {
        let t = simulate_path(&p, &s, 3000, seed, 1).unwrap();
        let path: Vec<(u64, f64)> = t.samples.iter().map(|q| (q.n, q.x)).collect();
        let a = monitor(&path, &s, 0.05).unwrap();
        let b = monitor(&path, &s, 0.05).unwrap();
        assert_eq!(a, b);
        // the same path under other reward probabilities stops at the same time
        let rule = StopRule::new(&s, 0.05, 3000).unwrap();
        assert_eq!(rule.run(&path).unwrap(), a);
        if let MonitorOutcome::Certified(c) = a {
            assert!(c.bound <= 0.05);
            assert_eq!(c.tail_sq_used, s.tail_sq_sum_ub(c.n).unwrap());
        }
    }
}

#[test]
fn certificate_uses_the_schedule_tail_bound() {
    let s = StepSchedule::power_i(1.0, 1.0).unwrap();
    let path = [(0, 0.5), (1, 0.9), (500, 0.95), (1000, 0.99)];
    if let MonitorOutcome::Certified(c) = monitor(&path, &s, 0.2).unwrap() {
        assert_eq!(c.n, 500);
        let t = s.tail_sq_sum_ub(c.n).unwrap();
        assert!((c.bound - error_bound(c.x_n, t).unwrap()).abs() < 1e-15);
    } else {
        panic!("expected a certificate");
    }
}

proptest! {
    #[test]
    fn bound_is_nondecreasing_in_tail(x in 1e-6f64..0.999_999, t in 0.0f64..10.0, dt in 0.0f64..10.0) {
        let a = error_bound(x, t).unwrap();
        let b = error_bound(x, t + dt).unwrap();
        prop_assert!(a <= b);
        prop_assert!((0.0..=1.0).contains(&a));
    }

    #[test]
    fn bound_is_symmetric(x in 1e-6f64..0.999_999, t in 0.0f64..2.0) {
        let a = error_bound(x, t).unwrap();
        let b = error_bound(1.0 - x, t).unwrap();
        prop_assert!((a - b).abs() <= 1e-9 * a.max(1e-300) + 1e-15);
    }
}
