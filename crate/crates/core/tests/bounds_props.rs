use proptest::prelude::*;
use twoarm::bandit::BanditParams;
use twoarm::bounds::{
    beta_limit_moment, failure_lb_constant, interior_mass_certified, interior_mass_formula, moment_ub,
    success_lb_theorem2, Horizon, MomentSide,
};
use twoarm::montecarlo::{estimate_moments, Batch};
use twoarm::{Error, StepSchedule};

const XS: [f64; 9] = [0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9];
const GAMMAS: [f64; 6] = [0.01, 0.02, 0.05, 0.1, 0.2, 0.5];

#[test]
fn theorem2_and_failure_bounds_never_cross() {
    for (p_a, p_b) in [(0.6, 0.4), (0.9, 0.1), (1.0, 0.5), (0.55, 0.5)] {
        for &x in &XS {
            for &g in &GAMMAS {
                let lo = success_lb_theorem2(x, p_a, p_b, g).unwrap();
                let hi = 1.0 - failure_lb_constant(x, p_b, g).unwrap();
                assert!(lo <= hi, "pA={p_a} pB={p_b} x={x} γ={g}: {lo} > {hi}");
                assert!((0.0..=1.0).contains(&lo));
            }
        }
    }
}

#[test]
fn bounds_are_monotone_on_grids() {
    for &g in &GAMMAS {
        let fail: Vec<f64> = XS.iter().map(|&x| failure_lb_constant(x, 0.4, g).unwrap()).collect();
        assert!(fail.windows(2).all(|w| w[1] <= w[0]), "γ={g}");
        let succ: Vec<f64> = XS.iter().map(|&x| success_lb_theorem2(x, 0.6, 0.4, g).unwrap()).collect();
        assert!(succ.windows(2).all(|w| w[0] <= w[1]), "γ={g}");
    }
    for &x in &XS {
        // smaller steps: larger exponent 1/(p_B γ), smaller failure bound
        let fail: Vec<f64> = GAMMAS.iter().map(|&g| failure_lb_constant(x, 0.4, g).unwrap()).collect();
        assert!(fail.windows(2).all(|w| w[0] <= w[1]), "x={x}");
    }
}

#[test]
fn beta_moments_follow_their_recursion() {
    for (x, delta) in [(0.5, 1.0), (0.3, 0.5), (0.8, 2.0), (0.1, 0.05)] {
        let mut prev = beta_limit_moment(x, delta, 0).unwrap();
        assert!((prev - x).abs() < 1e-15);
        for m in 1..12 {
            let cur = beta_limit_moment(x, delta, m).unwrap();
            let ratio = (x / delta + m as f64) / (1.0 / delta + m as f64);
            assert!((cur / prev - ratio).abs() < 1e-13, "x={x} Δ={delta} m={m}");
            prev = cur;
        }
    }
    // Beta(1/2, 1/2) moments are C(2k, k)/4^k
    let arcsine = [0.5, 0.375, 0.3125, 0.2734375];
    for (m, want) in arcsine.iter().enumerate() {
        assert!((beta_limit_moment(0.5, 1.0, m as u32).unwrap() - want).abs() < 1e-15);
    }
}

#[test]
fn moment_bound_equals_beta_moment_for_constant_delta() {
    // γ_n = 1/(n+1) gives Δ_n = 1 and S_k = k + 1
    let s = StepSchedule::power_i(1.0, 1.0).unwrap();
    for x in [0.2, 0.5, 0.7] {
        for m in 0..6 {
            let ub = moment_ub(x, &s, m, MomentSide::XInfinity).unwrap();
            let exact = beta_limit_moment(x, 1.0, m).unwrap();
            assert!((ub - exact).abs() < 1e-14, "x={x} m={m}: {ub} vs {exact}");
            let other = moment_ub(x, &s, m, MomentSide::OneMinusXInfinity).unwrap();
            let mirrored = beta_limit_moment(1.0 - x, 1.0, m).unwrap();
            assert!((other - mirrored).abs() < 1e-14);
        }
    }
}

#[test]
fn moment_bound_dominates_simulated_moments() {
    let cases = [
        StepSchedule::power_i(1.0, 1.0).unwrap(),
        StepSchedule::power_i(0.5, 1.0).unwrap(),
        StepSchedule::power_i(0.25, 1.0).unwrap(),
    ];
    for s in &cases {
        let p = BanditParams::new(1.0, 1.0, 0.4).unwrap();
        let batch = Batch { params: &p, schedule: s, horizon: 2000, paths: 20_000, master_seed: 31 };
        let est = estimate_moments(&batch, 4).unwrap();
        for e in &est {
            let ub = moment_ub(0.4, s, e.order - 1, MomentSide::XInfinity).unwrap();
            assert!(ub >= e.mean - 4.0 * e.se, "{s} order {}: {ub} < {} - 4·{}", e.order, e.mean, e.se);
        }
    }
}

#[test]
fn moment_bound_refuses_increasing_delta() {
    let s = StepSchedule::constant(0.1).unwrap();
    assert!(matches!(
        moment_ub(0.5, &s, 2, MomentSide::XInfinity),
        Err(Error::NotApplicable(_))
    ));
}

#[test]
fn interior_mass_limit_encloses_long_product() {
    let s = StepSchedule::power_i(1.0, 0.75).unwrap();
    let lim = interior_mass_certified(0.5, 0.5, &s, Horizon::Limit).unwrap();
    let long = interior_mass_formula(0.5, 0.5, &s, Horizon::Finite(2_000_000)).unwrap();
    assert!(lim.lo <= long * (1.0 + 1e-12));
    assert!(lim.lo <= lim.hi && lim.hi > 0.0);
    // Σγ² = ∞: the interior mass vanishes
    let c = StepSchedule::constant(0.3).unwrap();
    assert_eq!(interior_mass_formula(0.5, 0.5, &c, Horizon::Limit).unwrap(), 0.0);
}

proptest! {
    #[test]
    fn failure_bound_is_a_probability(x in 0.0f64..=1.0, p_b in 1e-3f64..=1.0, g in 1e-3f64..0.999) {
        let b = failure_lb_constant(x, p_b, g).unwrap();
        prop_assert!((0.0..=1.0).contains(&b));
    }

    #[test]
    fn theorem2_bound_is_a_probability(x in 1e-3f64..=1.0, p_b in 0.0f64..0.99, dp in 1e-3f64..=1.0, g in 1e-3f64..0.999) {
        let p_a = p_b + dp * (1.0 - p_b);
        prop_assume!(p_a > p_b);
        let b = success_lb_theorem2(x, p_a, p_b, g).unwrap();
        prop_assert!((0.0..=1.0).contains(&b));
    }

    #[test]
    fn interior_mass_is_nonincreasing_in_n(x in 0.0f64..=1.0, p_a in 0.0f64..=1.0, n in 1u64..2000) {
        let s = StepSchedule::power_i(1.0, 1.0).unwrap();
        let a = interior_mass_formula(x, p_a, &s, Horizon::Finite(n)).unwrap();
        let b = interior_mass_formula(x, p_a, &s, Horizon::Finite(n + 1)).unwrap();
        prop_assert!(b <= a && a <= x * (1.0 - x));
    }
}
