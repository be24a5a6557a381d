use proptest::prelude::*;
use twoarm::bandit::{simulate_path, simulate_with_noise, BanditParams};
use twoarm::mean_field::{lower_bound_products, mean_path, mean_rate_band, ode_flow, path_rate_diagnostic};
use twoarm::{Error, StepSchedule};

fn schedule(which: usize) -> StepSchedule {
    match which {
        0 => StepSchedule::power_i(1.0, 1.0).unwrap(),
        1 => StepSchedule::power_i(1.0, 0.75).unwrap(),
        2 => StepSchedule::ratio_form(1.0, 0.5, 0.5).unwrap(),
        _ => StepSchedule::constant(0.05).unwrap(),
    }
}

#[test]
fn iterates_match_plain_recursion() {
    let s = schedule(1);
    let path = mean_path(0.2, 0.4, &s, 5000).unwrap();
    let mut x = 0.2f64;
    for (n, g) in s.gammas().take(5000).enumerate() {
        x += 0.4 * g * x * (1.0 - x);
        assert!((path.values[n + 1] - x).abs() <= 1e-13, "n={}", n + 1);
        assert!((path.one_minus[n + 1] - (1.0 - x)).abs() <= 1e-13, "n={}", n + 1);
    }
}

#[test]
fn rate_band_is_positive_and_finite_and_needs_square_summable() {
    for which in 0..3 {
        let s = schedule(which);
        for x0 in [0.1, 0.5, 0.9] {
            let path = mean_path(x0, 0.3, &s, 20_000).unwrap();
            let band = mean_rate_band(&path, &s).unwrap();
            assert!(band.lo > 0.0 && band.hi.is_finite() && band.lo <= band.hi);
            assert!(band.hi <= path.rate_constant());
        }
    }
    let s = schedule(3);
    let path = mean_path(0.5, 0.3, &s, 100).unwrap();
    assert!(matches!(mean_rate_band(&path, &s), Err(Error::NotApplicable(_))));
}

#[test]
fn boundary_starts_stay_put() {
    let s = schedule(0);
    for x0 in [0.0, 1.0] {
        let path = mean_path(x0, 0.5, &s, 100).unwrap();
        assert!(path.boundary);
        assert!(path.values.iter().all(|&x| x == x0));
    }
}

#[test]
fn ode_flow_solves_the_logistic_equation() {
    let (x0, pi) = (0.3, 0.7);
    for t in [0.1, 1.0, 5.0] {
        let h = 1e-6;
        let phi = ode_flow(x0, t, pi).unwrap();
        let dphi = (ode_flow(x0, t + h, pi).unwrap() - ode_flow(x0, t - h, pi).unwrap()) / (2.0 * h);
        assert!((dphi - pi * phi * (1.0 - phi)).abs() < 1e-8, "t={t}");
    }
    assert_eq!(ode_flow(x0, 0.0, pi).unwrap(), x0);
}

#[test]
fn ascent_path_rate_is_the_exact_product() {
    let p = BanditParams::new(0.8, 0.3, 0.4).unwrap();
    let s = schedule(0);
    let n = 2000;
    // U below every iterate and V below p_A: pure ascent
    let noise = std::iter::repeat((1e-9, 0.1)).take(n as usize);
    let t = simulate_with_noise(&p, &s, n, noise, 1).unwrap();
    assert!(t.flags.ascent_alive);
    let rate = path_rate_diagnostic(&t, p.p_a, &s).unwrap();
    let mut prod = 1.0 - p.x0;
    let mut big_gamma = 0.0;
    for (k, g) in s.gammas().take(n as usize).enumerate() {
        prod *= 1.0 - g;
        big_gamma += g;
        let expected = (p.p_a * big_gamma).exp() * prod;
        let got = rate.value[k + 1];
        assert!((got - expected).abs() <= 1e-10 * expected, "n={}: {got} vs {expected}", k + 1);
    }
}

#[test]
fn path_rate_refuses_paths_off_the_ascent_event() {
    let p = BanditParams::new(0.6, 0.4, 0.5).unwrap();
    let s = schedule(0);
    let t = simulate_path(&p, &s, 1000, 1, 1).unwrap();
    assert!(!t.flags.ascent_alive);
    assert!(matches!(path_rate_diagnostic(&t, p.p_a, &s), Err(Error::NotApplicable(_))));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn mean_path_inequality_chain(x0 in 0.01f64..0.99, pi in 0.01f64..=1.0, which in 0usize..4) {
        let s = schedule(which);
        let n = 3000;
        let path = mean_path(x0, pi, &s, n).unwrap();
        let lower = lower_bound_products(x0, pi, &s, n).unwrap();
        let slack = 1.0 + 1e-12;
        for k in 0..=n as usize {
            let y = path.one_minus[k];
            prop_assert!(y <= path.upper_chain[k] * slack, "chain k={}", k);
            prop_assert!(path.upper_chain[k] <= path.upper_bound(k) * slack, "chain k={}", k);
            prop_assert!(lower[k] <= y * slack, "lower k={}", k);
            prop_assert!(path.rate[k] <= path.rate_constant() * slack, "rate k={}", k);
        }
        prop_assert!(path.values.windows(2).all(|w| w[0] <= w[1]));
    }
}
