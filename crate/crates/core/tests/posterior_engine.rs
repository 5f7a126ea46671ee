mod common;

use approx::assert_abs_diff_eq;
use common::*;
use proptest::prelude::*;
use voi_core::*;

#[test]
fn trace_matches_dense_inverse() {
    let mut g = rng(1);
    for _ in 0..50 {
        let p = prior(&mut g, 4);
        let d = design(&mut g, 4, 6, 0.7);
        let fast = posterior_variance(&p, &d).unwrap();
        let slow = dense_posterior(&p, &d);
        assert!((fast.trace - dense_trace(&slow)).abs() <= 1e-9);
        for i in 0..4 {
            for j in 0..4 {
                assert!((fast.posterior_variance[(i, j)] - slow[i][j]).abs() <= 1e-9);
            }
        }
    }
}

#[test]
fn gram_examples() {
    let one = SampleDesign::new(vec![vec![0.6, 0.8, 0.0]], 1.0).unwrap();
    let s = gram(&one, 3).unwrap();
    assert_abs_diff_eq!(s.delta()[0], 1.0, epsilon = 1e-14);
    assert_abs_diff_eq!(s.delta()[1], 0.0, epsilon = 1e-14);
    assert_eq!(s.rank(), 1);
    let rep = SampleDesign::pure_signals(3, &[0, 1, 2, 0, 1, 2], 1.0).unwrap();
    let s = gram(&rep, 3).unwrap();
    for &d in s.delta() {
        assert_abs_diff_eq!(d, 2.0, epsilon = 1e-14);
    }
    assert_abs_diff_eq!(s.source_n(), 6.0, epsilon = 0.0);
}

#[test]
fn illustrative_two_state_value() {
    for &rho in &[0.0, 0.25, 0.5, 0.9] {
        let p = prior_pairwise(2, 1.0, rho).unwrap();
        let d = SampleDesign::new(vec![p.eigenvector(0)], 1.0).unwrap();
        let pi = posterior_variance(&p, &d).unwrap().value;
        assert_abs_diff_eq!(
            pi,
            (1.0 + rho) * (1.0 + rho) / (2.0 * (1.0 + rho + 1.0)),
            epsilon = 1e-12
        );
    }
}

#[test]
fn bound_equality_cases() {
    let mut g = rng(2);
    for _ in 0..30 {
        let p = prior(&mut g, 5);
        let b = value_bounds(p.eigenvalues(), &[1.0; 5], 0.5).unwrap();
        assert_abs_diff_eq!(b.lower, b.upper, epsilon = 1e-12);
        let delta = vec![4.0, 2.0, 1.0, 0.5, 0.0];
        let aligned = GramSpectrum::new(delta.clone(), p.eigenvectors().clone()).unwrap();
        let reversed =
            GramSpectrum::new(delta.clone(), p.eigenvectors().reversed_columns()).unwrap();
        let b = value_bounds(p.eigenvalues(), &delta, 0.5).unwrap();
        assert_abs_diff_eq!(
            posterior_from_spectrum(&p, &aligned, 0.5).unwrap().value,
            b.upper,
            epsilon = 1e-10
        );
        assert_abs_diff_eq!(
            posterior_from_spectrum(&p, &reversed, 0.5).unwrap().value,
            b.lower,
            epsilon = 1e-10
        );
    }
}

#[test]
fn singleton_examples() {
    let p = prior_pairwise(3, 1.0, 0.4).unwrap();
    let l = p.eigenvalues().to_vec();
    let top = singleton_value(&p, &p.eigenvector(0), 0.5).unwrap();
    assert_abs_diff_eq!(top, l[0] * l[0] / (3.0 * (l[0] + 0.5)), epsilon = 1e-14);
    let bottom = singleton_value(&p, &p.eigenvector(2), 0.5).unwrap();
    assert_abs_diff_eq!(bottom, l[2] * l[2] / (3.0 * (l[2] + 0.5)), epsilon = 1e-14);

    for i in -50..=50 {
        let t = i as f64 / 100.0;
        let rho = 0.5f64;
        let w = [
            (std::f64::consts::PI * t).sin(),
            (std::f64::consts::PI * t).cos(),
        ];
        let p = prior_pairwise(2, 1.0, rho).unwrap();
        let s = (2.0 * std::f64::consts::PI * t).sin();
        let expected = (1.0 + 2.0 * rho * s + rho * rho) / (2.0 * ((1.0 + rho * s) + 1.0));
        assert_abs_diff_eq!(
            singleton_value(&p, &w, 1.0).unwrap(),
            expected,
            epsilon = 1e-13
        );
    }
}

#[test]
fn representative_examples() {
    for &n in &[0.5, 3.0, 40.0] {
        let flat = diag_prior(&[1.5; 4]);
        let tau = n * 1.5 / 0.8;
        assert_abs_diff_eq!(
            representative_value(&flat, n, 0.8).unwrap(),
            1.5 * tau / (4.0 + tau),
            epsilon = 1e-13
        );
    }
    let p = diag_prior(&[3.0, 2.0, 1.0]);
    let rep = SampleDesign::pure_signals(3, &[0, 1, 2, 0, 1, 2], 0.4).unwrap();
    assert_abs_diff_eq!(
        representative_value(&p, 6.0, 0.4).unwrap(),
        posterior_variance(&p, &rep).unwrap().value,
        epsilon = 1e-13
    );
}

#[test]
fn non_spanning_examples() {
    let p = prior_pairwise(6, 1.3, 0.0).unwrap();
    let d = SampleDesign::pure_signals(6, &[0, 1], 0.5).unwrap();
    let dec = non_spanning_decomposition(&p, &d).unwrap();
    assert_abs_diff_eq!(dec.extrapolation_error, 4.0 * 1.3, epsilon = 1e-12);

    let p = prior_pairwise(4, 1.0f64, 0.5).unwrap();
    let d = SampleDesign::pure_signals(4, &[0, 1, 1], 0.3).unwrap();
    let dec = non_spanning_decomposition(&p, &d).unwrap();
    for &c in &dec.conditional_variances {
        assert_abs_diff_eq!(c, 2.0 / 3.0, epsilon = 1e-12);
    }
    let trace = posterior_variance(&p, &d).unwrap().trace;
    assert_abs_diff_eq!(dec.total(), trace, epsilon = 1e-9);

    let more = SampleDesign::pure_signals(4, &[0, 1, 1, 0, 0, 1, 0, 1, 1, 0], 0.1).unwrap();
    let dec2 = non_spanning_decomposition(&p, &more).unwrap();
    assert!((dec2.extrapolation_error - dec.extrapolation_error).abs() < 1e-9);

    assert!(matches!(
        non_spanning_decomposition(
            &p,
            &SampleDesign::pure_signals(4, &[0, 1, 2, 3], 1.0).unwrap()
        ),
        Err(VoiError::Spanning { .. })
    ));
    let off = SampleDesign::new(vec![vec![0.6, 0.8, 0.0, 0.0]], 1.0).unwrap();
    assert!(matches!(
        non_spanning_decomposition(&p, &off),
        Err(VoiError::OffSupport { index: 0 })
    ));
}

#[test]
fn non_spanning_finite_noise_free_value() {
    // exact noise-free value at finite K: σ_m²[1 − (1−ρ)(1+ρR)(K−R)/((1+ρ(R−1))K)]
    let (rho, r) = (0.5f64, 3usize);
    for k in [10usize, 50, 200] {
        let p = prior_pairwise(k, 1.0, rho).unwrap();
        let d = SampleDesign::pure_signals(k, &[0, 1, 2], 1e-10).unwrap();
        let v = non_spanning_decomposition(&p, &d).unwrap().value;
        let (kf, rf) = (k as f64, r as f64);
        let exact =
            1.0 - (1.0 - rho) * (1.0 + rho * rf) * (kf - rf) / ((1.0 + rho * (rf - 1.0)) * kf);
        assert!((v - exact).abs() < 1e-8, "K={k}: {v} vs {exact}");
    }
}

#[test]
fn posterior_is_positive_definite() {
    let mut g = rng(3);
    for _ in 0..100 {
        let k = g.random_range(2..=6);
        let p = prior(&mut g, k);
        let n = g.random_range(0..=8);
        let d = design(&mut g, k, n, 0.3);
        let post = posterior_variance(&p, &d).unwrap();
        assert!(post.posterior_variance.symmetry_residual() < 1e-12);
        assert!(symmetric_eigen(&post.posterior_variance)
            .values
            .iter()
            .all(|&m| m > 0.0));
        assert!(post.per_direction_variances.iter().all(|&m| m > 0.0));
    }
}

use rand::Rng;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn appending_never_lowers_value(seed in any::<u64>()) {
        let mut g = rng(seed);
        let k = g.random_range(2..=6);
        let p = prior(&mut g, k);
        let (n, noise) = (g.random_range(0..=6), g.random_range(0.1..2.0));
        let d = design(&mut g, k, n, noise);
        let before = posterior_variance(&p, &d).unwrap().value;
        let after = posterior_variance(&p, &d.with_observation(unit(&mut g, k)).unwrap()).unwrap().value;
        prop_assert!(after >= before - 1e-12);
    }

    #[test]
    fn noise_lowers_value(seed in any::<u64>()) {
        let mut g = rng(seed);
        let k = g.random_range(2..=6);
        let p = prior(&mut g, k);
        let n = g.random_range(1..=6);
        let d = design(&mut g, k, n, 0.5);
        let a = posterior_variance(&p, &d).unwrap().value;
        let b = posterior_variance(&p, &d.with_noise_variance(0.8).unwrap()).unwrap().value;
        prop_assert!(b < a);
    }

    #[test]
    fn bounds_sandwich(seed in any::<u64>()) {
        let mut g = rng(seed);
        let k = g.random_range(2..=8);
        let p = prior(&mut g, k);
        let (n, noise) = (g.random_range(1..=2 * k), g.random_range(0.1..2.0));
        let d = design(&mut g, k, n, noise);
        let pi = posterior_variance(&p, &d).unwrap().value;
        let b = value_bounds_for(&p, &gram(&d, k).unwrap(), d.noise_variance()).unwrap();
        prop_assert!(b.lower - 1e-10 <= pi && pi <= b.upper + 1e-10);
        prop_assert!((dense_value(&p, &d) - pi).abs() < 1e-9);
    }

    #[test]
    fn sherman_morrison_matches_dense(seed in any::<u64>()) {
        let mut g = rng(seed);
        let k = g.random_range(2..=6);
        let p = prior(&mut g, k);
        let w = unit(&mut g, k);
        let noise = g.random_range(0.1..2.0);
        let sm = sherman_morrison_posterior(&p, &w, noise).unwrap();
        let dense = dense_posterior(&p, &SampleDesign::new(vec![w.clone()], noise).unwrap());
        for i in 0..k {
            for j in 0..k {
                prop_assert!((sm[(i, j)] - dense[i][j]).abs() < 1e-11);
            }
        }
        let value = singleton_value(&p, &w, noise).unwrap();
        let trace_drop = (p.trace() - sm.trace()) / k as f64;
        prop_assert!((value - trace_drop).abs() < 1e-12);
    }

    #[test]
    fn representative_value_rises_under_spread(seed in any::<u64>(), n in 0.1f64..20.0) {
        let mut g = rng(seed);
        let k = g.random_range(2..=6);
        let l = spectrum(&mut g, k);
        let s = spread(&mut g, &l);
        let mut sorted = s.clone();
        sorted.sort_by(|a, b| b.total_cmp(a));
        let before = representative_value(&diag_prior(&l), n, 1.0).unwrap();
        let after = representative_value(&diag_prior(&sorted), n, 1.0).unwrap();
        prop_assert!(after >= before - 1e-12);
    }

    #[test]
    fn decomposition_is_additive(seed in any::<u64>()) {
        let mut g = rng(seed);
        let k = g.random_range(3..=7);
        let p = prior(&mut g, k);
        let r = g.random_range(1..k);
        let m = g.random_range(r..=3 * r);
        let states: Vec<usize> = (0..m).map(|i| if i < r { i } else { g.random_range(0..r) }).collect();
        let noise = g.random_range(0.1..2.0);
        let d = SampleDesign::pure_signals(k, &states, noise).unwrap();
        let dec = non_spanning_decomposition(&p, &d).unwrap();
        prop_assert_eq!(dec.rank, r);
        prop_assert!((dec.total() - posterior_variance(&p, &d).unwrap().trace).abs() < 1e-9);
        let tenfold: Vec<usize> = states.iter().cycle().take(states.len() * 10).copied().collect();
        let d10 = SampleDesign::pure_signals(k, &tenfold, d.noise_variance() * 3.0).unwrap();
        let dec10 = non_spanning_decomposition(&p, &d10).unwrap();
        prop_assert!((dec10.extrapolation_error - dec.extrapolation_error).abs() < 1e-9);
    }
}
