mod common;

use common::accountant::grid_oracle;
use proptest::prelude::*;
use vflgan_core::dp::*;
use vflgan_core::nn::{LayerGrad, Matrix};
use vflgan_core::RngStream;

fn grad(values: Vec<f64>) -> LayerGrad {
    let n = values.len();
    LayerGrad {
        weight: Matrix::from_vec(1, n - 1, values[..n - 1].to_vec()).unwrap(),
        bias: vec![values[n - 1]],
    }
}

#[test]
fn to_dp_matches_grid_search() {
    let (eps, alpha) = to_dp(&gaussian_rdp(1.0), 1e-5).unwrap();
    let (o_eps, o_alpha) = grid_oracle(1.0, 1.0, 1e-5);
    assert_eq!(alpha, o_alpha);
    assert_eq!(alpha, 6);
    assert!((eps - o_eps).abs() < 1e-12);
    assert!((eps - 5.3026).abs() < 1e-4);

    for (sigma, steps, delta) in [(0.8, 10u64, 1e-3), (3.0, 500, 1e-6), (1.7, 1, 0.5)] {
        let (e, a) = to_dp(&compose(&gaussian_rdp(sigma), steps), delta).unwrap();
        let (oe, oa) = grid_oracle(sigma, steps as f64, delta);
        assert_eq!(a, oa);
        assert!((e - oe).abs() < 1e-9 * oe);
    }
}

#[test]
fn delta_near_one_tends_to_curve_minimum() {
    let c = compose(&gaussian_rdp(2.0), 3);
    let (e, a) = to_dp(&c, 1.0 - 1e-12).unwrap();
    assert_eq!(a, 2);
    assert!((e - c.at(2).unwrap()).abs() < 1e-9);
}

#[test]
fn scaling_the_curve_never_decreases_epsilon() {
    let c = subsample_amplify(&gaussian_rdp(1.1), 0.05).unwrap();
    let base = to_dp(&c, 1e-5).unwrap().0;
    for k in [1u64, 2, 5, 40] {
        assert!(to_dp(&compose(&c, k), 1e-5).unwrap().0 >= base);
    }
}

#[test]
fn order_two_amplification_hand_value() {
    let c = subsample_amplify(&gaussian_rdp(1.0), 0.01).unwrap();
    let e = std::f64::consts::E;
    let expected = (1.0 + 1e-4 * (4.0 * (e - 1.0)).min(2.0 * e)).ln();
    assert!((c.at(2).unwrap() - expected).abs() < 1e-15);
    assert!((expected - 5.435e-4).abs() < 1e-6);
}

/// Straight-line evaluation in linear space for small orders.
fn linear_space_bound(sigma: f64, gamma: f64, alpha: u32) -> f64 {
    let eps = |j: u32| j as f64 / (2.0 * sigma * sigma);
    let binom = |n: u32, k: u32| (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64);
    let e2 = eps(2);
    let mut s =
        1.0 + gamma * gamma * binom(alpha, 2) * (4.0 * (e2.exp() - 1.0)).min(2.0 * e2.exp());
    for j in 3..=alpha {
        s += gamma.powi(j as i32) * binom(alpha, j) * ((j - 1) as f64 * eps(j)).exp() * 2.0;
    }
    (s.ln() / (alpha - 1) as f64).min(eps(alpha))
}

#[test]
fn log_space_matches_linear_space() {
    for sigma in [0.7, 1.0, 2.5] {
        for gamma in [0.001, 0.02, 0.3] {
            let c = subsample_amplify(&gaussian_rdp(sigma), gamma).unwrap();
            for alpha in 2..=12 {
                let want = linear_space_bound(sigma, gamma, alpha);
                let got = c.at(alpha).unwrap();
                assert!(
                    (got - want).abs() <= 1e-10 * want.max(1e-12),
                    "σ={sigma} γ={gamma} α={alpha}"
                );
            }
        }
    }
}

#[test]
fn amplification_monotone_in_gamma_and_zero_at_zero() {
    let base = gaussian_rdp(1.2);
    let grid: Vec<f64> = (0..20).map(|i| i as f64 / 19.0 * 0.5).collect();
    let curves: Vec<RdpCurve> = grid
        .iter()
        .map(|&g| subsample_amplify(&base, g).unwrap())
        .collect();
    assert!(curves[0].epsilons.iter().all(|&e| e == 0.0));
    for w in curves.windows(2) {
        for (a, b) in w[0].epsilons.iter().zip(&w[1].epsilons) {
            assert!(b >= a, "not monotone: {a} then {b}");
        }
    }
}

#[test]
fn accountant_monotone_in_sigma_and_steps() {
    let sigmas = [0.5, 0.7, 1.0, 1.5, 2.0, 4.0];
    let eps: Vec<f64> = sigmas
        .iter()
        .map(|&s| epsilon_for(s, 0.04, 1500, 5e-4).unwrap().0)
        .collect();
    assert!(eps.windows(2).all(|w| w[1] <= w[0]));
    let by_t: Vec<f64> = [1u64, 10, 100, 1000]
        .iter()
        .map(|&t| epsilon_for(1.0, 0.04, t, 5e-4).unwrap().0)
        .collect();
    assert!(by_t.windows(2).all(|w| w[1] >= w[0]));
}

#[test]
fn calibration_round_trips() {
    for (target, delta, gamma, steps) in [
        (10.0, 5e-4, 64.0 / 1599.0, 1500u64),
        (1.0, 1e-5, 0.01, 10_000),
        (5.3026, 1e-5, 1.0, 1),
    ] {
        let sigma = calibrate(target, delta, gamma, steps).unwrap();
        let (achieved, _) = epsilon_for(sigma, gamma, steps, delta).unwrap();
        assert!(achieved <= target);
        assert!(
            target - achieved < 0.01 * target,
            "slack {} at σ={sigma}",
            target - achieved
        );
        let r = report(sigma, gamma, steps, delta).unwrap();
        assert_eq!(r.epsilon, achieved);
        assert!(r.internal_epsilon >= r.epsilon);
    }
    let sigma = calibrate(5.3026, 1e-5, 1.0, 1).unwrap();
    assert!((sigma - 1.0).abs() < 2e-3, "σ = {sigma}");
}

#[test]
fn doubling_steps_weakly_increases_sigma() {
    let mut prev = 0.0;
    for steps in [100u64, 200, 400, 800, 1600] {
        let s = calibrate(3.0, 1e-5, 0.02, steps).unwrap();
        assert!(s >= prev);
        prev = s;
    }
}

#[test]
fn noise_standard_deviation() {
    let (sigma, clip) = (0.8, 1.5);
    let zero = grad(vec![0.0; 10]);
    let mut rng = RngStream::derive(1, "dp-noise", 0, 0);
    let mut sum_sq = vec![0.0; 10];
    let reps = 10_000;
    for _ in 0..reps {
        let n = noise_gradients(&zero, sigma, clip, &mut rng);
        for (s, v) in sum_sq.iter_mut().zip(n.values()) {
            *s += v * v;
        }
    }
    let pooled = (sum_sq.iter().sum::<f64>() / (10 * reps) as f64).sqrt();
    assert!(
        (pooled / (2.0 * sigma * clip) - 1.0).abs() < 0.02,
        "std {pooled}"
    );

    let mut a = RngStream::derive(1, "dp-noise", 0, 0);
    let mut b = RngStream::derive(1, "dp-noise", 0, 0);
    assert_eq!(
        noise_gradients(&zero, sigma, clip, &mut a),
        noise_gradients(&zero, sigma, clip, &mut b)
    );
}

proptest! {
    #[test]
    fn clipping_bounds_norm_and_keeps_direction(
        values in proptest::collection::vec(-100.0f64..100.0, 2..30),
        clip in 0.01f64..50.0,
    ) {
        let g = grad(values);
        let c = clip_gradients(&g, clip);
        let (gn, cn) = (g.norm_sq().sqrt(), c.norm_sq().sqrt());
        prop_assert!(cn <= clip * (1.0 + 1e-12));
        if gn <= clip {
            prop_assert_eq!(&c, &g);
        }
        if gn > 0.0 {
            let dot: f64 = g.values().zip(c.values()).map(|(a, b)| a * b).sum();
            prop_assert!((dot / (gn * cn) - 1.0).abs() < 1e-12);
        }
    }
}
