//! Property tests for the learners, mechanisms and oracles.

use std::sync::Arc;

use banco_core::direction::{direction_regret, DirectionState};
use banco_core::magnitude::{ln_magnitude, magnitude_closed_form, BettingState, K1};
use banco_core::noise::ldp_ratio_check;
use banco_core::vecops::norm;
use banco_core::{
    banco_run, NoiseModel, NoiseSampler, PrivacyLedger, ProblemSpec, RunConfig, SanitizedOracle, SharedLedger,
};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn stream(dim: usize, len: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..len)
        .map(|_| {
            let scale = 10f64.powf(rng.random_range(-3.0..3.0));
            (0..dim).map(|_| scale * rng.random_range(-1.0..1.0)).collect()
        })
        .collect()
}

fn trajectory(gradients: &[Vec<f64>], c: f64) -> Vec<Vec<f64>> {
    let mut s = DirectionState::new(gradients[0].len()).unwrap();
    gradients
        .iter()
        .map(|g| {
            let scaled: Vec<f64> = g.iter().map(|v| v * c).collect();
            s.update(&scaled).unwrap();
            s.direction().to_vec()
        })
        .collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn direction_stays_in_unit_ball(dim in prop::sample::select(vec![1usize, 2, 10, 100]), len in 1usize..80, seed in any::<u64>()) {
        let g = stream(dim, len, seed);
        for q in trajectory(&g, 1.0) {
            prop_assert!(norm(&q) <= 1.0 + 1e-12);
        }
    }

    #[test]
    fn direction_is_scale_free(dim in 1usize..12, len in 1usize..80, seed in any::<u64>(), log_c in -3.0f64..3.0) {
        let g = stream(dim, len, seed);
        let c = 10f64.powf(log_c);
        // relative to the trajectory's scale: an update can cancel a
        // coordinate down to rounding level, where pointwise ratios are noise
        let mut scale = 0.0f64;
        for (q, q2) in trajectory(&g, 1.0).iter().zip(trajectory(&g, c)) {
            scale = scale.max(norm(q));
            let dev: f64 = q.iter().zip(&q2).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
            prop_assert!(dev <= 1e-10 * scale.max(f64::MIN_POSITIVE), "{q:?} vs {q2:?}");
        }
    }

    #[test]
    fn magnitude_is_odd(x in -1e4f64..1e4, y in 1e-3f64..1e6, a in 1e-3f64..K1) {
        let p = ln_magnitude(x, y, a).unwrap();
        let n = ln_magnitude(-x, y, a).unwrap();
        prop_assert_eq!(p.sign, -n.sign);
        prop_assert_eq!(p.ln_abs, n.ln_abs);
        prop_assert_eq!(magnitude_closed_form(-x, y, a).unwrap(), -magnitude_closed_form(x, y, a).unwrap());
    }

    #[test]
    fn magnitude_is_nondecreasing_in_coin_sum(x in -200.0f64..200.0, dx in 0.0f64..5.0, y in 1e-3f64..1e4, a in 1e-3f64..K1) {
        let lo = magnitude_closed_form(x, y, a).unwrap();
        let hi = magnitude_closed_form(x + dx, y, a).unwrap();
        // a few ulps of slack for the branch switches
        prop_assert!(hi >= lo - 8.0 * f64::EPSILON * lo.abs().max(hi.abs()), "m({x})={lo} > m({})={hi}", x + dx);
    }

    #[test]
    fn ldp_ratio_is_bounded(eps in prop::sample::select(vec![0.5, 1.0, 2.0]), seed in any::<u64>(), dim in 1usize..6) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let model = NoiseModel::laplace(eps, dim).unwrap();
        let mut in_ball = || {
            let v: Vec<f64> = (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect();
            let n = norm(&v);
            let r: f64 = rng.random();
            v.iter().map(|x| x / n.max(1.0) * r).collect::<Vec<f64>>()
        };
        let (g, g2) = (in_ball(), in_ball());
        let probes: Vec<Vec<f64>> = (0..8).map(|_| (0..dim).map(|_| 5.0 * rng.random_range(-1.0..1.0)).collect()).collect();
        let ratio = ldp_ratio_check(&model, &g, &g2, &probes).unwrap();
        let gap: f64 = g.iter().zip(&g2).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
        prop_assert!(ratio <= eps / 2.0 * gap + 1e-12);
    }

    #[test]
    fn raw_subgradients_are_bounded(kind in 0usize..4, seed in any::<u64>(), dim in 1usize..8, r in 0.0f64..50.0) {
        let spec = match kind {
            0 => ProblemSpec::PointMassAbs { dim, w_star_norm: r },
            1 => ProblemSpec::NoisyAbs { dim, w_star_norm: r, spread: 1.0 },
            2 => ProblemSpec::Logistic { dim, w_star_norm: r.min(5.0) },
            _ => ProblemSpec::NoisyAbs { dim, w_star_norm: r, spread: 0.0 },
        };
        let p = spec.build().unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for _ in 0..50 {
            let w: Vec<f64> = (0..dim).map(|_| rng.random_range(-60.0..60.0)).collect();
            let g = p.raw_subgradient(&w, &mut rng).unwrap();
            prop_assert!(norm(&g) <= 1.0 + 1e-12);
        }
    }

    #[test]
    fn samplers_repeat_under_equal_seeds(seed in any::<u64>(), dim in 1usize..20, eps in 0.1f64..4.0) {
        for model in [NoiseModel::laplace(eps, dim).unwrap(), NoiseModel::gaussian(eps, dim).unwrap()] {
            let s = NoiseSampler::new(model).unwrap();
            let mut a = ChaCha8Rng::seed_from_u64(seed);
            let mut b = ChaCha8Rng::seed_from_u64(seed);
            for _ in 0..5 {
                prop_assert_eq!(s.sample(&mut a), s.sample(&mut b));
            }
        }
    }

    #[test]
    fn ledger_counts_one_charge_per_request(horizon in 1u64..300, seed in any::<u64>()) {
        let p = Arc::new(ProblemSpec::NoisyAbs { dim: 3, w_star_norm: 2.0, spread: 1.0 }.build().unwrap());
        let noise = NoiseModel::laplace(1.0, 3).unwrap();
        let ledger = SharedLedger::new(PrivacyLedger::new(1.0));
        let mut oracle = SanitizedOracle::new(p, noise, ledger.clone(), "run", seed).unwrap();
        let cfg = RunConfig { dim: 3, g_bound: 1.0, noise, horizon };
        let run = banco_run(&cfg, &mut oracle, false).unwrap();
        prop_assert_eq!(run.oracle_calls, horizon);
        prop_assert_eq!(ledger.request_count(), horizon);
        prop_assert_eq!(ledger.run_count("run"), horizon);
    }
}

#[test]
fn raw_hinge_subgradients_are_bounded_over_a_million_samples() {
    let p = ProblemSpec::Hinge { dim: 5, w_star_norm: 1.0, label_noise: 0.1 }.build().unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let mut w = vec![0.0; 5];
    let mut worst = 0.0f64;
    for k in 0..1_000_000 {
        if k % 1000 == 0 {
            w = (0..5).map(|_| rng.random_range(-3.0..3.0)).collect();
        }
        worst = worst.max(norm(&p.raw_subgradient(&w, &mut rng).unwrap()));
    }
    assert!(worst <= 1.0 + 1e-12, "{worst}");
}

#[test]
fn zero_steps_bet_nothing() {
    let s = BettingState::new(K1, 13.0).unwrap();
    assert_eq!(s.magnitude(), 0.0);
    assert_eq!(s.step(), 0);
}

/// `ln Σ_{t≤T} m_t` for the constant coin stream, evaluated in log space
/// because `m_t` leaves double range after a few thousand steps.
fn ln_cumulative_bet(horizon: u64, y_per_step: f64) -> f64 {
    let mut s = BettingState::new(K1, y_per_step).unwrap();
    let mut acc = f64::NEG_INFINITY;
    for _ in 0..horizon {
        // m_t is the bet before the t-th coin
        let m = s.ln_magnitude();
        if !m.is_zero() {
            assert_eq!(m.sign, 1.0);
            let hi = acc.max(m.ln_abs);
            acc = hi + ((acc - hi).exp() + (m.ln_abs - hi).exp()).ln();
        }
        s.update(1.0).unwrap();
    }
    acc
}

#[test]
fn magnitude_regret_is_sublinear_on_constant_coins() {
    // R_T(v)/T = v − (Σ m_t)/T, so the comparison is the same for every v
    for y_per_step in [1.0, 13.0] {
        let early = ln_cumulative_bet(1_000, y_per_step) - 1e3f64.ln();
        let late = ln_cumulative_bet(100_000, y_per_step) - 1e5f64.ln();
        assert!(late > early, "y/step {y_per_step}: {late} vs {early}");
    }
}

#[test]
fn magnitude_regret_is_sublinear_on_biased_coins() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let coins: Vec<f64> = (0..100_000).map(|_| if rng.random::<f64>() < 0.55 { 1.0 } else { -1.0 }).collect();
    for v in [0.0, 1.0, 10.0, 100.0] {
        let regret = |horizon: usize| {
            let mut s = BettingState::new(K1, 13.0).unwrap();
            let mut r = 0.0;
            for &c in &coins[..horizon] {
                r += c * (v - s.magnitude());
                s.update(c).unwrap();
            }
            r / horizon as f64
        };
        assert!(regret(100_000) < regret(1_000), "v={v}");
    }
}

#[test]
fn direction_regret_is_sublinear_under_laplace_noise() {
    let model = NoiseModel::laplace(1.0, 2).unwrap();
    let sampler = NoiseSampler::new(model).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let gradients: Vec<Vec<f64>> = (0..100_000)
        .map(|_| {
            let xi = sampler.sample(&mut rng);
            vec![1.0 + xi[0], xi[1]]
        })
        .collect();
    let avg_regret = |horizon: usize| {
        let g = &gradients[..horizon];
        let mut s = DirectionState::new(2).unwrap();
        let dirs: Vec<Vec<f64>> = g
            .iter()
            .map(|gi| {
                let q = s.direction().to_vec();
                s.update(gi).unwrap();
                q
            })
            .collect();
        direction_regret(g, &dirs, &[1.0, 0.0]).unwrap() / horizon as f64
    };
    assert!(avg_regret(100_000) < avg_regret(1_000));
}
