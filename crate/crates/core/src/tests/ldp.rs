use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{bisection, quadratic_g};
use crate::bridge::{Backend, BridgeConfig, BridgeModel, BridgeOptions, BridgePath, SamplingMethod, TimeScale};
use crate::ldp::{
    count_normalization, d_alpha, dtilde_consistency, finite_dim_rate, jump_statistics, path_rate,
    scaled_bridge_logdensity_defect, speed_function, RateViolation,
};
use crate::RVFunction;

fn config(alpha: f64, x: Vec<f64>, log_eps: f64, scale: TimeScale, horizon: f64) -> BridgeConfig {
    let n = x.len();
    BridgeConfig::new(RVFunction::power(alpha).unwrap(), n, log_eps, scale, horizon, x, 0).unwrap()
}

/// Knots `(t_k, θ_k x)` for sorted times and fractions, with the end points added.
fn segment_knots(x: &[f64], horizon: f64, times: &[f64], thetas: &[f64]) -> Vec<(f64, Vec<f64>)> {
    let mut knots = vec![(0.0, vec![0.0; x.len()])];
    for (&t, &th) in times.iter().zip(thetas) {
        knots.push((t, x.iter().map(|v| th * v).collect()));
    }
    knots.push((horizon, x.to_vec()));
    knots
}

/// Entropy rate of a monotone path along the segment, from its fractions alone.
fn rate_oracle(xn: f64, horizon: f64, times: &[f64], thetas: &[f64]) -> f64 {
    let mut t = vec![0.0];
    t.extend_from_slice(times);
    t.push(horizon);
    let mut th = vec![0.0];
    th.extend_from_slice(thetas);
    th.push(1.0);
    let mut total = -xn * (xn / horizon).ln();
    for k in 1..t.len() {
        let d = xn * (th[k] - th[k - 1]);
        if d > 0.0 {
            total += d * (d / (t[k] - t[k - 1])).ln();
        }
    }
    total
}

fn sorted_inside(rng: &mut ChaCha8Rng, k: usize, hi: f64) -> Vec<f64> {
    let mut v: Vec<f64> = (0..k).map(|_| rng.random_range(0.0..hi)).collect();
    v.sort_by(f64::total_cmp);
    v
}

#[test]
fn rate_matches_oracle_on_random_configurations() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for _ in 0..20 {
        let n = rng.random_range(1..=3);
        let x: Vec<f64> = (0..n).map(|_| rng.random_range(-3.0..3.0)).collect();
        let horizon = rng.random_range(0.2..5.0);
        let cfg = config(2.0, x.clone(), -20.0, TimeScale::Rho(0.0), horizon);
        let k = rng.random_range(1..6);
        let mut times = sorted_inside(&mut rng, k, horizon);
        times.dedup();
        let thetas = sorted_inside(&mut rng, times.len(), 1.0);
        let got = finite_dim_rate(&cfg, &times, &thetas.iter().map(|th| x.iter().map(|v| th * v).collect()).collect::<Vec<_>>())
            .unwrap();
        let oracle = rate_oracle(cfg.endpoint_norm(), horizon, &times, &thetas);
        assert!(got.admissible);
        assert!((got.value - oracle).abs() < 1e-12 * oracle.abs().max(1.0), "{} vs {oracle}", got.value);
    }
}

proptest! {
    #[test]
    fn rate_is_nonnegative_and_zero_only_for_constant_speed(
        seed in any::<u64>(),
        k in 1usize..8,
        horizon in 0.1f64..10.0,
    ) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x = vec![1.5, -0.5];
        let cfg = config(2.0, x.clone(), -20.0, TimeScale::Rho(0.0), horizon);
        let times = sorted_inside(&mut rng, k, horizon);
        let thetas = sorted_inside(&mut rng, k, 1.0);
        let r = path_rate(&cfg, &segment_knots(&x, horizon, &times, &thetas)).unwrap();
        prop_assert!(r.value >= -1e-12);
        let uniform: Vec<f64> = times.iter().map(|t| t / horizon).collect();
        let lin = path_rate(&cfg, &segment_knots(&x, horizon, &times, &uniform)).unwrap();
        prop_assert!(lin.value.abs() < 1e-12);
        let spread = thetas.iter().zip(&uniform).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        if spread > 1e-2 {
            prop_assert!(r.value > 0.0);
        }
    }

    #[test]
    fn inserting_a_collinear_knot_changes_nothing(seed in any::<u64>(), k in 1usize..6, w in 0.01f64..0.99) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x = vec![2.0];
        let cfg = config(2.0, x.clone(), -20.0, TimeScale::Rho(0.0), 1.0);
        let times = sorted_inside(&mut rng, k, 1.0);
        let thetas = sorted_inside(&mut rng, k, 1.0);
        let knots = segment_knots(&x, 1.0, &times, &thetas);
        let j = rng.random_range(0..knots.len() - 1);
        let (t0, p0) = &knots[j];
        let (t1, p1) = &knots[j + 1];
        prop_assume!(t1 - t0 > 1e-9);
        let mid = (t0 + w * (t1 - t0), p0.iter().zip(p1).map(|(a, b)| a + w * (b - a)).collect());
        let mut refined = knots.clone();
        refined.insert(j + 1, mid);
        let a = path_rate(&cfg, &knots).unwrap().value;
        let b = path_rate(&cfg, &refined).unwrap().value;
        prop_assert!((a - b).abs() < 1e-12 * a.abs().max(1.0));
    }
}

#[test]
fn backtracking_and_detours_are_inadmissible() {
    let x = vec![1.0, 1.0];
    let cfg = config(2.0, x.clone(), -20.0, TimeScale::Rho(0.0), 1.0);
    let back = segment_knots(&x, 1.0, &[0.3, 0.6], &[0.6, 0.4]);
    let r = path_rate(&cfg, &back).unwrap();
    assert_eq!(r.violations, vec![RateViolation::NonMonotoneNorm]);
    let detour = vec![(0.0, vec![0.0, 0.0]), (0.5, vec![0.5, 0.6]), (1.0, x.clone())];
    let r = path_rate(&cfg, &detour).unwrap();
    assert!(!r.admissible && r.value == f64::INFINITY);
    let json = serde_json::to_string(&r).unwrap();
    assert!(json.contains("\"inf\"") && json.contains("off-segment"), "{json}");
    // within the tolerance still counts as on the segment
    let nudged = vec![(0.0, vec![0.0, 0.0]), (0.5, vec![0.5, 0.5 + 1e-11]), (1.0, x)];
    assert!(path_rate(&cfg, &nudged).unwrap().admissible);
}

#[test]
fn speed_at_tiny_epsilon_matches_oracle() {
    let cfg = config(2.0, vec![1.0], -100.0, TimeScale::Rho(0.0), 1.0);
    let s = speed_function(&cfg).unwrap();
    let oracle = (-100.0f64).exp() * quadratic_g(100.0);
    assert!((s / oracle - 1.0).abs() < 1e-12);
}

#[test]
fn speed_decreases_along_geometric_epsilons() {
    let s: Vec<f64> = (1..=10)
        .map(|k| speed_function(&config(2.5, vec![1.0, 0.0], -10.0 * k as f64, TimeScale::Rho(0.0), 1.0)).unwrap())
        .collect();
    assert!(s.windows(2).all(|w| w[1] < w[0]), "{s:?}");
}

#[test]
fn time_scaling_slows_the_speed() {
    let s0 = speed_function(&config(2.0, vec![1.0], -100.0, TimeScale::Rho(0.0), 1.0)).unwrap();
    let s5 = speed_function(&config(2.0, vec![1.0], -100.0, TimeScale::Rho(0.5), 1.0)).unwrap();
    let ratio = s5 / s0;
    let oracle = quadratic_g(50.0) / quadratic_g(100.0);
    assert!((ratio - oracle).abs() < 1e-12, "{ratio} vs {oracle}");
    assert!((ratio - 0.699_256_3).abs() < 1e-7);
}

#[test]
fn count_normalization_matches_direct_formulas() {
    let cfg = config(2.0, vec![1.0], 0.02f64.ln(), TimeScale::Rho(0.0), 1.0);
    let (g, m, k, k_short) = count_normalization(&cfg).unwrap();
    let g_oracle = quadratic_g(50f64.ln());
    assert!((g / g_oracle - 1.0).abs() < 1e-12);
    assert!((m - 50.0 / g_oracle).abs() < 1e-10);
    assert!((k_short - 2.0 * 0.02 * g_oracle).abs() < 1e-12);
    assert!((k / k_short - 50f64.ln()).abs() < 1e-12);
}

#[test]
fn standardized_increment_separates_along_and_across() {
    let alpha = 3.0;
    let x = vec![0.6, 0.8];
    let cfg = BridgeConfig::new(RVFunction::power(alpha).unwrap(), 2, -3.0, TimeScale::Rho(0.0), 1.0, x.clone(), 0).unwrap();
    let (g, ..) = count_normalization(&cfg).unwrap();
    let perp = [-0.8, 0.6];
    let (a, b) = (0.3, -0.7);
    let w: Vec<f64> = (0..2).map(|i| (g + a) * x[i] + b * perp[i]).collect();
    let path = BridgePath {
        jump_times: vec![0.5],
        jumps: vec![w],
        count: 1,
        method_flag: SamplingMethod::Rejection,
    };
    let stats = jump_statistics(&cfg, &[path]).unwrap();
    let root = (6.0 * g).sqrt();
    let expect: Vec<f64> = (0..2).map(|i| root * (a * x[i] + b / (alpha - 1.0) * perp[i])).collect();
    for i in 0..2 {
        assert!((stats.standardized_increments[0][i] - expect[i]).abs() < 1e-12);
    }
    assert!(jump_statistics(&cfg, &[]).is_err());
}

#[test]
fn tail_constant_ratios_drift_to_one() {
    // for squares q = √L and D̃ε = 2√L, against f'(g) = 2g with g from the bisection oracle
    let mut prev = f64::INFINITY;
    for k in 1..=5 {
        let l = 10f64.powi(k);
        let d = dtilde_consistency(&config(2.0, vec![1.0], -l, TimeScale::Rho(0.0), 1.0)).unwrap();
        let g = quadratic_g(l);
        assert!((d.q - l.sqrt()).abs() < 1e-9 * l.sqrt());
        assert!((d.ratio_leading - l.sqrt() / g).abs() < 1e-11);
        assert!((d.ratio_with_correction - 2.0 * l.sqrt() / (2.0 * g + 1.0 / g)).abs() < 1e-11);
        assert!((d.ratio_with_correction - 1.0).abs() <= prev);
        prev = (d.ratio_with_correction - 1.0).abs();
    }
    assert!(prev < 3e-5, "{prev}");
    assert_eq!(d_alpha(2.0), 2.0);
    let a = 3.0;
    let oracle = a / bisection(|c| c.powf(1.0 / (1.0 - 1.0 / a)) - (a - 1.0), 0.1, 10.0);
    assert!((d_alpha(a) - oracle).abs() < 1e-12);
}

#[test]
fn scaled_log_density_approaches_the_rate() {
    let opts = BridgeOptions {
        backend: Backend::Asymptotic,
        ..Default::default()
    };
    let mut on = Vec::new();
    let mut off = Vec::new();
    for &l in &[20.0, 30.0, 40.0] {
        let model = BridgeModel::new(config(2.0, vec![1.0, 0.0], -l, TimeScale::Rho(0.0), 1.0), opts).unwrap();
        on.push(scaled_bridge_logdensity_defect(&model, 0.75, &[0.5, 0.0]).unwrap().abs());
        off.push(scaled_bridge_logdensity_defect(&model, 0.5, &[0.5, 0.3]).unwrap());
    }
    assert!(on.windows(2).all(|w| w[1] < w[0]), "{on:?}");
    assert!(off.windows(2).all(|w| w[1] > w[0]), "{off:?}");
}
