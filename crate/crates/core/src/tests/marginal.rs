use std::sync::{Arc, OnceLock};

use super::{ln_factorial_direct, trapezoid};
use crate::asymptotic::{AsymptoticMarginal, LogMarginal};
use crate::convdens::ConvolutionTable;
use crate::marginal::{density_solver, required_order, MarginalDensity, MarginalOptions};
use crate::numerics::log_sum_exp;
use crate::RVFunction;

/// Quadratic exponent on the line, tabulated to radius 120 with enough orders for t = √r, r ≤ 100.
fn shared_table() -> Arc<ConvolutionTable> {
    static TABLE: OnceLock<Arc<ConvolutionTable>> = OnceLock::new();
    TABLE
        .get_or_init(|| {
            let f = RVFunction::power(2.0).unwrap();
            let cap = [30.0f64, 60.0, 100.0]
                .iter()
                .map(|&r| required_order(&f, 1, r.sqrt(), 120.0, 5.0).unwrap())
                .max()
                .unwrap();
            Arc::new(ConvolutionTable::build(&f, 1, cap, 120.0, 256).unwrap())
        })
        .clone()
}

#[test]
fn planar_gaussian_mixture_matches_series() {
    let pi = std::f64::consts::PI;
    let (t, r) = (0.5f64, 6.0f64);
    // ν = e^{-|z|²} in the plane has mass π and ν^{*m} = π^{m-1}/m · e^{-r²/m}
    let terms: Vec<f64> = (1..=150)
        .map(|m| {
            let mf = m as f64;
            -pi * t + mf * t.ln() - ln_factorial_direct(m) + (mf - 1.0) * pi.ln() - mf.ln() - r * r / mf
        })
        .collect();
    let oracle = log_sum_exp(&terms);
    let f = RVFunction::power(2.0).unwrap();
    let md = MarginalDensity::build(&f, 2, t, 8.0, MarginalOptions::default()).unwrap();
    let got = md.eval(r).unwrap().log_density;
    assert!((got - oracle).abs() < 1e-8, "{got} vs {oracle}");
}

#[test]
fn tiny_time_is_one_jump() {
    let f = RVFunction::power(1.5).unwrap();
    let t = 1e-6;
    let md = MarginalDensity::build(&f, 1, t, 6.0, MarginalOptions::default()).unwrap();
    let a = f.jump_measure_mass(1).unwrap();
    for &r in &[0.5, 2.0, 5.0] {
        let v = md.eval(r).unwrap();
        assert_eq!(v.dominant_m, 1);
        let single = t.ln() - a * t - f.eval(r);
        assert!((v.log_density - single).abs() < 1e-4, "r={r}");
    }
}

#[test]
fn dominant_order_tracks_radius_over_typical_jump() {
    let md_for = |r: f64| MarginalDensity::with_table(shared_table(), r.sqrt(), None).unwrap();
    let sol = density_solver(&RVFunction::power(2.0).unwrap(), 1).unwrap();
    for &r in &[30.0f64, 60.0, 100.0] {
        let t = r.sqrt();
        let m = md_for(r).eval(r).unwrap().dominant_m as f64;
        let predicted = r / sol.solve((r / t).ln()).unwrap();
        assert!((m - predicted).abs() <= 2.0, "r={r}: m*={m} predicted {predicted}");
    }
}

#[test]
fn terms_decay_geometrically_past_the_peak() {
    let md = MarginalDensity::with_table(shared_table(), 60f64.sqrt(), None).unwrap();
    let m_star = md.eval(60.0).unwrap().dominant_m;
    let start = m_star + 3 * (m_star as f64).sqrt().ceil() as usize;
    let terms: Vec<f64> = (start..md.m_cap()).map(|m| md.log_term(m, 60.0)).collect();
    assert!(terms.windows(2).all(|w| w[1] < w[0]));
    let steps: Vec<f64> = terms.windows(2).map(|w| w[1] - w[0]).collect();
    assert!(steps.windows(2).all(|w| w[1] <= w[0] + 1e-9), "ratios must shrink");
}

#[test]
fn tail_mass_is_decreasing() {
    let md = MarginalDensity::with_table(shared_table(), 60f64.sqrt(), None).unwrap();
    let tails: Vec<f64> = (3..=9).map(|k| md.log_tail_mass(10.0 * k as f64).unwrap()).collect();
    assert!(tails.windows(2).all(|w| w[1] < w[0]), "{tails:?}");
}

#[test]
fn tail_mass_matches_trapezoid_of_density() {
    let f = RVFunction::power(2.0).unwrap();
    let md = MarginalDensity::build(&f, 1, 2.0, 20.0, MarginalOptions::default()).unwrap();
    let lam = 5.0;
    let dens = |r: f64| md.eval(r).unwrap().log_density.exp();
    // the line has two tails
    let oracle = (2.0 * trapezoid(dens, lam, 20.0, 60_000)).ln();
    let got = md.log_tail_mass(lam).unwrap();
    assert!((got - oracle).abs() < 1e-6, "{got} vs {oracle}");
}

#[test]
fn marginals_compose_over_time() {
    // μ_{t+s} = μ_t * μ_s + P(L_t = 0) μ_s + P(L_s = 0) μ_t
    let f = RVFunction::power(1.5).unwrap();
    let (t, s) = (0.7, 1.3);
    let opts = MarginalOptions::default();
    let mt = MarginalDensity::build(&f, 1, t, 30.0, opts).unwrap();
    let ms = MarginalDensity::build(&f, 1, s, 30.0, opts).unwrap();
    let mts = MarginalDensity::build(&f, 1, t + s, 30.0, opts).unwrap();
    let d = |m: &MarginalDensity, y: f64| m.eval(y.abs()).unwrap().log_density.exp();
    for &x in &[0.5f64, 2.0, 5.0] {
        let h = |y: f64| d(&mt, y) * d(&ms, x - y);
        let conv = trapezoid(h, -24.0, 0.0, 40_000) + trapezoid(h, 0.0, x, 40_000) + trapezoid(h, x, x + 24.0, 40_000);
        let atoms = mt.log_atom().exp() * d(&ms, x) + ms.log_atom().exp() * d(&mt, x);
        let oracle = (conv + atoms).ln();
        let got = mts.eval(x).unwrap().log_density;
        assert!((got - oracle).abs() < 1e-5, "x={x}: {got} vs {oracle}");
    }
}

#[test]
fn leading_order_ratio_drifts_towards_one() {
    // ln μ_t(r) / (-r(f'(g) - 1/g)) with g = g(r/t); convergence is logarithmic
    let f = RVFunction::power(2.0).unwrap();
    let am = AsymptoticMarginal::new(&f, 1).unwrap();
    let sol = density_solver(&f, 1).unwrap();
    let t = 10.0;
    let ratios: Vec<f64> = [1e2f64, 1e4, 1e6, 1e9]
        .iter()
        .map(|&r| {
            let g = sol.solve((r / t).ln()).unwrap();
            am.log_density(t, r).unwrap().total() / (-r * (f.d1(g) - 1.0 / g))
        })
        .collect();
    assert!(ratios.windows(2).all(|w| (w[1] - 1.0).abs() < (w[0] - 1.0).abs()), "{ratios:?}");
    assert!((ratios[3] - 1.0).abs() < 0.2, "{ratios:?}");
}
