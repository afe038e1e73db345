use proptest::prelude::*;

use super::quadratic_g;
use crate::gsolver::{
    asymptotic_g_limit, sensitivity_gap, FunctionalEquationSpec, GSolution, KTerm, LimitDiagnostics, Variant,
};
use crate::RVFunction;

fn general(alpha: f64, n: usize) -> GSolution {
    GSolution::new(FunctionalEquationSpec::general(RVFunction::power(alpha).unwrap(), n)).unwrap()
}

#[test]
fn quadratic_root_matches_bisection_oracle() {
    let sol = general(2.0, 1);
    for &l in &[5.0, 100.0, 1e3, 1e6] {
        let oracle = quadratic_g(l);
        let got = sol.solve(l).unwrap();
        assert!((got / oracle - 1.0).abs() < 1e-12, "ln Λ = {l}: {got} vs {oracle}");
    }
    assert!((quadratic_g(100.0) - 9.855_940_376_229_562).abs() < 1e-12);
}

#[test]
fn limit_ratios_approach_their_targets() {
    for &alpha in &[2.0, 3.0] {
        let sol = general(alpha, 1);
        let d = sol.limit_diagnostics(1e6).unwrap().as_array();
        let t = LimitDiagnostics::targets(alpha).as_array();
        for k in 0..4 {
            assert!((d[k] / t[k] - 1.0).abs() < 0.05, "alpha={alpha} entry {k}: {} vs {}", d[k], t[k]);
        }
    }
    let t3 = LimitDiagnostics::targets(3.0).as_array();
    assert_eq!(t3, [1.0 / 3.0, 0.5, 1.5, 1.0]);
}

#[test]
fn growth_matches_power_law_limit() {
    let sol = general(2.0, 1);
    let ratios: Vec<f64> = [1e2, 1e3, 1e4].iter().map(|&l: &f64| sol.solve(l).unwrap() / l.sqrt()).collect();
    let frozen = [0.98559, 0.99799, 0.99974];
    for (r, f) in ratios.iter().zip(frozen) {
        assert!((r - f).abs() < 1e-5, "{ratios:?}");
    }
    assert!(ratios.windows(2).all(|w| (w[1] - 1.0).abs() < (w[0] - 1.0).abs()));
    let sol3 = general(3.0, 1);
    let l = 1e6f64;
    let r3 = sol3.solve(l).unwrap() / l.powf(1.0 / 3.0);
    assert!((r3 / asymptotic_g_limit(3.0) - 1.0).abs() < 0.05, "{r3}");
}

#[test]
fn cancellation_defects_frozen_and_shrinking() {
    let sol = general(2.0, 1);
    let frozen = [
        (1e2, [0.00233392, -0.00475663, -0.0147199]),
        (1e3, [0.000227401, -0.000468114, -0.00145593]),
        (1e4, [2.2658e-5, -4.66883e-5, -0.000145282]),
    ];
    for (l, expect) in frozen {
        for (y, e) in [0.5, 2.0, 5.0].into_iter().zip(expect) {
            let d = sol.cancellation_defect(l, y, 1.0).unwrap();
            assert!((d / e - 1.0).abs() < 1e-4, "L={l} y={y}: {d} vs {e}");
        }
    }
    let d = sol.cancellation_defect(1e4, 2.0, 1.0).unwrap();
    assert!(d.abs() <= 0.1 * 2f64.ln());
}

#[test]
fn cancellation_defect_decays_like_inverse_log_lambda() {
    // the defect changes sign across y = 1 and shrinks in proportion to 1/ln Λ
    let sol = general(2.0, 1);
    for &y in &[0.5, 2.0, 7.0] {
        let d3 = sol.cancellation_defect(1e3, y, 1.0).unwrap();
        let d5 = sol.cancellation_defect(1e5, y, 1.0).unwrap();
        assert_eq!(d3.signum(), if y < 1.0 { 1.0 } else { -1.0 });
        assert!((d3 / d5 / 100.0 - 1.0).abs() < 0.05, "y={y}: {d3} {d5}");
    }
}

#[test]
fn sensitivity_to_log_coefficient_and_constant() {
    let f = RVFunction::power(2.0).unwrap();
    let k0 = KTerm::general(2.0, 1);
    let s0 = FunctionalEquationSpec::custom(f, 1, k0);
    let ln2 = 2f64.ln();
    let gap = sensitivity_gap(&s0, &FunctionalEquationSpec::custom(f, 1, k0.shifted(ln2)), 1e6).unwrap();
    assert!((gap / ln2 - 1.0).abs() < 0.05, "{gap}");
    let k1 = KTerm {
        log_coef: k0.log_coef + 1.0,
        ..k0
    };
    // a unit change in the ln y coefficient shifts the right side by ln g, seen as ln g in the gap
    let l = 1e6f64;
    let gap = sensitivity_gap(&s0, &FunctionalEquationSpec::custom(f, 1, k1), l).unwrap();
    let g = quadratic_g(l);
    assert!((gap / g.ln() - 1.0).abs() < 0.05, "{gap} vs ln g = {}", g.ln());
}

#[test]
fn g_zero_gap_tends_to_one_half_for_cubes() {
    let f = RVFunction::power(3.0).unwrap();
    let gz = FunctionalEquationSpec::new(f, 1, Variant::GZero);
    let gen = FunctionalEquationSpec::general(f, 1);
    // y f'''/f'' = 1 for cubes, so the ½ shift in k turns into a gap of ½
    let gap = sensitivity_gap(&gen, &gz, 1e5).unwrap();
    assert!((gap - 0.5).abs() < 0.075, "{gap}");
    let sq = RVFunction::power(2.0).unwrap();
    let gap2 = sensitivity_gap(
        &FunctionalEquationSpec::general(sq, 1),
        &FunctionalEquationSpec::new(sq, 1, Variant::GZero),
        1e5,
    )
    .unwrap();
    assert!(gap2.abs() < 1e-9, "f''' = 0 for squares: {gap2}");
}

#[test]
fn solution_is_slowly_varying() {
    let sol = general(2.0, 2);
    let l = 1e5f64;
    let r = sol.solve(l + 2f64.ln()).unwrap() / sol.solve(l).unwrap();
    assert!((r - 1.0).abs() < 0.01 && r > 1.0, "{r}");
}

proptest! {
    #[test]
    fn residual_is_small(ln_l in 3.0f64..1e6, alpha in 1.2f64..4.0, n in 1usize..=3) {
        let sol = general(alpha, n);
        let l = ln_l.max(sol.log_lambda_floor());
        let g = sol.solve(l).unwrap();
        prop_assert!(sol.residual(l, g).abs() <= 1e-10 * sol.rhs(l).abs().max(1.0));
    }

    #[test]
    fn solution_is_increasing(a in 3.0f64..1e5, b in 3.0f64..1e5, beta in 0.0f64..0.8) {
        prop_assume!((a - b).abs() > 1e-6 * a.max(b));
        let f = RVFunction::new(2.2, 1.0, Some(beta), 0.0).unwrap();
        let sol = GSolution::new(FunctionalEquationSpec::general(f, 2)).unwrap();
        let (lo, hi) = (a.min(b).max(sol.log_lambda_floor()), a.max(b));
        prop_assume!(hi > lo);
        prop_assert!(sol.solve(lo).unwrap() < sol.solve(hi).unwrap());
    }
}
