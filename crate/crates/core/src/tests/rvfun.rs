use proptest::prelude::*;

use super::trapezoid;
use crate::rvfun::{sphere_area, RVFunction};

fn close(a: f64, b: f64, rel: f64, scale: f64) -> bool {
    (a - b).abs() <= rel * (b.abs() + scale)
}

proptest! {
    #[test]
    fn power_jet_matches_symbolic_derivatives(ln_x in (0.1f64).ln()..(1e8f64).ln(), alpha in 1.05f64..4.0) {
        let f = RVFunction::power(alpha).unwrap();
        let x = ln_x.exp();
        let j = f.jet(x);
        let base = x.powf(alpha);
        let exact = [
            base,
            alpha * x.powf(alpha - 1.0),
            alpha * (alpha - 1.0) * x.powf(alpha - 2.0),
            alpha * (alpha - 1.0) * (alpha - 2.0) * x.powf(alpha - 3.0),
        ];
        for k in 0..4 {
            // scale guards the α ≈ 2 zero of the third derivative
            let scale = alpha.powi(k as i32) * x.powf(alpha - k as f64);
            prop_assert!(close(j[k], exact[k], 1e-12, scale), "k={} {} vs {}", k, j[k], exact[k]);
        }
    }

    #[test]
    fn inverse_round_trips(y in 0.0f64..1e6, alpha in 1.1f64..3.5, beta in 0.0f64..1.0) {
        let f = RVFunction::new(alpha, 1.0, Some(beta), 0.0).unwrap();
        let x = f.inverse(y).unwrap();
        prop_assert!(close(f.eval(x), y, 1e-11, 1e-12));
    }

    #[test]
    fn perturbed_family_is_convex_above_threshold(alpha in 1.2f64..3.0, beta in -0.5f64..1.0, t in 0.0f64..1.0) {
        let f = RVFunction::new(alpha, 1.0, Some(beta), 0.0).unwrap();
        let x = f.convexity_threshold() * 1.001 + t * 1e4;
        prop_assume!(x > 0.0);
        let j = f.jet(x);
        prop_assert!(j[1] > 0.0 && j[2] > 0.0, "x={} jet={:?}", x, j);
    }
}

#[test]
fn index_ratio_tends_to_alpha() {
    let f = RVFunction::new(2.5, 1.0, Some(0.8), 0.0).unwrap();
    let gaps: Vec<f64> = [1e2, 1e4, 1e8, 1e12].iter().map(|&x| (f.index_ratio(x) - 2.5).abs()).collect();
    assert!(gaps.windows(2).all(|w| w[1] < w[0]), "{gaps:?}");
    assert!(gaps[3] < 0.03);
}

#[test]
fn slowly_perturbed_power_is_regularly_varying() {
    let f = RVFunction::new(1.7, 2.0, Some(0.5), 0.0).unwrap();
    for &lam in &[0.5f64, 3.0, 20.0] {
        let ratio = f.eval(lam * 1e9) / f.eval(1e9);
        assert!((ratio / lam.powf(1.7) - 1.0).abs() < 0.01, "lam={lam} ratio={ratio}");
    }
}

#[test]
fn mass_near_unit_exponent_matches_trapezoid_oracle() {
    // ∫ e^{-|x|^α} dx = 2∫ exp(-e^{αu}) e^u du; the substituted integrand decays doubly exponentially
    let alpha = 1.0001;
    let oracle = 2.0 * trapezoid(|u: f64| (-(alpha * u).exp()).exp() * u.exp(), -40.0, 5.0, 200_000);
    let f = RVFunction::power(alpha).unwrap();
    let got = f.jump_measure_mass(1).unwrap();
    assert!((got / oracle - 1.0).abs() < 1e-8, "{got} vs {oracle}");
}

#[test]
fn perturbed_mass_matches_radial_trapezoid() {
    let f = RVFunction::new(2.0, 1.0, Some(0.4), 0.0).unwrap();
    for n in 1..=3 {
        let radial = trapezoid(|r: f64| r.powi(n as i32 - 1) * (-f.eval(r)).exp(), 0.0, 12.0, 400_000);
        let oracle = sphere_area(n) * radial;
        let got = f.jump_measure_mass(n).unwrap();
        assert!((got / oracle - 1.0).abs() < 1e-8, "n={n}: {got} vs {oracle}");
    }
}

#[test]
fn sphere_areas() {
    let pi = std::f64::consts::PI;
    assert_eq!(sphere_area(1), 2.0);
    assert!((sphere_area(2) - 2.0 * pi).abs() < 1e-14);
    assert!((sphere_area(3) - 4.0 * pi).abs() < 1e-13);
}

#[test]
fn rejects_bad_parameters() {
    assert!(RVFunction::power(1.0).is_err());
    assert!(RVFunction::power(f64::NAN).is_err());
    assert!(RVFunction::new(2.0, 0.0, None, 0.0).is_err());
    assert!(RVFunction::new(2.0, 1.0, None, -1.0).is_err());
}
