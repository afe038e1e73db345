//! Smoothly regularly varying jump exponents.
//!
//! The jump measure of the underlying compound Poisson process has density
//! `exp(-f(|z|))` on `R^n` with
//!
//! ```text
//! f(x) = c · x^α · (1 + β / ln(e + x)),   x ≥ x₀,
//! ```
//!
//! and `f(x) = f(x₀)` for `x < x₀`. All derivatives are closed form.

use std::f64::consts::{E, PI};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::quad::{integrate, Tolerance};
use crate::numerics::root::{bisect, expand_upward};

/// Largest dimension supported by the radial machinery.
pub const MAX_DIM: usize = 3;

/// Serialized parameter set of an [`RVFunction`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RVParams {
    pub alpha: f64,
    #[serde(default = "one")]
    pub scale: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beta: Option<f64>,
    #[serde(default)]
    pub domain_floor: f64,
}

fn one() -> f64 {
    1.0
}

/// Jump exponent `f ∈ SR_α` from the parametric family above.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(into = "RVParams", try_from = "RVParams")]
pub struct RVFunction {
    alpha: f64,
    scale: f64,
    beta: Option<f64>,
    domain_floor: f64,
    convexity_threshold: f64,
}

impl From<RVFunction> for RVParams {
    fn from(f: RVFunction) -> Self {
        RVParams {
            alpha: f.alpha,
            scale: f.scale,
            beta: f.beta,
            domain_floor: f.domain_floor,
        }
    }
}

impl TryFrom<RVParams> for RVFunction {
    type Error = Error;
    fn try_from(p: RVParams) -> Result<Self> {
        RVFunction::new(p.alpha, p.scale, p.beta, p.domain_floor)
    }
}

/// Surface area of the unit sphere `S^{n-1}` in `R^n`.
pub fn sphere_area(n: usize) -> f64 {
    match n {
        1 => 2.0,
        2 => 2.0 * PI,
        3 => 4.0 * PI,
        _ => 2.0 * PI.powf(n as f64 / 2.0) / statrs::function::gamma::gamma(n as f64 / 2.0),
    }
}

pub(crate) fn check_dim(n: usize) -> Result<()> {
    if (1..=MAX_DIM).contains(&n) {
        Ok(())
    } else {
        Err(Error::invalid(format!("dimension must be 1, 2 or 3, got {n}")))
    }
}

impl RVFunction {
    pub fn new(alpha: f64, scale: f64, beta: Option<f64>, domain_floor: f64) -> Result<Self> {
        if !(alpha > 1.0) || !alpha.is_finite() {
            return Err(Error::invalid(format!("alpha must exceed 1, got {alpha}")));
        }
        if !(scale > 0.0) || !scale.is_finite() {
            return Err(Error::invalid(format!("scale must be positive, got {scale}")));
        }
        if let Some(b) = beta {
            if !(b > -1.0) || !b.is_finite() {
                return Err(Error::invalid(format!("beta must exceed -1, got {b}")));
            }
        }
        if !(domain_floor >= 0.0) || !domain_floor.is_finite() {
            return Err(Error::invalid(format!("domain_floor must be non-negative, got {domain_floor}")));
        }
        let beta = beta.filter(|&b| b != 0.0);
        let mut fun = RVFunction {
            alpha,
            scale,
            beta,
            domain_floor,
            convexity_threshold: domain_floor,
        };
        fun.convexity_threshold = fun.locate_convexity_threshold();
        Ok(fun)
    }

    /// `f(x) = x^α`.
    pub fn power(alpha: f64) -> Result<Self> {
        Self::new(alpha, 1.0, None, 0.0)
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    pub fn beta(&self) -> Option<f64> {
        self.beta
    }

    pub fn domain_floor(&self) -> f64 {
        self.domain_floor
    }

    /// `f' > 0` and `f'' > 0` on `(threshold, ∞)`.
    pub fn convexity_threshold(&self) -> f64 {
        self.convexity_threshold
    }

    /// True for `c·x^α` without perturbation or floor.
    pub fn is_pure_power(&self) -> bool {
        self.beta.is_none() && self.domain_floor == 0.0
    }

    pub fn params(&self) -> RVParams {
        (*self).into()
    }

    pub fn eval(&self, x: f64) -> f64 {
        let x = x.abs().max(self.domain_floor);
        let p = self.scale * x.powf(self.alpha);
        match self.beta {
            None => p,
            Some(b) => p * (1.0 + b / (E + x).ln()),
        }
    }

    /// `f^{(order)}(x)` for `order ∈ {1, 2, 3}`.
    pub fn derivative(&self, x: f64, order: usize) -> Result<f64> {
        if !(1..=3).contains(&order) {
            return Err(Error::invalid(format!("derivative order must be 1, 2 or 3, got {order}")));
        }
        if !(x > 0.0) {
            return Err(Error::invalid(format!("derivatives require x > 0, got {x}")));
        }
        Ok(self.jet(x)[order])
    }

    pub fn d1(&self, x: f64) -> f64 {
        self.jet(x)[1]
    }

    pub fn d2(&self, x: f64) -> f64 {
        self.jet(x)[2]
    }

    pub fn d3(&self, x: f64) -> f64 {
        self.jet(x)[3]
    }

    /// `[f, f', f'', f''', f'''']` at `x > 0`; derivatives vanish below the floor.
    pub fn jet(&self, x: f64) -> [f64; 5] {
        if x < self.domain_floor {
            return [self.eval(self.domain_floor), 0.0, 0.0, 0.0, 0.0];
        }
        let a = self.alpha;
        let c = self.scale;
        let xa = x.powf(a);
        let p = [
            c * xa,
            c * a * xa / x,
            c * a * (a - 1.0) * xa / (x * x),
            c * a * (a - 1.0) * (a - 2.0) * xa / (x * x * x),
            c * a * (a - 1.0) * (a - 2.0) * (a - 3.0) * xa / (x * x * x * x),
        ];
        let b = match self.beta {
            None => return p,
            Some(b) => b,
        };
        let w = 1.0 / (E + x);
        let u = (E + x).ln();
        let (u1, u2, u3, u4) = (w, -w * w, 2.0 * w * w * w, -6.0 * w * w * w * w);
        let iu = 1.0 / u;
        let (iu2, iu3, iu4, iu5) = (iu * iu, iu * iu * iu, iu.powi(4), iu.powi(5));
        let q = [
            1.0 + b * iu,
            -b * iu2 * u1,
            b * (2.0 * iu3 * u1 * u1 - iu2 * u2),
            b * (-6.0 * iu4 * u1.powi(3) + 6.0 * iu3 * u1 * u2 - iu2 * u3),
            b * (24.0 * iu5 * u1.powi(4) - 36.0 * iu4 * u1 * u1 * u2
                + 6.0 * iu3 * u2 * u2
                + 8.0 * iu3 * u1 * u3
                - iu2 * u4),
        ];
        const BINOM: [[f64; 5]; 5] = [
            [1.0, 0.0, 0.0, 0.0, 0.0],
            [1.0, 1.0, 0.0, 0.0, 0.0],
            [1.0, 2.0, 1.0, 0.0, 0.0],
            [1.0, 3.0, 3.0, 1.0, 0.0],
            [1.0, 4.0, 6.0, 4.0, 1.0],
        ];
        let mut out = [0.0; 5];
        for k in 0..5 {
            out[k] = (0..=k).map(|j| BINOM[k][j] * p[j] * q[k - j]).sum();
        }
        out
    }

    /// `x f'(x) / f(x)`, which tends to `α`.
    pub fn index_ratio(&self, x: f64) -> f64 {
        x * self.d1(x) / self.eval(x)
    }

    /// Smallest `x ≥ x₀` with `f(x) = y` (for `y ≥ f(x₀)`).
    pub fn inverse(&self, y: f64) -> Result<f64> {
        let base = self.eval(self.domain_floor);
        if y < base {
            return Err(Error::domain(format!("f never takes the value {y}"), Some(base)));
        }
        if self.beta.is_none() {
            return Ok(((y / self.scale).powf(1.0 / self.alpha)).max(self.domain_floor));
        }
        let g = |x: f64| self.eval(x) - y;
        let lo = self.domain_floor;
        let (lo, hi) = expand_upward(g, lo, lo.max(1.0))?;
        bisect(g, lo, hi, |m| 1e-15 * m.max(1e-300))
    }

    fn locate_convexity_threshold(&self) -> f64 {
        if self.beta.is_none() {
            return self.domain_floor;
        }
        // scan a log grid; the threshold is just above the last failing node
        let mut threshold = self.domain_floor;
        let start = self.domain_floor.max(1e-6);
        let mut x = start;
        let mut prev = start;
        while x < 1e8 {
            let j = self.jet(x);
            if !(j[1] > 0.0 && j[2] > 0.0) {
                threshold = x.max(threshold);
                prev = x;
            }
            x *= 1.01;
        }
        if threshold > self.domain_floor || prev > start {
            threshold * 1.01
        } else {
            threshold
        }
    }

    /// Total mass `a = ∫_{R^n} exp(-f(|z|)) dz`, by adaptive radial quadrature.
    pub fn jump_measure_mass(&self, n: usize) -> Result<f64> {
        Ok(self.log_jump_measure_mass(n)?.exp())
    }

    /// `ln a`; this is the shift turning `f` into the normalized exponent `f̃ = f + ln a`.
    pub fn log_jump_measure_mass(&self, n: usize) -> Result<f64> {
        check_dim(n)?;
        // integrand underflows well before f = 800
        let r_end = self.inverse(self.eval(self.domain_floor) + 800.0)?;
        let mut breaks = vec![0.0];
        if self.domain_floor > 0.0 {
            breaks.push(self.domain_floor);
        }
        let start = self.domain_floor.max(r_end * 1e-4);
        let mut r = start;
        while r < r_end {
            if r > *breaks.last().unwrap() {
                breaks.push(r);
            }
            r *= 2.0;
        }
        breaks.push(r_end);
        let pow = (n - 1) as i32;
        let est = integrate(
            |r: f64| r.powi(pow) * (-self.eval(r)).exp(),
            &breaks,
            Tolerance::new(1e-12, 1e-10),
        );
        if !est.converged || !(est.value > 0.0) {
            return Err(Error::numeric(format!(
                "jump measure mass quadrature did not converge (value {}, error {})",
                est.value, est.error
            )));
        }
        Ok((sphere_area(n) * est.value).ln())
    }

    /// Closed-form mass for pure powers, `|S^{n-1}| Γ(n/α) / (α c^{n/α})`.
    pub fn power_mass_closed_form(&self, n: usize) -> Option<f64> {
        if !self.is_pure_power() {
            return None;
        }
        let nf = n as f64;
        Some(
            sphere_area(n) * statrs::function::gamma::gamma(nf / self.alpha)
                / (self.alpha * self.scale.powf(nf / self.alpha)),
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    #[test]
    fn eval_examples() {
        assert_eq!(RVFunction::power(2.0).unwrap().eval(3.0), 9.0);
        assert_eq!(RVFunction::power(2.0).unwrap().eval(0.0), 0.0);
        assert_relative_eq!(RVFunction::power(1.5).unwrap().eval(4.0), 8.0, max_relative = 1e-15);
    }

    #[test]
    fn derivative_examples() {
        let sq = RVFunction::power(2.0).unwrap();
        assert_relative_eq!(sq.derivative(5.0, 2).unwrap(), 2.0);
        assert_relative_eq!(RVFunction::power(3.0).unwrap().derivative(2.0, 1).unwrap(), 12.0);
        assert!(sq.derivative(1.0, 4).is_err());
        assert!(sq.derivative(1.0, 0).is_err());
    }

    #[test]
    fn perturbed_derivatives_match_finite_differences() {
        let f = RVFunction::new(2.0, 1.0, Some(0.1), 0.0).unwrap();
        for &x in &[0.3, 2.0, 10.0, 250.0] {
            let j = f.jet(x);
            let h = 1e-4 * x;
            for k in 1..5 {
                let prev = |y: f64| if k == 1 { f.eval(y) } else { f.jet(y)[k - 1] };
                let fd = (prev(x + h) - prev(x - h)) / (2.0 * h);
                assert_relative_eq!(j[k], fd, max_relative = 1e-6, epsilon = 1e-9);
            }
        }
    }

    #[test]
    fn mass_oracles() {
        let sq = RVFunction::power(2.0).unwrap();
        assert_relative_eq!(sq.jump_measure_mass(1).unwrap(), PI.sqrt(), max_relative = 1e-10);
        assert_relative_eq!(sq.jump_measure_mass(2).unwrap(), PI, max_relative = 1e-10);
        assert_relative_eq!(sq.jump_measure_mass(3).unwrap(), PI.powf(1.5), max_relative = 1e-10);
        for &a in &[1.0001, 1.5, 3.0] {
            let f = RVFunction::power(a).unwrap();
            for n in 1..=3 {
                let q = f.jump_measure_mass(n).unwrap();
                assert_relative_eq!(q, f.power_mass_closed_form(n).unwrap(), max_relative = 1e-9);
            }
        }
        assert!(sq.jump_measure_mass(4).is_err());
    }

    #[test]
    fn floor_extension_is_constant() {
        let f = RVFunction::new(2.0, 1.0, None, 1.5).unwrap();
        assert_eq!(f.eval(0.2), 2.25);
        assert_eq!(f.d1(0.2), 0.0);
        assert_eq!(f.convexity_threshold(), 1.5);
    }

    #[test]
    fn json_round_trip() {
        let f = RVFunction::new(2.5, 0.7, Some(0.3), 0.1).unwrap();
        let s = serde_json::to_string(&f).unwrap();
        assert!(s.contains("\"alpha\"") && s.contains("\"domain_floor\""));
        let back: RVFunction = serde_json::from_str(&s).unwrap();
        assert_eq!(f, back);
        assert!(serde_json::from_str::<RVFunction>(r#"{"alpha":0.5}"#).is_err());
    }

    #[test]
    fn regular_variation_at_large_argument() {
        let f = RVFunction::new(2.0, 1.0, Some(0.5), 0.0).unwrap();
        let x = 1e6;
        for &lam in &[2.0f64, 10.0] {
            let ratio = f.eval(lam * x) / f.eval(x);
            assert!((ratio / lam.powf(2.0) - 1.0).abs() < 0.01);
        }
        assert!((f.index_ratio(x) - 2.0).abs() < 0.01);
    }

    proptest! {
        #[test]
        fn power_derivatives_are_symbolic(a in 1.05f64..4.0, lx in -1.0f64..8.0) {
            let x = 10f64.powf(lx);
            let f = RVFunction::power(a).unwrap();
            let j = f.jet(x);
            prop_assert!((j[1] - a * x.powf(a - 1.0)).abs() <= 1e-14 * j[1].abs().max(1e-300) * 4.0);
            prop_assert!((j[2] - a * (a - 1.0) * x.powf(a - 2.0)).abs() <= 4e-14 * j[2].abs());
            prop_assert!(j[2] > 0.0);
        }

        #[test]
        fn inverse_round_trips(beta in -0.5f64..2.0, y in 0.1f64..1e4) {
            let f = RVFunction::new(1.7, 1.3, Some(beta), 0.0).unwrap();
            let x = f.inverse(y).unwrap();
            prop_assert!((f.eval(x) - y).abs() <= 1e-12 * y.max(1.0));
        }
    }
}
