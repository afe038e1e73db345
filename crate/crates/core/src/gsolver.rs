//! Solutions `g` of the nonlinear functional equations
//!
//! ```text
//! y f'(y) - f(y) + k(y) = ln Λ
//! ```
//!
//! where the correction `k` is drawn from the closed family
//! `a ln y + b ln f''(y) + d y f'''(y)/f''(y) + const`. Everything is
//! parametrised by `ln Λ`, so arguments like `Λ = e^{10^6}` are fine.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::str::FromStr;

use parking_lot::RwLock;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::interp::MonotoneCubic;
use crate::numerics::root::{bisect, expand_upward, newton_polish};
use crate::rvfun::{check_dim, RVFunction};

/// Which functional equation to solve.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Variant {
    /// `y^α + C1 ln y = C2 + C3 ln Λ` for `f(x) = x^α`.
    Simplified,
    /// `k(y) = ln y - (n/2) ln f''(y) + const`.
    General,
    /// The general correction plus `(n/2) y f'''(y)/f''(y)`.
    GZero,
    /// User-supplied member of the closed `k` family.
    CustomK,
}

impl FromStr for Variant {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace('_', "-").as_str() {
            "simplified" => Ok(Variant::Simplified),
            "general" => Ok(Variant::General),
            "g-zero" | "gzero" | "g0" => Ok(Variant::GZero),
            "custom-k" | "custom" => Ok(Variant::CustomK),
            other => Err(Error::invalid(format!("unknown variant {other:?}"))),
        }
    }
}

/// `k(y) = log_coef·ln y + curvature_coef·ln f''(y) + ratio_coef·y f'''(y)/f''(y) + constant`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KTerm {
    #[serde(default)]
    pub log_coef: f64,
    #[serde(default)]
    pub curvature_coef: f64,
    #[serde(default)]
    pub ratio_coef: f64,
    #[serde(default)]
    pub constant: f64,
}

impl KTerm {
    /// Correction of the general equation in dimension `n`.
    pub fn general(alpha: f64, n: usize) -> Self {
        let nf = n as f64;
        KTerm {
            log_coef: 1.0,
            curvature_coef: -0.5 * nf,
            ratio_coef: 0.0,
            constant: 0.5 * nf * (2.0 * PI).ln() + 0.5 * (nf - 1.0) * (alpha - 1.0).ln(),
        }
    }

    /// Correction of the auxiliary `g₀` equation.
    pub fn g_zero(alpha: f64, n: usize) -> Self {
        KTerm {
            ratio_coef: 0.5 * n as f64,
            ..Self::general(alpha, n)
        }
    }

    pub fn shifted(self, by: f64) -> Self {
        KTerm {
            constant: self.constant + by,
            ..self
        }
    }

    fn value(&self, y: f64, jet: &[f64; 5]) -> f64 {
        let mut k = self.constant;
        if self.log_coef != 0.0 {
            k += self.log_coef * y.ln();
        }
        if self.curvature_coef != 0.0 {
            k += self.curvature_coef * jet[2].ln();
        }
        if self.ratio_coef != 0.0 {
            k += self.ratio_coef * y * jet[3] / jet[2];
        }
        k
    }

    fn slope(&self, y: f64, jet: &[f64; 5]) -> f64 {
        let mut dk = 0.0;
        if self.log_coef != 0.0 {
            dk += self.log_coef / y;
        }
        let r = jet[3] / jet[2];
        if self.curvature_coef != 0.0 {
            dk += self.curvature_coef * r;
        }
        if self.ratio_coef != 0.0 {
            let dr = (jet[4] * jet[2] - jet[3] * jet[3]) / (jet[2] * jet[2]);
            dk += self.ratio_coef * (r + y * dr);
        }
        dk
    }
}

/// Constants `(C1, C2, C3)` of the simplified equation.
pub fn simplified_constants(alpha: f64, n: usize) -> Result<(f64, f64, f64)> {
    if !(alpha > 1.0) {
        return Err(Error::invalid(format!("alpha must exceed 1, got {alpha}")));
    }
    if n == 0 {
        return Err(Error::invalid("dimension must be at least 1"));
    }
    let nf = n as f64;
    let c1 = (2.0 - (alpha - 2.0) * nf) / (2.0 * (alpha - 1.0));
    let c2 = ((alpha - 1.0).ln() + nf * alpha.ln() - nf * (2.0 * PI).ln()) / (2.0 * (alpha - 1.0));
    let c3 = 1.0 / (alpha - 1.0);
    Ok((c1, c2, c3))
}

/// Limit of `g(Λ) / (ln Λ)^{1/α}` for `f(x) = x^α`.
pub fn asymptotic_g_limit(alpha: f64) -> f64 {
    (alpha - 1.0).powf(-1.0 / alpha)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FunctionalEquationSpec {
    pub fun: RVFunction,
    pub n: usize,
    pub variant: Variant,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub custom_k: Option<KTerm>,
}

impl FunctionalEquationSpec {
    pub fn new(fun: RVFunction, n: usize, variant: Variant) -> Self {
        FunctionalEquationSpec {
            fun,
            n,
            variant,
            custom_k: None,
        }
    }

    pub fn general(fun: RVFunction, n: usize) -> Self {
        Self::new(fun, n, Variant::General)
    }

    pub fn custom(fun: RVFunction, n: usize, k: KTerm) -> Self {
        FunctionalEquationSpec {
            fun,
            n,
            variant: Variant::CustomK,
            custom_k: Some(k),
        }
    }

    fn validate(&self) -> Result<()> {
        check_dim(self.n)?;
        match self.variant {
            Variant::Simplified => {
                if !(self.fun.is_pure_power() && self.fun.scale() == 1.0) {
                    return Err(Error::invalid("the simplified equation requires f(x) = x^alpha"));
                }
            }
            Variant::CustomK if self.custom_k.is_none() => {
                return Err(Error::invalid("custom-k variant needs a k term"));
            }
            _ => {}
        }
        Ok(())
    }

    fn k_term(&self) -> KTerm {
        let a = self.fun.alpha();
        match self.variant {
            Variant::General | Variant::Simplified => KTerm::general(a, self.n),
            Variant::GZero => KTerm::g_zero(a, self.n),
            Variant::CustomK => self.custom_k.expect("validated"),
        }
    }
}

/// Limit-ratio record; each entry tends to the corresponding target.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LimitDiagnostics {
    /// `g'(Λ) Λ ln Λ / g(Λ)` → `1/α`.
    pub log_derivative: f64,
    /// `f(g)/ln Λ` → `1/(α-1)`.
    pub f_ratio: f64,
    /// `g f'(g)/ln Λ` → `α/(α-1)`.
    pub gf_prime_ratio: f64,
    /// `(g f'(g) - f(g))/ln Λ` → `1`.
    pub legendre_ratio: f64,
}

impl LimitDiagnostics {
    pub fn targets(alpha: f64) -> Self {
        LimitDiagnostics {
            log_derivative: 1.0 / alpha,
            f_ratio: 1.0 / (alpha - 1.0),
            gf_prime_ratio: alpha / (alpha - 1.0),
            legendre_ratio: 1.0,
        }
    }

    pub fn as_array(&self) -> [f64; 4] {
        [self.log_derivative, self.f_ratio, self.gf_prime_ratio, self.legendre_ratio]
    }
}

const CACHE_RATIO_LN: f64 = 0.048_790_164_169_432; // ln 1.05
const RESIDUAL_TOL: f64 = 1e-10;

/// Solver for one equation instance, with an append-only node cache.
#[derive(Debug)]
pub struct GSolution {
    spec: FunctionalEquationSpec,
    k: KTerm,
    simplified: Option<(f64, f64, f64)>,
    y_min: f64,
    lambda_floor: f64,
    cache: RwLock<BTreeMap<i64, f64>>,
}

impl Clone for GSolution {
    fn clone(&self) -> Self {
        GSolution {
            spec: self.spec,
            k: self.k,
            simplified: self.simplified,
            y_min: self.y_min,
            lambda_floor: self.lambda_floor,
            cache: RwLock::new(self.cache.read().clone()),
        }
    }
}

impl GSolution {
    pub fn new(spec: FunctionalEquationSpec) -> Result<Self> {
        spec.validate()?;
        let simplified = match spec.variant {
            Variant::Simplified => Some(simplified_constants(spec.fun.alpha(), spec.n)?),
            _ => None,
        };
        let mut sol = GSolution {
            spec,
            k: spec.k_term(),
            simplified,
            y_min: 0.0,
            lambda_floor: 0.0,
            cache: RwLock::new(BTreeMap::new()),
        };
        sol.y_min = sol.locate_monotone_start()?;
        // two units of ln Λ above the left end of the increasing branch
        sol.lambda_floor = sol.rhs_inverse(sol.lhs(sol.y_min)) + 2.0;
        Ok(sol)
    }

    pub fn spec(&self) -> &FunctionalEquationSpec {
        &self.spec
    }

    /// `ln Λ₀`: solutions are returned for `ln Λ ≥ ln Λ₀`.
    pub fn log_lambda_floor(&self) -> f64 {
        self.lambda_floor
    }

    /// Left end of the branch on which the left-hand side is increasing.
    pub fn y_min(&self) -> f64 {
        self.y_min
    }

    /// Left-hand side as a function of `y`.
    pub fn lhs(&self, y: f64) -> f64 {
        let jet = self.spec.fun.jet(y);
        match self.simplified {
            Some((c1, _, _)) => y.powf(self.spec.fun.alpha()) + c1 * y.ln(),
            None => y * jet[1] - jet[0] + self.k.value(y, &jet),
        }
    }

    /// `d lhs / dy`.
    pub fn lhs_slope(&self, y: f64) -> f64 {
        let jet = self.spec.fun.jet(y);
        match self.simplified {
            Some((c1, _, _)) => {
                let a = self.spec.fun.alpha();
                a * y.powf(a - 1.0) + c1 / y
            }
            None => y * jet[2] + self.k.slope(y, &jet),
        }
    }

    /// Right-hand side for a given `ln Λ`.
    pub fn rhs(&self, log_lambda: f64) -> f64 {
        match self.simplified {
            Some((_, c2, c3)) => c2 + c3 * log_lambda,
            None => log_lambda,
        }
    }

    fn rhs_inverse(&self, value: f64) -> f64 {
        match self.simplified {
            Some((_, c2, c3)) => (value - c2) / c3,
            None => value,
        }
    }

    fn rhs_slope(&self) -> f64 {
        match self.simplified {
            Some((_, _, c3)) => c3,
            None => 1.0,
        }
    }

    /// `lhs(y) - rhs(ln Λ)`.
    pub fn residual(&self, log_lambda: f64, y: f64) -> f64 {
        self.lhs(y) - self.rhs(log_lambda)
    }

    fn locate_monotone_start(&self) -> Result<f64> {
        let fun = &self.spec.fun;
        let lo = (fun.convexity_threshold() * (1.0 + 1e-9)).max(1e-6);
        let mut y = lo;
        let mut start = lo;
        let mut seen_good = false;
        while y < 1e6 {
            let s = self.lhs_slope(y);
            let v = self.lhs(y);
            if !(s > 0.0) || !v.is_finite() {
                start = y * 1.02;
                seen_good = false;
            } else {
                seen_good = true;
            }
            y *= 1.02;
        }
        if !seen_good {
            return Err(Error::numeric("left-hand side never becomes increasing"));
        }
        Ok(start)
    }

    /// `g(Λ)` given `ln Λ`.
    pub fn solve(&self, log_lambda: f64) -> Result<f64> {
        if !log_lambda.is_finite() {
            return Err(Error::invalid(format!("ln Lambda must be finite, got {log_lambda}")));
        }
        if log_lambda < self.lambda_floor {
            return Err(Error::domain(
                format!("ln Lambda = {log_lambda} lies below the solvability floor"),
                Some(self.lambda_floor),
            ));
        }
        let key = self.cache_coord(log_lambda);
        if let Some(guess) = self.cached_guess(key) {
            if let Some(y) = self.polish_guess(log_lambda, guess) {
                return Ok(y);
            }
        }
        let y = self.solve_exact(log_lambda)?;
        let k = key.floor() as i64;
        self.ensure_nodes(&[k - 1, k, k + 1, k + 2]);
        Ok(y)
    }

    /// Full bracketed solve without touching the cache.
    pub fn solve_exact(&self, log_lambda: f64) -> Result<f64> {
        if log_lambda < self.lambda_floor {
            return Err(Error::domain(
                format!("ln Lambda = {log_lambda} lies below the solvability floor"),
                Some(self.lambda_floor),
            ));
        }
        let target = self.rhs(log_lambda);
        let f = |y: f64| self.lhs(y) - target;
        let a = self.spec.fun.alpha();
        let guess = ((target.abs() + 1.0) / ((a - 1.0) * self.spec.fun.scale()).min(1.0)).powf(1.0 / a);
        let hi0 = guess.max(2.0 * self.y_min) * 1.5;
        let (lo, hi) = if f(hi0) > 0.0 {
            (self.y_min, hi0)
        } else {
            expand_upward(f, self.y_min, hi0)?
        };
        let y = bisect(f, lo, hi, |m| 1e-13 * m.abs().max(1.0))?;
        let y = newton_polish(f, |y| self.lhs_slope(y), y, lo, hi, 3);
        self.check_residual(log_lambda, y)
    }

    fn check_residual(&self, log_lambda: f64, y: f64) -> Result<f64> {
        let rhs = self.rhs(log_lambda);
        let res = self.residual(log_lambda, y);
        if res.abs() <= RESIDUAL_TOL * rhs.abs().max(1.0) {
            Ok(y)
        } else {
            Err(Error::numeric(format!(
                "residual {res:e} too large at ln Lambda = {log_lambda} (g = {y})"
            )))
        }
    }

    fn polish_guess(&self, log_lambda: f64, guess: f64) -> Option<f64> {
        let target = self.rhs(log_lambda);
        let f = |y: f64| self.lhs(y) - target;
        let lo = self.y_min;
        let y = newton_polish(f, |y| self.lhs_slope(y), guess, lo, f64::MAX, 6);
        if y < lo {
            return None;
        }
        self.check_residual(log_lambda, y).ok()
    }

    fn cache_coord(&self, log_lambda: f64) -> f64 {
        (log_lambda - self.lambda_floor + 1.0).ln() / CACHE_RATIO_LN
    }

    fn node_log_lambda(&self, k: i64) -> f64 {
        (k as f64 * CACHE_RATIO_LN).exp() + self.lambda_floor - 1.0
    }

    fn cached_guess(&self, coord: f64) -> Option<f64> {
        let k = coord.floor() as i64;
        let cache = self.cache.read();
        let pts: Vec<(f64, f64)> = (k - 1..=k + 2)
            .filter_map(|j| cache.get(&j).map(|&g| (j as f64, g)))
            .collect();
        drop(cache);
        if !pts.iter().any(|p| p.0 == k as f64) || !pts.iter().any(|p| p.0 == (k + 1) as f64) {
            return None;
        }
        let (xs, ys): (Vec<f64>, Vec<f64>) = pts.into_iter().unzip();
        MonotoneCubic::new(xs, ys).eval(coord)
    }

    fn ensure_nodes(&self, keys: &[i64]) {
        let missing: Vec<i64> = {
            let cache = self.cache.read();
            keys.iter().copied().filter(|k| *k >= 0 && !cache.contains_key(k)).collect()
        };
        if missing.is_empty() {
            return;
        }
        let solved: Vec<(i64, f64)> = missing
            .into_iter()
            .filter_map(|k| self.solve_exact(self.node_log_lambda(k)).ok().map(|g| (k, g)))
            .collect();
        let mut cache = self.cache.write();
        for (k, g) in solved {
            cache.entry(k).or_insert(g);
        }
    }

    /// Number of cached interpolation nodes.
    pub fn cached_nodes(&self) -> Vec<(f64, f64)> {
        self.cache
            .read()
            .iter()
            .map(|(&k, &g)| (self.node_log_lambda(k), g))
            .collect()
    }

    /// `g'(Λ)·Λ` from implicit differentiation of the equation.
    pub fn log_derivative(&self, g: f64) -> f64 {
        self.rhs_slope() / self.lhs_slope(g)
    }

    pub fn limit_diagnostics(&self, log_lambda: f64) -> Result<LimitDiagnostics> {
        let g = self.solve(log_lambda)?;
        let jet = self.spec.fun.jet(g);
        Ok(LimitDiagnostics {
            log_derivative: self.log_derivative(g) * log_lambda / g,
            f_ratio: jet[0] / log_lambda,
            gf_prime_ratio: g * jet[1] / log_lambda,
            legendre_ratio: (g * jet[1] - jet[0]) / log_lambda,
        })
    }

    /// `g(Λ)[f'(g(yΛ)) - f'(g(Λ))] - ln y` for `y ∈ [(ln Λ)^{-γ}, (ln Λ)^{γ}]`.
    pub fn cancellation_defect(&self, log_lambda: f64, y: f64, window_exponent: f64) -> Result<f64> {
        if !(y > 0.0) {
            return Err(Error::invalid(format!("y must be positive, got {y}")));
        }
        if log_lambda > 1.0 {
            let bound = window_exponent * log_lambda.ln();
            if y.ln().abs() > bound {
                return Err(Error::invalid(format!(
                    "y = {y} outside the window [(ln Lambda)^-{window_exponent}, (ln Lambda)^{window_exponent}]"
                )));
            }
        }
        if y == 1.0 {
            return Ok(0.0);
        }
        let g = self.solve(log_lambda)?;
        let gy = self.solve(log_lambda + y.ln())?;
        let fun = &self.spec.fun;
        Ok(g * (fun.d1(gy) - fun.d1(g)) - y.ln())
    }
}

/// `g₀(Λ)·(f'(g₀(Λ)) - f'(g₁(Λ)))` for two equations differing only in `k`.
pub fn sensitivity_gap(spec0: &FunctionalEquationSpec, spec1: &FunctionalEquationSpec, log_lambda: f64) -> Result<f64> {
    if spec0.fun != spec1.fun || spec0.n != spec1.n {
        return Err(Error::invalid("specs must share the jump exponent and the dimension"));
    }
    let s0 = GSolution::new(*spec0)?;
    let s1 = GSolution::new(*spec1)?;
    if spec0 == spec1 {
        return Ok(0.0);
    }
    let g0 = s0.solve_exact(log_lambda)?;
    let g1 = s1.solve_exact(log_lambda)?;
    Ok(g0 * (spec0.fun.d1(g0) - spec0.fun.d1(g1)))
}
