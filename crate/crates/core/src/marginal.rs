//! Marginal densities of the compound Poisson process `L_t` with Lévy
//! measure `ν(dz) = exp(-f(|z|)) dz`:
//!
//! ```text
//! μ_t(x) = Σ_{m≥1} e^{-at} t^m / m! · ν^{*m}(x),   a = ν(R^n),
//! ```
//!
//! plus an atom of mass `e^{-at}` at the origin. Times are process times of
//! this (unnormalized) measure; with the probability measure `ν/a` the same
//! law is reached at time `a·t`.

use std::f64::consts::PI;
use std::sync::Arc;

use serde::Serialize;

use crate::asymptotic::{LogMarginal, SplitLog};
use crate::convdens::{laplace_log_density, ConvolutionTable, MAX_ORDER};
use crate::error::{Error, Result};
use crate::gsolver::{FunctionalEquationSpec, GSolution};
use crate::numerics::quad::{integrate, Tolerance};
use crate::numerics::{ln_factorial, ln_poisson_tail_bound, log_sum_exp};
use crate::rvfun::{check_dim, sphere_area, RVFunction};

/// Required gap (nats) between retained density and dropped-tail bound.
pub const TRUNCATION_GAP: f64 = 27.631_021_115_928_547; // ln 1e12

/// Smallest number of mixture terms ever used.
pub const MIN_ORDER: usize = 16;

/// Predicted `ln μ_t(r)` from the Laplace form of each convolution power.
pub fn predicted_log_marginal(fun: &RVFunction, n: usize, log_mass: f64, t: f64, r: f64, max_order: usize) -> f64 {
    let lt = t.ln();
    let a = log_mass.exp();
    let terms: Vec<f64> = (1..=max_order)
        .filter_map(|m| {
            laplace_log_density(fun, n, m, r).map(|l| -a * t + m as f64 * lt - ln_factorial(m as u64) + l)
        })
        .collect();
    log_sum_exp(&terms)
}

/// Upper bound on `ln Σ_{m > cap} e^{-at} t^m/m! ν^{*m}(x)`, uniform in `x`.
///
/// Uses `ν^{*m} ≤ a^{m-1} sup ν`, so the dropped sum is at most
/// `sup ν / a · P(Pois(at) > cap)`.
pub fn truncation_log_bound(fun: &RVFunction, log_mass: f64, t: f64, cap: usize) -> f64 {
    let sup_nu = -fun.eval(fun.domain_floor());
    sup_nu - log_mass + ln_poisson_tail_bound(log_mass.exp() * t, cap as u64)
}

/// Smallest order `≥ MIN_ORDER` whose truncation bound sits
/// [`TRUNCATION_GAP`] + `slack` nats below the predicted density at `r_max`.
pub fn required_order(fun: &RVFunction, n: usize, t: f64, r_max: f64, slack: f64) -> Result<usize> {
    let log_mass = fun.log_jump_measure_mass(n)?;
    let target = predicted_log_marginal(fun, n, log_mass, t, r_max, MAX_ORDER) - TRUNCATION_GAP - slack;
    (MIN_ORDER..=MAX_ORDER)
        .find(|&m| truncation_log_bound(fun, log_mass, t, m) <= target)
        .ok_or_else(|| {
            Error::numeric(format!(
                "more than {MAX_ORDER} convolution orders needed for t = {t}, r_max = {r_max}"
            ))
        })
}

/// Value of the mixture at one radius.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MarginalValue {
    pub log_density: f64,
    /// Index of the largest mixture term; 0 when every term underflows.
    pub dominant_m: usize,
    /// Bound on the log of the dropped tail of the mixture.
    pub log_truncation_bound: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TailEstimate {
    /// `ln ∫_{|x|>Λ} μ_t(x) dx`.
    pub log_tail: f64,
    pub lower: f64,
    pub upper: f64,
}

#[derive(Debug, Clone, Copy)]
pub struct MarginalOptions {
    pub nodes: usize,
    /// Fixed number of mixture terms; chosen automatically when `None`.
    pub m_cap: Option<usize>,
}

impl Default for MarginalOptions {
    fn default() -> Self {
        MarginalOptions { nodes: 256, m_cap: None }
    }
}

/// `μ_t` restricted to radii `[0, r_max]`.
#[derive(Debug, Clone)]
pub struct MarginalDensity {
    table: Arc<ConvolutionTable>,
    t: f64,
    log_mass: f64,
    m_cap: usize,
}

impl MarginalDensity {
    pub fn build(fun: &RVFunction, n: usize, t: f64, r_max: f64, opts: MarginalOptions) -> Result<Self> {
        check_dim(n)?;
        if !(t > 0.0) || !t.is_finite() {
            return Err(Error::invalid(format!("time must be positive, got {t}")));
        }
        let mut cap = match opts.m_cap {
            Some(c) => c,
            None => required_order(fun, n, t, r_max, 5.0)?,
        };
        loop {
            let table = Arc::new(ConvolutionTable::build(fun, n, cap, r_max, opts.nodes)?);
            let md = Self::with_table(table, t, Some(cap))?;
            if opts.m_cap.is_some() || md.truncation_ok(r_max) {
                return Ok(md);
            }
            if cap == MAX_ORDER {
                return Err(Error::numeric("truncation bound not met at the largest order"));
            }
            cap = ((cap as f64 * 1.25).ceil() as usize).min(MAX_ORDER);
        }
    }

    /// Reuses an existing table; `m_cap` defaults to every order it holds.
    pub fn with_table(table: Arc<ConvolutionTable>, t: f64, m_cap: Option<usize>) -> Result<Self> {
        if !(t > 0.0) || !t.is_finite() {
            return Err(Error::invalid(format!("time must be positive, got {t}")));
        }
        let m_cap = m_cap.unwrap_or(table.max_order());
        if m_cap == 0 || m_cap > table.max_order() {
            return Err(Error::invalid(format!(
                "m_cap {m_cap} exceeds the {} orders in the table",
                table.max_order()
            )));
        }
        let log_mass = table.fun().log_jump_measure_mass(table.dim())?;
        Ok(MarginalDensity {
            table,
            t,
            log_mass,
            m_cap,
        })
    }

    pub fn fun(&self) -> &RVFunction {
        self.table.fun()
    }

    pub fn dim(&self) -> usize {
        self.table.dim()
    }

    pub fn time(&self) -> f64 {
        self.t
    }

    pub fn m_cap(&self) -> usize {
        self.m_cap
    }

    pub fn r_max(&self) -> f64 {
        self.table.r_max()
    }

    pub fn table(&self) -> &Arc<ConvolutionTable> {
        &self.table
    }

    /// `ln a` with `a = ν(R^n)`.
    pub fn log_mass(&self) -> f64 {
        self.log_mass
    }

    /// `ln P(L_t = 0) = -a t`.
    pub fn log_atom(&self) -> f64 {
        -self.log_mass.exp() * self.t
    }

    /// `ln[e^{-at} t^m/m! ν^{*m}(x)]` at `|x| = r`.
    pub fn log_term(&self, m: usize, r: f64) -> f64 {
        mixture_term(&self.table, self.log_mass, self.t, m, r)
    }

    pub fn log_truncation_bound(&self) -> f64 {
        truncation_log_bound(self.fun(), self.log_mass, self.t, self.m_cap)
    }

    /// Whether the dropped tail is below `1e-12` times the retained value at `r`.
    pub fn truncation_ok(&self, r: f64) -> bool {
        match self.eval(r) {
            Ok(v) => v.log_truncation_bound <= v.log_density - TRUNCATION_GAP,
            Err(_) => false,
        }
    }

    fn check_radius(&self, r: f64) -> Result<()> {
        if !(r >= 0.0) || r > self.r_max() * (1.0 + 1e-12) {
            return Err(Error::domain(
                format!("radius {r} outside the tabulated range [0, {}]", self.r_max()),
                Some(self.r_max()),
            ));
        }
        Ok(())
    }

    /// `ln μ_t(x)` at `|x| = r` and the dominant mixture order.
    pub fn eval(&self, r: f64) -> Result<MarginalValue> {
        self.check_radius(r)?;
        Ok(mixture_value(&self.table, self.log_mass, self.t, r, self.m_cap))
    }

    /// `(ln μ_t(r), dominant order)`.
    pub fn eval_log_marginal(&self, r: f64) -> Result<(f64, usize)> {
        let v = self.eval(r)?;
        Ok((v.log_density, v.dominant_m))
    }

    /// `ln ∫_{Λ<|x|≤r_max} μ_t(x) dx` together with the two-sided estimate
    /// `-Λ(f'(g(Λ/t)) + (1 ± δ)/g(Λ/t))`.
    pub fn tail_estimate(&self, sol: &GSolution, lambda: f64, delta: f64) -> Result<TailEstimate> {
        let log_tail = self.log_tail_mass(lambda)?;
        let g = sol.solve((lambda / self.t).ln())?;
        let fp = self.fun().d1(g);
        Ok(TailEstimate {
            log_tail,
            lower: -lambda * (fp + (1.0 + delta) / g),
            upper: -lambda * (fp + (1.0 - delta) / g),
        })
    }

    /// `ln ∫_{Λ<|x|≤r_max} μ_t(x) dx` by radial quadrature.
    pub fn log_tail_mass(&self, lambda: f64) -> Result<f64> {
        self.check_radius(lambda)?;
        let anchor = self.eval(lambda)?.log_density;
        if anchor == f64::NEG_INFINITY {
            return Ok(f64::NEG_INFINITY);
        }
        let pow = (self.dim() - 1) as i32;
        let r_end = self.r_max();
        let pieces: Vec<f64> = (0..=16).map(|i| lambda + (r_end - lambda) * i as f64 / 16.0).collect();
        let est = integrate(
            |r: f64| {
                let v = self.eval(r).map(|v| v.log_density).unwrap_or(f64::NEG_INFINITY);
                r.powi(pow) * (v - anchor).exp()
            },
            &pieces,
            Tolerance::new(1e-300, 1e-9),
        );
        if !(est.value > 0.0) {
            return Ok(f64::NEG_INFINITY);
        }
        Ok(anchor + (sphere_area(self.dim()) * est.value).ln())
    }

    /// `∫_{|x|≤r_max} μ_t(x) dx`.
    pub fn total_mass(&self) -> f64 {
        let pow = (self.dim() - 1) as i32;
        let r_end = self.r_max();
        let pieces: Vec<f64> = (0..=32).map(|i| r_end * i as f64 / 32.0).collect();
        let est = integrate(
            |r: f64| {
                let v = self.eval(r).map(|v| v.log_density).unwrap_or(f64::NEG_INFINITY);
                r.powi(pow) * v.exp()
            },
            &pieces,
            Tolerance::new(1e-14, 1e-11),
        );
        sphere_area(self.dim()) * est.value
    }
}

fn mixture_term(table: &ConvolutionTable, log_mass: f64, t: f64, m: usize, r: f64) -> f64 {
    -log_mass.exp() * t + m as f64 * t.ln() - ln_factorial(m as u64) + table.log_density(m, r)
}

fn mixture_value(table: &ConvolutionTable, log_mass: f64, t: f64, r: f64, cap: usize) -> MarginalValue {
    let terms: Vec<f64> = (1..=cap).map(|m| mixture_term(table, log_mass, t, m, r)).collect();
    let (dominant_m, peak) = terms
        .iter()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |acc, (i, &v)| if v > acc.1 { (i + 1, v) } else { acc });
    let log_density = if peak == f64::NEG_INFINITY {
        f64::NEG_INFINITY
    } else {
        log_sum_exp(&terms)
    };
    MarginalValue {
        log_density,
        dominant_m,
        log_truncation_bound: truncation_log_bound(table.fun(), log_mass, t, cap),
    }
}

/// [`LogMarginal`] backed by one convolution table shared across times.
#[derive(Debug, Clone)]
pub struct GridMarginal {
    table: Arc<ConvolutionTable>,
    log_mass: f64,
}

impl GridMarginal {
    pub fn new(table: Arc<ConvolutionTable>) -> Result<Self> {
        let log_mass = table.fun().log_jump_measure_mass(table.dim())?;
        Ok(GridMarginal { table, log_mass })
    }

    pub fn table(&self) -> &Arc<ConvolutionTable> {
        &self.table
    }

    /// Mixture value with the truncation diagnostics.
    pub fn value(&self, t: f64, r: f64) -> Result<MarginalValue> {
        if !(r >= 0.0) || r > self.table.r_max() * (1.0 + 1e-12) {
            return Err(Error::domain(
                format!("radius {r} outside the tabulated range [0, {}]", self.table.r_max()),
                Some(self.table.r_max()),
            ));
        }
        Ok(mixture_value(&self.table, self.log_mass, t, r, self.table.max_order()))
    }

    /// `ln[e^{-at} t^m/m! ν^{*m}(x)]` at `|x| = r`.
    pub fn log_term(&self, t: f64, m: usize, r: f64) -> f64 {
        mixture_term(&self.table, self.log_mass, t, m, r)
    }
}

impl LogMarginal for GridMarginal {
    fn dim(&self) -> usize {
        self.table.dim()
    }

    fn log_mass(&self) -> f64 {
        self.log_mass
    }

    fn log_density(&self, t: f64, r: f64) -> Result<SplitLog> {
        let v = self.value(t, r)?;
        if v.log_density.is_finite() && v.log_truncation_bound > v.log_density - TRUNCATION_GAP {
            return Err(Error::numeric(format!(
                "mixture truncated too early at t = {t}, r = {r}; raise the order cap"
            )));
        }
        Ok(SplitLog::exact(v.log_density))
    }
}

/// Two-sided estimate `-r(f'(g(r/t)) - (1 ∓ δ)/g(r/t))` of `ln μ_t(x)` at `|x| = r`.
pub fn theorem_density_bounds(sol: &GSolution, r: f64, t: f64, delta: f64) -> Result<(f64, f64)> {
    if !(r > 0.0 && t > 0.0) {
        return Err(Error::invalid("radius and time must be positive"));
    }
    let g = sol.solve((r / t).ln())?;
    let fp = sol.spec().fun.d1(g);
    Ok((-r * (fp - (1.0 - delta) / g), -r * (fp - (1.0 + delta) / g)))
}

/// Tail estimate with the sign of the `1/g` correction taken from the
/// density estimate: `-Λ(f'(g) - (1 ± δ)/g)`. Reported next to the
/// [`MarginalDensity::tail_estimate`] envelope for comparison.
pub fn density_consistent_tail_bounds(sol: &GSolution, lambda: f64, t: f64, delta: f64) -> Result<(f64, f64)> {
    theorem_density_bounds(sol, lambda, t, delta)
}

/// Equation solver matching [`theorem_density_bounds`] for `fun` in dimension `n`.
pub fn density_solver(fun: &RVFunction, n: usize) -> Result<GSolution> {
    GSolution::new(FunctionalEquationSpec::general(*fun, n))
}

/// `ln` of the Gaussian-case mixture term, used by tests and examples:
/// `-√π^n t + m ln t - ln m! + (n(m-1)/2) ln π - (n/2) ln m - r²/m`.
pub fn gaussian_log_term(n: usize, t: f64, m: usize, r: f64) -> f64 {
    let (nf, mf) = (n as f64, m as f64);
    -PI.powf(nf / 2.0) * t + mf * t.ln() - ln_factorial(m as u64) + 0.5 * nf * (mf - 1.0) * PI.ln()
        - 0.5 * nf * mf.ln()
        - r * r / mf
}
