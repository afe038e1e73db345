//! Laplace-method evaluation of `ln μ_t(x)` for radii far beyond any grid.
//!
//! Writing the mixture order as `m = r·v` and replacing each convolution
//! power by its Laplace form gives terms `exp(r Ψ(v) + ρ(v))`. The sum over
//! `m` is then itself evaluated by Laplace's method around the stationary
//! point `v*`. The result is returned as a [`SplitLog`]: the `O(r)` leading
//! part `r Ψ(v*)` is kept apart from the `O(ln r)` remainder so that callers
//! combining several marginals can cancel the large parts first.

use std::f64::consts::PI;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::numerics::root::{bisect, expand_upward};
use crate::rvfun::{check_dim, RVFunction};

/// A log value split into a large leading part and a moderate correction.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SplitLog {
    pub leading: f64,
    pub correction: f64,
}

impl SplitLog {
    pub fn exact(value: f64) -> Self {
        SplitLog {
            leading: value,
            correction: 0.0,
        }
    }

    pub fn total(&self) -> f64 {
        self.leading + self.correction
    }
}

/// Source of `ln μ_t(x)` as a function of time and radius.
pub trait LogMarginal: Send + Sync {
    fn dim(&self) -> usize;

    /// `ln a`, `a = ν(R^n)`.
    fn log_mass(&self) -> f64;

    /// `ln μ_t(x)` at `|x| = r`.
    fn log_density(&self, t: f64, r: f64) -> Result<SplitLog>;

    /// `ln P(L_t = 0)`.
    fn log_atom(&self, t: f64) -> f64 {
        -self.log_mass().exp() * t
    }
}

/// Stirling remainder `ln z! - (z ln z - z + ½ ln 2πz)`.
fn stirling_tail(z: f64) -> f64 {
    1.0 / (12.0 * z) - 1.0 / (360.0 * z * z * z)
}

fn stirling_tail_slope(z: f64) -> f64 {
    -1.0 / (12.0 * z * z) + 1.0 / (120.0 * z.powi(4))
}

/// Stationary point and the pieces of the expansion at one `(t, r)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LaplacePoint {
    /// Typical jump size `s* = 1/v*`.
    pub jump_size: f64,
    /// Dominant order `m* = r v*`.
    pub order: f64,
    pub value: SplitLog,
}

#[derive(Debug, Clone)]
pub struct AsymptoticMarginal {
    fun: RVFunction,
    n: usize,
    log_mass: f64,
    s_min: f64,
}

impl AsymptoticMarginal {
    pub fn new(fun: &RVFunction, n: usize) -> Result<Self> {
        check_dim(n)?;
        let log_mass = fun.log_jump_measure_mass(n)?;
        let mut am = AsymptoticMarginal {
            fun: *fun,
            n,
            log_mass,
            s_min: 0.0,
        };
        am.s_min = am.locate_increasing_branch()?;
        Ok(am)
    }

    pub fn fun(&self) -> &RVFunction {
        &self.fun
    }

    /// `h(s) = -f(s) + ½ ln(2π/f''(s)) + ((n-1)/2) ln(2πs/f'(s))`.
    fn h(&self, s: f64, jet: &[f64; 5]) -> f64 {
        let nf = self.n as f64;
        -jet[0] + 0.5 * (2.0 * PI / jet[2]).ln() + 0.5 * (nf - 1.0) * (2.0 * PI * s / jet[1]).ln()
    }

    /// Stationarity function: `Ψ'(v) = τ + E(1/v)`.
    fn e(&self, s: f64) -> f64 {
        let jet = self.fun.jet(s);
        let nf = self.n as f64;
        s.ln() + self.h(s, &jet) + s * jet[1] + 0.5 * s * jet[3] / jet[2]
            - 0.5 * (nf - 1.0) * (1.0 - s * jet[2] / jet[1])
    }

    fn e_slope(&self, s: f64) -> f64 {
        let j = self.fun.jet(s);
        let nf = self.n as f64;
        1.0 / s + s * j[2] + 0.5 * (nf - 1.0) / s + 0.5 * s * (j[4] * j[2] - j[3] * j[3]) / (j[2] * j[2])
            + 0.5 * (nf - 1.0) * s * (j[3] * j[1] - j[2] * j[2]) / (j[1] * j[1])
    }

    fn locate_increasing_branch(&self) -> Result<f64> {
        let mut s = (self.fun.convexity_threshold() * (1.0 + 1e-9)).max(1e-6);
        let mut start = s;
        let mut ok = false;
        while s < 1e6 {
            let v = self.e(s);
            if !(self.e_slope(s) > 0.0) || !v.is_finite() {
                start = s * 1.02;
                ok = false;
            } else {
                ok = true;
            }
            s *= 1.02;
        }
        if ok {
            Ok(start)
        } else {
            Err(Error::numeric("stationarity equation has no increasing branch"))
        }
    }

    /// Solves `E(s) = ln(r/t)` for the typical jump size.
    fn stationary_jump_size(&self, log_ratio: f64) -> Result<f64> {
        let lo = self.s_min;
        let target = log_ratio;
        let f = |s: f64| self.e(s) - target;
        if f(lo) >= 0.0 {
            return Err(Error::domain(
                format!("ln(r/t) = {log_ratio} below the range of the expansion"),
                Some(self.e(lo)),
            ));
        }
        let (lo, hi) = expand_upward(f, lo, lo.max(1.0) * 2.0)?;
        bisect(f, lo, hi, |m| 4.0 * f64::EPSILON * m.abs())
    }

    /// Full expansion at time `t` and radius `r`.
    pub fn laplace_point(&self, t: f64, r: f64) -> Result<LaplacePoint> {
        if !(t > 0.0 && r > 0.0) {
            return Err(Error::invalid("time and radius must be positive"));
        }
        // τ depends on the ratio only, so (r, t) and (r/2, t/2) share v*
        let ratio = t / r;
        let tau = ratio.ln();
        let s = self.stationary_jump_size(-tau)?;
        let v = 1.0 / s;
        let jet = self.fun.jet(s);
        let nf = self.n as f64;
        let psi = v * (tau - v.ln() + 1.0 + self.h(s, &jet));
        let psi2 = -s * s * self.e_slope(s);
        let z = r * v;
        let a = self.log_mass.exp();
        let rho = -a * t - 0.5 * (2.0 * PI * z).ln() - stirling_tail(z) - 0.5 * (2.0 * PI / jet[2]).ln()
            - 0.5 * (nf - 1.0) * (2.0 * PI * s / jet[1]).ln()
            - 0.5 * nf * z.ln();
        let ds_dv = -s * s;
        let rho_slope = -0.5 / v - r * stirling_tail_slope(z) - 0.5 * nf / v
            + ds_dv * (0.5 * jet[3] / jet[2] - 0.5 * (nf - 1.0) * (1.0 / s - jet[2] / jet[1]));
        let curv = r * psi2.abs();
        let correction = rho + r.ln() + 0.5 * (2.0 * PI / curv).ln() + rho_slope * rho_slope / (2.0 * curv);
        Ok(LaplacePoint {
            jump_size: s,
            order: z,
            value: SplitLog {
                leading: r * psi,
                correction,
            },
        })
    }
}

impl LogMarginal for AsymptoticMarginal {
    fn dim(&self) -> usize {
        self.n
    }

    fn log_mass(&self) -> f64 {
        self.log_mass
    }

    fn log_density(&self, t: f64, r: f64) -> Result<SplitLog> {
        Ok(self.laplace_point(t, r)?.value)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::marginal::{MarginalDensity, MarginalOptions};

    #[test]
    fn agrees_with_tabulated_mixture() {
        let f = RVFunction::power(2.0).unwrap();
        let am = AsymptoticMarginal::new(&f, 1).unwrap();
        let md = MarginalDensity::build(&f, 1, 4.0, 40.0, MarginalOptions::default()).unwrap();
        for &r in &[20.0, 30.0, 40.0] {
            let exact = md.eval(r).unwrap().log_density;
            let approx = am.log_density(4.0, r).unwrap().total();
            assert!((approx - exact).abs() < 0.02 * exact.abs().max(1.0), "r={r}: {approx} vs {exact}");
        }
    }

    #[test]
    fn halving_preserves_leading_part_exactly() {
        let f = RVFunction::power(2.0).unwrap();
        let am = AsymptoticMarginal::new(&f, 1).unwrap();
        let r = 0.5 * 40f64.exp();
        let full = am.log_density(1.0, r).unwrap();
        let half = am.log_density(0.5, 0.5 * r).unwrap();
        assert_eq!(half.leading + half.leading - full.leading, 0.0);
    }
}
