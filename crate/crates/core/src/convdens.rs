//! Radial log-densities of the convolution powers `ν^{*m}` of the jump
//! measure `ν(dz) = exp(-f(|z|)) dz`.
//!
//! Orders are built bottom-up by pairwise convolution,
//! `ν^{*m} = ν^{*⌈m/2⌉} * ν^{*⌊m/2⌋}`, entirely in the log domain. Each
//! profile is stored on one shared uniform radial grid and interpolated with
//! limited cubic Hermite splines.

use std::f64::consts::PI;
use std::sync::Arc;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::numerics::interp::UniformHermite;
use crate::numerics::quad::{integrate, Tolerance};
use crate::rvfun::{check_dim, RVFunction};

/// Highest convolution order a table may hold.
pub const MAX_ORDER: usize = 512;

/// Extra log-mass (in nats) a path must shed to overshoot the grid.
const OVERSHOOT_NATS: f64 = 40.0;

/// Integrand values this far below the peak are dropped from quadrature.
const CUTOFF_NATS: f64 = 60.0;

fn quad_tol() -> Tolerance {
    Tolerance {
        abs: 1e-300,
        rel: 1e-11,
        max_intervals: 400,
    }
}

/// Convolution powers `1..=max_order` on a common grid `[0, extent]`.
///
/// Values are reliable on `[0, r_max]`; the grid extends past `r_max` so
/// that truncating the integrals there costs at most `e^{-40}` in relative
/// terms.
#[derive(Debug, Clone)]
pub struct ConvolutionTable {
    fun: RVFunction,
    n: usize,
    r_max: f64,
    profiles: Vec<Arc<UniformHermite>>,
}

/// The radial profile `r ↦ ln(dν^{*m}/dx)` at `|x| = r`.
#[derive(Debug, Clone)]
pub struct RadialDensity {
    pub fun: RVFunction,
    pub n: usize,
    pub m: usize,
    pub r_max: f64,
    table: Arc<UniformHermite>,
}

/// Spacing rule: resolve the Gaussian width of the two-fold profile.
pub fn grid_spacing(fun: &RVFunction, r_max: f64) -> f64 {
    let curv = fun.d2((r_max / 2.0).max(1e-9));
    let mut h = 0.05f64;
    if curv > 0.0 && curv.is_finite() {
        h = h.min(0.2 / curv.sqrt());
    }
    h
}

/// Grid margin beyond `r_max` for tables holding orders up to `max_order`.
pub fn grid_margin(fun: &RVFunction, max_order: usize) -> Result<f64> {
    let m = max_order as f64;
    let base = fun.eval(fun.domain_floor());
    Ok((m * fun.inverse(base + OVERSHOOT_NATS / m)?).max(2.0))
}

impl ConvolutionTable {
    /// Builds orders `1..=max_order` reliable on `[0, r_max]`; the grid has at
    /// least `min_nodes` nodes and obeys [`grid_spacing`].
    pub fn build(fun: &RVFunction, n: usize, max_order: usize, r_max: f64, min_nodes: usize) -> Result<Self> {
        check_dim(n)?;
        if !(1..=MAX_ORDER).contains(&max_order) {
            return Err(Error::invalid(format!(
                "convolution order must lie in 1..={MAX_ORDER}, got {max_order}"
            )));
        }
        if !(r_max > 0.0) || !r_max.is_finite() {
            return Err(Error::invalid(format!("r_max must be positive, got {r_max}")));
        }
        if min_nodes < 3 {
            return Err(Error::invalid("need at least three grid nodes"));
        }
        let extent = r_max + grid_margin(fun, max_order)?;
        let h = (extent / (min_nodes - 1) as f64).min(grid_spacing(fun, r_max));
        let count = (extent / h).ceil() as usize + 1;
        let radii: Vec<f64> = (0..count).map(|j| j as f64 * h).collect();

        let mut profiles: Vec<Arc<UniformHermite>> = Vec::with_capacity(max_order);
        let first: Vec<f64> = radii.iter().map(|&r| -fun.eval(r)).collect();
        profiles.push(Arc::new(UniformHermite::new(h, first, true)));
        for m in 2..=max_order {
            let a = m.div_ceil(2);
            let b = m / 2;
            let pa = ProfileRef::new(fun, a, &profiles[a - 1]);
            let pb = ProfileRef::new(fun, b, &profiles[b - 1]);
            let values: Vec<f64> = radii
                .par_iter()
                .map(|&r| convolve_at(fun, n, &pa, &pb, r, extent))
                .collect();
            profiles.push(Arc::new(UniformHermite::new(h, values, true)));
        }
        Ok(ConvolutionTable {
            fun: *fun,
            n,
            r_max,
            profiles,
        })
    }

    pub fn fun(&self) -> &RVFunction {
        &self.fun
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn max_order(&self) -> usize {
        self.profiles.len()
    }

    pub fn r_max(&self) -> f64 {
        self.r_max
    }

    /// Largest radius stored on the grid.
    pub fn extent(&self) -> f64 {
        self.profiles[0].extent()
    }

    pub fn spacing(&self) -> f64 {
        self.profiles[0].spacing()
    }

    pub fn node_count(&self) -> usize {
        self.profiles[0].len()
    }

    /// `ln(dν^{*m}/dx)` at radius `r`; `-inf` beyond the grid.
    pub fn log_density(&self, m: usize, r: f64) -> f64 {
        debug_assert!(m >= 1 && m <= self.profiles.len());
        if m == 1 {
            if r > self.extent() {
                return f64::NEG_INFINITY;
            }
            return -self.fun.eval(r);
        }
        self.profiles[m - 1].eval(r.abs())
    }

    pub fn profile(&self, m: usize) -> Result<RadialDensity> {
        if m == 0 || m > self.profiles.len() {
            return Err(Error::invalid(format!("order {m} not present in table")));
        }
        Ok(RadialDensity {
            fun: self.fun,
            n: self.n,
            m,
            r_max: self.r_max,
            table: Arc::clone(&self.profiles[m - 1]),
        })
    }
}

impl RadialDensity {
    /// Grid radii.
    pub fn radii(&self) -> Vec<f64> {
        let h = self.table.spacing();
        (0..self.table.len()).map(|j| j as f64 * h).collect()
    }

    /// Log-density values at [`Self::radii`].
    pub fn values(&self) -> &[f64] {
        self.table.values()
    }

    pub fn extent(&self) -> f64 {
        self.table.extent()
    }

    pub fn eval(&self, r: f64) -> f64 {
        if self.m == 1 {
            if r.abs() > self.table.extent() {
                return f64::NEG_INFINITY;
            }
            return -self.fun.eval(r);
        }
        self.table.eval(r.abs())
    }

    /// `ln ∫_{|x| ≤ extent} exp(L(|x|)) dx`.
    pub fn log_total_mass(&self) -> f64 {
        let pow = (self.n - 1) as i32;
        let peak = self.values().iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let ext = self.extent();
        let pieces: Vec<f64> = (0..=64).map(|i| ext * i as f64 / 64.0).collect();
        let est = integrate(
            |r| r.powi(pow) * (self.eval(r) - peak).exp(),
            &pieces,
            Tolerance::new(1e-300, 1e-12),
        );
        crate::rvfun::sphere_area(self.n).ln() + peak + est.value.ln()
    }
}

/// Source profile plus local shape hints used to place quadrature breakpoints.
struct ProfileRef<'a> {
    fun: &'a RVFunction,
    m: usize,
    table: &'a UniformHermite,
}

impl<'a> ProfileRef<'a> {
    fn new(fun: &'a RVFunction, m: usize, table: &'a UniformHermite) -> Self {
        ProfileRef { fun, m, table }
    }

    #[inline]
    fn eval(&self, r: f64) -> f64 {
        if self.m == 1 {
            if r > self.table.extent() {
                return f64::NEG_INFINITY;
            }
            -self.fun.eval(r)
        } else {
            self.table.eval(r)
        }
    }
}

/// Rough Gaussian widths `(along, across)` of the integrand around its peak.
fn peak_widths(fun: &RVFunction, a: usize, b: usize, r: f64, extent: f64) -> (f64, f64) {
    let m = (a + b) as f64;
    let s = (r / m).max(1e-3);
    let inv = 1.0 / a as f64 + 1.0 / b as f64;
    let along = fun.d2(s) * inv;
    let across = fun.d1(s) / s * inv;
    let clamp = |c: f64| -> f64 {
        if c > 0.0 && c.is_finite() {
            (1.0 / c.sqrt()).clamp(1e-3, extent)
        } else {
            extent
        }
    };
    (clamp(along), clamp(across))
}

fn sorted_points(mut pts: Vec<f64>, lo: f64, hi: f64) -> Vec<f64> {
    pts.retain(|p| *p > lo && *p < hi);
    pts.push(lo);
    pts.push(hi);
    pts.sort_by(|x, y| x.total_cmp(y));
    pts.dedup_by(|x, y| (*x - *y).abs() <= 1e-12 * (1.0 + y.abs()));
    pts
}

fn convolve_at(fun: &RVFunction, n: usize, pa: &ProfileRef, pb: &ProfileRef, r: f64, extent: f64) -> f64 {
    let (a, b) = (pa.m, pb.m);
    let y_star = r * a as f64 / (a + b) as f64;
    let shift = pa.eval(y_star) + pb.eval(r - y_star);
    if !shift.is_finite() {
        return f64::NEG_INFINITY;
    }
    let (w_along, w_across) = peak_widths(fun, a, b, r, extent);
    let value = match n {
        1 => convolve_line(pa, pb, r, extent, y_star, shift, w_along),
        2 => convolve_plane(pa, pb, r, extent, y_star, shift, w_along, w_across),
        3 => return convolve_space(pa, pb, r, extent, y_star, shift, w_along),
        _ => unreachable!("dimension checked at build time"),
    };
    if value > 0.0 {
        shift + value.ln()
    } else {
        f64::NEG_INFINITY
    }
}

fn window(center: f64, width: f64) -> Vec<f64> {
    [-6.0, -2.0, 2.0, 6.0]
        .iter()
        .map(|k| center + k * width)
        .chain(std::iter::once(center))
        .collect()
}

/// Walks outward from `center` in growing steps until `log_g` has dropped
/// `CUTOFF_NATS` below `peak` twice in a row, staying inside `[lo, hi]`.
fn effective_range<G: Fn(f64) -> f64>(log_g: G, center: f64, width: f64, peak: f64, lo: f64, hi: f64) -> (f64, f64) {
    let walk = |dir: f64, limit: f64| -> f64 {
        let mut step = width;
        let mut x = center.clamp(lo, hi);
        let mut below = 0;
        loop {
            x += dir * step;
            if (dir > 0.0 && x >= limit) || (dir < 0.0 && x <= limit) {
                return limit;
            }
            if log_g(x) < peak - CUTOFF_NATS {
                below += 1;
                if below == 2 {
                    return x;
                }
            } else {
                below = 0;
            }
            step *= 1.25;
        }
    };
    (walk(-1.0, lo), walk(1.0, hi))
}

fn convolve_line(pa: &ProfileRef, pb: &ProfileRef, r: f64, extent: f64, y_star: f64, shift: f64, w: f64) -> f64 {
    let log_g = |y: f64| pa.eval(y.abs()) + pb.eval((r - y).abs());
    let (lo, hi) = effective_range(log_g, y_star, w, shift, r - extent, extent);
    let mut pts = window(y_star, w);
    // the first-order exponent may be non-smooth at the origin
    if pa.m == 1 {
        pts.push(0.0);
    }
    if pb.m == 1 {
        pts.push(r);
    }
    let pts = sorted_points(pts, lo, hi);
    integrate(|y: f64| (log_g(y) - shift).exp(), &pts, quad_tol()).value
}

#[allow(clippy::too_many_arguments)]
fn convolve_plane(
    pa: &ProfileRef,
    pb: &ProfileRef,
    r: f64,
    extent: f64,
    y_star: f64,
    shift: f64,
    w_along: f64,
    w_across: f64,
) -> f64 {
    // x = (r, 0); integrate over the upper half plane and double
    let ridge = |y2: f64| {
        let y2s = y2 * y2;
        pa.eval((y_star * y_star + y2s).sqrt()) + pb.eval(((r - y_star) * (r - y_star) + y2s).sqrt())
    };
    let (_, y2_end) = effective_range(ridge, 0.0, w_across, shift, 0.0, extent);
    let outer_pts = sorted_points(
        [2.0, 6.0].iter().map(|k| k * w_across).collect(),
        0.0,
        y2_end,
    );
    let mut inner_base = window(y_star, w_along);
    if pa.m == 1 {
        inner_base.push(0.0);
    }
    if pb.m == 1 {
        inner_base.push(r);
    }
    let outer = integrate(
        |y2: f64| {
            let half = (extent * extent - y2 * y2).max(0.0).sqrt();
            let lo = r - half;
            let hi = half;
            if !(hi > lo) {
                return 0.0;
            }
            let y2s = y2 * y2;
            let log_g = |y1: f64| {
                let ra = (y1 * y1 + y2s).sqrt();
                let rb = ((r - y1) * (r - y1) + y2s).sqrt();
                pa.eval(ra) + pb.eval(rb)
            };
            let (lo, hi) = effective_range(log_g, y_star, w_along, shift, lo, hi);
            let pts = sorted_points(inner_base.clone(), lo, hi);
            integrate(|y1: f64| (log_g(y1) - shift).exp(), &pts, quad_tol()).value
        },
        &outer_pts,
        quad_tol(),
    );
    2.0 * outer.value
}

fn convolve_space(pa: &ProfileRef, pb: &ProfileRef, r: f64, extent: f64, y_star: f64, shift: f64, w: f64) -> f64 {
    let mut pts = window(y_star, w);
    pts.push(r);
    let pts = sorted_points(pts, 0.0, extent);
    if r == 0.0 {
        let est = integrate(
            |rho: f64| rho * rho * (pa.eval(rho) + pb.eval(rho) - shift).exp(),
            &pts,
            quad_tol(),
        );
        return if est.value > 0.0 {
            shift + (4.0 * PI * est.value).ln()
        } else {
            f64::NEG_INFINITY
        };
    }
    // shell-by-shell: for |y| = ρ the distance |x - y| sweeps [|r-ρ|, r+ρ]
    let r_minus_ystar = r - y_star;
    let est = integrate(
        |rho: f64| {
            let lo = (r - rho).abs();
            let hi = (r + rho).min(extent);
            if !(hi > lo) {
                return 0.0;
            }
            let la = pa.eval(rho);
            if la == f64::NEG_INFINITY {
                return 0.0;
            }
            let mut inner_pts = window(r_minus_ystar, w);
            inner_pts.retain(|p| *p > lo && *p < hi);
            let inner_pts = sorted_points(inner_pts, lo, hi);
            let inner = integrate(|s: f64| s * (la + pb.eval(s) - shift).exp(), &inner_pts, quad_tol());
            rho * inner.value
        },
        &pts,
        quad_tol(),
    );
    if est.value > 0.0 {
        shift + (2.0 * PI / r * est.value).ln()
    } else {
        f64::NEG_INFINITY
    }
}

/// Convenience: profile of `ν^{*m}` reliable on `[0, r_max]`.
pub fn build_convolution(fun: &RVFunction, n: usize, m: usize, r_max: f64, nodes: usize) -> Result<RadialDensity> {
    if nodes < 256 {
        return Err(Error::invalid(format!("at least 256 nodes required, got {nodes}")));
    }
    ConvolutionTable::build(fun, n, m, r_max, nodes)?.profile(m)
}

/// Log-scale lower and upper envelope of `ν^{*m}` at radius `r`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Envelope {
    pub lower: f64,
    pub upper: f64,
}

/// Two-sided estimate of `ln ν^{*m}(x)` at `|x| = r`:
///
/// ```text
/// upper = ((n-1)(m-1)/2) ln(α-1) + (n(m-1)/2) ln(2π/f''(r/m)) - m(f(r/m) - δ)
/// lower = upper - (n/2) ln m - 2mδ
/// ```
pub fn proposition_bounds(fun: &RVFunction, n: usize, m: usize, r: f64, delta: f64) -> Result<Envelope> {
    check_dim(n)?;
    if m == 0 {
        return Err(Error::invalid("order must be at least 1"));
    }
    if !(delta >= 0.0) {
        return Err(Error::invalid(format!("delta must be non-negative, got {delta}")));
    }
    let mf = m as f64;
    let nf = n as f64;
    let s = r / mf;
    if m > 1 && !(s > fun.convexity_threshold() && s > 0.0) {
        return Err(Error::domain(
            format!("r/m = {s} is not above the convexity threshold"),
            Some(fun.convexity_threshold()),
        ));
    }
    let f = fun.eval(s);
    let common = if m == 1 {
        0.0
    } else {
        let curv = fun.d2(s);
        if !(curv > 0.0 && curv.is_finite()) {
            return Err(Error::domain(format!("f'' degenerate at r/m = {s}"), Some(fun.convexity_threshold())));
        }
        0.5 * (nf - 1.0) * (mf - 1.0) * (fun.alpha() - 1.0).ln() + 0.5 * nf * (mf - 1.0) * (2.0 * PI / curv).ln()
    };
    Ok(Envelope {
        upper: common - mf * (f - delta),
        lower: common - 0.5 * nf * mf.ln() - mf * (f + delta),
    })
}

/// Laplace-method approximation of `ln ν^{*m}(x)` at `|x| = r`, exact for
/// `f(x) = x²`. Returns `None` when `r/m` is not in the convex region.
pub fn laplace_log_density(fun: &RVFunction, n: usize, m: usize, r: f64) -> Option<f64> {
    if m == 1 {
        return Some(-fun.eval(r));
    }
    let mf = m as f64;
    let nf = n as f64;
    let s = r / mf;
    if !(s > fun.convexity_threshold() && s > 0.0) {
        return None;
    }
    let jet = fun.jet(s);
    if !(jet[1] > 0.0 && jet[2] > 0.0) {
        return None;
    }
    Some(
        -mf * jet[0] + 0.5 * (mf - 1.0) * (2.0 * PI / jet[2]).ln()
            + 0.5 * (nf - 1.0) * (mf - 1.0) * (2.0 * PI * s / jet[1]).ln()
            - 0.5 * nf * mf.ln(),
    )
}

/// Smallest `r/m` above which the envelope holds at every grid node up to
/// `r_max`. `None` if it fails at the last node.
pub fn sandwich_onset(table: &ConvolutionTable, m: usize, delta: f64) -> Option<f64> {
    let h = table.spacing();
    let last = (table.r_max() / h).floor() as usize;
    let mut onset = None;
    for j in (1..=last).rev() {
        let r = j as f64 * h;
        let inside = match proposition_bounds(table.fun(), table.dim(), m, r, delta) {
            Ok(env) => {
                let v = table.log_density(m, r);
                env.lower <= v && v <= env.upper
            }
            Err(_) => false,
        };
        if inside {
            onset = Some(r / m as f64);
        } else {
            break;
        }
    }
    onset
}

#[cfg(test)]
mod tests {
    use super::*;

    fn gaussian_log(n: usize, m: usize, r: f64) -> f64 {
        let (nf, mf) = (n as f64, m as f64);
        0.5 * nf * (mf - 1.0) * PI.ln() - 0.5 * nf * mf.ln() - r * r / mf
    }

    #[test]
    fn first_order_is_exact() {
        let f = RVFunction::power(1.5).unwrap();
        let p = build_convolution(&f, 1, 1, 10.0, 256).unwrap();
        for (r, v) in p.radii().iter().zip(p.values()) {
            assert_eq!(*v, -f.eval(*r));
        }
    }

    #[test]
    fn gaussian_oracle_one_dim() {
        let f = RVFunction::power(2.0).unwrap();
        let t = ConvolutionTable::build(&f, 1, 4, 10.0, 256).unwrap();
        assert!((t.log_density(3, 6.0) - (PI.ln() - 0.5 * 3f64.ln() - 12.0)).abs() < 1e-8);
        for &r in &[0.0, 0.77, 5.5, 9.9] {
            for m in 1..=4 {
                assert!((t.log_density(m, r) - gaussian_log(1, m, r)).abs() < 1e-8);
            }
        }
    }

    #[test]
    fn gaussian_oracle_plane_and_space() {
        let f = RVFunction::power(2.0).unwrap();
        let t2 = ConvolutionTable::build(&f, 2, 2, 5.0, 256).unwrap();
        assert!((t2.log_density(2, 4.0) - (PI * 0.5 * (-8.0f64).exp()).ln()).abs() < 1e-8);
        let t3 = ConvolutionTable::build(&f, 3, 3, 4.0, 256).unwrap();
        for &r in &[0.0, 1.3, 3.9] {
            assert!((t3.log_density(3, r) - gaussian_log(3, 3, r)).abs() < 1e-7, "r={r}");
        }
    }

    #[test]
    fn bound_examples() {
        let f = RVFunction::power(2.0).unwrap();
        let env = proposition_bounds(&f, 1, 3, 6.0, 0.0).unwrap();
        assert!((env.lower - (PI.ln() - 0.5 * 3f64.ln() - 12.0)).abs() < 1e-12);
        let one = proposition_bounds(&f, 2, 1, 3.0, 0.25).unwrap();
        assert_eq!(one.upper, -9.0 + 0.25);
        assert_eq!(one.lower, -9.0 - 0.25);
        let cube = RVFunction::power(3.0).unwrap();
        assert!(proposition_bounds(&cube, 1, 2, 0.0, 0.1).is_err());
    }

    #[test]
    fn laplace_form_is_exact_for_squares() {
        let f = RVFunction::power(2.0).unwrap();
        for n in 1..=3 {
            for m in 1..=6 {
                let got = laplace_log_density(&f, n, m, 4.5).unwrap();
                assert!((got - gaussian_log(n, m, 4.5)).abs() < 1e-12, "n={n} m={m}");
            }
        }
    }

    #[test]
    fn mass_is_power_of_single_mass() {
        let f = RVFunction::power(1.5).unwrap();
        let t = ConvolutionTable::build(&f, 1, 4, 30.0, 256).unwrap();
        let ln_a = f.log_jump_measure_mass(1).unwrap();
        for m in 1..=4 {
            let got = t.profile(m).unwrap().log_total_mass();
            assert!((got - m as f64 * ln_a).abs() < 1e-6, "m={m} {got}");
        }
    }
}
