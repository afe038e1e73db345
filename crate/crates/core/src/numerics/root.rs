//! Bracketed scalar root finding.

use crate::error::{Error, Result};

/// Bisection on an interval whose endpoints have opposite sign.
///
/// Stops once the bracket is narrower than `width(midpoint)`.
pub fn bisect<F, W>(mut f: F, mut lo: f64, mut hi: f64, width: W) -> Result<f64>
where
    F: FnMut(f64) -> f64,
    W: Fn(f64) -> f64,
{
    let mut f_lo = f(lo);
    let f_hi = f(hi);
    if f_lo == 0.0 {
        return Ok(lo);
    }
    if f_hi == 0.0 {
        return Ok(hi);
    }
    if !(f_lo.signum() != f_hi.signum()) || f_lo.is_nan() || f_hi.is_nan() {
        return Err(Error::numeric(format!(
            "root not bracketed on [{lo}, {hi}]: f = ({f_lo}, {f_hi})"
        )));
    }
    for _ in 0..400 {
        let mid = 0.5 * (lo + hi);
        if hi - lo <= width(mid) || mid <= lo || mid >= hi {
            return Ok(mid);
        }
        let f_mid = f(mid);
        if f_mid == 0.0 {
            return Ok(mid);
        }
        if f_mid.signum() == f_lo.signum() {
            lo = mid;
            f_lo = f_mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Grows `hi` geometrically until `f(hi) > 0`, for increasing `f` with
/// `f(lo) < 0`.
pub fn expand_upward<F: FnMut(f64) -> f64>(mut f: F, lo: f64, mut hi: f64) -> Result<(f64, f64)> {
    let mut lo = lo;
    for _ in 0..2000 {
        if f(hi) > 0.0 {
            return Ok((lo, hi));
        }
        lo = hi;
        hi *= 2.0;
        if !hi.is_finite() {
            break;
        }
    }
    Err(Error::numeric("failed to bracket root from above"))
}

/// A few safeguarded Newton steps; iterates leaving `[lo, hi]` are rejected.
pub fn newton_polish<F, D>(f: F, df: D, mut x: f64, lo: f64, hi: f64, steps: usize) -> f64
where
    F: Fn(f64) -> f64,
    D: Fn(f64) -> f64,
{
    for _ in 0..steps {
        let fx = f(x);
        let d = df(x);
        if fx == 0.0 || !d.is_finite() || d == 0.0 {
            break;
        }
        let next = x - fx / d;
        if !(next >= lo && next <= hi) || !next.is_finite() {
            break;
        }
        if f(next).abs() > fx.abs() {
            break;
        }
        x = next;
    }
    x
}
