//! Cross-module suites. Reference values come from small independent
//! oracles written here (bisection, trapezoid rules, closed forms) rather
//! than from the routines under test.

mod gsolver;
mod ldp;
mod marginal;
mod rvfun;

/// Plain bisection on a sign change; slow but easy to trust.
pub(crate) fn bisection(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64) -> f64 {
    let flo = f(lo);
    assert!(flo * f(hi) <= 0.0, "no sign change on [{lo}, {hi}]");
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if (f(mid) > 0.0) == (flo > 0.0) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Root of `y² + ln y = ln Λ - ½ ln π`, the quadratic-exponent equation in one dimension.
pub(crate) fn quadratic_g(log_lambda: f64) -> f64 {
    let c = log_lambda - 0.5 * std::f64::consts::PI.ln();
    bisection(|y| y * y + y.ln() - c, 1e-3, log_lambda.max(2.0))
}

pub(crate) fn ln_factorial_direct(m: usize) -> f64 {
    (2..=m).map(|k| (k as f64).ln()).sum()
}

/// Composite trapezoid rule on a uniform grid.
pub(crate) fn trapezoid(f: impl Fn(f64) -> f64, a: f64, b: f64, steps: usize) -> f64 {
    let h = (b - a) / steps as f64;
    let inner: f64 = (1..steps).map(|i| f(a + i as f64 * h)).sum();
    h * (inner + 0.5 * (f(a) + f(b)))
}
