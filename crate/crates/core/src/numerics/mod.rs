//! Numerical building blocks shared by the modelling modules.

pub mod interp;
pub mod quad;
pub mod root;

/// Numerically stable `ln Σ exp(x_i)`. Entries equal to `-inf` contribute
/// nothing; an empty or all-`-inf` input yields `-inf`.
pub fn log_sum_exp(values: &[f64]) -> f64 {
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    if max == f64::INFINITY {
        return f64::INFINITY;
    }
    let sum: f64 = values.iter().map(|&v| (v - max).exp()).sum();
    max + sum.ln()
}

/// `ln(e^a + e^b)`.
pub fn log_add_exp(a: f64, b: f64) -> f64 {
    let (hi, lo) = if a >= b { (a, b) } else { (b, a) };
    if hi == f64::NEG_INFINITY {
        return hi;
    }
    hi + (lo - hi).exp().ln_1p()
}

/// `ln m!` through the log-gamma function.
pub fn ln_factorial(m: u64) -> f64 {
    if m < 2 {
        0.0
    } else {
        statrs::function::gamma::ln_gamma(m as f64 + 1.0)
    }
}

/// Upper bound on `ln P(Pois(lambda) > m)` valid for `m + 2 > lambda`.
///
/// Uses `P(N > m) ≤ P(N = m+1) / (1 - lambda/(m+2))`.
pub fn ln_poisson_tail_bound(lambda: f64, m: u64) -> f64 {
    let k = m + 1;
    let ratio = lambda / (k as f64 + 1.0);
    if ratio >= 1.0 {
        return 0.0;
    }
    let ln_pmf = -lambda + k as f64 * lambda.ln() - ln_factorial(k);
    (ln_pmf - (-ratio).ln_1p()).min(0.0)
}

/// Compensated (Neumaier) summation.
pub fn stable_sum<I: IntoIterator<Item = f64>>(values: I) -> f64 {
    let mut sum = 0.0f64;
    let mut comp = 0.0f64;
    for v in values {
        let t = sum + v;
        if sum.abs() >= v.abs() {
            comp += (sum - t) + v;
        } else {
            comp += (v - t) + sum;
        }
        sum = t;
    }
    sum + comp
}
