//! Cubic Hermite interpolation with monotonicity safeguards.

/// Values sampled on the uniform grid `r_j = j·h`, `j = 0..len`.
///
/// Slopes come from fourth-order central differences (exact for cubics) and are then
/// limited à la Fritsch–Carlson wherever the data is locally monotone.
/// Non-finite node values mark underflow; any interval touching such a node
/// evaluates to `-inf`.
#[derive(Debug, Clone)]
pub struct UniformHermite {
    h: f64,
    values: Vec<f64>,
    slopes: Vec<f64>,
}

impl UniformHermite {
    /// `even` pins the slope at `r = 0` to zero, as for radial profiles.
    pub fn new(h: f64, values: Vec<f64>, even: bool) -> Self {
        assert!(values.len() >= 3, "need at least three nodes");
        assert!(h > 0.0);
        let n = values.len();
        // mirror image across r = 0 for even profiles
        let at = |j: isize| -> Option<f64> {
            if j >= 0 && (j as usize) < n {
                Some(values[j as usize])
            } else if even && j < 0 && ((-j) as usize) < n {
                Some(values[(-j) as usize])
            } else {
                None
            }
        };
        let mut slopes = vec![0.0; n];
        for j in 0..n {
            let i = j as isize;
            slopes[j] = if even && j == 0 {
                0.0
            } else if let (Some(m2), Some(m1), Some(p1), Some(p2)) = (at(i - 2), at(i - 1), at(i + 1), at(i + 2)) {
                (m2 - 8.0 * m1 + 8.0 * p1 - p2) / (12.0 * h)
            } else if j == 0 {
                (-3.0 * values[0] + 4.0 * values[1] - values[2]) / (2.0 * h)
            } else if j == n - 1 {
                (3.0 * values[j] - 4.0 * values[j - 1] + values[j - 2]) / (2.0 * h)
            } else {
                (values[j + 1] - values[j - 1]) / (2.0 * h)
            };
            if !slopes[j].is_finite() {
                slopes[j] = fallback_slope(&values, j, h);
            }
        }
        limit_slopes(&values, &mut slopes, |_| h);
        UniformHermite { h, values, slopes }
    }

    pub fn spacing(&self) -> f64 {
        self.h
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Largest abscissa covered by the table.
    pub fn extent(&self) -> f64 {
        self.h * (self.values.len() - 1) as f64
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Interpolated value; `-inf` outside `[0, extent]`.
    pub fn eval(&self, r: f64) -> f64 {
        if !(r >= 0.0) {
            return f64::NEG_INFINITY;
        }
        let u = r / self.h;
        let last = self.values.len() - 1;
        if u > last as f64 {
            return f64::NEG_INFINITY;
        }
        let j = (u.floor() as usize).min(last - 1);
        let s = u - j as f64;
        let (y0, y1) = (self.values[j], self.values[j + 1]);
        if !y0.is_finite() || !y1.is_finite() {
            if s == 0.0 {
                return y0;
            }
            if s == 1.0 {
                return y1;
            }
            return f64::NEG_INFINITY;
        }
        hermite(y0, y1, self.slopes[j] * self.h, self.slopes[j + 1] * self.h, s)
    }
}

fn fallback_slope(values: &[f64], j: usize, h: f64) -> f64 {
    let left = if j > 0 { (values[j] - values[j - 1]) / h } else { f64::NAN };
    let right = if j + 1 < values.len() { (values[j + 1] - values[j]) / h } else { f64::NAN };
    match (left.is_finite(), right.is_finite()) {
        (true, _) => left,
        (false, true) => right,
        _ => 0.0,
    }
}

#[inline]
fn hermite(y0: f64, y1: f64, d0: f64, d1: f64, s: f64) -> f64 {
    let s2 = s * s;
    let s3 = s2 * s;
    let h00 = 2.0 * s3 - 3.0 * s2 + 1.0;
    let h10 = s3 - 2.0 * s2 + s;
    let h01 = -2.0 * s3 + 3.0 * s2;
    let h11 = s3 - s2;
    h00 * y0 + h10 * d0 + h01 * y1 + h11 * d1
}

fn limit_slopes<H: Fn(usize) -> f64>(values: &[f64], slopes: &mut [f64], width: H) {
    for k in 0..values.len() - 1 {
        let (y0, y1) = (values[k], values[k + 1]);
        if !y0.is_finite() || !y1.is_finite() {
            continue;
        }
        let delta = (y1 - y0) / width(k);
        if delta == 0.0 {
            continue;
        }
        // only act where neighbouring secants agree in sign (locally monotone)
        let prev = if k > 0 { (values[k] - values[k - 1]) / width(k - 1) } else { delta };
        let next = if k + 2 < values.len() { (values[k + 2] - values[k + 1]) / width(k + 1) } else { delta };
        if prev * delta <= 0.0 || next * delta <= 0.0 {
            continue;
        }
        if slopes[k] * delta < 0.0 {
            slopes[k] = 0.0;
        }
        if slopes[k + 1] * delta < 0.0 {
            slopes[k + 1] = 0.0;
        }
        let a = slopes[k] / delta;
        let b = slopes[k + 1] / delta;
        let norm = a * a + b * b;
        if norm > 9.0 {
            let tau = 3.0 / norm.sqrt();
            slopes[k] = tau * a * delta;
            slopes[k + 1] = tau * b * delta;
        }
    }
}

/// Monotone piecewise-cubic interpolant on arbitrary strictly increasing
/// abscissae (Fritsch–Butland slopes).
#[derive(Debug, Clone, Default)]
pub struct MonotoneCubic {
    xs: Vec<f64>,
    ys: Vec<f64>,
    slopes: Vec<f64>,
}

impl MonotoneCubic {
    pub fn new(xs: Vec<f64>, ys: Vec<f64>) -> Self {
        assert_eq!(xs.len(), ys.len());
        let n = xs.len();
        let mut slopes = vec![0.0; n];
        if n >= 2 {
            let sec: Vec<f64> = (0..n - 1).map(|k| (ys[k + 1] - ys[k]) / (xs[k + 1] - xs[k])).collect();
            slopes[0] = sec[0];
            slopes[n - 1] = sec[n - 2];
            for k in 1..n - 1 {
                let (d0, d1) = (sec[k - 1], sec[k]);
                slopes[k] = if d0 * d1 <= 0.0 {
                    0.0
                } else {
                    let h0 = xs[k] - xs[k - 1];
                    let h1 = xs[k + 1] - xs[k];
                    let w0 = 2.0 * h1 + h0;
                    let w1 = h1 + 2.0 * h0;
                    (w0 + w1) / (w0 / d0 + w1 / d1)
                };
            }
        }
        MonotoneCubic { xs, ys, slopes }
    }

    pub fn len(&self) -> usize {
        self.xs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.xs.is_empty()
    }

    /// Interpolated value, or `None` outside the tabulated range.
    pub fn eval(&self, x: f64) -> Option<f64> {
        let n = self.xs.len();
        if n < 2 || !(x >= self.xs[0] && x <= self.xs[n - 1]) {
            return None;
        }
        let k = match self.xs.binary_search_by(|p| p.total_cmp(&x)) {
            Ok(i) => return Some(self.ys[i]),
            Err(i) => i - 1,
        };
        let w = self.xs[k + 1] - self.xs[k];
        let s = (x - self.xs[k]) / w;
        Some(hermite(self.ys[k], self.ys[k + 1], self.slopes[k] * w, self.slopes[k + 1] * w, s))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn reproduces_even_quadratic() {
        let h = 0.05;
        let vals: Vec<f64> = (0..400).map(|j| -((j as f64 * h).powi(2)) / 3.0 + 1.5).collect();
        let t = UniformHermite::new(h, vals, true);
        for &r in &[0.0, 0.013, 1.2345, 7.77, 19.949] {
            let exact = -r * r / 3.0 + 1.5;
            assert!((t.eval(r) - exact).abs() < 1e-12, "r={r}");
        }
        assert_eq!(t.eval(20.0), f64::NEG_INFINITY);
    }

    #[test]
    fn sentinel_nodes_propagate() {
        let mut vals: Vec<f64> = (0..10).map(|j| -(j as f64)).collect();
        vals[8] = f64::NEG_INFINITY;
        vals[9] = f64::NEG_INFINITY;
        let t = UniformHermite::new(1.0, vals, true);
        assert!(t.eval(6.5).is_finite());
        assert_eq!(t.eval(7.5), f64::NEG_INFINITY);
    }

    proptest! {
        #[test]
        fn monotone_cubic_preserves_monotonicity(steps in prop::collection::vec(0.0f64..3.0, 3..15), q in 0.0f64..1.0) {
            let xs: Vec<f64> = (0..steps.len()).map(|i| (i as f64).powf(1.3)).collect();
            let mut acc = 0.0;
            let ys: Vec<f64> = steps.iter().map(|s| { acc += s; acc }).collect();
            let m = MonotoneCubic::new(xs.clone(), ys.clone());
            let span = xs[xs.len() - 1];
            let a = m.eval(q * span).unwrap();
            let b = m.eval((q * span + 0.01).min(span)).unwrap();
            prop_assert!(b >= a - 1e-12);
            prop_assert!(a >= ys[0] - 1e-12 && a <= ys[ys.len() - 1] + 1e-12);
        }
    }
}
