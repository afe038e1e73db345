//! Rate functionals, the speed function and the jump statistics of the
//! rescaled bridge `Y^ε = ε L_{r_ε ·}` conditioned on `Y^ε_T = x`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bridge::{norm, BridgeConfig, BridgeModel, BridgePath};
use crate::error::{Error, Result};
use crate::gsolver::GSolution;
use crate::marginal::density_solver;
use crate::numerics::stable_sum;

/// Relative distance from `[[0, x]]` still counted as on the segment.
pub const SEGMENT_TOLERANCE: f64 = 1e-9;

/// `ln(ε^{-1} r_ε^{-1})`, the argument of `g` in the speed function.
fn speed_log_argument(cfg: &BridgeConfig) -> f64 {
    -cfg.log_epsilon() - cfg.r_eps().ln()
}

/// `S(ε) = ε g(ε^{-1} r_ε^{-1})`.
pub fn speed_function(cfg: &BridgeConfig) -> Result<f64> {
    let sol = density_solver(&cfg.fun, cfg.n)?;
    speed_with(&sol, cfg)
}

/// [`speed_function`] with a caller-provided solver, for sweeps.
pub fn speed_with(sol: &GSolution, cfg: &BridgeConfig) -> Result<f64> {
    let g = sol.solve(speed_log_argument(cfg))?;
    Ok((cfg.log_epsilon() + g.ln()).exp())
}

/// Why a path has infinite rate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RateViolation {
    /// A knot lies off the segment `[[0, x]]`.
    OffSegment,
    /// `|φ|` decreases between two knots.
    NonMonotoneNorm,
}

/// Value of a rate functional; `value` is `+inf` exactly when the path is
/// not admissible.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateEvaluation {
    #[serde(with = "extended_real")]
    pub value: f64,
    pub admissible: bool,
    pub violations: Vec<RateViolation>,
}

/// Serializes `±inf` as the strings `"inf"`/`"-inf"`, since JSON has no infinity.
mod extended_real {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_infinite() {
            s.serialize_str(if *v > 0.0 { "inf" } else { "-inf" })
        } else {
            s.serialize_f64(*v)
        }
    }

    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Repr {
        Num(f64),
        Text(String),
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        match Repr::deserialize(d)? {
            Repr::Num(v) => Ok(v),
            Repr::Text(t) => match t.as_str() {
                "inf" => Ok(f64::INFINITY),
                "-inf" => Ok(f64::NEG_INFINITY),
                other => Err(serde::de::Error::custom(format!("expected a number or \"inf\", got {other:?}"))),
            },
        }
    }
}

/// `r ln(r/dt)` with `0 ln 0 = 0`.
fn entropy_term(r: f64, dt: f64) -> f64 {
    if r == 0.0 {
        0.0
    } else {
        r * (r / dt).ln()
    }
}

/// Entropy rate `∫ |φ|' ln|φ|' dt - |x| ln(|x|/T)` of the piecewise linear path
/// through `knots`, which must start at `(0, 0)` and end at `(T, x)`.
pub fn path_rate(cfg: &BridgeConfig, knots: &[(f64, Vec<f64>)]) -> Result<RateEvaluation> {
    let x = cfg.endpoint();
    let horizon = cfg.horizon();
    if knots.len() < 2 {
        return Err(Error::invalid("a path needs at least two knots"));
    }
    let (t0, p0) = &knots[0];
    let (t1, p1) = &knots[knots.len() - 1];
    if *t0 != 0.0 || p0.iter().any(|v| *v != 0.0) {
        return Err(Error::invalid("the path must start at (0, 0)"));
    }
    if *t1 != horizon || p1.as_slice() != x {
        return Err(Error::invalid("the path must end at (T, x)"));
    }
    for w in knots.windows(2) {
        if !(w[1].0 > w[0].0) {
            return Err(Error::invalid("knot times must be strictly increasing"));
        }
    }
    if knots.iter().any(|(_, p)| p.len() != x.len() || p.iter().any(|v| !v.is_finite())) {
        return Err(Error::invalid("knot positions must be finite vectors of the endpoint's dimension"));
    }

    let xn = cfg.endpoint_norm();
    let tol = SEGMENT_TOLERANCE * xn;
    let mut violations = Vec::new();
    let mut norms = Vec::with_capacity(knots.len());
    for (_, p) in knots {
        // projection onto the line through x, clamped to the segment
        let theta = (p.iter().zip(x).map(|(a, b)| a * b).sum::<f64>() / (xn * xn)).clamp(0.0, 1.0);
        let dist = norm(&p.iter().zip(x).map(|(a, b)| a - theta * b).collect::<Vec<_>>());
        if dist > tol && !violations.contains(&RateViolation::OffSegment) {
            violations.push(RateViolation::OffSegment);
        }
        norms.push(norm(p));
    }
    if norms.windows(2).any(|w| w[1] < w[0] - tol) {
        violations.push(RateViolation::NonMonotoneNorm);
    }
    if !violations.is_empty() {
        return Ok(RateEvaluation {
            value: f64::INFINITY,
            admissible: false,
            violations,
        });
    }
    let pieces = knots.windows(2).map(|w| {
        let step: Vec<f64> = w[1].1.iter().zip(&w[0].1).map(|(a, b)| a - b).collect();
        entropy_term(norm(&step), w[1].0 - w[0].0)
    });
    let value = stable_sum(pieces.chain(std::iter::once(-entropy_term(xn, horizon))));
    Ok(RateEvaluation {
        value,
        admissible: true,
        violations,
    })
}

/// Finite-dimensional rate of the bridge at times `t_1 < … < t_m` in `(0, T)`
/// and positions `y_1, …, y_m`, with `y_0 = 0` and `y_{m+1} = x`.
pub fn finite_dim_rate(cfg: &BridgeConfig, times: &[f64], points: &[Vec<f64>]) -> Result<RateEvaluation> {
    if times.len() != points.len() {
        return Err(Error::invalid("times and points must have equal length"));
    }
    if times.iter().any(|&t| !(t > 0.0 && t < cfg.horizon())) {
        return Err(Error::invalid("times must lie strictly inside (0, T)"));
    }
    let mut knots = Vec::with_capacity(times.len() + 2);
    knots.push((0.0, vec![0.0; cfg.n]));
    knots.extend(times.iter().copied().zip(points.iter().cloned()));
    knots.push((cfg.horizon(), cfg.endpoint().to_vec()));
    path_rate(cfg, &knots)
}

/// `-S(ε) ln μ̄_t(y)`, the scaled log-density whose limit is the rate.
pub fn scaled_bridge_log_density(model: &BridgeModel, t: f64, y: &[f64]) -> Result<f64> {
    let s = speed_function(model.config())?;
    Ok(-s * model.bridge_marginal_logdensity(t, y)?)
}

/// `-S(ε) ln μ̄_t(y)` minus its limit `finite_dim_rate((t), (y))`.
///
/// Off the segment the limit is infinite and the scaled log-density itself
/// is returned, so that a sweep over `ε` should show it growing.
pub fn scaled_bridge_logdensity_defect(model: &BridgeModel, t: f64, y: &[f64]) -> Result<f64> {
    let scaled = scaled_bridge_log_density(model, t, y)?;
    let rate = finite_dim_rate(model.config(), &[t], &[y.to_vec()])?;
    Ok(if rate.admissible { scaled - rate.value } else { scaled })
}

/// Sample mean, variance and standard error of the mean.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Moments {
    pub mean: f64,
    pub variance: f64,
    pub stderr: f64,
    pub count: usize,
}

const CHUNK: usize = 4096;

/// Sum in fixed chunks so that the result does not depend on the thread count.
fn chunked_sum(values: &[f64]) -> f64 {
    let partial: Vec<f64> = values.par_chunks(CHUNK).map(|c| stable_sum(c.iter().copied())).collect();
    stable_sum(partial)
}

impl Moments {
    pub fn of(values: &[f64]) -> Self {
        let count = values.len();
        if count == 0 {
            return Moments {
                mean: f64::NAN,
                variance: f64::NAN,
                stderr: f64::NAN,
                count,
            };
        }
        let k = count as f64;
        let mean = chunked_sum(values) / k;
        let dev: Vec<f64> = values.iter().map(|v| (v - mean) * (v - mean)).collect();
        let variance = if count > 1 { chunked_sum(&dev) / (k - 1.0) } else { 0.0 };
        Moments {
            mean,
            variance,
            stderr: (variance / k).sqrt(),
            count,
        }
    }

    /// `|mean| ≤ 3·stderr` and variance in `[0.8, 1.2]`.
    pub fn is_standard(&self) -> bool {
        self.mean.abs() <= 3.0 * self.stderr && (0.8..=1.2).contains(&self.variance)
    }
}

/// Summary of the jump statistics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JumpSummary {
    pub counts: Moments,
    /// Standardized counts `√k_ε (N - m_{x,ε})`.
    pub standardized_counts: Moments,
    /// Components of `𝕎`; the first is along `x`.
    pub standardized_increments: Vec<Moments>,
    /// Raw variance of the first jump along `x` and across it (averaged over
    /// the orthogonal directions; `None` in one dimension).
    pub raw_variance_along: f64,
    pub raw_variance_across: Option<f64>,
    pub mean_jump_norm: f64,
    /// `E|W| / g`.
    pub mean_jump_ratio: f64,
    /// `E[N] E|W| ε / |x|`.
    pub balance: f64,
    pub metropolis_fraction: f64,
}

/// Normalizations and standardized samples of the jump count and first jump.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JumpStatistics {
    /// `g(|x| ε^{-1} / (r_ε T))`, the typical jump size.
    pub typical_jump: f64,
    /// `m_{x,ε} = |x| ε^{-1} / g`.
    pub m_center: f64,
    /// `k_ε = α ε g |ln ε| / |x|`.
    pub k_scale: f64,
    /// The same scale without the `|ln ε|` factor, `α ε g / |x|`.
    pub k_scale_short: f64,
    pub speed: f64,
    pub standardized_counts: Vec<f64>,
    pub standardized_increments: Vec<Vec<f64>>,
    pub summary: JumpSummary,
}

/// Count normalizations `(g, m_center, k_scale, k_scale_short)` for `cfg`.
pub fn count_normalization(cfg: &BridgeConfig) -> Result<(f64, f64, f64, f64)> {
    let sol = density_solver(&cfg.fun, cfg.n)?;
    let g = sol.solve(cfg.log_lambda() - cfg.total_time().ln())?;
    let xn = cfg.endpoint_norm();
    let short = cfg.fun.alpha() * cfg.epsilon() * g / xn;
    Ok((g, cfg.lambda() / g, short * cfg.log_epsilon().abs(), short))
}

/// Standardizes jump counts and first jumps of `paths` sampled under `cfg`.
pub fn jump_statistics(cfg: &BridgeConfig, paths: &[BridgePath]) -> Result<JumpStatistics> {
    if paths.is_empty() {
        return Err(Error::invalid("no paths to summarize"));
    }
    if paths.iter().any(|p| p.jumps.is_empty() || p.jumps[0].len() != cfg.n) {
        return Err(Error::invalid("paths do not match the configuration"));
    }
    let (g, m_center, k_scale, k_scale_short) = count_normalization(cfg)?;
    let speed = speed_function(cfg)?;
    let n = cfg.n;
    let alpha = cfg.fun.alpha();
    let xn = cfg.endpoint_norm();
    let dir: Vec<f64> = cfg.endpoint().iter().map(|v| v / xn).collect();
    let root_curv = cfg.fun.d2(g).sqrt();

    let counts: Vec<f64> = paths.iter().map(|p| p.count as f64).collect();
    let standardized_counts: Vec<f64> = counts.iter().map(|c| k_scale.sqrt() * (c - m_center)).collect();
    let standardized_increments: Vec<Vec<f64>> = paths
        .par_iter()
        .map(|p| {
            let w = &p.jumps[0];
            let bar: Vec<f64> = (0..n).map(|i| root_curv * (w[i] - g * dir[i])).collect();
            let along: f64 = bar.iter().zip(&dir).map(|(a, b)| a * b).sum();
            (0..n).map(|i| along * dir[i] + (bar[i] - along * dir[i]) / (alpha - 1.0)).collect()
        })
        .collect();

    let along_raw: Vec<f64> = paths
        .iter()
        .map(|p| p.jumps[0].iter().zip(&dir).map(|(a, b)| a * b).sum())
        .collect();
    let raw_variance_across = (n > 1).then(|| {
        let perp_sq: Vec<f64> = paths
            .iter()
            .zip(&along_raw)
            .map(|(p, a)| p.jumps[0].iter().zip(&dir).map(|(w, d)| (w - a * d).powi(2)).sum())
            .collect();
        // the perpendicular mean is zero by rotational symmetry
        chunked_sum(&perp_sq) / (paths.len() as f64 * (n - 1) as f64)
    });
    let norms: Vec<f64> = paths.iter().map(|p| norm(&p.jumps[0])).collect();
    let mean_jump_norm = Moments::of(&norms).mean;
    let count_moments = Moments::of(&counts);
    let metropolis = paths
        .iter()
        .filter(|p| p.method_flag == crate::bridge::SamplingMethod::Metropolis)
        .count();

    let standardized_increment_moments = (0..n)
        .map(|i| {
            let rotated: Vec<f64> = if i == 0 {
                standardized_increments
                    .iter()
                    .map(|v| v.iter().zip(&dir).map(|(a, b)| a * b).sum())
                    .collect()
            } else {
                standardized_increments.iter().map(|v| v[i]).collect()
            };
            Moments::of(&rotated)
        })
        .collect();

    let summary = JumpSummary {
        counts: count_moments,
        standardized_counts: Moments::of(&standardized_counts),
        standardized_increments: standardized_increment_moments,
        raw_variance_along: Moments::of(&along_raw).variance,
        raw_variance_across,
        mean_jump_norm,
        mean_jump_ratio: mean_jump_norm / g,
        balance: count_moments.mean * mean_jump_norm / cfg.lambda(),
        metropolis_fraction: metropolis as f64 / paths.len() as f64,
    };
    Ok(JumpStatistics {
        typical_jump: g,
        m_center,
        k_scale,
        k_scale_short,
        speed,
        standardized_counts,
        standardized_increments,
        summary,
    })
}

/// Exact mean and variance of `√k_ε (N - m_{x,ε})` under the bridge law,
/// from the conditional count pmf.
pub fn exact_count_moments(model: &BridgeModel) -> Result<(f64, f64)> {
    let (_, m_center, k_scale, _) = count_normalization(model.config())?;
    let pmf = model.count_log_pmf()?;
    let weights: Vec<f64> = pmf.iter().map(|v| v.exp()).collect();
    let mean_n = stable_sum(weights.iter().enumerate().map(|(i, w)| w * (i + 1) as f64));
    let var_n = stable_sum(weights.iter().enumerate().map(|(i, w)| w * ((i + 1) as f64 - mean_n).powi(2)));
    Ok((k_scale.sqrt() * (mean_n - m_center), k_scale * var_n))
}

/// Quantities entering the comparison of the density exponent with the
/// classical tail constant `D̃_ε`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DtildeConsistency {
    /// `q_ε = f^{-1}(ln ε^{-1})`.
    pub q: f64,
    /// `d_α = α (α-1)^{-(1-1/α)}`.
    pub d_alpha: f64,
    /// `g(ε^{-1}/t)` with `t = r_ε T`.
    pub g: f64,
    /// `D̃_ε ε / (f'(g) + 1/g)`.
    pub ratio_with_correction: f64,
    /// `D̃_ε ε / f'(g)`.
    pub ratio_leading: f64,
}

/// `d_α = α (α-1)^{-(1-1/α)}`.
pub fn d_alpha(alpha: f64) -> f64 {
    alpha * (alpha - 1.0).powf(-(1.0 - 1.0 / alpha))
}

/// Both ratios of `D̃_ε` against the density exponent; each tends to 1 as `ε → 0`.
/// The common factor `ε^{-1}` is cancelled analytically.
pub fn dtilde_consistency(cfg: &BridgeConfig) -> Result<DtildeConsistency> {
    let log_inv_eps = -cfg.log_epsilon();
    let q = cfg.fun.inverse(log_inv_eps)?;
    let sol = density_solver(&cfg.fun, cfg.n)?;
    let g = sol.solve(log_inv_eps - cfg.total_time().ln())?;
    let da = d_alpha(cfg.fun.alpha());
    let scaled = da * log_inv_eps / q;
    let fp = cfg.fun.d1(g);
    Ok(DtildeConsistency {
        q,
        d_alpha: da,
        g,
        ratio_with_correction: scaled / (fp + 1.0 / g),
        ratio_leading: scaled / fp,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bridge::TimeScale;
    use crate::RVFunction;

    fn cfg(x: Vec<f64>) -> BridgeConfig {
        let n = x.len();
        BridgeConfig::new(RVFunction::power(2.0).unwrap(), n, -5.0, TimeScale::Rho(0.0), 1.0, x, 0).unwrap()
    }

    #[test]
    fn linear_path_has_zero_rate() {
        let c = cfg(vec![1.0, 2.0]);
        let r = path_rate(&c, &[(0.0, vec![0.0, 0.0]), (1.0, vec![1.0, 2.0])]).unwrap();
        assert_eq!(r.value, 0.0);
        assert!(r.admissible);
    }

    #[test]
    fn two_piece_closed_form() {
        let c = cfg(vec![1.0]);
        let r = path_rate(&c, &[(0.0, vec![0.0]), (0.25, vec![0.5]), (1.0, vec![1.0])]).unwrap();
        let expected = 0.5 * 2.0f64.ln() + 0.5 * (2.0f64 / 3.0).ln();
        assert!((r.value - expected).abs() < 1e-15);
    }

    #[test]
    fn off_segment_and_backtracking() {
        let c = cfg(vec![1.0, 0.0]);
        let off = finite_dim_rate(&c, &[0.5], &[vec![0.5, 0.1]]).unwrap();
        assert_eq!(off.value, f64::INFINITY);
        assert_eq!(off.violations, vec![RateViolation::OffSegment]);
        let back = finite_dim_rate(&c, &[0.3, 0.6], &[vec![0.6, 0.0], vec![0.4, 0.0]]).unwrap();
        assert_eq!(back.violations, vec![RateViolation::NonMonotoneNorm]);
        let json = serde_json::to_string(&off).unwrap();
        assert!(json.contains("\"inf\""));
        assert_eq!(serde_json::from_str::<RateEvaluation>(&json).unwrap(), off);
    }

    #[test]
    fn malformed_knots_rejected() {
        let c = cfg(vec![1.0]);
        assert!(path_rate(&c, &[(0.0, vec![0.0]), (0.0, vec![0.5]), (1.0, vec![1.0])]).is_err());
        assert!(path_rate(&c, &[(0.0, vec![0.1]), (1.0, vec![1.0])]).is_err());
    }

    #[test]
    fn d_alpha_values() {
        assert_eq!(d_alpha(2.0), 2.0);
    }

    #[test]
    fn moments_known() {
        let m = Moments::of(&[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(m.mean, 2.5);
        assert!((m.variance - 5.0 / 3.0).abs() < 1e-15);
    }
}
