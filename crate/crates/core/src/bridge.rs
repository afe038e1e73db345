//! The compound Poisson bridge: the process `L` run for time `r_ε T` and
//! conditioned on `ε L_{r_ε T} = x`.
//!
//! Given the count `N = m`, the jumps have joint density proportional to
//! `Π ν(w_i)` on `{w_1 + … + w_m = x/ε}`, so they can be drawn one at a
//! time: with `k` jumps left and `z` left to cover, the next jump has density
//! proportional to `exp(-f(|y|)) F_{k-1}(|z - y|)`, where `F_j` is the
//! radial profile of `ν^{*j}`. The last jump is whatever remains.

use std::f64::consts::PI;
use std::sync::Arc;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{ChiSquared, Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::asymptotic::{AsymptoticMarginal, LogMarginal, SplitLog};
use crate::convdens::ConvolutionTable;
use crate::error::{Error, Result};
use crate::marginal::{required_order, GridMarginal};
use crate::numerics::{log_add_exp, log_sum_exp};
use crate::rng;
use crate::rvfun::{check_dim, RVFunction};

/// How the time acceleration `r_ε` is specified.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TimeScale {
    /// `r_ε = ε^{-ρ}` with `ρ < 1`.
    Rho(f64),
    /// A fixed `r_ε > 0`.
    Explicit(f64),
}

/// Scaling parameters of one bridge; `ε` is stored through `ln ε` so that
/// scales like `e^{-60}` stay exact.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BridgeConfig {
    pub fun: RVFunction,
    pub n: usize,
    log_epsilon: f64,
    time_scale: TimeScale,
    horizon: f64,
    endpoint: Vec<f64>,
    seed: u64,
    r_eps: f64,
    inv_epsilon: f64,
    endpoint_norm: f64,
    time_exponent: f64,
}

impl BridgeConfig {
    pub fn new(
        fun: RVFunction,
        n: usize,
        log_epsilon: f64,
        time_scale: TimeScale,
        horizon: f64,
        endpoint: Vec<f64>,
        seed: u64,
    ) -> Result<Self> {
        check_dim(n)?;
        if !log_epsilon.is_finite() {
            return Err(Error::invalid(format!("ln epsilon must be finite, got {log_epsilon}")));
        }
        if !(horizon > 0.0) || !horizon.is_finite() {
            return Err(Error::invalid(format!("horizon must be positive, got {horizon}")));
        }
        if endpoint.len() != n {
            return Err(Error::invalid(format!(
                "endpoint has {} coordinates but the dimension is {n}",
                endpoint.len()
            )));
        }
        let endpoint_norm = norm(&endpoint);
        if !(endpoint_norm > 0.0) || !endpoint_norm.is_finite() {
            return Err(Error::invalid("endpoint must be a finite non-zero vector"));
        }
        let log_r_eps = match time_scale {
            TimeScale::Rho(rho) => {
                if !(rho < 1.0) || !rho.is_finite() {
                    return Err(Error::invalid(format!("rho must be below 1, got {rho}")));
                }
                -rho * log_epsilon
            }
            TimeScale::Explicit(r) => {
                if !(r > 0.0) || !r.is_finite() {
                    return Err(Error::invalid(format!("r_eps must be positive, got {r}")));
                }
                r.ln()
            }
        };
        let log_lambda = endpoint_norm.ln() - log_epsilon;
        if !(log_lambda > 0.0) {
            return Err(Error::invalid(format!(
                "|x|/epsilon must exceed 1 (ln = {log_lambda})"
            )));
        }
        let time_exponent = (log_r_eps + horizon.ln()) / log_lambda;
        if !(time_exponent < 1.0) {
            return Err(Error::invalid(format!(
                "r_eps T = (|x|/epsilon)^{time_exponent:.4}; the exponent must stay below 1"
            )));
        }
        Ok(BridgeConfig {
            fun,
            n,
            log_epsilon,
            time_scale,
            horizon,
            endpoint,
            seed,
            r_eps: log_r_eps.exp(),
            inv_epsilon: (-log_epsilon).exp(),
            endpoint_norm,
            time_exponent,
        })
    }

    pub fn epsilon(&self) -> f64 {
        self.log_epsilon.exp()
    }

    pub fn log_epsilon(&self) -> f64 {
        self.log_epsilon
    }

    pub fn inv_epsilon(&self) -> f64 {
        self.inv_epsilon
    }

    pub fn time_scale(&self) -> TimeScale {
        self.time_scale
    }

    pub fn rho(&self) -> Option<f64> {
        match self.time_scale {
            TimeScale::Rho(r) => Some(r),
            TimeScale::Explicit(_) => None,
        }
    }

    pub fn r_eps(&self) -> f64 {
        self.r_eps
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn endpoint(&self) -> &[f64] {
        &self.endpoint
    }

    pub fn endpoint_norm(&self) -> f64 {
        self.endpoint_norm
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn with_seed(&self, seed: u64) -> Self {
        BridgeConfig { seed, ..self.clone() }
    }

    /// `Λ = |x|/ε`.
    pub fn lambda(&self) -> f64 {
        self.endpoint_norm * self.inv_epsilon
    }

    /// `ln Λ`, exact even when `Λ` overflows.
    pub fn log_lambda(&self) -> f64 {
        self.endpoint_norm.ln() - self.log_epsilon
    }

    /// Conditioning time `r_ε T` of the unscaled process.
    pub fn total_time(&self) -> f64 {
        self.r_eps * self.horizon
    }

    /// `ln(r_ε T) / ln Λ`, the witness that `r_ε T = Λ^e` with `e < 1`.
    pub fn time_exponent(&self) -> f64 {
        self.time_exponent
    }

    /// `x/ε`, the target of the unscaled jumps.
    pub fn scaled_endpoint(&self) -> Vec<f64> {
        self.endpoint.iter().map(|v| v * self.inv_epsilon).collect()
    }
}

/// Which marginal evaluator backs the bridge densities.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Backend {
    /// Grid when `Λ` is at most `grid_limit`, Laplace expansion otherwise.
    Auto,
    Grid,
    Asymptotic,
}

#[derive(Debug, Clone, Copy)]
pub struct BridgeOptions {
    pub nodes: usize,
    pub m_cap: Option<usize>,
    pub backend: Backend,
    pub grid_limit: f64,
}

impl Default for BridgeOptions {
    fn default() -> Self {
        BridgeOptions {
            nodes: 256,
            m_cap: None,
            backend: Backend::Auto,
            grid_limit: 400.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SamplingMethod {
    /// Every jump came from certified rejection sampling.
    Rejection,
    /// At least one jump fell back to an independence Metropolis chain.
    Metropolis,
}

/// One sampled bridge path. Jumps are those of the unscaled process and sum
/// to `x/ε`; jump times lie in `(0, T]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BridgePath {
    pub jump_times: Vec<f64>,
    pub jumps: Vec<Vec<f64>>,
    pub count: usize,
    pub method_flag: SamplingMethod,
}

impl BridgePath {
    /// Coordinate-wise sum of the jumps.
    pub fn jump_sum(&self) -> Vec<f64> {
        let n = self.jumps.first().map_or(0, Vec::len);
        let mut s = vec![0.0; n];
        for w in &self.jumps {
            for (a, b) in s.iter_mut().zip(w) {
                *a += b;
            }
        }
        s
    }

    /// Position of the rescaled bridge `ε L_{r_ε t}` at time `t`.
    pub fn position(&self, t: f64, epsilon: f64) -> Vec<f64> {
        let n = self.jumps.first().map_or(0, Vec::len);
        let mut p = vec![0.0; n];
        for (time, w) in self.jump_times.iter().zip(&self.jumps) {
            if *time <= t {
                for (a, b) in p.iter_mut().zip(w) {
                    *a += b * epsilon;
                }
            }
        }
        p
    }
}

/// Precomputed bridge law.
pub struct BridgeModel {
    cfg: BridgeConfig,
    grid: Option<GridMarginal>,
    asymptotic: Option<AsymptoticMarginal>,
    count_log_pmf: Vec<f64>,
    log_mu_endpoint: SplitLog,
}

impl std::fmt::Debug for BridgeModel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("BridgeModel")
            .field("cfg", &self.cfg)
            .field("grid", &self.grid.is_some())
            .field("orders", &self.count_log_pmf.len())
            .finish()
    }
}

impl BridgeModel {
    pub fn new(cfg: BridgeConfig, opts: BridgeOptions) -> Result<Self> {
        let lambda = cfg.lambda();
        let use_grid = match opts.backend {
            Backend::Grid => true,
            Backend::Asymptotic => false,
            Backend::Auto => lambda.is_finite() && lambda <= opts.grid_limit,
        };
        if use_grid {
            let r_max = lambda * 1.25 + 5.0;
            let cap = match opts.m_cap {
                Some(c) => c,
                None => required_order(&cfg.fun, cfg.n, cfg.total_time(), r_max, 5.0)?,
            };
            let table = Arc::new(ConvolutionTable::build(&cfg.fun, cfg.n, cap, r_max, opts.nodes)?);
            Self::with_table(cfg, table)
        } else {
            let am = AsymptoticMarginal::new(&cfg.fun, cfg.n)?;
            let log_mu_endpoint = am.log_density(cfg.total_time(), lambda)?;
            Ok(BridgeModel {
                cfg,
                grid: None,
                asymptotic: Some(am),
                count_log_pmf: Vec::new(),
                log_mu_endpoint,
            })
        }
    }

    /// Grid-backed model on an existing table (which must cover `|x|/ε`).
    pub fn with_table(cfg: BridgeConfig, table: Arc<ConvolutionTable>) -> Result<Self> {
        if table.fun() != &cfg.fun || table.dim() != cfg.n {
            return Err(Error::invalid("table was built for a different jump law"));
        }
        let grid = GridMarginal::new(table)?;
        let lambda = cfg.lambda();
        let t = cfg.total_time();
        let terms: Vec<f64> = (1..=grid.table().max_order()).map(|m| grid.log_term(t, m, lambda)).collect();
        let log_mu = grid.log_density(t, lambda)?;
        let norm = log_sum_exp(&terms);
        let count_log_pmf = terms.iter().map(|v| v - norm).collect();
        Ok(BridgeModel {
            cfg,
            grid: Some(grid),
            asymptotic: None,
            count_log_pmf,
            log_mu_endpoint: log_mu,
        })
    }

    pub fn config(&self) -> &BridgeConfig {
        &self.cfg
    }

    pub fn marginal(&self) -> &dyn LogMarginal {
        match (&self.grid, &self.asymptotic) {
            (Some(g), _) => g,
            (None, Some(a)) => a,
            _ => unreachable!("one backend is always present"),
        }
    }

    pub fn table(&self) -> Option<&Arc<ConvolutionTable>> {
        self.grid.as_ref().map(|g| g.table())
    }

    /// `ln μ_{r_ε T}(x/ε)`.
    pub fn log_endpoint_density(&self) -> f64 {
        self.log_mu_endpoint.total()
    }

    fn require_grid(&self) -> Result<&GridMarginal> {
        self.grid.as_ref().ok_or_else(|| {
            Error::domain(
                format!("|x|/epsilon = {} is not covered by a convolution grid", self.cfg.lambda()),
                None,
            )
        })
    }

    /// `ln P(N = m | ε L_{r_ε T} = x)`.
    pub fn conditional_count_logpmf(&self, m: usize) -> Result<f64> {
        self.require_grid()?;
        if m == 0 {
            return Err(Error::invalid("the bridge has at least one jump"));
        }
        Ok(self.count_log_pmf.get(m - 1).copied().unwrap_or(f64::NEG_INFINITY))
    }

    /// Log-pmf of the count for `m = 1..=m_cap`.
    pub fn count_log_pmf(&self) -> Result<&[f64]> {
        self.require_grid()?;
        Ok(&self.count_log_pmf)
    }

    /// Split value of `ln μ̄_t(y)`, the density of `ε L_{r_ε t}` under the bridge law.
    pub fn bridge_marginal_split(&self, t: f64, y: &[f64]) -> Result<SplitLog> {
        let cfg = &self.cfg;
        if !(t > 0.0 && t < cfg.horizon) {
            return Err(Error::invalid(format!("t must lie in (0, {}), got {t}", cfg.horizon)));
        }
        if y.len() != cfg.n {
            return Err(Error::invalid("y has the wrong dimension"));
        }
        let rest: Vec<f64> = cfg.endpoint.iter().zip(y).map(|(a, b)| a - b).collect();
        let r1 = norm(y) * cfg.inv_epsilon;
        let r2 = norm(&rest) * cfg.inv_epsilon;
        let marg = self.marginal();
        let a = marg.log_density(cfg.r_eps * t, r1)?;
        let b = marg.log_density(cfg.r_eps * (cfg.horizon - t), r2)?;
        let c = self.log_mu_endpoint;
        // cancel the large parts before adding the moderate ones
        let leading = a.leading + b.leading - c.leading;
        let correction = a.correction + b.correction - c.correction - cfg.n as f64 * cfg.log_epsilon;
        Ok(SplitLog { leading, correction })
    }

    /// `ln μ̄_t(y)`.
    pub fn bridge_marginal_logdensity(&self, t: f64, y: &[f64]) -> Result<f64> {
        Ok(self.bridge_marginal_split(t, y)?.total())
    }

    /// Log-probabilities that the bridge sits exactly at `0` and at `x` at time `t`.
    pub fn endpoint_atoms(&self, t: f64) -> Result<(f64, f64)> {
        let cfg = &self.cfg;
        if !(t > 0.0 && t < cfg.horizon) {
            return Err(Error::invalid(format!("t must lie in (0, {}), got {t}", cfg.horizon)));
        }
        let marg = self.marginal();
        let lam = cfg.lambda();
        let c = self.log_mu_endpoint;
        let s = cfg.r_eps * t;
        let u = cfg.r_eps * (cfg.horizon - t);
        let at_zero = marg.log_atom(s) + marg.log_density(u, lam)?.total() - c.total();
        let at_end = marg.log_atom(u) + marg.log_density(s, lam)?.total() - c.total();
        Ok((at_zero, at_end))
    }

    /// Draws path number `index` of the stream selected by the seed.
    pub fn sample(&self, index: u64) -> Result<BridgePath> {
        let grid = self.require_grid()?;
        let table = grid.table();
        let cfg = &self.cfg;
        let n = cfg.n;
        let m = {
            let mut r = rng::stream(cfg.seed, index, rng::COUNT_SLOT);
            draw_index(&self.count_log_pmf, r.random::<f64>()) + 1
        };
        let mut jumps: Vec<Vec<f64>> = Vec::with_capacity(m);
        let mut z = [0.0; 3];
        z[..n].copy_from_slice(&cfg.scaled_endpoint());
        let mut method = SamplingMethod::Rejection;
        for j in 1..m {
            let k = m - j + 1;
            let mut r = rng::stream(cfg.seed, index, rng::jump_slot(j));
            let sampler = JumpSampler::new(&cfg.fun, table, n, &z, k);
            let (y, fell_back) = sampler.draw(&mut r);
            if fell_back {
                method = SamplingMethod::Metropolis;
            }
            for i in 0..n {
                z[i] -= y[i];
            }
            jumps.push(y[..n].to_vec());
        }
        jumps.push(z[..n].to_vec());
        let mut r = rng::stream(cfg.seed, index, rng::times_slot(m));
        let mut jump_times: Vec<f64> = (0..m).map(|_| cfg.horizon * (1.0 - r.random::<f64>())).collect();
        jump_times.sort_by(|a, b| a.total_cmp(b));
        Ok(BridgePath {
            jump_times,
            jumps,
            count: m,
            method_flag: method,
        })
    }

    /// Paths `start..start+count`, computed in parallel; the result does not
    /// depend on the number of worker threads.
    pub fn sample_many(&self, start: u64, count: usize) -> Result<Vec<BridgePath>> {
        self.require_grid()?;
        (start..start + count as u64).into_par_iter().map(|i| self.sample(i)).collect()
    }
}

fn draw_index(log_pmf: &[f64], u: f64) -> usize {
    let weights: Vec<f64> = log_pmf.iter().map(|v| v.exp()).collect();
    let total: f64 = weights.iter().sum();
    let target = u * total;
    let mut acc = 0.0;
    for (i, w) in weights.iter().enumerate() {
        acc += w;
        if acc > target {
            return i;
        }
    }
    weights.iter().rposition(|w| *w > 0.0).unwrap_or(0)
}

pub(crate) fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Rejection attempts without an acceptance before falling back.
const REJECTION_WINDOW: usize = 10_000;
const METROPOLIS_BURN_IN: usize = 1_000;
/// Weight and degrees of freedom of the heavy-tailed proposal component.
const DEFENSIVE_WEIGHT: f64 = 0.02;
const DEFENSIVE_DOF: f64 = 3.0;
/// Covariance inflation of the Gaussian proposal component.
const COVARIANCE_INFLATION: f64 = 1.5;
/// Added to the certified log-bound.
const BOUND_MARGIN: f64 = 0.05;

/// Sampler for one jump `y ∝ exp(-f(|y|)) F_{k-1}(|z - y|)`.
struct JumpSampler<'a> {
    fun: &'a RVFunction,
    table: &'a ConvolutionTable,
    n: usize,
    z: [f64; 3],
    k: usize,
    center: [f64; 3],
    basis: [[f64; 3]; 3],
    sigma_along: f64,
    sigma_across: f64,
    t_scale: f64,
    log_norm_gauss: f64,
    log_norm_t: f64,
    log_bound: f64,
}

impl<'a> JumpSampler<'a> {
    fn new(fun: &'a RVFunction, table: &'a ConvolutionTable, n: usize, z: &[f64; 3], k: usize) -> Self {
        let zn = norm(&z[..n]);
        let kf = k as f64;
        let mut center = [0.0; 3];
        for i in 0..n {
            center[i] = z[i] / kf;
        }
        let basis = orthonormal_basis(z, n);
        let s = (zn / kf).max(fun.convexity_threshold()).max(1e-3);
        let curv = fun.d2(s);
        let cap = zn.max(1.0);
        let var_along = if curv > 0.0 { COVARIANCE_INFLATION / curv } else { cap * cap };
        let sigma_along = var_along.sqrt().clamp(1e-3, cap);
        let sigma_across = (var_along * (fun.alpha() - 1.0)).sqrt().clamp(1e-3, cap);
        let t_scale = 2.0 * sigma_along.max(sigma_across);
        let nf = n as f64;
        let log_norm_gauss = -0.5 * nf * (2.0 * PI).ln() - sigma_along.ln() - (nf - 1.0) * sigma_across.ln();
        let nu = DEFENSIVE_DOF;
        let lg = statrs::function::gamma::ln_gamma;
        let log_norm_t = lg(0.5 * (nu + nf)) - lg(0.5 * nu) - 0.5 * nf * (nu * PI).ln() - nf * t_scale.ln();
        let mut s = JumpSampler {
            fun,
            table,
            n,
            z: *z,
            k,
            center,
            basis,
            sigma_along,
            sigma_across,
            t_scale,
            log_norm_gauss,
            log_norm_t,
            log_bound: 0.0,
        };
        s.log_bound = s.certify();
        s
    }

    fn log_target(&self, y: &[f64; 3]) -> f64 {
        let mut d2 = 0.0;
        let mut y2 = 0.0;
        for i in 0..self.n {
            let d = self.z[i] - y[i];
            d2 += d * d;
            y2 += y[i] * y[i];
        }
        -self.fun.eval(y2.sqrt()) + self.table.log_density(self.k - 1, d2.sqrt())
    }

    fn log_proposal(&self, y: &[f64; 3]) -> f64 {
        let mut q = 0.0;
        let mut r2 = 0.0;
        for (b, e) in self.basis.iter().take(self.n).enumerate() {
            let mut u = 0.0;
            for i in 0..self.n {
                u += (y[i] - self.center[i]) * e[i];
            }
            let s = if b == 0 { self.sigma_along } else { self.sigma_across };
            q += (u / s) * (u / s);
            r2 += u * u;
        }
        let lg = self.log_norm_gauss - 0.5 * q;
        let nf = self.n as f64;
        let nu = DEFENSIVE_DOF;
        let lt = self.log_norm_t - 0.5 * (nu + nf) * (r2 / (nu * self.t_scale * self.t_scale)).ln_1p();
        log_add_exp((1.0 - DEFENSIVE_WEIGHT).ln() + lg, DEFENSIVE_WEIGHT.ln() + lt)
    }

    fn log_ratio(&self, y: &[f64; 3]) -> f64 {
        self.log_target(y) - self.log_proposal(y)
    }

    fn point(&self, along: f64, across: f64, dir: usize) -> [f64; 3] {
        let mut y = self.center;
        for i in 0..self.n {
            y[i] += along * self.basis[0][i] + across * self.basis[dir][i];
        }
        y
    }

    /// Upper bound on `ln(target/proposal)` from an axis scan, a golden-section
    /// refinement and transverse probes.
    fn certify(&self) -> f64 {
        let span = 10.0 * self.sigma_along;
        let steps = 40;
        let along_ratio = |u: f64| self.log_ratio(&self.point(u, 0.0, 0));
        let mut best_u = 0.0;
        let mut best = f64::NEG_INFINITY;
        for i in 0..=steps {
            let u = -span + 2.0 * span * i as f64 / steps as f64;
            let v = along_ratio(u);
            if v > best {
                best = v;
                best_u = u;
            }
        }
        let cell = 2.0 * span / steps as f64;
        let (mut a, mut b) = (best_u - cell, best_u + cell);
        let phi = 0.618_033_988_749_894_9;
        let mut c = b - phi * (b - a);
        let mut d = a + phi * (b - a);
        let (mut fc, mut fd) = (along_ratio(c), along_ratio(d));
        for _ in 0..30 {
            if fc > fd {
                b = d;
                d = c;
                fd = fc;
                c = b - phi * (b - a);
                fc = along_ratio(c);
            } else {
                a = c;
                c = d;
                fc = fd;
                d = a + phi * (b - a);
                fd = along_ratio(d);
            }
        }
        let (u_star, v_star) = if fc > fd { (c, fc) } else { (d, fd) };
        if v_star > best {
            best = v_star;
            best_u = u_star;
        }
        for dir in 1..self.n {
            for k in [-3.0, -2.0, -1.0, -0.5, 0.5, 1.0, 2.0, 3.0] {
                best = best.max(self.log_ratio(&self.point(best_u, k * self.sigma_across, dir)));
            }
        }
        best + BOUND_MARGIN
    }

    fn propose(&self, rng: &mut ChaCha8Rng) -> [f64; 3] {
        let mut y = self.center;
        if rng.random::<f64>() < DEFENSIVE_WEIGHT {
            let chi = ChiSquared::new(DEFENSIVE_DOF).expect("positive dof").sample(rng);
            let scale = self.t_scale / (chi / DEFENSIVE_DOF).sqrt();
            for b in 0..self.n {
                let g: f64 = StandardNormal.sample(rng);
                for i in 0..self.n {
                    y[i] += scale * g * self.basis[b][i];
                }
            }
        } else {
            for b in 0..self.n {
                let g: f64 = StandardNormal.sample(rng);
                let s = if b == 0 { self.sigma_along } else { self.sigma_across };
                for i in 0..self.n {
                    y[i] += s * g * self.basis[b][i];
                }
            }
        }
        y
    }

    /// Returns the jump and whether the Metropolis fallback was used.
    fn draw(&self, rng: &mut ChaCha8Rng) -> ([f64; 3], bool) {
        for _ in 0..REJECTION_WINDOW {
            let y = self.propose(rng);
            let lr = self.log_ratio(&y);
            if lr > self.log_bound {
                return (self.metropolis(rng), true);
            }
            if rng.random::<f64>().ln() < lr - self.log_bound {
                return (y, false);
            }
        }
        (self.metropolis(rng), true)
    }

    fn metropolis(&self, rng: &mut ChaCha8Rng) -> [f64; 3] {
        let mut state = self.center;
        let mut lw = self.log_ratio(&state);
        for _ in 0..METROPOLIS_BURN_IN {
            let y = self.propose(rng);
            let lw_new = self.log_ratio(&y);
            if lw_new.is_finite() && (!lw.is_finite() || rng.random::<f64>().ln() < lw_new - lw) {
                state = y;
                lw = lw_new;
            }
        }
        state
    }
}

/// Orthonormal basis whose first vector is along `z` (any basis if `z = 0`).
fn orthonormal_basis(z: &[f64; 3], n: usize) -> [[f64; 3]; 3] {
    let mut basis = [[0.0; 3]; 3];
    let zn = norm(&z[..n]);
    let first = if zn > 0.0 {
        let mut e = [0.0; 3];
        for i in 0..n {
            e[i] = z[i] / zn;
        }
        e
    } else {
        let mut e = [0.0; 3];
        e[0] = 1.0;
        e
    };
    basis[0] = first;
    let mut filled = 1;
    for axis in 0..n {
        if filled == n {
            break;
        }
        let mut v = [0.0; 3];
        v[axis] = 1.0;
        for b in basis.iter().take(filled) {
            let dot: f64 = (0..n).map(|i| v[i] * b[i]).sum();
            for i in 0..n {
                v[i] -= dot * b[i];
            }
        }
        let vn = norm(&v[..n]);
        if vn > 1e-8 {
            for x in v.iter_mut().take(n) {
                *x /= vn;
            }
            basis[filled] = v;
            filled += 1;
        }
    }
    basis
}
