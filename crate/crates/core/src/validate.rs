//! Self-checks comparing computed quantities against closed forms and
//! limit statements. Every check yields a [`ValidationReport`] with summary
//! metrics and the sweep it was judged on.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::bridge::{Backend, BridgeConfig, BridgeModel, BridgeOptions, BridgePath, TimeScale};
use crate::config::RunConfig;
use crate::convdens::{proposition_bounds, sandwich_onset, ConvolutionTable};
use crate::error::{Error, Result};
use crate::gsolver::{asymptotic_g_limit, LimitDiagnostics};
use crate::ldp::{dtilde_consistency, exact_count_moments, jump_statistics, scaled_bridge_logdensity_defect, JumpStatistics};
use crate::marginal::{density_solver, required_order, theorem_density_bounds, MarginalDensity};
use crate::rng;
use crate::rvfun::RVFunction;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Check {
    GLimits,
    Cancellation,
    ConvBounds,
    DensityBounds,
    Tails,
    BridgeLimit,
    CountClt,
    JumpClt,
    Dtilde,
}

impl Check {
    pub const ALL: [Check; 9] = [
        Check::GLimits,
        Check::Cancellation,
        Check::ConvBounds,
        Check::DensityBounds,
        Check::Tails,
        Check::BridgeLimit,
        Check::CountClt,
        Check::JumpClt,
        Check::Dtilde,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Check::GLimits => "g-limits",
            Check::Cancellation => "cancellation",
            Check::ConvBounds => "conv-bounds",
            Check::DensityBounds => "density-bounds",
            Check::Tails => "tails",
            Check::BridgeLimit => "bridge-limit",
            Check::CountClt => "count-clt",
            Check::JumpClt => "jump-clt",
            Check::Dtilde => "dtilde",
        }
    }

    /// One-line statement of what the check asserts.
    pub fn description(self) -> &'static str {
        match self {
            Check::GLimits => "functional equation residual, limit ratios and growth of g",
            Check::Cancellation => "g(L)[f'(g(yL)) - f'(g(L))] approaches ln y",
            Check::ConvBounds => "convolution powers inside the two-sided saddle-point envelope",
            Check::DensityBounds => "marginal density inside -r(f'(g) - (1 -/+ d)/g)",
            Check::Tails => "marginal tail inside the stated tail envelope",
            Check::BridgeLimit => "scaled bridge log-density converges to the entropy rate",
            Check::CountClt => "standardized jump count is asymptotically standard normal",
            Check::JumpClt => "standardized single jump is asymptotically standard normal",
            Check::Dtilde => "classical tail constant agrees with the density exponent",
        }
    }
}

impl fmt::Display for Check {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Check {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Check::ALL
            .into_iter()
            .find(|c| c.name() == s)
            .ok_or_else(|| Error::invalid(format!("unknown check {s:?}")))
    }
}

/// Rows of a sweep, all with the same columns.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Sweep {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl Sweep {
    fn new(columns: &[&str]) -> Self {
        Sweep {
            columns: columns.iter().map(|c| c.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    fn push(&mut self, row: Vec<f64>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    /// CSV with a header row.
    pub fn to_csv(&self) -> String {
        let mut out = self.columns.join(",");
        out.push('\n');
        for row in &self.rows {
            let cells: Vec<String> = row.iter().map(|v| format_cell(*v)).collect();
            out.push_str(&cells.join(","));
            out.push('\n');
        }
        out
    }
}

pub(crate) fn format_cell(v: f64) -> String {
    if v.is_nan() {
        "nan".into()
    } else if v.is_infinite() {
        if v > 0.0 { "inf" } else { "-inf" }.into()
    } else {
        format!("{v}")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub check: Check,
    pub pass: bool,
    pub metrics: BTreeMap<String, f64>,
    pub sweep: Sweep,
}

impl ValidationReport {
    fn new(check: Check, sweep: Sweep) -> Self {
        ValidationReport {
            check,
            pass: true,
            metrics: BTreeMap::new(),
            sweep,
        }
    }

    fn metric(&mut self, name: impl Into<String>, value: f64) {
        self.metrics.insert(name.into(), value);
    }

    /// Records a metric and folds `ok` into the verdict.
    fn require(&mut self, name: impl Into<String>, value: f64, ok: bool) {
        self.metric(name, value);
        self.pass &= ok;
    }
}

pub fn run_check(check: Check, cfg: &RunConfig) -> Result<ValidationReport> {
    cfg.validate()?;
    match check {
        Check::GLimits => g_limits(cfg),
        Check::Cancellation => cancellation(cfg),
        Check::ConvBounds => conv_bounds(cfg),
        Check::DensityBounds => Ok(density_and_tails(cfg)?.0),
        Check::Tails => Ok(density_and_tails(cfg)?.1),
        Check::BridgeLimit => bridge_limit(cfg),
        Check::CountClt => Ok(BridgeSample::draw(cfg)?.count_report()?),
        Check::JumpClt => Ok(BridgeSample::draw(cfg)?.jump_report()),
        Check::Dtilde => dtilde(cfg),
    }
}

/// Runs every check, sharing expensive fixtures between related checks.
pub fn run_all(cfg: &RunConfig) -> Result<Vec<ValidationReport>> {
    cfg.validate()?;
    let (density, tails) = density_and_tails(cfg)?;
    let sample = BridgeSample::draw(cfg)?;
    Ok(vec![
        g_limits(cfg)?,
        cancellation(cfg)?,
        conv_bounds(cfg)?,
        density,
        tails,
        bridge_limit(cfg)?,
        sample.count_report()?,
        sample.jump_report(),
        dtilde(cfg)?,
    ])
}

/// `ln Λ` where the limit ratios are judged.
pub const G_LIMIT_LOG_LAMBDA: f64 = 1e6;
const RESIDUAL_POINTS: usize = 1000;

pub fn g_limits(cfg: &RunConfig) -> Result<ValidationReport> {
    let fun = cfg.fun()?;
    let sol = density_solver(&fun, cfg.dim)?;
    let mut rep = ValidationReport::new(
        Check::GLimits,
        Sweep::new(&["log_lambda", "g", "g_growth_ratio", "log_derivative", "f_ratio", "gf_prime_ratio", "legendre_ratio"]),
    );

    let lo = (sol.log_lambda_floor().max(0.0) + 1.0).ln();
    let hi = G_LIMIT_LOG_LAMBDA.ln();
    let mut r = rng::stream(cfg.sampling.seed, 0, 0);
    let mut worst = 0.0f64;
    for _ in 0..RESIDUAL_POINTS {
        let log_lambda = (lo + (hi - lo) * r.random::<f64>()).exp();
        let g = sol.solve(log_lambda)?;
        worst = worst.max(sol.residual(log_lambda, g).abs() / log_lambda.abs());
    }
    rep.require("max_relative_residual", worst, worst <= 1e-10);

    let limit = asymptotic_g_limit(fun.alpha()) * fun.scale().powf(-1.0 / fun.alpha());
    for k in 1..=6 {
        let log_lambda = 10f64.powi(k);
        if log_lambda < sol.log_lambda_floor() {
            continue;
        }
        let g = sol.solve(log_lambda)?;
        let mut row = vec![log_lambda, g, g / log_lambda.powf(1.0 / fun.alpha()) / limit];
        row.extend(sol.limit_diagnostics(log_lambda)?.as_array());
        rep.sweep.push(row);
    }
    let last = rep.sweep.rows.last().cloned().ok_or_else(|| Error::numeric("empty sweep"))?;
    let targets = LimitDiagnostics::targets(fun.alpha()).as_array();
    let names = ["log_derivative", "f_ratio", "gf_prime_ratio", "legendre_ratio"];
    for (i, name) in names.iter().enumerate() {
        let rel = last[3 + i] / targets[i];
        rep.require(format!("{name}_over_target"), rel, (rel - 1.0).abs() <= 0.05);
    }
    rep.require("g_growth_ratio", last[2], (last[2] - 1.0).abs() <= 0.10);
    Ok(rep)
}

pub fn cancellation(cfg: &RunConfig) -> Result<ValidationReport> {
    let fun = cfg.fun()?;
    let sol = density_solver(&fun, cfg.dim)?;
    let mut rep = ValidationReport::new(Check::Cancellation, Sweep::new(&["log_lambda", "y", "defect", "relative_defect"]));
    let levels = [1e2, 1e3, 1e4];
    for y in [0.5, 2.0, 5.0] {
        let mut previous = f64::INFINITY;
        let mut decreasing = true;
        let mut last = 0.0;
        for &l in &levels {
            let d = sol.cancellation_defect(l, y, 1.0)?;
            let rel = d.abs() / y.ln().abs();
            decreasing &= d.abs() < previous;
            previous = d.abs();
            last = rel;
            rep.sweep.push(vec![l, y, d, rel]);
        }
        rep.require(format!("relative_defect_y{y}"), last, last <= 0.1);
        rep.require(format!("decreasing_y{y}"), f64::from(u8::from(decreasing)), decreasing);
    }
    Ok(rep)
}

/// Orders checked by the convolution envelope.
pub const CONV_ORDERS: std::ops::RangeInclusive<usize> = 2..=8;

pub fn conv_bounds(cfg: &RunConfig) -> Result<ValidationReport> {
    let fun = cfg.fun()?;
    let r_max = cfg.numerics.r_max.unwrap_or(40.0);
    let delta = cfg.numerics.delta.unwrap_or(0.2);
    let table = ConvolutionTable::build(&fun, cfg.dim, *CONV_ORDERS.end(), r_max, cfg.numerics.nodes)?;
    conv_bounds_on(&table, delta)
}

/// Envelope check on an existing table.
pub fn conv_bounds_on(table: &ConvolutionTable, delta: f64) -> Result<ValidationReport> {
    let mut rep = ValidationReport::new(
        Check::ConvBounds,
        Sweep::new(&["m", "r", "log_density", "lower", "upper"]),
    );
    rep.metric("delta", delta);
    for m in CONV_ORDERS {
        let onset = sandwich_onset(table, m, delta);
        rep.require(format!("onset_m{m}"), onset.unwrap_or(f64::NAN), onset.is_some());
        for j in 1..=20 {
            let r = table.r_max() * j as f64 / 20.0;
            if let Ok(env) = proposition_bounds(table.fun(), table.dim(), m, r, delta) {
                rep.sweep.push(vec![m as f64, r, table.log_density(m, r), env.lower, env.upper]);
            }
        }
    }
    Ok(rep)
}

/// Radii of the density and tail checks; the time is `√r`.
pub const DENSITY_RADII: [f64; 2] = [60.0, 100.0];

/// Density and tail reports from one shared table.
pub fn density_and_tails(cfg: &RunConfig) -> Result<(ValidationReport, ValidationReport)> {
    let fun = cfg.fun()?;
    let n = cfg.dim;
    let delta = cfg.numerics.delta.unwrap_or(0.5);
    let r_top = DENSITY_RADII.iter().copied().fold(0.0, f64::max);
    let r_max = cfg.numerics.r_max.unwrap_or(r_top + 20.0).max(r_top + 1.0);
    let cap = match cfg.numerics.m_cap {
        Some(c) => c,
        None => DENSITY_RADII
            .iter()
            .map(|&r| required_order(&fun, n, r.sqrt(), r_max, 5.0))
            .collect::<Result<Vec<_>>>()?
            .into_iter()
            .max()
            .unwrap_or(16),
    };
    let table = Arc::new(ConvolutionTable::build(&fun, n, cap, r_max, cfg.numerics.nodes)?);
    let sol = density_solver(&fun, n)?;

    let mut dens = ValidationReport::new(
        Check::DensityBounds,
        Sweep::new(&["r", "t", "log_density", "lower", "upper", "dominant_m", "r_over_g"]),
    );
    let mut tails = ValidationReport::new(
        Check::Tails,
        Sweep::new(&["lambda", "t", "log_tail", "lower", "upper", "density_sign_lower", "density_sign_upper"]),
    );
    dens.metric("delta", delta);
    tails.metric("delta", delta);
    for &r in &DENSITY_RADII {
        let t = r.sqrt();
        let md = MarginalDensity::with_table(table.clone(), t, None)?;
        let v = md.eval(r)?;
        let (lower, upper) = theorem_density_bounds(&sol, r, t, delta)?;
        let g = sol.solve((r / t).ln())?;
        dens.require(
            format!("inside_r{r}"),
            v.log_density,
            lower <= v.log_density && v.log_density <= upper,
        );
        dens.metric(format!("dominant_m_r{r}"), v.dominant_m as f64);
        dens.sweep.push(vec![r, t, v.log_density, lower, upper, v.dominant_m as f64, r / g]);

        let est = md.tail_estimate(&sol, r, delta)?;
        let (dl, du) = theorem_density_bounds(&sol, r, t, delta)?;
        tails.require(
            format!("inside_lambda{r}"),
            est.log_tail,
            est.lower <= est.log_tail && est.log_tail <= est.upper,
        );
        tails.metric(format!("inside_density_sign_lambda{r}"), f64::from(u8::from(dl <= est.log_tail && est.log_tail <= du)));
        tails.sweep.push(vec![r, t, est.log_tail, est.lower, est.upper, dl, du]);
    }
    Ok((dens, tails))
}

/// `ln ε^{-1}` values of the bridge-limit sweep.
pub const BRIDGE_LIMIT_LEVELS: [f64; 5] = [20.0, 30.0, 40.0, 50.0, 60.0];

fn limit_model(fun: RVFunction, n: usize, xn: f64, log_inv_eps: f64, time_scale: TimeScale) -> Result<BridgeModel> {
    let mut x = vec![0.0; n];
    x[0] = xn;
    let cfg = BridgeConfig::new(fun, n, -log_inv_eps, time_scale, 1.0, x, 0)?;
    let opts = BridgeOptions {
        backend: Backend::Asymptotic,
        ..BridgeOptions::default()
    };
    BridgeModel::new(cfg, opts)
}

pub fn bridge_limit(cfg: &RunConfig) -> Result<ValidationReport> {
    let fun = cfg.fun()?;
    let xn = cfg.bridge_config()?.endpoint_norm();
    let time_scale = cfg.time_scale();
    let n_off = cfg.dim.max(2);
    let mut rep = ValidationReport::new(
        Check::BridgeLimit,
        Sweep::new(&["log_inv_epsilon", "defect_midpoint", "defect_three_quarters", "scaled_off_segment"]),
    );
    for &l in &BRIDGE_LIMIT_LEVELS {
        let on = limit_model(fun, cfg.dim, xn, l, time_scale)?;
        let mut mid = vec![0.0; cfg.dim];
        mid[0] = 0.5 * xn;
        let mut three = vec![0.0; cfg.dim];
        three[0] = 0.75 * xn;
        let off = limit_model(fun, n_off, xn, l, time_scale)?;
        let mut y_off = vec![0.0; n_off];
        y_off[0] = 0.5 * xn;
        y_off[1] = 0.3 * xn;
        rep.sweep.push(vec![
            l,
            scaled_bridge_logdensity_defect(&on, 0.5, &mid)?,
            scaled_bridge_logdensity_defect(&on, 0.5, &three)?,
            scaled_bridge_logdensity_defect(&off, 0.5, &y_off)?,
        ]);
    }
    let col = |i: usize| rep.sweep.rows.iter().map(|r| r[i]).collect::<Vec<_>>();
    let shrinking = |v: &[f64]| v.windows(2).all(|w| w[1].abs() < w[0].abs());
    let (mid, three, off) = (col(1), col(2), col(3));
    let growing = off.windows(2).all(|w| w[1] > w[0]);
    rep.require("midpoint_defect_final", *mid.last().unwrap_or(&f64::NAN), shrinking(&mid));
    rep.require("three_quarter_defect_final", *three.last().unwrap_or(&f64::NAN), shrinking(&three));
    rep.require("off_segment_final", *off.last().unwrap_or(&f64::NAN), growing);
    Ok(rep)
}

/// Sampled bridge paths together with their statistics.
pub struct BridgeSample {
    pub model: BridgeModel,
    pub paths: Vec<BridgePath>,
    pub stats: JumpStatistics,
}

impl BridgeSample {
    pub fn draw(cfg: &RunConfig) -> Result<Self> {
        let model = BridgeModel::new(cfg.bridge_config()?, cfg.bridge_options())?;
        Self::from_model(model, cfg.sampling.samples)
    }

    pub fn from_model(model: BridgeModel, samples: usize) -> Result<Self> {
        let paths = model.sample_many(0, samples)?;
        let stats = jump_statistics(model.config(), &paths)?;
        Ok(BridgeSample { model, paths, stats })
    }

    /// Total variation between the sampled and the exact count law.
    pub fn count_total_variation(&self) -> Result<f64> {
        let pmf = self.model.count_log_pmf()?;
        let mut freq = vec![0.0; pmf.len()];
        for p in &self.paths {
            if let Some(slot) = freq.get_mut(p.count - 1) {
                *slot += 1.0;
            }
        }
        let k = self.paths.len() as f64;
        Ok(0.5 * pmf.iter().zip(&freq).map(|(l, c)| (l.exp() - c / k).abs()).sum::<f64>())
    }

    pub fn count_report(&self) -> Result<ValidationReport> {
        let mut rep = ValidationReport::new(Check::CountClt, Sweep::new(&["m", "exact_probability", "empirical_probability"]));
        let s = &self.stats;
        let m = &s.summary.standardized_counts;
        rep.require("standardized_mean", m.mean, m.mean.abs() <= 3.0 * m.stderr);
        rep.metric("standardized_stderr", m.stderr);
        rep.require("standardized_variance", m.variance, (0.8..=1.2).contains(&m.variance));
        let tv = self.count_total_variation()?;
        rep.require("total_variation", tv, tv < 0.01);
        let (exact_mean, exact_var) = exact_count_moments(&self.model)?;
        rep.metric("exact_standardized_mean", exact_mean);
        rep.metric("exact_standardized_variance", exact_var);
        rep.metric("m_center", s.m_center);
        rep.metric("k_scale", s.k_scale);
        rep.metric("k_scale_short", s.k_scale_short);
        rep.metric("speed", s.speed);
        rep.metric("mean_count", s.summary.counts.mean);
        rep.metric("metropolis_fraction", s.summary.metropolis_fraction);
        let pmf = self.model.count_log_pmf()?;
        let mut freq = vec![0.0; pmf.len()];
        for p in &self.paths {
            if let Some(slot) = freq.get_mut(p.count - 1) {
                *slot += 1.0;
            }
        }
        let k = self.paths.len() as f64;
        for (i, l) in pmf.iter().enumerate() {
            if l.exp() > 1e-9 || freq[i] > 0.0 {
                rep.sweep.push(vec![(i + 1) as f64, l.exp(), freq[i] / k]);
            }
        }
        Ok(rep)
    }

    pub fn jump_report(&self) -> ValidationReport {
        let mut rep = ValidationReport::new(Check::JumpClt, Sweep::new(&["component", "mean", "variance", "stderr"]));
        let s = &self.stats;
        for (i, m) in s.summary.standardized_increments.iter().enumerate() {
            rep.require(format!("component{i}_mean"), m.mean, m.mean.abs() <= 3.0 * m.stderr);
            rep.require(format!("component{i}_variance"), m.variance, (0.8..=1.2).contains(&m.variance));
            rep.sweep.push(vec![i as f64, m.mean, m.variance, m.stderr]);
        }
        let ratio = s.summary.mean_jump_ratio;
        rep.require("mean_jump_over_g", ratio, (ratio - 1.0).abs() <= 0.1);
        rep.require("count_size_balance", s.summary.balance, (s.summary.balance - 1.0).abs() <= 0.1);
        rep.metric("raw_variance_along", s.summary.raw_variance_along);
        if let Some(across) = s.summary.raw_variance_across {
            rep.metric("raw_variance_across", across);
            let iso = across / s.summary.raw_variance_along;
            rep.metric("across_over_along", iso);
            if self.model.config().fun.alpha() == 2.0 {
                rep.require("isotropy", iso, (iso - 1.0).abs() <= 0.1);
            }
        }
        rep.metric("typical_jump", s.typical_jump);
        rep.metric("metropolis_fraction", s.summary.metropolis_fraction);
        rep
    }
}

/// `ln ε^{-1}` values of the consistency sweep.
pub const DTILDE_LEVELS: [f64; 5] = [1e1, 1e2, 1e3, 1e4, 1e5];

pub fn dtilde(cfg: &RunConfig) -> Result<ValidationReport> {
    let fun = cfg.fun()?;
    let mut rep = ValidationReport::new(
        Check::Dtilde,
        Sweep::new(&["log_inv_epsilon", "q", "g", "ratio_with_correction", "ratio_leading"]),
    );
    let mut x = vec![0.0; cfg.dim];
    x[0] = 1.0;
    for &l in &DTILDE_LEVELS {
        let c = BridgeConfig::new(fun, cfg.dim, -l, cfg.time_scale(), 1.0, x.clone(), 0)?;
        let d = dtilde_consistency(&c)?;
        rep.sweep.push(vec![l, d.q, d.g, d.ratio_with_correction, d.ratio_leading]);
    }
    for (i, name) in [(3, "ratio_with_correction"), (4, "ratio_leading")] {
        let v: Vec<f64> = rep.sweep.rows.iter().map(|r| (r[i] - 1.0).abs()).collect();
        let drifting = v.windows(2).all(|w| w[1] <= w[0]);
        let last = rep.sweep.rows.last().map_or(f64::NAN, |r| r[i]);
        rep.require(name, last, drifting && (last - 1.0).abs() <= 0.15);
    }
    Ok(rep)
}
