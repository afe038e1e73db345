//! Command-line front end. Every subcommand reads a [`RunConfig`] (from
//! `--config`, defaults otherwise), applies its flags on top and validates the
//! result before computing anything.
//!
//! Exit codes: `0` success, `1` a validation check failed, `2` usage,
//! configuration or computation error.

use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use serde_json::json;

use crate::config::{OutputFormat, RunConfig};
use crate::convdens::{build_convolution, proposition_bounds};
use crate::error::{Error, Result};
use crate::gsolver::{FunctionalEquationSpec, GSolution, KTerm, Variant};
use crate::ldp::{finite_dim_rate, path_rate};
use crate::marginal::{density_solver, theorem_density_bounds, MarginalDensity, MarginalOptions};
use crate::validate::{format_cell, run_all, run_check, Check, ValidationReport};
use crate::bridge::BridgeModel;

/// Environment variable holding the default number of worker threads.
pub const WORKERS_ENV: &str = "LEVYBRIDGE_WORKERS";

#[derive(Debug, Parser)]
#[command(name = "levybridge", version, about = "Light-tailed compound Poisson bridges: densities, sampling and rate functionals")]
struct Cli {
    #[command(flatten)]
    global: GlobalArgs,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct GlobalArgs {
    /// JSON run configuration; flags override its fields.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Worker threads (default: $LEVYBRIDGE_WORKERS, else all cores).
    #[arg(long, global = true)]
    workers: Option<usize>,
    /// Write the result here instead of standard output.
    #[arg(long, global = true)]
    output: Option<PathBuf>,
    #[arg(long, global = true, value_enum)]
    format: Option<OutputFormat>,
}

#[derive(Debug, Args, Default)]
struct ModelArgs {
    /// Index α > 1 of the jump exponent.
    #[arg(long)]
    alpha: Option<f64>,
    /// Multiplier c of x^α.
    #[arg(long)]
    scale: Option<f64>,
    /// Logarithmic perturbation β.
    #[arg(long)]
    beta: Option<f64>,
    /// Radius below which the exponent is held constant.
    #[arg(long)]
    floor: Option<f64>,
    /// Spatial dimension (1 to 3).
    #[arg(long)]
    dim: Option<usize>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Solve the functional equation for g at a given ln Λ.
    SolveG {
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long, default_value = "general", value_parser = parse_variant)]
        variant: Variant,
        #[arg(long, allow_negative_numbers = true)]
        log_lambda: f64,
        /// Coefficients of a custom correction k(y) = a ln y + b ln f'' + c y f'''/f'' + d.
        #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
        k_log: f64,
        #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
        k_curvature: f64,
        #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
        k_ratio: f64,
        #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
        k_constant: f64,
    },
    /// Tabulate ln ν^{*m} with its two-sided envelope.
    Convpow {
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long)]
        order: usize,
        #[arg(long)]
        rmax: Option<f64>,
        #[arg(long)]
        delta: Option<f64>,
        #[arg(long, default_value_t = 200)]
        points: usize,
    },
    /// Tabulate the marginal density ln μ_t and its tail.
    Marginal {
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long)]
        time: f64,
        #[arg(long)]
        rmax: Option<f64>,
        #[arg(long)]
        delta: Option<f64>,
        #[arg(long, default_value_t = 100)]
        points: usize,
        #[arg(long, default_value_t = 10)]
        tail_points: usize,
    },
    /// Sample bridge paths as JSON lines.
    BridgeSample {
        #[command(flatten)]
        model: ModelArgs,
        #[command(flatten)]
        bridge: BridgeArgs,
        #[arg(long)]
        samples: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        m_cap: Option<usize>,
    },
    /// Evaluate the entropy rate of a path or of finitely many marginals.
    Rate {
        #[command(flatten)]
        bridge: BridgeArgs,
        #[arg(long)]
        dim: Option<usize>,
        /// The constant-speed path from 0 to x.
        #[arg(long, conflicts_with_all = ["knots", "times"])]
        linear: bool,
        /// Path knots as JSON: [[t, [x1, ...]], ...].
        #[arg(long, conflicts_with = "times")]
        knots: Option<String>,
        /// Intermediate times, comma separated.
        #[arg(long, requires = "points", value_delimiter = ',')]
        times: Option<Vec<f64>>,
        /// Intermediate positions: coordinates comma separated, points separated by ';'.
        #[arg(long, allow_hyphen_values = true)]
        points: Option<String>,
    },
    /// Run one self-check and report it as JSON (or its sweep as CSV).
    Validate {
        #[arg(long, value_parser = parse_check)]
        check: Check,
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long)]
        samples: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Run every self-check and print a Markdown summary table.
    Report {
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long)]
        samples: Option<usize>,
    },
}

#[derive(Debug, Args, Default)]
struct BridgeArgs {
    #[arg(long)]
    eps: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    rho: Option<f64>,
    /// Explicit time acceleration; overrides --rho.
    #[arg(long)]
    r_eps: Option<f64>,
    #[arg(long)]
    horizon: Option<f64>,
    /// Endpoint x, comma separated.
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
    endpoint: Option<Vec<f64>>,
}

fn parse_variant(s: &str) -> std::result::Result<Variant, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn parse_check(s: &str) -> std::result::Result<Check, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

impl ModelArgs {
    fn apply(&self, cfg: &mut RunConfig) {
        if let Some(a) = self.alpha {
            cfg.model.alpha = a;
        }
        if let Some(c) = self.scale {
            cfg.model.scale = c;
        }
        if self.beta.is_some() {
            cfg.model.beta = self.beta;
        }
        if let Some(x0) = self.floor {
            cfg.model.domain_floor = x0;
        }
        if let Some(n) = self.dim {
            cfg.dim = n;
        }
    }
}

impl BridgeArgs {
    fn apply(&self, cfg: &mut RunConfig, dim_given: bool) {
        let b = &mut cfg.bridge;
        if let Some(e) = self.eps {
            b.epsilon = e;
        }
        if let Some(r) = self.rho {
            b.rho = r;
            b.r_eps = None;
        }
        if self.r_eps.is_some() {
            b.r_eps = self.r_eps;
        }
        if let Some(t) = self.horizon {
            b.horizon = t;
        }
        if let Some(x) = &self.endpoint {
            b.endpoint = x.clone();
            if !dim_given {
                cfg.dim = x.len();
            }
        }
    }
}

/// Text produced by a subcommand and whether its checks passed.
struct Outcome {
    body: String,
    pass: bool,
}

impl Outcome {
    fn ok(body: String) -> Self {
        Outcome { body, pass: true }
    }
}

/// Parses `std::env::args` and runs against the process's standard streams.
pub fn run() -> i32 {
    let stdout = std::io::stdout();
    let stderr = std::io::stderr();
    run_with_io(std::env::args_os(), &mut stdout.lock(), &mut stderr.lock())
}

/// Runs the command line `argv` (program name first) writing results to
/// `out` and diagnostics to `err`; returns the exit code.
pub fn run_with_io<I, T>(argv: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            let informational = matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion);
            let sink: &mut dyn Write = if informational { out } else { err };
            let _ = write!(sink, "{}", e.render());
            return if informational { 0 } else { 2 };
        }
    };
    let workers = match cli.global.workers {
        Some(w) => Some(w),
        None => match std::env::var(WORKERS_ENV) {
            Ok(v) => match v.trim().parse::<usize>() {
                Ok(w) => Some(w),
                Err(_) => {
                    let _ = writeln!(err, "error: {WORKERS_ENV} must be a non-negative integer, got {v:?}");
                    return 2;
                }
            },
            Err(_) => None,
        },
    };
    let pool = match rayon::ThreadPoolBuilder::new().num_threads(workers.unwrap_or(0)).build() {
        Ok(p) => p,
        Err(e) => {
            let _ = writeln!(err, "error: cannot start worker threads: {e}");
            return 2;
        }
    };
    let result = pool.install(|| execute(&cli)).and_then(|(outcome, path)| {
        match path {
            Some(p) => std::fs::write(&p, &outcome.body).map_err(|e| Error::Io(format!("{}: {e}", p.display())))?,
            None => out.write_all(outcome.body.as_bytes())?,
        }
        Ok(outcome.pass)
    });
    match result {
        Ok(true) => 0,
        Ok(false) => 1,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            2
        }
    }
}

fn load_config(global: &GlobalArgs) -> Result<RunConfig> {
    let mut cfg = match &global.config {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
            RunConfig::from_json(&text)?
        }
        None => RunConfig::default(),
    };
    if global.format.is_some() {
        cfg.output.format = global.format;
    }
    if global.output.is_some() {
        cfg.output.path = global.output.clone();
    }
    Ok(cfg)
}

fn format_or(cfg: &RunConfig, default: OutputFormat, allowed: &[OutputFormat]) -> Result<OutputFormat> {
    let f = cfg.output.format.unwrap_or(default);
    if allowed.contains(&f) {
        Ok(f)
    } else {
        Err(Error::Config(format!("output format {f:?} is not available for this subcommand")))
    }
}

fn to_json<T: Serialize>(v: &T) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("serializable output");
    s.push('\n');
    s
}

fn csv_table(header: &[&str], rows: &[Vec<f64>]) -> String {
    let mut s = header.join(",");
    s.push('\n');
    for row in rows {
        s.push_str(&row.iter().map(|v| format_cell(*v)).collect::<Vec<_>>().join(","));
        s.push('\n');
    }
    s
}

fn json_rows(header: &[&str], rows: &[Vec<f64>]) -> Vec<serde_json::Map<String, serde_json::Value>> {
    rows.iter()
        .map(|row| header.iter().zip(row).map(|(k, v)| (k.to_string(), json!(v))).collect())
        .collect()
}

fn execute(cli: &Cli) -> Result<(Outcome, Option<PathBuf>)> {
    let mut cfg = load_config(&cli.global)?;
    let outcome = match &cli.command {
        Command::SolveG {
            model,
            variant,
            log_lambda,
            k_log,
            k_curvature,
            k_ratio,
            k_constant,
        } => {
            model.apply(&mut cfg);
            cfg.validate()?;
            format_or(&cfg, OutputFormat::Json, &[OutputFormat::Json])?;
            let fun = cfg.fun()?;
            let spec = match variant {
                Variant::CustomK => FunctionalEquationSpec::custom(
                    fun,
                    cfg.dim,
                    KTerm {
                        log_coef: *k_log,
                        curvature_coef: *k_curvature,
                        ratio_coef: *k_ratio,
                        constant: *k_constant,
                    },
                ),
                v => FunctionalEquationSpec::new(fun, cfg.dim, *v),
            };
            let sol = GSolution::new(spec)?;
            let g = sol.solve(*log_lambda)?;
            let diag = sol.limit_diagnostics(*log_lambda)?;
            Outcome::ok(to_json(&json!({
                "variant": variant,
                "log_lambda": log_lambda,
                "g": g,
                "residual": sol.residual(*log_lambda, g),
                "diagnostics": {
                    "log_lambda_floor": sol.log_lambda_floor(),
                    "y_min": sol.y_min(),
                    "log_derivative_ratio": diag.log_derivative,
                    "f_ratio": diag.f_ratio,
                    "gf_prime_ratio": diag.gf_prime_ratio,
                    "legendre_ratio": diag.legendre_ratio,
                },
            })))
        }
        Command::Convpow {
            model,
            order,
            rmax,
            delta,
            points,
        } => {
            model.apply(&mut cfg);
            if rmax.is_some() {
                cfg.numerics.r_max = *rmax;
            }
            if delta.is_some() {
                cfg.numerics.delta = *delta;
            }
            cfg.validate()?;
            let format = format_or(&cfg, OutputFormat::Csv, &[OutputFormat::Csv, OutputFormat::Json])?;
            let r_max = cfg.numerics.r_max.ok_or_else(|| Error::Config("--rmax is required".into()))?;
            let delta = cfg.numerics.delta.unwrap_or(0.2);
            let fun = cfg.fun()?;
            let dens = build_convolution(&fun, cfg.dim, *order, r_max, cfg.numerics.nodes)?;
            let rows: Vec<Vec<f64>> = (1..=*points)
                .map(|i| {
                    let r = r_max * i as f64 / *points as f64;
                    let env = proposition_bounds(&fun, cfg.dim, *order, r, delta).ok();
                    vec![
                        r,
                        dens.eval(r),
                        env.map_or(f64::NAN, |e| e.lower),
                        env.map_or(f64::NAN, |e| e.upper),
                    ]
                })
                .collect();
            let header = ["r", "log_density", "lower_bound", "upper_bound"];
            Outcome::ok(match format {
                OutputFormat::Csv => csv_table(&header, &rows),
                _ => to_json(&json_rows(&header, &rows)),
            })
        }
        Command::Marginal {
            model,
            time,
            rmax,
            delta,
            points,
            tail_points,
        } => {
            model.apply(&mut cfg);
            if rmax.is_some() {
                cfg.numerics.r_max = *rmax;
            }
            if delta.is_some() {
                cfg.numerics.delta = *delta;
            }
            cfg.validate()?;
            let format = format_or(&cfg, OutputFormat::Csv, &[OutputFormat::Csv, OutputFormat::Json])?;
            let r_max = cfg.numerics.r_max.ok_or_else(|| Error::Config("--rmax is required".into()))?;
            let delta = cfg.numerics.delta.unwrap_or(0.5);
            let fun = cfg.fun()?;
            let opts = MarginalOptions {
                nodes: cfg.numerics.nodes,
                m_cap: cfg.numerics.m_cap,
            };
            // the tail integral needs room beyond the last printed radius
            let md = MarginalDensity::build(&fun, cfg.dim, *time, 1.2 * r_max + 10.0, opts)?;
            let sol = density_solver(&fun, cfg.dim)?;
            let mut rows = Vec::with_capacity(*points);
            for i in 1..=*points {
                let r = r_max * i as f64 / *points as f64;
                let v = md.eval(r)?;
                let (lo, hi) = theorem_density_bounds(&sol, r, *time, delta).unwrap_or((f64::NAN, f64::NAN));
                rows.push(vec![r, v.log_density, lo, hi, v.dominant_m as f64]);
            }
            let mut tails = Vec::with_capacity(*tail_points);
            for i in 1..=*tail_points {
                let lambda = r_max * i as f64 / *tail_points as f64;
                let row = match md.tail_estimate(&sol, lambda, delta) {
                    Ok(t) => vec![lambda, t.log_tail, t.lower, t.upper],
                    Err(_) => vec![lambda, md.log_tail_mass(lambda)?, f64::NAN, f64::NAN],
                };
                tails.push(row);
            }
            let header = ["r", "log_mu", "lower", "upper", "dominant_m"];
            let tail_header = ["lambda", "log_tail", "lower", "upper"];
            Outcome::ok(match format {
                OutputFormat::Csv => format!("{}\n{}", csv_table(&header, &rows), csv_table(&tail_header, &tails)),
                _ => to_json(&json!({
                    "time": time,
                    "m_cap": md.m_cap(),
                    "density": json_rows(&header, &rows),
                    "tail": json_rows(&tail_header, &tails),
                })),
            })
        }
        Command::BridgeSample {
            model,
            bridge,
            samples,
            seed,
            m_cap,
        } => {
            model.apply(&mut cfg);
            bridge.apply(&mut cfg, model.dim.is_some());
            if let Some(s) = samples {
                cfg.sampling.samples = *s;
            }
            if let Some(s) = seed {
                cfg.sampling.seed = *s;
            }
            if m_cap.is_some() {
                cfg.numerics.m_cap = *m_cap;
            }
            cfg.validate()?;
            format_or(&cfg, OutputFormat::Jsonl, &[OutputFormat::Jsonl])?;
            let model = BridgeModel::new(cfg.bridge_config()?, cfg.bridge_options())?;
            let paths = model.sample_many(0, cfg.sampling.samples)?;
            let mut body = String::new();
            for p in &paths {
                body.push_str(&serde_json::to_string(p).expect("serializable path"));
                body.push('\n');
            }
            Outcome::ok(body)
        }
        Command::Rate {
            bridge,
            dim,
            linear,
            knots,
            times,
            points,
        } => {
            if let Some(n) = dim {
                cfg.dim = *n;
            }
            bridge.apply(&mut cfg, dim.is_some());
            cfg.validate()?;
            let format = format_or(&cfg, OutputFormat::Csv, &[OutputFormat::Csv, OutputFormat::Json])?;
            let bc = cfg.bridge_config()?;
            let eval = if let Some(text) = knots {
                let parsed: Vec<(f64, Vec<f64>)> =
                    serde_json::from_str(text).map_err(|e| Error::Config(format!("--knots: {e}")))?;
                path_rate(&bc, &parsed)?
            } else if let Some(ts) = times {
                let pts = parse_points(points.as_deref().unwrap_or(""))?;
                finite_dim_rate(&bc, ts, &pts)?
            } else if *linear {
                path_rate(&bc, &[(0.0, vec![0.0; bc.n]), (bc.horizon(), bc.endpoint().to_vec())])?
            } else {
                return Err(Error::Config("rate needs --linear, --knots or --times/--points".into()));
            };
            Outcome::ok(match format {
                OutputFormat::Json => to_json(&eval),
                _ => format!("{}\n", format_cell(eval.value)),
            })
        }
        Command::Validate {
            check,
            model,
            samples,
            seed,
        } => {
            model.apply(&mut cfg);
            if let Some(s) = samples {
                cfg.sampling.samples = *s;
            }
            if let Some(s) = seed {
                cfg.sampling.seed = *s;
            }
            cfg.validate()?;
            let format = format_or(&cfg, OutputFormat::Json, &[OutputFormat::Json, OutputFormat::Csv])?;
            let rep = run_check(*check, &cfg)?;
            let body = match format {
                OutputFormat::Csv => rep.sweep.to_csv(),
                _ => to_json(&rep),
            };
            Outcome { body, pass: rep.pass }
        }
        Command::Report { model, samples } => {
            model.apply(&mut cfg);
            if let Some(s) = samples {
                cfg.sampling.samples = *s;
            }
            cfg.validate()?;
            let reports = run_all(&cfg)?;
            let pass = reports.iter().all(|r| r.pass);
            Outcome {
                body: markdown_report(&reports),
                pass,
            }
        }
    };
    Ok((outcome, cfg.output.path.clone()))
}

fn parse_points(text: &str) -> Result<Vec<Vec<f64>>> {
    text.split(';')
        .filter(|s| !s.trim().is_empty())
        .map(|p| {
            p.split(',')
                .map(|c| c.trim().parse::<f64>().map_err(|e| Error::Config(format!("--points: {e}"))))
                .collect()
        })
        .collect()
}

/// Markdown table with one row per check.
pub fn markdown_report(reports: &[ValidationReport]) -> String {
    let mut s = String::from("| Check | Verifies | Result | Metrics |\n|---|---|---|---|\n");
    for r in reports {
        let metrics: Vec<String> = r.metrics.iter().map(|(k, v)| format!("{k}={}", format_cell(*v))).collect();
        s.push_str(&format!(
            "| {} | {} | {} | {} |\n",
            r.check,
            r.check.description(),
            if r.pass { "PASS" } else { "FAIL" },
            metrics.join(", ")
        ));
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    fn run_capture(args: &[&str]) -> (i32, String, String) {
        let mut out = Vec::new();
        let mut err = Vec::new();
        let code = run_with_io(std::iter::once("levybridge").chain(args.iter().copied()), &mut out, &mut err);
        (code, String::from_utf8(out).unwrap(), String::from_utf8(err).unwrap())
    }

    #[test]
    fn linear_rate_prints_zero() {
        let (code, out, _) = run_capture(&["rate", "--linear"]);
        assert_eq!(code, 0);
        assert_eq!(out.trim(), "0");
    }

    #[test]
    fn unknown_flag_is_usage_error() {
        let (code, out, err) = run_capture(&["rate", "--bogus"]);
        assert_eq!(code, 2);
        assert!(out.is_empty());
        assert!(err.contains("Usage"));
    }

    #[test]
    fn invalid_config_is_exit_two() {
        let (code, _, err) = run_capture(&["solve-g", "--alpha", "0.5", "--log-lambda", "10"]);
        assert_eq!(code, 2);
        assert!(err.contains("error"));
    }

    #[test]
    fn points_parse() {
        assert_eq!(parse_points("0.5,0;1,-2").unwrap(), vec![vec![0.5, 0.0], vec![1.0, -2.0]]);
    }
}
