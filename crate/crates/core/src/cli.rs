//! The `medianforge` command line: argument parsing, CSV/JSON I/O and the
//! versioned report document. `main.rs` only forwards to [`run`].

use std::ffi::OsString;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use nalgebra::DMatrix;
use serde::Deserialize;
use serde_json::{json, Value};

use crate::median::{
    average, coordinatewise_median, hull_distance, loss_eval, skewed_geometric_median, skewed_loss_eval,
    MedianResult, MedianSolver,
};
use crate::simulation::{
    asymptotic_experiment, build_theorem1_instance, byzantine_experiment, byzantine_experiment_fixed,
    convergence_diagnostics, theorem1_sweep, AsymptoticOptions, ExperimentConfig, PreferenceDistribution,
    THEOREM1_TOL_GRAD,
};
use crate::skewness::{skewness, skewness_numeric};
use crate::strategy::{best_response_weighted, BestResponseOptions, StrategyReport};
use crate::{Error, Point, SpdMatrix, VoterProfile, WeightedProfile};

pub const SCHEMA_VERSION: u32 = 1;
const DETERMINISTIC_TIMESTAMP: &str = "1970-01-01T00:00:00Z";

#[derive(Debug, Parser)]
#[command(name = "medianforge", version, about = "Geometric-median aggregation and manipulability analysis")]
pub struct Cli {
    /// Zero the report timestamp so identical inputs give byte-identical output.
    #[arg(long, global = true)]
    pub deterministic: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Method {
    Gm,
    Cw,
    Avg,
    SkewedGm,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Preset {
    Thm1,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Aggregate a CSV profile (one voter per row).
    Aggregate {
        #[arg(long)]
        input: PathBuf,
        #[arg(long, value_enum, default_value = "gm")]
        method: Method,
        #[arg(long)]
        skew_matrix: Option<PathBuf>,
        #[arg(long)]
        weights: Option<PathBuf>,
        #[arg(long, default_value_t = 1e-10)]
        tol: f64,
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Skewness of an SPD matrix given as a square CSV.
    Skewness {
        #[arg(long)]
        matrix: PathBuf,
        /// Also run the sphere search and report its gap to the closed form.
        #[arg(long)]
        numeric_check: bool,
        #[arg(long, env = "MEDIANFORGE_SEED", default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Best strategic vote of one voter against an honest profile.
    BestResponse {
        #[arg(long, required_unless_present = "preset")]
        input: Option<PathBuf>,
        /// Comma-separated coordinates or a CSV file with one row.
        #[arg(long, required_unless_present = "preset")]
        theta0: Option<String>,
        #[arg(long)]
        pref_matrix: Option<PathBuf>,
        #[arg(long, default_value_t = 5)]
        restarts: usize,
        #[arg(long, env = "MEDIANFORGE_SEED", default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 1e-10)]
        tol: f64,
        #[arg(long, value_enum, conflicts_with_all = ["input", "theta0", "pref_matrix"])]
        preset: Option<Preset>,
        #[arg(long = "X", alias = "x", default_value_t = 20.0)]
        x: f64,
        #[arg(long = "V", alias = "v", default_value_t = 2000)]
        v: usize,
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Run an experiment described by a JSON config.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        /// Worker threads; results do not depend on it.
        #[arg(long, default_value_t = 1)]
        parallel: usize,
        /// Directory for `report.json` and `trials.csv`; stdout when omitted.
        #[arg(long)]
        output: Option<PathBuf>,
    },
}

/// Error carrying the process exit code: 2 for bad input, 3 for solver failure.
#[derive(Debug)]
pub struct CliError {
    pub code: u8,
    pub message: String,
}

impl CliError {
    fn input(message: impl Into<String>) -> Self {
        Self {
            code: 2,
            message: message.into(),
        }
    }

    fn solver(message: impl Into<String>) -> Self {
        Self {
            code: 3,
            message: message.into(),
        }
    }
}

/// Validation failures exit 2, numerical failures exit 3.
fn classify(e: Error) -> CliError {
    match e {
        Error::NotConverged { .. } | Error::BracketFailure(_) | Error::AtVoterPoint => CliError::solver(e.to_string()),
        _ => CliError::input(e.to_string()),
    }
}

type CliResult<T> = std::result::Result<T, CliError>;

/// Parses `args` (including the program name), runs the command and maps the
/// outcome to an exit code. Diagnostics go to stderr.
pub fn run<I, T>(args: I) -> ExitCode
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match execute(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.message);
            ExitCode::from(e.code)
        }
    }
}

pub fn execute(cli: &Cli) -> CliResult<()> {
    let ctx = Context {
        deterministic: cli.deterministic,
    };
    match &cli.command {
        Command::Aggregate {
            input,
            method,
            skew_matrix,
            weights,
            tol,
            output,
        } => {
            let doc = ctx.aggregate(input, *method, skew_matrix.as_deref(), weights.as_deref(), *tol)?;
            emit(&doc, output.as_deref())
        }
        Command::Skewness {
            matrix,
            numeric_check,
            seed,
            output,
        } => {
            let doc = ctx.skewness(matrix, *numeric_check, *seed)?;
            emit(&doc, output.as_deref())
        }
        Command::BestResponse {
            input,
            theta0,
            pref_matrix,
            restarts,
            seed,
            tol,
            preset,
            x,
            v,
            output,
        } => {
            let doc = match preset {
                Some(Preset::Thm1) => ctx.best_response_thm1(*x, *v, *restarts, *seed)?,
                None => ctx.best_response(
                    input.as_deref().ok_or_else(|| CliError::input("--input is required"))?,
                    theta0.as_deref().ok_or_else(|| CliError::input("--theta0 is required"))?,
                    pref_matrix.as_deref(),
                    *restarts,
                    *seed,
                    *tol,
                )?,
            };
            emit(&doc, output.as_deref())
        }
        Command::Simulate {
            config,
            parallel,
            output,
        } => ctx.simulate(config, *parallel, output.as_deref()),
    }
}

struct Context {
    deterministic: bool,
}

impl Context {
    fn document(&self, command: &str, inputs: Value, results: Value, certificates: Value) -> Value {
        let timestamp = if self.deterministic {
            DETERMINISTIC_TIMESTAMP.to_string()
        } else {
            chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Secs, true)
        };
        json!({
            "schema_version": SCHEMA_VERSION,
            "command": command,
            "inputs": inputs,
            "results": results,
            "certificates": certificates,
            "provenance": {
                "tool": "medianforge",
                "version": env!("CARGO_PKG_VERSION"),
                "timestamp": timestamp,
            },
        })
    }

    fn aggregate(
        &self,
        input: &Path,
        method: Method,
        skew_path: Option<&Path>,
        weights_path: Option<&Path>,
        tol: f64,
    ) -> CliResult<Value> {
        if !(tol > 0.0 && tol.is_finite()) {
            return Err(CliError::input(format!("--tol must be positive, got {tol}")));
        }
        let profile = read_profile(input)?;
        let wp = match weights_path {
            Some(path) => {
                let w = read_weights(path)?;
                if w.len() != profile.len() {
                    return Err(CliError::input(format!(
                        "{}: {} weights for {} voters",
                        path.display(),
                        w.len(),
                        profile.len()
                    )));
                }
                WeightedProfile::with_weights(&profile, &w).map_err(classify)?
            }
            None => WeightedProfile::uniform(&profile),
        };
        let sigma = match (method, skew_path) {
            (Method::SkewedGm, Some(path)) => Some(read_spd(path)?),
            (Method::SkewedGm, None) => return Err(CliError::input("--skew-matrix is required for skewed-gm")),
            (_, Some(_)) => return Err(CliError::input("--skew-matrix is only valid with skewed-gm")),
            _ => None,
        };
        if let Some(s) = &sigma {
            if s.dim() != profile.dim() {
                return Err(CliError::input(format!(
                    "skew matrix is {0}x{0} but the profile has dimension {1}",
                    s.dim(),
                    profile.dim()
                )));
            }
        }

        let (point, loss, cert): (Point, f64, Option<MedianResult>) = match method {
            Method::Avg => {
                let p = average(&wp);
                let l = loss_eval(&wp, &p);
                (p, l, None)
            }
            Method::Cw => {
                let p = coordinatewise_median(&wp);
                let l = loss_eval(&wp, &p);
                (p, l, None)
            }
            Method::Gm => {
                let r = MedianSolver::with_tol(tol).solve(&wp).map_err(classify)?;
                (r.point.clone(), r.loss, Some(r))
            }
            Method::SkewedGm => {
                let s = sigma.as_ref().expect("checked above");
                let r = skewed_geometric_median(&wp, s, tol).map_err(classify)?;
                let l = skewed_loss_eval(&wp, s, &r.point).map_err(classify)?;
                (r.point.clone(), l, Some(r))
            }
        };
        let spread = wp.points().iter().map(|x| (x - &point).norm()).fold(0.0, f64::max);
        let in_hull = hull_distance(wp.points(), &point) <= 1e-9 * (1.0 + spread);
        let adim = wp.affine_dim();
        let degenerate = cert.as_ref().map_or(adim <= 1, |r| r.degenerate);

        let inputs = json!({
            "input": input.display().to_string(),
            "method": method_name(method),
            "skew_matrix": skew_path.map(|p| p.display().to_string()),
            "weights": weights_path.map(|p| p.display().to_string()),
            "tol": tol,
            "voters": profile.len(),
            "dim": profile.dim(),
        });
        let results = json!({
            "point": to_vec(&point),
            "loss": loss,
            "in_hull": in_hull,
            "degenerate_dimension": degenerate,
            "affine_dim": adim,
        });
        let certificates = match &cert {
            Some(r) => json!({
                "grad_norm": r.grad_norm,
                "additive_bound": finite_or_null(r.additive_bound),
                "iterations": r.iterations,
            }),
            None => json!({ "grad_norm": null, "additive_bound": null }),
        };
        Ok(self.document("aggregate", inputs, results, certificates))
    }

    fn skewness(&self, path: &Path, numeric_check: bool, seed: u64) -> CliResult<Value> {
        let s = read_spd(path)?;
        let report = skewness(&s);
        let mut results = serde_json::to_value(&report).map_err(|e| CliError::solver(e.to_string()))?;
        if numeric_check {
            let n = skewness_numeric(&s, 16, seed);
            results["numeric_value"] = json!(n.value);
            results["numeric_maximizer"] = json!(to_vec(&n.maximizer));
            results["numeric_gap"] = json!((n.value - report.value).abs());
        }
        let inputs = json!({
            "matrix": path.display().to_string(),
            "numeric_check": numeric_check,
            "seed": seed,
        });
        Ok(self.document("skewness", inputs, results, json!({ "certified": report.certified })))
    }

    fn best_response(
        &self,
        input: &Path,
        theta0: &str,
        pref_path: Option<&Path>,
        restarts: usize,
        seed: u64,
        tol: f64,
    ) -> CliResult<Value> {
        let profile = read_profile(input)?;
        let theta = read_theta0(theta0)?;
        if theta.len() != profile.dim() {
            return Err(CliError::input(format!(
                "theta0 has {} coordinates but the profile has dimension {}",
                theta.len(),
                profile.dim()
            )));
        }
        let pref = match pref_path {
            Some(p) => read_spd(p)?,
            None => SpdMatrix::identity(profile.dim()),
        };
        let opts = BestResponseOptions {
            restarts,
            seed,
            tol_grad: tol,
            ..BestResponseOptions::default()
        };
        let wp = WeightedProfile::uniform(&profile);
        let report = best_response_weighted(&theta, &wp, &pref, &opts).map_err(classify)?;
        let inputs = json!({
            "input": input.display().to_string(),
            "theta0": to_vec(&theta),
            "pref_matrix": pref_path.map(|p| p.display().to_string()),
            "restarts": restarts,
            "seed": seed,
            "tol": tol,
        });
        let certificates = self.strategy_certificates(&wp, &report, tol)?;
        Ok(self.document("best-response", inputs, strategy_json(&report), certificates))
    }

    fn best_response_thm1(&self, x: f64, v: usize, restarts: usize, seed: u64) -> CliResult<Value> {
        let inst = build_theorem1_instance(x, v).map_err(classify)?;
        let outcome = inst.evaluate(THEOREM1_TOL_GRAD).map_err(classify)?;
        let opts = BestResponseOptions {
            restarts,
            seed,
            tol_grad: THEOREM1_TOL_GRAD,
            ..BestResponseOptions::default()
        };
        let report =
            best_response_weighted(&inst.theta0, &inst.profile, &SpdMatrix::identity(2), &opts).map_err(classify)?;
        let mut results = strategy_json(&report);
        results["construction"] = json!({
            "alpha_v": inst.alpha_v,
            "g_v": to_vec(&inst.g_v),
            "strategic_vote": to_vec(&inst.strategic_vote),
            "outcome": outcome,
        });
        let inputs = json!({
            "preset": "thm1",
            "X": x,
            "V": v,
            "restarts": restarts,
            "seed": seed,
            "tol": THEOREM1_TOL_GRAD,
        });
        let certificates = self.strategy_certificates(&inst.profile, &report, THEOREM1_TOL_GRAD)?;
        Ok(self.document("best-response", inputs, results, certificates))
    }

    /// Re-solves the truthful and manipulated medians to report their
    /// certificates.
    fn strategy_certificates(&self, wp: &WeightedProfile, report: &StrategyReport, tol: f64) -> CliResult<Value> {
        let cert = |vote: &Point| -> CliResult<Value> {
            let p = wp.with_extra_voter(vote).map_err(classify)?;
            let r = MedianSolver::with_tol(tol)
                .starting_at(vote.clone())
                .solve(&p)
                .map_err(classify)?;
            Ok(json!({ "grad_norm": r.grad_norm, "additive_bound": finite_or_null(r.additive_bound) }))
        };
        Ok(json!({
            "truthful": cert(&report.theta0)?,
            "manipulated": cert(&report.strategic_vote)?,
        }))
    }

    fn simulate(&self, config_path: &Path, parallel: usize, output: Option<&Path>) -> CliResult<()> {
        if parallel == 0 {
            return Err(CliError::input("--parallel must be at least 1"));
        }
        let text = read_text(config_path)?;
        let config: SimulationConfig = serde_json::from_str(&text).map_err(|e| {
            // errors found after parsing (tags, unknown fields) carry no position
            let at = if e.line() > 0 {
                format!(":{}:{}", e.line(), e.column())
            } else {
                String::new()
            };
            CliError::input(format!("{}{at}: {e}", config_path.display()))
        })?;
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(parallel)
            .build()
            .map_err(|e| CliError::solver(e.to_string()))?;
        let outcome = pool.install(|| config.run())?;
        let inputs = json!({
            "config": config_path.display().to_string(),
            "experiment": serde_json::to_value(&config).unwrap_or(Value::Null),
        });
        let doc = self.document("simulate", inputs, outcome.results, outcome.certificates);
        match output {
            Some(dir) => {
                fs::create_dir_all(dir)
                    .map_err(|e| CliError::input(format!("cannot create {}: {e}", dir.display())))?;
                write_file(&dir.join("report.json"), &pretty(&doc))?;
                write_file(&dir.join("trials.csv"), &outcome.csv)?;
            }
            None => print!("{}", pretty(&doc)),
        }
        if outcome.completed * 10 < outcome.total * 9 {
            return Err(CliError::solver(format!(
                "only {} of {} trials completed",
                outcome.completed, outcome.total
            )));
        }
        Ok(())
    }
}

fn method_name(m: Method) -> &'static str {
    match m {
        Method::Gm => "gm",
        Method::Cw => "cw",
        Method::Avg => "avg",
        Method::SkewedGm => "skewed-gm",
    }
}

fn strategy_json(r: &StrategyReport) -> Value {
    let candidates: Vec<Value> = r
        .candidates
        .iter()
        .map(|c| {
            json!({
                "source": c.source.as_str(),
                "vote": to_vec(&c.vote),
                "median": to_vec(&c.median),
                "distance": c.distance,
            })
        })
        .collect();
    json!({
        "theta0": to_vec(&r.theta0),
        "truthful_median": to_vec(&r.truthful_median),
        "strategic_vote": to_vec(&r.strategic_vote),
        "manipulated_median": to_vec(&r.manipulated_median),
        "truthful_dist": r.truthful_dist,
        "strategic_dist": r.strategic_dist,
        "gain_alpha": finite_or_null(r.gain_alpha),
        "gain_alpha_is_lower_bound": true,
        "exact_capture": r.exact_capture,
        "candidates": candidates,
    })
}

/// One experiment, selected by the `experiment` field of the config.
#[derive(Debug, Clone, Deserialize, serde::Serialize)]
#[serde(tag = "experiment", rename_all = "kebab-case", deny_unknown_fields)]
pub enum SimulationConfig {
    Asymptotic {
        distribution: PreferenceDistribution,
        v_grid: Vec<usize>,
        trials: usize,
        seed: Option<u64>,
        #[serde(default = "default_epsilon")]
        epsilon: f64,
        #[serde(default = "default_delta")]
        delta: f64,
        /// Preference matrix `S`; identity when absent.
        #[serde(default)]
        pref_matrix: Option<Vec<Vec<f64>>>,
        /// Aggregator skew `Sigma`; plain median when absent.
        #[serde(default)]
        aggregator_skew: Option<Vec<Vec<f64>>>,
        #[serde(default = "default_gammas")]
        gammas: Vec<f64>,
        #[serde(default = "default_restarts")]
        restarts: usize,
        #[serde(default = "default_true")]
        numeric_skew: bool,
    },
    Theorem1 {
        #[serde(default = "default_xs")]
        xs: Vec<f64>,
        v_grid: Vec<usize>,
        #[serde(default)]
        best_response: bool,
    },
    Byzantine {
        /// Random truthful profiles; ignored when `profile` is given.
        #[serde(default)]
        distribution: Option<PreferenceDistribution>,
        #[serde(default)]
        profile: Option<Vec<Vec<f64>>>,
        truthful: usize,
        strategic: usize,
        trials: usize,
        seed: Option<u64>,
    },
    Convergence {
        distribution: PreferenceDistribution,
        v_grid: Vec<usize>,
        trials: usize,
        seed: Option<u64>,
    },
}

fn default_epsilon() -> f64 {
    0.1
}
fn default_delta() -> f64 {
    0.05
}
fn default_gammas() -> Vec<f64> {
    vec![1.5, 3.0, 10.0]
}
fn default_restarts() -> usize {
    1
}
fn default_true() -> bool {
    true
}
fn default_xs() -> Vec<f64> {
    vec![20.0]
}

struct SimulationOutcome {
    results: Value,
    certificates: Value,
    csv: String,
    completed: usize,
    total: usize,
}

/// Seed from the config, else `MEDIANFORGE_SEED`, else 0.
fn resolve_seed(seed: Option<u64>) -> CliResult<u64> {
    if let Some(s) = seed {
        return Ok(s);
    }
    match std::env::var("MEDIANFORGE_SEED") {
        Ok(v) => v
            .trim()
            .parse()
            .map_err(|_| CliError::input(format!("MEDIANFORGE_SEED is not a u64: {v:?}"))),
        Err(_) => Ok(0),
    }
}

fn matrix_from_rows(rows: &[Vec<f64>], what: &str) -> CliResult<SpdMatrix> {
    let n = rows.len();
    if n == 0 || rows.iter().any(|r| r.len() != n) {
        return Err(CliError::input(format!("{what} must be a non-empty square matrix")));
    }
    let flat: Vec<f64> = rows.iter().flatten().copied().collect();
    SpdMatrix::new(DMatrix::from_row_slice(n, n, &flat)).map_err(|e| CliError::input(format!("{what}: {e}")))
}

impl SimulationConfig {
    fn run(&self) -> CliResult<SimulationOutcome> {
        match self {
            Self::Asymptotic {
                distribution,
                v_grid,
                trials,
                seed,
                epsilon,
                delta,
                pref_matrix,
                aggregator_skew,
                gammas,
                restarts,
                numeric_skew,
            } => {
                let config = ExperimentConfig {
                    distribution: distribution.clone(),
                    v_grid: v_grid.clone(),
                    trials: *trials,
                    seed: resolve_seed(*seed)?,
                    epsilon: *epsilon,
                    delta: *delta,
                };
                config.validate().map_err(classify)?;
                let d = distribution.dim();
                let pref = match pref_matrix {
                    Some(rows) => matrix_from_rows(rows, "pref_matrix")?,
                    None => SpdMatrix::identity(d),
                };
                let opts = AsymptoticOptions {
                    gammas: gammas.clone(),
                    restarts: *restarts,
                    aggregator_skew: aggregator_skew
                        .as_ref()
                        .map(|rows| matrix_from_rows(rows, "aggregator_skew"))
                        .transpose()?,
                    numeric_skew: *numeric_skew,
                };
                let report = asymptotic_experiment(&config, &pref, &opts).map_err(classify)?;
                let mut csv = String::from("v,trial,seed,max_gain,skew,skew_numeric,within,error\n");
                for t in &report.trials {
                    let _ = writeln!(
                        csv,
                        "{},{},{},{},{},{},{},{}",
                        t.v,
                        t.trial,
                        t.seed,
                        fmt_f64(t.max_gain),
                        fmt_f64(t.skew),
                        t.skew_numeric.map(fmt_f64).unwrap_or_default(),
                        t.within,
                        csv_text(t.error.as_deref())
                    );
                }
                let completed = report.trials.iter().filter(|t| t.error.is_none()).count();
                let accepted = report.summaries.iter().all(|s| s.fraction_within >= 1.0 - delta);
                Ok(SimulationOutcome {
                    certificates: json!({
                        "fraction_threshold": 1.0 - delta,
                        "accepted": accepted,
                        "max_skew_gap": report.summaries.iter().map(|s| s.max_skew_gap).fold(0.0, f64::max),
                    }),
                    results: to_json(&report)?,
                    csv,
                    completed,
                    total: report.trials.len(),
                })
            }
            Self::Theorem1 {
                xs,
                v_grid,
                best_response,
            } => {
                if xs.is_empty() || v_grid.is_empty() {
                    return Err(CliError::input("xs and v_grid must be non-empty"));
                }
                let outcomes = theorem1_sweep(xs, v_grid, *best_response);
                let mut csv = String::from(
                    "x,v,truthful_dist,predicted_truthful_dist,strategic_dist,ratio,limit_ratio,guaranteed_gain,best_response_gain,error\n",
                );
                let mut rows = Vec::new();
                let mut completed = 0;
                let cells = xs.iter().flat_map(|&x| v_grid.iter().map(move |&v| (x, v)));
                for ((x, v), out) in cells.zip(&outcomes) {
                    match out {
                        Ok(o) => {
                            completed += 1;
                            let _ = writeln!(
                                csv,
                                "{},{},{},{},{},{},{},{},{},",
                                fmt_f64(x),
                                v,
                                fmt_f64(o.truthful_dist),
                                fmt_f64(o.predicted_truthful_dist),
                                fmt_f64(o.strategic_dist),
                                fmt_f64(o.ratio),
                                fmt_f64(o.limit_ratio),
                                fmt_f64(o.guaranteed_gain),
                                o.best_response_gain.map(fmt_f64).unwrap_or_default()
                            );
                            rows.push(to_json(o)?);
                        }
                        Err(e) => {
                            let _ = writeln!(csv, "{},{},,,,,,,,{}", fmt_f64(x), v, csv_text(Some(&e.to_string())));
                            rows.push(json!({ "x": x, "v": v, "error": e.to_string() }));
                        }
                    }
                }
                Ok(SimulationOutcome {
                    results: json!({ "cells": rows }),
                    certificates: json!({ "tol_grad": THEOREM1_TOL_GRAD }),
                    csv,
                    completed,
                    total: outcomes.len(),
                })
            }
            Self::Byzantine {
                distribution,
                profile,
                truthful,
                strategic,
                trials,
                seed,
            } => {
                let seed = resolve_seed(*seed)?;
                let report = match (profile, distribution) {
                    (Some(rows), _) => {
                        let p = VoterProfile::from_rows(rows).map_err(classify)?;
                        if p.len() != *truthful {
                            return Err(CliError::input(format!(
                                "profile has {} rows but truthful = {truthful}",
                                p.len()
                            )));
                        }
                        byzantine_experiment_fixed(&p, *strategic, *trials, seed)
                    }
                    (None, Some(dist)) => byzantine_experiment(dist, *truthful, *strategic, *trials, seed),
                    (None, None) => return Err(CliError::input("byzantine needs a distribution or a profile")),
                }
                .map_err(classify)?;
                let mut csv = String::from("trial,seed,adversary,delta,radius,displacement,within,error\n");
                for t in &report.trials {
                    let _ = writeln!(
                        csv,
                        "{},{},{},{},{},{},{},{}",
                        t.trial,
                        t.seed,
                        serde_json::to_value(t.adversary)
                            .ok()
                            .and_then(|v| v.as_str().map(str::to_string))
                            .unwrap_or_default(),
                        fmt_f64(t.delta),
                        fmt_f64(t.radius),
                        fmt_f64(t.displacement),
                        t.within,
                        csv_text(t.error.as_deref())
                    );
                }
                let completed = report.trials.iter().filter(|t| t.error.is_none()).count();
                Ok(SimulationOutcome {
                    certificates: json!({ "all_within": report.all_within, "max_ratio": report.max_ratio }),
                    results: to_json(&report)?,
                    csv,
                    completed,
                    total: report.trials.len(),
                })
            }
            Self::Convergence {
                distribution,
                v_grid,
                trials,
                seed,
            } => {
                let config = ExperimentConfig {
                    distribution: distribution.clone(),
                    v_grid: v_grid.clone(),
                    trials: *trials,
                    seed: resolve_seed(*seed)?,
                    epsilon: default_epsilon(),
                    delta: default_delta(),
                };
                let report = convergence_diagnostics(&config).map_err(classify)?;
                let mut csv = String::from("v,trial,seed,median_error,hessian_error\n");
                for t in &report.trials {
                    let _ = writeln!(
                        csv,
                        "{},{},{},{},{}",
                        t.v,
                        t.trial,
                        t.seed,
                        fmt_f64(t.median_error),
                        fmt_f64(t.hessian_error)
                    );
                }
                let total = report.trials.len();
                let completed = report
                    .trials
                    .iter()
                    .filter(|t| t.median_error.is_finite() && t.hessian_error.is_finite())
                    .count();
                Ok(SimulationOutcome {
                    certificates: json!({
                        "median_slope_ok": report.median_slope_ok,
                        "hessian_monotone": report.hessian_monotone,
                    }),
                    results: to_json(&report)?,
                    csv,
                    completed,
                    total,
                })
            }
        }
    }
}

fn to_json<T: serde::Serialize>(v: &T) -> CliResult<Value> {
    serde_json::to_value(v).map_err(|e| CliError::solver(e.to_string()))
}

fn to_vec(p: &Point) -> Vec<f64> {
    p.iter().copied().collect()
}

fn finite_or_null(x: f64) -> Value {
    if x.is_finite() {
        json!(x)
    } else {
        Value::Null
    }
}

/// 17 significant digits, enough to round-trip any `f64`.
pub fn fmt_f64(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.16e}")
    } else {
        String::new()
    }
}

fn csv_text(s: Option<&str>) -> String {
    match s {
        Some(s) => format!("\"{}\"", s.replace('"', "\"\"")),
        None => String::new(),
    }
}

fn pretty(doc: &Value) -> String {
    let mut s = serde_json::to_string_pretty(doc).expect("serializable");
    s.push('\n');
    s
}

fn emit(doc: &Value, output: Option<&Path>) -> CliResult<()> {
    let text = pretty(doc);
    match output {
        Some(path) => write_file(path, &text),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn write_file(path: &Path, text: &str) -> CliResult<()> {
    fs::write(path, text).map_err(|e| CliError::input(format!("cannot write {}: {e}", path.display())))
}

fn read_text(path: &Path) -> CliResult<String> {
    fs::read_to_string(path).map_err(|e| CliError::input(format!("cannot read {}: {e}", path.display())))
}

/// Numeric CSV rows. A first row that does not parse as numbers is taken as a
/// header. Every cell must be a finite real and all rows the same width.
pub fn parse_numeric_csv(text: &str, source: &str) -> CliResult<Vec<Vec<f64>>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_reader(text.as_bytes());
    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut width = None;
    for (index, record) in reader.records().enumerate() {
        let record = record.map_err(|e| CliError::input(format!("{source}: {e}")))?;
        let line = record.position().map_or(index as u64 + 1, |p| p.line());
        if record.iter().all(str::is_empty) {
            continue;
        }
        let parsed: Vec<Option<f64>> = record.iter().map(|c| c.parse::<f64>().ok()).collect();
        if rows.is_empty() && width.is_none() && parsed.iter().all(Option::is_none) {
            width = Some(record.len());
            continue;
        }
        let mut row = Vec::with_capacity(parsed.len());
        for (col, (cell, value)) in record.iter().zip(&parsed).enumerate() {
            match value {
                Some(v) if v.is_finite() => row.push(*v),
                _ => {
                    return Err(CliError::input(format!(
                        "{source}:{line}: column {}: expected a finite number, found {cell:?}",
                        col + 1
                    )))
                }
            }
        }
        match width {
            Some(w) if w != row.len() => {
                return Err(CliError::input(format!(
                    "{source}:{line}: expected {w} columns, found {}",
                    row.len()
                )))
            }
            _ => width = Some(row.len()),
        }
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(CliError::input(format!("{source}: no data rows")));
    }
    Ok(rows)
}

fn read_rows(path: &Path) -> CliResult<Vec<Vec<f64>>> {
    parse_numeric_csv(&read_text(path)?, &path.display().to_string())
}

pub fn read_profile(path: &Path) -> CliResult<VoterProfile> {
    VoterProfile::from_rows(&read_rows(path)?).map_err(|e| CliError::input(format!("{}: {e}", path.display())))
}

fn read_weights(path: &Path) -> CliResult<Vec<f64>> {
    let rows = read_rows(path)?;
    if rows[0].len() != 1 {
        return Err(CliError::input(format!("{}: expected one weight per row", path.display())));
    }
    let w: Vec<f64> = rows.into_iter().map(|r| r[0]).collect();
    if let Some(i) = w.iter().position(|x| *x <= 0.0) {
        return Err(CliError::input(format!("{}: weight {} is not positive", path.display(), i + 1)));
    }
    Ok(w)
}

fn read_spd(path: &Path) -> CliResult<SpdMatrix> {
    matrix_from_rows(&read_rows(path)?, &path.display().to_string())
}

fn read_theta0(arg: &str) -> CliResult<Point> {
    let path = Path::new(arg);
    let rows = if path.is_file() {
        read_rows(path)?
    } else {
        parse_numeric_csv(arg, "--theta0")?
    };
    if rows.len() != 1 {
        return Err(CliError::input("--theta0 must be a single row"));
    }
    Ok(Point::from_vec(rows.into_iter().next().unwrap_or_default()))
}

/// Writes a profile as CSV with 17 significant digits per cell.
pub fn write_profile_csv(profile: &VoterProfile) -> String {
    let mut out = String::new();
    for v in profile.voters() {
        let cells: Vec<String> = v.iter().map(|x| fmt_f64(*x)).collect();
        out.push_str(&cells.join(","));
        out.push('\n');
    }
    out
}
