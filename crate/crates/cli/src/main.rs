//! `driftfront` command-line front end.
//!
//! Exit codes: 0 success or spreading, 1 vanishing, 2 undecided, 64 usage
//! error, 65 configuration error, 70 numerical or output failure.

// `!(x > 0.0)` also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod commands;
mod config;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use driftfront::freeboundary::Classification;
use driftfront::steady::{bifurcation_scan, first_positive};
use driftfront::thresholds::dichotomy_table;
use driftfront::Error as CoreError;
use rayon::prelude::*;
use serde_json::json;
use thiserror::Error;

use commands::Route;
use config::{ConfigError, RunConfig};
use output::{num, RunDir, Table};

const EXIT_VANISHING: u8 = 1;
const EXIT_UNDECIDED: u8 = 2;
const EXIT_USAGE: u8 = 64;
const EXIT_CONFIG: u8 = 65;
const EXIT_SOFTWARE: u8 = 70;

#[derive(Debug, Parser)]
#[command(name = "driftfront", version, about = "Two-species nonlocal system with expanding free boundaries")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct Common {
    /// TOML configuration file.
    #[arg(short, long)]
    config: PathBuf,
    /// Output base directory (overrides `output.directory`).
    #[arg(short, long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Integrate the free-boundary problem and classify the run.
    Simulate {
        #[command(flatten)]
        common: Common,
        /// Write full-field snapshots at every sample.
        #[arg(long)]
        snapshots: bool,
    },
    /// Principal eigenvalue of the linearization on [-Z, Z].
    Eigen {
        #[command(flatten)]
        common: Common,
        /// Half-length Z (defaults to h0).
        #[arg(long, conflicts_with = "sweep_z")]
        z: Option<f64>,
        /// Sweep Z over start:end:step (inclusive).
        #[arg(long, value_parser = parse_sweep)]
        sweep_z: Option<Sweep>,
        #[arg(long, value_enum, default_value = "direct")]
        route: Route,
    },
    /// Homogeneous coexistence state and, optionally, the bifurcation branch.
    Steady {
        #[command(flatten)]
        common: Common,
        /// Branch over coupling scales lo:hi:n.
        #[arg(long, value_parser = parse_points)]
        bifurcation: Option<Points>,
    },
    /// Bracket the critical expansion rate, or tabulate (mu, h0) outcomes.
    Threshold {
        #[command(flatten)]
        common: Common,
        /// Classify the grid `threshold.table_mu` x `threshold.table_h0` instead.
        #[arg(long)]
        table: bool,
    },
    /// Repeat one operation over a list of values of a single key.
    Sweep {
        #[command(flatten)]
        common: Common,
        /// Key to vary, `section.key` or a bare key such as `d1`.
        #[arg(long)]
        param: String,
        #[arg(long, value_delimiter = ',', num_args = 1.., required = true)]
        values: Vec<f64>,
        #[arg(long, value_enum)]
        op: SweepOp,
        /// Worker threads.
        #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u16).range(1..))]
        jobs: u16,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
enum SweepOp {
    Eigen,
    Steady,
    Simulate,
    Threshold,
}

#[derive(Debug, Clone, PartialEq)]
struct Sweep(Vec<f64>);

#[derive(Debug, Clone, PartialEq)]
struct Points(Vec<f64>);

fn parse_triple(s: &str) -> Result<(f64, f64, f64), String> {
    let parts: Vec<&str> = s.split(':').collect();
    if parts.len() != 3 {
        return Err(format!("expected three ':'-separated numbers, got '{s}'"));
    }
    let mut out = [0.0; 3];
    for (slot, p) in out.iter_mut().zip(&parts) {
        *slot = p.trim().parse().map_err(|_| format!("'{p}' is not a number"))?;
    }
    Ok((out[0], out[1], out[2]))
}

fn parse_sweep(s: &str) -> Result<Sweep, String> {
    let (a, b, step) = parse_triple(s)?;
    if !(step > 0.0) || !(b >= a) || !(a > 0.0) {
        return Err(format!("need 0 < start <= end and step > 0, got {s}"));
    }
    let n = ((b - a) / step + 1e-9).floor() as usize;
    Ok(Sweep((0..=n).map(|k| a + k as f64 * step).collect()))
}

fn parse_points(s: &str) -> Result<Points, String> {
    let (lo, hi, n) = parse_triple(s)?;
    if n < 2.0 || n.fract() != 0.0 || !(hi > lo) {
        return Err(format!("need lo < hi and an integer n >= 2, got {s}"));
    }
    let n = n as usize;
    Ok(Points((0..n).map(|k| lo + (hi - lo) * k as f64 / (n - 1) as f64).collect()))
}

#[derive(Debug, Error)]
enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Config(#[from] ConfigError),
    #[error("numerical failure: {0}")]
    Numerical(#[from] CoreError),
    #[error("output: {0}")]
    Io(#[from] std::io::Error),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Usage(_) => EXIT_USAGE,
            CliError::Config(_) => EXIT_CONFIG,
            CliError::Numerical(_) | CliError::Io(_) => EXIT_SOFTWARE,
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { EXIT_USAGE } else { 0 });
        }
    };
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.code())
        }
    }
}

fn open(common: &Common, subcommand: &str) -> Result<(RunConfig, RunDir), CliError> {
    open_with(common, subcommand, |_| {})
}

/// Loads the config, applies command-line overrides and echoes the result.
fn open_with(common: &Common, subcommand: &str, adjust: impl FnOnce(&mut RunConfig)) -> Result<(RunConfig, RunDir), CliError> {
    let mut cfg = RunConfig::load(&common.config)?;
    adjust(&mut cfg);
    let base = common.out.clone().unwrap_or_else(|| cfg.output.directory.clone());
    let mut dir = RunDir::create(&base, subcommand)?;
    dir.write("effective_config.toml", cfg.to_toml().as_bytes())?;
    Ok((cfg, dir))
}

fn close(dir: RunDir) -> Result<PathBuf, CliError> {
    let path = dir.finish()?;
    println!("output: {}", path.display());
    Ok(path)
}

fn run(cli: Cli) -> Result<u8, CliError> {
    match cli.command {
        Command::Simulate { common, snapshots } => simulate(&common, snapshots),
        Command::Eigen { common, z, sweep_z, route } => eigen(&common, z, sweep_z, route),
        Command::Steady { common, bifurcation } => steady(&common, bifurcation),
        Command::Threshold { common, table } => threshold(&common, table),
        Command::Sweep { common, param, values, op, jobs } => sweep(&common, &param, &values, op, jobs as usize),
    }
}

fn class_code(class: Classification) -> u8 {
    match class {
        Classification::Spreading => 0,
        Classification::Vanishing => EXIT_VANISHING,
        Classification::Undecided => EXIT_UNDECIDED,
    }
}

fn simulate(common: &Common, snapshots: bool) -> Result<u8, CliError> {
    let (cfg, mut dir) = open_with(common, "simulate", |c| c.output.snapshots |= snapshots)?;
    let sim = commands::simulate(&cfg)?;
    let trace = &sim.trace;
    let mut table = Table::new(&["t", "g", "h", "phi", "sup_u", "sup_v"]);
    for s in &trace.samples {
        table.push(vec![num(s.t), num(s.g), num(s.h), num(s.phi), num(s.sup_u), num(s.sup_v)]);
    }
    dir.write_table("trace.csv", &table)?;
    if cfg.output.snapshots {
        let nodes = sim.grid.nodes();
        let mut header = vec!["t".to_string()];
        header.extend((0..nodes.len()).map(|i| format!("x{i}")));
        let mut grid_table = Table::new(&["index", "x"]);
        for (i, &x) in nodes.iter().enumerate() {
            grid_table.push(vec![i.to_string(), num(x)]);
        }
        dir.write_table("nodes.csv", &grid_table)?;
        for (name, field) in [("snapshots_u.csv", 0), ("snapshots_v.csv", 1)] {
            let mut t = Table::new(&header);
            for snap in &trace.snapshots {
                let values = if field == 0 { &snap.u } else { &snap.v };
                let mut row = vec![num(snap.t)];
                row.extend(values.iter().map(|&x| num(x)));
                t.push(row);
            }
            dir.write_table(name, &t)?;
        }
    }
    let last = &trace.final_state;
    dir.write_json(
        "summary.json",
        &json!({
            "classification": trace.classification(),
            "evidence": trace.verdict.evidence,
            "t": last.t,
            "g": last.g,
            "h": last.h,
            "sup_u": last.sup_u(),
            "sup_v": last.sup_v(),
            "dt": trace.dt,
            "steps": last.steps,
            "clamped": last.clamped,
            "critical_half_length": sim.critical_half_length,
            "coexistence": sim.coexistence,
        }),
    )?;
    close(dir)?;
    println!("{}: {}", trace.classification().as_str(), trace.verdict.evidence);
    Ok(class_code(trace.classification()))
}

fn eigen_header() -> [&'static str; 5] {
    ["Z", "lambda_star", "rho_at_zero", "iterations", "residual"]
}

fn eigen_cells(row: &commands::EigenRow) -> Vec<String> {
    vec![num(row.z), num(row.lambda_star), num(row.rho_at_zero), row.iterations.to_string(), num(row.residual)]
}

fn eigen(common: &Common, z: Option<f64>, sweep: Option<Sweep>, route: Route) -> Result<u8, CliError> {
    let (cfg, mut dir) = open(common, "eigen")?;
    let params = cfg.params();
    let grid = cfg.grid()?;
    let zs = match (sweep, z) {
        (Some(Sweep(zs)), _) => zs,
        (None, Some(z)) if z > 0.0 => vec![z],
        (None, Some(z)) => return Err(CliError::Usage(format!("--z must be positive (got {z})"))),
        (None, None) => vec![cfg.model.h0],
    };
    let rows = zs.par_iter().map(|&z| commands::eigen_at(&params, &grid, z, route)).collect::<Result<Vec<_>, _>>()?;
    let mut table = Table::new(&eigen_header());
    for row in &rows {
        table.push(eigen_cells(row));
    }
    dir.write_table("eigen.csv", &table)?;
    close(dir)?;
    for row in &rows {
        println!("Z = {:.6}  lambda* = {:+.10e}  rho(0) = {:.6e}", row.z, row.lambda_star, row.rho_at_zero);
    }
    Ok(0)
}

fn steady(common: &Common, bifurcation: Option<Points>) -> Result<u8, CliError> {
    let (cfg, mut dir) = open(common, "steady")?;
    let report = commands::steady(&cfg)?;
    let (u, v) = report.coexistence.levels();
    let state = report.coexistence.state();
    let mut summary = json!({
        "outcome": if state.is_some() { "positive" } else { "extinct-only" },
        "u_star": u,
        "v_star": v,
        "R0": report.r0,
        "residuals": state.map(|s| s.residuals).unwrap_or([0.0, 0.0]),
        "iterations": state.map(|s| s.iterations),
        "method": state.map(|s| s.method),
    });
    if let Some(spatial) = &report.spatial {
        let (cu, cv) = spatial.centre();
        summary["spatial"] = json!({
            "outcome": spatial.outcome,
            "half_length": spatial.half_length,
            "centre": [cu, cv],
            "sup": spatial.sup(),
            "residual": spatial.residual,
            "time": spatial.time,
        });
        let mut table = Table::new(&["x", "u", "v"]);
        for i in 0..spatial.x.len() {
            table.push(vec![num(spatial.x[i]), num(spatial.u[i]), num(spatial.v[i])]);
        }
        dir.write_table("spatial.csv", &table)?;
    }
    if let Some(Points(mus)) = bifurcation {
        let branch = bifurcation_scan(&cfg.params(), &mus)?;
        let mut table = Table::new(&["mu", "u_star", "v_star", "residual"]);
        for p in &branch {
            table.push(vec![num(p.mu), num(p.u_star), num(p.v_star), num(p.residual)]);
        }
        dir.write_table("bifurcation.csv", &table)?;
        summary["first_positive_mu"] = json!(first_positive(&branch));
    }
    dir.write_json("steady.json", &summary)?;
    close(dir)?;
    println!("R0 = {}  (u*, v*) = ({u}, {v})", report.r0);
    Ok(0)
}

fn threshold(common: &Common, table: bool) -> Result<u8, CliError> {
    let (cfg, mut dir) = open(common, "threshold")?;
    if table {
        let t = &cfg.threshold;
        let result = dichotomy_table(
            &cfg.params(),
            cfg.grid.dx,
            cfg.grid.window_factor,
            &t.table_mu,
            &t.table_h0,
            cfg.run.horizon,
            &cfg.initial(),
            t.max_doublings,
        )?;
        let mut header = vec!["h0".to_string(), "lambda_h0".into(), "critical_half_length".into()];
        header.extend(result.mu_values.iter().map(|m| format!("mu={}", num(*m))));
        let mut csv = Table::new(&header);
        for row in &result.rows {
            let mut cells = vec![num(row.h0), num(row.lambda_h0), row.critical_half_length.map(num).unwrap_or_default()];
            cells.extend(row.cells.iter().map(|c| c.class.as_str().to_string()));
            csv.push(cells);
        }
        dir.write_table("dichotomy.csv", &csv)?;
        dir.write_json("dichotomy.json", &json!({ "table": result, "monotone": result.is_monotone() }))?;
        close(dir)?;
        println!("monotone: {}", result.is_monotone());
        return Ok(0);
    }
    match commands::threshold(&cfg) {
        Ok(result) => {
            let mut probes = Table::new(&["mu", "phase", "class", "horizon_used", "g", "h", "sup_u", "sup_v", "warning"]);
            for p in &result.probes {
                probes.push(vec![
                    num(p.mu),
                    format!("{:?}", p.phase).to_lowercase(),
                    p.class.as_str().into(),
                    num(p.horizon_used),
                    num(p.g),
                    num(p.h),
                    num(p.sup_u),
                    num(p.sup_v),
                    p.warning.clone().unwrap_or_default(),
                ]);
            }
            dir.write_table("probes.csv", &probes)?;
            dir.write_json("threshold.json", &json!({ "outcome": "bracketed", "result": result }))?;
            close(dir)?;
            println!("mu_hat in ({}, {}]  probes = {}  verified = {}", result.mu_lo, result.mu_hi, result.probe_count, result.verified);
            Ok(0)
        }
        Err(e @ (CoreError::VanishingForAllMu { .. } | CoreError::SpreadingRegardlessOfMu { .. })) => {
            let (outcome, code) = match e {
                CoreError::VanishingForAllMu { .. } => ("vanishing-for-all-mu", EXIT_VANISHING),
                _ => ("spreading-for-all-mu", 0),
            };
            dir.write_json("threshold.json", &json!({ "outcome": outcome, "message": e.to_string() }))?;
            close(dir)?;
            println!("{e}");
            Ok(code)
        }
        Err(e) => Err(e.into()),
    }
}

fn sweep_header(op: SweepOp) -> Vec<&'static str> {
    let tail: &[&str] = match op {
        SweepOp::Eigen => &eigen_header(),
        SweepOp::Steady => &["u_star", "v_star", "R0", "residual_u", "residual_v"],
        SweepOp::Simulate => &["classification", "t", "g", "h", "phi", "sup_u", "sup_v"],
        SweepOp::Threshold => &["mu_lo", "mu_hi", "relative_width", "probe_count", "verified"],
    };
    let mut header = vec!["param", "value"];
    header.extend_from_slice(tail);
    header.push("status");
    header
}

fn sweep_job(cfg: &RunConfig, op: SweepOp) -> Result<Vec<String>, CoreError> {
    Ok(match op {
        SweepOp::Eigen => {
            let row = commands::eigen_at(&cfg.params(), &cfg.grid()?, cfg.model.h0, Route::Direct)?;
            eigen_cells(&row)
        }
        SweepOp::Steady => {
            let r = commands::steady(cfg)?;
            let (u, v) = r.coexistence.levels();
            let res = r.coexistence.state().map(|s| s.residuals).unwrap_or([0.0, 0.0]);
            vec![num(u), num(v), num(r.r0), num(res[0]), num(res[1])]
        }
        SweepOp::Simulate => {
            let sim = commands::simulate(cfg)?;
            let s = sim.trace.samples.last().expect("a trace has its initial sample");
            vec![sim.trace.classification().as_str().into(), num(s.t), num(s.g), num(s.h), num(s.phi), num(s.sup_u), num(s.sup_v)]
        }
        SweepOp::Threshold => {
            let r = commands::threshold(cfg)?;
            vec![num(r.mu_lo), num(r.mu_hi), num(r.relative_width), r.probe_count.to_string(), r.verified.to_string()]
        }
    })
}

fn sweep(common: &Common, param: &str, values: &[f64], op: SweepOp, jobs: usize) -> Result<u8, CliError> {
    let cfg = RunConfig::load(&common.config)?;
    let configs = values
        .iter()
        .map(|&v| cfg.with_value(param, v).map_err(|e| CliError::Usage(format!("--param {param} = {v}: {e}"))))
        .collect::<Result<Vec<_>, _>>()?;
    let base = common.out.clone().unwrap_or_else(|| cfg.output.directory.clone());
    let mut dir = RunDir::create(&base, "sweep")?;
    dir.write("effective_config.toml", cfg.to_toml().as_bytes())?;
    let pool = rayon::ThreadPoolBuilder::new().num_threads(jobs).build().map_err(|e| CliError::Usage(e.to_string()))?;
    let header = sweep_header(op);
    let width = header.len() - 3;
    let outcomes: Vec<Result<Vec<String>, CoreError>> = pool.install(|| configs.par_iter().map(|c| sweep_job(c, op)).collect());
    let mut table = Table::new(&header);
    let mut failed = 0;
    for (value, outcome) in values.iter().zip(outcomes) {
        let mut row = vec![param.to_string(), num(*value)];
        match outcome {
            Ok(cells) => {
                row.extend(cells);
                row.push("ok".into());
            }
            Err(e) => {
                failed += 1;
                row.extend(std::iter::repeat_n(String::new(), width));
                row.push(e.to_string());
            }
        }
        table.push(row);
    }
    dir.write_table("sweep.csv", &table)?;
    close(dir)?;
    println!("{} of {} jobs succeeded", table.len() - failed, table.len());
    Ok(if failed == 0 { 0 } else { EXIT_SOFTWARE })
}

