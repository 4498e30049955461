//! Subcommands of the `kloop` binary. Each takes a parsed [`RunConfig`] and
//! writes its artifacts under the resolved output directory.
//!
//! Exit codes: 0 success, 1 numerical failure or failed check, 2 bad
//! configuration or input file.

pub mod config;
pub mod svg;

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::ops::ControlFlow;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use kloop::loopgeom::read_loop_file;
use kloop::mountainpass::{
    denjoy_quotients, estimate_c, lambda_sweep_with, refine_critical, CriticalPointResult, LambdaSweep,
    RefineMode, SweepOptions,
};
use kloop::paths::initial_path;
use kloop::verify::{verify_loop, VerificationReport};
use kloop::{CurvatureField, LoopCurve};
use serde::Serialize;

pub use config::RunConfig;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Config(String),
    #[error("{0}")]
    Input(String),
    #[error(transparent)]
    Numerical(#[from] kloop::Error),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) | CliError::Input(_) => 2,
            CliError::Numerical(_) | CliError::Io(_) => 1,
        }
    }
}

fn require_lambda(cfg: &RunConfig, what: &str) -> Result<f64, CliError> {
    cfg.lambda
        .ok_or_else(|| CliError::Config(format!("{what} needs a single lambda, not lambda_grid")))
}

fn write_file(dir: &Path, name: &str, contents: &str) -> Result<PathBuf, CliError> {
    fs::create_dir_all(dir)?;
    let path = dir.join(name);
    fs::write(&path, contents)?;
    Ok(path)
}

fn to_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("artifacts serialise");
    s.push('\n');
    s
}

#[derive(Debug, Clone, Serialize)]
pub struct EstimateSummary {
    pub c_estimate: f64,
    pub argmax_s: f64,
    pub grad_dual_norm_at_max: f64,
    pub iterations: usize,
    pub converged: bool,
    pub path_max_energy: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct SolveReport {
    pub field: String,
    pub lambda: f64,
    pub n: usize,
    pub seed: u64,
    pub estimate: EstimateSummary,
    pub critical: CriticalPointResult,
    pub verification: VerificationReport,
    pub success: bool,
}

/// Mountain-pass estimate, ridge refinement and verification at one `lambda`.
///
/// Writes `result.json`, `loop.csv`, `loop.json`, `loop.svg` and
/// `path_energies.csv`. Numerical errors before a loop exists are returned;
/// a loop that fails to converge or verify is written and reported through
/// `success`.
pub fn cmd_solve(cfg: &RunConfig) -> Result<SolveReport, CliError> {
    let lambda = require_lambda(cfg, "solve")?;
    let field = cfg.build_field()?;
    let range = cfg.path.lambda_range.unwrap_or((lambda, lambda));
    let path = initial_path(&field, range, cfg.path.constructor, cfg.path.nodes, cfg.n)?;
    let est = estimate_c(&path, &field, lambda, &cfg.solver)?;
    let critical = refine_critical(&est.argmax_loop, &field, lambda, &cfg.solver, RefineMode::Ridge)?;
    let verification = verify_loop(&critical.loop_curve, &field, lambda, &cfg.verify)?;
    let success = critical.converged && verification.passed();

    let out = cfg.resolved_output_dir();
    let u = &critical.loop_curve;
    write_file(&out, "loop.csv", &u.to_csv())?;
    write_file(&out, "loop.json", &u.to_json())?;
    write_file(&out, "loop.svg", &svg::render(u, &field))?;
    write_file(&out, "path_energies.csv", &est.path_final.energies_csv(&field, lambda))?;
    let report = SolveReport {
        field: field.name().to_string(),
        lambda,
        n: cfg.n,
        seed: cfg.seed,
        estimate: EstimateSummary {
            c_estimate: est.c_estimate,
            argmax_s: est.argmax_s,
            grad_dual_norm_at_max: est.grad_dual_norm_at_max,
            iterations: est.iterations,
            converged: est.converged,
            path_max_energy: est.path_max_energy,
        },
        critical,
        verification,
        success,
    };
    write_file(&out, "result.json", &to_json(&report))?;
    Ok(report)
}

/// Sweep over the (deduplicated) grid.
///
/// `sweep.csv` is written row by row as runs finish, so an interrupted
/// sweep leaves a valid prefix; flags there are provisional (`false`) until
/// the final rewrite. Per-run results go to `runs/lambda_NNN.json`.
/// `stop_after` ends the sweep after that many entries.
pub fn cmd_sweep(cfg: &RunConfig, stop_after: Option<usize>) -> Result<LambdaSweep, CliError> {
    let (grid, dropped) = cfg
        .dedup_grid()
        .ok_or_else(|| CliError::Config("sweep needs lambda_grid".into()))?;
    if !dropped.is_empty() {
        eprintln!("warning: dropped duplicate lambda values {dropped:?}");
    }
    let field = cfg.build_field()?;
    let out = cfg.resolved_output_dir();
    let runs = out.join("runs");
    fs::create_dir_all(&runs)?;
    let csv_path = out.join("sweep.csv");
    let mut csv = fs::File::create(&csv_path)?;
    writeln!(csv, "{}", LambdaSweep::csv_header())?;
    csv.flush()?;

    let sweep_opts = SweepOptions {
        path_nodes: cfg.path.nodes,
        loop_nodes: cfg.n,
        constructor: cfg.path.constructor,
        ..Default::default()
    };
    let mut io_error: Option<std::io::Error> = None;
    let mut prev: Option<(f64, f64)> = None;
    let mut count = 0usize;
    let sweep = lambda_sweep_with(&field, &grid, &cfg.solver, &sweep_opts, |e| {
        let quotient = prev
            .map(|(l, c)| denjoy_quotients(&[l, e.lambda], &[c, e.c], 1.0).0[1].expect("second entry"))
            .map(|q| q.to_string())
            .unwrap_or_default();
        prev = Some((e.lambda, e.c));
        let row = format!(
            "{},{},{},false,{},{},{}",
            e.lambda, e.c, quotient, e.converged, e.grad_norm, e.ode_residual
        );
        let written = writeln!(csv, "{row}")
            .and_then(|_| csv.flush())
            .and_then(|_| fs::write(runs.join(format!("lambda_{count:03}.json")), to_json(e)));
        count += 1;
        if let Err(err) = written {
            io_error = Some(err);
            return ControlFlow::Break(());
        }
        match stop_after {
            Some(k) if count >= k => ControlFlow::Break(()),
            _ => ControlFlow::Continue(()),
        }
    })?;
    if let Some(err) = io_error {
        return Err(err.into());
    }
    drop(csv);
    let tmp = out.join("sweep.csv.tmp");
    fs::write(&tmp, sweep.to_csv())?;
    fs::rename(&tmp, &csv_path)?;
    write_file(&out, "sweep.json", &to_json(&sweep))?;
    Ok(sweep)
}

/// Whether every entry of a sweep converged without error.
pub fn sweep_succeeded(sweep: &LambdaSweep) -> bool {
    sweep.entries.iter().all(|e| e.converged && e.error.is_none())
}

fn load_loop(path: &Path) -> Result<LoopCurve, CliError> {
    read_loop_file(path).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))
}

/// Verification report for a loop file at the configured `lambda`.
pub fn cmd_verify(loop_file: &Path, cfg: &RunConfig) -> Result<VerificationReport, CliError> {
    let lambda = require_lambda(cfg, "verify")?;
    let field = cfg.build_field()?;
    let u = load_loop(loop_file)?;
    Ok(verify_loop(&u, &field, lambda, &cfg.verify)?)
}

/// Write `<stem>.svg`, `<stem>.csv` and `<stem>.json` for a loop file.
pub fn cmd_export(loop_file: &Path, cfg: &RunConfig) -> Result<Vec<PathBuf>, CliError> {
    let field: CurvatureField = cfg.build_field()?;
    let u = load_loop(loop_file)?;
    let stem = loop_file
        .file_stem()
        .and_then(|s| s.to_str())
        .unwrap_or("loop");
    let out = cfg.resolved_output_dir();
    Ok(vec![
        write_file(&out, &format!("{stem}.svg"), &svg::render(&u, &field))?,
        write_file(&out, &format!("{stem}.csv"), &u.to_csv())?,
        write_file(&out, &format!("{stem}.json"), &u.to_json())?,
    ])
}

#[derive(Parser)]
#[command(name = "kloop", version, about = "Closed curves with prescribed curvature via mountain-pass search")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve at the single lambda of the config.
    Solve {
        #[arg(long, short)]
        config: PathBuf,
    },
    /// Run the lambda grid of the config.
    Sweep {
        #[arg(long, short)]
        config: PathBuf,
    },
    /// Check a loop file (CSV or JSON) against the config's field and lambda.
    Verify {
        #[arg(long, short)]
        config: PathBuf,
        loop_file: PathBuf,
    },
    /// Render a loop file as SVG, CSV and JSON.
    Export {
        #[arg(long, short)]
        config: PathBuf,
        loop_file: PathBuf,
    },
}

fn report_error(e: &CliError) -> i32 {
    eprintln!("error: {e}");
    e.exit_code()
}

/// Parse `args` (program name first) and run; returns the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    let load = |p: &Path| RunConfig::load(p);
    match cli.command {
        Command::Solve { config } => match load(&config).and_then(|c| cmd_solve(&c)) {
            Ok(r) => {
                println!(
                    "c_estimate {} energy {} grad_dual_norm {:e} ode_residual {:e} converged {} checks {}",
                    r.estimate.c_estimate,
                    r.critical.energy,
                    r.critical.grad_dual_norm,
                    r.critical.ode_residual,
                    r.critical.converged,
                    if r.verification.passed() { "passed" } else { "failed" }
                );
                if !r.critical.converged {
                    eprintln!(
                        "refinement stopped ({:?}) after {} iterations at gradient {:e}",
                        r.critical.stop_reason, r.critical.iterations, r.critical.grad_dual_norm
                    );
                }
                for c in r.verification.details.iter().filter(|c| !c.passed) {
                    eprintln!("check {} failed: {} vs {}", c.name, c.value, c.threshold);
                }
                i32::from(!r.success)
            }
            Err(e) => report_error(&e),
        },
        Command::Sweep { config } => match load(&config).and_then(|c| cmd_sweep(&c, None)) {
            Ok(s) => {
                print!("{}", s.to_csv());
                if let Some(spread) = s.lambda_c_spread {
                    println!("lambda*c relative spread {spread:e}");
                }
                for e in s.entries.iter().filter(|e| e.error.is_some()) {
                    eprintln!("lambda {}: {}", e.lambda, e.error.as_deref().unwrap_or(""));
                }
                i32::from(!sweep_succeeded(&s))
            }
            Err(e) => report_error(&e),
        },
        Command::Verify { config, loop_file } => {
            match load(&config).and_then(|c| cmd_verify(&loop_file, &c)) {
                Ok(r) => {
                    println!("{}", to_json(&r).trim_end());
                    i32::from(!r.passed())
                }
                Err(e) => report_error(&e),
            }
        }
        Command::Export { config, loop_file } => {
            match load(&config).and_then(|c| cmd_export(&loop_file, &c)) {
                Ok(paths) => {
                    for p in paths {
                        println!("{}", p.display());
                    }
                    0
                }
                Err(e) => report_error(&e),
            }
        }
    }
}
