//! `modelspace`: closed-form norms of compressed Blaschke multipliers,
//! randomized verification sweeps and transfer checks, with JSON reports.

mod instance;
mod report;

use std::fs;
use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use modelspace_core::basicop::{adjoint_norm_identity, assemble_adjoint, dual_path_distance, verify_norm};
use modelspace_core::debranges::{build_space, debranges_identity, verify_norm_b};
use modelspace_core::domains::check_alpha;
use modelspace_core::inner::{InnerFunction, TOL_SV};
use modelspace_core::linalg::random_vector;
use modelspace_core::modelspace::build_basis;
use modelspace_core::parallel::Execution;
use modelspace_core::sweep::{run_sweep, SweepConfig, SweepSummary};
use modelspace_core::transfer::{build_map, check_transfer, TransferTarget};
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use instance::{parse_complex, Instance};
use report::{IdentitySummary, NormOutput, TransferOutput};

const NORM_TOL: f64 = 1e-8;
const TRANSFER_TOL: f64 = 1e-9;
const IDENTITY_TRIALS: usize = 20;
const TRANSFER_SAMPLES: usize = 20;

#[derive(Parser)]
#[command(name = "modelspace", version, about = "Norms of compressed Blaschke multipliers on vector-valued model spaces")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    common: Common,
}

#[derive(Args)]
struct Common {
    /// Largest quadrature grid; overrides MODELSPACE_MAX_GRID.
    #[arg(long, global = true, value_name = "N")]
    grid_n: Option<usize>,
    /// Pass/fail tolerance (norm: 1e-8, verify: 1e-8, transfer: 1e-9).
    #[arg(long, global = true, value_parser = parse_tol)]
    tol: Option<f64>,
    #[arg(long, global = true, default_value_t = 42)]
    seed: u64,
    /// Also write the JSON report to this file.
    #[arg(long, global = true, value_name = "PATH")]
    json_out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Compare the closed-form norm of A_alpha with the assembled operator.
    Norm {
        #[arg(value_name = "INSTANCE")]
        path: PathBuf,
        /// Point of the domain, as RE,IM.
        #[arg(long, allow_hyphen_values = true, value_parser = parse_complex)]
        alpha: [f64; 2],
    },
    /// Randomized sweep over domain x m x degree cells.
    Verify {
        /// Instances per cell.
        #[arg(long, default_value_t = 1)]
        count: usize,
    },
    /// Check a recentring or Cayley transfer for unitarity and norm invariance.
    Transfer {
        #[arg(value_name = "INSTANCE")]
        path: PathBuf,
        #[arg(long, allow_hyphen_values = true, value_parser = parse_complex, default_value = "0,0")]
        alpha: [f64; 2],
        #[arg(long, value_parser = parse_target)]
        target: TransferTarget,
    },
}

fn parse_tol(s: &str) -> Result<f64, String> {
    match s.parse::<f64>() {
        Ok(t) if t.is_finite() && t >= 0.0 => Ok(t),
        _ => Err(format!("tolerance must be a finite non-negative number, got {s:?}")),
    }
}

fn parse_target(s: &str) -> Result<TransferTarget, String> {
    s.parse().map_err(|e: modelspace_core::Error| e.to_string())
}

#[derive(Debug)]
pub enum CliError {
    /// Bad input: unreadable file, schema mismatch, point outside the domain.
    Invalid(String),
    Core(modelspace_core::Error),
    Io(String),
}

impl From<modelspace_core::Error> for CliError {
    fn from(e: modelspace_core::Error) -> Self {
        CliError::Core(e)
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Invalid(s) | CliError::Io(s) => f.write_str(s),
            CliError::Core(e) => write!(f, "{e}"),
        }
    }
}

fn main() -> ExitCode {
    // usage errors are validation errors; exit 2 is reserved for tolerance failures
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    if let Some(n) = cli.common.grid_n {
        // read by the quadrature driver; set before any worker thread exists
        std::env::set_var("MODELSPACE_MAX_GRID", n.to_string());
    }
    let outcome = match &cli.command {
        Command::Norm { path, alpha } => cmd_norm(&cli.common, path, *alpha),
        Command::Verify { count } => cmd_verify(&cli.common, *count),
        Command::Transfer { path, alpha, target } => cmd_transfer(&cli.common, path, *alpha, *target),
    };
    match outcome {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(2),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}

fn emit<T: Serialize>(common: &Common, value: &T) -> Result<(), CliError> {
    let text = serde_json::to_string_pretty(value).map_err(|e| CliError::Io(e.to_string()))?;
    if let Some(path) = &common.json_out {
        fs::write(path, format!("{text}\n")).map_err(|e| CliError::Io(format!("cannot write {}: {e}", path.display())))?;
    }
    let mut out = std::io::stdout().lock();
    writeln!(out, "{text}").map_err(|e| CliError::Io(e.to_string()))
}

fn cmd_norm(common: &Common, path: &std::path::Path, alpha: [f64; 2]) -> Result<bool, CliError> {
    let start = Instant::now();
    let (inst, raw) = instance::load(path)?;
    let a = Complex64::new(alpha[0], alpha[1]);
    check_alpha(inst.domain(), a)?;
    let tol = common.tol.unwrap_or(NORM_TOL);
    let mut rng = ChaCha8Rng::seed_from_u64(common.seed);

    let (space, norm, identity, dual_path) = match &inst {
        Instance::Inner(spec) => {
            let theta = InnerFunction::from_bp(&spec.build()?)?;
            let space = build_basis(&theta)?;
            let norm = verify_norm(&space, a, TOL_SV)?;
            let adj = assemble_adjoint(&space, a)?;
            let mut max_residual: f64 = 0.0;
            for _ in 0..IDENTITY_TRIALS {
                let c = random_vector(&mut rng, space.dim);
                max_residual = max_residual.max(adjoint_norm_identity(&space, &adj, &c)?.residual);
            }
            let identity = IdentitySummary {
                trials: IDENTITY_TRIALS,
                max_residual,
                max_pointwise_residual: None,
                max_complement_residual: None,
            };
            let dual = dual_path_distance(&space, a)?;
            (space, norm, identity, Some(dual))
        }
        Instance::DeBranges(spec) => {
            let db = build_space(&spec.build()?)?;
            let norm = verify_norm_b(&db, a, TOL_SV)?;
            let adj = assemble_adjoint(&db.space, a)?;
            let (mut res, mut point, mut comp) = (0.0f64, 0.0f64, 0.0f64);
            for _ in 0..IDENTITY_TRIALS {
                let c = random_vector(&mut rng, db.dim());
                let r = debranges_identity(&db, &adj, &c)?;
                res = res.max(r.residual);
                point = point.max(r.pointwise_residual);
                comp = comp.max(r.complement_residual);
            }
            let identity = IdentitySummary {
                trials: IDENTITY_TRIALS,
                max_residual: res,
                max_pointwise_residual: Some(point),
                max_complement_residual: Some(comp),
            };
            (db.space, norm, identity, None)
        }
    };

    let pass = norm.abs_diff.is_finite() && norm.abs_diff < tol;
    let out = NormOutput {
        command: "norm",
        instance_kind: inst.kind_name(),
        instance: raw,
        domain: inst.domain(),
        alpha,
        seed: common.seed,
        tol,
        tol_sv: TOL_SV,
        grid_n: space.grid.size,
        dim: space.dim,
        norm,
        identity,
        dual_path,
        pass,
        wall_time: start.elapsed().as_secs_f64(),
    };
    emit(common, &out)?;
    Ok(pass)
}

fn cmd_verify(common: &Common, count: usize) -> Result<bool, CliError> {
    let cfg = SweepConfig { seed: common.seed, count, tol: common.tol.unwrap_or(NORM_TOL), ..SweepConfig::default() };
    let summary = run_sweep(&cfg, Execution::Parallel);
    print_cells(&summary);
    emit(common, &summary)?;
    Ok(summary.pass)
}

/// Human-readable per-cell table on stderr; stdout carries the JSON.
fn print_cells(summary: &SweepSummary) {
    let mut err = std::io::stderr().lock();
    for c in &summary.cells {
        let _ = writeln!(
            err,
            "{:<5} m={} n={}  instances {:>3}  max|oracle-closed| {:.2e}  max identity {:.2e}  {}",
            c.domain.name(),
            c.m,
            c.n,
            c.instances,
            c.max_abs_diff,
            c.max_identity_residual,
            if c.pass { "ok" } else { "FAIL" }
        );
    }
}

fn cmd_transfer(
    common: &Common,
    path: &std::path::Path,
    alpha: [f64; 2],
    target: TransferTarget,
) -> Result<bool, CliError> {
    let start = Instant::now();
    let (inst, raw) = instance::load(path)?;
    let Instance::Inner(spec) = &inst else {
        return Err(CliError::Invalid("transfers act on inner-function instances, not de Branges pairs".into()));
    };
    let a = Complex64::new(alpha[0], alpha[1]);
    let tol = common.tol.unwrap_or(TRANSFER_TOL);
    let map = build_map(spec.domain, target, a)?;
    let theta = InnerFunction::from_bp(&spec.build()?)?;
    let space = build_basis(&theta)?;
    let mut rng = ChaCha8Rng::seed_from_u64(common.seed);
    let report = check_transfer(&space, &map, TRANSFER_SAMPLES, &mut rng)?;
    let max_residual = report.max_residual();
    let pass = max_residual.is_finite() && max_residual < tol;
    let out = TransferOutput {
        command: "transfer",
        instance: raw,
        target,
        alpha,
        seed: common.seed,
        tol,
        grid_n: space.grid.size,
        samples: TRANSFER_SAMPLES,
        transfer: report,
        max_residual,
        pass,
        wall_time: start.elapsed().as_secs_f64(),
    };
    emit(common, &out)?;
    Ok(pass)
}
