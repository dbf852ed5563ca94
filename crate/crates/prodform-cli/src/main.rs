//! Batch verification and classification tool for immersions into products
//! of two space forms.
//!
//! Exit codes: 0 all checks pass, 1 a tolerance was exceeded, 2 input error
//! (parse or validation), 3 internal geometry inconsistency.

use clap::{Args, Parser, Subcommand};
use prodform::error::Error;
use prodform::scenario::{self, CheckKind, Scenario};
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(
    name = "prodform",
    version,
    about = "Verify and classify immersions into products of space forms"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct CommonOpts {
    /// Override the finite-difference step.
    #[arg(long)]
    fd_step: Option<f64>,
    /// Override the grid points per axis.
    #[arg(long)]
    grid: Option<usize>,
    /// Write the JSON report to this path.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Override the algebraic-identity tolerance.
    #[arg(long)]
    tol_algebraic: Option<f64>,
    /// Override the differential-identity tolerance.
    #[arg(long)]
    tol_differential: Option<f64>,
    /// Override the fundamental-equation tolerance.
    #[arg(long)]
    tol_equations: Option<f64>,
    /// Override the parallelism tolerance.
    #[arg(long)]
    tol_parallel: Option<f64>,
    /// Override the umbilicity tolerance.
    #[arg(long)]
    tol_umbilic: Option<f64>,
    /// Override the zero-tensor tolerance.
    #[arg(long)]
    tol_zero: Option<f64>,
    /// Override the kernel/eigenvalue band.
    #[arg(long)]
    tol_rank: Option<f64>,
    /// Override the subbundle-parallelism tolerance.
    #[arg(long)]
    tol_reduction: Option<f64>,
}

#[derive(Subcommand)]
enum Command {
    /// Run every requested check of a scenario file.
    Run {
        /// Scenario file path.
        file: PathBuf,
        #[command(flatten)]
        common: CommonOpts,
    },
    /// List the gallery presets with parameters and expected cases.
    Gallery,
    /// Run a scenario restricted to a subset of its checks.
    Check {
        /// Scenario file path.
        file: PathBuf,
        /// Comma-separated subset of checks to run.
        #[arg(long, value_delimiter = ',')]
        only: Vec<String>,
        #[command(flatten)]
        common: CommonOpts,
    },
}

fn apply_overrides(scn: &mut Scenario, common: &CommonOpts) {
    if let Some(step) = common.fd_step {
        scn.fd.fd_step = step;
    }
    if let Some(grid) = common.grid {
        scn.grid_per_axis = grid;
    }
    if let Some(t) = common.tol_algebraic {
        scn.tolerances.algebraic = t;
    }
    if let Some(t) = common.tol_differential {
        scn.tolerances.differential = t;
    }
    if let Some(t) = common.tol_equations {
        scn.tolerances.equations = t;
    }
    if let Some(t) = common.tol_parallel {
        scn.tolerances.parallel = t;
    }
    if let Some(t) = common.tol_umbilic {
        scn.tolerances.umbilic = t;
    }
    if let Some(t) = common.tol_zero {
        scn.tolerances.zero = t;
    }
    if let Some(t) = common.tol_rank {
        scn.tolerances.rank = t;
    }
    if let Some(t) = common.tol_reduction {
        scn.tolerances.reduction = t;
    }
}

fn exit_code_for(err: &Error) -> u8 {
    match err {
        Error::Parse { .. } | Error::Validation(_) | Error::DimensionMismatch { .. } => 2,
        Error::OffQuadric { .. }
        | Error::Unsupported(_)
        | Error::InputContract(_)
        | Error::InsufficientMargin { .. } => 2,
        Error::GeometryInconsistency(_)
        | Error::DegenerateImmersion { .. }
        | Error::NotIsometric(_) => 3,
    }
}

fn run_file(file: &PathBuf, only: Option<&[String]>, common: &CommonOpts) -> ExitCode {
    let text = match std::fs::read_to_string(file) {
        Ok(t) => t,
        Err(e) => {
            eprintln!("error: cannot read {}: {e}", file.display());
            return ExitCode::from(2);
        }
    };
    let mut scn = match Scenario::parse(&text) {
        Ok(s) => s,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };
    apply_overrides(&mut scn, common);
    if let Some(names) = only {
        let subset: Result<Vec<CheckKind>, _> =
            names.iter().map(|n| CheckKind::from_name(n)).collect();
        match subset {
            Ok(mut kinds) => {
                kinds.sort();
                kinds.dedup();
                if kinds.is_empty() {
                    eprintln!("error: --only selected no checks");
                    return ExitCode::from(2);
                }
                scn.checks = kinds;
            }
            Err(e) => {
                eprintln!("error: {e}");
                return ExitCode::from(2);
            }
        }
    }
    match scenario::run_scenario(&scn) {
        Ok(report) => {
            print!("{}", report.summary());
            if let Some(path) = &common.out {
                if let Err(e) = std::fs::write(path, report.to_json()) {
                    eprintln!("error: cannot write {}: {e}", path.display());
                    return ExitCode::from(2);
                }
            } else {
                println!("{}", report.to_json());
            }
            if report.passed() {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code_for(&e))
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::Run { file, common } => run_file(&file, None, &common),
        Command::Gallery => {
            print!("{}", scenario::list_gallery());
            ExitCode::SUCCESS
        }
        Command::Check { file, only, common } => run_file(&file, Some(&only), &common),
    }
}
