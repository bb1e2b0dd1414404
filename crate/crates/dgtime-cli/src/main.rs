//! Command-line front end for the DG time integrator: solve a configured
//! problem, run convergence studies, benchmark conditioning and iteration
//! counts, or export the assembled matrices.
//!
//! Exit codes: 0 success, 2 configuration error, 3 solver failure,
//! 4 I/O or parse error. Set RAYON_NUM_THREADS to bound the worker pool used
//! by concurrent study levels.

// Validation predicates are negated comparisons so NaN inputs fail them.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod commands;
mod config;
mod problem;

use clap::{Parser, Subcommand};
use std::path::PathBuf;
use std::process::ExitCode;

use config::{load_config, MethodChoice, Overrides};

#[derive(Debug)]
pub struct CliError {
    message: String,
    code: u8,
}

impl CliError {
    pub fn config(message: String) -> Self {
        CliError { message, code: 2 }
    }

    pub fn solver(message: String) -> Self {
        CliError { message, code: 3 }
    }

    pub fn io(message: String) -> Self {
        CliError { message, code: 4 }
    }

    pub fn with_context(mut self, context: String) -> Self {
        self.message = format!("{context}: {}", self.message);
        self
    }
}

impl From<dgtime::Error> for CliError {
    fn from(e: dgtime::Error) -> Self {
        let code = match &e {
            dgtime::Error::Config(_) | dgtime::Error::Validation(_) | dgtime::Error::Range(_) => 2,
            dgtime::Error::Assembly(_) => 2,
            dgtime::Error::Solver { .. } => 3,
            dgtime::Error::Parse { .. } | dgtime::Error::Io(_) => 4,
        };
        CliError {
            message: e.to_string(),
            code,
        }
    }
}

#[derive(Parser)]
#[command(
    name = "dgtime",
    version,
    about = "Discontinuous Galerkin time integration for P u'' + L u' + K u = f",
    after_help = "Configuration comes from a TOML file (--config); the flags below override it."
)]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Run configuration file.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,

    /// Output directory (overrides output.dir).
    #[arg(long, global = true, value_name = "DIR")]
    out: Option<PathBuf>,

    /// Slab solver (overrides solver.method).
    #[arg(long, global = true, value_parser = ["direct", "gmres"])]
    solver: Option<String>,

    /// GMRES relative tolerance (overrides solver.tol).
    #[arg(long, global = true, value_name = "REAL")]
    tol: Option<f64>,

    /// Temporal polynomial degree (overrides time.degree).
    #[arg(long, global = true, value_name = "INT")]
    degree: Option<usize>,

    /// Slab length (overrides time.dt / time.n_slabs).
    #[arg(long, global = true, value_name = "REAL")]
    dt: Option<f64>,

    /// Refinement levels for studies (overrides study.levels).
    #[arg(long, global = true, value_name = "INT")]
    levels: Option<usize>,

    /// Seed for the benchmark's random right-hand side.
    #[arg(long, global = true, value_name = "INT", default_value_t = 0)]
    seed: u64,
}

#[derive(Subcommand)]
enum Command {
    /// March the configured problem and write trajectory, diagnostics, and
    /// energy CSV reports.
    Solve,
    /// Run the configured refinement study against the built-in exact
    /// solution and write convergence CSV reports.
    Convergence,
    /// Report condition numbers of the monolithic and reduced slab matrices
    /// and unpreconditioned GMRES iteration counts.
    Benchmark,
    /// Write the assembled P, L, K (and initial data) as Matrix Market files.
    ExportMatrices,
}

fn run(cli: &Cli) -> Result<(), CliError> {
    let config_path = cli
        .config
        .as_ref()
        .ok_or_else(|| CliError::config("--config PATH is required".into()))?;
    let overrides = Overrides {
        out: cli.out.clone(),
        solver: cli.solver.as_deref().map(|s| match s {
            "gmres" => MethodChoice::Gmres,
            _ => MethodChoice::Direct,
        }),
        tol: cli.tol,
        degree: cli.degree,
        dt: cli.dt,
        levels: cli.levels,
    };
    let config = load_config(config_path, &overrides)?;
    match cli.command {
        Command::Solve => commands::cmd_solve(&config),
        Command::Convergence => commands::cmd_convergence(&config),
        Command::Benchmark => commands::cmd_benchmark(&config, cli.seed),
        Command::ExportMatrices => commands::cmd_export_matrices(&config),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.message);
            ExitCode::from(e.code)
        }
    }
}
