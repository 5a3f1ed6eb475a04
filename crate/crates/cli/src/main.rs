//! psdocalc: spectral pseudodifferential calculus workbench on finite metric
//! measure spaces.
//!
//! Exit codes: 0 success, 2 config error, 3 artifact error, 4 tolerance
//! failure. The PSDOCALC_WORKERS environment variable sets the worker-pool
//! size (defaults to the number of cores).

mod artifacts;
mod commands;
mod config;
mod errors;
mod recipes;
mod report;
mod spacefile;
mod symfile;
mod tolerance;
mod witness;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use crate::commands::{KindArg, MeasureArg};
use crate::errors::{CliError, CliResult};

#[derive(Parser)]
#[command(
    name = "psdocalc",
    version,
    about = "Pseudodifferential operator experiments on finite metric measure spaces"
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run the experiment described by a TOML config file
    Run {
        /// Path to the config file
        config: PathBuf,
    },
    /// Summarize a completed run directory into summary.txt / summary.csv
    Report {
        /// Artifact directory written by `run`
        dir: PathBuf,
    },
    /// Build or inspect spaces
    #[command(subcommand)]
    Space(SpaceCmd),
    /// Symbol file utilities
    #[command(subcommand)]
    Sym(SymCmd),
}

#[derive(Subcommand)]
enum SpaceCmd {
    /// Build a space and save it as a JSON space file
    Build {
        #[arg(long, value_enum)]
        kind: KindArg,
        /// Point count (cycle, path)
        #[arg(long)]
        n: Option<usize>,
        /// Grid width (grid-torus)
        #[arg(long)]
        nx: Option<usize>,
        /// Grid height (grid-torus)
        #[arg(long)]
        ny: Option<usize>,
        /// Depth (binary-tree)
        #[arg(long)]
        levels: Option<usize>,
        /// Refinement level (sierpinski)
        #[arg(long)]
        level: Option<usize>,
        #[arg(long, value_enum, default_value_t = MeasureArg::Counting)]
        measure: MeasureArg,
        /// Output path for the space file
        #[arg(long)]
        out: PathBuf,
    },
    /// Print geometry statistics of a saved space file
    Stats {
        /// Space file written by `space build`
        file: PathBuf,
    },
}

#[derive(Subcommand)]
enum SymCmd {
    /// Parse a symbol file and echo its class and expression
    Parse {
        /// Symbol file (# comments, optional `class:` header, expression)
        file: PathBuf,
    },
}

fn init_workers() -> CliResult<()> {
    let v = match std::env::var("PSDOCALC_WORKERS") {
        Err(std::env::VarError::NotPresent) => return Ok(()),
        Err(e) => return Err(CliError::Config(format!("PSDOCALC_WORKERS: {e}"))),
        Ok(v) => v,
    };
    let k: usize = v
        .parse()
        .ok()
        .filter(|&k| k > 0)
        .ok_or_else(|| {
            CliError::Config(format!("PSDOCALC_WORKERS must be a positive integer, got {v:?}"))
        })?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(k)
        .build_global()
        .map_err(|e| CliError::Config(format!("worker pool: {e}")))
}

fn dispatch(cli: Cli) -> CliResult<()> {
    match cli.cmd {
        Cmd::Run { config } => recipes::run_config(&config),
        Cmd::Report { dir } => report::report_dir(&dir),
        Cmd::Space(SpaceCmd::Build { kind, n, nx, ny, levels, level, measure, out }) => {
            commands::space_build(kind, n, nx, ny, levels, level, measure, &out)
        }
        Cmd::Space(SpaceCmd::Stats { file }) => commands::space_stats(&file),
        Cmd::Sym(SymCmd::Parse { file }) => commands::sym_parse(&file),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Err(e) = init_workers().and_then(|()| dispatch(cli)) {
        eprintln!("{e}");
        return ExitCode::from(e.exit_code());
    }
    ExitCode::SUCCESS
}
