//! Experiment runner for the `volterra` library: JSON configs in, CSV and
//! JSON artifacts out.

pub mod config;
pub mod error;
pub mod runner;
pub mod sweep;

use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};

pub use error::CliError;

#[derive(Debug, Parser)]
#[command(
    name = "volterra",
    version,
    about = "Run Volterra operator experiments from a JSON config"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,

    /// Output directory.
    #[arg(
        long,
        global = true,
        env = "VOLTERRA_OUT",
        default_value = "volterra-out"
    )]
    pub out: PathBuf,

    /// Worker threads (default: one per core).
    #[arg(long, global = true)]
    pub jobs: Option<usize>,

    /// Overrides every job's convergence tolerance.
    #[arg(long, global = true)]
    pub tol_conv: Option<f64>,

    /// Overrides every job's step budget.
    #[arg(long, global = true)]
    pub max_steps: Option<usize>,

    #[arg(long, short, global = true)]
    pub quiet: bool,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run every job of a config.
    Run { config: PathBuf },
    /// Re-run the config once per value of one axis.
    Sweep {
        config: PathBuf,
        #[arg(long, value_enum)]
        axis: sweep::Axis,
        /// Comma-separated axis values.
        #[arg(long, value_delimiter = ',', required = true)]
        values: Vec<u64>,
    },
}

fn overrides(cli: &Cli) -> config::Overrides {
    config::Overrides {
        tol_conv: cli.tol_conv,
        max_steps: cli.max_steps,
    }
}

/// Executes a parsed command line and returns the process exit code.
pub fn execute(cli: &Cli) -> i32 {
    if cli.jobs == Some(0) {
        eprintln!("--jobs must be at least 1");
        return 1;
    }
    let result = match &cli.command {
        Command::Run { config } => run(cli, config),
        Command::Sweep {
            config,
            axis,
            values,
        } => config::load(config).and_then(|(cfg, _)| {
            let path = sweep::sweep(&cfg, *axis, values, overrides(cli), &cli.out, cli.jobs)?;
            if !cli.quiet {
                println!("wrote {}", path.display());
            }
            Ok(0)
        }),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("{e}");
            e.exit_code()
        }
    }
}

fn run(cli: &Cli, path: &Path) -> Result<i32, CliError> {
    let (cfg, bytes) = config::load(path)?;
    let jobs = config::prepare(&cfg, overrides(cli))?;
    let opts = runner::RunOptions {
        out: cli.out.clone(),
        threads: cli.jobs,
        quiet: cli.quiet,
    };
    let entries = runner::run(&jobs, path, &bytes, &opts)?;
    if entries.iter().any(|e| e.status != "ok") {
        eprint!("{}", runner::error_table(&entries));
        return Ok(2);
    }
    Ok(0)
}
