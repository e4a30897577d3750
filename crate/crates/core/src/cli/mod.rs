//! `socest` command-line front end.
//!
//! Exit codes: 0 ok, 2 config, 3 I/O or input data, 4 excitation,
//! 5 reference, 6 misuse.

pub mod commands;
pub mod config;
pub mod io;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Parser, Subcommand};

pub use commands::{
    cmd_compare, cmd_fit_ocv, cmd_run, cmd_simulate, CliError, CompareOutcome, FilterSelection,
    FitOcvOutcome, MedianSummary, RunOutcome, SimulateOutcome, Summary,
};
pub use config::{Config, ConfigError};

/// Environment variable holding the log filter (`error`, `warn`, `info`, `debug`).
pub const LOG_ENV: &str = "SOC_EST_LOG";

#[derive(Debug, Parser)]
#[command(
    name = "socest",
    version,
    about = "Joint Thevenin identification and SOC estimation"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Simulate a drive cycle; writes truth.csv and measured.csv.
    Simulate {
        #[arg(short, long)]
        config: Option<PathBuf>,
        #[arg(short, long)]
        out: PathBuf,
        /// Overrides noise.seed.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Identify OCV with a Rint model and fit the degree-6 polynomial.
    FitOcv {
        input: PathBuf,
        #[arg(short, long)]
        config: Option<PathBuf>,
        /// Coefficient file to write.
        #[arg(short, long)]
        out: PathBuf,
    },
    /// Run the joint estimator on a measured trace.
    Run {
        input: PathBuf,
        #[arg(short, long)]
        config: Option<PathBuf>,
        #[arg(short, long)]
        out: PathBuf,
        /// ekf, hiekf, ahiekf, iahiekf or all (default: run.filters).
        #[arg(long)]
        filter: Option<FilterSelection>,
        /// OCV coefficient file from fit-ocv, replacing ocv.coeffs.
        #[arg(long)]
        ocv: Option<PathBuf>,
    },
    /// Re-run a simulated truth trace across noise seeds.
    Compare {
        /// truth.csv written by `simulate`.
        input: PathBuf,
        #[arg(short, long)]
        config: Option<PathBuf>,
        #[arg(short, long)]
        out: PathBuf,
        #[arg(long, default_value_t = 10)]
        seeds: usize,
        /// Master seed (default: noise.seed).
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        filter: Option<FilterSelection>,
        #[arg(long)]
        ocv: Option<PathBuf>,
    },
}

/// Executes a parsed command, returning the text to print.
pub fn execute(command: &Command) -> Result<String, CliError> {
    let sel = |f: &Option<FilterSelection>| f.unwrap_or(FilterSelection::FromConfig);
    Ok(match command {
        Command::Simulate { config, out, seed } => {
            cmd_simulate(config.as_deref(), out, *seed)?.to_string()
        }
        Command::FitOcv { input, config, out } => {
            cmd_fit_ocv(input, config.as_deref(), out)?.to_string()
        }
        Command::Run {
            input,
            config,
            out,
            filter,
            ocv,
        } => cmd_run(input, config.as_deref(), out, sel(filter), ocv.as_deref())?.to_string(),
        Command::Compare {
            input,
            config,
            out,
            seeds,
            seed,
            filter,
            ocv,
        } => cmd_compare(
            input,
            config.as_deref(),
            out,
            *seeds,
            *seed,
            sel(filter),
            ocv.as_deref(),
        )?
        .to_string(),
    })
}

/// Parses `args`, runs the command and returns the process exit code.
/// Usage errors exit with 6; `--help` and `--version` exit with 0.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 6 } else { 0 };
        }
    };
    match execute(&cli.command) {
        Ok(text) => {
            println!("{}", text.trim_end());
            0
        }
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

/// Installs the `SOC_EST_LOG`-driven logger; later calls are no-ops.
pub fn init_logging() {
    let env = env_logger::Env::new().filter_or(LOG_ENV, "warn");
    let _ = env_logger::Builder::from_env(env)
        .format_timestamp(None)
        .try_init();
}
