//! `dpmom` command-line driver.
//!
//! Exit codes: 0 success, 1 usage error, 2 data error, 3 runtime fault.
//! Primary outputs never contain wall-clock times; those go to
//! `*.timing.json` / `timing.csv` sidecars so reruns are byte-identical.

use std::ffi::OsString;
use std::fmt;

use clap::{Parser, Subcommand};

pub mod commands;
pub mod io;
pub mod svg;

pub const EXIT_OK: u8 = 0;
pub const EXIT_USAGE: u8 = 1;
pub const EXIT_DATA: u8 = 2;
pub const EXIT_RUNTIME: u8 = 3;

#[derive(Parser, Debug)]
#[command(name = "dpmom", version, about = "Robust nonparametric clustering with DP-MoM")]
pub struct Cli {
    /// Worker threads for tuning and benchmarks (default: all cores).
    #[arg(long, global = true)]
    pub threads: Option<usize>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Generate synthetic datasets.
    Gen(commands::gen::GenArgs),
    /// Fit one clustering.
    Cluster(commands::cluster::ClusterArgs),
    /// Grid-search lambda and the bucket count.
    Tune(commands::tune::TuneArgs),
    /// Run a benchmark suite and its significance tests.
    Bench(commands::bench::BenchArgs),
    /// Significance tests on an ARI table.
    Stats(commands::stats::StatsArgs),
    /// Render SVG figures.
    Plot(commands::plot::PlotArgs),
    /// List or download manifest datasets.
    Datasets(commands::datasets::DatasetsArgs),
}

/// A bad flag combination; reported with exit code 1.
#[derive(Debug)]
pub struct UsageError(pub String);

impl fmt::Display for UsageError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

pub fn usage(msg: impl Into<String>) -> anyhow::Error {
    UsageError(msg.into()).into()
}

/// Exit code for an error chain.
pub fn exit_code(err: &anyhow::Error) -> u8 {
    use dpmom_core::Error as E;
    for cause in err.chain() {
        if cause.is::<UsageError>() {
            return EXIT_USAGE;
        }
        if let Some(e) = cause.downcast_ref::<E>() {
            return match e {
                E::Parse { .. }
                | E::Io { .. }
                | E::EmptyData(_)
                | E::DimensionMismatch { .. }
                | E::DegenerateData(_) => EXIT_DATA,
                E::Contract(_) => EXIT_USAGE,
                _ => EXIT_RUNTIME,
            };
        }
        if cause.is::<std::io::Error>() || cause.is::<csv::Error>() || cause.is::<serde_json::Error>() {
            return EXIT_DATA;
        }
    }
    EXIT_RUNTIME
}

pub fn execute(cli: Cli) -> anyhow::Result<()> {
    if let Some(n) = cli.threads {
        // Fails only if the pool was already built, which is harmless.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    match cli.command {
        Command::Gen(a) => commands::gen::run(&a),
        Command::Cluster(a) => commands::cluster::run(&a),
        Command::Tune(a) => commands::tune::run(&a),
        Command::Bench(a) => commands::bench::run(&a),
        Command::Stats(a) => commands::stats::run(&a),
        Command::Plot(a) => commands::plot::run(&a),
        Command::Datasets(a) => commands::datasets::run(&a),
    }
}

/// Parses `args`, runs the command and returns the process exit code.
pub fn run<I, T>(args: I) -> u8
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    match execute(cli) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e:#}");
            exit_code(&e)
        }
    }
}
