//! `tsn-nads`: simulate scenarios into a dataset library, evaluate detectors
//! on the captures, and summarize the results.

mod evaluate;
mod report;
mod simulate;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

#[derive(Parser)]
#[command(name = "tsn-nads", version, about = "TSN backbone simulation and anomaly detector evaluation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario and store its captures as a library entry.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        /// Library root; the entry is created as `<out>/<scenario name>`.
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Train a detector on one capture and score it on another.
    Evaluate {
        #[arg(long)]
        train: PathBuf,
        #[arg(long)]
        test: PathBuf,
        /// Comma-separated key=value terms over iface, vlan, pcp, dmac,
        /// udp_dst, dir and stream.
        #[arg(long)]
        filter: String,
        #[arg(long)]
        detector: String,
        /// Detector parameter as key=value; repeatable.
        #[arg(long = "param", value_name = "K=V")]
        params: Vec<String>,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Tabulate every evaluation found under a library directory.
    Report {
        #[arg(long)]
        library: PathBuf,
    },
}

/// An error and the exit code it maps to.
pub struct Failure {
    pub code: u8,
    pub error: anyhow::Error,
}

pub const EXIT_RUNTIME: u8 = 1;
pub const EXIT_USAGE: u8 = 2;

impl Failure {
    pub fn usage(error: impl Into<anyhow::Error>) -> Self {
        Failure { code: EXIT_USAGE, error: error.into() }
    }
}

impl<E: Into<anyhow::Error>> From<E> for Failure {
    fn from(e: E) -> Self {
        Failure { code: EXIT_RUNTIME, error: e.into() }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Simulate { config, out, seed } => simulate::run(&config, &out, seed),
        Command::Evaluate { train, test, filter, detector, params, seed, out } => {
            evaluate::run(&evaluate::Args { train, test, filter, detector, params, seed, out })
        }
        Command::Report { library } => report::run(&library),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {:#}", f.error);
            ExitCode::from(f.code)
        }
    }
}
