//! `tribokey`: tables, simulations, two-process exchange, adversary
//! analysis and rate sweeps.
//!
//! Exit codes: 0 success, 1 configuration or usage error, 2 protocol abort.

mod commands;
mod config;

use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::config::FileConfig;

#[derive(Debug, Parser)]
#[command(
    name = "tribokey",
    version,
    about = "Tribonacci-coded OAM key distribution simulator"
)]
pub struct Cli {
    #[command(flatten)]
    pub global: Global,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct Global {
    /// Seed for every random draw.
    #[arg(long, global = true, env = "QKD_SEED")]
    pub seed: Option<u64>,

    /// JSON file with default parameters; flags take precedence.
    #[arg(long, global = true)]
    pub config: Option<std::path::PathBuf>,

    /// Output file; stdout when absent.
    #[arg(long, global = true)]
    pub out: Option<std::path::PathBuf>,

    #[arg(long, global = true, value_enum)]
    pub format: Option<Format>,

    /// Worker threads for Monte Carlo trials.
    #[arg(long, global = true)]
    pub jobs: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, serde::Deserialize, serde::Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Json,
    Csv,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Print the coding, situation, rule and transcript tables.
    Tables(TablesArgs),
    /// Run both peers in-process and report the agreed key.
    Simulate(SimulateArgs),
    /// Run one peer over TCP.
    Exchange(ExchangeArgs),
    /// Enumerate what Eve learns from transcripts.
    EveAnalysis(EveArgs),
    /// Monte Carlo intercept-resend detection versus check rounds.
    DetectSim(DetectArgs),
    /// Key rate versus fiber length.
    RateSweep(RateArgs),
    /// Entropy and detection rate versus coding-space size.
    EntropySweep(EntropyArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Table {
    T1,
    T2,
    T5,
    T6,
}

/// Parameters shared by the protocol subcommands.
#[derive(Debug, Args, Clone, Default)]
pub struct ProtocolArgs {
    /// Block code size N (a power of two).
    #[arg(long, visible_alias = "n-set-size")]
    pub n: Option<u32>,

    /// Pump window as `lo..hi` (inclusive).
    #[arg(long)]
    pub window: Option<String>,

    #[arg(long)]
    pub rounds: Option<u32>,

    #[arg(long)]
    pub check_fraction: Option<f64>,

    /// Bob's edge signal: `formula` or `prose`.
    #[arg(long)]
    pub convention: Option<String>,
}

#[derive(Debug, Args)]
pub struct TablesArgs {
    #[arg(long, value_enum)]
    pub table: Table,

    /// t1: largest index shown. t2: first index scanned.
    #[arg(long)]
    pub n: Option<u32>,

    #[arg(long)]
    pub window: Option<String>,

    #[arg(long)]
    pub convention: Option<String>,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub protocol: ProtocolArgs,

    /// Eavesdropper on Bob's photon during check rounds.
    #[arg(long)]
    pub eve: Option<String>,

    /// Monte Carlo trials for the detection estimate.
    #[arg(long)]
    pub trials: Option<u64>,

    /// Include per-round public transcripts.
    #[arg(long)]
    pub trace: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum RoleArg {
    Alice,
    Bob,
}

#[derive(Debug, Args)]
pub struct ExchangeArgs {
    #[arg(long, value_enum)]
    pub role: RoleArg,

    /// Address Bob listens on.
    #[arg(long, conflicts_with = "connect")]
    pub listen: Option<String>,

    /// Address Alice dials.
    #[arg(long)]
    pub connect: Option<String>,

    #[command(flatten)]
    pub protocol: ProtocolArgs,

    /// Sessions Bob serves before exiting.
    #[arg(long, default_value_t = 1)]
    pub sessions: usize,

    /// How long Alice keeps retrying the connection, in milliseconds.
    #[arg(long, default_value_t = 5000)]
    pub connect_timeout_ms: u64,

    #[arg(long)]
    pub trace: bool,
}

#[derive(Debug, Args)]
pub struct EveArgs {
    /// `v0`..`v3`, or `all`.
    #[arg(long)]
    pub variant: Option<String>,

    #[arg(long)]
    pub window: Option<String>,

    #[arg(long)]
    pub convention: Option<String>,

    /// Set size used for the closed-form rate.
    #[arg(long)]
    pub n: Option<u32>,

    /// Include every enumerated world.
    #[arg(long)]
    pub dump_worlds: bool,
}

#[derive(Debug, Args)]
pub struct DetectArgs {
    /// `resend_measured_value`, `resend_random_superposition` or `passthrough`.
    #[arg(long)]
    pub eve: Option<String>,

    #[arg(long, value_delimiter = ',')]
    pub check_rounds: Option<Vec<u64>>,

    #[arg(long)]
    pub trials: Option<u64>,

    #[arg(long)]
    pub alpha: Option<f64>,

    #[arg(long)]
    pub window: Option<String>,

    #[arg(long)]
    pub n: Option<u32>,
}

#[derive(Debug, Args)]
pub struct RateArgs {
    #[arg(long)]
    pub max_km: Option<f64>,

    #[arg(long)]
    pub step_km: Option<f64>,

    /// Coding-space sizes.
    #[arg(long, value_delimiter = ',')]
    pub configs: Option<Vec<u32>>,

    #[arg(long)]
    pub pulse_rate: Option<f64>,

    #[arg(long)]
    pub mu: Option<f64>,

    /// dB/km.
    #[arg(long)]
    pub fiber_loss: Option<f64>,

    #[arg(long)]
    pub eta: Option<f64>,

    /// Dark counts per second.
    #[arg(long)]
    pub dark_count: Option<f64>,

    /// Gate window in seconds.
    #[arg(long)]
    pub gate: Option<f64>,

    #[arg(long)]
    pub sift: Option<f64>,

    #[arg(long)]
    pub ecpa: Option<f64>,
}

#[derive(Debug, Args)]
pub struct EntropyArgs {
    #[arg(long, value_delimiter = ',')]
    pub n_list: Option<Vec<u32>>,
}

/// How a command ended when it did not fail outright.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Ok,
    ProtocolAbort,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let file = match cli
        .global
        .config
        .as_deref()
        .map(FileConfig::load)
        .transpose()
    {
        Ok(f) => f.unwrap_or_default(),
        Err(e) => {
            eprintln!("error: {e:#}");
            return ExitCode::from(1);
        }
    };
    if let Some(jobs) = cli.global.jobs.or(file.jobs) {
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build_global()
        {
            eprintln!("error: {e}");
            return ExitCode::from(1);
        }
    }
    match commands::run(&cli, &file) {
        Ok(Status::Ok) => ExitCode::SUCCESS,
        Ok(Status::ProtocolAbort) => ExitCode::from(2),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
