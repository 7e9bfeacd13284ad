//! `selfheal`: run scattering, security and self-healing scenarios from a
//! TOML config or a bundled preset.

mod commands;
mod config;
mod units;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("numerical guard: {0}")]
    Guard(String),
    #[error("i/o error: {0}")]
    Io(String),
    #[error("{0}")]
    Run(String),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            Self::Config(_) => 2,
            Self::Guard(_) => 3,
            Self::Io(_) | Self::Run(_) => 1,
        }
    }
}

impl From<selfheal_core::Error> for CliError {
    fn from(e: selfheal_core::Error) -> Self {
        use selfheal_core::Error as E;
        match e {
            E::InvalidGrid(_)
            | E::InvalidParameter { .. }
            | E::Precondition(_)
            | E::NegativeDistance(_)
            | E::InvalidLabel(_)
            | E::UnsupportedMode(_) => Self::Config(e.to_string()),
            E::Io(_) => Self::Io(e.to_string()),
            other => Self::Run(other.to_string()),
        }
    }
}

#[derive(Parser)]
#[command(name = "selfheal", version, about = "Self-healing vector-mode QKD simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Scenario config (TOML).
    #[arg(long, global = true, conflicts_with = "preset")]
    config: Option<PathBuf>,
    /// Bundled scenario, e.g. paper-R1-BG (see `selfheal presets`).
    #[arg(long, global = true)]
    preset: Option<String>,
    /// Overrides run.seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory (created if missing).
    #[arg(long, global = true)]
    out_dir: Option<PathBuf>,
    /// Worker threads; defaults to all cores.
    #[arg(long, global = true)]
    threads: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// 8×8 scattering matrices, count tables and intensity snapshots.
    Scattering,
    /// QBER, mutual information and key rates.
    Security,
    /// Windowed fidelity and on-axis intensity behind an obstacle.
    SelfhealScan,
    /// Non-diffracting range and shadow lengths.
    Info,
    /// Lists the bundled presets.
    Presets,
}

fn load(cli: &Cli) -> Result<config::Config, CliError> {
    let text = match (&cli.config, &cli.preset) {
        (Some(path), _) => std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?,
        (None, Some(name)) => config::preset(name)?.to_string(),
        (None, None) => return Err(CliError::Config("pass --config FILE or --preset NAME".into())),
    };
    config::parse(&text)
}

fn run(cli: Cli) -> Result<(), CliError> {
    if let Command::Presets = cli.command {
        for (name, text) in config::PRESETS {
            let about = text.lines().next().unwrap_or("").trim_start_matches('#').trim();
            println!("{name:<22} {about}");
        }
        return Ok(());
    }
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Run(e.to_string()))?;
    }
    let config = load(&cli)?;
    let ctx = commands::Context {
        seed: cli.seed.unwrap_or(config.run.seed),
        out_dir: commands::out_dir_or_default(cli.out_dir.as_deref()),
        config,
    };
    match cli.command {
        Command::Scattering => commands::scattering(&ctx),
        Command::Security => commands::security(&ctx),
        Command::SelfhealScan => commands::selfheal_scan(&ctx),
        Command::Info => commands::info(&ctx),
        Command::Presets => unreachable!(),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("selfheal: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
