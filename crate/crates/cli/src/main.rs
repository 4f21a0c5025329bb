//! `bcdi`: simulate broadband diffraction, recover the monochromatic
//! pattern, reconstruct the object, compare and render.

mod commands;
mod config;
mod provenance;
mod render;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("I/O error: {0}")]
    Io(String),
    #[error("{0}")]
    Diverged(String),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::Io(_) => 3,
            CliError::Diverged(_) => 4,
        }
    }
}

impl From<bcdi_core::Error> for CliError {
    fn from(e: bcdi_core::Error) -> Self {
        use bcdi_core::Error as E;
        match e {
            E::Diverged { .. } => CliError::Diverged(e.to_string()),
            E::Io { .. } | E::Format(_) => CliError::Io(e.to_string()),
            E::Shape(_) | E::InvalidParameter(_) => CliError::Config(e.to_string()),
        }
    }
}

#[derive(Parser)]
#[command(name = "bcdi", version, about, after_long_help = config::REFERENCE)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write phantom.bcdi, mono.bcdi and poly.bcdi from the phantom and spectrum.
    Simulate(Args),
    /// Recover the monochromatic pattern from a broadband one.
    Mono(Args),
    /// Phase retrieval with best-of-N restarts.
    Reconstruct(Args),
    /// NRMSE, registration and residual summary of a result against a reference.
    Metrics(Args),
    /// 16-bit grayscale PNG of a pattern or object file.
    Render(Args),
}

#[derive(clap::Args, Debug)]
pub struct Args {
    /// Run configuration (TOML); see `bcdi --help` for every key and default.
    #[arg(long)]
    pub config: PathBuf,
    /// Output directory, overriding paths.out.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Seed, overriding the config's.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Worker threads [default: all cores].
    #[arg(long, env = "BCDI_THREADS")]
    pub threads: Option<usize>,
}

fn run(cli: Cli) -> Result<(), CliError> {
    let (name, args) = match &cli.command {
        Command::Simulate(a) => ("simulate", a),
        Command::Mono(a) => ("mono", a),
        Command::Reconstruct(a) => ("reconstruct", a),
        Command::Metrics(a) => ("metrics", a),
        Command::Render(a) => ("render", a),
    };
    if let Some(n) = args.threads {
        if n == 0 {
            return Err(CliError::Config("--threads must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Config(format!("thread pool: {e}")))?;
    }
    let ctx = commands::Context::new(name, args)?;
    match cli.command {
        Command::Simulate(_) => commands::simulate(&ctx),
        Command::Mono(_) => commands::mono(&ctx),
        Command::Reconstruct(_) => commands::reconstruct(&ctx),
        Command::Metrics(_) => commands::metrics(&ctx),
        Command::Render(_) => commands::render(&ctx),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("bcdi: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
