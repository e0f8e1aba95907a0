//! Experiment driver: convergence study, throughput sweeps, the sphere
//! application case, verification suites and cost-model tables.

pub mod commands;
pub mod config;
pub mod output;
pub mod verify;

use std::process::ExitCode;

use cutfem_core::Error;

pub use config::{Args, CommandKind, RawConfig, RunConfig, SCHEMA_VERSION};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error(transparent)]
    Core(Error),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("verification failed: {0}")]
    Verification(String),
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        match e {
            Error::Config(m) => CliError::Config(m),
            Error::InvalidGeometry(_)
            | Error::InvalidMesh(_)
            | Error::UnsupportedLanes(_)
            | Error::UnsupportedRule(_)
            | Error::UnsupportedDegree(_)
            | Error::IndexOverflow(_) => CliError::Config(e.to_string()),
            e => CliError::Core(e),
        }
    }
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) | CliError::Io(_) => 2,
            CliError::Core(_) | CliError::Verification(_) => 1,
        }
    }
}

/// Resolves the configuration from `args` and runs the selected command.
pub fn run(args: &Args) -> Result<RunConfig, CliError> {
    let mut raw = match &args.config {
        Some(path) => RawConfig::from_file(path)?,
        None => RawConfig::default(),
    };
    raw.apply_args(args);
    let cfg = raw.resolve()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.threads)
        .build()
        .map_err(|e| CliError::Config(format!("thread pool: {e}")))?;
    pool.install(|| commands::execute(&cfg))?;
    Ok(cfg)
}

pub fn main_with(args: &Args) -> ExitCode {
    match run(args) {
        Ok(cfg) => {
            eprintln!("wrote {}", cfg.out.display());
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
