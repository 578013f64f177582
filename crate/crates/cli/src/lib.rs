//! Batch front end: reads a TOML run configuration, runs one pipeline and
//! writes CSV tables and plot data.

use std::path::{Path, PathBuf};

use thiserror::Error;

pub mod commands;
pub mod config;
pub mod output;

pub use config::{Command, Config};

/// Environment fallback for `--out-dir`.
pub const OUT_DIR_ENV: &str = "DECAYBOUND_OUT_DIR";

#[derive(Debug, Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error(transparent)]
    Core(#[from] decaybound::Error),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("certification failed: {failed} of {total} rows exceed the bound")]
    CertificationFailed { failed: usize, total: usize },
}

impl CliError {
    /// 1 for invalid input, 2 for numerical or output failures, 3 for a
    /// failed certification.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 1,
            CliError::Core(e) if e.is_validation() => 1,
            CliError::Core(_) | CliError::Io(_) => 2,
            CliError::CertificationFailed { .. } => 3,
        }
    }
}

/// What a run produced: the files written and the lines meant for stdout.
#[derive(Clone, Debug, Default)]
pub struct Outcome {
    pub files: Vec<PathBuf>,
    pub messages: Vec<String>,
}

/// `--out-dir`, else `$DECAYBOUND_OUT_DIR`, else the working directory.
pub fn resolve_out_dir(flag: Option<PathBuf>) -> PathBuf {
    flag.or_else(|| std::env::var_os(OUT_DIR_ENV).map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("."))
}

/// Loads, resolves and runs the configuration at `config_path`. On a failed
/// certification the tables are still written before the error is returned.
pub fn run(config_path: &Path, out_dir: &Path) -> Result<Outcome, CliError> {
    let text = std::fs::read_to_string(config_path)
        .map_err(|e| CliError::Config(format!("cannot read {}: {e}", config_path.display())))?;
    let base = config_path.parent().unwrap_or(Path::new("."));
    let cfg = Config::parse(&text)?.resolve(base)?;
    log::info!("command {} with config hash {}", cfg.command, cfg.hash());
    std::fs::create_dir_all(out_dir)?;
    commands::execute(&cfg, out_dir)
}
