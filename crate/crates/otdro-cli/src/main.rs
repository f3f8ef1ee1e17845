//! `otdro` — distributionally robust optimization over structured
//! optimal-transport ambiguity sets, from the command line.
//!
//! Subcommands: `radius`, `toy`, `duality-check`, `drone`, `coverage`, `ot`.
//! Inputs are JSON configs (unknown keys rejected); outputs are JSON (and
//! CSV for the experiment subcommands). Results are byte-identical for
//! identical (config, seed). Files are written atomically (temp + rename),
//! so failures leave no partial output.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

mod commands;
mod configs;

/// Exit 2: configuration errors (parse or validation).
/// Exit 1: numerical failures inside the library, module named.
#[derive(Debug)]
pub enum CliError {
    Config(String),
    Numerical(String),
}

impl CliError {
    fn from_lib(err: otdro::Error) -> Self {
        match err {
            e @ otdro::Error::Numerical { .. } => CliError::Numerical(e.to_string()),
            e => CliError::Config(e.to_string()),
        }
    }
}

pub type CliResult<T> = Result<T, CliError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum OutputFormat {
    Json,
    Csv,
}

#[derive(Debug, Args)]
pub struct CommonArgs {
    /// Path to the JSON configuration for this subcommand.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output path; results go to stdout when omitted. The experiment
    /// subcommands write both <out>.json and <out>.csv.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Format for stdout output.
    #[arg(long, global = true, value_enum, default_value = "json")]
    format: OutputFormat,
    /// Override the config's master seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Override the config's trial count.
    #[arg(long, global = true)]
    trials: Option<usize>,
}

#[derive(Debug, Parser)]
#[command(
    name = "otdro",
    version,
    about = "DRO over structured optimal-transport ambiguity sets"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    common: CommonArgs,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Closed-form concentration radii and per-component allocation.
    Radius,
    /// The two-point toy instance contrasting both ambiguity sets.
    Toy,
    /// Randomized strong-duality certification; reports the max gap.
    DualityCheck,
    /// The two-drone recharging-station placement study.
    Drone,
    /// Monte Carlo validation of the coverage guarantees.
    Coverage,
    /// Exact discrete p-Wasserstein distance and optimal coupling.
    Ot,
}

/// Read and deserialize a config with a line-anchored diagnostic.
pub fn load_config<T: serde::de::DeserializeOwned>(path: &Path) -> CliResult<T> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| {
        CliError::Config(format!(
            "{}:{}:{}: {e}",
            path.display(),
            e.line(),
            e.column()
        ))
    })
}

/// Serialize to pretty JSON with a trailing newline.
pub fn to_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("serializable report");
    s.push('\n');
    s
}

/// Write a file atomically: temp file in the target directory, then rename.
pub fn write_atomic(path: &Path, contents: &str) -> CliResult<()> {
    let dir = path
        .parent()
        .filter(|p| !p.as_os_str().is_empty())
        .unwrap_or(Path::new("."));
    let file_name = path
        .file_name()
        .ok_or_else(|| CliError::Config(format!("{}: not a file path", path.display())))?;
    let tmp = dir.join(format!(".{}.tmp", file_name.to_string_lossy()));
    std::fs::write(&tmp, contents)
        .map_err(|e| CliError::Config(format!("{}: {e}", tmp.display())))?;
    std::fs::rename(&tmp, path)
        .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Radius => commands::radius(&cli.common),
        Command::Toy => commands::toy(&cli.common),
        Command::DualityCheck => commands::duality_check(&cli.common),
        Command::Drone => commands::drone(&cli.common),
        Command::Coverage => commands::coverage(&cli.common),
        Command::Ot => commands::ot(&cli.common),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Config(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(CliError::Numerical(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
    }
}
