//! The `lookahead` command line: synth → ingest-scan → build-features → train → forecast,
//! plus grid-search and report.
//!
//! Exit codes: 0 success, 2 validation error, 3 data error, 4 numeric divergence.

mod commands;
mod config;

use std::ffi::OsString;
use std::path::PathBuf;

use chrono::NaiveDate;
use clap::{Parser, Subcommand};
use thiserror::Error;

use crate::bim::BimError;
use crate::features::FeatureError;
use crate::geometry::GeometryError;
use crate::gru::GruError;
use crate::lookahead::LookaheadError;
use crate::synth::SynthError;

pub use commands::{
    cmd_build_features, cmd_forecast, cmd_grid_search, cmd_ingest_scan, cmd_report, cmd_synth,
    cmd_train, format_thousands, Context, FORECAST_FILES, GRID_REPORT_FILE, REPORT_FILE,
    SERIES_FILE, TRAIN_REPORT_FILE,
};
pub use config::{LoadedConfig, PipelineConfig};

pub const EXIT_OK: i32 = 0;
pub const EXIT_VALIDATION: i32 = 2;
pub const EXIT_DATA: i32 = 3;
pub const EXIT_DIVERGED: i32 = 4;

#[derive(Debug, Parser)]
#[command(name = "lookahead", version, about = "Scan-informed lookahead planning")]
pub struct Cli {
    /// Pipeline config (flat TOML). Defaults apply when omitted, relative to the cwd.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Overrides the config seed (and the fixture seed for `synth`).
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Freeze the clock (`--fixed-clock` or `--fixed-clock=YYYY-MM-DD`, default 2000-01-01):
    /// plan dates use that day and wall times are reported as 0.
    #[arg(long, global = true, num_args = 0..=1, require_equals = true, default_missing_value = "2000-01-01")]
    pub fixed_clock: Option<NaiveDate>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Register scans, classify points and append one metrics row per scan.
    IngestScan {
        /// Scan files (.xyz or .ply); all files in `scans_dir` when omitted.
        scans: Vec<PathBuf>,
        /// Capture date; otherwise taken from a YYYY-MM-DD in the file name.
        #[arg(long)]
        date: Option<NaiveDate>,
    },
    /// Join observations with scan metrics into the feature table.
    BuildFeatures,
    /// Train the forecaster and write a checkpoint plus a training report.
    Train,
    /// Train every (learning rate, units) cell and report the best.
    GridSearch,
    /// Forecast every task over the next window and emit the plan.
    Forecast,
    /// Write the default synthetic fixture and a matching config.
    Synth {
        #[arg(long, default_value = ".")]
        out: PathBuf,
        /// Half-width of uniform noise added to progress observations (percentage points).
        #[arg(long, default_value_t = 0.0)]
        noise: f64,
    },
    /// Summarize training, grid-search and plan outputs.
    Report,
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("MISSING_TRANSFORM: config sets neither `transform` nor `correspondences`")]
    MissingTransform,
    #[error("INSUFFICIENT_HISTORY: {0}")]
    InsufficientHistory(String),
    #[error("{0}")]
    Validation(String),
    #[error("{0}")]
    Data(String),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Bim(#[from] BimError),
    #[error(transparent)]
    Feature(#[from] FeatureError),
    #[error(transparent)]
    Gru(#[from] GruError),
    #[error(transparent)]
    Lookahead(#[from] LookaheadError),
    #[error(transparent)]
    Synth(#[from] SynthError),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::MissingTransform | CliError::Validation(_) => EXIT_VALIDATION,
            CliError::Gru(GruError::Diverged { .. } | GruError::NonFinite) => EXIT_DIVERGED,
            CliError::Gru(GruError::InvalidConfig(_) | GruError::EmptyGrid) => EXIT_VALIDATION,
            CliError::Geometry(GeometryError::InvalidAllowance(_)) => EXIT_VALIDATION,
            CliError::Feature(FeatureError::InvalidWindow { .. }) => EXIT_VALIDATION,
            CliError::Synth(SynthError::InvalidSpec(_)) => EXIT_VALIDATION,
            _ => EXIT_DATA,
        }
    }
}

pub fn run(cli: Cli) -> Result<(), CliError> {
    let mut loaded = match &cli.config {
        Some(p) => LoadedConfig::load(p)?,
        None => LoadedConfig {
            config: PipelineConfig::default(),
            base_dir: PathBuf::new(),
        },
    };
    if let Some(seed) = cli.seed {
        loaded.config.seed = seed;
    }
    let ctx = Context {
        loaded,
        fixed_clock: cli.fixed_clock,
    };
    match cli.command {
        Command::IngestScan { scans, date } => cmd_ingest_scan(&ctx, &scans, date),
        Command::BuildFeatures => cmd_build_features(&ctx),
        Command::Train => cmd_train(&ctx),
        Command::GridSearch => cmd_grid_search(&ctx),
        Command::Forecast => cmd_forecast(&ctx),
        Command::Synth { out, noise } => cmd_synth(&out, cli.seed.unwrap_or(0), noise),
        Command::Report => cmd_report(&ctx),
    }
}

/// Parses `args`, runs the command and returns the process exit code.
pub fn main_from<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_VALIDATION } else { EXIT_OK };
        }
    };
    match run(cli) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
