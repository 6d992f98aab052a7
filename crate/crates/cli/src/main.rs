//! `hospnet` — hospital stay overlap analysis and transfer networks.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use config::is_false;

#[derive(Parser)]
#[command(name = "hospnet", version, about = "Overlap analysis and transfer networks for hospital stay records")]
pub struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Parse and validate an input file, writing the row accounting report.
    Ingest(IngestArgs),
    /// Overlap classification, pair codes and all descriptive statistics.
    Analyze(AnalyzeArgs),
    /// Infer direct and indirect transfers and export the facility network.
    Network(NetworkArgs),
    /// Write a synthetic cohort and its ground truth.
    Generate(GenerateArgs),
}

/// Input, schema and filter flags shared by the analysis commands.
#[derive(Args, Clone, Debug, Default, Serialize, Deserialize)]
#[serde(default, rename_all = "kebab-case")]
pub struct InputArgs {
    /// TOML file supplying defaults for any flag.
    #[arg(long)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
    /// Stay records (CSV with a header row).
    #[arg(long)]
    pub input: Option<PathBuf>,
    /// Output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Field delimiter.
    #[arg(long)]
    pub delimiter: Option<char>,
    /// chrono strftime format of the date columns.
    #[arg(long)]
    pub date_format: Option<String>,
    /// Column override `FIELD=COLUMN`; COLUMN is a header name or 0-based index.
    #[arg(long, value_name = "FIELD=COLUMN")]
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub column: Vec<String>,
    /// Keep only records whose facility lies in this region.
    #[arg(long)]
    pub region: Option<String>,
    /// Keep only records admitted within `FROM:TO` (inclusive, ISO dates).
    #[arg(long, value_name = "FROM:TO")]
    pub period: Option<String>,
    /// Worker threads (default: all cores). Results do not depend on it.
    #[arg(long)]
    pub threads: Option<usize>,
}

#[derive(Args, Clone, Debug, Default, Serialize, Deserialize)]
#[serde(default, rename_all = "kebab-case")]
pub struct IngestArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub input: InputArgs,
    /// Report path (default: OUT/ingest_report.json).
    #[arg(long)]
    pub report: Option<PathBuf>,
    /// Also print the report to stdout.
    #[arg(long)]
    #[serde(skip_serializing_if = "is_false")]
    pub stdout: bool,
}

#[derive(Args, Clone, Debug, Default, Serialize, Deserialize)]
#[serde(default, rename_all = "kebab-case")]
pub struct AnalyzeArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub input: InputArgs,
    /// How the diagnosis bit of pair codes compares stays: exact or group.
    #[arg(long)]
    pub diagnosis_match: Option<String>,
    /// Facilities (by admissions) that get an occupancy series.
    #[arg(long)]
    pub top: Option<usize>,
}

#[derive(Args, Clone, Debug, Default, Serialize, Deserialize)]
#[serde(default, rename_all = "kebab-case")]
pub struct NetworkArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub input: InputArgs,
    /// direct, indirect or both.
    #[arg(long)]
    pub kind: Option<String>,
    /// Longest stay at home (days) still counted as an indirect transfer.
    #[arg(long)]
    pub max_gap: Option<u32>,
    /// csv, dot or both.
    #[arg(long)]
    pub format: Option<String>,
    /// Emit only the outbound leg of temporary transfers.
    #[arg(long)]
    #[serde(skip_serializing_if = "is_false")]
    pub no_round_trip: bool,
    /// Drop indirect transfers back to the discharging facility.
    #[arg(long)]
    #[serde(skip_serializing_if = "is_false")]
    pub exclude_readmissions: bool,
    /// Also print the edge list (CSV) to stdout.
    #[arg(long)]
    #[serde(skip_serializing_if = "is_false")]
    pub stdout: bool,
}

#[derive(Args, Clone, Debug, Default, Serialize, Deserialize)]
#[serde(default, rename_all = "kebab-case")]
pub struct GenerateArgs {
    /// TOML file supplying defaults for any flag.
    #[arg(long)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
    /// Output directory for cohort.csv and truth.json.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub patients: Option<u64>,
    /// Generate exactly this many valid records (overrides --patients).
    #[arg(long)]
    pub records: Option<u64>,
    #[arg(long)]
    pub facilities: Option<u32>,
    /// First admission window start (ISO date).
    #[arg(long)]
    pub start: Option<String>,
    /// First admission window end (ISO date).
    #[arg(long)]
    pub end: Option<String>,
    /// Plant every overlap class (20 each unless --plant-each is given).
    #[arg(long)]
    #[serde(skip_serializing_if = "is_false")]
    pub plant_all_classes: bool,
    /// Planted instances per class.
    #[arg(long)]
    pub plant_each: Option<u32>,
    #[arg(long)]
    pub mean_stay_days: Option<f64>,
    #[arg(long)]
    pub mean_gap_days: Option<f64>,
    #[arg(long)]
    pub mean_episodes: Option<f64>,
    /// Region codes facilities are spread over.
    #[arg(long = "regions", value_delimiter = ',')]
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub regions: Vec<String>,
    #[arg(long)]
    pub no_diagnosis_rows: Option<u64>,
    #[arg(long)]
    pub malformed_rows: Option<u64>,
    /// Write rows patient by patient instead of shuffled.
    #[arg(long)]
    #[serde(skip_serializing_if = "is_false")]
    pub no_shuffle: bool,
    /// Leave the per-event list out of truth.json.
    #[arg(long)]
    #[serde(skip_serializing_if = "is_false")]
    pub no_truth_events: bool,
    #[arg(long)]
    pub threads: Option<usize>,
}

/// A fatal error and the exit code it maps to.
#[derive(Debug)]
pub struct Fail {
    code: u8,
    message: String,
}

impl Fail {
    /// Usage, configuration or missing-file problems.
    pub fn usage(message: impl Into<String>) -> Self {
        Self {
            code: 2,
            message: message.into(),
        }
    }

    /// The input was read but cannot be processed.
    pub fn data(message: impl Into<String>) -> Self {
        Self {
            code: 1,
            message: message.into(),
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Ingest(a) => commands::ingest(a),
        Command::Analyze(a) => commands::analyze(a),
        Command::Network(a) => commands::network(a),
        Command::Generate(a) => commands::generate(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("hospnet: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
