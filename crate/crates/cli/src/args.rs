use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use tabgenie_core::export::ExportFormat;

#[derive(Debug, Parser)]
#[command(
    name = "tabgenie",
    version,
    about = "Workbench for data-to-text datasets"
)]
pub struct Cli {
    /// Only log warnings and errors.
    #[arg(long, short, global = true)]
    pub quiet: bool,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Launch the local web server.
    Run(RunArgs),
    /// Export every example of a dataset split to files.
    Export(ExportArgs),
    /// Build a spreadsheet of random examples and system outputs for annotation.
    Sheet(SheetArgs),
    /// Serve an echo model (replies with the prompt) for trying pipelines.
    #[command(name = "mock-model")]
    MockModel(MockArgs),
}

#[derive(Debug, Args)]
pub struct ConfigArg {
    /// YAML service config. Defaults to ./tabgenie.yaml when present.
    #[arg(long, value_name = "FILE")]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct RunArgs {
    /// Port to listen on (overrides the config).
    #[arg(long, value_parser = clap::value_parser!(u16).range(1..))]
    pub port: Option<u16>,
    /// Address to bind, e.g. 0.0.0.0 (overrides the config).
    #[arg(long)]
    pub host: Option<String>,
    #[command(flatten)]
    pub config: ConfigArg,
}

#[derive(Debug, Args)]
pub struct DatasetArgs {
    /// Dataset id, e.g. webnlg.
    #[arg(long)]
    pub dataset: String,
    /// Split name, e.g. dev.
    #[arg(long)]
    pub split: String,
    /// Directory holding datasets (overrides the config).
    #[arg(long = "dataset_dir", alias = "dataset-dir", value_name = "DIR")]
    pub dataset_dir: Option<PathBuf>,
    #[command(flatten)]
    pub config: ConfigArg,
}

#[derive(Debug, Args)]
pub struct ExportArgs {
    #[command(flatten)]
    pub data: DatasetArgs,
    /// Output directory; created if missing.
    #[arg(long = "out_dir", alias = "out-dir", value_name = "DIR")]
    pub out_dir: PathBuf,
    /// One of xlsx, html, json, txt, csv.
    #[arg(long = "export_format", alias = "export-format", value_name = "FORMAT", default_value = "json", value_parser = parse_format)]
    pub export_format: ExportFormat,
    /// Leave properties out of the exported files.
    #[arg(long = "no_properties", alias = "no-properties")]
    pub no_properties: bool,
    /// xlsx only: one workbook with a sheet per example.
    #[arg(long = "single_file", alias = "single-file")]
    pub single_file: bool,
}

#[derive(Debug, Args)]
pub struct SheetArgs {
    #[command(flatten)]
    pub data: DatasetArgs,
    /// System outputs file (JSONL). Repeat for several systems; the system id
    /// is the file stem, minus a leading `{dataset}-{split}-`.
    #[arg(
        long = "in_file",
        alias = "in-file",
        value_name = "FILE",
        required = true
    )]
    pub in_file: Vec<PathBuf>,
    /// Spreadsheet to write (.xlsx).
    #[arg(long = "out_file", alias = "out-file", value_name = "FILE")]
    pub out_file: PathBuf,
    /// Number of examples; clamped to the split size.
    #[arg(long, default_value_t = 50, value_parser = clap::value_parser!(u64).range(1..))]
    pub count: u64,
    /// Sampling seed.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Args)]
pub struct MockArgs {
    #[arg(long, default_value_t = 8891)]
    pub port: u16,
    #[arg(long, default_value = "127.0.0.1")]
    pub host: String,
}

fn parse_format(s: &str) -> Result<ExportFormat, String> {
    s.parse()
        .map_err(|e: tabgenie_core::export::ExportError| e.to_string())
}
