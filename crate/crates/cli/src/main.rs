//! `cadcost` command-line tool.

mod commands;
mod data;

use std::path::PathBuf;
use std::process::ExitCode;

use cadcost::Error;
use clap::{Args, Parser, Subcommand};

/// Manufacturing cost estimation from DXF drawings.
#[derive(Debug, Parser)]
#[command(name = "cadcost", version, about, long_about = None)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Parse a directory of DXF files into a feature CSV.
    Featurize(FeaturizeArgs),
    /// Train one model per product group and report train/valid/test scores.
    Train(TrainArgs),
    /// Predict costs for DXF files or a feature table.
    Predict(PredictArgs),
    /// Score a trained model against labelled data.
    Evaluate(EvaluateArgs),
    /// Random hyperparameter search with k-fold cross-validation.
    Tune(TuneArgs),
    /// max_depth × learning_rate grid with k-fold cross-validation.
    Grid(GridArgs),
    /// Feature importances, Shapley values and a surrogate tree.
    Explain(ExplainArgs),
    /// Generate a labelled synthetic DXF corpus.
    Synth(SynthArgs),
}

#[derive(Debug, Args)]
pub struct FeaturizeArgs {
    /// Directory holding the .dxf files.
    #[arg(long)]
    pub dxf_dir: PathBuf,
    /// Material lexicon, one name per line.
    #[arg(long)]
    pub lexicon: Option<PathBuf>,
    /// Label CSV (source_id,group,cost) supplying groups and costs.
    #[arg(long)]
    pub labels: Option<PathBuf>,
    /// Group for files without a label.
    #[arg(long, default_value = "default")]
    pub group: String,
    /// Group reference JSON or model bundle; enables distance features.
    #[arg(long)]
    pub reference: Option<PathBuf>,
    /// Output feature CSV. A `<stem>.quantities.jsonl` sidecar is written next to it.
    #[arg(long)]
    pub out: PathBuf,
    /// Per-file diagnostics log (default: stderr).
    #[arg(long)]
    pub log: Option<PathBuf>,
}

/// Training parameter flags. A `--params` JSON file overrides them.
#[derive(Debug, Args, Clone)]
pub struct ParamArgs {
    #[arg(long)]
    pub learning_rate: Option<f64>,
    #[arg(long)]
    pub max_depth: Option<usize>,
    #[arg(long)]
    pub n_estimators: Option<usize>,
    #[arg(long)]
    pub early_stopping_rounds: Option<usize>,
    /// JSON object of training parameters; keys override the flags.
    #[arg(long)]
    pub params: Option<PathBuf>,
    /// Seed for every random choice of the run.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// Feature CSV written by `featurize`.
    #[arg(long)]
    pub features: PathBuf,
    /// Label CSV; overrides the table's cost and group columns.
    #[arg(long)]
    pub labels: Option<PathBuf>,
    #[arg(long)]
    pub lexicon: Option<PathBuf>,
    /// Train/valid/test fractions.
    #[arg(long, value_delimiter = ',', num_args = 3, default_values_t = [0.70, 0.15, 0.15])]
    pub split: Vec<f64>,
    /// Early-stopping metric: mape, mae or mse.
    #[arg(long, default_value = "mape")]
    pub metric: String,
    #[command(flatten)]
    pub params: ParamArgs,
    /// Output model bundle (JSON).
    #[arg(long)]
    pub out: PathBuf,
    /// Directory for evaluation.csv, scatter.csv, predictions.csv and the
    /// group references (default: the model's directory).
    #[arg(long)]
    pub report_dir: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct PredictArgs {
    #[arg(long)]
    pub model: PathBuf,
    /// DXF files to price.
    #[arg(long, num_args = 1..)]
    pub dxf: Vec<PathBuf>,
    /// Feature CSV (uses its quantity sidecar when present).
    #[arg(long, conflicts_with = "dxf")]
    pub features: Option<PathBuf>,
    /// Product group of the DXF files (default: the model's only group).
    #[arg(long)]
    pub group: Option<String>,
    /// Also print the k most used split features of each group model.
    #[arg(long, default_value_t = 0)]
    pub top_k: usize,
    /// Write predictions here instead of stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub features: PathBuf,
    #[arg(long)]
    pub labels: Option<PathBuf>,
    /// Output CSV (group,n,mae,mape); stdout when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SearchData {
    #[arg(long)]
    pub features: PathBuf,
    #[arg(long)]
    pub labels: Option<PathBuf>,
    #[arg(long)]
    pub lexicon: Option<PathBuf>,
    /// Group to search on; required when the table holds several.
    #[arg(long)]
    pub group: Option<String>,
    #[arg(long, default_value_t = 5)]
    pub folds: usize,
}

#[derive(Debug, Args)]
pub struct TuneArgs {
    #[command(flatten)]
    pub data: SearchData,
    #[arg(long, default_value_t = 20)]
    pub trials: usize,
    /// Search space JSON (default: the built-in ranges).
    #[arg(long)]
    pub space: Option<PathBuf>,
    #[command(flatten)]
    pub params: ParamArgs,
    /// Trial CSV.
    #[arg(long)]
    pub out: PathBuf,
    /// Best parameters as JSON, usable with `--params`.
    #[arg(long)]
    pub best_out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct GridArgs {
    #[command(flatten)]
    pub data: SearchData,
    #[arg(long, value_delimiter = ',', default_values_t = [3usize, 5, 7, 10])]
    pub depths: Vec<usize>,
    #[arg(long, value_delimiter = ',', default_values_t = [0.01, 0.05, 0.1, 0.2])]
    pub learning_rates: Vec<f64>,
    #[command(flatten)]
    pub params: ParamArgs,
    /// Grid CSV (depth,lr,mean_mae).
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct ExplainArgs {
    #[arg(long)]
    pub model: PathBuf,
    /// Labelled feature table used for permutation importance, Shapley
    /// values and the surrogate tree.
    #[arg(long)]
    pub features: Option<PathBuf>,
    #[arg(long)]
    pub labels: Option<PathBuf>,
    /// Group to explain (default: every group in the model).
    #[arg(long)]
    pub group: Option<String>,
    #[arg(long, default_value_t = 5)]
    pub repeats: usize,
    /// Rows explained with exact Shapley values (0 disables).
    #[arg(long, default_value_t = 50)]
    pub shap_rows: usize,
    /// Active features for Shapley values, the top split-count features.
    #[arg(long, default_value_t = 8)]
    pub shap_features: usize,
    /// Depth of the exported surrogate regression tree.
    #[arg(long, default_value_t = 3)]
    pub tree_depth: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out_dir: PathBuf,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    /// Generator config JSON; its fields override the flags.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long)]
    pub noise_pct: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub out: PathBuf,
}

/// Exit status per error class.
fn exit_code(err: &Error) -> u8 {
    match err {
        Error::InvalidInput(_) => 1,
        Error::Parse { .. } | Error::UnsupportedFormat(_) | Error::Json(_) => 3,
        Error::Schema(_) => 4,
        Error::Io { .. } => 5,
        Error::Csv(e) if e.is_io_error() => 5,
        Error::Csv(_) => 4,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Featurize(a) => commands::featurize(a),
        Command::Train(a) => commands::train(a),
        Command::Predict(a) => commands::predict(a),
        Command::Evaluate(a) => commands::evaluate(a),
        Command::Tune(a) => commands::tune(a),
        Command::Grid(a) => commands::grid(a),
        Command::Explain(a) => commands::explain(a),
        Command::Synth(a) => commands::synth(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
