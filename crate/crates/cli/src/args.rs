use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

#[derive(Debug, Parser)]
#[command(name = "insident", version, about = "Summarize traffic tables and score anomalies in learned local metrics")]
pub struct Cli {
    /// Worker threads (results do not depend on it).
    #[arg(long, global = true, env = "INSIDENT_THREADS")]
    pub threads: Option<usize>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Train a model and write a size-S summary of original rows.
    Summarize(SummarizeArgs),
    /// Train a model and score every row; flag the top N.
    Detect(DetectArgs),
    /// Information loss and anomaly-fraction preservation across summary sizes.
    Evaluate(EvaluateArgs),
    /// Write a labeled synthetic dataset.
    Synth(SynthArgs),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Preset {
    /// KDD Cup 1999 layout: 41 attributes + label, "normal." is normal.
    Kdd99,
    /// Output of `insident synth`: header row, numeric features, "anomaly" label.
    Synth,
}

#[derive(Debug, Args)]
pub struct InputArgs {
    /// Input CSV file.
    #[arg(long)]
    pub input: PathBuf,

    /// Built-in schema.
    #[arg(long, conflicts_with = "schema")]
    pub preset: Option<Preset>,

    /// Schema JSON file.
    #[arg(long)]
    pub schema: Option<PathBuf>,

    /// First row is a header (ad hoc schema only).
    #[arg(long)]
    pub header: bool,

    /// Label column, by index or header name (ad hoc schema only).
    #[arg(long)]
    pub label_col: Option<String>,

    /// Label value that marks an anomaly.
    #[arg(long, conflicts_with = "normal_value")]
    pub anomaly_value: Option<String>,

    /// Label value that marks a normal row; every other value is an anomaly.
    #[arg(long)]
    pub normal_value: Option<String>,

    /// Categorical columns, by index or header name (ad hoc schema only).
    #[arg(long, value_delimiter = ',')]
    pub categorical: Vec<String>,

    /// Columns to skip, by index or header name (ad hoc schema only).
    #[arg(long, value_delimiter = ',')]
    pub ignore: Vec<String>,

    /// Keep a seeded uniform subsample of this many rows (uses --seed).
    #[arg(long)]
    pub subsample: Option<usize>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum LabelsArg {
    /// True labels when the input has them, cluster ids otherwise.
    Auto,
    /// Always cluster ids.
    Pseudo,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum CentroidArg {
    Gradient,
    Exact,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// Number of clusters.
    #[arg(long, default_value_t = 10)]
    pub k: usize,

    #[arg(long, default_value_t = 0)]
    pub seed: u64,

    /// Sigmoid steepness.
    #[arg(long, default_value_t = 10.0)]
    pub beta: f64,

    /// Weight learning rate.
    #[arg(long, default_value_t = 0.01)]
    pub lr_w: f64,

    /// Centroid learning rate.
    #[arg(long, default_value_t = 0.05)]
    pub lr_c: f64,

    #[arg(long, default_value_t = 50)]
    pub max_iter: usize,

    /// Relative objective change that stops training.
    #[arg(long, default_value_t = 1e-5)]
    pub tol: f64,

    #[arg(long, value_enum, default_value_t = CentroidArg::Gradient)]
    pub centroid_update: CentroidArg,

    /// Class definition for the neighbour term.
    #[arg(long, value_enum, default_value_t = LabelsArg::Auto)]
    pub labels: LabelsArg,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum SelectionArg {
    Stratified,
    Random,
}

#[derive(Debug, Args)]
pub struct SummarizeArgs {
    #[command(flatten)]
    pub input: InputArgs,
    #[command(flatten)]
    pub train: TrainArgs,

    /// Summary size: a row count, or a fraction in (0, 1] of the input.
    #[arg(long)]
    pub size: String,

    /// How members are picked inside each cluster.
    #[arg(long, value_enum, default_value_t = SelectionArg::Stratified)]
    pub selection: SelectionArg,

    /// Force the N highest-scoring rows into their clusters' picks.
    #[arg(long, default_value_t = 0)]
    pub force_top: usize,

    /// Representation radius for information loss (0 = exact match).
    #[arg(long, default_value_t = 0.0)]
    pub epsilon: f64,

    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct DetectArgs {
    #[command(flatten)]
    pub input: InputArgs,
    #[command(flatten)]
    pub train: TrainArgs,

    /// Number of rows to flag, or "auto" for the true anomaly count.
    #[arg(long, conflicts_with = "quantile")]
    pub top_n: Option<String>,

    /// Flag rows scoring at or above this score quantile instead.
    #[arg(long)]
    pub quantile: Option<f64>,

    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    #[command(flatten)]
    pub input: InputArgs,
    #[command(flatten)]
    pub train: TrainArgs,

    /// Summary sizes (counts or fractions).
    #[arg(long, value_delimiter = ',', default_value = "0.01,0.02,0.05,0.1,0.2")]
    pub sizes: Vec<String>,

    /// Representation radius for information loss (0 = exact match).
    #[arg(long, default_value_t = 0.0)]
    pub epsilon: f64,

    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum AnomalyArg {
    Uniform,
    Contextual,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(long, default_value_t = 10_000)]
    pub n: usize,

    #[arg(long, default_value_t = 5)]
    pub blobs: usize,

    #[arg(long, default_value_t = 8)]
    pub dim: usize,

    /// Fraction of anomalous rows (at most 0.2).
    #[arg(long, default_value_t = 0.01)]
    pub anom_frac: f64,

    #[arg(long, value_enum, default_value_t = AnomalyArg::Uniform)]
    pub anomalies: AnomalyArg,

    #[arg(long, default_value_t = 0)]
    pub seed: u64,

    /// Output CSV file.
    #[arg(long)]
    pub out: PathBuf,
}
