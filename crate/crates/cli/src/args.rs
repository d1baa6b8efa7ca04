use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

#[derive(Debug, Parser)]
#[command(name = "morpho", version, about = "Morphological activation and pooling experiments")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Train one network and write its metrics.
    Train(TrainCmd),
    /// Compare analytic and finite-difference gradients of every layer.
    Gradcheck(GradcheckCmd),
    /// Extract the kernel and basis of a fixture set operator.
    Basis(BasisCmd),
    /// Sample learned (or initial) activation curves on a grid.
    ExportActivation(ExportCmd),
    /// Train several variants over several seeds and compare to the baseline.
    Table1(Table1Cmd),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Scope {
    All,
    #[value(name = "activations_only", alias = "activations-only")]
    ActivationsOnly,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Precision {
    F32,
    F64,
}

#[derive(Clone, Debug, Serialize, Args)]
pub struct DataArgs {
    /// Directory holding the four IDX files of a split (optionally gzipped).
    #[arg(long, env = "MORPHO_DATA_DIR", default_value = "data/mnist")]
    pub data_dir: PathBuf,
    /// Stratified training subset size; 0 keeps the whole training split.
    #[arg(long, default_value_t = 0)]
    pub subset: usize,
    /// Stratified test subset size; 0 keeps the whole test split.
    #[arg(long, default_value_t = 0)]
    pub test_subset: usize,
}

#[derive(Clone, Debug, Serialize, Args)]
pub struct ModelArgs {
    /// relu-maxpool, relu6-maxpool, selfdual, posneg, plact-maxpool, morpho1 or morpho2.
    #[arg(long, default_value = "relu-maxpool")]
    pub variant: String,
    #[arg(long, default_value_t = 2)]
    pub n_terms: usize,
    #[arg(long, default_value_t = 2)]
    pub m_terms: usize,
    #[arg(long, default_value_t = 2)]
    pub pool_size: usize,
    #[arg(long, default_value_t = 2)]
    pub stride: usize,
    #[arg(long, default_value_t = 128)]
    pub filters: usize,
    #[arg(long, default_value_t = 0.5)]
    pub dropout: f64,
}

#[derive(Clone, Debug, Serialize, Args)]
pub struct FitArgs {
    #[arg(long, default_value_t = 1e-3)]
    pub lr: f64,
    #[arg(long, default_value_t = 256)]
    pub batch_size: usize,
    /// Samples per forward pass; only affects memory and speed.
    #[arg(long, default_value_t = 16)]
    pub micro_batch: usize,
    /// Maximum number of epochs.
    #[arg(long, default_value_t = 50)]
    pub epochs: usize,
    #[arg(long, default_value_t = 10)]
    pub patience: usize,
    #[arg(long, value_enum, default_value_t = Scope::All)]
    pub trainable_scope: Scope,
    #[arg(long, value_enum, default_value_t = Precision::F32)]
    pub precision: Precision,
    /// Stop after the first epoch ending past this many seconds.
    #[arg(long)]
    pub time_budget: Option<f64>,
}

#[derive(Clone, Debug, Serialize, Args)]
pub struct TrainCmd {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub model: ModelArgs,
    #[command(flatten)]
    pub fit: FitArgs,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
    /// Metrics JSON path; defaults to `<out>/metrics.json`.
    #[arg(long)]
    pub metrics: Option<PathBuf>,
    /// Also write the penultimate features of the test set.
    #[arg(long)]
    pub export_features: bool,
}

#[derive(Clone, Debug, Serialize, Args)]
pub struct GradcheckCmd {
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 2)]
    pub trials: usize,
    #[arg(long, default_value_t = 1e-4)]
    pub tolerance: f64,
    #[arg(long, default_value_t = 1e-5)]
    pub step: f64,
    #[arg(long, default_value_t = 4)]
    pub max_terms: usize,
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
    #[arg(long, hide = true)]
    pub inject_fault: Option<String>,
}

#[derive(Clone, Debug, Serialize, Args)]
pub struct BasisCmd {
    /// erosion, dilation, opening, median or identity.
    #[arg(long)]
    pub op: String,
    /// square3, cross5, or a list of points such as `0,0;0,1`.
    #[arg(long, default_value = "square3")]
    pub window: String,
    /// Structuring element for erosion, dilation and opening:
    /// horiz2, vert2, diag2, diag3, cross5, square3, or a list of points.
    #[arg(long, default_value = "horiz2")]
    pub se: String,
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
}

#[derive(Clone, Debug, Serialize, Args)]
pub struct ExportCmd {
    /// Saved model; without it the curves of a freshly built model are exported.
    #[arg(long)]
    pub model_file: Option<PathBuf>,
    #[command(flatten)]
    pub model: ModelArgs,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    /// Which activation layer (1 or 2).
    #[arg(long, default_value_t = 1)]
    pub layer: usize,
    #[arg(long, default_value_t = -10.0, allow_hyphen_values = true)]
    pub from: f64,
    #[arg(long, default_value_t = 10.0, allow_hyphen_values = true)]
    pub to: f64,
    #[arg(long, default_value_t = 0.01)]
    pub step: f64,
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
}

#[derive(Clone, Debug, Serialize, Args)]
pub struct Table1Cmd {
    #[command(flatten)]
    pub data: DataArgs,
    /// Variants as `tag` or `tag:N,M`; relu-maxpool is prepended as the baseline when absent.
    #[arg(long = "variant", default_values_t = ["relu-maxpool".to_string(), "selfdual".into(), "posneg".into(), "morpho1:2,2".into(), "morpho2:2,2".into()])]
    pub variants: Vec<String>,
    #[arg(long, default_value_t = 2)]
    pub pool_size: usize,
    #[arg(long, default_value_t = 2)]
    pub stride: usize,
    #[arg(long, default_value_t = 128)]
    pub filters: usize,
    #[command(flatten)]
    pub fit: FitArgs,
    #[arg(long, value_delimiter = ',', default_value = "1,2,3")]
    pub seeds: Vec<u64>,
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
}
