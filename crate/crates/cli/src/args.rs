use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use ctdgan::TrainConfig;

#[derive(Debug, Parser)]
#[command(name = "ctdgan", version, about = "Cluster-aware conditional tabular GAN")]
pub struct Cli {
    /// Log verbosity on stderr.
    #[arg(long, value_enum, default_value_t = LogLevel::Info, global = true)]
    pub log: LogLevel,
    /// Worker threads for parallel evaluation (default: all cores).
    #[arg(long, global = true, value_parser = clap::value_parser!(u16).range(1..))]
    pub threads: Option<u16>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum LogLevel {
    Quiet,
    Info,
    Debug,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Train a model and write its checkpoint.
    Fit(FitArgs),
    /// Draw rows from a trained model.
    Sample(SampleArgs),
    /// Oversample every minority class up to the majority count.
    Balance(BalanceArgs),
    /// Run the oversampling or fidelity protocol.
    Evaluate(EvaluateArgs),
    /// Summarise a checkpoint.
    Inspect(InspectArgs),
    /// Guess a schema from a CSV file.
    InferSchema(InferSchemaArgs),
}

#[derive(Debug, Args)]
pub struct DataArgs {
    /// CSV file with a header row.
    #[arg(long)]
    pub data: PathBuf,
    /// Schema JSON file.
    #[arg(long)]
    pub schema: PathBuf,
}

#[derive(Debug, Args)]
pub struct FitArgs {
    #[command(flatten)]
    pub data: DataArgs,
    /// Checkpoint path.
    #[arg(long)]
    pub out: PathBuf,
    /// Also write the per-epoch loss curves as SVG.
    #[arg(long)]
    pub plot: Option<PathBuf>,
    #[command(flatten)]
    pub train: TrainArgs,
}

/// Every training hyper-parameter; unset flags keep the library defaults.
#[derive(Debug, Args, Default)]
pub struct TrainArgs {
    /// Training epochs [default: 300].
    #[arg(long)]
    pub epochs: Option<usize>,
    /// Minibatch size, a multiple of --pac [default: 100].
    #[arg(long)]
    pub batch_size: Option<usize>,
    /// Samples per critic pack [default: 10].
    #[arg(long)]
    pub pac: Option<usize>,
    /// Width of the normal latent part [default: 128].
    #[arg(long)]
    pub latent_dim: Option<usize>,
    /// Adam learning rate [default: 2e-4].
    #[arg(long)]
    pub learning_rate: Option<f64>,
    /// Decoupled weight decay [default: 1e-6].
    #[arg(long)]
    pub weight_decay: Option<f64>,
    #[arg(long)]
    pub adam_beta1: Option<f64>,
    #[arg(long)]
    pub adam_beta2: Option<f64>,
    #[arg(long)]
    pub adam_eps: Option<f64>,
    /// Gradient penalty weight [default: 10].
    #[arg(long)]
    pub gp_lambda: Option<f64>,
    /// Gumbel-softmax temperature [default: 0.2].
    #[arg(long)]
    pub gumbel_temperature: Option<f64>,
    /// Critic updates per generator update [default: 1].
    #[arg(long)]
    pub critic_steps: Option<usize>,
    /// Largest k tried by the partitioner.
    #[arg(long)]
    pub k_max: Option<usize>,
    /// Per-cluster penalty of the scaled inertia.
    #[arg(long)]
    pub inertia_penalty: Option<f64>,
    #[arg(long)]
    pub kmeans_max_iter: Option<usize>,
    /// Generator hidden width [default: 256].
    #[arg(long)]
    pub generator_dim: Option<usize>,
    /// Critic hidden width [default: 256].
    #[arg(long)]
    pub critic_dim: Option<usize>,
    /// Critic dropout rate [default: 0.5].
    #[arg(long)]
    pub dropout: Option<f64>,
    /// Master seed [default: 0].
    #[arg(long)]
    pub seed: Option<u64>,
    /// Rejection sampling budget as a multiple of the requested rows.
    #[arg(long)]
    pub max_sample_attempts_factor: Option<usize>,
}

impl TrainArgs {
    pub fn to_config(&self) -> TrainConfig {
        let d = TrainConfig::default();
        TrainConfig {
            epochs: self.epochs.unwrap_or(d.epochs),
            batch_size: self.batch_size.unwrap_or(d.batch_size),
            pac: self.pac.unwrap_or(d.pac),
            latent_dim: self.latent_dim.unwrap_or(d.latent_dim),
            learning_rate: self.learning_rate.unwrap_or(d.learning_rate),
            weight_decay: self.weight_decay.unwrap_or(d.weight_decay),
            adam_beta1: self.adam_beta1.unwrap_or(d.adam_beta1),
            adam_beta2: self.adam_beta2.unwrap_or(d.adam_beta2),
            adam_eps: self.adam_eps.unwrap_or(d.adam_eps),
            gp_lambda: self.gp_lambda.unwrap_or(d.gp_lambda),
            gumbel_temperature: self.gumbel_temperature.unwrap_or(d.gumbel_temperature),
            critic_steps_per_generator_step: self.critic_steps.unwrap_or(d.critic_steps_per_generator_step),
            k_max: self.k_max.unwrap_or(d.k_max),
            inertia_penalty: self.inertia_penalty.unwrap_or(d.inertia_penalty),
            kmeans_max_iter: self.kmeans_max_iter.unwrap_or(d.kmeans_max_iter),
            generator_dim: self.generator_dim.unwrap_or(d.generator_dim),
            critic_dim: self.critic_dim.unwrap_or(d.critic_dim),
            dropout: self.dropout.unwrap_or(d.dropout),
            seed: self.seed.unwrap_or(d.seed),
            max_sample_attempts_factor: self.max_sample_attempts_factor.unwrap_or(d.max_sample_attempts_factor),
        }
    }
}

#[derive(Debug, Args)]
pub struct SampleArgs {
    /// Checkpoint written by `fit`.
    #[arg(long)]
    pub model: PathBuf,
    /// Number of rows.
    #[arg(long)]
    pub n: usize,
    /// Only rows of this class label.
    #[arg(long)]
    pub class: Option<String>,
    /// Fix a discrete column, as `column=category`; repeatable.
    #[arg(long = "where", value_name = "COL=CAT", value_parser = parse_condition)]
    pub conditions: Vec<(String, String)>,
    /// Output CSV.
    #[arg(long)]
    pub out: PathBuf,
    /// Sampling seed.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

fn parse_condition(s: &str) -> Result<(String, String), String> {
    match s.split_once('=') {
        Some((c, v)) if !c.is_empty() => Ok((c.to_string(), v.to_string())),
        _ => Err(format!("expected COL=CAT, got `{s}`")),
    }
}

#[derive(Debug, Args)]
pub struct BalanceArgs {
    #[arg(long)]
    pub model: PathBuf,
    /// CSV to rebalance; read with the checkpoint's schema.
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ProtocolArg {
    Oversampling,
    Fidelity,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ClassifierArg {
    Mlp,
    #[value(name = "1nn")]
    NearestNeighbor,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    #[arg(long, value_enum)]
    pub protocol: ProtocolArg,
    #[command(flatten)]
    pub data: DataArgs,
    /// Comma-separated methods: none, copy, ctdgan.
    #[arg(long, value_delimiter = ',', default_value = "ctdgan,none")]
    pub methods: Vec<String>,
    /// Comma-separated protocol seeds.
    #[arg(long, value_delimiter = ',', default_value = "0,1,42")]
    pub seeds: Vec<u64>,
    #[arg(long, default_value_t = 5)]
    pub folds: usize,
    #[arg(long, value_enum, default_value_t = ClassifierArg::Mlp)]
    pub classifier: ClassifierArg,
    /// MLP training epochs.
    #[arg(long, default_value_t = 100)]
    pub mlp_epochs: usize,
    /// Report JSON.
    #[arg(long)]
    pub out: PathBuf,
    /// Also write a metric bar chart as SVG.
    #[arg(long)]
    pub plot: Option<PathBuf>,
    /// Training configuration of the ctdgan method.
    #[command(flatten)]
    pub train: TrainArgs,
}

#[derive(Debug, Args)]
pub struct InspectArgs {
    #[arg(long)]
    pub model: PathBuf,
    /// Print a JSON summary instead of text.
    #[arg(long)]
    pub json: bool,
}

#[derive(Debug, Args)]
pub struct InferSchemaArgs {
    #[arg(long)]
    pub data: PathBuf,
    /// Name of the class column.
    #[arg(long)]
    pub target: String,
    /// Columns with at most this many distinct values are discrete.
    #[arg(long, default_value_t = ctdgan::data::DEFAULT_DISCRETE_THRESHOLD)]
    pub threshold: usize,
    #[arg(long)]
    pub out: PathBuf,
}
