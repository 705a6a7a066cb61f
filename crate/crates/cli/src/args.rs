//! Command-line surface: one subcommand per pipeline stage.

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Parser)]
#[command(
    name = "datasieve",
    version,
    about = "Score, filter, and select text corpus subsets that match a target domain",
    propagate_version = true
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand)]
pub enum Command {
    /// Split documents into fixed-size word chunks
    Chunk(ChunkArgs),
    /// Drop degenerate text with the four-rule quality filter
    Filter(FilterArgs),
    /// Fit a hashed n-gram distribution from a corpus
    Fit(FitArgs),
    /// Train the target-vs-raw logistic classifier
    TrainClf(TrainClfArgs),
    /// Score examples with fitted models or a classifier
    Score(ScoreArgs),
    /// Select k examples from a scores file
    Select(SelectArgs),
    /// Pull selected examples out of a corpus by id
    Extract(ExtractArgs),
    /// Compare target/raw/selected distributions (KL + composition)
    Report(ReportArgs),
}

/// Selection strategies. Weight-based methods (dsir, clf-gumbel) perturb
/// log-weights with seeded Gumbel noise; the rest rank or threshold
/// classifier probabilities, or ignore scores entirely.
#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Method {
    /// Gumbel top-k over two-model log importance weights
    Dsir,
    /// Gumbel top-k over classifier log-odds
    ClfGumbel,
    /// Plain top-k by classifier probability
    ClfTopk,
    /// Repeated noisy thresholding of classifier probabilities
    ClfNoisy,
    /// Seeded uniform sample, scores ignored
    Random,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum QuotaStrategyArg {
    /// Gumbel top-k within each group
    Gumbel,
    /// Seeded uniform sample within each group
    Random,
}

#[derive(Args)]
pub struct ChunkArgs {
    /// Input documents (JSONL: {"id","text","source"})
    #[arg(long)]
    pub input: PathBuf,
    /// Output chunks (JSONL, ids "<doc-id>-<n>")
    #[arg(long)]
    pub output: PathBuf,
    /// Words per chunk [default: 128]
    #[arg(long)]
    pub chunk_size: Option<usize>,
    /// Drop a trailing chunk shorter than the chunk size
    #[arg(long)]
    pub drop_last_short: bool,
    /// Join adjacent chunk pairs after splitting
    #[arg(long)]
    pub concat_pairs: bool,
    /// JSON config file (flags override it)
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Args)]
pub struct FilterArgs {
    /// Input corpus (JSONL)
    #[arg(long)]
    pub input: PathBuf,
    /// Output corpus of examples passing all four rules
    #[arg(long)]
    pub output: PathBuf,
    /// Where to write the JSON filter report
    #[arg(long)]
    pub report: Option<PathBuf>,
    /// Minimum word count, inclusive [default: 40]
    #[arg(long)]
    pub min_words: Option<usize>,
    /// Maximum word count, inclusive [default: 500]
    #[arg(long)]
    pub max_words: Option<usize>,
    /// Minimum most-frequent-word ratio, inclusive [default: 0.02]
    #[arg(long)]
    pub min_repeat: Option<f64>,
    /// Maximum most-frequent-word ratio, inclusive [default: 0.2]
    #[arg(long)]
    pub max_repeat: Option<f64>,
    /// Minimum non-stopword ratio, inclusive [default: 0.3]
    #[arg(long)]
    pub min_informativeness: Option<f64>,
    /// Maximum non-stopword ratio, inclusive [default: 0.7]
    #[arg(long)]
    pub max_informativeness: Option<f64>,
    /// Numeric-token ratio must stay strictly below this [default: 0.2]
    #[arg(long)]
    pub max_numeric: Option<f64>,
    /// JSON config file (flags override it)
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Args)]
pub struct FitArgs {
    /// Input corpus (JSONL)
    #[arg(long)]
    pub input: PathBuf,
    /// Output model file
    #[arg(long)]
    pub output: PathBuf,
    /// This corpus is the target domain
    #[arg(long, conflicts_with = "raw", required_unless_present = "raw")]
    pub target: bool,
    /// This corpus is the raw pool
    #[arg(long)]
    pub raw: bool,
    /// Hash buckets shared by unigrams and bigrams [default: 10000]
    #[arg(long)]
    pub num_buckets: Option<u32>,
    /// Count unigrams only
    #[arg(long)]
    pub no_bigrams: bool,
    /// Uniform smoothing mass in [0,1) [default: 1e-5]
    #[arg(long)]
    pub smoothing: Option<f64>,
    /// Fit from at most this many examples
    #[arg(long)]
    pub max_examples: Option<usize>,
    /// JSON config file (flags override it)
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Args)]
pub struct TrainClfArgs {
    /// Target-domain corpus (JSONL), the positive class
    #[arg(long)]
    pub target: PathBuf,
    /// Raw-pool corpus (JSONL), the negative class
    #[arg(long)]
    pub raw: PathBuf,
    /// Output model file
    #[arg(long)]
    pub output: PathBuf,
    /// Hash buckets [default: 10000]
    #[arg(long)]
    pub num_buckets: Option<u32>,
    /// Count unigrams only
    #[arg(long)]
    pub no_bigrams: bool,
    /// Comma-separated l2 grid [default: 1e-4,1e-3,1e-2,1e-1,1]
    #[arg(long)]
    pub l2_grid: Option<String>,
    /// Seed for class balancing [default: 0]
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Use at most this many examples per class file
    #[arg(long)]
    pub max_examples: Option<usize>,
    /// JSON config file (flags override it)
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Args)]
pub struct ScoreArgs {
    /// Input corpus (JSONL)
    #[arg(long)]
    pub input: PathBuf,
    /// Output scores (JSONL: {"id","source","log_weight"} or "prob")
    #[arg(long)]
    pub output: PathBuf,
    /// Target-domain n-gram model (with --raw-model)
    #[arg(long)]
    pub target_model: Option<PathBuf>,
    /// Raw-pool n-gram model (with --target-model)
    #[arg(long)]
    pub raw_model: Option<PathBuf>,
    /// Classifier model; emits probabilities instead of log-weights
    #[arg(long)]
    pub clf_model: Option<PathBuf>,
    /// Hash buckets; must match the model [default: from model]
    #[arg(long)]
    pub num_buckets: Option<u32>,
    /// Count unigrams only
    #[arg(long)]
    pub no_bigrams: bool,
    /// Worker threads [default: 1]; output is identical for any value
    #[arg(long)]
    pub workers: Option<usize>,
    /// JSON config file (flags override it)
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Args)]
pub struct SelectArgs {
    /// Scores file from `score` (either shape)
    #[arg(long)]
    pub scores: PathBuf,
    /// Output selection (JSONL: {"id","final_score","log_weight","source"})
    #[arg(long)]
    pub output: PathBuf,
    /// How many examples to keep
    #[arg(short, long)]
    pub k: usize,
    /// Noise seed; required so every run is reproducible
    #[arg(long)]
    pub seed: u64,
    /// Selection strategy
    #[arg(long, value_enum)]
    pub method: Method,
    /// Per-source fractions as inline JSON or a path to a JSON file
    /// (weight-based methods only)
    #[arg(long)]
    pub quotas: Option<String>,
    /// Within-group strategy when --quotas is given
    #[arg(long, value_enum, default_value_t = QuotaStrategyArg::Gumbel)]
    pub quota_strategy: QuotaStrategyArg,
    /// Lomax tail shape for clf-noisy [default: 9]
    #[arg(long)]
    pub pareto_shape: Option<f64>,
    /// Also write the kept ids, one per line
    #[arg(long)]
    pub ids_out: Option<PathBuf>,
    /// JSON config file (flags override it)
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Args)]
pub struct ExtractArgs {
    /// Corpus to extract from (JSONL)
    #[arg(long)]
    pub input: PathBuf,
    /// Ids to keep: plain id-per-line file, or any JSONL with an "id" field
    #[arg(long)]
    pub ids: PathBuf,
    /// Output corpus (JSONL, corpus order)
    #[arg(long)]
    pub output: PathBuf,
}

#[derive(Args)]
pub struct ReportArgs {
    /// Target-domain corpus (JSONL)
    #[arg(long)]
    pub target: PathBuf,
    /// Raw-pool corpus (JSONL)
    #[arg(long)]
    pub raw: PathBuf,
    /// Selected subset corpus (JSONL)
    #[arg(long)]
    pub selected: PathBuf,
    /// Output report (JSON)
    #[arg(long)]
    pub output: PathBuf,
    /// Hash buckets [default: 10000]
    #[arg(long)]
    pub num_buckets: Option<u32>,
    /// Count unigrams only
    #[arg(long)]
    pub no_bigrams: bool,
    /// Smoothing mass for the compared distributions [default: 1e-5]
    #[arg(long)]
    pub smoothing: Option<f64>,
    /// Fit each distribution from at most this many examples
    /// [default: 100000]
    #[arg(long)]
    pub max_examples: Option<usize>,
    /// JSON config file (flags override it)
    #[arg(long)]
    pub config: Option<PathBuf>,
}
