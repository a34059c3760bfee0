use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(
    name = "nblr",
    version,
    about = "Sentiment classification with NB log-count-ratio n-grams and POS-grouped word embeddings"
)]
pub struct Cli {
    /// Increase log verbosity (-v info, -vv debug). Logs go to stderr.
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Validate resources and write a vocabulary-filtered embedding cache.
    Prepare(PrepareArgs),
    /// Fit a model on the training documents and write a model file.
    Train(TrainArgs),
    /// Label documents with a trained model.
    Predict(PredictArgs),
    /// Run the dataset's evaluation protocol and report the metric.
    Benchmark(BenchmarkArgs),
    /// Train the averaged-perceptron POS tagger on a `word_TAG` corpus.
    TagTrain(TagTrainArgs),
    /// POS-tag raw text, writing `word_TAG` lines.
    Tag(TagArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum TaggerMode {
    None,
    Builtin,
    Pretagged,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum InputFormat {
    /// One raw document per line.
    Text,
    /// `label<TAB>text`; the label is ignored.
    Labeled,
    /// `label<TAB>target<TAB>text`; the label is ignored.
    Targeted,
}

/// Options shared by the commands that read a dataset. Flags override the
/// config file, which overrides built-in defaults.
#[derive(Debug, Clone, Default, Args)]
pub struct RunArgs {
    /// TOML run configuration.
    #[arg(short, long)]
    pub config: Option<PathBuf>,

    /// Dataset manifest (TOML).
    #[arg(long, conflicts_with = "corpus")]
    pub manifest: Option<PathBuf>,
    /// Single corpus file evaluated by cross-validation.
    #[arg(long)]
    pub corpus: Option<PathBuf>,
    /// Record layout of --corpus: labeled or targeted.
    #[arg(long)]
    pub format: Option<String>,
    /// Folds for --corpus.
    #[arg(long)]
    pub folds: Option<usize>,
    /// accuracy or macro-f1.
    #[arg(long)]
    pub metric: Option<String>,

    #[arg(long)]
    pub seed: Option<u64>,
    /// Folds evaluated concurrently; results do not depend on it.
    #[arg(long)]
    pub jobs: Option<usize>,

    #[arg(long = "pos-lexicon")]
    pub pos_lexicons: Vec<PathBuf>,
    #[arg(long = "neg-lexicon")]
    pub neg_lexicons: Vec<PathBuf>,
    #[arg(long)]
    pub negation_lexicon: Option<PathBuf>,
    #[arg(long)]
    pub embeddings: Option<PathBuf>,
    /// binary or text; guessed from the extension when absent.
    #[arg(long)]
    pub embedding_format: Option<String>,

    #[arg(long, value_enum)]
    pub tagger: Option<TaggerMode>,
    #[arg(long)]
    pub tagger_model: Option<PathBuf>,
    /// `word_TAG` files aligned with the corpus.
    #[arg(long)]
    pub pretagged: Vec<PathBuf>,
    /// penn or ark.
    #[arg(long)]
    pub tag_scheme: Option<String>,
    /// `FINE<TAB>COARSE` override file for the coarse tag mapping.
    #[arg(long)]
    pub tag_mapping: Option<PathBuf>,

    /// Sparse-only baseline: no indicator tokens and no dense block.
    #[arg(long)]
    pub nbsvm: bool,
    #[arg(long)]
    pub max_order: Option<usize>,
    #[arg(long)]
    pub binarize: Option<bool>,
    #[arg(long)]
    pub alpha: Option<f64>,
    #[arg(long)]
    pub indicators: Option<bool>,
    #[arg(long)]
    pub dense: Option<bool>,
    #[arg(long)]
    pub pos_groups: Option<bool>,
    #[arg(long)]
    pub dense_scale: Option<f64>,
    /// Divide group sums by every group member, not just those with vectors.
    #[arg(long)]
    pub literal_denominator: bool,

    /// Fixed regularization strength; disables grid selection.
    #[arg(long)]
    pub lambda: Option<f64>,
    /// Comma-separated lambda grid.
    #[arg(long, value_delimiter = ',')]
    pub lambda_grid: Option<Vec<f64>>,
    #[arg(long)]
    pub inner_folds: Option<usize>,
    /// logistic or squared-hinge.
    #[arg(long)]
    pub loss: Option<String>,
    #[arg(long)]
    pub max_iterations: Option<usize>,
    #[arg(long)]
    pub tolerance: Option<f64>,
}

#[derive(Debug, Args)]
pub struct PrepareArgs {
    #[command(flatten)]
    pub run: RunArgs,
    /// Where to write the filtered embedding cache (word2vec text format).
    #[arg(short, long)]
    pub output: PathBuf,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[command(flatten)]
    pub run: RunArgs,
    /// Model file to write.
    #[arg(short, long)]
    pub output: PathBuf,
}

#[derive(Debug, Args)]
pub struct PredictArgs {
    #[arg(short, long)]
    pub model: PathBuf,
    #[arg(short, long)]
    pub input: PathBuf,
    /// Defaults to stdout.
    #[arg(short, long)]
    pub output: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "text")]
    pub input_format: InputFormat,
    /// Embedding file to use instead of the one recorded in the model.
    #[arg(long)]
    pub embeddings: Option<PathBuf>,
    /// Tagger model to use instead of the one recorded in the model.
    #[arg(long)]
    pub tagger_model: Option<PathBuf>,
    /// `word_TAG` lines aligned with the input, for models trained on pre-tagged input.
    #[arg(long)]
    pub pretagged: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct BenchmarkArgs {
    #[command(flatten)]
    pub run: RunArgs,
    /// JSON report file.
    #[arg(short, long)]
    pub output: Option<PathBuf>,
    /// Also write the human-readable table here.
    #[arg(long)]
    pub table: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct TagTrainArgs {
    /// `word_TAG` corpus, one sentence per line.
    #[arg(short, long)]
    pub input: PathBuf,
    #[arg(short, long)]
    pub output: PathBuf,
    #[arg(long, default_value_t = 5)]
    pub epochs: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// penn or ark.
    #[arg(long, default_value = "penn")]
    pub scheme: String,
    #[arg(long)]
    pub mapping: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct TagArgs {
    #[arg(short, long)]
    pub model: PathBuf,
    /// Raw text, one sentence per line.
    #[arg(short, long)]
    pub input: PathBuf,
    /// Defaults to stdout.
    #[arg(short, long)]
    pub output: Option<PathBuf>,
    /// Print coarse groups (NOUN, VERB, ADJ, OTHER) instead of fine tags.
    #[arg(long)]
    pub coarse: bool,
}
