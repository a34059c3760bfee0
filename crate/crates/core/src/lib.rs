//! Sentiment classification with Naive Bayes log-count-ratio n-gram features
//! and POS-grouped word-embedding features, fed to a logistic-regression
//! classifier.
//!
//! The pipeline for one document:
//!
//! 1. [`preprocess::tokenize`] and [`preprocess::append_indicators`];
//! 2. a sparse block from [`sparse`]: the binarized n-gram indicator vector
//!    multiplied by each class's log-count ratio, concatenated over classes;
//! 3. a dense block from [`dense`]: the mean embedding of all words and of the
//!    nouns, verbs and adjectives, tagged by [`tagger`];
//! 4. a multinomial logistic regression from [`model`].
//!
//! [`pipeline::run_benchmark`] runs the cross-validation or heldout protocol of
//! a [`corpus::Dataset`] and reports accuracy or macro-F1.

pub mod corpus;
pub mod dense;
pub mod embeddings;
pub mod error;
pub mod label;
pub mod metrics;
pub mod model;
pub mod pipeline;
pub mod preprocess;
pub mod report;
pub mod sparse;
pub mod synthetic;
pub mod tagger;

pub use corpus::{load_dataset, make_splits, CorpusFormat, Dataset, Document, Manifest, MetricKind, Protocol, SplitPlan};
pub use dense::{average_embedding, dense_feature, pos_group_embedding, DenseConfig, DenseFeature, Denominator};
pub use embeddings::{EmbeddingFormat, EmbeddingTable};
pub use error::{Error, ErrorClass, Result};
pub use label::{ClassSet, Label};
pub use metrics::{accuracy, macro_f1};
pub use model::{loss_and_gradient, predict, train, train_nbsvm_baseline, FeatureRow, LinearModel, LossKind, TrainConfig};
pub use pipeline::{run_benchmark, FeatureConfig, PipelineConfig, Resources, ResourceSpec, TagSource, TaggerSpec, TrainedPipeline};
pub use preprocess::{append_indicators, tokenize, Lexicon, LexiconKind, LexiconSet, TokenSequence};
pub use report::BenchmarkReport;
pub use sparse::{build_vocabulary, count_vector, fit_log_ratios, sparse_feature, CountVector, LogRatioTable, SparseFeature, Vocabulary};
pub use tagger::{coarsen, CoarseTag, PerceptronTagger, TagScheme, TagSequence};
