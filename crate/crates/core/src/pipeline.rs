//! End-to-end feature extraction, fold fitting and the benchmark protocol.
//!
//! Unsupervised transforms (tokenization, indicator tokens, tagging and the
//! dense embedding features) are computed once per document. Everything
//! fitted from labels, namely the vocabulary, the log-count ratios, the
//! regularization strength and the classifier, is fitted per fold from
//! training documents only.

use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::corpus::{make_splits, stratified_folds, Dataset, Document, Fold, Manifest, MetricKind};
use crate::dense::{dense_feature, DenseConfig};
use crate::embeddings::{EmbeddingFormat, EmbeddingTable};
use crate::error::{Error, Result};
use crate::label::{ClassSet, Label};
use crate::metrics::{accuracy, macro_f1};
use crate::model::{predict, train, FeatureRow, LinearModel, Prediction, TrainConfig};
use crate::preprocess::{append_indicators, load_lexicon, tokenize, Lexicon, LexiconKind, LexiconSet, TokenSequence};
use crate::report::{BenchmarkReport, FoldResult};
use crate::sparse::{
    build_vocabulary, count_vector, fit_log_ratios, sparse_feature, LogRatioTable, Vocabulary, DEFAULT_ALPHA,
    DEFAULT_MAX_ORDER,
};
use crate::tagger::{parse_pretagged, CoarseMapping, PerceptronTagger, TagScheme, TaggedSentence};

/// Regularization strengths tried by nested cross-validation.
pub const DEFAULT_LAMBDA_GRID: [f64; 5] = [1e-4, 1e-3, 1e-2, 1e-1, 1.0];
pub const DEFAULT_INNER_FOLDS: usize = 5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FeatureConfig {
    #[serde(default = "default_max_order")]
    pub max_order: usize,
    #[serde(default = "default_true")]
    pub binarize: bool,
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    /// Append lexicon indicator tokens before n-gram extraction.
    #[serde(default = "default_true")]
    pub indicators: bool,
    /// Dense embedding features; `None` gives the sparse-only NBSVM model.
    #[serde(default = "default_dense")]
    pub dense: Option<DenseConfig>,
}

fn default_max_order() -> usize {
    DEFAULT_MAX_ORDER
}

fn default_true() -> bool {
    true
}

fn default_alpha() -> f64 {
    DEFAULT_ALPHA
}

fn default_dense() -> Option<DenseConfig> {
    Some(DenseConfig::default())
}

impl Default for FeatureConfig {
    fn default() -> Self {
        FeatureConfig {
            max_order: DEFAULT_MAX_ORDER,
            binarize: true,
            alpha: DEFAULT_ALPHA,
            indicators: true,
            dense: Some(DenseConfig::default()),
        }
    }
}

impl FeatureConfig {
    /// Sparse-only configuration: uni+bigrams, binarized, no indicators.
    pub fn nbsvm() -> Self {
        FeatureConfig {
            indicators: false,
            dense: None,
            ..FeatureConfig::default()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineConfig {
    #[serde(default)]
    pub features: FeatureConfig,
    #[serde(default)]
    pub train: TrainConfig,
    /// Use this regularization strength instead of grid selection.
    #[serde(default)]
    pub lambda: Option<f64>,
    #[serde(default = "default_grid")]
    pub lambda_grid: Vec<f64>,
    #[serde(default = "default_inner_folds")]
    pub inner_folds: usize,
    #[serde(default)]
    pub seed: u64,
    /// Folds evaluated concurrently. Results do not depend on this value.
    #[serde(default = "default_jobs")]
    pub jobs: usize,
}

fn default_grid() -> Vec<f64> {
    DEFAULT_LAMBDA_GRID.to_vec()
}

fn default_inner_folds() -> usize {
    DEFAULT_INNER_FOLDS
}

fn default_jobs() -> usize {
    1
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            features: FeatureConfig::default(),
            train: TrainConfig::default(),
            lambda: None,
            lambda_grid: default_grid(),
            inner_folds: DEFAULT_INNER_FOLDS,
            seed: 0,
            jobs: 1,
        }
    }
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<()> {
        let f = &self.features;
        if f.max_order < 1 {
            return Err(Error::Config("max_order must be at least 1".into()));
        }
        if !(f.alpha > 0.0 && f.alpha.is_finite()) {
            return Err(Error::Config(format!("alpha must be positive, got {}", f.alpha)));
        }
        if let Some(d) = &f.dense {
            if !d.scale.is_finite() {
                return Err(Error::Config("dense scale must be finite".into()));
            }
        }
        self.train.validate()?;
        match self.lambda {
            Some(l) if !(l >= 0.0 && l.is_finite()) => {
                return Err(Error::Config(format!("lambda must be finite and >= 0, got {l}")))
            }
            Some(_) => {}
            None => {
                if self.lambda_grid.is_empty() || self.lambda_grid.iter().any(|l| !(*l >= 0.0 && l.is_finite())) {
                    return Err(Error::Config("lambda grid must be a non-empty list of values >= 0".into()));
                }
                if self.inner_folds < 2 {
                    return Err(Error::Config("inner_folds must be at least 2".into()));
                }
            }
        }
        if self.jobs < 1 {
            return Err(Error::Config("jobs must be at least 1".into()));
        }
        Ok(())
    }

    /// Display name of the configured model.
    pub fn model_name(&self, tagged: bool) -> &'static str {
        match &self.features.dense {
            None => "NBSVM",
            Some(d) if d.pos_groups && tagged => "NBLR + POSwemb",
            Some(_) => "NBLR + wemb",
        }
    }
}

/// How POS tags are obtained.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "kebab-case", deny_unknown_fields)]
pub enum TaggerSpec {
    /// No tagging; dense features are `v_avg` only.
    #[default]
    None,
    Builtin {
        model: PathBuf,
        #[serde(default)]
        mapping: Option<PathBuf>,
    },
    /// `word_TAG` files aligned with the corpus. An empty list means the
    /// files named in the dataset manifest.
    Pretagged {
        #[serde(default)]
        files: Vec<PathBuf>,
        #[serde(default = "default_scheme")]
        scheme: TagScheme,
        #[serde(default)]
        mapping: Option<PathBuf>,
    },
}

fn default_scheme() -> TagScheme {
    TagScheme::Penn
}

/// File references for the external resources a pipeline needs.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ResourceSpec {
    #[serde(default)]
    pub positive_lexicons: Vec<PathBuf>,
    #[serde(default)]
    pub negative_lexicons: Vec<PathBuf>,
    /// Negation/adversative list; the built-in list is used when absent.
    #[serde(default)]
    pub negation_lexicon: Option<PathBuf>,
    #[serde(default)]
    pub embeddings: Option<PathBuf>,
    #[serde(default)]
    pub embedding_format: Option<EmbeddingFormat>,
    #[serde(default)]
    pub tagger: TaggerSpec,
}

/// Per-document tag source.
#[derive(Debug, Clone, PartialEq)]
pub enum TagSource {
    None,
    Tagger(PerceptronTagger),
    /// One sentence per document, in document order.
    Pretagged(Vec<TaggedSentence>),
}

/// Loaded resources.
#[derive(Debug, Clone)]
pub struct Resources {
    pub lexicons: LexiconSet,
    pub embeddings: Option<EmbeddingTable>,
    pub tags: TagSource,
}

impl Resources {
    pub fn none() -> Self {
        Resources {
            lexicons: LexiconSet::default(),
            embeddings: None,
            tags: TagSource::None,
        }
    }

    /// Loads everything named by `spec` that `features` uses. Pre-tagged
    /// files are checked against `documents` for alignment.
    pub fn load(spec: &ResourceSpec, features: &FeatureConfig, documents: usize, manifest: Option<&Manifest>) -> Result<Self> {
        let mut lexicons = LexiconSet::default();
        if features.indicators {
            for p in &spec.positive_lexicons {
                lexicons.add(load_lexicon(p, LexiconKind::Positive)?)?;
            }
            for p in &spec.negative_lexicons {
                lexicons.add(load_lexicon(p, LexiconKind::Negative)?)?;
            }
            lexicons.add(match &spec.negation_lexicon {
                Some(p) => load_lexicon(p, LexiconKind::Negation)?,
                None => Lexicon::default_negations(),
            })?;
        }
        let mut embeddings = None;
        let mut tags = TagSource::None;
        if features.dense.is_some() {
            let path = spec
                .embeddings
                .as_ref()
                .ok_or_else(|| Error::Config("dense features need an embedding file".into()))?;
            let format = spec.embedding_format.unwrap_or_else(|| guess_embedding_format(path));
            embeddings = Some(EmbeddingTable::load(path, format)?);
            tags = match &spec.tagger {
                TaggerSpec::None => TagSource::None,
                TaggerSpec::Builtin { model, mapping } => {
                    let mut t = PerceptronTagger::load(model)?;
                    if let Some(m) = mapping {
                        t.mapping.load_overrides(m)?;
                    }
                    TagSource::Tagger(t)
                }
                TaggerSpec::Pretagged { files, scheme, mapping } => {
                    let mut coarse = CoarseMapping::new(*scheme);
                    if let Some(m) = mapping {
                        coarse.load_overrides(m)?;
                    }
                    let files = if files.is_empty() {
                        manifest.map(Manifest::pretagged_files).unwrap_or_default()
                    } else {
                        files.clone()
                    };
                    if files.is_empty() {
                        return Err(Error::Config("pre-tagged mode needs pre-tagged files".into()));
                    }
                    let mut content = String::new();
                    for f in &files {
                        let text = fs::read_to_string(f).map_err(|e| Error::io(f, e))?;
                        content.push_str(&text);
                        if !text.is_empty() && !text.ends_with('\n') {
                            content.push('\n');
                        }
                    }
                    TagSource::Pretagged(parse_pretagged(&content, documents, &coarse)?)
                }
            };
        }
        Ok(Resources {
            lexicons,
            embeddings,
            tags,
        })
    }
}

/// `.bin` files are binary word2vec, everything else text.
pub fn guess_embedding_format(path: &Path) -> EmbeddingFormat {
    match path.extension().and_then(|e| e.to_str()) {
        Some("bin") => EmbeddingFormat::Binary,
        _ => EmbeddingFormat::Text,
    }
}

/// A document after the label-independent transforms.
#[derive(Debug, Clone, PartialEq)]
pub struct PreparedDoc {
    pub tokens: TokenSequence,
    pub dense: Option<Vec<f64>>,
    pub label: Label,
}

/// Tokenizes, appends indicators and computes dense features for every document.
pub fn prepare_documents(docs: &[Document], resources: &Resources, features: &FeatureConfig) -> Result<Vec<PreparedDoc>> {
    if let TagSource::Pretagged(s) = &resources.tags {
        if s.len() != docs.len() {
            return Err(Error::LengthMismatch(format!(
                "{} pre-tagged sentences for {} documents",
                s.len(),
                docs.len()
            )));
        }
    }
    if features.dense.is_some() && resources.embeddings.is_none() {
        return Err(Error::Config("dense features need an embedding table".into()));
    }
    docs.iter()
        .enumerate()
        .map(|(i, doc)| {
            let mut tokens = tokenize(&doc.text);
            if features.indicators && !resources.lexicons.is_empty() {
                tokens = append_indicators(&tokens, &resources.lexicons);
            }
            let dense = match (&features.dense, &resources.embeddings) {
                (Some(cfg), Some(table)) => {
                    let target = doc.target.as_deref().map(tokenize);
                    let target = target.as_deref();
                    let f = match &resources.tags {
                        TagSource::None => dense_feature(&tokens, None, table, target, cfg)?,
                        TagSource::Tagger(t) => {
                            let tags = t.tag(&tokens);
                            dense_feature(&tokens, Some(&tags), table, target, cfg)?
                        }
                        TagSource::Pretagged(sentences) => {
                            let s = &sentences[i];
                            dense_feature(&s.words, Some(&s.tags), table, target, cfg)?
                        }
                    };
                    Some(f.values)
                }
                _ => None,
            };
            Ok(PreparedDoc {
                tokens,
                dense,
                label: doc.label,
            })
        })
        .collect()
}

/// Vocabulary and log-count ratios fitted on training documents.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FittedFeatures {
    pub vocabulary: Vocabulary,
    pub ratios: LogRatioTable,
    pub binarize: bool,
}

impl FittedFeatures {
    pub fn fit(train: &[&PreparedDoc], config: &FeatureConfig) -> Result<Self> {
        let token_lists: Vec<&[String]> = train.iter().map(|d| &d.tokens[..]).collect();
        let vocabulary = build_vocabulary(&token_lists, config.max_order)?;
        let counts: Vec<_> = train
            .iter()
            .map(|d| (count_vector(&d.tokens, &vocabulary, config.binarize), d.label))
            .collect();
        let classes = ClassSet::new(train.iter().map(|d| d.label))?;
        let ratios = fit_log_ratios(&counts, &classes, config.alpha)?;
        Ok(FittedFeatures {
            vocabulary,
            ratios,
            binarize: config.binarize,
        })
    }

    pub fn row(&self, doc: &PreparedDoc) -> Result<FeatureRow> {
        let counts = count_vector(&doc.tokens, &self.vocabulary, self.binarize);
        let sparse = sparse_feature(&counts, &self.ratios)?;
        Ok(FeatureRow {
            sparse_dim: sparse.dim,
            sparse: sparse.entries,
            dense: doc.dense.clone().unwrap_or_default(),
        })
    }
}

/// Everything fitted for one fold.
#[derive(Debug, Clone, PartialEq)]
pub struct FoldFit {
    pub features: FittedFeatures,
    pub lambda: f64,
    /// Mean inner-validation score per grid value, empty for a fixed lambda.
    pub lambda_scores: Vec<(f64, f64)>,
    pub model: LinearModel,
}

fn score(metric: MetricKind, pred: &[Label], gold: &[Label], classes: &ClassSet) -> Result<f64> {
    match metric {
        MetricKind::Accuracy => accuracy(pred, gold),
        MetricKind::MacroF1 => macro_f1(pred, gold, classes),
    }
}

fn fit_and_train(docs: &[&PreparedDoc], config: &PipelineConfig, lambda: f64) -> Result<(FittedFeatures, LinearModel)> {
    let features = FittedFeatures::fit(docs, &config.features)?;
    let rows = docs
        .iter()
        .map(|d| Ok((features.row(d)?, d.label)))
        .collect::<Result<Vec<_>>>()?;
    let train_cfg = TrainConfig {
        lambda,
        ..config.train.clone()
    };
    let model = train(&rows, &train_cfg)?;
    Ok((features, model))
}

fn evaluate(
    features: &FittedFeatures,
    model: &LinearModel,
    docs: &[&PreparedDoc],
    metric: MetricKind,
) -> Result<(f64, Vec<Label>)> {
    let mut pred = Vec::with_capacity(docs.len());
    for d in docs {
        pred.push(predict(model, &features.row(d)?)?.label);
    }
    let gold: Vec<Label> = docs.iter().map(|d| d.label).collect();
    Ok((score(metric, &pred, &gold, &model.classes)?, pred))
}

/// Mixes a fold index into the top-level seed.
pub fn derive_seed(seed: u64, stream: u64) -> u64 {
    let mut z = seed ^ stream.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Picks lambda by stratified inner cross-validation over `train`. Ties go
/// to the larger lambda.
pub fn select_lambda(
    train: &[&PreparedDoc],
    config: &PipelineConfig,
    metric: MetricKind,
    seed: u64,
) -> Result<(f64, Vec<(f64, f64)>)> {
    let labels: Vec<Label> = train.iter().map(|d| d.label).collect();
    let inner = stratified_folds(&labels, config.inner_folds, seed)?;
    let mut scores = Vec::with_capacity(config.lambda_grid.len());
    for &lambda in &config.lambda_grid {
        let mut total = 0.0;
        for fold in &inner {
            let tr: Vec<&PreparedDoc> = fold.train.iter().map(|&i| train[i]).collect();
            let te: Vec<&PreparedDoc> = fold.test.iter().map(|&i| train[i]).collect();
            let (features, model) = fit_and_train(&tr, config, lambda)?;
            total += evaluate(&features, &model, &te, metric)?.0;
        }
        scores.push((lambda, total / inner.len() as f64));
    }
    let best = scores
        .iter()
        .copied()
        .fold(None::<(f64, f64)>, |acc, (l, s)| match acc {
            Some((bl, bs)) if bs > s || (bs == s && bl > l) => Some((bl, bs)),
            _ => Some((l, s)),
        })
        .expect("non-empty grid");
    Ok((best.0, scores))
}

/// Fits vocabulary, ratios, lambda and classifier on `train_idx` only.
pub fn fit_fold(
    prepared: &[PreparedDoc],
    train_idx: &[usize],
    config: &PipelineConfig,
    metric: MetricKind,
    seed: u64,
) -> Result<FoldFit> {
    let train: Vec<&PreparedDoc> = train_idx.iter().map(|&i| &prepared[i]).collect();
    let (lambda, lambda_scores) = match config.lambda {
        Some(l) => (l, Vec::new()),
        None => select_lambda(&train, config, metric, seed)?,
    };
    let (features, model) = fit_and_train(&train, config, lambda)?;
    Ok(FoldFit {
        features,
        lambda,
        lambda_scores,
        model,
    })
}

fn run_fold(
    prepared: &[PreparedDoc],
    k: usize,
    fold: &Fold,
    config: &PipelineConfig,
    metric: MetricKind,
) -> Result<FoldResult> {
    let fit = fit_fold(prepared, &fold.train, config, metric, derive_seed(config.seed, k as u64))?;
    let test: Vec<&PreparedDoc> = fold.test.iter().map(|&i| &prepared[i]).collect();
    let (value, _) = evaluate(&fit.features, &fit.model, &test, metric)?;
    let summary = fit.model.summary.clone();
    log::info!("fold {k}: {metric:?} {value:.4} (lambda {})", fit.lambda);
    Ok(FoldResult {
        fold: k,
        train_size: fold.train.len(),
        test_size: fold.test.len(),
        value,
        lambda: fit.lambda,
        lambda_scores: fit.lambda_scores,
        iterations: summary.as_ref().map_or(0, |s| s.iterations),
        final_objective: summary.map_or(f64::NAN, |s| s.final_objective),
    })
}

/// Runs the evaluation protocol of `dataset` and aggregates fold metrics.
pub fn run_benchmark(
    dataset: &Dataset,
    resources: &Resources,
    config: &PipelineConfig,
    metric: MetricKind,
) -> Result<BenchmarkReport> {
    config.validate()?;
    let prepared = prepare_documents(&dataset.documents, resources, &config.features)?;
    let plan = make_splits(dataset, config.seed)?;
    let run = |(k, fold): (usize, &Fold)| {
        run_fold(&prepared, k, fold, config, metric).map_err(|e| Error::Fold {
            fold: k,
            source: Box::new(e),
        })
    };
    let folds: Vec<FoldResult> = if config.jobs > 1 {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(config.jobs)
            .build()
            .map_err(|e| Error::Config(format!("cannot start {} workers: {e}", config.jobs)))?;
        pool.install(|| plan.folds.par_iter().enumerate().map(run).collect::<Result<Vec<_>>>())?
    } else {
        plan.folds.iter().enumerate().map(run).collect::<Result<Vec<_>>>()?
    };
    let tagged = !matches!(resources.tags, TagSource::None);
    Ok(BenchmarkReport::new(
        &dataset.name,
        config.model_name(tagged),
        metric,
        folds,
        serde_json::to_value(config).map_err(|e| Error::Serde(e.to_string()))?,
    ))
}

/// A trained pipeline as stored in a model file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainedPipeline {
    pub dataset: String,
    pub config: PipelineConfig,
    pub resources: ResourceSpec,
    pub features: FittedFeatures,
    pub lambda: f64,
    pub model: LinearModel,
}

pub const MODEL_FORMAT: &str = "nblr-model";
pub const MODEL_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct ModelFile {
    format: String,
    version: u32,
    digest: String,
    body: TrainedPipeline,
}

fn digest_of(body: &TrainedPipeline) -> Result<String> {
    let bytes = serde_json::to_vec(body).map_err(|e| Error::Serde(e.to_string()))?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

impl TrainedPipeline {
    /// Fits on `train_idx` of `prepared`, selecting lambda by inner CV unless fixed.
    pub fn fit(
        dataset_name: &str,
        prepared: &[PreparedDoc],
        train_idx: &[usize],
        config: &PipelineConfig,
        resources: ResourceSpec,
        metric: MetricKind,
    ) -> Result<Self> {
        config.validate()?;
        let fit = fit_fold(prepared, train_idx, config, metric, derive_seed(config.seed, u64::MAX))?;
        Ok(TrainedPipeline {
            dataset: dataset_name.to_string(),
            config: config.clone(),
            resources,
            features: fit.features,
            lambda: fit.lambda,
            model: fit.model,
        })
    }

    pub fn predict(&self, doc: &PreparedDoc) -> Result<Prediction> {
        predict(&self.model, &self.features.row(doc)?)
    }

    pub fn to_json(&self) -> Result<String> {
        let file = ModelFile {
            format: MODEL_FORMAT.into(),
            version: MODEL_VERSION,
            digest: digest_of(self)?,
            body: self.clone(),
        };
        serde_json::to_string(&file).map_err(|e| Error::Serde(e.to_string()))
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: ModelFile = serde_json::from_str(text).map_err(|e| Error::Serde(e.to_string()))?;
        if file.format != MODEL_FORMAT || file.version != MODEL_VERSION {
            return Err(Error::Serde(format!(
                "unsupported model file {} v{}",
                file.format, file.version
            )));
        }
        let computed = digest_of(&file.body)?;
        if computed != file.digest {
            return Err(Error::DigestMismatch {
                stored: file.digest,
                computed,
            });
        }
        Ok(file.body)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_json()?).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }
}
