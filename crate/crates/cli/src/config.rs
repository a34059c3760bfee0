//! Run configuration: a TOML file merged with command-line flags.
//!
//! ```toml
//! seed = 7
//! jobs = 4
//!
//! [data]
//! manifest = "data/mr.toml"
//!
//! [resources]
//! positive_lexicons = ["lex/positive-words.txt"]
//! negative_lexicons = ["lex/negative-words.txt"]
//! embeddings = "vectors.bin"
//! tagger = { mode = "builtin", model = "tagger.json" }
//!
//! [features]
//! max_order = 2
//! dense = true
//!
//! [train]
//! loss = "logistic"
//! ```
//!
//! Relative paths in the file are resolved against the file's directory;
//! paths given as flags are used as-is.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use nblr_core::corpus::{load_dataset, CorpusFormat, Dataset, Manifest, MetricKind, Protocol};
use nblr_core::dense::{DenseConfig, Denominator};
use nblr_core::embeddings::EmbeddingFormat;
use nblr_core::model::{LossKind, TrainConfig};
use nblr_core::pipeline::{FeatureConfig, PipelineConfig, ResourceSpec, TaggerSpec};
use nblr_core::tagger::TagScheme;

use crate::args::{RunArgs, TaggerMode};
use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DataSection {
    pub manifest: Option<PathBuf>,
    pub corpus: Option<PathBuf>,
    pub format: Option<CorpusFormat>,
    pub folds: Option<usize>,
    pub metric: Option<MetricKind>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FeatureSection {
    pub max_order: Option<usize>,
    pub binarize: Option<bool>,
    pub alpha: Option<f64>,
    pub indicators: Option<bool>,
    pub dense: Option<bool>,
    pub pos_groups: Option<bool>,
    pub dense_scale: Option<f64>,
    pub denominator: Option<Denominator>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainSection {
    pub loss: Option<LossKind>,
    pub max_iterations: Option<usize>,
    pub tolerance: Option<f64>,
    pub memory: Option<usize>,
    pub lambda: Option<f64>,
    pub lambda_grid: Option<Vec<f64>>,
    pub inner_folds: Option<usize>,
}

/// The on-disk run configuration. Every field is optional.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: Option<u64>,
    pub jobs: Option<usize>,
    /// `"nblr"` (default) or `"nbsvm"`.
    pub model: Option<String>,
    pub data: DataSection,
    pub resources: ResourceSpec,
    pub features: FeatureSection,
    pub train: TrainSection,
}

impl RunConfig {
    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::config(format!("cannot read config {}: {e}", path.display())))?;
        let mut cfg: RunConfig = toml::from_str(&text)
            .map_err(|e| CliError::config(format!("{}: {}", path.display(), e.message())))?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        cfg.rebase(&base);
        Ok(cfg)
    }

    fn rebase(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        self.data.manifest.iter_mut().for_each(fix);
        self.data.corpus.iter_mut().for_each(fix);
        let r = &mut self.resources;
        r.positive_lexicons.iter_mut().for_each(fix);
        r.negative_lexicons.iter_mut().for_each(fix);
        r.negation_lexicon.iter_mut().for_each(fix);
        r.embeddings.iter_mut().for_each(fix);
        match &mut r.tagger {
            TaggerSpec::None => {}
            TaggerSpec::Builtin { model, mapping } => {
                fix(model);
                mapping.iter_mut().for_each(fix);
            }
            TaggerSpec::Pretagged { files, mapping, .. } => {
                files.iter_mut().for_each(fix);
                mapping.iter_mut().for_each(fix);
            }
        }
    }
}

/// Where the documents come from.
#[derive(Debug, Clone)]
pub enum DataSource {
    Manifest(Manifest),
    Corpus {
        path: PathBuf,
        format: CorpusFormat,
        folds: Option<usize>,
    },
}

/// A fully merged and validated configuration.
#[derive(Debug, Clone)]
pub struct Settings {
    pub source: DataSource,
    pub metric: Option<MetricKind>,
    pub resources: ResourceSpec,
    pub pipeline: PipelineConfig,
}

fn parse_flag<T: std::str::FromStr>(value: &Option<String>, what: &str) -> CliResult<Option<T>>
where
    T::Err: std::fmt::Display,
{
    value
        .as_deref()
        .map(|v| v.parse::<T>().map_err(|e| CliError::config(format!("--{what}: {e}"))))
        .transpose()
}

fn parse_metric(s: &str) -> CliResult<MetricKind> {
    match s.to_ascii_lowercase().as_str() {
        "accuracy" | "acc" => Ok(MetricKind::Accuracy),
        "macro-f1" | "macro_f1" | "f1" => Ok(MetricKind::MacroF1),
        other => Err(CliError::config(format!("--metric: unknown metric {other:?}"))),
    }
}

fn parse_loss(s: &str) -> CliResult<LossKind> {
    match s.to_ascii_lowercase().as_str() {
        "logistic" => Ok(LossKind::Logistic),
        "squared-hinge" | "squared_hinge" | "hinge" => Ok(LossKind::SquaredHinge),
        other => Err(CliError::config(format!("--loss: unknown loss {other:?}"))),
    }
}

fn merge_tagger(file: &TaggerSpec, args: &RunArgs) -> CliResult<TaggerSpec> {
    let scheme: Option<TagScheme> = parse_flag(&args.tag_scheme, "tag-scheme")?;
    let mode = args.tagger.or(match file {
        TaggerSpec::None if args.tagger_model.is_some() => Some(TaggerMode::Builtin),
        TaggerSpec::None if !args.pretagged.is_empty() => Some(TaggerMode::Pretagged),
        _ => None,
    });
    let spec = match (mode, file) {
        (None, file) => file.clone(),
        (Some(TaggerMode::None), _) => TaggerSpec::None,
        (Some(TaggerMode::Builtin), file) => {
            let (model, mapping) = match file {
                TaggerSpec::Builtin { model, mapping } => (Some(model.clone()), mapping.clone()),
                _ => (None, None),
            };
            TaggerSpec::Builtin {
                model: args
                    .tagger_model
                    .clone()
                    .or(model)
                    .ok_or_else(|| CliError::config("builtin tagger needs --tagger-model"))?,
                mapping: args.tag_mapping.clone().or(mapping),
            }
        }
        (Some(TaggerMode::Pretagged), file) => {
            let (files, file_scheme, mapping) = match file {
                TaggerSpec::Pretagged { files, scheme, mapping } => (files.clone(), Some(*scheme), mapping.clone()),
                _ => (Vec::new(), None, None),
            };
            TaggerSpec::Pretagged {
                files: if args.pretagged.is_empty() { files } else { args.pretagged.clone() },
                scheme: scheme.or(file_scheme).unwrap_or(TagScheme::Penn),
                mapping: args.tag_mapping.clone().or(mapping),
            }
        }
    };
    // Flags that tweak the current mode without switching it.
    Ok(match (mode, spec) {
        (None, TaggerSpec::Builtin { model, mapping }) => TaggerSpec::Builtin {
            model: args.tagger_model.clone().unwrap_or(model),
            mapping: args.tag_mapping.clone().or(mapping),
        },
        (None, TaggerSpec::Pretagged { files, scheme: s, mapping }) => TaggerSpec::Pretagged {
            files: if args.pretagged.is_empty() { files } else { args.pretagged.clone() },
            scheme: scheme.unwrap_or(s),
            mapping: args.tag_mapping.clone().or(mapping),
        },
        (_, spec) => spec,
    })
}

impl Settings {
    /// Merges flags over the config file over defaults and validates the
    /// result, including that every referenced file exists.
    pub fn resolve(args: &RunArgs) -> CliResult<Self> {
        let file = match &args.config {
            Some(p) => RunConfig::load(p)?,
            None => RunConfig::default(),
        };

        // Data source.
        let format_flag: Option<CorpusFormat> = parse_flag(&args.format, "format")?;
        let source = match (&args.manifest, &args.corpus) {
            (Some(m), _) => Some((Some(m.clone()), None)),
            (None, Some(c)) => Some((None, Some(c.clone()))),
            (None, None) => match (&file.data.manifest, &file.data.corpus) {
                (Some(_), Some(_)) => {
                    return Err(CliError::config("config [data] sets both manifest and corpus"));
                }
                (m, c) if m.is_some() || c.is_some() => Some((m.clone(), c.clone())),
                _ => None,
            },
        };
        let source = match source {
            None => return Err(CliError::config("no dataset: give --manifest, --corpus or [data] in --config")),
            Some((Some(m), _)) => {
                must_exist(&m, "manifest")?;
                let manifest = Manifest::load(&m)?;
                for f in manifest.corpus_files().iter().chain(&manifest.pretagged_files()) {
                    must_exist(f, "corpus file")?;
                }
                DataSource::Manifest(manifest)
            }
            Some((None, Some(c))) => {
                must_exist(&c, "corpus")?;
                DataSource::Corpus {
                    path: c,
                    format: format_flag.or(file.data.format).unwrap_or(CorpusFormat::Labeled),
                    folds: args.folds.or(file.data.folds),
                }
            }
            Some((None, None)) => unreachable!(),
        };
        let metric = match &args.metric {
            Some(m) => Some(parse_metric(m)?),
            None => file.data.metric,
        };

        // Resources.
        let mut resources = file.resources.clone();
        if !args.pos_lexicons.is_empty() {
            resources.positive_lexicons = args.pos_lexicons.clone();
        }
        if !args.neg_lexicons.is_empty() {
            resources.negative_lexicons = args.neg_lexicons.clone();
        }
        if args.negation_lexicon.is_some() {
            resources.negation_lexicon = args.negation_lexicon.clone();
        }
        if args.embeddings.is_some() {
            resources.embeddings = args.embeddings.clone();
        }
        if let Some(f) = parse_flag::<EmbeddingFormat>(&args.embedding_format, "embedding-format")? {
            resources.embedding_format = Some(f);
        }
        resources.tagger = merge_tagger(&file.resources.tagger, args)?;

        // Features.
        let nbsvm = args.nbsvm
            || match file.model.as_deref() {
                None | Some("nblr") => false,
                Some("nbsvm") => true,
                Some(other) => return Err(CliError::config(format!("unknown model {other:?}; use nblr or nbsvm"))),
            };
        let base = if nbsvm { FeatureConfig::nbsvm() } else { FeatureConfig::default() };
        let ff = &file.features;
        let dense_on = args.dense.or(ff.dense).unwrap_or(base.dense.is_some());
        let denominator = if args.literal_denominator {
            Denominator::Literal
        } else {
            ff.denominator.unwrap_or_default()
        };
        let features = FeatureConfig {
            max_order: args.max_order.or(ff.max_order).unwrap_or(base.max_order),
            binarize: args.binarize.or(ff.binarize).unwrap_or(base.binarize),
            alpha: args.alpha.or(ff.alpha).unwrap_or(base.alpha),
            indicators: args.indicators.or(ff.indicators).unwrap_or(base.indicators),
            dense: dense_on.then(|| DenseConfig {
                pos_groups: args.pos_groups.or(ff.pos_groups).unwrap_or(true),
                denominator,
                scale: args.dense_scale.or(ff.dense_scale).unwrap_or(1.0),
            }),
        };

        // Training.
        let defaults = PipelineConfig::default();
        let ft = &file.train;
        let seed = args.seed.or(file.seed).unwrap_or(defaults.seed);
        let loss = match &args.loss {
            Some(l) => parse_loss(l)?,
            None => ft.loss.unwrap_or_default(),
        };
        let train_defaults = TrainConfig::default();
        let pipeline = PipelineConfig {
            features,
            train: TrainConfig {
                lambda: train_defaults.lambda,
                tolerance: args.tolerance.or(ft.tolerance).unwrap_or(train_defaults.tolerance),
                max_iterations: args.max_iterations.or(ft.max_iterations).unwrap_or(train_defaults.max_iterations),
                seed,
                loss,
                memory: ft.memory.unwrap_or(train_defaults.memory),
            },
            lambda: args.lambda.or(ft.lambda),
            lambda_grid: args.lambda_grid.clone().or(ft.lambda_grid.clone()).unwrap_or(defaults.lambda_grid),
            inner_folds: args.inner_folds.or(ft.inner_folds).unwrap_or(defaults.inner_folds),
            seed,
            jobs: args.jobs.or(file.jobs).unwrap_or(defaults.jobs),
        };
        pipeline.validate()?;

        let settings = Settings {
            source,
            metric,
            resources,
            pipeline,
        };
        settings.check_resources()?;
        Ok(settings)
    }

    fn check_resources(&self) -> CliResult<()> {
        let r = &self.resources;
        let f = &self.pipeline.features;
        if f.indicators {
            for p in r.positive_lexicons.iter().chain(&r.negative_lexicons).chain(&r.negation_lexicon) {
                must_exist(p, "lexicon")?;
            }
        }
        if f.dense.is_some() {
            let e = r
                .embeddings
                .as_ref()
                .ok_or_else(|| CliError::config("dense features need --embeddings (or --dense false / --nbsvm)"))?;
            must_exist(e, "embedding file")?;
            match &r.tagger {
                TaggerSpec::None => {}
                TaggerSpec::Builtin { model, mapping } => {
                    must_exist(model, "tagger model")?;
                    if let Some(m) = mapping {
                        must_exist(m, "tag mapping")?;
                    }
                }
                TaggerSpec::Pretagged { files, mapping, .. } => {
                    for p in files {
                        must_exist(p, "pre-tagged file")?;
                    }
                    if files.is_empty() && self.manifest().is_none_or(|m| m.pretagged.is_empty()) {
                        return Err(CliError::config("pre-tagged mode needs --pretagged files or manifest pretagged"));
                    }
                    if let Some(m) = mapping {
                        must_exist(m, "tag mapping")?;
                    }
                }
            }
        }
        Ok(())
    }

    pub fn manifest(&self) -> Option<&Manifest> {
        match &self.source {
            DataSource::Manifest(m) => Some(m),
            DataSource::Corpus { .. } => None,
        }
    }

    pub fn load_dataset(&self) -> CliResult<Dataset> {
        match &self.source {
            DataSource::Manifest(m) => Ok(m.load_dataset()?),
            DataSource::Corpus { path, format, folds } => {
                let mut ds = load_dataset(path, *format)?;
                if let Some(k) = folds {
                    if *k < 2 {
                        return Err(CliError::config(format!("--folds must be at least 2, got {k}")));
                    }
                    ds.protocol = Protocol::CrossValidation { folds: *k };
                }
                Ok(ds)
            }
        }
    }

    pub fn metric(&self) -> MetricKind {
        self.metric
            .or(self.manifest().map(|m| m.metric))
            .unwrap_or(MetricKind::Accuracy)
    }

    /// The resource spec with absolute paths, as stored in model files.
    pub fn absolute_resources(&self) -> ResourceSpec {
        let abs = |p: &PathBuf| std::fs::canonicalize(p).unwrap_or_else(|_| p.clone());
        let mut r = self.resources.clone();
        r.positive_lexicons = r.positive_lexicons.iter().map(abs).collect();
        r.negative_lexicons = r.negative_lexicons.iter().map(abs).collect();
        r.negation_lexicon = r.negation_lexicon.as_ref().map(abs);
        r.embeddings = r.embeddings.as_ref().map(abs);
        r.tagger = match r.tagger {
            TaggerSpec::Builtin { model, mapping } => TaggerSpec::Builtin {
                model: abs(&model),
                mapping: mapping.as_ref().map(abs),
            },
            TaggerSpec::Pretagged { files, scheme, mapping } => TaggerSpec::Pretagged {
                files: files.iter().map(abs).collect(),
                scheme,
                mapping: mapping.as_ref().map(abs),
            },
            TaggerSpec::None => TaggerSpec::None,
        };
        r
    }
}

pub fn must_exist(path: &Path, what: &str) -> CliResult<()> {
    if path.is_file() {
        Ok(())
    } else {
        Err(CliError::config(format!("{what} {} does not exist", path.display())))
    }
}
