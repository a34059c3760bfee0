//! Benchmark corpora and evaluation splits.
//!
//! Every dataset is consumed in one tab-separated format, one record per
//! line: `<label>\t<text>` or, for target-dependent data,
//! `<label>\t<target>\t<text>`. A TOML manifest names the files, the class
//! set and the evaluation protocol.

use std::collections::BTreeMap;
use std::fs;
use std::ops::Range;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::label::{ClassSet, Label};

/// Number of folds used for cross-validated datasets unless a manifest says otherwise.
pub const DEFAULT_FOLDS: usize = 10;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Document {
    pub text: String,
    pub label: Label,
    /// Target phrase for target-dependent sentiment records.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target: Option<String>,
}

impl Document {
    pub fn new(text: impl Into<String>, label: Label) -> Self {
        Document {
            text: text.into(),
            label,
            target: None,
        }
    }

    pub fn with_target(mut self, target: impl Into<String>) -> Self {
        self.target = Some(target.into());
        self
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Protocol {
    CrossValidation { folds: usize },
    Heldout { train: Range<usize>, test: Range<usize> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    pub name: String,
    pub documents: Vec<Document>,
    pub classes: ClassSet,
    pub protocol: Protocol,
}

impl Dataset {
    /// Builds a dataset, checking label membership and protocol ranges.
    pub fn new(
        name: impl Into<String>,
        documents: Vec<Document>,
        classes: ClassSet,
        protocol: Protocol,
    ) -> Result<Self> {
        if documents.is_empty() {
            return Err(Error::Empty("dataset has no documents".into()));
        }
        for d in &documents {
            if !classes.contains(d.label) {
                return Err(Error::LabelOutsideClasses {
                    label: d.label.to_string(),
                });
            }
        }
        if let Protocol::Heldout { train, test } = &protocol {
            if train.start != 0 || train.end != test.start || test.end != documents.len() || test.is_empty() {
                return Err(Error::Config(format!(
                    "heldout ranges {train:?}/{test:?} do not partition {} documents",
                    documents.len()
                )));
            }
        }
        if let Protocol::CrossValidation { folds } = protocol {
            if folds < 2 {
                return Err(Error::Config(format!("cross-validation needs at least 2 folds, got {folds}")));
            }
        }
        Ok(Dataset {
            name: name.into(),
            documents,
            classes,
            protocol,
        })
    }

    pub fn len(&self) -> usize {
        self.documents.len()
    }

    pub fn is_empty(&self) -> bool {
        self.documents.is_empty()
    }

    pub fn labels(&self) -> Vec<Label> {
        self.documents.iter().map(|d| d.label).collect()
    }

    pub fn class_counts(&self) -> BTreeMap<Label, usize> {
        let mut counts = BTreeMap::new();
        for d in &self.documents {
            *counts.entry(d.label).or_insert(0) += 1;
        }
        counts
    }
}

/// Record layout of a corpus file.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CorpusFormat {
    /// `<label>\t<text>`
    Labeled,
    /// `<label>\t<target>\t<text>`
    Targeted,
}

impl FromStr for CorpusFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "labeled" => Ok(CorpusFormat::Labeled),
            "targeted" => Ok(CorpusFormat::Targeted),
            other => Err(Error::Config(format!("unknown corpus format {other:?}"))),
        }
    }
}

/// Parses corpus records from an in-memory string. `path` is only used in
/// error messages.
pub fn parse_documents(content: &str, format: CorpusFormat, path: &Path) -> Result<Vec<Document>> {
    let mut docs = Vec::new();
    for (i, line) in content.lines().enumerate() {
        let lineno = i + 1;
        let line = line.strip_suffix('\r').unwrap_or(line);
        let fields_wanted = match format {
            CorpusFormat::Labeled => 2,
            CorpusFormat::Targeted => 3,
        };
        let fields: Vec<&str> = line.splitn(fields_wanted, '\t').collect();
        if fields.len() != fields_wanted {
            return Err(Error::parse(
                path,
                lineno,
                format!("expected {fields_wanted} tab-separated fields, found {}", fields.len()),
            ));
        }
        let label = Label::from_str(fields[0]).map_err(|_| Error::UnknownLabel {
            token: fields[0].to_string(),
            line: lineno,
        })?;
        let text = fields[fields_wanted - 1];
        if text.trim().is_empty() {
            return Err(Error::parse(path, lineno, "empty text field"));
        }
        let mut doc = Document::new(text, label);
        if format == CorpusFormat::Targeted {
            let target = fields[1].trim();
            if target.is_empty() {
                return Err(Error::parse(path, lineno, "empty target field"));
            }
            doc.target = Some(target.to_string());
        }
        docs.push(doc);
    }
    if docs.is_empty() {
        return Err(Error::Empty(format!("corpus file {} has no records", path.display())));
    }
    Ok(docs)
}

pub fn read_documents(path: &Path, format: CorpusFormat) -> Result<Vec<Document>> {
    let content = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_documents(&content, format, path)
}

/// Loads a single corpus file as a cross-validated dataset named after the file stem.
///
/// Binary class sets are used unless the file is target-dependent or
/// contains neutral records.
pub fn load_dataset(path: &Path, format: CorpusFormat) -> Result<Dataset> {
    let documents = read_documents(path, format)?;
    let ternary = format == CorpusFormat::Targeted || documents.iter().any(|d| d.label == Label::Neutral);
    let classes = if ternary { ClassSet::ternary() } else { ClassSet::binary() };
    let name = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "dataset".into());
    Dataset::new(name, documents, classes, Protocol::CrossValidation { folds: DEFAULT_FOLDS })
}

/// Which metric a dataset is reported with.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MetricKind {
    #[default]
    Accuracy,
    MacroF1,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum ManifestProtocol {
    CrossValidation {
        #[serde(default = "default_folds")]
        folds: usize,
        files: Vec<PathBuf>,
    },
    Heldout {
        train: Vec<PathBuf>,
        test: Vec<PathBuf>,
    },
}

fn default_folds() -> usize {
    DEFAULT_FOLDS
}

/// Dataset manifest, normally stored as TOML next to the corpus files.
///
/// ```toml
/// name = "MR"
/// format = "labeled"
/// classes = ["+1", "-1"]
///
/// [protocol]
/// kind = "cross-validation"
/// folds = 10
/// files = ["mr.tsv"]
///
/// [expected_counts]
/// "+1" = 5331
/// "-1" = 5331
/// ```
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Manifest {
    pub name: String,
    pub format: CorpusFormat,
    pub classes: Vec<Label>,
    pub protocol: ManifestProtocol,
    #[serde(default)]
    pub metric: MetricKind,
    /// Pre-tagged files aligned with the corpus files, in the same order.
    #[serde(default)]
    pub pretagged: Vec<PathBuf>,
    #[serde(default)]
    pub expected_counts: BTreeMap<String, usize>,
    /// Directory relative paths are resolved against; set by [`Manifest::load`].
    #[serde(skip)]
    pub base_dir: PathBuf,
}

impl Manifest {
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut m: Manifest =
            toml::from_str(&text).map_err(|e| Error::Config(format!("{}: {}", path.display(), e.message())))?;
        m.base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Ok(m)
    }

    pub fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base_dir.join(p)
        }
    }

    /// Corpus files in document order.
    pub fn corpus_files(&self) -> Vec<PathBuf> {
        let files: Vec<&PathBuf> = match &self.protocol {
            ManifestProtocol::CrossValidation { files, .. } => files.iter().collect(),
            ManifestProtocol::Heldout { train, test } => train.iter().chain(test).collect(),
        };
        files.into_iter().map(|p| self.resolve(p)).collect()
    }

    pub fn pretagged_files(&self) -> Vec<PathBuf> {
        self.pretagged.iter().map(|p| self.resolve(p)).collect()
    }

    pub fn load_dataset(&self) -> Result<Dataset> {
        let classes = ClassSet::new(self.classes.iter().copied())?;
        let (documents, protocol) = match &self.protocol {
            ManifestProtocol::CrossValidation { folds, files } => {
                let mut docs = Vec::new();
                for f in files {
                    docs.extend(read_documents(&self.resolve(f), self.format)?);
                }
                (docs, Protocol::CrossValidation { folds: *folds })
            }
            ManifestProtocol::Heldout { train, test } => {
                let mut docs = Vec::new();
                for f in train {
                    docs.extend(read_documents(&self.resolve(f), self.format)?);
                }
                let n_train = docs.len();
                for f in test {
                    docs.extend(read_documents(&self.resolve(f), self.format)?);
                }
                let n = docs.len();
                (
                    docs,
                    Protocol::Heldout {
                        train: 0..n_train,
                        test: n_train..n,
                    },
                )
            }
        };
        let dataset = Dataset::new(self.name.clone(), documents, classes, protocol)?;
        if !self.expected_counts.is_empty() {
            let counts = dataset.class_counts();
            for (label, &expected) in &self.expected_counts {
                let label: Label = label.parse()?;
                let found = counts.get(&label).copied().unwrap_or(0);
                if found != expected {
                    return Err(Error::Config(format!(
                        "dataset {}: class {label} has {found} documents, manifest declares {expected}",
                        self.name
                    )));
                }
            }
        }
        Ok(dataset)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Fold {
    pub train: Vec<usize>,
    pub test: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitPlan {
    pub folds: Vec<Fold>,
    pub seed: u64,
}

/// Builds the evaluation folds for `dataset`.
///
/// Cross-validation folds are stratified by class and fully determined by
/// `seed`; a heldout protocol yields its single declared fold.
pub fn make_splits(dataset: &Dataset, seed: u64) -> Result<SplitPlan> {
    let folds = match &dataset.protocol {
        Protocol::CrossValidation { folds } => stratified_folds(&dataset.labels(), *folds, seed)?,
        Protocol::Heldout { train, test } => vec![Fold {
            train: train.clone().collect(),
            test: test.clone().collect(),
        }],
    };
    Ok(SplitPlan { folds, seed })
}

/// Stratified k-fold assignment over `labels`.
///
/// Each class is shuffled with a seeded ChaCha stream and dealt round-robin
/// into folds; the deal position carries over between classes so fold sizes
/// differ by at most one.
pub fn stratified_folds(labels: &[Label], k: usize, seed: u64) -> Result<Vec<Fold>> {
    if k < 2 {
        return Err(Error::InvalidArgument(format!("need at least 2 folds, got {k}")));
    }
    let mut by_class: BTreeMap<Label, Vec<usize>> = BTreeMap::new();
    for (i, &l) in labels.iter().enumerate() {
        by_class.entry(l).or_default().push(i);
    }
    if let Some((label, members)) = by_class.iter().find(|(_, m)| m.len() < k) {
        return Err(Error::ClassTooSmall(format!("{label} ({} members, {k} folds)", members.len())));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut tests: Vec<Vec<usize>> = vec![Vec::new(); k];
    let mut position = 0usize;
    for members in by_class.values_mut() {
        members.shuffle(&mut rng);
        for &idx in members.iter() {
            tests[position % k].push(idx);
            position += 1;
        }
    }
    let n = labels.len();
    Ok(tests
        .into_iter()
        .map(|mut test| {
            test.sort_unstable();
            let mut in_test = vec![false; n];
            for &i in &test {
                in_test[i] = true;
            }
            let train = (0..n).filter(|&i| !in_test[i]).collect();
            Fold { train, test }
        })
        .collect())
}
