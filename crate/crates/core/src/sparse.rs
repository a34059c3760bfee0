//! N-gram vocabularies, log-count ratios and the per-class sparse feature.
//!
//! For every class `l` the smoothed count vectors
//!
//! ```text
//! p_l = alpha + sum_{i : y_i = l} f_i
//! q_l = alpha + sum_{i : y_i != l} f_i
//! ```
//!
//! give the log-count ratio `r_l = ln((p_l / |p_l|_1) / (q_l / |q_l|_1))`.
//! A document's sparse feature is the concatenation, over classes in
//! canonical order, of its binarized count vector multiplied elementwise by
//! `r_l`.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::label::{ClassSet, Label};

/// Separator between tokens of an n-gram key. Tokens never contain spaces.
const NGRAM_SEP: char = ' ';

pub const DEFAULT_MAX_ORDER: usize = 2;
pub const DEFAULT_ALPHA: f64 = 1.0;

/// Calls `f` with every n-gram of order `1..=max_order` in `tokens`, in
/// order of first token position, shorter n-grams first.
pub fn for_each_ngram<S: AsRef<str>>(tokens: &[S], max_order: usize, mut f: impl FnMut(&str)) {
    let mut key = String::new();
    for start in 0..tokens.len() {
        key.clear();
        for (n, tok) in tokens[start..].iter().take(max_order).enumerate() {
            if n > 0 {
                key.push(NGRAM_SEP);
            }
            key.push_str(tok.as_ref());
            f(&key);
        }
    }
}

/// Bijective map between n-grams and dense column indices `[0, V)`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(from = "VocabularyRepr", into = "VocabularyRepr")]
pub struct Vocabulary {
    max_order: usize,
    ngrams: Vec<String>,
    index: HashMap<String, u32>,
}

#[derive(Serialize, Deserialize)]
struct VocabularyRepr {
    max_order: usize,
    ngrams: Vec<String>,
}

impl From<VocabularyRepr> for Vocabulary {
    fn from(r: VocabularyRepr) -> Self {
        let index = r
            .ngrams
            .iter()
            .enumerate()
            .map(|(i, g)| (g.clone(), i as u32))
            .collect();
        Vocabulary {
            max_order: r.max_order,
            ngrams: r.ngrams,
            index,
        }
    }
}

impl From<Vocabulary> for VocabularyRepr {
    fn from(v: Vocabulary) -> Self {
        VocabularyRepr {
            max_order: v.max_order,
            ngrams: v.ngrams,
        }
    }
}

impl Vocabulary {
    pub fn len(&self) -> usize {
        self.ngrams.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ngrams.is_empty()
    }

    pub fn max_order(&self) -> usize {
        self.max_order
    }

    /// Column of the n-gram given as its tokens.
    pub fn get(&self, ngram: &[&str]) -> Option<u32> {
        let key = ngram.join(&NGRAM_SEP.to_string());
        self.index.get(&key).copied()
    }

    pub fn get_key(&self, key: &str) -> Option<u32> {
        self.index.get(key).copied()
    }

    pub fn ngram(&self, index: u32) -> Option<&str> {
        self.ngrams.get(index as usize).map(String::as_str)
    }
}

/// Collects every n-gram of order `1..=max_order` in `docs`, indexed in
/// first-occurrence order.
pub fn build_vocabulary<S: AsRef<str>>(docs: &[impl AsRef<[S]>], max_order: usize) -> Result<Vocabulary> {
    if max_order < 1 {
        return Err(Error::InvalidArgument("max_order must be at least 1".into()));
    }
    if docs.is_empty() {
        return Err(Error::Empty("vocabulary training set".into()));
    }
    let mut ngrams = Vec::new();
    let mut index: HashMap<String, u32> = HashMap::new();
    for doc in docs {
        for_each_ngram(doc.as_ref(), max_order, |g| {
            if !index.contains_key(g) {
                index.insert(g.to_string(), ngrams.len() as u32);
                ngrams.push(g.to_string());
            }
        });
    }
    Ok(Vocabulary {
        max_order,
        ngrams,
        index,
    })
}

/// Sparse count vector over a vocabulary of size `dim`; entries sorted by index.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CountVector {
    pub dim: usize,
    pub entries: Vec<(u32, u32)>,
}

impl CountVector {
    pub fn empty(dim: usize) -> Self {
        CountVector { dim, entries: Vec::new() }
    }

    pub fn binarized(&self) -> CountVector {
        CountVector {
            dim: self.dim,
            entries: self.entries.iter().map(|&(i, _)| (i, 1)).collect(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

/// Counts the in-vocabulary n-grams of `tokens`; out-of-vocabulary n-grams are skipped.
pub fn count_vector<S: AsRef<str>>(tokens: &[S], vocab: &Vocabulary, binarize: bool) -> CountVector {
    let mut counts: HashMap<u32, u32> = HashMap::new();
    for_each_ngram(tokens, vocab.max_order, |g| {
        if let Some(i) = vocab.get_key(g) {
            *counts.entry(i).or_insert(0) += 1;
        }
    });
    let mut entries: Vec<(u32, u32)> = counts
        .into_iter()
        .map(|(i, c)| (i, if binarize { 1 } else { c }))
        .collect();
    entries.sort_unstable_by_key(|&(i, _)| i);
    CountVector {
        dim: vocab.len(),
        entries,
    }
}

/// Per-class log-count-ratio vectors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogRatioTable {
    pub classes: ClassSet,
    pub alpha: f64,
    /// One vector of length `V` per class, in class-set order.
    pub ratios: Vec<Vec<f64>>,
}

impl LogRatioTable {
    pub fn dim(&self) -> usize {
        self.ratios.first().map_or(0, Vec::len)
    }

    pub fn ratio(&self, label: Label) -> Option<&[f64]> {
        self.classes.index_of(label).map(|c| self.ratios[c].as_slice())
    }

    /// Length of the concatenated sparse feature, `|classes| * V`.
    pub fn feature_dim(&self) -> usize {
        self.classes.len() * self.dim()
    }
}

/// Fits `r_l` for every class from labelled count vectors.
pub fn fit_log_ratios(train: &[(CountVector, Label)], classes: &ClassSet, alpha: f64) -> Result<LogRatioTable> {
    if !(alpha > 0.0 && alpha.is_finite()) {
        return Err(Error::InvalidArgument(format!("alpha must be positive and finite, got {alpha}")));
    }
    let Some((first, _)) = train.first() else {
        return Err(Error::Empty("log-ratio training set".into()));
    };
    let dim = first.dim;
    let c = classes.len();
    let mut per_class = vec![vec![0.0f64; dim]; c];
    let mut members = vec![0usize; c];
    for (counts, label) in train {
        if counts.dim != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                found: counts.dim,
            });
        }
        let k = classes.index_of(*label).ok_or_else(|| Error::LabelOutsideClasses {
            label: label.to_string(),
        })?;
        members[k] += 1;
        for &(i, n) in &counts.entries {
            per_class[k][i as usize] += f64::from(n);
        }
    }
    if let Some(k) = members.iter().position(|&m| m == 0) {
        return Err(Error::ClassTooSmall(format!(
            "{} has no training documents",
            classes.labels()[k]
        )));
    }
    let total: Vec<f64> = (0..dim).map(|j| per_class.iter().map(|v| v[j]).sum()).collect();
    let total_mass: f64 = total.iter().sum();
    let ratios = per_class
        .iter()
        .map(|in_class| {
            let class_mass: f64 = in_class.iter().sum();
            let p_norm = alpha * dim as f64 + class_mass;
            let q_norm = alpha * dim as f64 + (total_mass - class_mass);
            in_class
                .iter()
                .zip(&total)
                .map(|(&inside, &all)| {
                    let p = alpha + inside;
                    let q = alpha + (all - inside);
                    ((p * q_norm) / (q * p_norm)).ln()
                })
                .collect()
        })
        .collect();
    Ok(LogRatioTable {
        classes: classes.clone(),
        alpha,
        ratios,
    })
}

/// A document's concatenated per-class sparse feature of length `|classes| * V`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SparseFeature {
    pub dim: usize,
    /// Non-zero support, sorted by index.
    pub entries: Vec<(u32, f64)>,
    pub counts: CountVector,
}

pub fn sparse_feature(counts: &CountVector, ratios: &LogRatioTable) -> Result<SparseFeature> {
    let v = ratios.dim();
    if counts.dim != v {
        return Err(Error::DimensionMismatch {
            expected: v,
            found: counts.dim,
        });
    }
    let mut entries = Vec::with_capacity(counts.entries.len() * ratios.ratios.len());
    for (block, r) in ratios.ratios.iter().enumerate() {
        let offset = (block * v) as u32;
        entries.extend(counts.entries.iter().map(|&(j, _)| (offset + j, r[j as usize])));
    }
    Ok(SparseFeature {
        dim: ratios.feature_dim(),
        entries,
        counts: counts.clone(),
    })
}
