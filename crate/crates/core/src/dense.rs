//! Averaged and POS-grouped embedding features.
//!
//! The dense feature of a document is `[v_avg | v_NOUN | v_VERB | v_ADJECTIVE]`,
//! optionally followed by the averaged embedding of the target phrase. Each
//! block has the embedding dimensionality; groups without resolvable words
//! contribute a zero block.

use serde::{Deserialize, Serialize};

use crate::embeddings::EmbeddingTable;
use crate::error::{Error, Result};
use crate::preprocess::is_indicator;
use crate::tagger::{CoarseTag, TagSequence};

/// Which tokens a group average divides by.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Denominator {
    /// Group members that have an embedding.
    #[default]
    Resolved,
    /// Every group member, with or without an embedding.
    Literal,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DenseConfig {
    /// Emit the noun/verb/adjective blocks. Without tags only `v_avg` is produced.
    #[serde(default = "yes")]
    pub pos_groups: bool,
    #[serde(default)]
    pub denominator: Denominator,
    /// Multiplier applied to every dense component.
    #[serde(default = "one")]
    pub scale: f64,
}

fn yes() -> bool {
    true
}

fn one() -> f64 {
    1.0
}

impl Default for DenseConfig {
    fn default() -> Self {
        DenseConfig {
            pos_groups: true,
            denominator: Denominator::Resolved,
            scale: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DenseFeature {
    pub values: Vec<f64>,
    /// Embedding dimensionality, the width of every block.
    pub block_dim: usize,
}

impl DenseFeature {
    pub fn blocks(&self) -> impl Iterator<Item = &[f64]> {
        self.values.chunks(self.block_dim.max(1))
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// Number of dense values produced for the given layout.
pub fn dense_len(block_dim: usize, pos_groups: bool, target: bool) -> usize {
    let blocks = 1 + if pos_groups { CoarseTag::GROUPS.len() } else { 0 } + usize::from(target);
    blocks * block_dim
}

/// Mean of the embeddings of all non-indicator tokens that resolve in `table`.
pub fn average_embedding<S: AsRef<str>>(tokens: &[S], table: &EmbeddingTable) -> Vec<f64> {
    let mut sum = vec![0.0f64; table.dim()];
    let mut n = 0usize;
    for t in tokens {
        let t = t.as_ref();
        if is_indicator(t) {
            continue;
        }
        if let Some(v) = table.lookup(t) {
            accumulate(&mut sum, v);
            n += 1;
        }
    }
    divide(sum, n)
}

/// Mean embedding of tokens whose coarse tag is `group`.
pub fn pos_group_embedding<S: AsRef<str>>(
    tokens: &[S],
    tags: &TagSequence,
    group: CoarseTag,
    table: &EmbeddingTable,
) -> Result<Vec<f64>> {
    pos_group_embedding_with(tokens, tags, group, table, Denominator::Resolved)
}

pub fn pos_group_embedding_with<S: AsRef<str>>(
    tokens: &[S],
    tags: &TagSequence,
    group: CoarseTag,
    table: &EmbeddingTable,
    denominator: Denominator,
) -> Result<Vec<f64>> {
    if tags.len() != tokens.len() {
        return Err(Error::LengthMismatch(format!(
            "{} tokens but {} tags",
            tokens.len(),
            tags.len()
        )));
    }
    let mut sum = vec![0.0f64; table.dim()];
    let mut n = 0usize;
    for (t, &c) in tokens.iter().zip(&tags.coarse) {
        if c != group || is_indicator(t.as_ref()) {
            continue;
        }
        match table.lookup(t.as_ref()) {
            Some(v) => {
                accumulate(&mut sum, v);
                n += 1;
            }
            None if denominator == Denominator::Literal => n += 1,
            None => {}
        }
    }
    Ok(divide(sum, n))
}

fn accumulate(sum: &mut [f64], v: &[f32]) {
    for (s, &x) in sum.iter_mut().zip(v) {
        *s += f64::from(x);
    }
}

fn divide(mut sum: Vec<f64>, n: usize) -> Vec<f64> {
    if n > 0 {
        let n = n as f64;
        sum.iter_mut().for_each(|s| *s /= n);
    }
    sum
}

/// Concatenates `v_avg`, the group blocks (when `tags` is given and
/// `config.pos_groups` is set) and the target block (when `target` is given).
pub fn dense_feature<S: AsRef<str>, T: AsRef<str>>(
    tokens: &[S],
    tags: Option<&TagSequence>,
    table: &EmbeddingTable,
    target: Option<&[T]>,
    config: &DenseConfig,
) -> Result<DenseFeature> {
    let with_groups = config.pos_groups && tags.is_some();
    let mut values = Vec::with_capacity(dense_len(table.dim(), with_groups, target.is_some()));
    values.extend(average_embedding(tokens, table));
    if let (true, Some(tags)) = (config.pos_groups, tags) {
        for group in CoarseTag::GROUPS {
            values.extend(pos_group_embedding_with(tokens, tags, group, table, config.denominator)?);
        }
    }
    if let Some(target) = target {
        values.extend(average_embedding(target, table));
    }
    if config.scale != 1.0 {
        values.iter_mut().for_each(|v| *v *= config.scale);
    }
    Ok(DenseFeature {
        values,
        block_dim: table.dim(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tagger::{CoarseMapping, TagScheme};

    fn table() -> EmbeddingTable {
        EmbeddingTable::from_entries(
            2,
            [
                ("dog", vec![2.0, 4.0]),
                ("x", vec![1.0, 0.0]),
                ("y", vec![0.0, 1.0]),
                ("big", vec![1.0, 1.0]),
                ("red", vec![3.0, 3.0]),
                ("runs", vec![-1.0, 5.0]),
            ],
        )
        .unwrap()
    }

    fn tags(fine: &[&str]) -> TagSequence {
        TagSequence::from_fine(fine.iter().map(|s| s.to_string()).collect(), &CoarseMapping::new(TagScheme::Penn))
    }

    #[test]
    fn average_examples() {
        let t = table();
        assert_eq!(average_embedding(&["dog"], &t), vec![2.0, 4.0]);
        assert_eq!(average_embedding(&["x", "y"], &t), vec![0.5, 0.5]);
        assert_eq!(average_embedding(&["zzz", "qqq"], &t), vec![0.0, 0.0]);
        assert_eq!(average_embedding(&["dog", "<POS_IND>"], &t), vec![2.0, 4.0]);
        assert_eq!(average_embedding(&["Dog"], &t), vec![2.0, 4.0]);
    }

    #[test]
    fn group_examples() {
        let t = table();
        let v = pos_group_embedding(&["the", "dog", "runs"], &tags(&["DT", "NN", "VBZ"]), CoarseTag::Noun, &t).unwrap();
        assert_eq!(v, vec![2.0, 4.0]);
        let v = pos_group_embedding(&["the", "dog"], &tags(&["DT", "NN"]), CoarseTag::Adjective, &t).unwrap();
        assert_eq!(v, vec![0.0, 0.0]);
        let v = pos_group_embedding(&["big", "red"], &tags(&["JJ", "JJ"]), CoarseTag::Adjective, &t).unwrap();
        assert_eq!(v, vec![2.0, 2.0]);
        assert!(pos_group_embedding(&["big"], &tags(&["JJ", "NN"]), CoarseTag::Noun, &t).is_err());
    }

    #[test]
    fn literal_denominator_counts_oov() {
        let t = table();
        let tg = tags(&["JJ", "JJ"]);
        let resolved = pos_group_embedding_with(&["big", "zzz"], &tg, CoarseTag::Adjective, &t, Denominator::Resolved).unwrap();
        let literal = pos_group_embedding_with(&["big", "zzz"], &tg, CoarseTag::Adjective, &t, Denominator::Literal).unwrap();
        assert_eq!(resolved, vec![1.0, 1.0]);
        assert_eq!(literal, vec![0.5, 0.5]);
    }

    #[test]
    fn feature_layouts() {
        let t = table();
        let cfg = DenseConfig::default();
        let toks = ["big", "dog", "runs"];
        let tg = tags(&["JJ", "NN", "VBZ"]);
        let f = dense_feature::<_, &str>(&toks, Some(&tg), &t, None, &cfg).unwrap();
        assert_eq!(f.len(), 8);
        let blocks: Vec<&[f64]> = f.blocks().collect();
        assert_eq!(blocks[0], average_embedding(&toks, &t).as_slice());
        assert_eq!(blocks[1], &[2.0, 4.0]);
        assert_eq!(blocks[2], &[-1.0, 5.0]);
        assert_eq!(blocks[3], &[1.0, 1.0]);

        let f = dense_feature(&toks, Some(&tg), &t, Some(&["x"]), &cfg).unwrap();
        assert_eq!(f.len(), 10);
        assert_eq!(&f.values[8..], &[1.0, 0.0]);

        let f = dense_feature::<_, &str>(&["q", "r"], Some(&tags(&["NN", "JJ"])), &t, None, &cfg).unwrap();
        assert!(f.values.iter().all(|&v| v == 0.0));

        let f = dense_feature::<_, &str>(&toks, None, &t, None, &cfg).unwrap();
        assert_eq!(f.len(), 2);
        assert_eq!(dense_len(2, false, false), 2);

        let scaled = DenseConfig { scale: 2.0, ..cfg };
        let f = dense_feature::<_, &str>(&["dog"], None, &t, None, &scaled).unwrap();
        assert_eq!(f.values, vec![4.0, 8.0]);
    }
}
