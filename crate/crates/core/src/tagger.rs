//! Part-of-speech tagging and coarse tag groups.
//!
//! The built-in tagger is a greedy left-to-right averaged perceptron. Tags
//! from any tagger, or from pre-tagged `word_TAG` files, are reduced to the
//! coarse groups noun, verb and adjective by [`coarsen`].

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::preprocess::is_indicator;

/// Fine tag given to indicator tokens.
pub const INDICATOR_TAG: &str = "IND";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum CoarseTag {
    Noun,
    Verb,
    Adjective,
    Other,
}

impl CoarseTag {
    /// The groups that get their own embedding block, in block order.
    pub const GROUPS: [CoarseTag; 3] = [CoarseTag::Noun, CoarseTag::Verb, CoarseTag::Adjective];
}

impl FromStr for CoarseTag {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_uppercase().as_str() {
            "NOUN" => Ok(CoarseTag::Noun),
            "VERB" => Ok(CoarseTag::Verb),
            "ADJECTIVE" | "ADJ" => Ok(CoarseTag::Adjective),
            "OTHER" => Ok(CoarseTag::Other),
            other => Err(Error::InvalidArgument(format!("unknown coarse tag {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TagScheme {
    /// Penn Treebank tags (NLTK-style taggers).
    Penn,
    /// CMU ARK Twitter tags.
    Ark,
}

impl FromStr for TagScheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "penn" => Ok(TagScheme::Penn),
            "ark" => Ok(TagScheme::Ark),
            other => Err(Error::InvalidArgument(format!("unknown tag scheme {other:?}"))),
        }
    }
}

impl fmt::Display for TagScheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            TagScheme::Penn => "penn",
            TagScheme::Ark => "ark",
        })
    }
}

/// Maps a fine tag onto a coarse group. Total: unknown tags map to `Other`.
pub fn coarsen(fine_tag: &str, scheme: TagScheme) -> CoarseTag {
    match scheme {
        TagScheme::Penn => {
            if fine_tag.starts_with("NN") {
                CoarseTag::Noun
            } else if fine_tag.starts_with("VB") {
                CoarseTag::Verb
            } else if fine_tag.starts_with("JJ") {
                CoarseTag::Adjective
            } else {
                CoarseTag::Other
            }
        }
        TagScheme::Ark => match fine_tag {
            "N" | "^" | "S" | "Z" => CoarseTag::Noun,
            "V" | "T" => CoarseTag::Verb,
            "A" => CoarseTag::Adjective,
            _ => CoarseTag::Other,
        },
    }
}

/// A tag scheme plus optional per-tag overrides loaded from a
/// `FINE_TAG<tab>COARSE` file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CoarseMapping {
    pub scheme: TagScheme,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub overrides: BTreeMap<String, CoarseTag>,
}

impl CoarseMapping {
    pub fn new(scheme: TagScheme) -> Self {
        CoarseMapping {
            scheme,
            overrides: BTreeMap::new(),
        }
    }

    pub fn coarsen(&self, fine_tag: &str) -> CoarseTag {
        if fine_tag == INDICATOR_TAG {
            return CoarseTag::Other;
        }
        self.overrides
            .get(fine_tag)
            .copied()
            .unwrap_or_else(|| coarsen(fine_tag, self.scheme))
    }

    pub fn load_overrides(&mut self, path: &Path) -> Result<()> {
        let content = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        for (i, line) in content.lines().enumerate() {
            let line = line.trim_end_matches('\r');
            if line.trim().is_empty() || line.starts_with('#') {
                continue;
            }
            let (fine, coarse) = line
                .split_once('\t')
                .ok_or_else(|| Error::parse(path, i + 1, "expected FINE_TAG<tab>COARSE"))?;
            let coarse = coarse.parse().map_err(|e: Error| Error::parse(path, i + 1, e.to_string()))?;
            self.overrides.insert(fine.trim().to_string(), coarse);
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TagSequence {
    pub fine: Vec<String>,
    pub coarse: Vec<CoarseTag>,
}

impl TagSequence {
    pub fn from_fine(fine: Vec<String>, mapping: &CoarseMapping) -> Self {
        let coarse = fine.iter().map(|t| mapping.coarsen(t)).collect();
        TagSequence { fine, coarse }
    }

    pub fn len(&self) -> usize {
        self.coarse.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coarse.is_empty()
    }
}

/// Words of a pre-tagged line with their tags.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TaggedSentence {
    pub words: Vec<String>,
    pub tags: TagSequence,
}

/// Splits a `word_TAG word_TAG ...` line. The tag follows the last `_`.
pub fn parse_tagged_line(line: &str) -> std::result::Result<(Vec<String>, Vec<String>), String> {
    let mut words = Vec::new();
    let mut tags = Vec::new();
    for item in line.split_whitespace() {
        let (w, t) = item
            .rsplit_once('_')
            .filter(|(w, t)| !w.is_empty() && !t.is_empty())
            .ok_or_else(|| format!("token {item:?} is not of the form word_TAG"))?;
        words.push(w.to_string());
        tags.push(t.to_string());
    }
    Ok((words, tags))
}

/// Reads a `word_TAG` corpus, one sentence per line, skipping blank lines.
pub fn read_tagged_corpus(path: &Path) -> Result<Vec<(Vec<String>, Vec<String>)>> {
    let content = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut out = Vec::new();
    for (i, line) in content.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        out.push(parse_tagged_line(line).map_err(|m| Error::parse(path, i + 1, m))?);
    }
    if out.is_empty() {
        return Err(Error::Empty(format!("tagged corpus {} has no sentences", path.display())));
    }
    Ok(out)
}

/// Reads a pre-tagged file aligned line-by-line with a corpus of
/// `expected` documents. Blank lines are empty sentences.
pub fn read_pretagged(path: &Path, expected: usize, mapping: &CoarseMapping) -> Result<Vec<TaggedSentence>> {
    let content = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_pretagged(&content, expected, mapping).map_err(|e| match e {
        Error::Parse { line, message, .. } => Error::parse(path, line, message),
        e => e,
    })
}

pub fn parse_pretagged(content: &str, expected: usize, mapping: &CoarseMapping) -> Result<Vec<TaggedSentence>> {
    let mut out = Vec::new();
    for (i, line) in content.lines().enumerate() {
        let (words, fine) = parse_tagged_line(line).map_err(|m| Error::parse("<pretagged>", i + 1, m))?;
        out.push(TaggedSentence {
            words,
            tags: TagSequence::from_fine(fine, mapping),
        });
    }
    if out.len() != expected {
        return Err(Error::LengthMismatch(format!(
            "pre-tagged input has {} lines but the corpus has {expected} documents",
            out.len()
        )));
    }
    Ok(out)
}

const START: [&str; 2] = ["-START-", "-START2-"];
const END: [&str; 2] = ["-END-", "-END2-"];

fn normalize(word: &str) -> String {
    let chars: Vec<char> = word.chars().collect();
    if word.contains('-') && !word.starts_with('-') {
        "!HYPHEN".into()
    } else if chars.len() == 4 && chars.iter().all(char::is_ascii_digit) {
        "!YEAR".into()
    } else if chars.first().is_some_and(char::is_ascii_digit) {
        "!DIGITS".into()
    } else {
        word.to_lowercase()
    }
}

fn suffix(word: &str, n: usize) -> &str {
    match word.char_indices().rev().nth(n.saturating_sub(1)) {
        Some((i, _)) => &word[i..],
        None => word,
    }
}

fn prefix1(word: &str) -> &str {
    match word.char_indices().nth(1) {
        Some((i, _)) => &word[..i],
        None => word,
    }
}

/// Feature strings for position `i` of `context` (which is padded with two
/// start and two end symbols, so the word itself sits at `i + 2`).
fn features(i: usize, context: &[String], prev: &str, prev2: &str) -> Vec<String> {
    let word = &context[i + 2];
    let w_prev = &context[i + 1];
    let w_prev2 = &context[i];
    let w_next = &context[i + 3];
    let w_next2 = &context[i + 4];
    vec![
        "bias".to_string(),
        format!("i suffix1 {}", suffix(word, 1)),
        format!("i suffix2 {}", suffix(word, 2)),
        format!("i suffix3 {}", suffix(word, 3)),
        format!("i pref1 {}", prefix1(word)),
        format!("i-1 tag {prev}"),
        format!("i-2 tag {prev2}"),
        format!("i tag+i-2 tag {prev} {prev2}"),
        format!("i word {word}"),
        format!("i-1 tag+i word {prev} {word}"),
        format!("i-1 word {w_prev}"),
        format!("i-1 suffix {}", suffix(w_prev, 3)),
        format!("i-2 word {w_prev2}"),
        format!("i+1 word {w_next}"),
        format!("i+1 suffix {}", suffix(w_next, 3)),
        format!("i+2 word {w_next2}"),
    ]
}

fn padded_context<S: AsRef<str>>(words: &[S]) -> Vec<String> {
    START
        .iter()
        .map(|s| s.to_string())
        .chain(words.iter().map(|w| normalize(w.as_ref())))
        .chain(END.iter().map(|s| s.to_string()))
        .collect()
}

fn best_tag(weights: &HashMap<String, Vec<f64>>, feats: &[String], n_tags: usize) -> usize {
    let mut scores = vec![0.0f64; n_tags];
    for f in feats {
        if let Some(w) = weights.get(f) {
            for (s, x) in scores.iter_mut().zip(w) {
                *s += x;
            }
        }
    }
    let mut best = 0;
    for (t, &s) in scores.iter().enumerate().skip(1) {
        if s > scores[best] {
            best = t;
        }
    }
    best
}

/// Greedy averaged-perceptron POS tagger.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerceptronTagger {
    pub mapping: CoarseMapping,
    tags: Vec<String>,
    #[serde(with = "sorted_weights")]
    weights: HashMap<String, Vec<f64>>,
}

mod sorted_weights {
    use std::collections::{BTreeMap, HashMap};

    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(m: &HashMap<String, Vec<f64>>, s: S) -> Result<S::Ok, S::Error> {
        m.iter().collect::<BTreeMap<_, _>>().serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<HashMap<String, Vec<f64>>, D::Error> {
        Ok(BTreeMap::<String, Vec<f64>>::deserialize(d)?.into_iter().collect())
    }
}

impl PerceptronTagger {
    /// Trains on `(words, tags)` sentences for `epochs` passes, visiting
    /// sentences in a seeded shuffled order each pass.
    pub fn train(
        corpus: &[(Vec<String>, Vec<String>)],
        epochs: usize,
        seed: u64,
        mapping: CoarseMapping,
    ) -> Result<Self> {
        if epochs == 0 {
            return Err(Error::InvalidArgument("epochs must be at least 1".into()));
        }
        if corpus.is_empty() {
            return Err(Error::Empty("tagger training corpus".into()));
        }
        for (i, (w, t)) in corpus.iter().enumerate() {
            if w.len() != t.len() {
                return Err(Error::LengthMismatch(format!(
                    "sentence {i}: {} words but {} tags",
                    w.len(),
                    t.len()
                )));
            }
        }
        let mut tags: Vec<String> = corpus.iter().flat_map(|(_, t)| t.iter().cloned()).collect();
        tags.sort();
        tags.dedup();
        if tags.is_empty() {
            return Err(Error::Empty("tagger training corpus has no tokens".into()));
        }
        let tag_index: HashMap<&str, usize> = tags.iter().enumerate().map(|(i, t)| (t.as_str(), i)).collect();
        let n_tags = tags.len();

        let mut weights: HashMap<String, Vec<f64>> = HashMap::new();
        let mut totals: HashMap<String, Vec<f64>> = HashMap::new();
        let mut stamps: HashMap<String, Vec<u64>> = HashMap::new();
        let mut instances: u64 = 0;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut order: Vec<usize> = (0..corpus.len()).collect();

        for _ in 0..epochs {
            order.shuffle(&mut rng);
            for &s in &order {
                let (words, gold) = &corpus[s];
                let context = padded_context(words);
                let mut prev = START[0].to_string();
                let mut prev2 = START[1].to_string();
                for (i, gold_tag) in gold.iter().enumerate() {
                    let feats = features(i, &context, &prev, &prev2);
                    let guess = best_tag(&weights, &feats, n_tags);
                    let truth = tag_index[gold_tag.as_str()];
                    instances += 1;
                    if guess != truth {
                        for f in &feats {
                            let w = weights.entry(f.clone()).or_insert_with(|| vec![0.0; n_tags]);
                            let tot = totals.entry(f.clone()).or_insert_with(|| vec![0.0; n_tags]);
                            let st = stamps.entry(f.clone()).or_insert_with(|| vec![0; n_tags]);
                            for (t, delta) in [(truth, 1.0), (guess, -1.0)] {
                                tot[t] += (instances - st[t]) as f64 * w[t];
                                st[t] = instances;
                                w[t] += delta;
                            }
                        }
                    }
                    prev2 = std::mem::replace(&mut prev, tags[guess].clone());
                }
            }
        }

        let denom = instances.max(1) as f64;
        let averaged = weights
            .into_iter()
            .filter_map(|(f, w)| {
                let tot = &totals[&f];
                let st = &stamps[&f];
                let avg: Vec<f64> = (0..n_tags)
                    .map(|t| (tot[t] + (instances - st[t]) as f64 * w[t]) / denom)
                    .collect();
                avg.iter().any(|&x| x != 0.0).then_some((f, avg))
            })
            .collect();
        Ok(PerceptronTagger {
            mapping,
            tags,
            weights: averaged,
        })
    }

    pub fn tagset(&self) -> &[String] {
        &self.tags
    }

    /// Fine tags for `words` by greedy decoding.
    pub fn tag_words<S: AsRef<str>>(&self, words: &[S]) -> Vec<String> {
        let context = padded_context(words);
        let mut prev = START[0].to_string();
        let mut prev2 = START[1].to_string();
        let mut out = Vec::with_capacity(words.len());
        for i in 0..words.len() {
            let feats = features(i, &context, &prev, &prev2);
            let t = best_tag(&self.weights, &feats, self.tags.len());
            prev2 = std::mem::replace(&mut prev, self.tags[t].clone());
            out.push(self.tags[t].clone());
        }
        out
    }

    /// Tags a token sequence. Indicator tokens are not shown to the tagger
    /// and always receive [`INDICATOR_TAG`] / `Other`.
    pub fn tag<S: AsRef<str>>(&self, tokens: &[S]) -> TagSequence {
        let words: Vec<&str> = tokens.iter().map(AsRef::as_ref).filter(|t| !is_indicator(t)).collect();
        let mut fine = self.tag_words(&words).into_iter();
        let fine = tokens
            .iter()
            .map(|t| {
                if is_indicator(t.as_ref()) {
                    INDICATOR_TAG.to_string()
                } else {
                    fine.next().expect("one tag per non-indicator token")
                }
            })
            .collect();
        TagSequence::from_fine(fine, &self.mapping)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let json = serde_json::to_vec(self).map_err(|e| Error::Serde(e.to_string()))?;
        fs::write(path, json).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
        let t: PerceptronTagger = serde_json::from_slice(&bytes).map_err(|e| Error::Serde(e.to_string()))?;
        if t.tags.is_empty() {
            return Err(Error::Empty("tagger model has an empty tagset".into()));
        }
        if t.weights.values().any(|w| w.len() != t.tags.len() || w.iter().any(|x| !x.is_finite())) {
            return Err(Error::Serde("tagger weights do not match the tagset".into()));
        }
        Ok(t)
    }
}
