//! Synthetic labelled corpora with matching embeddings and POS tags.
//!
//! Each document mixes function words, nouns, verbs, a few shared sentiment
//! cue words and adjectives drawn from a large class-specific pool. The cue
//! words give the n-gram features a weak class signal. Adjectives are rare
//! enough that most are unseen at training time, but their embeddings lie
//! along a class direction, so the adjective group average carries a strong
//! class signal. Noun and verb embeddings are pure noise, which dilutes the
//! plain sentence average.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::corpus::{Dataset, Document, Protocol};
use crate::embeddings::EmbeddingTable;
use crate::error::Result;
use crate::label::{ClassSet, Label};
use crate::tagger::{CoarseMapping, TagScheme, TagSequence, TaggedSentence};

#[derive(Debug, Clone)]
pub struct SyntheticConfig {
    pub documents: usize,
    pub dim: usize,
    pub folds: usize,
    /// Adjectives available to each class.
    pub adjectives_per_class: usize,
    pub nouns: usize,
    pub verbs: usize,
    /// Cue words per class and the probability a document uses one of its own class.
    pub cues_per_class: usize,
    pub cue_fidelity: f64,
    /// Length of the class component of adjective embeddings.
    pub signal: f32,
    pub noise: f32,
    pub seed: u64,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        SyntheticConfig {
            documents: 500,
            dim: 16,
            folds: 10,
            adjectives_per_class: 2000,
            nouns: 200,
            verbs: 200,
            cues_per_class: 5,
            cue_fidelity: 0.65,
            signal: 1.0,
            noise: 0.5,
            seed: 7,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SyntheticCorpus {
    pub dataset: Dataset,
    /// Gold tags aligned with the documents.
    pub tagged: Vec<TaggedSentence>,
    pub embeddings: EmbeddingTable,
}

const FUNCTION_WORDS: &[&str] = &["the", "a", "this", "that", "of", "and", "with", "in", "on", "was"];

fn gaussian(rng: &mut ChaCha8Rng) -> f32 {
    // Box-Muller.
    let u1: f64 = rng.gen_range(f64::EPSILON..1.0);
    let u2: f64 = rng.gen();
    ((-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()) as f32
}

fn noise_vector(rng: &mut ChaCha8Rng, dim: usize, scale: f32) -> Vec<f32> {
    (0..dim).map(|_| gaussian(rng) * scale).collect()
}

pub fn generate(config: &SyntheticConfig) -> Result<SyntheticCorpus> {
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let dim = config.dim;
    let mut entries: Vec<(String, Vec<f32>)> = Vec::new();

    let mut direction = noise_vector(&mut rng, dim, 1.0);
    let n = direction.iter().map(|x| x * x).sum::<f32>().sqrt();
    direction.iter_mut().for_each(|x| *x /= n);

    let nouns: Vec<String> = (0..config.nouns).map(|i| format!("noun{i}")).collect();
    let verbs: Vec<String> = (0..config.verbs).map(|i| format!("verb{i}")).collect();
    for w in nouns.iter().chain(&verbs) {
        entries.push((w.clone(), noise_vector(&mut rng, dim, 1.0)));
    }
    for w in FUNCTION_WORDS {
        entries.push((w.to_string(), noise_vector(&mut rng, dim, 1.0)));
    }
    let classes = [Label::Positive, Label::Negative];
    let mut adjectives: Vec<Vec<String>> = Vec::new();
    let mut cues: Vec<Vec<String>> = Vec::new();
    for (ci, sign) in [(0usize, 1.0f32), (1, -1.0)] {
        let tag = if ci == 0 { "pos" } else { "neg" };
        let words: Vec<String> = (0..config.adjectives_per_class).map(|i| format!("adj{tag}{i}")).collect();
        for w in &words {
            let mut v = noise_vector(&mut rng, dim, config.noise);
            v.iter_mut().zip(&direction).for_each(|(x, d)| *x += sign * config.signal * d);
            entries.push((w.clone(), v));
        }
        adjectives.push(words);
        let cue_words: Vec<String> = (0..config.cues_per_class).map(|i| format!("cue{tag}{i}")).collect();
        for w in &cue_words {
            entries.push((w.clone(), noise_vector(&mut rng, dim, 1.0)));
        }
        cues.push(cue_words);
    }

    let mapping = CoarseMapping::new(TagScheme::Penn);
    let mut documents = Vec::with_capacity(config.documents);
    let mut tagged = Vec::with_capacity(config.documents);
    for d in 0..config.documents {
        let ci = d % 2;
        let mut words: Vec<(String, &str)> = Vec::new();
        for _ in 0..2 {
            words.push((FUNCTION_WORDS.choose(&mut rng).unwrap().to_string(), "DT"));
            words.push((nouns.choose(&mut rng).unwrap().clone(), "NN"));
            words.push((verbs.choose(&mut rng).unwrap().clone(), "VBZ"));
        }
        for _ in 0..2 {
            words.push((adjectives[ci].choose(&mut rng).unwrap().clone(), "JJ"));
        }
        let cue_class = if rng.gen_bool(config.cue_fidelity) { ci } else { 1 - ci };
        words.push((cues[cue_class].choose(&mut rng).unwrap().clone(), "NN"));
        words.shuffle(&mut rng);
        let text = words.iter().map(|(w, _)| w.as_str()).collect::<Vec<_>>().join(" ");
        documents.push(Document::new(text, classes[ci]));
        tagged.push(TaggedSentence {
            words: words.iter().map(|(w, _)| w.clone()).collect(),
            tags: TagSequence::from_fine(words.iter().map(|(_, t)| t.to_string()).collect(), &mapping),
        });
    }
    let dataset = Dataset::new(
        "synthetic",
        documents,
        ClassSet::binary(),
        Protocol::CrossValidation { folds: config.folds },
    )?;
    let embeddings = EmbeddingTable::from_entries(dim, entries)?;
    Ok(SyntheticCorpus {
        dataset,
        tagged,
        embeddings,
    })
}
