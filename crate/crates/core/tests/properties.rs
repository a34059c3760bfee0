use nblr_core::dense::{dense_feature, DenseConfig};
use nblr_core::embeddings::EmbeddingTable;
use nblr_core::label::{ClassSet, Label};
use nblr_core::model::{loss_and_gradient, train, FeatureRow, LinearModel, LossKind, TrainConfig};
use nblr_core::preprocess::POS_INDICATOR;
use nblr_core::tagger::{CoarseMapping, PerceptronTagger, TagScheme, TagSequence};
use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Sentences from a small grammar: `DT JJ* NN VBZ (DT JJ* NN)?` with
/// regular suffixes per open class and a few ambiguous words.
fn grammar_corpus(n: usize, seed: u64, unseen: bool) -> Vec<(Vec<String>, Vec<String>)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let stems = ["bar", "cor", "del", "fin", "gal", "hov", "jun", "kel", "lom", "mur", "nep", "pax"];
    let word = |rng: &mut ChaCha8Rng, suffix: &str| {
        let pool = if unseen { &stems[6..] } else { &stems[..6] };
        format!("{}{}{}", pool.choose(rng).unwrap(), pool.choose(rng).unwrap(), suffix)
    };
    let mut out = Vec::with_capacity(n);
    for _ in 0..n {
        let mut s: Vec<(String, &str)> = Vec::new();
        let phrase = |rng: &mut ChaCha8Rng, s: &mut Vec<(String, &str)>| {
            s.push((["the", "a", "this"].choose(rng).unwrap().to_string(), "DT"));
            for _ in 0..rng.gen_range(0..3) {
                let adj = if rng.gen_bool(0.2) { "light".to_string() } else {
                    let suffix = *["ous", "ful"].choose(rng).unwrap();
                    word(rng, suffix)
                };
                s.push((adj, "JJ"));
            }
            let noun = if rng.gen_bool(0.2) { "light".to_string() } else {
                let suffix = *["tion", "ness"].choose(rng).unwrap();
                word(rng, suffix)
            };
            s.push((noun, "NN"));
        };
        phrase(&mut rng, &mut s);
        let verb = if rng.gen_bool(0.2) { "lights".to_string() } else { word(&mut rng, "izes") };
        s.push((verb, "VBZ"));
        if rng.gen_bool(0.6) {
            phrase(&mut rng, &mut s);
        }
        out.push((
            s.iter().map(|(w, _)| w.clone()).collect(),
            s.iter().map(|(_, t)| t.to_string()).collect(),
        ));
    }
    out
}

#[test]
fn tagger_generalizes_on_held_out_grammar() {
    let train_set = grammar_corpus(1500, 1, false);
    let tagger = PerceptronTagger::train(&train_set, 5, 3, CoarseMapping::new(TagScheme::Penn)).unwrap();
    for (unseen, floor) in [(false, 0.95), (true, 0.90)] {
        let test = grammar_corpus(400, 2, unseen);
        let (mut right, mut total) = (0, 0);
        for (words, gold) in &test {
            let pred = tagger.tag_words(words);
            right += pred.iter().zip(gold).filter(|(a, b)| a == b).count();
            total += gold.len();
        }
        let acc = right as f64 / total as f64;
        assert!(acc >= floor, "unseen stems {unseen}: accuracy {acc}");
    }
}

#[test]
fn tagger_keeps_indicators_out_of_groups() {
    let train_set = grammar_corpus(300, 4, false);
    let tagger = PerceptronTagger::train(&train_set, 3, 0, CoarseMapping::new(TagScheme::Penn)).unwrap();
    let tokens = ["the", "barcorous", POS_INDICATOR, "delfintion", "barbarizes"];
    let tags = tagger.tag(&tokens);
    assert_eq!(tags.fine[2], "IND");
    assert_eq!(tags.coarse[2], nblr_core::CoarseTag::Other);
    let without: Vec<&str> = tokens.iter().copied().filter(|t| *t != POS_INDICATOR).collect();
    let plain = tagger.tag(&without);
    let kept: Vec<&String> = tags.fine.iter().filter(|t| *t != "IND").collect();
    assert_eq!(kept, plain.fine.iter().collect::<Vec<_>>());
}

fn small_table(rng: &mut ChaCha8Rng, dim: usize) -> (EmbeddingTable, Vec<String>) {
    let words: Vec<String> = (0..12).map(|i| format!("w{i}")).collect();
    let entries: Vec<(String, Vec<f32>)> = words
        .iter()
        .take(9)
        .map(|w| (w.clone(), (0..dim).map(|_| rng.gen_range(-5.0f32..5.0)).collect()))
        .collect();
    (EmbeddingTable::from_entries(dim, entries).unwrap(), words)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn dense_is_permutation_invariant_and_inside_the_hull(seed in any::<u64>(), len in 1usize..12, dim in 1usize..6) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (table, words) = small_table(&mut rng, dim);
        let mapping = CoarseMapping::new(TagScheme::Penn);
        let pairs: Vec<(String, String)> = (0..len)
            .map(|_| (words.choose(&mut rng).unwrap().clone(), ["NN", "VB", "JJ", "DT"].choose(&mut rng).unwrap().to_string()))
            .collect();
        let feature = |pairs: &[(String, String)]| {
            let tokens: Vec<&str> = pairs.iter().map(|(w, _)| w.as_str()).collect();
            let tags = TagSequence::from_fine(pairs.iter().map(|(_, t)| t.clone()).collect(), &mapping);
            dense_feature(&tokens, Some(&tags), &table, None::<&[&str]>, &DenseConfig::default()).unwrap()
        };
        let a = feature(&pairs);
        let mut shuffled = pairs.clone();
        shuffled.shuffle(&mut rng);
        let b = feature(&shuffled);
        for (x, y) in a.values.iter().zip(&b.values) {
            prop_assert!((x - y).abs() <= 1e-12 * x.abs().max(1.0));
        }
        // v_avg lies inside the coordinate-wise range of the resolved vectors.
        let resolved: Vec<&[f32]> = pairs.iter().filter_map(|(w, _)| table.get(w)).collect();
        let avg = a.blocks().next().unwrap();
        if resolved.is_empty() {
            prop_assert!(avg.iter().all(|&x| x == 0.0));
        } else {
            for (k, &x) in avg.iter().enumerate() {
                let lo = resolved.iter().map(|v| v[k] as f64).fold(f64::INFINITY, f64::min);
                let hi = resolved.iter().map(|v| v[k] as f64).fold(f64::NEG_INFINITY, f64::max);
                prop_assert!(x >= lo - 1e-9 && x <= hi + 1e-9);
            }
        }
    }

    #[test]
    fn objective_is_convex_along_segments(seed in any::<u64>(), t in 0.0f64..1.0, hinge in any::<bool>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (a, rows) = random_problem(&mut rng);
        let b = randomized(&a, &mut rng);
        let mix = blend(&a, &b, t);
        let loss = if hinge { LossKind::SquaredHinge } else { LossKind::Logistic };
        let f = |m: &LinearModel| loss_and_gradient(m, &rows, 0.1, loss).unwrap().0;
        let (fa, fb, fm) = (f(&a), f(&b), f(&mix));
        prop_assert!(fm <= t * fa + (1.0 - t) * fb + 1e-9 * (fa.abs() + fb.abs() + 1.0));
    }
}

fn random_problem(rng: &mut ChaCha8Rng) -> (LinearModel, Vec<(FeatureRow, Label)>) {
    let (sparse_dim, dense_dim) = (rng.gen_range(1..10), rng.gen_range(0..5));
    let classes = if rng.gen_bool(0.5) { ClassSet::binary() } else { ClassSet::ternary() };
    let rows = (0..rng.gen_range(2..10))
        .map(|_| {
            let mut sparse = Vec::new();
            for j in 0..sparse_dim as u32 {
                if rng.gen_bool(0.5) {
                    sparse.push((j, rng.gen_range(-2.0..2.0)));
                }
            }
            let dense = (0..dense_dim).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let label = classes.labels()[rng.gen_range(0..classes.len())];
            (FeatureRow { sparse_dim, sparse, dense }, label)
        })
        .collect();
    let model = randomized(&LinearModel::zeros(classes, sparse_dim, dense_dim), rng);
    (model, rows)
}

fn randomized(m: &LinearModel, rng: &mut ChaCha8Rng) -> LinearModel {
    let mut m = m.clone();
    m.weights.iter_mut().flatten().for_each(|w| *w = rng.gen_range(-2.0..2.0));
    m.biases.iter_mut().for_each(|b| *b = rng.gen_range(-2.0..2.0));
    m
}

fn blend(a: &LinearModel, b: &LinearModel, t: f64) -> LinearModel {
    let mut m = a.clone();
    for (wm, (wa, wb)) in m.weights.iter_mut().flatten().zip(a.weights.iter().flatten().zip(b.weights.iter().flatten())) {
        *wm = t * wa + (1.0 - t) * wb;
    }
    for (bm, (ba, bb)) in m.biases.iter_mut().zip(a.biases.iter().zip(&b.biases)) {
        *bm = t * ba + (1.0 - t) * bb;
    }
    m
}

#[test]
fn squared_hinge_gradient_matches_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let h = 1e-6;
    for _ in 0..30 {
        let (mut model, rows) = random_problem(&mut rng);
        let (_, grad) = loss_and_gradient(&model, &rows, 0.05, LossKind::SquaredHinge).unwrap();
        let f = |m: &LinearModel| loss_and_gradient(m, &rows, 0.05, LossKind::SquaredHinge).unwrap().0;
        for c in 0..model.classes.len() {
            for j in 0..model.dim() {
                let x = model.weights[c][j];
                model.weights[c][j] = x + h;
                let up = f(&model);
                model.weights[c][j] = x - h;
                let down = f(&model);
                model.weights[c][j] = x;
                let fd = (up - down) / (2.0 * h);
                assert!((fd - grad.weights[c][j]).abs() <= 1e-5 * fd.abs().max(1.0));
            }
        }
    }
}

#[test]
fn training_reaches_a_stationary_point() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let (_, mut rows) = random_problem(&mut rng);
    for (i, (_, l)) in rows.iter_mut().enumerate() {
        *l = [Label::Positive, Label::Negative][i % 2];
    }
    let config = TrainConfig {
        lambda: 0.1,
        ..TrainConfig::default()
    };
    let model = train(&rows, &config).unwrap();
    let (f, grad) = loss_and_gradient(&model, &rows, 0.1, LossKind::Logistic).unwrap();
    let gnorm = grad.weights.iter().flatten().chain(&grad.biases).map(|g| g * g).sum::<f64>().sqrt();
    assert!(gnorm < 1e-5, "gradient norm {gnorm}");
    let summary = model.summary.unwrap();
    assert!(summary.final_objective <= summary.initial_objective);
    assert!((summary.final_objective - f).abs() < 1e-12);
}

#[test]
fn binary_reader_tolerates_entry_newlines() {
    let mut bytes = b"2 2\n".to_vec();
    for (w, v) in [("good", [0.5f32, -1.0]), ("bad", [2.0, 0.25])] {
        bytes.extend_from_slice(w.as_bytes());
        bytes.push(b' ');
        for x in v {
            bytes.extend_from_slice(&x.to_le_bytes());
        }
        bytes.push(b'\n');
    }
    let table = EmbeddingTable::read_binary(&mut &bytes[..]).unwrap();
    assert_eq!(table.get("good"), Some(&[0.5f32, -1.0][..]));
    assert_eq!(table.get("bad"), Some(&[2.0f32, 0.25][..]));
    let mut out = Vec::new();
    table.write_binary(&mut out).unwrap();
    assert!(!out[4..].contains(&b'\n'));
}
