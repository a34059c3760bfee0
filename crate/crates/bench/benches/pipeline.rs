use std::io::Cursor;

use criterion::{black_box, criterion_group, criterion_main, BatchSize, Criterion};
use nblr_core::pipeline::{run_benchmark, FeatureConfig, PipelineConfig, Resources, TagSource};
use nblr_core::synthetic::{generate, SyntheticConfig, SyntheticCorpus};
use nblr_core::{
    build_vocabulary, count_vector, fit_log_ratios, loss_and_gradient, sparse_feature, tokenize, CountVector,
    EmbeddingTable, FeatureRow, Label, LexiconSet, LinearModel, LossKind, MetricKind,
};

fn corpus(documents: usize, folds: usize) -> SyntheticCorpus {
    generate(&SyntheticConfig {
        documents,
        folds,
        ..SyntheticConfig::default()
    })
    .expect("synthetic corpus")
}

fn counts(c: &SyntheticCorpus) -> (Vec<(CountVector, Label)>, usize) {
    let tokens: Vec<Vec<String>> = c.dataset.documents.iter().map(|d| tokenize(&d.text).into_inner()).collect();
    let vocab = build_vocabulary(&tokens, 2).unwrap();
    let rows = tokens
        .iter()
        .zip(&c.dataset.documents)
        .map(|(t, d)| (count_vector(t, &vocab, true), d.label))
        .collect();
    (rows, vocab.len())
}

fn bench_tokenize(cr: &mut Criterion) {
    let c = corpus(500, 10);
    cr.bench_function("tokenize/500 docs", |b| {
        b.iter(|| {
            for d in &c.dataset.documents {
                black_box(tokenize(&d.text));
            }
        })
    });
}

fn bench_log_ratios(cr: &mut Criterion) {
    let c = corpus(500, 10);
    let (rows, _) = counts(&c);
    cr.bench_function("fit_log_ratios/500 docs", |b| {
        b.iter(|| fit_log_ratios(black_box(&rows), &c.dataset.classes, 1.0).unwrap())
    });
}

fn bench_gradient(cr: &mut Criterion) {
    let c = corpus(500, 10);
    let (rows, v) = counts(&c);
    let table = fit_log_ratios(&rows, &c.dataset.classes, 1.0).unwrap();
    let features: Vec<(FeatureRow, Label)> = rows
        .iter()
        .map(|(cv, l)| (FeatureRow::new(&sparse_feature(cv, &table).unwrap(), None), *l))
        .collect();
    let model = LinearModel::zeros(c.dataset.classes.clone(), table.feature_dim(), 0);
    assert_eq!(model.dim(), table.feature_dim());
    cr.bench_function(&format!("loss_and_gradient/500 docs, {v} ngrams"), |b| {
        b.iter(|| loss_and_gradient(&model, black_box(&features), 1e-2, LossKind::Logistic).unwrap())
    });
}

fn bench_embeddings(cr: &mut Criterion) {
    let c = corpus(500, 10);
    let mut bytes = Vec::new();
    c.embeddings.write_binary(&mut bytes).unwrap();
    cr.bench_function(&format!("read_binary/{} vectors", c.embeddings.len()), |b| {
        b.iter(|| EmbeddingTable::read_binary(&mut Cursor::new(black_box(&bytes))).unwrap())
    });
}

fn bench_pipeline(cr: &mut Criterion) {
    let c = corpus(200, 5);
    let resources = Resources {
        lexicons: LexiconSet::default(),
        embeddings: Some(c.embeddings.clone()),
        tags: TagSource::Pretagged(c.tagged.clone()),
    };
    let mut group = cr.benchmark_group("benchmark/200 docs, 5 folds");
    group.sample_size(10);
    for (name, features) in [("nblr", FeatureConfig::default()), ("nbsvm", FeatureConfig::nbsvm())] {
        let config = PipelineConfig {
            features,
            lambda: Some(1e-2),
            ..PipelineConfig::default()
        };
        group.bench_function(name, |b| {
            b.iter_batched(
                || config.clone(),
                |config| run_benchmark(&c.dataset, &resources, &config, MetricKind::Accuracy).unwrap(),
                BatchSize::SmallInput,
            )
        });
    }
    group.finish();
}

criterion_group!(benches, bench_tokenize, bench_log_ratios, bench_gradient, bench_embeddings, bench_pipeline);
criterion_main!(benches);
