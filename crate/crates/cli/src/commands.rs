use std::collections::HashSet;
use std::fs;
use std::io::{self, Write};
use std::path::Path;

use log::info;
use nblr_core::corpus::{parse_documents, CorpusFormat, Document, Protocol};
use nblr_core::embeddings::{EmbeddingFormat, EmbeddingTable};
use nblr_core::pipeline::{
    guess_embedding_format, prepare_documents, run_benchmark, Resources, ResourceSpec, TaggerSpec, TrainedPipeline,
};
use nblr_core::preprocess::{load_lexicon, tokenize, LexiconKind};
use nblr_core::tagger::{read_tagged_corpus, CoarseMapping, CoarseTag, PerceptronTagger, TagScheme};
use nblr_core::Label;

use crate::args::{BenchmarkArgs, InputFormat, PredictArgs, PrepareArgs, TagArgs, TagTrainArgs, TrainArgs};
use crate::config::{must_exist, Settings};
use crate::error::{CliError, CliResult};

fn write_output(path: Option<&Path>, body: &str) -> CliResult<()> {
    match path {
        Some(p) => fs::write(p, body).map_err(|e| CliError::runtime(format!("cannot write {}: {e}", p.display()))),
        None => {
            let stdout = io::stdout();
            let mut out = stdout.lock();
            out.write_all(body.as_bytes())
                .and_then(|_| out.flush())
                .map_err(|e| CliError::runtime(format!("cannot write to stdout: {e}")))
        }
    }
}

fn load_resources(settings: &Settings, documents: usize) -> CliResult<Resources> {
    Ok(Resources::load(
        &settings.resources,
        &settings.pipeline.features,
        documents,
        settings.manifest(),
    )?)
}

pub fn prepare(args: &PrepareArgs) -> CliResult<()> {
    let settings = Settings::resolve(&args.run)?;
    let embeddings = settings
        .resources
        .embeddings
        .clone()
        .ok_or_else(|| CliError::config("prepare needs --embeddings"))?;
    must_exist(&embeddings, "embedding file")?;
    let dataset = settings.load_dataset()?;

    // Validate the other resources up front.
    let r = &settings.resources;
    for p in &r.positive_lexicons {
        let l = load_lexicon(p, LexiconKind::Positive)?;
        println!("positive lexicon {}: {} entries", p.display(), l.len());
    }
    for p in &r.negative_lexicons {
        let l = load_lexicon(p, LexiconKind::Negative)?;
        println!("negative lexicon {}: {} entries", p.display(), l.len());
    }
    if let Some(p) = &r.negation_lexicon {
        let l = load_lexicon(p, LexiconKind::Negation)?;
        println!("negation lexicon {}: {} entries", p.display(), l.len());
    }
    if let TaggerSpec::Builtin { model, .. } = &r.tagger {
        let t = PerceptronTagger::load(model)?;
        println!("tagger {}: {} tags", model.display(), t.tagset().len());
    }

    let mut types: HashSet<String> = HashSet::new();
    let mut occurrences = Vec::new();
    for doc in &dataset.documents {
        let mut tokens = tokenize(&doc.text).into_inner();
        if let Some(t) = &doc.target {
            tokens.extend(tokenize(t).into_inner());
        }
        types.extend(tokens.iter().cloned());
        occurrences.extend(tokens);
    }
    if types.is_empty() {
        return Err(CliError::data("the corpus vocabulary is empty"));
    }
    let format = r.embedding_format.unwrap_or_else(|| guess_embedding_format(&embeddings));
    let table = EmbeddingTable::load(&embeddings, format)?;
    let covered = occurrences.iter().filter(|t| table.lookup(t).is_some()).count();
    let covered_types = types.iter().filter(|t| table.lookup(t).is_some()).count();
    if covered == 0 {
        return Err(CliError::data(format!(
            "zero coverage: no corpus token has a vector in {}",
            embeddings.display()
        )));
    }
    let cache = table.filter_for_lookup(&types);
    cache.save(&args.output, EmbeddingFormat::Text)?;
    let coverage = covered as f64 / occurrences.len() as f64;
    println!(
        "{}",
        serde_json::json!({
            "dataset": dataset.name,
            "documents": dataset.len(),
            "tokens": occurrences.len(),
            "types": types.len(),
            "covered_tokens": covered,
            "covered_types": covered_types,
            "coverage": coverage,
            "cache_entries": cache.len(),
            "cache": args.output,
        })
    );
    println!(
        "coverage {:.1}% of {} tokens ({} of {} types); wrote {} vectors to {}",
        coverage * 100.0,
        occurrences.len(),
        covered_types,
        types.len(),
        cache.len(),
        args.output.display()
    );
    Ok(())
}

pub fn train(args: &TrainArgs) -> CliResult<()> {
    let settings = Settings::resolve(&args.run)?;
    let dataset = settings.load_dataset()?;
    let resources = load_resources(&settings, dataset.len())?;
    let prepared = prepare_documents(&dataset.documents, &resources, &settings.pipeline.features)?;
    let train_idx: Vec<usize> = match &dataset.protocol {
        Protocol::CrossValidation { .. } => (0..dataset.len()).collect(),
        Protocol::Heldout { train, .. } => train.clone().collect(),
    };
    info!("training on {} of {} documents", train_idx.len(), dataset.len());
    let pipeline = TrainedPipeline::fit(
        &dataset.name,
        &prepared,
        &train_idx,
        &settings.pipeline,
        settings.absolute_resources(),
        settings.metric(),
    )?;
    pipeline.save(&args.output)?;
    let s = pipeline.model.summary.clone();
    println!(
        "{}",
        serde_json::json!({
            "model": args.output,
            "documents": train_idx.len(),
            "lambda": pipeline.lambda,
            "iterations": s.as_ref().map(|s| s.iterations),
            "final_loss": s.as_ref().map(|s| s.final_objective),
            "converged": s.as_ref().map(|s| s.converged),
        })
    );
    Ok(())
}

fn read_inputs(path: &Path, format: InputFormat) -> CliResult<Vec<Document>> {
    let content = fs::read_to_string(path).map_err(|e| CliError::data(format!("cannot read {}: {e}", path.display())))?;
    let docs = match format {
        InputFormat::Text => content
            .lines()
            .map(|l| Document::new(l.trim_end_matches('\r'), Label::Positive))
            .collect(),
        InputFormat::Labeled => parse_documents(&content, CorpusFormat::Labeled, path)?,
        InputFormat::Targeted => parse_documents(&content, CorpusFormat::Targeted, path)?,
    };
    if docs.is_empty() {
        return Err(CliError::data(format!("{} has no records", path.display())));
    }
    Ok(docs)
}

pub fn predict(args: &PredictArgs) -> CliResult<()> {
    must_exist(&args.model, "model")?;
    must_exist(&args.input, "input")?;
    let pipeline = TrainedPipeline::load(&args.model)?;
    let mut spec: ResourceSpec = pipeline.resources.clone();
    if let Some(e) = &args.embeddings {
        spec.embeddings = Some(e.clone());
        spec.embedding_format = None;
    }
    spec.tagger = match (&spec.tagger, &args.tagger_model, &args.pretagged) {
        (TaggerSpec::Builtin { mapping, .. }, Some(m), _) => TaggerSpec::Builtin {
            model: m.clone(),
            mapping: mapping.clone(),
        },
        (TaggerSpec::Pretagged { scheme, mapping, .. }, _, Some(p)) => TaggerSpec::Pretagged {
            files: vec![p.clone()],
            scheme: *scheme,
            mapping: mapping.clone(),
        },
        (TaggerSpec::Pretagged { .. }, _, None) if pipeline.config.features.dense.is_some() => {
            return Err(CliError::config(
                "this model was trained on pre-tagged input; give --pretagged aligned with --input",
            ));
        }
        (other, _, _) => other.clone(),
    };
    let docs = read_inputs(&args.input, args.input_format)?;
    let resources = Resources::load(&spec, &pipeline.config.features, docs.len(), None)?;
    let prepared = prepare_documents(&docs, &resources, &pipeline.config.features)?;
    let mut out = String::new();
    for doc in &prepared {
        let p = pipeline.predict(doc)?;
        out.push_str(p.label.as_str());
        for (label, prob) in &p.probabilities {
            out.push_str(&format!("\t{label}:{prob}"));
        }
        out.push('\n');
    }
    write_output(args.output.as_deref(), &out)
}

pub fn benchmark(args: &BenchmarkArgs) -> CliResult<()> {
    let settings = Settings::resolve(&args.run)?;
    let dataset = settings.load_dataset()?;
    let resources = load_resources(&settings, dataset.len())?;
    let report = run_benchmark(&dataset, &resources, &settings.pipeline, settings.metric())?;
    let table = report.to_table();
    if let Some(p) = &args.output {
        let json = serde_json::to_string_pretty(&report).map_err(|e| CliError::runtime(e.to_string()))?;
        write_output(Some(p), &(json + "\n"))?;
    }
    if let Some(p) = &args.table {
        write_output(Some(p), &table)?;
    }
    print!("{table}");
    println!(
        "{}",
        serde_json::json!({
            "dataset": report.dataset,
            "model": report.model,
            "metric": report.metric,
            "aggregate": report.aggregate,
            "folds": report.folds.len(),
        })
    );
    Ok(())
}

fn parse_scheme(s: &str) -> CliResult<TagScheme> {
    s.parse().map_err(|e: nblr_core::Error| CliError::config(format!("--scheme: {e}")))
}

pub fn tag_train(args: &TagTrainArgs) -> CliResult<()> {
    must_exist(&args.input, "tagged corpus")?;
    if args.epochs == 0 {
        return Err(CliError::config("--epochs must be at least 1"));
    }
    let mut mapping = CoarseMapping::new(parse_scheme(&args.scheme)?);
    if let Some(m) = &args.mapping {
        must_exist(m, "tag mapping")?;
        mapping.load_overrides(m)?;
    }
    let corpus = read_tagged_corpus(&args.input)?;
    let tagger = PerceptronTagger::train(&corpus, args.epochs, args.seed, mapping)?;
    tagger.save(&args.output)?;
    let tokens: usize = corpus.iter().map(|(w, _)| w.len()).sum();
    println!(
        "{}",
        serde_json::json!({
            "model": args.output,
            "sentences": corpus.len(),
            "tokens": tokens,
            "tags": tagger.tagset().len(),
            "epochs": args.epochs,
        })
    );
    Ok(())
}

fn coarse_name(t: CoarseTag) -> &'static str {
    match t {
        CoarseTag::Noun => "NOUN",
        CoarseTag::Verb => "VERB",
        CoarseTag::Adjective => "ADJ",
        CoarseTag::Other => "OTHER",
    }
}

pub fn tag(args: &TagArgs) -> CliResult<()> {
    must_exist(&args.model, "tagger model")?;
    must_exist(&args.input, "input")?;
    let tagger = PerceptronTagger::load(&args.model)?;
    let content =
        fs::read_to_string(&args.input).map_err(|e| CliError::data(format!("cannot read {}: {e}", args.input.display())))?;
    let mut out = String::new();
    for line in content.lines() {
        let tokens = tokenize(line);
        let tags = tagger.tag(&tokens);
        let items: Vec<String> = tokens
            .iter()
            .enumerate()
            .map(|(i, w)| {
                let t = if args.coarse { coarse_name(tags.coarse[i]) } else { tags.fine[i].as_str() };
                format!("{w}_{t}")
            })
            .collect();
        out.push_str(&items.join(" "));
        out.push('\n');
    }
    write_output(args.output.as_deref(), &out)
}
