use std::fs;
use std::path::PathBuf;
use std::process::{Command, Output};

use tempfile::TempDir;

fn nblr(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_nblr"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

/// The single JSON error line printed on failure.
fn error_line(o: &Output) -> serde_json::Value {
    let err = stderr(o);
    let lines: Vec<&str> = err.lines().collect();
    assert_eq!(lines.len(), 1, "expected one stderr line, got {err:?}");
    serde_json::from_str(lines[0]).expect("error line is JSON")
}

struct Fixture {
    dir: TempDir,
}

impl Fixture {
    fn new() -> Self {
        let dir = tempfile::tempdir().unwrap();
        let pos = ["a great fun film", "great acting and fun", "fun and great", "a truly great story", "great great fun", "wonderful and great"];
        let neg = ["a dull boring film", "boring and dull acting", "dull story", "truly boring", "dull dull film", "awful and dull"];
        let mut corpus = String::new();
        for _ in 0..2 {
            for (p, n) in pos.iter().zip(&neg) {
                corpus.push_str(&format!("+1\t{p}\n-1\t{n}\n"));
            }
        }
        fs::write(dir.path().join("toy.tsv"), corpus).unwrap();
        fs::write(
            dir.path().join("vectors.txt"),
            "great 1 0\nfun 0.8 0.1\nwonderful 0.9 0\ndull -1 0\nboring -0.8 0.1\nawful -0.9 0\nfilm 0 1\nstory 0 0.9\nacting 0.1 0.8\nunused 5 5\n",
        )
        .unwrap();
        let tagged = "a_DT great_JJ film_NN\nthe_DT film_NN is_VBZ dull_JJ\nfun_JJ acting_NN bores_VBZ\na_DT boring_JJ story_NN\n";
        fs::write(dir.path().join("tagged.txt"), tagged.repeat(10)).unwrap();
        Fixture { dir }
    }

    fn path(&self, name: &str) -> PathBuf {
        self.dir.path().join(name)
    }

    fn p(&self, name: &str) -> String {
        self.path(name).to_string_lossy().into_owned()
    }
}

fn train_nbsvm(fx: &Fixture) -> PathBuf {
    let model = fx.path("model.json");
    let o = nblr(&["train", "--corpus", &fx.p("toy.tsv"), "--nbsvm", "--folds", "3", "--output", &model.to_string_lossy()]);
    assert!(o.status.success(), "train failed: {}", stderr(&o));
    let summary: serde_json::Value = serde_json::from_str(stdout(&o).trim()).unwrap();
    assert!(summary["iterations"].as_u64().unwrap() > 0);
    assert!(summary["lambda"].as_f64().is_some());
    model
}

#[test]
fn train_then_predict_recovers_training_labels() {
    let fx = Fixture::new();
    let model = train_nbsvm(&fx);
    fs::write(fx.path("in.tsv"), "+1\tgreat great fun\n-1\tdull dull film\n+1\ta truly great story\n").unwrap();
    let o = nblr(&["predict", "--model", &model.to_string_lossy(), "--input", &fx.p("in.tsv"), "--input-format", "labeled"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let labels: Vec<String> = stdout(&o).lines().map(|l| l.split('\t').next().unwrap().to_string()).collect();
    assert_eq!(labels, ["+1", "-1", "+1"]);
}

#[test]
fn predict_writes_one_line_per_record_with_normalized_probabilities() {
    let fx = Fixture::new();
    let model = train_nbsvm(&fx);
    fs::write(fx.path("in.txt"), "what a great film\n\nboring\n").unwrap();
    let out = fx.path("pred.tsv");
    let o = nblr(&["predict", "-m", &model.to_string_lossy(), "-i", &fx.p("in.txt"), "-o", &out.to_string_lossy()]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = fs::read_to_string(out).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 3);
    for line in lines {
        let fields: Vec<&str> = line.split('\t').collect();
        assert_eq!(fields.len(), 3, "{line}");
        let total: f64 = fields[1..].iter().map(|f| f.split_once(':').unwrap().1.parse::<f64>().unwrap()).sum();
        assert!((total - 1.0).abs() < 1e-12);
    }
}

#[test]
fn dense_pipeline_with_builtin_tagger_round_trips() {
    let fx = Fixture::new();
    let tagger = fx.p("tagger.json");
    let o = nblr(&["tag-train", "-i", &fx.p("tagged.txt"), "-o", &tagger, "--epochs", "3"]);
    assert!(o.status.success(), "{}", stderr(&o));

    fs::write(fx.path("raw.txt"), "a great film\nthe story is dull\n").unwrap();
    let o = nblr(&["tag", "-m", &tagger, "-i", &fx.p("raw.txt")]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(stdout(&o), "a_DT great_JJ film_NN\nthe_DT story_NN is_VBZ dull_JJ\n");
    let o = nblr(&["tag", "-m", &tagger, "-i", &fx.p("raw.txt"), "--coarse"]);
    assert_eq!(stdout(&o).lines().next().unwrap(), "a_OTHER great_ADJ film_NOUN");

    let model = fx.p("dense.json");
    let o = nblr(&[
        "train", "--corpus", &fx.p("toy.tsv"), "--folds", "3", "--embeddings", &fx.p("vectors.txt"),
        "--tagger-model", &tagger, "--lambda", "0.01", "-o", &model,
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    fs::write(fx.path("in.txt"), "wonderful fun\nawful boring\n").unwrap();
    let o = nblr(&["predict", "-m", &model, "-i", &fx.p("in.txt")]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = stdout(&o);
    let labels: Vec<&str> = text.lines().map(|l| l.split('\t').next().unwrap()).collect();
    assert_eq!(labels, ["+1", "-1"]);
}

#[test]
fn benchmark_writes_report_and_flags_override_the_config_file() {
    let fx = Fixture::new();
    fs::write(
        fx.path("run.toml"),
        "seed = 1\nmodel = \"nbsvm\"\n[data]\ncorpus = \"toy.tsv\"\nfolds = 3\n[train]\nlambda = 0.1\n",
    )
    .unwrap();
    let report = fx.p("report.json");
    let o = nblr(&["benchmark", "-c", &fx.p("run.toml"), "--seed", "9", "-o", &report, "--table", &fx.p("table.md")]);
    assert!(o.status.success(), "{}", stderr(&o));
    let r: serde_json::Value = serde_json::from_str(&fs::read_to_string(&report).unwrap()).unwrap();
    assert_eq!(r["config"]["seed"], 9);
    assert_eq!(r["config"]["lambda"], 0.1);
    assert_eq!(r["model"], "NBSVM");
    assert_eq!(r["folds"].as_array().unwrap().len(), 3);
    assert!(r["aggregate"].as_f64().unwrap() > 0.9);
    assert!(fs::read_to_string(fx.path("table.md")).unwrap().contains("| NBSVM"));
    assert!(stdout(&o).contains("| NBSVM"));
}

#[test]
fn benchmark_is_reproducible_across_job_counts() {
    let fx = Fixture::new();
    let run = |jobs: &str| {
        let o = nblr(&["benchmark", "--corpus", &fx.p("toy.tsv"), "--nbsvm", "--folds", "3", "--jobs", jobs]);
        assert!(o.status.success(), "{}", stderr(&o));
        let last = stdout(&o).lines().last().unwrap().to_string();
        let v: serde_json::Value = serde_json::from_str(&last).unwrap();
        v["aggregate"].as_f64().unwrap().to_bits()
    };
    assert_eq!(run("1"), run("3"));
}

#[test]
fn prepare_writes_a_deterministic_filtered_cache() {
    let fx = Fixture::new();
    let run = |out: &str| {
        let o = nblr(&["prepare", "--corpus", &fx.p("toy.tsv"), "--embeddings", &fx.p("vectors.txt"), "-o", out]);
        assert!(o.status.success(), "{}", stderr(&o));
        o
    };
    let o = run(&fx.p("cache1.txt"));
    run(&fx.p("cache2.txt"));
    let a = fs::read(fx.path("cache1.txt")).unwrap();
    assert_eq!(a, fs::read(fx.path("cache2.txt")).unwrap());
    let text = String::from_utf8(a).unwrap();
    assert!(!text.contains("unused"));
    assert!(text.contains("great"));
    let stats: serde_json::Value = serde_json::from_str(stdout(&o).lines().next().unwrap()).unwrap();
    let coverage = stats["coverage"].as_f64().unwrap();
    assert!(coverage > 0.5 && coverage < 1.0, "{coverage}");
}

#[test]
fn prepare_rejects_zero_coverage() {
    let fx = Fixture::new();
    fs::write(fx.path("other.txt"), "zebra 1 2\n").unwrap();
    let o = nblr(&["prepare", "--corpus", &fx.p("toy.tsv"), "--embeddings", &fx.p("other.txt"), "-o", &fx.p("c.txt")]);
    assert_eq!(o.status.code(), Some(2));
    assert_eq!(error_line(&o)["error"], "data");
}

fn assert_config_error(o: &Output) {
    assert_eq!(o.status.code(), Some(1), "stderr: {}", stderr(o));
    let e = error_line(o);
    assert_eq!(e["error"], "config");
    assert_eq!(e["exit_code"], 1);
}

#[test]
fn invalid_configurations_fail_fast_with_exit_code_1() {
    let fx = Fixture::new();
    fs::write(fx.path("bad.toml"), "[features]\nmax_ordr = 3\n").unwrap();
    assert_config_error(&nblr(&["benchmark", "-c", &fx.p("bad.toml")]));
    assert_config_error(&nblr(&["benchmark", "--corpus", &fx.p("toy.tsv"), "--nbsvm", "--alpha", "-1"]));
    assert_config_error(&nblr(&["benchmark", "--corpus", &fx.p("missing.tsv"), "--nbsvm"]));
    // Dense features without an embedding file.
    assert_config_error(&nblr(&["train", "--corpus", &fx.p("toy.tsv"), "-o", &fx.p("m.json")]));
    assert!(!fx.path("m.json").exists());
    // Usage errors.
    assert_config_error(&nblr(&["benchmark", "--no-such-flag"]));
    assert_config_error(&nblr(&["train", "--corpus", &fx.p("toy.tsv"), "--nbsvm", "--binarize", "maybe", "-o", "x"]));
}

#[test]
fn malformed_data_exits_with_code_2() {
    let fx = Fixture::new();
    fs::write(fx.path("broken.tsv"), "+1\tfine text\nnot a record\n").unwrap();
    let o = nblr(&["benchmark", "--corpus", &fx.p("broken.tsv"), "--nbsvm"]);
    assert_eq!(o.status.code(), Some(2));
    let e = error_line(&o);
    assert_eq!(e["error"], "data");
    assert!(e["message"].as_str().unwrap().contains(":2:"), "{e}");

    let model = train_nbsvm(&fx);
    // Editing the stored weights breaks the digest.
    let mut file: serde_json::Value = serde_json::from_str(&fs::read_to_string(&model).unwrap()).unwrap();
    file["body"]["lambda"] = serde_json::json!(123.0);
    fs::write(fx.path("tampered.json"), file.to_string()).unwrap();
    fs::write(fx.path("in.txt"), "great\n").unwrap();
    let o = nblr(&["predict", "-m", &fx.p("tampered.json"), "-i", &fx.p("in.txt")]);
    assert_eq!(o.status.code(), Some(2));
    assert!(error_line(&o)["message"].as_str().unwrap().contains("digest"));
}

#[test]
fn help_exits_cleanly() {
    let o = nblr(&["--help"]);
    assert!(o.status.success());
    for cmd in ["prepare", "train", "predict", "benchmark", "tag-train", "tag"] {
        assert!(stdout(&o).contains(cmd));
    }
}
