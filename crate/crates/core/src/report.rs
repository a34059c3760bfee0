//! Benchmark reports.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::corpus::MetricKind;

/// Published reference results, one row per model, one column per dataset.
pub const REFERENCE_RESULTS: &str = include_str!("../data/reference_results.tsv");

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldResult {
    pub fold: usize,
    pub train_size: usize,
    pub test_size: usize,
    pub value: f64,
    pub lambda: f64,
    #[serde(default)]
    pub lambda_scores: Vec<(f64, f64)>,
    pub iterations: usize,
    pub final_objective: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkReport {
    pub dataset: String,
    pub model: String,
    pub metric: MetricKind,
    pub folds: Vec<FoldResult>,
    /// Unweighted mean of the fold values.
    pub aggregate: f64,
    pub config: serde_json::Value,
}

impl BenchmarkReport {
    pub fn new(dataset: &str, model: &str, metric: MetricKind, folds: Vec<FoldResult>, config: serde_json::Value) -> Self {
        let aggregate = if folds.is_empty() {
            0.0
        } else {
            folds.iter().map(|f| f.value).sum::<f64>() / folds.len() as f64
        };
        BenchmarkReport {
            dataset: dataset.to_string(),
            model: model.to_string(),
            metric,
            folds,
            aggregate,
            config,
        }
    }

    /// Aggregate as a one-decimal percentage.
    pub fn percent(&self) -> String {
        format!("{:.1}", self.aggregate * 100.0)
    }

    /// Aligned table: one row for this run, then reference rows for the same
    /// dataset as footnotes.
    pub fn to_table(&self) -> String {
        let metric = match self.metric {
            MetricKind::Accuracy => "accuracy",
            MetricKind::MacroF1 => "macro-F1",
        };
        let mut rows = vec![(self.model.clone(), self.percent())];
        let mut refs = Vec::new();
        if let Some(col) = reference_column(&self.dataset) {
            for (model, values) in reference_rows() {
                if let Some(v) = values.get(col).filter(|v| **v != "-") {
                    refs.push((format!("{model} (reported)"), v.to_string()));
                }
            }
        }
        let width = rows.iter().chain(&refs).map(|(m, _)| m.len()).max().unwrap_or(5).max(5);
        let col_width = self.dataset.len().max(5);
        let mut out = String::new();
        let _ = writeln!(out, "| {:<width$} | {:>col_width$} |", "Model", self.dataset);
        let _ = writeln!(out, "|-{}-|-{}-|", "-".repeat(width), "-".repeat(col_width));
        for (m, v) in rows.drain(..) {
            let _ = writeln!(out, "| {m:<width$} | {v:>col_width$} |");
        }
        let _ = writeln!(
            out,
            "{} over {} fold(s), fold values: {}",
            metric,
            self.folds.len(),
            self.folds
                .iter()
                .map(|f| format!("{:.1}", f.value * 100.0))
                .collect::<Vec<_>>()
                .join(" ")
        );
        if !refs.is_empty() {
            let _ = writeln!(out, "reference results:");
            for (m, v) in refs {
                let _ = writeln!(out, "  {m:<width$}  {v:>col_width$}");
            }
        }
        out
    }
}

fn reference_rows() -> impl Iterator<Item = (&'static str, Vec<&'static str>)> {
    REFERENCE_RESULTS.lines().skip(1).filter(|l| !l.is_empty()).map(|l| {
        let mut f = l.split('\t');
        let model = f.next().unwrap_or_default();
        (model, f.collect())
    })
}

fn reference_column(dataset: &str) -> Option<usize> {
    let header = REFERENCE_RESULTS.lines().next()?;
    header
        .split('\t')
        .skip(1)
        .position(|c| c.eq_ignore_ascii_case(dataset))
}

/// Published value (in percent) for `model` on `dataset`, when listed.
pub fn reference_value(model: &str, dataset: &str) -> Option<f64> {
    let col = reference_column(dataset)?;
    reference_rows()
        .find(|(m, _)| *m == model)
        .and_then(|(_, v)| v.get(col).and_then(|s| s.parse().ok()))
}
