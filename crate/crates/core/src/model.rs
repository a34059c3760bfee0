//! Linear classifiers over concatenated sparse and dense features.
//!
//! Training minimises the mean loss plus `(lambda / 2) * |W|^2` (biases are
//! not regularised) with full-batch L-BFGS from an all-zero start. The
//! default loss is multinomial cross-entropy; a one-vs-rest squared hinge is
//! available for the NBSVM-style baseline.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::dense::DenseFeature;
use crate::error::{Error, Result};
use crate::label::{ClassSet, Label};
use crate::sparse::SparseFeature;

/// One input vector: a sparse block of width `sparse_dim` followed by a dense block.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureRow {
    pub sparse_dim: usize,
    /// Sorted `(index, value)` pairs, indices `< sparse_dim`.
    pub sparse: Vec<(u32, f64)>,
    pub dense: Vec<f64>,
}

impl FeatureRow {
    pub fn new(sparse: &SparseFeature, dense: Option<&DenseFeature>) -> Self {
        FeatureRow {
            sparse_dim: sparse.dim,
            sparse: sparse.entries.clone(),
            dense: dense.map(|d| d.values.clone()).unwrap_or_default(),
        }
    }

    pub fn dense_only(dense: Vec<f64>) -> Self {
        FeatureRow {
            sparse_dim: 0,
            sparse: Vec::new(),
            dense,
        }
    }

    pub fn dim(&self) -> usize {
        self.sparse_dim + self.dense.len()
    }

    fn dot(&self, w: &[f64]) -> f64 {
        let mut s = 0.0;
        for &(j, x) in &self.sparse {
            s += w[j as usize] * x;
        }
        let dense_w = &w[self.sparse_dim..];
        for (x, wj) in self.dense.iter().zip(dense_w) {
            s += x * wj;
        }
        s
    }

    fn axpy(&self, a: f64, out: &mut [f64]) {
        for &(j, x) in &self.sparse {
            out[j as usize] += a * x;
        }
        let dense_out = &mut out[self.sparse_dim..];
        for (x, o) in self.dense.iter().zip(dense_out) {
            *o += a * x;
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LossKind {
    /// Multinomial softmax cross-entropy.
    #[default]
    Logistic,
    /// One-vs-rest squared hinge.
    SquaredHinge,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub lambda: f64,
    pub tolerance: f64,
    pub max_iterations: usize,
    pub seed: u64,
    #[serde(default)]
    pub loss: LossKind,
    /// Number of correction pairs kept by L-BFGS.
    #[serde(default = "default_memory")]
    pub memory: usize,
}

fn default_memory() -> usize {
    10
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            lambda: 1e-2,
            tolerance: 1e-6,
            max_iterations: 500,
            seed: 0,
            loss: LossKind::Logistic,
            memory: default_memory(),
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return Err(Error::Config(format!("lambda must be finite and >= 0, got {}", self.lambda)));
        }
        if self.tolerance.is_nan() || self.tolerance <= 0.0 {
            return Err(Error::Config(format!("tolerance must be > 0, got {}", self.tolerance)));
        }
        if self.max_iterations < 1 {
            return Err(Error::Config("max_iterations must be at least 1".into()));
        }
        if self.memory < 1 {
            return Err(Error::Config("L-BFGS memory must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingSummary {
    pub lambda: f64,
    pub seed: u64,
    pub loss: LossKind,
    pub iterations: usize,
    pub initial_objective: f64,
    pub final_objective: f64,
    pub gradient_norm: f64,
    pub converged: bool,
}

/// Per-class weight vectors and biases.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "LinearModelRepr", into = "LinearModelRepr")]
pub struct LinearModel {
    pub classes: ClassSet,
    pub sparse_dim: usize,
    pub dense_dim: usize,
    /// `classes.len()` vectors of length `sparse_dim + dense_dim`.
    pub weights: Vec<Vec<f64>>,
    pub biases: Vec<f64>,
    pub summary: Option<TrainingSummary>,
}

/// Serialized form: weights stored as non-zero `(index, value)` pairs.
#[derive(Serialize, Deserialize)]
struct LinearModelRepr {
    classes: ClassSet,
    sparse_dim: usize,
    dense_dim: usize,
    weights: Vec<Vec<(u32, f64)>>,
    biases: Vec<f64>,
    summary: Option<TrainingSummary>,
}

impl From<LinearModel> for LinearModelRepr {
    fn from(m: LinearModel) -> Self {
        LinearModelRepr {
            weights: m
                .weights
                .iter()
                .map(|w| {
                    w.iter()
                        .enumerate()
                        .filter(|(_, &x)| x != 0.0)
                        .map(|(i, &x)| (i as u32, x))
                        .collect()
                })
                .collect(),
            classes: m.classes,
            sparse_dim: m.sparse_dim,
            dense_dim: m.dense_dim,
            biases: m.biases,
            summary: m.summary,
        }
    }
}

impl TryFrom<LinearModelRepr> for LinearModel {
    type Error = Error;

    fn try_from(r: LinearModelRepr) -> Result<Self> {
        let d = r.sparse_dim + r.dense_dim;
        let c = r.classes.len();
        if r.weights.len() != c || r.biases.len() != c {
            return Err(Error::Serde(format!("model has {c} classes but {} weight vectors", r.weights.len())));
        }
        let mut weights = vec![vec![0.0; d]; c];
        for (dst, src) in weights.iter_mut().zip(&r.weights) {
            for &(i, x) in src {
                let slot = dst
                    .get_mut(i as usize)
                    .ok_or_else(|| Error::Serde(format!("weight index {i} out of range {d}")))?;
                *slot = x;
            }
        }
        Ok(LinearModel {
            classes: r.classes,
            sparse_dim: r.sparse_dim,
            dense_dim: r.dense_dim,
            weights,
            biases: r.biases,
            summary: r.summary,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Prediction {
    pub label: Label,
    /// Softmax probabilities in class order.
    pub probabilities: Vec<(Label, f64)>,
}

/// Gradient of the objective, shaped like the model parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradient {
    pub weights: Vec<Vec<f64>>,
    pub biases: Vec<f64>,
}

impl LinearModel {
    pub fn zeros(classes: ClassSet, sparse_dim: usize, dense_dim: usize) -> Self {
        let c = classes.len();
        LinearModel {
            classes,
            sparse_dim,
            dense_dim,
            weights: vec![vec![0.0; sparse_dim + dense_dim]; c],
            biases: vec![0.0; c],
            summary: None,
        }
    }

    pub fn dim(&self) -> usize {
        self.sparse_dim + self.dense_dim
    }

    fn check_row(&self, row: &FeatureRow) -> Result<()> {
        if row.sparse_dim != self.sparse_dim {
            return Err(Error::DimensionMismatch {
                expected: self.sparse_dim,
                found: row.sparse_dim,
            });
        }
        if row.dense.len() != self.dense_dim {
            return Err(Error::DimensionMismatch {
                expected: self.dense_dim,
                found: row.dense.len(),
            });
        }
        if let Some(&(j, _)) = row.sparse.last() {
            if j as usize >= self.sparse_dim {
                return Err(Error::DimensionMismatch {
                    expected: self.sparse_dim,
                    found: j as usize + 1,
                });
            }
        }
        Ok(())
    }

    /// Raw class scores `w_c . x + b_c`.
    pub fn scores(&self, row: &FeatureRow) -> Result<Vec<f64>> {
        self.check_row(row)?;
        Ok(self
            .weights
            .iter()
            .zip(&self.biases)
            .map(|(w, b)| row.dot(w) + b)
            .collect())
    }

    fn to_params(&self) -> Vec<f64> {
        let mut p: Vec<f64> = self.weights.iter().flatten().copied().collect();
        p.extend_from_slice(&self.biases);
        p
    }

    fn set_params(&mut self, p: &[f64]) {
        let d = self.dim();
        for (c, w) in self.weights.iter_mut().enumerate() {
            w.copy_from_slice(&p[c * d..(c + 1) * d]);
        }
        let c = self.classes.len();
        self.biases.copy_from_slice(&p[c * d..]);
    }
}

pub fn predict(model: &LinearModel, row: &FeatureRow) -> Result<Prediction> {
    let scores = model.scores(row)?;
    let probs = softmax(&scores);
    let mut best = 0;
    for c in 1..scores.len() {
        if scores[c] > scores[best] {
            best = c;
        }
    }
    Ok(Prediction {
        label: model.classes.labels()[best],
        probabilities: model.classes.labels().iter().copied().zip(probs).collect(),
    })
}

fn softmax(scores: &[f64]) -> Vec<f64> {
    let m = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = scores.iter().map(|s| (s - m).exp()).collect();
    let z: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / z).collect()
}

/// Full-batch objective over flattened parameters `[W_0 .. W_{C-1}, b]`.
struct Objective<'a> {
    rows: &'a [(FeatureRow, Label)],
    targets: Vec<usize>,
    classes: usize,
    dim: usize,
    lambda: f64,
    loss: LossKind,
}

impl<'a> Objective<'a> {
    fn new(model: &LinearModel, rows: &'a [(FeatureRow, Label)], lambda: f64, loss: LossKind) -> Result<Self> {
        if rows.is_empty() {
            return Err(Error::Empty("training rows".into()));
        }
        let mut targets = Vec::with_capacity(rows.len());
        for (row, label) in rows {
            model.check_row(row)?;
            targets.push(model.classes.index_of(*label).ok_or_else(|| Error::LabelOutsideClasses {
                label: label.to_string(),
            })?);
        }
        Ok(Objective {
            rows,
            targets,
            classes: model.classes.len(),
            dim: model.dim(),
            lambda,
            loss,
        })
    }

    fn n_params(&self) -> usize {
        self.classes * (self.dim + 1)
    }

    /// Objective value; writes the gradient into `grad`.
    fn eval(&self, params: &[f64], grad: &mut [f64]) -> f64 {
        let (c, d) = (self.classes, self.dim);
        grad.iter_mut().for_each(|g| *g = 0.0);
        let inv_n = 1.0 / self.rows.len() as f64;
        let mut total = 0.0;
        let mut scores = vec![0.0; c];
        let mut dscore = vec![0.0; c];
        for ((row, _), &y) in self.rows.iter().zip(&self.targets) {
            for k in 0..c {
                scores[k] = row.dot(&params[k * d..(k + 1) * d]) + params[c * d + k];
            }
            match self.loss {
                LossKind::Logistic => {
                    let m = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                    let z: f64 = scores.iter().map(|s| (s - m).exp()).sum();
                    let lse = m + z.ln();
                    total += lse - scores[y];
                    for k in 0..c {
                        dscore[k] = (scores[k] - lse).exp() - f64::from(u8::from(k == y));
                    }
                }
                LossKind::SquaredHinge => {
                    for k in 0..c {
                        let sign = if k == y { 1.0 } else { -1.0 };
                        let margin = 1.0 - sign * scores[k];
                        if margin > 0.0 {
                            total += margin * margin;
                            dscore[k] = -2.0 * sign * margin;
                        } else {
                            dscore[k] = 0.0;
                        }
                    }
                }
            }
            for k in 0..c {
                if dscore[k] != 0.0 {
                    row.axpy(dscore[k] * inv_n, &mut grad[k * d..(k + 1) * d]);
                    grad[c * d + k] += dscore[k] * inv_n;
                }
            }
        }
        let mut reg = 0.0;
        if self.lambda > 0.0 {
            for (g, &w) in grad[..c * d].iter_mut().zip(&params[..c * d]) {
                reg += w * w;
                *g += self.lambda * w;
            }
        }
        total * inv_n + 0.5 * self.lambda * reg
    }
}

/// Objective value and exact gradient at `model`'s current parameters.
pub fn loss_and_gradient(
    model: &LinearModel,
    rows: &[(FeatureRow, Label)],
    lambda: f64,
    loss: LossKind,
) -> Result<(f64, Gradient)> {
    let obj = Objective::new(model, rows, lambda, loss)?;
    let mut g = vec![0.0; obj.n_params()];
    let f = obj.eval(&model.to_params(), &mut g);
    let d = model.dim();
    let c = model.classes.len();
    Ok((
        f,
        Gradient {
            weights: (0..c).map(|k| g[k * d..(k + 1) * d].to_vec()).collect(),
            biases: g[c * d..].to_vec(),
        },
    ))
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// L-BFGS with backtracking Armijo line search. Every accepted step
/// decreases the objective.
fn minimize(obj: &Objective<'_>, x: &mut [f64], config: &TrainConfig) -> Result<(usize, f64, f64, f64, bool)> {
    const ARMIJO: f64 = 1e-4;
    let n = x.len();
    let mut g = vec![0.0; n];
    let mut f = obj.eval(x, &mut g);
    if !f.is_finite() {
        return Err(Error::NonFinite(format!("initial objective is {f}")));
    }
    let initial = f;
    let mut history: VecDeque<(Vec<f64>, Vec<f64>, f64)> = VecDeque::with_capacity(config.memory);
    let mut x_new = vec![0.0; n];
    let mut g_new = vec![0.0; n];
    let mut dir = vec![0.0; n];
    let mut alpha = vec![0.0; config.memory];
    let mut iterations = 0;
    let mut converged = false;

    while iterations < config.max_iterations {
        let gnorm = norm(&g);
        if gnorm < config.tolerance {
            converged = true;
            break;
        }
        // Two-loop recursion: dir = -H g.
        dir.copy_from_slice(&g);
        for (i, (s, y, rho)) in history.iter().enumerate().rev() {
            alpha[i] = rho * dot(s, &dir);
            dir.iter_mut().zip(y).for_each(|(d, yv)| *d -= alpha[i] * yv);
        }
        let gamma = history.back().map_or(1.0 / gnorm.max(1.0), |(s, y, _)| dot(s, y) / dot(y, y));
        dir.iter_mut().for_each(|d| *d *= gamma);
        for (i, (s, y, rho)) in history.iter().enumerate() {
            let beta = rho * dot(y, &dir);
            dir.iter_mut().zip(s).for_each(|(d, sv)| *d += (alpha[i] - beta) * sv);
        }
        dir.iter_mut().for_each(|d| *d = -*d);
        let mut slope = dot(&g, &dir);
        if slope.is_nan() || slope >= 0.0 {
            history.clear();
            dir.iter_mut().zip(&g).for_each(|(d, gv)| *d = -gv / gnorm.max(1.0));
            slope = dot(&g, &dir);
        }

        let mut step = 1.0;
        let mut f_new;
        loop {
            x_new.iter_mut().zip(x.iter()).zip(&dir).for_each(|((xn, xv), d)| *xn = xv + step * d);
            f_new = obj.eval(&x_new, &mut g_new);
            if f_new.is_finite() && f_new <= f + ARMIJO * step * slope {
                break;
            }
            step *= 0.5;
            if step < 1e-20 {
                break;
            }
        }
        if !(f_new.is_finite() && f_new <= f) || step < 1e-20 {
            // No acceptable step; keep the current point.
            break;
        }
        iterations += 1;

        let s: Vec<f64> = x_new.iter().zip(x.iter()).map(|(a, b)| a - b).collect();
        let y: Vec<f64> = g_new.iter().zip(&g).map(|(a, b)| a - b).collect();
        let sy = dot(&s, &y);
        if sy > 1e-12 * norm(&s) * norm(&y) && sy > 0.0 {
            if history.len() == config.memory {
                history.pop_front();
            }
            history.push_back((s, y, 1.0 / sy));
        }
        x.copy_from_slice(&x_new);
        std::mem::swap(&mut g, &mut g_new);
        let decrease = f - f_new;
        f = f_new;
        if decrease <= f64::EPSILON * f.abs().max(1.0) {
            converged = norm(&g) < config.tolerance;
            break;
        }
    }
    if norm(&g) < config.tolerance {
        converged = true;
    }
    Ok((iterations, initial, f, norm(&g), converged))
}

/// Trains a linear model on `rows`. The class set is the set of labels present.
pub fn train(rows: &[(FeatureRow, Label)], config: &TrainConfig) -> Result<LinearModel> {
    config.validate()?;
    let first = rows.first().ok_or_else(|| Error::Empty("training rows".into()))?;
    let classes = ClassSet::new(rows.iter().map(|(_, l)| *l))?;
    if classes.len() < 2 {
        return Err(Error::InvalidArgument(format!(
            "training data contains a single class ({})",
            classes.labels()[0]
        )));
    }
    let mut model = LinearModel::zeros(classes, first.0.sparse_dim, first.0.dense.len());
    let obj = Objective::new(&model, rows, config.lambda, config.loss)?;
    let mut params = model.to_params();
    let (iterations, initial, fin, gnorm, converged) = minimize(&obj, &mut params, config)?;
    if params.iter().any(|p| !p.is_finite()) {
        return Err(Error::NonFinite("training produced non-finite weights".into()));
    }
    model.set_params(&params);
    model.summary = Some(TrainingSummary {
        lambda: config.lambda,
        seed: config.seed,
        loss: config.loss,
        iterations,
        initial_objective: initial,
        final_objective: fin,
        gradient_norm: gnorm,
        converged,
    });
    log::debug!(
        "trained {} classes x {} features: {iterations} iterations, objective {initial:.6} -> {fin:.6}",
        model.classes.len(),
        model.dim()
    );
    Ok(model)
}

/// NBSVM-style baseline: a linear model over the log-count-ratio sparse
/// features only. Rows must not carry dense features.
pub fn train_nbsvm_baseline(rows: &[(FeatureRow, Label)], config: &TrainConfig) -> Result<LinearModel> {
    if let Some((row, _)) = rows.iter().find(|(r, _)| !r.dense.is_empty()) {
        return Err(Error::DimensionMismatch {
            expected: 0,
            found: row.dense.len(),
        });
    }
    train(rows, config)
}
