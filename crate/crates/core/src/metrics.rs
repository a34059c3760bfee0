//! Accuracy and macro-averaged F1.

use crate::error::{Error, Result};
use crate::label::{ClassSet, Label};

fn check_lengths(pred: &[Label], gold: &[Label]) -> Result<()> {
    if pred.len() != gold.len() {
        return Err(Error::LengthMismatch(format!(
            "{} predictions for {} gold labels",
            pred.len(),
            gold.len()
        )));
    }
    Ok(())
}

pub fn accuracy(pred: &[Label], gold: &[Label]) -> Result<f64> {
    check_lengths(pred, gold)?;
    if gold.is_empty() {
        return Err(Error::Empty("no labels to score".into()));
    }
    let hits = pred.iter().zip(gold).filter(|(p, g)| p == g).count();
    Ok(hits as f64 / gold.len() as f64)
}

/// Counts of `[gold][pred]` over the class set; labels outside it are ignored.
pub fn confusion_matrix(pred: &[Label], gold: &[Label], classes: &ClassSet) -> Result<Vec<Vec<usize>>> {
    check_lengths(pred, gold)?;
    let c = classes.len();
    let mut m = vec![vec![0usize; c]; c];
    for (p, g) in pred.iter().zip(gold) {
        if let (Some(gi), Some(pi)) = (classes.index_of(*g), classes.index_of(*p)) {
            m[gi][pi] += 1;
        }
    }
    Ok(m)
}

/// Unweighted mean of per-class F1. A class absent from both predictions
/// and gold labels is skipped; precision or recall with a zero denominator
/// counts as 0.
pub fn macro_f1(pred: &[Label], gold: &[Label], classes: &ClassSet) -> Result<f64> {
    check_lengths(pred, gold)?;
    if classes.is_empty() {
        return Err(Error::Empty("class set".into()));
    }
    let mut sum = 0.0;
    let mut counted = 0usize;
    for &class in classes.labels() {
        let tp = pred.iter().zip(gold).filter(|(p, g)| **p == class && **g == class).count();
        let predicted = pred.iter().filter(|&&p| p == class).count();
        let actual = gold.iter().filter(|&&g| g == class).count();
        if predicted == 0 && actual == 0 {
            continue;
        }
        let precision = if predicted > 0 { tp as f64 / predicted as f64 } else { 0.0 };
        let recall = if actual > 0 { tp as f64 / actual as f64 } else { 0.0 };
        let f1 = if precision + recall > 0.0 {
            2.0 * precision * recall / (precision + recall)
        } else {
            0.0
        };
        sum += f1;
        counted += 1;
    }
    Ok(if counted == 0 { 0.0 } else { sum / counted as f64 })
}
