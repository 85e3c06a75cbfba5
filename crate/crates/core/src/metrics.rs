//! Balanced accuracy with abnormal as the positive class, and aggregation
//! across repetitions.

use crate::datasets::Label;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ConfusionCounts {
    pub tp: u64,
    pub fn_: u64,
    pub tn: u64,
    pub fp: u64,
}

impl ConfusionCounts {
    /// Tally `(truth, prediction)` pairs.
    pub fn from_predictions(truth: &[Label], predicted: &[Label]) -> Result<Self> {
        if truth.len() != predicted.len() {
            return Err(Error::Shape(format!(
                "{} labels but {} predictions",
                truth.len(),
                predicted.len()
            )));
        }
        let mut c = Self::default();
        for (t, p) in truth.iter().zip(predicted) {
            match (t, p) {
                (Label::Abnormal, Label::Abnormal) => c.tp += 1,
                (Label::Abnormal, Label::Normal) => c.fn_ += 1,
                (Label::Normal, Label::Normal) => c.tn += 1,
                (Label::Normal, Label::Abnormal) => c.fp += 1,
            }
        }
        Ok(c)
    }

    pub fn positives(&self) -> u64 {
        self.tp + self.fn_
    }

    pub fn negatives(&self) -> u64 {
        self.tn + self.fp
    }
}

/// Mean of true-positive and true-negative rate. Both classes must be present.
pub fn balanced_accuracy(c: &ConfusionCounts) -> Result<f64> {
    if c.positives() == 0 || c.negatives() == 0 {
        return Err(Error::Empty(format!(
            "balanced accuracy needs both classes ({} abnormal, {} normal)",
            c.positives(),
            c.negatives()
        )));
    }
    let tpr = c.tp as f64 / c.positives() as f64;
    let tnr = c.tn as f64 / c.negatives() as f64;
    Ok(0.5 * (tpr + tnr))
}

/// Arithmetic mean and population standard deviation.
pub fn aggregate(values: &[f64]) -> Result<(f64, f64)> {
    if values.is_empty() {
        return Err(Error::Empty("nothing to aggregate".into()));
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    Ok((mean, var.sqrt()))
}
