//! Out-of-fold estimation of each agent's precision and recall.

use serde::Serialize;

use crate::data::{split_folds, AgentProfile, Dataset, Vote};
use crate::error::{Error, Result};
use crate::learners::{train, Classifier, LearnerSpec};
use crate::representations::{apply_to_dataset, FittedRepresentation};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize)]
pub struct ConfusionCounts {
    pub tp: usize,
    pub fp: usize,
    pub tn: usize,
    pub fn_: usize,
}

impl ConfusionCounts {
    pub fn total(&self) -> usize {
        self.tp + self.fp + self.tn + self.fn_
    }

    pub fn record(&mut self, predicted: Vote, truth: Vote) {
        match (predicted, truth) {
            (Vote::Pos, Vote::Pos) => self.tp += 1,
            (Vote::Pos, Vote::Neg) => self.fp += 1,
            (Vote::Neg, Vote::Neg) => self.tn += 1,
            (Vote::Neg, Vote::Pos) => self.fn_ += 1,
        }
    }

    pub fn accuracy(&self) -> f64 {
        ratio(self.tp + self.tn, self.total())
    }

    /// Unsmoothed precision; 0 when nothing was predicted positive.
    pub fn precision(&self) -> f64 {
        ratio(self.tp, self.tp + self.fp)
    }

    /// Unsmoothed recall; 0 when there are no positives.
    pub fn recall(&self) -> f64 {
        ratio(self.tp, self.tp + self.fn_)
    }
}

fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

pub fn confusion(predictions: &[Vote], truth: &[Vote]) -> Result<ConfusionCounts> {
    if predictions.len() != truth.len() {
        return Err(Error::LengthMismatch {
            left: predictions.len(),
            right: truth.len(),
        });
    }
    if predictions.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let mut counts = ConfusionCounts::default();
    for (&p, &t) in predictions.iter().zip(truth) {
        counts.record(p, t);
    }
    Ok(counts)
}

/// Laplace-smoothed precision and recall:
/// `(tp + a) / (tp + fp + 2a)` and `(tp + a) / (tp + fn + 2a)`.
///
/// With `smoothing == 0` an empty denominator yields 0.
pub fn profile_from_counts(c: ConfusionCounts, smoothing: f64) -> AgentProfile {
    let a = smoothing.max(0.0);
    let smoothed = |num: usize, den: usize| {
        let den = den as f64 + 2.0 * a;
        if den == 0.0 {
            0.0
        } else {
            (num as f64 + a) / den
        }
    };
    AgentProfile {
        precision: smoothed(c.tp, c.tp + c.fp),
        recall: smoothed(c.tp, c.tp + c.fn_),
    }
}

/// Predictions for every sample made by a model that never saw it.
///
/// `fit` is called once per fold with the training part of `dataset`.
pub fn out_of_fold_predictions<C, F>(dataset: &Dataset, k: usize, seed: u64, mut fit: F) -> Result<Vec<Vote>>
where
    C: Classifier,
    F: FnMut(&Dataset) -> Result<C>,
{
    let folds = split_folds(dataset, k, seed)?;
    let n = dataset.len();
    let mut predictions: Vec<Option<Vote>> = vec![None; n];
    let mut in_fold = vec![usize::MAX; n];
    for (f, fold) in folds.iter().enumerate() {
        for &i in fold {
            in_fold[i] = f;
        }
    }
    for (f, fold) in folds.iter().enumerate() {
        let train_idx: Vec<usize> = (0..n).filter(|&i| in_fold[i] != f).collect();
        let model = fit(&dataset.subset(&train_idx))?;
        for &i in fold {
            predictions[i] = Some(model.predict(&dataset.samples[i])?);
        }
    }
    Ok(predictions
        .into_iter()
        .map(|p| p.expect("folds partition the samples"))
        .collect())
}

/// Pooled out-of-fold confusion counts for an arbitrary fitting routine.
pub fn cross_validated_counts<C, F>(dataset: &Dataset, k: usize, seed: u64, fit: F) -> Result<ConfusionCounts>
where
    C: Classifier,
    F: FnMut(&Dataset) -> Result<C>,
{
    let predictions = out_of_fold_predictions(dataset, k, seed, fit)?;
    confusion(&predictions, &dataset.labels()?)
}

/// Estimate one agent's profile: transform the data with `rep`, run k-fold
/// cross-validation of `spec`, pool the out-of-fold counts, then smooth.
pub fn estimate_profile(
    spec: &LearnerSpec,
    rep: &FittedRepresentation,
    dataset: &Dataset,
    k: usize,
    seed: u64,
    smoothing: f64,
) -> Result<AgentProfile> {
    let transformed = apply_to_dataset(rep, dataset)?;
    let counts = cross_validated_counts(&transformed, k, seed, |train_part| train(spec, train_part))?;
    Ok(profile_from_counts(counts, smoothing))
}
