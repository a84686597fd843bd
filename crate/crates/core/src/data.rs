//! Value types shared by every stage: votes, samples, datasets, agent
//! profiles, plus label mapping and fold splitting.

use std::fmt;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng;

/// A binary vote. `Neg` is -1 ("NO"), `Pos` is +1 ("YES").
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "i8", into = "i8")]
pub enum Vote {
    Neg,
    Pos,
}

impl Vote {
    pub fn value(self) -> i8 {
        match self {
            Vote::Neg => -1,
            Vote::Pos => 1,
        }
    }

    pub fn as_f64(self) -> f64 {
        f64::from(self.value())
    }

    /// Sign rule with the global tie convention: zero maps to `Pos`.
    pub fn from_sign(x: f64) -> Vote {
        if x < 0.0 {
            Vote::Neg
        } else {
            Vote::Pos
        }
    }

    pub fn flipped(self) -> Vote {
        match self {
            Vote::Neg => Vote::Pos,
            Vote::Pos => Vote::Neg,
        }
    }
}

impl From<Vote> for i8 {
    fn from(v: Vote) -> i8 {
        v.value()
    }
}

impl TryFrom<i8> for Vote {
    type Error = String;

    fn try_from(v: i8) -> std::result::Result<Self, Self::Error> {
        match v {
            1 => Ok(Vote::Pos),
            -1 => Ok(Vote::Neg),
            other => Err(format!("vote must be -1 or +1, got {other}")),
        }
    }
}

impl fmt::Display for Vote {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Vote::Neg => f.write_str("-1"),
            Vote::Pos => f.write_str("1"),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub features: Vec<f64>,
    /// Absent for query samples.
    pub label: Option<Vote>,
}

impl Sample {
    pub fn new(features: Vec<f64>, label: Vote) -> Self {
        Sample {
            features,
            label: Some(label),
        }
    }

    pub fn query(features: Vec<f64>) -> Self {
        Sample { features, label: None }
    }

    pub fn dim(&self) -> usize {
        self.features.len()
    }
}

/// Per-learner precision and recall.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AgentProfile {
    pub precision: f64,
    pub recall: f64,
}

impl AgentProfile {
    pub fn new(precision: f64, recall: f64) -> Result<Self> {
        let ok = |x: f64| (0.0..=1.0).contains(&x);
        if !ok(precision) || !ok(recall) {
            return Err(Error::InvalidConfig(format!(
                "profile values must lie in [0, 1], got precision {precision}, recall {recall}"
            )));
        }
        Ok(AgentProfile { precision, recall })
    }

    /// The agent's voting strength `s + p`.
    pub fn strength(&self) -> f64 {
        self.precision + self.recall
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct ClassCounts {
    pub positive: usize,
    pub negative: usize,
    pub unlabeled: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    pub samples: Vec<Sample>,
    pub feature_names: Vec<String>,
}

impl Dataset {
    /// Build and validate a dataset.
    pub fn new(feature_names: Vec<String>, samples: Vec<Sample>) -> Result<Self> {
        let ds = Dataset { samples, feature_names };
        validate_dataset(&ds)?;
        Ok(ds)
    }

    /// Build from rows of features and labels, naming features `x1..xd`.
    pub fn from_rows(rows: Vec<Vec<f64>>, labels: Vec<Vote>) -> Result<Self> {
        if rows.len() != labels.len() {
            return Err(Error::LengthMismatch {
                left: rows.len(),
                right: labels.len(),
            });
        }
        let dim = rows.first().map_or(0, Vec::len);
        let names = (1..=dim).map(|i| format!("x{i}")).collect();
        let samples = rows.into_iter().zip(labels).map(|(f, l)| Sample::new(f, l)).collect();
        Dataset::new(names, samples)
    }

    pub fn dim(&self) -> usize {
        self.feature_names.len()
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// All labels, failing on the first unlabeled sample.
    pub fn labels(&self) -> Result<Vec<Vote>> {
        self.samples
            .iter()
            .enumerate()
            .map(|(row, s)| s.label.ok_or(Error::Unlabeled { row }))
            .collect()
    }

    /// Requires labels and both classes present.
    pub fn require_both_classes(&self) -> Result<Vec<Vote>> {
        let labels = self.labels()?;
        match labels.first() {
            None => Err(Error::EmptyDataset),
            Some(&first) if labels.iter().all(|&l| l == first) => Err(Error::SingleClass(first)),
            Some(_) => Ok(labels),
        }
    }

    /// A new dataset containing the given rows, in the given order.
    pub fn subset(&self, indices: &[usize]) -> Dataset {
        Dataset {
            samples: indices.iter().map(|&i| self.samples[i].clone()).collect(),
            feature_names: self.feature_names.clone(),
        }
    }
}

/// Map raw label tokens to votes. Accepts `+1`, `1`, `yes` for +1 and `-1`,
/// `0`, `no` for -1, case-insensitively.
pub fn map_labels<S: AsRef<str>>(raw: &[S]) -> Result<Vec<Vote>> {
    raw.iter()
        .enumerate()
        .map(|(row, token)| {
            parse_label(token.as_ref()).ok_or_else(|| Error::UnknownLabel {
                row,
                token: token.as_ref().to_string(),
            })
        })
        .collect()
}

pub(crate) fn parse_label(token: &str) -> Option<Vote> {
    match token.trim().to_ascii_lowercase().as_str() {
        "+1" | "1" | "yes" => Some(Vote::Pos),
        "-1" | "0" | "no" => Some(Vote::Neg),
        _ => None,
    }
}

pub fn render_labels(votes: &[Vote]) -> Vec<String> {
    votes.iter().map(Vote::to_string).collect()
}

/// Check dataset invariants without touching the data, returning class counts.
pub fn validate_dataset(dataset: &Dataset) -> Result<ClassCounts> {
    if dataset.samples.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let dim = dataset.dim();
    if dim == 0 {
        return Err(Error::ZeroDimensionality);
    }
    let mut counts = ClassCounts::default();
    for (row, sample) in dataset.samples.iter().enumerate() {
        if sample.features.len() != dim {
            return Err(Error::Ragged {
                row,
                expected: dim,
                found: sample.features.len(),
            });
        }
        if let Some(column) = sample.features.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite { row, column });
        }
        match sample.label {
            Some(Vote::Pos) => counts.positive += 1,
            Some(Vote::Neg) => counts.negative += 1,
            None => counts.unlabeled += 1,
        }
    }
    Ok(counts)
}

/// Split sample indices into `k` disjoint folds.
///
/// Stratified by label when each class has at least `k` members, plain
/// shuffled round-robin otherwise. Each fold's indices are sorted.
pub fn split_folds(dataset: &Dataset, k: usize, seed: u64) -> Result<Vec<Vec<usize>>> {
    let n = dataset.len();
    if k < 2 || k > n {
        return Err(Error::InvalidFolds { folds: k, samples: n });
    }
    let labels = dataset.labels()?;
    let mut rng = rng::stream(seed, &[0xf01d]);
    let (mut pos, mut neg): (Vec<usize>, Vec<usize>) = (0..n).partition(|&i| labels[i] == Vote::Pos);

    let mut folds = vec![Vec::with_capacity(n / k + 1); k];
    if pos.len() >= k && neg.len() >= k {
        pos.shuffle(&mut rng);
        neg.shuffle(&mut rng);
        // Continue the round-robin across classes so fold sizes differ by at most one.
        for (slot, idx) in pos.into_iter().chain(neg).enumerate() {
            folds[slot % k].push(idx);
        }
    } else {
        let mut all: Vec<usize> = (0..n).collect();
        all.shuffle(&mut rng);
        for (slot, idx) in all.into_iter().enumerate() {
            folds[slot % k].push(idx);
        }
    }
    for fold in &mut folds {
        fold.sort_unstable();
    }
    Ok(folds)
}
