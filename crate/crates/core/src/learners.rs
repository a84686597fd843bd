//! Heterogeneous binary base learners behind one train/predict contract.
//!
//! Every learner emits hard votes. All ties (equal distances, equal
//! posteriors, equal tree-vote counts, zero activation) resolve to +1.

use std::cmp::Ordering;

use rand::seq::index::sample as sample_indices;
use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::data::{Dataset, Sample, Vote};
use crate::error::{Error, Result};
use crate::rng::{self, StreamRng};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LearnerKind {
    DecisionTree {
        max_depth: usize,
    },
    Knn {
        k: usize,
    },
    NaiveBayes,
    LinearSgd {
        epochs: usize,
        learning_rate: f64,
    },
    RandomForest {
        trees: usize,
        max_depth: usize,
        subsample: f64,
    },
    TrendVector,
}

impl LearnerKind {
    pub fn name(&self) -> &'static str {
        match self {
            LearnerKind::DecisionTree { .. } => "decision_tree",
            LearnerKind::Knn { .. } => "knn",
            LearnerKind::NaiveBayes => "naive_bayes",
            LearnerKind::LinearSgd { .. } => "linear_sgd",
            LearnerKind::RandomForest { .. } => "random_forest",
            LearnerKind::TrendVector => "trend_vector",
        }
    }

    /// Default hyperparameters for a learner named by [`LearnerKind::name`]
    /// or a short alias.
    pub fn from_name(name: &str) -> Option<LearnerKind> {
        let kind = match name.trim().to_ascii_lowercase().as_str() {
            "decision_tree" | "tree" | "dt" => LearnerKind::DecisionTree { max_depth: 5 },
            "knn" => LearnerKind::Knn { k: 5 },
            "naive_bayes" | "nb" => LearnerKind::NaiveBayes,
            "linear_sgd" | "sgd" | "linear" => LearnerKind::LinearSgd {
                epochs: 50,
                learning_rate: 0.1,
            },
            "random_forest" | "forest" | "rf" => LearnerKind::RandomForest {
                trees: 25,
                max_depth: 6,
                subsample: 1.0,
            },
            "trend_vector" | "trend" | "centroid" => LearnerKind::TrendVector,
            _ => return None,
        };
        Some(kind)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LearnerSpec {
    #[serde(flatten)]
    pub kind: LearnerKind,
    pub seed: u64,
}

impl LearnerSpec {
    pub fn new(kind: LearnerKind, seed: u64) -> Self {
        LearnerSpec { kind, seed }
    }

    /// All six learner kinds with default hyperparameters.
    pub fn default_roster() -> Vec<LearnerSpec> {
        [
            "decision_tree",
            "knn",
            "naive_bayes",
            "linear_sgd",
            "random_forest",
            "trend_vector",
        ]
        .iter()
        .map(|n| LearnerSpec::new(LearnerKind::from_name(n).expect("known name"), 0))
        .collect()
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidConfig(msg));
        match self.kind {
            LearnerKind::DecisionTree { max_depth } if max_depth < 1 => bad("tree depth must be >= 1".into()),
            LearnerKind::Knn { k } if k < 1 => bad("knn k must be >= 1".into()),
            LearnerKind::LinearSgd { learning_rate, .. } if !(learning_rate > 0.0 && learning_rate.is_finite()) => {
                bad(format!("learning rate must be > 0, got {learning_rate}"))
            }
            LearnerKind::RandomForest {
                trees,
                max_depth,
                subsample,
            } => {
                if trees < 1 {
                    bad("forest needs at least one tree".into())
                } else if max_depth < 1 {
                    bad("tree depth must be >= 1".into())
                } else if !(subsample > 0.0 && subsample <= 1.0) {
                    bad(format!("subsample fraction must be in (0, 1], got {subsample}"))
                } else {
                    Ok(())
                }
            }
            _ => Ok(()),
        }
    }
}

// ---------------------------------------------------------------------------
// Decision tree (CART, Gini)
// ---------------------------------------------------------------------------

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "node", rename_all = "snake_case")]
pub enum Node {
    Leaf {
        vote: Vote,
    },
    /// `x[feature] <= threshold` goes left.
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Tree {
    pub nodes: Vec<Node>,
}

impl Tree {
    pub fn predict(&self, x: &[f64]) -> Vote {
        let mut at = 0;
        loop {
            match self.nodes[at] {
                Node::Leaf { vote } => return vote,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => at = if x[feature] <= threshold { left } else { right },
            }
        }
    }

    pub fn depth(&self) -> usize {
        fn walk(nodes: &[Node], at: usize) -> usize {
            match nodes[at] {
                Node::Leaf { .. } => 0,
                Node::Split { left, right, .. } => 1 + walk(nodes, left).max(walk(nodes, right)),
            }
        }
        walk(&self.nodes, 0)
    }
}

fn gini(pos: usize, total: usize) -> f64 {
    if total == 0 {
        return 0.0;
    }
    let p = pos as f64 / total as f64;
    2.0 * p * (1.0 - p)
}

struct TreeBuilder<'a> {
    rows: &'a [&'a [f64]],
    labels: &'a [Vote],
    max_depth: usize,
    /// Features considered per split; `None` means all.
    max_features: Option<usize>,
    nodes: Vec<Node>,
}

impl TreeBuilder<'_> {
    fn majority(&self, idx: &[usize]) -> Vote {
        let pos = idx.iter().filter(|&&i| self.labels[i] == Vote::Pos).count();
        if 2 * pos >= idx.len() {
            Vote::Pos
        } else {
            Vote::Neg
        }
    }

    /// Best (feature, threshold, weighted child impurity) over midpoints.
    fn best_split(&self, idx: &[usize], features: &[usize]) -> Option<(usize, f64, f64)> {
        let total = idx.len();
        let total_pos = idx.iter().filter(|&&i| self.labels[i] == Vote::Pos).count();
        let mut best: Option<(usize, f64, f64)> = None;
        let mut sorted: Vec<(f64, bool)> = Vec::with_capacity(total);
        for &f in features {
            sorted.clear();
            sorted.extend(idx.iter().map(|&i| (self.rows[i][f], self.labels[i] == Vote::Pos)));
            sorted.sort_by(|a, b| a.0.total_cmp(&b.0));
            let mut left_pos = 0;
            for k in 0..total - 1 {
                if sorted[k].1 {
                    left_pos += 1;
                }
                let (lo, hi) = (sorted[k].0, sorted[k + 1].0);
                if lo == hi {
                    continue;
                }
                let left_n = k + 1;
                let right_n = total - left_n;
                let impurity = (left_n as f64 * gini(left_pos, left_n)
                    + right_n as f64 * gini(total_pos - left_pos, right_n))
                    / total as f64;
                if best.is_none_or(|(_, _, b)| impurity < b) {
                    let mut threshold = lo + (hi - lo) / 2.0;
                    if threshold >= hi {
                        threshold = lo;
                    }
                    best = Some((f, threshold, impurity));
                }
            }
        }
        best
    }

    fn grow(&mut self, idx: Vec<usize>, depth: usize, rng: &mut StreamRng) -> usize {
        let me = self.nodes.len();
        let majority = self.majority(&idx);
        self.nodes.push(Node::Leaf { vote: majority });

        let pos = idx.iter().filter(|&&i| self.labels[i] == Vote::Pos).count();
        if depth >= self.max_depth || pos == 0 || pos == idx.len() {
            return me;
        }
        let dim = self.rows[idx[0]].len();
        let features: Vec<usize> = match self.max_features {
            Some(m) if m < dim => {
                let mut f = sample_indices(rng, dim, m).into_vec();
                f.sort_unstable();
                f
            }
            _ => (0..dim).collect(),
        };
        let parent = gini(pos, idx.len());
        let Some((feature, threshold, impurity)) = self.best_split(&idx, &features) else {
            return me;
        };
        if impurity >= parent - 1e-12 {
            return me;
        }
        let (left_idx, right_idx): (Vec<usize>, Vec<usize>) =
            idx.into_iter().partition(|&i| self.rows[i][feature] <= threshold);
        let left = self.grow(left_idx, depth + 1, rng);
        let right = self.grow(right_idx, depth + 1, rng);
        self.nodes[me] = Node::Split {
            feature,
            threshold,
            left,
            right,
        };
        me
    }
}

fn build_tree(
    rows: &[&[f64]],
    labels: &[Vote],
    idx: Vec<usize>,
    max_depth: usize,
    max_features: Option<usize>,
    rng: &mut StreamRng,
) -> Tree {
    let mut builder = TreeBuilder {
        rows,
        labels,
        max_depth,
        max_features,
        nodes: Vec::new(),
    };
    builder.grow(idx, 0, rng);
    Tree { nodes: builder.nodes }
}

// ---------------------------------------------------------------------------
// Trained state
// ---------------------------------------------------------------------------

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GaussianClass {
    pub log_prior: f64,
    pub means: Vec<f64>,
    pub variances: Vec<f64>,
}

impl GaussianClass {
    fn log_likelihood(&self, x: &[f64]) -> f64 {
        self.log_prior
            + x.iter()
                .zip(self.means.iter().zip(&self.variances))
                .map(|(&xi, (&m, &v))| -0.5 * ((2.0 * std::f64::consts::PI * v).ln() + (xi - m).powi(2) / v))
                .sum::<f64>()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "snake_case")]
pub enum FittedModel {
    Tree(Tree),
    Knn {
        k: usize,
        points: Vec<Vec<f64>>,
        labels: Vec<Vote>,
    },
    NaiveBayes {
        negative: GaussianClass,
        positive: GaussianClass,
    },
    Linear {
        weights: Vec<f64>,
        bias: f64,
    },
    Forest {
        trees: Vec<Tree>,
    },
    Centroids {
        negative: Vec<f64>,
        positive: Vec<f64>,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainedLearner {
    pub spec: LearnerSpec,
    pub dim: usize,
    pub model: FittedModel,
}

/// Anything that turns a sample into a vote.
pub trait Classifier {
    fn predict(&self, sample: &Sample) -> Result<Vote>;
}

impl<F> Classifier for F
where
    F: Fn(&Sample) -> Vote,
{
    fn predict(&self, sample: &Sample) -> Result<Vote> {
        Ok(self(sample))
    }
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum()
}

fn lex_cmp(a: &[f64], b: &[f64]) -> Ordering {
    a.iter()
        .zip(b)
        .map(|(x, y)| x.total_cmp(y))
        .find(|o| o.is_ne())
        .unwrap_or(Ordering::Equal)
}

/// Samples sorted by (label, features) so order-free learners see the same
/// floating-point summation order regardless of input order.
fn canonical_order(dataset: &Dataset, labels: &[Vote]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..dataset.len()).collect();
    idx.sort_by(|&a, &b| {
        labels[a]
            .cmp(&labels[b])
            .then_with(|| lex_cmp(&dataset.samples[a].features, &dataset.samples[b].features))
    });
    idx
}

fn class_mean(dataset: &Dataset, idx: &[usize]) -> Vec<f64> {
    let d = dataset.dim();
    let mut sum = vec![0.0; d];
    for &i in idx {
        for (s, x) in sum.iter_mut().zip(&dataset.samples[i].features) {
            *s += x;
        }
    }
    sum.iter().map(|s| s / idx.len() as f64).collect()
}

fn class_variance(dataset: &Dataset, idx: &[usize], mean: &[f64]) -> Vec<f64> {
    let mut ss = vec![0.0; mean.len()];
    for &i in idx {
        for ((s, x), m) in ss.iter_mut().zip(&dataset.samples[i].features).zip(mean) {
            *s += (x - m).powi(2);
        }
    }
    ss.iter().map(|s| s / idx.len() as f64).collect()
}

fn split_by_class(order: &[usize], labels: &[Vote]) -> (Vec<usize>, Vec<usize>) {
    order.iter().partition(|&&i| labels[i] == Vote::Neg)
}

/// Train a learner. Deterministic in `(spec, dataset)`.
pub fn train(spec: &LearnerSpec, dataset: &Dataset) -> Result<TrainedLearner> {
    spec.validate()?;
    if dataset.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let dim = dataset.dim();
    if dim == 0 {
        return Err(Error::ZeroDimensionality);
    }
    let labels = dataset.labels()?;
    let mut rng = rng::stream(spec.seed, &[0x1ea4]);
    let rows: Vec<&[f64]> = dataset.samples.iter().map(|s| s.features.as_slice()).collect();

    let model = match spec.kind {
        LearnerKind::DecisionTree { max_depth } => FittedModel::Tree(build_tree(
            &rows,
            &labels,
            (0..rows.len()).collect(),
            max_depth,
            None,
            &mut rng,
        )),
        LearnerKind::Knn { k } => {
            let order = canonical_order(dataset, &labels);
            FittedModel::Knn {
                k,
                points: order.iter().map(|&i| dataset.samples[i].features.clone()).collect(),
                labels: order.iter().map(|&i| labels[i]).collect(),
            }
        }
        LearnerKind::NaiveBayes => {
            dataset.require_both_classes()?;
            let order = canonical_order(dataset, &labels);
            let (neg, pos) = split_by_class(&order, &labels);
            let n = dataset.len() as f64;
            let mut negative_mean = class_mean(dataset, &neg);
            let mut positive_mean = class_mean(dataset, &pos);
            let neg_var = class_variance(dataset, &neg, &negative_mean);
            let pos_var = class_variance(dataset, &pos, &positive_mean);
            // Variance floor relative to the largest per-feature variance, with an absolute minimum.
            let all: Vec<usize> = (0..dataset.len()).collect();
            let overall = class_mean(dataset, &all);
            let max_var = class_variance(dataset, &all, &overall).into_iter().fold(0.0, f64::max);
            let eps = (1e-9 * max_var).max(1e-9);
            let floor = |v: Vec<f64>| v.into_iter().map(|x| x + eps).collect::<Vec<f64>>();
            FittedModel::NaiveBayes {
                negative: GaussianClass {
                    log_prior: (neg.len() as f64 / n).ln(),
                    means: std::mem::take(&mut negative_mean),
                    variances: floor(neg_var),
                },
                positive: GaussianClass {
                    log_prior: (pos.len() as f64 / n).ln(),
                    means: std::mem::take(&mut positive_mean),
                    variances: floor(pos_var),
                },
            }
        }
        LearnerKind::LinearSgd { epochs, learning_rate } => {
            let mut weights = vec![0.0; dim];
            let mut bias = 0.0;
            let mut order: Vec<usize> = (0..dataset.len()).collect();
            for _ in 0..epochs {
                order.shuffle(&mut rng);
                for &i in &order {
                    let x = rows[i];
                    let y = labels[i].as_f64();
                    let z = bias + weights.iter().zip(x).map(|(w, xi)| w * xi).sum::<f64>();
                    // d/dz of log(1 + exp(-y z))
                    let g = -y / (1.0 + (y * z).exp());
                    for (w, xi) in weights.iter_mut().zip(x) {
                        *w -= learning_rate * g * xi;
                    }
                    bias -= learning_rate * g;
                }
            }
            FittedModel::Linear { weights, bias }
        }
        LearnerKind::RandomForest {
            trees,
            max_depth,
            subsample,
        } => {
            // Bootstrap within each class so every tree sees both classes when the data has them.
            let (neg, pos): (Vec<usize>, Vec<usize>) = (0..rows.len()).partition(|&i| labels[i] == Vote::Neg);
            let max_features = Some((dim as f64).sqrt().ceil() as usize);
            let forest = (0..trees as u64)
                .map(|t| {
                    let mut tree_rng = rng::stream(spec.seed, &[0xf0e5, t]);
                    let mut idx = Vec::with_capacity(rows.len());
                    for class in [&neg, &pos] {
                        if class.is_empty() {
                            continue;
                        }
                        let draws = ((subsample * class.len() as f64).round() as usize).max(1);
                        idx.extend((0..draws).map(|_| class[tree_rng.random_range(0..class.len())]));
                    }
                    build_tree(&rows, &labels, idx, max_depth, max_features, &mut tree_rng)
                })
                .collect();
            FittedModel::Forest { trees: forest }
        }
        LearnerKind::TrendVector => {
            dataset.require_both_classes()?;
            let order = canonical_order(dataset, &labels);
            let (neg, pos) = split_by_class(&order, &labels);
            FittedModel::Centroids {
                negative: class_mean(dataset, &neg),
                positive: class_mean(dataset, &pos),
            }
        }
    };
    Ok(TrainedLearner {
        spec: *spec,
        dim,
        model,
    })
}

impl TrainedLearner {
    /// Predict from a raw feature slice of the training dimensionality.
    pub fn predict_features(&self, x: &[f64]) -> Result<Vote> {
        if x.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                found: x.len(),
            });
        }
        let vote = match &self.model {
            FittedModel::Tree(tree) => tree.predict(x),
            FittedModel::Knn { k, points, labels } => {
                let mut by_dist: Vec<(f64, usize)> = points.iter().map(|p| sq_dist(p, x)).zip(0..).collect();
                // Distance ties: +1 neighbours first, then lexicographic point order.
                by_dist.sort_by(|a, b| {
                    a.0.total_cmp(&b.0)
                        .then_with(|| labels[b.1].cmp(&labels[a.1]))
                        .then_with(|| lex_cmp(&points[a.1], &points[b.1]))
                });
                let tally: i64 = by_dist
                    .iter()
                    .take((*k).min(points.len()))
                    .map(|&(_, i)| i64::from(labels[i].value()))
                    .sum();
                if tally >= 0 {
                    Vote::Pos
                } else {
                    Vote::Neg
                }
            }
            FittedModel::NaiveBayes { negative, positive } => {
                if positive.log_likelihood(x) >= negative.log_likelihood(x) {
                    Vote::Pos
                } else {
                    Vote::Neg
                }
            }
            FittedModel::Linear { weights, bias } => {
                Vote::from_sign(bias + weights.iter().zip(x).map(|(w, xi)| w * xi).sum::<f64>())
            }
            FittedModel::Forest { trees } => {
                let tally: i64 = trees.iter().map(|t| i64::from(t.predict(x).value())).sum();
                if tally >= 0 {
                    Vote::Pos
                } else {
                    Vote::Neg
                }
            }
            FittedModel::Centroids { negative, positive } => {
                if sq_dist(x, positive) <= sq_dist(x, negative) {
                    Vote::Pos
                } else {
                    Vote::Neg
                }
            }
        };
        Ok(vote)
    }
}

impl Classifier for TrainedLearner {
    fn predict(&self, sample: &Sample) -> Result<Vote> {
        self.predict_features(&sample.features)
    }
}

pub fn predict(learner: &TrainedLearner, sample: &Sample) -> Result<Vote> {
    learner.predict_features(&sample.features)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::Rng;
    use rand_distr::{Distribution, StandardNormal};

    fn ds(rows: Vec<Vec<f64>>, labels: &[i8]) -> Dataset {
        Dataset::from_rows(rows, labels.iter().map(|&l| Vote::try_from(l).unwrap()).collect()).unwrap()
    }

    fn all_kinds() -> Vec<LearnerKind> {
        vec![
            LearnerKind::DecisionTree { max_depth: 1 },
            LearnerKind::Knn { k: 1 },
            LearnerKind::NaiveBayes,
            LearnerKind::LinearSgd {
                epochs: 50,
                learning_rate: 0.1,
            },
            LearnerKind::RandomForest {
                trees: 5,
                max_depth: 3,
                subsample: 1.0,
            },
            LearnerKind::TrendVector,
        ]
    }

    fn training_accuracy(learner: &TrainedLearner, d: &Dataset) -> f64 {
        let hits = d
            .samples
            .iter()
            .filter(|s| predict(learner, s).unwrap() == s.label.unwrap())
            .count();
        hits as f64 / d.len() as f64
    }

    #[test]
    fn trend_vector_centroids() {
        let d = ds(vec![vec![0.0, 0.0], vec![2.0, 2.0]], &[-1, 1]);
        let learner = train(&LearnerSpec::new(LearnerKind::TrendVector, 0), &d).unwrap();
        assert_eq!(
            learner.model,
            FittedModel::Centroids {
                negative: vec![0.0, 0.0],
                positive: vec![2.0, 2.0]
            }
        );
        assert_eq!(predict(&learner, &Sample::query(vec![1.9, 1.9])).unwrap(), Vote::Pos);
        // Equidistant query resolves to +1.
        assert_eq!(predict(&learner, &Sample::query(vec![1.0, 1.0])).unwrap(), Vote::Pos);
    }

    #[test]
    fn depth_one_tree_finds_perfect_split() {
        let xs: Vec<f64> = (0..20).map(|i| i as f64 - 9.5).collect();
        let labels: Vec<i8> = xs.iter().map(|&x| if x < 0.0 { -1 } else { 1 }).collect();
        // Oracle: brute force over every midpoint threshold for a perfect split.
        let mut sorted = xs.clone();
        sorted.sort_by(f64::total_cmp);
        let perfect_exists = sorted.windows(2).any(|w| {
            let t = (w[0] + w[1]) / 2.0;
            xs.iter().zip(&labels).all(|(&x, &l)| (x > t) == (l == 1))
        });
        assert!(perfect_exists);

        let d = ds(xs.iter().map(|&x| vec![x]).collect(), &labels);
        let learner = train(&LearnerSpec::new(LearnerKind::DecisionTree { max_depth: 1 }, 0), &d).unwrap();
        let FittedModel::Tree(tree) = &learner.model else {
            panic!()
        };
        assert_eq!(tree.nodes.len(), 3);
        assert_eq!(tree.depth(), 1);
        assert_eq!(training_accuracy(&learner, &d), 1.0);
    }

    #[test]
    fn tree_respects_depth_limit() {
        let mut rng = rng::stream(5, &[]);
        let rows: Vec<Vec<f64>> = (0..80)
            .map(|_| vec![rng.random::<f64>(), rng.random::<f64>()])
            .collect();
        let labels: Vec<i8> = rows
            .iter()
            .map(|r| if (r[0] - 0.5) * (r[1] - 0.5) > 0.0 { 1 } else { -1 })
            .collect();
        let d = ds(rows, &labels);
        for depth in 1..5 {
            let learner = train(&LearnerSpec::new(LearnerKind::DecisionTree { max_depth: depth }, 0), &d).unwrap();
            let FittedModel::Tree(tree) = &learner.model else {
                panic!()
            };
            assert!(tree.depth() <= depth);
        }
    }

    #[test]
    fn forest_is_deterministic_in_seed() {
        let mut rng = rng::stream(1, &[]);
        let rows: Vec<Vec<f64>> = (0..40)
            .map(|_| (0..3).map(|_| StandardNormal.sample(&mut rng)).collect())
            .collect();
        let labels: Vec<i8> = rows.iter().map(|r| if r[0] + r[1] > 0.0 { 1 } else { -1 }).collect();
        let d = ds(rows, &labels);
        let spec = LearnerSpec::new(
            LearnerKind::RandomForest {
                trees: 5,
                max_depth: 4,
                subsample: 1.0,
            },
            3,
        );
        assert_eq!(train(&spec, &d).unwrap(), train(&spec, &d).unwrap());
        let other = LearnerSpec { seed: 4, ..spec };
        assert_ne!(train(&spec, &d).unwrap(), train(&other, &d).unwrap());
    }

    #[test]
    fn knn_memorizes_training_points() {
        let d = ds(vec![vec![0.0], vec![1.0], vec![5.0], vec![6.0]], &[1, -1, 1, -1]);
        let learner = train(&LearnerSpec::new(LearnerKind::Knn { k: 1 }, 0), &d).unwrap();
        assert_eq!(training_accuracy(&learner, &d), 1.0);
        // k larger than the training set falls back to all points: 2 vs 2 tie -> +1.
        let wide = train(&LearnerSpec::new(LearnerKind::Knn { k: 10 }, 0), &d).unwrap();
        assert_eq!(predict(&wide, &Sample::query(vec![100.0])).unwrap(), Vote::Pos);
    }

    #[test]
    fn naive_bayes_symmetric_tie_goes_positive() {
        let d = ds(vec![vec![-3.0], vec![-1.0], vec![1.0], vec![3.0]], &[-1, -1, 1, 1]);
        let learner = train(&LearnerSpec::new(LearnerKind::NaiveBayes, 0), &d).unwrap();
        assert_eq!(predict(&learner, &Sample::query(vec![0.0])).unwrap(), Vote::Pos);
        assert_eq!(predict(&learner, &Sample::query(vec![-0.1])).unwrap(), Vote::Neg);
    }

    #[test]
    fn learners_needing_both_classes_reject_single_class() {
        let d = ds(vec![vec![0.0], vec![1.0]], &[1, 1]);
        for kind in [LearnerKind::NaiveBayes, LearnerKind::TrendVector] {
            assert!(matches!(
                train(&LearnerSpec::new(kind, 0), &d),
                Err(Error::SingleClass(_))
            ));
        }
        for kind in all_kinds() {
            if matches!(kind, LearnerKind::NaiveBayes | LearnerKind::TrendVector) {
                continue;
            }
            let learner = train(&LearnerSpec::new(kind, 0), &d).unwrap();
            assert_eq!(predict(&learner, &Sample::query(vec![0.5])).unwrap(), Vote::Pos);
        }
    }

    #[test]
    fn invalid_specs_and_dimension_mismatch() {
        let d = ds(vec![vec![0.0, 1.0], vec![1.0, 0.0]], &[1, -1]);
        assert!(train(&LearnerSpec::new(LearnerKind::Knn { k: 0 }, 0), &d).is_err());
        assert!(train(&LearnerSpec::new(LearnerKind::DecisionTree { max_depth: 0 }, 0), &d).is_err());
        assert!(train(
            &LearnerSpec::new(
                LearnerKind::LinearSgd {
                    epochs: 1,
                    learning_rate: 0.0
                },
                0
            ),
            &d
        )
        .is_err());
        let learner = train(&LearnerSpec::new(LearnerKind::TrendVector, 0), &d).unwrap();
        assert!(matches!(
            predict(&learner, &Sample::query(vec![1.0])),
            Err(Error::DimensionMismatch { expected: 2, found: 1 })
        ));
    }

    #[test]
    fn every_learner_fits_two_distinct_points() {
        let cases = [
            (vec![vec![0.0, 0.0], vec![2.0, 2.0]], [-1, 1]),
            (vec![vec![1.0, -4.0], vec![-2.0, 3.0]], [-1, 1]),
            (vec![vec![5.0], vec![-5.0]], [-1, 1]),
        ];
        for (rows, labels) in cases {
            let d = ds(rows, &labels);
            for kind in all_kinds() {
                let learner = train(&LearnerSpec::new(kind, 17), &d).unwrap();
                assert_eq!(training_accuracy(&learner, &d), 1.0, "{kind:?}");
            }
        }
    }

    #[test]
    fn roster_names_round_trip() {
        for spec in LearnerSpec::default_roster() {
            assert_eq!(LearnerKind::from_name(spec.kind.name()), Some(spec.kind));
        }
        assert_eq!(LearnerSpec::default_roster().len(), 6);
        assert_eq!(LearnerKind::from_name("svm"), None);
    }

    proptest! {
        #[test]
        fn predictions_are_total(seed: u64, q in proptest::collection::vec(-1e6f64..1e6, 3)) {
            let mut rng = rng::stream(seed, &[]);
            let rows: Vec<Vec<f64>> = (0..12).map(|_| (0..3).map(|_| rng.random_range(-3.0..3.0)).collect()).collect();
            let labels: Vec<i8> = (0..12).map(|i| if i % 2 == 0 { 1 } else { -1 }).collect();
            let d = ds(rows, &labels);
            for kind in all_kinds() {
                let learner = train(&LearnerSpec::new(kind, seed), &d).unwrap();
                prop_assert!(predict(&learner, &Sample::query(q.clone())).is_ok());
            }
        }

        #[test]
        fn order_free_learners_ignore_sample_order(seed: u64) {
            let mut rng = rng::stream(seed, &[1]);
            let n = 25;
            let rows: Vec<Vec<f64>> = (0..n).map(|_| (0..2).map(|_| rng.random_range(-2i32..3) as f64 * 0.5).collect()).collect();
            let labels: Vec<i8> = (0..n).map(|_| if rng.random::<bool>() { 1 } else { -1 }).collect();
            let mut labels = labels;
            labels[0] = 1;
            labels[1] = -1;
            let d = ds(rows, &labels);
            let mut order: Vec<usize> = (0..n).collect();
            order.shuffle(&mut rng);
            let permuted = d.subset(&order);
            let queries: Vec<Sample> = (0..30).map(|_| Sample::query((0..2).map(|_| rng.random_range(-2i32..3) as f64 * 0.5).collect())).collect();
            for kind in [LearnerKind::Knn { k: 3 }, LearnerKind::Knn { k: 4 }, LearnerKind::NaiveBayes, LearnerKind::TrendVector] {
                let a = train(&LearnerSpec::new(kind, 0), &d).unwrap();
                let b = train(&LearnerSpec::new(kind, 0), &permuted).unwrap();
                prop_assert_eq!(&a.model, &b.model);
                for q in &queries {
                    prop_assert_eq!(predict(&a, q).unwrap(), predict(&b, q).unwrap());
                }
            }
        }
    }
}
