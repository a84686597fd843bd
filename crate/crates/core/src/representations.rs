//! Feature relevance scoring and randomized training-data representations.
//!
//! A representation is fitted on training data (statistics frozen at fit
//! time) and then applied to any sample of the same dimensionality. Labels
//! and sample order always pass through untouched.

use rand::seq::{IndexedRandom, SliceRandom};
use serde::{Deserialize, Serialize};

use crate::data::{Dataset, Sample, Vote};
use crate::error::{Error, Result};
use crate::rng;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum RepresentationKind {
    Identity,
    Zscore,
    Minmax,
    BinarizeAtMedian,
    /// Keep a random `fraction` of the features (at least one).
    FeatureSubset {
        fraction: f64,
    },
    RankTransform,
}

impl RepresentationKind {
    pub fn name(&self) -> &'static str {
        match self {
            RepresentationKind::Identity => "identity",
            RepresentationKind::Zscore => "zscore",
            RepresentationKind::Minmax => "minmax",
            RepresentationKind::BinarizeAtMedian => "binarize_at_median",
            RepresentationKind::FeatureSubset { .. } => "feature_subset",
            RepresentationKind::RankTransform => "rank_transform",
        }
    }

    /// Pool that randomized representations are drawn from.
    pub fn default_pool() -> Vec<RepresentationKind> {
        vec![
            RepresentationKind::Zscore,
            RepresentationKind::Minmax,
            RepresentationKind::BinarizeAtMedian,
            RepresentationKind::FeatureSubset { fraction: 0.5 },
            RepresentationKind::RankTransform,
        ]
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RepresentationSpec {
    pub kind: RepresentationKind,
    pub seed: u64,
}

impl RepresentationSpec {
    pub fn new(kind: RepresentationKind, seed: u64) -> Self {
        RepresentationSpec { kind, seed }
    }

    pub fn identity() -> Self {
        RepresentationSpec::new(RepresentationKind::Identity, 0)
    }

    pub fn validate(&self) -> Result<()> {
        if let RepresentationKind::FeatureSubset { fraction } = self.kind {
            if !(fraction > 0.0 && fraction <= 1.0) {
                return Err(Error::InvalidConfig(format!(
                    "feature_subset fraction must be in (0, 1], got {fraction}"
                )));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "stats", rename_all = "snake_case")]
pub enum FittedStats {
    Identity,
    Zscore {
        means: Vec<f64>,
        deviations: Vec<f64>,
    },
    Minmax {
        mins: Vec<f64>,
        maxs: Vec<f64>,
    },
    Median {
        medians: Vec<f64>,
    },
    Subset {
        indices: Vec<usize>,
    },
    /// Sorted training values per feature.
    Rank {
        columns: Vec<Vec<f64>>,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FittedRepresentation {
    pub spec: RepresentationSpec,
    pub input_dim: usize,
    pub stats: FittedStats,
}

fn column(dataset: &Dataset, j: usize) -> impl Iterator<Item = f64> + '_ {
    dataset.samples.iter().map(move |s| s.features[j])
}

fn mean_and_var(values: &[f64], ddof: usize) -> (f64, f64) {
    let n = values.len();
    let mean = values.iter().sum::<f64>() / n as f64;
    if n <= ddof {
        return (mean, 0.0);
    }
    let ss: f64 = values.iter().map(|v| (v - mean).powi(2)).sum();
    (mean, ss / (n - ddof) as f64)
}

fn median(sorted: &[f64]) -> f64 {
    let n = sorted.len();
    if n % 2 == 1 {
        sorted[n / 2]
    } else {
        0.5 * (sorted[n / 2 - 1] + sorted[n / 2])
    }
}

fn sorted_column(dataset: &Dataset, j: usize) -> Vec<f64> {
    let mut col: Vec<f64> = column(dataset, j).collect();
    col.sort_by(f64::total_cmp);
    col
}

/// Absolute Welch t-statistic of every feature between the two classes,
/// sorted by descending score (ties by feature index).
///
/// Constant features score 0. A feature whose within-class variances are
/// both zero but whose class means differ separates the classes perfectly
/// and scores `+inf`.
pub fn score_features(dataset: &Dataset) -> Result<Vec<(usize, f64)>> {
    let labels = dataset.require_both_classes()?;
    let mut scores: Vec<(usize, f64)> = (0..dataset.dim())
        .map(|j| {
            let (mut pos, mut neg) = (Vec::new(), Vec::new());
            for (v, &l) in column(dataset, j).zip(&labels) {
                if l == Vote::Pos {
                    pos.push(v)
                } else {
                    neg.push(v)
                }
            }
            (j, welch_t(&pos, &neg).abs())
        })
        .collect();
    scores.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    Ok(scores)
}

fn welch_t(a: &[f64], b: &[f64]) -> f64 {
    let (ma, va) = mean_and_var(a, 1);
    let (mb, vb) = mean_and_var(b, 1);
    let diff = ma - mb;
    let se2 = va / a.len() as f64 + vb / b.len() as f64;
    if diff == 0.0 {
        0.0
    } else if se2 == 0.0 {
        f64::INFINITY.copysign(diff)
    } else {
        diff / se2.sqrt()
    }
}

pub fn fit_representation(dataset: &Dataset, spec: RepresentationSpec) -> Result<FittedRepresentation> {
    spec.validate()?;
    if dataset.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let d = dataset.dim();
    if d == 0 {
        return Err(Error::ZeroDimensionality);
    }
    let stats = match spec.kind {
        RepresentationKind::Identity => FittedStats::Identity,
        RepresentationKind::Zscore => {
            let (means, deviations) = (0..d)
                .map(|j| {
                    let col: Vec<f64> = column(dataset, j).collect();
                    let (m, v) = mean_and_var(&col, 0);
                    (m, v.sqrt())
                })
                .unzip();
            FittedStats::Zscore { means, deviations }
        }
        RepresentationKind::Minmax => {
            let (mins, maxs) = (0..d)
                .map(|j| {
                    column(dataset, j).fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)))
                })
                .unzip();
            FittedStats::Minmax { mins, maxs }
        }
        RepresentationKind::BinarizeAtMedian => FittedStats::Median {
            medians: (0..d).map(|j| median(&sorted_column(dataset, j))).collect(),
        },
        RepresentationKind::FeatureSubset { fraction } => {
            let keep = ((fraction * d as f64).ceil() as usize).clamp(1, d);
            let mut all: Vec<usize> = (0..d).collect();
            all.shuffle(&mut rng::stream(spec.seed, &[0x5b5e7]));
            let mut indices = all[..keep].to_vec();
            indices.sort_unstable();
            FittedStats::Subset { indices }
        }
        RepresentationKind::RankTransform => FittedStats::Rank {
            columns: (0..d).map(|j| sorted_column(dataset, j)).collect(),
        },
    };
    Ok(FittedRepresentation {
        spec,
        input_dim: d,
        stats,
    })
}

/// Mid-rank empirical CDF of `x` against a sorted column, in [0, 1].
fn mid_rank(sorted: &[f64], x: f64) -> f64 {
    let below = sorted.partition_point(|&v| v < x);
    let upto = sorted.partition_point(|&v| v <= x);
    (below as f64 + 0.5 * (upto - below) as f64) / sorted.len() as f64
}

impl FittedRepresentation {
    pub fn output_dim(&self) -> usize {
        match &self.stats {
            FittedStats::Subset { indices } => indices.len(),
            _ => self.input_dim,
        }
    }

    pub fn transform(&self, features: &[f64]) -> Result<Vec<f64>> {
        if features.len() != self.input_dim {
            return Err(Error::DimensionMismatch {
                expected: self.input_dim,
                found: features.len(),
            });
        }
        let out = match &self.stats {
            FittedStats::Identity => features.to_vec(),
            FittedStats::Zscore { means, deviations } => features
                .iter()
                .zip(means.iter().zip(deviations))
                .map(|(&x, (&m, &sd))| if sd > 0.0 { (x - m) / sd } else { 0.0 })
                .collect(),
            FittedStats::Minmax { mins, maxs } => features
                .iter()
                .zip(mins.iter().zip(maxs))
                .map(|(&x, (&lo, &hi))| if hi > lo { (x - lo) / (hi - lo) } else { 0.0 })
                .collect(),
            // Ties at the median go up; constant features therefore map to +1.
            FittedStats::Median { medians } => features
                .iter()
                .zip(medians)
                .map(|(&x, &m)| if x >= m { 1.0 } else { -1.0 })
                .collect(),
            FittedStats::Subset { indices } => indices.iter().map(|&j| features[j]).collect(),
            FittedStats::Rank { columns } => features.iter().zip(columns).map(|(&x, col)| mid_rank(col, x)).collect(),
        };
        Ok(out)
    }

    pub fn feature_names(&self, names: &[String]) -> Vec<String> {
        match &self.stats {
            FittedStats::Subset { indices } => indices.iter().map(|&j| names[j].clone()).collect(),
            _ => names.to_vec(),
        }
    }
}

pub fn apply_representation(fitted: &FittedRepresentation, samples: &[Sample]) -> Result<Vec<Sample>> {
    samples
        .iter()
        .map(|s| {
            Ok(Sample {
                features: fitted.transform(&s.features)?,
                label: s.label,
            })
        })
        .collect()
}

/// Transform a whole dataset, keeping labels and order.
pub fn apply_to_dataset(fitted: &FittedRepresentation, dataset: &Dataset) -> Result<Dataset> {
    Ok(Dataset {
        samples: apply_representation(fitted, &dataset.samples)?,
        feature_names: fitted.feature_names(&dataset.feature_names),
    })
}

/// Identity first, then `count - 1` kinds drawn from the default pool.
pub fn generate_representation_set(dataset: &Dataset, count: usize, seed: u64) -> Result<Vec<FittedRepresentation>> {
    generate_representation_set_from(dataset, count, seed, &RepresentationKind::default_pool())
}

pub fn representation_specs(count: usize, seed: u64, pool: &[RepresentationKind]) -> Result<Vec<RepresentationSpec>> {
    if count == 0 {
        return Err(Error::InvalidConfig("representation count must be at least 1".into()));
    }
    if count > 1 && pool.is_empty() {
        return Err(Error::InvalidConfig("representation pool is empty".into()));
    }
    let mut specs = vec![RepresentationSpec::identity()];
    for i in 1..count as u64 {
        let mut pick = rng::stream(seed, &[0x4e9, i]);
        let kind = *pool.choose(&mut pick).expect("pool checked non-empty");
        specs.push(RepresentationSpec::new(kind, rng::derive_seed(seed, &[0x4ea, i])));
    }
    Ok(specs)
}

pub fn generate_representation_set_from(
    dataset: &Dataset,
    count: usize,
    seed: u64,
    pool: &[RepresentationKind],
) -> Result<Vec<FittedRepresentation>> {
    representation_specs(count, seed, pool)?
        .into_iter()
        .map(|spec| fit_representation(dataset, spec))
        .collect()
}
