//! Monte Carlo simulation of an idealized ensemble of voting agents.
//!
//! Agent profiles are drawn from a population distribution, votes are
//! simulated conditional on a true label, and the weighted (optionally
//! noisy) consensus is scored. Sweeps over ensemble size and temperature
//! give an accuracy surface in which sharp changes can be located.
//!
//! Precision is turned into a false-positive rate assuming balanced class
//! priors: `FPR = s (1 - p) / p`, so an agent votes correctly on a negative
//! with probability `1 - FPR` and on a positive with probability `s`.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::consensus::{decide, decide_noisy, weighted_margin, NoiseMode, NoiseSpec};
use crate::data::{AgentProfile, Vote};
use crate::error::{Error, Result};
use crate::rng;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "distribution", rename_all = "snake_case")]
pub enum PopulationSpec {
    PointMass {
        precision: f64,
        recall: f64,
    },
    /// `p` and `s` drawn independently from uniform(lo, hi).
    IndependentUniform {
        lo: f64,
        hi: f64,
    },
    /// `p = s` drawn from uniform(lo, hi).
    CorrelatedEqual {
        lo: f64,
        hi: f64,
    },
}

fn false_positive_rate(p: &AgentProfile) -> Result<f64> {
    if p.precision <= 0.0 {
        return Err(Error::InvalidConfig(
            "precision 0 leaves the false-positive rate undefined".into(),
        ));
    }
    let fpr = p.recall * (1.0 - p.precision) / p.precision;
    if fpr > 1.0 + 1e-12 {
        return Err(Error::InvalidConfig(format!(
            "profile (p={}, s={}) implies false-positive rate {fpr} > 1",
            p.precision, p.recall
        )));
    }
    Ok(fpr.min(1.0))
}

impl PopulationSpec {
    /// Reject populations that could produce an agent with an impossible
    /// false-positive rate.
    pub fn validate(&self) -> Result<()> {
        let unit = |x: f64| (0.0..=1.0).contains(&x);
        match *self {
            PopulationSpec::PointMass { precision, recall } => {
                false_positive_rate(&AgentProfile::new(precision, recall)?)?;
            }
            PopulationSpec::IndependentUniform { lo, hi } | PopulationSpec::CorrelatedEqual { lo, hi } => {
                if !(unit(lo) && unit(hi) && lo <= hi) {
                    return Err(Error::InvalidConfig(format!(
                        "need 0 <= lo <= hi <= 1, got [{lo}, {hi}]"
                    )));
                }
                if lo <= 0.0 {
                    return Err(Error::InvalidConfig("precision lower bound must be > 0".into()));
                }
                if matches!(self, PopulationSpec::IndependentUniform { .. }) {
                    // Worst case is the largest recall with the smallest precision.
                    false_positive_rate(&AgentProfile::new(lo, hi)?)?;
                }
            }
        }
        Ok(())
    }

    /// Column values for flat exports: (kind, a, b).
    pub fn parameters(&self) -> (&'static str, f64, f64) {
        match *self {
            PopulationSpec::PointMass { precision, recall } => ("point_mass", precision, recall),
            PopulationSpec::IndependentUniform { lo, hi } => ("independent_uniform", lo, hi),
            PopulationSpec::CorrelatedEqual { lo, hi } => ("correlated_equal", lo, hi),
        }
    }
}

pub fn sample_population(spec: &PopulationSpec, n: usize, seed: u64) -> Result<Vec<AgentProfile>> {
    if n == 0 {
        return Err(Error::EmptyEnsemble);
    }
    spec.validate()?;
    let mut rng = rng::stream(seed, &[0x909]);
    let profiles = (0..n)
        .map(|_| match *spec {
            PopulationSpec::PointMass { precision, recall } => AgentProfile { precision, recall },
            PopulationSpec::IndependentUniform { lo, hi } => AgentProfile {
                precision: uniform(&mut rng, lo, hi),
                recall: uniform(&mut rng, lo, hi),
            },
            PopulationSpec::CorrelatedEqual { lo, hi } => {
                let x = uniform(&mut rng, lo, hi);
                AgentProfile {
                    precision: x,
                    recall: x,
                }
            }
        })
        .collect();
    Ok(profiles)
}

fn uniform<R: Rng>(rng: &mut R, lo: f64, hi: f64) -> f64 {
    if lo == hi {
        lo
    } else {
        rng.random_range(lo..=hi)
    }
}

/// Independent votes conditioned on the true label.
pub fn simulate_votes(profiles: &[AgentProfile], true_label: Vote, seed: u64) -> Result<Vec<Vote>> {
    let mut rng = rng::stream(seed, &[0x707e]);
    profiles
        .iter()
        .map(|p| {
            let correct_prob = match true_label {
                Vote::Pos => p.recall,
                Vote::Neg => 1.0 - false_positive_rate(p)?,
            };
            let correct = rng.random::<f64>() < correct_prob;
            Ok(if correct { true_label } else { true_label.flipped() })
        })
        .collect()
}

/// Probability that a strict majority of `n` independent agents, each
/// correct with probability `q`, is correct.
pub fn majority_accuracy_closed_form(n: usize, q: f64) -> Result<f64> {
    if n.is_multiple_of(2) {
        return Err(Error::InvalidConfig(format!("ensemble size must be odd, got {n}")));
    }
    if !(0.0..=1.0).contains(&q) {
        return Err(Error::InvalidConfig(format!("q must be in [0, 1], got {q}")));
    }
    if q == 0.0 || q == 1.0 {
        return Ok(q);
    }
    let (lq, lr) = (q.ln(), (1.0 - q).ln());
    let mut ln_choose = 0.0; // ln C(n, 0)
    let mut total = 0.0;
    for j in 0..=n {
        if j > 0 {
            ln_choose += ((n - j + 1) as f64).ln() - (j as f64).ln();
        }
        if 2 * j > n {
            total += (ln_choose + j as f64 * lq + (n - j) as f64 * lr).exp();
        }
    }
    Ok(total.min(1.0))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepCell {
    pub n: usize,
    pub temperature: f64,
    pub beta: f64,
    pub trials: usize,
    pub correct: usize,
    pub accuracy: f64,
    pub std_error: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepGrid {
    pub population: PopulationSpec,
    pub noise: NoiseSpec,
    pub n_values: Vec<usize>,
    pub temperatures: Vec<f64>,
    pub trials: usize,
    pub seed: u64,
    /// Row-major: N outer, temperature inner.
    pub cells: Vec<SweepCell>,
}

impl SweepGrid {
    pub fn cell(&self, n: usize, temperature: f64) -> Option<&SweepCell> {
        self.cells.iter().find(|c| c.n == n && c.temperature == temperature)
    }
}

pub const MIN_TRIALS: usize = 100;

/// One Monte Carlo cell. Streams are keyed by (N, temperature, trial), so a
/// cell's result does not depend on the rest of the grid.
pub fn run_cell(
    population: &PopulationSpec,
    n: usize,
    noise: &NoiseSpec,
    trials: usize,
    seed: u64,
) -> Result<SweepCell> {
    population.validate()?;
    if n == 0 {
        return Err(Error::EmptyEnsemble);
    }
    if noise.mode != NoiseMode::None {
        noise.validate()?;
    }
    let key = [n as u64, noise.temperature.to_bits()];
    let correct = (0..trials as u64)
        .into_par_iter()
        .map(|t| -> Result<usize> {
            let truth = if t % 2 == 0 { Vote::Pos } else { Vote::Neg };
            let profiles = sample_population(population, n, rng::derive_seed(seed, &[key[0], key[1], t, 0]))?;
            let votes = simulate_votes(&profiles, truth, rng::derive_seed(seed, &[key[0], key[1], t, 1]))?;
            let decision = if noise.mode == NoiseMode::None {
                decide(weighted_margin(&votes, &profiles)?).0
            } else {
                let trial_noise = NoiseSpec {
                    seed: rng::derive_seed(seed, &[key[0], key[1], t, 2]),
                    ..*noise
                };
                decide_noisy(&votes, &profiles, &trial_noise, 0)?.vote
            };
            Ok(usize::from(decision == truth))
        })
        .try_reduce(|| 0, |a, b| Ok(a + b))?;
    let accuracy = correct as f64 / trials as f64;
    Ok(SweepCell {
        n,
        temperature: noise.temperature,
        beta: noise.beta(),
        trials,
        correct,
        accuracy,
        std_error: (accuracy * (1.0 - accuracy) / trials as f64).sqrt(),
    })
}

/// Accuracy over every (N, temperature) pair with balanced true labels.
pub fn run_sweep(
    population: &PopulationSpec,
    n_values: &[usize],
    noise: &NoiseSpec,
    temperatures: &[f64],
    trials: usize,
    seed: u64,
) -> Result<SweepGrid> {
    if trials < MIN_TRIALS {
        return Err(Error::InvalidConfig(format!(
            "sweeps need at least {MIN_TRIALS} trials, got {trials}"
        )));
    }
    if n_values.is_empty() {
        return Err(Error::InvalidConfig("no ensemble sizes given".into()));
    }
    let temperatures = if temperatures.is_empty() {
        vec![noise.temperature]
    } else {
        temperatures.to_vec()
    };
    let mut cells = Vec::with_capacity(n_values.len() * temperatures.len());
    for &n in n_values {
        for &temperature in &temperatures {
            let cell_noise = NoiseSpec { temperature, ..*noise };
            cells.push(run_cell(population, n, &cell_noise, trials, seed)?);
        }
    }
    Ok(SweepGrid {
        population: *population,
        noise: *noise,
        n_values: n_values.to_vec(),
        temperatures,
        trials,
        seed,
        cells,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepAxis {
    N,
    Temperature,
    Beta,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Transition {
    /// Axis location of the steepest change; `None` on a flat curve.
    pub critical: Option<f64>,
    /// Centered finite-difference slope there.
    pub slope: f64,
}

/// Steepest point of a sampled curve.
///
/// Uses centered differences at interior points. When several points share
/// the maximal slope magnitude, the midpoint of the first and last of them
/// is reported.
pub fn detect_transition_series(xs: &[f64], ys: &[f64]) -> Result<Transition> {
    if xs.len() != ys.len() {
        return Err(Error::LengthMismatch {
            left: xs.len(),
            right: ys.len(),
        });
    }
    if xs.len() < 4 {
        return Err(Error::InvalidConfig(format!(
            "need at least 4 points, got {}",
            xs.len()
        )));
    }
    if xs.iter().chain(ys).any(|v| !v.is_finite()) {
        return Err(Error::InvalidConfig("axis and values must be finite".into()));
    }
    let mut pts: Vec<(f64, f64)> = xs.iter().copied().zip(ys.iter().copied()).collect();
    pts.sort_by(|a, b| a.0.total_cmp(&b.0));
    if pts.windows(2).any(|w| w[0].0 == w[1].0) {
        return Err(Error::InvalidConfig("axis values must be distinct".into()));
    }
    let slopes: Vec<(f64, f64)> = pts
        .windows(3)
        .map(|w| (w[1].0, (w[2].1 - w[0].1) / (w[2].0 - w[0].0)))
        .collect();
    let max = slopes.iter().map(|s| s.1.abs()).fold(0.0, f64::max);
    if max == 0.0 {
        return Ok(Transition {
            critical: None,
            slope: 0.0,
        });
    }
    let tol = 1e-9 * max;
    let tied: Vec<&(f64, f64)> = slopes.iter().filter(|s| (s.1.abs() - max).abs() <= tol).collect();
    let first = tied.first().expect("max is attained");
    let last = tied.last().expect("max is attained");
    Ok(Transition {
        critical: Some(0.5 * (first.0 + last.0)),
        slope: if tied.len() == 1 {
            first.1
        } else {
            0.5 * (first.1 + last.1)
        },
    })
}

/// Transition along `axis`, one per value of the other axis (in grid order).
pub fn detect_transition(grid: &SweepGrid, axis: SweepAxis) -> Result<Vec<(f64, Transition)>> {
    let coordinate = |c: &SweepCell| match axis {
        SweepAxis::N => c.n as f64,
        SweepAxis::Temperature => c.temperature,
        SweepAxis::Beta => c.beta,
    };
    let slices: Vec<(f64, Vec<&SweepCell>)> = match axis {
        SweepAxis::N => grid
            .temperatures
            .iter()
            .map(|&t| (t, grid.cells.iter().filter(|c| c.temperature == t).collect()))
            .collect(),
        SweepAxis::Temperature | SweepAxis::Beta => grid
            .n_values
            .iter()
            .map(|&n| (n as f64, grid.cells.iter().filter(|c| c.n == n).collect()))
            .collect(),
    };
    slices
        .into_iter()
        .map(|(fixed, cells)| {
            let xs: Vec<f64> = cells.iter().map(|c| coordinate(c)).collect();
            let ys: Vec<f64> = cells.iter().map(|c| c.accuracy).collect();
            Ok((fixed, detect_transition_series(&xs, &ys)?))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn point_mass_and_correlated_draws() {
        let pm = PopulationSpec::PointMass {
            precision: 0.7,
            recall: 0.7,
        };
        assert_eq!(
            sample_population(&pm, 3, 1).unwrap(),
            vec![AgentProfile::new(0.7, 0.7).unwrap(); 3]
        );
        let eq = PopulationSpec::CorrelatedEqual { lo: 0.5, hi: 0.9 };
        for p in sample_population(&eq, 500, 2).unwrap() {
            assert_eq!(p.precision, p.recall);
            assert!((0.5..=0.9).contains(&p.precision));
        }
        assert_eq!(
            sample_population(&eq, 10, 3).unwrap(),
            sample_population(&eq, 10, 3).unwrap()
        );
    }

    #[test]
    fn uniform_mean_matches_analytic() {
        let spec = PopulationSpec::CorrelatedEqual { lo: 0.5, hi: 0.9 };
        let draws = sample_population(&spec, 100_000, 5).unwrap();
        let mean = draws.iter().map(|p| p.precision).sum::<f64>() / draws.len() as f64;
        assert!((mean - 0.7).abs() < 0.005, "{mean}");
    }

    #[test]
    fn population_validation() {
        assert!(PopulationSpec::IndependentUniform { lo: 0.6, hi: 0.4 }
            .validate()
            .is_err());
        assert!(PopulationSpec::IndependentUniform { lo: 0.2, hi: 0.9 }
            .validate()
            .is_err());
        assert!(PopulationSpec::IndependentUniform { lo: 0.5, hi: 0.9 }
            .validate()
            .is_ok());
        assert!(PopulationSpec::PointMass {
            precision: 0.0,
            recall: 0.5
        }
        .validate()
        .is_err());
        assert!(PopulationSpec::PointMass {
            precision: 0.3,
            recall: 0.9
        }
        .validate()
        .is_err());
        assert!(PopulationSpec::CorrelatedEqual { lo: 0.0, hi: 0.5 }.validate().is_err());
        assert!(sample_population(&PopulationSpec::CorrelatedEqual { lo: 0.5, hi: 0.6 }, 0, 0).is_err());
    }

    #[test]
    fn vote_simulation() {
        let perfect = vec![AgentProfile::new(1.0, 1.0).unwrap(); 50];
        for truth in [Vote::Pos, Vote::Neg] {
            assert!(simulate_votes(&perfect, truth, 3).unwrap().iter().all(|&v| v == truth));
        }
        let p = AgentProfile::new(0.8, 0.8).unwrap();
        assert!((false_positive_rate(&p).unwrap() - 0.2).abs() < 1e-15);
        let agents = vec![p; 100_000];
        for truth in [Vote::Pos, Vote::Neg] {
            let votes = simulate_votes(&agents, truth, 9).unwrap();
            let rate = votes.iter().filter(|&&v| v == truth).count() as f64 / votes.len() as f64;
            assert!((rate - 0.8).abs() < 0.005, "{truth}: {rate}");
        }
        assert_eq!(
            simulate_votes(&agents[..20], Vote::Neg, 4).unwrap(),
            simulate_votes(&agents[..20], Vote::Neg, 4).unwrap()
        );
        assert!(simulate_votes(
            &[AgentProfile {
                precision: 0.0,
                recall: 0.5
            }],
            Vote::Neg,
            0
        )
        .is_err());
    }

    #[test]
    fn closed_form_values() {
        assert!((majority_accuracy_closed_form(1, 0.7).unwrap() - 0.7).abs() < 1e-15);
        // 0.7^3 + 3 * 0.7^2 * 0.3
        assert!((majority_accuracy_closed_form(3, 0.7).unwrap() - 0.784).abs() < 1e-12);
        for n in [1, 5, 11, 101, 1001] {
            assert!((majority_accuracy_closed_form(n, 0.5).unwrap() - 0.5).abs() < 1e-12);
        }
        assert!(majority_accuracy_closed_form(4, 0.7).is_err());
        assert!(majority_accuracy_closed_form(3, 1.2).is_err());
    }

    #[test]
    fn closed_form_matches_direct_enumeration() {
        for n in [1usize, 3, 5, 7, 9, 13] {
            for q in [0.1f64, 0.35, 0.6, 0.9] {
                let mut brute = 0.0;
                for bits in 0u32..(1 << n) {
                    let k = bits.count_ones() as i32;
                    if 2 * k as usize > n {
                        brute += q.powi(k) * (1.0 - q).powi(n as i32 - k);
                    }
                }
                assert!((majority_accuracy_closed_form(n, q).unwrap() - brute).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn perfect_agents_are_always_right() {
        let pop = PopulationSpec::PointMass {
            precision: 1.0,
            recall: 1.0,
        };
        let noise = NoiseSpec::with_beta(NoiseMode::SiteDependent, 0.0, 1);
        let grid = run_sweep(&pop, &[1, 5], &noise, &[f64::INFINITY], 200, 4).unwrap();
        assert!(grid.cells.iter().all(|c| c.accuracy == 1.0 && c.std_error == 0.0));
    }

    #[test]
    fn cells_do_not_depend_on_grid_layout() {
        let pop = PopulationSpec::CorrelatedEqual { lo: 0.55, hi: 0.8 };
        let noise = NoiseSpec::new(NoiseMode::SiteDependent, 1.0, 0);
        let a = run_sweep(&pop, &[3, 7], &noise, &[0.5, 2.0], 300, 11).unwrap();
        let b = run_sweep(&pop, &[7], &noise, &[2.0], 300, 11).unwrap();
        assert_eq!(a.cell(7, 2.0), b.cell(7, 2.0));
        assert!(run_sweep(&pop, &[3], &noise, &[1.0], 50, 0).is_err());
    }

    #[test]
    fn transition_on_logistic_and_linear_and_flat() {
        let xs: Vec<f64> = (0..=16).map(|i| i as f64 * 0.25).collect();
        let logistic: Vec<f64> = xs.iter().map(|x| 1.0 / (1.0 + (-(x - 2.0) / 0.1).exp())).collect();
        let t = detect_transition_series(&xs, &logistic).unwrap();
        assert!((t.critical.unwrap() - 2.0).abs() <= 0.25);
        let linear: Vec<f64> = xs.iter().map(|x| 0.3 + 0.1 * x).collect();
        let t = detect_transition_series(&xs, &linear).unwrap();
        assert!((t.critical.unwrap() - 2.0).abs() < 1e-12);
        let flat = vec![0.7; xs.len()];
        assert_eq!(
            detect_transition_series(&xs, &flat).unwrap(),
            Transition {
                critical: None,
                slope: 0.0
            }
        );
        assert!(detect_transition_series(&xs[..3], &flat[..3]).is_err());
    }
}
