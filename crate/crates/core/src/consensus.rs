//! Vote fusion: weighted majority-minority margin, sign decision, noisy
//! decision, reliability, and the per-agent learning-impact diagnostic.
//!
//! Agent `j` votes `σ_j ∈ {-1, +1}` with strength `s_j + p_j`. The margin
//!
//! ```text
//! m = Σ_j (s_j + p_j) σ_j / (N (s̄ + p̄))
//! ```
//!
//! lies in [-1, 1] and its sign is the consensus. With noise enabled the
//! decision is `sign(m + β Σ_j h_j)`, `β = 1 / (k T)`.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::data::{AgentProfile, Vote};
use crate::error::{Error, Result};
use crate::rng;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseMode {
    #[default]
    None,
    /// One draw shared by every agent (a global bias).
    UniformGlobal,
    /// Independent draws per agent.
    SiteDependent,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseDistribution {
    #[default]
    GaussianUnit,
    UniformPm1,
}

/// How temperature scales the noise term.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseScaling {
    /// Noise multiplied by `β = 1/(kT)`: vanishes as `T → ∞`.
    #[default]
    InverseTemperature,
    /// Noise multiplied by `T`: the conventional thermal reading.
    Temperature,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NoiseSpec {
    pub mode: NoiseMode,
    pub distribution: NoiseDistribution,
    /// `+inf` is allowed and gives `β = 0`.
    #[serde(with = "extended_float")]
    pub temperature: f64,
    pub boltzmann_k: f64,
    #[serde(default)]
    pub scaling: NoiseScaling,
    pub seed: u64,
}

impl Default for NoiseSpec {
    fn default() -> Self {
        NoiseSpec {
            mode: NoiseMode::None,
            distribution: NoiseDistribution::GaussianUnit,
            temperature: 1.0,
            boltzmann_k: 1.0,
            scaling: NoiseScaling::InverseTemperature,
            seed: 0,
        }
    }
}

impl NoiseSpec {
    pub fn new(mode: NoiseMode, temperature: f64, seed: u64) -> Self {
        NoiseSpec {
            mode,
            temperature,
            seed,
            ..NoiseSpec::default()
        }
    }

    /// Site-dependent Gaussian noise at the temperature giving this `β`.
    pub fn with_beta(mode: NoiseMode, beta: f64, seed: u64) -> Self {
        let temperature = if beta == 0.0 { f64::INFINITY } else { 1.0 / beta };
        NoiseSpec::new(mode, temperature, seed)
    }

    pub fn validate(&self) -> Result<()> {
        if self.boltzmann_k != 1.0 {
            return Err(Error::InvalidConfig(format!(
                "boltzmann_k is fixed to 1, got {}",
                self.boltzmann_k
            )));
        }
        if self.temperature.is_nan() || self.temperature <= 0.0 {
            return Err(Error::InvalidConfig(format!(
                "temperature must be > 0, got {}",
                self.temperature
            )));
        }
        if self.scaling == NoiseScaling::Temperature && self.temperature.is_infinite() {
            return Err(Error::InvalidConfig(
                "infinite temperature with temperature-proportional noise".into(),
            ));
        }
        Ok(())
    }

    pub fn beta(&self) -> f64 {
        1.0 / (self.boltzmann_k * self.temperature)
    }

    /// Multiplier applied to the noise sum.
    pub fn noise_factor(&self) -> f64 {
        match self.scaling {
            NoiseScaling::InverseTemperature => self.beta(),
            NoiseScaling::Temperature => self.temperature,
        }
    }

    fn draw<R: Rng>(&self, rng: &mut R) -> f64 {
        match self.distribution {
            NoiseDistribution::GaussianUnit => StandardNormal.sample(rng),
            NoiseDistribution::UniformPm1 => rng.random_range(-1.0..=1.0),
        }
    }

    /// `Σ_j h_j` for one query. Site noise draws agent `j` from the stream
    /// `(seed, query, j)`; global noise draws once from `(seed, query)` and
    /// repeats it for every agent.
    pub fn noise_sum(&self, agents: usize, query: u64) -> f64 {
        match self.mode {
            NoiseMode::None => 0.0,
            NoiseMode::UniformGlobal => {
                let h = self.draw(&mut rng::stream(self.seed, &[0x9106, query]));
                agents as f64 * h
            }
            NoiseMode::SiteDependent => (0..agents as u64)
                .map(|j| self.draw(&mut rng::stream(self.seed, &[0x5173, query, j])))
                .sum(),
        }
    }
}

/// Serde for floats that may be infinite; JSON has no infinity literal.
mod extended_float {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(x: &f64, s: S) -> Result<S::Ok, S::Error> {
        if x.is_finite() {
            s.serialize_f64(*x)
        } else if *x > 0.0 {
            s.serialize_str("inf")
        } else if *x < 0.0 {
            s.serialize_str("-inf")
        } else {
            s.serialize_str("nan")
        }
    }

    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Repr {
        Num(f64),
        Text(String),
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        match Repr::deserialize(d)? {
            Repr::Num(x) => Ok(x),
            Repr::Text(t) => t.parse::<f64>().map_err(serde::de::Error::custom),
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StrengthScaling {
    /// `t(x) = x`
    #[default]
    Identity,
}

impl StrengthScaling {
    pub fn apply(self, x: f64) -> f64 {
        match self {
            StrengthScaling::Identity => x,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConsensusConfig {
    pub coupling_precision: f64,
    pub coupling_recall: f64,
    pub strength_scaling: StrengthScaling,
    pub noise: NoiseSpec,
}

impl Default for ConsensusConfig {
    fn default() -> Self {
        ConsensusConfig {
            coupling_precision: 1.0,
            coupling_recall: 1.0,
            strength_scaling: StrengthScaling::Identity,
            noise: NoiseSpec::default(),
        }
    }
}

/// One fused prediction.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConsensusResult {
    pub votes: Vec<Vote>,
    pub weights: Vec<f64>,
    pub margin: f64,
    pub decision: Vote,
    pub tie: bool,
    pub reliability: f64,
    /// `m + noise` when noise is enabled.
    pub noisy_sum: Option<f64>,
}

fn check_lengths(votes: &[Vote], profiles: &[AgentProfile]) -> Result<()> {
    if votes.len() != profiles.len() {
        return Err(Error::LengthMismatch {
            left: votes.len(),
            right: profiles.len(),
        });
    }
    if votes.is_empty() {
        return Err(Error::EmptyEnsemble);
    }
    Ok(())
}

/// Sum in ascending order so the result does not depend on agent order.
fn ordered_sum(mut terms: Vec<f64>) -> f64 {
    terms.sort_by(f64::total_cmp);
    terms.into_iter().sum()
}

/// Weighted majority-minority difference `m ∈ [-1, 1]`.
///
/// `N (s̄ + p̄)` equals `Σ_j (s_j + p_j)`, which is what the denominator is
/// computed as; unanimous votes therefore give exactly ±1.
pub fn weighted_margin(votes: &[Vote], profiles: &[AgentProfile]) -> Result<f64> {
    check_lengths(votes, profiles)?;
    let strengths: Vec<f64> = profiles.iter().map(AgentProfile::strength).collect();
    if strengths.iter().any(|w| !w.is_finite() || *w < 0.0) {
        return Err(Error::InvalidConfig(
            "profile strengths must be finite and non-negative".into(),
        ));
    }
    // Summing each side separately makes balanced equal-weight votes cancel exactly.
    let side = |want: Vote| {
        ordered_sum(
            strengths
                .iter()
                .zip(votes)
                .filter(|(_, &v)| v == want)
                .map(|(&w, _)| w)
                .collect(),
        )
    };
    let numerator = side(Vote::Pos) - side(Vote::Neg);
    let denominator = ordered_sum(strengths);
    if denominator <= 0.0 {
        return Err(Error::DegenerateProfiles);
    }
    Ok((numerator / denominator).clamp(-1.0, 1.0))
}

/// Sign rule. Returns the vote and whether the margin was an exact tie
/// (`m == 0` decides +1).
pub fn decide(m: f64) -> (Vote, bool) {
    (Vote::from_sign(m), m == 0.0 || m.is_nan())
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NoisyDecision {
    pub vote: Vote,
    pub tie: bool,
    pub margin: f64,
    /// Realized `m + factor · Σ_j h_j`.
    pub noisy_sum: f64,
}

/// Noisy decision `sign(m + β Σ_j h_j)` for query number `query`.
pub fn decide_noisy(votes: &[Vote], profiles: &[AgentProfile], noise: &NoiseSpec, query: u64) -> Result<NoisyDecision> {
    let margin = weighted_margin(votes, profiles)?;
    noise.validate()?;
    let factor = noise.noise_factor();
    let noisy_sum = if factor == 0.0 || noise.mode == NoiseMode::None {
        margin
    } else {
        margin + factor * noise.noise_sum(votes.len(), query)
    };
    let (vote, tie) = decide(noisy_sum);
    Ok(NoisyDecision {
        vote,
        tie,
        margin,
        noisy_sum,
    })
}

/// Learning impact on agent `i`:
/// `I_p Σ_j t(p_j)/N (1 - σ_i σ_j) - I_s Σ_j t(s_j)/N (1 + σ_i σ_j)`,
/// summed over all `j` including `i`. Diagnostic only.
pub fn learning_impact(i: usize, votes: &[Vote], profiles: &[AgentProfile], config: &ConsensusConfig) -> Result<f64> {
    check_lengths(votes, profiles)?;
    if i >= votes.len() {
        return Err(Error::AgentIndex {
            index: i,
            len: votes.len(),
        });
    }
    let n = votes.len() as f64;
    let t = config.strength_scaling;
    let si = votes[i].as_f64();
    let (mut opposing, mut agreeing) = (0.0, 0.0);
    for (v, prof) in votes.iter().zip(profiles) {
        let product = si * v.as_f64();
        opposing += t.apply(prof.precision) / n * (1.0 - product);
        agreeing += t.apply(prof.recall) / n * (1.0 + product);
    }
    Ok(config.coupling_precision * opposing - config.coupling_recall * agreeing)
}

/// Score for class +1: `(1 + m) / 2`.
pub fn reliability(m: f64) -> Result<f64> {
    if !(-1.0..=1.0).contains(&m) {
        return Err(Error::MarginOutOfRange(m));
    }
    Ok((1.0 + m) / 2.0)
}

/// Margin, decision (noisy when configured), and reliability for one query.
pub fn fuse(
    votes: Vec<Vote>,
    profiles: &[AgentProfile],
    config: &ConsensusConfig,
    query: u64,
) -> Result<ConsensusResult> {
    let weights: Vec<f64> = profiles.iter().map(AgentProfile::strength).collect();
    let (margin, decision, tie, noisy_sum) = if config.noise.mode == NoiseMode::None {
        let m = weighted_margin(&votes, profiles)?;
        let (d, tie) = decide(m);
        (m, d, tie, None)
    } else {
        let nd = decide_noisy(&votes, profiles, &config.noise, query)?;
        (nd.margin, nd.vote, nd.tie, Some(nd.noisy_sum))
    };
    Ok(ConsensusResult {
        votes,
        weights,
        margin,
        decision,
        tie,
        reliability: reliability(margin)?,
        noisy_sum,
    })
}
