//! End-to-end consensus model: representations × learner roster → agents,
//! out-of-fold calibration, fused prediction, evaluation and persistence.

use std::fs;
use std::io::Write;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::calibration::{estimate_profile, ConfusionCounts};
use crate::consensus::{fuse, ConsensusConfig, ConsensusResult};
use crate::data::{validate_dataset, AgentProfile, Dataset, Sample};
use crate::error::{Error, Result};
use crate::learners::{train, LearnerSpec, TrainedLearner};
use crate::representations::{
    apply_to_dataset, fit_representation, representation_specs, FittedRepresentation, RepresentationKind,
};
use crate::rng;

pub const FORMAT_NAME: &str = "brainstorm-model-bundle";
pub const FORMAT_VERSION: u64 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PipelineConfig {
    /// Number of representations, identity included.
    pub representations: usize,
    /// Pool the non-identity representations are drawn from.
    pub representation_kinds: Vec<RepresentationKind>,
    pub roster: Vec<LearnerSpec>,
    pub folds: usize,
    pub smoothing: f64,
    /// Replace each recall with the agent's precision.
    pub force_equal_ps: bool,
    /// Average profiles over representations for each roster entry.
    pub average_profiles_by_kind: bool,
    pub consensus: ConsensusConfig,
    pub seed: u64,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            representations: 3,
            representation_kinds: RepresentationKind::default_pool(),
            roster: LearnerSpec::default_roster(),
            folds: 5,
            smoothing: 1.0,
            force_equal_ps: false,
            average_profiles_by_kind: false,
            consensus: ConsensusConfig::default(),
            seed: 0,
        }
    }
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<()> {
        if self.roster.is_empty() {
            return Err(Error::InvalidConfig("learner roster is empty".into()));
        }
        if self.folds < 2 {
            return Err(Error::InvalidConfig(format!(
                "need at least 2 folds, got {}",
                self.folds
            )));
        }
        if !(self.smoothing >= 0.0 && self.smoothing.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "smoothing must be >= 0, got {}",
                self.smoothing
            )));
        }
        for spec in &self.roster {
            spec.validate()?;
        }
        if self.consensus.noise.mode != crate::consensus::NoiseMode::None {
            self.consensus.noise.validate()?;
        }
        Ok(())
    }

    pub fn digest(&self) -> String {
        sha256_hex(&serde_json::to_vec(self).expect("config serializes"))
    }
}

fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Agent {
    /// Index into [`ModelBundle::representations`].
    pub representation: usize,
    /// Index into the configured roster.
    pub roster_index: usize,
    pub learner: TrainedLearner,
    pub profile: AgentProfile,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelBundle {
    pub format_version: u64,
    pub seed: u64,
    pub config_digest: String,
    pub config: PipelineConfig,
    pub feature_names: Vec<String>,
    pub representations: Vec<FittedRepresentation>,
    pub agents: Vec<Agent>,
}

impl ModelBundle {
    pub fn dim(&self) -> usize {
        self.feature_names.len()
    }

    pub fn consensus(&self) -> &ConsensusConfig {
        &self.config.consensus
    }

    pub fn profiles(&self) -> Vec<AgentProfile> {
        self.agents.iter().map(|a| a.profile).collect()
    }

    pub fn agent_name(&self, i: usize) -> String {
        let agent = &self.agents[i];
        format!(
            "r{}:{}/{}",
            agent.representation,
            self.representations[agent.representation].spec.kind.name(),
            agent.learner.spec.kind.name()
        )
    }

    /// SHA-256 of the compact serialized bundle.
    pub fn digest(&self) -> String {
        sha256_hex(&serde_json::to_vec(self).expect("bundle serializes"))
    }

    /// Votes of every agent on one raw sample.
    pub fn agent_votes(&self, sample: &Sample) -> Result<Vec<crate::data::Vote>> {
        if sample.dim() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                found: sample.dim(),
            });
        }
        let views = self
            .representations
            .iter()
            .map(|r| r.transform(&sample.features))
            .collect::<Result<Vec<_>>>()?;
        self.agents
            .iter()
            .map(|a| a.learner.predict_features(&views[a.representation]))
            .collect()
    }
}

/// Train and calibrate every (representation, learner) agent.
///
/// Profiles come from out-of-fold predictions on the transformed data; the
/// agent's final model is trained on the full transformed data.
pub fn train_pipeline(dataset: &Dataset, config: &PipelineConfig) -> Result<ModelBundle> {
    config.validate()?;
    validate_dataset(dataset)?;
    dataset.require_both_classes()?;

    let specs = representation_specs(
        config.representations,
        rng::derive_seed(config.seed, &[0x7e9]),
        &config.representation_kinds,
    )?;
    let representations = specs
        .into_par_iter()
        .map(|spec| fit_representation(dataset, spec))
        .collect::<Result<Vec<_>>>()?;
    let views = representations
        .par_iter()
        .map(|r| apply_to_dataset(r, dataset))
        .collect::<Result<Vec<_>>>()?;

    let fold_seed = rng::derive_seed(config.seed, &[0xca1]);
    let pairs: Vec<(usize, usize)> = (0..representations.len())
        .flat_map(|r| (0..config.roster.len()).map(move |l| (r, l)))
        .collect();

    let mut agents = pairs
        .into_par_iter()
        .map(|(r, l)| {
            let base = config.roster[l];
            let spec = LearnerSpec {
                seed: rng::derive_seed(config.seed, &[0xa9e, r as u64, l as u64, base.seed]),
                ..base
            };
            let identity = || format!("r{r}:{}/{}", representations[r].spec.kind.name(), spec.kind.name());
            let wrap = |e: Error| Error::AgentTraining {
                agent: identity(),
                source: Box::new(e),
            };
            let profile = estimate_profile(
                &spec,
                &representations[r],
                dataset,
                config.folds,
                fold_seed,
                config.smoothing,
            )
            .map_err(wrap)?;
            let learner = train(&spec, &views[r]).map_err(wrap)?;
            Ok(Agent {
                representation: r,
                roster_index: l,
                learner,
                profile,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    if config.average_profiles_by_kind {
        for l in 0..config.roster.len() {
            let group: Vec<usize> = (0..agents.len()).filter(|&i| agents[i].roster_index == l).collect();
            let k = group.len() as f64;
            let p = group.iter().map(|&i| agents[i].profile.precision).sum::<f64>() / k;
            let s = group.iter().map(|&i| agents[i].profile.recall).sum::<f64>() / k;
            for &i in &group {
                agents[i].profile = AgentProfile {
                    precision: p,
                    recall: s,
                };
            }
        }
    }
    if config.force_equal_ps {
        for agent in &mut agents {
            agent.profile.recall = agent.profile.precision;
        }
    }

    Ok(ModelBundle {
        format_version: FORMAT_VERSION,
        seed: config.seed,
        config_digest: config.digest(),
        config: config.clone(),
        feature_names: dataset.feature_names.clone(),
        representations,
        agents,
    })
}

/// Fused prediction for each sample. The sample's position is its noise
/// stream index, so results match between serial and parallel evaluation.
pub fn predict_bundle(bundle: &ModelBundle, samples: &[Sample]) -> Result<Vec<ConsensusResult>> {
    if bundle.agents.is_empty() {
        return Err(Error::EmptyEnsemble);
    }
    let profiles = bundle.profiles();
    samples
        .par_iter()
        .enumerate()
        .map(|(q, sample)| fuse(bundle.agent_votes(sample)?, &profiles, bundle.consensus(), q as u64))
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ScoreRow {
    pub name: String,
    pub counts: ConfusionCounts,
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
}

impl ScoreRow {
    fn new(name: String, counts: ConfusionCounts) -> Self {
        ScoreRow {
            name,
            accuracy: counts.accuracy(),
            precision: counts.precision(),
            recall: counts.recall(),
            counts,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MarginSummary {
    pub mean: f64,
    pub min: f64,
    pub q25: f64,
    pub median: f64,
    pub q75: f64,
    pub max: f64,
    /// Ten equal-width bins over [-1, 1].
    pub histogram: [usize; 10],
}

impl MarginSummary {
    pub fn from_margins(margins: &[f64]) -> Self {
        let mut sorted = margins.to_vec();
        sorted.sort_by(f64::total_cmp);
        let n = sorted.len();
        let quantile = |q: f64| sorted[((q * (n - 1) as f64).round() as usize).min(n - 1)];
        let mut histogram = [0usize; 10];
        for m in &sorted {
            let bin = (((m + 1.0) / 0.2).floor() as usize).min(9);
            histogram[bin] += 1;
        }
        MarginSummary {
            mean: sorted.iter().sum::<f64>() / n as f64,
            min: sorted[0],
            q25: quantile(0.25),
            median: quantile(0.5),
            q75: quantile(0.75),
            max: sorted[n - 1],
            histogram,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EvaluationReport {
    pub consensus: ScoreRow,
    pub agents: Vec<ScoreRow>,
    pub margins: MarginSummary,
    pub best_agent_accuracy: f64,
    pub median_agent_accuracy: f64,
    pub consensus_at_least_best: bool,
}

impl EvaluationReport {
    /// Consensus row first, then one row per agent.
    pub fn rows(&self) -> impl Iterator<Item = &ScoreRow> {
        std::iter::once(&self.consensus).chain(&self.agents)
    }
}

pub fn evaluate_bundle(bundle: &ModelBundle, test: &Dataset) -> Result<EvaluationReport> {
    let truth = test.labels()?;
    if truth.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let results = predict_bundle(bundle, &test.samples)?;
    let mut consensus = ConfusionCounts::default();
    let mut per_agent = vec![ConfusionCounts::default(); bundle.agents.len()];
    for (result, &t) in results.iter().zip(&truth) {
        consensus.record(result.decision, t);
        for (counts, &vote) in per_agent.iter_mut().zip(&result.votes) {
            counts.record(vote, t);
        }
    }
    let agents: Vec<ScoreRow> = per_agent
        .into_iter()
        .enumerate()
        .map(|(i, c)| ScoreRow::new(bundle.agent_name(i), c))
        .collect();
    let mut accs: Vec<f64> = agents.iter().map(|a| a.accuracy).collect();
    accs.sort_by(f64::total_cmp);
    let best = *accs.last().expect("bundle has agents");
    let n = accs.len();
    let median = if n % 2 == 1 {
        accs[n / 2]
    } else {
        0.5 * (accs[n / 2 - 1] + accs[n / 2])
    };
    let consensus = ScoreRow::new("consensus".into(), consensus);
    let margins: Vec<f64> = results.iter().map(|r| r.margin).collect();
    Ok(EvaluationReport {
        consensus_at_least_best: consensus.accuracy >= best,
        consensus,
        agents,
        margins: MarginSummary::from_margins(&margins),
        best_agent_accuracy: best,
        median_agent_accuracy: median,
    })
}

/// Write to a temporary file beside `path`, then rename over it.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| Error::io(dir, e))?;
    tmp.write_all(bytes).map_err(|e| Error::io(path, e))?;
    tmp.as_file().sync_all().map_err(|e| Error::io(path, e))?;
    tmp.persist(path).map_err(|e| Error::io(path, e.error))?;
    Ok(())
}

#[derive(Serialize)]
struct EnvelopeOut<'a> {
    format: &'a str,
    version: u64,
    digest: String,
    bundle: &'a ModelBundle,
}

pub fn bundle_to_string(bundle: &ModelBundle) -> String {
    let envelope = EnvelopeOut {
        format: FORMAT_NAME,
        version: FORMAT_VERSION,
        digest: bundle.digest(),
        bundle,
    };
    let mut text = serde_json::to_string_pretty(&envelope).expect("bundle serializes");
    text.push('\n');
    text
}

pub fn bundle_from_str(text: &str) -> Result<ModelBundle> {
    let corrupt = |msg: String| Error::CorruptBundle(msg);
    let mut doc: serde_json::Value =
        serde_json::from_str(text).map_err(|e| corrupt(format!("unreadable document: {e}")))?;
    if doc.get("format").and_then(|f| f.as_str()) != Some(FORMAT_NAME) {
        return Err(corrupt("missing or unknown format tag".into()));
    }
    let version = doc
        .get("version")
        .and_then(|v| v.as_u64())
        .ok_or_else(|| corrupt("missing format version".into()))?;
    if version != FORMAT_VERSION {
        return Err(Error::UnsupportedVersion {
            found: version,
            supported: FORMAT_VERSION,
        });
    }
    let digest = doc
        .get("digest")
        .and_then(|d| d.as_str())
        .ok_or_else(|| corrupt("missing digest".into()))?
        .to_string();
    let body = doc
        .get_mut("bundle")
        .map(serde_json::Value::take)
        .ok_or_else(|| corrupt("missing bundle body".into()))?;
    let bundle: ModelBundle = serde_json::from_value(body).map_err(|e| corrupt(format!("invalid bundle body: {e}")))?;
    if bundle.digest() != digest {
        return Err(corrupt("digest mismatch".into()));
    }
    check_alignment(&bundle)?;
    Ok(bundle)
}

fn check_alignment(bundle: &ModelBundle) -> Result<()> {
    let bad = |msg: &str| Err(Error::CorruptBundle(msg.into()));
    if bundle.agents.is_empty() {
        return bad("bundle has no agents");
    }
    for agent in &bundle.agents {
        let Some(rep) = bundle.representations.get(agent.representation) else {
            return bad("agent references a missing representation");
        };
        if rep.input_dim != bundle.dim() || rep.output_dim() != agent.learner.dim {
            return bad("agent dimensions do not line up with its representation");
        }
    }
    Ok(())
}

pub fn save_bundle(bundle: &ModelBundle, path: &Path) -> Result<()> {
    write_atomic(path, bundle_to_string(bundle).as_bytes())
}

pub fn load_bundle(path: &Path) -> Result<ModelBundle> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    bundle_from_str(&text)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::consensus::{NoiseMode, NoiseSpec};
    use crate::data::Vote;
    use crate::learners::LearnerKind;
    use crate::representations::RepresentationSpec;
    use rand::Rng;

    fn blobs(n: usize, seed: u64) -> Dataset {
        let mut rng = rng::stream(seed, &[]);
        let rows: Vec<Vec<f64>> = (0..n)
            .map(|i| {
                let c = if i % 2 == 0 { 1.0 } else { -1.0 };
                vec![
                    c + rng.random_range(-0.8..0.8),
                    -c + rng.random_range(-0.8..0.8),
                    rng.random_range(-1.0..1.0),
                ]
            })
            .collect();
        let labels = (0..n).map(|i| if i % 2 == 0 { Vote::Pos } else { Vote::Neg }).collect();
        Dataset::from_rows(rows, labels).unwrap()
    }

    fn small_config() -> PipelineConfig {
        PipelineConfig {
            representations: 2,
            roster: vec![
                LearnerSpec::new(LearnerKind::TrendVector, 0),
                LearnerSpec::new(LearnerKind::Knn { k: 3 }, 0),
            ],
            folds: 3,
            seed: 5,
            ..PipelineConfig::default()
        }
    }

    #[test]
    fn degenerate_single_agent_bundle() {
        let d = blobs(40, 1);
        let config = PipelineConfig {
            representations: 1,
            roster: vec![LearnerSpec::new(LearnerKind::Knn { k: 1 }, 0)],
            ..small_config()
        };
        let bundle = train_pipeline(&d, &config).unwrap();
        assert_eq!(bundle.agents.len(), 1);
        assert_eq!(bundle.representations[0].spec, RepresentationSpec::identity());
        let p = bundle.agents[0].profile;
        assert!(p.precision > 0.8 && p.recall > 0.8, "{p:?}");
        let results = predict_bundle(&bundle, &d.samples).unwrap();
        for r in &results {
            assert_eq!(r.decision, r.votes[0]);
            assert!(r.reliability == 0.0 || r.reliability == 1.0);
        }
    }

    #[test]
    fn full_roster_grid_is_aligned() {
        let d = blobs(60, 2);
        let config = PipelineConfig {
            representations: 3,
            folds: 3,
            ..PipelineConfig::default()
        };
        let bundle = train_pipeline(&d, &config).unwrap();
        assert_eq!(bundle.agents.len(), 18);
        for (i, agent) in bundle.agents.iter().enumerate() {
            assert_eq!(agent.representation, i / 6);
            assert_eq!(agent.roster_index, i % 6);
        }
        let report = evaluate_bundle(&bundle, &blobs(50, 3)).unwrap();
        assert_eq!(report.rows().count(), 19);
        assert_eq!(report.margins.histogram.iter().sum::<usize>(), 50);
    }

    #[test]
    fn training_is_deterministic() {
        let d = blobs(40, 4);
        let a = train_pipeline(&d, &small_config()).unwrap();
        let b = train_pipeline(&d, &small_config()).unwrap();
        assert_eq!(bundle_to_string(&a), bundle_to_string(&b));
        let other = PipelineConfig {
            seed: 6,
            ..small_config()
        };
        assert_ne!(a.digest(), train_pipeline(&d, &other).unwrap().digest());
    }

    #[test]
    fn profile_options() {
        let d = blobs(40, 5);
        let forced = train_pipeline(
            &d,
            &PipelineConfig {
                force_equal_ps: true,
                ..small_config()
            },
        )
        .unwrap();
        assert!(forced.agents.iter().all(|a| a.profile.precision == a.profile.recall));
        let averaged = train_pipeline(
            &d,
            &PipelineConfig {
                average_profiles_by_kind: true,
                ..small_config()
            },
        )
        .unwrap();
        for l in 0..2 {
            let group: Vec<_> = averaged
                .agents
                .iter()
                .filter(|a| a.roster_index == l)
                .map(|a| a.profile)
                .collect();
            assert!(group.windows(2).all(|w| w[0] == w[1]));
        }
    }

    #[test]
    fn training_errors() {
        let d = blobs(40, 6);
        assert!(train_pipeline(
            &d,
            &PipelineConfig {
                roster: vec![],
                ..small_config()
            }
        )
        .is_err());
        assert!(train_pipeline(
            &d,
            &PipelineConfig {
                folds: 1,
                ..small_config()
            }
        )
        .is_err());
        let tiny = blobs(2, 7);
        match train_pipeline(&tiny, &small_config()) {
            Err(Error::AgentTraining { agent, .. }) => assert!(agent.starts_with("r0:identity/")),
            other => panic!("expected an agent failure, got {other:?}"),
        }
        let mut one_class = blobs(10, 8);
        for s in &mut one_class.samples {
            s.label = Some(Vote::Pos);
        }
        assert!(matches!(
            train_pipeline(&one_class, &small_config()),
            Err(Error::SingleClass(_))
        ));
    }

    #[test]
    fn prediction_is_read_only_and_checks_dimensions() {
        let bundle = train_pipeline(&blobs(30, 9), &small_config()).unwrap();
        let before = bundle.digest();
        predict_bundle(&bundle, &blobs(20, 10).samples).unwrap();
        assert_eq!(bundle.digest(), before);
        assert!(matches!(
            predict_bundle(&bundle, &[Sample::query(vec![1.0, 2.0])]),
            Err(Error::DimensionMismatch { expected: 3, found: 2 })
        ));
    }

    #[test]
    fn noisy_bundle_predictions_are_reproducible() {
        let mut config = small_config();
        config.consensus.noise = NoiseSpec::new(NoiseMode::SiteDependent, 0.5, 77);
        let bundle = train_pipeline(&blobs(30, 11), &config).unwrap();
        let queries = blobs(25, 12).samples;
        let a = predict_bundle(&bundle, &queries).unwrap();
        let b = predict_bundle(&bundle, &queries).unwrap();
        assert_eq!(a, b);
        assert!(a.iter().all(|r| r.noisy_sum.is_some()));
    }

    #[test]
    fn envelope_errors() {
        let bundle = train_pipeline(&blobs(30, 13), &small_config()).unwrap();
        let text = bundle_to_string(&bundle);
        assert_eq!(bundle_from_str(&text).unwrap(), bundle);
        assert!(matches!(
            bundle_from_str(&text[..text.len() / 2]),
            Err(Error::CorruptBundle(_))
        ));
        let future = text.replacen("\"version\": 1", "\"version\": 2", 1);
        assert!(matches!(
            bundle_from_str(&future),
            Err(Error::UnsupportedVersion { found: 2, supported: 1 })
        ));
        let tampered = text.replacen("\"seed\": 5", "\"seed\": 6", 1);
        assert_ne!(tampered, text);
        assert!(matches!(bundle_from_str(&tampered), Err(Error::CorruptBundle(_))));
    }
}
