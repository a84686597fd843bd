//! Consensus meta-learning.
//!
//! A heterogeneous ensemble of binary classifiers is trained over several
//! randomized representations of the same data. Each (learner,
//! representation) pair is one voting agent whose precision and recall are
//! estimated out-of-fold; votes are fused by a precision/recall weighted
//! majority rule, optionally perturbed by temperature-scaled noise. A Monte
//! Carlo simulator of idealized agent populations is included for studying
//! how consensus accuracy depends on ensemble size and noise.

pub mod calibration;
pub mod cli;
pub mod consensus;
pub mod data;
pub mod error;
pub mod learners;
pub mod pipeline;
pub mod representations;
pub mod rng;
pub mod simulator;

pub use calibration::{confusion, estimate_profile, profile_from_counts, ConfusionCounts};
pub use consensus::{
    decide, decide_noisy, learning_impact, reliability, weighted_margin, ConsensusConfig, ConsensusResult,
    NoiseDistribution, NoiseMode, NoiseScaling, NoiseSpec,
};
pub use data::{map_labels, render_labels, split_folds, validate_dataset, AgentProfile, Dataset, Sample, Vote};
pub use error::{Error, Result};
pub use learners::{predict, train, Classifier, LearnerKind, LearnerSpec, TrainedLearner};
pub use pipeline::{
    evaluate_bundle, load_bundle, predict_bundle, save_bundle, train_pipeline, ModelBundle, PipelineConfig,
};
pub use representations::{
    apply_representation, fit_representation, generate_representation_set, score_features, FittedRepresentation,
    RepresentationKind, RepresentationSpec,
};
