//! The self-training loop: propose, score, select, build training pairs,
//! update the proposer, report.

mod engine;
mod select;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::augment::AugmentConfig;
use crate::dsl::Program;
use crate::geometry::{MembershipOracle, PointCloud};
use crate::proposer::DecodingParams;

pub use engine::{
    build_pairs, build_pairs_batch, replay_updates, run, run_iteration, IterationOutput, IterationSink,
    NullSink,
};
pub use select::{pick_winner, select_best, SelectionOutcome};

/// Fraction of a batch kept by the in-batch policy.
pub const BATCH_KEEP_FRACTION: f64 = 0.2;
/// Smallest batch the in-batch policy accepts.
pub const MIN_BATCH: usize = 5;
/// Default sample size for scoring and pair shapes.
pub const DEFAULT_SAMPLE_POINTS: usize = 2048;
/// Resolution of IoU grids.
pub const IOU_RESOLUTION: usize = 64;

#[derive(Debug, Error, PartialEq)]
pub enum SelftrainError {
    #[error("NoTargets: no target shapes given")]
    NoTargets,
    #[error("NoViableCandidate: no candidate executed")]
    NoViableCandidate,
    #[error("PolicyMismatch: in-batch policy needs build_pairs_batch")]
    PolicyMismatch,
    #[error("BatchTooSmall: {0} outcomes, need at least {MIN_BATCH}")]
    BatchTooSmall(usize),
    #[error("every target failed in iteration {0}")]
    AllTargetsFailed(usize),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("sink: {0}")]
    Sink(String),
}

/// How a training pair was constructed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum PairSource {
    /// Every augmented variant paired with its own execution.
    #[serde(rename = "ours")]
    Ours,
    /// Winner paired with its own execution.
    #[serde(rename = "b1")]
    Baseline1,
    /// Winner paired with the target shape.
    #[serde(rename = "b2")]
    Baseline2,
    /// Winner paired with the target, best fifth of each batch only.
    #[serde(rename = "b3")]
    Baseline3,
}

impl PairSource {
    pub fn tag(self) -> &'static str {
        match self {
            PairSource::Ours => "ours",
            PairSource::Baseline1 => "b1",
            PairSource::Baseline2 => "b2",
            PairSource::Baseline3 => "b3",
        }
    }
}

/// A synthetic supervision example: shape `X` and program `Z`.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainingPair {
    pub shape: PointCloud,
    pub program: Program,
    pub cd_to_target: Option<f64>,
    pub source: PairSource,
    pub iteration: usize,
}

impl TrainingPair {
    /// The program is stored canonicalized.
    pub fn new(shape: PointCloud, program: &Program, cd_to_target: Option<f64>, source: PairSource, iteration: usize) -> Self {
        TrainingPair {
            shape,
            program: program.canonicalize(),
            cd_to_target,
            source,
            iteration,
        }
    }
}

/// One line of the JSONL dataset. The shape lives in a sidecar XYZ file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetRecord {
    pub shape: String,
    pub program: String,
    pub cd: Option<f64>,
    pub source: PairSource,
    pub iteration: usize,
}

/// Sidecar path, relative to the run directory, of the `index`-th pair
/// emitted in `iteration`.
pub fn sidecar_path(iteration: usize, index: usize) -> String {
    format!("shapes/it{iteration:03}_{index:06}.xyz")
}

impl DatasetRecord {
    pub fn from_pair(pair: &TrainingPair, index: usize) -> Self {
        DatasetRecord {
            shape: sidecar_path(pair.iteration, index),
            program: pair.program.to_text(),
            cd: pair.cd_to_target,
            source: pair.source,
            iteration: pair.iteration,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PipelineConfig {
    pub k: usize,
    pub tie_tolerance: f64,
    pub iterations: usize,
    pub sample_points: usize,
    pub decoding: DecodingParams,
    pub augment: AugmentConfig,
    pub policy: PairSource,
    pub seed: u64,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            k: 10,
            tie_tolerance: 1e-4,
            iterations: 6,
            sample_points: DEFAULT_SAMPLE_POINTS,
            decoding: DecodingParams::default(),
            augment: AugmentConfig::default(),
            policy: PairSource::Ours,
            seed: 0,
        }
    }
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<(), SelftrainError> {
        let bad = |m: String| Err(SelftrainError::InvalidConfig(m));
        if self.k == 0 {
            return bad("k must be at least 1".into());
        }
        if !(self.tie_tolerance > 0.0) {
            return bad(format!("tie_tolerance must be positive, got {}", self.tie_tolerance));
        }
        if self.iterations == 0 {
            return bad("iterations must be at least 1".into());
        }
        if self.sample_points == 0 {
            return bad("sample_points must be positive".into());
        }
        self.decoding.validate().map_err(SelftrainError::InvalidConfig)?;
        self.augment.validate().map_err(SelftrainError::InvalidConfig)
    }
}

/// A normalized target cloud, with its solid in the same frame when known.
#[derive(Debug, Clone)]
pub struct Target {
    pub id: String,
    pub cloud: PointCloud,
    pub oracle: Option<MembershipOracle>,
}

/// Per-iteration statistics. CD values are in unit-box thousandths, lengths
/// in tokens.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationReport {
    pub iteration: usize,
    pub cd_best10: f64,
    pub cd_mean: f64,
    pub cd_worst10: f64,
    pub iou_mean: Option<f64>,
    pub len_mean: f64,
    pub len_max: usize,
    pub len_min: usize,
    pub pairs_emitted: usize,
    pub proposals_dropped: usize,
    /// Targets with no viable candidate this iteration.
    #[serde(default)]
    pub targets_skipped: usize,
}
