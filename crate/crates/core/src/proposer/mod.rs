//! Candidate program generators: a weighted grammar, a retrieval memory
//! with mutation, and an HTTP client.

pub mod decoding;
pub mod grammar;
pub mod remote;
pub mod retrieval;

use thiserror::Error;

use crate::dsl::Program;
use crate::geometry::PointCloud;
use crate::selftrain::TrainingPair;

pub use decoding::{sample_index, truncated_distribution, DecodingParams};
pub use grammar::{derivation_counts, pcfg_propose, pcfg_update, Choice, GrammarWeights, ValueFamily};
pub use remote::RemoteProposer;
pub use retrieval::{descriptor, retrieve_mutate_propose, MemoryBank, MutationConfig, RetrievalProposer};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ProposerError {
    #[error("BudgetExhausted: produced {produced} of {requested} programs")]
    BudgetExhausted { produced: usize, requested: usize },
    #[error("point cloud is empty")]
    EmptyCloud,
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    #[error("Transport: {0}")]
    Transport(String),
    #[error("Protocol: {0}")]
    Protocol(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ProposalSource {
    Grammar,
    Retrieval,
    /// Retrieval with an empty memory answered from the grammar.
    GrammarFallback,
    Remote,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Proposal {
    pub programs: Vec<Program>,
    /// Returned texts discarded as unparseable or over the token cap.
    pub dropped: usize,
    pub source: ProposalSource,
}

/// A program generator conditioned on a shape. `propose` takes `&self` and
/// may run concurrently; `update` needs exclusive access.
pub trait Proposer: Send + Sync {
    fn propose(&self, shape: &PointCloud, k: usize, params: &DecodingParams, seed: u64) -> Result<Proposal, ProposerError>;

    fn update(&mut self, pairs: &[TrainingPair]);

    fn name(&self) -> &'static str;
}

/// Shape-blind grammar proposer; `update` refits the weights.
#[derive(Debug, Clone)]
pub struct PcfgProposer {
    pub weights: GrammarWeights,
}

impl Default for PcfgProposer {
    fn default() -> Self {
        PcfgProposer {
            weights: GrammarWeights::initial(),
        }
    }
}

impl Proposer for PcfgProposer {
    fn propose(&self, _shape: &PointCloud, k: usize, params: &DecodingParams, seed: u64) -> Result<Proposal, ProposerError> {
        Ok(Proposal {
            programs: pcfg_propose(&self.weights, k, params, seed)?,
            dropped: 0,
            source: ProposalSource::Grammar,
        })
    }

    fn update(&mut self, pairs: &[TrainingPair]) {
        self.weights = pcfg_update(&self.weights, pairs.iter().map(|p| &p.program));
    }

    fn name(&self) -> &'static str {
        "pcfg"
    }
}
