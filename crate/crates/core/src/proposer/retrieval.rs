//! Conditional proposer backed by a memory of (shape descriptor, program)
//! entries: nearest entries are soft-selected and mutated.

use std::collections::VecDeque;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::decoding::{sample_index, truncated_distribution, DecodingParams};
use super::grammar::{pcfg_propose, pcfg_update, round4, GrammarWeights, RETRY_BUDGET};
use super::{Proposal, ProposalSource, Proposer, ProposerError};
use crate::augment::{expand, shorten, AugmentConfig};
use crate::dsl::{Profile, Program, StatementBody};
use crate::geometry::PointCloud;
use crate::seed::{derive_seed, stream};
use crate::selftrain::TrainingPair;

pub const DESCRIPTOR_RESOLUTION: usize = 8;
pub const DESCRIPTOR_DIM: usize = DESCRIPTOR_RESOLUTION * DESCRIPTOR_RESOLUTION * DESCRIPTOR_RESOLUTION;
pub const DEFAULT_BANK_CAPACITY: usize = 4096;

/// Occupancy histogram of a unit-box cloud: fraction of points per cell of
/// an 8³ grid over `[0, 1]³`, flattened as `(ix * 8 + iy) * 8 + iz`. Points
/// outside the box count toward the nearest boundary cell.
pub fn descriptor(pc: &PointCloud) -> Result<Vec<f64>, ProposerError> {
    if pc.is_empty() {
        return Err(ProposerError::EmptyCloud);
    }
    let n = DESCRIPTOR_RESOLUTION;
    let cell = |c: f64| ((c * n as f64).floor().max(0.0) as usize).min(n - 1);
    let mut hist = vec![0.0; DESCRIPTOR_DIM];
    for p in pc.points() {
        hist[(cell(p.x) * n + cell(p.y)) * n + cell(p.z)] += 1.0;
    }
    let total = pc.len() as f64;
    hist.iter_mut().for_each(|h| *h /= total);
    Ok(hist)
}

pub fn descriptor_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

#[derive(Debug, Clone, PartialEq)]
pub struct BankEntry {
    pub descriptor: Vec<f64>,
    pub program: Program,
}

/// Bounded FIFO memory; the oldest entries are evicted first.
#[derive(Debug, Clone)]
pub struct MemoryBank {
    entries: VecDeque<BankEntry>,
    capacity: usize,
}

impl MemoryBank {
    pub fn new(capacity: usize) -> Self {
        assert!(capacity > 0, "bank capacity must be positive");
        MemoryBank {
            entries: VecDeque::new(),
            capacity,
        }
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> impl Iterator<Item = &BankEntry> {
        self.entries.iter()
    }

    pub fn push(&mut self, descriptor: Vec<f64>, program: Program) {
        assert_eq!(descriptor.len(), DESCRIPTOR_DIM);
        if self.entries.len() == self.capacity {
            self.entries.pop_front();
        }
        self.entries.push_back(BankEntry { descriptor, program });
    }

    /// The `n` entries closest to `query`, nearest first; ties keep
    /// insertion order.
    pub fn nearest(&self, query: &[f64], n: usize) -> Vec<(f64, &BankEntry)> {
        let mut scored: Vec<(f64, &BankEntry)> = self
            .entries
            .iter()
            .map(|e| (descriptor_distance(query, &e.descriptor), e))
            .collect();
        scored.sort_by(|a, b| a.0.total_cmp(&b.0));
        scored.truncate(n);
        scored
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MutationConfig {
    pub enabled: bool,
    /// Literals are scaled by `1 + U(-literal_noise, literal_noise)`.
    pub literal_noise: f64,
    /// Chance of one expand-or-shorten step after literal noise.
    pub structural_probability: f64,
}

impl Default for MutationConfig {
    fn default() -> Self {
        MutationConfig {
            enabled: true,
            literal_noise: 0.1,
            structural_probability: 0.3,
        }
    }
}

/// Rescales every numeric literal by independent uniform noise, rounding to
/// four decimals. `None` when the result is invalid.
pub fn perturb_literals<R: Rng>(p: &Program, noise: f64, rng: &mut R) -> Option<Program> {
    let mut jitter = |v: f64| round4(v * (1.0 + rng.gen_range(-noise..=noise)));
    let statements = p
        .statements()
        .iter()
        .map(|s| {
            let mut s = s.clone();
            match &mut s.body {
                StatementBody::Workspace(w) => w.origin.iter_mut().for_each(|o| *o = jitter(*o)),
                StatementBody::Sketch(sk) => {
                    for profile in &mut sk.profiles {
                        match profile {
                            Profile::Circle { cx, cy, r } => {
                                for v in [cx, cy, r] {
                                    *v = jitter(*v);
                                }
                            }
                            Profile::Rect { cx, cy, w, h } => {
                                for v in [cx, cy, w, h] {
                                    *v = jitter(*v);
                                }
                            }
                            Profile::Polygon { vertices } => {
                                vertices.iter_mut().flatten().for_each(|v| *v = jitter(*v))
                            }
                        }
                    }
                }
                StatementBody::Extrude(e) => e.height = jitter(e.height),
                StatementBody::Boolean(_) => {}
            }
            s
        })
        .collect();
    Program::new(statements, p.result().clone()).ok()
}

/// Literal noise, then with some probability one expand or shorten step.
pub fn mutate(p: &Program, cfg: &MutationConfig, augment: &AugmentConfig, rng: &mut ChaCha8Rng) -> Option<Program> {
    let mut out = perturb_literals(p, cfg.literal_noise, rng)?;
    if rng.gen_bool(cfg.structural_probability) {
        let variants = if rng.gen_bool(0.5) {
            expand(&out, augment, rng.gen())
        } else {
            shorten(&out)
        };
        if !variants.is_empty() {
            out = variants[rng.gen_range(0..variants.len())].clone();
        }
    }
    Some(out)
}

/// Soft-selects among the nearest `min(top_k, |bank|)` entries with weights
/// `exp(-d / temperature)` under top-p truncation, then mutates each pick.
/// An empty bank falls back to the grammar proposer.
#[allow(clippy::too_many_arguments)]
pub fn retrieve_mutate_propose(
    bank: &MemoryBank,
    fallback: &GrammarWeights,
    shape: &PointCloud,
    k: usize,
    params: &DecodingParams,
    mutation: &MutationConfig,
    augment: &AugmentConfig,
    seed: u64,
) -> Result<Proposal, ProposerError> {
    params.validate().map_err(ProposerError::InvalidParams)?;
    if bank.is_empty() {
        return Ok(Proposal {
            programs: pcfg_propose(fallback, k, params, seed)?,
            dropped: 0,
            source: ProposalSource::GrammarFallback,
        });
    }
    let query = descriptor(shape)?;
    let neighbors = bank.nearest(&query, params.top_k.min(bank.len()));
    // exp(-d) raised to 1/T inside the truncation gives exp(-d/T)
    let weights: Vec<f64> = neighbors.iter().map(|(d, _)| (-d).exp()).collect();
    let probs = truncated_distribution(&weights, params);

    let mut programs = Vec::with_capacity(k);
    for i in 0..k {
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, &[stream::MUTATE, i as u64]));
        let source = &neighbors[sample_index(&probs, &mut rng)].1.program;
        let picked = (0..RETRY_BUDGET).find_map(|_| {
            let candidate = if mutation.enabled {
                mutate(source, mutation, augment, &mut rng)?
            } else {
                source.clone()
            };
            (candidate.count_tokens() <= params.max_tokens).then_some(candidate)
        });
        match picked {
            Some(p) => programs.push(p),
            None => {
                return Err(ProposerError::BudgetExhausted {
                    produced: programs.len(),
                    requested: k,
                })
            }
        }
    }
    Ok(Proposal {
        programs,
        dropped: 0,
        source: ProposalSource::Retrieval,
    })
}

/// Memory-bank proposer. `update` stores each pair's shape descriptor with
/// its program and refits the fallback grammar.
#[derive(Debug, Clone)]
pub struct RetrievalProposer {
    pub bank: MemoryBank,
    pub fallback: GrammarWeights,
    pub mutation: MutationConfig,
    pub augment: AugmentConfig,
}

impl Default for RetrievalProposer {
    fn default() -> Self {
        RetrievalProposer {
            bank: MemoryBank::new(DEFAULT_BANK_CAPACITY),
            fallback: GrammarWeights::initial(),
            mutation: MutationConfig::default(),
            augment: AugmentConfig::default(),
        }
    }
}

impl Proposer for RetrievalProposer {
    fn propose(&self, shape: &PointCloud, k: usize, params: &DecodingParams, seed: u64) -> Result<Proposal, ProposerError> {
        retrieve_mutate_propose(&self.bank, &self.fallback, shape, k, params, &self.mutation, &self.augment, seed)
    }

    fn update(&mut self, pairs: &[TrainingPair]) {
        for pair in pairs {
            if let Ok(d) = descriptor(&pair.shape) {
                self.bank.push(d, pair.program.clone());
            }
        }
        self.fallback = pcfg_update(&self.fallback, pairs.iter().map(|p| &p.program));
    }

    fn name(&self) -> &'static str {
        "retrieval"
    }
}
