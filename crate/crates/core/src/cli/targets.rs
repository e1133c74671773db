//! Synthetic targets drawn from a hidden grammar unknown to the proposers.

use std::collections::HashMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::CliError;
use crate::dsl::Program;
use crate::geometry::io::{atomic_write, cloud_files, read_cloud, write_xyz};
use crate::geometry::{execute, is_nonempty, normalize_unit_box, surface_sample, PointCloud, Provenance, Similarity, Vector};
use crate::proposer::{pcfg_propose, DecodingParams, GrammarWeights, ValueFamily};
use crate::seed::{derive_seed, stream};
use crate::selftrain::Target;

pub const ANSWERS_FILE: &str = "answers.jsonl";
pub const DEFAULT_TARGET_POINTS: usize = 2048;
const GENERATION_ATTEMPTS: u64 = 1000;

fn peaked(bins: usize, center: f64, spread: f64) -> Vec<f64> {
    (0..bins)
        .map(|i| {
            let x = (i as f64 + 0.5) / bins as f64 - center;
            0.05 + (-(x * x) / (2.0 * spread * spread)).exp()
        })
        .collect()
}

/// Weights of the target grammar. They favor multi-feature programs,
/// reused workspaces and union/cut, and differ from the proposers' flat
/// initial weights.
pub fn hidden_grammar() -> GrammarWeights {
    let n = crate::proposer::grammar::VALUE_BINS;
    let mut w = GrammarWeights::default();
    w.plane = vec![4.0, 2.0, 1.0];
    w.spawn_workspace = vec![2.0, 1.0];
    w.continue_feature = vec![1.0, 2.0];
    w.bool_op = vec![5.0, 3.0, 1.0];
    w.profile_count = vec![6.0, 2.0, 1.0];
    w.profile_kind = vec![3.0, 4.0, 2.0];
    w.polygon_sides = vec![1.0, 3.0, 1.0, 2.0, 1.0, 1.0];
    *w.weights_mut(crate::proposer::Choice::Value(ValueFamily::Origin)) = peaked(n, 0.5, 0.15);
    *w.weights_mut(crate::proposer::Choice::Value(ValueFamily::Center)) = peaked(n, 0.5, 0.2);
    *w.weights_mut(crate::proposer::Choice::Value(ValueFamily::Radius)) = peaked(n, 0.35, 0.2);
    *w.weights_mut(crate::proposer::Choice::Value(ValueFamily::Size)) = peaked(n, 0.4, 0.2);
    *w.weights_mut(crate::proposer::Choice::Value(ValueFamily::Height)) = peaked(n, 0.4, 0.25);
    w
}

#[derive(Debug, Clone)]
pub struct GeneratedTarget {
    pub id: String,
    pub program: Program,
    /// Normalized sample.
    pub cloud: PointCloud,
    /// Maps the program's model coordinates onto `cloud`'s frame.
    pub normalization: Similarity,
}

impl GeneratedTarget {
    pub fn to_target(&self) -> Target {
        Target {
            id: self.id.clone(),
            cloud: self.cloud.clone(),
            oracle: execute(&self.program).ok().map(|o| o.transformed(self.normalization)),
        }
    }
}

/// One line of the answers file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Answer {
    pub id: String,
    pub program: String,
    pub scale: f64,
    pub offset: [f64; 3],
}

pub fn target_id(i: usize) -> String {
    format!("target_{i:04}")
}

/// `count` executable programs from the hidden grammar with normalized
/// `points`-point samples. Deterministic in `seed`.
pub fn generate_targets(count: usize, seed: u64, points: usize) -> Result<Vec<GeneratedTarget>, CliError> {
    let weights = hidden_grammar();
    let params = DecodingParams::untruncated(1200);
    (0..count)
        .map(|i| {
            for attempt in 0..GENERATION_ATTEMPTS {
                let s = derive_seed(seed, &[stream::TARGETS, i as u64, attempt]);
                let Ok(mut programs) = pcfg_propose(&weights, 1, &params, s) else {
                    continue;
                };
                let program = programs.remove(0);
                let Ok(oracle) = execute(&program) else { continue };
                if !is_nonempty(&oracle) {
                    continue;
                }
                let Ok(sample) = surface_sample(&oracle, points, derive_seed(s, &[1])) else {
                    continue;
                };
                let Ok((cloud, normalization)) = normalize_unit_box(&sample) else {
                    continue;
                };
                return Ok(GeneratedTarget {
                    id: target_id(i),
                    program,
                    cloud: cloud.with_provenance(Provenance::SyntheticTarget { seed: s }),
                    normalization,
                });
            }
            Err(CliError::Other(format!("could not generate target {i}")))
        })
        .collect()
}

/// Writes `target_NNNN.xyz` files and the answers file.
pub fn write_targets(dir: &Path, targets: &[GeneratedTarget]) -> Result<(), CliError> {
    fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    let mut answers = String::new();
    for t in targets {
        write_xyz(&dir.join(format!("{}.xyz", t.id)), &t.cloud)?;
        let a = Answer {
            id: t.id.clone(),
            program: t.program.to_text(),
            scale: t.normalization.scale,
            offset: t.normalization.offset.into(),
        };
        answers.push_str(&serde_json::to_string(&a).expect("answer serializes"));
        answers.push('\n');
    }
    let path = dir.join(ANSWERS_FILE);
    atomic_write(&path, answers.as_bytes()).map_err(|e| CliError::io(&path, e))
}

pub fn read_answers(path: &Path) -> Result<HashMap<String, Answer>, CliError> {
    let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    text.lines()
        .filter(|l| !l.trim().is_empty())
        .enumerate()
        .map(|(n, line)| {
            let a: Answer = serde_json::from_str(line)
                .map_err(|e| CliError::Other(format!("{}:{}: {e}", path.display(), n + 1)))?;
            Ok((a.id.clone(), a))
        })
        .collect()
}

/// Every `.xyz`/`.ply` cloud in `dir`, sorted by name and normalized. When
/// the directory holds an answers file, targets also carry their solids.
pub fn load_targets(dir: &Path) -> Result<Vec<Target>, CliError> {
    if !dir.is_dir() {
        return Err(CliError::MissingPath(dir.to_path_buf()));
    }
    let answers_path = dir.join(ANSWERS_FILE);
    let answers = if answers_path.is_file() {
        Some(read_answers(&answers_path)?)
    } else {
        None
    };
    let mut targets = Vec::new();
    for path in cloud_files(dir)? {
        let id = path.file_stem().and_then(|s| s.to_str()).unwrap_or_default().to_string();
        let raw = read_cloud(&path)?;
        let (cloud, renormalize) = normalize_unit_box(&raw)?;
        let oracle = match answers.as_ref().and_then(|a| a.get(&id)) {
            Some(a) => {
                let program: Program = a
                    .program
                    .parse()
                    .map_err(|e| CliError::Other(format!("answer for {id}: {e}")))?;
                let stored = Similarity {
                    scale: a.scale,
                    offset: Vector::from(a.offset),
                };
                Some(execute(&program)?.transformed(stored.then(&renormalize)))
            }
            None => None,
        };
        targets.push(Target { id, cloud, oracle });
    }
    Ok(targets)
}
