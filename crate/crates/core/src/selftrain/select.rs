use rayon::prelude::*;

use super::{PipelineConfig, SelftrainError};
use crate::dsl::Program;
use crate::geometry::{execute, normalize_unit_box, surface_sample, PointCloud, Similarity};
use crate::metrics::chamfer;
use crate::seed::derive_seed;

/// Index of the winner among `(cd, tokens)` scores.
///
/// Candidates whose cd is less than `tolerance` above the minimum are tied;
/// among them the fewest tokens win, then the lower cd, then the earlier
/// index. `None` for an empty slice.
pub fn pick_winner(scores: &[(f64, usize)], tolerance: f64) -> Option<usize> {
    let min = scores.iter().map(|s| s.0).fold(f64::INFINITY, f64::min);
    let mut best: Option<usize> = None;
    for (i, &(cd, tokens)) in scores.iter().enumerate() {
        if cd - min >= tolerance {
            continue;
        }
        best = match best {
            Some(b) if (scores[b].1, scores[b].0) <= (tokens, cd) => Some(b),
            _ => Some(i),
        };
    }
    best
}

#[derive(Debug, Clone)]
pub struct SelectionOutcome {
    pub target_id: String,
    pub best: Program,
    pub best_index: usize,
    pub best_cd: f64,
    /// Executable candidates with their cds, in candidate order.
    pub all_cds: Vec<(Program, f64)>,
    pub rejected_count: usize,
    /// Normalized sample of the winner that produced `best_cd`.
    pub best_cloud: PointCloud,
    /// Maps the winner's model coordinates onto `best_cloud`'s frame.
    pub best_normalization: Similarity,
}

struct Scored {
    index: usize,
    program: Program,
    cd: f64,
    cloud: PointCloud,
    normalization: Similarity,
}

/// Executes, samples, normalizes and scores every candidate against the
/// normalized `target`, then applies [`pick_winner`]. Candidate `i` is
/// sampled with `derive_seed(seed, [i])`.
pub fn select_best(
    target_id: &str,
    candidates: &[Program],
    target: &PointCloud,
    cfg: &PipelineConfig,
    seed: u64,
) -> Result<SelectionOutcome, SelftrainError> {
    let scored: Vec<Option<Scored>> = candidates
        .par_iter()
        .enumerate()
        .map(|(i, program)| {
            let oracle = execute(program).ok()?;
            let sample = surface_sample(&oracle, cfg.sample_points, derive_seed(seed, &[i as u64])).ok()?;
            let (cloud, normalization) = normalize_unit_box(&sample).ok()?;
            let cd = chamfer(&cloud, target).ok()?.value;
            Some(Scored {
                index: i,
                program: program.clone(),
                cd,
                cloud,
                normalization,
            })
        })
        .collect();
    let rejected_count = scored.iter().filter(|s| s.is_none()).count();
    let mut ok: Vec<Scored> = scored.into_iter().flatten().collect();
    let scores: Vec<(f64, usize)> = ok.iter().map(|s| (s.cd, s.program.count_tokens())).collect();
    let w = pick_winner(&scores, cfg.tie_tolerance).ok_or(SelftrainError::NoViableCandidate)?;
    let all_cds = ok.iter().map(|s| (s.program.clone(), s.cd)).collect();
    let winner = ok.swap_remove(w);
    Ok(SelectionOutcome {
        target_id: target_id.to_string(),
        best: winner.program,
        best_index: winner.index,
        best_cd: winner.cd,
        all_cds,
        rejected_count,
        best_cloud: winner.cloud,
        best_normalization: winner.normalization,
    })
}
