use rayon::prelude::*;

use super::{
    select_best, IterationReport, PairSource, PipelineConfig, SelectionOutcome, SelftrainError, Target,
    TrainingPair, BATCH_KEEP_FRACTION, IOU_RESOLUTION, MIN_BATCH,
};
use crate::augment::diversify;
use crate::geometry::{execute, occupancy_grid, Aabb};
use crate::metrics::{aggregate_cd, chamfer, iou, length_stats};
use crate::proposer::Proposer;
use crate::seed::{derive_seed, stream};

/// Pairs for one selection outcome under a per-target policy.
pub fn build_pairs(
    policy: PairSource,
    outcome: &SelectionOutcome,
    target: &Target,
    cfg: &PipelineConfig,
    seed: u64,
    iteration: usize,
) -> Result<Vec<TrainingPair>, SelftrainError> {
    Ok(match policy {
        PairSource::Ours => match diversify(&outcome.best, &cfg.augment, cfg.sample_points, seed) {
            Ok(variants) => variants
                .into_iter()
                .map(|v| {
                    let cd = chamfer(&v.cloud, &target.cloud).ok().map(|r| r.value);
                    TrainingPair::new(v.cloud, &v.program, cd, PairSource::Ours, iteration)
                })
                .collect(),
            Err(e) => {
                log::warn!("target {}: winner failed to re-sample: {e}", target.id);
                Vec::new()
            }
        },
        PairSource::Baseline1 => vec![TrainingPair::new(
            outcome.best_cloud.clone(),
            &outcome.best,
            Some(outcome.best_cd),
            PairSource::Baseline1,
            iteration,
        )],
        PairSource::Baseline2 => vec![TrainingPair::new(
            target.cloud.clone(),
            &outcome.best,
            Some(outcome.best_cd),
            PairSource::Baseline2,
            iteration,
        )],
        PairSource::Baseline3 => return Err(SelftrainError::PolicyMismatch),
    })
}

/// In-batch policy: the best `⌈0.2·n⌉` outcomes by cd (stable on ties),
/// each paired with its target. `outcomes[i]` belongs to `targets[i]`.
pub fn build_pairs_batch(
    outcomes: &[&SelectionOutcome],
    targets: &[&Target],
    iteration: usize,
) -> Result<Vec<TrainingPair>, SelftrainError> {
    let n = outcomes.len();
    if n < MIN_BATCH {
        return Err(SelftrainError::BatchTooSmall(n));
    }
    let keep = (BATCH_KEEP_FRACTION * n as f64).ceil() as usize;
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| outcomes[a].best_cd.total_cmp(&outcomes[b].best_cd));
    Ok(order[..keep]
        .iter()
        .map(|&i| {
            TrainingPair::new(
                targets[i].cloud.clone(),
                &outcomes[i].best,
                Some(outcomes[i].best_cd),
                PairSource::Baseline3,
                iteration,
            )
        })
        .collect())
}

/// Receives each finished iteration before the next starts.
pub trait IterationSink {
    fn on_iteration(&mut self, report: &IterationReport, pairs: &[TrainingPair]) -> Result<(), String>;
}

/// Discards everything.
pub struct NullSink;

impl IterationSink for NullSink {
    fn on_iteration(&mut self, _: &IterationReport, _: &[TrainingPair]) -> Result<(), String> {
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct IterationOutput {
    pub report: IterationReport,
    pub pairs: Vec<TrainingPair>,
    /// One entry per target, `None` when it was skipped.
    pub outcomes: Vec<Option<SelectionOutcome>>,
}

struct TargetResult {
    outcome: Option<SelectionOutcome>,
    pairs: Vec<TrainingPair>,
    dropped: usize,
    iou: Option<f64>,
}

fn winner_iou(outcome: &SelectionOutcome, target: &Target) -> Option<f64> {
    let target_oracle = target.oracle.as_ref()?;
    let winner = execute(&outcome.best).ok()?.transformed(outcome.best_normalization);
    let frame = match (winner.bbox(), target_oracle.bbox()) {
        (Some(a), Some(b)) => a.union(&b),
        (Some(a), None) | (None, Some(a)) => a,
        (None, None) => Aabb::unit(),
    };
    let a = occupancy_grid(&winner, IOU_RESOLUTION, frame).ok()?;
    let b = occupancy_grid(target_oracle, IOU_RESOLUTION, frame).ok()?;
    iou(&a, &b).ok()
}

fn process_target<P: Proposer + ?Sized>(
    proposer: &P,
    target: &Target,
    t: usize,
    iteration: usize,
    cfg: &PipelineConfig,
    with_iou: bool,
) -> TargetResult {
    let base = derive_seed(cfg.seed, &[iteration as u64, t as u64]);
    let skipped = |dropped| TargetResult {
        outcome: None,
        pairs: Vec::new(),
        dropped,
        iou: None,
    };
    let proposal = match proposer.propose(&target.cloud, cfg.k, &cfg.decoding, derive_seed(base, &[stream::PROPOSE])) {
        Ok(p) => p,
        Err(e) => {
            log::warn!("target {}: proposer failed: {e}", target.id);
            return skipped(0);
        }
    };
    let outcome = match select_best(&target.id, &proposal.programs, &target.cloud, cfg, derive_seed(base, &[stream::SCORE])) {
        Ok(o) => o,
        Err(_) => return skipped(proposal.dropped + proposal.programs.len()),
    };
    let pairs = match cfg.policy {
        PairSource::Baseline3 => Vec::new(),
        policy => build_pairs(policy, &outcome, target, cfg, derive_seed(base, &[stream::PAIRS]), iteration)
            .expect("per-target policy"),
    };
    TargetResult {
        iou: if with_iou { winner_iou(&outcome, target) } else { None },
        dropped: proposal.dropped + outcome.rejected_count,
        outcome: Some(outcome),
        pairs,
    }
}

/// One propose / select / pair / update round over all targets. Targets
/// are processed in parallel; the proposer is updated once with the new
/// pairs afterwards.
pub fn run_iteration<P: Proposer + ?Sized>(
    proposer: &mut P,
    dataset: &mut Vec<TrainingPair>,
    iteration: usize,
    targets: &[Target],
    cfg: &PipelineConfig,
) -> Result<IterationOutput, SelftrainError> {
    if targets.is_empty() {
        return Err(SelftrainError::NoTargets);
    }
    let with_iou = targets.iter().all(|t| t.oracle.is_some());
    let shared: &P = proposer;
    let results: Vec<TargetResult> = targets
        .par_iter()
        .enumerate()
        .map(|(t, target)| process_target(shared, target, t, iteration, cfg, with_iou))
        .collect();

    let mut pairs: Vec<TrainingPair> = results.iter().flat_map(|r| r.pairs.iter().cloned()).collect();
    if cfg.policy == PairSource::Baseline3 {
        let (outs, tgts): (Vec<&SelectionOutcome>, Vec<&Target>) = results
            .iter()
            .zip(targets)
            .filter_map(|(r, t)| r.outcome.as_ref().map(|o| (o, t)))
            .unzip();
        match build_pairs_batch(&outs, &tgts, iteration) {
            Ok(p) => pairs = p,
            Err(e) => log::warn!("iteration {iteration}: {e}"),
        }
    }

    let winners: Vec<&SelectionOutcome> = results.iter().filter_map(|r| r.outcome.as_ref()).collect();
    if winners.is_empty() {
        return Err(SelftrainError::AllTargetsFailed(iteration));
    }
    let cds: Vec<(&str, f64)> = winners.iter().map(|o| (o.target_id.as_str(), o.best_cd)).collect();
    let agg = aggregate_cd(&cds).expect("non-empty");
    let lengths = length_stats(winners.iter().map(|o| &o.best)).expect("non-empty");
    let ious: Vec<f64> = results.iter().filter_map(|r| r.iou).collect();
    let report = IterationReport {
        iteration,
        cd_best10: agg.best10_mean,
        cd_mean: agg.mean,
        cd_worst10: agg.worst10_mean,
        iou_mean: (with_iou && !ious.is_empty()).then(|| ious.iter().sum::<f64>() / ious.len() as f64),
        len_mean: lengths.mean,
        len_max: lengths.max,
        len_min: lengths.min,
        pairs_emitted: pairs.len(),
        proposals_dropped: results.iter().map(|r| r.dropped).sum(),
        targets_skipped: results.iter().filter(|r| r.outcome.is_none()).count(),
    };
    dataset.extend(pairs.iter().cloned());
    proposer.update(&pairs);
    Ok(IterationOutput {
        report,
        pairs,
        outcomes: results.into_iter().map(|r| r.outcome).collect(),
    })
}

/// Runs iterations `start..cfg.iterations`, handing each to `sink` before
/// starting the next.
pub fn run<P: Proposer + ?Sized>(
    cfg: &PipelineConfig,
    targets: &[Target],
    proposer: &mut P,
    dataset: &mut Vec<TrainingPair>,
    start: usize,
    sink: &mut dyn IterationSink,
) -> Result<Vec<IterationReport>, SelftrainError> {
    cfg.validate()?;
    let mut reports = Vec::new();
    for iteration in start..cfg.iterations {
        let out = run_iteration(proposer, dataset, iteration, targets, cfg)?;
        log::info!(
            "iteration {iteration}: cd_mean {:.4}, len_max {}, pairs {}",
            out.report.cd_mean,
            out.report.len_max,
            out.report.pairs_emitted
        );
        sink.on_iteration(&out.report, &out.pairs).map_err(SelftrainError::Sink)?;
        reports.push(out.report);
    }
    Ok(reports)
}

/// Rebuilds proposer state from a stored dataset: one update per completed
/// iteration, with that iteration's pairs in stored order.
pub fn replay_updates<P: Proposer + ?Sized>(proposer: &mut P, dataset: &[TrainingPair], completed: usize) {
    for iteration in 0..completed {
        let pairs: Vec<TrainingPair> = dataset.iter().filter(|p| p.iteration == iteration).cloned().collect();
        proposer.update(&pairs);
    }
}
