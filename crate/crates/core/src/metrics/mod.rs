//! Chamfer distance, IoU and aggregate statistics.

mod nn;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dsl::Program;
use crate::geometry::{OccupancyGrid, PointCloud};

pub use nn::NnIndex;

/// Slack on the unit box when checking that clouds are normalized.
pub const NORMALIZED_TOLERANCE: f64 = 1e-9;
/// Chamfer distances are reported in thousandths of the unit box.
pub const CD_SCALE: f64 = 1e3;

#[derive(Debug, Error, PartialEq)]
pub enum MetricsError {
    #[error("point cloud is empty")]
    EmptyCloud,
    #[error("point cloud is not normalized to the unit box")]
    NotNormalized,
    #[error("grids differ in resolution or frame")]
    FrameMismatch,
    #[error("empty list")]
    EmptyList,
}

/// Mean nearest-neighbor Euclidean distance in each direction, ×10³, and
/// their average.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChamferReport {
    pub value: f64,
    pub direction_ab: f64,
    pub direction_ba: f64,
}

fn check_normalized(pc: &PointCloud) -> Result<(), MetricsError> {
    let b = pc.bbox().ok_or(MetricsError::EmptyCloud)?;
    let lo = -NORMALIZED_TOLERANCE;
    let hi = 1.0 + NORMALIZED_TOLERANCE;
    let inside = b.min.iter().all(|&c| c >= lo) && b.max.iter().all(|&c| c <= hi);
    if inside {
        Ok(())
    } else {
        Err(MetricsError::NotNormalized)
    }
}

/// Mean distance from each point of `from` to its nearest neighbor in `to`.
pub fn directed_mean_distance(from: &PointCloud, to: &NnIndex) -> f64 {
    let total: f64 = from
        .points()
        .par_iter()
        .map(|p| to.nearest_distance(p).unwrap_or(f64::INFINITY))
        .collect::<Vec<f64>>()
        .iter()
        .sum();
    total / from.len() as f64
}

/// Both clouds must already be normalized with `normalize_unit_box`.
pub fn chamfer(a: &PointCloud, b: &PointCloud) -> Result<ChamferReport, MetricsError> {
    if a.is_empty() || b.is_empty() {
        return Err(MetricsError::EmptyCloud);
    }
    check_normalized(a)?;
    check_normalized(b)?;
    let ia = NnIndex::new(a.points());
    let ib = NnIndex::new(b.points());
    let direction_ab = directed_mean_distance(a, &ib) * CD_SCALE;
    let direction_ba = directed_mean_distance(b, &ia) * CD_SCALE;
    Ok(ChamferReport {
        value: (direction_ab + direction_ba) / 2.0,
        direction_ab,
        direction_ba,
    })
}

/// Intersection over union of occupied cells; two empty grids score 1.
pub fn iou(a: &OccupancyGrid, b: &OccupancyGrid) -> Result<f64, MetricsError> {
    if a.resolution() != b.resolution() || a.frame() != b.frame() {
        return Err(MetricsError::FrameMismatch);
    }
    let (mut inter, mut union) = (0usize, 0usize);
    for (&x, &y) in a.cells().iter().zip(b.cells()) {
        inter += (x && y) as usize;
        union += (x || y) as usize;
    }
    Ok(if union == 0 { 1.0 } else { inter as f64 / union as f64 })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CdAggregate {
    pub best10_mean: f64,
    pub mean: f64,
    pub worst10_mean: f64,
}

/// Means of the 10 smallest, all, and the 10 largest values. With fewer than
/// ten values the best and worst means cover every value.
pub fn aggregate_cd<S>(values: &[(S, f64)]) -> Result<CdAggregate, MetricsError> {
    if values.is_empty() {
        return Err(MetricsError::EmptyList);
    }
    let mut sorted: Vec<f64> = values.iter().map(|(_, v)| *v).collect();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len().min(10);
    let mean = |xs: &[f64]| xs.iter().sum::<f64>() / xs.len() as f64;
    Ok(CdAggregate {
        best10_mean: mean(&sorted[..n]),
        mean: mean(&sorted),
        worst10_mean: mean(&sorted[sorted.len() - n..]),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LengthStats {
    pub mean: f64,
    pub max: usize,
    pub min: usize,
}

/// Token-count statistics over a corpus.
pub fn length_stats<'a>(programs: impl IntoIterator<Item = &'a Program>) -> Result<LengthStats, MetricsError> {
    length_stats_of_counts(programs.into_iter().map(Program::count_tokens))
}

pub fn length_stats_of_counts(counts: impl IntoIterator<Item = usize>) -> Result<LengthStats, MetricsError> {
    let counts: Vec<usize> = counts.into_iter().collect();
    if counts.is_empty() {
        return Err(MetricsError::EmptyList);
    }
    Ok(LengthStats {
        mean: counts.iter().sum::<usize>() as f64 / counts.len() as f64,
        max: *counts.iter().max().unwrap(),
        min: *counts.iter().min().unwrap(),
    })
}
