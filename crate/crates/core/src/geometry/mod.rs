//! The executor: programs become point-membership oracles over CSG trees of
//! analytic extrusions, which can be surface-sampled or voxelized.

mod csg;
mod grid;
pub mod io;
mod sample;

use std::path::PathBuf;

use nalgebra::{Point3, Vector3};
use thiserror::Error;

pub use csg::{execute, MembershipOracle, Prism};
pub use grid::{occupancy_grid, OccupancyGrid, GRID_MAGIC};
pub use sample::{is_nonempty, surface_sample, surface_sample_with_normals, SurfaceSample};

pub type Point = Point3<f64>;
pub type Vector = Vector3<f64>;

#[derive(Debug, Error)]
pub enum GeometryError {
    #[error("EmptyResult: execution produced no surface")]
    EmptyResult,
    #[error("DegenerateProfile: zero-area profile in `{0}`")]
    DegenerateProfile(String),
    #[error("DegenerateCloud: point cloud has zero extent")]
    DegenerateCloud,
    #[error("point cloud is empty")]
    EmptyCloud,
    #[error("non-finite coordinate at point {0}")]
    NonFinite(usize),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{}:{line}: {message}", path.display())]
    Format {
        path: PathBuf,
        line: usize,
        message: String,
    },
}

/// Axis-aligned bounding box in model units.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Aabb {
    pub min: Point,
    pub max: Point,
}

impl Aabb {
    pub fn new(min: Point, max: Point) -> Self {
        debug_assert!(min.x <= max.x && min.y <= max.y && min.z <= max.z);
        Aabb { min, max }
    }

    pub fn unit() -> Self {
        Aabb::new(Point::origin(), Point::new(1.0, 1.0, 1.0))
    }

    pub fn from_points<'a>(points: impl IntoIterator<Item = &'a Point>) -> Option<Self> {
        let mut iter = points.into_iter();
        let first = *iter.next()?;
        Some(iter.fold(Aabb::new(first, first), |b, p| Aabb {
            min: b.min.inf(p),
            max: b.max.sup(p),
        }))
    }

    pub fn union(&self, other: &Aabb) -> Aabb {
        Aabb {
            min: self.min.inf(&other.min),
            max: self.max.sup(&other.max),
        }
    }

    /// `None` when the boxes are disjoint.
    pub fn intersection(&self, other: &Aabb) -> Option<Aabb> {
        let min = self.min.sup(&other.min);
        let max = self.max.inf(&other.max);
        (min.x <= max.x && min.y <= max.y && min.z <= max.z).then_some(Aabb { min, max })
    }

    pub fn contains(&self, p: &Point) -> bool {
        p.x >= self.min.x
            && p.x <= self.max.x
            && p.y >= self.min.y
            && p.y <= self.max.y
            && p.z >= self.min.z
            && p.z <= self.max.z
    }

    pub fn extent(&self) -> Vector {
        self.max - self.min
    }

    pub fn diagonal(&self) -> f64 {
        self.extent().norm()
    }

    pub fn center(&self) -> Point {
        nalgebra::center(&self.min, &self.max)
    }

    pub fn volume(&self) -> f64 {
        let e = self.extent();
        e.x * e.y * e.z
    }

    pub fn scaled_about_center(&self, factor: f64) -> Aabb {
        let c = self.center();
        let half = self.extent() * (0.5 * factor);
        Aabb {
            min: c - half,
            max: c + half,
        }
    }
}

/// Uniform scale followed by translation: `q = p * scale + offset`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Similarity {
    pub scale: f64,
    pub offset: Vector,
}

impl Similarity {
    pub fn identity() -> Self {
        Similarity {
            scale: 1.0,
            offset: Vector::zeros(),
        }
    }

    pub fn apply(&self, p: &Point) -> Point {
        Point::from(p.coords * self.scale + self.offset)
    }

    pub fn invert(&self, q: &Point) -> Point {
        Point::from((q.coords - self.offset) / self.scale)
    }

    /// The transform applying `self` first, then `outer`.
    pub fn then(&self, outer: &Similarity) -> Similarity {
        Similarity {
            scale: self.scale * outer.scale,
            offset: self.offset * outer.scale + outer.offset,
        }
    }

    pub fn apply_aabb(&self, b: &Aabb) -> Aabb {
        Aabb::new(self.apply(&b.min), self.apply(&b.max))
    }
}

/// Where a point cloud came from.
#[derive(Debug, Clone, PartialEq)]
pub enum Provenance {
    Sampled { program_hash: u64, seed: u64 },
    Ingested { path: PathBuf },
    SyntheticTarget { seed: u64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct PointCloud {
    points: Vec<Point>,
    provenance: Provenance,
}

impl PointCloud {
    /// Non-empty cloud with finite coordinates.
    pub fn new(points: Vec<Point>, provenance: Provenance) -> Result<Self, GeometryError> {
        if points.is_empty() {
            return Err(GeometryError::EmptyCloud);
        }
        if let Some(i) = points.iter().position(|p| !p.coords.iter().all(|c| c.is_finite())) {
            return Err(GeometryError::NonFinite(i));
        }
        Ok(PointCloud { points, provenance })
    }

    /// Explicitly empty cloud.
    pub fn empty(provenance: Provenance) -> Self {
        PointCloud {
            points: Vec::new(),
            provenance,
        }
    }

    pub fn points(&self) -> &[Point] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn provenance(&self) -> &Provenance {
        &self.provenance
    }

    pub fn with_provenance(mut self, provenance: Provenance) -> Self {
        self.provenance = provenance;
        self
    }

    pub fn bbox(&self) -> Option<Aabb> {
        Aabb::from_points(&self.points)
    }

    pub fn transformed(&self, t: &Similarity) -> PointCloud {
        PointCloud {
            points: self.points.iter().map(|p| t.apply(p)).collect(),
            provenance: self.provenance.clone(),
        }
    }
}

/// Fits the cloud into the unit cube: the longest axis spans `[0, 1]`, the
/// others are centered, scale is isotropic. Returns the transform applied.
pub fn normalize_unit_box(pc: &PointCloud) -> Result<(PointCloud, Similarity), GeometryError> {
    let bbox = pc.bbox().ok_or(GeometryError::EmptyCloud)?;
    let extent = bbox.extent();
    let longest = extent.max();
    if !(longest > 0.0) || !longest.is_finite() {
        return Err(GeometryError::DegenerateCloud);
    }
    let scale = 1.0 / longest;
    let shift = extent.map(|e| 0.5 * (1.0 - e * scale));
    let points = pc
        .points
        .iter()
        .map(|p| Point::from((p - bbox.min) * scale + shift))
        .collect();
    let transform = Similarity {
        scale,
        offset: shift - bbox.min.coords * scale,
    };
    Ok((
        PointCloud {
            points,
            provenance: pc.provenance.clone(),
        },
        transform,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cloud(points: &[[f64; 3]]) -> PointCloud {
        PointCloud::new(
            points.iter().map(|&[x, y, z]| Point::new(x, y, z)).collect(),
            Provenance::SyntheticTarget { seed: 0 },
        )
        .unwrap()
    }

    #[test]
    fn symmetric_cube_maps_to_unit_box() {
        let pc = cloud(&[[-2.0, -2.0, -2.0], [2.0, 2.0, 2.0], [0.0, 1.0, -1.0]]);
        let (n, t) = normalize_unit_box(&pc).unwrap();
        assert_eq!(t.scale, 0.25);
        let b = n.bbox().unwrap();
        assert_eq!(b.min, Point::new(0.0, 0.0, 0.0));
        assert_eq!(b.max, Point::new(1.0, 1.0, 1.0));
    }

    #[test]
    fn short_axes_are_centered() {
        let pc = cloud(&[[0.0, 0.0, 0.0], [4.0, 2.0, 0.0]]);
        let (n, _) = normalize_unit_box(&pc).unwrap();
        let b = n.bbox().unwrap();
        assert_eq!((b.min.x, b.max.x), (0.0, 1.0));
        assert_eq!((b.min.y, b.max.y), (0.25, 0.75));
        assert_eq!((b.min.z, b.max.z), (0.5, 0.5));
    }

    #[test]
    fn repeated_point_is_degenerate() {
        let pc = cloud(&[[1.0, 2.0, 3.0]; 5]);
        assert!(matches!(normalize_unit_box(&pc), Err(GeometryError::DegenerateCloud)));
    }

    #[test]
    fn cloud_rejects_non_finite_and_empty() {
        assert!(matches!(
            PointCloud::new(vec![Point::new(0.0, f64::NAN, 0.0)], Provenance::SyntheticTarget { seed: 0 }),
            Err(GeometryError::NonFinite(0))
        ));
        assert!(matches!(
            PointCloud::new(vec![], Provenance::SyntheticTarget { seed: 0 }),
            Err(GeometryError::EmptyCloud)
        ));
    }

    #[test]
    fn similarity_composition() {
        let a = Similarity {
            scale: 2.0,
            offset: Vector::new(1.0, 0.0, 0.0),
        };
        let b = Similarity {
            scale: 0.5,
            offset: Vector::new(0.0, 3.0, 0.0),
        };
        let p = Point::new(1.0, 2.0, 3.0);
        assert_eq!(a.then(&b).apply(&p), b.apply(&a.apply(&p)));
        assert_eq!(a.invert(&a.apply(&p)), p);
    }
}
