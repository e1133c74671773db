use std::f64::consts::TAU;

use rand::distributions::{Distribution, WeightedIndex};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::csg::MembershipOracle;
use super::{GeometryError, PointCloud, Prism, Provenance, Similarity, Vector};
use crate::dsl::Profile;
use crate::planar::{self, Point2};

/// Rejection-sampling attempts allowed per requested point.
pub const ATTEMPTS_PER_POINT: usize = 100;
/// Offset for the boundary test, relative to the bounding-box diagonal.
pub const BOUNDARY_EPSILON: f64 = 1e-4;

/// A surface sample with the primitive normal each point was drawn with.
#[derive(Debug, Clone)]
pub struct SurfaceSample {
    pub cloud: PointCloud,
    pub normals: Vec<Vector>,
    /// Offset used by the boundary test.
    pub epsilon: f64,
}

enum Patch {
    CircleWall { cx: f64, cy: f64, r: f64 },
    SegmentWall { a: Point2, b: Point2 },
    Cap { region: CapRegion, top: bool },
}

#[derive(Clone)]
enum CapRegion {
    Disk { cx: f64, cy: f64, r: f64 },
    Rect { cx: f64, cy: f64, w: f64, h: f64 },
    Triangles { tris: Vec<[Point2; 3]>, pick: WeightedIndex<f64> },
}

impl CapRegion {
    fn from_profile(profile: &Profile) -> Option<(CapRegion, f64)> {
        Some(match *profile {
            Profile::Circle { cx, cy, r } => (CapRegion::Disk { cx, cy, r }, profile.area()),
            Profile::Rect { cx, cy, w, h } => (CapRegion::Rect { cx, cy, w, h }, profile.area()),
            Profile::Polygon { ref vertices } => {
                let mut idx = planar::triangulate(vertices);
                if idx.is_empty() {
                    // numerically awkward input; a fan is exact for convex shapes
                    idx = (1..vertices.len() - 1).map(|i| [0, i, i + 1]).collect();
                }
                let tris: Vec<[Point2; 3]> = idx
                    .iter()
                    .map(|t| [vertices[t[0]], vertices[t[1]], vertices[t[2]]])
                    .collect();
                let areas: Vec<f64> = tris.iter().map(|t| planar::triangle_area(t[0], t[1], t[2])).collect();
                let total: f64 = areas.iter().sum();
                let pick = WeightedIndex::new(&areas).ok()?;
                (CapRegion::Triangles { tris, pick }, total)
            }
        })
    }

    fn sample(&self, rng: &mut ChaCha8Rng) -> Point2 {
        match self {
            CapRegion::Disk { cx, cy, r } => {
                let rho = r * rng.gen::<f64>().sqrt();
                let theta = TAU * rng.gen::<f64>();
                [cx + rho * theta.cos(), cy + rho * theta.sin()]
            }
            CapRegion::Rect { cx, cy, w, h } => [
                cx + w * (rng.gen::<f64>() - 0.5),
                cy + h * (rng.gen::<f64>() - 0.5),
            ],
            CapRegion::Triangles { tris, pick } => {
                let [a, b, c] = tris[pick.sample(rng)];
                let (mut s, mut t) = (rng.gen::<f64>(), rng.gen::<f64>());
                if s + t > 1.0 {
                    s = 1.0 - s;
                    t = 1.0 - t;
                }
                [
                    a[0] + s * (b[0] - a[0]) + t * (c[0] - a[0]),
                    a[1] + s * (b[1] - a[1]) + t * (c[1] - a[1]),
                ]
            }
        }
    }
}

fn patches(prism: &Prism) -> Vec<(Patch, f64)> {
    let h = prism.height;
    let mut out = Vec::new();
    for profile in &prism.profiles {
        match *profile {
            Profile::Circle { cx, cy, r } => {
                out.push((Patch::CircleWall { cx, cy, r }, TAU * r * h));
            }
            Profile::Rect { cx, cy, w, h: rh } => {
                let corners = [
                    [cx - 0.5 * w, cy - 0.5 * rh],
                    [cx + 0.5 * w, cy - 0.5 * rh],
                    [cx + 0.5 * w, cy + 0.5 * rh],
                    [cx - 0.5 * w, cy + 0.5 * rh],
                ];
                push_segment_walls(&mut out, &corners, h);
            }
            Profile::Polygon { ref vertices } => push_segment_walls(&mut out, vertices, h),
        }
        if let Some((region, area)) = CapRegion::from_profile(profile) {
            out.push((Patch::Cap { region: region.clone(), top: false }, area));
            out.push((Patch::Cap { region, top: true }, area));
        }
    }
    out
}

fn push_segment_walls(out: &mut Vec<(Patch, f64)>, ring: &[Point2], height: f64) {
    for i in 0..ring.len() {
        let (a, b) = (ring[i], ring[(i + 1) % ring.len()]);
        let len = (b[0] - a[0]).hypot(b[1] - a[1]);
        out.push((Patch::SegmentWall { a, b }, len * height));
    }
}

/// Draws a point and its primitive normal in local prism coordinates.
fn draw(patch: &Patch, height: f64, rng: &mut ChaCha8Rng) -> ([f64; 3], [f64; 3]) {
    match patch {
        Patch::CircleWall { cx, cy, r } => {
            let theta = TAU * rng.gen::<f64>();
            let w = height * rng.gen::<f64>();
            let (s, c) = theta.sin_cos();
            ([cx + r * c, cy + r * s, w], [c, s, 0.0])
        }
        Patch::SegmentWall { a, b } => {
            let t = rng.gen::<f64>();
            let w = height * rng.gen::<f64>();
            let (dx, dy) = (b[0] - a[0], b[1] - a[1]);
            let len = dx.hypot(dy);
            ([a[0] + t * dx, a[1] + t * dy, w], [dy / len, -dx / len, 0.0])
        }
        Patch::Cap { region, top } => {
            let [u, v] = region.sample(rng);
            if *top {
                ([u, v, height], [0.0, 0.0, 1.0])
            } else {
                ([u, v, 0.0], [0.0, 0.0, -1.0])
            }
        }
    }
}

/// Samples `m` points approximately uniformly by area over the boundary of
/// the solid. Candidates are drawn from primitive walls and caps and kept
/// when membership differs on either side of the surface along the
/// primitive normal. Gives up after `100 * m` candidates, returning what was
/// kept; fails with `EmptyResult` when nothing survived.
pub fn surface_sample(o: &MembershipOracle, m: usize, seed: u64) -> Result<PointCloud, GeometryError> {
    surface_sample_with_normals(o, m, seed).map(|s| s.cloud)
}

pub fn surface_sample_with_normals(
    o: &MembershipOracle,
    m: usize,
    seed: u64,
) -> Result<SurfaceSample, GeometryError> {
    if m == 0 {
        return Err(GeometryError::InvalidArgument("sample size must be positive".into()));
    }
    let bbox = o.bbox().ok_or(GeometryError::EmptyResult)?;
    let epsilon = BOUNDARY_EPSILON * bbox.diagonal();
    if !(epsilon > 0.0) {
        return Err(GeometryError::EmptyResult);
    }

    let leaves = o.leaves();
    let mut flat: Vec<(usize, Patch)> = Vec::new();
    let mut weights: Vec<f64> = Vec::new();
    for (li, (prism, t)) in leaves.iter().enumerate() {
        for (patch, area) in patches(prism) {
            flat.push((li, patch));
            weights.push(area * t.scale * t.scale);
        }
    }
    let pick = WeightedIndex::new(&weights).map_err(|_| GeometryError::EmptyResult)?;

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut points = Vec::with_capacity(m);
    let mut normals = Vec::with_capacity(m);
    for _ in 0..ATTEMPTS_PER_POINT * m {
        let (li, patch) = &flat[pick.sample(&mut rng)];
        let (prism, t): &(&Prism, Similarity) = &leaves[*li];
        let (local, local_n) = draw(patch, prism.height, &mut rng);
        let c = t.apply(&prism.to_world(local));
        let n = prism.direction_to_world(local_n);
        if o.contains(&(c + n * epsilon)) != o.contains(&(c - n * epsilon)) {
            points.push(c);
            normals.push(n);
            if points.len() == m {
                break;
            }
        }
    }
    if points.is_empty() {
        return Err(GeometryError::EmptyResult);
    }
    let provenance = Provenance::Sampled {
        program_hash: o.program_hash().unwrap_or(0),
        seed,
    };
    Ok(SurfaceSample {
        cloud: PointCloud::new(points, provenance)?,
        normals,
        epsilon,
    })
}

/// Probe used to filter out empty solids: a small fixed-seed surface sample
/// must succeed.
pub fn is_nonempty(o: &MembershipOracle) -> bool {
    surface_sample(o, 32, 0x6e6f_6e65).is_ok()
}
