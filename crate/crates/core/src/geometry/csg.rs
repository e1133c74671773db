use std::collections::HashMap;
use std::sync::Arc;

use super::{Aabb, GeometryError, Point, Similarity, Vector};
use crate::dsl::{BoolOp, Ident, Plane, Profile, Program, SketchDef, StatementBody, WorkspaceDef};
use crate::seed::stable_hash;

/// An extruded sketch: the even-odd region of `profiles` in the workspace
/// plane, swept along the plane normal from 0 to `height`.
#[derive(Debug, Clone, PartialEq)]
pub struct Prism {
    pub plane: Plane,
    pub origin: Vector,
    pub profiles: Vec<Profile>,
    pub height: f64,
}

impl Prism {
    /// World point to `(u, v, w)` workspace coordinates, `w` along the normal.
    #[inline]
    pub fn to_local(&self, p: &Point) -> [f64; 3] {
        let d = p.coords - self.origin;
        permute_to_local(self.plane, [d.x, d.y, d.z])
    }

    #[inline]
    pub fn to_world(&self, local: [f64; 3]) -> Point {
        let [x, y, z] = permute_to_world(self.plane, local);
        Point::new(x, y, z) + self.origin
    }

    #[inline]
    pub fn direction_to_world(&self, local: [f64; 3]) -> Vector {
        let [x, y, z] = permute_to_world(self.plane, local);
        Vector::new(x, y, z)
    }

    pub fn region_contains(&self, u: f64, v: f64) -> bool {
        self.profiles.iter().filter(|p| p.contains(u, v)).count() % 2 == 1
    }

    pub fn contains(&self, p: &Point) -> bool {
        let [u, v, w] = self.to_local(p);
        (0.0..=self.height).contains(&w) && self.region_contains(u, v)
    }

    pub fn bbox(&self) -> Aabb {
        let mut lo = [f64::INFINITY; 2];
        let mut hi = [f64::NEG_INFINITY; 2];
        for profile in &self.profiles {
            let (plo, phi) = profile.bounds();
            for a in 0..2 {
                lo[a] = lo[a].min(plo[a]);
                hi[a] = hi[a].max(phi[a]);
            }
        }
        let a = self.to_world([lo[0], lo[1], 0.0]);
        let b = self.to_world([hi[0], hi[1], self.height]);
        Aabb::new(a.inf(&b), a.sup(&b))
    }
}

#[inline]
fn permute_to_local(plane: Plane, [x, y, z]: [f64; 3]) -> [f64; 3] {
    match plane {
        Plane::XY => [x, y, z],
        Plane::YZ => [y, z, x],
        Plane::ZX => [z, x, y],
    }
}

#[inline]
fn permute_to_world(plane: Plane, [u, v, w]: [f64; 3]) -> [f64; 3] {
    match plane {
        Plane::XY => [u, v, w],
        Plane::YZ => [w, u, v],
        Plane::ZX => [v, w, u],
    }
}

#[derive(Debug)]
pub(crate) enum CsgKind {
    Prism(Prism),
    Union(Arc<CsgNode>, Arc<CsgNode>),
    Intersect(Arc<CsgNode>, Arc<CsgNode>),
    Cut(Arc<CsgNode>, Arc<CsgNode>),
    Transformed(Similarity, Arc<CsgNode>),
}

/// CSG node with a conservative bounding box; `None` marks a provably empty
/// subtree.
#[derive(Debug)]
pub(crate) struct CsgNode {
    pub(crate) kind: CsgKind,
    pub(crate) bbox: Option<Aabb>,
}

impl CsgNode {
    fn prism(prism: Prism) -> Arc<Self> {
        let bbox = Some(prism.bbox());
        Arc::new(CsgNode {
            kind: CsgKind::Prism(prism),
            bbox,
        })
    }

    fn boolean(op: BoolOp, left: Arc<CsgNode>, right: Arc<CsgNode>) -> Arc<Self> {
        let (bbox, kind) = match op {
            BoolOp::Union => (
                match (left.bbox, right.bbox) {
                    (Some(a), Some(b)) => Some(a.union(&b)),
                    (a, b) => a.or(b),
                },
                CsgKind::Union(left, right),
            ),
            BoolOp::Intersect => (
                match (left.bbox, right.bbox) {
                    (Some(a), Some(b)) => a.intersection(&b),
                    _ => None,
                },
                CsgKind::Intersect(left, right),
            ),
            BoolOp::Cut => (left.bbox, CsgKind::Cut(left, right)),
        };
        Arc::new(CsgNode { kind, bbox })
    }

    fn transformed(t: Similarity, child: Arc<CsgNode>) -> Arc<Self> {
        let bbox = child.bbox.map(|b| t.apply_aabb(&b));
        Arc::new(CsgNode {
            kind: CsgKind::Transformed(t, child),
            bbox,
        })
    }

    pub(crate) fn contains(&self, p: &Point) -> bool {
        match &self.bbox {
            Some(b) if b.contains(p) => {}
            _ => return false,
        }
        match &self.kind {
            CsgKind::Prism(prism) => prism.contains(p),
            CsgKind::Union(a, b) => a.contains(p) || b.contains(p),
            CsgKind::Intersect(a, b) => a.contains(p) && b.contains(p),
            CsgKind::Cut(a, b) => a.contains(p) && !b.contains(p),
            CsgKind::Transformed(t, c) => c.contains(&t.invert(p)),
        }
    }
}

/// Executed geometry: a deterministic point-membership function plus a
/// conservative bounding box. Union boxes are exact unions, intersections
/// intersect the operand boxes, and cuts keep the left operand's box, so
/// the box may over-approximate the solid but never clips it.
#[derive(Debug, Clone)]
pub struct MembershipOracle {
    pub(crate) root: Arc<CsgNode>,
    program_hash: Option<u64>,
}

impl MembershipOracle {
    pub fn contains(&self, p: &Point) -> bool {
        self.root.contains(p)
    }

    /// `None` when the solid is provably empty from its box structure alone.
    pub fn bbox(&self) -> Option<Aabb> {
        self.root.bbox
    }

    pub fn program_hash(&self) -> Option<u64> {
        self.program_hash
    }

    /// The same solid mapped through `t`.
    pub fn transformed(&self, t: Similarity) -> MembershipOracle {
        let root = match &self.root.kind {
            CsgKind::Transformed(inner, child) => CsgNode::transformed(inner.then(&t), child.clone()),
            _ => CsgNode::transformed(t, self.root.clone()),
        };
        MembershipOracle {
            root,
            program_hash: self.program_hash,
        }
    }

    pub fn union(&self, other: &MembershipOracle) -> MembershipOracle {
        self.combine(BoolOp::Union, other)
    }

    pub fn intersect(&self, other: &MembershipOracle) -> MembershipOracle {
        self.combine(BoolOp::Intersect, other)
    }

    pub fn cut(&self, other: &MembershipOracle) -> MembershipOracle {
        self.combine(BoolOp::Cut, other)
    }

    fn combine(&self, op: BoolOp, other: &MembershipOracle) -> MembershipOracle {
        MembershipOracle {
            root: CsgNode::boolean(op, self.root.clone(), other.root.clone()),
            program_hash: None,
        }
    }

    /// Leaf prisms with their accumulated world transform, each shared
    /// subtree visited once.
    pub(crate) fn leaves(&self) -> Vec<(&Prism, Similarity)> {
        let mut out = Vec::new();
        let mut seen = std::collections::HashSet::new();
        let mut stack: Vec<(&CsgNode, Similarity)> = vec![(&self.root, Similarity::identity())];
        while let Some((node, t)) = stack.pop() {
            let key = (
                node as *const CsgNode as usize,
                t.scale.to_bits(),
                t.offset.map(f64::to_bits),
            );
            if !seen.insert(key) {
                continue;
            }
            match &node.kind {
                CsgKind::Prism(p) => out.push((p, t)),
                CsgKind::Union(a, b) | CsgKind::Intersect(a, b) | CsgKind::Cut(a, b) => {
                    stack.push((b, t));
                    stack.push((a, t));
                }
                CsgKind::Transformed(inner, c) => stack.push((c, inner.then(&t))),
            }
        }
        out
    }
}

/// Evaluates a program into a membership oracle. Succeeds for empty solids;
/// emptiness surfaces when sampling.
pub fn execute(program: &Program) -> Result<MembershipOracle, GeometryError> {
    let canon = program.canonicalize();
    let mut workspaces: HashMap<&Ident, &WorkspaceDef> = HashMap::new();
    let mut sketches: HashMap<&Ident, &SketchDef> = HashMap::new();
    let mut solids: HashMap<&Ident, Arc<CsgNode>> = HashMap::new();
    for stmt in canon.statements() {
        match &stmt.body {
            StatementBody::Workspace(w) => {
                workspaces.insert(&stmt.id, w);
            }
            StatementBody::Sketch(s) => {
                sketches.insert(&stmt.id, s);
            }
            StatementBody::Extrude(e) => {
                let sketch = sketches[&e.sketch];
                let ws = workspaces[&sketch.workspace];
                if sketch.profiles.iter().any(|p| !(p.area() > 0.0)) {
                    return Err(GeometryError::DegenerateProfile(e.sketch.to_string()));
                }
                let prism = Prism {
                    plane: ws.plane,
                    origin: Vector::from(ws.origin),
                    profiles: sketch.profiles.clone(),
                    height: e.height,
                };
                solids.insert(&stmt.id, CsgNode::prism(prism));
            }
            StatementBody::Boolean(b) => {
                let node = CsgNode::boolean(b.op, solids[&b.left].clone(), solids[&b.right].clone());
                solids.insert(&stmt.id, node);
            }
        }
    }
    Ok(MembershipOracle {
        root: solids[canon.result()].clone(),
        program_hash: Some(stable_hash(canon.to_text().as_bytes())),
    })
}
