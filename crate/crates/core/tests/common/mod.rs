#![allow(dead_code)]

use std::collections::HashMap;
use std::f64::consts::TAU;

use cadforge::dsl::{
    BoolOp, BooleanDef, ExtrudeDef, Ident, Plane, Profile, Program, SketchDef, Statement, StatementBody,
    WorkspaceDef,
};
use cadforge::geometry::{
    execute, normalize_unit_box, surface_sample, Aabb, MembershipOracle, OccupancyGrid, Point, PointCloud, Provenance,
};
use cadforge::metrics::chamfer;
use cadforge::proposer::grammar::{CIRCLE, POLYGON, RECT};
use cadforge::proposer::GrammarWeights;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const MINIMAL: &str = "w0=workspace(XY,0,0,0)\ns0=sketch(w0,circle(0,0,0.4))\nb0=extrude(s0,0.5)\nresult(b0)";

pub fn minimal() -> Program {
    MINIMAL.parse().unwrap()
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn cloud(points: &[[f64; 3]]) -> PointCloud {
    PointCloud::new(
        points.iter().map(|&[x, y, z]| Point::new(x, y, z)).collect(),
        Provenance::SyntheticTarget { seed: 0 },
    )
    .unwrap()
}

pub fn random_unit_cloud(rng: &mut ChaCha8Rng, n: usize) -> PointCloud {
    let pts: Vec<[f64; 3]> = (0..n).map(|_| [rng.gen(), rng.gen(), rng.gen()]).collect();
    cloud(&pts)
}

// ---------------------------------------------------------------- brute force

pub fn brute_nearest(set: &[Point], q: &Point) -> f64 {
    set.iter()
        .map(|p| {
            let d = p - q;
            (d.x * d.x + d.y * d.y + d.z * d.z).sqrt()
        })
        .fold(f64::INFINITY, f64::min)
}

/// Double-loop chamfer: mean nearest distance each way ×1000, averaged.
pub fn brute_chamfer(a: &PointCloud, b: &PointCloud) -> f64 {
    let ab: f64 = a.points().iter().map(|p| brute_nearest(b.points(), p)).sum::<f64>() / a.len() as f64;
    let ba: f64 = b.points().iter().map(|p| brute_nearest(a.points(), p)).sum::<f64>() / b.len() as f64;
    (ab * 1000.0 + ba * 1000.0) / 2.0
}

// ------------------------------------------------------------ naive evaluator

fn local(plane: Plane, origin: [f64; 3], p: &Point) -> [f64; 3] {
    let d = [p.x - origin[0], p.y - origin[1], p.z - origin[2]];
    match plane {
        Plane::XY => [d[0], d[1], d[2]],
        Plane::YZ => [d[1], d[2], d[0]],
        Plane::ZX => [d[2], d[0], d[1]],
    }
}

fn in_polygon(u: f64, v: f64, vs: &[[f64; 2]]) -> bool {
    let mut crossings = 0;
    for i in 0..vs.len() {
        let a = vs[i];
        let b = vs[(i + 1) % vs.len()];
        let straddles = (a[1] > v) != (b[1] > v);
        if straddles && u < a[0] + (v - a[1]) * (b[0] - a[0]) / (b[1] - a[1]) {
            crossings += 1;
        }
    }
    crossings % 2 == 1
}

fn in_profile(profile: &Profile, u: f64, v: f64) -> bool {
    match profile {
        Profile::Circle { cx, cy, r } => (u - cx) * (u - cx) + (v - cy) * (v - cy) <= r * r,
        Profile::Rect { cx, cy, w, h } => (u - cx).abs() <= w / 2.0 && (v - cy).abs() <= h / 2.0,
        Profile::Polygon { vertices } => in_polygon(u, v, vertices),
    }
}

/// Set-semantics membership straight from the AST: no bounding boxes, no
/// shared subtrees.
pub struct Naive<'p> {
    defs: HashMap<&'p str, &'p StatementBody>,
    result: &'p str,
}

impl<'p> Naive<'p> {
    pub fn new(p: &'p Program) -> Self {
        Naive {
            defs: p.statements().iter().map(|s| (s.id.as_str(), &s.body)).collect(),
            result: p.result().as_str(),
        }
    }

    pub fn contains(&self, q: &Point) -> bool {
        self.eval(self.result, q)
    }

    fn eval(&self, id: &str, q: &Point) -> bool {
        match self.defs[id] {
            StatementBody::Extrude(e) => {
                let StatementBody::Sketch(sk) = self.defs[e.sketch.as_str()] else { unreachable!() };
                let StatementBody::Workspace(ws) = self.defs[sk.workspace.as_str()] else { unreachable!() };
                let [u, v, w] = local(ws.plane, ws.origin, q);
                if w < 0.0 || w > e.height {
                    return false;
                }
                sk.profiles.iter().filter(|pr| in_profile(pr, u, v)).count() % 2 == 1
            }
            StatementBody::Boolean(b) => {
                let l = self.eval(b.left.as_str(), q);
                let r = self.eval(b.right.as_str(), q);
                match b.op {
                    BoolOp::Union => l || r,
                    BoolOp::Intersect => l && r,
                    BoolOp::Cut => l && !r,
                }
            }
            _ => unreachable!("result is a solid"),
        }
    }
}

/// Cells of `grid` where the naive evaluator disagrees with it.
pub fn naive_mismatches(p: &Program, grid: &OccupancyGrid) -> usize {
    let naive = Naive::new(p);
    let n = grid.resolution();
    let mut bad = 0;
    for i in 0..n {
        for j in 0..n {
            for k in 0..n {
                if naive.contains(&grid.cell_center(i, j, k)) != grid.get(i, j, k) {
                    bad += 1;
                }
            }
        }
    }
    bad
}

/// Frame for comparing a program's occupancy: its box with a margin, or a
/// fixed box when the solid is provably empty.
pub fn comparison_frame(o: &MembershipOracle) -> Aabb {
    o.bbox()
        .map(|b| b.scaled_about_center(1.2))
        .unwrap_or(Aabb::new(Point::new(-1.5, -1.5, -1.5), Point::new(1.5, 1.5, 1.5)))
}

// ----------------------------------------------------------- random programs

pub struct ProgramGen<'r> {
    rng: &'r mut ChaCha8Rng,
    statements: Vec<Statement>,
    workspaces: Vec<Ident>,
    counter: usize,
    /// Use arbitrary-precision literals instead of 4-decimal ones.
    pub wild_literals: bool,
    /// Insert statements the result never uses.
    pub dead_code: bool,
}

const PREFIXES: &[&str] = &["w", "s", "b", "part", "hole_", "x", "base", "k9_"];

impl<'r> ProgramGen<'r> {
    pub fn new(rng: &'r mut ChaCha8Rng) -> Self {
        ProgramGen {
            rng,
            statements: Vec::new(),
            workspaces: Vec::new(),
            counter: 0,
            wild_literals: false,
            dead_code: false,
        }
    }

    fn id(&mut self) -> Ident {
        self.counter += 1;
        let prefix = PREFIXES.choose(self.rng).unwrap();
        Ident::new(format!("{prefix}{}", self.counter)).unwrap()
    }

    fn num(&mut self, lo: f64, hi: f64) -> f64 {
        let v = self.rng.gen_range(lo..hi);
        if self.wild_literals {
            match self.rng.gen_range(0..6) {
                0 => v * 1e-6,
                1 => (v * 1e3).round() / 1e3,
                _ => v,
            }
        } else {
            (v * 1e4).round() / 1e4
        }
    }

    fn positive(&mut self, lo: f64, hi: f64) -> f64 {
        let v = self.num(lo, hi).abs();
        if v > 0.0 {
            v
        } else {
            lo
        }
    }

    fn profile(&mut self) -> Profile {
        match self.rng.gen_range(0..3) {
            0 => Profile::Circle {
                cx: self.num(-0.5, 0.5),
                cy: self.num(-0.5, 0.5),
                r: self.positive(0.1, 0.8),
            },
            1 => Profile::Rect {
                cx: self.num(-0.5, 0.5),
                cy: self.num(-0.5, 0.5),
                w: self.positive(0.1, 1.5),
                h: self.positive(0.1, 1.5),
            },
            _ => {
                let n = self.rng.gen_range(3..9);
                let cx = self.num(-0.4, 0.4);
                let cy = self.num(-0.4, 0.4);
                let rot = self.rng.gen_range(0.0..TAU);
                let vertices = (0..n)
                    .map(|i| {
                        let r = self.rng.gen_range(0.15..0.8);
                        let a = rot + TAU * i as f64 / n as f64;
                        let round = |x: f64| (x * 1e4).round() / 1e4;
                        [round(cx + r * a.cos()), round(cy + r * a.sin())]
                    })
                    .collect();
                Profile::Polygon { vertices }
            }
        }
    }

    fn workspace(&mut self) -> Ident {
        if !self.workspaces.is_empty() && self.rng.gen_bool(0.4) {
            return self.workspaces.choose(self.rng).unwrap().clone();
        }
        let id = self.id();
        let plane = *Plane::ALL.choose(self.rng).unwrap();
        let origin = [self.num(-0.5, 0.5), self.num(-0.5, 0.5), self.num(-0.5, 0.5)];
        self.statements
            .push(Statement::new(id.clone(), StatementBody::Workspace(WorkspaceDef { plane, origin })));
        self.workspaces.push(id.clone());
        id
    }

    fn leaf(&mut self) -> Ident {
        let ws = self.workspace();
        let n = self.rng.gen_range(1..4);
        let profiles = (0..n).map(|_| self.profile()).collect();
        let sk = self.id();
        self.statements.push(Statement::new(
            sk.clone(),
            StatementBody::Sketch(SketchDef { workspace: ws, profiles }),
        ));
        let solid = self.id();
        let height = self.positive(0.1, 1.5);
        self.statements
            .push(Statement::new(solid.clone(), StatementBody::Extrude(ExtrudeDef { sketch: sk, height })));
        solid
    }

    fn solid(&mut self, depth: usize) -> Ident {
        if self.dead_code && self.rng.gen_bool(0.15) {
            self.leaf();
        }
        if depth == 0 || self.rng.gen_bool(0.3) {
            return self.leaf();
        }
        let left = self.solid(depth - 1);
        let right = self.solid(depth - 1);
        let id = self.id();
        let op = *BoolOp::ALL.choose(self.rng).unwrap();
        self.statements
            .push(Statement::new(id.clone(), StatementBody::Boolean(BooleanDef { op, left, right })));
        id
    }

    /// A valid program with boolean depth at most `max_depth`.
    pub fn program(mut self, max_depth: usize) -> Program {
        let root = self.solid(max_depth);
        Program::new(self.statements, root).unwrap()
    }
}

pub fn random_program(seed: u64, max_depth: usize) -> Program {
    let mut r = rng(seed);
    ProgramGen::new(&mut r).program(max_depth)
}

/// Random program that executes to a non-empty solid.
pub fn random_executable(seed: u64, max_depth: usize) -> Program {
    (0..)
        .map(|i| random_program(seed.wrapping_mul(1000).wrapping_add(i), max_depth))
        .find(|p| execute(p).map(|o| cadforge::geometry::is_nonempty(&o)).unwrap_or(false))
        .unwrap()
}

// ------------------------------------------------------------------ selection

/// Winner by sorting the tied set on (tokens, cd, index).
pub fn reference_winner(scores: &[(f64, usize)], tolerance: f64) -> Option<usize> {
    let min = scores.iter().map(|s| s.0).reduce(f64::min)?;
    let mut tied: Vec<usize> = (0..scores.len()).filter(|&i| scores[i].0 - min < tolerance).collect();
    tied.sort_by(|&a, &b| {
        scores[a]
            .1
            .cmp(&scores[b].1)
            .then(scores[a].0.partial_cmp(&scores[b].0).unwrap())
            .then(a.cmp(&b))
    });
    tied.first().copied()
}

/// Every clause of the rule, checked against all candidates.
pub fn winner_is_optimal(scores: &[(f64, usize)], tolerance: f64, w: usize) -> bool {
    let min = scores.iter().map(|s| s.0).fold(f64::INFINITY, f64::min);
    let (cd_w, tok_w) = scores[w];
    if cd_w - min >= tolerance {
        return false;
    }
    scores.iter().enumerate().all(|(j, &(cd, tok))| {
        let tied = cd - min < tolerance;
        !(tied && tok < tok_w) && !(tied && tok == tok_w && cd < cd_w) && !(tied && tok == tok_w && cd == cd_w && j < w)
    })
}

// ---------------------------------------------------------------- sampling

/// Chamfer between two independent normalized samples of the same program.
pub fn resample_cd(p: &Program, m: usize, seed_a: u64, seed_b: u64) -> f64 {
    let o = execute(p).unwrap();
    let a = normalize_unit_box(&surface_sample(&o, m, seed_a).unwrap()).unwrap().0;
    let b = normalize_unit_box(&surface_sample(&o, m, seed_b).unwrap()).unwrap().0;
    chamfer(&a, &b).unwrap().value
}

/// Largest same-oracle resampling chamfer over `n` random executable
/// programs.
pub fn noise_bound(n: usize, m: usize, seed: u64) -> f64 {
    (0..n as u64)
        .map(|i| {
            let p = random_executable(seed + i, 2);
            resample_cd(&p, m, 2 * i + 1, 2 * i + 2)
        })
        .fold(0.0, f64::max)
}

// ---------------------------------------------------------------- decoding

/// Skewed grammar for the frequency test; profile-kind and plane choices
/// are truncated by top-p, profile-count is not.
pub fn frequency_grammar() -> GrammarWeights {
    let mut w = GrammarWeights::default();
    w.profile_kind = vec![6.0, 3.0, 1.0];
    w.plane = vec![1.0, 2.0, 7.0];
    w.profile_count = vec![2.0, 1.0, 1.5];
    w
}

/// Counts of the first profile kind, first workspace plane and first
/// sketch's profile count in each program.
pub fn first_choice_counts(programs: &[Program]) -> [[usize; 3]; 3] {
    let mut kinds = [0usize; 3];
    let mut planes = [0usize; 3];
    let mut counts = [0usize; 3];
    for p in programs {
        let ws = p.statements().iter().find_map(|s| match &s.body {
            StatementBody::Workspace(w) => Some(w),
            _ => None,
        });
        planes[Plane::ALL.iter().position(|&x| x == ws.unwrap().plane).unwrap()] += 1;
        let sk = p
            .statements()
            .iter()
            .find_map(|s| match &s.body {
                StatementBody::Sketch(k) => Some(k),
                _ => None,
            })
            .unwrap();
        counts[sk.profiles.len() - 1] += 1;
        kinds[match sk.profiles[0] {
            Profile::Circle { .. } => CIRCLE,
            Profile::Rect { .. } => RECT,
            Profile::Polygon { .. } => POLYGON,
        }] += 1;
    }
    [kinds, planes, counts]
}

/// Truncated categorical computed directly: p ∝ w^(1/T), keep the `top_k`
/// largest, then the shortest prefix reaching `top_p`, renormalize.
pub fn reference_truncation(weights: &[f64], temperature: f64, top_p: f64, top_k: usize) -> Vec<f64> {
    let powered: Vec<f64> = weights.iter().map(|w| w.powf(1.0 / temperature)).collect();
    let mut ranked: Vec<usize> = (0..weights.len()).collect();
    ranked.sort_by(|&a, &b| powered[b].partial_cmp(&powered[a]).unwrap().then(a.cmp(&b)));
    ranked.truncate(top_k);
    let total: f64 = ranked.iter().map(|&i| powered[i]).sum();
    let mut kept = Vec::new();
    let mut mass = 0.0;
    for &i in &ranked {
        kept.push(i);
        mass += powered[i] / total;
        if mass >= top_p - 1e-9 {
            break;
        }
    }
    let kept_total: f64 = kept.iter().map(|&i| powered[i]).sum();
    let mut out = vec![0.0; weights.len()];
    for i in kept {
        out[i] = powered[i] / kept_total;
    }
    out
}

/// Largest |observed - expected| in units of the binomial σ; categories with
/// zero expected mass must never be observed.
pub fn max_sigma_deviation(counts: &[usize], expected: &[f64]) -> f64 {
    let n: usize = counts.iter().sum();
    counts
        .iter()
        .zip(expected)
        .map(|(&c, &p)| {
            if p == 0.0 {
                if c == 0 {
                    0.0
                } else {
                    f64::INFINITY
                }
            } else {
                let sigma = (n as f64 * p * (1.0 - p)).sqrt().max(1e-12);
                (c as f64 - n as f64 * p).abs() / sigma
            }
        })
        .fold(0.0, f64::max)
}

/// Synthetic `(cd, tokens)` candidate sets. Every fourth set plants near
/// ties at exactly 0.99e-4 and 1.01e-4 above its minimum.
pub fn candidate_sets(count: usize, seed: u64) -> Vec<Vec<(f64, usize)>> {
    let mut r = rng(seed);
    (0..count)
        .map(|s| {
            let n = r.gen_range(1..=12);
            let base: f64 = r.gen_range(0.5..80.0);
            let mut set: Vec<(f64, usize)> = (0..n)
                .map(|_| {
                    let cd = match r.gen_range(0..4) {
                        0 => base,
                        1 => base + r.gen_range(0.0..2e-4),
                        _ => base + r.gen_range(0.0..5.0),
                    };
                    (cd, r.gen_range(20..60))
                })
                .collect();
            if s % 4 == 0 {
                let min = set.iter().map(|c| c.0).fold(f64::INFINITY, f64::min);
                let tokens = r.gen_range(10..20);
                set.push((min + 0.99e-4, tokens));
                set.push((min + 1.01e-4, tokens - 5));
            }
            set
        })
        .collect()
}
