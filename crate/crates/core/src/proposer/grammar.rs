//! Weighted random-program grammar: top-down derivation under decoding
//! parameters, and re-estimation of the weights from example programs.

use std::collections::HashSet;
use std::f64::consts::TAU;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::decoding::{sample_index, truncated_distribution, DecodingParams};
use super::ProposerError;
use crate::dsl::{
    statement_token_count, BoolOp, BooleanDef, ExtrudeDef, Ident, Plane, Profile, Program,
    SketchDef, Statement, StatementBody, WorkspaceDef, RESULT_LINE_TOKENS,
};
use crate::seed::derive_seed;

pub const VALUE_BINS: usize = 16;
/// Derivation attempts per requested program.
pub const RETRY_BUDGET: usize = 50;
/// Generated programs never spawn more workspaces than this.
pub const MAX_GENERATED_WORKSPACES: usize = 5;
const MAX_FEATURES: usize = 256;

pub const MIN_PROFILES: usize = 1;
pub const MAX_PROFILES: usize = 3;
pub const MIN_SIDES: usize = 3;
pub const MAX_SIDES: usize = 8;

pub const REUSE: usize = 0;
pub const SPAWN: usize = 1;
pub const STOP: usize = 0;
pub const CONTINUE: usize = 1;

pub const CIRCLE: usize = 0;
pub const RECT: usize = 1;
pub const POLYGON: usize = 2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ValueFamily {
    /// Workspace origin coordinates.
    Origin,
    /// Profile centers in workspace coordinates.
    Center,
    /// Circle radii and polygon vertex radii.
    Radius,
    /// Rectangle width and height.
    Size,
    Height,
}

impl ValueFamily {
    pub const ALL: [ValueFamily; 5] = [
        ValueFamily::Origin,
        ValueFamily::Center,
        ValueFamily::Radius,
        ValueFamily::Size,
        ValueFamily::Height,
    ];

    pub fn range(self) -> (f64, f64) {
        match self {
            ValueFamily::Origin => (-1.0, 1.0),
            ValueFamily::Center => (-0.6, 0.6),
            ValueFamily::Radius => (0.05, 0.85),
            ValueFamily::Size => (0.1, 1.7),
            ValueFamily::Height => (0.1, 1.7),
        }
    }

    pub fn bin_width(self) -> f64 {
        let (lo, hi) = self.range();
        (hi - lo) / VALUE_BINS as f64
    }

    /// Bin holding `v`; out-of-range values clamp to the end bins.
    pub fn bin_of(self, v: f64) -> usize {
        let (lo, _) = self.range();
        let b = ((v - lo) / self.bin_width()).floor();
        if b.is_nan() || b < 0.0 {
            0
        } else {
            (b as usize).min(VALUE_BINS - 1)
        }
    }
}

/// One categorical decision of the grammar.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Choice {
    Plane,
    /// Reuse an existing workspace or spawn a new one for the next feature.
    SpawnWorkspace,
    /// Stop after the current feature or add another.
    ContinueFeature,
    BoolOp,
    ProfileCount,
    ProfileKind,
    PolygonSides,
    Value(ValueFamily),
}

impl Choice {
    pub const ALL: [Choice; 12] = [
        Choice::Plane,
        Choice::SpawnWorkspace,
        Choice::ContinueFeature,
        Choice::BoolOp,
        Choice::ProfileCount,
        Choice::ProfileKind,
        Choice::PolygonSides,
        Choice::Value(ValueFamily::Origin),
        Choice::Value(ValueFamily::Center),
        Choice::Value(ValueFamily::Radius),
        Choice::Value(ValueFamily::Size),
        Choice::Value(ValueFamily::Height),
    ];

    pub fn arity(self) -> usize {
        match self {
            Choice::Plane | Choice::BoolOp | Choice::ProfileKind => 3,
            Choice::SpawnWorkspace | Choice::ContinueFeature => 2,
            Choice::ProfileCount => MAX_PROFILES - MIN_PROFILES + 1,
            Choice::PolygonSides => MAX_SIDES - MIN_SIDES + 1,
            Choice::Value(_) => VALUE_BINS,
        }
    }

    fn slot(self) -> usize {
        Choice::ALL.iter().position(|&c| c == self).unwrap()
    }
}

/// Positive weights for every categorical of the grammar.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GrammarWeights {
    pub plane: Vec<f64>,
    pub spawn_workspace: Vec<f64>,
    pub continue_feature: Vec<f64>,
    pub bool_op: Vec<f64>,
    pub profile_count: Vec<f64>,
    pub profile_kind: Vec<f64>,
    pub polygon_sides: Vec<f64>,
    pub origin: Vec<f64>,
    pub center: Vec<f64>,
    pub radius: Vec<f64>,
    pub size: Vec<f64>,
    pub height: Vec<f64>,
}

impl Default for GrammarWeights {
    /// Every weight 1.
    fn default() -> Self {
        GrammarWeights::filled(1.0)
    }
}

impl GrammarWeights {
    /// Starting weights of the built-in proposers: flat, except that the
    /// continuation choice favors stopping 4:1, so untrained proposals are
    /// mostly one or two features long.
    pub fn initial() -> Self {
        let mut w = GrammarWeights::default();
        w.continue_feature = vec![4.0, 1.0];
        w
    }

    pub fn filled(value: f64) -> Self {
        let v = |c: Choice| vec![value; c.arity()];
        GrammarWeights {
            plane: v(Choice::Plane),
            spawn_workspace: v(Choice::SpawnWorkspace),
            continue_feature: v(Choice::ContinueFeature),
            bool_op: v(Choice::BoolOp),
            profile_count: v(Choice::ProfileCount),
            profile_kind: v(Choice::ProfileKind),
            polygon_sides: v(Choice::PolygonSides),
            origin: v(Choice::Value(ValueFamily::Origin)),
            center: v(Choice::Value(ValueFamily::Center)),
            radius: v(Choice::Value(ValueFamily::Radius)),
            size: v(Choice::Value(ValueFamily::Size)),
            height: v(Choice::Value(ValueFamily::Height)),
        }
    }

    pub fn weights(&self, c: Choice) -> &[f64] {
        match c {
            Choice::Plane => &self.plane,
            Choice::SpawnWorkspace => &self.spawn_workspace,
            Choice::ContinueFeature => &self.continue_feature,
            Choice::BoolOp => &self.bool_op,
            Choice::ProfileCount => &self.profile_count,
            Choice::ProfileKind => &self.profile_kind,
            Choice::PolygonSides => &self.polygon_sides,
            Choice::Value(ValueFamily::Origin) => &self.origin,
            Choice::Value(ValueFamily::Center) => &self.center,
            Choice::Value(ValueFamily::Radius) => &self.radius,
            Choice::Value(ValueFamily::Size) => &self.size,
            Choice::Value(ValueFamily::Height) => &self.height,
        }
    }

    pub fn weights_mut(&mut self, c: Choice) -> &mut Vec<f64> {
        match c {
            Choice::Plane => &mut self.plane,
            Choice::SpawnWorkspace => &mut self.spawn_workspace,
            Choice::ContinueFeature => &mut self.continue_feature,
            Choice::BoolOp => &mut self.bool_op,
            Choice::ProfileCount => &mut self.profile_count,
            Choice::ProfileKind => &mut self.profile_kind,
            Choice::PolygonSides => &mut self.polygon_sides,
            Choice::Value(ValueFamily::Origin) => &mut self.origin,
            Choice::Value(ValueFamily::Center) => &mut self.center,
            Choice::Value(ValueFamily::Radius) => &mut self.radius,
            Choice::Value(ValueFamily::Size) => &mut self.size,
            Choice::Value(ValueFamily::Height) => &mut self.height,
        }
    }

    /// Every categorical has the right arity and strictly positive, finite
    /// weights.
    pub fn validate(&self) -> Result<(), String> {
        for c in Choice::ALL {
            let w = self.weights(c);
            if w.len() != c.arity() {
                return Err(format!("{c:?} needs {} weights, got {}", c.arity(), w.len()));
            }
            if let Some(x) = w.iter().find(|x| !(x.is_finite() && **x > 0.0)) {
                return Err(format!("{c:?} weight {x} is not positive and finite"));
            }
        }
        Ok(())
    }

    /// Normalized probabilities of one categorical.
    pub fn distribution(&self, c: Choice) -> Vec<f64> {
        let w = self.weights(c);
        let total: f64 = w.iter().sum();
        w.iter().map(|x| x / total).collect()
    }

    /// Sum over categoricals of KL(`reference` ‖ `self`).
    pub fn kl_from(&self, reference: &GrammarWeights) -> f64 {
        Choice::ALL
            .iter()
            .map(|&c| {
                let p = reference.distribution(c);
                let q = self.distribution(c);
                p.iter()
                    .zip(&q)
                    .filter(|(pi, _)| **pi > 0.0)
                    .map(|(pi, qi)| pi * (pi / qi).ln())
                    .sum::<f64>()
            })
            .sum()
    }

    /// Adds `other` entrywise.
    pub fn add(&mut self, other: &GrammarWeights) {
        for c in Choice::ALL {
            for (a, b) in self.weights_mut(c).iter_mut().zip(other.weights(c)) {
                *a += b;
            }
        }
    }
}

pub(crate) fn round4(v: f64) -> f64 {
    let r = (v * 1e4).round() / 1e4;
    if r == 0.0 {
        0.0
    } else {
        r
    }
}

/// Draws grammar decisions from truncated distributions computed once.
pub(crate) struct Sampler<'r> {
    dists: Vec<Vec<f64>>,
    greedy: bool,
    pub rng: &'r mut ChaCha8Rng,
}

impl<'r> Sampler<'r> {
    pub fn new(w: &GrammarWeights, params: &DecodingParams, rng: &'r mut ChaCha8Rng) -> Self {
        Sampler {
            dists: Choice::ALL
                .iter()
                .map(|&c| truncated_distribution(w.weights(c), params))
                .collect(),
            greedy: params.is_greedy(),
            rng,
        }
    }

    pub fn choose(&mut self, c: Choice) -> usize {
        sample_index(&self.dists[c.slot()], self.rng)
    }

    /// Uniform pick among `n` options; the last one when greedy.
    pub fn uniform(&mut self, n: usize) -> usize {
        if self.greedy {
            n - 1
        } else {
            self.rng.gen_range(0..n)
        }
    }

    /// Uniform in `[lo, hi)`; the midpoint when greedy.
    pub fn uniform_real(&mut self, lo: f64, hi: f64) -> f64 {
        let t = if self.greedy { 0.5 } else { self.rng.gen::<f64>() };
        lo + t * (hi - lo)
    }

    pub fn value(&mut self, f: ValueFamily) -> f64 {
        let bin = self.choose(Choice::Value(f));
        let (lo, _) = f.range();
        let w = f.bin_width();
        round4(self.uniform_real(lo + bin as f64 * w, lo + (bin + 1) as f64 * w))
    }

    pub fn plane(&mut self) -> Plane {
        Plane::ALL[self.choose(Choice::Plane)]
    }

    pub fn bool_op(&mut self) -> BoolOp {
        BoolOp::ALL[self.choose(Choice::BoolOp)]
    }

    pub fn workspace(&mut self) -> WorkspaceDef {
        let plane = self.plane();
        let origin = [
            self.value(ValueFamily::Origin),
            self.value(ValueFamily::Origin),
            self.value(ValueFamily::Origin),
        ];
        WorkspaceDef { plane, origin }
    }

    pub fn profile(&mut self) -> Profile {
        match self.choose(Choice::ProfileKind) {
            CIRCLE => Profile::Circle {
                cx: self.value(ValueFamily::Center),
                cy: self.value(ValueFamily::Center),
                r: self.value(ValueFamily::Radius),
            },
            RECT => Profile::Rect {
                cx: self.value(ValueFamily::Center),
                cy: self.value(ValueFamily::Center),
                w: self.value(ValueFamily::Size),
                h: self.value(ValueFamily::Size),
            },
            _ => {
                let n = MIN_SIDES + self.choose(Choice::PolygonSides);
                let cx = self.value(ValueFamily::Center);
                let cy = self.value(ValueFamily::Center);
                let step = TAU / n as f64;
                let rotation = self.uniform_real(0.0, step);
                let vertices = (0..n)
                    .map(|i| {
                        let r = self.value(ValueFamily::Radius);
                        let (s, c) = (rotation + i as f64 * step).sin_cos();
                        [round4(cx + r * c), round4(cy + r * s)]
                    })
                    .collect();
                Profile::Polygon { vertices }
            }
        }
    }

    pub fn profiles(&mut self) -> Vec<Profile> {
        let n = MIN_PROFILES + self.choose(Choice::ProfileCount);
        (0..n).map(|_| self.profile()).collect()
    }

    pub fn height(&mut self) -> f64 {
        self.value(ValueFamily::Height)
    }
}

/// Allocates `w0, w1, ...`, `s0, ...`, `b0, ...` skipping names in use.
pub(crate) struct Namer {
    taken: HashSet<String>,
    next: [usize; 3],
}

impl Namer {
    pub fn new<'a>(existing: impl IntoIterator<Item = &'a Ident>) -> Self {
        Namer {
            taken: existing.into_iter().map(|i| i.as_str().to_string()).collect(),
            next: [0; 3],
        }
    }

    fn fresh(&mut self, slot: usize, prefix: &str) -> Ident {
        loop {
            let name = format!("{prefix}{}", self.next[slot]);
            self.next[slot] += 1;
            if self.taken.insert(name.clone()) {
                return Ident::new(name).expect("generated identifiers are valid");
            }
        }
    }

    pub fn workspace(&mut self) -> Ident {
        self.fresh(0, "w")
    }

    pub fn sketch(&mut self) -> Ident {
        self.fresh(1, "s")
    }

    pub fn solid(&mut self) -> Ident {
        self.fresh(2, "b")
    }
}

/// Statements of one sketch-extrude feature on `workspace`; returns the
/// solid's id.
pub(crate) fn feature_statements(
    s: &mut Sampler<'_>,
    namer: &mut Namer,
    workspace: &Ident,
    out: &mut Vec<Statement>,
) -> Ident {
    let sketch = namer.sketch();
    out.push(Statement::new(
        sketch.clone(),
        StatementBody::Sketch(SketchDef {
            workspace: workspace.clone(),
            profiles: s.profiles(),
        }),
    ));
    let solid = namer.solid();
    out.push(Statement::new(
        solid.clone(),
        StatementBody::Extrude(ExtrudeDef {
            sketch,
            height: s.height(),
        }),
    ));
    solid
}

struct TooLong;

/// One top-down derivation. The output is canonical.
fn derive(s: &mut Sampler<'_>, max_tokens: usize) -> Result<Result<Program, crate::dsl::DslError>, TooLong> {
    let mut statements: Vec<Statement> = Vec::new();
    let mut tokens = RESULT_LINE_TOKENS;
    let mut namer = Namer::new([]);
    let mut workspaces: Vec<Ident> = Vec::new();
    let mut result: Option<Ident> = None;
    for _ in 0..MAX_FEATURES {
        let start = statements.len();
        let spawn = workspaces.is_empty() || s.choose(Choice::SpawnWorkspace) == SPAWN;
        let ws = if spawn && workspaces.len() < MAX_GENERATED_WORKSPACES {
            let id = namer.workspace();
            statements.push(Statement::new(id.clone(), StatementBody::Workspace(s.workspace())));
            workspaces.push(id.clone());
            id
        } else {
            workspaces[s.uniform(workspaces.len())].clone()
        };
        let solid = feature_statements(s, &mut namer, &ws, &mut statements);
        result = Some(match result {
            None => solid,
            Some(prev) => {
                let id = namer.solid();
                statements.push(Statement::new(
                    id.clone(),
                    StatementBody::Boolean(BooleanDef {
                        op: s.bool_op(),
                        left: prev,
                        right: solid,
                    }),
                ));
                id
            }
        });
        tokens += statements[start..].iter().map(statement_token_count).sum::<usize>();
        if tokens > max_tokens {
            return Err(TooLong);
        }
        if s.choose(Choice::ContinueFeature) == STOP {
            break;
        }
    }
    Ok(Program::new(statements, result.expect("at least one feature")))
}

/// `k` independent derivations. Over-long or invalid derivations are redrawn
/// up to [`RETRY_BUDGET`] times each.
pub fn pcfg_propose(
    w: &GrammarWeights,
    k: usize,
    params: &DecodingParams,
    seed: u64,
) -> Result<Vec<Program>, ProposerError> {
    w.validate().map_err(ProposerError::InvalidParams)?;
    params.validate().map_err(ProposerError::InvalidParams)?;
    let mut out = Vec::with_capacity(k);
    for i in 0..k {
        let program = (0..RETRY_BUDGET).find_map(|attempt| {
            let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, &[i as u64, attempt as u64]));
            let mut s = Sampler::new(w, params, &mut rng);
            derive(&mut s, params.max_tokens).ok()?.ok()
        });
        match program {
            Some(p) => out.push(p),
            None => {
                return Err(ProposerError::BudgetExhausted {
                    produced: out.len(),
                    requested: k,
                })
            }
        }
    }
    Ok(out)
}

fn bump(counts: &mut GrammarWeights, c: Choice, index: usize) {
    counts.weights_mut(c)[index] += 1.0;
}

fn bump_value(counts: &mut GrammarWeights, f: ValueFamily, v: f64) {
    bump(counts, Choice::Value(f), f.bin_of(v));
}

/// Production counts of the derivation that yields `p`'s canonical form.
/// Values are binned with clamping; profile counts and polygon side counts
/// clamp to the grammar's range.
pub fn derivation_counts(p: &Program) -> GrammarWeights {
    let mut counts = GrammarWeights::filled(0.0);
    let canon = p.canonicalize();
    let mut used_workspaces: HashSet<&Ident> = HashSet::new();
    let mut features = 0usize;
    for stmt in canon.statements() {
        match &stmt.body {
            StatementBody::Workspace(w) => {
                bump(&mut counts, Choice::Plane, Plane::ALL.iter().position(|&x| x == w.plane).unwrap());
                for &o in &w.origin {
                    bump_value(&mut counts, ValueFamily::Origin, o);
                }
            }
            StatementBody::Sketch(sk) => {
                let fresh = used_workspaces.insert(&sk.workspace);
                if features > 0 {
                    bump(&mut counts, Choice::SpawnWorkspace, if fresh { SPAWN } else { REUSE });
                }
                features += 1;
                let n = sk.profiles.len().clamp(MIN_PROFILES, MAX_PROFILES);
                bump(&mut counts, Choice::ProfileCount, n - MIN_PROFILES);
                for profile in &sk.profiles {
                    count_profile(&mut counts, profile);
                }
            }
            StatementBody::Extrude(e) => bump_value(&mut counts, ValueFamily::Height, e.height),
            StatementBody::Boolean(b) => {
                bump(&mut counts, Choice::BoolOp, BoolOp::ALL.iter().position(|&x| x == b.op).unwrap());
            }
        }
    }
    if features > 0 {
        counts.continue_feature[CONTINUE] += (features - 1) as f64;
        counts.continue_feature[STOP] += 1.0;
    }
    counts
}

fn count_profile(counts: &mut GrammarWeights, profile: &Profile) {
    match profile {
        Profile::Circle { cx, cy, r } => {
            bump(counts, Choice::ProfileKind, CIRCLE);
            bump_value(counts, ValueFamily::Center, *cx);
            bump_value(counts, ValueFamily::Center, *cy);
            bump_value(counts, ValueFamily::Radius, *r);
        }
        Profile::Rect { cx, cy, w, h } => {
            bump(counts, Choice::ProfileKind, RECT);
            bump_value(counts, ValueFamily::Center, *cx);
            bump_value(counts, ValueFamily::Center, *cy);
            bump_value(counts, ValueFamily::Size, *w);
            bump_value(counts, ValueFamily::Size, *h);
        }
        Profile::Polygon { vertices } => {
            bump(counts, Choice::ProfileKind, POLYGON);
            let n = vertices.len();
            bump(counts, Choice::PolygonSides, n.clamp(MIN_SIDES, MAX_SIDES) - MIN_SIDES);
            let cx = vertices.iter().map(|v| v[0]).sum::<f64>() / n as f64;
            let cy = vertices.iter().map(|v| v[1]).sum::<f64>() / n as f64;
            bump_value(counts, ValueFamily::Center, cx);
            bump_value(counts, ValueFamily::Center, cy);
            for v in vertices {
                bump_value(counts, ValueFamily::Radius, (v[0] - cx).hypot(v[1] - cy));
            }
        }
    }
}

/// Adds the production counts of every program to `w`. Starting from the
/// all-ones default this is add-one smoothing.
pub fn pcfg_update<'a>(w: &GrammarWeights, programs: impl IntoIterator<Item = &'a Program>) -> GrammarWeights {
    let mut out = w.clone();
    for p in programs {
        out.add(&derivation_counts(p));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bins_clamp() {
        assert_eq!(ValueFamily::Origin.bin_of(-5.0), 0);
        assert_eq!(ValueFamily::Origin.bin_of(1.0), VALUE_BINS - 1);
        assert_eq!(ValueFamily::Origin.bin_of(0.0), 8);
        assert_eq!(ValueFamily::Origin.bin_of(f64::NAN), 0);
    }

    #[test]
    fn derivations_are_canonical_and_recountable() {
        let w = GrammarWeights::default();
        let programs = pcfg_propose(&w, 40, &DecodingParams::default(), 9).unwrap();
        for p in &programs {
            assert!(p.is_canonical());
            assert!(p.count_tokens() <= 1200);
            let c = derivation_counts(p);
            let features: f64 = c.continue_feature.iter().sum::<f64>();
            assert_eq!(features, c.height.iter().sum::<f64>());
            assert_eq!(c.bool_op.iter().sum::<f64>(), features - 1.0);
        }
    }

    #[test]
    fn greedy_programs_identical() {
        let w = GrammarWeights::default();
        let params = DecodingParams {
            temperature: 1e-9,
            ..DecodingParams::default()
        };
        let programs = pcfg_propose(&w, 5, &params, 1).unwrap();
        assert!(programs.windows(2).all(|p| p[0] == p[1]));
    }

    #[test]
    fn tight_token_cap_exhausts_budget() {
        let params = DecodingParams {
            max_tokens: 10,
            ..DecodingParams::default()
        };
        assert!(matches!(
            pcfg_propose(&GrammarWeights::default(), 1, &params, 0),
            Err(ProposerError::BudgetExhausted { produced: 0, requested: 1 })
        ));
    }
}
