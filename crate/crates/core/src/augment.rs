//! Program-level augmentation: expansion by an extra sketch-extrude feature,
//! shortening by dropping the root boolean.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dsl::{BooleanDef, Ident, Kind, Program, Statement, StatementBody, WorkspaceDef};
use crate::geometry::{
    execute, is_nonempty, normalize_unit_box, surface_sample, GeometryError, PointCloud, Similarity,
};
use crate::proposer::grammar::{feature_statements, round4, Namer, Sampler, SPAWN};
use crate::proposer::{Choice, DecodingParams, GrammarWeights};
use crate::seed::{derive_seed, stream};

/// New workspaces are placed within the program's bounding box scaled by
/// this factor about its center.
pub const SPAWN_REGION_SCALE: f64 = 1.5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AugmentConfig {
    pub w_max: usize,
    pub max_expand_variants: usize,
    /// Weights used to generate appended features.
    #[serde(skip)]
    pub feature_generator: GrammarWeights,
    pub token_cap: usize,
}

impl Default for AugmentConfig {
    fn default() -> Self {
        AugmentConfig {
            w_max: 5,
            max_expand_variants: 3,
            feature_generator: GrammarWeights::default(),
            token_cap: 1200,
        }
    }
}

impl AugmentConfig {
    pub fn validate(&self) -> Result<(), String> {
        if self.w_max == 0 {
            return Err("w_max must be at least 1".into());
        }
        if self.token_cap == 0 {
            return Err("token_cap must be positive".into());
        }
        self.feature_generator.validate()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExpandStrategy {
    /// New feature on a workspace the program already has.
    AppendExisting,
    /// New feature on a freshly placed workspace.
    SpawnWorkspace,
}

/// Up to `cfg.max_expand_variants` longer programs, each combining `p`'s
/// result with one new feature through a random boolean. Variants over the
/// workspace or token cap, or executing to nothing, are dropped.
pub fn expand(p: &Program, cfg: &AugmentConfig, seed: u64) -> Vec<Program> {
    expand_with_strategy(p, cfg, seed, None)
}

/// [`expand`] with the strategy fixed instead of drawn per variant.
pub fn expand_with_strategy(
    p: &Program,
    cfg: &AugmentConfig,
    seed: u64,
    strategy: Option<ExpandStrategy>,
) -> Vec<Program> {
    let canon = p.canonicalize();
    let Some(bbox) = execute(&canon).ok().and_then(|o| o.bbox()) else {
        return Vec::new();
    };
    let region = bbox.scaled_about_center(SPAWN_REGION_SCALE);
    let base_tokens = canon.count_tokens();
    let base_workspaces = canon.workspace_count();
    let workspaces: Vec<Ident> = canon
        .statements()
        .iter()
        .filter(|s| s.body.kind() == Kind::Workspace)
        .map(|s| s.id.clone())
        .collect();
    let params = DecodingParams::untruncated(cfg.token_cap);

    let mut out = Vec::new();
    for i in 0..cfg.max_expand_variants {
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, &[stream::EXPAND, i as u64]));
        let mut s = Sampler::new(&cfg.feature_generator, &params, &mut rng);
        let strategy = strategy.unwrap_or_else(|| {
            if s.choose(Choice::SpawnWorkspace) == SPAWN {
                ExpandStrategy::SpawnWorkspace
            } else {
                ExpandStrategy::AppendExisting
            }
        });
        let mut namer = Namer::new(canon.idents());
        let mut statements = canon.statements().to_vec();
        let workspace = match strategy {
            ExpandStrategy::AppendExisting => workspaces[s.uniform(workspaces.len())].clone(),
            ExpandStrategy::SpawnWorkspace => {
                if base_workspaces >= cfg.w_max {
                    continue;
                }
                let plane = s.plane();
                let origin = [
                    round4(s.uniform_real(region.min.x, region.max.x)),
                    round4(s.uniform_real(region.min.y, region.max.y)),
                    round4(s.uniform_real(region.min.z, region.max.z)),
                ];
                let id = namer.workspace();
                statements.push(Statement::new(
                    id.clone(),
                    StatementBody::Workspace(WorkspaceDef { plane, origin }),
                ));
                id
            }
        };
        let solid = feature_statements(&mut s, &mut namer, &workspace, &mut statements);
        let root = namer.solid();
        statements.push(Statement::new(
            root.clone(),
            StatementBody::Boolean(BooleanDef {
                op: s.bool_op(),
                left: canon.result().clone(),
                right: solid,
            }),
        ));
        let Ok(variant) = Program::new(statements, root) else {
            continue;
        };
        let tokens = variant.count_tokens();
        if variant.workspace_count() > cfg.w_max || tokens > cfg.token_cap || tokens <= base_tokens {
            continue;
        }
        if execute(&variant).map(|o| is_nonempty(&o)).unwrap_or(false) {
            out.push(variant);
        }
    }
    out
}

/// Re-roots the result at each operand of a root boolean; empty when the
/// result is not a boolean.
pub fn shorten(p: &Program) -> Vec<Program> {
    match &p.result_statement().body {
        StatementBody::Boolean(b) => [&b.left, &b.right]
            .into_iter()
            .map(|root| {
                Program::new(p.statements().to_vec(), root.clone())
                    .expect("operands of a valid boolean are solids")
                    .canonicalize()
            })
            .collect(),
        _ => Vec::new(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum VariantKind {
    Original,
    Expand,
    Shorten,
}

/// A program paired with a normalized sample of its own execution.
#[derive(Debug, Clone)]
pub struct Variant {
    pub kind: VariantKind,
    pub program: Program,
    pub cloud: PointCloud,
    /// Maps the program's model coordinates onto `cloud`'s frame.
    pub normalization: Similarity,
}

fn sampled_variant(kind: VariantKind, program: Program, m: usize, seed: u64) -> Result<Variant, GeometryError> {
    let oracle = execute(&program)?;
    let sample = surface_sample(&oracle, m, seed)?;
    let (cloud, normalization) = normalize_unit_box(&sample)?;
    Ok(Variant {
        kind,
        program,
        cloud,
        normalization,
    })
}

/// `p` (canonicalized), its expansions and its shortenings, each with a
/// fresh `m`-point sample. Only a failure of `p` itself is an error;
/// variants that fail to sample are skipped.
pub fn diversify(p: &Program, cfg: &AugmentConfig, m: usize, seed: u64) -> Result<Vec<Variant>, GeometryError> {
    let canon = p.canonicalize();
    let sample_seed = |j: usize| derive_seed(seed, &[stream::DIVERSIFY, j as u64]);
    let mut out = vec![sampled_variant(VariantKind::Original, canon.clone(), m, sample_seed(0))?];
    let expanded = expand(&canon, cfg, derive_seed(seed, &[stream::EXPAND]));
    let shortened = shorten(&canon);
    let candidates = expanded
        .into_iter()
        .map(|v| (VariantKind::Expand, v))
        .chain(shortened.into_iter().map(|v| (VariantKind::Shorten, v)));
    for (j, (kind, program)) in candidates.enumerate() {
        if let Ok(v) = sampled_variant(kind, program, m, sample_seed(j + 1)) {
            out.push(v);
        }
    }
    Ok(out)
}
