//! The sketch-extrude CAD language.
//!
//! A program is a flat list of single-assignment statements followed by a
//! `result(<id>)` terminator:
//!
//! ```text
//! w0=workspace(XY,0,0,0)
//! s0=sketch(w0,circle(0,0,0.4))
//! b0=extrude(s0,0.5)
//! result(b0)
//! ```
//!
//! Workspaces are axis-aligned planes with a translated origin, sketches hold
//! one or more closed profiles combined by the even-odd rule, extrudes sweep a
//! sketch along the workspace normal, and booleans combine solids.

mod lexer;
mod parser;
mod printer;

use std::collections::{HashMap, HashSet};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::planar;

pub use lexer::{tokenize, Token, TokenKind};
pub use parser::parse;
pub use printer::{print, statement_token_count};

/// Words with syntactic meaning; they can never be identifiers.
pub const KEYWORDS: &[&str] = &[
    "workspace", "sketch", "extrude", "union", "cut", "intersect", "circle", "rect", "polygon",
    "result",
];

/// Identifier matching `[a-z][a-z0-9_]*` that is not a keyword.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Ident(String);

impl Ident {
    pub fn new(name: impl Into<String>) -> Result<Self, DslError> {
        let name = name.into();
        if !Self::is_valid(&name) {
            return Err(DslError::semantic(&name, SemanticReason::InvalidIdentifier));
        }
        Ok(Ident(name))
    }

    pub fn is_valid(name: &str) -> bool {
        let mut chars = name.chars();
        match chars.next() {
            Some(c) if c.is_ascii_lowercase() => {}
            _ => return false,
        }
        chars.all(|c| c.is_ascii_lowercase() || c.is_ascii_digit() || c == '_')
            && !KEYWORDS.contains(&name)
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for Ident {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Plane {
    XY,
    YZ,
    ZX,
}

impl Plane {
    pub const ALL: [Plane; 3] = [Plane::XY, Plane::YZ, Plane::ZX];

    pub fn keyword(self) -> &'static str {
        match self {
            Plane::XY => "XY",
            Plane::YZ => "YZ",
            Plane::ZX => "ZX",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct WorkspaceDef {
    pub plane: Plane,
    pub origin: [f64; 3],
}

/// A closed 2D region in workspace coordinates.
#[derive(Debug, Clone, PartialEq)]
pub enum Profile {
    Circle { cx: f64, cy: f64, r: f64 },
    /// Axis-aligned rectangle given by center and full width/height.
    Rect { cx: f64, cy: f64, w: f64, h: f64 },
    Polygon { vertices: Vec<[f64; 2]> },
}

impl Profile {
    pub fn kind_name(&self) -> &'static str {
        match self {
            Profile::Circle { .. } => "circle",
            Profile::Rect { .. } => "rect",
            Profile::Polygon { .. } => "polygon",
        }
    }

    pub fn contains(&self, u: f64, v: f64) -> bool {
        match *self {
            Profile::Circle { cx, cy, r } => {
                let (du, dv) = (u - cx, v - cy);
                du * du + dv * dv <= r * r
            }
            Profile::Rect { cx, cy, w, h } => {
                (u - cx).abs() <= 0.5 * w && (v - cy).abs() <= 0.5 * h
            }
            Profile::Polygon { ref vertices } => planar::point_in_polygon([u, v], vertices),
        }
    }

    pub fn area(&self) -> f64 {
        match *self {
            Profile::Circle { r, .. } => std::f64::consts::PI * r * r,
            Profile::Rect { w, h, .. } => w * h,
            Profile::Polygon { ref vertices } => planar::signed_area(vertices).abs(),
        }
    }

    /// Axis-aligned 2D bounds as `(min, max)`.
    pub fn bounds(&self) -> ([f64; 2], [f64; 2]) {
        match *self {
            Profile::Circle { cx, cy, r } => ([cx - r, cy - r], [cx + r, cy + r]),
            Profile::Rect { cx, cy, w, h } => {
                ([cx - 0.5 * w, cy - 0.5 * h], [cx + 0.5 * w, cy + 0.5 * h])
            }
            Profile::Polygon { ref vertices } => {
                let mut lo = [f64::INFINITY; 2];
                let mut hi = [f64::NEG_INFINITY; 2];
                for v in vertices {
                    for a in 0..2 {
                        lo[a] = lo[a].min(v[a]);
                        hi[a] = hi[a].max(v[a]);
                    }
                }
                (lo, hi)
            }
        }
    }

    fn check(&self) -> Result<(), String> {
        match *self {
            Profile::Circle { cx, cy, r } => {
                finite(&[cx, cy, r])?;
                if r <= 0.0 {
                    return Err(format!("circle radius must be positive, got {r}"));
                }
            }
            Profile::Rect { cx, cy, w, h } => {
                finite(&[cx, cy, w, h])?;
                if w <= 0.0 || h <= 0.0 {
                    return Err(format!("rect size must be positive, got {w}x{h}"));
                }
            }
            Profile::Polygon { ref vertices } => {
                for v in vertices {
                    finite(v)?;
                }
                if vertices.len() < 3 {
                    return Err(format!("polygon needs at least 3 vertices, got {}", vertices.len()));
                }
                if planar::signed_area(vertices).abs() <= f64::MIN_POSITIVE {
                    return Err("polygon has zero area".into());
                }
                if !planar::is_simple(vertices) {
                    return Err("polygon is self-intersecting".into());
                }
            }
        }
        Ok(())
    }
}

fn finite(values: &[f64]) -> Result<(), String> {
    match values.iter().find(|v| !v.is_finite()) {
        Some(v) => Err(format!("non-finite literal {v}")),
        None => Ok(()),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SketchDef {
    pub workspace: Ident,
    pub profiles: Vec<Profile>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExtrudeDef {
    pub sketch: Ident,
    pub height: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BoolOp {
    Union,
    Cut,
    Intersect,
}

impl BoolOp {
    pub const ALL: [BoolOp; 3] = [BoolOp::Union, BoolOp::Cut, BoolOp::Intersect];

    pub fn keyword(self) -> &'static str {
        match self {
            BoolOp::Union => "union",
            BoolOp::Cut => "cut",
            BoolOp::Intersect => "intersect",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BooleanDef {
    pub op: BoolOp,
    pub left: Ident,
    pub right: Ident,
}

#[derive(Debug, Clone, PartialEq)]
pub enum StatementBody {
    Workspace(WorkspaceDef),
    Sketch(SketchDef),
    Extrude(ExtrudeDef),
    Boolean(BooleanDef),
}

/// Namespace an identifier lives in, fixed by the statement that defines it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Kind {
    Workspace,
    Sketch,
    Solid,
}

impl fmt::Display for Kind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Kind::Workspace => "workspace",
            Kind::Sketch => "sketch",
            Kind::Solid => "solid",
        })
    }
}

impl StatementBody {
    pub fn kind(&self) -> Kind {
        match self {
            StatementBody::Workspace(_) => Kind::Workspace,
            StatementBody::Sketch(_) => Kind::Sketch,
            StatementBody::Extrude(_) | StatementBody::Boolean(_) => Kind::Solid,
        }
    }

    /// Referenced identifiers with the kind each must have.
    pub fn references(&self) -> Vec<(&Ident, Kind)> {
        match self {
            StatementBody::Workspace(_) => vec![],
            StatementBody::Sketch(s) => vec![(&s.workspace, Kind::Workspace)],
            StatementBody::Extrude(e) => vec![(&e.sketch, Kind::Sketch)],
            StatementBody::Boolean(b) => vec![(&b.left, Kind::Solid), (&b.right, Kind::Solid)],
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Statement {
    pub id: Ident,
    pub body: StatementBody,
}

impl Statement {
    pub fn new(id: Ident, body: StatementBody) -> Self {
        Statement { id, body }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SemanticReason {
    Undefined,
    Duplicate,
    KindMismatch { expected: Kind, found: Kind },
    InvalidIdentifier,
    Invariant(String),
}

impl fmt::Display for SemanticReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SemanticReason::Undefined => f.write_str("undefined id"),
            SemanticReason::Duplicate => f.write_str("duplicate id"),
            SemanticReason::KindMismatch { expected, found } => {
                write!(f, "kind mismatch (expected {expected}, found {found})")
            }
            SemanticReason::InvalidIdentifier => f.write_str("invalid identifier"),
            SemanticReason::Invariant(msg) => write!(f, "invariant violation: {msg}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DslError {
    #[error("syntax error at {line}:{column}: expected {expected}, found {found}")]
    Syntax {
        line: usize,
        column: usize,
        expected: String,
        found: String,
    },
    #[error("semantic error: {reason} `{ident}`")]
    Semantic { ident: String, reason: SemanticReason },
}

impl DslError {
    pub(crate) fn semantic(ident: &str, reason: SemanticReason) -> Self {
        DslError::Semantic {
            ident: ident.to_string(),
            reason,
        }
    }

    /// The identifier a semantic error is about.
    pub fn ident(&self) -> Option<&str> {
        match self {
            DslError::Semantic { ident, .. } => Some(ident),
            DslError::Syntax { .. } => None,
        }
    }
}

/// A validated sketch-extrude program. Immutable once built.
#[derive(Debug, Clone, PartialEq)]
pub struct Program {
    statements: Vec<Statement>,
    result: Ident,
}

impl Program {
    /// Builds a program, checking every structural and value invariant.
    pub fn new(statements: Vec<Statement>, result: Ident) -> Result<Self, DslError> {
        validate(&statements, &result)?;
        Ok(Program { statements, result })
    }

    pub fn statements(&self) -> &[Statement] {
        &self.statements
    }

    pub fn result(&self) -> &Ident {
        &self.result
    }

    pub fn get(&self, id: &Ident) -> Option<&Statement> {
        self.statements.iter().find(|s| &s.id == id)
    }

    pub fn result_statement(&self) -> &Statement {
        self.get(&self.result)
            .expect("validated program defines its result")
    }

    /// Dead statements removed, remaining statements in dependency
    /// post-order from the result (left operand before right).
    pub fn canonicalize(&self) -> Program {
        let index: HashMap<&Ident, usize> = self
            .statements
            .iter()
            .enumerate()
            .map(|(i, s)| (&s.id, i))
            .collect();
        let mut order = Vec::with_capacity(self.statements.len());
        let mut done = HashSet::new();
        let mut stack = vec![(index[&self.result], false)];
        while let Some((i, expanded)) = stack.pop() {
            if done.contains(&i) {
                continue;
            }
            if expanded {
                done.insert(i);
                order.push(i);
                continue;
            }
            stack.push((i, true));
            let refs = self.statements[i].body.references();
            for (id, _) in refs.into_iter().rev() {
                let j = index[id];
                if !done.contains(&j) {
                    stack.push((j, false));
                }
            }
        }
        Program {
            statements: order.into_iter().map(|i| self.statements[i].clone()).collect(),
            result: self.result.clone(),
        }
    }

    pub fn is_canonical(&self) -> bool {
        self.canonicalize() == *self
    }

    /// Lexeme count of the canonical text.
    pub fn count_tokens(&self) -> usize {
        let canon = self.canonicalize();
        canon
            .statements
            .iter()
            .map(statement_token_count)
            .sum::<usize>()
            + RESULT_LINE_TOKENS
    }

    /// Number of workspaces reachable from the result.
    pub fn workspace_count(&self) -> usize {
        self.canonicalize()
            .statements
            .iter()
            .filter(|s| s.body.kind() == Kind::Workspace)
            .count()
    }

    /// Height of the boolean tree above the extrudes (a single extrude is 0).
    pub fn boolean_depth(&self) -> usize {
        let mut depth: HashMap<&Ident, usize> = HashMap::new();
        for s in &self.statements {
            let d = match &s.body {
                StatementBody::Boolean(b) => 1 + depth[&b.left].max(depth[&b.right]),
                _ => 0,
            };
            depth.insert(&s.id, d);
        }
        depth[&self.result]
    }

    /// Every identifier defined by the program.
    pub fn idents(&self) -> impl Iterator<Item = &Ident> {
        self.statements.iter().map(|s| &s.id)
    }

    /// Text form, see [`print`].
    pub fn to_text(&self) -> String {
        print(self)
    }
}

impl fmt::Display for Program {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&print(self))
    }
}

impl std::str::FromStr for Program {
    type Err = DslError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        parse(s)
    }
}

/// `result ( ID )`
/// Tokens on the `result(id)` line.
pub const RESULT_LINE_TOKENS: usize = 4;

fn validate(statements: &[Statement], result: &Ident) -> Result<(), DslError> {
    let mut kinds: HashMap<&Ident, Kind> = HashMap::new();
    for stmt in statements {
        if kinds.contains_key(&stmt.id) {
            return Err(DslError::semantic(stmt.id.as_str(), SemanticReason::Duplicate));
        }
        for (id, expected) in stmt.body.references() {
            match kinds.get(id) {
                None => return Err(DslError::semantic(id.as_str(), SemanticReason::Undefined)),
                Some(&found) if found != expected => {
                    return Err(DslError::semantic(
                        id.as_str(),
                        SemanticReason::KindMismatch { expected, found },
                    ))
                }
                Some(_) => {}
            }
        }
        check_body(&stmt.body)
            .map_err(|msg| DslError::semantic(stmt.id.as_str(), SemanticReason::Invariant(msg)))?;
        kinds.insert(&stmt.id, stmt.body.kind());
    }
    match kinds.get(result) {
        None => Err(DslError::semantic(result.as_str(), SemanticReason::Undefined)),
        Some(&Kind::Solid) => Ok(()),
        Some(&found) => Err(DslError::semantic(
            result.as_str(),
            SemanticReason::KindMismatch {
                expected: Kind::Solid,
                found,
            },
        )),
    }
}

fn check_body(body: &StatementBody) -> Result<(), String> {
    match body {
        StatementBody::Workspace(w) => finite(&w.origin),
        StatementBody::Sketch(s) => {
            if s.profiles.is_empty() {
                return Err("sketch has no profiles".into());
            }
            s.profiles.iter().try_for_each(Profile::check)
        }
        StatementBody::Extrude(e) => {
            finite(&[e.height])?;
            if e.height <= 0.0 {
                return Err(format!("extrude height must be positive, got {}", e.height));
            }
            Ok(())
        }
        StatementBody::Boolean(_) => Ok(()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str =
        "w0=workspace(XY,0,0,0)\ns0=sketch(w0,circle(0,0,0.4))\nb0=extrude(s0,0.5)\nresult(b0)";

    #[test]
    fn minimal_program_parses() {
        let p = parse(MINIMAL).unwrap();
        assert_eq!(p.statements().len(), 3);
        assert_eq!(p.result().as_str(), "b0");
        assert_eq!(p.workspace_count(), 1);
    }

    #[test]
    fn minimal_program_token_count_is_frozen() {
        // w0 = workspace ( XY , 0 , 0 , 0 )        -> 12
        // s0 = sketch ( w0 , circle ( 0 , 0 , 0.4 ) ) -> 15
        // b0 = extrude ( s0 , 0.5 )                 -> 8
        // result ( b0 )                             -> 4
        assert_eq!(parse(MINIMAL).unwrap().count_tokens(), 39);
        assert_eq!(tokenize(MINIMAL).unwrap().len(), 39);
    }

    #[test]
    fn dangling_result_is_semantic_error() {
        let err = parse("result(b0)").unwrap_err();
        assert_eq!(
            err,
            DslError::Semantic {
                ident: "b0".into(),
                reason: SemanticReason::Undefined
            }
        );
    }

    #[test]
    fn duplicate_and_kind_errors_name_the_identifier() {
        let dup = "w0=workspace(XY,0,0,0)\nw0=workspace(XY,0,0,0)\ns0=sketch(w0,circle(0,0,1))\nb0=extrude(s0,1)\nresult(b0)";
        assert_eq!(parse(dup).unwrap_err().ident(), Some("w0"));
        let kind = "w0=workspace(XY,0,0,0)\ns0=sketch(w0,circle(0,0,1))\nb0=extrude(w0,1)\nresult(b0)";
        let err = parse(kind).unwrap_err();
        assert!(matches!(
            err,
            DslError::Semantic {
                reason: SemanticReason::KindMismatch {
                    expected: Kind::Sketch,
                    found: Kind::Workspace
                },
                ..
            }
        ));
        let res = "w0=workspace(XY,0,0,0)\ns0=sketch(w0,circle(0,0,1))\nresult(s0)";
        assert_eq!(parse(res).unwrap_err().ident(), Some("s0"));
    }

    #[test]
    fn invariant_violations_rejected() {
        for bad in [
            "w0=workspace(XY,0,0,0)\ns0=sketch(w0,circle(0,0,0))\nb0=extrude(s0,1)\nresult(b0)",
            "w0=workspace(XY,0,0,0)\ns0=sketch(w0,rect(0,0,-1,1))\nb0=extrude(s0,1)\nresult(b0)",
            "w0=workspace(XY,0,0,0)\ns0=sketch(w0,circle(0,0,1))\nb0=extrude(s0,0)\nresult(b0)",
            "w0=workspace(XY,0,0,0)\ns0=sketch(w0,polygon(0,0,1,1))\nb0=extrude(s0,1)\nresult(b0)",
            "w0=workspace(XY,0,0,0)\ns0=sketch(w0,polygon(0,0,1,1,1,0,0,1))\nb0=extrude(s0,1)\nresult(b0)",
            "w0=workspace(XY,0,0,1e999)\ns0=sketch(w0,circle(0,0,1))\nb0=extrude(s0,1)\nresult(b0)",
            "w0=workspace(XY,0,0,0)\ns0=sketch(w0)\nb0=extrude(s0,1)\nresult(b0)",
        ] {
            let err = parse(bad).unwrap_err();
            assert!(
                matches!(
                    err,
                    DslError::Semantic {
                        reason: SemanticReason::Invariant(_),
                        ..
                    }
                ),
                "{bad}: {err:?}"
            );
        }
    }

    #[test]
    fn canonicalize_drops_dead_extrude() {
        let text = "w0=workspace(XY,0,0,0)\ns0=sketch(w0,circle(0,0,0.4))\nb9=extrude(s0,2)\nb0=extrude(s0,0.5)\nresult(b0)";
        let p = parse(text).unwrap();
        let c = p.canonicalize();
        assert_eq!(c.statements().len(), 3);
        assert!(c.get(&Ident::new("b9").unwrap()).is_none());
        assert_eq!(c.canonicalize(), c);
        assert_eq!(print(&p), MINIMAL);
    }

    #[test]
    fn boolean_depth_counts_levels() {
        let text = "w0=workspace(XY,0,0,0)\ns0=sketch(w0,circle(0,0,0.4))\nb0=extrude(s0,0.5)\nb1=union(b0,b0)\nb2=cut(b1,b0)\nresult(b2)";
        assert_eq!(parse(text).unwrap().boolean_depth(), 2);
        assert_eq!(parse(MINIMAL).unwrap().boolean_depth(), 0);
    }

    #[test]
    fn keywords_are_not_identifiers() {
        assert!(Ident::new("union").is_err());
        assert!(Ident::new("B0").is_err());
        assert!(Ident::new("0b").is_err());
        assert!(Ident::new("b_0x").is_ok());
    }
}
