use std::fmt::Write;

use super::{Profile, Program, Statement, StatementBody};

/// Canonical text: dead statements dropped, dependency order, one statement
/// per line, no trailing newline. Numbers use the shortest representation
/// that parses back to the same `f64`.
pub fn print(p: &Program) -> String {
    let canon = p.canonicalize();
    let mut out = String::new();
    for stmt in canon.statements() {
        write_statement(&mut out, stmt);
        out.push('\n');
    }
    let _ = write!(out, "result({})", canon.result());
    out
}

fn write_statement(out: &mut String, stmt: &Statement) {
    let _ = write!(out, "{}=", stmt.id);
    match &stmt.body {
        StatementBody::Workspace(w) => {
            let [x, y, z] = w.origin;
            let _ = write!(out, "workspace({},{x},{y},{z})", w.plane.keyword());
        }
        StatementBody::Sketch(s) => {
            let _ = write!(out, "sketch({}", s.workspace);
            for profile in &s.profiles {
                out.push(',');
                write_profile(out, profile);
            }
            out.push(')');
        }
        StatementBody::Extrude(e) => {
            let _ = write!(out, "extrude({},{})", e.sketch, e.height);
        }
        StatementBody::Boolean(b) => {
            let _ = write!(out, "{}({},{})", b.op.keyword(), b.left, b.right);
        }
    }
}

fn write_profile(out: &mut String, profile: &Profile) {
    match profile {
        Profile::Circle { cx, cy, r } => {
            let _ = write!(out, "circle({cx},{cy},{r})");
        }
        Profile::Rect { cx, cy, w, h } => {
            let _ = write!(out, "rect({cx},{cy},{w},{h})");
        }
        Profile::Polygon { vertices } => {
            out.push_str("polygon(");
            for (i, [x, y]) in vertices.iter().enumerate() {
                if i > 0 {
                    out.push(',');
                }
                let _ = write!(out, "{x},{y}");
            }
            out.push(')');
        }
    }
}

/// Lexemes contributed by one printed statement line.
pub fn statement_token_count(stmt: &Statement) -> usize {
    // `id = head (` ... `)`
    const FRAME: usize = 5;
    match &stmt.body {
        // PLANE , n , n , n
        StatementBody::Workspace(_) => FRAME + 7,
        // ws { , profile }
        StatementBody::Sketch(s) => {
            FRAME + 1 + s.profiles.iter().map(|p| 1 + profile_tokens(p)).sum::<usize>()
        }
        // id , n
        StatementBody::Extrude(_) => FRAME + 3,
        // id , id
        StatementBody::Boolean(_) => FRAME + 3,
    }
}

fn profile_tokens(p: &Profile) -> usize {
    // head ( args )
    match p {
        Profile::Circle { .. } => 3 + 5,
        Profile::Rect { .. } => 3 + 7,
        Profile::Polygon { vertices } => 3 + 4 * vertices.len() - 1,
    }
}
