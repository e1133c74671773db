use super::lexer::{tokenize, Token, TokenKind};
use super::{
    BoolOp, BooleanDef, DslError, ExtrudeDef, Ident, Plane, Profile, Program, SketchDef,
    Statement, StatementBody, WorkspaceDef,
};

/// Parses and validates program text.
pub fn parse(text: &str) -> Result<Program, DslError> {
    let tokens = tokenize(text)?;
    let mut p = Parser {
        tokens: &tokens,
        pos: 0,
        end: end_position(text),
    };
    let (statements, result) = p.program()?;
    Program::new(statements, result)
}

fn end_position(text: &str) -> (usize, usize) {
    let line = text.matches('\n').count() + 1;
    let column = text.rsplit('\n').next().map_or(0, str::len) + 1;
    (line, column)
}

struct Parser<'a> {
    tokens: &'a [Token],
    pos: usize,
    end: (usize, usize),
}

impl Parser<'_> {
    fn peek(&self) -> Option<&TokenKind> {
        self.tokens.get(self.pos).map(|t| &t.kind)
    }

    fn error(&self, expected: &str) -> DslError {
        let (line, column, found) = match self.tokens.get(self.pos) {
            Some(t) => (t.line, t.column, t.kind.describe()),
            None => (self.end.0, self.end.1, "end of input".to_string()),
        };
        DslError::Syntax {
            line,
            column,
            expected: expected.to_string(),
            found,
        }
    }

    fn expect(&mut self, kind: TokenKind) -> Result<(), DslError> {
        if self.peek() == Some(&kind) {
            self.pos += 1;
            Ok(())
        } else {
            Err(self.error(&kind.describe()))
        }
    }

    fn word(&mut self, expected: &str) -> Result<&str, DslError> {
        match self.tokens.get(self.pos) {
            Some(Token {
                kind: TokenKind::Word(w),
                ..
            }) => {
                self.pos += 1;
                Ok(w.as_str())
            }
            _ => Err(self.error(expected)),
        }
    }

    fn ident(&mut self) -> Result<Ident, DslError> {
        let at = self.pos;
        let w = self.word("identifier")?;
        if Ident::is_valid(w) {
            Ok(Ident(w.to_string()))
        } else {
            self.pos = at;
            Err(self.error("identifier"))
        }
    }

    fn number(&mut self) -> Result<f64, DslError> {
        match self.peek() {
            Some(&TokenKind::Number(v)) => {
                self.pos += 1;
                Ok(v)
            }
            _ => Err(self.error("number")),
        }
    }

    fn comma(&mut self) -> Result<(), DslError> {
        self.expect(TokenKind::Comma)
    }

    fn program(&mut self) -> Result<(Vec<Statement>, Ident), DslError> {
        let mut statements = Vec::new();
        loop {
            let is_result = matches!(self.peek(), Some(TokenKind::Word(w)) if w == "result")
                && matches!(
                    self.tokens.get(self.pos + 1).map(|t| &t.kind),
                    Some(TokenKind::LParen)
                );
            if is_result {
                self.pos += 2;
                let id = self.ident()?;
                self.expect(TokenKind::RParen)?;
                if self.pos != self.tokens.len() {
                    return Err(self.error("end of input"));
                }
                return Ok((statements, id));
            }
            if self.peek().is_none() {
                return Err(self.error("`result`"));
            }
            statements.push(self.statement()?);
        }
    }

    fn statement(&mut self) -> Result<Statement, DslError> {
        let id = self.ident()?;
        self.expect(TokenKind::Eq)?;
        let at = self.pos;
        let head = self.word("statement keyword")?.to_string();
        self.expect(TokenKind::LParen)?;
        let body = match head.as_str() {
            "workspace" => {
                let plane = match self.word("plane")? {
                    "XY" => Plane::XY,
                    "YZ" => Plane::YZ,
                    "ZX" => Plane::ZX,
                    _ => {
                        self.pos -= 1;
                        return Err(self.error("plane (XY, YZ or ZX)"));
                    }
                };
                let mut origin = [0.0; 3];
                for o in &mut origin {
                    self.comma()?;
                    *o = self.number()?;
                }
                StatementBody::Workspace(WorkspaceDef { plane, origin })
            }
            "sketch" => {
                let workspace = self.ident()?;
                let mut profiles = Vec::new();
                while self.peek() == Some(&TokenKind::Comma) {
                    self.pos += 1;
                    profiles.push(self.profile()?);
                }
                StatementBody::Sketch(SketchDef { workspace, profiles })
            }
            "extrude" => {
                let sketch = self.ident()?;
                self.comma()?;
                let height = self.number()?;
                StatementBody::Extrude(ExtrudeDef { sketch, height })
            }
            "union" | "cut" | "intersect" => {
                let op = match head.as_str() {
                    "union" => BoolOp::Union,
                    "cut" => BoolOp::Cut,
                    _ => BoolOp::Intersect,
                };
                let left = self.ident()?;
                self.comma()?;
                let right = self.ident()?;
                StatementBody::Boolean(BooleanDef { op, left, right })
            }
            _ => {
                self.pos = at;
                return Err(self.error("workspace, sketch, extrude, union, cut or intersect"));
            }
        };
        self.expect(TokenKind::RParen)?;
        Ok(Statement { id, body })
    }

    fn profile(&mut self) -> Result<Profile, DslError> {
        let at = self.pos;
        let head = self.word("profile")?.to_string();
        self.expect(TokenKind::LParen)?;
        let profile = match head.as_str() {
            "circle" => {
                let cx = self.number()?;
                self.comma()?;
                let cy = self.number()?;
                self.comma()?;
                let r = self.number()?;
                Profile::Circle { cx, cy, r }
            }
            "rect" => {
                let cx = self.number()?;
                self.comma()?;
                let cy = self.number()?;
                self.comma()?;
                let w = self.number()?;
                self.comma()?;
                let h = self.number()?;
                Profile::Rect { cx, cy, w, h }
            }
            "polygon" => {
                let mut vertices = Vec::new();
                loop {
                    let x = self.number()?;
                    self.comma()?;
                    let y = self.number()?;
                    vertices.push([x, y]);
                    if self.peek() == Some(&TokenKind::Comma) {
                        self.pos += 1;
                    } else {
                        break;
                    }
                }
                Profile::Polygon { vertices }
            }
            _ => {
                self.pos = at;
                return Err(self.error("circle, rect or polygon"));
            }
        };
        self.expect(TokenKind::RParen)?;
        Ok(profile)
    }
}
