use super::DslError;

#[derive(Debug, Clone, PartialEq)]
pub enum TokenKind {
    /// Any alphanumeric word; the parser decides whether it is an
    /// identifier, a keyword or a plane name.
    Word(String),
    Number(f64),
    Eq,
    LParen,
    RParen,
    Comma,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Token {
    pub kind: TokenKind,
    pub line: usize,
    pub column: usize,
}

impl TokenKind {
    pub fn describe(&self) -> String {
        match self {
            TokenKind::Word(w) => format!("`{w}`"),
            TokenKind::Number(n) => format!("number {n}"),
            TokenKind::Eq => "`=`".into(),
            TokenKind::LParen => "`(`".into(),
            TokenKind::RParen => "`)`".into(),
            TokenKind::Comma => "`,`".into(),
        }
    }
}

/// Splits text into lexemes. Whitespace (including newlines) separates
/// tokens and is otherwise ignored.
pub fn tokenize(text: &str) -> Result<Vec<Token>, DslError> {
    let bytes = text.as_bytes();
    let mut tokens = Vec::new();
    let (mut i, mut line, mut line_start) = (0usize, 1usize, 0usize);
    while i < bytes.len() {
        let c = bytes[i];
        let column = i - line_start + 1;
        let single = match c {
            b'\n' => {
                i += 1;
                line += 1;
                line_start = i;
                continue;
            }
            b' ' | b'\t' | b'\r' => {
                i += 1;
                continue;
            }
            b'=' => Some(TokenKind::Eq),
            b'(' => Some(TokenKind::LParen),
            b')' => Some(TokenKind::RParen),
            b',' => Some(TokenKind::Comma),
            _ => None,
        };
        if let Some(kind) = single {
            tokens.push(Token { kind, line, column });
            i += 1;
            continue;
        }
        if c.is_ascii_alphabetic() || c == b'_' {
            let start = i;
            while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_') {
                i += 1;
            }
            tokens.push(Token {
                kind: TokenKind::Word(text[start..i].to_string()),
                line,
                column,
            });
            continue;
        }
        if c.is_ascii_digit() || c == b'-' || c == b'.' {
            let start = i;
            let end = scan_number(bytes, i);
            let lexeme = &text[start..end];
            let value = (end > start)
                .then(|| lexeme.parse::<f64>().ok())
                .flatten()
                .ok_or_else(|| DslError::Syntax {
                    line,
                    column,
                    expected: "number".into(),
                    found: format!("`{}`", &text[start..end.max(start + 1)]),
                })?;
            tokens.push(Token {
                kind: TokenKind::Number(value),
                line,
                column,
            });
            i = end;
            continue;
        }
        let found = text[i..].chars().next().unwrap_or('?');
        return Err(DslError::Syntax {
            line,
            column,
            expected: "token".into(),
            found: format!("`{found}`"),
        });
    }
    Ok(tokens)
}

/// `-?(digits(.digits?)?|.digits)([eE][+-]?digits)?`; returns the end offset
/// (equal to `start` when nothing matched).
fn scan_number(b: &[u8], start: usize) -> usize {
    let digits = |mut i: usize| {
        let s = i;
        while i < b.len() && b[i].is_ascii_digit() {
            i += 1;
        }
        (i, i - s)
    };
    let mut i = start;
    if i < b.len() && b[i] == b'-' {
        i += 1;
    }
    let (after_int, n_int) = digits(i);
    i = after_int;
    let mut n_frac = 0;
    if i < b.len() && b[i] == b'.' {
        let (after_frac, n) = digits(i + 1);
        if n_int > 0 || n > 0 {
            i = after_frac;
            n_frac = n;
        }
    }
    if n_int == 0 && n_frac == 0 {
        return start;
    }
    if i < b.len() && (b[i] == b'e' || b[i] == b'E') {
        let mut j = i + 1;
        if j < b.len() && (b[j] == b'+' || b[j] == b'-') {
            j += 1;
        }
        let (after_exp, n_exp) = digits(j);
        if n_exp > 0 {
            i = after_exp;
        }
    }
    i
}
