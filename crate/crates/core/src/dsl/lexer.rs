use super::DslError;

#[derive(Debug, Clone, PartialEq)]
pub enum TokenKind {
    /// Numeric literal; the raw text is kept so integer-only positions can
    /// reject fractions.
    Number(f64, String),
    Ident(String),
    Forall,
    Exists,
    In,
    And,
    Or,
    Not,
    /// `norm1`, `norm2`, `norminf`, or bare `norm` (followed by `[p]`).
    Norm(Option<super::NormOrder>),
    LParen,
    RParen,
    LBracket,
    RBracket,
    Comma,
    Colon,
    Dot,
    Minus,
    Cmp(super::CmpOp),
    Eof,
}

impl TokenKind {
    pub fn describe(&self) -> String {
        match self {
            TokenKind::Number(_, raw) => format!("number `{raw}`"),
            TokenKind::Ident(s) => format!("identifier `{s}`"),
            TokenKind::Forall => "`forall`".into(),
            TokenKind::Exists => "`exists`".into(),
            TokenKind::In => "`in`".into(),
            TokenKind::And => "`and`".into(),
            TokenKind::Or => "`or`".into(),
            TokenKind::Not => "`not`".into(),
            TokenKind::Norm(_) => "norm".into(),
            TokenKind::LParen => "`(`".into(),
            TokenKind::RParen => "`)`".into(),
            TokenKind::LBracket => "`[`".into(),
            TokenKind::RBracket => "`]`".into(),
            TokenKind::Comma => "`,`".into(),
            TokenKind::Colon => "`:`".into(),
            TokenKind::Dot => "`.`".into(),
            TokenKind::Minus => "`-`".into(),
            TokenKind::Cmp(op) => format!("`{}`", op.symbol()),
            TokenKind::Eof => "end of input".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Token {
    pub kind: TokenKind,
    pub line: usize,
    pub col: usize,
}

pub fn tokenize(source: &str) -> Result<Vec<Token>, DslError> {
    use super::{CmpOp, NormOrder};

    let chars: Vec<char> = source.chars().collect();
    let mut tokens = Vec::new();
    let (mut i, mut line, mut col) = (0usize, 1usize, 1usize);

    while i < chars.len() {
        let c = chars[i];
        let (tl, tc) = (line, col);
        let push = |tokens: &mut Vec<Token>, kind| tokens.push(Token { kind, line: tl, col: tc });

        if c == '\n' {
            i += 1;
            line += 1;
            col = 1;
            continue;
        }
        if c.is_whitespace() {
            i += 1;
            col += 1;
            continue;
        }
        if c == '#' {
            while i < chars.len() && chars[i] != '\n' {
                i += 1;
            }
            continue;
        }
        if c.is_ascii_digit() || (c == '.' && chars.get(i + 1).is_some_and(|d| d.is_ascii_digit())) {
            let start = i;
            while i < chars.len() && chars[i].is_ascii_digit() {
                i += 1;
            }
            if i < chars.len() && chars[i] == '.' {
                i += 1;
                while i < chars.len() && chars[i].is_ascii_digit() {
                    i += 1;
                }
            }
            if i < chars.len() && (chars[i] == 'e' || chars[i] == 'E') {
                let mut j = i + 1;
                if j < chars.len() && (chars[j] == '+' || chars[j] == '-') {
                    j += 1;
                }
                if j < chars.len() && chars[j].is_ascii_digit() {
                    i = j;
                    while i < chars.len() && chars[i].is_ascii_digit() {
                        i += 1;
                    }
                }
            }
            let raw: String = chars[start..i].iter().collect();
            let value: f64 = raw.parse().map_err(|_| DslError::Lex {
                line: tl,
                col: tc,
                msg: format!("malformed number `{raw}`"),
            })?;
            if !value.is_finite() {
                return Err(DslError::Lex {
                    line: tl,
                    col: tc,
                    msg: format!("number `{raw}` is out of range"),
                });
            }
            col += i - start;
            push(&mut tokens, TokenKind::Number(value, raw));
            continue;
        }
        if c.is_ascii_alphabetic() || c == '_' {
            let start = i;
            while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '_') {
                i += 1;
            }
            let word: String = chars[start..i].iter().collect();
            col += i - start;
            let kind = match word.as_str() {
                "forall" => TokenKind::Forall,
                "exists" => TokenKind::Exists,
                "in" => TokenKind::In,
                "and" => TokenKind::And,
                "or" => TokenKind::Or,
                "not" => TokenKind::Not,
                "norm" => TokenKind::Norm(None),
                "norm1" => TokenKind::Norm(Some(NormOrder::One)),
                "norm2" => TokenKind::Norm(Some(NormOrder::Two)),
                "norminf" => TokenKind::Norm(Some(NormOrder::Inf)),
                _ => TokenKind::Ident(word),
            };
            push(&mut tokens, kind);
            continue;
        }
        let two = |next: char| chars.get(i + 1) == Some(&next);
        let (kind, width) = match c {
            '(' => (TokenKind::LParen, 1),
            ')' => (TokenKind::RParen, 1),
            '[' => (TokenKind::LBracket, 1),
            ']' => (TokenKind::RBracket, 1),
            ',' => (TokenKind::Comma, 1),
            ':' => (TokenKind::Colon, 1),
            '.' => (TokenKind::Dot, 1),
            '-' => (TokenKind::Minus, 1),
            '<' if two('=') => (TokenKind::Cmp(CmpOp::Le), 2),
            '<' => (TokenKind::Cmp(CmpOp::Lt), 1),
            '>' if two('=') => (TokenKind::Cmp(CmpOp::Ge), 2),
            '>' => (TokenKind::Cmp(CmpOp::Gt), 1),
            other => {
                return Err(DslError::Lex {
                    line: tl,
                    col: tc,
                    msg: format!("unexpected character `{other}`"),
                })
            }
        };
        push(&mut tokens, kind);
        i += width;
        col += width;
    }
    tokens.push(Token {
        kind: TokenKind::Eof,
        line,
        col,
    });
    Ok(tokens)
}
