//! Recursive-descent parser.
//!
//! ```text
//! formula    := disj
//! disj       := conj ("or" conj)*
//! conj       := unit ("and" unit)*
//! unit       := "not" unit
//!             | "(" formula ")"
//!             | ("forall" | "exists") IDENT "in" IDENT ":" unit
//!             | comparison
//! comparison := expr CMP expr (CMP expr)?      # a <= b <= c is sugar for a <= b and b <= c
//! expr       := ["-"] NUMBER | "s" "[" INT "]" | norm
//! norm       := ("norm1" | "norm2" | "norminf" | "norm" "[" NUMBER "]") "(" ref "-" ref ")"
//! ref        := "s" | "s" "." IDENT | IDENT | "[" NUMBER ("," NUMBER)* "]"
//! ```

use super::ast::{CmpOp, Comparison, Expr, Formula, NormOrder, PointRef};
use super::lexer::{tokenize, Token, TokenKind};
use super::DslError;

const STATE: &str = "s";

pub fn parse(source: &str) -> Result<Formula, DslError> {
    let tokens = tokenize(source)?;
    let mut p = Parser { tokens, pos: 0 };
    let f = p.formula()?;
    p.expect(|k| matches!(k, TokenKind::Eof), "end of input")?;
    Ok(f)
}

struct Parser {
    tokens: Vec<Token>,
    pos: usize,
}

impl Parser {
    fn peek(&self) -> &TokenKind {
        &self.tokens[self.pos].kind
    }

    fn advance(&mut self) -> Token {
        let t = self.tokens[self.pos].clone();
        if !matches!(t.kind, TokenKind::Eof) {
            self.pos += 1;
        }
        t
    }

    fn error(&self, expected: &str) -> DslError {
        let t = &self.tokens[self.pos];
        DslError::Syntax {
            line: t.line,
            col: t.col,
            expected: expected.to_string(),
            found: t.kind.describe(),
        }
    }

    fn expect(&mut self, pred: impl Fn(&TokenKind) -> bool, expected: &str) -> Result<Token, DslError> {
        if pred(self.peek()) {
            Ok(self.advance())
        } else {
            Err(self.error(expected))
        }
    }

    fn ident(&mut self, expected: &str) -> Result<String, DslError> {
        match self.peek().clone() {
            TokenKind::Ident(name) => {
                self.advance();
                Ok(name)
            }
            _ => Err(self.error(expected)),
        }
    }

    fn formula(&mut self) -> Result<Formula, DslError> {
        let mut parts = vec![self.conj()?];
        while matches!(self.peek(), TokenKind::Or) {
            self.advance();
            parts.push(self.conj()?);
        }
        Ok(if parts.len() == 1 {
            parts.pop().unwrap()
        } else {
            Formula::Or(parts)
        })
    }

    fn conj(&mut self) -> Result<Formula, DslError> {
        let mut parts = vec![self.unit()?];
        while matches!(self.peek(), TokenKind::And) {
            self.advance();
            parts.push(self.unit()?);
        }
        Ok(if parts.len() == 1 {
            parts.pop().unwrap()
        } else {
            Formula::And(parts)
        })
    }

    fn unit(&mut self) -> Result<Formula, DslError> {
        match self.peek() {
            TokenKind::Not => {
                self.advance();
                Ok(Formula::Not(Box::new(self.unit()?)))
            }
            TokenKind::LParen => {
                self.advance();
                let f = self.formula()?;
                self.expect(|k| matches!(k, TokenKind::RParen), "`)`")?;
                Ok(f)
            }
            TokenKind::Forall | TokenKind::Exists => {
                let universal = matches!(self.advance().kind, TokenKind::Forall);
                if matches!(self.peek(), TokenKind::Ident(n) if n == STATE) {
                    return Err(self.error("a variable name other than `s`"));
                }
                let var = self.ident("variable name")?;
                self.expect(|k| matches!(k, TokenKind::In), "`in`")?;
                let set = self.ident("object set name")?;
                self.expect(|k| matches!(k, TokenKind::Colon), "`:`")?;
                let body = self.unit()?;
                Ok(if universal {
                    Formula::ForAll {
                        var,
                        set,
                        body: Box::new(body),
                    }
                } else {
                    Formula::exists(var, set, body)
                })
            }
            _ => self.comparison(),
        }
    }

    fn comparison(&mut self) -> Result<Formula, DslError> {
        let lhs = self.expr()?;
        let op = self.cmp_op()?;
        let mid = self.expr()?;
        if let TokenKind::Cmp(_) = self.peek() {
            let op2 = self.cmp_op()?;
            let rhs = self.expr()?;
            return Ok(Formula::And(vec![
                Formula::atom(lhs, op, mid.clone()),
                Formula::atom(mid, op2, rhs),
            ]));
        }
        Ok(Formula::Atom(Comparison { lhs, op, rhs: mid }))
    }

    fn cmp_op(&mut self) -> Result<CmpOp, DslError> {
        match *self.peek() {
            TokenKind::Cmp(op) => {
                self.advance();
                Ok(op)
            }
            _ => Err(self.error("comparison operator")),
        }
    }

    fn number(&mut self) -> Result<f64, DslError> {
        let negative = if matches!(self.peek(), TokenKind::Minus) {
            self.advance();
            true
        } else {
            false
        };
        match *self.peek() {
            TokenKind::Number(v, _) => {
                self.advance();
                Ok(if negative { -v } else { v })
            }
            _ => Err(self.error("number")),
        }
    }

    fn expr(&mut self) -> Result<Expr, DslError> {
        match self.peek().clone() {
            TokenKind::Number(..) | TokenKind::Minus => Ok(Expr::Literal(self.number()?)),
            TokenKind::Ident(name) if name == STATE => {
                self.advance();
                self.expect(|k| matches!(k, TokenKind::LBracket), "`[` after `s`")?;
                let index = match self.peek().clone() {
                    TokenKind::Number(_, raw) if raw.bytes().all(|b| b.is_ascii_digit()) => {
                        self.advance();
                        raw.parse::<usize>().map_err(|_| self.error("component index"))?
                    }
                    _ => return Err(self.error("integer component index")),
                };
                self.expect(|k| matches!(k, TokenKind::RBracket), "`]`")?;
                Ok(Expr::Component(index))
            }
            TokenKind::Norm(order) => {
                self.advance();
                let order = match order {
                    Some(o) => o,
                    None => {
                        self.expect(|k| matches!(k, TokenKind::LBracket), "`[` with norm order")?;
                        let at = self.pos;
                        let p = self.number()?;
                        let order = NormOrder::from_p(p).ok_or_else(|| {
                            self.pos = at;
                            self.error("norm order >= 1")
                        })?;
                        self.expect(|k| matches!(k, TokenKind::RBracket), "`]`")?;
                        order
                    }
                };
                self.expect(|k| matches!(k, TokenKind::LParen), "`(`")?;
                let left = self.point_ref()?;
                self.expect(|k| matches!(k, TokenKind::Minus), "`-`")?;
                let right = self.point_ref()?;
                self.expect(|k| matches!(k, TokenKind::RParen), "`)`")?;
                Ok(Expr::Norm { order, left, right })
            }
            _ => Err(self.error("number, `s[i]` or norm")),
        }
    }

    fn point_ref(&mut self) -> Result<PointRef, DslError> {
        match self.peek().clone() {
            TokenKind::Ident(name) if name == STATE => {
                self.advance();
                if matches!(self.peek(), TokenKind::Dot) {
                    self.advance();
                    Ok(PointRef::Slice(self.ident("slice name")?))
                } else {
                    Ok(PointRef::State)
                }
            }
            TokenKind::Ident(name) => {
                self.advance();
                Ok(PointRef::Var(name))
            }
            TokenKind::LBracket => {
                self.advance();
                let mut values = vec![self.number()?];
                while matches!(self.peek(), TokenKind::Comma) {
                    self.advance();
                    values.push(self.number()?);
                }
                self.expect(|k| matches!(k, TokenKind::RBracket), "`,` or `]`")?;
                Ok(PointRef::Point(values))
            }
            _ => Err(self.error("`s`, a variable or a point literal")),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn lit(v: f64) -> Expr {
        Expr::Literal(v)
    }

    #[test]
    fn lower_bound_zero() {
        let f = parse("0 <= norm2(s - [5,5])").unwrap();
        assert_eq!(
            f,
            Formula::atom(
                lit(0.0),
                CmpOp::Le,
                Expr::Norm {
                    order: NormOrder::Two,
                    left: PointRef::State,
                    right: PointRef::Point(vec![5.0, 5.0]),
                }
            )
        );
    }

    #[test]
    fn forall_unsafe() {
        let f = parse("forall u in unsafe: 1.5 <= norm2(s - u)").unwrap();
        let Formula::ForAll { var, set, body } = f else {
            panic!("not a forall")
        };
        assert_eq!((var.as_str(), set.as_str()), ("u", "unsafe"));
        assert_eq!(
            *body,
            Formula::atom(
                lit(1.5),
                CmpOp::Le,
                Expr::Norm {
                    order: NormOrder::Two,
                    left: PointRef::State,
                    right: PointRef::Var("u".into())
                }
            )
        );
    }

    #[test]
    fn cartpole_box() {
        let f = parse("(-2.4 <= s[0] and s[0] <= 2.4) and (-0.2095 <= s[2] and s[2] <= 0.2095)").unwrap();
        let Formula::And(parts) = &f else { panic!() };
        assert_eq!(parts.len(), 2);
        assert_eq!(f.atom_count(), 4);
        let Formula::And(left) = &parts[0] else { panic!() };
        assert_eq!(left[0], Formula::atom(lit(-2.4), CmpOp::Le, Expr::Component(0)));
        // chained form desugars to the same conjunction
        assert_eq!(parse("-2.4 <= s[0] <= 2.4").unwrap(), parts[0]);
    }

    #[test]
    fn precedence() {
        let f = parse("s[0] > 1 or s[0] < 0 and s[1] >= 2").unwrap();
        let Formula::Or(parts) = f else { panic!() };
        assert!(matches!(parts[1], Formula::And(_)));
        // forall body is a unit: the trailing `and` is outside the quantifier
        let g = parse("forall h in hazards: 1 <= norm1(s - h) and s[0] < 3").unwrap();
        let Formula::And(parts) = g else { panic!() };
        assert!(matches!(parts[0], Formula::ForAll { .. }));
    }

    #[test]
    fn exists_is_sugar() {
        let f = parse("exists g in goal: norm2(s - g) <= 1").unwrap();
        let Formula::Not(inner) = f else { panic!() };
        let Formula::ForAll { body, .. } = *inner else { panic!() };
        assert!(matches!(*body, Formula::Not(_)));
    }

    #[test]
    fn general_order_and_slices() {
        let f = parse("norm[3.5](s.pos - [1, -2]) > 0.5").unwrap();
        let Formula::Atom(c) = f else { panic!() };
        assert_eq!(
            c.lhs,
            Expr::Norm {
                order: NormOrder::P(3.5),
                left: PointRef::Slice("pos".into()),
                right: PointRef::Point(vec![1.0, -2.0])
            }
        );
        assert!(parse("norm[0.5](s - [1]) > 0").is_err());
    }

    #[test]
    fn errors_are_positioned() {
        match parse("s[0] <= 1 and\n  s[1] <=") {
            Err(DslError::Syntax { line, col, .. }) => assert_eq!((line, col), (2, 10)),
            other => panic!("{other:?}"),
        }
        match parse("s[1.5] <= 1") {
            Err(DslError::Syntax { line, col, expected, .. }) => {
                assert_eq!((line, col), (1, 3));
                assert!(expected.contains("integer"));
            }
            other => panic!("{other:?}"),
        }
        assert!(parse("forall s in unsafe: 0 <= norm2(s - s)").is_err());
        assert!(parse("(s[0] <= 1").is_err());
        assert!(parse("").is_err());
    }

    #[test]
    fn unknown_identifiers_parse() {
        // resolution happens at bind time
        assert!(parse("forall x in nowhere: 0 <= norm2(s - y)").is_ok());
    }
}
