use std::fmt;

/// Order of a Minkowski norm.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum NormOrder {
    One,
    Two,
    Inf,
    /// Any finite order `p >= 1`.
    P(f64),
}

impl NormOrder {
    pub fn from_p(p: f64) -> Option<Self> {
        if p.is_infinite() && p > 0.0 {
            Some(NormOrder::Inf)
        } else if p == 1.0 {
            Some(NormOrder::One)
        } else if p == 2.0 {
            Some(NormOrder::Two)
        } else if p.is_finite() && p > 1.0 {
            Some(NormOrder::P(p))
        } else {
            None
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CmpOp {
    Le,
    Lt,
    Ge,
    Gt,
}

impl CmpOp {
    pub fn apply(self, lhs: f64, rhs: f64) -> bool {
        match self {
            CmpOp::Le => lhs <= rhs,
            CmpOp::Lt => lhs < rhs,
            CmpOp::Ge => lhs >= rhs,
            CmpOp::Gt => lhs > rhs,
        }
    }

    /// The operator whose truth value is the negation of this one.
    /// Exact for finite operands.
    pub fn negated(self) -> Self {
        match self {
            CmpOp::Le => CmpOp::Gt,
            CmpOp::Lt => CmpOp::Ge,
            CmpOp::Ge => CmpOp::Lt,
            CmpOp::Gt => CmpOp::Le,
        }
    }

    pub fn symbol(self) -> &'static str {
        match self {
            CmpOp::Le => "<=",
            CmpOp::Lt => "<",
            CmpOp::Ge => ">=",
            CmpOp::Gt => ">",
        }
    }
}

/// One operand of a norm difference.
#[derive(Debug, Clone, PartialEq)]
pub enum PointRef {
    /// The whole state, or the slice that the paired anchor lives in.
    State,
    /// A named slice of the state, e.g. `s.pos`.
    Slice(String),
    /// A variable bound by an enclosing quantifier.
    Var(String),
    /// A literal point.
    Point(Vec<f64>),
}

/// Scalar expression.
#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Literal(f64),
    /// `s[i]`
    Component(usize),
    /// `normP(a - b)`
    Norm { order: NormOrder, left: PointRef, right: PointRef },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Comparison {
    pub lhs: Expr,
    pub op: CmpOp,
    pub rhs: Expr,
}

/// Constraint formula. `And`/`Or` built by the parser always have at least
/// two children; nesting written with parentheses is preserved.
#[derive(Debug, Clone, PartialEq)]
pub enum Formula {
    And(Vec<Formula>),
    Or(Vec<Formula>),
    Not(Box<Formula>),
    ForAll { var: String, set: String, body: Box<Formula> },
    Atom(Comparison),
}

impl Formula {
    /// `exists v in set: body`, encoded as `not forall v in set: not body`.
    pub fn exists(var: impl Into<String>, set: impl Into<String>, body: Formula) -> Formula {
        Formula::Not(Box::new(Formula::ForAll {
            var: var.into(),
            set: set.into(),
            body: Box::new(Formula::Not(Box::new(body))),
        }))
    }

    pub fn atom(lhs: Expr, op: CmpOp, rhs: Expr) -> Formula {
        Formula::Atom(Comparison { lhs, op, rhs })
    }

    /// Number of atoms in the tree.
    pub fn atom_count(&self) -> usize {
        match self {
            Formula::And(cs) | Formula::Or(cs) => cs.iter().map(Formula::atom_count).sum(),
            Formula::Not(f) => f.atom_count(),
            Formula::ForAll { body, .. } => body.atom_count(),
            Formula::Atom(_) => 1,
        }
    }

    pub fn is_quantifier_free(&self) -> bool {
        match self {
            Formula::And(cs) | Formula::Or(cs) => cs.iter().all(Formula::is_quantifier_free),
            Formula::Not(f) => f.is_quantifier_free(),
            Formula::ForAll { .. } => false,
            Formula::Atom(_) => true,
        }
    }
}

impl fmt::Display for Formula {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&super::to_text(self))
    }
}
