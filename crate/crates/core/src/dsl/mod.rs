//! First-order constraint language over state vectors.
//!
//! Formulas combine comparisons between scalars (literals, state components,
//! p-norm distances) with `and`, `or`, `not` and bounded quantifiers over
//! named object sets:
//!
//! ```text
//! # keep at least 1.5 cells away from every unsafe cell
//! forall u in unsafe: 1.5 <= norm2(s - u)
//! ```
//!
//! Source text is parsed into a [`Formula`], then [`bind`]-ed against an
//! [`ObjectRegistry`] and a [`StateSchema`](crate::state::StateSchema) to get
//! a [`BoundFormula`] that can be evaluated on states.
//!
//! Evaluation is exact: comparisons use plain floating-point operators with
//! no tolerance, so bounds must carry any slack the user wants.

mod ast;
mod bind;
pub mod dnf;
mod lexer;
mod parser;
mod registry;
mod render;

pub use ast::{CmpOp, Comparison, Expr, Formula, NormOrder, PointRef};
pub use bind::{bind, norm_distance, BoundFormula};
pub use parser::parse;
pub use registry::{ObjectRegistry, ObjectSet};
pub use render::to_text;

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DslError {
    #[error("{line}:{col}: {msg}")]
    Lex { line: usize, col: usize, msg: String },
    #[error("{line}:{col}: expected {expected}, found {found}")]
    Syntax {
        line: usize,
        col: usize,
        expected: String,
        found: String,
    },
    #[error("unknown object set `{0}`")]
    UnknownSet(String),
    #[error("unknown state slice `{0}`")]
    UnknownSlice(String),
    #[error("variable `{0}` is not bound by an enclosing quantifier")]
    UnboundVariable(String),
    #[error("state index {index} out of range for a {len}-component state")]
    IndexOutOfRange { index: usize, len: usize },
    #[error("dimension mismatch in {context}: {left} vs {right}")]
    DimensionMismatch { context: String, left: usize, right: usize },
    #[error("object set `{0}` defined twice")]
    DuplicateSet(String),
    #[error("object set `{0}` contains a non-finite anchor")]
    NonFiniteAnchor(String),
    #[error("state has {found} components, formula was bound for {expected}")]
    StateLength { expected: usize, found: usize },
    #[error("state contains a non-finite component")]
    NonFiniteState,
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::state::StateSchema;

    fn grid_schema() -> StateSchema {
        StateSchema::new(&[("x", "cell"), ("y", "cell")], &[("pos", &[0, 1])])
    }

    fn eval(src: &str, registry: &ObjectRegistry, state: &[f64]) -> bool {
        bind(&parse(src).unwrap(), registry, &grid_schema())
            .unwrap()
            .evaluate(state)
            .unwrap()
    }

    #[test]
    fn norm_distance_examples() {
        assert_eq!(norm_distance(&[3.0, 4.0], &[0.0, 0.0], NormOrder::Two).unwrap(), 5.0);
        assert_eq!(norm_distance(&[1.0, -2.0], &[0.0, 0.0], NormOrder::One).unwrap(), 3.0);
        assert_eq!(norm_distance(&[1.0, -2.0], &[0.0, 0.0], NormOrder::Inf).unwrap(), 2.0);
        for p in [NormOrder::One, NormOrder::Two, NormOrder::Inf, NormOrder::P(3.0)] {
            assert_eq!(norm_distance(&[0.3, -7.0, 2.0], &[0.3, -7.0, 2.0], p).unwrap(), 0.0);
        }
        // (1 + 8)^(1/3)
        let d = norm_distance(&[1.0, 2.0], &[0.0, 0.0], NormOrder::P(3.0)).unwrap();
        assert!((d - 9f64.cbrt()).abs() < 1e-15);
        assert!(norm_distance(&[1.0], &[1.0, 2.0], NormOrder::Two).is_err());
    }

    #[test]
    fn distance_below_bound_is_false() {
        let r = ObjectRegistry::new();
        // ||(5,5) - (5,6)|| = 1 < 2
        assert!(!eval("2 <= norm2(s - [5,6])", &r, &[5.0, 5.0]));
        assert!(eval("0 <= norm2(s - [5,6])", &r, &[-3.0, 100.0]));
    }

    #[test]
    fn forall_over_unsafe_pair() {
        let mut r = ObjectRegistry::new();
        r.insert("unsafe", Some("pos"), vec![vec![3.0, 3.0], vec![4.0, 3.0]]).unwrap();
        let src = "forall u in unsafe: 1 <= norm1(s - u)";
        // L1 distances from (3,4): 1 and 2
        assert!(eval(src, &r, &[3.0, 4.0]));
        // from (3,3): 0 and 1
        assert!(!eval(src, &r, &[3.0, 3.0]));
    }

    #[test]
    fn vacuous_quantifier() {
        let mut r = ObjectRegistry::new();
        r.insert("hazards", Some("pos"), vec![]).unwrap();
        let f = bind(&parse("forall h in hazards: 5 <= norm2(s - h)").unwrap(), &r, &grid_schema()).unwrap();
        assert!(f.evaluate(&[0.0, 0.0]).unwrap());
        let g = bind(&parse("exists h in hazards: 5 <= norm2(s - h)").unwrap(), &r, &grid_schema()).unwrap();
        assert!(!g.evaluate(&[0.0, 0.0]).unwrap());
    }

    #[test]
    fn bind_errors() {
        let r = ObjectRegistry::new();
        let schema = grid_schema();
        let err = bind(&parse("forall u in unsafe: 1 <= norm2(s - u)").unwrap(), &r, &schema).unwrap_err();
        assert_eq!(err, DslError::UnknownSet("unsafe".into()));
        assert!(err.to_string().contains("unsafe"));
        assert!(matches!(
            bind(&parse("s[2] < 1").unwrap(), &r, &schema),
            Err(DslError::IndexOutOfRange { index: 2, len: 2 })
        ));
        assert!(matches!(
            bind(&parse("norm2(s - [1,2,3]) < 1").unwrap(), &r, &schema),
            Err(DslError::DimensionMismatch { .. })
        ));
        assert!(matches!(
            bind(&parse("norm2(s - v) < 1").unwrap(), &r, &schema),
            Err(DslError::UnboundVariable(_))
        ));
        assert!(matches!(
            bind(&parse("norm2(s.vel - [0,0]) < 1").unwrap(), &r, &schema),
            Err(DslError::UnknownSlice(_))
        ));
        let mut bad = ObjectRegistry::new();
        bad.insert("pts", None, vec![vec![1.0, 2.0, 3.0]]).unwrap();
        assert!(matches!(
            bind(&parse("forall p in pts: 1 <= norm2(s - p)").unwrap(), &bad, &schema),
            Err(DslError::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn cartpole_components() {
        let schema = StateSchema::new(
            &[("x", "m"), ("x_dot", "m/s"), ("theta", "rad"), ("theta_dot", "rad/s")],
            &[],
        );
        let f = parse("(-2.4 <= s[0] and s[0] <= 2.4) and (-0.2095 <= s[2] and s[2] <= 0.2095)").unwrap();
        let b = bind(&f, &ObjectRegistry::new(), &schema).unwrap();
        assert_eq!(b.referenced_components(), vec![0, 2]);
        assert!(b.evaluate(&[2.4, 10.0, -0.2095, -3.0]).unwrap());
        assert!(!b.evaluate(&[2.41, 0.0, 0.0, 0.0]).unwrap());
        assert!(!b.evaluate(&[0.0, 0.0, 0.21, 0.0]).unwrap());
    }

    #[test]
    fn slice_anchors_project_the_state() {
        let schema = StateSchema::new(
            &[("x", "m"), ("y", "m"), ("vx", "m/s"), ("vy", "m/s")],
            &[("pos", &[0, 1])],
        );
        let mut r = ObjectRegistry::new();
        r.insert("hazards", Some("pos"), vec![vec![0.0, 0.0]]).unwrap();
        let b = bind(&parse("forall h in hazards: 1 <= norm2(s - h)").unwrap(), &r, &schema).unwrap();
        // velocity components are ignored
        assert!(!b.evaluate(&[0.5, 0.5, 100.0, 100.0]).unwrap());
        assert!(b.evaluate(&[1.0, 0.0, 0.0, 0.0]).unwrap());
    }

    #[test]
    fn evaluate_rejects_bad_states() {
        let b = bind(&parse("s[0] < 1").unwrap(), &ObjectRegistry::new(), &grid_schema()).unwrap();
        assert_eq!(b.evaluate(&[f64::NAN, 0.0]), Err(DslError::NonFiniteState));
        assert!(matches!(b.evaluate(&[0.0]), Err(DslError::StateLength { .. })));
    }

    #[test]
    fn sibling_quantifiers_use_their_own_sets() {
        let mut r = ObjectRegistry::new();
        r.insert("a", Some("pos"), vec![vec![0.0, 0.0]]).unwrap();
        r.insert("b", Some("pos"), vec![vec![10.0, 10.0], vec![20.0, 20.0]]).unwrap();
        let src = "(forall p in a: norm2(s - p) <= 1) and (forall q in b: norm2(s - q) >= 5)";
        assert!(eval(src, &r, &[0.5, 0.0]));
        assert!(!eval(src, &r, &[2.0, 0.0]));
        // nested: every pair of anchors
        assert!(eval("forall p in a: forall q in b: norm2(p - q) > 14", &r, &[0.0, 0.0]));
        assert!(!eval("forall p in a: forall q in b: norm2(p - q) > 15", &r, &[0.0, 0.0]));
    }
}
