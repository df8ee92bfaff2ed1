//! Name resolution and evaluation.

use super::ast::{CmpOp, Expr, Formula, NormOrder, PointRef};
use super::{DslError, ObjectRegistry};
use crate::state::StateSchema;

/// Minkowski distance `||a - b||_p`.
pub fn norm_distance(a: &[f64], b: &[f64], order: NormOrder) -> Result<f64, DslError> {
    if a.len() != b.len() {
        return Err(DslError::DimensionMismatch {
            context: "norm_distance".into(),
            left: a.len(),
            right: b.len(),
        });
    }
    Ok(norm_unchecked(a.iter().zip(b).map(|(x, y)| x - y), order))
}

fn norm_unchecked(diffs: impl Iterator<Item = f64>, order: NormOrder) -> f64 {
    match order {
        NormOrder::One => diffs.map(f64::abs).sum(),
        NormOrder::Two => diffs.map(|d| d * d).sum::<f64>().sqrt(),
        NormOrder::Inf => diffs.map(f64::abs).fold(0.0, f64::max),
        NormOrder::P(p) => diffs.map(|d| d.abs().powf(p)).sum::<f64>().powf(1.0 / p),
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Operand {
    State(Vec<usize>),
    Var(usize),
    Point(Vec<f64>),
}

#[derive(Debug, Clone, PartialEq)]
enum Scalar {
    Const(f64),
    Component(usize),
    Norm { order: NormOrder, a: Operand, b: Operand },
}

#[derive(Debug, Clone, PartialEq)]
enum Node {
    And(Vec<Node>),
    Or(Vec<Node>),
    Not(Box<Node>),
    ForAll { set: usize, slot: usize, body: Box<Node> },
    Atom { lhs: Scalar, op: CmpOp, rhs: Scalar },
}

/// A formula with every name resolved against a registry and state schema.
/// Immutable; evaluation is a pure function of the state.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundFormula {
    root: Node,
    sets: Vec<Vec<Vec<f64>>>,
    slots: usize,
    state_len: usize,
}

struct Scope<'a> {
    /// (variable name, slot, set index)
    vars: Vec<(&'a str, usize, usize)>,
    next_slot: usize,
}

struct Binder<'a> {
    registry: &'a ObjectRegistry,
    schema: &'a StateSchema,
    /// Registry sets referenced by the formula, in first-use order.
    used: Vec<&'a str>,
    /// Point dimension and slice indices for each used set.
    set_info: Vec<(Option<usize>, Option<Vec<usize>>)>,
}

pub fn bind(formula: &Formula, registry: &ObjectRegistry, schema: &StateSchema) -> Result<BoundFormula, DslError> {
    let mut binder = Binder {
        registry,
        schema,
        used: Vec::new(),
        set_info: Vec::new(),
    };
    let mut scope = Scope {
        vars: Vec::new(),
        next_slot: 0,
    };
    let mut max_slots = 0;
    let root = binder.node(formula, &mut scope, &mut max_slots)?;
    let sets = binder
        .used
        .iter()
        .map(|name| registry.get(name).unwrap().points.clone())
        .collect();
    Ok(BoundFormula {
        root,
        sets,
        slots: max_slots,
        state_len: schema.len(),
    })
}

impl<'a> Binder<'a> {
    fn set_index(&mut self, name: &'a str) -> Result<usize, DslError> {
        if let Some(i) = self.used.iter().position(|n| *n == name) {
            return Ok(i);
        }
        let set = self.registry.get(name).ok_or_else(|| DslError::UnknownSet(name.to_string()))?;
        let slice = match &set.slice {
            Some(s) => Some(
                self.schema
                    .slice(s)
                    .ok_or_else(|| DslError::UnknownSlice(s.clone()))?
                    .to_vec(),
            ),
            None => None,
        };
        let dim = set.dim().or(slice.as_ref().map(Vec::len));
        let expected = slice.as_ref().map_or(self.schema.len(), Vec::len);
        if let Some(d) = set.dim() {
            if d != expected {
                return Err(dims(format!("anchors of `{name}`"), d, expected));
            }
        }
        self.used.push(name);
        self.set_info.push((dim, slice));
        Ok(self.used.len() - 1)
    }

    fn node(&mut self, f: &'a Formula, scope: &mut Scope<'a>, max_slots: &mut usize) -> Result<Node, DslError> {
        Ok(match f {
            Formula::And(cs) => Node::And(
                cs.iter()
                    .map(|c| self.node(c, scope, max_slots))
                    .collect::<Result<_, _>>()?,
            ),
            Formula::Or(cs) => Node::Or(
                cs.iter()
                    .map(|c| self.node(c, scope, max_slots))
                    .collect::<Result<_, _>>()?,
            ),
            Formula::Not(inner) => Node::Not(Box::new(self.node(inner, scope, max_slots)?)),
            Formula::ForAll { var, set, body } => {
                let set = self.set_index(set)?;
                let slot = scope.next_slot;
                scope.vars.push((var, slot, set));
                scope.next_slot += 1;
                *max_slots = (*max_slots).max(scope.next_slot);
                let body = self.node(body, scope, max_slots);
                scope.vars.pop();
                scope.next_slot -= 1;
                Node::ForAll {
                    set,
                    slot,
                    body: Box::new(body?),
                }
            }
            Formula::Atom(c) => Node::Atom {
                lhs: self.scalar(&c.lhs, scope)?,
                op: c.op,
                rhs: self.scalar(&c.rhs, scope)?,
            },
        })
    }

    fn scalar(&mut self, e: &Expr, scope: &Scope<'a>) -> Result<Scalar, DslError> {
        Ok(match e {
            Expr::Literal(v) => Scalar::Const(*v),
            Expr::Component(i) => {
                if *i >= self.schema.len() {
                    return Err(DslError::IndexOutOfRange {
                        index: *i,
                        len: self.schema.len(),
                    });
                }
                Scalar::Component(*i)
            }
            Expr::Norm { order, left, right } => {
                let (a, b) = self.operands(left, right, scope)?;
                Scalar::Norm { order: *order, a, b }
            }
        })
    }

    /// Resolves both sides of a norm difference. A bare `s` takes the slice
    /// of the anchor it is paired with.
    fn operands(&self, left: &PointRef, right: &PointRef, scope: &Scope<'a>) -> Result<(Operand, Operand), DslError> {
        let full: Vec<usize> = (0..self.schema.len()).collect();
        let resolve_var = |name: &str| -> Result<(usize, usize), DslError> {
            scope
                .vars
                .iter()
                .rev()
                .find(|(n, _, _)| *n == name)
                .map(|&(_, slot, set)| (slot, set))
                .ok_or_else(|| DslError::UnboundVariable(name.to_string()))
        };
        let explicit = |r: &PointRef| -> Result<Option<(Operand, Option<usize>)>, DslError> {
            Ok(match r {
                PointRef::State => None,
                PointRef::Slice(name) => {
                    let idx = self
                        .schema
                        .slice(name)
                        .ok_or_else(|| DslError::UnknownSlice(name.clone()))?;
                    Some((Operand::State(idx.to_vec()), Some(idx.len())))
                }
                PointRef::Var(name) => {
                    let (slot, set) = resolve_var(name)?;
                    Some((Operand::Var(slot), self.set_info[set].0))
                }
                PointRef::Point(v) => Some((Operand::Point(v.clone()), Some(v.len()))),
            })
        };
        // Slice that a bare `s` adopts when paired with `other`.
        let implied = |other: &PointRef| -> Result<Vec<usize>, DslError> {
            if let PointRef::Var(name) = other {
                let (_, set) = resolve_var(name)?;
                if let Some(slice) = &self.set_info[set].1 {
                    return Ok(slice.clone());
                }
            }
            Ok(full.clone())
        };

        let (a, da) = match explicit(left)? {
            Some(x) => x,
            None => {
                let idx = implied(right)?;
                let n = idx.len();
                (Operand::State(idx), Some(n))
            }
        };
        let (b, db) = match explicit(right)? {
            Some(x) => x,
            None => {
                let idx = implied(left)?;
                let n = idx.len();
                (Operand::State(idx), Some(n))
            }
        };
        if let (Some(x), Some(y)) = (da, db) {
            if x != y {
                return Err(dims("norm operands".into(), x, y));
            }
        }
        Ok((a, b))
    }
}

fn dims(context: String, left: usize, right: usize) -> DslError {
    DslError::DimensionMismatch { context, left, right }
}

impl BoundFormula {
    /// Truth value of the formula at `state`.
    pub fn evaluate(&self, state: &[f64]) -> Result<bool, DslError> {
        if state.len() != self.state_len {
            return Err(DslError::StateLength {
                expected: self.state_len,
                found: state.len(),
            });
        }
        if state.iter().any(|v| !v.is_finite()) {
            return Err(DslError::NonFiniteState);
        }
        let mut slots = vec![(0usize, 0usize); self.slots];
        Ok(self.eval_node(&self.root, state, &mut slots))
    }

    /// Number of state components the formula was bound against.
    pub fn state_len(&self) -> usize {
        self.state_len
    }

    /// State component indices read by the formula, sorted and deduplicated.
    pub fn referenced_components(&self) -> Vec<usize> {
        fn walk(n: &Node, out: &mut Vec<usize>) {
            match n {
                Node::And(cs) | Node::Or(cs) => cs.iter().for_each(|c| walk(c, out)),
                Node::Not(c) => walk(c, out),
                Node::ForAll { body, .. } => walk(body, out),
                Node::Atom { lhs, rhs, .. } => {
                    for s in [lhs, rhs] {
                        match s {
                            Scalar::Component(i) => out.push(*i),
                            Scalar::Norm { a, b, .. } => {
                                for o in [a, b] {
                                    if let Operand::State(idx) = o {
                                        out.extend(idx);
                                    }
                                }
                            }
                            Scalar::Const(_) => {}
                        }
                    }
                }
            }
        }
        let mut out = Vec::new();
        walk(&self.root, &mut out);
        out.sort_unstable();
        out.dedup();
        out
    }

    fn eval_node(&self, n: &Node, state: &[f64], slots: &mut [(usize, usize)]) -> bool {
        match n {
            Node::And(cs) => cs.iter().all(|c| self.eval_node(c, state, slots)),
            Node::Or(cs) => cs.iter().any(|c| self.eval_node(c, state, slots)),
            Node::Not(c) => !self.eval_node(c, state, slots),
            Node::ForAll { set, slot, body } => (0..self.sets[*set].len()).all(|k| {
                slots[*slot] = (*set, k);
                self.eval_node(body, state, slots)
            }),
            Node::Atom { lhs, op, rhs } => {
                let l = self.eval_scalar(lhs, state, slots);
                let r = self.eval_scalar(rhs, state, slots);
                op.apply(l, r)
            }
        }
    }

    fn eval_scalar(&self, s: &Scalar, state: &[f64], slots: &[(usize, usize)]) -> f64 {
        match s {
            Scalar::Const(v) => *v,
            Scalar::Component(i) => state[*i],
            Scalar::Norm { order, a, b } => {
                let a = self.view(a, state, slots);
                let b = self.view(b, state, slots);
                norm_unchecked((0..a.len()).map(|j| a.get(j) - b.get(j)), *order)
            }
        }
    }

    fn view<'s>(&'s self, o: &'s Operand, state: &'s [f64], slots: &[(usize, usize)]) -> View<'s> {
        match o {
            Operand::State(idx) => View::Indexed(state, idx),
            Operand::Point(p) => View::Direct(p),
            Operand::Var(slot) => {
                let (set, k) = slots[*slot];
                View::Direct(&self.sets[set][k])
            }
        }
    }
}

enum View<'s> {
    Direct(&'s [f64]),
    Indexed(&'s [f64], &'s [usize]),
}

impl View<'_> {
    fn len(&self) -> usize {
        match self {
            View::Direct(p) => p.len(),
            View::Indexed(_, idx) => idx.len(),
        }
    }

    fn get(&self, j: usize) -> f64 {
        match self {
            View::Direct(p) => p[j],
            View::Indexed(s, idx) => s[idx[j]],
        }
    }
}
