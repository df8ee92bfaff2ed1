//! Disjunctive normal form, for diagnostics.
//!
//! Quantified subformulas are treated as opaque literals; negations are
//! pushed into atoms by flipping the comparison operator.

use super::ast::{Comparison, Formula};

/// Negation normal form: `not` only directly above quantifiers.
pub fn to_nnf(f: &Formula) -> Formula {
    nnf(f, false)
}

fn nnf(f: &Formula, negate: bool) -> Formula {
    match f {
        Formula::And(cs) | Formula::Or(cs) => {
            let children = cs.iter().map(|c| nnf(c, negate)).collect();
            let is_and = matches!(f, Formula::And(_)) != negate;
            if is_and {
                Formula::And(children)
            } else {
                Formula::Or(children)
            }
        }
        Formula::Not(inner) => nnf(inner, !negate),
        Formula::Atom(c) => Formula::Atom(Comparison {
            lhs: c.lhs.clone(),
            op: if negate { c.op.negated() } else { c.op },
            rhs: c.rhs.clone(),
        }),
        Formula::ForAll { var, set, body } => {
            let q = Formula::ForAll {
                var: var.clone(),
                set: set.clone(),
                body: Box::new(to_nnf(body)),
            };
            if negate {
                Formula::Not(Box::new(q))
            } else {
                q
            }
        }
    }
}

/// Disjunction of conjunctions of literals. Clauses with one literal are
/// emitted bare, and a single clause is emitted without the outer `or`.
pub fn to_dnf(f: &Formula) -> Formula {
    let clauses = dnf_clauses(&to_nnf(f));
    let mut disjuncts: Vec<Formula> = clauses
        .into_iter()
        .map(|mut lits| if lits.len() == 1 { lits.pop().unwrap() } else { Formula::And(lits) })
        .collect();
    if disjuncts.len() == 1 {
        disjuncts.pop().unwrap()
    } else {
        Formula::Or(disjuncts)
    }
}

fn dnf_clauses(f: &Formula) -> Vec<Vec<Formula>> {
    match f {
        Formula::Or(cs) => cs.iter().flat_map(dnf_clauses).collect(),
        Formula::And(cs) => {
            let mut acc: Vec<Vec<Formula>> = vec![Vec::new()];
            for c in cs {
                let rhs = dnf_clauses(c);
                acc = acc
                    .iter()
                    .flat_map(|l| {
                        rhs.iter().map(move |r| {
                            let mut clause = l.clone();
                            clause.extend(r.iter().cloned());
                            clause
                        })
                    })
                    .collect();
            }
            acc
        }
        literal => vec![vec![literal.clone()]],
    }
}

#[cfg(test)]
mod tests {
    use super::super::{parse, to_text};
    use super::*;

    #[test]
    fn distributes_and_over_or() {
        let f = parse("(s[0] > 1 or s[1] > 1) and not s[2] > 1").unwrap();
        assert_eq!(to_text(&to_dnf(&f)), "s[0] > 1 and s[2] <= 1 or s[1] > 1 and s[2] <= 1");
    }

    #[test]
    fn quantifiers_stay_opaque() {
        let f = parse("not (forall u in unsafe: 1 <= norm2(s - u) or s[0] < 0)").unwrap();
        assert_eq!(
            to_text(&to_dnf(&f)),
            "not forall u in unsafe: 1 <= norm2(s - u) and s[0] >= 0"
        );
    }
}
