use super::ast::{Comparison, Expr, Formula, NormOrder, PointRef};

#[derive(Clone, Copy, PartialEq, Eq)]
enum Ctx {
    /// Top level or operand of `or`.
    Disj,
    /// Operand of `or` that is itself an `or`, or any `unit` position.
    Unit,
}

/// Canonical text for a formula. Parentheses appear only where the grammar
/// needs them to reproduce the same tree.
pub fn to_text(formula: &Formula) -> String {
    let mut out = String::new();
    render(formula, Ctx::Disj, &mut out);
    out
}

fn render(f: &Formula, ctx: Ctx, out: &mut String) {
    match f {
        Formula::Or(children) => {
            let paren = ctx == Ctx::Unit;
            if paren {
                out.push('(');
            }
            for (i, c) in children.iter().enumerate() {
                if i > 0 {
                    out.push_str(" or ");
                }
                let child_ctx = if matches!(c, Formula::Or(_)) { Ctx::Unit } else { Ctx::Disj };
                render(c, child_ctx, out);
            }
            if paren {
                out.push(')');
            }
        }
        Formula::And(children) => {
            let paren = ctx == Ctx::Unit;
            if paren {
                out.push('(');
            }
            for (i, c) in children.iter().enumerate() {
                if i > 0 {
                    out.push_str(" and ");
                }
                render(c, Ctx::Unit, out);
            }
            if paren {
                out.push(')');
            }
        }
        Formula::Not(inner) => {
            if let Formula::ForAll { var, set, body } = inner.as_ref() {
                if let Formula::Not(b) = body.as_ref() {
                    out.push_str(&format!("exists {var} in {set}: "));
                    render(b, Ctx::Unit, out);
                    return;
                }
            }
            out.push_str("not ");
            render(inner, Ctx::Unit, out);
        }
        Formula::ForAll { var, set, body } => {
            out.push_str(&format!("forall {var} in {set}: "));
            render(body, Ctx::Unit, out);
        }
        Formula::Atom(c) => render_comparison(c, out),
    }
}

fn render_comparison(c: &Comparison, out: &mut String) {
    render_expr(&c.lhs, out);
    out.push(' ');
    out.push_str(c.op.symbol());
    out.push(' ');
    render_expr(&c.rhs, out);
}

fn render_expr(e: &Expr, out: &mut String) {
    match e {
        Expr::Literal(v) => out.push_str(&v.to_string()),
        Expr::Component(i) => out.push_str(&format!("s[{i}]")),
        Expr::Norm { order, left, right } => {
            match order {
                NormOrder::One => out.push_str("norm1"),
                NormOrder::Two => out.push_str("norm2"),
                NormOrder::Inf => out.push_str("norminf"),
                NormOrder::P(p) => out.push_str(&format!("norm[{p}]")),
            }
            out.push('(');
            render_ref(left, out);
            out.push_str(" - ");
            render_ref(right, out);
            out.push(')');
        }
    }
}

fn render_ref(r: &PointRef, out: &mut String) {
    match r {
        PointRef::State => out.push('s'),
        PointRef::Slice(name) => out.push_str(&format!("s.{name}")),
        PointRef::Var(name) => out.push_str(name),
        PointRef::Point(values) => {
            let parts: Vec<_> = values.iter().map(f64::to_string).collect();
            out.push_str(&format!("[{}]", parts.join(", ")));
        }
    }
}
