//! Oracles shared by the integration tests and the acceptance runner. They
//! avoid the library's own evaluation paths.
#![allow(dead_code)]

use rand::Rng;
use system3::tensor::ParamSet;

/// Comparison operators, in DSL spelling.
const OPS: [&str; 4] = ["<=", "<", ">=", ">"];

fn compare(op: usize, lhs: f64, rhs: f64) -> bool {
    match op {
        0 => lhs <= rhs,
        1 => lhs < rhs,
        2 => lhs >= rhs,
        _ => lhs > rhs,
    }
}

/// One atom over a 2-D state.
#[derive(Debug, Clone)]
pub enum Atom {
    /// `s[i] op c`
    Component { i: usize, op: usize, c: f64 },
    /// `normP(s - center) op r`, P in {1, 2, inf}
    Norm { p: u8, center: [f64; 2], op: usize, r: f64 },
}

impl Atom {
    fn random(rng: &mut impl Rng) -> Self {
        let op = rng.gen_range(0..4);
        if rng.gen_bool(0.4) {
            Atom::Component {
                i: rng.gen_range(0..2),
                op,
                c: rng.gen_range(-5.0..5.0),
            }
        } else {
            Atom::Norm {
                p: [1, 2, 0][rng.gen_range(0..3)],
                center: [rng.gen_range(-5.0..5.0), rng.gen_range(-5.0..5.0)],
                op,
                r: rng.gen_range(0.0..6.0),
            }
        }
    }

    fn text(&self) -> String {
        match self {
            Atom::Component { i, op, c } => format!("s[{i}] {} {c:?}", OPS[*op]),
            Atom::Norm { p, center, op, r } => {
                let name = match p {
                    1 => "norm1",
                    2 => "norm2",
                    _ => "norminf",
                };
                format!("{name}(s - [{:?}, {:?}]) {} {r:?}", center[0], center[1], OPS[*op])
            }
        }
    }

    fn holds(&self, s: &[f64]) -> bool {
        match self {
            Atom::Component { i, op, c } => compare(*op, s[*i], *c),
            Atom::Norm { p, center, op, r } => {
                let d = [(s[0] - center[0]).abs(), (s[1] - center[1]).abs()];
                let n = match p {
                    1 => d[0] + d[1],
                    2 => (d[0] * d[0] + d[1] * d[1]).sqrt(),
                    _ => d[0].max(d[1]),
                };
                compare(*op, n, *r)
            }
        }
    }
}

/// Boolean skeleton over atom indices.
#[derive(Debug, Clone)]
enum Skeleton {
    Var(usize),
    Not(Box<Skeleton>),
    And(Vec<Skeleton>),
    Or(Vec<Skeleton>),
}

impl Skeleton {
    fn build(vars: &[usize], rng: &mut impl Rng) -> Self {
        let node = if vars.len() == 1 {
            Skeleton::Var(vars[0])
        } else {
            let cut = rng.gen_range(1..vars.len());
            let parts = vec![Self::build(&vars[..cut], rng), Self::build(&vars[cut..], rng)];
            if rng.gen_bool(0.5) {
                Skeleton::And(parts)
            } else {
                Skeleton::Or(parts)
            }
        };
        if rng.gen_bool(0.25) {
            Skeleton::Not(Box::new(node))
        } else {
            node
        }
    }

    fn text(&self, atoms: &[Atom]) -> String {
        match self {
            Skeleton::Var(i) => atoms[*i].text(),
            Skeleton::Not(f) => format!("not ({})", f.text(atoms)),
            Skeleton::And(cs) => cs.iter().map(|c| format!("({})", c.text(atoms))).collect::<Vec<_>>().join(" and "),
            Skeleton::Or(cs) => cs.iter().map(|c| format!("({})", c.text(atoms))).collect::<Vec<_>>().join(" or "),
        }
    }

    fn truth(&self, row: usize) -> bool {
        match self {
            Skeleton::Var(i) => row >> i & 1 == 1,
            Skeleton::Not(f) => !f.truth(row),
            Skeleton::And(cs) => cs.iter().all(|c| c.truth(row)),
            Skeleton::Or(cs) => cs.iter().any(|c| c.truth(row)),
        }
    }
}

/// Random quantifier-free formula with its precomputed truth table.
#[derive(Debug, Clone)]
pub struct TruthTableFormula {
    pub atoms: Vec<Atom>,
    skeleton: Skeleton,
    table: Vec<bool>,
}

impl TruthTableFormula {
    pub fn random(max_atoms: usize, rng: &mut impl Rng) -> Self {
        let k = rng.gen_range(1..=max_atoms);
        let atoms: Vec<Atom> = (0..k).map(|_| Atom::random(rng)).collect();
        let vars: Vec<usize> = (0..k).collect();
        let skeleton = Skeleton::build(&vars, rng);
        let table = (0..1usize << k).map(|row| skeleton.truth(row)).collect();
        Self { atoms, skeleton, table }
    }

    pub fn text(&self) -> String {
        self.skeleton.text(&self.atoms)
    }

    pub fn evaluate(&self, s: &[f64]) -> bool {
        let row = self
            .atoms
            .iter()
            .enumerate()
            .fold(0, |acc, (i, a)| acc | (a.holds(s) as usize) << i);
        self.table[row]
    }
}

/// Outcome of a finite-difference comparison.
#[derive(Debug, Clone, Copy, Default)]
pub struct FdReport {
    pub probes: usize,
    pub failures: usize,
    pub worst_rel: f64,
}

impl FdReport {
    pub fn merge(&mut self, other: FdReport) {
        self.probes += other.probes;
        self.failures += other.failures;
        self.worst_rel = self.worst_rel.max(other.worst_rel);
    }
}

/// Compares `analytic` against central differences of `loss` at `probes`
/// random scalars of `params`. The relative error divides by the larger
/// magnitude, floored at `1e-6` so vanishing gradients do not divide by 0.
pub fn check_gradient(
    params: &ParamSet,
    analytic: &ParamSet,
    loss: impl Fn(&ParamSet) -> f64,
    probes: usize,
    rel_tol: f64,
    rng: &mut impl Rng,
) -> FdReport {
    let h = 1e-5;
    let sizes: Vec<usize> = params.arrays().map(|a| a.data().len()).collect();
    let mut report = FdReport::default();
    for _ in 0..probes {
        let which = rng.gen_range(0..sizes.len());
        let idx = rng.gen_range(0..sizes[which]);
        let nudged = |delta: f64| {
            let mut p = params.clone();
            p.arrays_mut().nth(which).unwrap().data_mut()[idx] += delta;
            loss(&p)
        };
        let numeric = (nudged(h) - nudged(-h)) / (2.0 * h);
        let exact = analytic.arrays().nth(which).unwrap().data()[idx];
        let abs = (numeric - exact).abs();
        let rel = abs / numeric.abs().max(exact.abs()).max(1e-6);
        report.probes += 1;
        if rel > rel_tol {
            report.failures += 1;
        }
        report.worst_rel = report.worst_rel.max(rel);
    }
    report
}

/// Advantages by direct summation of discounted rewards (the `lam = 1`
/// case): `A_t = sum_k gamma^(k-t) r_k + gamma^(n-t) V_boot - V_t`, cut
/// at the first terminal step.
pub fn direct_sum_advantages(rewards: &[f64], values: &[f64], dones: &[bool], gamma: f64, bootstrap: f64) -> Vec<f64> {
    let n = rewards.len();
    (0..n)
        .map(|t| {
            let mut total = 0.0;
            let mut discount = 1.0;
            let mut k = t;
            loop {
                total += discount * rewards[k];
                discount *= gamma;
                if dones[k] {
                    break;
                }
                k += 1;
                if k == n {
                    total += discount * bootstrap;
                    break;
                }
            }
            total - values[t]
        })
        .collect()
}
