//! Unified AST for both calculi, with capture-avoiding substitution,
//! alpha-equivalence, AC-canonicalization of probabilistic sums, and the
//! concrete syntax (lexer, parser, printer) for `.ldm` sources.
//!
//! A single [`Term`] type covers both languages; [`well_formed`] checks the
//! per-calculus restrictions (the classical-control calculus has pairs and
//! `letcase` but no sums; the probabilistic-control calculus has sums and
//! `letcase*` but no pairs).

mod lexer;
mod parser;
mod printer;

pub use parser::{parse, parse_pragma, ParseError};
pub use printer::{nice_scalar, print};

use std::collections::BTreeSet;

use thiserror::Error;

use crate::matrix::{DensityMatrix, UnitaryOp};
use crate::tol::tolerance;

/// Which calculus a source file or term is meant for.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Calculus {
    /// Classical control, probabilistic rewriting (`letcase`, pairs).
    Prob,
    /// Probabilistic control, deterministic rewriting (`letcase*`, sums).
    Mixed,
}

impl std::fmt::Display for Calculus {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Calculus::Prob => write!(f, "prob"),
            Calculus::Mixed => write!(f, "mixed"),
        }
    }
}

/// Byte-offset range into the source a term was parsed from.
pub type Span = (usize, usize);

/// A term of either calculus. Equality ignores spans; use [`alpha_eq`] for
/// equality up to bound-variable renaming.
#[derive(Debug, Clone)]
pub struct Term {
    pub kind: TermKind,
    pub span: Option<Span>,
}

impl PartialEq for Term {
    fn eq(&self, other: &Self) -> bool {
        self.kind == other.kind
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum TermKind {
    Var(String),
    Lam(String, Box<Term>),
    App(Box<Term>, Box<Term>),
    Rho(DensityMatrix),
    Unitary(GateExpr, Box<Term>),
    Meas(u32, Box<Term>),
    Tensor(Box<Term>, Box<Term>),
    /// Outcome literal `(b, ρ)` of an m-qubit measurement; classical control
    /// only.
    Pair(u64, u32, DensityMatrix),
    LetCase {
        /// `true` for `letcase*` (probabilistic control).
        star: bool,
        var: String,
        scrutinee: Box<Term>,
        branches: Vec<Term>,
    },
    /// Formal convex sum; probabilistic control only.
    Sum(Vec<(f64, Term)>),
}

/// Gate expression under `U[...]`: named gates, tensor products of gate
/// expressions, and explicit unitary literals.
#[derive(Debug, Clone, PartialEq)]
pub enum GateExpr {
    Named(Gate),
    TensorG(Box<GateExpr>, Box<GateExpr>),
    Lit(UnitaryOp),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Gate {
    /// Identity on `n ≥ 1` qubits.
    I(u32),
    X,
    Y,
    Z,
    H,
    Cnot,
}

impl GateExpr {
    pub fn qubits(&self) -> u32 {
        match self {
            GateExpr::Named(Gate::I(n)) => *n,
            GateExpr::Named(Gate::Cnot) => 2,
            GateExpr::Named(_) => 1,
            GateExpr::TensorG(a, b) => a.qubits() + b.qubits(),
            GateExpr::Lit(u) => u.qubits(),
        }
    }

    /// Resolves the expression to a concrete operator.
    pub fn to_op(&self) -> UnitaryOp {
        match self {
            GateExpr::Named(Gate::I(n)) => UnitaryOp::identity(*n),
            GateExpr::Named(Gate::X) => UnitaryOp::pauli_x(),
            GateExpr::Named(Gate::Y) => UnitaryOp::pauli_y(),
            GateExpr::Named(Gate::Z) => UnitaryOp::pauli_z(),
            GateExpr::Named(Gate::H) => UnitaryOp::hadamard(),
            GateExpr::Named(Gate::Cnot) => UnitaryOp::cnot(),
            GateExpr::TensorG(a, b) => a.to_op().tensor(&b.to_op()),
            GateExpr::Lit(u) => u.clone(),
        }
    }
}

/// Violations of the per-calculus well-formedness rules.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum SyntaxError {
    #[error("`{construct}` is not part of the {calculus} calculus")]
    WrongCalculus { construct: &'static str, calculus: Calculus },
    #[error("pair outcome {outcome} out of range for {measured} measured qubits")]
    PairOutcomeOutOfRange { outcome: u64, measured: u32 },
    #[error("pair measures {measured} qubits but carries a {qubits}-qubit state")]
    PairMeasuredTooLarge { measured: u32, qubits: u32 },
    #[error("letcase needs a power-of-two branch count of at least 2, got {count}")]
    BadBranchCount { count: usize },
    #[error("measurement width must be at least 1")]
    ZeroMeasurement,
    #[error("sum must have at least one addend")]
    EmptySum,
    #[error("sum weights total {total}, expected 1")]
    BadSumWeights { total: f64 },
    #[error("sum weight {weight} is not in (0, 1]")]
    BadWeight { weight: f64 },
}

// Span-less constructors; the parser attaches spans separately.

pub fn var(name: impl Into<String>) -> Term {
    Term { kind: TermKind::Var(name.into()), span: None }
}

pub fn lam(binder: impl Into<String>, body: Term) -> Term {
    Term { kind: TermKind::Lam(binder.into(), Box::new(body)), span: None }
}

pub fn app(fun: Term, arg: Term) -> Term {
    Term { kind: TermKind::App(Box::new(fun), Box::new(arg)), span: None }
}

pub fn rho(d: DensityMatrix) -> Term {
    Term { kind: TermKind::Rho(d), span: None }
}

pub fn unitary(g: GateExpr, t: Term) -> Term {
    Term { kind: TermKind::Unitary(g, Box::new(t)), span: None }
}

pub fn meas(m: u32, t: Term) -> Term {
    Term { kind: TermKind::Meas(m, Box::new(t)), span: None }
}

pub fn tensor(l: Term, r: Term) -> Term {
    Term { kind: TermKind::Tensor(Box::new(l), Box::new(r)), span: None }
}

pub fn pair(b: u64, m: u32, d: DensityMatrix) -> Term {
    Term { kind: TermKind::Pair(b, m, d), span: None }
}

pub fn letcase(
    star: bool,
    binder: impl Into<String>,
    scrutinee: Term,
    branches: Vec<Term>,
) -> Term {
    Term {
        kind: TermKind::LetCase {
            star,
            var: binder.into(),
            scrutinee: Box::new(scrutinee),
            branches,
        },
        span: None,
    }
}

pub fn sum(addends: Vec<(f64, Term)>) -> Term {
    Term { kind: TermKind::Sum(addends), span: None }
}

/// Free variables of `t`. The letcase binder scopes over the branches only,
/// not the scrutinee.
pub fn free_vars(t: &Term) -> BTreeSet<String> {
    fn go(t: &Term, out: &mut BTreeSet<String>, bound: &mut Vec<String>) {
        match &t.kind {
            TermKind::Var(x) => {
                if !bound.iter().any(|b| b == x) {
                    out.insert(x.clone());
                }
            }
            TermKind::Lam(x, body) => {
                bound.push(x.clone());
                go(body, out, bound);
                bound.pop();
            }
            TermKind::App(f, a) => {
                go(f, out, bound);
                go(a, out, bound);
            }
            TermKind::Rho(_) | TermKind::Pair(..) => {}
            TermKind::Unitary(_, inner) | TermKind::Meas(_, inner) => go(inner, out, bound),
            TermKind::Tensor(l, r) => {
                go(l, out, bound);
                go(r, out, bound);
            }
            TermKind::LetCase { var, scrutinee, branches, .. } => {
                go(scrutinee, out, bound);
                bound.push(var.clone());
                for b in branches {
                    go(b, out, bound);
                }
                bound.pop();
            }
            TermKind::Sum(addends) => {
                for (_, a) in addends {
                    go(a, out, bound);
                }
            }
        }
    }
    let mut out = BTreeSet::new();
    go(t, &mut out, &mut Vec::new());
    out
}

/// Smallest prime-suffixed variant of `base` not contained in `avoid`.
fn fresh_name(base: &str, avoid: &BTreeSet<String>) -> String {
    let mut candidate = format!("{base}'");
    while avoid.contains(&candidate) {
        candidate.push('\'');
    }
    candidate
}

/// Capture-avoiding substitution `t[r/x]`. Binders that would capture free
/// variables of `r` are renamed with prime suffixes.
pub fn subst(t: &Term, x: &str, r: &Term) -> Term {
    match &t.kind {
        TermKind::Var(y) => {
            if y == x {
                r.clone()
            } else {
                t.clone()
            }
        }
        TermKind::Lam(y, body) => {
            if y == x || !free_vars(body).contains(x) {
                t.clone()
            } else if free_vars(r).contains(y) {
                let mut avoid = free_vars(body);
                avoid.extend(free_vars(r));
                avoid.insert(x.to_string());
                let y2 = fresh_name(y, &avoid);
                let renamed = subst(body, y, &var(y2.clone()));
                lam(y2, subst(&renamed, x, r))
            } else {
                lam(y.clone(), subst(body, x, r))
            }
        }
        TermKind::App(f, a) => app(subst(f, x, r), subst(a, x, r)),
        TermKind::Rho(_) | TermKind::Pair(..) => t.clone(),
        TermKind::Unitary(g, inner) => unitary(g.clone(), subst(inner, x, r)),
        TermKind::Meas(m, inner) => meas(*m, subst(inner, x, r)),
        TermKind::Tensor(l, rr) => tensor(subst(l, x, r), subst(rr, x, r)),
        TermKind::LetCase { star, var: y, scrutinee, branches } => {
            let scrut = subst(scrutinee, x, r);
            if y == x || !branches.iter().any(|b| free_vars(b).contains(x)) {
                letcase(*star, y.clone(), scrut, branches.clone())
            } else if free_vars(r).contains(y) {
                let mut avoid: BTreeSet<String> = BTreeSet::new();
                for b in branches {
                    avoid.extend(free_vars(b));
                }
                avoid.extend(free_vars(r));
                avoid.insert(x.to_string());
                let y2 = fresh_name(y, &avoid);
                let renamed: Vec<Term> =
                    branches.iter().map(|b| subst(b, y, &var(y2.clone()))).collect();
                let substituted = renamed.iter().map(|b| subst(b, x, r)).collect();
                letcase(*star, y2, scrut, substituted)
            } else {
                letcase(*star, y.clone(), scrut, branches.iter().map(|b| subst(b, x, r)).collect())
            }
        }
        TermKind::Sum(addends) => {
            sum(addends.iter().map(|(p, a)| (*p, subst(a, x, r))).collect())
        }
    }
}

/// Alpha-equivalence: equality up to consistent renaming of bound variables.
/// Density-matrix leaves compare within the global tolerance; sums compare
/// modulo associativity, commutativity and merging of equal addends.
pub fn alpha_eq(a: &Term, b: &Term) -> bool {
    fn lookup(stack: &[(String, String)], x: &str) -> Option<usize> {
        stack.iter().rposition(|(l, _)| l == x)
    }
    fn lookup_right(stack: &[(String, String)], y: &str) -> Option<usize> {
        stack.iter().rposition(|(_, r)| r == y)
    }
    fn go(a: &Term, b: &Term, stack: &mut Vec<(String, String)>) -> bool {
        let tol = tolerance();
        match (&a.kind, &b.kind) {
            (TermKind::Var(x), TermKind::Var(y)) => {
                match (lookup(stack, x), lookup_right(stack, y)) {
                    (Some(i), Some(j)) => i == j,
                    (None, None) => x == y,
                    _ => false,
                }
            }
            (TermKind::Lam(x, tb), TermKind::Lam(y, sb)) => {
                stack.push((x.clone(), y.clone()));
                let r = go(tb, sb, stack);
                stack.pop();
                r
            }
            (TermKind::App(f1, a1), TermKind::App(f2, a2)) => {
                go(f1, f2, stack) && go(a1, a2, stack)
            }
            (TermKind::Rho(d1), TermKind::Rho(d2)) => d1.approx_eq(d2, tol),
            (TermKind::Unitary(g1, t1), TermKind::Unitary(g2, t2)) => {
                g1.to_op().matrix().approx_eq(g2.to_op().matrix(), tol) && go(t1, t2, stack)
            }
            (TermKind::Meas(m1, t1), TermKind::Meas(m2, t2)) => m1 == m2 && go(t1, t2, stack),
            (TermKind::Tensor(l1, r1), TermKind::Tensor(l2, r2)) => {
                go(l1, l2, stack) && go(r1, r2, stack)
            }
            (TermKind::Pair(b1, m1, d1), TermKind::Pair(b2, m2, d2)) => {
                b1 == b2 && m1 == m2 && d1.approx_eq(d2, tol)
            }
            (
                TermKind::LetCase { star: s1, var: x, scrutinee: sc1, branches: bs1 },
                TermKind::LetCase { star: s2, var: y, scrutinee: sc2, branches: bs2 },
            ) => {
                if s1 != s2 || bs1.len() != bs2.len() || !go(sc1, sc2, stack) {
                    return false;
                }
                stack.push((x.clone(), y.clone()));
                let r = bs1.iter().zip(bs2).all(|(t1, t2)| go(t1, t2, stack));
                stack.pop();
                r
            }
            (TermKind::Sum(_), TermKind::Sum(_)) => {
                // Compare canonicalized addend multisets; after merging,
                // addends are pairwise distinct, so greedy matching is exact.
                let left_names: Vec<String> = stack.iter().map(|(l, _)| l.clone()).collect();
                let right_names: Vec<String> = stack.iter().map(|(_, r)| r.clone()).collect();
                let xs = merge_addends_under(flatten_sum(a), &left_names);
                let ys = merge_addends_under(flatten_sum(b), &right_names);
                if xs.len() != ys.len() {
                    return false;
                }
                let mut used = vec![false; ys.len()];
                for (p, ta) in &xs {
                    let mut found = false;
                    for (j, (q, tb)) in ys.iter().enumerate() {
                        if !used[j] && (p - q).abs() <= tol * 10.0 && go(ta, tb, stack) {
                            used[j] = true;
                            found = true;
                            break;
                        }
                    }
                    if !found {
                        return false;
                    }
                }
                true
            }
            _ => false,
        }
    }
    // Merges alpha-equal addends of one side; comparisons between addends of
    // the same term run under an identity stack over that side's binders.
    fn merge_addends_under(addends: Vec<(f64, Term)>, names: &[String]) -> Vec<(f64, Term)> {
        let mut id_stack: Vec<(String, String)> =
            names.iter().map(|n| (n.clone(), n.clone())).collect();
        let mut out: Vec<(f64, Term)> = Vec::new();
        for (p, t) in addends {
            match out.iter_mut().find(|(_, u)| go(&t, u, &mut id_stack)) {
                Some((q, _)) => *q += p,
                None => out.push((p, t)),
            }
        }
        out
    }
    go(a, b, &mut Vec::new())
}

/// Flattens nested sums directly under a Sum node, multiplying weights.
fn flatten_sum(t: &Term) -> Vec<(f64, Term)> {
    fn go(weight: f64, t: &Term, out: &mut Vec<(f64, Term)>) {
        match &t.kind {
            TermKind::Sum(addends) => {
                for (p, a) in addends {
                    go(weight * p, a, out);
                }
            }
            _ => out.push((weight, t.clone())),
        }
    }
    let mut out = Vec::new();
    go(1.0, t, &mut out);
    out
}

/// AC-canonical form of a sum: nested sums flattened (weights multiplying),
/// alpha-equal addends merged by adding weights, addends sorted by printed
/// form (weight as tie-break), negligible weights dropped. A single-addend
/// result stays a Sum node — collapsing `sum { 1: t }` to `t` is a rewrite
/// step of the probabilistic-control calculus, not a formatting identity.
pub fn canonical_sum(t: &Term) -> Term {
    debug_assert!(matches!(t.kind, TermKind::Sum(_)), "canonical_sum needs a Sum node");
    let tol = tolerance();
    let flat = flatten_sum(t);
    let mut merged: Vec<(f64, Term)> = Vec::new();
    for (p, a) in flat {
        // Canonicalize sums nested deeper than the top spine so merging sees
        // them in normal form.
        let a = deep_canonical(&a);
        match merged.iter_mut().find(|(_, u)| alpha_eq(&a, u)) {
            Some((q, _)) => *q += p,
            None => merged.push((p, a)),
        }
    }
    merged.retain(|(p, _)| *p > tol);
    merged.sort_by(|(p1, t1), (p2, t2)| {
        print(t1)
            .cmp(&print(t2))
            .then(p1.partial_cmp(p2).unwrap_or(std::cmp::Ordering::Equal))
    });
    sum(merged)
}

/// Canonicalizes every Sum node in `t`, bottom-up.
pub fn deep_canonical(t: &Term) -> Term {
    match &t.kind {
        TermKind::Var(_) | TermKind::Rho(_) | TermKind::Pair(..) => t.clone(),
        TermKind::Lam(x, b) => lam(x.clone(), deep_canonical(b)),
        TermKind::App(f, a) => app(deep_canonical(f), deep_canonical(a)),
        TermKind::Unitary(g, inner) => unitary(g.clone(), deep_canonical(inner)),
        TermKind::Meas(m, inner) => meas(*m, deep_canonical(inner)),
        TermKind::Tensor(l, r) => tensor(deep_canonical(l), deep_canonical(r)),
        TermKind::LetCase { star, var, scrutinee, branches } => letcase(
            *star,
            var.clone(),
            deep_canonical(scrutinee),
            branches.iter().map(deep_canonical).collect(),
        ),
        TermKind::Sum(addends) => {
            let inner = sum(
                addends.iter().map(|(p, a)| (*p, deep_canonical(a))).collect(),
            );
            canonical_sum(&inner)
        }
    }
}

/// Checks the per-calculus well-formedness invariants, recursively.
pub fn well_formed(t: &Term, calculus: Calculus) -> Result<(), SyntaxError> {
    match &t.kind {
        TermKind::Var(_) | TermKind::Rho(_) => Ok(()),
        TermKind::Lam(_, b) => well_formed(b, calculus),
        TermKind::App(f, a) => {
            well_formed(f, calculus)?;
            well_formed(a, calculus)
        }
        TermKind::Unitary(_, inner) => well_formed(inner, calculus),
        TermKind::Meas(m, inner) => {
            if *m < 1 {
                return Err(SyntaxError::ZeroMeasurement);
            }
            well_formed(inner, calculus)
        }
        TermKind::Tensor(l, r) => {
            well_formed(l, calculus)?;
            well_formed(r, calculus)
        }
        TermKind::Pair(b, m, d) => {
            if calculus == Calculus::Mixed {
                return Err(SyntaxError::WrongCalculus { construct: "pair", calculus });
            }
            if *m < 1 || *b >= (1u64 << m.min(&63)) {
                return Err(SyntaxError::PairOutcomeOutOfRange { outcome: *b, measured: *m });
            }
            if *m > d.qubits() {
                return Err(SyntaxError::PairMeasuredTooLarge { measured: *m, qubits: d.qubits() });
            }
            Ok(())
        }
        TermKind::LetCase { star, scrutinee, branches, .. } => {
            match (star, calculus) {
                (true, Calculus::Prob) => {
                    return Err(SyntaxError::WrongCalculus { construct: "letcase*", calculus })
                }
                (false, Calculus::Mixed) => {
                    return Err(SyntaxError::WrongCalculus { construct: "letcase", calculus })
                }
                _ => {}
            }
            if branches.len() < 2 || !branches.len().is_power_of_two() {
                return Err(SyntaxError::BadBranchCount { count: branches.len() });
            }
            well_formed(scrutinee, calculus)?;
            for b in branches {
                well_formed(b, calculus)?;
            }
            Ok(())
        }
        TermKind::Sum(addends) => {
            if calculus == Calculus::Prob {
                return Err(SyntaxError::WrongCalculus { construct: "sum", calculus });
            }
            if addends.is_empty() {
                return Err(SyntaxError::EmptySum);
            }
            let mut total = 0.0;
            for (p, a) in addends {
                if *p <= tolerance() || *p > 1.0 + tolerance() {
                    return Err(SyntaxError::BadWeight { weight: *p });
                }
                total += p;
                well_formed(a, calculus)?;
            }
            if (total - 1.0).abs() > tolerance() * 10.0 {
                return Err(SyntaxError::BadSumWeights { total });
            }
            Ok(())
        }
    }
}
