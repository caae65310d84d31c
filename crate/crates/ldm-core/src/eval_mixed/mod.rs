//! The deterministic rewrite relation of the probabilistic-control
//! calculus.
//!
//! One step rewrites the leftmost-outermost redex (under binders included);
//! measurement branching becomes a formal convex sum instead of a tree
//! fork, so reduction is a straight line. Every stepped result is deeply
//! sum-canonicalized — nested sums flattened, alpha-equal addends merged,
//! addends sorted — which keeps the relation a function and keeps sums in
//! the shape the value grammar expects.
//!
//! At a Sum node the applicable rules are tried in a fixed order: collapse
//! when all addends are equal, combine when all addends are densities,
//! merge duplicate addends, and only then step inside the first reducible
//! addend. A bare `meas[m] rho` never fires on its own — an unobserved
//! measurement has no meaning here until a `letcase*` consumes it — so it
//! is reported stuck rather than treated as a value.

use std::fmt;

use crate::eval_prob::EvalError;
use crate::matrix::DensityMatrix;
use crate::syntax::{
    alpha_eq, app, deep_canonical, free_vars, lam, letcase, meas, print, rho, subst, sum, tensor,
    unitary, Term, TermKind,
};


/// Rule names as they appear in step logs.
pub const RULE_BETA: &str = "beta";
pub const RULE_LETCASE: &str = "letcase";
pub const RULE_UNITARY: &str = "unitary";
pub const RULE_TENSOR: &str = "tensor";
pub const RULE_SUM_COLLAPSE: &str = "sum-collapse";
pub const RULE_SUM_DENSITY: &str = "sum-density";
pub const RULE_SUM_MERGE: &str = "sum-merge";
pub const RULE_SUM_APP: &str = "sum-app";

/// Why a non-value normal form cannot step.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StuckReason {
    /// A measurement pending over a density: only `letcase*` may consume
    /// it, so on its own it is neither a value nor reducible.
    MeasurementNotObservable,
    /// Measurement applied to a value that is not a density.
    MeasureOfNonDensity,
    /// Measurement wider than the state it probes.
    MeasureArityMismatch,
    /// Gate applied to a value that is not a density.
    GateOnNonDensity,
    /// Gate width differs from the width of the state.
    GateArityMismatch,
    /// A value other than an abstraction in function position.
    NotAFunction,
    /// `letcase*` whose branch count is not two to the measurement width.
    BranchCountMismatch,
    /// `letcase*` scrutinizing a value instead of a measurement.
    ScrutineeNotMeasurement,
    /// Addends of a density sum with different qubit counts.
    MixedDimensions,
    /// An outcome pair, which belongs to the classical-control calculus.
    OutcomePair,
    /// An open term blocked on one of its free variables.
    FreeVariable,
}

impl fmt::Display for StuckReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let msg = match self {
            StuckReason::MeasurementNotObservable => {
                "measurement result is not observable outside a letcase*"
            }
            StuckReason::MeasureOfNonDensity => "measurement of a non-density value",
            StuckReason::MeasureArityMismatch => "measurement is wider than the state",
            StuckReason::GateOnNonDensity => "gate applied to a non-density value",
            StuckReason::GateArityMismatch => "gate width does not match the state",
            StuckReason::NotAFunction => "application of a value that is not a function",
            StuckReason::BranchCountMismatch => {
                "letcase* branch count is not 2^m for meas[m]"
            }
            StuckReason::ScrutineeNotMeasurement => "letcase* scrutinee is not a measurement",
            StuckReason::MixedDimensions => "sum of densities of different sizes",
            StuckReason::OutcomePair => "outcome pair outside the classical-control calculus",
            StuckReason::FreeVariable => "blocked on a free variable",
        };
        f.write_str(msg)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum MixedStepResult {
    Stepped { term: Term, rule: &'static str },
    Value,
    Stuck(StuckReason),
}

enum Walk {
    Stepped(Term, &'static str),
    Normal,
}

fn wrap(w: Walk, f: impl FnOnce(Term) -> Term) -> Option<Walk> {
    match w {
        Walk::Stepped(t, rule) => Some(Walk::Stepped(f(t), rule)),
        Walk::Normal => None,
    }
}

fn go(t: &Term) -> Walk {
    match &t.kind {
        TermKind::Var(_) | TermKind::Rho(_) | TermKind::Pair(..) => Walk::Normal,
        TermKind::Lam(x, body) => wrap(go(body), |b| lam(x.clone(), b)).unwrap_or(Walk::Normal),
        TermKind::App(fun, arg) => {
            if let TermKind::Lam(x, body) = &fun.kind {
                return Walk::Stepped(subst(body, x, arg), RULE_BETA);
            }
            if let TermKind::Sum(addends) = &fun.kind {
                let distributed = addends
                    .iter()
                    .map(|(p, f)| (*p, app(f.clone(), arg.as_ref().clone())))
                    .collect();
                return Walk::Stepped(sum(distributed), RULE_SUM_APP);
            }
            wrap(go(fun), |f| app(f, arg.as_ref().clone()))
                .or_else(|| wrap(go(arg), |a| app(fun.as_ref().clone(), a)))
                .unwrap_or(Walk::Normal)
        }
        TermKind::Unitary(g, body) => {
            if let TermKind::Rho(d) = &body.kind {
                // A width mismatch leaves the term stuck; diagnosis happens
                // during classification.
                return match d.evolve(&g.to_op()) {
                    Ok(evolved) => Walk::Stepped(rho(evolved), RULE_UNITARY),
                    Err(_) => Walk::Normal,
                };
            }
            wrap(go(body), |b| unitary(g.clone(), b)).unwrap_or(Walk::Normal)
        }
        TermKind::Meas(m, body) => {
            // An unconsumed measurement never fires by itself.
            wrap(go(body), |b| meas(*m, b)).unwrap_or(Walk::Normal)
        }
        TermKind::Tensor(l, r) => {
            if let (TermKind::Rho(dl), TermKind::Rho(dr)) = (&l.kind, &r.kind) {
                return Walk::Stepped(rho(dl.tensor(dr)), RULE_TENSOR);
            }
            wrap(go(l), |l| tensor(l, r.as_ref().clone()))
                .or_else(|| wrap(go(r), |r| tensor(l.as_ref().clone(), r)))
                .unwrap_or(Walk::Normal)
        }
        TermKind::LetCase { star, var, scrutinee, branches } => {
            debug_assert!(*star, "classical-control letcase during probabilistic-control evaluation");
            if let TermKind::Meas(m, operand) = &scrutinee.kind {
                if let TermKind::Rho(d) = &operand.kind {
                    if branches.len() == (1usize << *m) {
                        if let Ok(outcomes) = d.measure_comp(*m) {
                            let addends = outcomes
                                .into_iter()
                                .map(|o| {
                                    let branch = &branches[o.outcome as usize];
                                    (o.prob, subst(branch, var, &rho(o.state)))
                                })
                                .collect();
                            return Walk::Stepped(sum(addends), RULE_LETCASE);
                        }
                    }
                    return Walk::Normal;
                }
            }
            wrap(go(scrutinee), |s| letcase(*star, var.clone(), s, branches.clone()))
                .unwrap_or(Walk::Normal)
        }
        TermKind::Sum(addends) => {
            let first = &addends[0].1;
            if addends.iter().all(|(_, a)| alpha_eq(a, first)) {
                return Walk::Stepped(first.clone(), RULE_SUM_COLLAPSE);
            }
            if addends.iter().all(|(_, a)| matches!(a.kind, TermKind::Rho(_))) {
                let parts: Vec<_> = addends
                    .iter()
                    .map(|(p, a)| match &a.kind {
                        TermKind::Rho(d) => (*p, d.clone()),
                        _ => unreachable!(),
                    })
                    .collect();
                return match DensityMatrix::weighted_sum(&parts) {
                    Ok(combined) => Walk::Stepped(rho(combined), RULE_SUM_DENSITY),
                    // Densities of different sizes: stuck, never well-typed.
                    Err(_) => Walk::Normal,
                };
            }
            // Duplicate addends in raw input merge through canonicalization;
            // stepped terms are already canonical, so this cannot loop.
            let has_duplicates = addends
                .iter()
                .enumerate()
                .any(|(i, (_, a))| addends[..i].iter().any(|(_, b)| alpha_eq(a, b)));
            if has_duplicates {
                return Walk::Stepped(t.clone(), RULE_SUM_MERGE);
            }
            for (i, (_, addend)) in addends.iter().enumerate() {
                if let Walk::Stepped(stepped, rule) = go(addend) {
                    let mut next = addends.clone();
                    next[i].1 = stepped;
                    return Walk::Stepped(sum(next), rule);
                }
            }
            Walk::Normal
        }
    }
}

fn closed(t: &Term) -> bool {
    free_vars(t).is_empty()
}

/// First irreparably blocked position in a normal form, if any. Only
/// meaningful on terms `go` reports normal; branch bodies of a `letcase*`
/// are not inspected because reduction never enters them.
fn hard_reason(t: &Term) -> Option<StuckReason> {
    match &t.kind {
        TermKind::Var(_) | TermKind::Rho(_) => None,
        TermKind::Pair(..) => Some(StuckReason::OutcomePair),
        TermKind::Lam(_, body) => hard_reason(body),
        TermKind::App(fun, arg) => hard_reason(fun).or_else(|| hard_reason(arg)).or_else(|| {
            (closed(fun) && is_value(fun) && !matches!(fun.kind, TermKind::Lam(..)))
                .then_some(StuckReason::NotAFunction)
        }),
        TermKind::Unitary(g, body) => hard_reason(body).or_else(|| match &body.kind {
            TermKind::Rho(d) => {
                d.evolve(&g.to_op()).is_err().then_some(StuckReason::GateArityMismatch)
            }
            _ => (closed(body) && is_value(body)).then_some(StuckReason::GateOnNonDensity),
        }),
        TermKind::Meas(m, body) => hard_reason(body).or_else(|| match &body.kind {
            TermKind::Rho(d) => Some(if *m > d.qubits() {
                StuckReason::MeasureArityMismatch
            } else {
                StuckReason::MeasurementNotObservable
            }),
            _ => (closed(body) && is_value(body)).then_some(StuckReason::MeasureOfNonDensity),
        }),
        TermKind::Tensor(l, r) => hard_reason(l).or_else(|| hard_reason(r)),
        TermKind::LetCase { scrutinee, branches, .. } => {
            if let TermKind::Meas(m, operand) = &scrutinee.kind {
                if matches!(operand.kind, TermKind::Rho(_)) {
                    // The redex would have fired otherwise.
                    return Some(if branches.len() != (1usize << *m) {
                        StuckReason::BranchCountMismatch
                    } else {
                        StuckReason::MeasureArityMismatch
                    });
                }
                return hard_reason(operand).or_else(|| {
                    (closed(operand) && is_value(operand))
                        .then_some(StuckReason::MeasureOfNonDensity)
                });
            }
            hard_reason(scrutinee).or_else(|| {
                (closed(scrutinee) && is_value(scrutinee))
                    .then_some(StuckReason::ScrutineeNotMeasurement)
            })
        }
        TermKind::Sum(addends) => {
            if let Some(reason) = addends.iter().find_map(|(_, a)| hard_reason(a)) {
                return Some(reason);
            }
            addends
                .iter()
                .all(|(_, a)| matches!(a.kind, TermKind::Rho(_)))
                .then_some(StuckReason::MixedDimensions)
        }
    }
}

/// The value grammar: variables, densities, abstractions over normal
/// non-stuck bodies, tensors of values, and sums of two or more pairwise
/// distinct values. A sum of densities always combines into one density
/// first, so it is never a value, and a pending measurement is stuck,
/// not a value.
pub fn is_value(t: &Term) -> bool {
    match &t.kind {
        TermKind::Var(_) | TermKind::Rho(_) => true,
        TermKind::Lam(_, body) => {
            matches!(go(body), Walk::Normal) && hard_reason(body).is_none()
        }
        TermKind::Tensor(l, r) => {
            is_value(l)
                && is_value(r)
                && !(matches!(l.kind, TermKind::Rho(_)) && matches!(r.kind, TermKind::Rho(_)))
        }
        TermKind::Sum(addends) => {
            addends.len() >= 2
                && addends.iter().all(|(_, a)| is_value(a))
                && !addends.iter().all(|(_, a)| matches!(a.kind, TermKind::Rho(_)))
                && addends
                    .iter()
                    .enumerate()
                    .all(|(i, (_, a))| !addends[..i].iter().any(|(_, b)| alpha_eq(a, b)))
        }
        _ => false,
    }
}

/// One deterministic step. Stepped results come back deeply
/// sum-canonicalized, tagged with the name of the rule that fired.
pub fn step_mixed(t: &Term) -> MixedStepResult {
    match go(t) {
        Walk::Stepped(stepped, rule) => {
            MixedStepResult::Stepped { term: deep_canonical(&stepped), rule }
        }
        Walk::Normal => {
            if is_value(t) {
                MixedStepResult::Value
            } else {
                MixedStepResult::Stuck(hard_reason(t).unwrap_or(StuckReason::FreeVariable))
            }
        }
    }
}

/// One entry of a reduction log: the rule that fired and the term it
/// produced.
#[derive(Debug, Clone, PartialEq)]
pub struct LogEntry {
    pub rule: &'static str,
    pub term: Term,
}

impl LogEntry {
    pub fn render(&self) -> String {
        format!("{}  {}", self.rule, print(&self.term))
    }
}

/// Reduces to a value or stuck term, recording one entry per step.
pub fn normalize_with_log(t: &Term, fuel: u64) -> Result<(Term, Vec<LogEntry>), EvalError> {
    let mut current = t.clone();
    let mut log = Vec::new();
    for _ in 0..=fuel {
        match step_mixed(&current) {
            MixedStepResult::Stepped { term, rule } => {
                log.push(LogEntry { rule, term: term.clone() });
                current = term;
            }
            MixedStepResult::Value | MixedStepResult::Stuck(_) => return Ok((current, log)),
        }
    }
    Err(EvalError::FuelExhausted)
}

/// Reduces to a value or stuck term, keeping only the result.
pub fn normalize_mixed(t: &Term, fuel: u64) -> Result<Term, EvalError> {
    normalize_with_log(t, fuel).map(|(t, _)| t)
}
