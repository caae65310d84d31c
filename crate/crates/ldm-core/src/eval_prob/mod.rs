//! The probabilistic rewrite relation of the classical-control calculus,
//! plus exhaustive trace trees over it.
//!
//! The relation itself is nondeterministic; we fix one strategy so traces
//! are reproducible. A step works argument-first: in an application the
//! argument is reduced to normal form before the function, and beta fires
//! as soon as the function is a lambda, without normalizing its body.
//! Measurements are the only probabilistic rule: each outcome becomes one
//! child weighted by its Born probability, with the outcome word encoded
//! little-endian (bit `k-1` holds qubit `k`'s result) and used directly as
//! the branch index of a consuming `letcase`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value as Json};

use crate::matrix::{DensityMatrix, MatrixError};
use crate::syntax::{
    alpha_eq, free_vars, print, subst, Calculus, Term, TermKind,
};
use crate::typing::{infer, Context, Type};

#[cfg(test)]
mod tests;

#[derive(Debug, Clone, PartialEq)]
pub enum EvalError {
    /// A rewrite rule matched structurally but its data is impossible on a
    /// well-typed term (unitary arity above the state size, a closed
    /// non-density value under a gate, ...). Signals a progress violation.
    IllFormedRedex { at: String, reason: String },
    /// `final_distribution` over a tree with fuel-exhausted leaves.
    IncompleteTrace,
    /// `distribution_density` over a non-density leaf.
    NonDensityLeaf { term: String },
    /// `distribution_density` over densities of unequal qubit counts.
    MixedDimensions { left: u32, right: u32 },
    /// `sample_run` ran out of fuel before reaching a normal form.
    FuelExhausted,
    Matrix(MatrixError),
}

impl std::fmt::Display for EvalError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            EvalError::IllFormedRedex { at, reason } => {
                write!(f, "ill-formed redex at `{at}`: {reason}")
            }
            EvalError::IncompleteTrace => {
                write!(f, "trace has fuel-exhausted leaves; raise the fuel limit")
            }
            EvalError::NonDensityLeaf { term } => {
                write!(f, "trace leaf `{term}` is not a density matrix")
            }
            EvalError::MixedDimensions { left, right } => {
                write!(f, "trace leaves mix {left}- and {right}-qubit densities")
            }
            EvalError::FuelExhausted => write!(f, "fuel exhausted before a normal form"),
            EvalError::Matrix(e) => write!(f, "{e}"),
        }
    }
}

impl std::error::Error for EvalError {}

impl From<MatrixError> for EvalError {
    fn from(e: MatrixError) -> Self {
        EvalError::Matrix(e)
    }
}

/// One-step reducts with their probabilities; probabilities sum to 1.
pub type Distribution = Vec<(f64, Term)>;

fn ill(t: &Term, reason: &str) -> EvalError {
    EvalError::IllFormedRedex { at: print(t), reason: reason.to_string() }
}

fn rebuild(dist: Distribution, wrap: impl Fn(Term) -> Term) -> Distribution {
    dist.into_iter().map(|(p, r)| (p, wrap(r))).collect()
}

/// The unique strategy-selected redex of `t`, reduced; `None` when `t` is
/// in normal form (a value, or stuck).
pub fn step_prob(t: &Term) -> Result<Option<Distribution>, EvalError> {
    match &t.kind {
        TermKind::Var(_) | TermKind::Rho(_) | TermKind::Pair(..) => Ok(None),
        TermKind::Lam(x, body) => {
            let x = x.clone();
            Ok(step_prob(body)?
                .map(|d| rebuild(d, |b| crate::syntax::lam(x.clone(), b))))
        }
        TermKind::App(fun, arg) => {
            if let Some(d) = step_prob(arg)? {
                let fun = fun.as_ref().clone();
                return Ok(Some(rebuild(d, |a| crate::syntax::app(fun.clone(), a))));
            }
            if let TermKind::Lam(x, body) = &fun.kind {
                return Ok(Some(vec![(1.0, subst(body, x, arg))]));
            }
            if let Some(d) = step_prob(fun)? {
                let arg = arg.as_ref().clone();
                return Ok(Some(rebuild(d, |f| crate::syntax::app(f, arg.clone()))));
            }
            Ok(None)
        }
        TermKind::Unitary(g, body) => {
            if let TermKind::Rho(d) = &body.kind {
                let op = g.to_op();
                let evolved = d.evolve(&op).map_err(|e| ill(t, &e.to_string()))?;
                return Ok(Some(vec![(1.0, crate::syntax::rho(evolved))]));
            }
            if let Some(d) = step_prob(body)? {
                let g = g.clone();
                return Ok(Some(rebuild(d, |b| crate::syntax::unitary(g.clone(), b))));
            }
            if free_vars(body).is_empty() {
                return Err(ill(t, "gate applied to a non-density normal form"));
            }
            Ok(None)
        }
        TermKind::Meas(m, body) => {
            if let TermKind::Rho(d) = &body.kind {
                let outcomes = d.measure_comp(*m).map_err(|e| ill(t, &e.to_string()))?;
                return Ok(Some(
                    outcomes
                        .into_iter()
                        .map(|o| (o.prob, crate::syntax::pair(o.outcome, *m, o.state)))
                        .collect(),
                ));
            }
            if let Some(d) = step_prob(body)? {
                let m = *m;
                return Ok(Some(rebuild(d, |b| crate::syntax::meas(m, b))));
            }
            if free_vars(body).is_empty() {
                return Err(ill(t, "measurement of a non-density normal form"));
            }
            Ok(None)
        }
        TermKind::Tensor(l, r) => {
            if let (TermKind::Rho(dl), TermKind::Rho(dr)) = (&l.kind, &r.kind) {
                return Ok(Some(vec![(1.0, crate::syntax::rho(dl.tensor(dr)))]));
            }
            if let Some(d) = step_prob(l)? {
                let r = r.as_ref().clone();
                return Ok(Some(rebuild(d, |l| crate::syntax::tensor(l, r.clone()))));
            }
            if let Some(d) = step_prob(r)? {
                let l = l.as_ref().clone();
                return Ok(Some(rebuild(d, |r| crate::syntax::tensor(l.clone(), r))));
            }
            Ok(None)
        }
        TermKind::LetCase { star, var, scrutinee, branches } => {
            debug_assert!(!star, "probabilistic control construct in the classical calculus");
            if let TermKind::Pair(b, m, d) = &scrutinee.kind {
                if branches.len() != (1usize << m) {
                    return Err(ill(t, "branch count does not match the measured qubits"));
                }
                let chosen = &branches[*b as usize];
                return Ok(Some(vec![(1.0, subst(chosen, var, &crate::syntax::rho(d.clone())))]));
            }
            if let Some(d) = step_prob(scrutinee)? {
                let (star, var) = (*star, var.clone());
                let branches = branches.clone();
                return Ok(Some(rebuild(d, |s| {
                    crate::syntax::letcase(star, var.clone(), s, branches.clone())
                })));
            }
            Ok(None)
        }
        TermKind::Sum(_) => {
            debug_assert!(false, "sum in the classical-control calculus");
            Ok(None)
        }
    }
}

/// Does this normal form contain a position no rule can ever unblock?
/// Variable-blocked subterms are not hard: binding the variable may revive
/// them. Hard positions witness progress violations on closed terms.
fn hard_stuck(t: &Term) -> bool {
    let closed_value = |t: &Term| free_vars(t).is_empty() && is_value(t);
    match &t.kind {
        TermKind::Var(_) | TermKind::Rho(_) | TermKind::Pair(..) => false,
        TermKind::Lam(_, body) => hard_stuck(body),
        TermKind::App(fun, arg) => {
            hard_stuck(fun)
                || hard_stuck(arg)
                || (closed_value(fun) && !matches!(fun.kind, TermKind::Lam(..)))
        }
        TermKind::Unitary(_, body) | TermKind::Meas(_, body) => {
            hard_stuck(body)
                || (closed_value(body) && !matches!(body.kind, TermKind::Rho(_)))
        }
        TermKind::Tensor(l, r) => hard_stuck(l) || hard_stuck(r),
        TermKind::LetCase { scrutinee, .. } => {
            hard_stuck(scrutinee)
                || (closed_value(scrutinee) && !matches!(scrutinee.kind, TermKind::Pair(..)))
        }
        TermKind::Sum(addends) => addends.iter().any(|(_, t)| hard_stuck(t)),
    }
}

/// The value predicate: variables, densities, outcome pairs, tensors of
/// values, and abstractions whose bodies are normal and not hard-stuck.
/// The abstraction case is deliberately wider than "body is a value": a
/// body like `meas[1] x` cannot step yet is a perfectly good function
/// body, and closed typed normal forms of that shape must count as values
/// for progress to hold.
pub fn is_value(t: &Term) -> bool {
    match &t.kind {
        TermKind::Var(_) | TermKind::Rho(_) | TermKind::Pair(..) => true,
        TermKind::Lam(_, body) => {
            matches!(step_prob(body), Ok(None)) && !hard_stuck(body)
        }
        TermKind::Tensor(l, r) => is_value(l) && is_value(r) && !both_rho(l, r),
        _ => false,
    }
}

fn both_rho(l: &Term, r: &Term) -> bool {
    matches!(l.kind, TermKind::Rho(_)) && matches!(r.kind, TermKind::Rho(_))
}

/// Why a trace node has no children.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LeafStatus {
    /// Not a leaf.
    Internal,
    Value,
    /// Normal form outside the value grammar.
    Stuck,
    FuelExhausted,
}

#[derive(Debug, Clone)]
pub struct TraceTree {
    pub term: Term,
    pub ty: Option<Type>,
    pub status: LeafStatus,
    pub children: Vec<(f64, TraceTree)>,
}

impl TraceTree {
    pub fn leaf_count(&self) -> usize {
        if self.children.is_empty() {
            1
        } else {
            self.children.iter().map(|(_, c)| c.leaf_count()).sum()
        }
    }

    pub fn edge_count(&self) -> usize {
        self.children.len() + self.children.iter().map(|(_, c)| c.edge_count()).sum::<usize>()
    }

    pub fn depth(&self) -> usize {
        1 + self.children.iter().map(|(_, c)| c.depth()).max().unwrap_or(0)
    }
}

/// Exhaustively expand `t` under [`step_prob`]. `fuel` bounds the length
/// of each root-to-leaf path; paths cut short are flagged, not errors.
pub fn build_trace(t: &Term, fuel: u64) -> Result<TraceTree, EvalError> {
    let ty = infer(&Context::new(), t, Calculus::Prob).ok();
    match step_prob(t)? {
        None => {
            let status = if is_value(t) { LeafStatus::Value } else { LeafStatus::Stuck };
            Ok(TraceTree { term: t.clone(), ty, status, children: Vec::new() })
        }
        Some(_) if fuel == 0 => Ok(TraceTree {
            term: t.clone(),
            ty,
            status: LeafStatus::FuelExhausted,
            children: Vec::new(),
        }),
        Some(dist) => {
            let mut children = Vec::with_capacity(dist.len());
            for (p, reduct) in dist {
                children.push((p, build_trace(&reduct, fuel - 1)?));
            }
            Ok(TraceTree { term: t.clone(), ty, status: LeafStatus::Internal, children })
        }
    }
}

/// Leaf terms of a complete trace, grouped by alpha-equivalence in
/// first-visit order; probabilities are per-leaf path products.
pub fn final_distribution(tree: &TraceTree) -> Result<Vec<(f64, Term)>, EvalError> {
    let mut acc: Vec<(f64, Term)> = Vec::new();
    collect_leaves(tree, 1.0, &mut acc)?;
    Ok(acc)
}

fn collect_leaves(
    tree: &TraceTree,
    path_prob: f64,
    acc: &mut Vec<(f64, Term)>,
) -> Result<(), EvalError> {
    if tree.children.is_empty() {
        if tree.status == LeafStatus::FuelExhausted {
            return Err(EvalError::IncompleteTrace);
        }
        match acc.iter_mut().find(|(_, t)| alpha_eq(t, &tree.term)) {
            Some((p, _)) => *p += path_prob,
            None => acc.push((path_prob, tree.term.clone())),
        }
        return Ok(());
    }
    for (p, child) in &tree.children {
        collect_leaves(child, path_prob * p, acc)?;
    }
    Ok(())
}

/// The density matrix `sum_i p_i rho_i` of a distribution over densities.
pub fn distribution_density(dist: &[(f64, Term)]) -> Result<DensityMatrix, EvalError> {
    let mut parts: Vec<(f64, DensityMatrix)> = Vec::with_capacity(dist.len());
    for (p, t) in dist {
        match &t.kind {
            TermKind::Rho(d) => parts.push((*p, d.clone())),
            _ => return Err(EvalError::NonDensityLeaf { term: print(t) }),
        }
    }
    if let Some(((_, first), rest)) = parts.split_first() {
        if let Some((_, other)) = rest.iter().find(|(_, d)| d.qubits() != first.qubits()) {
            return Err(EvalError::MixedDimensions {
                left: first.qubits(),
                right: other.qubits(),
            });
        }
    }
    Ok(DensityMatrix::weighted_sum(&parts)?)
}

/// One root-to-leaf walk, drawing each probabilistic branch from a seeded
/// generator: a Monte-Carlo probe of the exact tree.
pub fn sample_run(t: &Term, seed: u64, fuel: u64) -> Result<Term, EvalError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut current = t.clone();
    for _ in 0..=fuel {
        match step_prob(&current)? {
            None => return Ok(current),
            Some(dist) => {
                let draw: f64 = rng.gen();
                let mut cumulative = 0.0;
                let mut chosen = None;
                for (p, reduct) in dist {
                    cumulative += p;
                    chosen = Some(reduct);
                    if draw < cumulative {
                        break;
                    }
                }
                current = chosen.expect("step distributions are non-empty");
            }
        }
    }
    Err(EvalError::FuelExhausted)
}

fn type_label(ty: &Option<Type>) -> String {
    ty.as_ref().map_or_else(|| "?".to_string(), |t| t.to_string())
}

/// JSON form: `{"term", "type", "value", "children"}`, with a `"status"`
/// key on stuck and fuel-exhausted leaves.
pub fn trace_to_json(tree: &TraceTree) -> Json {
    let mut node = json!({
        "term": print(&tree.term),
        "type": type_label(&tree.ty),
        "value": tree.status == LeafStatus::Value,
        "children": tree.children.iter().map(|(p, c)| {
            json!({ "prob": p, "node": trace_to_json(c) })
        }).collect::<Vec<_>>(),
    });
    match tree.status {
        LeafStatus::Stuck => node["status"] = json!("stuck"),
        LeafStatus::FuelExhausted => node["status"] = json!("fuel"),
        _ => {}
    }
    node
}

/// Graphviz form of a trace, probabilities as edge labels.
pub fn trace_to_dot(tree: &TraceTree) -> String {
    let mut out = String::from("digraph trace {\n  node [shape=box];\n");
    let mut next = 0usize;
    dot_node(tree, &mut next, &mut out);
    out.push_str("}\n");
    out
}

fn dot_node(tree: &TraceTree, next: &mut usize, out: &mut String) -> usize {
    let id = *next;
    *next += 1;
    let suffix = match tree.status {
        LeafStatus::Value => "\\n[value]",
        LeafStatus::Stuck => "\\n[stuck]",
        LeafStatus::FuelExhausted => "\\n[fuel exhausted]",
        LeafStatus::Internal => "",
    };
    out.push_str(&format!(
        "  n{} [label=\"{}{}\"];\n",
        id,
        dot_escape(&print(&tree.term)),
        suffix
    ));
    for (p, child) in &tree.children {
        let child_id = dot_node(child, next, out);
        out.push_str(&format!(
            "  n{} -> n{} [label=\"{}\"];\n",
            id,
            child_id,
            crate::syntax::nice_scalar(*p)
        ));
    }
    id
}

fn dot_escape(s: &str) -> String {
    s.replace('\\', "\\\\").replace('"', "\\\"")
}

