//! Denotational semantics: terms as finite weighted sets of outcomes.
//!
//! A term denotes a set of triplets `(p, b, e)` — a probability, the
//! outcome of a measurement if one was observed (or the empty tag), and an
//! element that is either a density matrix or a function. Functions are
//! represented as closures over captured valuations and applied on demand;
//! extensional equality of functions is undecidable, so the set's merge
//! convention (equal tag and element add their weights) applies to matrix
//! elements only, and sets are kept in a canonical order for stable output.
//!
//! The coarser matrix-level interpretation flattens a triplet set to the
//! weighted sum of its elements: at ground type a single density matrix,
//! at function type a weighted family of closures flattened lazily as it
//! is applied. The two interpretations tell different stories: programs
//! with different triplet sets can still denote the same matrix, which is
//! exactly the observational equivalence the `equiv` command decides.

use std::collections::BTreeMap;
use std::fmt;

use crate::matrix::{DensityMatrix, MatrixError};
use crate::syntax::{lam, nice_scalar, print, rho, Term, TermKind};
use crate::tol::tolerance;
use crate::typing::Type;

#[cfg(test)]
mod tests;

/// Measurement tag: which outcome was observed, if any.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Tag {
    /// No measurement observed.
    Empty,
    /// Outcome word of an observed measurement.
    Out(u64),
}

impl fmt::Display for Tag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Tag::Empty => f.write_str("ε"),
            Tag::Out(b) => write!(f, "{b}"),
        }
    }
}

/// Semantic environment: each variable maps to a tagged element.
pub type Valuation = BTreeMap<String, (Tag, DenElement)>;

/// A function element: a binder and body interpreted in a captured
/// valuation, applied by extending that valuation.
#[derive(Debug, Clone)]
pub struct Closure {
    pub binder: String,
    pub body: Term,
    pub env: Valuation,
}

/// An element of the semantic universe.
#[derive(Debug, Clone)]
pub enum DenElement {
    Mat(DensityMatrix),
    Fun(Closure),
}

/// One weighted outcome.
#[derive(Debug, Clone)]
pub struct Triplet {
    pub p: f64,
    pub tag: Tag,
    pub elem: DenElement,
}

/// Deterministic rendering of an element, used both as the canonical sort
/// key and for display. Closures render with their captured environment so
/// distinct closures never collide.
fn render_elem(e: &DenElement) -> String {
    match e {
        DenElement::Mat(d) => print(&rho(d.clone())),
        DenElement::Fun(c) => {
            let head = print(&lam(c.binder.clone(), c.body.clone()));
            if c.env.is_empty() {
                head
            } else {
                let env = c
                    .env
                    .iter()
                    .map(|(x, (b, e))| format!("{x}=({b}, {})", render_elem(e)))
                    .collect::<Vec<_>>()
                    .join(", ");
                format!("{head} [{env}]")
            }
        }
    }
}

/// A canonical finite set of triplets: matrix triplets with equal tag and
/// equal matrix are merged (weights added), entries are sorted by tag and
/// rendered element, and negligible weights are dropped.
#[derive(Debug, Clone, Default)]
pub struct TripletSet {
    triplets: Vec<Triplet>,
}

impl TripletSet {
    pub fn from_raw(raw: Vec<Triplet>) -> TripletSet {
        let tol = tolerance();
        let mut merged: Vec<Triplet> = Vec::new();
        for t in raw {
            let slot = match &t.elem {
                DenElement::Mat(d) => merged.iter_mut().find(|u| {
                    u.tag == t.tag
                        && matches!(&u.elem, DenElement::Mat(m) if m.approx_eq(d, tol))
                }),
                DenElement::Fun(_) => None,
            };
            match slot {
                Some(u) => u.p += t.p,
                None => merged.push(t),
            }
        }
        merged.retain(|t| t.p > tol);
        merged.sort_by(|a, b| {
            a.tag.cmp(&b.tag).then_with(|| render_elem(&a.elem).cmp(&render_elem(&b.elem)))
        });
        TripletSet { triplets: merged }
    }

    pub fn triplets(&self) -> &[Triplet] {
        &self.triplets
    }

    pub fn weight(&self) -> f64 {
        self.triplets.iter().map(|t| t.p).sum()
    }

    /// Entry-wise comparison of canonical sets. Exact for matrix elements;
    /// function elements compare by their rendered closure, which is
    /// conservative (syntactically different closures never compare equal).
    pub fn approx_eq(&self, other: &TripletSet, tol: f64) -> bool {
        self.triplets.len() == other.triplets.len()
            && self.triplets.iter().zip(&other.triplets).all(|(a, b)| {
                a.tag == b.tag
                    && (a.p - b.p).abs() <= tol
                    && match (&a.elem, &b.elem) {
                        (DenElement::Mat(x), DenElement::Mat(y)) => x.approx_eq(y, tol),
                        (DenElement::Fun(_), DenElement::Fun(_)) => {
                            render_elem(&a.elem) == render_elem(&b.elem)
                        }
                        _ => false,
                    }
            })
    }

    pub fn to_json(&self) -> serde_json::Value {
        let items: Vec<serde_json::Value> = self
            .triplets
            .iter()
            .map(|t| {
                let b = match t.tag {
                    Tag::Empty => serde_json::Value::Null,
                    Tag::Out(b) => serde_json::json!(b),
                };
                let e = match &t.elem {
                    DenElement::Mat(d) => {
                        let dim = 1usize << d.qubits();
                        let entries: Vec<serde_json::Value> = (0..dim)
                            .flat_map(|i| {
                                (0..dim).map(move |j| (i, j))
                            })
                            .map(|(i, j)| {
                                let z = d.matrix().get(i, j);
                                serde_json::json!([z.re, z.im])
                            })
                            .collect();
                        serde_json::json!({ "kind": "mat", "n": d.qubits(), "entries": entries })
                    }
                    DenElement::Fun(c) => serde_json::json!({
                        "kind": "fun",
                        "term": print(&lam(c.binder.clone(), c.body.clone())),
                    }),
                };
                serde_json::json!({ "p": t.p, "b": b, "e": e })
            })
            .collect();
        serde_json::Value::Array(items)
    }
}

impl fmt::Display for TripletSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("{ ")?;
        for (i, t) in self.triplets.iter().enumerate() {
            if i > 0 {
                f.write_str(" ; ")?;
            }
            write!(f, "({}, {}, {})", nice_scalar(t.p), t.tag, render_elem(&t.elem))?;
        }
        f.write_str(" }")
    }
}

#[derive(Debug)]
pub enum DenoteError {
    /// A free variable has no binding in the valuation.
    ValuationMismatch { var: String },
    /// A matrix element in function position.
    UnapplicableElement { term: String },
    /// A function element where a density matrix is required.
    NotADensity { context: &'static str },
    /// A branching construct scrutinized an element that carries no
    /// measurement outcome.
    MissingOutcome,
    /// A measurement outcome with no branch of that index.
    BranchOutOfRange { outcome: u64, branches: usize },
    /// A weighted family mixing matrix and function elements.
    HeterogeneousElements,
    Matrix(MatrixError),
}

impl fmt::Display for DenoteError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DenoteError::ValuationMismatch { var } => {
                write!(f, "variable `{var}` has no semantic binding")
            }
            DenoteError::UnapplicableElement { term } => {
                write!(f, "`{term}` denotes a matrix, which cannot be applied")
            }
            DenoteError::NotADensity { context } => {
                write!(f, "{context} requires a density matrix element")
            }
            DenoteError::MissingOutcome => {
                f.write_str("branching on an element that carries no measurement outcome")
            }
            DenoteError::BranchOutOfRange { outcome, branches } => {
                write!(f, "measurement outcome {outcome} exceeds the {branches} branches")
            }
            DenoteError::HeterogeneousElements => {
                f.write_str("weighted family mixes matrices and functions")
            }
            DenoteError::Matrix(e) => write!(f, "{e}"),
        }
    }
}

impl std::error::Error for DenoteError {}

impl From<MatrixError> for DenoteError {
    fn from(e: MatrixError) -> Self {
        DenoteError::Matrix(e)
    }
}

fn as_mat<'a>(t: &'a Triplet, context: &'static str) -> Result<&'a DensityMatrix, DenoteError> {
    match &t.elem {
        DenElement::Mat(d) => Ok(d),
        DenElement::Fun(_) => Err(DenoteError::NotADensity { context }),
    }
}

/// The fine-grained interpretation: a canonical triplet set.
pub fn interp(t: &Term, theta: &Valuation) -> Result<TripletSet, DenoteError> {
    let raw = match &t.kind {
        TermKind::Var(x) => {
            let (tag, elem) = theta
                .get(x)
                .ok_or_else(|| DenoteError::ValuationMismatch { var: x.clone() })?;
            vec![Triplet { p: 1.0, tag: *tag, elem: elem.clone() }]
        }
        TermKind::Lam(x, body) => vec![Triplet {
            p: 1.0,
            tag: Tag::Empty,
            elem: DenElement::Fun(Closure {
                binder: x.clone(),
                body: body.as_ref().clone(),
                env: theta.clone(),
            }),
        }],
        TermKind::App(fun, arg) => {
            let args = interp(arg, theta)?;
            let funs = interp(fun, theta)?;
            let mut out = Vec::new();
            for ft in funs.triplets() {
                let cl = match &ft.elem {
                    DenElement::Fun(cl) => cl,
                    DenElement::Mat(_) => {
                        return Err(DenoteError::UnapplicableElement { term: print(fun) })
                    }
                };
                for at in args.triplets() {
                    let body = apply_closure(cl, at.tag, &at.elem)?;
                    for bt in body.triplets() {
                        out.push(Triplet {
                            p: ft.p * at.p * bt.p,
                            tag: bt.tag,
                            elem: bt.elem.clone(),
                        });
                    }
                }
            }
            out
        }
        TermKind::Rho(d) => {
            vec![Triplet { p: 1.0, tag: Tag::Empty, elem: DenElement::Mat(d.clone()) }]
        }
        TermKind::Unitary(g, body) => {
            let op = g.to_op();
            let inner = interp(body, theta)?;
            let mut out = Vec::new();
            for t in inner.triplets() {
                let d = as_mat(t, "unitary evolution")?;
                out.push(Triplet {
                    p: t.p,
                    tag: Tag::Empty,
                    elem: DenElement::Mat(d.evolve(&op)?),
                });
            }
            out
        }
        TermKind::Meas(m, body) => {
            let inner = interp(body, theta)?;
            let mut out = Vec::new();
            for t in inner.triplets() {
                let d = as_mat(t, "measurement")?;
                for o in d.measure_comp(*m)? {
                    out.push(Triplet {
                        p: t.p * o.prob,
                        tag: Tag::Out(o.outcome),
                        elem: DenElement::Mat(o.state),
                    });
                }
            }
            out
        }
        TermKind::Tensor(l, r) => {
            let ls = interp(l, theta)?;
            let rs = interp(r, theta)?;
            let mut out = Vec::new();
            for lt in ls.triplets() {
                let ld = as_mat(lt, "tensor product")?;
                for rt in rs.triplets() {
                    let rd = as_mat(rt, "tensor product")?;
                    out.push(Triplet {
                        p: lt.p * rt.p,
                        tag: Tag::Empty,
                        elem: DenElement::Mat(ld.tensor(rd)),
                    });
                }
            }
            out
        }
        TermKind::Pair(b, _, d) => {
            vec![Triplet { p: 1.0, tag: Tag::Out(*b), elem: DenElement::Mat(d.clone()) }]
        }
        TermKind::LetCase { var, scrutinee, branches, .. } => {
            let scrs = interp(scrutinee, theta)?;
            let mut out = Vec::new();
            for st in scrs.triplets() {
                let d = as_mat(st, "branch scrutinee")?;
                let Tag::Out(b) = st.tag else {
                    return Err(DenoteError::MissingOutcome);
                };
                let branch = branches.get(b as usize).ok_or(DenoteError::BranchOutOfRange {
                    outcome: b,
                    branches: branches.len(),
                })?;
                let mut env = theta.clone();
                env.insert(var.clone(), (Tag::Empty, DenElement::Mat(d.clone())));
                for bt in interp(branch, &env)?.triplets() {
                    out.push(Triplet {
                        p: st.p * bt.p,
                        tag: bt.tag,
                        elem: bt.elem.clone(),
                    });
                }
            }
            out
        }
        TermKind::Sum(addends) => {
            let mut out = Vec::new();
            for (p, addend) in addends {
                for t in interp(addend, theta)?.triplets() {
                    out.push(Triplet { p: p * t.p, tag: t.tag, elem: t.elem.clone() });
                }
            }
            out
        }
    };
    Ok(TripletSet::from_raw(raw))
}

/// Applies a function element to one tagged argument element.
pub fn apply_closure(
    cl: &Closure,
    tag: Tag,
    elem: &DenElement,
) -> Result<TripletSet, DenoteError> {
    let mut env = cl.env.clone();
    env.insert(cl.binder.clone(), (tag, elem.clone()));
    interp(&cl.body, &env)
}

/// The matrix-level interpretation: at ground type one density matrix, at
/// function type a weighted family of closures flattened as it is applied.
#[derive(Debug, Clone)]
pub enum FSem {
    Mat(DensityMatrix),
    Fun(Vec<(f64, Closure)>),
}

impl FSem {
    pub fn matrix(&self) -> Option<&DensityMatrix> {
        match self {
            FSem::Mat(d) => Some(d),
            FSem::Fun(_) => None,
        }
    }

    /// Applies a function-level interpretation to one tagged element.
    pub fn apply(&self, tag: Tag, elem: &DenElement) -> Result<FSem, DenoteError> {
        let family = match self {
            FSem::Mat(d) => {
                return Err(DenoteError::UnapplicableElement { term: print(&rho(d.clone())) })
            }
            FSem::Fun(family) => family,
        };
        let mut mats: Vec<(f64, DensityMatrix)> = Vec::new();
        let mut funs: Vec<(f64, Closure)> = Vec::new();
        for (p, cl) in family {
            match fsem_of_set(&apply_closure(cl, tag, elem)?)? {
                FSem::Mat(d) => mats.push((*p, d)),
                FSem::Fun(sub) => funs.extend(sub.into_iter().map(|(q, c)| (p * q, c))),
            }
        }
        match (mats.is_empty(), funs.is_empty()) {
            (false, true) => Ok(FSem::Mat(DensityMatrix::weighted_sum(&mats)?)),
            (true, false) => Ok(FSem::Fun(funs)),
            _ => Err(DenoteError::HeterogeneousElements),
        }
    }
}

fn fsem_of_set(s: &TripletSet) -> Result<FSem, DenoteError> {
    let mut mats: Vec<(f64, DensityMatrix)> = Vec::new();
    let mut funs: Vec<(f64, Closure)> = Vec::new();
    for t in s.triplets() {
        match &t.elem {
            DenElement::Mat(d) => mats.push((t.p, d.clone())),
            DenElement::Fun(c) => funs.push((t.p, c.clone())),
        }
    }
    match (mats.is_empty(), funs.is_empty()) {
        (false, true) => Ok(FSem::Mat(DensityMatrix::weighted_sum(&mats)?)),
        (true, false) => Ok(FSem::Fun(funs)),
        _ => Err(DenoteError::HeterogeneousElements),
    }
}

/// The matrix-level interpretation of a term, flattening its triplet set.
pub fn fsem(t: &Term, theta: &Valuation) -> Result<FSem, DenoteError> {
    fsem_of_set(&interp(t, theta)?)
}

/// Total weight of a set. One, within tolerance, for every typed term.
pub fn weight(s: &TripletSet) -> f64 {
    s.weight()
}

/// Tags at measurement-result types must record an outcome.
pub fn check_p(tag: Tag, ty: &Type) -> bool {
    !(matches!(ty, Type::Meas(..)) && tag == Tag::Empty)
}

/// Membership of an element in a type's semantic domain. Matrices are
/// checked by shape; functions are probed: every probe that itself lies in
/// the domain must produce a weight-one set whose elements lie in the
/// codomain with admissible tags. Probing can only refute membership on
/// the probes given, so a `true` is evidence, not proof.
pub fn check_tsem_membership(
    elem: &DenElement,
    ty: &Type,
    probes: &[(Tag, DenElement)],
) -> bool {
    match (elem, ty) {
        (DenElement::Mat(d), Type::Qubits(n)) | (DenElement::Mat(d), Type::Meas(_, n)) => {
            d.qubits() == *n
        }
        (DenElement::Fun(cl), Type::Arrow(dom, cod)) => probes
            .iter()
            .filter(|(tag, e)| check_p(*tag, dom) && check_tsem_membership(e, dom, probes))
            .all(|(tag, e)| match apply_closure(cl, *tag, e) {
                Ok(out) => {
                    (out.weight() - 1.0).abs() <= 1e-7
                        && out.triplets().iter().all(|t| {
                            check_p(t.tag, cod) && check_tsem_membership(&t.elem, cod, probes)
                        })
                }
                Err(_) => false,
            }),
        _ => false,
    }
}

/// The standard probe set on `n` qubits: both basis states, the uniform
/// superposition, and one genuinely mixed non-diagonal state, each padded
/// with the maximally mixed state on the remaining qubits when `n > 1`.
pub fn standard_probes(n: u32) -> Vec<(Tag, DenElement)> {
    let base = vec![
        DensityMatrix::pure_basis(1, 0),
        DensityMatrix::pure_basis(1, 1),
        DensityMatrix::plus(),
        DensityMatrix::weighted_sum(&[
            (0.5, DensityMatrix::plus()),
            (0.5, DensityMatrix::pure_basis(1, 0)),
        ])
        .unwrap(),
    ];
    base.into_iter()
        .map(|d| {
            let mut padded = d;
            for _ in 1..n {
                padded = padded
                    .tensor(&DensityMatrix::weighted_sum(&[
                        (0.5, DensityMatrix::pure_basis(1, 0)),
                        (0.5, DensityMatrix::pure_basis(1, 1)),
                    ])
                    .unwrap());
            }
            (Tag::Empty, DenElement::Mat(padded))
        })
        .collect()
}

/// Type-directed probes: measurement-result domains get outcome-tagged
/// copies of the standard matrices; function domains are left unprobed.
pub fn probes_for(ty: &Type) -> Vec<(Tag, DenElement)> {
    match ty {
        Type::Qubits(n) => standard_probes(*n),
        Type::Meas(m, n) => {
            let top = if *m >= 63 { u64::MAX } else { (1u64 << m) - 1 };
            standard_probes(*n)
                .into_iter()
                .enumerate()
                .map(|(i, (_, e))| (Tag::Out((i as u64).min(top)), e))
                .collect()
        }
        Type::Arrow(..) => Vec::new(),
    }
}
