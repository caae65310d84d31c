//! Affine typing for both calculi.
//!
//! Types are qubit counts `n`, measurement results `(m, n)` with `m <= n`,
//! and linear arrows. Inference is unification-based: lambda binders get
//! type variables, qubit counts are linear expressions `v1 + ... + vk + c`
//! over count variables, and gate/measurement arities become lower-bound
//! constraints on those expressions. Variables still unconstrained after
//! solving default to the single-qubit type, so `\x. x` infers `1 -o 1`.
//!
//! Affinity is enforced where the rules split contexts: a variable may not
//! occur free in both operands of an application or tensor, nor in both the
//! scrutinee and a branch of a `letcase`. Branches of one `letcase` may
//! share variables (at most one branch ever runs), and so may the addends
//! of a `sum` (they are alternatives of one mixed state); in both cases the
//! shared variables count as a single use towards the enclosing term.

use std::collections::{BTreeMap, HashMap};
use std::fmt;

use crate::syntax::{Calculus, Span, Term, TermKind};


/// A type of either calculus.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Type {
    /// `n`: a density matrix on `n` qubits.
    Qubits(u32),
    /// `(m, n)`: an `m`-qubit measurement outcome paired with the post-
    /// measurement `n`-qubit state; `m <= n`.
    Meas(u32, u32),
    /// `A -o B`.
    Arrow(Box<Type>, Box<Type>),
}

impl Type {
    pub fn arrow(dom: Type, cod: Type) -> Type {
        Type::Arrow(Box::new(dom), Box::new(cod))
    }
}

impl fmt::Display for Type {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Type::Qubits(n) => write!(f, "{n}"),
            Type::Meas(m, n) => write!(f, "({m}, {n})"),
            Type::Arrow(a, b) => {
                // `-o` associates to the right; parenthesise arrow domains.
                match a.as_ref() {
                    Type::Arrow(..) => write!(f, "({a}) -o {b}"),
                    _ => write!(f, "{a} -o {b}"),
                }
            }
        }
    }
}

/// Typing context: variable names to types, ordered for reproducible output.
pub type Context = BTreeMap<String, Type>;

#[derive(Debug, Clone, PartialEq)]
pub enum TypeError {
    UnboundVariable { var: String },
    AffineViolation { var: String, first: Option<Span>, second: Option<Span> },
    BranchCountMismatch { expected: usize, got: usize },
    BranchNotClosed { var: String, branch: usize },
    TypeMismatch { expected: String, actual: String },
    ArityMismatch { op: u32, state: String },
}

fn write_span(f: &mut fmt::Formatter<'_>, s: &Option<Span>) -> fmt::Result {
    match s {
        Some((a, b)) => write!(f, "{a}..{b}"),
        None => write!(f, "?"),
    }
}

impl fmt::Display for TypeError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TypeError::UnboundVariable { var } => write!(f, "unbound variable `{var}`"),
            TypeError::AffineViolation { var, first, second } => {
                write!(f, "affine violation: `{var}` is used more than once (at ")?;
                write_span(f, first)?;
                write!(f, " and ")?;
                write_span(f, second)?;
                write!(f, ")")
            }
            TypeError::BranchCountMismatch { expected, got } => {
                write!(f, "letcase needs {expected} branches for this scrutinee, found {got}")
            }
            TypeError::BranchNotClosed { var, branch } => {
                write!(f, "branch {branch} uses `{var}`, which is bound neither by the letcase nor in scope")
            }
            TypeError::TypeMismatch { expected, actual } => {
                write!(f, "type mismatch: expected {expected}, found {actual}")
            }
            TypeError::ArityMismatch { op, state } => {
                write!(f, "operator acts on {op} qubits but the state has {state}")
            }
        }
    }
}

impl std::error::Error for TypeError {}

/// Qubit-count expression: a multiset of count variables plus a constant.
#[derive(Debug, Clone, PartialEq, Eq)]
struct Count {
    vars: Vec<u32>, // sorted
    k: u32,
}

impl Count {
    fn constant(k: u32) -> Count {
        Count { vars: Vec::new(), k }
    }

    fn var(v: u32) -> Count {
        Count { vars: vec![v], k: 0 }
    }

    fn plus(&self, other: &Count) -> Count {
        let mut vars: Vec<u32> = self.vars.iter().chain(&other.vars).copied().collect();
        vars.sort_unstable();
        Count { vars, k: self.k + other.k }
    }

    fn as_const(&self) -> Option<u32> {
        self.vars.is_empty().then_some(self.k)
    }
}

impl fmt::Display for Count {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if let Some(k) = self.as_const() {
            return write!(f, "{k}");
        }
        for (i, v) in self.vars.iter().enumerate() {
            if i > 0 {
                write!(f, "+")?;
            }
            write!(f, "n{v}")?;
        }
        if self.k > 0 {
            write!(f, "+{}", self.k)?;
        }
        Ok(())
    }
}

/// Inference-time type: [`Type`] with metavariables and open counts.
#[derive(Debug, Clone, PartialEq)]
enum MTy {
    Var(u32),
    Qubits(Count),
    Meas(u32, Count),
    Arrow(Box<MTy>, Box<MTy>),
}

impl fmt::Display for MTy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MTy::Var(v) => write!(f, "t{v}"),
            MTy::Qubits(c) => write!(f, "{c}"),
            MTy::Meas(m, c) => write!(f, "({m}, {c})"),
            MTy::Arrow(a, b) => match a.as_ref() {
                MTy::Arrow(..) => write!(f, "({a}) -o {b}"),
                _ => write!(f, "{a} -o {b}"),
            },
        }
    }
}

fn lift(ty: &Type) -> MTy {
    match ty {
        Type::Qubits(n) => MTy::Qubits(Count::constant(*n)),
        Type::Meas(m, n) => MTy::Meas(*m, Count::constant(*n)),
        Type::Arrow(a, b) => MTy::Arrow(Box::new(lift(a)), Box::new(lift(b))),
    }
}

/// Free-variable uses seen so far: name to the span of the first use.
type Used = BTreeMap<String, Option<Span>>;

fn merge_disjoint(mut a: Used, b: Used) -> Result<Used, TypeError> {
    for (var, span) in b {
        if let Some(first) = a.get(&var) {
            return Err(TypeError::AffineViolation { var, first: *first, second: span });
        }
        a.insert(var, span);
    }
    Ok(a)
}

fn merge_shared(mut a: Used, b: Used) -> Used {
    for (var, span) in b {
        a.entry(var).or_insert(span);
    }
    a
}

struct Infer {
    next_tv: u32,
    next_cv: u32,
    tsub: HashMap<u32, MTy>,
    csub: HashMap<u32, Count>,
    /// Deferred lower bounds `count >= arity`, with the arity kept for
    /// reporting.
    bounds: Vec<(Count, u32)>,
    env: HashMap<String, Vec<MTy>>, // scope stacks per name
    /// Innermost letcase branch index, for unbound-variable reporting.
    branch: Option<usize>,
}

impl Infer {
    fn new() -> Infer {
        Infer {
            next_tv: 0,
            next_cv: 0,
            tsub: HashMap::new(),
            csub: HashMap::new(),
            bounds: Vec::new(),
            env: HashMap::new(),
            branch: None,
        }
    }

    fn fresh_t(&mut self) -> MTy {
        self.next_tv += 1;
        MTy::Var(self.next_tv - 1)
    }

    fn fresh_c(&mut self) -> Count {
        self.next_cv += 1;
        Count::var(self.next_cv - 1)
    }

    fn resolve_c(&self, c: &Count) -> Count {
        let mut out = Count::constant(c.k);
        for v in &c.vars {
            match self.csub.get(v) {
                Some(bound) => out = out.plus(&self.resolve_c(bound)),
                None => out = out.plus(&Count::var(*v)),
            }
        }
        out
    }

    fn resolve_t(&self, ty: &MTy) -> MTy {
        match ty {
            MTy::Var(v) => match self.tsub.get(v) {
                Some(bound) => self.resolve_t(bound),
                None => ty.clone(),
            },
            MTy::Qubits(c) => MTy::Qubits(self.resolve_c(c)),
            MTy::Meas(m, c) => MTy::Meas(*m, self.resolve_c(c)),
            MTy::Arrow(a, b) => {
                MTy::Arrow(Box::new(self.resolve_t(a)), Box::new(self.resolve_t(b)))
            }
        }
    }

    fn occurs(&self, v: u32, ty: &MTy) -> bool {
        match ty {
            MTy::Var(w) => *w == v,
            MTy::Qubits(_) | MTy::Meas(..) => false,
            MTy::Arrow(a, b) => self.occurs(v, a) || self.occurs(v, b),
        }
    }

    fn mismatch(&self, expected: &MTy, actual: &MTy) -> TypeError {
        TypeError::TypeMismatch {
            expected: self.resolve_t(expected).to_string(),
            actual: self.resolve_t(actual).to_string(),
        }
    }

    fn unify(&mut self, a: &MTy, b: &MTy) -> Result<(), TypeError> {
        let (a, b) = (self.resolve_t(a), self.resolve_t(b));
        match (&a, &b) {
            (MTy::Var(v), _) if b != MTy::Var(*v) => {
                if self.occurs(*v, &b) {
                    return Err(self.mismatch(&a, &b));
                }
                self.tsub.insert(*v, b);
                Ok(())
            }
            (MTy::Var(_), _) => Ok(()),
            (_, MTy::Var(v)) => {
                if self.occurs(*v, &a) {
                    return Err(self.mismatch(&a, &b));
                }
                self.tsub.insert(*v, a);
                Ok(())
            }
            (MTy::Qubits(ca), MTy::Qubits(cb)) => {
                self.unify_counts(ca, cb).map_err(|()| self.mismatch(&a, &b))
            }
            (MTy::Meas(ma, ca), MTy::Meas(mb, cb)) if ma == mb => {
                self.unify_counts(ca, cb).map_err(|()| self.mismatch(&a, &b))
            }
            (MTy::Arrow(a1, b1), MTy::Arrow(a2, b2)) => {
                self.unify(a1, a2)?;
                self.unify(b1, b2)
            }
            _ => Err(self.mismatch(&a, &b)),
        }
    }

    /// Solve `ca = cb` over naturals. Inputs are already resolved.
    fn unify_counts(&mut self, ca: &Count, cb: &Count) -> Result<(), ()> {
        // Cancel shared variables and the common constant part.
        let mut left = ca.clone();
        let mut right = cb.clone();
        let common = left.k.min(right.k);
        left.k -= common;
        right.k -= common;
        right.vars.retain(|v| {
            if let Some(i) = left.vars.iter().position(|w| w == v) {
                left.vars.remove(i);
                false
            } else {
                true
            }
        });
        match (left.vars.len(), right.vars.len()) {
            (0, 0) => (left.k == right.k).then_some(()).ok_or(()),
            (1, _) if left.k <= right.k => {
                // v = right - left.k, representable since right.k >= left.k.
                right.k -= left.k;
                self.csub.insert(left.vars[0], right);
                Ok(())
            }
            (_, 1) if right.k <= left.k => {
                left.k -= right.k;
                self.csub.insert(right.vars[0], left);
                Ok(())
            }
            // Counts are positive, so `v1+..+vm + c = K` is determined
            // exactly when the slack `K - c` equals the variable count:
            // every variable is one qubit wide.
            (m, 0) if right.k >= left.k && (right.k - left.k) as usize == m => {
                for v in &left.vars {
                    self.csub.insert(*v, Count::constant(1));
                }
                Ok(())
            }
            (0, m) if left.k >= right.k && (left.k - right.k) as usize == m => {
                for v in &right.vars {
                    self.csub.insert(*v, Count::constant(1));
                }
                Ok(())
            }
            // Anything further is ambiguous or needs a negative offset.
            _ => Err(()),
        }
    }

    fn as_count(&mut self, ty: &MTy) -> Result<Count, TypeError> {
        let c = self.fresh_c();
        self.unify(ty, &MTy::Qubits(c.clone()))?;
        Ok(c)
    }

    fn lookup(&mut self, name: &str, span: Option<Span>) -> Result<(MTy, Used), TypeError> {
        match self.env.get(name).and_then(|stack| stack.last()) {
            Some(ty) => {
                let mut used = Used::new();
                used.insert(name.to_string(), span);
                Ok((ty.clone(), used))
            }
            None => match self.branch {
                Some(branch) => Err(TypeError::BranchNotClosed { var: name.to_string(), branch }),
                None => Err(TypeError::UnboundVariable { var: name.to_string() }),
            },
        }
    }

    fn bind(&mut self, name: &str, ty: MTy) {
        self.env.entry(name.to_string()).or_default().push(ty);
    }

    fn unbind(&mut self, name: &str) {
        self.env.get_mut(name).expect("bind/unbind pairing").pop();
    }

    fn infer(&mut self, t: &Term) -> Result<(MTy, Used), TypeError> {
        match &t.kind {
            TermKind::Var(x) => self.lookup(x, t.span),
            TermKind::Lam(x, body) => {
                let dom = self.fresh_t();
                self.bind(x, dom.clone());
                let result = self.infer(body);
                self.unbind(x);
                let (cod, mut used) = result?;
                used.remove(x);
                Ok((MTy::Arrow(Box::new(dom), Box::new(cod)), used))
            }
            TermKind::App(fun, arg) => {
                let (fty, fused) = self.infer(fun)?;
                let (aty, aused) = self.infer(arg)?;
                let used = merge_disjoint(fused, aused)?;
                let cod = self.fresh_t();
                self.unify(&fty, &MTy::Arrow(Box::new(aty), Box::new(cod.clone())))?;
                Ok((cod, used))
            }
            TermKind::Rho(d) => Ok((MTy::Qubits(Count::constant(d.qubits())), Used::new())),
            TermKind::Unitary(g, body) => {
                let (ty, used) = self.infer(body)?;
                let n = self.as_count(&ty)?;
                self.bounds.push((n.clone(), g.qubits()));
                Ok((MTy::Qubits(n), used))
            }
            TermKind::Meas(m, body) => {
                let (ty, used) = self.infer(body)?;
                let n = self.as_count(&ty)?;
                self.bounds.push((n.clone(), *m));
                Ok((MTy::Meas(*m, n), used))
            }
            TermKind::Tensor(l, r) => {
                let (lty, lused) = self.infer(l)?;
                let (rty, rused) = self.infer(r)?;
                let used = merge_disjoint(lused, rused)?;
                let ln = self.as_count(&lty)?;
                let rn = self.as_count(&rty)?;
                Ok((MTy::Qubits(self.resolve_c(&ln).plus(&self.resolve_c(&rn))), used))
            }
            TermKind::Pair(_, m, d) => {
                Ok((MTy::Meas(*m, Count::constant(d.qubits())), Used::new()))
            }
            TermKind::LetCase { var, scrutinee, branches, .. } => {
                let (sty, sused) = self.infer(scrutinee)?;
                let m = branches.len().trailing_zeros();
                debug_assert_eq!(1 << m, branches.len());
                if let MTy::Meas(sm, _) = self.resolve_t(&sty) {
                    if (1usize << sm) != branches.len() {
                        return Err(TypeError::BranchCountMismatch {
                            expected: 1 << sm,
                            got: branches.len(),
                        });
                    }
                }
                let n = self.fresh_c();
                self.unify(&sty, &MTy::Meas(m, n.clone()))?;
                self.bounds.push((n.clone(), m.max(1)));
                let result = self.fresh_t();
                let mut branch_used = Used::new();
                let outer_branch = self.branch;
                for (i, branch) in branches.iter().enumerate() {
                    self.bind(var, MTy::Qubits(n.clone()));
                    self.branch = Some(i);
                    let inferred = self.infer(branch);
                    self.branch = outer_branch;
                    self.unbind(var);
                    let (bty, mut bused) = inferred?;
                    bused.remove(var);
                    self.unify(&result, &bty)?;
                    branch_used = merge_shared(branch_used, bused);
                }
                Ok((result, merge_disjoint(sused, branch_used)?))
            }
            TermKind::Sum(addends) => {
                let result = self.fresh_t();
                let mut used = Used::new();
                for (_, addend) in addends {
                    let (aty, aused) = self.infer(addend)?;
                    self.unify(&result, &aty)?;
                    used = merge_shared(used, aused);
                }
                Ok((result, used))
            }
        }
    }

    /// Check deferred arity bounds, assign every still-free count variable
    /// its least admissible value (at least 1), and re-check.
    fn solve(&mut self) -> Result<(), TypeError> {
        let mut lower: BTreeMap<u32, u32> = BTreeMap::new();
        let mut deferred = Vec::new();
        for (count, arity) in std::mem::take(&mut self.bounds) {
            let c = self.resolve_c(&count);
            match c.as_const() {
                Some(n) if n < arity => {
                    return Err(TypeError::ArityMismatch { op: arity, state: n.to_string() });
                }
                Some(_) => {}
                None => {
                    // Unassigned variables will get at least 1 each.
                    let slack = c.k + (c.vars.len() as u32 - 1);
                    for v in &c.vars {
                        let need = arity.saturating_sub(slack);
                        let entry = lower.entry(*v).or_insert(1);
                        *entry = (*entry).max(need);
                    }
                    deferred.push((c, arity));
                }
            }
        }
        for (v, need) in lower {
            if !self.csub.contains_key(&v) {
                self.csub.insert(v, Count::constant(need));
            }
        }
        for (count, arity) in deferred {
            let c = self.resolve_c(&count);
            // Variables bound between the two passes resolve now; any left
            // default to 1 in `finish`.
            let n = c.k + c.vars.len() as u32;
            if n < arity {
                return Err(TypeError::ArityMismatch { op: arity, state: n.to_string() });
            }
        }
        Ok(())
    }

    /// Ground a resolved inference type, defaulting leftover variables to
    /// one qubit.
    fn finish(&mut self, ty: &MTy) -> Type {
        match self.resolve_t(ty) {
            MTy::Var(_) => Type::Qubits(1),
            MTy::Qubits(c) => Type::Qubits(c.k + c.vars.len() as u32),
            MTy::Meas(m, c) => Type::Meas(m, c.k + c.vars.len() as u32),
            MTy::Arrow(a, b) => Type::arrow(self.finish(&a), self.finish(&b)),
        }
    }
}

fn run(
    ctx: &Context,
    t: &Term,
    calculus: Calculus,
    expected: Option<&Type>,
) -> Result<Type, TypeError> {
    debug_assert!(crate::syntax::well_formed(t, calculus).is_ok());
    let _ = calculus;
    let mut inf = Infer::new();
    for (name, ty) in ctx {
        inf.bind(name, lift(ty));
    }
    let (ty, _used) = inf.infer(t)?;
    if let Some(want) = expected {
        inf.unify(&ty, &lift(want))?;
    }
    inf.solve()?;
    Ok(inf.finish(&ty))
}

/// Infer the type of `t` under `ctx`.
pub fn infer(ctx: &Context, t: &Term, calculus: Calculus) -> Result<Type, TypeError> {
    run(ctx, t, calculus, None)
}

/// Check that `t` admits the type `ty` under `ctx`. More permissive than
/// comparing against [`infer`]: a reduct may become more polymorphic than
/// the original term (dropping an argument drops its constraints), and
/// checking validates it at the original, more specific type.
pub fn check(ctx: &Context, t: &Term, ty: &Type, calculus: Calculus) -> Result<(), TypeError> {
    run(ctx, t, calculus, Some(ty)).map(|_| ())
}

/// One subject-reduction probe: `t` must type, and its reduct `t2` must
/// check at the same type.
pub fn check_metatheory_step(ctx: &Context, t: &Term, t2: &Term, calculus: Calculus) -> bool {
    match infer(ctx, t, calculus) {
        Ok(ty) => check(ctx, t2, &ty, calculus).is_ok(),
        Err(_) => false,
    }
}
