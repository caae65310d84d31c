//! Random closed well-typed terms for the property suites.
//!
//! Generation is type-directed: pick a type, then build a term of that type
//! against an affine pool of in-scope variables, removing a variable from
//! the pool when it is used. Subterms that live side by side draw from the
//! same pool in sequence, so no variable is used twice; branches of one
//! `letcase` (and addends of one sum) are alternatives, so each draws from
//! a clone of the pool and the union of their uses is consumed.
//!
//! Two shapes are deliberately never generated because they are typed
//! normal forms of the deterministic calculus that observe no measurement
//! outcome: functions whose result type is a measurement outcome (the body
//! would freeze a measurement under the binder forever), and sums or
//! branch results of measurement type (a weighted family of measurements
//! has no single outcome to branch on). Measurement-typed positions are
//! instead filled the way such programs are written: a literal measurement,
//! an outcome pair, or a variable.

use num_complex::Complex64;
use rand::Rng;

use crate::matrix::{ComplexMatrix, DensityMatrix};
use crate::syntax::{
    app, lam, letcase, meas, pair, rho, sum, tensor, unitary, var, Calculus, Gate, GateExpr,
    Term,
};
use crate::typing::Type;


/// Bounds for generation.
#[derive(Debug, Clone)]
pub struct GenConfig {
    pub calculus: Calculus,
    /// Nesting budget; leaves are forced beyond it.
    pub max_depth: u32,
    /// Largest qubit count appearing in any type.
    pub max_qubits: u32,
}

impl GenConfig {
    pub fn new(calculus: Calculus) -> GenConfig {
        GenConfig { calculus, max_depth: 6, max_qubits: 2 }
    }
}

/// A random density matrix on `qubits` qubits: `A·A†` for `A` with uniform
/// complex entries, normalized to unit trace.
pub fn random_density<R: Rng + ?Sized>(rng: &mut R, qubits: u32) -> DensityMatrix {
    let dim = 1usize << qubits;
    let mut a = ComplexMatrix::zeros(dim, dim);
    for i in 0..dim {
        for j in 0..dim {
            a.set(i, j, Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)));
        }
    }
    let m = a.mul(&a.adjoint()).expect("square");
    let tr = m.trace().re;
    DensityMatrix::new(qubits, m.scale(Complex64::new(1.0 / tr, 0.0)))
        .expect("A·A† normalized by its trace is a density matrix")
}

pub struct Gen<'r, R: Rng> {
    rng: &'r mut R,
    cfg: GenConfig,
    fresh: usize,
}

type Pool = Vec<(String, Type)>;

impl<'r, R: Rng> Gen<'r, R> {
    pub fn new(rng: &'r mut R, cfg: GenConfig) -> Gen<'r, R> {
        Gen { rng, cfg, fresh: 0 }
    }

    /// A closed term together with its type.
    pub fn term(&mut self) -> (Term, Type) {
        let ty = self.random_type(0);
        let t = self.term_of(&ty);
        (t, ty)
    }

    /// A closed term of the given type.
    pub fn term_of(&mut self, ty: &Type) -> Term {
        self.open_term(&[], ty)
    }

    /// A term of the given type whose free variables come from `scope`,
    /// each used at most once.
    pub fn open_term(&mut self, scope: &[(String, Type)], ty: &Type) -> Term {
        let mut pool = scope.to_vec();
        self.go(&mut pool, ty, 0)
    }

    /// A substitution instance: an open ground-typed term `t` over the
    /// single free variable `x`, and a closed term `r` fitting `x`.
    pub fn substitution_instance(&mut self) -> (Term, Term, String) {
        let x = self.fresh_name();
        let a = self.argument_type(0);
        let ground = Type::Qubits(self.rng.gen_range(1..=self.cfg.max_qubits));
        let t = self.open_term(&[(x.clone(), a.clone())], &ground);
        let r = self.term_of(&a);
        (t, r, x)
    }

    fn fresh_name(&mut self) -> String {
        let x = format!("x{}", self.fresh);
        self.fresh += 1;
        x
    }

    fn random_type(&mut self, depth: u32) -> Type {
        let roll = self.rng.gen_range(0u32..100);
        if depth >= 2 || roll < 55 {
            Type::Qubits(self.rng.gen_range(1..=self.cfg.max_qubits))
        } else if roll < 75 {
            let n = self.rng.gen_range(1..=self.cfg.max_qubits);
            Type::Meas(self.rng.gen_range(1..=n), n)
        } else {
            let dom = self.random_type(depth + 1);
            let cod = self.result_type(depth + 1);
            Type::arrow(dom, cod)
        }
    }

    /// Function result types: qubits, or occasionally another function.
    /// Never a measurement type.
    fn result_type(&mut self, depth: u32) -> Type {
        if depth < 2 && self.rng.gen_range(0u32..100) < 15 {
            let dom = self.random_type(depth + 1);
            let cod = self.result_type(depth + 1);
            Type::arrow(dom, cod)
        } else {
            Type::Qubits(self.rng.gen_range(1..=self.cfg.max_qubits))
        }
    }

    /// Argument types for generated applications.
    fn argument_type(&mut self, depth: u32) -> Type {
        let roll = self.rng.gen_range(0u32..100);
        if roll < 60 || depth + 1 >= self.cfg.max_depth {
            Type::Qubits(self.rng.gen_range(1..=self.cfg.max_qubits))
        } else if roll < 85 {
            let n = self.rng.gen_range(1..=self.cfg.max_qubits);
            Type::Meas(self.rng.gen_range(1..=n), n)
        } else {
            Type::arrow(Type::Qubits(1), Type::Qubits(1))
        }
    }

    fn go(&mut self, pool: &mut Pool, ty: &Type, depth: u32) -> Term {
        // Use an in-scope variable of the right type half the time one
        // exists; using it consumes it.
        let candidates: Vec<usize> =
            pool.iter().enumerate().filter(|(_, (_, t))| t == ty).map(|(i, _)| i).collect();
        if !candidates.is_empty() && self.rng.gen_bool(0.5) {
            let i = candidates[self.rng.gen_range(0..candidates.len())];
            return var(pool.remove(i).0);
        }

        let leaf = depth >= self.cfg.max_depth
            || self.rng.gen_bool((0.2 + 0.1 * f64::from(depth)).min(0.9));
        match ty {
            Type::Qubits(n) => {
                if leaf {
                    self.ground(*n)
                } else {
                    self.qubit_node(pool, *n, depth)
                }
            }
            Type::Meas(m, n) => self.meas_node(pool, *m, *n, depth, leaf),
            Type::Arrow(..) => self.arrow_node(pool, ty, depth, leaf),
        }
    }

    /// A density-matrix literal.
    fn ground(&mut self, n: u32) -> Term {
        let d = match self.rng.gen_range(0u32..4) {
            0 => DensityMatrix::pure_basis(n, self.rng.gen_range(0..(1usize << n))),
            1 if n == 1 => DensityMatrix::plus(),
            _ => random_density(self.rng, n),
        };
        rho(d)
    }

    fn qubit_node(&mut self, pool: &mut Pool, n: u32, depth: u32) -> Term {
        #[derive(Clone, Copy)]
        enum P {
            Evolve,
            Apply,
            Branch,
            Split,
            Convex,
        }
        let mut menu = vec![P::Evolve, P::Evolve, P::Apply, P::Apply, P::Branch, P::Branch];
        if n >= 2 {
            menu.push(P::Split);
            menu.push(P::Split);
        }
        if self.cfg.calculus == Calculus::Mixed {
            menu.push(P::Convex);
            menu.push(P::Convex);
        }
        match menu[self.rng.gen_range(0..menu.len())] {
            P::Evolve => {
                let g = self.gate(n);
                unitary(g, self.go(pool, &Type::Qubits(n), depth + 1))
            }
            P::Apply => self.application(pool, &Type::Qubits(n), depth),
            P::Branch => self.branching(pool, &Type::Qubits(n), depth),
            P::Split => {
                let left = self.go(pool, &Type::Qubits(n - 1), depth + 1);
                let right = self.go(pool, &Type::Qubits(1), depth + 1);
                tensor(left, right)
            }
            P::Convex => self.convex(pool, &Type::Qubits(n), depth),
        }
    }

    fn meas_node(&mut self, pool: &mut Pool, m: u32, n: u32, depth: u32, leaf: bool) -> Term {
        if self.cfg.calculus == Calculus::Prob && self.rng.gen_bool(0.3) {
            let b = self.rng.gen_range(0..(1u64 << m));
            return pair(b, m, random_density(self.rng, n));
        }
        let operand =
            if leaf { self.ground(n) } else { self.go(pool, &Type::Qubits(n), depth + 1) };
        meas(m, operand)
    }

    fn arrow_node(&mut self, pool: &mut Pool, ty: &Type, depth: u32, leaf: bool) -> Term {
        let Type::Arrow(dom, cod) = ty else { unreachable!("arrow_node takes arrow types") };
        if !leaf {
            if self.cfg.calculus == Calculus::Mixed && self.rng.gen_bool(0.2) {
                return self.convex(pool, ty, depth);
            }
            if self.rng.gen_bool(0.2) {
                return self.branching(pool, ty, depth);
            }
            if self.rng.gen_bool(0.15) {
                return self.application(pool, ty, depth);
            }
        }
        let x = self.fresh_name();
        pool.push((x.clone(), (**dom).clone()));
        let body = self.go(pool, cod, depth + 1);
        pool.retain(|(s, _)| s != &x);
        lam(x, body)
    }

    fn application(&mut self, pool: &mut Pool, result: &Type, depth: u32) -> Term {
        // Deterministic beta waits for the argument to become a value, and a
        // measurement term never does; keep measurement types out of applied
        // argument positions there.
        let dom = match self.argument_type(depth) {
            Type::Meas(_, n) if self.cfg.calculus == Calculus::Mixed => Type::Qubits(n),
            a => a,
        };
        let arrow = Type::arrow(dom.clone(), result.clone());
        let arg = self.go(pool, &dom, depth + 1);
        let fun = self.go(pool, &arrow, depth + 1);
        app(fun, arg)
    }

    fn branching(&mut self, pool: &mut Pool, result: &Type, depth: u32) -> Term {
        // Two branches dominate; four-way branching stays rare to keep
        // reduction trees small.
        let m = if self.cfg.max_qubits >= 2 && self.rng.gen_bool(0.15) { 2 } else { 1 };
        let k = self.rng.gen_range(m..=self.cfg.max_qubits);
        let scrutinee = self.go(pool, &Type::Meas(m, k), depth + 1);
        let x = self.fresh_name();
        let branches = self.alternatives(
            pool,
            Some((x.clone(), Type::Qubits(k))),
            1usize << m,
            result,
            depth + 1,
        );
        letcase(self.cfg.calculus == Calculus::Mixed, x, scrutinee, branches)
    }

    fn convex(&mut self, pool: &mut Pool, ty: &Type, depth: u32) -> Term {
        let count = if self.rng.gen_bool(0.3) { 3 } else { 2 };
        let mut weights: Vec<f64> = (0..count).map(|_| self.rng.gen_range(0.05..1.0)).collect();
        let total: f64 = weights.iter().sum();
        for w in &mut weights {
            *w /= total;
        }
        let addends = self.alternatives(pool, None, count, ty, depth + 1);
        sum(weights.into_iter().zip(addends).collect())
    }

    /// Generates `count` alternative subterms of one type. Each draws from
    /// its own clone of the pool (extended with `extra` when given); the
    /// union of the variables any alternative used is then consumed.
    fn alternatives(
        &mut self,
        pool: &mut Pool,
        extra: Option<(String, Type)>,
        count: usize,
        ty: &Type,
        depth: u32,
    ) -> Vec<Term> {
        let mut consumed: Vec<String> = Vec::new();
        let mut out = Vec::new();
        for _ in 0..count {
            let mut alt = pool.clone();
            if let Some((x, a)) = &extra {
                alt.push((x.clone(), a.clone()));
            }
            out.push(self.go(&mut alt, ty, depth));
            for (name, _) in pool.iter() {
                if !alt.iter().any(|(s, _)| s == name) && !consumed.contains(name) {
                    consumed.push(name.clone());
                }
            }
        }
        pool.retain(|(s, _)| !consumed.contains(s));
        out
    }

    fn one_qubit_gate(&mut self) -> GateExpr {
        GateExpr::Named(match self.rng.gen_range(0u32..4) {
            0 => Gate::H,
            1 => Gate::X,
            2 => Gate::Y,
            _ => Gate::Z,
        })
    }

    /// A gate expression acting on at most `n` qubits; smaller gates are
    /// padded with identity by evolution.
    fn gate(&mut self, n: u32) -> GateExpr {
        if n == 1 {
            return self.one_qubit_gate();
        }
        match self.rng.gen_range(0u32..4) {
            0 => GateExpr::Named(Gate::Cnot),
            1 => {
                let a = self.one_qubit_gate();
                let b = self.one_qubit_gate();
                GateExpr::TensorG(Box::new(a), Box::new(b))
            }
            2 => self.one_qubit_gate(),
            _ => {
                let a = self.one_qubit_gate();
                GateExpr::TensorG(Box::new(a), Box::new(GateExpr::Named(Gate::I(n - 1))))
            }
        }
    }
}
