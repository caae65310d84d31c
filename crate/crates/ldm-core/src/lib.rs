//! Core library for `ldm`: two small lambda calculi whose ground data are
//! density matrices.
//!
//! The classical-control calculus pairs ordinary lambda terms with density
//! matrix literals, unitary evolution, computational-basis measurement and a
//! `letcase` branching construct that reads measurement outcomes; its
//! operational semantics is a probabilistic rewrite relation whose traces are
//! trees. The probabilistic-control calculus replaces outcome branching with
//! formal convex sums of terms and rewrites deterministically.
//!
//! Module map:
//!
//! * [`matrix`] — dense complex matrices, density matrices, unitaries.
//! * [`syntax`] — terms, parsing, printing, substitution, alpha-equivalence.
//! * [`typing`] — affine type inference and checking.
//! * [`eval_prob`] — probabilistic rewriting and trace trees.
//! * [`eval_mixed`] — deterministic rewriting with convex sums.
//! * [`denote`] — terms as weighted sets of matrices and functions.
//! * [`gen`] — random well-typed terms for the property suites.
//! * [`tol`] — the global comparison tolerance.

pub mod denote;
pub mod gen;
pub mod eval_mixed;
pub mod eval_prob;
pub mod matrix;
pub mod syntax;
pub mod tol;
pub mod typing;

pub use denote::{
    apply_closure, check_p, check_tsem_membership, fsem, interp, probes_for, standard_probes,
    weight, Closure, DenElement, DenoteError, FSem, Tag, Triplet, TripletSet, Valuation,
};
pub use eval_mixed::{normalize_mixed, normalize_with_log, step_mixed, MixedStepResult, StuckReason};
pub use gen::{random_density, Gen, GenConfig};
pub use eval_prob::{
    build_trace, distribution_density, final_distribution, sample_run, step_prob, trace_to_dot,
    trace_to_json, Distribution, EvalError, LeafStatus, TraceTree,
};
pub use matrix::{ComplexMatrix, DensityMatrix, MatrixError, MeasurementOutcome, UnitaryOp};
pub use syntax::{
    alpha_eq, canonical_sum, free_vars, parse, parse_pragma, print, subst, Calculus, Gate,
    GateExpr, ParseError, SyntaxError, Term, TermKind,
};
pub use typing::{check, check_metatheory_step, infer, Context, Type, TypeError};
