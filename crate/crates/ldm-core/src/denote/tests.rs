use super::*;
use crate::eval_prob::step_prob;
use crate::matrix::DensityMatrix;
use crate::syntax::{letcase, pair, subst, sum, var, parse, Calculus};
use crate::typing::Type;

fn p(src: &str) -> Term {
    parse(src, Calculus::Prob).unwrap_or_else(|e| panic!("parse failed: {e}\nsource: {src}"))
}

fn pm(src: &str) -> Term {
    parse(src, Calculus::Mixed).unwrap_or_else(|e| panic!("parse failed: {e}\nsource: {src}"))
}

fn den(t: &Term) -> TripletSet {
    interp(t, &Valuation::new()).unwrap_or_else(|e| panic!("interp failed: {e}"))
}

fn fmat(t: &Term) -> DensityMatrix {
    match fsem(t, &Valuation::new()).unwrap() {
        FSem::Mat(d) => d,
        FSem::Fun(_) => panic!("function-level interpretation where a matrix was expected"),
    }
}

fn mat_at(s: &TripletSet, i: usize) -> &DensityMatrix {
    match &s.triplets()[i].elem {
        DenElement::Mat(d) => d,
        DenElement::Fun(_) => panic!("triplet {i} is a function"),
    }
}

fn diag2(a: f64, b: f64) -> DensityMatrix {
    DensityMatrix::weighted_sum(&[
        (a, DensityMatrix::pure_basis(1, 0)),
        (b, DensityMatrix::pure_basis(1, 1)),
    ])
    .unwrap()
}

const RHO: &str = "rho[1]{ 3/4, sqrt(3)/4 ; sqrt(3)/4, 1/4 }";

/// The two-stage coin experiment: a function chosen by one fair coin,
/// applied to the blind measurement of a biased state.
fn experiment() -> Term {
    p(&format!(
        "(letcase y = meas[1] |+> in {{ \\x. x ; \\x. letcase w = meas[1] |+> in {{ w ; w }} }}) \
         (letcase z = meas[1] {RHO} in {{ z ; z }})"
    ))
}

const TOL: f64 = 1e-9;

#[test]
fn measurement_outcomes_are_tagged() {
    let s = den(&p("meas[1] |+>"));
    assert_eq!(s.triplets().len(), 2);
    assert_eq!(s.triplets()[0].tag, Tag::Out(0));
    assert_eq!(s.triplets()[1].tag, Tag::Out(1));
    assert!((s.triplets()[0].p - 0.5).abs() <= TOL);
    assert!((s.triplets()[1].p - 0.5).abs() <= TOL);
    assert!(mat_at(&s, 0).approx_eq(&DensityMatrix::pure_basis(1, 0), TOL));
    assert!(mat_at(&s, 1).approx_eq(&DensityMatrix::pure_basis(1, 1), TOL));
    assert!((s.weight() - 1.0).abs() <= TOL);
}

#[test]
fn branching_erases_the_outcome_tag() {
    let s = den(&p(&format!("letcase z = meas[1] {RHO} in {{ z ; z }}")));
    assert_eq!(s.triplets().len(), 2);
    for t in s.triplets() {
        assert_eq!(t.tag, Tag::Empty);
    }
    assert!((s.triplets()[0].p - 0.75).abs() <= TOL);
    assert!((s.triplets()[1].p - 0.25).abs() <= TOL);
    assert!(mat_at(&s, 0).approx_eq(&DensityMatrix::pure_basis(1, 0), TOL));
    assert!(mat_at(&s, 1).approx_eq(&DensityMatrix::pure_basis(1, 1), TOL));
}

#[test]
fn branching_requires_an_observed_outcome() {
    let t = letcase(false, "y", p("|0>"), vec![var("y"), var("y")]);
    match interp(&t, &Valuation::new()) {
        Err(DenoteError::MissingOutcome) => {}
        other => panic!("expected a missing-outcome error, got {other:?}"),
    }
}

#[test]
fn outcome_literals_select_their_branch() {
    let scrutinee = pair(1, 1, DensityMatrix::plus());
    let s = den(&letcase(false, "y", scrutinee.clone(), vec![p("|0>"), var("y")]));
    assert_eq!(s.triplets().len(), 1);
    assert_eq!(s.triplets()[0].tag, Tag::Empty);
    assert!(mat_at(&s, 0).approx_eq(&DensityMatrix::plus(), TOL));

    let wild = letcase(false, "y", pair(3, 2, DensityMatrix::plus()), vec![var("y"), var("y")]);
    match interp(&wild, &Valuation::new()) {
        Err(DenoteError::BranchOutOfRange { outcome: 3, branches: 2 }) => {}
        other => panic!("expected an out-of-range error, got {other:?}"),
    }
}

#[test]
fn application_merges_matrix_outcomes() {
    let s = den(&experiment());
    assert_eq!(s.triplets().len(), 2);
    assert!((s.triplets()[0].p - 0.625).abs() <= TOL);
    assert!((s.triplets()[1].p - 0.375).abs() <= TOL);
    assert_eq!(s.triplets()[0].tag, Tag::Empty);
    assert!(mat_at(&s, 0).approx_eq(&DensityMatrix::pure_basis(1, 0), TOL));
    assert!(mat_at(&s, 1).approx_eq(&DensityMatrix::pure_basis(1, 1), TOL));
    assert!((s.weight() - 1.0).abs() <= TOL);
}

#[test]
fn closures_thread_the_argument_tag_through_the_binder() {
    let funs = den(&p(
        "letcase y = meas[1] |+> in { \\x. x ; \\x. letcase w = meas[1] |+> in { w ; w } }",
    ));
    assert_eq!(funs.triplets().len(), 2);
    let closure_of = |is_var: bool| {
        funs.triplets()
            .iter()
            .find_map(|t| match &t.elem {
                DenElement::Fun(c)
                    if matches!(c.body.kind, TermKind::Var(_)) == is_var =>
                {
                    Some(c.clone())
                }
                _ => None,
            })
            .expect("closure with the requested body shape")
    };

    // The identity returns its argument unchanged — tag included.
    let id = closure_of(true);
    let arg = DenElement::Mat(DensityMatrix::plus());
    let out = apply_closure(&id, Tag::Out(1), &arg).unwrap();
    assert_eq!(out.triplets().len(), 1);
    assert_eq!(out.triplets()[0].tag, Tag::Out(1));
    assert!(mat_at(&out, 0).approx_eq(&DensityMatrix::plus(), TOL));

    // The coin branch ignores its argument and tosses afresh.
    let coin = closure_of(false);
    let out = apply_closure(&coin, Tag::Empty, &DenElement::Mat(DensityMatrix::pure_basis(1, 1)))
        .unwrap();
    assert_eq!(out.triplets().len(), 2);
    assert!((out.triplets()[0].p - 0.5).abs() <= TOL);
    assert!(mat_at(&out, 0).approx_eq(&DensityMatrix::pure_basis(1, 0), TOL));
    assert!(mat_at(&out, 1).approx_eq(&DensityMatrix::pure_basis(1, 1), TOL));
}

#[test]
fn different_sets_can_share_one_matrix() {
    let toss = p(&format!("(\\x. letcase y = meas[1] |+> in {{ x ; U[Z] x }}) {RHO}"));
    let blind = p(&format!("(\\x. letcase y = meas[1] x in {{ y ; y }}) {RHO}"));

    let s_toss = den(&toss);
    let s_blind = den(&blind);
    assert!(!s_toss.approx_eq(&s_blind, TOL));

    // Toss: the input state and its phase-flipped copy, half each.
    let rho = den(&p(RHO));
    let rho_minus = den(&p("rho[1]{ 3/4, -sqrt(3)/4 ; -sqrt(3)/4, 1/4 }"));
    assert_eq!(s_toss.triplets().len(), 2);
    assert!(s_toss
        .triplets()
        .iter()
        .any(|t| matches!(&t.elem, DenElement::Mat(d) if d.approx_eq(mat_at(&rho, 0), TOL))));
    assert!(s_toss
        .triplets()
        .iter()
        .any(|t| matches!(&t.elem, DenElement::Mat(d) if d.approx_eq(mat_at(&rho_minus, 0), TOL))));

    // Blind measurement: the basis states, diagonally weighted.
    assert!((s_blind.triplets()[0].p - 0.75).abs() <= TOL);
    assert!((s_blind.triplets()[1].p - 0.25).abs() <= TOL);

    // Both flatten to the same dephased matrix.
    let expected = diag2(0.75, 0.25);
    assert!(fmat(&toss).approx_eq(&expected, TOL));
    assert!(fmat(&blind).approx_eq(&expected, TOL));
}

#[test]
fn ground_terms_denote_themselves() {
    let rho = p(RHO);
    let s = den(&rho);
    assert_eq!(s.triplets().len(), 1);
    assert_eq!(s.triplets()[0].tag, Tag::Empty);
    assert!((s.triplets()[0].p - 1.0).abs() <= TOL);
    assert!(fmat(&rho).approx_eq(mat_at(&s, 0), TOL));

    let two = den(&p("|0> >< |1>"));
    assert_eq!(two.triplets().len(), 1);
    assert_eq!(mat_at(&two, 0).qubits(), 2);
    assert!(mat_at(&two, 0)
        .approx_eq(&DensityMatrix::pure_basis(1, 0).tensor(&DensityMatrix::pure_basis(1, 1)), TOL));
}

#[test]
fn unitaries_reset_tags_and_keep_branches_apart() {
    let s = den(&p("U[X] (meas[1] |+>)"));
    assert_eq!(s.triplets().len(), 2);
    for t in s.triplets() {
        assert_eq!(t.tag, Tag::Empty);
        assert!((t.p - 0.5).abs() <= TOL);
    }
    assert!(mat_at(&s, 0).approx_eq(&DensityMatrix::pure_basis(1, 0), TOL));
    assert!(mat_at(&s, 1).approx_eq(&DensityMatrix::pure_basis(1, 1), TOL));
}

#[test]
fn sums_scale_and_union() {
    let s = den(&pm("sum { 1/4: |0> ; 3/4: |1> }"));
    assert_eq!(s.triplets().len(), 2);
    assert!((s.triplets()[0].p - 0.25).abs() <= TOL);
    assert!((s.triplets()[1].p - 0.75).abs() <= TOL);

    // Alike addends merge their weight.
    let merged = den(&sum(vec![(0.25, p("|0>")), (0.75, p("|0>"))]));
    assert_eq!(merged.triplets().len(), 1);
    assert!((merged.triplets()[0].p - 1.0).abs() <= TOL);

    // The flattening is linear in the sum's weights.
    let toss = pm(&format!("(\\x. letcase* y = meas[1] |+> in {{ x ; U[Z] x }}) {RHO}"));
    let lhs = fmat(&sum(vec![(0.5, toss.clone()), (0.5, pm("|1>"))]));
    let rhs = DensityMatrix::weighted_sum(&[
        (0.5, fmat(&toss)),
        (0.5, DensityMatrix::pure_basis(1, 1)),
    ])
    .unwrap();
    assert!(lhs.approx_eq(&rhs, TOL));
}

#[test]
fn typed_terms_carry_unit_weight() {
    for t in [
        experiment(),
        p("meas[1] |+>"),
        p(RHO),
        p(&format!("meas[1] {RHO}")),
        p("\\x. x"),
        pm("sum { 1/2: |0> ; 1/2: |1> }"),
    ] {
        let s = den(&t);
        assert!(
            (weight(&s) - 1.0).abs() <= TOL,
            "weight {} for `{}`",
            s.weight(),
            print(&t)
        );
    }
}

#[test]
fn observed_tags_match_their_types() {
    assert!(check_p(Tag::Empty, &Type::Qubits(1)));
    assert!(check_p(Tag::Out(0), &Type::Qubits(1)));
    assert!(!check_p(Tag::Empty, &Type::Meas(1, 1)));
    assert!(check_p(Tag::Out(1), &Type::Meas(1, 1)));
    assert!(check_p(Tag::Empty, &Type::arrow(Type::Qubits(1), Type::Qubits(1))));

    // Every element of a measurement-typed denotation is observed.
    let s = den(&p("meas[1] |+>"));
    let ty = Type::Meas(1, 1);
    for t in s.triplets() {
        assert!(check_p(t.tag, &ty));
        assert!(check_tsem_membership(&t.elem, &ty, &[]));
    }
}

#[test]
fn membership_probing_accepts_and_refutes() {
    let arrow11 = Type::arrow(Type::Qubits(1), Type::Qubits(1));
    let probes = standard_probes(1);

    let id = den(&p("\\x. x"));
    assert!(check_tsem_membership(&id.triplets()[0].elem, &arrow11, &probes));

    let blind = den(&p("\\x. letcase y = meas[1] x in { y ; y }"));
    assert!(check_tsem_membership(&blind.triplets()[0].elem, &arrow11, &probes));

    // Output on two qubits refutes a one-qubit codomain.
    let widen = den(&p("\\x. x >< |0>"));
    assert!(!check_tsem_membership(&widen.triplets()[0].elem, &arrow11, &probes));
    assert!(check_tsem_membership(
        &widen.triplets()[0].elem,
        &Type::arrow(Type::Qubits(1), Type::Qubits(2)),
        &probes,
    ));

    // A handmade weight-dropping closure is refuted by any probe.
    let lossy = DenElement::Fun(Closure {
        binder: "x".into(),
        body: sum(vec![(0.5, var("x"))]),
        env: Valuation::new(),
    });
    assert!(!check_tsem_membership(&lossy, &arrow11, &probes));

    // Matrices never inhabit arrow types, nor functions ground types.
    let m = DenElement::Mat(DensityMatrix::plus());
    assert!(!check_tsem_membership(&m, &arrow11, &probes));
    assert!(!check_tsem_membership(&id.triplets()[0].elem, &Type::Qubits(1), &probes));
    assert!(check_tsem_membership(&m, &Type::Qubits(1), &probes));
    assert!(!check_tsem_membership(&m, &Type::Qubits(2), &probes));
}

#[test]
fn probe_sets_respect_their_domains() {
    for (tag, e) in standard_probes(2) {
        assert_eq!(tag, Tag::Empty);
        match e {
            DenElement::Mat(d) => assert_eq!(d.qubits(), 2),
            DenElement::Fun(_) => panic!("standard probes are matrices"),
        }
    }
    for (tag, _) in probes_for(&Type::Meas(1, 1)) {
        match tag {
            Tag::Out(b) => assert!(b <= 1),
            Tag::Empty => panic!("measurement-typed probes must be observed"),
        }
    }
    assert!(probes_for(&Type::arrow(Type::Qubits(1), Type::Qubits(1))).is_empty());
}

#[test]
fn substitution_agrees_with_environment_extension() {
    // t has one free variable; r denotes a two-outcome set.
    let t = p("U[X] x");
    let r = p(&format!("letcase z = meas[1] {RHO} in {{ z ; z }}"));

    let lhs = fmat(&subst(&t, "x", &r));

    let parts: Vec<(f64, DensityMatrix)> = den(&r)
        .triplets()
        .iter()
        .map(|trip| {
            let mut env = Valuation::new();
            env.insert("x".into(), (trip.tag, trip.elem.clone()));
            match fsem(&t, &env).unwrap() {
                FSem::Mat(d) => (trip.p, d),
                FSem::Fun(_) => panic!("ground type expected"),
            }
        })
        .collect();
    let rhs = DensityMatrix::weighted_sum(&parts).unwrap();

    assert!(lhs.approx_eq(&rhs, TOL));
    assert!(lhs.approx_eq(&diag2(0.25, 0.75), TOL));
}

#[test]
fn probabilistic_steps_preserve_the_matrix() {
    let mut frontier = vec![experiment()];
    let mut nodes = 0;
    while let Some(t) = frontier.pop() {
        let Some(d) = step_prob(&t).unwrap() else { continue };
        nodes += 1;
        let parts: Vec<(f64, DensityMatrix)> =
            d.iter().map(|(p, r)| (*p, fmat(r))).collect();
        let combined = DensityMatrix::weighted_sum(&parts).unwrap();
        assert!(
            fmat(&t).approx_eq(&combined, TOL),
            "one-step flattening changed at `{}`",
            print(&t)
        );
        frontier.extend(d.into_iter().map(|(_, r)| r));
    }
    assert!(nodes >= 5, "walked only {nodes} internal nodes");
}

#[test]
fn deterministic_steps_preserve_the_matrix() {
    let t = pm(&format!(
        "(letcase* y = meas[1] |+> in {{ \\x. x ; \\x. letcase* w = meas[1] |+> in {{ w ; w }} }}) \
         (letcase* z = meas[1] {RHO} in {{ z ; z }})"
    ));
    let expected = diag2(0.625, 0.375);
    assert!(fmat(&t).approx_eq(&expected, TOL));

    let (end, log) = crate::eval_mixed::normalize_with_log(&t, 100).unwrap();
    for entry in &log {
        assert!(
            fmat(&entry.term).approx_eq(&expected, TOL),
            "flattening drifted after `{}`",
            entry.rule
        );
    }
    assert!(fmat(&end).approx_eq(&expected, TOL));
}

#[test]
fn sets_render_readably() {
    let s = den(&p(&format!("letcase z = meas[1] {RHO} in {{ z ; z }}")));
    assert_eq!(format!("{s}"), "{ (3/4, ε, |0>) ; (1/4, ε, |1>) }");

    let f = den(&p("\\x. x"));
    assert_eq!(format!("{f}"), "{ (1, ε, \\x. x) }");
}

#[test]
fn sets_serialize_to_json() {
    let v = den(&p("meas[1] |+>")).to_json();
    assert_eq!(v.as_array().map(Vec::len), Some(2));
    for (i, expected_entries) in [
        serde_json::json!([[1.0, 0.0], [0.0, 0.0], [0.0, 0.0], [0.0, 0.0]]),
        serde_json::json!([[0.0, 0.0], [0.0, 0.0], [0.0, 0.0], [1.0, 0.0]]),
    ]
    .into_iter()
    .enumerate()
    {
        assert_eq!(v[i]["b"], serde_json::json!(i));
        assert!((v[i]["p"].as_f64().unwrap() - 0.5).abs() <= TOL);
        assert_eq!(v[i]["e"]["kind"], serde_json::json!("mat"));
        assert_eq!(v[i]["e"]["n"], serde_json::json!(1));
        assert_eq!(v[i]["e"]["entries"], expected_entries);
    }

    let f = den(&p("\\x. x"));
    assert_eq!(
        f.to_json(),
        serde_json::json!([
            { "p": 1.0, "b": null, "e": { "kind": "fun", "term": "\\x. x" } },
        ])
    );
}

#[test]
fn semantic_errors_are_diagnosed() {
    let cases: Vec<(Term, fn(&DenoteError) -> bool)> = vec![
        (var("x"), |e| matches!(e, DenoteError::ValuationMismatch { var } if var == "x")),
        (p("|0> |1>"), |e| matches!(e, DenoteError::UnapplicableElement { .. })),
        (p("U[X] (\\x. x)"), |e| matches!(e, DenoteError::NotADensity { .. })),
        (p("(\\x. x) >< |0>"), |e| matches!(e, DenoteError::NotADensity { .. })),
        (p("meas[1] (\\x. x)"), |e| matches!(e, DenoteError::NotADensity { .. })),
        (p("meas[2] |0>"), |e| matches!(e, DenoteError::Matrix(_))),
    ];
    for (t, ok) in cases {
        match interp(&t, &Valuation::new()) {
            Err(e) => assert!(ok(&e), "`{}` raised the wrong error: {e:?}", print(&t)),
            Ok(s) => panic!("`{}` unexpectedly denoted {s}", print(&t)),
        }
    }

    match fsem(&pm("sum { 1/2: |0> ; 1/2: \\x. x }"), &Valuation::new()) {
        Err(DenoteError::HeterogeneousElements) => {}
        other => panic!("expected a heterogeneous-family error, got {other:?}"),
    }
}

#[test]
fn function_level_application_flattens_lazily() {
    let funs = fsem(
        &p("letcase y = meas[1] |+> in { \\x. x ; \\x. letcase w = meas[1] |+> in { w ; w } }"),
        &Valuation::new(),
    )
    .unwrap();
    let arg = den(&p(&format!("letcase z = meas[1] {RHO} in {{ z ; z }}")));

    // Weighted application over the argument's set reproduces the
    // experiment's flattened matrix.
    let parts: Vec<(f64, DensityMatrix)> = arg
        .triplets()
        .iter()
        .map(|t| match funs.apply(t.tag, &t.elem).unwrap() {
            FSem::Mat(d) => (t.p, d),
            FSem::Fun(_) => panic!("ground result expected"),
        })
        .collect();
    let combined = DensityMatrix::weighted_sum(&parts).unwrap();
    assert!(combined.approx_eq(&diag2(0.625, 0.375), TOL));

    // Matrices cannot be applied at the flattened level either.
    match fsem(&p("|0>"), &Valuation::new())
        .unwrap()
        .apply(Tag::Empty, &DenElement::Mat(DensityMatrix::plus()))
    {
        Err(DenoteError::UnapplicableElement { .. }) => {}
        other => panic!("expected an unapplicable-element error, got {other:?}"),
    }
}
