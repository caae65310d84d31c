use super::*;
use crate::matrix::UnitaryOp;
use crate::syntax::parse;
use num_complex::Complex64;

fn p(src: &str) -> Term {
    parse(src, Calculus::Prob).unwrap_or_else(|e| panic!("parse failed: {e}\nsource: {src}"))
}

fn step1(src: &str) -> Distribution {
    step_prob(&p(src)).unwrap().unwrap_or_else(|| panic!("`{src}` does not step"))
}

const RHO: &str = "rho[1]{ 3/4, sqrt(3)/4 ; sqrt(3)/4, 1/4 }";
const RHO_MINUS: &str = "rho[1]{ 3/4, -sqrt(3)/4 ; -sqrt(3)/4, 1/4 }";

/// The two-coin experiment: toss a coin; heads returns the argument coin,
/// tails tosses a fresh one.
fn experiment() -> Term {
    let r1 = "letcase y = meas[1] |+> in { \\x. x ; \\x. letcase w = meas[1] |+> in { w ; w } }";
    let r2 = format!("letcase z = meas[1] {RHO} in {{ z ; z }}");
    p(&format!("({r1}) ({r2})"))
}

const TELEPORT: &str = "\\x. letcase y = meas[2] (U[H*I(2)] (U[CNOT*I(1)] (x >< bell00))) in \
                        { y ; U[I(2)*Z] y ; U[I(2)*X] y ; U[I(2)*Z] (U[I(2)*X] y) }";

#[test]
fn beta_steps_with_probability_one() {
    let d = step1("(\\x. x) |0>");
    assert_eq!(d.len(), 1);
    assert_eq!(d[0].0, 1.0);
    assert!(alpha_eq(&d[0].1, &p("|0>")));
}

#[test]
fn beta_fires_before_the_function_body_normalizes() {
    let d = step1("(\\x. letcase w = meas[1] |+> in { w ; w }) |0>");
    assert_eq!(d.len(), 1);
    assert!(alpha_eq(&d[0].1, &p("letcase w = meas[1] |+> in { w ; w }")));
}

#[test]
fn arguments_step_first() {
    let d = step1("(\\x. x) (U[X] |0>)");
    assert_eq!(d.len(), 1);
    assert!(alpha_eq(&d[0].1, &p("(\\x. x) |1>")));
}

#[test]
fn measurement_splits_by_born_probabilities() {
    let d = step1(&format!("meas[1] {RHO}"));
    assert_eq!(d.len(), 2);
    assert!((d[0].0 - 0.75).abs() < 1e-12);
    assert!(alpha_eq(&d[0].1, &p("pair(0, 1, |0>)")));
    assert!((d[1].0 - 0.25).abs() < 1e-12);
    assert!(alpha_eq(&d[1].1, &p("pair(1, 1, |1>)")));
}

#[test]
fn letcase_selects_branch_by_outcome() {
    // A 3-qubit state whose first two qubits read 1, 0: outcome word 1.
    let d = step1(
        "letcase y = pair(1, 2, |100>) in \
         { y ; U[I(2)*Z] y ; U[I(2)*X] y ; U[I(2)*Z] (U[I(2)*X] y) }",
    );
    assert_eq!(d.len(), 1);
    assert!(alpha_eq(&d[0].1, &p("U[I(2)*Z] |100>")));
}

#[test]
fn unitary_and_tensor_collapse() {
    let d = step1("U[H] |0>");
    assert!(alpha_eq(&d[0].1, &p("|+>")));
    let d = step1("|1> >< |0>");
    assert!(alpha_eq(&d[0].1, &p("|10>")));
}

#[test]
fn values_do_not_step() {
    for src in [
        "|0>",
        "\\x. x",
        "pair(0, 1, |0>)",
        "\\x. meas[1] x",
        "\\x. x >< |0>",
        "\\x. letcase y = meas[1] x in { y ; U[Z] y }",
        "(\\x. x) >< (\\y. y)",
    ] {
        let t = p(src);
        assert_eq!(step_prob(&t).unwrap(), None, "`{src}` stepped");
        assert!(is_value(&t), "`{src}` not classified as a value");
    }
    // Open normal forms that are not values are stuck, not values.
    let t = p("meas[1] x");
    assert_eq!(step_prob(&t).unwrap(), None);
    assert!(!is_value(&t));
}

#[test]
fn ill_formed_redexes_error() {
    assert!(matches!(
        step_prob(&p("U[X] (\\x. x)")),
        Err(EvalError::IllFormedRedex { .. })
    ));
    assert!(matches!(
        step_prob(&p("meas[1] pair(0, 1, |0>)")),
        Err(EvalError::IllFormedRedex { .. })
    ));
    // A letcase over a non-pair value is stuck instead.
    let t = p("letcase y = |0> in { y ; y }");
    assert_eq!(step_prob(&t).unwrap(), None);
    assert!(!is_value(&t));
}

#[test]
fn experiment_trace_matches_the_published_tree() {
    let tree = build_trace(&experiment(), 64).unwrap();
    assert_eq!(tree.leaf_count(), 6);
    assert_eq!(tree.edge_count(), 24);
    assert_eq!(tree.depth(), 8);
    // Root: the argument's measurement splits 3/4 / 1/4.
    assert_eq!(tree.children.len(), 2);
    assert!((tree.children[0].0 - 0.75).abs() < 1e-12);
    assert!((tree.children[1].0 - 0.25).abs() < 1e-12);
    // Then the letcase fires deterministically.
    assert_eq!(tree.children[0].1.children.len(), 1);
    assert_eq!(tree.children[0].1.children[0].0, 1.0);

    let dist = final_distribution(&tree).unwrap();
    assert_eq!(dist.len(), 2);
    assert!(alpha_eq(&dist[0].1, &p("|0>")));
    assert!((dist[0].0 - 0.625).abs() < 1e-12);
    assert!(alpha_eq(&dist[1].1, &p("|1>")));
    assert!((dist[1].0 - 0.375).abs() < 1e-12);

    let density = distribution_density(&dist).unwrap();
    let expected = DensityMatrix::weighted_sum(&[
        (0.625, DensityMatrix::pure_basis(1, 0)),
        (0.375, DensityMatrix::pure_basis(1, 1)),
    ])
    .unwrap();
    assert!(density.approx_eq(&expected, 1e-9));
}

#[test]
fn coin_toss_trace() {
    // O1: toss a coin, then apply I or Z to the argument.
    let tree =
        build_trace(&p(&format!("(\\y. letcase x = meas[1] |+> in {{ y ; U[Z] y }}) {RHO}")), 64)
            .unwrap();
    assert_eq!(tree.leaf_count(), 2);
    assert_eq!(tree.edge_count(), 6);
    let dist = final_distribution(&tree).unwrap();
    assert_eq!(dist.len(), 2);
    assert!((dist[0].0 - 0.5).abs() < 1e-12);
    assert!(alpha_eq(&dist[0].1, &p(RHO)));
    assert!((dist[1].0 - 0.5).abs() < 1e-12);
    assert!(alpha_eq(&dist[1].1, &p(RHO_MINUS)));
    let density = distribution_density(&dist).unwrap();
    let expected = DensityMatrix::weighted_sum(&[
        (0.75, DensityMatrix::pure_basis(1, 0)),
        (0.25, DensityMatrix::pure_basis(1, 1)),
    ])
    .unwrap();
    assert!(density.approx_eq(&expected, 1e-9));
}

#[test]
fn blind_measurement_trace() {
    // O2: measure the argument and return the post-measurement state.
    let tree =
        build_trace(&p(&format!("(\\y. letcase x = meas[1] y in {{ x ; x }}) {RHO}")), 64)
            .unwrap();
    assert_eq!(tree.leaf_count(), 2);
    assert_eq!(tree.edge_count(), 5);
    let dist = final_distribution(&tree).unwrap();
    assert!((dist[0].0 - 0.75).abs() < 1e-12);
    assert!(alpha_eq(&dist[0].1, &p("|0>")));
    assert!((dist[1].0 - 0.25).abs() < 1e-12);
    assert!(alpha_eq(&dist[1].1, &p("|1>")));
}

#[test]
fn teleportation_restores_the_state_on_every_branch() {
    let rho = match p(RHO).kind {
        TermKind::Rho(d) => d,
        _ => unreachable!(),
    };
    let tree = build_trace(&p(&format!("({TELEPORT}) {RHO}")), 64).unwrap();
    let dist = final_distribution(&tree).unwrap();
    assert_eq!(dist.len(), 4);
    // Each leaf is one measured two-qubit marker next to the intact state.
    let mut seen = [false; 4];
    for (prob, leaf) in &dist {
        assert!((prob - 0.25).abs() < 1e-9);
        let d = match &leaf.kind {
            TermKind::Rho(d) => d,
            other => panic!("non-density teleport leaf {other:?}"),
        };
        let marker = (0..4usize)
            .find(|i| d.approx_eq(&DensityMatrix::pure_basis(2, *i).tensor(&rho), 1e-9))
            .unwrap_or_else(|| panic!("unexpected leaf {}", print(leaf)));
        assert!(!seen[marker]);
        seen[marker] = true;
    }
    assert!(seen.iter().all(|s| *s));
    // The mixed state is the uniform marker mixture next to the input.
    let density = distribution_density(&dist).unwrap();
    let quarter_i4 = DensityMatrix::weighted_sum(
        &(0..4usize)
            .map(|i| (0.25, DensityMatrix::pure_basis(2, i).tensor(&rho)))
            .collect::<Vec<_>>(),
    )
    .unwrap();
    assert!(density.approx_eq(&quarter_i4, 1e-9));
}

#[test]
fn teleportation_identity_on_random_states() {
    use rand::Rng;
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let teleport = p(TELEPORT);
    for _ in 0..20 {
        // A random pure state cos|0> + e^{i phi} sin|1>, slightly mixed.
        let theta: f64 = rng.gen::<f64>() * std::f64::consts::PI;
        let phi: f64 = rng.gen::<f64>() * std::f64::consts::TAU;
        let amp0 = Complex64::new(theta.cos(), 0.0);
        let amp1 = Complex64::from_polar(theta.sin(), phi);
        let pure = DensityMatrix::from_ket(&[amp0, amp1]).unwrap();
        let max_mixed = DensityMatrix::weighted_sum(&[
            (0.5, DensityMatrix::pure_basis(1, 0)),
            (0.5, DensityMatrix::pure_basis(1, 1)),
        ])
        .unwrap();
        let lambda: f64 = rng.gen();
        let state =
            DensityMatrix::weighted_sum(&[(lambda, pure), (1.0 - lambda, max_mixed)]).unwrap();
        let applied = crate::syntax::app(teleport.clone(), crate::syntax::rho(state.clone()));
        let dist = final_distribution(&build_trace(&applied, 64).unwrap()).unwrap();
        let density = distribution_density(&dist).unwrap();
        // Third qubit carries the input exactly; markers are uniform.
        let expected = DensityMatrix::weighted_sum(
            &(0..4usize)
                .map(|i| (0.25, DensityMatrix::pure_basis(2, i).tensor(&state)))
                .collect::<Vec<_>>(),
        )
        .unwrap();
        assert!(density.approx_eq(&expected, 1e-7));
    }
}

#[test]
fn probability_conservation_at_internal_nodes() {
    fn assert_conserved(tree: &TraceTree) {
        if !tree.children.is_empty() {
            let total: f64 = tree.children.iter().map(|(p, _)| p).sum();
            assert!((total - 1.0).abs() < 1e-8, "children sum to {total}");
            for (_, child) in &tree.children {
                assert_conserved(child);
            }
        }
    }
    assert_conserved(&build_trace(&experiment(), 64).unwrap());
}

#[test]
fn fuel_exhaustion_is_flagged_and_rejected() {
    // The untypable self-application loops forever.
    let omega = p("(\\x. x x) (\\x. x x)");
    let tree = build_trace(&omega, 10).unwrap();
    assert_eq!(tree.leaf_count(), 1);
    assert_eq!(tree.depth(), 11);
    assert_eq!(final_distribution(&tree), Err(EvalError::IncompleteTrace));
    assert_eq!(sample_run(&omega, 1, 10), Err(EvalError::FuelExhausted));
}

#[test]
fn distribution_density_errors() {
    assert!(matches!(
        distribution_density(&[(1.0, p("\\x. x"))]),
        Err(EvalError::NonDensityLeaf { .. })
    ));
    assert!(matches!(
        distribution_density(&[(0.5, p("|0>")), (0.5, p("|00>"))]),
        Err(EvalError::MixedDimensions { left: 1, right: 2 })
    ));
    let d = distribution_density(&[(1.0, p(RHO))]).unwrap();
    let s34 = Complex64::new(3f64.sqrt() / 4.0, 0.0);
    let rho = DensityMatrix::new(
        1,
        crate::matrix::ComplexMatrix::from_rows(vec![
            vec![Complex64::new(0.75, 0.0), s34],
            vec![s34, Complex64::new(0.25, 0.0)],
        ])
        .unwrap(),
    )
    .unwrap();
    assert!(d.approx_eq(&rho, 1e-12));
}

#[test]
fn sampling_is_seeded_and_consistent_with_the_tree() {
    let t = experiment();
    let a = sample_run(&t, 42, 100).unwrap();
    let b = sample_run(&t, 42, 100).unwrap();
    assert!(alpha_eq(&a, &b));
    // A measurement-free program has a single leaf.
    let u = p("U[X] (U[H] |0>)");
    let leaf = sample_run(&u, 9, 100).unwrap();
    let dist = final_distribution(&build_trace(&u, 100).unwrap()).unwrap();
    assert_eq!(dist.len(), 1);
    assert!(alpha_eq(&leaf, &dist[0].1));
    // Frequencies roughly match the exact distribution.
    let zero = p("|0>");
    let hits = (0..2000)
        .filter(|seed| alpha_eq(&sample_run(&t, *seed, 100).unwrap(), &zero))
        .count();
    let freq = hits as f64 / 2000.0;
    assert!((freq - 0.625).abs() < 0.05, "frequency {freq}");
}

#[test]
fn trace_serialization() {
    let tree = build_trace(&p("meas[1] |+>"), 8).unwrap();
    let json = trace_to_json(&tree);
    assert_eq!(json["term"], "meas[1] |+>");
    assert_eq!(json["type"], "(1, 1)");
    assert_eq!(json["value"], false);
    assert_eq!(json["children"].as_array().unwrap().len(), 2);
    let child = &json["children"][0];
    assert!((child["prob"].as_f64().unwrap() - 0.5).abs() < 1e-12);
    assert_eq!(child["node"]["value"], true);

    let dot = trace_to_dot(&tree);
    assert!(dot.starts_with("digraph trace {"));
    assert!(dot.contains("meas[1] |+>"));
    assert!(dot.contains("[label=\"1/2\"]"));

    // Stuck and fuel leaves carry a status marker.
    let stuck = build_trace(&p("letcase y = |0> in { y ; y }"), 8).unwrap();
    assert_eq!(trace_to_json(&stuck)["status"], "stuck");
    let fuel = build_trace(&p("(\\x. x x) (\\x. x x)"), 2).unwrap();
    fn deepest(j: &Json) -> &Json {
        let children = j["children"].as_array().unwrap();
        if children.is_empty() { j } else { deepest(&children[0]["node"]) }
    }
    assert_eq!(deepest(&trace_to_json(&fuel))["status"], "fuel");
}

#[test]
fn unitary_congruence_under_gates() {
    // Gates reduce their operand first; Z (X rho) collapses inside out.
    let t = p(&format!("U[Z] (U[X] {RHO})"));
    let tree = build_trace(&t, 8).unwrap();
    assert_eq!(tree.leaf_count(), 1);
    let dist = final_distribution(&tree).unwrap();
    let d = match &dist[0].1.kind {
        TermKind::Rho(d) => d.clone(),
        _ => unreachable!(),
    };
    let rho = match p(RHO).kind {
        TermKind::Rho(d) => d,
        _ => unreachable!(),
    };
    let expected = rho
        .evolve(&UnitaryOp::pauli_x())
        .unwrap()
        .evolve(&UnitaryOp::pauli_z())
        .unwrap();
    assert!(d.approx_eq(&expected, 1e-12));
}
