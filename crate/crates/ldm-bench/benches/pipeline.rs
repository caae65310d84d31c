//! End-to-end benchmarks over the shipped example programs: parsing,
//! inference, both evaluators, and the denotation engine.

use criterion::{black_box, criterion_group, criterion_main, Criterion};
use ldm_core::{
    build_trace, distribution_density, final_distribution, infer, interp, normalize_mixed, parse,
    print, Calculus, Context, Valuation,
};

const COIN: &str = "(\\x. letcase y = meas[1] x in { y ; y }) \
                    ((\\x. letcase y = meas[1] |+> in { x ; U[X] x }) \
                    rho[1]{ 3/4, sqrt(3)/4 ; sqrt(3)/4, 1/4 })";

const COIN_STAR: &str = "(\\x. letcase* y = meas[1] x in { y ; y }) \
                         ((\\x. letcase* y = meas[1] |+> in { x ; U[X] x }) \
                         rho[1]{ 3/4, sqrt(3)/4 ; sqrt(3)/4, 1/4 })";

const TELEPORT: &str = "(\\x. letcase* y = meas[2] (U[H*I(2)] (U[CNOT*I(1)] (x >< bell00))) in \
                        { y ; U[I(2)*Z] y ; U[I(2)*X] y ; U[I(2)*Z] (U[I(2)*X] y) }) \
                        rho[1]{ 3/4, sqrt(3)/4 ; sqrt(3)/4, 1/4 }";

fn bench_pipeline(c: &mut Criterion) {
    let coin = parse(COIN, Calculus::Prob).unwrap();
    let coin_star = parse(COIN_STAR, Calculus::Mixed).unwrap();
    let teleport = parse(TELEPORT, Calculus::Mixed).unwrap();
    let ctx = Context::new();
    let env = Valuation::new();

    c.bench_function("parse coin experiment", |b| {
        b.iter(|| parse(black_box(COIN), Calculus::Prob).unwrap())
    });

    c.bench_function("print/parse round trip teleportation", |b| {
        b.iter(|| parse(&print(black_box(&teleport)), Calculus::Mixed).unwrap())
    });

    c.bench_function("infer teleportation", |b| {
        b.iter(|| infer(&ctx, black_box(&teleport), Calculus::Mixed).unwrap())
    });

    c.bench_function("trace + distribution coin experiment", |b| {
        b.iter(|| {
            let tree = build_trace(black_box(&coin), 1_000).unwrap();
            let dist = final_distribution(&tree).unwrap();
            distribution_density(&dist).unwrap()
        })
    });

    c.bench_function("normalize coin experiment", |b| {
        b.iter(|| normalize_mixed(black_box(&coin_star), 1_000).unwrap())
    });

    c.bench_function("normalize teleportation", |b| {
        b.iter(|| normalize_mixed(black_box(&teleport), 1_000).unwrap())
    });

    c.bench_function("denote coin experiment", |b| {
        b.iter(|| interp(black_box(&coin), &env).unwrap())
    });
}

criterion_group!(benches, bench_pipeline);
criterion_main!(benches);
