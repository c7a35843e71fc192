//! Benchmarks for the hot paths: evaluation, products and their quotients,
//! colimits, and the full retraction pipeline, all on deliberately small
//! inputs so relative regressions stand out.

use std::collections::{BTreeMap, BTreeSet};

use criterion::{criterion_group, criterion_main, Criterion};
use lmod::constructions::{
    colimit_is_reduced_product, los_sides, product, reduced_product, ultraproduct,
};
use lmod::formulas::{parse_formula, Signature};
use lmod::gen::{
    formula_corpus, random_cofiltered_diagram, random_directed_poset, rng_from_seed,
    DiagramProfile, FormulaPool,
};
use lmod::orders::Filter;
use lmod::profinite::retraction_theorem_check;
use lmod::{Assignment, Element, Structure};

/// The directed n-cycle 0 -> 1 -> ... -> n-1 -> 0.
fn cycle(sig: &Signature, n: usize) -> Structure {
    let universe: Vec<Element> = (0..n).map(|i| Element::name(format!("c{i}"))).collect();
    let edges: BTreeSet<Vec<Element>> = (0..n)
        .map(|i| {
            vec![
                Element::name(format!("c{i}")),
                Element::name(format!("c{}", (i + 1) % n)),
            ]
        })
        .collect();
    Structure::new(
        sig.clone(),
        universe,
        BTreeMap::new(),
        BTreeMap::new(),
        [("E".to_string(), edges)].into(),
    )
    .expect("well-formed cycle")
}

fn cycle_family(sig: &Signature, sizes: &[usize]) -> BTreeMap<String, Structure> {
    sizes
        .iter()
        .enumerate()
        .map(|(i, n)| ((i + 1).to_string(), cycle(sig, *n)))
        .collect()
}

fn filter_on(family: &BTreeMap<String, Structure>, base: &[&str]) -> Filter {
    let idx: BTreeSet<String> = family.keys().cloned().collect();
    let base: BTreeSet<String> = base.iter().map(|s| s.to_string()).collect();
    Filter::new(idx, base).expect("base within the index set")
}

fn bench_eval(c: &mut Criterion) {
    let sig = Signature::graph();
    let m = cycle(&sig, 5);
    let f = parse_formula("forall v0. exists v1. (E(v0,v1) & ~E(v1,v0))", &sig).unwrap();
    let empty = Assignment::new();
    c.bench_function("eval/forall-exists-on-c5", |b| {
        b.iter(|| m.eval(&f, &empty).unwrap())
    });
    c.bench_function("parse/forall-exists", |b| {
        b.iter(|| parse_formula("forall v0. exists v1. (E(v0,v1) & ~E(v1,v0))", &sig).unwrap())
    });
}

fn bench_products(c: &mut Criterion) {
    let sig = Signature::graph();
    let family = cycle_family(&sig, &[2, 3, 2, 3]);
    c.bench_function("product/four-cycles", |b| {
        b.iter(|| product(&sig, &family).unwrap())
    });

    let big = cycle_family(&sig, &[3, 2, 3, 2, 3]);
    let principal = filter_on(&big, &["4"]);
    c.bench_function("ultraproduct/five-cycles-principal", |b| {
        b.iter(|| ultraproduct(&big, &principal).unwrap())
    });

    let three = cycle_family(&sig, &[2, 3, 2]);
    let proper = filter_on(&three, &["1", "2"]);
    c.bench_function("reduced-product/three-cycles-proper-filter", |b| {
        b.iter(|| reduced_product(&three, &proper).unwrap())
    });
}

fn bench_los(c: &mut Criterion) {
    let sig = Signature::graph();
    let family = cycle_family(&sig, &[2, 3, 2]);
    let f = filter_on(&family, &["2"]);
    let rp = reduced_product(&family, &f).unwrap();
    let free = ["v0".to_string(), "v1".to_string()];
    let mut rng = rng_from_seed(7);
    let corpus = formula_corpus(&sig, &free, 2, 20, FormulaPool::Any, &mut rng);
    let witness: Assignment = free
        .iter()
        .map(|v| (v.clone(), rp.product.structure.universe()[0].clone()))
        .collect();
    c.bench_function("los/20-formulas-both-sides", |b| {
        b.iter(|| {
            for f in &corpus {
                los_sides(&family, &rp, f, &witness).unwrap();
            }
        })
    });
}

fn bench_colimits(c: &mut Criterion) {
    let sig = Signature::graph();
    let family = cycle_family(&sig, &[2, 3, 2]);
    let f = filter_on(&family, &["1"]);
    c.bench_function("colim-iso/three-cycles", |b| {
        b.iter(|| colimit_is_reduced_product(&family, &f).unwrap())
    });
}

fn bench_retraction(c: &mut Criterion) {
    let sig = Signature::graph();
    let mut rng = rng_from_seed(41);
    let poset = random_directed_poset(4, &mut rng);
    let profile = DiagramProfile::new(3);
    let d = random_cofiltered_diagram(&sig, &poset, &profile, &mut rng);
    c.bench_function("retraction/random-seed-41", |b| {
        b.iter(|| retraction_theorem_check(&d).unwrap())
    });

    let sg = Signature::special_group();
    let mut rng = rng_from_seed(9);
    let poset = random_directed_poset(3, &mut rng);
    let profile = DiagramProfile::new(2);
    let d = random_cofiltered_diagram(&sg, &poset, &profile, &mut rng);
    c.bench_function("retraction/special-group-seed-9", |b| {
        b.iter(|| retraction_theorem_check(&d).unwrap())
    });
}

criterion_group!(
    benches,
    bench_eval,
    bench_products,
    bench_los,
    bench_colimits,
    bench_retraction
);
criterion_main!(benches);
