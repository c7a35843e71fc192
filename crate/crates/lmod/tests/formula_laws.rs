//! Semantic laws tying the formula layer together: the printed form parses
//! back, fragment classifications nest, and the positive-primitive
//! normalization of an existential-positive formula is satisfaction-
//! equivalent on every small structure.

use lmod::formulas::{classify, ep_to_pp_disjunction, parse_formula, Formula, Signature};
use lmod::gen::{formula_corpus, rng_from_seed, FormulaPool};
use lmod::structures::{Element, Structure};
use proptest::prelude::*;
use std::collections::{BTreeMap, BTreeSet};

fn corpus(sig: &Signature, pool: FormulaPool, seed: u64, count: usize) -> Vec<Formula> {
    let mut rng = rng_from_seed(seed);
    let free = ["v0".to_string(), "v1".to_string()];
    formula_corpus(sig, &free, 2, count, pool, &mut rng)
}

proptest! {
    #[test]
    fn printed_formulas_parse_back(seed in 0u64..2000) {
        for sig in [Signature::graph(), Signature::special_group()] {
            for f in corpus(&sig, FormulaPool::Any, seed, 5) {
                let reparsed = parse_formula(&f.to_string(), &sig).expect("own output parses");
                prop_assert_eq!(&reparsed, &f, "printed `{}`", f);
            }
        }
    }

    #[test]
    fn fragment_classifications_nest(seed in 0u64..2000) {
        for sig in [Signature::graph(), Signature::special_group()] {
            for f in corpus(&sig, FormulaPool::Any, seed, 5) {
                let c = classify(&f);
                prop_assert!(!c.is_positive_primitive || c.is_existential_positive);
                prop_assert!(!c.is_existential_positive || c.is_positive);
                prop_assert!(!c.is_atomic || c.is_positive_primitive);
            }
        }
    }
}

/// Every graph on the given vertices, by edge bitmask.
fn all_graphs(sig: &Signature, vertices: usize) -> Vec<Structure> {
    let universe: Vec<Element> = (0..vertices).map(|i| Element::name(format!("e{i}"))).collect();
    let pairs: Vec<(Element, Element)> = universe
        .iter()
        .flat_map(|a| universe.iter().map(move |b| (a.clone(), b.clone())))
        .collect();
    (0..1u32 << pairs.len())
        .map(|mask| {
            let edges: BTreeSet<Vec<Element>> = pairs
                .iter()
                .enumerate()
                .filter(|(pos, _)| mask & (1 << pos) != 0)
                .map(|(_, (a, b))| vec![a.clone(), b.clone()])
                .collect();
            Structure::new(
                sig.clone(),
                universe.clone(),
                BTreeMap::new(),
                BTreeMap::new(),
                [("E".to_string(), edges)].into(),
            )
            .expect("well-formed graph")
        })
        .collect()
}

#[test]
fn pp_normalization_is_satisfaction_equivalent_on_all_small_graphs() {
    let sig = Signature::graph();
    let structures: Vec<Structure> = all_graphs(&sig, 0)
        .into_iter()
        .chain(all_graphs(&sig, 1))
        .chain(all_graphs(&sig, 2))
        .collect();
    let eps = corpus(&sig, FormulaPool::ExistentialPositive, 7, 250);
    let mut checked = 0usize;
    for f in &eps {
        let disjuncts = ep_to_pp_disjunction(f).expect("generated in the fragment");
        for d in &disjuncts {
            assert!(classify(d).is_positive_primitive, "non-pp disjunct `{d}` of `{f}`");
        }
        let free: Vec<String> = f.free_variables().into_iter().collect();
        for m in &structures {
            for a in m.all_assignments(&free) {
                let direct = m.eval(f, &a).expect("in-signature formula");
                let via_pp = disjuncts
                    .iter()
                    .any(|d| m.eval(d, &a).expect("in-signature formula"));
                assert_eq!(direct, via_pp, "`{f}` vs its pp disjunction on {a:?}");
                checked += 1;
            }
        }
    }
    assert!(checked > 10_000, "only {checked} instances checked");
}

#[test]
fn conjunctive_fragment_survives_reparsing() {
    let sig = Signature::special_group();
    for f in corpus(&sig, FormulaPool::ConjunctiveQuantified, 11, 200) {
        let reparsed = parse_formula(&f.to_string(), &sig).expect("own output parses");
        assert!(lmod::formulas::is_conjunctive_quantified(&reparsed), "`{f}` left the fragment");
    }
}
