//! Build a tiny family of graphs, take an ultraproduct, and evaluate a
//! sentence in it. This is the snippet from the README.

use std::collections::{BTreeMap, BTreeSet};
use std::error::Error;

use lmod::constructions::ultraproduct;
use lmod::orders::Filter;
use lmod::{parse_formula, Element, Signature, Structure};

fn main() -> Result<(), Box<dyn Error>> {
    let sig = Signature::graph();
    let loop1 = Structure::new(
        sig.clone(),
        vec![Element::name("u")],
        BTreeMap::new(),
        BTreeMap::new(),
        [("E".to_string(), BTreeSet::from([vec![Element::name("u"), Element::name("u")]]))].into(),
    )?;

    let family: BTreeMap<String, Structure> =
        [("1".to_string(), loop1.clone()), ("2".to_string(), loop1)].into();
    let f = Filter::new(
        family.keys().cloned().collect(),
        BTreeSet::from(["2".to_string()]),
    )?;
    let up = ultraproduct(&family, &f)?;

    let axiom = parse_formula("exists x. E(x,x)", &sig)?;
    assert!(up.structure.eval(&axiom, &Default::default())?);
    println!("ultraproduct has {} element(s) and models {axiom}", up.structure.universe().len());
    Ok(())
}
