//! Reduced products and ultraproducts: quotients of direct products by the
//! agreement equivalence of a filter, satisfaction transfer between the
//! quotient and the factors, and the identification of a reduced product
//! with the filtered colimit of its restricted products.

use super::{
    filtered_colimit, product, tuple_coordinate, ConstructionError, Diagram, Product,
};
use crate::formulas::{is_conjunctive_quantified, Formula};
use crate::orders::{set_name, Filter, MemberEnumeration, Poset};
use crate::structures::{tuples, Assignment, Element, Morphism, Structure};
use std::collections::{BTreeMap, BTreeSet};

/// Agreement equivalence: two product tuples are identified when the set of
/// coordinates on which they agree is a member of the filter.
pub fn theta_equivalent(f: &Filter, x: &Element, y: &Element) -> bool {
    let agree: BTreeSet<String> = f
        .index_set()
        .iter()
        .enumerate()
        .filter(|(pos, _)| tuple_coordinate(x, *pos) == tuple_coordinate(y, *pos))
        .map(|(_, i)| i.clone())
        .collect();
    f.contains(&agree)
}

/// A reduced product: the direct product, its quotient by agreement
/// equivalence, and the natural surjection between them. Quotient elements
/// are named by the least product tuple in their class.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ReducedProduct {
    pub product: Product,
    pub structure: Structure,
    pub quotient: Morphism,
    pub filter: Filter,
}

impl ReducedProduct {
    /// The canonical class of any product tuple.
    pub fn class_of(&self, x: &Element) -> Option<&Element> {
        self.quotient.apply(x)
    }
}

/// The quotient of the direct product by the filter's agreement equivalence.
/// Constants and functions are computed on representatives; a relation holds
/// on classes exactly when the set of coordinates where it holds on the
/// representatives is a filter member. Both readings are independent of the
/// chosen representatives.
///
/// The quotient construction needs every factor nonempty; with empty factors
/// use [`reduced_product_via_colimit`], which stays well-behaved.
pub fn reduced_product(
    family: &BTreeMap<String, Structure>,
    f: &Filter,
) -> Result<ReducedProduct, ConstructionError> {
    if family.is_empty() {
        return Err(ConstructionError::EmptyIndexSet);
    }
    let keys: BTreeSet<String> = family.keys().cloned().collect();
    if &keys != f.index_set() {
        return Err(ConstructionError::FilterIndexMismatch);
    }
    for (i, m) in family {
        if m.is_empty() {
            return Err(ConstructionError::EmptyFactor(i.clone()));
        }
    }
    let sig = family
        .values()
        .next()
        .expect("nonempty family")
        .signature()
        .clone();
    let prod = product(&sig, family)?;

    // The product universe is sorted, so scanning it and keeping the first
    // member of each class makes representatives lexicographically least.
    let mut reps: Vec<Element> = Vec::new();
    let mut rep_of: BTreeMap<Element, Element> = BTreeMap::new();
    for x in prod.structure.universe() {
        match reps.iter().find(|r| theta_equivalent(f, r, x)) {
            Some(r) => {
                let r = r.clone();
                rep_of.insert(x.clone(), r);
            }
            None => {
                reps.push(x.clone());
                rep_of.insert(x.clone(), x.clone());
            }
        }
    }

    let mut constants = BTreeMap::new();
    for c in sig.constants() {
        let v = prod.structure.constant(c).expect("validated structure");
        constants.insert(c.to_string(), rep_of[v].clone());
    }

    let mut functions = BTreeMap::new();
    for (fname, arity) in sig.functions() {
        let table_prod = prod.structure.function(fname).expect("validated structure");
        let mut table = BTreeMap::new();
        for args in tuples(&reps, arity) {
            table.insert(args.clone(), rep_of[&table_prod[&args]].clone());
        }
        functions.insert(fname.to_string(), table);
    }

    let order: Vec<&String> = f.index_set().iter().collect();
    let mut relations = BTreeMap::new();
    for (r, arity) in sig.relations() {
        let mut set = BTreeSet::new();
        for args in tuples(&reps, arity) {
            let sat: BTreeSet<String> = order
                .iter()
                .enumerate()
                .filter(|(pos, i)| {
                    let point: Vec<Element> = args
                        .iter()
                        .map(|arg| tuple_coordinate(arg, *pos).clone())
                        .collect();
                    family[**i]
                        .relation(r)
                        .expect("validated structure")
                        .contains(&point)
                })
                .map(|(_, i)| (*i).clone())
                .collect();
            if f.contains(&sat) {
                set.insert(args);
            }
        }
        relations.insert(r.to_string(), set);
    }

    let structure = Structure::new(sig, reps, constants, functions, relations)
        .expect("quotient data is well-formed");
    let quotient = Morphism::new(prod.structure.clone(), structure.clone(), rep_of)
        .expect("every product tuple has a class");
    Ok(ReducedProduct {
        product: prod,
        structure,
        quotient,
        filter: f.clone(),
    })
}

/// A reduced product over an ultrafilter.
pub fn ultraproduct(
    family: &BTreeMap<String, Structure>,
    u: &Filter,
) -> Result<ReducedProduct, ConstructionError> {
    if !u.is_ultrafilter() {
        return Err(ConstructionError::NotUltra);
    }
    reduced_product(family, u)
}

/// The diagonal into the reduced power: each element goes to the class of
/// its constant tuple. Always a pure embedding; an isomorphism when the
/// filter is an ultrafilter.
pub fn diagonal(m: &Structure, f: &Filter) -> Result<Morphism, ConstructionError> {
    if m.is_empty() {
        return Err(ConstructionError::EmptySource);
    }
    let family: BTreeMap<String, Structure> = f
        .index_set()
        .iter()
        .map(|i| (i.clone(), m.clone()))
        .collect();
    let rp = reduced_product(&family, f)?;
    let n = f.index_set().len();
    let map: BTreeMap<Element, Element> = m
        .universe()
        .iter()
        .map(|a| {
            let constant_tuple = Element::Tuple(vec![a.clone(); n]);
            let class = rp
                .class_of(&constant_tuple)
                .expect("constant tuples live in the power")
                .clone();
            (a.clone(), class)
        })
        .collect();
    Ok(Morphism::new(m.clone(), rp.structure, map).expect("diagonal is total"))
}

/// For an ultrafilter with base `{m}`, the canonical isomorphism from the
/// quotient onto the factor at `m`: evaluation at coordinate `m`.
pub fn principal_iso(rp: &ReducedProduct) -> Result<Morphism, ConstructionError> {
    let m = rp
        .filter
        .principal_index()
        .ok_or(ConstructionError::NotUltra)?
        .clone();
    let pos = rp
        .filter
        .index_set()
        .iter()
        .position(|i| i == &m)
        .expect("principal index is in the index set");
    let target = rp.product.projections[&m].target().clone();
    let map: BTreeMap<Element, Element> = rp
        .structure
        .universe()
        .iter()
        .map(|x| (x.clone(), tuple_coordinate(x, pos).clone()))
        .collect();
    Ok(Morphism::new(rp.structure.clone(), target, map)
        .expect("coordinate evaluation is total"))
}

/// Both sides of the satisfaction-transfer equivalence: whether the quotient
/// models the formula under the assignment, and the set of coordinates whose
/// factor models it. Assignment values may be any product tuples; they are
/// normalized to canonical classes for the quotient side and read
/// coordinatewise for the factor side.
pub fn los_sides(
    family: &BTreeMap<String, Structure>,
    rp: &ReducedProduct,
    formula: &Formula,
    a: &Assignment,
) -> Result<(bool, BTreeSet<String>), ConstructionError> {
    let mut canonical = Assignment::new();
    for (var, v) in a {
        match rp.class_of(v) {
            Some(c) => {
                canonical.insert(var.clone(), c.clone());
            }
            None => return Err(ConstructionError::NotAQuotientElement(v.clone())),
        }
    }
    let holds_in_quotient = rp.structure.eval(formula, &canonical)?;
    let mut sat = BTreeSet::new();
    for (pos, (i, m)) in family.iter().enumerate() {
        let ai: Assignment = a
            .iter()
            .map(|(var, v)| (var.clone(), tuple_coordinate(v, pos).clone()))
            .collect();
        if m.eval(formula, &ai)? {
            sat.insert(i.clone());
        }
    }
    Ok((holds_in_quotient, sat))
}

/// Whether `M/F ⊨ φ[ā/F]` agrees with `{i : Mᵢ ⊨ φ[ā(i)]} ∈ F`, with no
/// restriction on the formula or the filter. The equivalence can genuinely
/// fail outside the ultrafilter/conjunctive cases; this reports honestly.
pub fn los_equivalence_holds(
    family: &BTreeMap<String, Structure>,
    f: &Filter,
    formula: &Formula,
    a: &Assignment,
) -> Result<bool, ConstructionError> {
    let rp = reduced_product(family, f)?;
    let (lhs, sat) = los_sides(family, &rp, formula, a)?;
    Ok(lhs == f.contains(&sat))
}

/// Satisfaction transfer for ultraproducts: any formula, ultrafilters only.
pub fn verify_los(
    family: &BTreeMap<String, Structure>,
    u: &Filter,
    formula: &Formula,
    a: &Assignment,
) -> Result<bool, ConstructionError> {
    if !u.is_ultrafilter() {
        return Err(ConstructionError::NotUltra);
    }
    los_equivalence_holds(family, u, formula, a)
}

/// Satisfaction transfer for reduced products: any proper filter, formulas
/// built from atoms by conjunction and both quantifiers only.
pub fn verify_los_pp(
    family: &BTreeMap<String, Structure>,
    f: &Filter,
    formula: &Formula,
    a: &Assignment,
) -> Result<bool, ConstructionError> {
    if !is_conjunctive_quantified(formula) {
        return Err(ConstructionError::NotConjunctiveQuantified);
    }
    los_equivalence_holds(family, f, formula, a)
}

/// The directed diagram of restricted products: one object `M|J = ∏_{j∈J} Mⱼ`
/// per filter member `J`, ordered by reverse inclusion (the base on top), with
/// coordinate-forgetting projections running upward.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RestrictedProductDiagram {
    pub diagram: Diagram,
    /// Poset element name → the filter member it denotes.
    pub member_sets: BTreeMap<String, BTreeSet<String>>,
    pub filter: Filter,
}

pub fn restricted_product_diagram(
    family: &BTreeMap<String, Structure>,
    f: &Filter,
    how: MemberEnumeration,
) -> Result<RestrictedProductDiagram, ConstructionError> {
    let keys: BTreeSet<String> = family.keys().cloned().collect();
    if &keys != f.index_set() {
        return Err(ConstructionError::FilterIndexMismatch);
    }
    let sig = family
        .values()
        .next()
        .expect("filters have nonempty carriers")
        .signature()
        .clone();
    let members = f.enumerate_members(how);

    let mut member_sets = BTreeMap::new();
    let mut objects = BTreeMap::new();
    for j in &members {
        let name = set_name(j);
        let sub: BTreeMap<String, Structure> =
            j.iter().map(|i| (i.clone(), family[i].clone())).collect();
        objects.insert(name.clone(), product(&sig, &sub)?.structure);
        member_sets.insert(name, j.clone());
    }

    let mut leq = BTreeSet::new();
    let mut maps = BTreeMap::new();
    for j in &members {
        for k in &members {
            if !k.is_subset(j) {
                continue;
            }
            let from = set_name(j);
            let to = set_name(k);
            leq.insert((from.clone(), to.clone()));
            if j == k {
                continue;
            }
            let positions: Vec<usize> = k
                .iter()
                .map(|i| j.iter().position(|x| x == i).expect("k is a subset of j"))
                .collect();
            let src = &objects[&from];
            let dst = &objects[&to];
            let map: BTreeMap<Element, Element> = src
                .universe()
                .iter()
                .map(|s| {
                    let coords: Vec<Element> = positions
                        .iter()
                        .map(|p| tuple_coordinate(s, *p).clone())
                        .collect();
                    (s.clone(), Element::Tuple(coords))
                })
                .collect();
            maps.insert(
                (from, to),
                Morphism::new(src.clone(), dst.clone(), map)
                    .expect("forgetting coordinates lands in the smaller product"),
            );
        }
    }
    let poset = Poset::new(member_sets.keys().cloned(), leq)
        .expect("reverse inclusion is a partial order");
    let diagram =
        Diagram::new(poset, objects, maps).expect("forgetful projections are functorial");
    Ok(RestrictedProductDiagram {
        diagram,
        member_sets,
        filter: f.clone(),
    })
}

/// Overwrite the coordinates of `x` inside `j_set` with the values of `s`:
/// `(s ∗ x)(i) = s(i)` for `i ∈ J` and `x(i)` otherwise. `s` is shaped over
/// the sorted coordinates of `j_set`, `x` over those of `index_set`.
pub fn splice(
    index_set: &BTreeSet<String>,
    j_set: &BTreeSet<String>,
    s: &Element,
    x: &Element,
) -> Result<Element, ConstructionError> {
    if !j_set.is_subset(index_set) {
        return Err(ConstructionError::SpliceShape(
            "J is not a subset of the index set".to_string(),
        ));
    }
    let (Element::Tuple(sv), Element::Tuple(xv)) = (s, x) else {
        return Err(ConstructionError::SpliceShape(
            "both arguments must be tuples".to_string(),
        ));
    };
    if sv.len() != j_set.len() || xv.len() != index_set.len() {
        return Err(ConstructionError::SpliceShape(format!(
            "expected tuple lengths {} and {}, got {} and {}",
            j_set.len(),
            index_set.len(),
            sv.len(),
            xv.len()
        )));
    }
    let mut out = Vec::with_capacity(xv.len());
    for (pos, i) in index_set.iter().enumerate() {
        match j_set.iter().position(|jj| jj == i) {
            Some(jpos) => out.push(sv[jpos].clone()),
            None => out.push(xv[pos].clone()),
        }
    }
    Ok(Element::Tuple(out))
}

/// The map from a restricted product into the reduced product: splice the
/// restricted tuple into an anchor tuple and take its class. The result does
/// not depend on the anchor, because any two splices agree on `J ⊇ base`.
pub fn nu_map(
    family: &BTreeMap<String, Structure>,
    f: &Filter,
    j_set: &BTreeSet<String>,
    anchor: &Element,
) -> Result<Morphism, ConstructionError> {
    let rp = reduced_product(family, f)?;
    nu_into(&rp, family, j_set, anchor)
}

fn nu_into(
    rp: &ReducedProduct,
    family: &BTreeMap<String, Structure>,
    j_set: &BTreeSet<String>,
    anchor: &Element,
) -> Result<Morphism, ConstructionError> {
    if !rp.filter.contains(j_set) {
        return Err(ConstructionError::NotAFilterMember(set_name(j_set)));
    }
    if !rp.product.structure.contains(anchor) {
        return Err(ConstructionError::AnchorOutsideProduct);
    }
    let sig = rp.structure.signature().clone();
    let sub: BTreeMap<String, Structure> = j_set
        .iter()
        .map(|i| (i.clone(), family[i].clone()))
        .collect();
    let mj = product(&sig, &sub)?.structure;
    let mut map = BTreeMap::new();
    for s in mj.universe() {
        let spliced = splice(rp.filter.index_set(), j_set, s, anchor)?;
        let class = rp
            .class_of(&spliced)
            .expect("splices are product tuples")
            .clone();
        map.insert(s.clone(), class);
    }
    Ok(Morphism::new(mj, rp.structure.clone(), map).expect("ν is total"))
}

/// The two canonical morphisms identifying the filtered colimit of the
/// restricted-product diagram with the reduced product. `forward` sends the
/// class of `⟨J, s⟩` to the class of any splice of `s`; `backward` is the
/// colimit leg at the full index set. Their composites are identities.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IsoPair {
    pub forward: Morphism,
    pub backward: Morphism,
}

pub fn colimit_is_reduced_product(
    family: &BTreeMap<String, Structure>,
    f: &Filter,
) -> Result<IsoPair, ConstructionError> {
    let rp = reduced_product(family, f)?;
    let rd = restricted_product_diagram(family, f, MemberEnumeration::Full)?;
    let colim = filtered_colimit(&rd.diagram)?;
    let anchor = rp.product.structure.universe()[0].clone();

    let mut fwd = BTreeMap::new();
    for class in colim.apex.universe() {
        let Element::Pair(obj_name, s) = class else {
            unreachable!("colimit classes are tagged pairs")
        };
        let j = &rd.member_sets[obj_name];
        let spliced = splice(f.index_set(), j, s, &anchor)?;
        let image = rp
            .class_of(&spliced)
            .expect("splices are product tuples")
            .clone();
        fwd.insert(class.clone(), image);
    }
    let forward = Morphism::new(colim.apex.clone(), rp.structure.clone(), fwd)
        .expect("every colimit class has an image");

    let full_name = set_name(f.index_set());
    let alpha_full = &colim.legs[&full_name];
    let bwd: BTreeMap<Element, Element> = rp
        .structure
        .universe()
        .iter()
        .map(|x| {
            let class = alpha_full
                .apply(x)
                .expect("representatives live in the full product")
                .clone();
            (x.clone(), class)
        })
        .collect();
    let backward = Morphism::new(rp.structure, colim.apex, bwd)
        .expect("the leg at the full index set is total");
    Ok(IsoPair { forward, backward })
}

/// The reduced product computed as the filtered colimit of restricted
/// products. Unlike the quotient construction this tolerates empty factors:
/// the result is empty exactly when every filter member contains an index
/// with an empty factor.
pub fn reduced_product_via_colimit(
    family: &BTreeMap<String, Structure>,
    f: &Filter,
) -> Result<Structure, ConstructionError> {
    let rd = restricted_product_diagram(family, f, MemberEnumeration::Full)?;
    Ok(filtered_colimit(&rd.diagram)?.apex)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::formulas::{parse_formula, Signature};
    use crate::structures::find_isomorphism;

    fn graph_structure(elems: &[&str], edges: &[(&str, &str)]) -> Structure {
        let universe: Vec<Element> = elems.iter().map(|e| Element::name(*e)).collect();
        let relation: BTreeSet<Vec<Element>> = edges
            .iter()
            .map(|(a, b)| vec![Element::name(*a), Element::name(*b)])
            .collect();
        Structure::new(
            Signature::graph(),
            universe,
            BTreeMap::new(),
            BTreeMap::new(),
            BTreeMap::from([("E".to_string(), relation)]),
        )
        .unwrap()
    }

    fn fam(entries: Vec<(&str, Structure)>) -> BTreeMap<String, Structure> {
        entries.into_iter().map(|(k, v)| (k.to_string(), v)).collect()
    }

    fn filter(indices: &[&str], base: &[&str]) -> Filter {
        Filter::new(
            indices.iter().map(|s| s.to_string()).collect(),
            base.iter().map(|s| s.to_string()).collect(),
        )
        .unwrap()
    }

    fn two_factor_family() -> BTreeMap<String, Structure> {
        fam(vec![
            ("1", graph_structure(&["a", "b"], &[("a", "b")])),
            ("2", graph_structure(&["x"], &[("x", "x")])),
        ])
    }

    #[test]
    fn trivial_filter_gives_the_full_product() {
        let family = two_factor_family();
        let f = filter(&["1", "2"], &["1", "2"]);
        let rp = reduced_product(&family, &f).unwrap();
        assert_eq!(rp.structure.size(), rp.product.structure.size());
        assert!(rp.quotient.is_injective());
        assert!(rp.quotient.is_surjective());
        assert!(rp.quotient.is_homomorphism());
    }

    #[test]
    fn principal_base_collapses_to_one_coordinate() {
        let family = two_factor_family();
        let f = filter(&["1", "2"], &["1"]);
        let rp = reduced_product(&family, &f).unwrap();
        assert_eq!(rp.structure.size(), family["1"].size());
        let iso = principal_iso(&rp).unwrap();
        assert!(iso.is_embedding() && iso.is_surjective());
        // Independent oracle: a graph isomorphism exists.
        assert!(find_isomorphism(&rp.structure, &family["1"]).is_some());
    }

    #[test]
    fn class_verdicts_do_not_depend_on_representatives() {
        let family = two_factor_family();
        let f = filter(&["1", "2"], &["1"]);
        let rp = reduced_product(&family, &f).unwrap();
        let prod = &rp.product.structure;
        let e = |x: &Element, y: &Element, m: &Structure| {
            m.relation("E").unwrap().contains(&vec![x.clone(), y.clone()])
        };
        // For θ-equivalent pairs (x, x') and (y, y'), the filtered
        // satisfaction sets give the same verdict.
        for x in prod.universe() {
            for x2 in prod.universe() {
                if !theta_equivalent(&f, x, x2) {
                    continue;
                }
                for y in prod.universe() {
                    for y2 in prod.universe() {
                        if !theta_equivalent(&f, y, y2) {
                            continue;
                        }
                        let verdict = |a: &Element, b: &Element| {
                            let sat: BTreeSet<String> = f
                                .index_set()
                                .iter()
                                .enumerate()
                                .filter(|(pos, i)| {
                                    e(
                                        tuple_coordinate(a, *pos),
                                        tuple_coordinate(b, *pos),
                                        &family[*i],
                                    )
                                })
                                .map(|(_, i)| i.clone())
                                .collect();
                            f.contains(&sat)
                        };
                        assert_eq!(verdict(x, y), verdict(x2, y2));
                    }
                }
            }
        }
    }

    #[test]
    fn rejects_empty_factors_and_mismatched_filters() {
        let family = fam(vec![
            ("1", graph_structure(&["a"], &[])),
            ("2", graph_structure(&[], &[])),
        ]);
        let f = filter(&["1", "2"], &["1"]);
        assert_eq!(
            reduced_product(&family, &f),
            Err(ConstructionError::EmptyFactor("2".to_string()))
        );
        let other = filter(&["1", "3"], &["1"]);
        assert_eq!(
            reduced_product(&two_factor_family(), &other),
            Err(ConstructionError::FilterIndexMismatch)
        );
    }

    #[test]
    fn ultraproduct_requires_a_singleton_base() {
        let family = two_factor_family();
        assert_eq!(
            ultraproduct(&family, &filter(&["1", "2"], &["1", "2"])),
            Err(ConstructionError::NotUltra)
        );
        assert!(ultraproduct(&family, &filter(&["1", "2"], &["2"])).is_ok());
    }

    #[test]
    fn diagonal_composed_with_principal_iso_is_the_identity() {
        let m = graph_structure(&["a", "b"], &[("a", "b")]);
        let u = filter(&["1", "2", "3"], &["2"]);
        let d = diagonal(&m, &u).unwrap();
        assert!(d.is_homomorphism());
        let family: BTreeMap<String, Structure> = u
            .index_set()
            .iter()
            .map(|i| (i.clone(), m.clone()))
            .collect();
        let rp = reduced_product(&family, &u).unwrap();
        let iso = principal_iso(&rp).unwrap();
        let round = iso.compose(&d).unwrap();
        assert_eq!(round, Morphism::identity(&m));
    }

    #[test]
    fn diagonal_into_a_proper_power_is_pure() {
        let m = graph_structure(&["a", "b"], &[("a", "b")]);
        let f = filter(&["1", "2"], &["1", "2"]);
        let d = diagonal(&m, &f).unwrap();
        assert_eq!(d.is_pure(2), Ok(true));
    }

    #[test]
    fn transfer_holds_for_sentences_under_an_ultrafilter() {
        let family = two_factor_family();
        let u = filter(&["1", "2"], &["2"]);
        let sig = Signature::graph();
        for text in [
            "exists v0. E(v0,v0)",
            "forall v0. E(v0,v0)",
            "~ exists v0. E(v0,v0)",
            "forall v0. exists v1. E(v0,v1)",
        ] {
            let phi = parse_formula(text, &sig).unwrap();
            assert_eq!(
                verify_los(&family, &u, &phi, &Assignment::new()),
                Ok(true),
                "{text}"
            );
        }
    }

    #[test]
    fn transfer_holds_for_conjunctive_formulas_under_a_proper_filter() {
        let family = two_factor_family();
        let f = filter(&["1", "2"], &["1", "2"]);
        let sig = Signature::graph();
        let phi = parse_formula("forall v0. exists v1. E(v0,v1)", &sig).unwrap();
        assert_eq!(verify_los_pp(&family, &f, &phi, &Assignment::new()), Ok(true));
        let disj = parse_formula("E(v0,v0) | ~E(v0,v0)", &sig).unwrap();
        assert_eq!(
            verify_los_pp(&family, &f, &disj, &Assignment::new()),
            Err(ConstructionError::NotConjunctiveQuantified)
        );
    }

    #[test]
    fn transfer_fails_for_a_disjunction_under_a_non_ultra_filter() {
        // "Some loop or at most one point" holds in each factor for
        // different reasons, but the trivial-filter quotient is the product:
        // two points, no loops, so both disjuncts fail there.
        let family = fam(vec![
            ("1", graph_structure(&["p", "q"], &[("p", "p")])),
            ("2", graph_structure(&["x"], &[])),
        ]);
        let f = filter(&["1", "2"], &["1", "2"]);
        let sig = Signature::graph();
        let phi = parse_formula(
            "(exists v0. E(v0,v0)) | (forall v0. forall v1. v0 = v1)",
            &sig,
        )
        .unwrap();
        assert_eq!(
            los_equivalence_holds(&family, &f, &phi, &Assignment::new()),
            Ok(false)
        );
    }

    #[test]
    fn restricted_diagram_over_a_principal_base() {
        let family = two_factor_family();
        let f = filter(&["1", "2"], &["1"]);
        let rd = restricted_product_diagram(&family, &f, MemberEnumeration::Full).unwrap();
        // Members {1} and {1,2}; the base sits on top of the reverse order.
        assert_eq!(rd.diagram.poset().elements().len(), 2);
        assert_eq!(rd.diagram.poset().maximum(), Some("{1}".to_string()));
        let full = set_name(f.index_set());
        assert_eq!(
            rd.diagram.object(&full).size(),
            family["1"].size() * family["2"].size()
        );
        assert!(rd.diagram.map(&full, "{1}").is_some());
    }

    #[test]
    fn splice_overwrites_only_the_member_coordinates() {
        let idx: BTreeSet<String> = ["1".to_string(), "2".to_string()].into();
        let j: BTreeSet<String> = ["1".to_string()].into();
        let s = Element::Tuple(vec![Element::name("s1")]);
        let x = Element::Tuple(vec![Element::name("x1"), Element::name("x2")]);
        let out = splice(&idx, &j, &s, &x).unwrap();
        assert_eq!(
            out,
            Element::Tuple(vec![Element::name("s1"), Element::name("x2")])
        );
        let everything = splice(&idx, &idx, &x, &x).unwrap();
        assert_eq!(everything, x);
        assert!(matches!(
            splice(&idx, &j, &x, &x),
            Err(ConstructionError::SpliceShape(_))
        ));
    }

    #[test]
    fn nu_is_anchor_independent_and_collapses_triangles() {
        let family = two_factor_family();
        let f = filter(&["1", "2"], &["1"]);
        let rp = reduced_product(&family, &f).unwrap();
        let j: BTreeSet<String> = ["1".to_string()].into();
        let anchors = rp.product.structure.universe();
        let first = nu_map(&family, &f, &j, &anchors[0]).unwrap();
        for t in anchors {
            assert_eq!(nu_map(&family, &f, &j, t).unwrap(), first);
        }
        assert!(first.is_homomorphism());
        // Triangle: ν_J ∘ π_{I,J} = ν_I, where ν_I is the quotient map.
        let rd = restricted_product_diagram(&family, &f, MemberEnumeration::Full).unwrap();
        let full = set_name(f.index_set());
        let pi = rd.diagram.map(&full, "{1}").unwrap();
        let nu_full = nu_map(&family, &f, f.index_set(), &anchors[0]).unwrap();
        assert_eq!(first.compose(pi).unwrap(), nu_full);
        assert_eq!(nu_full, rp.quotient);
    }

    #[test]
    fn colimit_and_quotient_are_mutually_inverse() {
        for base in [vec!["1"], vec!["2"], vec!["1", "2"]] {
            let family = two_factor_family();
            let f = filter(&["1", "2"], &base);
            let pair = colimit_is_reduced_product(&family, &f).unwrap();
            assert!(pair.forward.is_homomorphism());
            assert!(pair.backward.is_homomorphism());
            let round_quotient = pair.forward.compose(&pair.backward).unwrap();
            assert_eq!(round_quotient, Morphism::identity(pair.forward.target()));
            let round_colimit = pair.backward.compose(&pair.forward).unwrap();
            assert_eq!(round_colimit, Morphism::identity(pair.forward.source()));
        }
    }

    #[test]
    fn colimit_form_tolerates_an_empty_factor_off_the_base() {
        let family = fam(vec![
            ("1", graph_structure(&["a", "b"], &[("a", "b")])),
            ("2", graph_structure(&[], &[])),
        ]);
        let f = filter(&["1", "2"], &["1"]);
        let via = reduced_product_via_colimit(&family, &f).unwrap();
        assert_eq!(via.size(), 2);
        let sig = Signature::graph();
        let nonempty = parse_formula("exists v0. v0 = v0", &sig).unwrap();
        assert_eq!(via.eval(&nonempty, &Assignment::new()), Ok(true));
        // The classical quotient refuses the same family.
        assert_eq!(
            reduced_product(&family, &f),
            Err(ConstructionError::EmptyFactor("2".to_string()))
        );
    }

    #[test]
    fn colimit_form_is_empty_when_the_base_hits_an_empty_factor() {
        let family = fam(vec![
            ("1", graph_structure(&["a"], &[])),
            ("2", graph_structure(&[], &[])),
        ]);
        let f = filter(&["1", "2"], &["2"]);
        let via = reduced_product_via_colimit(&family, &f).unwrap();
        assert!(via.is_empty());
    }
}
