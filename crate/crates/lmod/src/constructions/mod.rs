//! Categorical constructions over finite structures: products, equalizers,
//! limits and colimits of poset-indexed diagrams, and checkable universal
//! properties.

mod reduced;

pub use reduced::{
    colimit_is_reduced_product, diagonal, los_equivalence_holds, los_sides, nu_map, principal_iso,
    reduced_product, reduced_product_via_colimit, restricted_product_diagram, splice,
    theta_equivalent, ultraproduct, verify_los, verify_los_pp, IsoPair, ReducedProduct,
    RestrictedProductDiagram,
};

use crate::formulas::Signature;
use crate::orders::Poset;
use crate::structures::{tuples, Element, Morphism, Structure};
use std::collections::{BTreeMap, BTreeSet};
use thiserror::Error;

/// Construction-level failures.
#[derive(Debug, Error, PartialEq, Eq)]
pub enum ConstructionError {
    #[error("factor `{0}` does not match the ambient signature")]
    SignatureMismatch(String),
    #[error("the two morphisms are not a parallel pair")]
    NotParallel,
    #[error("the index poset is not upward directed")]
    NotDirected,
    #[error("the index set is empty")]
    EmptyIndexSet,
    #[error("factor `{0}` is empty; the colimit-based reduced product handles empty factors")]
    EmptyFactor(String),
    #[error("the filter does not live on the family's index set")]
    FilterIndexMismatch,
    #[error("the filter is not an ultrafilter")]
    NotUltra,
    #[error("formula is outside the conjunctive-quantified fragment")]
    NotConjunctiveQuantified,
    #[error("assignment value `{0}` is not a product tuple of the family")]
    NotAQuotientElement(Element),
    #[error("`{0}` is not a member of the filter")]
    NotAFilterMember(String),
    #[error("the anchor is not an element of the full product")]
    AnchorOutsideProduct,
    #[error("splice shape mismatch: {0}")]
    SpliceShape(String),
    #[error("the structure is empty")]
    EmptySource,
    #[error(transparent)]
    Eval(#[from] crate::structures::EvalError),
}

/// A product together with its projections.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Product {
    pub structure: Structure,
    pub projections: BTreeMap<String, Morphism>,
}

/// Position of each index in the coordinate order of product tuples.
fn coordinate_order(family: &BTreeMap<String, Structure>) -> BTreeMap<String, usize> {
    family
        .keys()
        .enumerate()
        .map(|(pos, i)| (i.clone(), pos))
        .collect()
}

pub(crate) fn tuple_coordinate(e: &Element, pos: usize) -> &Element {
    match e {
        Element::Tuple(parts) => &parts[pos],
        other => panic!("expected a tuple element, found {other}"),
    }
}

/// The direct product of a finite family, coordinates in sorted index order.
/// The empty family yields the final structure: one element, every relation
/// full. The product is empty exactly when some factor is empty.
pub fn product(
    sig: &Signature,
    family: &BTreeMap<String, Structure>,
) -> Result<Product, ConstructionError> {
    for (i, m) in family {
        if m.signature() != sig {
            return Err(ConstructionError::SignatureMismatch(i.clone()));
        }
    }
    let order = coordinate_order(family);
    let factors: Vec<(&String, &Structure)> = family.iter().collect();

    let mut universe: Vec<Element> = vec![Element::Tuple(Vec::new())];
    for (_, m) in &factors {
        let mut next = Vec::with_capacity(universe.len() * m.size());
        for partial in &universe {
            let Element::Tuple(parts) = partial else {
                unreachable!()
            };
            for e in m.universe() {
                let mut ext = parts.clone();
                ext.push(e.clone());
                next.push(Element::Tuple(ext));
            }
        }
        universe = next;
    }
    universe.sort();

    let mut constants = BTreeMap::new();
    for c in sig.constants() {
        let coords: Vec<Element> = factors
            .iter()
            .map(|(_, m)| m.constant(c).expect("validated structure").clone())
            .collect();
        constants.insert(c.to_string(), Element::Tuple(coords));
    }

    let mut functions = BTreeMap::new();
    for (f, arity) in sig.functions() {
        let mut table = BTreeMap::new();
        for args in tuples(&universe, arity) {
            let coords: Vec<Element> = factors
                .iter()
                .enumerate()
                .map(|(pos, (_, m))| {
                    let point: Vec<Element> = args
                        .iter()
                        .map(|arg| tuple_coordinate(arg, pos).clone())
                        .collect();
                    m.function(f).expect("validated structure")[&point].clone()
                })
                .collect();
            table.insert(args, Element::Tuple(coords));
        }
        functions.insert(f.to_string(), table);
    }

    let mut relations = BTreeMap::new();
    for (r, arity) in sig.relations() {
        let mut set = BTreeSet::new();
        for args in tuples(&universe, arity) {
            let everywhere = factors.iter().enumerate().all(|(pos, (_, m))| {
                let point: Vec<Element> = args
                    .iter()
                    .map(|arg| tuple_coordinate(arg, pos).clone())
                    .collect();
                m.relation(r).expect("validated structure").contains(&point)
            });
            if everywhere {
                set.insert(args);
            }
        }
        relations.insert(r.to_string(), set);
    }

    let structure = Structure::new(sig.clone(), universe, constants, functions, relations)
        .expect("coordinatewise data is well-formed");

    let mut projections = BTreeMap::new();
    for (i, m) in family {
        let pos = order[i];
        let map: BTreeMap<Element, Element> = structure
            .universe()
            .iter()
            .map(|e| (e.clone(), tuple_coordinate(e, pos).clone()))
            .collect();
        let proj = Morphism::new(structure.clone(), m.clone(), map)
            .expect("projection is total into the factor");
        projections.insert(i.clone(), proj);
    }
    Ok(Product {
        structure,
        projections,
    })
}

/// The final structure over `sig`: the empty product.
pub fn final_object(sig: &Signature) -> Structure {
    product(sig, &BTreeMap::new())
        .expect("empty family always multiplies")
        .structure
}

/// An equalizer: the agreement substructure and its inclusion.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Equalizer {
    pub structure: Structure,
    pub inclusion: Morphism,
}

/// The equalizer of a parallel pair: the induced substructure on the
/// agreement set. Agreement sets are closed under constants and functions
/// because both maps preserve them, so the substructure always exists.
pub fn equalizer(f: &Morphism, g: &Morphism) -> Result<Equalizer, ConstructionError> {
    if f.source() != g.source() || f.target() != g.target() {
        return Err(ConstructionError::NotParallel);
    }
    let agree: BTreeSet<Element> = f
        .source()
        .universe()
        .iter()
        .filter(|e| f.apply(e) == g.apply(e))
        .cloned()
        .collect();
    let structure = f
        .source()
        .substructure(&agree)
        .expect("agreement sets are closed under the operations");
    let inclusion =
        Morphism::inclusion(&structure, f.source()).expect("substructure includes into its parent");
    Ok(Equalizer {
        structure,
        inclusion,
    })
}

/// Problems assembling a diagram.
#[derive(Debug, Error, PartialEq, Eq)]
pub enum DiagramError {
    #[error("no object given for index `{0}`")]
    MissingObject(String),
    #[error("object given for `{0}`, which is not in the poset")]
    UnknownIndex(String),
    #[error("object at `{0}` does not match the diagram signature")]
    ObjectSignatureMismatch(String),
    #[error("map `{from}` -> `{to}` does not relate comparable indices")]
    NotComparable { from: String, to: String },
    #[error("map `{from}` -> `{to}` does not run between the stated objects")]
    EndpointMismatch { from: String, to: String },
    #[error("map `{from}` -> `{to}` is not a homomorphism")]
    NotAHomomorphism { from: String, to: String },
    #[error("no map is derivable for the comparable pair `{from}` <= `{to}`")]
    MissingMap { from: String, to: String },
    #[error("maps for `{from}` -> `{to}` disagree along different paths")]
    FunctorialityConflict { from: String, to: String },
}

/// A functor from a finite poset into structures: one object per index and
/// one homomorphism `objects[i] -> objects[j]` per comparable pair `i <= j`.
/// Identities and composites are synthesized from the given generating maps
/// and functoriality is checked exhaustively.
///
/// Diagrams whose maps should run *downward* (toward smaller indices) are
/// represented as diagrams over the opposite poset.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Diagram {
    poset: Poset,
    objects: BTreeMap<String, Structure>,
    maps: BTreeMap<(String, String), Morphism>,
}

impl Diagram {
    pub fn new(
        poset: Poset,
        objects: BTreeMap<String, Structure>,
        given: BTreeMap<(String, String), Morphism>,
    ) -> Result<Self, DiagramError> {
        for i in objects.keys() {
            if !poset.contains(i) {
                return Err(DiagramError::UnknownIndex(i.clone()));
            }
        }
        for i in poset.elements() {
            if !objects.contains_key(i) {
                return Err(DiagramError::MissingObject(i.clone()));
            }
        }
        let mut maps: BTreeMap<(String, String), Morphism> = BTreeMap::new();
        for i in poset.elements() {
            maps.insert((i.clone(), i.clone()), Morphism::identity(&objects[i]));
        }
        for ((from, to), m) in given {
            if !poset.contains(&from) || !poset.contains(&to) || !poset.le(&from, &to) {
                return Err(DiagramError::NotComparable { from, to });
            }
            if m.source() != &objects[&from] || m.target() != &objects[&to] {
                return Err(DiagramError::EndpointMismatch { from, to });
            }
            if !m.is_homomorphism() {
                return Err(DiagramError::NotAHomomorphism { from, to });
            }
            if let Some(prev) = maps.get(&(from.clone(), to.clone())) {
                if prev != &m {
                    return Err(DiagramError::FunctorialityConflict { from, to });
                }
            }
            maps.insert((from, to), m);
        }
        // Close under composition; reject path-dependent composites.
        loop {
            let mut grew = false;
            let keys: Vec<(String, String)> = maps.keys().cloned().collect();
            for (i, k) in &keys {
                for (k2, j) in &keys {
                    if k != k2 || i == j {
                        continue;
                    }
                    let composite = maps[&(k.clone(), j.clone())]
                        .compose(&maps[&(i.clone(), k.clone())])
                        .expect("endpoints line up by construction");
                    match maps.get(&(i.clone(), j.clone())) {
                        None => {
                            maps.insert((i.clone(), j.clone()), composite);
                            grew = true;
                        }
                        Some(prev) => {
                            if prev != &composite {
                                return Err(DiagramError::FunctorialityConflict {
                                    from: i.clone(),
                                    to: j.clone(),
                                });
                            }
                        }
                    }
                }
            }
            if !grew {
                break;
            }
        }
        for i in poset.elements() {
            for j in poset.elements() {
                if poset.le(i, j) && !maps.contains_key(&(i.clone(), j.clone())) {
                    return Err(DiagramError::MissingMap {
                        from: i.clone(),
                        to: j.clone(),
                    });
                }
            }
        }
        Ok(Diagram {
            poset,
            objects,
            maps,
        })
    }

    pub fn poset(&self) -> &Poset {
        &self.poset
    }

    pub fn objects(&self) -> &BTreeMap<String, Structure> {
        &self.objects
    }

    pub fn object(&self, i: &str) -> &Structure {
        &self.objects[i]
    }

    /// The map along `i <= j`.
    pub fn map(&self, i: &str, j: &str) -> Option<&Morphism> {
        self.maps.get(&(i.to_string(), j.to_string()))
    }

    pub fn signature(&self) -> &Signature {
        self.objects
            .values()
            .next()
            .map(|m| m.signature())
            .expect("diagrams have at least one object")
    }

    pub fn has_empty_object(&self) -> bool {
        self.objects.values().any(|m| m.is_empty())
    }
}

/// A cone over a diagram: legs run from the apex into the objects.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Cone {
    pub apex: Structure,
    pub legs: BTreeMap<String, Morphism>,
}

/// A cocone under a diagram: legs run from the objects into the apex.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Cocone {
    pub apex: Structure,
    pub legs: BTreeMap<String, Morphism>,
}

/// Why a claimed (co)cone is not one.
#[derive(Debug, Error, PartialEq, Eq)]
pub enum ConeError {
    #[error("missing leg at `{0}`")]
    MissingLeg(String),
    #[error("leg at `{0}` does not run between the right structures")]
    LegEndpoints(String),
    #[error("leg at `{0}` is not a homomorphism")]
    LegNotHom(String),
    #[error("legs do not commute with the diagram map `{from}` -> `{to}`")]
    DoesNotCommute { from: String, to: String },
}

impl Cone {
    /// Legs exist for every index, are homomorphisms out of the apex, and
    /// commute with every diagram map.
    pub fn check(&self, d: &Diagram) -> Result<(), ConeError> {
        for i in d.poset().elements() {
            let leg = self.legs.get(i).ok_or_else(|| ConeError::MissingLeg(i.clone()))?;
            if leg.source() != &self.apex || leg.target() != d.object(i) {
                return Err(ConeError::LegEndpoints(i.clone()));
            }
            if !leg.is_homomorphism() {
                return Err(ConeError::LegNotHom(i.clone()));
            }
        }
        for ((i, j), m) in &d.maps {
            let via = m.compose(&self.legs[i]).expect("leg targets the map source");
            if via != self.legs[j] {
                return Err(ConeError::DoesNotCommute {
                    from: i.clone(),
                    to: j.clone(),
                });
            }
        }
        Ok(())
    }
}

impl Cocone {
    /// Legs exist for every index, are homomorphisms into the apex, and
    /// commute with every diagram map.
    pub fn check(&self, d: &Diagram) -> Result<(), ConeError> {
        for i in d.poset().elements() {
            let leg = self.legs.get(i).ok_or_else(|| ConeError::MissingLeg(i.clone()))?;
            if leg.source() != d.object(i) || leg.target() != &self.apex {
                return Err(ConeError::LegEndpoints(i.clone()));
            }
            if !leg.is_homomorphism() {
                return Err(ConeError::LegNotHom(i.clone()));
            }
        }
        for ((i, j), m) in &d.maps {
            let via = self.legs[j].compose(m).expect("map targets the leg source");
            if via != self.legs[i] {
                return Err(ConeError::DoesNotCommute {
                    from: i.clone(),
                    to: j.clone(),
                });
            }
        }
        Ok(())
    }
}

/// The limit of a diagram: the substructure of the product consisting of the
/// threads, i.e. tuples the diagram maps carry coordinate to coordinate.
/// Legs are the restricted projections. Satisfaction of atomic formulas in
/// the limit is coordinatewise, inherited from the product.
pub fn limit(d: &Diagram) -> Result<Cone, ConstructionError> {
    let sig = d.signature().clone();
    let prod = product(&sig, d.objects())?;
    let order = coordinate_order(d.objects());
    let threads: BTreeSet<Element> = prod
        .structure
        .universe()
        .iter()
        .filter(|e| {
            d.maps.iter().all(|((i, j), m)| {
                let xi = tuple_coordinate(e, order[i]);
                let xj = tuple_coordinate(e, order[j]);
                m.apply(xi) == Some(xj)
            })
        })
        .cloned()
        .collect();
    let apex = prod
        .structure
        .substructure(&threads)
        .expect("threads are closed: diagram maps are homomorphisms");
    let mut legs = BTreeMap::new();
    for (i, m) in d.objects() {
        let pos = order[i];
        let map: BTreeMap<Element, Element> = apex
            .universe()
            .iter()
            .map(|e| (e.clone(), tuple_coordinate(e, pos).clone()))
            .collect();
        legs.insert(
            i.clone(),
            Morphism::new(apex.clone(), m.clone(), map).expect("restricted projection is total"),
        );
    }
    Ok(Cone { apex, legs })
}

/// Union-find with path compression over an indexed universe.
struct UnionFind {
    parent: Vec<usize>,
}

impl UnionFind {
    fn new(n: usize) -> Self {
        UnionFind {
            parent: (0..n).collect(),
        }
    }

    fn find(&mut self, x: usize) -> usize {
        if self.parent[x] != x {
            let root = self.find(self.parent[x]);
            self.parent[x] = root;
        }
        self.parent[x]
    }

    fn union(&mut self, a: usize, b: usize) {
        let ra = self.find(a);
        let rb = self.find(b);
        if ra != rb {
            self.parent[ra] = rb;
        }
    }
}

/// The colimit of a diagram over an upward-directed poset.
///
/// Carriers are classes of tagged elements `<i, x>` under eventual equality:
/// `<i, x> ~ <j, y>` iff some `k >= i, j` maps both to the same element. In a
/// directed poset this is the equivalence closure of single-step
/// identifications `<i, x> ~ <j, f_ij(x)>`. Each class is named by its least
/// tagged representative. Relations hold when some common upper bound
/// witnesses them; functions and constants are computed through any upper
/// bound, and the choice does not matter.
pub fn filtered_colimit(d: &Diagram) -> Result<Cocone, ConstructionError> {
    if !d.poset().is_upward_directed() {
        return Err(ConstructionError::NotDirected);
    }
    let sig = d.signature().clone();

    let mut slots: Vec<(String, Element)> = Vec::new();
    let mut slot_of: BTreeMap<(String, Element), usize> = BTreeMap::new();
    for (i, m) in d.objects() {
        for e in m.universe() {
            slot_of.insert((i.clone(), e.clone()), slots.len());
            slots.push((i.clone(), e.clone()));
        }
    }
    let mut uf = UnionFind::new(slots.len());
    for ((i, j), m) in &d.maps {
        if i == j {
            continue;
        }
        for (x, fx) in m.map() {
            uf.union(
                slot_of[&(i.clone(), x.clone())],
                slot_of[&(j.clone(), fx.clone())],
            );
        }
    }

    // Class name: least tagged pair in the class.
    let mut class_name: BTreeMap<usize, Element> = BTreeMap::new();
    for (slot, (i, x)) in slots.iter().enumerate() {
        let root = uf.find(slot);
        let tagged = Element::pair(i.clone(), x.clone());
        class_name
            .entry(root)
            .and_modify(|cur| {
                if tagged < *cur {
                    *cur = tagged.clone();
                }
            })
            .or_insert(tagged);
    }
    let class_of = |slot_of: &BTreeMap<(String, Element), usize>,
                    uf: &mut UnionFind,
                    i: &str,
                    x: &Element|
     -> Element {
        let slot = slot_of[&(i.to_string(), x.clone())];
        class_name[&uf.find(slot)].clone()
    };

    let universe: Vec<Element> = {
        let mut v: Vec<Element> = class_name.values().cloned().collect();
        v.sort();
        v.dedup();
        v
    };

    // The representative of a class is its name: a tagged pair <i, x>.
    let rep = |e: &Element| -> (String, Element) {
        match e {
            Element::Pair(i, x) => (i.clone(), (**x).clone()),
            other => panic!("expected a tagged class name, found {other}"),
        }
    };

    // First index (in poset element order) above all of the given ones.
    let upper_bound_of = |indices: &[String]| -> Option<String> {
        d.poset()
            .elements()
            .iter()
            .find(|k| indices.iter().all(|i| d.poset().le(i, k)))
            .cloned()
    };

    let mut constants = BTreeMap::new();
    for c in sig.constants() {
        // All tags of the constant are identified; use the least index.
        let i = d
            .objects()
            .keys()
            .next()
            .expect("diagrams have at least one object");
        let v = d.object(i).constant(c).expect("validated structure");
        constants.insert(c.to_string(), class_of(&slot_of, &mut uf, i, v));
    }

    let mut functions = BTreeMap::new();
    for (f, arity) in sig.functions() {
        let mut table = BTreeMap::new();
        for args in tuples(&universe, arity) {
            let reps: Vec<(String, Element)> = args.iter().map(&rep).collect();
            let indices: Vec<String> = reps.iter().map(|(i, _)| i.clone()).collect();
            let k = upper_bound_of(&indices).expect("directed poset");
            let lifted: Vec<Element> = reps
                .iter()
                .map(|(i, x)| d.map(i, &k).unwrap().apply(x).unwrap().clone())
                .collect();
            let value = d.object(&k).function(f).expect("validated structure")[&lifted].clone();
            table.insert(args, class_of(&slot_of, &mut uf, &k, &value));
        }
        functions.insert(f.to_string(), table);
    }

    let mut relations = BTreeMap::new();
    for (r, arity) in sig.relations() {
        let mut set = BTreeSet::new();
        for args in tuples(&universe, arity) {
            let reps: Vec<(String, Element)> = args.iter().map(&rep).collect();
            let indices: Vec<String> = reps.iter().map(|(i, _)| i.clone()).collect();
            let witnessed = d.poset().elements().iter().any(|k| {
                if !indices.iter().all(|i| d.poset().le(i, k)) {
                    return false;
                }
                let lifted: Vec<Element> = reps
                    .iter()
                    .map(|(i, x)| d.map(i, k).unwrap().apply(x).unwrap().clone())
                    .collect();
                d.object(k)
                    .relation(r)
                    .expect("validated structure")
                    .contains(&lifted)
            });
            if witnessed {
                set.insert(args);
            }
        }
        relations.insert(r.to_string(), set);
    }

    let apex = Structure::new(sig, universe, constants, functions, relations)
        .expect("colimit data is well-formed");

    let mut legs = BTreeMap::new();
    for (i, m) in d.objects() {
        let map: BTreeMap<Element, Element> = m
            .universe()
            .iter()
            .map(|x| (x.clone(), class_of(&slot_of, &mut uf, i, x)))
            .collect();
        legs.insert(
            i.clone(),
            Morphism::new(m.clone(), apex.clone(), map).expect("legs land in the colimit"),
        );
    }
    Ok(Cocone { apex, legs })
}

/// Why a universal-property check failed.
#[derive(Debug, Error, PartialEq, Eq)]
pub enum UniversalError {
    #[error("claimed (co)cone is invalid: {0}")]
    Invalid(#[from] ConeError),
    #[error("no factorization at element `{0}`")]
    NoFactorization(Element),
    #[error("factorization is not unique at element `{0}`")]
    NotUnique(Element),
    #[error("the legs do not jointly cover apex element `{0}`")]
    NotJointlyCovering(Element),
    #[error("the induced factorization is not a homomorphism")]
    FactorizationNotHom,
}

/// Check the universal property of a limit cone against a competitor cone:
/// there is exactly one morphism from the competitor's apex that commutes
/// with all legs. Returns that factorization.
pub fn verify_limit_universal(
    d: &Diagram,
    cone: &Cone,
    competitor: &Cone,
) -> Result<Morphism, UniversalError> {
    cone.check(d)?;
    competitor.check(d)?;
    let mut map: BTreeMap<Element, Element> = BTreeMap::new();
    for a in competitor.apex.universe() {
        let mut candidates = cone.apex.universe().iter().filter(|x| {
            d.poset()
                .elements()
                .iter()
                .all(|i| cone.legs[i].apply(x) == competitor.legs[i].apply(a))
        });
        let first = candidates
            .next()
            .ok_or_else(|| UniversalError::NoFactorization(a.clone()))?;
        if candidates.next().is_some() {
            return Err(UniversalError::NotUnique(a.clone()));
        }
        map.insert(a.clone(), first.clone());
    }
    let u = Morphism::new(competitor.apex.clone(), cone.apex.clone(), map)
        .expect("factorization is total");
    if !u.is_homomorphism() {
        return Err(UniversalError::FactorizationNotHom);
    }
    Ok(u)
}

/// Check the universal property of a colimit cocone against a competitor:
/// the unique morphism out of the apex commuting with all legs. The colimit
/// legs jointly cover the apex, which both forces the factorization and
/// makes it unique.
pub fn verify_colimit_universal(
    d: &Diagram,
    cocone: &Cocone,
    competitor: &Cocone,
) -> Result<Morphism, UniversalError> {
    cocone.check(d)?;
    competitor.check(d)?;
    let mut map: BTreeMap<Element, Element> = BTreeMap::new();
    for e in cocone.apex.universe() {
        let mut image: Option<Element> = None;
        let mut covered = false;
        for i in d.poset().elements() {
            for x in d.object(i).universe() {
                if cocone.legs[i].apply(x) == Some(e) {
                    covered = true;
                    let via = competitor.legs[i].apply(x).expect("legs are total").clone();
                    match &image {
                        None => image = Some(via),
                        Some(prev) if prev != &via => {
                            return Err(UniversalError::NoFactorization(e.clone()))
                        }
                        _ => {}
                    }
                }
            }
        }
        if !covered {
            return Err(UniversalError::NotJointlyCovering(e.clone()));
        }
        map.insert(e.clone(), image.expect("covered elements have images"));
    }
    let u = Morphism::new(cocone.apex.clone(), competitor.apex.clone(), map)
        .expect("factorization is total");
    if !u.is_homomorphism() {
        return Err(UniversalError::FactorizationNotHom);
    }
    Ok(u)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::formulas::parse_formula;
    use crate::structures::Assignment;

    fn graph_structure(name_edges: (&[&str], &[(&str, &str)])) -> Structure {
        let (elems, edges) = name_edges;
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

    #[test]
    fn binary_product_of_graphs() {
        let sig = Signature::graph();
        let k2 = graph_structure((&["a", "b"], &[("a", "b"), ("b", "a")]));
        let loop1 = graph_structure((&["p"], &[("p", "p")]));
        let p = product(&sig, &fam(vec![("1", k2.clone()), ("2", loop1)])).unwrap();
        assert_eq!(p.structure.size(), 2);
        // Edges are componentwise: (a,p)->(b,p) and back.
        let e = p.structure.relation("E").unwrap();
        assert_eq!(e.len(), 2);
        for (i, proj) in &p.projections {
            assert!(proj.is_homomorphism(), "projection {i}");
        }
    }

    #[test]
    fn product_with_empty_factor_is_empty() {
        let sig = Signature::graph();
        let k2 = graph_structure((&["a", "b"], &[("a", "b"), ("b", "a")]));
        let empty = graph_structure((&[], &[]));
        let p = product(&sig, &fam(vec![("1", k2), ("2", empty)])).unwrap();
        assert!(p.structure.is_empty());
    }

    #[test]
    fn empty_family_gives_final_structure() {
        let sig = Signature::graph();
        let one = final_object(&sig);
        assert_eq!(one.size(), 1);
        let u = Element::unit();
        assert!(one.relation("E").unwrap().contains(&vec![u.clone(), u]));
    }

    #[test]
    fn final_structure_receives_a_unique_map() {
        let sig = Signature::graph();
        let one = final_object(&sig);
        let k2 = graph_structure((&["a", "b"], &[("a", "b"), ("b", "a")]));
        let maps = crate::structures::homomorphisms_up_to(&k2, &one, 10);
        assert_eq!(maps.len(), 1);
        assert!(maps[0].is_homomorphism());
    }

    #[test]
    fn product_atomic_satisfaction_is_coordinatewise() {
        let sig = Signature::graph();
        let a = graph_structure((&["a", "b"], &[("a", "b")]));
        let b = graph_structure((&["x", "y"], &[("x", "y"), ("y", "x")]));
        let p = product(&sig, &fam(vec![("1", a.clone()), ("2", b.clone())])).unwrap();
        let atom = parse_formula("E(u,v)", &sig).unwrap();
        for s in p.structure.universe() {
            for t in p.structure.universe() {
                let joint = p
                    .structure
                    .eval(
                        &atom,
                        &Assignment::from([
                            ("u".to_string(), s.clone()),
                            ("v".to_string(), t.clone()),
                        ]),
                    )
                    .unwrap();
                let each = [(&a, 0usize), (&b, 1usize)].iter().all(|(m, pos)| {
                    m.eval(
                        &atom,
                        &Assignment::from([
                            ("u".to_string(), tuple_coordinate(s, *pos).clone()),
                            ("v".to_string(), tuple_coordinate(t, *pos).clone()),
                        ]),
                    )
                    .unwrap()
                });
                assert_eq!(joint, each);
            }
        }
    }

    #[test]
    fn equalizer_of_two_collapses() {
        let two_loops = graph_structure((&["a", "b"], &[("a", "a"), ("b", "b")]));
        let id = Morphism::identity(&two_loops);
        let swap = Morphism::new(
            two_loops.clone(),
            two_loops.clone(),
            BTreeMap::from([
                (Element::name("a"), Element::name("b")),
                (Element::name("b"), Element::name("a")),
            ]),
        )
        .unwrap();
        let eq = equalizer(&id, &swap).unwrap();
        assert!(eq.structure.is_empty());
        let eq_same = equalizer(&id, &id).unwrap();
        assert_eq!(eq_same.structure, two_loops);
        assert!(eq_same.inclusion.is_embedding());
    }

    #[test]
    fn equalizer_rejects_non_parallel_pairs() {
        let a = graph_structure((&["a"], &[]));
        let b = graph_structure((&["b", "c"], &[]));
        let f = Morphism::new(
            a.clone(),
            b.clone(),
            BTreeMap::from([(Element::name("a"), Element::name("b"))]),
        )
        .unwrap();
        let id = Morphism::identity(&a);
        assert_eq!(equalizer(&f, &id), Err(ConstructionError::NotParallel));
    }

    fn chain_diagram_up() -> Diagram {
        // 1 <= 2; map collapses the two points of the top object.
        let p = Poset::from_generators(
            vec!["1".to_string(), "2".to_string()],
            [("1".to_string(), "2".to_string())],
        )
        .unwrap();
        let bottom = graph_structure((&["x", "y"], &[("x", "y")]));
        let top = graph_structure((&["u"], &[("u", "u")]));
        let m = Morphism::new(
            bottom.clone(),
            top.clone(),
            BTreeMap::from([
                (Element::name("x"), Element::name("u")),
                (Element::name("y"), Element::name("u")),
            ]),
        )
        .unwrap();
        Diagram::new(
            p,
            BTreeMap::from([("1".to_string(), bottom), ("2".to_string(), top)]),
            BTreeMap::from([(("1".to_string(), "2".to_string()), m)]),
        )
        .unwrap()
    }

    #[test]
    fn diagram_synthesizes_composites_and_checks_conflicts() {
        let p = Poset::chain(vec!["1".to_string(), "2".to_string(), "3".to_string()]);
        let obj = |n: usize| {
            let names: Vec<&str> = ["a", "b"][..n].to_vec();
            graph_structure((names.as_slice(), &[]))
        };
        // A two-step chain with only one generating map cannot reach the top.
        let d = Diagram::new(
            p,
            BTreeMap::from([
                ("1".to_string(), obj(1)),
                ("2".to_string(), obj(2)),
                ("3".to_string(), obj(2)),
            ]),
            BTreeMap::from([(
                ("1".to_string(), "2".to_string()),
                Morphism::new(
                    obj(1),
                    obj(2),
                    BTreeMap::from([(Element::name("a"), Element::name("a"))]),
                )
                .unwrap(),
            )]),
        );
        assert_eq!(
            d.unwrap_err(),
            DiagramError::MissingMap {
                from: "1".to_string(),
                to: "3".to_string(),
            }
        );
    }

    #[test]
    fn colimit_of_a_collapse_identifies_points() {
        let d = chain_diagram_up();
        let colim = filtered_colimit(&d).unwrap();
        assert!(colim.check(&d).is_ok());
        // x and y are identified with u; one class remains, carrying a loop
        // witnessed at the top.
        assert_eq!(colim.apex.size(), 1);
        let class = &colim.apex.universe()[0];
        assert_eq!(class, &Element::pair("1", Element::name("x")));
        assert_eq!(colim.apex.relation("E").unwrap().len(), 1);
    }

    #[test]
    fn colimit_atomic_satisfaction_has_an_index_witness() {
        let d = chain_diagram_up();
        let colim = filtered_colimit(&d).unwrap();
        let sig = Signature::graph();
        let atom = parse_formula("E(u,v)", &sig).unwrap();
        for s in colim.apex.universe() {
            for t in colim.apex.universe() {
                let holds = colim
                    .apex
                    .eval(
                        &atom,
                        &Assignment::from([
                            ("u".to_string(), s.clone()),
                            ("v".to_string(), t.clone()),
                        ]),
                    )
                    .unwrap();
                let witnessed = d.poset().elements().iter().any(|k| {
                    d.object(k).universe().iter().any(|x| {
                        d.object(k).universe().iter().any(|y| {
                            colim.legs[k].apply(x) == Some(s)
                                && colim.legs[k].apply(y) == Some(t)
                                && d.object(k)
                                    .relation("E")
                                    .unwrap()
                                    .contains(&vec![x.clone(), y.clone()])
                        })
                    })
                });
                assert_eq!(holds, witnessed);
            }
        }
    }

    #[test]
    fn colimit_requires_directedness() {
        let p = Poset::from_generators(
            vec!["1".to_string(), "2".to_string()],
            std::iter::empty::<(String, String)>(),
        )
        .unwrap();
        let a = graph_structure((&["a"], &[]));
        let d = Diagram::new(
            p,
            BTreeMap::from([("1".to_string(), a.clone()), ("2".to_string(), a.clone())]),
            BTreeMap::new(),
        )
        .unwrap();
        assert_eq!(filtered_colimit(&d), Err(ConstructionError::NotDirected));
    }

    #[test]
    fn limit_of_a_cospan_is_a_pullback() {
        // left, right >= bottom: threads are pairs agreeing downstairs.
        let p = Poset::from_generators(
            vec!["bottom".to_string(), "left".to_string(), "right".to_string()],
            [
                ("left".to_string(), "bottom".to_string()),
                ("right".to_string(), "bottom".to_string()),
            ],
        )
        .unwrap();
        // Maps run along <=: here left <= bottom in the op-order, i.e. this
        // diagram's maps run from left/right down into bottom.
        let bottom = graph_structure((&["m"], &[("m", "m")]));
        let left = graph_structure((&["a", "b"], &[("a", "a"), ("b", "b")]));
        let right = graph_structure((&["c"], &[("c", "c")]));
        let to_bottom = |src: &Structure| {
            let map = src
                .universe()
                .iter()
                .map(|e| (e.clone(), Element::name("m")))
                .collect();
            Morphism::new(src.clone(), bottom.clone(), map).unwrap()
        };
        let d = Diagram::new(
            p,
            BTreeMap::from([
                ("bottom".to_string(), bottom.clone()),
                ("left".to_string(), left.clone()),
                ("right".to_string(), right.clone()),
            ]),
            BTreeMap::from([
                (("left".to_string(), "bottom".to_string()), to_bottom(&left)),
                (("right".to_string(), "bottom".to_string()), to_bottom(&right)),
            ]),
        )
        .unwrap();
        let cone = limit(&d).unwrap();
        assert!(cone.check(&d).is_ok());
        // Threads: (m, a|b, c) — two of them.
        assert_eq!(cone.apex.size(), 2);
    }

    #[test]
    fn limit_universal_property_with_a_substructure_competitor() {
        let d = chain_diagram_up();
        let cone = limit(&d).unwrap();
        assert!(cone.check(&d).is_ok());
        let whole: BTreeSet<Element> = cone.apex.universe().iter().cloned().collect();
        let sub = cone.apex.substructure(&whole).unwrap();
        let inclusion = Morphism::inclusion(&sub, &cone.apex).unwrap();
        let competitor = Cone {
            apex: sub,
            legs: cone
                .legs
                .iter()
                .map(|(i, leg)| (i.clone(), leg.compose(&inclusion).unwrap()))
                .collect(),
        };
        let u = verify_limit_universal(&d, &cone, &competitor).unwrap();
        assert_eq!(u.map(), inclusion.map());
    }

    #[test]
    fn colimit_universal_property_against_the_final_cocone() {
        let d = chain_diagram_up();
        let colim = filtered_colimit(&d).unwrap();
        let one = final_object(d.signature());
        let legs: BTreeMap<String, Morphism> = d
            .objects()
            .iter()
            .map(|(i, m)| {
                let map = m
                    .universe()
                    .iter()
                    .map(|e| (e.clone(), Element::unit()))
                    .collect();
                (
                    i.clone(),
                    Morphism::new(m.clone(), one.clone(), map).unwrap(),
                )
            })
            .collect();
        let competitor = Cocone {
            apex: one.clone(),
            legs,
        };
        let u = verify_colimit_universal(&d, &colim, &competitor).unwrap();
        assert_eq!(u.target(), &one);
    }
}
