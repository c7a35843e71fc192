//! Cofiltered limits of finite structures and the retraction that exhibits
//! each such limit as a retract of an ultraproduct of its finite stages.
//!
//! The pipeline: a cofiltered diagram over a directed index poset has a limit
//! `P` of compatible threads inside the full product. The directed ultrafilter
//! on the index poset yields an ultraproduct `M/U` of the stages, and the
//! V-set construction produces maps `γᵢ : M/U → Mᵢ` that cohere into
//! `γ : M/U → P` with `γ ∘ ν_I ∘ ι = Id_P`, so `ν_I ∘ ι` is a section.

use crate::constructions::{
    limit, product, tuple_coordinate, ultraproduct, ConstructionError, Diagram, DiagramError,
    Product, ReducedProduct,
};
use crate::formulas::{classify, Formula};
use crate::orders::{directed_ultrafilter, is_directed_filter, Filter, OrderError, Poset};
use crate::structures::{find_retraction, Element, EvalError, Morphism, Structure};
use std::collections::{BTreeMap, BTreeSet};
use thiserror::Error;

/// Failures in the profinite pipeline.
#[derive(Debug, Error, PartialEq, Eq)]
pub enum ProfiniteError {
    #[error(transparent)]
    Construction(#[from] ConstructionError),
    #[error(transparent)]
    Order(#[from] OrderError),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error("unknown index `{0}`")]
    UnknownIndex(String),
    #[error("the given set is not a subset of the index set")]
    NotASubset,
    #[error("`{0}` is not a member of the filter")]
    NotAFilterMember(String),
    #[error("tuple has length {got}, expected {expected}")]
    TupleShape { got: usize, expected: usize },
    #[error("element `{element}` does not belong to the object at `{index}`")]
    CarrierMismatch { element: Element, index: String },
    #[error("the filter is not a directed ultrafilter on the index poset")]
    NotDirectedUltra,
    #[error("axiom `{0}` is not universally quantified geometric")]
    NotGeometric(String),
    #[error("the object at `{0}` does not satisfy the axioms")]
    ObjectNotAModel(String),
}

/// A diagram whose maps run downward: `f_ji : M_j → M_i` for `i ≤ j` in a
/// directed index poset. Stored as a diagram over the opposite poset, which
/// supplies identity/composite synthesis and functoriality checking.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CofilteredDiagram {
    index: Poset,
    inner: Diagram,
}

impl CofilteredDiagram {
    /// `maps` are keyed `(j, i)` with `i ≤ j`, each running `M_j → M_i`.
    /// Missing composites are synthesized; conflicts are rejected.
    pub fn new(
        index: Poset,
        objects: BTreeMap<String, Structure>,
        maps: BTreeMap<(String, String), Morphism>,
    ) -> Result<Self, DiagramError> {
        let inner = Diagram::new(index.opposite(), objects, maps)?;
        Ok(CofilteredDiagram { index, inner })
    }

    /// The index poset with its original (upward) orientation.
    pub fn index(&self) -> &Poset {
        &self.index
    }

    pub fn objects(&self) -> &BTreeMap<String, Structure> {
        self.inner.objects()
    }

    pub fn object(&self, i: &str) -> &Structure {
        self.inner.object(i)
    }

    /// `f_ji : M_j → M_i` for `i ≤ j`.
    pub fn map_down(&self, j: &str, i: &str) -> Option<&Morphism> {
        self.inner.map(j, i)
    }

    pub fn signature(&self) -> &crate::formulas::Signature {
        self.inner.signature()
    }

    pub fn has_empty_object(&self) -> bool {
        self.inner.has_empty_object()
    }

    /// The underlying diagram over the opposite poset.
    pub fn as_diagram(&self) -> &Diagram {
        &self.inner
    }
}

/// A cofiltered limit presented concretely: the thread substructure of the
/// full product, the restricted projections, and the inclusion.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ProfiniteStructure {
    pub diagram: CofilteredDiagram,
    /// The limit `P`: tuples `x` with `f_ji(x_j) = x_i` for all `i ≤ j`.
    pub threads: Structure,
    /// `λᵢ : P → Mᵢ`, the restricted projections.
    pub legs: BTreeMap<String, Morphism>,
    /// `ι : P → ∏ Mᵢ`.
    pub inclusion: Morphism,
    /// The ambient product with its projections `πᵢ`, so that `λᵢ = πᵢ ∘ ι`.
    pub product: Product,
}

/// The limit of a cofiltered diagram over a directed index poset.
pub fn profinite_limit(d: &CofilteredDiagram) -> Result<ProfiniteStructure, ProfiniteError> {
    if !d.index.is_upward_directed() {
        return Err(ConstructionError::NotDirected.into());
    }
    let cone = limit(d.as_diagram())?;
    let prod = product(&d.signature().clone(), d.objects())?;
    let map: BTreeMap<Element, Element> = cone
        .apex
        .universe()
        .iter()
        .map(|x| (x.clone(), x.clone()))
        .collect();
    let inclusion = Morphism::new(cone.apex.clone(), prod.structure.clone(), map)
        .expect("threads are product tuples");
    Ok(ProfiniteStructure {
        diagram: d.clone(),
        threads: cone.apex,
        legs: cone.legs,
        inclusion,
        product: prod,
    })
}

fn check_tuple_over(
    d: &CofilteredDiagram,
    j_set: &BTreeSet<String>,
    x: &Element,
) -> Result<(), ProfiniteError> {
    let Element::Tuple(coords) = x else {
        return Err(ProfiniteError::TupleShape {
            got: 0,
            expected: j_set.len(),
        });
    };
    if coords.len() != j_set.len() {
        return Err(ProfiniteError::TupleShape {
            got: coords.len(),
            expected: j_set.len(),
        });
    }
    for (pos, j) in j_set.iter().enumerate() {
        if !d.object(j).contains(&coords[pos]) {
            return Err(ProfiniteError::CarrierMismatch {
                element: coords[pos].clone(),
                index: j.clone(),
            });
        }
    }
    Ok(())
}

/// `V_{J,i}(x, y) = {j ∈ J ∩ i↑ : f_ji(x_j) = y}`: the coordinates above `i`
/// at which the tuple `x` (shaped over the sorted indices of `J`) maps onto
/// `y`. For fixed `J`, `i`, `x`, these sets partition `J ∩ i↑` as `y` varies.
pub fn v_set(
    d: &CofilteredDiagram,
    j_set: &BTreeSet<String>,
    i: &str,
    x: &Element,
    y: &Element,
) -> Result<BTreeSet<String>, ProfiniteError> {
    if !d.index.contains(i) {
        return Err(ProfiniteError::UnknownIndex(i.to_string()));
    }
    if !j_set.iter().all(|j| d.index.contains(j)) {
        return Err(ProfiniteError::NotASubset);
    }
    check_tuple_over(d, j_set, x)?;
    if !d.object(i).contains(y) {
        return Err(ProfiniteError::CarrierMismatch {
            element: y.clone(),
            index: i.to_string(),
        });
    }
    let mut out = BTreeSet::new();
    for (pos, j) in j_set.iter().enumerate() {
        if !d.index.le(i, j) {
            continue;
        }
        let f_ji = d.map_down(j, i).expect("comparable pairs carry maps");
        if f_ji.apply(tuple_coordinate(x, pos)) == Some(y) {
            out.insert(j.clone());
        }
    }
    Ok(out)
}

fn require_directed_ultra(d: &CofilteredDiagram, u: &Filter) -> Result<(), ProfiniteError> {
    let directed = is_directed_filter(&d.index, u).map_err(|_| ProfiniteError::NotDirectedUltra)?;
    if !directed || !u.is_ultrafilter() {
        return Err(ProfiniteError::NotDirectedUltra);
    }
    Ok(())
}

/// The unique `y ∈ Mᵢ` whose V-set is an ultrafilter member. Existence and
/// uniqueness follow from the V-sets partitioning `J ∩ i↑`, which is itself a
/// member because the ultrafilter is directed.
pub fn gamma_local(
    d: &CofilteredDiagram,
    u: &Filter,
    j_set: &BTreeSet<String>,
    i: &str,
    x: &Element,
) -> Result<Element, ProfiniteError> {
    require_directed_ultra(d, u)?;
    if !u.contains(j_set) {
        return Err(ProfiniteError::NotAFilterMember(crate::orders::set_name(
            j_set,
        )));
    }
    if !d.index.contains(i) {
        return Err(ProfiniteError::UnknownIndex(i.to_string()));
    }
    check_tuple_over(d, j_set, x)?;
    let mut hits = d
        .object(i)
        .universe()
        .iter()
        .filter(|y| u.contains(&v_set(d, j_set, i, x, y).expect("validated inputs")));
    let y = hits
        .next()
        .expect("the V-sets partition a filter member, so one lands in the ultrafilter")
        .clone();
    debug_assert!(hits.next().is_none(), "V-sets of distinct points are disjoint");
    Ok(y)
}

/// `γ_{J,i}` materialized as a homomorphism `M|J → Mᵢ`.
pub fn gamma_local_map(
    d: &CofilteredDiagram,
    u: &Filter,
    j_set: &BTreeSet<String>,
    i: &str,
) -> Result<Morphism, ProfiniteError> {
    require_directed_ultra(d, u)?;
    let sub: BTreeMap<String, Structure> = j_set
        .iter()
        .map(|j| (j.clone(), d.object(j).clone()))
        .collect();
    let mj = product(d.signature(), &sub)?.structure;
    let mut map = BTreeMap::new();
    for x in mj.universe() {
        map.insert(x.clone(), gamma_local(d, u, j_set, i, x)?);
    }
    Ok(Morphism::new(mj, d.object(i).clone(), map).expect("γ is total"))
}

/// The retraction data: the ultraproduct of the stages, the limit, the
/// per-stage maps `γᵢ : M/U → Mᵢ`, and their corestriction `γ : M/U → P`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GammaSystem {
    pub ultraproduct: ReducedProduct,
    pub profinite: ProfiniteStructure,
    pub components: BTreeMap<String, Morphism>,
    pub gamma: Morphism,
}

/// Build `γᵢ` on classes through canonical representatives (well-defined:
/// replacing a representative changes each V-set only off a filter member)
/// and assemble `γ` into the limit, satisfying `λᵢ ∘ γ = γᵢ`.
pub fn gamma_global(d: &CofilteredDiagram, u: &Filter) -> Result<GammaSystem, ProfiniteError> {
    require_directed_ultra(d, u)?;
    let up = ultraproduct(d.objects(), u)?;
    let profinite = profinite_limit(d)?;
    let full: BTreeSet<String> = u.index_set().clone();

    let mut components = BTreeMap::new();
    for i in d.index.elements() {
        let mut map = BTreeMap::new();
        for class in up.structure.universe() {
            map.insert(class.clone(), gamma_local(d, u, &full, i, class)?);
        }
        let gi = Morphism::new(up.structure.clone(), d.object(i).clone(), map)
            .expect("γᵢ is total");
        components.insert(i.clone(), gi);
    }

    let order: Vec<&String> = d.objects().keys().collect();
    let mut gamma_map = BTreeMap::new();
    for class in up.structure.universe() {
        let coords: Vec<Element> = order
            .iter()
            .map(|i| components[*i].apply(class).expect("γᵢ is total").clone())
            .collect();
        let thread = Element::Tuple(coords);
        assert!(
            profinite.threads.contains(&thread),
            "the γᵢ family is compatible, so its tuple is a thread"
        );
        gamma_map.insert(class.clone(), thread);
    }
    let gamma = Morphism::new(up.structure.clone(), profinite.threads.clone(), gamma_map)
        .expect("γ is total");
    Ok(GammaSystem {
        ultraproduct: up,
        profinite,
        components,
        gamma,
    })
}

/// The outcome of running the full retraction pipeline on one diagram.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RetractionReport {
    /// `ν_I ∘ ι : P → M/U` (the quotient map restricted to threads).
    pub section: Morphism,
    /// `γ : M/U → P`.
    pub retraction: Morphism,
    /// Whether `γ ∘ ν_I ∘ ι = Id_P`, checked element by element.
    pub identity_holds: bool,
    /// Whether an exhaustive backtracking search also finds a retraction of
    /// the section — an oracle independent of the γ construction.
    pub search_finds_retraction: bool,
    /// True when the limit is empty, in which case the identity is vacuous.
    pub limit_is_empty: bool,
}

/// Run the whole construction: the directed ultrafilter on the index poset,
/// the ultraproduct of the stages, the limit, and the γ retraction; then
/// check `γ ∘ ν_I ∘ ι = Id_P` and cross-check with a brute-force search.
pub fn retraction_theorem_check(
    d: &CofilteredDiagram,
) -> Result<RetractionReport, ProfiniteError> {
    let u = directed_ultrafilter(&d.index)?;
    let gs = gamma_global(d, &u)?;
    // ν_I splices into the full index set, so it is the quotient map itself.
    let section = gs
        .ultraproduct
        .quotient
        .compose(&gs.profinite.inclusion)
        .expect("ι lands in the product the quotient divides");
    let composite = gs.gamma.compose(&section).expect("section lands in M/U");
    let identity_holds = composite == Morphism::identity(&gs.profinite.threads);
    let search_finds_retraction = find_retraction(&section).is_some();
    Ok(RetractionReport {
        section,
        retraction: gs.gamma,
        identity_holds,
        search_finds_retraction,
        limit_is_empty: gs.profinite.threads.is_empty(),
    })
}

/// Check that the limit of a diagram of models stays a model: every axiom
/// must classify as a universally quantified geometric sentence and hold in
/// every stage; the return value is whether the limit satisfies them all.
pub fn profinite_closure_check(
    d: &CofilteredDiagram,
    axioms: &[Formula],
) -> Result<bool, ProfiniteError> {
    for ax in axioms {
        if !classify(ax).is_geometric_axiom {
            return Err(ProfiniteError::NotGeometric(ax.to_string()));
        }
    }
    for (i, m) in d.objects() {
        if !m.check_theory(axioms)? {
            return Err(ProfiniteError::ObjectNotAModel(i.clone()));
        }
    }
    let p = profinite_limit(d)?;
    Ok(p.threads.check_theory(axioms)?)
}
