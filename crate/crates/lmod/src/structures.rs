//! Finite first-order structures, Tarski evaluation, and the maps between
//! structures: homomorphisms, embeddings, pure morphisms, sections and
//! retractions.

use crate::formulas::{enumerate_pp_probes, Formula, FormulaError, PpBudget, Signature, Term};
use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use thiserror::Error;

/// An element of a universe. Constructions build composite identifiers:
/// products use `Tuple` (coordinates in index order), colimits use `Pair`
/// (class of a tagged representative). The derived `Ord` is the canonical
/// order used whenever a least representative is chosen.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Element {
    Name(String),
    Tuple(Vec<Element>),
    Pair(String, Box<Element>),
}

impl Element {
    pub fn name(s: impl Into<String>) -> Self {
        Element::Name(s.into())
    }

    pub fn pair(index: impl Into<String>, e: Element) -> Self {
        Element::Pair(index.into(), Box::new(e))
    }

    /// The unique element of the final structure: the empty index tuple.
    pub fn unit() -> Self {
        Element::Tuple(Vec::new())
    }
}

impl fmt::Display for Element {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Element::Name(s) => write!(f, "{s}"),
            Element::Tuple(parts) => {
                write!(f, "(")?;
                for (k, p) in parts.iter().enumerate() {
                    if k > 0 {
                        write!(f, ",")?;
                    }
                    write!(f, "{p}")?;
                }
                write!(f, ")")
            }
            Element::Pair(i, e) => write!(f, "[{i}:{e}]"),
        }
    }
}

/// All length-`n` tuples over `pool`, in lexicographic pool order. For
/// `n == 0` the single empty tuple.
pub(crate) fn tuples<T: Clone>(pool: &[T], n: usize) -> Vec<Vec<T>> {
    let mut out = vec![Vec::new()];
    for _ in 0..n {
        let mut next = Vec::with_capacity(out.len() * pool.len());
        for partial in &out {
            for item in pool {
                let mut ext = partial.clone();
                ext.push(item.clone());
                next.push(ext);
            }
        }
        out = next;
    }
    out
}

/// An assignment of elements to free variables.
pub type Assignment = BTreeMap<String, Element>;

/// Rejected structure data.
#[derive(Debug, Error, PartialEq, Eq)]
pub enum StructureError {
    #[error("universe lists element `{0}` twice")]
    DuplicateElement(Element),
    #[error("an empty universe cannot interpret constant symbols")]
    EmptyUniverseWithConstants,
    #[error("symbol `{0}` has no interpretation")]
    MissingInterpretation(String),
    #[error("interpretation given for undeclared symbol `{0}`")]
    UndeclaredSymbol(String),
    #[error("symbol `{symbol}` mentions `{element}`, which is not in the universe")]
    NotInUniverse { symbol: String, element: Element },
    #[error("symbol `{symbol}` expects tuples of length {expected}, found one of length {found}")]
    WrongTupleLength {
        symbol: String,
        expected: usize,
        found: usize,
    },
    #[error("function `{symbol}` is missing a value at ({})", missing.iter().map(|e| e.to_string()).collect::<Vec<_>>().join(","))]
    PartialFunction {
        symbol: String,
        missing: Vec<Element>,
    },
    #[error("element `{0}` is not in the universe")]
    UnknownElement(Element),
    #[error("subset is not closed: `{symbol}` leads from the subset to `{escapes}`")]
    NotClosed { symbol: String, escapes: Element },
}

/// A finite structure: a signature, a finite universe, and a total
/// interpretation of every symbol. The universe may be empty only when the
/// signature has no constants.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Structure {
    signature: Signature,
    universe: Vec<Element>,
    constants: BTreeMap<String, Element>,
    functions: BTreeMap<String, BTreeMap<Vec<Element>, Element>>,
    relations: BTreeMap<String, BTreeSet<Vec<Element>>>,
}

impl Structure {
    pub fn new(
        signature: Signature,
        universe: Vec<Element>,
        constants: BTreeMap<String, Element>,
        functions: BTreeMap<String, BTreeMap<Vec<Element>, Element>>,
        relations: BTreeMap<String, BTreeSet<Vec<Element>>>,
    ) -> Result<Self, StructureError> {
        let mut seen = BTreeSet::new();
        for e in &universe {
            if !seen.insert(e.clone()) {
                return Err(StructureError::DuplicateElement(e.clone()));
            }
        }
        if universe.is_empty() && signature.has_constants() {
            return Err(StructureError::EmptyUniverseWithConstants);
        }
        for name in constants.keys() {
            if !signature.is_constant(name) {
                return Err(StructureError::UndeclaredSymbol(name.clone()));
            }
        }
        for name in functions.keys() {
            if signature.function_arity(name).is_none() {
                return Err(StructureError::UndeclaredSymbol(name.clone()));
            }
        }
        for name in relations.keys() {
            if signature.relation_arity(name).is_none() {
                return Err(StructureError::UndeclaredSymbol(name.clone()));
            }
        }
        for c in signature.constants() {
            let v = constants
                .get(c)
                .ok_or_else(|| StructureError::MissingInterpretation(c.to_string()))?;
            if !seen.contains(v) {
                return Err(StructureError::NotInUniverse {
                    symbol: c.to_string(),
                    element: v.clone(),
                });
            }
        }
        for (f, arity) in signature.functions() {
            let table = functions
                .get(f)
                .ok_or_else(|| StructureError::MissingInterpretation(f.to_string()))?;
            for (args, value) in table {
                if args.len() != arity {
                    return Err(StructureError::WrongTupleLength {
                        symbol: f.to_string(),
                        expected: arity,
                        found: args.len(),
                    });
                }
                for e in args.iter().chain(std::iter::once(value)) {
                    if !seen.contains(e) {
                        return Err(StructureError::NotInUniverse {
                            symbol: f.to_string(),
                            element: e.clone(),
                        });
                    }
                }
            }
            for args in tuples(&universe, arity) {
                if !table.contains_key(&args) {
                    return Err(StructureError::PartialFunction {
                        symbol: f.to_string(),
                        missing: args,
                    });
                }
            }
        }
        for (r, arity) in signature.relations() {
            let set = relations
                .get(r)
                .ok_or_else(|| StructureError::MissingInterpretation(r.to_string()))?;
            for args in set {
                if args.len() != arity {
                    return Err(StructureError::WrongTupleLength {
                        symbol: r.to_string(),
                        expected: arity,
                        found: args.len(),
                    });
                }
                for e in args {
                    if !seen.contains(e) {
                        return Err(StructureError::NotInUniverse {
                            symbol: r.to_string(),
                            element: e.clone(),
                        });
                    }
                }
            }
        }
        Ok(Structure {
            signature,
            universe,
            constants,
            functions,
            relations,
        })
    }

    pub fn signature(&self) -> &Signature {
        &self.signature
    }

    pub fn universe(&self) -> &[Element] {
        &self.universe
    }

    pub fn size(&self) -> usize {
        self.universe.len()
    }

    pub fn is_empty(&self) -> bool {
        self.universe.is_empty()
    }

    pub fn contains(&self, e: &Element) -> bool {
        self.universe.contains(e)
    }

    pub fn constant(&self, name: &str) -> Option<&Element> {
        self.constants.get(name)
    }

    pub fn function(&self, name: &str) -> Option<&BTreeMap<Vec<Element>, Element>> {
        self.functions.get(name)
    }

    pub fn relation(&self, name: &str) -> Option<&BTreeSet<Vec<Element>>> {
        self.relations.get(name)
    }

    /// Every assignment of the given variables into this universe.
    pub fn all_assignments(&self, vars: &[String]) -> Vec<Assignment> {
        tuples(&self.universe, vars.len())
            .into_iter()
            .map(|t| vars.iter().cloned().zip(t).collect())
            .collect()
    }

    /// Evaluate a term under an assignment.
    pub fn eval_term(&self, t: &Term, a: &Assignment) -> Result<Element, EvalError> {
        match t {
            Term::Var(v) => a
                .get(v)
                .cloned()
                .ok_or_else(|| EvalError::UnboundVariable(v.clone())),
            Term::Const(c) => self
                .constants
                .get(c)
                .cloned()
                .ok_or_else(|| EvalError::Formula(FormulaError::UndeclaredSymbol(c.clone()))),
            Term::App(f, args) => {
                let vals = args
                    .iter()
                    .map(|arg| self.eval_term(arg, a))
                    .collect::<Result<Vec<_>, _>>()?;
                self.functions
                    .get(f)
                    .and_then(|table| table.get(&vals))
                    .cloned()
                    .ok_or_else(|| EvalError::Formula(FormulaError::UndeclaredSymbol(f.clone())))
            }
        }
    }

    /// Tarski satisfaction by exhaustive search over the universe. Universal
    /// quantification over an empty universe is true, existential is false.
    pub fn eval(&self, f: &Formula, a: &Assignment) -> Result<bool, EvalError> {
        f.validate(&self.signature)?;
        for (v, e) in a {
            if !self.contains(e) {
                return Err(EvalError::AssignmentOutsideUniverse {
                    var: v.clone(),
                    element: e.clone(),
                });
            }
        }
        let mut scope = a.clone();
        self.eval_inner(f, &mut scope)
    }

    fn eval_inner(&self, f: &Formula, a: &mut Assignment) -> Result<bool, EvalError> {
        match f {
            Formula::True => Ok(true),
            Formula::False => Ok(false),
            Formula::Equal(s, t) => Ok(self.eval_term(s, a)? == self.eval_term(t, a)?),
            Formula::Rel(r, args) => {
                let vals = args
                    .iter()
                    .map(|arg| self.eval_term(arg, a))
                    .collect::<Result<Vec<_>, _>>()?;
                Ok(self.relations[r].contains(&vals))
            }
            Formula::Not(inner) => Ok(!self.eval_inner(inner, a)?),
            Formula::And(l, r) => Ok(self.eval_inner(l, a)? && self.eval_inner(r, a)?),
            Formula::Or(l, r) => Ok(self.eval_inner(l, a)? || self.eval_inner(r, a)?),
            Formula::Implies(l, r) => Ok(!self.eval_inner(l, a)? || self.eval_inner(r, a)?),
            Formula::Forall(v, body) => {
                let saved = a.get(v).cloned();
                let mut result = true;
                for e in &self.universe {
                    a.insert(v.clone(), e.clone());
                    if !self.eval_inner(body, a)? {
                        result = false;
                        break;
                    }
                }
                restore(a, v, saved);
                Ok(result)
            }
            Formula::Exists(v, body) => {
                let saved = a.get(v).cloned();
                let mut result = false;
                for e in &self.universe {
                    a.insert(v.clone(), e.clone());
                    if self.eval_inner(body, a)? {
                        result = true;
                        break;
                    }
                }
                restore(a, v, saved);
                Ok(result)
            }
        }
    }

    /// Whether every axiom (a sentence) holds.
    pub fn check_theory(&self, axioms: &[Formula]) -> Result<bool, EvalError> {
        for ax in axioms {
            if !ax.is_sentence() {
                return Err(EvalError::NotASentence(ax.to_string()));
            }
            if !self.eval(ax, &Assignment::new())? {
                return Ok(false);
            }
        }
        Ok(true)
    }

    /// The induced substructure on `subset`, which must contain the constants
    /// and be closed under the functions.
    pub fn substructure(&self, subset: &BTreeSet<Element>) -> Result<Structure, StructureError> {
        for e in subset {
            if !self.contains(e) {
                return Err(StructureError::UnknownElement(e.clone()));
            }
        }
        for (c, v) in &self.constants {
            if !subset.contains(v) {
                return Err(StructureError::NotClosed {
                    symbol: c.clone(),
                    escapes: v.clone(),
                });
            }
        }
        let universe: Vec<Element> = self
            .universe
            .iter()
            .filter(|e| subset.contains(e))
            .cloned()
            .collect();
        let mut functions = BTreeMap::new();
        for (f, table) in &self.functions {
            let mut sub = BTreeMap::new();
            for (args, value) in table {
                if args.iter().all(|e| subset.contains(e)) {
                    if !subset.contains(value) {
                        return Err(StructureError::NotClosed {
                            symbol: f.clone(),
                            escapes: value.clone(),
                        });
                    }
                    sub.insert(args.clone(), value.clone());
                }
            }
            functions.insert(f.clone(), sub);
        }
        let relations = self
            .relations
            .iter()
            .map(|(r, set)| {
                let sub: BTreeSet<Vec<Element>> = set
                    .iter()
                    .filter(|args| args.iter().all(|e| subset.contains(e)))
                    .cloned()
                    .collect();
                (r.clone(), sub)
            })
            .collect();
        Structure::new(
            self.signature.clone(),
            universe,
            self.constants.clone(),
            functions,
            relations,
        )
    }

    /// The substructure generated by `seed`: close under constants and
    /// functions, then take the induced substructure.
    pub fn generated_substructure(&self, seed: &BTreeSet<Element>) -> Result<Structure, StructureError> {
        for e in seed {
            if !self.contains(e) {
                return Err(StructureError::UnknownElement(e.clone()));
            }
        }
        let mut closed: BTreeSet<Element> = seed.clone();
        closed.extend(self.constants.values().cloned());
        loop {
            let mut grew = false;
            for table in self.functions.values() {
                for (args, value) in table {
                    if args.iter().all(|e| closed.contains(e)) && closed.insert(value.clone()) {
                        grew = true;
                    }
                }
            }
            if !grew {
                break;
            }
        }
        self.substructure(&closed)
    }

    /// Rename every element to `prefix0, prefix1, ..` in universe order.
    /// Returns the renamed structure and the element translation.
    pub fn with_canonical_names(&self, prefix: &str) -> (Structure, BTreeMap<Element, Element>) {
        let map: BTreeMap<Element, Element> = self
            .universe
            .iter()
            .enumerate()
            .map(|(i, e)| (e.clone(), Element::name(format!("{prefix}{i}"))))
            .collect();
        let universe = self.universe.iter().map(|e| map[e].clone()).collect();
        let constants = self
            .constants
            .iter()
            .map(|(c, v)| (c.clone(), map[v].clone()))
            .collect();
        let functions = self
            .functions
            .iter()
            .map(|(f, table)| {
                let t = table
                    .iter()
                    .map(|(args, v)| {
                        (
                            args.iter().map(|e| map[e].clone()).collect::<Vec<_>>(),
                            map[v].clone(),
                        )
                    })
                    .collect();
                (f.clone(), t)
            })
            .collect();
        let relations = self
            .relations
            .iter()
            .map(|(r, set)| {
                let s = set
                    .iter()
                    .map(|args| args.iter().map(|e| map[e].clone()).collect::<Vec<_>>())
                    .collect();
                (r.clone(), s)
            })
            .collect();
        let renamed = Structure::new(self.signature.clone(), universe, constants, functions, relations)
            .expect("renaming preserves well-formedness");
        (renamed, map)
    }
}

fn restore(a: &mut Assignment, var: &str, saved: Option<Element>) {
    match saved {
        Some(e) => {
            a.insert(var.to_string(), e);
        }
        None => {
            a.remove(var);
        }
    }
}

/// Evaluation failures.
#[derive(Debug, Error, PartialEq, Eq)]
pub enum EvalError {
    #[error(transparent)]
    Formula(#[from] FormulaError),
    #[error("free variable `{0}` has no assigned value")]
    UnboundVariable(String),
    #[error("variable `{var}` is assigned `{element}`, which is not in the universe")]
    AssignmentOutsideUniverse { var: String, element: Element },
    #[error("axiom `{0}` is not a sentence")]
    NotASentence(String),
}

/// Problems constructing or composing morphisms.
#[derive(Debug, Error, PartialEq, Eq)]
pub enum MorphismError {
    #[error("source and target have different signatures")]
    SignatureMismatch,
    #[error("map is missing a value for `{0}`")]
    NotTotal(Element),
    #[error("map sends `{from}` to `{to}`, which is not in the target")]
    ImageOutsideTarget { from: Element, to: Element },
    #[error("map has a value for `{0}`, which is not in the source")]
    UnknownDomainElement(Element),
    #[error("composition mismatch: inner target differs from outer source")]
    ComposeMismatch,
    #[error("purity budget must be at least 1")]
    ZeroBudget,
    #[error("morphism is not a homomorphism")]
    NotAHomomorphism,
}

/// A total map between two structures over the same signature. Nothing is
/// assumed about preservation; see [`Morphism::is_homomorphism`] and friends.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Morphism {
    source: Structure,
    target: Structure,
    map: BTreeMap<Element, Element>,
}

impl Morphism {
    pub fn new(
        source: Structure,
        target: Structure,
        map: BTreeMap<Element, Element>,
    ) -> Result<Self, MorphismError> {
        if source.signature != target.signature {
            return Err(MorphismError::SignatureMismatch);
        }
        for from in map.keys() {
            if !source.contains(from) {
                return Err(MorphismError::UnknownDomainElement(from.clone()));
            }
        }
        for e in source.universe() {
            match map.get(e) {
                None => return Err(MorphismError::NotTotal(e.clone())),
                Some(to) if !target.contains(to) => {
                    return Err(MorphismError::ImageOutsideTarget {
                        from: e.clone(),
                        to: to.clone(),
                    })
                }
                _ => {}
            }
        }
        Ok(Morphism {
            source,
            target,
            map,
        })
    }

    pub fn identity(m: &Structure) -> Self {
        let map = m.universe().iter().map(|e| (e.clone(), e.clone())).collect();
        Morphism {
            source: m.clone(),
            target: m.clone(),
            map,
        }
    }

    /// The inclusion of a substructure into a superstructure.
    pub fn inclusion(sub: &Structure, sup: &Structure) -> Result<Self, MorphismError> {
        let map = sub.universe().iter().map(|e| (e.clone(), e.clone())).collect();
        Morphism::new(sub.clone(), sup.clone(), map)
    }

    pub fn source(&self) -> &Structure {
        &self.source
    }

    pub fn target(&self) -> &Structure {
        &self.target
    }

    pub fn map(&self) -> &BTreeMap<Element, Element> {
        &self.map
    }

    pub fn apply(&self, e: &Element) -> Option<&Element> {
        self.map.get(e)
    }

    /// `self` after `first`: the composite `self . first`.
    pub fn compose(&self, first: &Morphism) -> Result<Morphism, MorphismError> {
        if first.target != self.source {
            return Err(MorphismError::ComposeMismatch);
        }
        let map = first
            .map
            .iter()
            .map(|(from, mid)| (from.clone(), self.map[mid].clone()))
            .collect();
        Morphism::new(first.source.clone(), self.target.clone(), map)
    }

    pub fn is_injective(&self) -> bool {
        let images: BTreeSet<&Element> = self.map.values().collect();
        images.len() == self.map.len()
    }

    pub fn is_surjective(&self) -> bool {
        let images: BTreeSet<&Element> = self.map.values().collect();
        images.len() == self.target.size()
    }

    fn image_tuple(&self, args: &[Element]) -> Vec<Element> {
        args.iter().map(|e| self.map[e].clone()).collect()
    }

    /// Preservation of constants, function values and relation membership.
    pub fn is_homomorphism(&self) -> bool {
        for (c, v) in &self.source.constants {
            if self.map[v] != self.target.constants[c] {
                return false;
            }
        }
        for (f, table) in &self.source.functions {
            let target_table = &self.target.functions[f];
            for (args, value) in table {
                if target_table[&self.image_tuple(args)] != self.map[value] {
                    return false;
                }
            }
        }
        for (r, set) in &self.source.relations {
            let target_set = &self.target.relations[r];
            for args in set {
                if !target_set.contains(&self.image_tuple(args)) {
                    return false;
                }
            }
        }
        true
    }

    /// An injective homomorphism that also reflects every atomic formula:
    /// tuples whose image is related must already be related in the source.
    pub fn is_embedding(&self) -> bool {
        if !self.is_injective() || !self.is_homomorphism() {
            return false;
        }
        for (r, arity) in self.source.signature.relations() {
            let source_set = &self.source.relations[r];
            let target_set = &self.target.relations[r];
            for args in tuples(self.source.universe(), arity) {
                if target_set.contains(&self.image_tuple(&args)) && !source_set.contains(&args) {
                    return false;
                }
            }
        }
        true
    }

    /// Whether the morphism reflects every positive-primitive formula within
    /// the budget: for each probe `p(x̄)` with at most `bound` existential
    /// variables and atoms, and every source tuple `ā`, satisfaction of
    /// `p[h(ā)]` in the target forces satisfaction of `p[ā]` in the source.
    /// Preservation in the forward direction already follows from being a
    /// homomorphism.
    pub fn is_pure(&self, bound: usize) -> Result<bool, MorphismError> {
        if bound == 0 {
            return Err(MorphismError::ZeroBudget);
        }
        if !self.is_homomorphism() {
            return Err(MorphismError::NotAHomomorphism);
        }
        let probes = enumerate_pp_probes(&self.source.signature, &PpBudget::uniform(bound));
        for probe in &probes {
            for args in tuples(self.source.universe(), probe.free.len()) {
                let source_assignment: Assignment = probe
                    .free
                    .iter()
                    .cloned()
                    .zip(args.iter().cloned())
                    .collect();
                let target_assignment: Assignment = probe
                    .free
                    .iter()
                    .cloned()
                    .zip(args.iter().map(|e| self.map[e].clone()))
                    .collect();
                let in_target = self
                    .target
                    .eval(&probe.formula, &target_assignment)
                    .expect("probe is well-formed");
                if in_target {
                    let in_source = self
                        .source
                        .eval(&probe.formula, &source_assignment)
                        .expect("probe is well-formed");
                    if !in_source {
                        return Ok(false);
                    }
                }
            }
        }
        Ok(true)
    }
}

/// Backtracking enumeration of homomorphisms `source -> target`, in the
/// lexicographic order induced by the universe orders. `forced` pins chosen
/// images; `visit` receives each complete homomorphism and may stop the
/// search by returning `false`.
fn search_homomorphisms(
    source: &Structure,
    target: &Structure,
    forced: &BTreeMap<Element, Element>,
    visit: &mut dyn FnMut(&BTreeMap<Element, Element>) -> bool,
) {
    if source.signature() != target.signature() {
        return;
    }
    for to in forced.values() {
        if !target.contains(to) {
            return;
        }
    }
    let order: Vec<Element> = source.universe().to_vec();
    let mut map: BTreeMap<Element, Element> = BTreeMap::new();

    fn consistent(source: &Structure, target: &Structure, map: &BTreeMap<Element, Element>) -> bool {
        for (c, v) in &source.constants {
            if let Some(img) = map.get(v) {
                if img != &target.constants[c] {
                    return false;
                }
            }
        }
        for (f, table) in &source.functions {
            let target_table = &target.functions[f];
            for (args, value) in table {
                let imgs: Option<Vec<Element>> =
                    args.iter().map(|e| map.get(e).cloned()).collect();
                if let (Some(imgs), Some(img_value)) = (imgs, map.get(value)) {
                    if &target_table[&imgs] != img_value {
                        return false;
                    }
                }
            }
        }
        for (r, set) in &source.relations {
            let target_set = &target.relations[r];
            for args in set {
                let imgs: Option<Vec<Element>> =
                    args.iter().map(|e| map.get(e).cloned()).collect();
                if let Some(imgs) = imgs {
                    if !target_set.contains(&imgs) {
                        return false;
                    }
                }
            }
        }
        true
    }

    fn go(
        source: &Structure,
        target: &Structure,
        order: &[Element],
        forced: &BTreeMap<Element, Element>,
        map: &mut BTreeMap<Element, Element>,
        depth: usize,
        visit: &mut dyn FnMut(&BTreeMap<Element, Element>) -> bool,
    ) -> bool {
        if depth == order.len() {
            return visit(map);
        }
        let e = &order[depth];
        let candidates: Vec<Element> = match forced.get(e) {
            Some(to) => vec![to.clone()],
            None => target.universe().to_vec(),
        };
        for to in candidates {
            map.insert(e.clone(), to);
            if consistent(source, target, map)
                && !go(source, target, order, forced, map, depth + 1, visit)
            {
                return false;
            }
            map.remove(e);
        }
        true
    }

    go(source, target, &order, forced, &mut map, 0, visit);
}

/// The first homomorphism `source -> target` in lexicographic order, if any.
pub fn find_homomorphism(source: &Structure, target: &Structure) -> Option<Morphism> {
    let mut found = None;
    search_homomorphisms(source, target, &BTreeMap::new(), &mut |map| {
        found = Some(map.clone());
        false
    });
    found.map(|map| {
        Morphism::new(source.clone(), target.clone(), map).expect("search yields total maps")
    })
}

/// Up to `cap` homomorphisms `source -> target`, lexicographically first.
pub fn homomorphisms_up_to(source: &Structure, target: &Structure, cap: usize) -> Vec<Morphism> {
    if cap == 0 {
        return Vec::new();
    }
    let mut found: Vec<BTreeMap<Element, Element>> = Vec::new();
    search_homomorphisms(source, target, &BTreeMap::new(), &mut |map| {
        found.push(map.clone());
        found.len() < cap
    });
    found
        .into_iter()
        .map(|map| {
            Morphism::new(source.clone(), target.clone(), map).expect("search yields total maps")
        })
        .collect()
}

/// Search for a retraction of the section `s`: a homomorphism
/// `r : target(s) -> source(s)` with `r . s = id`. Returns the first witness
/// in the lexicographic order induced by the universe orders.
pub fn find_retraction(s: &Morphism) -> Option<Morphism> {
    // r is pinned on the image of s; if s identifies two elements no
    // retraction can exist.
    let mut forced: BTreeMap<Element, Element> = BTreeMap::new();
    for (a, sa) in s.map() {
        if let Some(prev) = forced.insert(sa.clone(), a.clone()) {
            if &prev != a {
                return None;
            }
        }
    }
    let mut found = None;
    search_homomorphisms(s.target(), s.source(), &forced, &mut |map| {
        found = Some(map.clone());
        false
    });
    found.map(|map| {
        Morphism::new(s.target().clone(), s.source().clone(), map)
            .expect("search yields total maps")
    })
}

/// The first isomorphism `a -> b` in lexicographic order, if any.
pub fn find_isomorphism(a: &Structure, b: &Structure) -> Option<Morphism> {
    if a.size() != b.size() {
        return None;
    }
    let mut found = None;
    search_homomorphisms(a, b, &BTreeMap::new(), &mut |map| {
        let images: BTreeSet<&Element> = map.values().collect();
        if images.len() != map.len() {
            return true;
        }
        let m = Morphism::new(a.clone(), b.clone(), map.clone()).expect("total");
        if m.is_embedding() {
            found = Some(m);
            false
        } else {
            true
        }
    });
    found
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::formulas::parse_formula;

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

    fn hom(source: &Structure, target: &Structure, pairs: &[(&str, &str)]) -> Morphism {
        let map = pairs
            .iter()
            .map(|(a, b)| (Element::name(*a), Element::name(*b)))
            .collect();
        Morphism::new(source.clone(), target.clone(), map).unwrap()
    }

    #[test]
    fn eval_on_a_path() {
        let sig = Signature::graph();
        let path = graph_structure(&["a", "b"], &[("a", "b")]);
        let all_out = parse_formula("forall x. exists y. E(x,y)", &sig).unwrap();
        assert!(!path.eval(&all_out, &Assignment::new()).unwrap());
        let some_edge = parse_formula("exists x. exists y. E(x,y)", &sig).unwrap();
        assert!(path.eval(&some_edge, &Assignment::new()).unwrap());
    }

    #[test]
    fn eval_on_the_empty_structure() {
        let empty = graph_structure(&[], &[]);
        let sig = Signature::graph();
        let forall = parse_formula("forall x. E(x,x)", &sig).unwrap();
        assert!(empty.eval(&forall, &Assignment::new()).unwrap());
        let exists = parse_formula("exists x. x = x", &sig).unwrap();
        assert!(!empty.eval(&exists, &Assignment::new()).unwrap());
    }

    #[test]
    fn eval_reports_unbound_variables() {
        let sig = Signature::graph();
        let path = graph_structure(&["a", "b"], &[("a", "b")]);
        let open = parse_formula("E(x,y)", &sig).unwrap();
        let err = path.eval(&open, &Assignment::new()).unwrap_err();
        assert!(matches!(err, EvalError::UnboundVariable(_)));
    }

    #[test]
    fn empty_universe_rejects_constants() {
        let sig = Signature::special_group();
        let err = Structure::new(
            sig,
            Vec::new(),
            BTreeMap::new(),
            BTreeMap::new(),
            BTreeMap::new(),
        )
        .unwrap_err();
        assert_eq!(err, StructureError::EmptyUniverseWithConstants);
    }

    #[test]
    fn partial_function_tables_are_rejected() {
        let sig = Signature::special_group();
        let p = Element::name("p");
        let err = Structure::new(
            sig,
            vec![p.clone()],
            BTreeMap::from([("1".to_string(), p.clone()), ("-1".to_string(), p.clone())]),
            BTreeMap::from([("mul".to_string(), BTreeMap::new())]),
            BTreeMap::from([("equiv".to_string(), BTreeSet::new())]),
        )
        .unwrap_err();
        assert!(matches!(err, StructureError::PartialFunction { .. }));
    }

    #[test]
    fn homomorphisms_preserve_edges() {
        let k2 = graph_structure(&["a", "b"], &[("a", "b"), ("b", "a")]);
        let point = graph_structure(&["p"], &[("p", "p")]);
        let collapse = hom(&k2, &point, &[("a", "p"), ("b", "p")]);
        assert!(collapse.is_homomorphism());
        assert!(!collapse.is_embedding());

        let bare_point = graph_structure(&["p"], &[]);
        let collapse_bad = hom(&k2, &bare_point, &[("a", "p"), ("b", "p")]);
        assert!(!collapse_bad.is_homomorphism());
    }

    #[test]
    fn embeddings_reflect_edges() {
        let single = graph_structure(&["a"], &[]);
        let with_edge = graph_structure(&["a", "b"], &[("a", "a")]);
        let incl = hom(&single, &with_edge, &[("a", "b")]);
        assert!(incl.is_embedding());
        let incl_onto_loop = hom(&single, &with_edge, &[("a", "a")]);
        assert!(incl_onto_loop.is_homomorphism());
        assert!(!incl_onto_loop.is_embedding());
    }

    #[test]
    fn purity_fails_when_a_loop_appears_elsewhere() {
        let single = graph_structure(&["a"], &[]);
        let with_loop = graph_structure(&["a", "b"], &[("b", "b")]);
        let incl = hom(&single, &with_loop, &[("a", "a")]);
        assert!(incl.is_embedding());
        // exists y. E(y,y) holds in the target but not the source.
        assert!(!incl.is_pure(1).unwrap());
        assert!(Morphism::identity(&with_loop).is_pure(2).unwrap());
        assert_eq!(incl.is_pure(0), Err(MorphismError::ZeroBudget));
    }

    #[test]
    fn retraction_of_a_loop_inclusion() {
        let looped = graph_structure(&["a"], &[("a", "a")]);
        let bigger = graph_structure(&["a", "b"], &[("a", "a"), ("b", "b"), ("a", "b")]);
        let section = hom(&looped, &bigger, &[("a", "a")]);
        let r = find_retraction(&section).expect("retraction exists");
        assert!(r.is_homomorphism());
        assert_eq!(r.apply(&Element::name("a")), Some(&Element::name("a")));
        assert_eq!(r.apply(&Element::name("b")), Some(&Element::name("a")));
        let composite = r.compose(&section).unwrap();
        assert_eq!(composite, Morphism::identity(&looped));
    }

    #[test]
    fn retraction_absent_when_image_cannot_fold_back() {
        let point = graph_structure(&["p"], &[]);
        let with_loop = graph_structure(&["p", "q"], &[("q", "q"), ("q", "p")]);
        let section = hom(&point, &with_loop, &[("p", "p")]);
        // q must map to p, but then the loop (q,q) has nowhere to go.
        assert_eq!(find_retraction(&section), None);
    }

    #[test]
    fn sections_found_by_search_are_pure() {
        let looped = graph_structure(&["a"], &[("a", "a")]);
        let bigger = graph_structure(&["a", "b"], &[("a", "a"), ("b", "b"), ("a", "b")]);
        let section = hom(&looped, &bigger, &[("a", "a")]);
        assert!(find_retraction(&section).is_some());
        assert!(section.is_pure(1).unwrap());
        assert!(section.is_pure(2).unwrap());
    }

    #[test]
    fn substructures_must_be_closed() {
        let sig = Signature::special_group();
        let p = Element::name("p");
        let m = Element::name("m");
        let mul: BTreeMap<Vec<Element>, Element> = BTreeMap::from([
            (vec![p.clone(), p.clone()], p.clone()),
            (vec![p.clone(), m.clone()], m.clone()),
            (vec![m.clone(), p.clone()], m.clone()),
            (vec![m.clone(), m.clone()], p.clone()),
        ]);
        let z2 = Structure::new(
            sig,
            vec![p.clone(), m.clone()],
            BTreeMap::from([("1".to_string(), p.clone()), ("-1".to_string(), m.clone())]),
            BTreeMap::from([("mul".to_string(), mul)]),
            BTreeMap::from([("equiv".to_string(), BTreeSet::new())]),
        )
        .unwrap();
        let err = z2
            .substructure(&BTreeSet::from([p.clone()]))
            .unwrap_err();
        assert!(matches!(err, StructureError::NotClosed { .. }));
        let whole = z2
            .substructure(&BTreeSet::from([p.clone(), m.clone()]))
            .unwrap();
        assert_eq!(whole, z2);
        let generated = z2.generated_substructure(&BTreeSet::new()).unwrap();
        assert_eq!(generated, z2);
    }

    #[test]
    fn find_homomorphism_is_lexicographically_first() {
        let two = graph_structure(&["a", "b"], &[]);
        let h = find_homomorphism(&two, &two).unwrap();
        let expected = BTreeMap::from([
            (Element::name("a"), Element::name("a")),
            (Element::name("b"), Element::name("a")),
        ]);
        assert_eq!(h.map(), &expected);
        let all = homomorphisms_up_to(&two, &two, 10);
        assert_eq!(all.len(), 4);
    }

    #[test]
    fn isomorphism_search_respects_edges() {
        let a = graph_structure(&["a", "b"], &[("a", "b")]);
        let b = graph_structure(&["x", "y"], &[("y", "x")]);
        let iso = find_isomorphism(&a, &b).unwrap();
        assert_eq!(iso.apply(&Element::name("a")), Some(&Element::name("y")));
        let c = graph_structure(&["x", "y"], &[("x", "y"), ("y", "x")]);
        assert_eq!(find_isomorphism(&a, &c), None);
    }

    #[test]
    fn check_theory_requires_sentences() {
        let sig = Signature::graph();
        let k2 = graph_structure(&["a", "b"], &[("a", "b"), ("b", "a")]);
        let sym = parse_formula("forall x. forall y. E(x,y) -> E(y,x)", &sig).unwrap();
        assert!(k2.check_theory(&[sym]).unwrap());
        let open = parse_formula("E(x,x)", &sig).unwrap();
        assert!(matches!(
            k2.check_theory(&[open]),
            Err(EvalError::NotASentence(_))
        ));
    }
}
