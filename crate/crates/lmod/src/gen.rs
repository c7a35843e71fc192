//! Seeded random generators: structures, formula corpora, directed posets,
//! and functorial cofiltered diagrams. Everything is deterministic in the
//! seed; no hidden entropy.
//!
//! Random cofiltered diagrams are built from a single chain of collapse
//! steps and a monotone level map, so every diagram map is a composite of
//! chain steps and functoriality holds by construction.

use crate::formulas::{Formula, Signature, Term};
use crate::orders::Poset;
use crate::profinite::CofilteredDiagram;
use crate::structures::{tuples, Element, Morphism, Structure};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::collections::{BTreeMap, BTreeSet};

/// The project-wide deterministic RNG.
pub fn rng_from_seed(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Shape parameters for one random structure.
#[derive(Debug, Clone)]
pub struct StructureProfile {
    /// Universe size; raised to 1 when the signature has constants.
    pub size: usize,
    /// Probability that any given relation tuple is present.
    pub edge_density: f64,
    /// Close every binary relation under argument swap.
    pub symmetric_relations: bool,
    /// When `1` and `mul` are declared, force `mul(x,1) = mul(1,x) = x`.
    pub unit_law: bool,
}

impl StructureProfile {
    pub fn new(size: usize) -> Self {
        StructureProfile {
            size,
            edge_density: 0.4,
            symmetric_relations: false,
            unit_law: false,
        }
    }
}

/// A uniformly random structure matching the profile. Always valid:
/// functions are total tables, constants land in the universe.
pub fn random_structure(
    sig: &Signature,
    profile: &StructureProfile,
    rng: &mut impl Rng,
) -> Structure {
    let size = if sig.constants().next().is_some() {
        profile.size.max(1)
    } else {
        profile.size
    };
    let universe: Vec<Element> = (0..size).map(|i| Element::name(format!("e{i}"))).collect();
    let mut constants = BTreeMap::new();
    for c in sig.constants() {
        constants.insert(
            c.to_string(),
            universe.choose(rng).expect("nonempty with constants").clone(),
        );
    }
    let mut functions = BTreeMap::new();
    for (f, arity) in sig.functions() {
        let mut table = BTreeMap::new();
        for args in tuples(&universe, arity) {
            if let Some(v) = universe.choose(rng) {
                table.insert(args, v.clone());
            }
        }
        functions.insert(f.to_string(), table);
    }
    let mut relations = BTreeMap::new();
    for (r, arity) in sig.relations() {
        let mut set = BTreeSet::new();
        for args in tuples(&universe, arity) {
            if rng.gen_bool(profile.edge_density) {
                set.insert(args);
            }
        }
        relations.insert(r.to_string(), set);
    }
    let mut m = Structure::new(sig.clone(), universe, constants, functions, relations)
        .expect("generated data is well-formed");
    if profile.symmetric_relations {
        m = symmetric_closure(&m);
    }
    if profile.unit_law {
        m = impose_unit_law(&m);
    }
    m
}

/// Close every binary relation under argument swap.
pub fn symmetric_closure(m: &Structure) -> Structure {
    let sig = m.signature().clone();
    let mut relations = BTreeMap::new();
    for (r, arity) in sig.relations() {
        let mut set = m.relation(r).expect("validated structure").clone();
        if arity == 2 {
            let swapped: Vec<Vec<Element>> = set
                .iter()
                .map(|t| vec![t[1].clone(), t[0].clone()])
                .collect();
            set.extend(swapped);
        }
        relations.insert(r.to_string(), set);
    }
    rebuild(m, None, relations)
}

/// Overwrite `mul` rows so that the constant `1` is a two-sided unit. Does
/// nothing when the signature lacks `1` or a binary `mul`.
pub fn impose_unit_law(m: &Structure) -> Structure {
    let sig = m.signature().clone();
    let has_mul = sig.functions().any(|(f, a)| f == "mul" && a == 2);
    let Some(one) = m.constant("1").cloned() else {
        return m.clone();
    };
    if !has_mul {
        return m.clone();
    }
    let mut table = m.function("mul").expect("validated structure").clone();
    for x in m.universe() {
        table.insert(vec![x.clone(), one.clone()], x.clone());
        table.insert(vec![one.clone(), x.clone()], x.clone());
    }
    rebuild(m, Some(("mul".to_string(), table)), BTreeMap::new())
}

/// Rebuild a structure with one function table and/or some relations
/// replaced.
fn rebuild(
    m: &Structure,
    function_override: Option<(String, BTreeMap<Vec<Element>, Element>)>,
    relation_overrides: BTreeMap<String, BTreeSet<Vec<Element>>>,
) -> Structure {
    let sig = m.signature().clone();
    let constants: BTreeMap<String, Element> = sig
        .constants()
        .map(|c| (c.to_string(), m.constant(c).expect("validated").clone()))
        .collect();
    let mut functions: BTreeMap<String, BTreeMap<Vec<Element>, Element>> = sig
        .functions()
        .map(|(f, _)| (f.to_string(), m.function(f).expect("validated").clone()))
        .collect();
    if let Some((name, table)) = function_override {
        functions.insert(name, table);
    }
    let mut relations: BTreeMap<String, BTreeSet<Vec<Element>>> = sig
        .relations()
        .map(|(r, _)| (r.to_string(), m.relation(r).expect("validated").clone()))
        .collect();
    for (name, set) in relation_overrides {
        relations.insert(name, set);
    }
    Structure::new(sig, m.universe().to_vec(), constants, functions, relations)
        .expect("rebuilt from validated parts")
}

/// Which connectives a random formula may use.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FormulaPool {
    /// Everything: ⊤, ⊥, ¬, ∧, ∨, →, ∀, ∃.
    Any,
    /// Atoms and ⊤ under ∧, ∀, ∃ — the fragment reduced products transfer.
    ConjunctiveQuantified,
    /// Atoms and ⊤ under ∧, ∨, ∃.
    ExistentialPositive,
}

fn random_term(sig: &Signature, scope: &[String], depth: usize, rng: &mut impl Rng) -> Term {
    let consts: Vec<&str> = sig.constants().collect();
    let funcs: Vec<(&str, usize)> = sig.functions().collect();
    let mut options: Vec<u8> = Vec::new();
    if !scope.is_empty() {
        options.extend([0, 0, 0]);
    }
    if !consts.is_empty() {
        options.push(1);
    }
    if depth > 0 && !funcs.is_empty() && (!scope.is_empty() || !consts.is_empty()) {
        options.push(2);
    }
    match options.choose(rng) {
        Some(0) => Term::var(scope.choose(rng).expect("scope nonempty")),
        Some(1) => Term::constant(*consts.choose(rng).expect("constants nonempty")),
        Some(2) => {
            let (f, arity) = *funcs.choose(rng).expect("functions nonempty");
            let args: Vec<Term> = (0..arity)
                .map(|_| random_term(sig, scope, depth - 1, rng))
                .collect();
            Term::app(f, args)
        }
        _ => unreachable!("no term heads available"),
    }
}

fn random_atom(sig: &Signature, scope: &[String], rng: &mut impl Rng) -> Formula {
    if scope.is_empty() && sig.constants().next().is_none() {
        return Formula::True;
    }
    let rels: Vec<(&str, usize)> = sig.relations().collect();
    if !rels.is_empty() && rng.gen_bool(0.7) {
        let (r, arity) = *rels.choose(rng).expect("relations nonempty");
        let args: Vec<Term> = (0..arity)
            .map(|_| random_term(sig, scope, 1, rng))
            .collect();
        Formula::rel(r, args)
    } else {
        Formula::equal(
            random_term(sig, scope, 1, rng),
            random_term(sig, scope, 1, rng),
        )
    }
}

fn random_formula_inner(
    sig: &Signature,
    qbudget: usize,
    scope: &mut Vec<String>,
    next_bound: &mut usize,
    size: usize,
    pool: FormulaPool,
    rng: &mut impl Rng,
) -> Formula {
    let need_binder = scope.is_empty() && sig.constants().next().is_none();
    if size == 0 || (need_binder && qbudget == 0) {
        return random_atom(sig, scope, rng);
    }
    // 0 atom, 1 and, 2 or, 3 not, 4 implies, 5 true/false, 6 forall, 7 exists
    let mut options: Vec<u8> = match pool {
        FormulaPool::Any => vec![0, 0, 1, 2, 3, 4, 5],
        FormulaPool::ConjunctiveQuantified => vec![0, 0, 1],
        FormulaPool::ExistentialPositive => vec![0, 0, 1, 2],
    };
    if qbudget > 0 {
        match pool {
            FormulaPool::Any | FormulaPool::ConjunctiveQuantified => options.extend([6, 7, 7]),
            FormulaPool::ExistentialPositive => options.extend([7, 7]),
        }
        if need_binder {
            options.retain(|o| *o >= 6);
        }
    }
    let choice = *options.choose(rng).expect("options nonempty");
    match choice {
        0 => random_atom(sig, scope, rng),
        1 | 2 | 4 => {
            let lhs = random_formula_inner(sig, qbudget, scope, next_bound, size - 1, pool, rng);
            let rhs = random_formula_inner(sig, qbudget, scope, next_bound, size - 1, pool, rng);
            match choice {
                1 => Formula::and(lhs, rhs),
                2 => Formula::or(lhs, rhs),
                _ => Formula::implies(lhs, rhs),
            }
        }
        3 => Formula::not(random_formula_inner(
            sig, qbudget, scope, next_bound, size - 1, pool, rng,
        )),
        5 => {
            if rng.gen_bool(0.5) {
                Formula::True
            } else {
                Formula::False
            }
        }
        6 | 7 => {
            let var = format!("b{}", *next_bound);
            *next_bound += 1;
            scope.push(var.clone());
            let body =
                random_formula_inner(sig, qbudget - 1, scope, next_bound, size - 1, pool, rng);
            scope.pop();
            if choice == 6 {
                Formula::forall(var, body)
            } else {
                Formula::exists(var, body)
            }
        }
        _ => unreachable!(),
    }
}

/// A random formula whose free variables come from `free`, with at most
/// `max_quantifier_depth` nested quantifiers.
pub fn random_formula(
    sig: &Signature,
    free: &[String],
    max_quantifier_depth: usize,
    size: usize,
    pool: FormulaPool,
    rng: &mut impl Rng,
) -> Formula {
    let mut scope = free.to_vec();
    let mut next_bound = 0;
    random_formula_inner(
        sig,
        max_quantifier_depth,
        &mut scope,
        &mut next_bound,
        size,
        pool,
        rng,
    )
}

/// A deduplicated corpus of `count` formulas (by printed form). Free
/// variables come from `free`; quantifier depth stays within the bound.
pub fn formula_corpus(
    sig: &Signature,
    free: &[String],
    max_quantifier_depth: usize,
    count: usize,
    pool: FormulaPool,
    rng: &mut impl Rng,
) -> Vec<Formula> {
    let mut seen = BTreeSet::new();
    let mut out = Vec::new();
    let mut attempts = 0usize;
    while out.len() < count && attempts < count.saturating_mul(400) {
        attempts += 1;
        let size = rng.gen_range(1..=4);
        let f = random_formula(sig, free, max_quantifier_depth, size, pool, rng);
        debug_assert!(f.quantifier_depth() <= max_quantifier_depth);
        if seen.insert(f.to_string()) {
            out.push(f);
        }
    }
    out
}

/// A random sentence of the shape `∀ x̄ (φ → ψ)` with φ, ψ existential
/// positive and total quantifier depth at most 2.
pub fn random_geometric_sentence(sig: &Signature, rng: &mut impl Rng) -> Formula {
    let k = rng.gen_range(0..=2usize);
    let vars: Vec<String> = (0..k).map(|i| format!("u{i}")).collect();
    let inner = 2 - k;
    let lhs = random_formula(sig, &vars, inner, 2, FormulaPool::ExistentialPositive, rng);
    let rhs = random_formula(sig, &vars, inner, 2, FormulaPool::ExistentialPositive, rng);
    let mut body = Formula::implies(lhs, rhs);
    for v in vars.iter().rev() {
        body = Formula::forall(v, body);
    }
    body
}

/// A random poset with a forced top element, hence upward directed.
pub fn random_directed_poset(max_elems: usize, rng: &mut impl Rng) -> Poset {
    let n = rng.gen_range(1..=max_elems.max(1));
    let names: Vec<String> = (0..n).map(|i| format!("p{i}")).collect();
    let top = names[n - 1].clone();
    let mut pairs: Vec<(String, String)> = Vec::new();
    for i in 0..n.saturating_sub(1) {
        pairs.push((names[i].clone(), top.clone()));
        for j in (i + 1)..n.saturating_sub(1) {
            if rng.gen_bool(0.3) {
                pairs.push((names[i].clone(), names[j].clone()));
            }
        }
    }
    Poset::from_generators(names, pairs).expect("generated order is acyclic")
}

/// Quotient a structure by a random congruence, optionally enlarge the
/// relations and pad with a fresh point, and return the new stage with the
/// collapse homomorphism onto it.
pub fn random_collapse(
    m: &Structure,
    symmetric_relations: bool,
    unit_law: bool,
    rng: &mut impl Rng,
) -> (Structure, Morphism) {
    let sig = m.signature().clone();
    let n = m.size();
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(parent: &mut Vec<usize>, x: usize) -> usize {
        if parent[x] != x {
            let r = find(parent, parent[x]);
            parent[x] = r;
        }
        parent[x]
    }
    let index_of: BTreeMap<Element, usize> = m
        .universe()
        .iter()
        .enumerate()
        .map(|(i, e)| (e.clone(), i))
        .collect();
    if n > 1 {
        for _ in 0..rng.gen_range(0..n) {
            let a = rng.gen_range(0..n);
            let b = rng.gen_range(0..n);
            let (ra, rb) = (find(&mut parent, a), find(&mut parent, b));
            parent[ra] = rb;
        }
    }
    // Close the merge under function congruence so quotient operations are
    // well-defined.
    loop {
        let mut changed = false;
        for (f, _) in sig.functions() {
            let table = m.function(f).expect("validated structure");
            let entries: Vec<(&Vec<Element>, &Element)> = table.iter().collect();
            for (args1, v1) in &entries {
                for (args2, v2) in &entries {
                    let congruent = args1.iter().zip(args2.iter()).all(|(a, b)| {
                        find(&mut parent, index_of[a]) == find(&mut parent, index_of[b])
                    });
                    if congruent {
                        let (r1, r2) = (
                            find(&mut parent, index_of[*v1]),
                            find(&mut parent, index_of[*v2]),
                        );
                        if r1 != r2 {
                            parent[r1] = r2;
                            changed = true;
                        }
                    }
                }
            }
        }
        if !changed {
            break;
        }
    }

    // Name classes in the order of their least member.
    let mut class_ids: BTreeMap<usize, usize> = BTreeMap::new();
    let mut class_of: Vec<usize> = Vec::with_capacity(n);
    for i in 0..n {
        let root = find(&mut parent, i);
        let next = class_ids.len();
        let id = *class_ids.entry(root).or_insert(next);
        class_of.push(id);
    }
    let class_count = class_ids.len();
    // Pad only when something merged, so stage sizes never grow along the
    // chain.
    let pad = class_count < n && rng.gen_bool(0.4);
    let total = class_count + usize::from(pad);
    let new_universe: Vec<Element> = (0..total).map(|i| Element::name(format!("e{i}"))).collect();
    let image = |e: &Element| new_universe[class_of[index_of[e]]].clone();

    let constants: BTreeMap<String, Element> = sig
        .constants()
        .map(|c| (c.to_string(), image(m.constant(c).expect("validated"))))
        .collect();

    let mut functions = BTreeMap::new();
    for (f, arity) in sig.functions() {
        let table = m.function(f).expect("validated structure");
        let mut new_table = BTreeMap::new();
        for args in tuples(&new_universe, arity) {
            // Preimages exist for class points; padded points get random
            // values.
            let preimage: Option<Vec<Element>> = args
                .iter()
                .map(|a| {
                    m.universe()
                        .iter()
                        .find(|e| &image(e) == a)
                        .cloned()
                })
                .collect();
            let value = match preimage {
                Some(pre) => image(&table[&pre]),
                None => new_universe.choose(rng).expect("nonempty").clone(),
            };
            new_table.insert(args, value);
        }
        functions.insert(f.to_string(), new_table);
    }

    let mut relations = BTreeMap::new();
    for (r, arity) in sig.relations() {
        let mut set: BTreeSet<Vec<Element>> = m
            .relation(r)
            .expect("validated structure")
            .iter()
            .map(|t| t.iter().map(&image).collect())
            .collect();
        for args in tuples(&new_universe, arity) {
            if !set.contains(&args) && rng.gen_bool(0.1) {
                set.insert(args);
            }
        }
        relations.insert(r.to_string(), set);
    }

    let map: BTreeMap<Element, Element> = m
        .universe()
        .iter()
        .map(|e| (e.clone(), image(e)))
        .collect();
    let mut collapsed = Structure::new(sig, new_universe, constants, functions, relations)
        .expect("quotient data is well-formed");
    if symmetric_relations {
        collapsed = symmetric_closure(&collapsed);
    }
    if unit_law {
        collapsed = impose_unit_law(&collapsed);
    }
    let h = Morphism::new(m.clone(), collapsed.clone(), map).expect("collapse is total");
    debug_assert!(h.is_homomorphism());
    (collapsed, h)
}

/// Longest-chain-below heights; strictly monotone along the strict order.
fn heights(p: &Poset) -> BTreeMap<String, usize> {
    let mut h: BTreeMap<String, usize> = p.elements().iter().map(|e| (e.clone(), 0)).collect();
    loop {
        let mut changed = false;
        for i in p.elements() {
            let best = p
                .elements()
                .iter()
                .filter(|j| *j != i && p.le(j, i))
                .map(|j| h[j] + 1)
                .max()
                .unwrap_or(0);
            if h[i] != best {
                h.insert(i.clone(), best);
                changed = true;
            }
        }
        if !changed {
            return h;
        }
    }
}

/// Shape parameters for a random cofiltered diagram.
#[derive(Debug, Clone)]
pub struct DiagramProfile {
    pub max_object_size: usize,
    pub edge_density: f64,
    pub symmetric_relations: bool,
    pub unit_law: bool,
}

impl DiagramProfile {
    pub fn new(max_object_size: usize) -> Self {
        DiagramProfile {
            max_object_size,
            edge_density: 0.4,
            symmetric_relations: false,
            unit_law: false,
        }
    }
}

/// A random functorial cofiltered diagram over the given directed poset.
///
/// One chain of collapse steps `T_L → … → T_0` is generated, each index is
/// assigned the stage at its height, and every diagram map is a composite of
/// chain steps — so the functor laws hold by construction and the
/// constructor's exhaustive check cannot fail.
pub fn random_cofiltered_diagram(
    sig: &Signature,
    poset: &Poset,
    profile: &DiagramProfile,
    rng: &mut impl Rng,
) -> CofilteredDiagram {
    let hs = heights(poset);
    let levels = hs.values().copied().max().unwrap_or(0);
    let top_profile = StructureProfile {
        size: rng.gen_range(1..=profile.max_object_size.max(1)),
        edge_density: profile.edge_density,
        symmetric_relations: profile.symmetric_relations,
        unit_law: profile.unit_law,
    };
    let mut chain: Vec<Structure> = vec![random_structure(sig, &top_profile, rng)];
    let mut steps: Vec<Morphism> = Vec::new(); // steps[k] : chain[k+1] → chain[k], reversed below
    for _ in 0..levels {
        let (next, h) = random_collapse(
            chain.last().expect("chain nonempty"),
            profile.symmetric_relations,
            profile.unit_law,
            rng,
        );
        chain.push(next);
        steps.push(h);
    }
    chain.reverse(); // chain[level], with the top stage at chain[levels]
    steps.reverse();
    let step_down = |k: usize| &steps[k - 1]; // chain[k] → chain[k-1]

    let mut objects = BTreeMap::new();
    for i in poset.elements() {
        objects.insert(i.clone(), chain[hs[i]].clone());
    }
    let mut maps = BTreeMap::new();
    for j in poset.elements() {
        for i in poset.elements() {
            if i == j || !poset.le(i, j) {
                continue;
            }
            let (hi, hj) = (hs[i], hs[j]);
            let mut m = Morphism::identity(&chain[hj]);
            for k in ((hi + 1)..=hj).rev() {
                m = step_down(k).compose(&m).expect("chain endpoints line up");
            }
            maps.insert((j.clone(), i.clone()), m);
        }
    }
    CofilteredDiagram::new(poset.clone(), objects, maps)
        .expect("chain composites are functorial")
}
