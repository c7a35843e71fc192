//! First-order syntax over finite signatures: terms, formulas, a concrete
//! grammar (parser + printer), and the syntactic fragment classifiers.

mod parser;
mod probes;

pub use parser::{parse_formula, ParseError};
pub use probes::{enumerate_pp_probes, PpBudget, PpProbe};

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use thiserror::Error;

/// A finite first-order signature: constant symbols, function symbols with
/// arity, relation symbols with arity. Names are unique across all three
/// kinds, and function/relation arities are at least 1.
#[derive(Debug, Clone, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Signature {
    constants: BTreeSet<String>,
    functions: BTreeMap<String, usize>,
    relations: BTreeMap<String, usize>,
}

/// Rejected signature declarations.
#[derive(Debug, Error, PartialEq, Eq)]
pub enum SignatureError {
    #[error("symbol `{0}` is declared more than once")]
    DuplicateSymbol(String),
    #[error("symbol `{0}` must have arity at least 1")]
    ZeroArity(String),
}

impl Signature {
    pub fn new<C, F, R>(constants: C, functions: F, relations: R) -> Result<Self, SignatureError>
    where
        C: IntoIterator<Item = String>,
        F: IntoIterator<Item = (String, usize)>,
        R: IntoIterator<Item = (String, usize)>,
    {
        let mut sig = Signature::default();
        for c in constants {
            if sig.is_declared(&c) {
                return Err(SignatureError::DuplicateSymbol(c));
            }
            sig.constants.insert(c);
        }
        for (f, arity) in functions {
            if sig.is_declared(&f) {
                return Err(SignatureError::DuplicateSymbol(f));
            }
            if arity == 0 {
                return Err(SignatureError::ZeroArity(f));
            }
            sig.functions.insert(f, arity);
        }
        for (r, arity) in relations {
            if sig.is_declared(&r) {
                return Err(SignatureError::DuplicateSymbol(r));
            }
            if arity == 0 {
                return Err(SignatureError::ZeroArity(r));
            }
            sig.relations.insert(r, arity);
        }
        Ok(sig)
    }

    /// The signature of directed graphs: one binary relation `E`.
    pub fn graph() -> Self {
        Signature::new([], [], [("E".to_string(), 2)]).unwrap()
    }

    /// The signature with constants `1` and `-1`, a binary operation `mul`,
    /// and a quaternary relation `equiv`.
    pub fn special_group() -> Self {
        Signature::new(
            ["1".to_string(), "-1".to_string()],
            [("mul".to_string(), 2)],
            [("equiv".to_string(), 4)],
        )
        .unwrap()
    }

    pub fn constants(&self) -> impl Iterator<Item = &str> {
        self.constants.iter().map(|s| s.as_str())
    }

    pub fn functions(&self) -> impl Iterator<Item = (&str, usize)> {
        self.functions.iter().map(|(s, &a)| (s.as_str(), a))
    }

    pub fn relations(&self) -> impl Iterator<Item = (&str, usize)> {
        self.relations.iter().map(|(s, &a)| (s.as_str(), a))
    }

    pub fn is_constant(&self, name: &str) -> bool {
        self.constants.contains(name)
    }

    pub fn function_arity(&self, name: &str) -> Option<usize> {
        self.functions.get(name).copied()
    }

    pub fn relation_arity(&self, name: &str) -> Option<usize> {
        self.relations.get(name).copied()
    }

    pub fn is_declared(&self, name: &str) -> bool {
        self.constants.contains(name)
            || self.functions.contains_key(name)
            || self.relations.contains_key(name)
    }

    pub fn has_constants(&self) -> bool {
        !self.constants.is_empty()
    }
}

/// A first-order term.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Term {
    Var(String),
    Const(String),
    App(String, Vec<Term>),
}

impl Term {
    pub fn var(name: impl Into<String>) -> Self {
        Term::Var(name.into())
    }

    pub fn constant(name: impl Into<String>) -> Self {
        Term::Const(name.into())
    }

    pub fn app(name: impl Into<String>, args: Vec<Term>) -> Self {
        Term::App(name.into(), args)
    }

    fn collect_vars(&self, out: &mut BTreeSet<String>) {
        match self {
            Term::Var(v) => {
                out.insert(v.clone());
            }
            Term::Const(_) => {}
            Term::App(_, args) => args.iter().for_each(|t| t.collect_vars(out)),
        }
    }
}

impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Term::Var(v) => write!(f, "{v}"),
            Term::Const(c) => write!(f, "{c}"),
            Term::App(g, args) => {
                write!(f, "{g}(")?;
                for (k, a) in args.iter().enumerate() {
                    if k > 0 {
                        write!(f, ",")?;
                    }
                    write!(f, "{a}")?;
                }
                write!(f, ")")
            }
        }
    }
}

/// A first-order formula. `True` and `False` are admitted as degenerate
/// connectives; see [`classify`] for how they interact with the fragments.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Formula {
    True,
    False,
    Equal(Term, Term),
    Rel(String, Vec<Term>),
    And(Box<Formula>, Box<Formula>),
    Or(Box<Formula>, Box<Formula>),
    Not(Box<Formula>),
    Implies(Box<Formula>, Box<Formula>),
    Forall(String, Box<Formula>),
    Exists(String, Box<Formula>),
}

impl Formula {
    pub fn and(a: Formula, b: Formula) -> Self {
        Formula::And(Box::new(a), Box::new(b))
    }

    pub fn or(a: Formula, b: Formula) -> Self {
        Formula::Or(Box::new(a), Box::new(b))
    }

    #[allow(clippy::should_implement_trait)]
    pub fn not(a: Formula) -> Self {
        Formula::Not(Box::new(a))
    }

    pub fn implies(a: Formula, b: Formula) -> Self {
        Formula::Implies(Box::new(a), Box::new(b))
    }

    pub fn forall(v: impl Into<String>, a: Formula) -> Self {
        Formula::Forall(v.into(), Box::new(a))
    }

    pub fn exists(v: impl Into<String>, a: Formula) -> Self {
        Formula::Exists(v.into(), Box::new(a))
    }

    pub fn rel(name: impl Into<String>, args: Vec<Term>) -> Self {
        Formula::Rel(name.into(), args)
    }

    pub fn equal(a: Term, b: Term) -> Self {
        Formula::Equal(a, b)
    }

    /// Conjunction of a list; the empty conjunction is `True`.
    pub fn conjoin(parts: impl IntoIterator<Item = Formula>) -> Formula {
        let mut it = parts.into_iter();
        match it.next() {
            None => Formula::True,
            Some(first) => it.fold(first, Formula::and),
        }
    }

    /// Disjunction of a list; the empty disjunction is `False`.
    pub fn disjoin(parts: impl IntoIterator<Item = Formula>) -> Formula {
        let mut it = parts.into_iter();
        match it.next() {
            None => Formula::False,
            Some(first) => it.fold(first, Formula::or),
        }
    }

    pub fn is_sentence(&self) -> bool {
        self.free_variables().is_empty()
    }

    /// Quantifier nesting depth.
    pub fn quantifier_depth(&self) -> usize {
        match self {
            Formula::True | Formula::False | Formula::Equal(..) | Formula::Rel(..) => 0,
            Formula::Not(a) => a.quantifier_depth(),
            Formula::And(a, b) | Formula::Or(a, b) | Formula::Implies(a, b) => {
                a.quantifier_depth().max(b.quantifier_depth())
            }
            Formula::Forall(_, a) | Formula::Exists(_, a) => 1 + a.quantifier_depth(),
        }
    }
}

/// Where a formula sits in the syntactic fragment hierarchy.
///
/// The chain `is_positive_primitive => is_existential_positive => is_positive`
/// always holds, and atomic formulas satisfy all three.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FormulaClass {
    /// An equality or a relation atom.
    pub is_atomic: bool,
    /// Built from atoms and `true` by `&`, `|` and both quantifiers.
    pub is_positive: bool,
    /// Built from atoms and `true` by `&`, `|` and `exists`.
    pub is_existential_positive: bool,
    /// An `exists`-prefix over a conjunction of atoms (and `true`).
    pub is_positive_primitive: bool,
    /// A `forall`-prefix over an implication between existential-positive
    /// formulas.
    pub is_geometric_axiom: bool,
}

/// Classify a formula into the syntactic fragments.
///
/// `true` belongs to every positive fragment (it is the empty conjunction);
/// `false` belongs to none of them. Implication and negation are barred from
/// all positive fragments.
///
/// ```
/// use lmod::formulas::{classify, parse_formula, Signature};
///
/// let sig = Signature::graph();
/// let f = parse_formula("exists x. E(x,x) | x = y", &sig).unwrap();
/// let class = classify(&f);
/// assert!(class.is_existential_positive && !class.is_positive_primitive);
/// ```
pub fn classify(f: &Formula) -> FormulaClass {
    FormulaClass {
        is_atomic: matches!(f, Formula::Equal(..) | Formula::Rel(..)),
        is_positive: is_positive(f),
        is_existential_positive: is_existential_positive(f),
        is_positive_primitive: is_positive_primitive(f),
        is_geometric_axiom: is_geometric_axiom(f),
    }
}

fn is_positive(f: &Formula) -> bool {
    match f {
        Formula::True | Formula::Equal(..) | Formula::Rel(..) => true,
        Formula::False | Formula::Not(_) | Formula::Implies(..) => false,
        Formula::And(a, b) | Formula::Or(a, b) => is_positive(a) && is_positive(b),
        Formula::Forall(_, a) | Formula::Exists(_, a) => is_positive(a),
    }
}

fn is_existential_positive(f: &Formula) -> bool {
    match f {
        Formula::True | Formula::Equal(..) | Formula::Rel(..) => true,
        Formula::And(a, b) | Formula::Or(a, b) => {
            is_existential_positive(a) && is_existential_positive(b)
        }
        Formula::Exists(_, a) => is_existential_positive(a),
        _ => false,
    }
}

fn is_atom_conjunction(f: &Formula) -> bool {
    match f {
        Formula::True | Formula::Equal(..) | Formula::Rel(..) => true,
        Formula::And(a, b) => is_atom_conjunction(a) && is_atom_conjunction(b),
        _ => false,
    }
}

fn is_positive_primitive(f: &Formula) -> bool {
    let mut body = f;
    while let Formula::Exists(_, inner) = body {
        body = inner;
    }
    is_atom_conjunction(body)
}

fn is_geometric_axiom(f: &Formula) -> bool {
    let mut body = f;
    while let Formula::Forall(_, inner) = body {
        body = inner;
    }
    match body {
        Formula::Implies(l, r) => is_existential_positive(l) && is_existential_positive(r),
        _ => false,
    }
}

/// Formulas admitted by the filter-sided satisfaction transfer: built from
/// atoms and `true` by conjunction and both quantifiers, with no disjunction,
/// negation or implication.
pub fn is_conjunctive_quantified(f: &Formula) -> bool {
    match f {
        Formula::True | Formula::Equal(..) | Formula::Rel(..) => true,
        Formula::And(a, b) => is_conjunctive_quantified(a) && is_conjunctive_quantified(b),
        Formula::Forall(_, a) | Formula::Exists(_, a) => is_conjunctive_quantified(a),
        _ => false,
    }
}

impl Formula {
    /// The set of free variables.
    pub fn free_variables(&self) -> BTreeSet<String> {
        fn go(f: &Formula, bound: &mut Vec<String>, out: &mut BTreeSet<String>) {
            match f {
                Formula::True | Formula::False => {}
                Formula::Equal(a, b) => {
                    let mut vars = BTreeSet::new();
                    a.collect_vars(&mut vars);
                    b.collect_vars(&mut vars);
                    out.extend(vars.into_iter().filter(|v| !bound.contains(v)));
                }
                Formula::Rel(_, args) => {
                    let mut vars = BTreeSet::new();
                    args.iter().for_each(|t| t.collect_vars(&mut vars));
                    out.extend(vars.into_iter().filter(|v| !bound.contains(v)));
                }
                Formula::Not(a) => go(a, bound, out),
                Formula::And(a, b) | Formula::Or(a, b) | Formula::Implies(a, b) => {
                    go(a, bound, out);
                    go(b, bound, out);
                }
                Formula::Forall(v, a) | Formula::Exists(v, a) => {
                    bound.push(v.clone());
                    go(a, bound, out);
                    bound.pop();
                }
            }
        }
        let mut out = BTreeSet::new();
        go(self, &mut Vec::new(), &mut out);
        out
    }

    /// All variable names occurring anywhere, free or bound.
    pub fn all_variable_names(&self) -> BTreeSet<String> {
        fn go(f: &Formula, out: &mut BTreeSet<String>) {
            match f {
                Formula::True | Formula::False => {}
                Formula::Equal(a, b) => {
                    a.collect_vars(out);
                    b.collect_vars(out);
                }
                Formula::Rel(_, args) => args.iter().for_each(|t| t.collect_vars(out)),
                Formula::Not(a) => go(a, out),
                Formula::And(a, b) | Formula::Or(a, b) | Formula::Implies(a, b) => {
                    go(a, out);
                    go(b, out);
                }
                Formula::Forall(v, a) | Formula::Exists(v, a) => {
                    out.insert(v.clone());
                    go(a, out);
                }
            }
        }
        let mut out = BTreeSet::new();
        go(self, &mut out);
        out
    }

    /// Check that every symbol is declared with the right arity and that no
    /// variable (free or bound) shadows a declared symbol name.
    pub fn validate(&self, sig: &Signature) -> Result<(), FormulaError> {
        fn term(t: &Term, sig: &Signature) -> Result<(), FormulaError> {
            match t {
                Term::Var(v) => {
                    if sig.is_declared(v) {
                        return Err(FormulaError::VariableShadowsSymbol(v.clone()));
                    }
                    Ok(())
                }
                Term::Const(c) => {
                    if !sig.is_constant(c) {
                        return Err(FormulaError::UndeclaredSymbol(c.clone()));
                    }
                    Ok(())
                }
                Term::App(f, args) => {
                    let arity = sig
                        .function_arity(f)
                        .ok_or_else(|| FormulaError::UndeclaredSymbol(f.clone()))?;
                    if args.len() != arity {
                        return Err(FormulaError::ArityMismatch {
                            symbol: f.clone(),
                            expected: arity,
                            found: args.len(),
                        });
                    }
                    args.iter().try_for_each(|a| term(a, sig))
                }
            }
        }
        fn go(f: &Formula, sig: &Signature) -> Result<(), FormulaError> {
            match f {
                Formula::True | Formula::False => Ok(()),
                Formula::Equal(a, b) => {
                    term(a, sig)?;
                    term(b, sig)
                }
                Formula::Rel(r, args) => {
                    let arity = sig
                        .relation_arity(r)
                        .ok_or_else(|| FormulaError::UndeclaredSymbol(r.clone()))?;
                    if args.len() != arity {
                        return Err(FormulaError::ArityMismatch {
                            symbol: r.clone(),
                            expected: arity,
                            found: args.len(),
                        });
                    }
                    args.iter().try_for_each(|a| term(a, sig))
                }
                Formula::Not(a) => go(a, sig),
                Formula::And(a, b) | Formula::Or(a, b) | Formula::Implies(a, b) => {
                    go(a, sig)?;
                    go(b, sig)
                }
                Formula::Forall(v, a) | Formula::Exists(v, a) => {
                    if sig.is_declared(v) {
                        return Err(FormulaError::VariableShadowsSymbol(v.clone()));
                    }
                    go(a, sig)
                }
            }
        }
        go(self, sig)
    }
}

/// Structural problems with a formula relative to a signature.
#[derive(Debug, Error, PartialEq, Eq)]
pub enum FormulaError {
    #[error("symbol `{0}` is not declared in the signature")]
    UndeclaredSymbol(String),
    #[error("symbol `{symbol}` expects {expected} arguments, found {found}")]
    ArityMismatch {
        symbol: String,
        expected: usize,
        found: usize,
    },
    #[error("variable `{0}` shadows a declared symbol")]
    VariableShadowsSymbol(String),
    #[error("formula is not existential-positive")]
    NotExistentialPositive,
}

// Printing uses the same grammar the parser accepts: `->` binds loosest and
// associates right, then `|`, then `&`, then `~`; quantifier bodies extend as
// far right as possible. `needs_guard` is true when more operator tokens
// follow the subformula being printed, in which case a trailing quantifier
// body would capture them and must be parenthesized.
impl fmt::Display for Formula {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fn print(
            form: &Formula,
            ctx: u8,
            needs_guard: bool,
            out: &mut fmt::Formatter<'_>,
        ) -> fmt::Result {
            match form {
                Formula::True => write!(out, "true"),
                Formula::False => write!(out, "false"),
                Formula::Equal(a, b) => write!(out, "{a} = {b}"),
                Formula::Rel(r, args) => {
                    write!(out, "{r}(")?;
                    for (k, a) in args.iter().enumerate() {
                        if k > 0 {
                            write!(out, ",")?;
                        }
                        write!(out, "{a}")?;
                    }
                    write!(out, ")")
                }
                Formula::Implies(a, b) => {
                    let parens = ctx > 1;
                    if parens {
                        write!(out, "(")?;
                    }
                    print(a, 2, true, out)?;
                    write!(out, " -> ")?;
                    print(b, 1, needs_guard && !parens, out)?;
                    if parens {
                        write!(out, ")")?;
                    }
                    Ok(())
                }
                Formula::Or(a, b) => {
                    let parens = ctx > 2;
                    if parens {
                        write!(out, "(")?;
                    }
                    print(a, 2, true, out)?;
                    write!(out, " | ")?;
                    print(b, 3, needs_guard && !parens, out)?;
                    if parens {
                        write!(out, ")")?;
                    }
                    Ok(())
                }
                Formula::And(a, b) => {
                    let parens = ctx > 3;
                    if parens {
                        write!(out, "(")?;
                    }
                    print(a, 3, true, out)?;
                    write!(out, " & ")?;
                    print(b, 4, needs_guard && !parens, out)?;
                    if parens {
                        write!(out, ")")?;
                    }
                    Ok(())
                }
                Formula::Not(a) => {
                    write!(out, "~")?;
                    print(a, 4, needs_guard, out)
                }
                Formula::Forall(v, a) | Formula::Exists(v, a) => {
                    let word = if matches!(form, Formula::Forall(..)) {
                        "forall"
                    } else {
                        "exists"
                    };
                    if needs_guard {
                        write!(out, "({word} {v}. ")?;
                        print(a, 0, false, out)?;
                        write!(out, ")")
                    } else {
                        write!(out, "{word} {v}. ")?;
                        print(a, 0, false, out)
                    }
                }
            }
        }
        print(self, 0, false, f)
    }
}

/// Rewrite an existential-positive formula into a finite disjunction of
/// positive-primitive formulas, each equivalent branchwise and jointly
/// equivalent to the input. Bound variables are renamed apart first, so the
/// output may differ from the input up to renaming.
///
/// ```
/// use lmod::formulas::{ep_to_pp_disjunction, parse_formula, Signature};
///
/// let sig = Signature::graph();
/// let f = parse_formula("exists x. E(x,x) | x = y", &sig).unwrap();
/// let parts = ep_to_pp_disjunction(&f).unwrap();
/// assert_eq!(parts.len(), 2);
/// ```
pub fn ep_to_pp_disjunction(f: &Formula) -> Result<Vec<Formula>, FormulaError> {
    if !is_existential_positive(f) {
        return Err(FormulaError::NotExistentialPositive);
    }
    let renamed = rename_bound_apart(f);
    let parts = pp_parts(&renamed);
    Ok(parts
        .into_iter()
        .map(|(prefix, matrix)| {
            prefix
                .into_iter()
                .rev()
                .fold(matrix, |body, v| Formula::exists(v, body))
        })
        .collect())
}

/// Rename bound variables so no name is bound twice or both free and bound.
fn rename_bound_apart(f: &Formula) -> Formula {
    fn fresh(base: &str, used: &BTreeSet<String>) -> String {
        (1..)
            .map(|k| format!("{base}_{k}"))
            .find(|cand| !used.contains(cand))
            .expect("unbounded fresh name supply")
    }
    fn sub_term(t: &Term, env: &[(String, String)]) -> Term {
        match t {
            Term::Var(v) => {
                let name = env
                    .iter()
                    .rev()
                    .find(|(from, _)| from == v)
                    .map(|(_, to)| to.clone())
                    .unwrap_or_else(|| v.clone());
                Term::Var(name)
            }
            Term::Const(_) => t.clone(),
            Term::App(g, args) => {
                Term::App(g.clone(), args.iter().map(|a| sub_term(a, env)).collect())
            }
        }
    }
    fn go(f: &Formula, env: &mut Vec<(String, String)>, used: &mut BTreeSet<String>) -> Formula {
        match f {
            Formula::True | Formula::False => f.clone(),
            Formula::Equal(a, b) => Formula::Equal(sub_term(a, env), sub_term(b, env)),
            Formula::Rel(r, args) => {
                Formula::Rel(r.clone(), args.iter().map(|a| sub_term(a, env)).collect())
            }
            Formula::Not(a) => Formula::not(go(a, env, used)),
            Formula::And(a, b) => Formula::and(go(a, env, used), go(b, env, used)),
            Formula::Or(a, b) => Formula::or(go(a, env, used), go(b, env, used)),
            Formula::Implies(a, b) => Formula::implies(go(a, env, used), go(b, env, used)),
            Formula::Forall(v, a) | Formula::Exists(v, a) => {
                let name = if used.contains(v) {
                    fresh(v, used)
                } else {
                    v.clone()
                };
                used.insert(name.clone());
                env.push((v.clone(), name.clone()));
                let body = go(a, env, used);
                env.pop();
                if matches!(f, Formula::Forall(..)) {
                    Formula::forall(name, body)
                } else {
                    Formula::exists(name, body)
                }
            }
        }
    }
    let mut used = f.free_variables();
    go(f, &mut Vec::new(), &mut used)
}

/// Decompose a renamed-apart existential-positive formula into branches
/// `(existential prefix, conjunction of atoms)`. Distributes `&` over `|`
/// and pushes `exists` inward over `|`; the apartness of bound names makes
/// prefix concatenation across `&` sound.
fn pp_parts(f: &Formula) -> Vec<(Vec<String>, Formula)> {
    match f {
        Formula::True | Formula::Equal(..) | Formula::Rel(..) => vec![(Vec::new(), f.clone())],
        Formula::Or(a, b) => {
            let mut parts = pp_parts(a);
            parts.extend(pp_parts(b));
            parts
        }
        Formula::And(a, b) => {
            let left = pp_parts(a);
            let right = pp_parts(b);
            let mut parts = Vec::with_capacity(left.len() * right.len());
            for (lp, lm) in &left {
                for (rp, rm) in &right {
                    let mut prefix = lp.clone();
                    prefix.extend(rp.iter().cloned());
                    parts.push((prefix, Formula::and(lm.clone(), rm.clone())));
                }
            }
            parts
        }
        Formula::Exists(v, a) => pp_parts(a)
            .into_iter()
            .map(|(mut prefix, matrix)| {
                prefix.insert(0, v.clone());
                (prefix, matrix)
            })
            .collect(),
        _ => unreachable!("input checked existential-positive"),
    }
}

/// All atomic formulas over `sig` whose arguments are drawn from `vars`:
/// every relation atom and every equality (including trivial ones).
pub fn atomic_formulas(sig: &Signature, vars: &[String]) -> Vec<Formula> {
    let terms: Vec<Term> = vars.iter().map(Term::var).collect();
    let mut out = Vec::new();
    for (r, arity) in sig.relations() {
        let mut stack = vec![Vec::new()];
        for _ in 0..arity {
            let mut next = Vec::new();
            for partial in stack {
                for t in &terms {
                    let mut ext: Vec<Term> = partial.clone();
                    ext.push(t.clone());
                    next.push(ext);
                }
            }
            stack = next;
        }
        out.extend(stack.into_iter().map(|args| Formula::rel(r, args)));
    }
    for (i, a) in terms.iter().enumerate() {
        for b in terms.iter().skip(i) {
            out.push(Formula::equal(a.clone(), b.clone()));
        }
    }
    out
}
