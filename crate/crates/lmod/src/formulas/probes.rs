//! Bounded enumeration of positive-primitive probe formulas.
//!
//! The purity check needs every positive-primitive formula inside a finite
//! budget. Probes are kept in a flat shape: relation atoms take depth-0
//! arguments (variables and constants) and equalities may additionally nest
//! one function application per side. Deeper terms can always be recovered
//! by spending existential variables on the flat equalities, so the flat
//! shape loses nothing as budgets grow.

use super::{Formula, Signature, Term};
use itertools::Itertools;

/// Size limits for probe enumeration.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PpBudget {
    /// Maximum number of free variables `x1..xm`.
    pub max_free: usize,
    /// Maximum number of existential variables `y1..yk`.
    pub max_existential: usize,
    /// Maximum number of conjoined atoms.
    pub max_atoms: usize,
    /// Maximum term nesting depth inside equality atoms.
    pub max_term_depth: usize,
}

impl PpBudget {
    /// The budget used by `is_pure(h, bound)`: `bound` everywhere, with
    /// single-application terms.
    pub fn uniform(bound: usize) -> Self {
        PpBudget {
            max_free: bound,
            max_existential: bound,
            max_atoms: bound,
            max_term_depth: 1,
        }
    }
}

/// A positive-primitive formula together with its free variables in
/// canonical order `x1, x2, ..`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PpProbe {
    pub free: Vec<String>,
    pub formula: Formula,
}

fn terms_by_depth(sig: &Signature, vars: &[String], max_depth: usize) -> Vec<Vec<Term>> {
    let mut depth0: Vec<Term> = vars.iter().map(Term::var).collect();
    depth0.extend(sig.constants().map(Term::constant));
    let mut levels = vec![depth0];
    for _ in 1..=max_depth {
        let prev: Vec<Term> = levels.concat();
        let mut level = Vec::new();
        for (f, arity) in sig.functions() {
            for args in (0..arity).map(|_| prev.iter()).multi_cartesian_product() {
                let args: Vec<Term> = args.into_iter().cloned().collect();
                let term = Term::app(f, args);
                if !levels.iter().any(|l| l.contains(&term)) {
                    level.push(term);
                }
            }
        }
        levels.push(level);
    }
    levels
}

fn ordered_vars_of_term(t: &Term, out: &mut Vec<String>) {
    match t {
        Term::Var(v) => {
            if !out.contains(v) {
                out.push(v.clone());
            }
        }
        Term::Const(_) => {}
        Term::App(_, args) => args.iter().for_each(|a| ordered_vars_of_term(a, out)),
    }
}

fn ordered_vars_of_atom(f: &Formula) -> Vec<String> {
    let mut out = Vec::new();
    match f {
        Formula::Equal(a, b) => {
            ordered_vars_of_term(a, &mut out);
            ordered_vars_of_term(b, &mut out);
        }
        Formula::Rel(_, args) => args.iter().for_each(|a| ordered_vars_of_term(a, &mut out)),
        _ => unreachable!("atoms only"),
    }
    out
}

/// Enumerate, deterministically, every positive-primitive probe inside the
/// budget, up to renaming of the existential variables. Every listed free
/// and existential variable occurs in the matrix.
pub fn enumerate_pp_probes(sig: &Signature, budget: &PpBudget) -> Vec<PpProbe> {
    let mut out = Vec::new();
    for m in 0..=budget.max_free {
        for k in 0..=budget.max_existential {
            let free: Vec<String> = (1..=m).map(|i| format!("x{i}")).collect();
            let bound: Vec<String> = (1..=k).map(|i| format!("y{i}")).collect();
            let mut vars = free.clone();
            vars.extend(bound.iter().cloned());

            let levels = terms_by_depth(sig, &vars, budget.max_term_depth);
            let shallow = &levels[0];
            let all_terms: Vec<Term> = levels.concat();

            let mut atoms: Vec<Formula> = Vec::new();
            for (r, arity) in sig.relations() {
                for args in (0..arity).map(|_| shallow.iter()).multi_cartesian_product() {
                    atoms.push(Formula::Rel(
                        r.to_string(),
                        args.into_iter().cloned().collect(),
                    ));
                }
            }
            for lhs in &all_terms {
                for rhs in shallow {
                    if lhs == rhs {
                        continue;
                    }
                    // Unordered when both sides are shallow.
                    if shallow.contains(lhs) && lhs > rhs {
                        continue;
                    }
                    atoms.push(Formula::Equal(lhs.clone(), rhs.clone()));
                }
            }

            for size in 1..=budget.max_atoms {
                for combo in (0..atoms.len()).combinations(size) {
                    let chosen: Vec<&Formula> = combo.iter().map(|&i| &atoms[i]).collect();
                    if !covers_all_vars_canonically(&chosen, &free, &bound) {
                        continue;
                    }
                    let matrix = Formula::conjoin(chosen.into_iter().cloned());
                    let formula = bound
                        .iter()
                        .rev()
                        .fold(matrix, |body, v| Formula::exists(v.clone(), body));
                    out.push(PpProbe {
                        free: free.clone(),
                        formula,
                    });
                }
            }
        }
    }
    out
}

/// Every free and bound variable occurs, and the bound variables make their
/// first appearances in index order (canonical representative of the
/// renaming class).
fn covers_all_vars_canonically(atoms: &[&Formula], free: &[String], bound: &[String]) -> bool {
    let mut seen_bound: Vec<String> = Vec::new();
    let mut seen_free = std::collections::BTreeSet::new();
    for atom in atoms {
        for v in ordered_vars_of_atom(atom) {
            if free.contains(&v) {
                seen_free.insert(v);
            } else if !seen_bound.contains(&v) {
                seen_bound.push(v);
            }
        }
    }
    seen_bound == *bound && seen_free.len() == free.len()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::formulas::classify;

    #[test]
    fn probes_are_positive_primitive_and_within_budget() {
        let sig = Signature::graph();
        let probes = enumerate_pp_probes(&sig, &PpBudget::uniform(2));
        assert!(!probes.is_empty());
        for p in &probes {
            assert!(classify(&p.formula).is_positive_primitive, "{}", p.formula);
            assert!(p.formula.quantifier_depth() <= 2);
            let fv = p.formula.free_variables();
            assert_eq!(fv.len(), p.free.len());
            for v in &p.free {
                assert!(fv.contains(v));
            }
        }
    }

    #[test]
    fn budget_one_contains_the_loop_probe() {
        let sig = Signature::graph();
        let probes = enumerate_pp_probes(&sig, &PpBudget::uniform(1));
        let loop_probe = crate::formulas::parse_formula("exists y1. E(y1,y1)", &sig).unwrap();
        assert!(probes.iter().any(|p| p.formula == loop_probe));
    }

    #[test]
    fn bound_variables_are_canonically_ordered() {
        let sig = Signature::graph();
        let probes = enumerate_pp_probes(&sig, &PpBudget::uniform(2));
        // No probe should differ from another only by swapping y1 and y2.
        let texts: std::collections::BTreeSet<String> =
            probes.iter().map(|p| p.formula.to_string()).collect();
        assert_eq!(texts.len(), probes.len());
        // E(y2,y1) with y2 introduced first is not canonical.
        assert!(!texts.contains("exists y1. exists y2. E(y2,y1)"));
    }

    #[test]
    fn function_signature_probes_include_graph_equalities() {
        let sig = Signature::special_group();
        let probes = enumerate_pp_probes(&sig, &PpBudget::uniform(1));
        let want = crate::formulas::parse_formula("mul(x1,x1) = x1", &sig).unwrap();
        assert!(probes.iter().any(|p| p.formula == want));
    }
}
