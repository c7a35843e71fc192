//! Finite partial orders and filters of subsets of a finite index set.

use std::collections::BTreeSet;
use thiserror::Error;

/// Order-side failures.
#[derive(Debug, Error, PartialEq, Eq)]
pub enum OrderError {
    #[error("index `{0}` appears twice")]
    DuplicateIndex(String),
    #[error("unknown index `{0}`")]
    UnknownIndex(String),
    #[error("order is not reflexive at `{0}`")]
    NotReflexive(String),
    #[error("order is not transitive: `{0}` <= `{1}` <= `{2}` but not `{0}` <= `{2}`")]
    NotTransitive(String, String, String),
    #[error("order is not antisymmetric: `{0}` <= `{1}` and `{1}` <= `{0}`")]
    NotAntisymmetric(String, String),
    #[error("filter base may not be empty")]
    EmptyBase,
    #[error("base element `{0}` is outside the index set")]
    BaseOutsideIndexSet(String),
    #[error("filter index set does not match the poset")]
    IndexSetMismatch,
    #[error("poset is not upward directed")]
    NotDirected,
}

/// A finite poset over named indices. The relation is stored in full:
/// reflexive, transitive and antisymmetric.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Poset {
    elements: Vec<String>,
    leq: BTreeSet<(String, String)>,
}

impl Poset {
    /// Build from the full relation; rejects non-posets.
    pub fn new<I, P>(elements: I, leq: P) -> Result<Self, OrderError>
    where
        I: IntoIterator<Item = String>,
        P: IntoIterator<Item = (String, String)>,
    {
        let elements: Vec<String> = elements.into_iter().collect();
        let mut seen = BTreeSet::new();
        for e in &elements {
            if !seen.insert(e.clone()) {
                return Err(OrderError::DuplicateIndex(e.clone()));
            }
        }
        let leq: BTreeSet<(String, String)> = leq.into_iter().collect();
        for (a, b) in &leq {
            for x in [a, b] {
                if !seen.contains(x) {
                    return Err(OrderError::UnknownIndex(x.clone()));
                }
            }
        }
        for e in &elements {
            if !leq.contains(&(e.clone(), e.clone())) {
                return Err(OrderError::NotReflexive(e.clone()));
            }
        }
        for (a, b) in &leq {
            for (b2, c) in &leq {
                if b == b2 && !leq.contains(&(a.clone(), c.clone())) {
                    return Err(OrderError::NotTransitive(a.clone(), b.clone(), c.clone()));
                }
            }
        }
        for (a, b) in &leq {
            if a != b && leq.contains(&(b.clone(), a.clone())) {
                return Err(OrderError::NotAntisymmetric(a.clone(), b.clone()));
            }
        }
        Ok(Poset { elements, leq })
    }

    /// Build from generating pairs by reflexive-transitive closure; rejects
    /// the result if antisymmetry fails.
    pub fn from_generators<I, P>(elements: I, pairs: P) -> Result<Self, OrderError>
    where
        I: IntoIterator<Item = String>,
        P: IntoIterator<Item = (String, String)>,
    {
        let elements: Vec<String> = elements.into_iter().collect();
        let mut leq: BTreeSet<(String, String)> = pairs.into_iter().collect();
        for e in &elements {
            leq.insert((e.clone(), e.clone()));
        }
        loop {
            let mut grew = false;
            let snapshot: Vec<(String, String)> = leq.iter().cloned().collect();
            for (a, b) in &snapshot {
                for (b2, c) in &snapshot {
                    if b == b2 && leq.insert((a.clone(), c.clone())) {
                        grew = true;
                    }
                }
            }
            if !grew {
                break;
            }
        }
        Poset::new(elements, leq)
    }

    /// A linear order on the given names, in the given order.
    pub fn chain<I>(names: I) -> Self
    where
        I: IntoIterator<Item = String>,
    {
        let elements: Vec<String> = names.into_iter().collect();
        let mut pairs = Vec::new();
        for (i, a) in elements.iter().enumerate() {
            for b in elements.iter().skip(i) {
                pairs.push((a.clone(), b.clone()));
            }
        }
        Poset::new(elements, pairs).expect("a chain is a poset")
    }

    pub fn elements(&self) -> &[String] {
        &self.elements
    }

    pub fn contains(&self, i: &str) -> bool {
        self.elements.iter().any(|e| e == i)
    }

    /// Whether `a <= b`. Both indices must be known.
    pub fn le(&self, a: &str, b: &str) -> bool {
        debug_assert!(self.contains(a) && self.contains(b));
        self.leq.contains(&(a.to_string(), b.to_string()))
    }

    /// `i` and everything above it.
    pub fn up_set(&self, i: &str) -> Result<BTreeSet<String>, OrderError> {
        if !self.contains(i) {
            return Err(OrderError::UnknownIndex(i.to_string()));
        }
        Ok(self
            .elements
            .iter()
            .filter(|j| self.le(i, j))
            .cloned()
            .collect())
    }

    /// `i` and everything below it.
    pub fn down_set(&self, i: &str) -> Result<BTreeSet<String>, OrderError> {
        if !self.contains(i) {
            return Err(OrderError::UnknownIndex(i.to_string()));
        }
        Ok(self
            .elements
            .iter()
            .filter(|j| self.le(j, i))
            .cloned()
            .collect())
    }

    /// Common upper bounds of `a` and `b`, in element order.
    pub fn upper_bounds(&self, a: &str, b: &str) -> Vec<String> {
        self.elements
            .iter()
            .filter(|c| self.le(a, c) && self.le(b, c))
            .cloned()
            .collect()
    }

    /// Nonempty, and every two indices have a common upper bound.
    pub fn is_upward_directed(&self) -> bool {
        if self.elements.is_empty() {
            return false;
        }
        for a in &self.elements {
            for b in &self.elements {
                if self.upper_bounds(a, b).is_empty() {
                    return false;
                }
            }
        }
        true
    }

    /// The greatest element, if one exists.
    pub fn maximum(&self) -> Option<String> {
        self.elements
            .iter()
            .find(|m| self.elements.iter().all(|i| self.le(i, m)))
            .cloned()
    }

    /// The poset with the order reversed.
    pub fn opposite(&self) -> Poset {
        let leq = self.leq.iter().map(|(a, b)| (b.clone(), a.clone())).collect();
        Poset {
            elements: self.elements.clone(),
            leq,
        }
    }
}

/// A filter on a finite index set, represented by its base: the members are
/// exactly the supersets of the base inside the index set. The base is
/// nonempty, so the filter is proper.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Filter {
    index_set: BTreeSet<String>,
    base: BTreeSet<String>,
}

/// How to enumerate the members of a filter when building member-indexed
/// diagrams: all of them, or one chain from the base to the full index set
/// (adding the complement in sorted order). The chain keeps member-indexed
/// constructions tractable for larger index sets.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MemberEnumeration {
    Full,
    Chain,
}

impl Filter {
    pub fn new(index_set: BTreeSet<String>, base: BTreeSet<String>) -> Result<Self, OrderError> {
        if base.is_empty() {
            return Err(OrderError::EmptyBase);
        }
        for b in &base {
            if !index_set.contains(b) {
                return Err(OrderError::BaseOutsideIndexSet(b.clone()));
            }
        }
        Ok(Filter { index_set, base })
    }

    pub fn index_set(&self) -> &BTreeSet<String> {
        &self.index_set
    }

    pub fn base(&self) -> &BTreeSet<String> {
        &self.base
    }

    /// Membership: `j` is a member iff it sits between the base and the
    /// index set.
    pub fn contains(&self, j: &BTreeSet<String>) -> bool {
        j.is_subset(&self.index_set) && self.base.is_subset(j)
    }

    /// On a finite index set, ultrafilters are exactly the filters with a
    /// singleton base.
    pub fn is_ultrafilter(&self) -> bool {
        self.base.len() == 1
    }

    /// For an ultrafilter, its principal index.
    pub fn principal_index(&self) -> Option<&String> {
        if self.is_ultrafilter() {
            self.base.iter().next()
        } else {
            None
        }
    }

    /// All members, ordered by size and then lexicographically.
    pub fn members(&self) -> Vec<BTreeSet<String>> {
        let complement: Vec<String> = self.index_set.difference(&self.base).cloned().collect();
        let mut out = Vec::with_capacity(1 << complement.len());
        for mask in 0u64..(1u64 << complement.len()) {
            let mut member = self.base.clone();
            for (k, extra) in complement.iter().enumerate() {
                if mask & (1 << k) != 0 {
                    member.insert(extra.clone());
                }
            }
            out.push(member);
        }
        out.sort_by_key(|m| (m.len(), m.iter().cloned().collect::<Vec<_>>()));
        out
    }

    /// The chain of members `base ⊆ base∪{i1} ⊆ .. ⊆ I`, complement added in
    /// sorted order.
    pub fn members_chain(&self) -> Vec<BTreeSet<String>> {
        let mut out = vec![self.base.clone()];
        let mut current = self.base.clone();
        for extra in self.index_set.difference(&self.base) {
            current.insert(extra.clone());
            out.push(current.clone());
        }
        out
    }

    pub fn enumerate_members(&self, how: MemberEnumeration) -> Vec<BTreeSet<String>> {
        match how {
            MemberEnumeration::Full => self.members(),
            MemberEnumeration::Chain => self.members_chain(),
        }
    }
}

/// Canonical display name for a set of indices: `{a,b,c}`.
pub fn set_name(s: &BTreeSet<String>) -> String {
    let mut out = String::from("{");
    for (k, e) in s.iter().enumerate() {
        if k > 0 {
            out.push(',');
        }
        out.push_str(e);
    }
    out.push('}');
    out
}

/// Whether `f` is a filter of up-sets witness: every up-set `i↑` is a member.
/// The filter must live on the poset's elements.
pub fn is_directed_filter(p: &Poset, f: &Filter) -> Result<bool, OrderError> {
    let poset_elements: BTreeSet<String> = p.elements().iter().cloned().collect();
    if &poset_elements != f.index_set() {
        return Err(OrderError::IndexSetMismatch);
    }
    for i in p.elements() {
        if !f.contains(&p.up_set(i)?) {
            return Ok(false);
        }
    }
    Ok(true)
}

/// The unique directed ultrafilter on an upward-directed poset: the
/// principal ultrafilter at the maximum. The maximum is reached by folding
/// pairwise upper bounds across the elements; antisymmetry makes it unique.
pub fn directed_ultrafilter(p: &Poset) -> Result<Filter, OrderError> {
    if !p.is_upward_directed() {
        return Err(OrderError::NotDirected);
    }
    let mut m = p.elements()[0].clone();
    for i in p.elements() {
        // Any common upper bound keeps m above everything folded so far.
        m = p
            .upper_bounds(&m, i)
            .into_iter()
            .next()
            .expect("directed poset has pairwise upper bounds");
    }
    debug_assert!(p.elements().iter().all(|i| p.le(i, &m)));
    let index_set: BTreeSet<String> = p.elements().iter().cloned().collect();
    Filter::new(index_set, BTreeSet::from([m]))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn names(xs: &[&str]) -> Vec<String> {
        xs.iter().map(|s| s.to_string()).collect()
    }

    fn set(xs: &[&str]) -> BTreeSet<String> {
        xs.iter().map(|s| s.to_string()).collect()
    }

    fn diamond() -> Poset {
        // bottom <= left, right <= top
        Poset::from_generators(
            names(&["bottom", "left", "right", "top"]),
            [
                ("bottom".to_string(), "left".to_string()),
                ("bottom".to_string(), "right".to_string()),
                ("left".to_string(), "top".to_string()),
                ("right".to_string(), "top".to_string()),
            ],
        )
        .unwrap()
    }

    #[test]
    fn closure_builds_a_chain() {
        let p = Poset::from_generators(
            names(&["1", "2", "3"]),
            [
                ("1".to_string(), "2".to_string()),
                ("2".to_string(), "3".to_string()),
            ],
        )
        .unwrap();
        assert!(p.le("1", "3"));
        assert_eq!(p.up_set("2").unwrap(), set(&["2", "3"]));
        assert_eq!(p.down_set("2").unwrap(), set(&["1", "2"]));
        assert_eq!(p.maximum(), Some("3".to_string()));
    }

    #[test]
    fn cycles_violate_antisymmetry() {
        let err = Poset::from_generators(
            names(&["a", "b"]),
            [
                ("a".to_string(), "b".to_string()),
                ("b".to_string(), "a".to_string()),
            ],
        )
        .unwrap_err();
        assert!(matches!(err, OrderError::NotAntisymmetric(..)));
    }

    #[test]
    fn up_set_of_unknown_index_errors() {
        let p = diamond();
        assert_eq!(
            p.up_set("missing"),
            Err(OrderError::UnknownIndex("missing".to_string()))
        );
    }

    #[test]
    fn directedness() {
        assert!(diamond().is_upward_directed());
        let vee = Poset::from_generators(
            names(&["bottom", "left", "right"]),
            [
                ("bottom".to_string(), "left".to_string()),
                ("bottom".to_string(), "right".to_string()),
            ],
        )
        .unwrap();
        assert!(!vee.is_upward_directed());
        assert_eq!(vee.maximum(), None);
        let empty = Poset::new(Vec::new(), Vec::new()).unwrap();
        assert!(!empty.is_upward_directed());
    }

    #[test]
    fn filters_are_supersets_of_the_base() {
        let f = Filter::new(set(&["1", "2", "3"]), set(&["2"])).unwrap();
        assert!(f.contains(&set(&["2"])));
        assert!(f.contains(&set(&["1", "2"])));
        assert!(!f.contains(&set(&["1", "3"])));
        assert!(!f.contains(&set(&["1", "2", "3", "4"])));
        assert!(f.is_ultrafilter());
        assert_eq!(f.principal_index(), Some(&"2".to_string()));
        assert_eq!(f.members().len(), 4);

        let trivial = Filter::new(set(&["1", "2", "3"]), set(&["1", "2", "3"])).unwrap();
        assert!(!trivial.is_ultrafilter());
        assert_eq!(trivial.members(), vec![set(&["1", "2", "3"])]);
    }

    #[test]
    fn member_chain_is_increasing() {
        let f = Filter::new(set(&["1", "2", "3", "4"]), set(&["2"])).unwrap();
        let chain = f.members_chain();
        assert_eq!(chain.len(), 4);
        for w in chain.windows(2) {
            assert!(w[0].is_subset(&w[1]));
        }
        assert_eq!(chain.first(), Some(&set(&["2"])));
        assert_eq!(chain.last(), Some(&set(&["1", "2", "3", "4"])));
    }

    #[test]
    fn empty_base_is_rejected() {
        assert_eq!(
            Filter::new(set(&["1"]), BTreeSet::new()),
            Err(OrderError::EmptyBase)
        );
    }

    #[test]
    fn directed_ultrafilter_sits_at_the_maximum() {
        let p = diamond();
        let u = directed_ultrafilter(&p).unwrap();
        assert_eq!(u.base(), &set(&["top"]));
        assert!(u.is_ultrafilter());
        assert!(is_directed_filter(&p, &u).unwrap());
    }

    #[test]
    fn up_set_filters_detect_non_directed_bases() {
        let p = diamond();
        // The filter based at `left` misses right↑ = {right, top}.
        let f = Filter::new(set(&["bottom", "left", "right", "top"]), set(&["left"])).unwrap();
        assert!(!is_directed_filter(&p, &f).unwrap());
        let err = directed_ultrafilter(
            &Poset::from_generators(
                names(&["a", "b"]),
                std::iter::empty::<(String, String)>(),
            )
            .unwrap(),
        )
        .unwrap_err();
        assert_eq!(err, OrderError::NotDirected);
    }

    #[test]
    fn set_names_are_canonical() {
        assert_eq!(set_name(&set(&["2", "1"])), "{1,2}");
        assert_eq!(set_name(&BTreeSet::new()), "{}");
    }
}
