//! A workbench for finite first-order structures: formulas and their
//! fragments, homomorphisms and purity, products, (co)limits over finite
//! posets, reduced products over filters, and profinite limits with their
//! retraction onto ultraproducts.

pub mod constructions;
pub mod formulas;
pub mod gen;
pub mod orders;
pub mod profinite;
pub mod structures;

pub use formulas::{classify, parse_formula, Formula, FormulaClass, Signature, Term};
pub use orders::{directed_ultrafilter, is_directed_filter, Filter, Poset};
pub use structures::{Assignment, Element, Morphism, Structure};
pub use constructions::{
    equalizer, filtered_colimit, final_object, limit, product, reduced_product, ultraproduct,
    Cocone, Cone, Diagram, ReducedProduct,
};
pub use profinite::{
    gamma_global, profinite_limit, retraction_theorem_check, CofilteredDiagram,
    ProfiniteStructure, RetractionReport,
};
