//! The PDDL subset used throughout the pipeline: STRIPS with typing, negative
//! preconditions and equality.

mod error;
mod model;
mod parse;
mod render;
mod sexp;

pub use error::{ParseError, ParseErrorKind, Pos, ProblemError, SemanticError, UnknownType};
pub use model::{
    is_valid_name, ActionSchema, Atom, Condition, Domain, GroundAtom, GroundLiteral, PredicateSig,
    ProblemSpec, Term, TypeEntry, TypeTree, TypeTreeError, TypedName, ROOT_TYPE,
};
pub use parse::{parse_domain, parse_problem, SUPPORTED_REQUIREMENTS};
pub use render::render_problem;

/// Convenience wrapper over [`TypeTree::is_subtype`].
pub fn is_subtype(sub: &str, sup: &str, tree: &TypeTree) -> Result<bool, UnknownType> {
    tree.is_subtype(sub, sup)
}
