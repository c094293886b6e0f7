use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Source position. `offset` is a 0-based byte offset; `line` and `column` are 1-based.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Pos {
    pub offset: usize,
    pub line: usize,
    pub column: usize,
}

impl fmt::Display for Pos {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.line, self.column)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ParseErrorKind {
    #[error("expected {expected}, found {found}")]
    Expected { expected: String, found: String },
    #[error("unbalanced parentheses: unexpected end of input")]
    UnbalancedParens,
    #[error("nesting deeper than {0} levels")]
    TooDeep(usize),
    #[error("unsupported construct `{0}`")]
    Unsupported(String),
    #[error("invalid name `{0}`")]
    InvalidName(String),
    #[error("undeclared type `{0}`")]
    UndeclaredType(String),
    #[error("type `{0}` declared with conflicting parents")]
    ConflictingType(String),
    #[error("type hierarchy contains a cycle through `{0}`")]
    TypeCycle(String),
    #[error("duplicate {what} `{name}`")]
    Duplicate { what: &'static str, name: String },
    #[error("unknown predicate `{0}`")]
    UnknownPredicate(String),
    #[error("unknown variable or constant `{0}`")]
    UnknownTerm(String),
    #[error("predicate `{predicate}` expects {expected} arguments, found {found}")]
    Arity { predicate: String, expected: usize, found: usize },
    #[error("argument `{arg}` of type `{found}` does not fit slot type `{expected}` of `{predicate}`")]
    ArgType { predicate: String, arg: String, expected: String, found: String },
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("parse error at {pos}: {kind}")]
pub struct ParseError {
    pub pos: Pos,
    pub kind: ParseErrorKind,
}

impl ParseError {
    pub fn new(pos: Pos, kind: ParseErrorKind) -> Self {
        ParseError { pos, kind }
    }

    pub fn expected(pos: Pos, expected: impl Into<String>, found: impl Into<String>) -> Self {
        ParseError::new(
            pos,
            ParseErrorKind::Expected { expected: expected.into(), found: found.into() },
        )
    }
}

/// A problem that parses but does not type-check against its domain.
#[derive(Debug, Clone, PartialEq, Eq, Error, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "SCREAMING_SNAKE_CASE")]
pub enum SemanticError {
    #[error("problem targets domain `{found}` but `{expected}` was given")]
    DomainMismatch { expected: String, found: String },
    #[error("unknown predicate `{name}`")]
    UnknownPredicate { name: String },
    #[error("unknown object `{name}`")]
    UnknownObject { name: String },
    #[error("unknown type `{name}`")]
    UnknownType { name: String },
    #[error("duplicate object `{name}`")]
    DuplicateObject { name: String },
    #[error("invalid name `{name}`")]
    InvalidName { name: String },
    #[error("`{predicate}` expects {expected} arguments, found {found}")]
    ArityMismatch { predicate: String, expected: usize, found: usize },
    #[error("`{object}` has type `{found}` but `{predicate}` expects `{expected}`")]
    TypeMismatch { predicate: String, object: String, expected: String, found: String },
}

impl SemanticError {
    /// The symbol the error is about.
    pub fn symbol(&self) -> &str {
        match self {
            SemanticError::DomainMismatch { found, .. } => found,
            SemanticError::UnknownPredicate { name }
            | SemanticError::UnknownObject { name }
            | SemanticError::UnknownType { name }
            | SemanticError::DuplicateObject { name }
            | SemanticError::InvalidName { name } => name,
            SemanticError::ArityMismatch { predicate, .. } => predicate,
            SemanticError::TypeMismatch { object, .. } => object,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ProblemError {
    #[error(transparent)]
    Parse(#[from] ParseError),
    #[error("semantic error: {0}")]
    Semantic(#[from] SemanticError),
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("unknown type `{0}`")]
pub struct UnknownType(pub String);
