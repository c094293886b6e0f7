//! PDDL data model: type hierarchy, predicates, action schemas, domains and problems.

use std::collections::{BTreeSet, HashMap, HashSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use super::error::{SemanticError, UnknownType};

pub const ROOT_TYPE: &str = "object";

/// True when `s` is a legal PDDL name: a letter followed by letters, digits, `-` or `_`.
pub fn is_valid_name(s: &str) -> bool {
    let mut chars = s.chars();
    match chars.next() {
        Some(c) if c.is_ascii_alphabetic() => {}
        _ => return false,
    }
    chars.all(|c| c.is_ascii_alphanumeric() || c == '-' || c == '_')
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TypeEntry {
    pub name: String,
    pub parent: Option<String>,
}

/// Single-inheritance type hierarchy rooted at `object`.
///
/// Entries keep declaration order with `object` first. Construction rejects
/// cycles, conflicting parents and dangling parent references.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "Vec<TypeEntry>", into = "Vec<TypeEntry>")]
pub struct TypeTree {
    entries: Vec<TypeEntry>,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum TypeTreeError {
    #[error("type `{0}` declared with conflicting parents")]
    Conflicting(String),
    #[error("type hierarchy contains a cycle through `{0}`")]
    Cycle(String),
    #[error("undeclared type `{0}`")]
    Undeclared(String),
    #[error("the root type `object` cannot have a parent")]
    RootWithParent,
}

impl Default for TypeTree {
    fn default() -> Self {
        TypeTree { entries: vec![TypeEntry { name: ROOT_TYPE.to_string(), parent: None }] }
    }
}

impl TypeTree {
    /// Builds a tree from `(name, parent)` declarations. Parents that are never
    /// declared themselves become direct children of `object`.
    pub fn from_declarations<'a, I>(decls: I) -> Result<Self, TypeTreeError>
    where
        I: IntoIterator<Item = (&'a str, &'a str)>,
    {
        let mut tree = TypeTree::default();
        let mut pending_parents = Vec::new();
        for (name, parent) in decls {
            if name == ROOT_TYPE {
                if parent != ROOT_TYPE {
                    return Err(TypeTreeError::RootWithParent);
                }
                continue;
            }
            match tree.entries.iter().find(|e| e.name == name) {
                Some(existing) if existing.parent.as_deref() != Some(parent) => {
                    return Err(TypeTreeError::Conflicting(name.to_string()))
                }
                Some(_) => {}
                None => tree
                    .entries
                    .push(TypeEntry { name: name.to_string(), parent: Some(parent.to_string()) }),
            }
            pending_parents.push(parent.to_string());
        }
        for parent in pending_parents {
            if !tree.contains(&parent) {
                tree.entries
                    .push(TypeEntry { name: parent, parent: Some(ROOT_TYPE.to_string()) });
            }
        }
        tree.check_acyclic()?;
        Ok(tree)
    }

    fn check_acyclic(&self) -> Result<(), TypeTreeError> {
        for entry in &self.entries {
            let mut seen = HashSet::new();
            let mut cur = entry.name.as_str();
            while let Some(parent) = self.parent_of(cur) {
                if !seen.insert(cur) {
                    return Err(TypeTreeError::Cycle(entry.name.clone()));
                }
                cur = parent;
            }
        }
        Ok(())
    }

    pub fn contains(&self, name: &str) -> bool {
        self.entries.iter().any(|e| e.name == name)
    }

    pub fn parent_of(&self, name: &str) -> Option<&str> {
        self.entries.iter().find(|e| e.name == name).and_then(|e| e.parent.as_deref())
    }

    pub fn entries(&self) -> &[TypeEntry] {
        &self.entries
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.entries.iter().map(|e| e.name.as_str())
    }

    /// Only the root type exists.
    pub fn is_untyped(&self) -> bool {
        self.entries.len() == 1
    }

    /// `sub` equals `sup` or is a transitive descendant of it.
    pub fn is_subtype(&self, sub: &str, sup: &str) -> Result<bool, UnknownType> {
        for t in [sub, sup] {
            if !self.contains(t) {
                return Err(UnknownType(t.to_string()));
            }
        }
        let mut cur = sub;
        loop {
            if cur == sup {
                return Ok(true);
            }
            match self.parent_of(cur) {
                Some(p) => cur = p,
                None => return Ok(false),
            }
        }
    }

    /// Unknown types are never subtypes of anything.
    pub fn fits(&self, sub: &str, sup: &str) -> bool {
        self.is_subtype(sub, sup).unwrap_or(false)
    }
}

impl TryFrom<Vec<TypeEntry>> for TypeTree {
    type Error = TypeTreeError;

    fn try_from(entries: Vec<TypeEntry>) -> Result<Self, Self::Error> {
        let decls: Vec<(String, String)> = entries
            .into_iter()
            .map(|e| {
                let parent = e.parent.unwrap_or_else(|| ROOT_TYPE.to_string());
                (e.name, parent)
            })
            .collect();
        let tree = TypeTree::from_declarations(decls.iter().map(|(n, p)| (n.as_str(), p.as_str())))?;
        // round-tripped entries must not have relied on implicit parent declarations
        if tree.entries.len() != decls.iter().filter(|(n, _)| n != ROOT_TYPE).count() + 1 {
            let missing = tree
                .entries
                .iter()
                .find(|e| e.name != ROOT_TYPE && !decls.iter().any(|(n, _)| *n == e.name))
                .map(|e| e.name.clone())
                .unwrap_or_default();
            return Err(TypeTreeError::Undeclared(missing));
        }
        Ok(tree)
    }
}

impl From<TypeTree> for Vec<TypeEntry> {
    fn from(tree: TypeTree) -> Self {
        tree.entries
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct TypedName {
    pub name: String,
    #[serde(rename = "type")]
    pub type_name: String,
}

impl TypedName {
    pub fn new(name: impl Into<String>, type_name: impl Into<String>) -> Self {
        TypedName { name: name.into(), type_name: type_name.into() }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PredicateSig {
    pub name: String,
    /// Parameter variables (without the leading `?`) with their types.
    pub params: Vec<TypedName>,
}

impl PredicateSig {
    pub fn arity(&self) -> usize {
        self.params.len()
    }
}

impl fmt::Display for PredicateSig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}", self.name)?;
        for p in &self.params {
            write!(f, " ?{} - {}", p.name, p.type_name)?;
        }
        write!(f, ")")
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Term {
    Var(String),
    Object(String),
}

impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Term::Var(v) => write!(f, "?{v}"),
            Term::Object(o) => f.write_str(o),
        }
    }
}

/// A lifted atom as it appears inside action schemas.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Atom {
    pub predicate: String,
    pub args: Vec<Term>,
}

impl fmt::Display for Atom {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}", self.predicate)?;
        for a in &self.args {
            write!(f, " {a}")?;
        }
        write!(f, ")")
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct GroundAtom {
    pub predicate: String,
    pub args: Vec<String>,
}

impl GroundAtom {
    pub fn new<S: Into<String>>(predicate: impl Into<String>, args: impl IntoIterator<Item = S>) -> Self {
        GroundAtom { predicate: predicate.into(), args: args.into_iter().map(Into::into).collect() }
    }
}

impl fmt::Display for GroundAtom {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}", self.predicate)?;
        for a in &self.args {
            write!(f, " {a}")?;
        }
        write!(f, ")")
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct GroundLiteral {
    pub atom: GroundAtom,
    pub positive: bool,
}

impl GroundLiteral {
    pub fn pos(atom: GroundAtom) -> Self {
        GroundLiteral { atom, positive: true }
    }

    pub fn neg(atom: GroundAtom) -> Self {
        GroundLiteral { atom, positive: false }
    }
}

impl fmt::Display for GroundLiteral {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.positive {
            write!(f, "{}", self.atom)
        } else {
            write!(f, "(not {})", self.atom)
        }
    }
}

/// One conjunct of an action precondition.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum Condition {
    Literal { atom: Atom, positive: bool },
    Equality { left: Term, right: Term, positive: bool },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ActionSchema {
    pub name: String,
    pub params: Vec<TypedName>,
    pub precondition: Vec<Condition>,
    pub add: Vec<Atom>,
    pub del: Vec<Atom>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Domain {
    pub name: String,
    pub requirements: Vec<String>,
    pub types: TypeTree,
    pub predicates: Vec<PredicateSig>,
    pub constants: Vec<TypedName>,
    pub actions: Vec<ActionSchema>,
}

impl Domain {
    pub fn predicate(&self, name: &str) -> Option<&PredicateSig> {
        self.predicates.iter().find(|p| p.name == name)
    }

    pub fn action(&self, name: &str) -> Option<&ActionSchema> {
        self.actions.iter().find(|a| a.name == name)
    }

    pub fn constant(&self, name: &str) -> Option<&TypedName> {
        self.constants.iter().find(|c| c.name == name)
    }

    /// Type-checks a problem against this domain.
    pub fn check_problem(&self, problem: &ProblemSpec) -> Result<(), SemanticError> {
        if problem.domain_name != self.name {
            return Err(SemanticError::DomainMismatch {
                expected: self.name.clone(),
                found: problem.domain_name.clone(),
            });
        }
        if !is_valid_name(&problem.name) {
            return Err(SemanticError::InvalidName { name: problem.name.clone() });
        }
        let mut seen = HashSet::new();
        for obj in &problem.objects {
            if !is_valid_name(&obj.name) {
                return Err(SemanticError::InvalidName { name: obj.name.clone() });
            }
            if !seen.insert(obj.name.as_str()) || self.constant(&obj.name).is_some() {
                return Err(SemanticError::DuplicateObject { name: obj.name.clone() });
            }
            if !self.types.contains(&obj.type_name) {
                return Err(SemanticError::UnknownType { name: obj.type_name.clone() });
            }
        }
        let env = ObjectTypes::new(self, problem);
        for atom in &problem.init {
            self.check_ground_atom(atom, &env)?;
        }
        for lit in &problem.goal {
            self.check_ground_atom(&lit.atom, &env)?;
        }
        Ok(())
    }

    pub(crate) fn check_ground_atom(
        &self,
        atom: &GroundAtom,
        env: &ObjectTypes<'_>,
    ) -> Result<(), SemanticError> {
        let sig = self
            .predicate(&atom.predicate)
            .ok_or_else(|| SemanticError::UnknownPredicate { name: atom.predicate.clone() })?;
        if sig.arity() != atom.args.len() {
            return Err(SemanticError::ArityMismatch {
                predicate: atom.predicate.clone(),
                expected: sig.arity(),
                found: atom.args.len(),
            });
        }
        for (arg, slot) in atom.args.iter().zip(&sig.params) {
            let ty = env
                .type_of(arg)
                .ok_or_else(|| SemanticError::UnknownObject { name: arg.clone() })?;
            if !self.types.fits(ty, &slot.type_name) {
                return Err(SemanticError::TypeMismatch {
                    predicate: atom.predicate.clone(),
                    object: arg.clone(),
                    expected: slot.type_name.clone(),
                    found: ty.to_string(),
                });
            }
        }
        Ok(())
    }
}

/// Object-name to type lookup over domain constants and problem objects.
pub(crate) struct ObjectTypes<'a> {
    map: HashMap<&'a str, &'a str>,
}

impl<'a> ObjectTypes<'a> {
    pub fn new(domain: &'a Domain, problem: &'a ProblemSpec) -> Self {
        let map = domain
            .constants
            .iter()
            .chain(&problem.objects)
            .map(|o| (o.name.as_str(), o.type_name.as_str()))
            .collect();
        ObjectTypes { map }
    }

    pub fn type_of(&self, name: &str) -> Option<&'a str> {
        self.map.get(name).copied()
    }
}

/// A planning problem: objects, initial state and conjunctive goal.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProblemSpec {
    pub name: String,
    pub domain_name: String,
    pub objects: Vec<TypedName>,
    pub init: BTreeSet<GroundAtom>,
    pub goal: BTreeSet<GroundLiteral>,
}

impl ProblemSpec {
    pub fn object_type(&self, name: &str) -> Option<&str> {
        self.objects.iter().find(|o| o.name == name).map(|o| o.type_name.as_str())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn chain() -> TypeTree {
        TypeTree::from_declarations([("a", "b"), ("b", "c"), ("c", "object")]).unwrap()
    }

    #[test]
    fn subtype_relation() {
        let tree = TypeTree::from_declarations([("apple", "object")]).unwrap();
        assert!(tree.is_subtype("apple", "object").unwrap());
        assert!(!tree.is_subtype("object", "apple").unwrap());
        assert!(tree.is_subtype("apple", "apple").unwrap());
        assert!(chain().is_subtype("a", "c").unwrap());
        assert!(!chain().is_subtype("c", "a").unwrap());
    }

    #[test]
    fn subtype_of_unknown_type_is_an_error() {
        assert_eq!(chain().is_subtype("a", "zebra"), Err(UnknownType("zebra".into())));
        assert!(chain().is_subtype("zebra", "object").is_err());
    }

    #[test]
    fn implicit_parents_hang_off_the_root() {
        let tree = TypeTree::from_declarations([("table", "surface"), ("plate", "surface")]).unwrap();
        assert_eq!(tree.parent_of("surface"), Some("object"));
        assert_eq!(tree.names().collect::<Vec<_>>(), ["object", "table", "plate", "surface"]);
    }

    #[test]
    fn cycles_and_conflicts_are_rejected() {
        assert_eq!(
            TypeTree::from_declarations([("a", "b"), ("b", "a")]),
            Err(TypeTreeError::Cycle("a".into()))
        );
        assert_eq!(
            TypeTree::from_declarations([("a", "b"), ("a", "c")]),
            Err(TypeTreeError::Conflicting("a".into()))
        );
        assert_eq!(
            TypeTree::from_declarations([("object", "a")]),
            Err(TypeTreeError::RootWithParent)
        );
    }

    #[test]
    fn tree_serde_round_trip_and_validation() {
        let json = serde_json::to_string(&chain()).unwrap();
        let back: TypeTree = serde_json::from_str(&json).unwrap();
        assert_eq!(back, chain());
        let dangling = r#"[{"name":"object","parent":null},{"name":"a","parent":"ghost"}]"#;
        assert!(serde_json::from_str::<TypeTree>(dangling).is_err());
    }

    #[test]
    fn name_syntax() {
        assert!(is_valid_name("apple_01"));
        assert!(is_valid_name("c0-1"));
        assert!(!is_valid_name("0abc"));
        assert!(!is_valid_name("has space"));
        assert!(!is_valid_name(""));
        assert!(!is_valid_name("?x"));
    }
}
