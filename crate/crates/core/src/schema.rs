//! Extraction vocabulary derived from a domain, plus the textual guide handed
//! to an extractor.

use std::fmt::Write;

use serde::{Deserialize, Serialize};

use crate::pddl::{Domain, GroundAtom, PredicateSig, SemanticError, TypeTree, TypedName, ROOT_TYPE};

/// Types, typed predicate signatures and constants of one domain.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExtractionSchema {
    pub domain: String,
    pub types: TypeTree,
    pub predicates: Vec<PredicateSig>,
    pub constants: Vec<TypedName>,
}

pub fn derive_schema(d: &Domain) -> ExtractionSchema {
    ExtractionSchema {
        domain: d.name.clone(),
        types: d.types.clone(),
        predicates: d.predicates.clone(),
        constants: d.constants.clone(),
    }
}

impl ExtractionSchema {
    pub fn predicate(&self, name: &str) -> Option<&PredicateSig> {
        self.predicates.iter().find(|p| p.name == name)
    }

    pub fn constant(&self, name: &str) -> Option<&TypedName> {
        self.constants.iter().find(|c| c.name == name)
    }

    pub fn has_type(&self, name: &str) -> bool {
        self.types.contains(name)
    }

    /// Type-checks a ground atom; `type_of` resolves object names that are not constants.
    pub fn check_atom<'a>(
        &'a self,
        atom: &GroundAtom,
        type_of: impl Fn(&str) -> Option<&'a str>,
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
            let ty = self
                .constant(arg)
                .map(|c| c.type_name.as_str())
                .or_else(|| type_of(arg))
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

/// Renders the schema as prompt guidance. Output is deterministic.
pub fn render_schema_guide(s: &ExtractionSchema) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "You are an information extractor for the planning domain `{}`.", s.domain);
    out.push_str(
        "Read the task description and report the objects it mentions, the facts that hold \
         now, and the facts that must hold when the task is done. Do not plan.\n",
    );

    out.push_str("\nTYPES\n");
    for entry in s.types.entries() {
        match &entry.parent {
            Some(parent) => {
                let _ = writeln!(out, "- {} (a kind of {})", entry.name, parent);
            }
            None => {
                let _ = writeln!(out, "- {}", entry.name);
            }
        }
    }

    out.push_str("\nPREDICATES\n");
    for p in &s.predicates {
        let slots: Vec<String> = p.params.iter().map(|q| format!("<{}>", q.type_name)).collect();
        if slots.is_empty() {
            let _ = writeln!(out, "- {}()", p.name);
        } else {
            let _ = writeln!(out, "- {}({})", p.name, slots.join(", "));
        }
    }

    if !s.constants.is_empty() {
        out.push_str("\nCONSTANTS (use as arguments; do not list under \"objects\")\n");
        for c in &s.constants {
            let _ = writeln!(out, "- {} : {}", c.name, c.type_name);
        }
    }

    out.push_str("\nOUTPUT\n");
    out.push_str("Reply with one JSON document and nothing else:\n");
    out.push_str("{\n");
    out.push_str("  \"objects\": [{\"id\": \"<name>\", \"type\": \"<type>\"}, ...],\n");
    out.push_str("  \"relations\": {\n");
    out.push_str("    \"init\": [<relation>, ...],\n");
    out.push_str("    \"goal\": [<relation>, ...]\n");
    out.push_str("  }\n");
    out.push_str("}\n");
    out.push_str("A <relation> is {\"predicate\": \"<predicate>\", \"args\": [\"<id>\", ...]}.\n");
    out.push_str(
        "A two-argument relation may also be written {\"subject\": \"<id>\", \"predicate\": \"<predicate>\", \"object\": \"<id>\"}.\n",
    );
    out.push_str("Rules:\n");
    out.push_str("- \"objects\", \"relations.init\" and \"relations.goal\" are mandatory.\n");
    out.push_str("- Every object needs an \"id\" and a \"type\" from TYPES.\n");
    out.push_str("- Use only predicates from PREDICATES with exactly the listed number of arguments.\n");
    let _ = writeln!(
        out,
        "- Names start with a letter and use only letters, digits, `-` and `_`; `{ROOT_TYPE}` is the most general type."
    );
    out.push_str("- Facts not listed under \"init\" are false.\n");
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus;
    use crate::pddl::parse_domain;

    fn schema(name: &str) -> ExtractionSchema {
        derive_schema(&parse_domain(corpus::domain(name).unwrap().source).unwrap())
    }

    #[test]
    fn blocksworld_predicates() {
        let s = schema("blocksworld");
        let sigs: Vec<_> = s.predicates.iter().map(|p| (p.name.as_str(), p.arity())).collect();
        assert_eq!(
            sigs,
            [("on", 2), ("ontable", 1), ("clear", 1), ("handempty", 0), ("holding", 1)]
        );
        assert!(s.constants.is_empty());
    }

    #[test]
    fn tabletop_vocabulary() {
        let s = schema("tabletop");
        for t in ["apple", "table", "plate"] {
            assert!(s.has_type(t), "{t}");
        }
        assert_eq!(s.predicate("on").unwrap().arity(), 2);
    }

    #[test]
    fn guide_lists_each_predicate_once_with_slot_types() {
        let guide = render_schema_guide(&schema("gripper"));
        assert!(guide.contains("- at(<ball>, <room>)\n"));
        assert!(guide.contains("- at-robby(<room>)\n"));
        assert!(!guide.contains("CONSTANTS"));
    }

    #[test]
    fn guide_mentions_constants_when_present() {
        let d = parse_domain(
            "(define (domain k) (:types room) (:constants hall - room) (:predicates (in ?r - room)))",
        )
        .unwrap();
        let guide = render_schema_guide(&derive_schema(&d));
        assert!(guide.contains("CONSTANTS"));
        assert!(guide.contains("- hall : room"));
    }

    #[test]
    fn guide_is_deterministic() {
        let s = schema("kitchen");
        assert_eq!(render_schema_guide(&s), render_schema_guide(&s));
    }

    #[test]
    fn guides_differ_across_corpus() {
        let guides: Vec<String> =
            corpus::DOMAINS.iter().map(|d| render_schema_guide(&schema(d.name))).collect();
        for i in 0..guides.len() {
            for j in i + 1..guides.len() {
                assert_ne!(guides[i], guides[j]);
            }
        }
    }
}
