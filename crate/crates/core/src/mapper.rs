//! Template filling: a validated record becomes a problem file.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::extraction::{ExtractionRecord, RecordKey};
use crate::pddl::{render_problem, Domain, GroundLiteral, ProblemSpec, SemanticError, TypedName};

/// Raised only when the record was not validated first.
#[derive(Debug, Clone, PartialEq, Eq, Error, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "SCREAMING_SNAKE_CASE")]
pub enum MapError {
    #[error("record is missing `{key}`")]
    MissingKey { key: String },
    #[error("object `{id}` has no type")]
    UntypedObject { id: String },
    #[error("mapped problem does not type-check: {error}")]
    Semantic { error: SemanticError },
}

pub fn map_to_problem(r: &ExtractionRecord, d: &Domain, problem_name: &str) -> Result<ProblemSpec, MapError> {
    if let Some(key) = r.missing.iter().next() {
        return Err(MapError::MissingKey { key: key.path().to_string() });
    }
    debug_assert!(!r.is_missing(RecordKey::Goal));
    let mut objects = Vec::with_capacity(r.objects.len());
    for o in &r.objects {
        if d.constant(&o.id).is_some() {
            continue;
        }
        let t = o.type_name.as_ref().ok_or_else(|| MapError::UntypedObject { id: o.id.clone() })?;
        objects.push(TypedName::new(o.id.clone(), t.clone()));
    }
    let problem = ProblemSpec {
        name: problem_name.to_string(),
        domain_name: d.name.clone(),
        objects,
        init: r.init.iter().map(|rel| rel.to_atom()).collect(),
        goal: r.goal.iter().map(|rel| GroundLiteral::pos(rel.to_atom())).collect(),
    };
    d.check_problem(&problem).map_err(|error| MapError::Semantic { error })?;
    Ok(problem)
}

pub fn map_and_render(r: &ExtractionRecord, d: &Domain, problem_name: &str) -> Result<String, MapError> {
    map_to_problem(r, d, problem_name).map(|p| render_problem(&p))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus;
    use crate::extraction::{parse_record, ObjectEntry, RelationEntry};
    use crate::pddl::{parse_domain, parse_problem, GroundAtom};

    fn tabletop() -> Domain {
        parse_domain(corpus::domain("tabletop").unwrap().source).unwrap()
    }

    fn listing() -> ExtractionRecord {
        parse_record(corpus::fixture("tabletop-apple").unwrap().record).unwrap()
    }

    #[test]
    fn listing_maps_to_listing_problem() {
        let d = tabletop();
        let p = map_to_problem(&listing(), &d, "tabletop-listing").unwrap();
        let expected = parse_problem(corpus::problem("tabletop-listing").unwrap().source, &d).unwrap();
        assert_eq!(p, expected);
        let text = map_and_render(&listing(), &d, "tabletop-listing").unwrap();
        assert_eq!(parse_problem(&text, &d).unwrap(), p);
        assert_eq!(render_problem(&parse_problem(&text, &d).unwrap()), text);
    }

    #[test]
    fn empty_goal_is_empty_conjunction() {
        let mut r = listing();
        r.goal.clear();
        let text = map_and_render(&r, &tabletop(), "p").unwrap();
        assert!(text.contains("(:goal (and))"));
    }

    #[test]
    fn constants_are_not_redeclared() {
        let src = "(define (domain k) (:requirements :strips :typing) (:types thing)
            (:constants home - thing) (:predicates (at ?x - thing ?y - thing))
            (:action noop :parameters (?x - thing) :precondition (at ?x home) :effect (not (at ?x home))))";
        let d = parse_domain(src).unwrap();
        let r = ExtractionRecord {
            objects: vec![ObjectEntry::new("robot", "thing"), ObjectEntry::new("home", "thing")],
            init: vec![RelationEntry::new("at", ["robot", "home"])],
            goal: vec![],
            missing: Default::default(),
        };
        let p = map_to_problem(&r, &d, "p").unwrap();
        assert_eq!(p.objects, vec![TypedName::new("robot", "thing")]);
        assert!(p.init.contains(&GroundAtom::new("at", ["robot", "home"])));
    }

    #[test]
    fn unvalidated_input_is_rejected() {
        let mut r = listing();
        r.init[0].predicate = "levitates".into();
        assert!(matches!(map_to_problem(&r, &tabletop(), "p"), Err(MapError::Semantic { .. })));
        let mut r = listing();
        r.objects[0].type_name = None;
        assert_eq!(
            map_to_problem(&r, &tabletop(), "p"),
            Err(MapError::UntypedObject { id: "apple_01".into() })
        );
    }
}
