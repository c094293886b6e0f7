use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};
use thiserror::Error;

use crate::pddl::{is_valid_name, GroundAtom};

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ObjectEntry {
    pub id: String,
    #[serde(rename = "type", default, skip_serializing_if = "Option::is_none")]
    pub type_name: Option<String>,
}

impl ObjectEntry {
    pub fn new(id: impl Into<String>, type_name: impl Into<String>) -> Self {
        ObjectEntry { id: id.into(), type_name: Some(type_name.into()) }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct RelationEntry {
    pub predicate: String,
    pub args: Vec<String>,
}

impl RelationEntry {
    pub fn new<S: Into<String>>(predicate: impl Into<String>, args: impl IntoIterator<Item = S>) -> Self {
        RelationEntry { predicate: predicate.into(), args: args.into_iter().map(Into::into).collect() }
    }

    pub fn to_atom(&self) -> GroundAtom {
        GroundAtom { predicate: self.predicate.clone(), args: self.args.clone() }
    }
}

/// A top-level key of the wire document.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum RecordKey {
    #[serde(rename = "objects")]
    Objects,
    #[serde(rename = "relations")]
    Relations,
    #[serde(rename = "relations.init")]
    Init,
    #[serde(rename = "relations.goal")]
    Goal,
}

impl RecordKey {
    pub fn path(self) -> &'static str {
        match self {
            RecordKey::Objects => "objects",
            RecordKey::Relations => "relations",
            RecordKey::Init => "relations.init",
            RecordKey::Goal => "relations.goal",
        }
    }
}

/// Objects plus initial and goal relations reported by an extractor.
///
/// Absent top-level keys parse to empty collections and are noted in
/// `missing`; Level-1 validation decides what to do about them. Duplicate
/// object ids are representable for the same reason.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExtractionRecord {
    pub objects: Vec<ObjectEntry>,
    pub init: Vec<RelationEntry>,
    pub goal: Vec<RelationEntry>,
    #[serde(default, skip_serializing_if = "BTreeSet::is_empty")]
    pub missing: BTreeSet<RecordKey>,
}

impl ExtractionRecord {
    pub fn object(&self, id: &str) -> Option<&ObjectEntry> {
        self.objects.iter().find(|o| o.id == id)
    }

    pub fn relations(&self) -> impl Iterator<Item = &RelationEntry> {
        self.init.iter().chain(&self.goal)
    }

    pub fn is_missing(&self, key: RecordKey) -> bool {
        match key {
            RecordKey::Init | RecordKey::Goal => {
                self.missing.contains(&key) || self.missing.contains(&RecordKey::Relations)
            }
            _ => self.missing.contains(&key),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum WireError {
    #[error("malformed document: {0}")]
    Malformed(String),
    #[error("expected {expected} at `{path}`")]
    WrongKind { path: String, expected: &'static str },
    #[error("missing `{field}` at `{path}`")]
    MissingField { path: String, field: &'static str },
    #[error("invalid identifier {value:?} at `{path}`")]
    InvalidIdentifier { path: String, value: String },
    #[error("relation at `{path}` gives both `args` and `subject`/`object`")]
    Ambiguous { path: String },
}

fn ident(value: &Value, path: String) -> Result<String, WireError> {
    let s = value.as_str().ok_or(WireError::WrongKind { path: path.clone(), expected: "a string" })?;
    if is_valid_name(s) {
        Ok(s.to_string())
    } else {
        Err(WireError::InvalidIdentifier { path, value: s.to_string() })
    }
}

fn array<'a>(value: &'a Value, path: &str) -> Result<&'a Vec<Value>, WireError> {
    value.as_array().ok_or(WireError::WrongKind { path: path.to_string(), expected: "an array" })
}

fn object<'a>(value: &'a Value, path: &str) -> Result<&'a Map<String, Value>, WireError> {
    value.as_object().ok_or(WireError::WrongKind { path: path.to_string(), expected: "an object" })
}

fn parse_relation(value: &Value, path: String) -> Result<RelationEntry, WireError> {
    let obj = object(value, &path)?;
    let predicate = match obj.get("predicate") {
        Some(p) => ident(p, format!("{path}.predicate"))?,
        None => return Err(WireError::MissingField { path, field: "predicate" }),
    };
    let shorthand = obj.contains_key("subject") || obj.contains_key("object");
    let args = match obj.get("args") {
        Some(_) if shorthand => return Err(WireError::Ambiguous { path }),
        Some(args) => {
            let apath = format!("{path}.args");
            array(args, &apath)?
                .iter()
                .enumerate()
                .map(|(i, a)| ident(a, format!("{apath}[{i}]")))
                .collect::<Result<Vec<_>, _>>()?
        }
        None => {
            let mut args = Vec::new();
            if let Some(s) = obj.get("subject") {
                args.push(ident(s, format!("{path}.subject"))?);
            }
            if let Some(o) = obj.get("object") {
                if args.is_empty() {
                    return Err(WireError::MissingField { path, field: "subject" });
                }
                args.push(ident(o, format!("{path}.object"))?);
            }
            args
        }
    };
    Ok(RelationEntry { predicate, args })
}

fn parse_relation_list(value: &Value, path: &str) -> Result<Vec<RelationEntry>, WireError> {
    array(value, path)?
        .iter()
        .enumerate()
        .map(|(i, r)| parse_relation(r, format!("{path}[{i}]")))
        .collect()
}

/// Parses the wire document. Binary `subject`/`predicate`/`object` entries
/// become `args = [subject, object]`.
pub fn parse_record(wire: &str) -> Result<ExtractionRecord, WireError> {
    let doc: Value = serde_json::from_str(wire).map_err(|e| WireError::Malformed(e.to_string()))?;
    let root = object(&doc, "$")?;
    let mut record = ExtractionRecord::default();

    match root.get("objects") {
        None => {
            record.missing.insert(RecordKey::Objects);
        }
        Some(objs) => {
            for (i, o) in array(objs, "objects")?.iter().enumerate() {
                let path = format!("objects[{i}]");
                let entry = object(o, &path)?;
                let id = match entry.get("id") {
                    Some(v) => ident(v, format!("{path}.id"))?,
                    None => return Err(WireError::MissingField { path, field: "id" }),
                };
                let type_name = match entry.get("type") {
                    None | Some(Value::Null) => None,
                    Some(t) => Some(ident(t, format!("{path}.type"))?),
                };
                record.objects.push(ObjectEntry { id, type_name });
            }
        }
    }

    match root.get("relations") {
        None => {
            record.missing.insert(RecordKey::Relations);
        }
        Some(rel) => {
            let rel = object(rel, "relations")?;
            match rel.get("init") {
                None => {
                    record.missing.insert(RecordKey::Init);
                }
                Some(v) => record.init = parse_relation_list(v, "relations.init")?,
            }
            match rel.get("goal") {
                None => {
                    record.missing.insert(RecordKey::Goal);
                }
                Some(v) => record.goal = parse_relation_list(v, "relations.goal")?,
            }
        }
    }
    Ok(record)
}

#[derive(Serialize)]
struct WireDoc<'a> {
    #[serde(skip_serializing_if = "Option::is_none")]
    objects: Option<&'a [ObjectEntry]>,
    #[serde(skip_serializing_if = "Option::is_none")]
    relations: Option<WireRelations<'a>>,
}

#[derive(Serialize)]
struct WireRelations<'a> {
    #[serde(skip_serializing_if = "Option::is_none")]
    init: Option<&'a [RelationEntry]>,
    #[serde(skip_serializing_if = "Option::is_none")]
    goal: Option<&'a [RelationEntry]>,
}

/// Serializes a record to the wire document, always in the `args` form.
pub fn serialize_record(r: &ExtractionRecord) -> String {
    let relations = (!r.missing.contains(&RecordKey::Relations)).then(|| WireRelations {
        init: (!r.missing.contains(&RecordKey::Init)).then_some(r.init.as_slice()),
        goal: (!r.missing.contains(&RecordKey::Goal)).then_some(r.goal.as_slice()),
    });
    let doc = WireDoc {
        objects: (!r.missing.contains(&RecordKey::Objects)).then_some(r.objects.as_slice()),
        relations,
    };
    serde_json::to_string_pretty(&doc).expect("record serialization is infallible")
}
