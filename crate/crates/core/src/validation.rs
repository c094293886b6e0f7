//! Structural (Level 1) and vocabulary (Level 2) checks on extraction records.
//!
//! Level 1 repairs what a rule can repair and escalates the rest. Level 2 only
//! detects; repair of vocabulary faults belongs to the reflection loop.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::extraction::{ExtractionRecord, ObjectEntry, RecordKey, RelationEntry};
use crate::pddl::ROOT_TYPE;
use crate::schema::ExtractionSchema;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum IssueKind {
    MissingKey,
    MissingType,
    DuplicateId,
    ArityMismatch,
    UnknownPredicate,
    UnknownType,
    UndeclaredObject,
    TypeMismatch,
}

impl IssueKind {
    pub fn level(self) -> u8 {
        match self {
            IssueKind::MissingKey | IssueKind::MissingType | IssueKind::DuplicateId | IssueKind::ArityMismatch => 1,
            _ => 2,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            IssueKind::MissingKey => "MISSING_KEY",
            IssueKind::MissingType => "MISSING_TYPE",
            IssueKind::DuplicateId => "DUPLICATE_ID",
            IssueKind::ArityMismatch => "ARITY_MISMATCH",
            IssueKind::UnknownPredicate => "UNKNOWN_PREDICATE",
            IssueKind::UnknownType => "UNKNOWN_TYPE",
            IssueKind::UndeclaredObject => "UNDECLARED_OBJECT",
            IssueKind::TypeMismatch => "TYPE_MISMATCH",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ValidationIssue {
    pub level: u8,
    pub kind: IssueKind,
    /// Path into the wire document, e.g. `relations.init[0].args[1]`.
    pub location: String,
    pub detail: String,
    pub auto_corrected: bool,
}

impl ValidationIssue {
    fn new(kind: IssueKind, location: impl Into<String>, detail: impl Into<String>, auto_corrected: bool) -> Self {
        ValidationIssue { level: kind.level(), kind, location: location.into(), detail: detail.into(), auto_corrected }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Verdict {
    Pass,
    Corrected,
    /// A Level-1 issue that no rule could repair.
    FailL1,
    FailL2,
}

impl Verdict {
    pub fn is_ok(self) -> bool {
        matches!(self, Verdict::Pass | Verdict::Corrected)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub issues: Vec<ValidationIssue>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub corrected_record: Option<ExtractionRecord>,
    pub verdict: Verdict,
}

impl ValidationReport {
    pub fn uncorrected(&self) -> impl Iterator<Item = &ValidationIssue> {
        self.issues.iter().filter(|i| !i.auto_corrected)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

fn relation_path(in_init: bool, i: usize) -> String {
    format!("{}[{i}]", if in_init { RecordKey::Init.path() } else { RecordKey::Goal.path() })
}

fn indexed_relations(r: &ExtractionRecord) -> impl Iterator<Item = (String, &RelationEntry)> {
    r.init
        .iter()
        .enumerate()
        .map(|(i, rel)| (relation_path(true, i), rel))
        .chain(r.goal.iter().enumerate().map(|(i, rel)| (relation_path(false, i), rel)))
}

/// Slot types the schema assigns to every use of `id` in well-formed relations.
fn slot_types<'s>(r: &ExtractionRecord, s: &'s ExtractionSchema, id: &str) -> BTreeSet<&'s str> {
    let mut out = BTreeSet::new();
    for rel in r.relations() {
        let Some(sig) = s.predicate(&rel.predicate) else { continue };
        if sig.arity() != rel.args.len() {
            continue;
        }
        for (arg, slot) in rel.args.iter().zip(&sig.params) {
            if arg == id {
                out.insert(slot.type_name.as_str());
            }
        }
    }
    out
}

/// The single most specific type compatible with every slot use of `id`.
fn infer_type(r: &ExtractionRecord, s: &ExtractionSchema, id: &str) -> Option<String> {
    let uses = slot_types(r, s, id);
    if uses.is_empty() {
        return s.types.is_untyped().then(|| ROOT_TYPE.to_string());
    }
    uses.iter()
        .find(|&&t| uses.iter().all(|&u| s.types.fits(t, u)))
        .map(|t| t.to_string())
}

/// Structural checks with rule-based correction.
pub fn validate_level1(r: &ExtractionRecord, s: &ExtractionSchema) -> ValidationReport {
    let mut issues = Vec::new();
    let mut out = r.clone();

    if r.is_missing(RecordKey::Goal) {
        issues.push(ValidationIssue::new(
            IssueKind::MissingKey,
            RecordKey::Goal.path(),
            "no goal relations were reported and none can be inferred",
            false,
        ));
    }
    if r.is_missing(RecordKey::Init) {
        issues.push(ValidationIssue::new(
            IssueKind::MissingKey,
            RecordKey::Init.path(),
            "treated as an empty initial state",
            true,
        ));
        out.missing.remove(&RecordKey::Init);
        if !out.missing.contains(&RecordKey::Goal) && out.missing.remove(&RecordKey::Relations) {
            out.missing.insert(RecordKey::Goal);
        }
    }
    if r.is_missing(RecordKey::Objects) {
        let mut rebuilt: Vec<ObjectEntry> = Vec::new();
        for rel in r.relations() {
            for arg in &rel.args {
                if s.constant(arg).is_none() && !rebuilt.iter().any(|o| &o.id == arg) {
                    rebuilt.push(ObjectEntry { id: arg.clone(), type_name: None });
                }
            }
        }
        issues.push(ValidationIssue::new(
            IssueKind::MissingKey,
            RecordKey::Objects.path(),
            format!("rebuilt {} object(s) from relation arguments", rebuilt.len()),
            true,
        ));
        out.objects = rebuilt;
        out.missing.remove(&RecordKey::Objects);
    }

    // Duplicate ids: merge when the declarations agree.
    let mut merged: Vec<ObjectEntry> = Vec::new();
    for (i, obj) in out.objects.iter().enumerate() {
        let Some(first) = merged.iter_mut().find(|o| o.id == obj.id) else {
            merged.push(obj.clone());
            continue;
        };
        let location = format!("objects[{i}]");
        match (&first.type_name, &obj.type_name) {
            (Some(a), Some(b)) if a != b => {
                issues.push(ValidationIssue::new(
                    IssueKind::DuplicateId,
                    location,
                    format!("`{}` declared as both `{a}` and `{b}`", obj.id),
                    false,
                ));
                merged.push(obj.clone());
            }
            (a, b) => {
                if a.is_none() {
                    first.type_name = b.clone();
                }
                issues.push(ValidationIssue::new(
                    IssueKind::DuplicateId,
                    location,
                    format!("repeated declaration of `{}` merged", obj.id),
                    true,
                ));
            }
        }
    }
    out.objects = merged;

    let snapshot = out.clone();
    let mut drop = Vec::new();
    for (i, obj) in out.objects.iter_mut().enumerate() {
        if obj.type_name.is_some() {
            continue;
        }
        let location = format!("objects[{i}].type");
        if let Some(c) = s.constant(&obj.id) {
            drop.push(i);
            issues.push(ValidationIssue::new(
                IssueKind::MissingType,
                location,
                format!("`{}` is a domain constant of type `{}`; declaration dropped", obj.id, c.type_name),
                true,
            ));
        } else if let Some(t) = infer_type(&snapshot, s, &obj.id) {
            issues.push(ValidationIssue::new(
                IssueKind::MissingType,
                location,
                format!("`{}` typed `{t}` from its relation slots", obj.id),
                true,
            ));
            obj.type_name = Some(t);
        } else {
            issues.push(ValidationIssue::new(
                IssueKind::MissingType,
                location,
                format!("no unique type for `{}` follows from its relation slots", obj.id),
                false,
            ));
        }
    }
    for i in drop.into_iter().rev() {
        out.objects.remove(i);
    }

    for (path, rel) in indexed_relations(&out) {
        if let Some(sig) = s.predicate(&rel.predicate) {
            if sig.arity() != rel.args.len() {
                issues.push(ValidationIssue::new(
                    IssueKind::ArityMismatch,
                    format!("{path}.args"),
                    format!("`{}` takes {} argument(s), found {}", rel.predicate, sig.arity(), rel.args.len()),
                    false,
                ));
            }
        }
    }

    let verdict = if issues.is_empty() {
        Verdict::Pass
    } else if issues.iter().all(|i| i.auto_corrected) {
        Verdict::Corrected
    } else {
        Verdict::FailL1
    };
    let corrected_record = (issues.iter().any(|i| i.auto_corrected)).then_some(out);
    ValidationReport { issues, corrected_record, verdict }
}

/// Vocabulary checks against the schema. Detection only.
pub fn validate_level2(r: &ExtractionRecord, s: &ExtractionSchema) -> ValidationReport {
    let mut issues = Vec::new();
    let mut push = |kind, location: String, detail: String| {
        issues.push(ValidationIssue::new(kind, location, detail, false));
    };

    for (i, obj) in r.objects.iter().enumerate() {
        let Some(t) = &obj.type_name else { continue };
        if !s.has_type(t) {
            push(IssueKind::UnknownType, format!("objects[{i}].type"), format!("`{t}` is not a domain type"));
        } else if let Some(c) = s.constant(&obj.id) {
            if c.type_name != *t {
                push(
                    IssueKind::TypeMismatch,
                    format!("objects[{i}].type"),
                    format!("`{}` is a domain constant of type `{}`, not `{t}`", obj.id, c.type_name),
                );
            }
        }
    }

    for (path, rel) in indexed_relations(r) {
        let Some(sig) = s.predicate(&rel.predicate) else {
            push(
                IssueKind::UnknownPredicate,
                format!("{path}.predicate"),
                format!("`{}` is not a domain predicate", rel.predicate),
            );
            continue;
        };
        for (a, arg) in rel.args.iter().enumerate() {
            let declared = s
                .constant(arg)
                .map(|c| Some(c.type_name.as_str()))
                .or_else(|| r.object(arg).map(|o| o.type_name.as_deref()));
            let Some(ty) = declared else {
                push(
                    IssueKind::UndeclaredObject,
                    format!("{path}.args[{a}]"),
                    format!("`{arg}` is neither a declared object nor a constant"),
                );
                continue;
            };
            let (Some(ty), Some(slot)) = (ty, sig.params.get(a)) else { continue };
            if s.has_type(ty) && !s.types.fits(ty, &slot.type_name) {
                push(
                    IssueKind::TypeMismatch,
                    format!("{path}.args[{a}]"),
                    format!("`{arg}` has type `{ty}` but `{}` expects `{}`", rel.predicate, slot.type_name),
                );
            }
        }
    }

    let verdict = if issues.is_empty() { Verdict::Pass } else { Verdict::FailL2 };
    ValidationReport { issues, corrected_record: None, verdict }
}

/// Level 1, then Level 2 on the corrected record when Level 1 did not fail.
pub fn validate(r: &ExtractionRecord, s: &ExtractionSchema) -> ValidationReport {
    let l1 = validate_level1(r, s);
    if l1.verdict == Verdict::FailL1 {
        return l1;
    }
    let target = l1.corrected_record.as_ref().unwrap_or(r);
    let l2 = validate_level2(target, s);
    let verdict = if l2.verdict == Verdict::FailL2 { Verdict::FailL2 } else { l1.verdict };
    let mut issues = l1.issues;
    issues.extend(l2.issues);
    ValidationReport { issues, corrected_record: l1.corrected_record, verdict }
}

/// The record downstream stages should use after a successful validation.
pub fn effective_record<'a>(r: &'a ExtractionRecord, report: &'a ValidationReport) -> &'a ExtractionRecord {
    report.corrected_record.as_ref().unwrap_or(r)
}
