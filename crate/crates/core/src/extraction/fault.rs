//! Single-fault perturbations of extraction records, modelling the ways a
//! small extractor goes wrong.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::record::{ExtractionRecord, RecordKey};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum FaultKind {
    DropMandatoryKey,
    StripObjectType,
    DuplicateObjectId,
    HallucinatePredicate,
    HallucinateType,
    UndeclaredArg,
    OmitInitFact,
    OmitGoalFact,
}

/// Where a fault is expected to surface.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum DetectionLevel {
    /// Structural check, repaired by rule.
    Level1,
    /// Vocabulary check against the schema.
    Level2,
    /// Passes both checks; only planning or plan validation exposes it.
    Level3,
}

impl FaultKind {
    pub const ALL: [FaultKind; 8] = [
        FaultKind::DropMandatoryKey,
        FaultKind::StripObjectType,
        FaultKind::DuplicateObjectId,
        FaultKind::HallucinatePredicate,
        FaultKind::HallucinateType,
        FaultKind::UndeclaredArg,
        FaultKind::OmitInitFact,
        FaultKind::OmitGoalFact,
    ];

    pub fn expected_level(self) -> DetectionLevel {
        match self {
            FaultKind::DropMandatoryKey | FaultKind::StripObjectType | FaultKind::DuplicateObjectId => {
                DetectionLevel::Level1
            }
            FaultKind::HallucinatePredicate | FaultKind::HallucinateType | FaultKind::UndeclaredArg => {
                DetectionLevel::Level2
            }
            FaultKind::OmitInitFact | FaultKind::OmitGoalFact => DetectionLevel::Level3,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            FaultKind::DropMandatoryKey => "DROP_MANDATORY_KEY",
            FaultKind::StripObjectType => "STRIP_OBJECT_TYPE",
            FaultKind::DuplicateObjectId => "DUPLICATE_OBJECT_ID",
            FaultKind::HallucinatePredicate => "HALLUCINATE_PREDICATE",
            FaultKind::HallucinateType => "HALLUCINATE_TYPE",
            FaultKind::UndeclaredArg => "UNDECLARED_ARG",
            FaultKind::OmitInitFact => "OMIT_INIT_FACT",
            FaultKind::OmitGoalFact => "OMIT_GOAL_FACT",
        }
    }
}

impl fmt::Display for FaultKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for FaultKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let upper = s.trim().to_ascii_uppercase().replace('-', "_");
        FaultKind::ALL
            .into_iter()
            .find(|k| k.as_str() == upper)
            .ok_or_else(|| format!("unknown fault kind `{s}`"))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("cannot apply {kind}: {reason}")]
pub struct InapplicableFault {
    pub kind: FaultKind,
    pub reason: &'static str,
}

const FICTIONAL_PREDICATES: [&str; 4] = ["levitates", "teleported", "glowing", "floats-above"];
const FICTIONAL_TYPES: [&str; 4] = ["gizmo", "contraption", "widget", "thingamajig"];

fn pick(seed: u64, n: usize) -> usize {
    (seed % n as u64) as usize
}

/// Applies exactly one perturbation of `kind`, chosen deterministically by `seed`.
///
/// `DROP_MANDATORY_KEY` drops the `objects` key, the one mandatory key whose
/// content Level 1 can rebuild from the relations.
pub fn inject_fault(
    r: &ExtractionRecord,
    kind: FaultKind,
    seed: u64,
) -> Result<ExtractionRecord, InapplicableFault> {
    let fail = |reason| Err(InapplicableFault { kind, reason });
    let mut out = r.clone();
    match kind {
        FaultKind::DropMandatoryKey => {
            if r.is_missing(RecordKey::Objects) || r.objects.is_empty() {
                return fail("no objects to drop");
            }
            out.objects.clear();
            out.missing.insert(RecordKey::Objects);
        }
        FaultKind::StripObjectType => {
            let typed: Vec<usize> =
                (0..r.objects.len()).filter(|&i| r.objects[i].type_name.is_some()).collect();
            if typed.is_empty() {
                return fail("no typed object");
            }
            out.objects[typed[pick(seed, typed.len())]].type_name = None;
        }
        FaultKind::DuplicateObjectId => {
            if r.objects.is_empty() {
                return fail("no objects");
            }
            let i = pick(seed, r.objects.len());
            out.objects.insert(i + 1, r.objects[i].clone());
        }
        FaultKind::HallucinatePredicate => {
            let n = r.init.len() + r.goal.len();
            if n == 0 {
                return fail("no relations");
            }
            let i = pick(seed, n);
            let fake = FICTIONAL_PREDICATES[pick(seed / n as u64, FICTIONAL_PREDICATES.len())];
            let rel = if i < r.init.len() { &mut out.init[i] } else { &mut out.goal[i - r.init.len()] };
            rel.predicate = fake.to_string();
        }
        FaultKind::HallucinateType => {
            if r.objects.is_empty() {
                return fail("no objects");
            }
            let i = pick(seed, r.objects.len());
            let fake = FICTIONAL_TYPES[pick(seed / r.objects.len() as u64, FICTIONAL_TYPES.len())];
            out.objects[i].type_name = Some(fake.to_string());
        }
        FaultKind::UndeclaredArg => {
            let slots: Vec<(bool, usize, usize)> = r
                .init
                .iter()
                .enumerate()
                .flat_map(|(i, rel)| (0..rel.args.len()).map(move |a| (true, i, a)))
                .chain(
                    r.goal
                        .iter()
                        .enumerate()
                        .flat_map(|(i, rel)| (0..rel.args.len()).map(move |a| (false, i, a))),
                )
                .collect();
            if slots.is_empty() {
                return fail("no relation arguments");
            }
            let (in_init, i, a) = slots[pick(seed, slots.len())];
            let mut n = seed % 100;
            let phantom = loop {
                let candidate = format!("phantom_{n:02}");
                let used = r.objects.iter().any(|o| o.id == candidate)
                    || r.relations().any(|rel| rel.args.contains(&candidate));
                if !used {
                    break candidate;
                }
                n += 1;
            };
            let rel = if in_init { &mut out.init[i] } else { &mut out.goal[i] };
            rel.args[a] = phantom;
        }
        FaultKind::OmitInitFact => {
            if r.init.is_empty() {
                return fail("no init facts");
            }
            out.init.remove(pick(seed, r.init.len()));
        }
        FaultKind::OmitGoalFact => {
            if r.goal.is_empty() {
                return fail("no goal facts");
            }
            out.goal.remove(pick(seed, r.goal.len()));
        }
    }
    Ok(out)
}
