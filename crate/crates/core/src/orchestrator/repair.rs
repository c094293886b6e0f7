use std::collections::HashMap;
use std::fmt::Write;
use std::sync::Arc;
use std::time::Duration;

use thiserror::Error;

use super::Diagnostics;
use crate::extraction::{parse_record, ExtractionRecord, WireError};
use crate::llm::{first_fenced_block, ChatClient, EndpointConfig, EndpointError};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum RepairError {
    #[error(transparent)]
    Endpoint(#[from] EndpointError),
    #[error("no ground truth for task `{0}`")]
    OracleMissing(String),
    #[error("repair reply is not a record: {0}")]
    Wire(#[from] WireError),
    #[error("repair exceeded its {0:?} budget")]
    Timeout(Duration),
}

/// Produces a revised record from self-contained diagnostics.
pub trait RepairAgent: Send + Sync {
    fn repair(&self, diag: &Diagnostics) -> Result<ExtractionRecord, RepairError>;
}

impl<T: RepairAgent + ?Sized> RepairAgent for Arc<T> {
    fn repair(&self, diag: &Diagnostics) -> Result<ExtractionRecord, RepairError> {
        (**self).repair(diag)
    }
}

/// Line-level differences between two records, for transcripts.
pub fn record_diff(before: &ExtractionRecord, after: &ExtractionRecord) -> Vec<String> {
    let mut edits = Vec::new();
    let show_obj = |o: &crate::extraction::ObjectEntry| match &o.type_name {
        Some(t) => format!("{} - {t}", o.id),
        None => format!("{} (untyped)", o.id),
    };
    let objs = |r: &ExtractionRecord| r.objects.iter().map(show_obj).collect::<Vec<_>>();
    let (ob, oa) = (objs(before), objs(after));
    edits.extend(ob.iter().filter(|o| !oa.contains(o)).map(|o| format!("- object {o}")));
    edits.extend(oa.iter().filter(|o| !ob.contains(o)).map(|o| format!("+ object {o}")));
    for (section, b, a) in [("init", &before.init, &after.init), ("goal", &before.goal, &after.goal)] {
        edits.extend(b.iter().filter(|x| !a.contains(x)).map(|x| format!("- {section} {}", x.to_atom())));
        edits.extend(a.iter().filter(|x| !b.contains(x)).map(|x| format!("+ {section} {}", x.to_atom())));
    }
    for key in after.missing.difference(&before.missing) {
        edits.push(format!("- key {}", key.path()));
    }
    for key in before.missing.difference(&after.missing) {
        edits.push(format!("+ key {}", key.path()));
    }
    edits
}

/// Restores a known ground-truth record for each task id.
#[derive(Debug, Clone, Default)]
pub struct OracleRepair {
    truth: HashMap<String, ExtractionRecord>,
}

impl OracleRepair {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, task_id: impl Into<String>, record: ExtractionRecord) {
        self.truth.insert(task_id.into(), record);
    }

    pub fn with(mut self, task_id: impl Into<String>, record: ExtractionRecord) -> Self {
        self.insert(task_id, record);
        self
    }

    /// Ground truth for every bundled fixture.
    pub fn from_corpus() -> Self {
        let mut o = Self::new();
        for f in crate::corpus::FIXTURES {
            o.insert(f.id, parse_record(f.record).expect("bundled fixture parses"));
        }
        o
    }
}

impl RepairAgent for OracleRepair {
    fn repair(&self, diag: &Diagnostics) -> Result<ExtractionRecord, RepairError> {
        self.truth.get(&diag.task_id).cloned().ok_or_else(|| RepairError::OracleMissing(diag.task_id.clone()))
    }
}

pub const REPAIR_INSTRUCTIONS: &str = "You repair structured scene descriptions for a classical planner. \
The previous description failed; the failure report, the planning domain, the task and the current artifacts follow. \
Find the root cause and return the complete corrected description as one JSON object in a ```json fenced block, \
using only the vocabulary of the schema below.";

/// Asks a high-capacity chat model for a corrected record.
#[derive(Debug, Clone)]
pub struct LiveRepair {
    client: ChatClient,
    guide: String,
}

impl LiveRepair {
    pub fn new(config: EndpointConfig, timeout: Duration, schema_guide: impl Into<String>) -> Self {
        LiveRepair { client: ChatClient::new(config, timeout), guide: schema_guide.into() }
    }

    pub fn prompt(diag: &Diagnostics) -> String {
        let mut p = String::new();
        let _ = writeln!(p, "FAILURE\nstage: {:?}\ncode: {}\ndetail: {}\n", diag.source, diag.code, diag.detail);
        let _ = writeln!(p, "TASK\n{}\n", diag.task_text.trim());
        let _ = writeln!(p, "DOMAIN\n{}\n", diag.domain_text.trim());
        if let Some(r) = &diag.record {
            let _ = writeln!(p, "CURRENT DESCRIPTION\n{}\n", crate::extraction::serialize_record(r));
        }
        if let Some(w) = &diag.raw_wire {
            let _ = writeln!(p, "RAW OUTPUT\n{w}\n");
        }
        if let Some(pddl) = &diag.problem_pddl {
            let _ = writeln!(p, "PROBLEM PDDL\n{pddl}\n");
        }
        if let Some(v) = &diag.validation {
            let _ = writeln!(p, "VALIDATION REPORT\n{}\n", v.to_json());
        }
        if let Some(pl) = &diag.planner {
            let _ = writeln!(p, "PLANNER\n{}: {}\n", pl.code.as_str(), pl.detail);
        }
        p
    }
}

impl RepairAgent for LiveRepair {
    fn repair(&self, diag: &Diagnostics) -> Result<ExtractionRecord, RepairError> {
        let system = format!("{REPAIR_INSTRUCTIONS}\n\n{}", self.guide);
        let reply = self.client.complete(&system, &Self::prompt(diag))?;
        Ok(parse_record(first_fenced_block(&reply))?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus;
    use crate::extraction::{inject_fault, FaultKind};
    use crate::llm::fake_server;
    use crate::orchestrator::FailureSource;

    fn diag(task_id: &str, record: Option<ExtractionRecord>) -> Diagnostics {
        Diagnostics {
            task_id: task_id.into(),
            task_text: "put the apple on the plate".into(),
            source: FailureSource::Planner,
            code: "SEARCH_FAIL".into(),
            detail: "exhausted".into(),
            domain_text: corpus::domain("tabletop").unwrap().source.into(),
            record,
            raw_wire: None,
            problem_pddl: None,
            validation: None,
            planner: None,
        }
    }

    #[test]
    fn oracle_restores_ground_truth() {
        let truth = parse_record(corpus::fixture("tabletop-apple").unwrap().record).unwrap();
        let oracle = OracleRepair::from_corpus();
        for kind in [FaultKind::OmitInitFact, FaultKind::HallucinatePredicate] {
            let faulty = inject_fault(&truth, kind, 0).unwrap();
            let fixed = oracle.repair(&diag("tabletop-apple", Some(faulty.clone()))).unwrap();
            assert_eq!(fixed, truth);
            assert!(!record_diff(&faulty, &fixed).is_empty());
        }
        assert_eq!(oracle.repair(&diag("nope", None)), Err(RepairError::OracleMissing("nope".into())));
    }

    #[test]
    fn diff_lists_changes() {
        let truth = parse_record(corpus::fixture("tabletop-apple").unwrap().record).unwrap();
        let faulty = inject_fault(&truth, FaultKind::OmitInitFact, 0).unwrap();
        assert_eq!(record_diff(&faulty, &truth), vec!["+ init (on apple_01 table_main)"]);
        assert!(record_diff(&truth, &truth).is_empty());
    }

    #[test]
    fn live_repair_round_trip() {
        let listing = corpus::fixture("tabletop-apple").unwrap().record;
        let server = fake_server::serve(vec![format!("```json\n{listing}\n```")]);
        let agent = LiveRepair::new(
            EndpointConfig { base_url: server.url.clone(), model: "big".into(), api_key: None },
            Duration::from_secs(5),
            "GUIDE",
        );
        let fixed = agent.repair(&diag("tabletop-apple", None)).unwrap();
        assert_eq!(fixed, parse_record(listing).unwrap());
        let req = &server.join()[0];
        assert!(req.contains("SEARCH_FAIL") && req.contains("GUIDE") && req.contains("tabletop"));
    }

    #[test]
    fn live_repair_unreachable() {
        let l = std::net::TcpListener::bind("127.0.0.1:0").unwrap();
        let url = format!("http://{}", l.local_addr().unwrap());
        drop(l);
        let agent = LiveRepair::new(EndpointConfig { base_url: url, model: "m".into(), api_key: None }, Duration::from_millis(300), "");
        assert!(matches!(agent.repair(&diag("x", None)), Err(RepairError::Endpoint(_))));
    }
}
