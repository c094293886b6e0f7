use std::collections::HashMap;
use std::path::Path;
use std::sync::Arc;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::fault::{inject_fault, FaultKind, InapplicableFault};
use super::record::{parse_record, serialize_record};
use crate::llm::{first_fenced_block, ChatClient, EndpointConfig, EndpointError};

/// A natural-language planning task.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Task {
    pub id: String,
    pub text: String,
}

impl Task {
    pub fn new(id: impl Into<String>, text: impl Into<String>) -> Self {
        Task { id: id.into(), text: text.into() }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ExtractError {
    #[error(transparent)]
    Endpoint(#[from] EndpointError),
    #[error("no fixture for task `{0}`")]
    FixtureMissing(String),
    #[error("extractor exceeded its {0:?} budget")]
    Timeout(Duration),
    #[error(transparent)]
    Fault(#[from] InapplicableFault),
}

/// Turns a task description plus schema guide into raw wire text.
///
/// Implementations are shared across harness workers and must tolerate
/// concurrent calls.
pub trait Extractor: Send + Sync {
    fn extract(&self, task: &Task, guide: &str) -> Result<String, ExtractError>;
}

impl<T: Extractor + ?Sized> Extractor for Arc<T> {
    fn extract(&self, task: &Task, guide: &str) -> Result<String, ExtractError> {
        (**self).extract(task, guide)
    }
}

/// Returns canned wire text keyed by task id.
#[derive(Debug, Clone, Default)]
pub struct ScriptedExtractor {
    fixtures: HashMap<String, String>,
}

impl ScriptedExtractor {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with(mut self, task_id: impl Into<String>, wire: impl Into<String>) -> Self {
        self.insert(task_id, wire);
        self
    }

    pub fn insert(&mut self, task_id: impl Into<String>, wire: impl Into<String>) {
        self.fixtures.insert(task_id.into(), wire.into());
    }

    /// Every bundled fixture, keyed by its id.
    pub fn from_corpus() -> Self {
        let mut s = Self::new();
        for f in crate::corpus::FIXTURES {
            s.insert(f.id, f.record);
        }
        s
    }

    /// Loads `<id>.json` files from a directory.
    pub fn from_dir(dir: &Path) -> std::io::Result<Self> {
        let mut s = Self::new();
        for entry in std::fs::read_dir(dir)? {
            let path = entry?.path();
            if path.extension().is_some_and(|e| e == "json") {
                if let Some(stem) = path.file_stem().and_then(|s| s.to_str()) {
                    s.insert(stem, std::fs::read_to_string(&path)?);
                }
            }
        }
        Ok(s)
    }
}

impl Extractor for ScriptedExtractor {
    fn extract(&self, task: &Task, _guide: &str) -> Result<String, ExtractError> {
        self.fixtures
            .get(&task.id)
            .cloned()
            .ok_or_else(|| ExtractError::FixtureMissing(task.id.clone()))
    }
}

/// Wraps another extractor and applies one fault to whatever it returns.
///
/// Output that does not parse as a record is passed through untouched.
pub struct FaultInjectingExtractor<E> {
    inner: E,
    kind: FaultKind,
    seed: u64,
}

impl<E: Extractor> FaultInjectingExtractor<E> {
    pub fn new(inner: E, kind: FaultKind, seed: u64) -> Self {
        FaultInjectingExtractor { inner, kind, seed }
    }
}

impl<E: Extractor> Extractor for FaultInjectingExtractor<E> {
    fn extract(&self, task: &Task, guide: &str) -> Result<String, ExtractError> {
        let wire = self.inner.extract(task, guide)?;
        match parse_record(&wire) {
            Ok(record) => Ok(serialize_record(&inject_fault(&record, self.kind, self.seed)?)),
            Err(_) => Ok(wire),
        }
    }
}

/// Prompts a chat-completion endpoint with the guide as system context.
#[derive(Debug, Clone)]
pub struct LiveExtractor {
    client: ChatClient,
}

impl LiveExtractor {
    pub fn new(config: EndpointConfig, timeout: Duration) -> Self {
        LiveExtractor { client: ChatClient::new(config, timeout) }
    }
}

impl Extractor for LiveExtractor {
    fn extract(&self, task: &Task, guide: &str) -> Result<String, ExtractError> {
        let reply = self.client.complete(guide, &task.text)?;
        Ok(first_fenced_block(&reply).to_string())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus;
    use crate::llm::fake_server;

    #[test]
    fn scripted_returns_fixture_verbatim() {
        let ex = ScriptedExtractor::from_corpus();
        let wire = ex.extract(&Task::new("tabletop-apple", "ignored"), "").unwrap();
        assert_eq!(wire, corpus::fixture("tabletop-apple").unwrap().record);
    }

    #[test]
    fn scripted_unknown_id() {
        let ex = ScriptedExtractor::new();
        assert_eq!(
            ex.extract(&Task::new("nope", ""), ""),
            Err(ExtractError::FixtureMissing("nope".into()))
        );
    }

    #[test]
    fn fault_injecting_wrapper() {
        let ex = FaultInjectingExtractor::new(ScriptedExtractor::from_corpus(), FaultKind::OmitInitFact, 0);
        let wire = ex.extract(&Task::new("tabletop-apple", ""), "").unwrap();
        assert!(parse_record(&wire).unwrap().init.is_empty());
    }

    #[test]
    fn live_extractor_unreachable_endpoint() {
        let listener = std::net::TcpListener::bind("127.0.0.1:0").unwrap();
        let url = format!("http://{}", listener.local_addr().unwrap());
        drop(listener);
        let ex = LiveExtractor::new(
            EndpointConfig { base_url: url, model: "small".into(), api_key: None },
            Duration::from_millis(500),
        );
        assert!(matches!(ex.extract(&Task::new("t", "x"), "g"), Err(ExtractError::Endpoint(_))));
    }

    #[test]
    fn live_extractor_takes_fenced_block() {
        let listing = corpus::fixture("tabletop-apple").unwrap().record;
        let server = fake_server::serve(vec![format!("Sure.\n```json\n{listing}\n```")]);
        let ex = LiveExtractor::new(
            EndpointConfig { base_url: server.url.clone(), model: "small".into(), api_key: None },
            Duration::from_secs(5),
        );
        let wire = ex.extract(&Task::new("t", "put the apple on the plate"), "GUIDE").unwrap();
        assert_eq!(parse_record(&wire).unwrap(), parse_record(listing).unwrap());
        let req = &server.join()[0];
        assert!(req.contains("GUIDE") && req.contains("put the apple on the plate"));
    }
}
