use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::extraction::{parse_record, ExtractionRecord, FaultKind, WireError};
use crate::mapper::{map_to_problem, MapError};
use crate::pddl::{parse_domain, Domain, ParseError, ProblemSpec};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FaultSpec {
    pub kind: FaultKind,
    /// Derived from the suite seed when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub task_id: String,
    pub domain: PathBuf,
    pub task: PathBuf,
    /// Canned extractor output; without it the suite's fallback extractor is used.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fixture: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ground_truth: Option<PathBuf>,
    #[serde(default = "yes")]
    pub expect_solvable: bool,
    #[serde(default = "one")]
    pub repetitions: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fault: Option<FaultSpec>,
}

fn yes() -> bool {
    true
}

fn one() -> u32 {
    1
}

impl ManifestEntry {
    pub fn new(task_id: impl Into<String>, domain: impl Into<PathBuf>, task: impl Into<PathBuf>) -> Self {
        ManifestEntry {
            task_id: task_id.into(),
            domain: domain.into(),
            task: task.into(),
            fixture: None,
            ground_truth: None,
            expect_solvable: true,
            repetitions: 1,
            fault: None,
        }
    }
}

/// A benchmark suite. Relative paths resolve against the manifest's directory.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SuiteManifest {
    pub suite: String,
    pub entries: Vec<ManifestEntry>,
}

#[derive(Debug, Error)]
pub enum ManifestError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("manifest: {0}")]
    Json(#[from] serde_json::Error),
    #[error("entry `{task_id}`: {message}")]
    Invalid { task_id: String, message: String },
    #[error("{path}: {source}")]
    Domain { path: PathBuf, source: ParseError },
    #[error("{path}: {source}")]
    Record { path: PathBuf, source: WireError },
    #[error("ground truth for `{task_id}` does not map: {source}")]
    GroundTruth { task_id: String, source: MapError },
}

fn read(path: &Path) -> Result<String, ManifestError> {
    std::fs::read_to_string(path).map_err(|source| ManifestError::Io { path: path.to_path_buf(), source })
}

/// An entry with every referenced file read and parsed.
#[derive(Debug, Clone)]
pub struct LoadedEntry {
    pub entry: ManifestEntry,
    pub domain_text: String,
    pub domain: Domain,
    pub task_text: String,
    pub fixture: Option<String>,
    pub truth: Option<(ExtractionRecord, ProblemSpec)>,
}

impl SuiteManifest {
    pub fn from_json(text: &str) -> Result<Self, ManifestError> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("manifest serializes")
    }

    /// Reads a manifest file, returning it with its base directory.
    pub fn load(path: &Path) -> Result<(Self, PathBuf), ManifestError> {
        let m = Self::from_json(&read(path)?)?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Ok((m, base))
    }

    pub fn total_runs(&self) -> u64 {
        self.entries.iter().map(|e| e.repetitions as u64).sum()
    }

    /// Resolves and parses everything the suite refers to.
    pub fn resolve(&self, base: &Path) -> Result<Vec<LoadedEntry>, ManifestError> {
        self.entries
            .iter()
            .map(|e| {
                if e.repetitions == 0 {
                    return Err(ManifestError::Invalid { task_id: e.task_id.clone(), message: "repetitions must be at least 1".into() });
                }
                let domain_path = base.join(&e.domain);
                let domain_text = read(&domain_path)?;
                let domain = parse_domain(&domain_text).map_err(|source| ManifestError::Domain { path: domain_path, source })?;
                let task_text = read(&base.join(&e.task))?;
                let fixture = e.fixture.as_ref().map(|p| read(&base.join(p))).transpose()?;
                let truth = match &e.ground_truth {
                    None => None,
                    Some(p) => {
                        let path = base.join(p);
                        let record = parse_record(&read(&path)?).map_err(|source| ManifestError::Record { path, source })?;
                        let problem = map_to_problem(&record, &domain, "ground-truth")
                            .map_err(|source| ManifestError::GroundTruth { task_id: e.task_id.clone(), source })?;
                        Some((record, problem))
                    }
                };
                Ok(LoadedEntry { entry: e.clone(), domain_text, domain, task_text, fixture, truth })
            })
            .collect()
    }
}
