//! The feed-forward pipeline and its failure-triggered reflection loop.

mod pipeline;
mod repair;

use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::extraction::ExtractionRecord;
use crate::planner::{Diagnostic, ExternalSolver, Plan, SearchConfig};
use crate::validation::ValidationReport;

pub use pipeline::Pipeline;
pub use repair::{record_diff, LiveRepair, OracleRepair, RepairAgent, RepairError, REPAIR_INSTRUCTIONS};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Arm {
    /// Feed-forward only.
    Fast,
    /// Feed-forward plus reflection.
    Duplex,
}

impl std::str::FromStr for Arm {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s.to_ascii_lowercase().as_str() {
            "fast" => Ok(Arm::Fast),
            "duplex" => Ok(Arm::Duplex),
            _ => Err(format!("unknown arm `{s}`")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SolverChoice {
    #[default]
    Internal,
    External(ExternalSolver),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExtractorChoice {
    #[default]
    Scripted,
    Live,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RepairChoice {
    #[default]
    Oracle,
    Live,
}

#[derive(Debug, Clone, PartialEq, Error)]
#[error("invalid pipeline config: {0}")]
pub struct PipelineConfigError(pub String);

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PipelineConfig {
    pub llm_time_budget_secs: f64,
    pub planner_time_budget_secs: f64,
    /// 0 disables reflection.
    pub max_reflection_iters: u32,
    pub search: SearchConfig,
    pub solver: SolverChoice,
    pub extractor: ExtractorChoice,
    pub repair: RepairChoice,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            llm_time_budget_secs: 60.0,
            planner_time_budget_secs: 500.0,
            max_reflection_iters: 3,
            search: SearchConfig::satisficing(),
            solver: SolverChoice::Internal,
            extractor: ExtractorChoice::Scripted,
            repair: RepairChoice::Oracle,
        }
    }
}

impl PipelineConfig {
    pub fn check(&self) -> Result<(), PipelineConfigError> {
        for (name, v) in [("llm", self.llm_time_budget_secs), ("planner", self.planner_time_budget_secs)] {
            if !(v.is_finite() && v > 0.0) {
                return Err(PipelineConfigError(format!("{name} budget must be positive, got {v}")));
            }
        }
        Ok(())
    }

    pub fn llm_budget(&self) -> Duration {
        Duration::from_secs_f64(self.llm_time_budget_secs)
    }

    pub fn planner_budget(&self) -> Duration {
        Duration::from_secs_f64(self.planner_time_budget_secs)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Stage {
    Extract,
    Parse,
    Level1,
    Level2,
    Map,
    Plan,
    Validate,
    Repair,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StageOutcome {
    pub stage: Stage,
    pub ok: bool,
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub detail: String,
    pub elapsed_ms: u64,
}

/// Where a failure was detected.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum FailureSource {
    /// The extractor output is not a well-formed record.
    #[serde(rename = "WIRE")]
    Wire,
    #[serde(rename = "L1")]
    Level1,
    #[serde(rename = "L2")]
    Level2,
    #[serde(rename = "MAPPER")]
    Mapper,
    #[serde(rename = "PLANNER")]
    Planner,
    #[serde(rename = "VALIDATOR")]
    Validator,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum FailureClass {
    LlmTimeout,
    EndpointError,
    WireError,
    Level1,
    Level2,
    MapError,
    ParseFail,
    GroundFail,
    SearchFail,
    PlannerTimeout,
    SolverError,
    ValidatorReject,
    /// The pipeline accepted a plan that fails the ground-truth problem.
    GroundTruthReject,
}

impl FailureClass {
    /// Whether this failure wakes the reflection loop.
    pub fn triggers_reflection(self) -> bool {
        matches!(
            self,
            FailureClass::WireError
                | FailureClass::Level1
                | FailureClass::Level2
                | FailureClass::MapError
                | FailureClass::ParseFail
                | FailureClass::GroundFail
                | FailureClass::SearchFail
                | FailureClass::ValidatorReject
        )
    }

    pub fn as_str(self) -> &'static str {
        match self {
            FailureClass::LlmTimeout => "LLM_TIMEOUT",
            FailureClass::EndpointError => "ENDPOINT_ERROR",
            FailureClass::WireError => "WIRE_ERROR",
            FailureClass::Level1 => "LEVEL1",
            FailureClass::Level2 => "LEVEL2",
            FailureClass::MapError => "MAP_ERROR",
            FailureClass::ParseFail => "PARSE_FAIL",
            FailureClass::GroundFail => "GROUND_FAIL",
            FailureClass::SearchFail => "SEARCH_FAIL",
            FailureClass::PlannerTimeout => "PLANNER_TIMEOUT",
            FailureClass::SolverError => "SOLVER_ERROR",
            FailureClass::ValidatorReject => "VALIDATOR_REJECT",
            FailureClass::GroundTruthReject => "GROUND_TRUTH_REJECT",
        }
    }

    pub fn is_timeout(self) -> bool {
        matches!(self, FailureClass::LlmTimeout | FailureClass::PlannerTimeout)
    }
}

/// Everything a repair agent needs, with no outside context.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    pub task_id: String,
    pub task_text: String,
    pub source: FailureSource,
    pub code: String,
    pub detail: String,
    pub domain_text: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub record: Option<ExtractionRecord>,
    /// Raw extractor output when it did not parse.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub raw_wire: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub problem_pddl: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub validation: Option<ValidationReport>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub planner: Option<Diagnostic>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum RunStatus {
    Solved,
    Failed,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum HaltReason {
    /// The repair agent returned the record it was given.
    Stagnation,
    IterationBudget,
}

/// One pass from a record to a validated plan or a failure.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Attempt {
    pub stages: Vec<StageOutcome>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub failure: Option<FailureClass>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub diagnostics: Option<Diagnostics>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Iteration {
    /// 1-based.
    pub index: u32,
    pub trigger: FailureClass,
    pub repair_ms: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub repair_error: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub revised_record: Option<ExtractionRecord>,
    /// Human-readable changes relative to the diagnosed record.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub edits: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub attempt: Option<Attempt>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub task_id: String,
    pub arm: Arm,
    pub stages: Vec<StageOutcome>,
    pub iterations: Vec<Iteration>,
    pub status: RunStatus,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub failure: Option<FailureClass>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub halt: Option<HaltReason>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub plan: Option<Plan>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub final_record: Option<ExtractionRecord>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub problem_pddl: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub diagnostics: Option<Diagnostics>,
    pub repair_calls: u32,
    pub llm_ms: u64,
    pub elapsed_ms: u64,
}

impl RunRecord {
    pub fn solved(&self) -> bool {
        self.status == RunStatus::Solved
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("run record serializes")
    }
}
