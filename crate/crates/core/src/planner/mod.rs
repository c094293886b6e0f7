//! Grounding, relaxed-reachability heuristics and best-first search over
//! STRIPS tasks, plus an adapter for external solver processes.

mod external;
mod ground;
mod heuristic;
mod plan;
mod search;

use std::collections::BTreeSet;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::pddl::{Domain, GroundAtom, ProblemSpec};

pub use external::{solve_external, ExternalSolver, ProcessError, DEFAULT_SOLVER_COMMAND};
pub use ground::{ground, GroundAction, GroundTask, State};
pub use heuristic::heuristic_value;
pub use plan::{format_plan, parse_plan, Plan, PlanParseError, PlanStep};
pub use search::solve;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum SearchMode {
    Satisficing,
    Optimal,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Heuristic {
    HAdd,
    HMax,
    Goalcount,
    Blind,
}

impl Heuristic {
    pub fn is_admissible(self) -> bool {
        matches!(self, Heuristic::HMax | Heuristic::Blind)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("optimal search needs an admissible heuristic, got {0:?}")]
pub struct ConfigError(pub Heuristic);

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
struct RawSearchConfig {
    mode: SearchMode,
    heuristic: Heuristic,
    #[serde(default = "default_time_budget")]
    time_budget_secs: f64,
    #[serde(default = "default_expansion_budget")]
    expansion_budget: u64,
}

fn default_time_budget() -> f64 {
    30.0
}

fn default_expansion_budget() -> u64 {
    1_000_000
}

/// Search settings. Optimal mode always carries an admissible heuristic.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawSearchConfig", into = "RawSearchConfig")]
pub struct SearchConfig {
    raw: RawSearchConfig,
}

impl TryFrom<RawSearchConfig> for SearchConfig {
    type Error = ConfigError;

    fn try_from(raw: RawSearchConfig) -> Result<Self, ConfigError> {
        if raw.mode == SearchMode::Optimal && !raw.heuristic.is_admissible() {
            return Err(ConfigError(raw.heuristic));
        }
        Ok(SearchConfig { raw })
    }
}

impl From<SearchConfig> for RawSearchConfig {
    fn from(c: SearchConfig) -> Self {
        c.raw
    }
}

impl Default for SearchConfig {
    fn default() -> Self {
        SearchConfig::satisficing()
    }
}

impl SearchConfig {
    pub fn new(mode: SearchMode, heuristic: Heuristic) -> Result<Self, ConfigError> {
        RawSearchConfig {
            mode,
            heuristic,
            time_budget_secs: default_time_budget(),
            expansion_budget: default_expansion_budget(),
        }
        .try_into()
    }

    /// Greedy best-first with h_add.
    pub fn satisficing() -> Self {
        Self::new(SearchMode::Satisficing, Heuristic::HAdd).unwrap()
    }

    /// A* with h_max.
    pub fn optimal() -> Self {
        Self::new(SearchMode::Optimal, Heuristic::HMax).unwrap()
    }

    pub fn with_time_budget(mut self, budget: Duration) -> Self {
        self.raw.time_budget_secs = budget.as_secs_f64();
        self
    }

    pub fn with_expansion_budget(mut self, budget: u64) -> Self {
        self.raw.expansion_budget = budget;
        self
    }

    pub fn mode(&self) -> SearchMode {
        self.raw.mode
    }

    pub fn heuristic(&self) -> Heuristic {
        self.raw.heuristic
    }

    pub fn time_budget(&self) -> Duration {
        Duration::from_secs_f64(self.raw.time_budget_secs.max(0.0))
    }

    pub fn expansion_budget(&self) -> u64 {
        self.raw.expansion_budget
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum DiagnosticCode {
    ParseFail,
    GroundFail,
    SearchFail,
    Timeout,
}

impl DiagnosticCode {
    pub fn as_str(self) -> &'static str {
        match self {
            DiagnosticCode::ParseFail => "PARSE_FAIL",
            DiagnosticCode::GroundFail => "GROUND_FAIL",
            DiagnosticCode::SearchFail => "SEARCH_FAIL",
            DiagnosticCode::Timeout => "TIMEOUT",
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SearchStats {
    pub expansions: u64,
    pub generated: u64,
    pub elapsed_ms: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Diagnostic {
    pub code: DiagnosticCode,
    pub detail: String,
    pub stats: SearchStats,
}

impl Diagnostic {
    pub fn new(code: DiagnosticCode, detail: impl Into<String>) -> Self {
        Diagnostic { code, detail: detail.into(), stats: SearchStats::default() }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "outcome", rename_all = "snake_case")]
pub enum PlannerOutcome {
    Plan {
        plan: Plan,
        /// Known for the embedded planner; external solvers do not report it.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        final_state: Option<BTreeSet<GroundAtom>>,
        stats: SearchStats,
    },
    Diagnostic(Diagnostic),
}

impl PlannerOutcome {
    pub fn plan(&self) -> Option<&Plan> {
        match self {
            PlannerOutcome::Plan { plan, .. } => Some(plan),
            PlannerOutcome::Diagnostic(_) => None,
        }
    }

    pub fn diagnostic(&self) -> Option<&Diagnostic> {
        match self {
            PlannerOutcome::Plan { .. } => None,
            PlannerOutcome::Diagnostic(d) => Some(d),
        }
    }
}

/// Grounds and solves in one call; grounding failures become diagnostics.
pub fn plan_problem(d: &Domain, p: &ProblemSpec, cfg: &SearchConfig) -> PlannerOutcome {
    match ground(d, p) {
        Ok(task) => solve(&task, cfg),
        Err(diag) => PlannerOutcome::Diagnostic(diag),
    }
}
