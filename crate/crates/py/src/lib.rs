//! Python bindings. Structured results cross the boundary as JSON strings.

use std::path::Path;
use std::sync::Arc;
use std::time::Duration;

use duplex_core::extraction::{
    inject_fault, parse_record, serialize_record, ExtractionRecord, Extractor, FaultInjectingExtractor, FaultKind,
    ScriptedExtractor, Task,
};
use duplex_core::harness::{emit_report, run_suite, ReportFormat, SuiteManifest, SuiteOptions};
use duplex_core::mapper::map_and_render;
use duplex_core::orchestrator::{Arm, OracleRepair, Pipeline as CorePipeline, PipelineConfig, RunRecord};
use duplex_core::pddl::{parse_domain, parse_problem, render_problem, Domain as CoreDomain, ProblemSpec};
use duplex_core::plan_validator::validate_plan;
use duplex_core::planner::{parse_plan, plan_problem, Heuristic, PlannerOutcome, SearchConfig, SearchMode};
use duplex_core::schema::{derive_schema, render_schema_guide};
use duplex_core::validation::{effective_record, validate};
use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;

fn value_err(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn json<T: serde::Serialize>(v: &T) -> String {
    serde_json::to_string(v).expect("serializable")
}

/// A parsed planning domain.
#[pyclass(frozen, module = "duplex")]
struct Domain {
    text: String,
    inner: CoreDomain,
}

#[pymethods]
impl Domain {
    #[new]
    fn new(text: String) -> PyResult<Self> {
        let inner = parse_domain(&text).map_err(value_err)?;
        Ok(Domain { text, inner })
    }

    #[staticmethod]
    fn from_file(path: &str) -> PyResult<Self> {
        Self::new(std::fs::read_to_string(path).map_err(value_err)?)
    }

    #[getter]
    fn name(&self) -> &str {
        &self.inner.name
    }

    #[getter]
    fn predicates(&self) -> Vec<String> {
        self.inner.predicates.iter().map(|p| p.name.clone()).collect()
    }

    #[getter]
    fn actions(&self) -> Vec<String> {
        self.inner.actions.iter().map(|a| a.name.clone()).collect()
    }

    #[getter]
    fn types(&self) -> Vec<String> {
        self.inner.types.names().map(str::to_string).collect()
    }

    fn schema_json(&self) -> String {
        json(&derive_schema(&self.inner))
    }

    fn schema_guide(&self) -> String {
        render_schema_guide(&derive_schema(&self.inner))
    }

    fn to_json(&self) -> String {
        json(&self.inner)
    }

    fn __repr__(&self) -> String {
        format!("Domain({:?}, {} actions)", self.inner.name, self.inner.actions.len())
    }
}

/// An extraction record in the wire format.
#[pyclass(frozen, module = "duplex")]
struct Record {
    inner: ExtractionRecord,
}

#[pymethods]
impl Record {
    #[new]
    fn new(wire: &str) -> PyResult<Self> {
        Ok(Record { inner: parse_record(wire).map_err(value_err)? })
    }

    fn to_json(&self) -> String {
        serialize_record(&self.inner)
    }

    /// Validation report as JSON.
    fn validate(&self, domain: &Domain) -> String {
        validate(&self.inner, &derive_schema(&domain.inner)).to_json()
    }

    /// The record after automatic corrections, or None if validation fails.
    fn corrected(&self, domain: &Domain) -> Option<Record> {
        let rep = validate(&self.inner, &derive_schema(&domain.inner));
        rep.verdict.is_ok().then(|| Record { inner: effective_record(&self.inner, &rep).clone() })
    }

    /// Problem file text for this record.
    fn to_pddl(&self, domain: &Domain, name: &str) -> PyResult<String> {
        map_and_render(&self.inner, &domain.inner, name).map_err(value_err)
    }

    fn with_fault(&self, kind: &str, seed: u64) -> PyResult<Record> {
        let kind: FaultKind = kind.parse().map_err(value_err)?;
        Ok(Record { inner: inject_fault(&self.inner, kind, seed).map_err(value_err)? })
    }

    #[getter]
    fn object_ids(&self) -> Vec<String> {
        self.inner.objects.iter().map(|o| o.id.clone()).collect()
    }
}

/// A problem instance bound to its domain.
#[pyclass(frozen, module = "duplex")]
struct Problem {
    domain: CoreDomain,
    inner: ProblemSpec,
}

fn search_config(mode: &str, heuristic: Option<&str>, budget_secs: Option<f64>) -> PyResult<SearchConfig> {
    let mode = match mode.to_ascii_lowercase().as_str() {
        "satisficing" => SearchMode::Satisficing,
        "optimal" => SearchMode::Optimal,
        other => return Err(value_err(format!("unknown mode {other:?}"))),
    };
    let h = match heuristic.map(|h| h.to_ascii_lowercase().replace('-', "_")) {
        None if mode == SearchMode::Optimal => Heuristic::HMax,
        None => Heuristic::HAdd,
        Some(h) => match h.as_str() {
            "h_add" | "hadd" => Heuristic::HAdd,
            "h_max" | "hmax" => Heuristic::HMax,
            "goalcount" => Heuristic::Goalcount,
            "blind" => Heuristic::Blind,
            other => return Err(value_err(format!("unknown heuristic {other:?}"))),
        },
    };
    let mut cfg = SearchConfig::new(mode, h).map_err(value_err)?;
    if let Some(b) = budget_secs {
        if !(b > 0.0) {
            return Err(value_err("budget must be positive"));
        }
        cfg = cfg.with_time_budget(Duration::from_secs_f64(b));
    }
    Ok(cfg)
}

#[pymethods]
impl Problem {
    #[new]
    fn new(text: &str, domain: &Domain) -> PyResult<Self> {
        let inner = parse_problem(text, &domain.inner).map_err(value_err)?;
        Ok(Problem { domain: domain.inner.clone(), inner })
    }

    #[getter]
    fn name(&self) -> &str {
        &self.inner.name
    }

    fn to_pddl(&self) -> String {
        render_problem(&self.inner)
    }

    /// Plan steps such as "(pick-up a)"; raises RuntimeError with the planner diagnostic otherwise.
    #[pyo3(signature = (mode = "satisficing", heuristic = None, budget_secs = None))]
    fn plan(&self, py: Python<'_>, mode: &str, heuristic: Option<&str>, budget_secs: Option<f64>) -> PyResult<Vec<String>> {
        let cfg = search_config(mode, heuristic, budget_secs)?;
        match py.detach(|| plan_problem(&self.domain, &self.inner, &cfg)) {
            PlannerOutcome::Plan { plan, .. } => Ok(plan.steps.iter().map(|s| s.to_string()).collect()),
            PlannerOutcome::Diagnostic(d) => Err(PyRuntimeError::new_err(format!("{}: {}", d.code.as_str(), d.detail))),
        }
    }

    /// Plan verdict as JSON for plan text with one step per line.
    fn validate_plan(&self, plan: &str) -> PyResult<String> {
        let steps = parse_plan(plan).map_err(value_err)?;
        Ok(json(&validate_plan(&self.domain, &self.inner, &steps)))
    }
}

/// The result of one pipeline run.
#[pyclass(frozen, module = "duplex")]
struct Outcome {
    inner: RunRecord,
}

#[pymethods]
impl Outcome {
    #[getter]
    fn solved(&self) -> bool {
        self.inner.solved()
    }

    #[getter]
    fn failure(&self) -> Option<&'static str> {
        self.inner.failure.map(|f| f.as_str())
    }

    #[getter]
    fn repair_calls(&self) -> u32 {
        self.inner.repair_calls
    }

    #[getter]
    fn plan(&self) -> Option<Vec<String>> {
        self.inner.plan.as_ref().map(|p| p.steps.iter().map(|s| s.to_string()).collect())
    }

    #[getter]
    fn problem_pddl(&self) -> Option<String> {
        self.inner.problem_pddl.clone()
    }

    fn to_json(&self) -> String {
        self.inner.to_json()
    }

    fn __repr__(&self) -> String {
        format!("Outcome(task={:?}, solved={}, repair_calls={})", self.inner.task_id, self.solved(), self.inner.repair_calls)
    }
}

fn config(config_json: Option<&str>) -> PyResult<PipelineConfig> {
    let cfg: PipelineConfig = match config_json {
        Some(t) => serde_json::from_str(t).map_err(value_err)?,
        None => PipelineConfig::default(),
    };
    cfg.check().map_err(value_err)?;
    Ok(cfg)
}

/// Runs the pipeline on one task with a canned extractor output and an optional repair oracle.
#[pyfunction]
#[pyo3(signature = (domain, task_id, task_text, extraction, arm = "duplex", truth = None, fault = None, seed = 0, config_json = None))]
#[allow(clippy::too_many_arguments)]
fn solve(
    py: Python<'_>,
    domain: &Domain,
    task_id: &str,
    task_text: &str,
    extraction: &str,
    arm: &str,
    truth: Option<&Record>,
    fault: Option<&str>,
    seed: u64,
    config_json: Option<&str>,
) -> PyResult<Outcome> {
    let arm: Arm = arm.parse().map_err(value_err)?;
    let cfg = config(config_json)?;
    let base: Arc<dyn Extractor> = Arc::new(ScriptedExtractor::new().with(task_id, extraction));
    let extractor: Arc<dyn Extractor> = match fault {
        Some(k) => Arc::new(FaultInjectingExtractor::new(base, k.parse::<FaultKind>().map_err(value_err)?, seed)),
        None => base,
    };
    let mut oracle = OracleRepair::new();
    if let Some(t) = truth {
        oracle.insert(task_id, t.inner.clone());
    }
    let p = CorePipeline::new(&domain.text, cfg, extractor, Arc::new(oracle)).map_err(value_err)?;
    let task = Task::new(task_id, task_text);
    let inner = py.detach(|| p.run(&task, arm));
    Ok(Outcome { inner })
}

/// Runs a suite manifest and returns the report in the requested format.
#[pyfunction(name = "bench")]
#[pyo3(signature = (manifest, arm = "duplex", seed = 0, workers = None, format = "machine", config_json = None))]
fn run_bench(
    py: Python<'_>,
    manifest: &str,
    arm: &str,
    seed: u64,
    workers: Option<usize>,
    format: &str,
    config_json: Option<&str>,
) -> PyResult<String> {
    let arm: Arm = arm.parse().map_err(value_err)?;
    let format: ReportFormat = format.parse().map_err(value_err)?;
    let cfg = config(config_json)?;
    let (m, base) = SuiteManifest::load(Path::new(manifest)).map_err(value_err)?;
    let opts = SuiteOptions { workers, seed, ..SuiteOptions::default() };
    let report = py.detach(|| run_suite(&m, &base, &cfg, arm, &opts)).map_err(value_err)?;
    Ok(emit_report(&report, format))
}

#[pymodule]
fn duplex(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<Domain>()?;
    m.add_class::<Record>()?;
    m.add_class::<Problem>()?;
    m.add_class::<Outcome>()?;
    m.add_function(wrap_pyfunction!(solve, m)?)?;
    m.add_function(wrap_pyfunction!(run_bench, m)?)?;
    Ok(())
}
