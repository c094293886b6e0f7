use std::sync::mpsc;
use std::sync::Arc;
use std::time::{Duration, Instant};

use thiserror::Error;

use super::repair::{record_diff, RepairAgent, RepairError};
use super::{
    Arm, Attempt, Diagnostics, FailureClass, FailureSource, HaltReason, Iteration, PipelineConfig,
    PipelineConfigError, RunRecord, RunStatus, SolverChoice, Stage, StageOutcome,
};
use crate::extraction::{parse_record, ExtractError, ExtractionRecord, Extractor, Task};
use crate::mapper::map_to_problem;
use crate::pddl::{is_valid_name, parse_domain, render_problem, Domain, ParseError, ProblemSpec};
use crate::plan_validator::validate_plan;
use crate::planner::{plan_problem, solve_external, DiagnosticCode, Plan, PlannerOutcome, ProcessError};
use crate::schema::{derive_schema, render_schema_guide, ExtractionSchema};
use crate::validation::{validate_level1, validate_level2, ValidationReport, Verdict};

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("domain: {0}")]
    Domain(#[from] ParseError),
    #[error(transparent)]
    Config(#[from] PipelineConfigError),
}

enum Budgeted<T> {
    Done(T),
    TimedOut,
    Panicked,
}

/// Runs `f` on its own thread and stops waiting once `budget` has passed.
/// A late worker is left to finish in the background.
fn with_budget<T: Send + 'static>(budget: Duration, f: impl FnOnce() -> T + Send + 'static) -> Budgeted<T> {
    let (tx, rx) = mpsc::channel();
    std::thread::spawn(move || {
        let _ = tx.send(f());
    });
    match rx.recv_timeout(budget) {
        Ok(v) => Budgeted::Done(v),
        Err(mpsc::RecvTimeoutError::Timeout) => Budgeted::TimedOut,
        Err(mpsc::RecvTimeoutError::Disconnected) => Budgeted::Panicked,
    }
}

fn ms(since: Instant) -> u64 {
    since.elapsed().as_millis() as u64
}

fn problem_name(task_id: &str) -> String {
    let cleaned: String =
        task_id.chars().map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '_' { c.to_ascii_lowercase() } else { '-' }).collect();
    if is_valid_name(&cleaned) { cleaned } else { format!("task-{cleaned}") }
}

fn issue_summary(report: &ValidationReport) -> String {
    report
        .issues
        .iter()
        .map(|i| format!("{} at {}{}", i.kind.as_str(), i.location, if i.auto_corrected { " (corrected)" } else { "" }))
        .collect::<Vec<_>>()
        .join("; ")
}

struct Success {
    plan: Plan,
    record: ExtractionRecord,
    problem_pddl: String,
}

/// A domain plus the components that turn task text into validated plans.
pub struct Pipeline {
    domain: Domain,
    domain_text: String,
    schema: ExtractionSchema,
    guide: String,
    cfg: PipelineConfig,
    extractor: Arc<dyn Extractor>,
    repair: Arc<dyn RepairAgent>,
}

impl Pipeline {
    pub fn new(
        domain_text: &str,
        cfg: PipelineConfig,
        extractor: Arc<dyn Extractor>,
        repair: Arc<dyn RepairAgent>,
    ) -> Result<Self, PipelineError> {
        cfg.check()?;
        let domain = parse_domain(domain_text)?;
        let schema = derive_schema(&domain);
        let guide = render_schema_guide(&schema);
        Ok(Pipeline { domain, domain_text: domain_text.to_string(), schema, guide, cfg, extractor, repair })
    }

    pub fn domain(&self) -> &Domain {
        &self.domain
    }

    pub fn schema(&self) -> &ExtractionSchema {
        &self.schema
    }

    pub fn guide(&self) -> &str {
        &self.guide
    }

    pub fn config(&self) -> &PipelineConfig {
        &self.cfg
    }

    pub fn run(&self, task: &Task, arm: Arm) -> RunRecord {
        match arm {
            Arm::Fast => self.run_fast(task),
            Arm::Duplex => self.run_duplex(task),
        }
    }

    /// Feed-forward only.
    pub fn run_fast(&self, task: &Task) -> RunRecord {
        self.run_with(task, Arm::Fast, 0)
    }

    /// Feed-forward, then up to `max_reflection_iters` repair rounds.
    pub fn run_duplex(&self, task: &Task) -> RunRecord {
        self.run_with(task, Arm::Duplex, self.cfg.max_reflection_iters)
    }

    fn diagnostics(&self, task: &Task, source: FailureSource, code: &str, detail: String) -> Diagnostics {
        Diagnostics {
            task_id: task.id.clone(),
            task_text: task.text.clone(),
            source,
            code: code.to_string(),
            detail,
            domain_text: self.domain_text.clone(),
            record: None,
            raw_wire: None,
            problem_pddl: None,
            validation: None,
            planner: None,
        }
    }

    fn plan(&self, problem: &ProblemSpec, pddl: &str) -> Result<PlannerOutcome, ProcessError> {
        match &self.cfg.solver {
            SolverChoice::Internal => {
                let search = self.cfg.search.with_time_budget(self.cfg.planner_budget());
                Ok(plan_problem(&self.domain, problem, &search))
            }
            SolverChoice::External(solver) => {
                let dir = tempfile::tempdir()?;
                let dp = dir.path().join("domain.pddl");
                let pp = dir.path().join(format!("{}.pddl", problem.name));
                std::fs::write(&dp, &self.domain_text)?;
                std::fs::write(&pp, pddl)?;
                solve_external(&dp, &pp, solver, self.cfg.planner_budget())
            }
        }
    }

    /// Validation, mapping, planning and plan checking for one record.
    fn evaluate(&self, task: &Task, record: ExtractionRecord) -> (Attempt, Option<Success>) {
        let mut stages = Vec::new();
        let fail = |stages, class, diag| (Attempt { stages, failure: Some(class), diagnostics: Some(diag) }, None);

        let t = Instant::now();
        let l1 = validate_level1(&record, &self.schema);
        stages.push(StageOutcome { stage: Stage::Level1, ok: l1.verdict.is_ok(), detail: issue_summary(&l1), elapsed_ms: ms(t) });
        if l1.verdict == Verdict::FailL1 {
            let detail = l1.uncorrected().map(|i| i.detail.clone()).collect::<Vec<_>>().join("; ");
            let mut d = self.diagnostics(task, FailureSource::Level1, "FAIL_L1", detail);
            d.record = Some(record);
            d.validation = Some(l1);
            return fail(stages, FailureClass::Level1, d);
        }
        let effective = l1.corrected_record.clone().unwrap_or(record);

        let t = Instant::now();
        let l2 = validate_level2(&effective, &self.schema);
        stages.push(StageOutcome { stage: Stage::Level2, ok: l2.verdict.is_ok(), detail: issue_summary(&l2), elapsed_ms: ms(t) });
        if l2.verdict == Verdict::FailL2 {
            let detail = l2.issues.iter().map(|i| i.detail.clone()).collect::<Vec<_>>().join("; ");
            let mut d = self.diagnostics(task, FailureSource::Level2, "FAIL_L2", detail);
            let mut combined = l1;
            combined.issues.extend(l2.issues);
            combined.verdict = Verdict::FailL2;
            d.record = Some(effective);
            d.validation = Some(combined);
            return fail(stages, FailureClass::Level2, d);
        }

        let t = Instant::now();
        let problem = match map_to_problem(&effective, &self.domain, &problem_name(&task.id)) {
            Ok(p) => p,
            Err(e) => {
                stages.push(StageOutcome { stage: Stage::Map, ok: false, detail: e.to_string(), elapsed_ms: ms(t) });
                let mut d = self.diagnostics(task, FailureSource::Mapper, "MAP_ERROR", e.to_string());
                d.record = Some(effective);
                return fail(stages, FailureClass::MapError, d);
            }
        };
        let pddl = render_problem(&problem);
        stages.push(StageOutcome { stage: Stage::Map, ok: true, detail: String::new(), elapsed_ms: ms(t) });

        let t = Instant::now();
        let outcome = self.plan(&problem, &pddl);
        let plan = match outcome {
            Err(e) => {
                stages.push(StageOutcome { stage: Stage::Plan, ok: false, detail: e.to_string(), elapsed_ms: ms(t) });
                let mut d = self.diagnostics(task, FailureSource::Planner, "SOLVER_ERROR", e.to_string());
                d.record = Some(effective);
                d.problem_pddl = Some(pddl);
                return fail(stages, FailureClass::SolverError, d);
            }
            Ok(PlannerOutcome::Diagnostic(diag)) => {
                let class = match diag.code {
                    DiagnosticCode::ParseFail => FailureClass::ParseFail,
                    DiagnosticCode::GroundFail => FailureClass::GroundFail,
                    DiagnosticCode::SearchFail => FailureClass::SearchFail,
                    DiagnosticCode::Timeout => FailureClass::PlannerTimeout,
                };
                stages.push(StageOutcome {
                    stage: Stage::Plan,
                    ok: false,
                    detail: format!("{}: {}", diag.code.as_str(), diag.detail),
                    elapsed_ms: ms(t),
                });
                let mut d = self.diagnostics(task, FailureSource::Planner, diag.code.as_str(), diag.detail.clone());
                d.record = Some(effective);
                d.problem_pddl = Some(pddl);
                d.planner = Some(diag);
                return fail(stages, class, d);
            }
            Ok(PlannerOutcome::Plan { plan, .. }) => {
                stages.push(StageOutcome {
                    stage: Stage::Plan,
                    ok: true,
                    detail: format!("{} step(s)", plan.len()),
                    elapsed_ms: ms(t),
                });
                plan
            }
        };

        let t = Instant::now();
        let verdict = validate_plan(&self.domain, &problem, &plan.steps);
        if let Some(f) = verdict.failure {
            let detail = format!("step {}: {}", f.step, f.detail);
            stages.push(StageOutcome { stage: Stage::Validate, ok: false, detail: detail.clone(), elapsed_ms: ms(t) });
            let code = serde_json::to_value(f.reason).ok().and_then(|v| v.as_str().map(str::to_string)).unwrap_or_default();
            let mut d = self.diagnostics(task, FailureSource::Validator, &code, detail);
            d.record = Some(effective);
            d.problem_pddl = Some(pddl);
            return fail(stages, FailureClass::ValidatorReject, d);
        }
        stages.push(StageOutcome { stage: Stage::Validate, ok: true, detail: String::new(), elapsed_ms: ms(t) });
        (
            Attempt { stages, failure: None, diagnostics: None },
            Some(Success { plan, record: effective, problem_pddl: pddl }),
        )
    }

    fn run_with(&self, task: &Task, arm: Arm, max_iters: u32) -> RunRecord {
        let start = Instant::now();
        let budget = self.cfg.llm_budget();
        let mut rec = RunRecord {
            task_id: task.id.clone(),
            arm,
            stages: Vec::new(),
            iterations: Vec::new(),
            status: RunStatus::Failed,
            failure: None,
            halt: None,
            plan: None,
            final_record: None,
            problem_pddl: None,
            diagnostics: None,
            repair_calls: 0,
            llm_ms: 0,
            elapsed_ms: 0,
        };

        let t = Instant::now();
        let (ex, tk, guide) = (self.extractor.clone(), task.clone(), self.guide.clone());
        let extracted = with_budget(budget, move || ex.extract(&tk, &guide));
        rec.llm_ms += ms(t);
        let wire = match extracted {
            Budgeted::Done(Ok(wire)) => wire,
            other => {
                let (class, detail) = match other {
                    Budgeted::TimedOut | Budgeted::Done(Err(ExtractError::Timeout(_))) => {
                        (FailureClass::LlmTimeout, format!("extractor exceeded {budget:?}"))
                    }
                    Budgeted::Done(Err(e)) => (FailureClass::EndpointError, e.to_string()),
                    _ => (FailureClass::EndpointError, "extractor panicked".to_string()),
                };
                rec.stages.push(StageOutcome { stage: Stage::Extract, ok: false, detail, elapsed_ms: ms(t) });
                rec.failure = Some(class);
                rec.elapsed_ms = ms(start);
                return rec;
            }
        };
        rec.stages.push(StageOutcome { stage: Stage::Extract, ok: true, detail: String::new(), elapsed_ms: ms(t) });

        let t = Instant::now();
        let (mut last, mut success, mut last_record) = match parse_record(&wire) {
            Err(e) => {
                rec.stages.push(StageOutcome { stage: Stage::Parse, ok: false, detail: e.to_string(), elapsed_ms: ms(t) });
                let mut d = self.diagnostics(task, FailureSource::Wire, "WIRE_ERROR", e.to_string());
                d.raw_wire = Some(wire);
                (Attempt { stages: Vec::new(), failure: Some(FailureClass::WireError), diagnostics: Some(d) }, None, None)
            }
            Ok(record) => {
                rec.stages.push(StageOutcome { stage: Stage::Parse, ok: true, detail: String::new(), elapsed_ms: ms(t) });
                let (attempt, success) = self.evaluate(task, record.clone());
                (attempt, success, Some(record))
            }
        };
        rec.stages.extend(last.stages.iter().cloned());

        let mut index = 0;
        while success.is_none() && last.failure.is_some_and(FailureClass::triggers_reflection) {
            if index >= max_iters {
                if max_iters > 0 {
                    rec.halt = Some(HaltReason::IterationBudget);
                }
                break;
            }
            index += 1;
            let diag = last.diagnostics.clone().expect("failed attempts carry diagnostics");
            let trigger = last.failure.expect("checked above");
            let t = Instant::now();
            let (agent, d) = (self.repair.clone(), diag.clone());
            let repaired = match with_budget(budget, move || agent.repair(&d)) {
                Budgeted::Done(r) => r,
                Budgeted::TimedOut => Err(RepairError::Timeout(budget)),
                Budgeted::Panicked => Err(RepairError::OracleMissing(format!("{} (repair agent panicked)", task.id))),
            };
            let repair_ms = ms(t);
            rec.llm_ms += repair_ms;
            rec.repair_calls += 1;
            let mut it = Iteration {
                index,
                trigger,
                repair_ms,
                repair_error: None,
                revised_record: None,
                edits: Vec::new(),
                attempt: None,
            };
            match repaired {
                Err(e) => {
                    it.repair_error = Some(e.to_string());
                    rec.iterations.push(it);
                }
                Ok(revised) => {
                    let before = diag.record.clone().unwrap_or_default();
                    it.edits = record_diff(&before, &revised);
                    let stagnant = diag.record.as_ref() == Some(&revised) || last_record.as_ref() == Some(&revised);
                    it.revised_record = Some(revised.clone());
                    if stagnant {
                        rec.iterations.push(it);
                        rec.halt = Some(HaltReason::Stagnation);
                        break;
                    }
                    let (attempt, s) = self.evaluate(task, revised.clone());
                    it.attempt = Some(attempt.clone());
                    rec.iterations.push(it);
                    last = attempt;
                    success = s;
                    last_record = Some(revised);
                }
            }
        }

        match success {
            Some(s) => {
                rec.status = RunStatus::Solved;
                rec.plan = Some(s.plan);
                rec.final_record = Some(s.record);
                rec.problem_pddl = Some(s.problem_pddl);
            }
            None => {
                rec.failure = last.failure;
                if let Some(d) = &last.diagnostics {
                    rec.problem_pddl = d.problem_pddl.clone();
                    rec.final_record = d.record.clone();
                }
                rec.diagnostics = last.diagnostics;
            }
        }
        rec.elapsed_ms = ms(start);
        rec
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus;
    use crate::extraction::{FaultInjectingExtractor, FaultKind, ScriptedExtractor};
    use crate::orchestrator::OracleRepair;
    use crate::planner::ExternalSolver;

    struct Echo;
    impl RepairAgent for Echo {
        fn repair(&self, d: &Diagnostics) -> Result<ExtractionRecord, RepairError> {
            Ok(d.record.clone().unwrap())
        }
    }

    struct Sleepy(Duration);
    impl Extractor for Sleepy {
        fn extract(&self, _: &Task, _: &str) -> Result<String, ExtractError> {
            std::thread::sleep(self.0);
            Ok(String::new())
        }
    }

    fn pipeline(fixture: &str, extractor: Arc<dyn Extractor>, repair: Arc<dyn RepairAgent>, cfg: PipelineConfig) -> (Pipeline, Task) {
        let f = corpus::fixture(fixture).unwrap();
        let p = Pipeline::new(corpus::domain(f.domain).unwrap().source, cfg, extractor, repair).unwrap();
        (p, Task::new(f.id, f.task))
    }

    fn faulty(kind: FaultKind) -> Arc<dyn Extractor> {
        Arc::new(FaultInjectingExtractor::new(ScriptedExtractor::from_corpus(), kind, 0))
    }

    #[test]
    fn tabletop_apple_solves_in_one_step() {
        let (p, task) = pipeline("tabletop-apple", Arc::new(ScriptedExtractor::from_corpus()), Arc::new(OracleRepair::from_corpus()), PipelineConfig::default());
        let rec = p.run_fast(&task);
        assert!(rec.solved(), "{rec:#?}");
        assert_eq!(rec.plan.unwrap().steps.len(), 1);
        assert_eq!(rec.repair_calls, 0);
    }

    #[test]
    fn hallucination_without_reflection_fails_at_l2() {
        let cfg = PipelineConfig { max_reflection_iters: 0, ..Default::default() };
        let (p, task) = pipeline("tabletop-apple", faulty(FaultKind::HallucinatePredicate), Arc::new(OracleRepair::from_corpus()), cfg);
        for rec in [p.run_fast(&task), p.run_duplex(&task)] {
            assert_eq!(rec.failure, Some(FailureClass::Level2));
            assert_eq!(rec.diagnostics.unwrap().source, FailureSource::Level2);
            assert_eq!(rec.repair_calls, 0);
        }
    }

    #[test]
    fn omitted_init_fact_search_fail_then_repaired() {
        let (p, task) = pipeline("tabletop-apple", faulty(FaultKind::OmitInitFact), Arc::new(OracleRepair::from_corpus()), PipelineConfig::default());
        let fast = p.run_fast(&task);
        assert_eq!(fast.failure, Some(FailureClass::SearchFail));
        let duplex = p.run_duplex(&task);
        assert!(duplex.solved());
        assert_eq!((duplex.iterations.len(), duplex.repair_calls), (1, 1));
        assert_eq!(duplex.iterations[0].edits, vec!["+ init (on apple_01 table_main)"]);
    }

    #[test]
    fn echo_repair_stagnates() {
        let (p, task) = pipeline("tabletop-apple", faulty(FaultKind::OmitInitFact), Arc::new(Echo), PipelineConfig::default());
        let rec = p.run_duplex(&task);
        assert_eq!((rec.status, rec.halt, rec.iterations.len()), (RunStatus::Failed, Some(HaltReason::Stagnation), 1));
    }

    #[test]
    fn repair_errors_consume_budget() {
        let (p, task) = pipeline("tabletop-apple", faulty(FaultKind::OmitInitFact), Arc::new(OracleRepair::new()), PipelineConfig::default());
        let rec = p.run_duplex(&task);
        assert_eq!((rec.iterations.len(), rec.halt), (3, Some(HaltReason::IterationBudget)));
        assert!(rec.iterations.iter().all(|i| i.repair_error.is_some()));
        assert_eq!(rec.failure, Some(FailureClass::SearchFail));
    }

    #[test]
    fn l1_faults_never_reach_repair() {
        let (p, task) = pipeline("kitchen-heat", faulty(FaultKind::StripObjectType), Arc::new(Echo), PipelineConfig::default());
        let rec = p.run_duplex(&task);
        assert!(rec.solved(), "{rec:#?}");
        assert_eq!(rec.repair_calls, 0);
    }

    #[test]
    fn extractor_timeout() {
        let cfg = PipelineConfig { llm_time_budget_secs: 0.2, ..Default::default() };
        let (p, task) = pipeline("tabletop-apple", Arc::new(Sleepy(Duration::from_secs(3))), Arc::new(OracleRepair::from_corpus()), cfg);
        let rec = p.run_duplex(&task);
        assert_eq!((rec.failure, rec.repair_calls), (Some(FailureClass::LlmTimeout), 0));
        assert!(rec.elapsed_ms < 220, "{}", rec.elapsed_ms);
    }

    #[test]
    fn external_solver_timeout() {
        let cfg = PipelineConfig {
            planner_time_budget_secs: 0.3,
            solver: SolverChoice::External(ExternalSolver::new("sleep 5")),
            ..Default::default()
        };
        let (p, task) = pipeline("tabletop-apple", Arc::new(ScriptedExtractor::from_corpus()), Arc::new(OracleRepair::from_corpus()), cfg);
        let rec = p.run_duplex(&task);
        assert_eq!((rec.failure, rec.repair_calls), (Some(FailureClass::PlannerTimeout), 0));
    }

    #[test]
    fn malformed_wire_is_repaired() {
        let ex = ScriptedExtractor::new().with("tabletop-apple", "{\"objects\": 3}");
        let (p, task) = pipeline("tabletop-apple", Arc::new(ex), Arc::new(OracleRepair::from_corpus()), PipelineConfig::default());
        assert_eq!(p.run_fast(&task).failure, Some(FailureClass::WireError));
        assert!(p.run_duplex(&task).solved());
    }

    #[test]
    fn problem_names_are_valid() {
        assert_eq!(problem_name("tabletop-apple"), "tabletop-apple");
        assert_eq!(problem_name("7/x y"), "task-7-x-y");
    }
}
