use std::path::{Path, PathBuf};
use std::process::{Command, Stdio};
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::plan::{parse_plan, Plan};
use super::{Diagnostic, DiagnosticCode, PlannerOutcome, SearchStats};

/// Matches the Fast Downward driver.
pub const DEFAULT_SOLVER_COMMAND: &str = "fast-downward.py --alias lama-first --plan-file {plan_out} {domain} {problem}";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExternalSolver {
    /// Shell-style template with `{domain}`, `{problem}` and `{plan_out}`.
    pub command: String,
    #[serde(default = "default_unsolvable")]
    pub unsolvable_exit_codes: Vec<i32>,
    #[serde(default = "default_timeout")]
    pub timeout_exit_codes: Vec<i32>,
}

fn default_unsolvable() -> Vec<i32> {
    vec![10, 11]
}

fn default_timeout() -> Vec<i32> {
    vec![21, 23]
}

impl Default for ExternalSolver {
    fn default() -> Self {
        ExternalSolver::new(DEFAULT_SOLVER_COMMAND)
    }
}

impl ExternalSolver {
    pub fn new(command: impl Into<String>) -> Self {
        ExternalSolver {
            command: command.into(),
            unsolvable_exit_codes: default_unsolvable(),
            timeout_exit_codes: default_timeout(),
        }
    }
}

#[derive(Debug, Error)]
pub enum ProcessError {
    #[error("solver command is empty or not valid shell syntax: `{0}`")]
    BadCommand(String),
    #[error("solver binary `{0}` not found")]
    NotFound(String),
    #[error("solver i/o: {0}")]
    Io(#[from] std::io::Error),
}

fn expand(template: &str, domain: &Path, problem: &Path, plan_out: &Path) -> Result<Vec<String>, ProcessError> {
    let words = shlex::split(template).filter(|w| !w.is_empty()).ok_or_else(|| ProcessError::BadCommand(template.into()))?;
    if words.is_empty() {
        return Err(ProcessError::BadCommand(template.into()));
    }
    Ok(words
        .into_iter()
        .map(|w| {
            w.replace("{domain}", &domain.to_string_lossy())
                .replace("{problem}", &problem.to_string_lossy())
                .replace("{plan_out}", &plan_out.to_string_lossy())
        })
        .collect())
}

/// Anytime configurations write `plan.1`, `plan.2`, ...; the last is best.
fn find_plan_file(plan_out: &Path) -> Option<PathBuf> {
    if plan_out.exists() {
        return Some(plan_out.to_path_buf());
    }
    (1..)
        .map(|i| PathBuf::from(format!("{}.{i}", plan_out.display())))
        .take_while(|p| p.exists())
        .last()
}

fn tail(text: &str, max: usize) -> &str {
    let start = text.len().saturating_sub(max);
    let start = (start..=text.len()).find(|&i| text.is_char_boundary(i)).unwrap_or(text.len());
    text[start..].trim()
}

/// Runs an external solver and maps its exit status and plan file.
pub fn solve_external(
    domain_path: &Path,
    problem_path: &Path,
    solver: &ExternalSolver,
    time_budget: Duration,
) -> Result<PlannerOutcome, ProcessError> {
    let work = tempfile::tempdir()?;
    let plan_out = work.path().join("plan");
    let argv = expand(&solver.command, domain_path, problem_path, &plan_out)?;
    let stdout = std::fs::File::create(work.path().join("stdout"))?;
    let stderr = std::fs::File::create(work.path().join("stderr"))?;
    let start = Instant::now();
    let mut child = Command::new(&argv[0])
        .args(&argv[1..])
        .current_dir(work.path())
        .stdin(Stdio::null())
        .stdout(stdout)
        .stderr(stderr)
        .spawn()
        .map_err(|e| match e.kind() {
            std::io::ErrorKind::NotFound => ProcessError::NotFound(argv[0].clone()),
            _ => ProcessError::Io(e),
        })?;

    let stats = |start: Instant| SearchStats { elapsed_ms: start.elapsed().as_millis() as u64, ..SearchStats::default() };
    let diag = |code, detail: String| {
        Ok(PlannerOutcome::Diagnostic(Diagnostic { code, detail, stats: stats(start) }))
    };
    let status = loop {
        if let Some(status) = child.try_wait()? {
            break status;
        }
        if start.elapsed() >= time_budget {
            let _ = child.kill();
            let _ = child.wait();
            return diag(DiagnosticCode::Timeout, format!("solver exceeded {time_budget:?}"));
        }
        std::thread::sleep(Duration::from_millis(10));
    };
    let err_text = std::fs::read_to_string(work.path().join("stderr")).unwrap_or_default();

    match status.code() {
        Some(0) => {
            let Some(file) = find_plan_file(&plan_out) else {
                return diag(DiagnosticCode::ParseFail, "solver exited successfully but wrote no plan file".into());
            };
            match parse_plan(&std::fs::read_to_string(file)?) {
                Ok(steps) => Ok(PlannerOutcome::Plan { plan: Plan::unit(steps), final_state: None, stats: stats(start) }),
                Err(e) => diag(DiagnosticCode::ParseFail, e.to_string()),
            }
        }
        Some(c) if solver.unsolvable_exit_codes.contains(&c) => {
            diag(DiagnosticCode::SearchFail, format!("solver reported the task unsolvable (exit {c})"))
        }
        Some(c) if solver.timeout_exit_codes.contains(&c) => {
            diag(DiagnosticCode::Timeout, format!("solver reported a resource limit (exit {c})"))
        }
        code => diag(
            DiagnosticCode::ParseFail,
            format!("solver failed with {}: {}", code.map_or("a signal".to_string(), |c| format!("exit {c}")), tail(&err_text, 2000)),
        ),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::planner::PlanStep;

    fn run(cmd: &str, budget_ms: u64) -> PlannerOutcome {
        let dir = tempfile::tempdir().unwrap();
        let d = dir.path().join("domain.pddl");
        let p = dir.path().join("problem.pddl");
        std::fs::write(&d, "").unwrap();
        std::fs::write(&p, "").unwrap();
        solve_external(&d, &p, &ExternalSolver::new(cmd), Duration::from_millis(budget_ms)).unwrap()
    }

    #[test]
    fn stub_plan_is_parsed() {
        let out = run("sh -c 'printf \"(unstack c a)\\n(put-down c)\\n; cost = 2\\n\" > \"$0\"' {plan_out}", 5000);
        assert_eq!(out.plan().unwrap().steps, vec![PlanStep::new("unstack", ["c", "a"]), PlanStep::new("put-down", ["c"])]);
    }

    #[test]
    fn unsolvable_exit_code() {
        assert_eq!(run("sh -c 'exit 11'", 5000).diagnostic().unwrap().code, DiagnosticCode::SearchFail);
        assert_eq!(run("sh -c 'exit 23'", 5000).diagnostic().unwrap().code, DiagnosticCode::Timeout);
    }

    #[test]
    fn sleeping_stub_times_out() {
        let start = Instant::now();
        assert_eq!(run("sleep 5", 200).diagnostic().unwrap().code, DiagnosticCode::Timeout);
        assert!(start.elapsed() < Duration::from_secs(3));
    }

    #[test]
    fn crash_carries_stderr() {
        let diag = run("sh -c 'echo boom >&2; exit 3'", 5000).diagnostic().cloned().unwrap();
        assert_eq!(diag.code, DiagnosticCode::ParseFail);
        assert!(diag.detail.contains("boom") && diag.detail.contains("exit 3"));
    }

    #[test]
    fn missing_binary() {
        let dir = tempfile::tempdir().unwrap();
        let err = solve_external(dir.path(), dir.path(), &ExternalSolver::new("no-such-solver-xyz {domain}"), Duration::from_secs(1));
        assert!(matches!(err, Err(ProcessError::NotFound(b)) if b == "no-such-solver-xyz"));
    }

    #[test]
    fn placeholders_are_substituted() {
        let argv = expand(DEFAULT_SOLVER_COMMAND, Path::new("/d.pddl"), Path::new("/p q.pddl"), Path::new("/o")).unwrap();
        assert_eq!(argv, ["fast-downward.py", "--alias", "lama-first", "--plan-file", "/o", "/d.pddl", "/p q.pddl"]);
    }
}
