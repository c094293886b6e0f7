use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;
use std::time::Duration;

use anyhow::{anyhow, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use duplex_core::extraction::{parse_record, serialize_record, ExtractionRecord, Extractor, LiveExtractor, ScriptedExtractor, Task};
use duplex_core::harness::{emit_report, run_suite_with_records, ReportFormat, RepairSource, SuiteManifest, SuiteOptions};
use duplex_core::llm::{EndpointConfig, ENV_EXTRACT_MODEL, ENV_REPAIR_MODEL};
use duplex_core::mapper::map_and_render;
use duplex_core::orchestrator::{
    Arm, Diagnostics, ExtractorChoice, LiveRepair, OracleRepair, Pipeline, PipelineConfig, RepairAgent, RepairChoice,
    RepairError, RunRecord, SolverChoice,
};
use duplex_core::pddl::{parse_domain, parse_problem, Domain, ProblemSpec};
use duplex_core::plan_validator::validate_plan;
use duplex_core::planner::{
    format_plan, parse_plan, plan_problem, solve_external, ExternalSolver, Heuristic, PlannerOutcome, SearchConfig,
    SearchMode, DEFAULT_SOLVER_COMMAND,
};
use duplex_core::schema::{derive_schema, render_schema_guide};
use duplex_core::validation::{effective_record, validate};
use serde::de::DeserializeOwned;

const DEFAULT_MODEL: &str = "gpt-4o";

#[derive(Parser)]
#[command(name = "duplex", version, about = "Extract, validate, map, plan and repair planning tasks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Parse a domain file and print its structure.
    ParseDomain {
        #[arg(long)]
        domain: PathBuf,
        #[command(flatten)]
        out: Output,
    },
    /// Print the extraction schema (table: the extractor guide; machine: JSON).
    DeriveSchema {
        #[arg(long)]
        domain: PathBuf,
        #[command(flatten)]
        out: Output,
    },
    /// Run the extractor on a task and print the wire record.
    Extract {
        #[command(flatten)]
        task: TaskArgs,
        #[command(flatten)]
        pipeline: PipelineArgs,
        #[command(flatten)]
        out: Output,
    },
    /// Validate a record; exits 1 unless it passes or was corrected.
    Validate {
        #[arg(long)]
        domain: PathBuf,
        #[arg(long)]
        record: PathBuf,
        #[command(flatten)]
        out: Output,
    },
    /// Map a validated record to a problem file.
    Map {
        #[arg(long)]
        domain: PathBuf,
        #[arg(long)]
        record: PathBuf,
        /// Problem name; defaults to the record's file stem.
        #[arg(long)]
        name: Option<String>,
        #[command(flatten)]
        out: Output,
    },
    /// Plan for a domain and problem; exits 1 with a diagnostic when no plan is found.
    Plan {
        #[arg(long)]
        domain: PathBuf,
        #[arg(long)]
        problem: PathBuf,
        #[command(flatten)]
        pipeline: PipelineArgs,
        #[command(flatten)]
        out: Output,
    },
    /// Simulate a plan file; exits 1 if it is not executable and goal-reaching.
    ValidatePlan {
        #[arg(long)]
        domain: PathBuf,
        #[arg(long)]
        problem: PathBuf,
        #[arg(long)]
        plan: PathBuf,
        #[command(flatten)]
        out: Output,
    },
    /// Run the full pipeline on one task; exits 1 if it is not solved.
    Solve {
        #[command(flatten)]
        task: TaskArgs,
        #[arg(long, value_enum, default_value = "duplex")]
        arm: ArmArg,
        /// Ground-truth record for the scripted repair oracle.
        #[arg(long)]
        truth: Option<PathBuf>,
        #[command(flatten)]
        pipeline: PipelineArgs,
        #[command(flatten)]
        out: Output,
    },
    /// Run a suite manifest and print its report.
    Bench {
        manifest: PathBuf,
        #[arg(long, value_enum, default_value = "duplex")]
        arm: ArmArg,
        #[arg(long, env = "DUPLEX_SEED", default_value_t = 0)]
        seed: u64,
        /// Worker threads; defaults to the number of logical cores.
        #[arg(long)]
        workers: Option<usize>,
        /// Keep per-run wall-clock times in the report.
        #[arg(long)]
        timing: bool,
        #[command(flatten)]
        pipeline: PipelineArgs,
        #[command(flatten)]
        out: Output,
    },
}

#[derive(Args)]
struct Output {
    #[arg(long, value_enum, default_value = "table")]
    format: FormatArg,
    /// Directory for output files; created if missing.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct TaskArgs {
    #[arg(long)]
    domain: PathBuf,
    #[arg(long)]
    task: PathBuf,
    /// Defaults to the task file's stem.
    #[arg(long)]
    task_id: Option<String>,
    /// Canned extractor output for the scripted extractor.
    #[arg(long)]
    fixture: Option<PathBuf>,
}

#[derive(Args, Default)]
struct PipelineArgs {
    /// JSON pipeline config; flags and environment override it.
    #[arg(long, env = "DUPLEX_CONFIG")]
    config: Option<PathBuf>,
    #[arg(long, env = "DUPLEX_MAX_ITERS")]
    max_iters: Option<u32>,
    #[arg(long, env = "DUPLEX_LLM_BUDGET")]
    llm_budget: Option<f64>,
    #[arg(long, env = "DUPLEX_PLANNER_BUDGET")]
    planner_budget: Option<f64>,
    #[arg(long, value_enum, env = "DUPLEX_SOLVER")]
    solver: Option<SolverArg>,
    /// External solver template with {domain}, {problem} and {plan_out}.
    #[arg(long, env = "DUPLEX_SOLVER_CMD")]
    solver_cmd: Option<String>,
    #[arg(long, value_enum)]
    mode: Option<ModeArg>,
    #[arg(long, value_enum)]
    heuristic: Option<HeuristicArg>,
    #[arg(long, value_enum, env = "DUPLEX_EXTRACTOR")]
    extractor: Option<ComponentArg>,
    #[arg(long, value_enum, env = "DUPLEX_REPAIR")]
    repair: Option<ComponentArg>,
}

#[derive(Clone, Copy, ValueEnum)]
enum FormatArg {
    Table,
    Machine,
}

#[derive(Clone, Copy, ValueEnum)]
enum ArmArg {
    Fast,
    Duplex,
}

#[derive(Clone, Copy, ValueEnum)]
enum SolverArg {
    Internal,
    External,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Satisficing,
    Optimal,
}

#[derive(Clone, Copy, ValueEnum)]
enum HeuristicArg {
    HAdd,
    HMax,
    Goalcount,
    Blind,
}

#[derive(Clone, Copy, ValueEnum)]
enum ComponentArg {
    Scripted,
    Live,
}

impl From<ArmArg> for Arm {
    fn from(a: ArmArg) -> Self {
        match a {
            ArmArg::Fast => Arm::Fast,
            ArmArg::Duplex => Arm::Duplex,
        }
    }
}

impl From<FormatArg> for ReportFormat {
    fn from(f: FormatArg) -> Self {
        match f {
            FormatArg::Table => ReportFormat::Table,
            FormatArg::Machine => ReportFormat::Machine,
        }
    }
}

fn read(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

fn load_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    serde_json::from_str(&read(path)?).with_context(|| format!("parsing {}", path.display()))
}

fn load_domain(path: &Path) -> Result<(String, Domain)> {
    let text = read(path)?;
    let d = parse_domain(&text).map_err(|e| anyhow!("{}: {e}", path.display()))?;
    Ok((text, d))
}

fn load_problem(path: &Path, d: &Domain) -> Result<ProblemSpec> {
    parse_problem(&read(path)?, d).map_err(|e| anyhow!("{}: {e}", path.display()))
}

fn load_record(path: &Path) -> Result<ExtractionRecord> {
    parse_record(&read(path)?).map_err(|e| anyhow!("{}: {e}", path.display()))
}

fn stem(path: &Path) -> String {
    path.file_stem().and_then(|s| s.to_str()).unwrap_or("task").to_string()
}

fn to_json<T: serde::Serialize>(v: &T) -> String {
    serde_json::to_string_pretty(v).expect("serializable") + "\n"
}

impl Output {
    /// Prints `text` and, with `--out`, also writes it to `name` in that directory.
    fn emit(&self, name: &str, text: &str) -> Result<()> {
        print!("{text}");
        self.write(name, text)
    }

    fn write(&self, name: &str, text: &str) -> Result<()> {
        if let Some(dir) = &self.out {
            std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
            let path = dir.join(name);
            std::fs::write(&path, text).with_context(|| format!("writing {}", path.display()))?;
        }
        Ok(())
    }

    fn machine(&self) -> bool {
        matches!(self.format, FormatArg::Machine)
    }
}

impl PipelineArgs {
    /// Defaults, then the config file, then environment and flags.
    fn config(&self) -> Result<PipelineConfig> {
        let mut cfg: PipelineConfig = match &self.config {
            Some(p) => load_json(p)?,
            None => PipelineConfig::default(),
        };
        if let Some(v) = self.max_iters {
            cfg.max_reflection_iters = v;
        }
        if let Some(v) = self.llm_budget {
            cfg.llm_time_budget_secs = v;
        }
        if let Some(v) = self.planner_budget {
            cfg.planner_time_budget_secs = v;
        }
        let external = match (self.solver, &self.solver_cmd) {
            (Some(SolverArg::Internal), _) => None,
            (Some(SolverArg::External), _) | (None, Some(_)) => Some(()),
            (None, None) => matches!(cfg.solver, SolverChoice::External(_)).then_some(()),
        };
        cfg.solver = match (external, &cfg.solver) {
            (None, _) => SolverChoice::Internal,
            (Some(()), SolverChoice::External(s)) => {
                SolverChoice::External(ExternalSolver { command: self.solver_cmd.clone().unwrap_or_else(|| s.command.clone()), ..s.clone() })
            }
            (Some(()), SolverChoice::Internal) => {
                SolverChoice::External(ExternalSolver::new(self.solver_cmd.as_deref().unwrap_or(DEFAULT_SOLVER_COMMAND)))
            }
        };
        if self.mode.is_some() || self.heuristic.is_some() {
            let mode = match self.mode {
                Some(ModeArg::Satisficing) => SearchMode::Satisficing,
                Some(ModeArg::Optimal) => SearchMode::Optimal,
                None => cfg.search.mode(),
            };
            let heuristic = match (self.heuristic, self.mode) {
                (Some(HeuristicArg::HAdd), _) => Heuristic::HAdd,
                (Some(HeuristicArg::HMax), _) => Heuristic::HMax,
                (Some(HeuristicArg::Goalcount), _) => Heuristic::Goalcount,
                (Some(HeuristicArg::Blind), _) => Heuristic::Blind,
                (None, Some(ModeArg::Optimal)) => Heuristic::HMax,
                (None, Some(ModeArg::Satisficing)) => Heuristic::HAdd,
                (None, None) => cfg.search.heuristic(),
            };
            cfg.search = SearchConfig::new(mode, heuristic)
                .map_err(|e| anyhow!("{e}"))?
                .with_expansion_budget(cfg.search.expansion_budget());
        }
        if let Some(x) = self.extractor {
            cfg.extractor = match x {
                ComponentArg::Scripted => ExtractorChoice::Scripted,
                ComponentArg::Live => ExtractorChoice::Live,
            };
        }
        if let Some(x) = self.repair {
            cfg.repair = match x {
                ComponentArg::Scripted => RepairChoice::Oracle,
                ComponentArg::Live => RepairChoice::Live,
            };
        }
        cfg.check()?;
        Ok(cfg)
    }
}

fn endpoint(model_var: &str) -> Result<EndpointConfig> {
    EndpointConfig::from_env(model_var, DEFAULT_MODEL)
        .ok_or_else(|| anyhow!("live components need DUPLEX_ENDPOINT (and usually DUPLEX_API_KEY)"))
}

fn extractor(cfg: &PipelineConfig, task_id: &str, fixture: Option<&Path>) -> Result<Arc<dyn Extractor>> {
    match cfg.extractor {
        ExtractorChoice::Live => Ok(Arc::new(LiveExtractor::new(endpoint(ENV_EXTRACT_MODEL)?, cfg.llm_budget()))),
        ExtractorChoice::Scripted => {
            let path = fixture.ok_or_else(|| anyhow!("the scripted extractor needs --fixture"))?;
            Ok(Arc::new(ScriptedExtractor::new().with(task_id, read(path)?)))
        }
    }
}

/// Live repair for suites that mix domains: the guide follows each task's domain.
struct LiveRepairAnyDomain {
    config: EndpointConfig,
    timeout: Duration,
}

impl RepairAgent for LiveRepairAnyDomain {
    fn repair(&self, diag: &Diagnostics) -> Result<ExtractionRecord, RepairError> {
        let d = parse_domain(&diag.domain_text).map_err(|e| RepairError::OracleMissing(e.to_string()))?;
        let guide = render_schema_guide(&derive_schema(&d));
        LiveRepair::new(self.config.clone(), self.timeout, guide).repair(diag)
    }
}

fn parse_domain_cmd(domain: &Path, out: &Output) -> Result<u8> {
    let (_, d) = load_domain(domain)?;
    if out.machine() {
        out.emit("domain.json", &to_json(&d))?;
    } else {
        let mut s = format!("domain {}\n", d.name);
        s += &format!("  types      {}\n", d.types.names().collect::<Vec<_>>().join(" "));
        s += &format!("  predicates {}\n", d.predicates.len());
        s += &format!("  constants  {}\n", d.constants.len());
        s += &format!("  actions    {}\n", d.actions.iter().map(|a| a.name.as_str()).collect::<Vec<_>>().join(" "));
        out.emit("domain.txt", &s)?;
    }
    Ok(0)
}

fn solve_cmd(task: &TaskArgs, arm: ArmArg, truth: Option<&Path>, pipeline: &PipelineArgs, out: &Output) -> Result<u8> {
    let cfg = pipeline.config()?;
    let (domain_text, _) = load_domain(&task.domain)?;
    let id = task.task_id.clone().unwrap_or_else(|| stem(&task.task));
    let ex = extractor(&cfg, &id, task.fixture.as_deref())?;
    let repair: Arc<dyn RepairAgent> = match cfg.repair {
        RepairChoice::Live => {
            let d = parse_domain(&domain_text).map_err(|e| anyhow!("{e}"))?;
            Arc::new(LiveRepair::new(endpoint(ENV_REPAIR_MODEL)?, cfg.llm_budget(), render_schema_guide(&derive_schema(&d))))
        }
        RepairChoice::Oracle => {
            let mut o = OracleRepair::new();
            if let Some(p) = truth {
                o.insert(id.clone(), load_record(p)?);
            }
            Arc::new(o)
        }
    };
    let p = Pipeline::new(&domain_text, cfg, ex, repair)?;
    let rec = p.run(&Task::new(id, read(&task.task)?), arm.into());
    write_run_files(&rec, out)?;
    if out.machine() {
        print!("{}", rec.to_json() + "\n");
    } else {
        print!("{}", run_summary(&rec));
    }
    Ok(if rec.solved() { 0 } else { 1 })
}

fn write_run_files(rec: &RunRecord, out: &Output) -> Result<()> {
    out.write("run.json", &(rec.to_json() + "\n"))?;
    if let Some(plan) = &rec.plan {
        out.write("plan.txt", &format_plan(plan))?;
    }
    if let Some(pddl) = &rec.problem_pddl {
        out.write("problem.pddl", pddl)?;
    }
    if let Some(r) = &rec.final_record {
        out.write("record.json", &(serialize_record(r) + "\n"))?;
    }
    Ok(())
}

fn run_summary(rec: &RunRecord) -> String {
    let mut s = format!("task {} ({:?} arm): {}\n", rec.task_id, rec.arm, if rec.solved() { "SOLVED" } else { "FAILED" });
    for st in &rec.stages {
        s += &format!("  {:<9} {:<4} {}\n", format!("{:?}", st.stage), if st.ok { "ok" } else { "FAIL" }, st.detail);
    }
    for it in &rec.iterations {
        s += &format!("  repair #{} after {}", it.index, it.trigger.as_str());
        match (&it.repair_error, &it.attempt) {
            (Some(e), _) => s += &format!(": {e}\n"),
            (None, Some(a)) => s += &format!(": {} edit(s), {}\n", it.edits.len(), a.failure.map_or("solved", |f| f.as_str())),
            (None, None) => s += ": no change\n",
        }
    }
    if let Some(h) = rec.halt {
        s += &format!("  halted: {h:?}\n");
    }
    if let Some(f) = rec.failure {
        s += &format!("  failure: {}\n", f.as_str());
        if let Some(d) = &rec.diagnostics {
            s += &format!("  {}: {}\n", d.code, d.detail);
        }
    }
    if let Some(plan) = &rec.plan {
        s += &format_plan(plan);
    }
    s
}

fn bench_cmd(
    manifest: &Path,
    arm: ArmArg,
    seed: u64,
    workers: Option<usize>,
    timing: bool,
    pipeline: &PipelineArgs,
    out: &Output,
) -> Result<u8> {
    let cfg = pipeline.config()?;
    let (m, base) = SuiteManifest::load(manifest)?;
    let mut opts = SuiteOptions { workers, seed, record_timing: timing, ..SuiteOptions::default() };
    if cfg.extractor == ExtractorChoice::Live {
        opts.extractor = Some(Arc::new(LiveExtractor::new(endpoint(ENV_EXTRACT_MODEL)?, cfg.llm_budget())));
    }
    if cfg.repair == RepairChoice::Live {
        opts.repair = RepairSource::Agent(Arc::new(LiveRepairAnyDomain { config: endpoint(ENV_REPAIR_MODEL)?, timeout: cfg.llm_budget() }));
    }
    let (report, records) = run_suite_with_records(&m, &base, &cfg, arm.into(), &opts)?;
    print!("{}", emit_report(&report, out.format.into()));
    out.write("report.json", &emit_report(&report, ReportFormat::Machine))?;
    out.write("report.txt", &emit_report(&report, ReportFormat::Table))?;
    let runs: String = records.iter().map(|r| serde_json::to_string(r).expect("serializable") + "\n").collect();
    out.write("runs.jsonl", &runs)?;
    Ok(0)
}

fn run(cli: Cli) -> Result<u8> {
    match cli.command {
        Command::ParseDomain { domain, out } => parse_domain_cmd(&domain, &out),
        Command::DeriveSchema { domain, out } => {
            let (_, d) = load_domain(&domain)?;
            let s = derive_schema(&d);
            if out.machine() {
                out.emit("schema.json", &to_json(&s))?;
            } else {
                out.emit("guide.txt", &render_schema_guide(&s))?;
            }
            Ok(0)
        }
        Command::Extract { task, pipeline, out } => {
            let cfg = pipeline.config()?;
            let (_, d) = load_domain(&task.domain)?;
            let id = task.task_id.clone().unwrap_or_else(|| stem(&task.task));
            let ex = extractor(&cfg, &id, task.fixture.as_deref())?;
            let guide = render_schema_guide(&derive_schema(&d));
            let wire = ex.extract(&Task::new(id, read(&task.task)?), &guide)?;
            out.emit("record.json", &(wire.trim_end().to_string() + "\n"))?;
            Ok(0)
        }
        Command::Validate { domain, record, out } => {
            let (_, d) = load_domain(&domain)?;
            let r = load_record(&record)?;
            let report = validate(&r, &derive_schema(&d));
            if out.machine() {
                print!("{}", report.to_json() + "\n");
            } else {
                println!("verdict: {:?}", report.verdict);
                for i in &report.issues {
                    let fixed = if i.auto_corrected { " (corrected)" } else { "" };
                    println!("  L{} {} at {}: {}{fixed}", i.level, i.kind.as_str(), i.location, i.detail);
                }
            }
            out.write("validation.json", &(report.to_json() + "\n"))?;
            if report.verdict.is_ok() {
                out.write("record.json", &(serialize_record(effective_record(&r, &report)) + "\n"))?;
            }
            Ok(if report.verdict.is_ok() { 0 } else { 1 })
        }
        Command::Map { domain, record, name, out } => {
            let (_, d) = load_domain(&domain)?;
            let r = load_record(&record)?;
            let name = name.unwrap_or_else(|| stem(&record));
            match map_and_render(&r, &d, &name) {
                Ok(text) => {
                    out.emit("problem.pddl", &text)?;
                    Ok(0)
                }
                Err(e) => {
                    eprintln!("map: {e}");
                    Ok(1)
                }
            }
        }
        Command::Plan { domain, problem, pipeline, out } => {
            let cfg = pipeline.config()?;
            let (_, d) = load_domain(&domain)?;
            let p = load_problem(&problem, &d)?;
            let outcome = match &cfg.solver {
                SolverChoice::Internal => plan_problem(&d, &p, &cfg.search.with_time_budget(cfg.planner_budget())),
                SolverChoice::External(s) => solve_external(&domain, &problem, s, cfg.planner_budget())?,
            };
            match &outcome {
                PlannerOutcome::Plan { plan, .. } => {
                    out.emit("plan.txt", &format_plan(plan))?;
                    Ok(0)
                }
                PlannerOutcome::Diagnostic(diag) => {
                    if out.machine() {
                        print!("{}", to_json(&outcome));
                    } else {
                        println!("{}: {}", diag.code.as_str(), diag.detail);
                    }
                    out.write("diagnostic.json", &to_json(&outcome))?;
                    Ok(1)
                }
            }
        }
        Command::ValidatePlan { domain, problem, plan, out } => {
            let (_, d) = load_domain(&domain)?;
            let p = load_problem(&problem, &d)?;
            let steps = parse_plan(&read(&plan)?).map_err(|e| anyhow!("{}: {e}", plan.display()))?;
            let verdict = validate_plan(&d, &p, &steps);
            if out.machine() {
                print!("{}", to_json(&verdict));
            } else if let Some(f) = &verdict.failure {
                let reason = serde_json::to_value(f.reason)?;
                println!("INVALID at step {}: {} ({})", f.step, reason.as_str().unwrap_or_default(), f.detail);
            } else {
                println!("VALID ({} step(s))", steps.len());
            }
            out.write("verdict.json", &to_json(&verdict))?;
            Ok(if verdict.valid { 0 } else { 1 })
        }
        Command::Solve { task, arm, truth, pipeline, out } => solve_cmd(&task, arm, truth.as_deref(), &pipeline, &out),
        Command::Bench { manifest, arm, seed, workers, timing, pipeline, out } => {
            bench_cmd(&manifest, arm, seed, workers, timing, &pipeline, &out)
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
