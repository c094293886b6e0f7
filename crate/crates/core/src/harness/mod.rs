//! Suite execution and success-rate reporting.

mod manifest;
mod report;

use std::path::Path;
use std::sync::Arc;

use rayon::prelude::*;

use crate::extraction::{Extractor, FaultInjectingExtractor, ScriptedExtractor, Task};
use crate::orchestrator::{Arm, FailureClass, OracleRepair, Pipeline, PipelineConfig, RepairAgent, RunRecord};
use crate::plan_validator::validate_plan;

pub use manifest::{FaultSpec, LoadedEntry, ManifestEntry, ManifestError, SuiteManifest};
pub use report::{emit_report, success_rate, DomainRow, FaultRow, ReportFormat, SuiteReport, TaskResult, TimingSummary};

/// Where reflection gets its revised records.
#[derive(Clone, Default)]
pub enum RepairSource {
    /// Ground truth from each entry's `ground_truth` file.
    #[default]
    Oracle,
    Agent(Arc<dyn RepairAgent>),
}

#[derive(Clone, Default)]
pub struct SuiteOptions {
    /// Worker threads; `None` uses all logical cores.
    pub workers: Option<usize>,
    pub seed: u64,
    /// Keeps per-run wall-clock times in the report, which makes it
    /// non-reproducible.
    pub record_timing: bool,
    /// Used by entries without a fixture.
    pub extractor: Option<Arc<dyn Extractor>>,
    pub repair: RepairSource,
}

/// Stable 64-bit mix of the suite seed, entry index and repetition.
pub fn run_seed(suite_seed: u64, entry: usize, repetition: u32) -> u64 {
    let mut z = suite_seed ^ (entry as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15) ^ ((repetition as u64) << 32);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn run_one(
    idx: usize,
    rep: u32,
    e: &LoadedEntry,
    cfg: &PipelineConfig,
    arm: Arm,
    opts: &SuiteOptions,
) -> (TaskResult, RunRecord) {
    let id = &e.entry.task_id;
    let base: Arc<dyn Extractor> = match (&e.fixture, &opts.extractor) {
        (Some(wire), _) => Arc::new(ScriptedExtractor::new().with(id.clone(), wire.clone())),
        (None, Some(ex)) => ex.clone(),
        (None, None) => Arc::new(ScriptedExtractor::new()),
    };
    let extractor: Arc<dyn Extractor> = match &e.entry.fault {
        Some(f) => {
            let seed = f.seed.map_or_else(|| run_seed(opts.seed, idx, rep), |s| s.wrapping_add(rep as u64));
            Arc::new(FaultInjectingExtractor::new(base, f.kind, seed))
        }
        None => base,
    };
    let repair: Arc<dyn RepairAgent> = match &opts.repair {
        RepairSource::Agent(a) => a.clone(),
        RepairSource::Oracle => {
            let mut o = OracleRepair::new();
            if let Some((truth, _)) = &e.truth {
                o.insert(id.clone(), truth.clone());
            }
            Arc::new(o)
        }
    };
    let pipeline = Pipeline::new(&e.domain_text, cfg.clone(), extractor, repair).expect("domain and config checked up front");
    let rec = pipeline.run(&Task::new(id.clone(), e.task_text.clone()), arm);

    let mut solved = rec.solved();
    let mut failure = rec.failure;
    if let (Some(plan), Some((_, truth))) = (&rec.plan, &e.truth) {
        if !validate_plan(&e.domain, truth, &plan.steps).valid {
            solved = false;
            failure = Some(FailureClass::GroundTruthReject);
        }
    }
    let result = TaskResult {
        task_id: id.clone(),
        repetition: rep,
        domain: e.domain.name.clone(),
        fault: e.entry.fault.as_ref().map(|f| f.kind),
        expect_solvable: e.entry.expect_solvable,
        solved,
        failure,
        iterations: rec.iterations.len() as u32,
        repair_calls: rec.repair_calls,
        elapsed_ms: opts.record_timing.then_some(rec.elapsed_ms),
    };
    (result, rec)
}

/// Runs every repetition of every entry; results keep manifest order.
pub fn run_suite_with_records(
    m: &SuiteManifest,
    base: &Path,
    cfg: &PipelineConfig,
    arm: Arm,
    opts: &SuiteOptions,
) -> Result<(SuiteReport, Vec<RunRecord>), ManifestError> {
    cfg.check().map_err(|e| ManifestError::Invalid { task_id: String::new(), message: e.to_string() })?;
    let entries = m.resolve(base)?;
    let jobs: Vec<(usize, u32)> =
        entries.iter().enumerate().flat_map(|(i, e)| (0..e.entry.repetitions).map(move |r| (i, r))).collect();
    let work = || -> Vec<(TaskResult, RunRecord)> {
        jobs.par_iter().map(|&(i, r)| run_one(i, r, &entries[i], cfg, arm, opts)).collect()
    };
    let outputs = match opts.workers {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n.max(1))
            .build()
            .map_err(|e| ManifestError::Invalid { task_id: String::new(), message: e.to_string() })?
            .install(work),
        None => work(),
    };
    let (tasks, records): (Vec<TaskResult>, Vec<RunRecord>) = outputs.into_iter().unzip();
    Ok((SuiteReport::aggregate(&m.suite, arm, tasks), records))
}

pub fn run_suite(
    m: &SuiteManifest,
    base: &Path,
    cfg: &PipelineConfig,
    arm: Arm,
    opts: &SuiteOptions,
) -> Result<SuiteReport, ManifestError> {
    run_suite_with_records(m, base, cfg, arm, opts).map(|(r, _)| r)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::extraction::FaultKind;

    fn data_dir() -> std::path::PathBuf {
        Path::new(env!("CARGO_MANIFEST_DIR")).join("data")
    }

    fn entry(fixture: &str, domain: &str, fault: Option<FaultKind>) -> ManifestEntry {
        ManifestEntry {
            fixture: Some(format!("fixtures/{fixture}.json").into()),
            ground_truth: Some(format!("fixtures/{fixture}.json").into()),
            fault: fault.map(|kind| FaultSpec { kind, seed: None }),
            ..ManifestEntry::new(fixture, format!("domains/{domain}.pddl"), format!("tasks/{fixture}.txt"))
        }
    }

    #[test]
    fn clean_fixtures_all_solve() {
        let m = SuiteManifest {
            suite: "clean".into(),
            entries: vec![
                entry("tabletop-apple", "tabletop", None),
                entry("sussman", "blocksworld", None),
                entry("gripper-one-hand", "gripper", None),
                entry("kitchen-heat", "kitchen", None),
            ],
        };
        let r = run_suite(&m, &data_dir(), &PipelineConfig::default(), Arm::Fast, &SuiteOptions::default()).unwrap();
        assert_eq!(r.success_rate, 100.0, "{r:#?}");
        assert_eq!(r.repair_calls, 0);
    }

    #[test]
    fn omitted_goal_caught_by_ground_truth() {
        let m = SuiteManifest { suite: "g".into(), entries: vec![entry("sussman", "blocksworld", Some(FaultKind::OmitGoalFact))] };
        let r = run_suite(&m, &data_dir(), &PipelineConfig::default(), Arm::Fast, &SuiteOptions::default()).unwrap();
        assert_eq!(r.tasks[0].failure, Some(FailureClass::GroundTruthReject));
    }

    #[test]
    fn missing_file_is_manifest_error() {
        let m = SuiteManifest { suite: "x".into(), entries: vec![ManifestEntry::new("t", "nope.pddl", "nope.txt")] };
        assert!(matches!(
            run_suite(&m, &data_dir(), &PipelineConfig::default(), Arm::Fast, &SuiteOptions::default()),
            Err(ManifestError::Io { .. })
        ));
        let mut bad = entry("tabletop-apple", "tabletop", None);
        bad.repetitions = 0;
        let m = SuiteManifest { suite: "x".into(), entries: vec![bad] };
        assert!(matches!(m.resolve(&data_dir()), Err(ManifestError::Invalid { .. })));
    }

    #[test]
    fn seeds_vary_by_repetition() {
        assert_ne!(run_seed(0, 0, 0), run_seed(0, 0, 1));
        assert_ne!(run_seed(0, 0, 0), run_seed(0, 1, 0));
        assert_eq!(run_seed(5, 3, 2), run_seed(5, 3, 2));
    }
}
