mod common;

use std::collections::BTreeMap;
use std::sync::Arc;
use std::time::Duration;

use common::suites::{data_dir, entry, FIXTURE_DOMAINS};
use duplex_core::corpus;
use duplex_core::extraction::{
    inject_fault, parse_record, ExtractionRecord, Extractor, FaultInjectingExtractor, FaultKind, ScriptedExtractor, Task,
};
use duplex_core::harness::{emit_report, run_suite, ReportFormat, SuiteManifest, SuiteOptions};
use duplex_core::orchestrator::{Arm, Diagnostics, OracleRepair, Pipeline, PipelineConfig, RepairAgent, RepairError, StageOutcome};
use duplex_core::plan_validator::validate_plan;
use duplex_core::mapper::map_to_problem;
use duplex_core::pddl::parse_domain;
use proptest::prelude::*;

fn pipeline(fixture: &str, fault: Option<(FaultKind, u64)>, cfg: PipelineConfig) -> (Pipeline, Task) {
    let f = corpus::fixture(fixture).unwrap();
    pipeline_for(f.id, fixture, fault, cfg)
}

fn pipeline_for(task_id: &str, fixture: &str, fault: Option<(FaultKind, u64)>, cfg: PipelineConfig) -> (Pipeline, Task) {
    let f = corpus::fixture(fixture).unwrap();
    let base: Arc<dyn Extractor> = Arc::new(ScriptedExtractor::new().with(task_id, f.record));
    let extractor: Arc<dyn Extractor> = match fault {
        Some((k, s)) => Arc::new(FaultInjectingExtractor::new(base, k, s)),
        None => base,
    };
    let repair = Arc::new(OracleRepair::new().with(task_id, parse_record(f.record).unwrap()));
    let p = Pipeline::new(corpus::domain(f.domain).unwrap().source, cfg, extractor, repair).unwrap();
    (p, Task::new(task_id, f.task))
}

fn fixture_ids() -> Vec<&'static str> {
    FIXTURE_DOMAINS.iter().map(|(f, _)| *f).collect()
}

/// Returns a fixed record after a pause.
struct SlowRepair {
    pause: Duration,
    record: ExtractionRecord,
}

impl RepairAgent for SlowRepair {
    fn repair(&self, _: &Diagnostics) -> Result<ExtractionRecord, RepairError> {
        std::thread::sleep(self.pause);
        Ok(self.record.clone())
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn clean_and_level1_inputs_never_reflect(
        fixture in prop::sample::select(fixture_ids()),
        fault in prop::option::of(prop::sample::select(vec![FaultKind::DropMandatoryKey, FaultKind::StripObjectType, FaultKind::DuplicateObjectId])),
        seed in any::<u64>(),
    ) {
        let (p, task) = pipeline(fixture, fault.map(|k| (k, seed)), PipelineConfig::default());
        let fast = p.run(&task, Arm::Fast);
        let duplex = p.run(&task, Arm::Duplex);
        prop_assert!(fast.solved(), "{:?}", fast.failure);
        prop_assert_eq!(duplex.repair_calls, 0);
        prop_assert!(duplex.iterations.is_empty());
        prop_assert_eq!(fast.plan, duplex.plan);
    }

    #[test]
    fn duplex_never_does_worse(
        fixture in prop::sample::select(fixture_ids()),
        kind in prop::sample::select(FaultKind::ALL.to_vec()),
        seed in any::<u64>(),
        iters in 0u32..4,
    ) {
        let cfg = PipelineConfig { max_reflection_iters: iters, ..PipelineConfig::default() };
        let (p, task) = pipeline(fixture, Some((kind, seed)), cfg);
        let fast = p.run(&task, Arm::Fast);
        let duplex = p.run(&task, Arm::Duplex);
        prop_assert!(duplex.solved() || !fast.solved());
        prop_assert!(duplex.repair_calls <= iters);
        prop_assert_eq!(duplex.iterations.len() as u32, duplex.repair_calls);
        prop_assert_eq!(fast.repair_calls, 0);
        if fast.solved() {
            prop_assert_eq!(duplex.repair_calls, 0);
        }
        // Fast and duplex see the same first attempt.
        let untimed = |s: &[StageOutcome]| s.iter().map(|x| (x.stage, x.ok, x.detail.clone())).collect::<Vec<_>>();
        prop_assert_eq!(untimed(&fast.stages), untimed(&duplex.stages[..fast.stages.len()]));
    }

    #[test]
    fn llm_time_is_bounded_by_budget(pause_ms in 0u64..60, iters in 0u32..3, seed in any::<u64>()) {
        let budget_ms = 30u64;
        let f = corpus::fixture("sussman").unwrap();
        let truth = parse_record(f.record).unwrap();
        let faulted = inject_fault(&truth, FaultKind::HallucinatePredicate, seed).unwrap();
        let base: Arc<dyn Extractor> = Arc::new(ScriptedExtractor::new().with(f.id, f.record));
        let extractor = Arc::new(FaultInjectingExtractor::new(base, FaultKind::HallucinatePredicate, seed));
        // Alternates between records so stagnation never ends the loop early.
        struct Flip(SlowRepair, SlowRepair, std::sync::atomic::AtomicUsize);
        impl RepairAgent for Flip {
            fn repair(&self, d: &Diagnostics) -> Result<ExtractionRecord, RepairError> {
                let n = self.2.fetch_add(1, std::sync::atomic::Ordering::SeqCst);
                if n % 2 == 0 { self.0.repair(d) } else { self.1.repair(d) }
            }
        }
        let mut other = faulted.clone();
        other.goal.push(duplex_core::extraction::RelationEntry::new("floats", ["a"]));
        let repair = Arc::new(Flip(
            SlowRepair { pause: Duration::from_millis(pause_ms), record: other },
            SlowRepair { pause: Duration::from_millis(pause_ms), record: faulted },
            Default::default(),
        ));
        let cfg = PipelineConfig {
            llm_time_budget_secs: budget_ms as f64 / 1000.0,
            max_reflection_iters: iters,
            ..PipelineConfig::default()
        };
        let p = Pipeline::new(corpus::domain(f.domain).unwrap().source, cfg, extractor, repair).unwrap();
        let rec = p.run(&Task::new(f.id, f.task), Arm::Duplex);
        prop_assert!(!rec.solved());
        let calls = rec.repair_calls as u64 + 1;
        // Each call may overrun its budget by scheduling slack only.
        prop_assert!(rec.llm_ms <= calls * (budget_ms + 15), "llm_ms {} for {} calls", rec.llm_ms, calls);
        prop_assert!(rec.repair_calls <= iters);
        if pause_ms > budget_ms + 10 {
            prop_assert!(rec.iterations.iter().all(|i| i.repair_error.is_some()));
        }
    }
}

#[test]
fn omitted_init_facts_are_always_recovered() {
    for f in corpus::FIXTURES {
        for seed in 0..20 {
            let (p, task) = pipeline(f.id, Some((FaultKind::OmitInitFact, seed)), PipelineConfig::default());
            let fast = p.run(&task, Arm::Fast);
            let duplex = p.run(&task, Arm::Duplex);
            assert!(!fast.solved(), "{} seed {seed}", f.id);
            assert!(duplex.solved(), "{} seed {seed}: {:?}", f.id, duplex.failure);
            assert_eq!(duplex.repair_calls, 1);
        }
    }
}

fn mixed_manifest(seed: u64) -> SuiteManifest {
    let mut entries = Vec::new();
    for (i, (fx, dom)) in FIXTURE_DOMAINS.iter().enumerate() {
        entries.push(entry(fx, dom, None));
        for (k, kind) in FaultKind::ALL.iter().enumerate() {
            if (i + k) % 2 == 0 {
                entries.push(entry(fx, dom, Some((*kind, seed.wrapping_add(k as u64)))));
            }
        }
    }
    SuiteManifest { suite: format!("mixed-{seed}"), entries }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(6))]

    #[test]
    fn success_rate_matches_an_independent_count(seed in any::<u64>(), arm in prop::sample::select(vec![Arm::Fast, Arm::Duplex])) {
        let m = mixed_manifest(seed);
        let report = run_suite(&m, &data_dir(), &PipelineConfig::default(), arm, &SuiteOptions::default()).unwrap();

        // Recount by running each entry directly and checking plans against ground truth.
        let mut per_domain: BTreeMap<String, (u64, u64)> = BTreeMap::new();
        let mut solved = 0u64;
        for e in &m.entries {
            let fx = e.fixture.as_ref().unwrap().file_stem().unwrap().to_str().unwrap();
            let f = corpus::fixture(fx).unwrap();
            let fault = e.fault.as_ref().map(|s| (s.kind, s.seed.unwrap()));
            let (p, task) = pipeline_for(&e.task_id, fx, fault, PipelineConfig::default());
            let rec = p.run(&task, arm);
            let d = parse_domain(corpus::domain(f.domain).unwrap().source).unwrap();
            let truth = map_to_problem(&parse_record(f.record).unwrap(), &d, "t").unwrap();
            let ok = rec.plan.as_ref().is_some_and(|pl| validate_plan(&d, &truth, &pl.steps).valid);
            solved += ok as u64;
            let row = per_domain.entry(d.name.clone()).or_default();
            row.0 += 1;
            row.1 += ok as u64;
        }
        let n = m.entries.len() as u64;
        prop_assert_eq!(report.runs, n);
        prop_assert_eq!(report.solved, solved);
        prop_assert!((report.success_rate - 100.0 * solved as f64 / n as f64).abs() < 1e-9);
        let avg = per_domain.values().map(|(r, s)| 100.0 * *s as f64 / *r as f64).sum::<f64>() / per_domain.len() as f64;
        prop_assert!((report.domain_average - avg).abs() < 1e-9);
        for row in &report.domains {
            let (r, s) = per_domain[&row.domain];
            prop_assert_eq!((row.runs, row.solved), (r, s));
        }
    }
}

#[test]
fn reports_are_reproducible_across_runs_and_thread_counts() {
    let m = mixed_manifest(7);
    let cfg = PipelineConfig::default();
    let texts: Vec<String> = [Some(1), Some(4), None, Some(4)]
        .into_iter()
        .map(|workers| {
            let opts = SuiteOptions { workers, seed: 11, ..SuiteOptions::default() };
            emit_report(&run_suite(&m, &data_dir(), &cfg, Arm::Duplex, &opts).unwrap(), ReportFormat::Machine)
        })
        .collect();
    assert!(texts.windows(2).all(|w| w[0] == w[1]));
}

#[test]
fn unseeded_faults_follow_the_suite_seed() {
    let mut m = mixed_manifest(0);
    for e in &mut m.entries {
        if let Some(f) = &mut e.fault {
            f.seed = None;
        }
    }
    let cfg = PipelineConfig::default();
    let run = |seed| {
        let opts = SuiteOptions { seed, ..SuiteOptions::default() };
        emit_report(&run_suite(&m, &data_dir(), &cfg, Arm::Fast, &opts).unwrap(), ReportFormat::Machine)
    };
    assert_eq!(run(3), run(3));
}

#[test]
fn omitted_init_suite_separates_the_arms() {
    let mut entries = Vec::new();
    for (i, (fx, dom)) in FIXTURE_DOMAINS.iter().cycle().take(10).enumerate() {
        let fault = (i < 4).then_some((FaultKind::OmitInitFact, 500 + i as u64));
        let mut e = entry(fx, dom, fault);
        e.task_id = format!("{}-{i}", e.task_id);
        entries.push(e);
    }
    let m = SuiteManifest { suite: "omit-10".into(), entries };
    let cfg = PipelineConfig::default();
    let rate = |arm| run_suite(&m, &data_dir(), &cfg, arm, &SuiteOptions::default()).unwrap().success_rate;
    assert_eq!(rate(Arm::Fast), 60.0);
    assert_eq!(rate(Arm::Duplex), 100.0);
}
