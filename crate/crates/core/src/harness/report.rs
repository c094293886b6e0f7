use std::collections::BTreeMap;
use std::fmt::Write;

use serde::{Deserialize, Serialize};

use crate::extraction::FaultKind;
use crate::orchestrator::{Arm, FailureClass};

/// Outcome of one repetition of one manifest entry.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TaskResult {
    pub task_id: String,
    pub repetition: u32,
    pub domain: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fault: Option<FaultKind>,
    pub expect_solvable: bool,
    pub solved: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub failure: Option<FailureClass>,
    pub iterations: u32,
    pub repair_calls: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub elapsed_ms: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DomainRow {
    pub domain: String,
    pub runs: u64,
    pub solved: u64,
    pub success_rate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FaultRow {
    pub fault: FaultKind,
    pub runs: u64,
    pub recovered: u64,
    pub recovery_rate: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TimingSummary {
    pub p50_ms: u64,
    pub p90_ms: u64,
    pub p99_ms: u64,
    pub max_ms: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuiteReport {
    pub suite: String,
    pub arm: Arm,
    pub runs: u64,
    pub solved: u64,
    /// Weighted by runs.
    pub success_rate: f64,
    /// Unweighted mean of the per-domain rates.
    pub domain_average: f64,
    pub domains: Vec<DomainRow>,
    pub faults: Vec<FaultRow>,
    pub failures: BTreeMap<FailureClass, u64>,
    pub repair_calls: u64,
    pub repair_calls_on_clean: u64,
    /// Runs whose outcome disagrees with the entry's solvability flag.
    pub expectation_mismatches: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub timing: Option<TimingSummary>,
    pub tasks: Vec<TaskResult>,
}

pub fn success_rate(solved: u64, runs: u64) -> f64 {
    if runs == 0 {
        0.0
    } else {
        solved as f64 * 100.0 / runs as f64
    }
}

/// Nearest-rank percentile of sorted values.
fn percentile(sorted: &[u64], p: u64) -> u64 {
    if sorted.is_empty() {
        return 0;
    }
    let rank = (p * sorted.len() as u64).div_ceil(100).max(1) as usize;
    sorted[rank - 1]
}

impl SuiteReport {
    /// Folds results, which must be in manifest order, into a report.
    pub fn aggregate(suite: &str, arm: Arm, tasks: Vec<TaskResult>) -> Self {
        let runs = tasks.len() as u64;
        let solved = tasks.iter().filter(|t| t.solved).count() as u64;

        let mut domains: Vec<DomainRow> = Vec::new();
        for t in &tasks {
            let row = match domains.iter_mut().find(|r| r.domain == t.domain) {
                Some(r) => r,
                None => {
                    domains.push(DomainRow { domain: t.domain.clone(), runs: 0, solved: 0, success_rate: 0.0 });
                    domains.last_mut().unwrap()
                }
            };
            row.runs += 1;
            row.solved += t.solved as u64;
        }
        for r in &mut domains {
            r.success_rate = success_rate(r.solved, r.runs);
        }
        let domain_average = if domains.is_empty() {
            0.0
        } else {
            domains.iter().map(|r| r.success_rate).sum::<f64>() / domains.len() as f64
        };

        let mut per_fault: BTreeMap<FaultKind, (u64, u64)> = BTreeMap::new();
        for t in &tasks {
            if let Some(k) = t.fault {
                let e = per_fault.entry(k).or_default();
                e.0 += 1;
                e.1 += t.solved as u64;
            }
        }
        let faults = per_fault
            .into_iter()
            .map(|(fault, (runs, recovered))| FaultRow { fault, runs, recovered, recovery_rate: success_rate(recovered, runs) })
            .collect();

        let mut failures = BTreeMap::new();
        for t in tasks.iter().filter(|t| !t.solved) {
            *failures.entry(t.failure.unwrap_or(FailureClass::GroundTruthReject)).or_insert(0) += 1;
        }

        let timing = if tasks.iter().all(|t| t.elapsed_ms.is_some()) && !tasks.is_empty() {
            let mut ms: Vec<u64> = tasks.iter().filter_map(|t| t.elapsed_ms).collect();
            ms.sort_unstable();
            Some(TimingSummary {
                p50_ms: percentile(&ms, 50),
                p90_ms: percentile(&ms, 90),
                p99_ms: percentile(&ms, 99),
                max_ms: *ms.last().unwrap(),
            })
        } else {
            None
        };

        SuiteReport {
            suite: suite.to_string(),
            arm,
            runs,
            solved,
            success_rate: success_rate(solved, runs),
            domain_average,
            domains,
            faults,
            failures,
            repair_calls: tasks.iter().map(|t| t.repair_calls as u64).sum(),
            repair_calls_on_clean: tasks.iter().filter(|t| t.fault.is_none()).map(|t| t.repair_calls as u64).sum(),
            expectation_mismatches: tasks.iter().filter(|t| t.solved != t.expect_solvable).count() as u64,
            timing,
            tasks,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReportFormat {
    Table,
    Machine,
}

impl std::str::FromStr for ReportFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s.to_ascii_lowercase().as_str() {
            "table" => Ok(ReportFormat::Table),
            "machine" | "json" => Ok(ReportFormat::Machine),
            _ => Err(format!("unknown report format `{s}`")),
        }
    }
}

pub fn emit_report(r: &SuiteReport, format: ReportFormat) -> String {
    match format {
        ReportFormat::Machine => {
            let mut s = serde_json::to_string_pretty(r).expect("report serializes");
            s.push('\n');
            s
        }
        ReportFormat::Table => table(r),
    }
}

fn table(r: &SuiteReport) -> String {
    let mut out = String::new();
    let arm = match r.arm {
        Arm::Fast => "fast",
        Arm::Duplex => "duplex",
    };
    let _ = writeln!(out, "Suite: {} (arm: {arm})", r.suite);
    let w = r.domains.iter().map(|d| d.domain.len()).chain(["Average".len(), "Overall".len()]).max().unwrap();
    let _ = writeln!(out, "{:<w$}  {:>6}  {:>6}  {:>6}", "Domain", "Runs", "Solved", "SR(%)");
    for d in &r.domains {
        let _ = writeln!(out, "{:<w$}  {:>6}  {:>6}  {:>6.1}", d.domain, d.runs, d.solved, d.success_rate);
    }
    let _ = writeln!(out, "{:<w$}  {:>6}  {:>6}  {:>6.1}", "Average", "", "", r.domain_average);
    let _ = writeln!(out, "{:<w$}  {:>6}  {:>6}  {:>6.1}", "Overall", r.runs, r.solved, r.success_rate);
    let _ = writeln!(out, "Average = unweighted mean of per-domain SR; Overall = weighted by runs.");

    if !r.faults.is_empty() {
        let fw = r.faults.iter().map(|f| f.fault.as_str().len()).max().unwrap().max("Fault".len());
        let _ = writeln!(out, "\n{:<fw$}  {:>6}  {:>9}  {:>6}", "Fault", "Runs", "Recovered", "Rate(%)");
        for f in &r.faults {
            let _ = writeln!(out, "{:<fw$}  {:>6}  {:>9}  {:>6.1}", f.fault.as_str(), f.runs, f.recovered, f.recovery_rate);
        }
    }
    if !r.failures.is_empty() {
        let _ = writeln!(out, "\nFailures:");
        for (class, n) in &r.failures {
            let _ = writeln!(out, "  {:<20} {n}", class.as_str());
        }
    }
    let _ = writeln!(out, "\nRepair calls: {} ({} on clean tasks)", r.repair_calls, r.repair_calls_on_clean);
    if let Some(t) = r.timing {
        let _ = writeln!(out, "Timing (ms): p50 {}  p90 {}  p99 {}  max {}", t.p50_ms, t.p90_ms, t.p99_ms, t.max_ms);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn result(domain: &str, solved: bool) -> TaskResult {
        TaskResult {
            task_id: format!("{domain}-t"),
            repetition: 0,
            domain: domain.into(),
            fault: None,
            expect_solvable: true,
            solved,
            failure: (!solved).then_some(FailureClass::SearchFail),
            iterations: 0,
            repair_calls: 0,
            elapsed_ms: None,
        }
    }

    #[test]
    fn single_domain_table() {
        let r = SuiteReport::aggregate("s", Arm::Fast, vec![result("tabletop", true)]);
        let t = emit_report(&r, ReportFormat::Table);
        assert!(t.contains("tabletop") && t.contains("Average") && t.contains("100.0"));
        assert_eq!(r.domain_average, 100.0);
    }

    #[test]
    fn two_domain_average() {
        let mut tasks = vec![result("a", true), result("a", true), result("a", true), result("a", false), result("a", false)];
        tasks.push(result("b", true));
        let r = SuiteReport::aggregate("s", Arm::Fast, tasks);
        assert_eq!((r.domains[0].success_rate, r.domains[1].success_rate), (60.0, 100.0));
        assert_eq!(r.domain_average, 80.0);
        assert_eq!(r.success_rate, 4.0 * 100.0 / 6.0);
        assert_eq!(r.failures.values().sum::<u64>(), r.runs - r.solved);
    }

    #[test]
    fn machine_round_trip() {
        let mut tasks: Vec<TaskResult> = (0..7).map(|i| result(["x", "y", "z"][i % 3], i % 2 == 0)).collect();
        tasks[1].fault = Some(FaultKind::OmitInitFact);
        let r = SuiteReport::aggregate("s", Arm::Duplex, tasks);
        let text = emit_report(&r, ReportFormat::Machine);
        assert_eq!(serde_json::from_str::<SuiteReport>(&text).unwrap(), r);
    }

    #[test]
    fn percentiles() {
        let v: Vec<u64> = (1..=100).collect();
        assert_eq!((percentile(&v, 50), percentile(&v, 90), percentile(&v, 99)), (50, 90, 99));
        assert_eq!(percentile(&[7], 50), 7);
    }
}
