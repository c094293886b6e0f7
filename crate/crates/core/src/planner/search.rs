use std::cmp::Reverse;
use std::collections::hash_map::Entry;
use std::collections::{BinaryHeap, HashMap};
use std::time::Instant;

use super::ground::{GroundTask, State};
use super::heuristic::heuristic_value;
use super::{Diagnostic, DiagnosticCode, Plan, PlannerOutcome, SearchConfig, SearchMode, SearchStats};

struct Node {
    state: State,
    parent: Option<(usize, usize)>,
    g: u64,
}

/// Best-first search: greedy on `h` when satisficing, A* with reopening when
/// optimal. Ties go to lower `h`, then to earlier insertion.
pub fn solve(task: &GroundTask, cfg: &SearchConfig) -> PlannerOutcome {
    let start = Instant::now();
    let deadline = start + cfg.time_budget();
    let h = cfg.heuristic();
    let optimal = cfg.mode() == SearchMode::Optimal;
    let mut stats = SearchStats::default();
    let finish = |mut stats: SearchStats, code: DiagnosticCode, detail: String| {
        stats.elapsed_ms = start.elapsed().as_millis() as u64;
        PlannerOutcome::Diagnostic(Diagnostic { code, detail, stats })
    };

    let mut nodes: Vec<Node> = Vec::new();
    let mut best_g: HashMap<State, u64> = HashMap::new();
    // (primary key, h, insertion order, node)
    let mut open: BinaryHeap<Reverse<(u64, u64, u64, usize)>> = BinaryHeap::new();
    let mut seq = 0u64;

    let Some(h0) = heuristic_value(h, task.init(), task) else {
        return finish(stats, DiagnosticCode::SearchFail, "goal unreachable from the initial state even ignoring deletes".into());
    };
    nodes.push(Node { state: task.init().clone(), parent: None, g: 0 });
    best_g.insert(task.init().clone(), 0);
    open.push(Reverse((h0, h0, seq, 0)));
    stats.generated = 1;

    while let Some(Reverse((_, _, _, id))) = open.pop() {
        if optimal && nodes[id].g > best_g[&nodes[id].state] {
            continue;
        }
        if task.is_goal(&nodes[id].state) {
            stats.elapsed_ms = start.elapsed().as_millis() as u64;
            return extract(task, &nodes, id, stats);
        }
        if stats.expansions >= cfg.expansion_budget() {
            return finish(stats, DiagnosticCode::Timeout, format!("expansion budget of {} exhausted", cfg.expansion_budget()));
        }
        if stats.expansions % 64 == 0 && Instant::now() >= deadline {
            return finish(stats, DiagnosticCode::Timeout, format!("time budget of {:?} exhausted", cfg.time_budget()));
        }
        stats.expansions += 1;
        let g = nodes[id].g;
        for (ai, a) in task.actions().iter().enumerate() {
            if !a.applicable(&nodes[id].state) {
                continue;
            }
            let next = a.apply(&nodes[id].state);
            let ng = g + a.cost;
            match best_g.entry(next.clone()) {
                Entry::Occupied(mut e) => {
                    if !optimal || ng >= *e.get() {
                        continue;
                    }
                    e.insert(ng);
                }
                Entry::Vacant(e) => {
                    e.insert(ng);
                }
            }
            let Some(hv) = heuristic_value(h, &next, task) else { continue };
            stats.generated += 1;
            seq += 1;
            let key = if optimal { ng + hv } else { hv };
            nodes.push(Node { state: next, parent: Some((id, ai)), g: ng });
            open.push(Reverse((key, hv, seq, nodes.len() - 1)));
        }
    }
    finish(stats, DiagnosticCode::SearchFail, "search space exhausted without reaching the goal".into())
}

fn extract(task: &GroundTask, nodes: &[Node], goal: usize, stats: SearchStats) -> PlannerOutcome {
    let mut path = Vec::new();
    let mut cur = goal;
    while let Some((parent, action)) = nodes[cur].parent {
        path.push(action);
        cur = parent;
    }
    path.reverse();

    let mut state = task.init().clone();
    for &ai in &path {
        let a = &task.actions()[ai];
        assert!(a.applicable(&state), "search produced an inapplicable step {}", a.step());
        state = a.apply(&state);
    }
    assert!(task.is_goal(&state), "search produced a plan that misses the goal");

    let steps = path.iter().map(|&ai| task.actions()[ai].step()).collect();
    PlannerOutcome::Plan {
        plan: Plan { steps, cost: nodes[goal].g },
        final_state: Some(task.state_atoms(&state)),
        stats,
    }
}
