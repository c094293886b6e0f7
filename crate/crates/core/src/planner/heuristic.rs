use std::cmp::Reverse;
use std::collections::BinaryHeap;

use super::ground::{GroundTask, State};
use super::Heuristic;

/// Heuristic estimate of the cost to a goal from `state`; `None` is infinity.
///
/// The relaxed heuristics ignore delete effects, negative preconditions and
/// negative goals.
pub fn heuristic_value(h: Heuristic, state: &State, task: &GroundTask) -> Option<u64> {
    match h {
        Heuristic::Goalcount => Some(
            (task.goal().iter().filter(|&&i| !state.contains(i)).count()
                + task.goal_neg().iter().filter(|&&i| state.contains(i)).count()) as u64,
        ),
        Heuristic::Blind => Some(if task.is_goal(state) {
            0
        } else {
            task.actions().iter().map(|a| a.cost).min().unwrap_or(1)
        }),
        Heuristic::HAdd => relaxed_cost(task, state, true),
        Heuristic::HMax => relaxed_cost(task, state, false),
    }
}

fn relaxed_cost(task: &GroundTask, state: &State, additive: bool) -> Option<u64> {
    let n = task.atoms().len();
    let mut cost = vec![u64::MAX; n];
    let mut heap = BinaryHeap::new();
    for i in state.ones() {
        cost[i] = 0;
        heap.push(Reverse((0u64, i)));
    }
    let actions = task.actions();
    let mut unsat: Vec<usize> = actions.iter().map(|a| a.pre_pos.len()).collect();
    let mut acc = vec![0u64; actions.len()];
    let fire = |ai: usize, base: u64, cost: &mut Vec<u64>, heap: &mut BinaryHeap<Reverse<(u64, usize)>>| {
        let v = base.saturating_add(actions[ai].cost);
        for &q in &actions[ai].add {
            if v < cost[q] {
                cost[q] = v;
                heap.push(Reverse((v, q)));
            }
        }
    };
    for (ai, a) in actions.iter().enumerate() {
        if a.pre_pos.is_empty() {
            fire(ai, 0, &mut cost, &mut heap);
        }
    }

    let mut is_goal = vec![false; n];
    for &g in task.goal() {
        is_goal[g] = true;
    }
    let mut remaining = task.goal().len();
    let mut done = vec![false; n];
    while remaining > 0 {
        let Some(Reverse((c, p))) = heap.pop() else { break };
        if done[p] || c > cost[p] {
            continue;
        }
        done[p] = true;
        if is_goal[p] {
            remaining -= 1;
        }
        for &ai in task.consumers(p) {
            acc[ai] = if additive { acc[ai].saturating_add(c) } else { acc[ai].max(c) };
            unsat[ai] -= 1;
            if unsat[ai] == 0 {
                fire(ai, acc[ai], &mut cost, &mut heap);
            }
        }
    }
    if remaining > 0 {
        return None;
    }
    let goals = task.goal().iter().map(|&g| cost[g]);
    Some(if additive { goals.fold(0, u64::saturating_add) } else { goals.max().unwrap_or(0) })
}
