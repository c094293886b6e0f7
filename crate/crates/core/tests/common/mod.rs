//! Test-only oracles and generators. Nothing here uses the crate's grounder,
//! heuristics or search.

#![allow(dead_code)]

use std::collections::{BTreeSet, HashMap, HashSet, VecDeque};

use duplex_core::corpus;
use duplex_core::extraction::{ExtractionRecord, ObjectEntry, RelationEntry};
use duplex_core::pddl::{parse_domain, parse_problem, Condition, Domain, GroundAtom, GroundLiteral, ProblemSpec, Term, ROOT_TYPE};
use duplex_core::planner::PlanStep;
use proptest::prelude::*;

pub fn load(domain: &str, problem: &str) -> (Domain, ProblemSpec) {
    let d = parse_domain(corpus::domain(domain).unwrap().source).unwrap();
    let p = parse_problem(corpus::problem(problem).unwrap().source, &d).unwrap();
    (d, p)
}

pub fn domain(name: &str) -> Domain {
    parse_domain(corpus::domain(name).unwrap().source).unwrap()
}

pub type Atoms = BTreeSet<GroundAtom>;

fn is_a(d: &Domain, t: &str, want: &str) -> bool {
    let mut cur = Some(t);
    while let Some(c) = cur {
        if c == want {
            return true;
        }
        cur = d.types.parent_of(c);
    }
    false
}

/// Every applicable (step, successor) pair, by naive substitution.
pub fn successors(d: &Domain, objects: &[(String, String)], s: &Atoms) -> Vec<(PlanStep, Atoms)> {
    let mut out = Vec::new();
    for a in &d.actions {
        let pools: Vec<Vec<&str>> = a
            .params
            .iter()
            .map(|p| objects.iter().filter(|(_, t)| is_a(d, t, &p.type_name)).map(|(n, _)| n.as_str()).collect())
            .collect();
        let mut tuple = vec![0usize; pools.len()];
        if pools.iter().any(|p| p.is_empty()) {
            continue;
        }
        'tuples: loop {
            let sub: HashMap<&str, &str> =
                a.params.iter().zip(&tuple).enumerate().map(|(k, (p, &i))| (p.name.as_str(), pools[k][i])).collect();
            let val = |t: &Term| -> String {
                match t {
                    Term::Var(v) => sub[v.as_str()].to_string(),
                    Term::Object(o) => o.clone(),
                }
            };
            let ground = |atom: &duplex_core::pddl::Atom| GroundAtom { predicate: atom.predicate.clone(), args: atom.args.iter().map(val).collect() };
            let holds = a.precondition.iter().all(|c| match c {
                Condition::Literal { atom, positive } => s.contains(&ground(atom)) == *positive,
                Condition::Equality { left, right, positive } => (val(left) == val(right)) == *positive,
            });
            if holds {
                let mut next = s.clone();
                for x in &a.del {
                    next.remove(&ground(x));
                }
                for x in &a.add {
                    next.insert(ground(x));
                }
                let args = tuple.iter().enumerate().map(|(k, &i)| pools[k][i].to_string()).collect::<Vec<_>>();
                out.push((PlanStep { name: a.name.clone(), args }, next));
            }
            let mut k = tuple.len();
            loop {
                if k == 0 {
                    break 'tuples;
                }
                k -= 1;
                tuple[k] += 1;
                if tuple[k] < pools[k].len() {
                    break;
                }
                tuple[k] = 0;
            }
        }
    }
    out
}

pub fn objects_of(d: &Domain, p: &ProblemSpec) -> Vec<(String, String)> {
    d.constants.iter().chain(&p.objects).map(|o| (o.name.clone(), o.type_name.clone())).collect()
}

pub fn goal_holds(p: &ProblemSpec, s: &Atoms) -> bool {
    p.goal.iter().all(|l| s.contains(&l.atom) == l.positive)
}

pub enum Bfs {
    /// Length of a shortest plan.
    Solvable(usize),
    /// Every reachable state was visited without meeting the goal.
    Unsolvable { states: usize },
    /// More than the state limit is reachable.
    TooLarge,
}

pub fn bfs(d: &Domain, p: &ProblemSpec, limit: usize) -> Bfs {
    let objects = objects_of(d, p);
    let start: Atoms = p.init.clone();
    if goal_holds(p, &start) {
        return Bfs::Solvable(0);
    }
    let mut seen: HashSet<Atoms> = HashSet::from([start.clone()]);
    let mut queue = VecDeque::from([(start, 0usize)]);
    while let Some((s, depth)) = queue.pop_front() {
        for (_, next) in successors(d, &objects, &s) {
            if goal_holds(p, &next) {
                return Bfs::Solvable(depth + 1);
            }
            if seen.insert(next.clone()) {
                if seen.len() > limit {
                    return Bfs::TooLarge;
                }
                queue.push_back((next, depth + 1));
            }
        }
    }
    Bfs::Unsolvable { states: seen.len() }
}

/// Runs the plan with the naive successor function; `None` if a step is inapplicable.
pub fn simulate(d: &Domain, p: &ProblemSpec, plan: &[PlanStep]) -> Option<Atoms> {
    let objects = objects_of(d, p);
    let mut s = p.init.clone();
    for step in plan {
        s = successors(d, &objects, &s).into_iter().find(|(a, _)| a == step)?.1;
    }
    Some(s)
}

/// Index choices resolved against a domain into a schema-valid record.
#[derive(Debug, Clone)]
pub struct RecordPlan {
    pub objects: Vec<(usize, usize)>,
    pub init: Vec<(usize, Vec<usize>)>,
    pub goal: Vec<(usize, Vec<usize>)>,
}

pub fn record_plan() -> impl Strategy<Value = RecordPlan> {
    let rel = (any::<usize>(), prop::collection::vec(any::<usize>(), 0..4));
    (
        prop::collection::vec((any::<usize>(), 0usize..4), 1..8),
        prop::collection::vec(rel.clone(), 0..10),
        prop::collection::vec(rel, 0..5),
    )
        .prop_map(|(objects, init, goal)| RecordPlan { objects, init, goal })
}

/// Few objects, so exhaustive search stays cheap.
pub fn small_record_plan() -> impl Strategy<Value = RecordPlan> {
    let rel = (any::<usize>(), prop::collection::vec(any::<usize>(), 0..4));
    (
        prop::collection::vec((any::<usize>(), 1usize..3), 1..4),
        prop::collection::vec(rel.clone(), 0..8),
        prop::collection::vec(rel, 1..4),
    )
        .prop_map(|(objects, init, goal)| RecordPlan { objects, init, goal })
}

/// Small benchmark problems used as seeds for walk-based generation.
pub const SEED_PROBLEMS: [(&str, &str); 8] = [
    ("blocksworld", "bw-sussman"),
    ("blocksworld", "bw-4"),
    ("gripper", "gripper-2"),
    ("gripper", "gripper-3"),
    ("visitall", "visitall-2x2"),
    ("visitall", "visitall-3x3"),
    ("tabletop", "tabletop-listing"),
    ("kitchen", "kitchen-heat"),
];

/// Random walk of up to `picks.len()` steps; each pick selects a successor.
pub fn walk(d: &Domain, p: &ProblemSpec, from: &Atoms, picks: &[usize]) -> Atoms {
    let objects = objects_of(d, p);
    let mut s = from.clone();
    for &k in picks {
        let next = successors(d, &objects, &s);
        if next.is_empty() {
            break;
        }
        s = next[k % next.len()].1.clone();
    }
    s
}

/// A seed problem whose init and goal come from random walks. The goal is a
/// subset of a reachable state; `drop` optionally removes one init fact.
pub fn walk_problem() -> impl Strategy<Value = (Domain, ProblemSpec)> {
    (
        0..SEED_PROBLEMS.len(),
        prop::collection::vec(any::<usize>(), 0..6),
        prop::collection::vec(any::<usize>(), 1..10),
        prop::collection::vec(any::<bool>(), 1..24),
        prop::option::weighted(0.3, any::<usize>()),
    )
        .prop_map(|(pi, w1, w2, keep, drop)| {
            let (dn, pn) = SEED_PROBLEMS[pi];
            let (d, mut p) = load(dn, pn);
            let init = walk(&d, &p, &p.init, &w1);
            let target = walk(&d, &p, &init, &w2);
            let mut goal: BTreeSet<GroundLiteral> = target
                .iter()
                .enumerate()
                .filter(|(i, a)| keep[i % keep.len()] && !init.contains(*a))
                .map(|(_, a)| GroundLiteral::pos(a.clone()))
                .collect();
            if goal.is_empty() {
                goal = target.iter().take(1).cloned().map(GroundLiteral::pos).collect();
            }
            p.init = init;
            if let Some(k) = drop {
                if !p.init.is_empty() {
                    let victim = p.init.iter().nth(k % p.init.len()).unwrap().clone();
                    p.init.remove(&victim);
                }
            }
            p.goal = goal;
            (d, p)
        })
}

pub const DOMAINS: [&str; 5] = ["blocksworld", "gripper", "visitall", "tabletop", "kitchen"];

/// Builds a record that passes both validation levels for `d`.
///
/// Object types are drawn from the hierarchy; relation arguments are drawn
/// from objects and constants that fit each slot, and relations with an
/// unfillable slot are skipped.
pub fn realize(d: &Domain, plan: &RecordPlan) -> ExtractionRecord {
    let types: Vec<&str> = d.types.names().filter(|t| *t != ROOT_TYPE || d.types.is_untyped()).collect();
    let mut objects: Vec<ObjectEntry> = Vec::new();
    for (k, &(ti, copies)) in plan.objects.iter().enumerate() {
        let t = types[ti % types.len()];
        for c in 0..copies.max(1) {
            let id = format!("{}_{k}_{c}", t.replace('-', "_"));
            objects.push(ObjectEntry::new(id, t));
        }
    }
    let pool: Vec<(String, String)> = objects
        .iter()
        .map(|o| (o.id.clone(), o.type_name.clone().unwrap()))
        .chain(d.constants.iter().map(|c| (c.name.clone(), c.type_name.clone())))
        .collect();
    let build = |rels: &[(usize, Vec<usize>)]| -> Vec<RelationEntry> {
        rels.iter()
            .filter_map(|(pi, picks)| {
                let sig = &d.predicates[pi % d.predicates.len()];
                let mut args = Vec::new();
                for (slot, param) in sig.params.iter().enumerate() {
                    let fits: Vec<&String> = pool.iter().filter(|(_, t)| is_a(d, t, &param.type_name)).map(|(n, _)| n).collect();
                    if fits.is_empty() {
                        return None;
                    }
                    let pick = picks.get(slot).copied().unwrap_or(slot);
                    args.push(fits[pick % fits.len()].clone());
                }
                Some(RelationEntry::new(sig.name.clone(), args))
            })
            .collect()
    };
    ExtractionRecord { objects, init: build(&plan.init), goal: build(&plan.goal), missing: Default::default() }
}

/// Fixture records paired with their parsed domains.
pub fn fixtures() -> Vec<(&'static corpus::Fixture, Domain, ExtractionRecord)> {
    corpus::FIXTURES
        .iter()
        .map(|f| (f, domain(f.domain), duplex_core::extraction::parse_record(f.record).unwrap()))
        .collect()
}

pub mod suites {
    use std::path::PathBuf;

    use duplex_core::extraction::FaultKind;
    use duplex_core::harness::{FaultSpec, ManifestEntry};

    pub fn data_dir() -> PathBuf {
        PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("data")
    }

    /// A manifest entry for a bundled fixture, with its record as ground truth.
    pub fn entry(fixture: &str, domain: &str, fault: Option<(FaultKind, u64)>) -> ManifestEntry {
        let suffix = fault.map(|(k, s)| format!("-{}-{s}", k.as_str().to_lowercase())).unwrap_or_default();
        ManifestEntry {
            fixture: Some(format!("fixtures/{fixture}.json").into()),
            ground_truth: Some(format!("fixtures/{fixture}.json").into()),
            fault: fault.map(|(kind, seed)| FaultSpec { kind, seed: Some(seed) }),
            ..ManifestEntry::new(format!("{fixture}{suffix}"), format!("domains/{domain}.pddl"), format!("tasks/{fixture}.txt"))
        }
    }

    pub const FIXTURE_DOMAINS: [(&str, &str); 5] = [
        ("tabletop-apple", "tabletop"),
        ("sussman", "blocksworld"),
        ("gripper-one-hand", "gripper"),
        ("corridor", "visitall"),
        ("kitchen-heat", "kitchen"),
    ];
}
