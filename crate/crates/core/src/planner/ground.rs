use std::collections::{BTreeSet, HashMap, HashSet};

use fixedbitset::FixedBitSet;

use super::{Diagnostic, DiagnosticCode, PlanStep};
use crate::pddl::{ActionSchema, Atom, Condition, Domain, GroundAtom, ProblemSpec, Term};

/// A set of true atoms, indexed by the task's universe.
pub type State = FixedBitSet;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GroundAction {
    pub name: String,
    pub args: Vec<String>,
    pub pre_pos: Vec<usize>,
    pub pre_neg: Vec<usize>,
    pub add: Vec<usize>,
    pub del: Vec<usize>,
    pub cost: u64,
}

impl GroundAction {
    pub fn step(&self) -> PlanStep {
        PlanStep { name: self.name.clone(), args: self.args.clone() }
    }

    pub fn applicable(&self, s: &State) -> bool {
        self.pre_pos.iter().all(|&i| s.contains(i)) && !self.pre_neg.iter().any(|&i| s.contains(i))
    }

    pub fn apply(&self, s: &State) -> State {
        let mut next = s.clone();
        for &i in &self.del {
            next.set(i, false);
        }
        for &i in &self.add {
            next.insert(i);
        }
        next
    }
}

/// A fully instantiated STRIPS task. Immutable once built.
#[derive(Debug, Clone)]
pub struct GroundTask {
    atoms: Vec<GroundAtom>,
    index: HashMap<GroundAtom, usize>,
    init: State,
    goal: Vec<usize>,
    goal_neg: Vec<usize>,
    actions: Vec<GroundAction>,
    /// Actions with each atom among their positive preconditions.
    consumers: Vec<Vec<usize>>,
}

impl GroundTask {
    pub fn atoms(&self) -> &[GroundAtom] {
        &self.atoms
    }

    pub fn atom_index(&self, atom: &GroundAtom) -> Option<usize> {
        self.index.get(atom).copied()
    }

    pub fn init(&self) -> &State {
        &self.init
    }

    /// Atoms that must hold in a goal state.
    pub fn goal(&self) -> &[usize] {
        &self.goal
    }

    /// Atoms that must not hold in a goal state.
    pub fn goal_neg(&self) -> &[usize] {
        &self.goal_neg
    }

    pub fn actions(&self) -> &[GroundAction] {
        &self.actions
    }

    pub(crate) fn consumers(&self, atom: usize) -> &[usize] {
        &self.consumers[atom]
    }

    pub fn is_goal(&self, s: &State) -> bool {
        self.goal.iter().all(|&i| s.contains(i)) && !self.goal_neg.iter().any(|&i| s.contains(i))
    }

    pub fn state_atoms(&self, s: &State) -> BTreeSet<GroundAtom> {
        s.ones().map(|i| self.atoms[i].clone()).collect()
    }

    /// Atoms outside the universe are ignored; they can never become true.
    pub fn state_of<'a>(&self, atoms: impl IntoIterator<Item = &'a GroundAtom>) -> State {
        let mut s = State::with_capacity(self.atoms.len());
        for a in atoms {
            if let Some(i) = self.atom_index(a) {
                s.insert(i);
            }
        }
        s
    }
}

struct Candidate {
    step: PlanStep,
    pre_pos: Vec<GroundAtom>,
    pre_neg: Vec<GroundAtom>,
    add: Vec<GroundAtom>,
    del: Vec<GroundAtom>,
}

fn bind_term<'a>(t: &'a Term, binding: &HashMap<&str, &'a str>) -> &'a str {
    match t {
        Term::Var(v) => binding[v.as_str()],
        Term::Object(o) => o,
    }
}

fn bind_atom(a: &Atom, binding: &HashMap<&str, &str>) -> GroundAtom {
    GroundAtom { predicate: a.predicate.clone(), args: a.args.iter().map(|t| bind_term(t, binding).to_string()).collect() }
}

fn instantiate(schema: &ActionSchema, args: &[&str]) -> Option<Candidate> {
    let binding: HashMap<&str, &str> =
        schema.params.iter().map(|p| p.name.as_str()).zip(args.iter().copied()).collect();
    let mut pre_pos = Vec::new();
    let mut pre_neg = Vec::new();
    for c in &schema.precondition {
        match c {
            Condition::Literal { atom, positive: true } => pre_pos.push(bind_atom(atom, &binding)),
            Condition::Literal { atom, positive: false } => pre_neg.push(bind_atom(atom, &binding)),
            Condition::Equality { left, right, positive } => {
                if (bind_term(left, &binding) == bind_term(right, &binding)) != *positive {
                    return None;
                }
            }
        }
    }
    Some(Candidate {
        step: PlanStep::new(schema.name.clone(), args.iter().copied()),
        pre_pos,
        pre_neg,
        add: schema.add.iter().map(|a| bind_atom(a, &binding)).collect(),
        del: schema.del.iter().map(|a| bind_atom(a, &binding)).collect(),
    })
}

/// Calls `f` on every tuple from the cartesian product of `domains`.
fn for_each_tuple<'a>(domains: &[Vec<&'a str>], mut f: impl FnMut(&[&'a str])) {
    if domains.iter().any(Vec::is_empty) {
        return;
    }
    let mut idx = vec![0usize; domains.len()];
    let mut tuple: Vec<&str> = domains.iter().map(|d| d[0]).collect();
    loop {
        f(&tuple);
        let mut k = domains.len();
        loop {
            if k == 0 {
                return;
            }
            k -= 1;
            idx[k] += 1;
            if idx[k] < domains[k].len() {
                tuple[k] = domains[k][idx[k]];
                break;
            }
            idx[k] = 0;
            tuple[k] = domains[k][0];
        }
    }
}

/// Instantiates `d` over the objects of `p`, keeping only actions reachable in
/// the delete relaxation.
///
/// Fails only when a goal atom is not a well-typed atom of the domain.
pub fn ground(d: &Domain, p: &ProblemSpec) -> Result<GroundTask, Diagnostic> {
    let objects: Vec<(&str, &str)> = d
        .constants
        .iter()
        .chain(&p.objects)
        .map(|o| (o.name.as_str(), o.type_name.as_str()))
        .collect();
    let type_of: HashMap<&str, &str> = objects.iter().copied().collect();

    for lit in &p.goal {
        let atom = &lit.atom;
        let fail = |why: String| {
            Err(Diagnostic::new(DiagnosticCode::GroundFail, format!("goal atom {atom} {why}")))
        };
        let Some(sig) = d.predicate(&atom.predicate) else {
            return fail("uses an unknown predicate".into());
        };
        if sig.arity() != atom.args.len() {
            return fail(format!("has {} argument(s), expected {}", atom.args.len(), sig.arity()));
        }
        for (arg, slot) in atom.args.iter().zip(&sig.params) {
            match type_of.get(arg.as_str()) {
                None => return fail(format!("mentions unknown object `{arg}`")),
                Some(t) if !d.types.fits(t, &slot.type_name) => {
                    return fail(format!("is ruled out by types: `{arg}` is `{t}`, slot needs `{}`", slot.type_name))
                }
                _ => {}
            }
        }
    }

    let mut candidates = Vec::new();
    for schema in &d.actions {
        let domains: Vec<Vec<&str>> = schema
            .params
            .iter()
            .map(|param| {
                objects.iter().filter(|(_, t)| d.types.fits(t, &param.type_name)).map(|(n, _)| *n).collect()
            })
            .collect();
        for_each_tuple(&domains, |args| candidates.extend(instantiate(schema, args)));
    }

    let mut reached: HashSet<GroundAtom> = p.init.iter().cloned().collect();
    let mut enabled = vec![false; candidates.len()];
    let mut changed = true;
    while changed {
        changed = false;
        for (c, on) in candidates.iter().zip(enabled.iter_mut()) {
            if !*on && c.pre_pos.iter().all(|a| reached.contains(a)) {
                *on = true;
                changed = true;
                reached.extend(c.add.iter().cloned());
            }
        }
    }

    let mut universe: BTreeSet<GroundAtom> = reached.iter().cloned().collect();
    universe.extend(p.goal.iter().filter(|l| l.positive).map(|l| l.atom.clone()));
    let atoms: Vec<GroundAtom> = universe.into_iter().collect();
    let index: HashMap<GroundAtom, usize> = atoms.iter().cloned().enumerate().map(|(i, a)| (a, i)).collect();
    let ids = |list: &[GroundAtom]| -> Vec<usize> {
        let set: BTreeSet<usize> = list.iter().filter_map(|a| index.get(a).copied()).collect();
        set.into_iter().collect()
    };

    let mut actions: Vec<GroundAction> = candidates
        .into_iter()
        .zip(enabled)
        .filter(|(_, on)| *on)
        .map(|(c, _)| {
            let add = ids(&c.add);
            let del = ids(&c.del).into_iter().filter(|i| !add.contains(i)).collect();
            GroundAction {
                name: c.step.name,
                args: c.step.args,
                pre_pos: ids(&c.pre_pos),
                pre_neg: ids(&c.pre_neg),
                add,
                del,
                cost: 1,
            }
        })
        .collect();
    actions.sort_by_cached_key(|a| a.step().to_string());

    let mut consumers = vec![Vec::new(); atoms.len()];
    for (ai, a) in actions.iter().enumerate() {
        for &i in &a.pre_pos {
            consumers[i].push(ai);
        }
    }

    let mut init = State::with_capacity(atoms.len());
    for a in &p.init {
        init.insert(index[a]);
    }
    let goal = p.goal.iter().filter(|l| l.positive).map(|l| index[&l.atom]).collect::<BTreeSet<_>>();
    let goal_neg = p.goal.iter().filter(|l| !l.positive).filter_map(|l| index.get(&l.atom).copied()).collect::<BTreeSet<_>>();

    Ok(GroundTask {
        atoms,
        index,
        init,
        goal: goal.into_iter().collect(),
        goal_neg: goal_neg.into_iter().collect(),
        actions,
        consumers,
    })
}
