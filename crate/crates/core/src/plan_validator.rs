//! Step-by-step simulation of a plan against a domain and problem.
//!
//! Each step is resolved on its own; nothing is grounded up front.

use std::collections::{BTreeSet, HashMap};

use serde::{Deserialize, Serialize};

use crate::pddl::{Atom, Condition, Domain, GroundAtom, ProblemSpec, Term};
use crate::planner::PlanStep;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum FailureReason {
    UnsatPrecondition,
    /// Unknown action name, or arguments that are unknown or of the wrong type.
    UnknownAction,
    BadArity,
    GoalNotReached,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PlanFailure {
    /// 1-based index of the failing step; `plan.len() + 1` for a missed goal.
    pub step: usize,
    pub reason: FailureReason,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PlanVerdict {
    pub valid: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub failure: Option<PlanFailure>,
    /// State after the last successfully applied step.
    pub final_state: BTreeSet<GroundAtom>,
}

fn term<'a>(t: &'a Term, binding: &HashMap<&str, &'a str>) -> &'a str {
    match t {
        Term::Var(v) => binding[v.as_str()],
        Term::Object(o) => o,
    }
}

fn ground(a: &Atom, binding: &HashMap<&str, &str>) -> GroundAtom {
    GroundAtom::new(a.predicate.clone(), a.args.iter().map(|t| term(t, binding)))
}

/// Simulates `plan` from the initial state under the closed-world assumption.
pub fn validate_plan(d: &Domain, p: &ProblemSpec, plan: &[PlanStep]) -> PlanVerdict {
    let mut state: BTreeSet<GroundAtom> = p.init.clone();
    let type_of: HashMap<&str, &str> = d
        .constants
        .iter()
        .chain(&p.objects)
        .map(|o| (o.name.as_str(), o.type_name.as_str()))
        .collect();
    let fail = |state, step, reason, detail: String| PlanVerdict {
        valid: false,
        failure: Some(PlanFailure { step, reason, detail }),
        final_state: state,
    };

    for (k, step) in plan.iter().enumerate() {
        let n = k + 1;
        let Some(schema) = d.action(&step.name) else {
            return fail(state, n, FailureReason::UnknownAction, format!("no action named `{}`", step.name));
        };
        if schema.params.len() != step.args.len() {
            return fail(
                state,
                n,
                FailureReason::BadArity,
                format!("{step}: `{}` takes {} argument(s)", schema.name, schema.params.len()),
            );
        }
        for (arg, param) in step.args.iter().zip(&schema.params) {
            match type_of.get(arg.as_str()) {
                None => return fail(state, n, FailureReason::UnknownAction, format!("{step}: unknown object `{arg}`")),
                Some(t) if !d.types.fits(t, &param.type_name) => {
                    return fail(
                        state,
                        n,
                        FailureReason::UnknownAction,
                        format!("{step}: `{arg}` is `{t}`, parameter ?{} needs `{}`", param.name, param.type_name),
                    )
                }
                _ => {}
            }
        }
        let binding: HashMap<&str, &str> =
            schema.params.iter().map(|q| q.name.as_str()).zip(step.args.iter().map(String::as_str)).collect();
        for c in &schema.precondition {
            let unmet = match c {
                Condition::Literal { atom, positive } => {
                    let g = ground(atom, &binding);
                    (state.contains(&g) != *positive).then(|| if *positive { g.to_string() } else { format!("(not {g})") })
                }
                Condition::Equality { left, right, positive } => {
                    let (l, r) = (term(left, &binding), term(right, &binding));
                    ((l == r) != *positive).then(|| if *positive { format!("(= {l} {r})") } else { format!("(not (= {l} {r}))") })
                }
            };
            if let Some(lit) = unmet {
                return fail(state, n, FailureReason::UnsatPrecondition, format!("{step}: {lit} does not hold"));
            }
        }
        for a in &schema.del {
            state.remove(&ground(a, &binding));
        }
        for a in &schema.add {
            state.insert(ground(a, &binding));
        }
    }

    if let Some(missed) = p.goal.iter().find(|l| state.contains(&l.atom) != l.positive) {
        return fail(state, plan.len() + 1, FailureReason::GoalNotReached, format!("{missed} does not hold at the end"));
    }
    PlanVerdict { valid: true, failure: None, final_state: state }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus;
    use crate::pddl::{parse_domain, parse_problem};

    fn sussman() -> (Domain, ProblemSpec) {
        let d = parse_domain(corpus::domain("blocksworld").unwrap().source).unwrap();
        let p = parse_problem(corpus::problem("bw-sussman").unwrap().source, &d).unwrap();
        (d, p)
    }

    fn steps(text: &str) -> Vec<PlanStep> {
        crate::planner::parse_plan(text).unwrap()
    }

    const SUSSMAN: &str = "(unstack c a)\n(put-down c)\n(pick-up b)\n(stack b c)\n(pick-up a)\n(stack a b)\n";

    #[test]
    fn sussman_plan_valid() {
        let (d, p) = sussman();
        let v = validate_plan(&d, &p, &steps(SUSSMAN));
        assert!(v.valid, "{v:?}");
        assert!(v.final_state.contains(&GroundAtom::new("on", ["a", "b"])));
        assert!(v.final_state.contains(&GroundAtom::new("on", ["b", "c"])));
    }

    #[test]
    fn swapped_first_steps_fail_at_step_one() {
        let (d, p) = sussman();
        let mut plan = steps(SUSSMAN);
        plan.swap(0, 1);
        let v = validate_plan(&d, &p, &plan);
        let f = v.failure.unwrap();
        assert_eq!((f.step, f.reason), (1, FailureReason::UnsatPrecondition));
        assert!(f.detail.contains("(holding c)"));
        assert_eq!(v.final_state, p.init);
    }

    #[test]
    fn empty_plan() {
        let (d, mut p) = sussman();
        let v = validate_plan(&d, &p, &[]);
        assert_eq!(v.failure.unwrap().reason, FailureReason::GoalNotReached);
        p.goal = p.init.iter().cloned().map(crate::pddl::GroundLiteral::pos).collect();
        assert!(validate_plan(&d, &p, &[]).valid);
    }

    #[test]
    fn garbage_steps() {
        let (d, p) = sussman();
        let reason = |t: &str| validate_plan(&d, &p, &steps(t)).failure.unwrap().reason;
        assert_eq!(reason("(fly a)"), FailureReason::UnknownAction);
        assert_eq!(reason("(unstack c)"), FailureReason::BadArity);
        assert_eq!(reason("(unstack c zz)"), FailureReason::UnknownAction);
        assert_eq!(reason("(unstack c c)"), FailureReason::UnsatPrecondition);
    }
}
