use std::fmt::Write;

use super::model::{ProblemSpec, ROOT_TYPE};

/// Renders a problem as PDDL text.
///
/// Objects keep declaration order; init and goal atoms are sorted. Objects of
/// the root type are written bare only when every object has it, since a bare
/// name before a typed one would take that type. An empty goal renders as
/// `(:goal (and))`.
pub fn render_problem(p: &ProblemSpec) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "(define (problem {})", p.name);
    let _ = writeln!(out, "  (:domain {})", p.domain_name);

    out.push_str("  (:objects\n");
    let untyped = p.objects.iter().all(|o| o.type_name == ROOT_TYPE);
    for obj in &p.objects {
        if untyped {
            let _ = writeln!(out, "    {}", obj.name);
        } else {
            let _ = writeln!(out, "    {} - {}", obj.name, obj.type_name);
        }
    }
    out.push_str("  )\n");

    out.push_str("  (:init\n");
    for atom in &p.init {
        let _ = writeln!(out, "    {atom}");
    }
    out.push_str("  )\n");

    if p.goal.is_empty() {
        out.push_str("  (:goal (and))\n");
    } else {
        out.push_str("  (:goal\n    (and\n");
        for lit in &p.goal {
            let _ = writeln!(out, "      {lit}");
        }
        out.push_str("    )\n  )\n");
    }
    out.push_str(")\n");
    out
}
