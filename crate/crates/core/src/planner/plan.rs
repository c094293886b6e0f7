use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// A printable ground action, `(name arg1 arg2)`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct PlanStep {
    pub name: String,
    pub args: Vec<String>,
}

impl PlanStep {
    pub fn new<S: Into<String>>(name: impl Into<String>, args: impl IntoIterator<Item = S>) -> Self {
        PlanStep { name: name.into(), args: args.into_iter().map(Into::into).collect() }
    }
}

impl fmt::Display for PlanStep {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}", self.name)?;
        for a in &self.args {
            write!(f, " {a}")?;
        }
        write!(f, ")")
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("plan line {line}: {message}")]
pub struct PlanParseError {
    pub line: usize,
    pub message: String,
}

impl FromStr for PlanStep {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let inner = s
            .trim()
            .strip_prefix('(')
            .and_then(|r| r.strip_suffix(')'))
            .ok_or_else(|| format!("expected `(action args...)`, found `{}`", s.trim()))?;
        let mut words = inner.split_whitespace().map(str::to_ascii_lowercase);
        let name = words.next().ok_or("empty action")?;
        let args: Vec<String> = words.collect();
        if name.contains(['(', ')']) || args.iter().any(|a| a.contains(['(', ')'])) {
            return Err(format!("nested parentheses in `{}`", s.trim()));
        }
        Ok(PlanStep { name, args })
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Plan {
    pub steps: Vec<PlanStep>,
    pub cost: u64,
}

impl Plan {
    /// Unit-cost plan.
    pub fn unit(steps: Vec<PlanStep>) -> Self {
        let cost = steps.len() as u64;
        Plan { steps, cost }
    }

    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }
}

/// Reads one action per line; blank lines and `;` comments are skipped.
pub fn parse_plan(text: &str) -> Result<Vec<PlanStep>, PlanParseError> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| {
            let t = l.trim();
            !t.is_empty() && !t.starts_with(';')
        })
        .map(|(i, l)| l.parse().map_err(|message| PlanParseError { line: i + 1, message }))
        .collect()
}

/// Inverse of [`parse_plan`], with a trailing cost comment.
pub fn format_plan(plan: &Plan) -> String {
    let mut out = String::new();
    for s in &plan.steps {
        out.push_str(&s.to_string());
        out.push('\n');
    }
    out.push_str(&format!("; cost = {} (unit cost)\n", plan.cost));
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip() {
        let plan = Plan::unit(vec![PlanStep::new("unstack", ["c", "a"]), PlanStep::new("handempty-noop", Vec::<String>::new())]);
        let text = format_plan(&plan);
        assert_eq!(text, "(unstack c a)\n(handempty-noop)\n; cost = 2 (unit cost)\n");
        assert_eq!(parse_plan(&text).unwrap(), plan.steps);
    }

    #[test]
    fn solver_output_is_lowercased() {
        let steps = parse_plan("(PICK-UP B)\n\n  (stack  b   c)  \n; cost = 2 (unit cost)\n").unwrap();
        assert_eq!(steps, vec![PlanStep::new("pick-up", ["b"]), PlanStep::new("stack", ["b", "c"])]);
    }

    #[test]
    fn malformed_lines() {
        assert_eq!(parse_plan("(a)\nb c\n").unwrap_err().line, 2);
        assert!(parse_plan("()").is_err());
        assert!(parse_plan("(a (b))").is_err());
    }
}
