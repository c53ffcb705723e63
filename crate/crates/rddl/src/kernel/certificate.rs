use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write;

use crate::arith::Obligation;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Status {
    /// Every leaf closed by the arithmetic prover.
    Unconditional,
    /// Valid assuming the listed obligations.
    Conditional,
}

impl Status {
    pub fn name(self) -> &'static str {
        match self {
            Status::Unconditional => "unconditional",
            Status::Conditional => "conditional",
        }
    }
}

/// Outcome of a successful check.
#[derive(Clone, Debug, PartialEq)]
pub struct Certificate {
    pub root: String,
    pub status: Status,
    pub rules: BTreeMap<String, usize>,
    pub obligations: Vec<Obligation>,
    pub side_conditions: BTreeSet<String>,
    pub experimental: BTreeSet<String>,
    pub wall_ms: u128,
}

impl Certificate {
    pub fn rule_count(&self, name: &str) -> usize {
        self.rules.get(name).copied().unwrap_or(0)
    }

    /// Everything except the wall-clock time; identical for identical inputs.
    pub fn render_stable(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "status: {}", self.status.name());
        let rules: Vec<String> = self.rules.iter().map(|(k, v)| format!("{k}={v}")).collect();
        let _ = writeln!(out, "rules: {}", rules.join(" "));
        let _ = writeln!(out, "obligations: {}", self.obligations.len());
        for o in &self.obligations {
            let _ = writeln!(out, "  [{}] {}", o.id, o.text);
        }
        let _ = writeln!(out, "side_conditions: {}", self.side_conditions.len());
        for s in &self.side_conditions {
            let _ = writeln!(out, "  {s}");
        }
        if !self.experimental.is_empty() {
            let e: Vec<&str> = self.experimental.iter().map(String::as_str).collect();
            let _ = writeln!(out, "experimental: {}", e.join(", "));
        }
        out
    }

    pub fn render(&self) -> String {
        format!("{}wall_ms: {}\n", self.render_stable(), self.wall_ms)
    }
}
