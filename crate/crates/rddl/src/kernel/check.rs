use std::collections::{BTreeMap, BTreeSet};
use std::time::Instant;

use rayon::prelude::*;

use super::certificate::{Certificate, Status};
use super::rules::apply;
use super::{KernelConfig, KernelError, ProofNode, Sequent};
use crate::algebra::to_rf;
use crate::arith::ObligationLedger;
use crate::syntax::{Formula, Term};

/// Where and why a proof was rejected.
#[derive(Clone, Debug, PartialEq, thiserror::Error)]
#[error("at {path} ({rule}): {error}")]
pub struct CheckError {
    /// `/` for the root, `/i/j` for child `j` of child `i`.
    pub path: String,
    pub rule: String,
    pub error: KernelError,
}

#[derive(Default)]
struct Partial {
    rules: BTreeMap<String, usize>,
    obligations: Vec<(Vec<Formula>, Formula)>,
    side_conditions: BTreeSet<String>,
    experimental: BTreeSet<String>,
}

impl Partial {
    fn absorb(&mut self, other: Partial) {
        for (k, v) in other.rules {
            *self.rules.entry(k).or_default() += v;
        }
        self.obligations.extend(other.obligations);
        self.side_conditions.extend(other.side_conditions);
        self.experimental.extend(other.experimental);
    }
}

fn canonical_term(t: &Term) -> Term {
    to_rf(t).map(|r| r.to_term()).unwrap_or_else(|_| t.clone())
}

fn canonical(f: &Formula) -> Formula {
    let f = f.map_terms(&canonical_term);
    match &f {
        Formula::Cmp(l, op, r) => {
            Formula::Cmp(canonical_term(&Term::sub(l.clone(), r.clone())), *op, Term::zero())
        }
        _ => f,
    }
}

/// Equality up to rebuilding through smart constructors and term normal forms.
pub fn same_formula(a: &Formula, b: &Formula) -> bool {
    a == b || a.normalized() == b.normalized() || canonical(a) == canonical(b)
}

fn child_path(path: &str, i: usize) -> String {
    if path == "/" {
        format!("/{i}")
    } else {
        format!("{path}/{i}")
    }
}

fn walk(s: &Sequent, node: &ProofNode, path: &str, cfg: &KernelConfig) -> Result<Partial, CheckError> {
    let fail = |error: KernelError| CheckError { path: path.to_string(), rule: node.app.rule.name().into(), error };
    if let Some(expected) = node.app.formula("expect").map_err(fail)? {
        if !same_formula(expected, &s.goal) {
            return Err(fail(KernelError::ExpectationMismatch {
                expected: expected.to_string(),
                actual: s.goal.to_string(),
            }));
        }
    }
    for key in node.app.params.keys() {
        if node.app.rule.param_kind(key).is_none() {
            return Err(fail(KernelError::BadParam(format!("{} takes no parameter {key}", node.app.rule))));
        }
    }
    let applied = apply(&node.app, s, cfg).map_err(fail)?;
    if applied.premises.len() != node.children.len() {
        return Err(fail(KernelError::ArityMismatch {
            expected: applied.premises.len(),
            found: node.children.len(),
        }));
    }
    let mut out = Partial::default();
    out.rules.insert(node.app.rule.name().to_string(), 1);
    out.obligations = applied.obligations;
    out.side_conditions.extend(applied.side_conditions);
    out.experimental.extend(applied.experimental);
    let results: Vec<Result<Partial, CheckError>> = applied
        .premises
        .par_iter()
        .zip(node.children.par_iter())
        .enumerate()
        .map(|(i, (p, c))| walk(p, c, &child_path(path, i), cfg))
        .collect();
    for r in results {
        out.absorb(r?);
    }
    Ok(out)
}

/// Checks `proof` against `goal`. Children are checked in parallel; the first
/// failure in depth-first order is reported.
pub fn check_proof(goal: &Sequent, proof: &ProofNode, cfg: &KernelConfig) -> Result<Certificate, CheckError> {
    let start = Instant::now();
    let partial = walk(goal, proof, "/", cfg)?;
    let mut ledger = ObligationLedger::new();
    for (h, g) in &partial.obligations {
        ledger.record(h, g);
    }
    let obligations: Vec<_> = ledger.iter().cloned().collect();
    Ok(Certificate {
        root: goal.to_string(),
        status: if obligations.is_empty() { Status::Unconditional } else { Status::Conditional },
        rules: partial.rules,
        obligations,
        side_conditions: partial.side_conditions,
        experimental: partial.experimental,
        wall_ms: start.elapsed().as_millis(),
    })
}
