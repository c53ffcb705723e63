//! Backward proof checking: every rule maps a sequent to the premises that must be
//! proved instead, and `check_proof` recurses through a tree of rule applications.

mod certificate;
mod check;
mod rules;

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use crate::algebra::AlgebraError;
use crate::semantics::{Numerics, SampleBox};
use crate::syntax::{Formula, Term};

pub use certificate::{Certificate, Status};
pub use check::{check_proof, same_formula, CheckError};
pub use rules::*;

/// `Γ ⊢ φ`; the context is modality-free.
#[derive(Clone, Debug, PartialEq)]
pub struct Sequent {
    pub context: Vec<Formula>,
    pub goal: Formula,
}

impl Sequent {
    pub fn new(context: Vec<Formula>, goal: Formula) -> Sequent {
        Sequent { context, goal }
    }

    /// Context flattened into its conjuncts.
    pub fn hypotheses(&self) -> Vec<Formula> {
        self.context.iter().flat_map(|c| c.conjuncts()).collect()
    }

    /// Same goal under the extra hypotheses.
    pub fn assuming(&self, extra: &Formula) -> Sequent {
        let mut context = self.context.clone();
        context.extend(extra.conjuncts());
        Sequent { context, goal: self.goal.clone() }
    }

    pub fn with_goal(&self, goal: Formula) -> Sequent {
        Sequent { context: self.context.clone(), goal }
    }
}

impl fmt::Display for Sequent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let hs: Vec<String> = self.hypotheses().iter().map(|h| h.to_string()).collect();
        write!(f, "{} |- {}", hs.join(", "), self.goal)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Rule {
    Di,
    Dc,
    Dw,
    Dii,
    Sim,
    Ts,
    Mcs,
    Rdc,
    Ecp,
    SccBox,
    SccDia,
    MidBox,
    MidDia,
    Dcc,
    DbxGt,
    Split,
    Compose,
    Test,
    Weaken,
    Arith,
}

impl Rule {
    pub const ALL: [Rule; 20] = [
        Rule::Di,
        Rule::Dc,
        Rule::Dw,
        Rule::Dii,
        Rule::Sim,
        Rule::Ts,
        Rule::Mcs,
        Rule::Rdc,
        Rule::Ecp,
        Rule::SccBox,
        Rule::SccDia,
        Rule::MidBox,
        Rule::MidDia,
        Rule::Dcc,
        Rule::DbxGt,
        Rule::Split,
        Rule::Compose,
        Rule::Test,
        Rule::Weaken,
        Rule::Arith,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Rule::Di => "DI",
            Rule::Dc => "DC",
            Rule::Dw => "DW",
            Rule::Dii => "DII",
            Rule::Sim => "SIM",
            Rule::Ts => "TS",
            Rule::Mcs => "MCS",
            Rule::Rdc => "RDC",
            Rule::Ecp => "ECP",
            Rule::SccBox => "SCC-BOX",
            Rule::SccDia => "SCC-DIA",
            Rule::MidBox => "MID-BOX",
            Rule::MidDia => "MID-DIA",
            Rule::Dcc => "DCC",
            Rule::DbxGt => "DBX-GT",
            Rule::Split => "SPLIT",
            Rule::Compose => "COMPOSE",
            Rule::Test => "TEST",
            Rule::Weaken => "WEAKEN",
            Rule::Arith => "ARITH",
        }
    }

    /// Number of premises when it is fixed by the rule alone.
    pub fn arity(self) -> Option<usize> {
        Some(match self {
            Rule::Arith => 0,
            Rule::Dw | Rule::SccBox | Rule::SccDia | Rule::MidBox | Rule::MidDia | Rule::Compose | Rule::Test => 1,
            Rule::Di | Rule::Dc | Rule::Dii | Rule::Rdc | Rule::Dcc | Rule::Weaken => 2,
            Rule::Sim | Rule::Ts => 3,
            Rule::Ecp => 4,
            Rule::Mcs => 5,
            Rule::DbxGt | Rule::Split => return None,
        })
    }

    /// Expected kind of each parameter key the rule accepts.
    pub fn param_kind(self, key: &str) -> Option<ParamKind> {
        use ParamKind::*;
        if key == "expect" {
            return Some(Formula);
        }
        Some(match (self, key) {
            (Rule::Dc, "cut") | (Rule::Rdc, "cut") => Formula,
            (Rule::Dii, "n") => Int,
            (Rule::Sim, "R") => Formula,
            (Rule::Ts, "dir") => Ident,
            (Rule::Ts, "via") => Formula,
            (Rule::Mcs, "g") | (Rule::Mcs, "h") => Ident,
            (Rule::SccBox | Rule::SccDia | Rule::MidBox | Rule::MidDia, "at") => Int,
            (Rule::Dcc, "cond") => Formula,
            (Rule::DbxGt, "cofactor") => Term,
            (Rule::Compose, "at") => Int,
            (Rule::Compose, "dir") => Ident,
            (Rule::Weaken, "post") | (Rule::Weaken, "ctx") => Formula,
            _ => return None,
        })
    }
}

impl fmt::Display for Rule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Rule {
    type Err = String;

    fn from_str(s: &str) -> Result<Rule, String> {
        Rule::ALL.iter().copied().find(|r| r.name() == s).ok_or_else(|| s.to_string())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ParamKind {
    Formula,
    Term,
    Int,
    Ident,
}

#[derive(Clone, Debug, PartialEq)]
pub enum Param {
    Formula(Formula),
    Term(Term),
    Int(u32),
    Ident(String),
}

impl fmt::Display for Param {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Param::Formula(x) => write!(f, "{x}"),
            Param::Term(x) => write!(f, "{x}"),
            Param::Int(x) => write!(f, "{x}"),
            Param::Ident(x) => f.write_str(x),
        }
    }
}

/// A rule with its parameters.
#[derive(Clone, Debug, PartialEq)]
pub struct RuleApp {
    pub rule: Rule,
    pub params: BTreeMap<String, Param>,
}

impl RuleApp {
    pub fn new(rule: Rule) -> RuleApp {
        RuleApp { rule, params: BTreeMap::new() }
    }

    pub fn with(mut self, key: &str, value: Param) -> RuleApp {
        self.params.insert(key.to_string(), value);
        self
    }

    pub fn formula(&self, key: &str) -> Result<Option<&Formula>, KernelError> {
        match self.params.get(key) {
            None => Ok(None),
            Some(Param::Formula(f)) => Ok(Some(f)),
            Some(p) => Err(KernelError::BadParam(format!("{key}={p} is not a formula"))),
        }
    }

    pub fn term(&self, key: &str) -> Result<Option<&Term>, KernelError> {
        match self.params.get(key) {
            None => Ok(None),
            Some(Param::Term(t)) => Ok(Some(t)),
            Some(p) => Err(KernelError::BadParam(format!("{key}={p} is not a term"))),
        }
    }

    pub fn int(&self, key: &str) -> Result<Option<u32>, KernelError> {
        match self.params.get(key) {
            None => Ok(None),
            Some(Param::Int(n)) => Ok(Some(*n)),
            Some(p) => Err(KernelError::BadParam(format!("{key}={p} is not an integer"))),
        }
    }

    pub fn ident(&self, key: &str) -> Result<Option<&str>, KernelError> {
        match self.params.get(key) {
            None => Ok(None),
            Some(Param::Ident(s)) => Ok(Some(s)),
            Some(p) => Err(KernelError::BadParam(format!("{key}={p} is not an identifier"))),
        }
    }

    pub fn required_formula(&self, key: &str) -> Result<&Formula, KernelError> {
        self.formula(key)?.ok_or_else(|| KernelError::BadParam(format!("{} needs {key}=", self.rule)))
    }
}

impl fmt::Display for RuleApp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.rule.name())?;
        for (k, v) in &self.params {
            write!(f, " {k}={v}")?;
        }
        Ok(())
    }
}

/// A rule application whose children prove its premises, in order.
#[derive(Clone, Debug, PartialEq)]
pub struct ProofNode {
    pub app: RuleApp,
    pub children: Vec<ProofNode>,
}

impl ProofNode {
    pub fn leaf(app: RuleApp) -> ProofNode {
        ProofNode { app, children: Vec::new() }
    }

    pub fn new(app: RuleApp, children: Vec<ProofNode>) -> ProofNode {
        ProofNode { app, children }
    }

    pub fn size(&self) -> usize {
        1 + self.children.iter().map(ProofNode::size).sum::<usize>()
    }
}

#[derive(Clone, Debug, PartialEq, thiserror::Error)]
pub enum KernelError {
    #[error("rule does not match: {0}")]
    RuleMismatch(String),
    #[error("side condition failed: {0}")]
    SideConditionFailed(String),
    #[error("exit condition is not an equation between the two sides: {0}")]
    ExitShape(String),
    #[error("degenerate exit: Lie derivative of {0} is identically zero")]
    DegenerateExit(String),
    #[error("cofactor is not a polynomial: {0}")]
    NonPolynomialCofactor(String),
    #[error("arithmetic refuted: {sequent}\n  witness: {witness}")]
    ProofRefuted { sequent: String, witness: String },
    #[error("simulation premise fails numerically: {0}")]
    SimulationRefuted(String),
    #[error("expected {expected} premise proofs, found {found}")]
    ArityMismatch { expected: usize, found: usize },
    #[error("bad parameter: {0}")]
    BadParam(String),
    #[error("premise mismatch:\n  expected: {expected}\n  actual:   {actual}")]
    ExpectationMismatch { expected: String, actual: String },
    #[error(transparent)]
    Algebra(AlgebraError),
}

impl From<AlgebraError> for KernelError {
    fn from(e: AlgebraError) -> KernelError {
        match e {
            AlgebraError::ExitShape(s) => KernelError::ExitShape(s),
            AlgebraError::DegenerateExit(s) => KernelError::DegenerateExit(s),
            other => KernelError::Algebra(other),
        }
    }
}

/// Numeric settings for rules that are validated by simulation.
#[derive(Clone, Debug, PartialEq)]
pub struct KernelConfig {
    pub numerics: Numerics,
    pub sample_box: SampleBox,
    pub simulation_grid: usize,
}

impl Default for KernelConfig {
    fn default() -> Self {
        KernelConfig { numerics: Numerics::default(), sample_box: SampleBox::default(), simulation_grid: 20 }
    }
}
