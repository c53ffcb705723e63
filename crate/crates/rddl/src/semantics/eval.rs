use std::collections::BTreeMap;

use num_traits::ToPrimitive;

use super::{SemanticsError, State};
use crate::syntax::{CmpOp, Formula, Term};

/// Denominators smaller than this in magnitude count as poles.
pub const POLE_TOLERANCE: f64 = 1e-12;

#[derive(Clone, Copy, Debug)]
pub struct Pole;

/// Where a variable's value comes from when a term is compiled.
#[derive(Clone, Copy, Debug)]
pub enum Slot {
    Index(usize),
    Value(f64),
}

/// Term compiled against a slot assignment, for fast repeated evaluation.
#[derive(Clone, Debug)]
pub enum Expr {
    Var(usize),
    Const(f64),
    Neg(Box<Expr>),
    Add(Box<Expr>, Box<Expr>),
    Sub(Box<Expr>, Box<Expr>),
    Mul(Box<Expr>, Box<Expr>),
    Div(Box<Expr>, Box<Expr>),
    Pow(Box<Expr>, i32),
}

impl Expr {
    pub fn compile(t: &Term, slot: &dyn Fn(&str) -> Option<Slot>) -> Result<Expr, SemanticsError> {
        let rec = |a: &Term| Expr::compile(a, slot).map(Box::new);
        Ok(match t {
            Term::Var(v) => match slot(v) {
                Some(Slot::Index(i)) => Expr::Var(i),
                Some(Slot::Value(x)) => Expr::Const(x),
                None => return Err(SemanticsError::MissingVariable(v.clone())),
            },
            Term::Const(c) => Expr::Const(c.to_f64().unwrap_or(f64::NAN)),
            Term::Neg(a) => Expr::Neg(rec(a)?),
            Term::Add(a, b) => Expr::Add(rec(a)?, rec(b)?),
            Term::Sub(a, b) => Expr::Sub(rec(a)?, rec(b)?),
            Term::Mul(a, b) => Expr::Mul(rec(a)?, rec(b)?),
            Term::Div(a, b) => Expr::Div(rec(a)?, rec(b)?),
            Term::Pow(a, n) => Expr::Pow(rec(a)?, *n as i32),
        })
    }

    /// Compiles against positions in `vars`.
    pub fn indexed(t: &Term, vars: &[String]) -> Result<Expr, SemanticsError> {
        Expr::compile(t, &|v| vars.iter().position(|n| n == v).map(Slot::Index))
    }

    pub fn eval(&self, x: &[f64]) -> Result<f64, Pole> {
        Ok(match self {
            Expr::Var(i) => x[*i],
            Expr::Const(c) => *c,
            Expr::Neg(a) => -a.eval(x)?,
            Expr::Add(a, b) => a.eval(x)? + b.eval(x)?,
            Expr::Sub(a, b) => a.eval(x)? - b.eval(x)?,
            Expr::Mul(a, b) => a.eval(x)? * b.eval(x)?,
            Expr::Div(a, b) => {
                let d = b.eval(x)?;
                if d.abs() < POLE_TOLERANCE || !d.is_finite() {
                    return Err(Pole);
                }
                a.eval(x)? / d
            }
            Expr::Pow(a, n) => a.eval(x)?.powi(*n),
        })
    }
}

/// Scale-free signed distance of `p` from `q`.
pub fn margin(p: f64, q: f64) -> f64 {
    (p - q) / (1.0 + p.abs() + q.abs())
}

pub fn cmp_robustness(op: CmpOp, p: f64, q: f64) -> f64 {
    let m = margin(p, q);
    match op {
        CmpOp::Gt | CmpOp::Ge => m,
        CmpOp::Lt | CmpOp::Le => -m,
        CmpOp::Eq => -m.abs(),
    }
}

/// First-order formula compiled for robustness evaluation: positive when it holds with
/// room to spare, negative when violated, and continuous in the state.
#[derive(Clone, Debug)]
pub enum Pred {
    Const(f64),
    Cmp(Expr, CmpOp, Expr),
    Not(Box<Pred>),
    And(Vec<Pred>),
}

impl Pred {
    pub fn compile(f: &Formula, slot: &dyn Fn(&str) -> Option<Slot>) -> Result<Pred, SemanticsError> {
        Ok(match f {
            Formula::True => Pred::Const(f64::INFINITY),
            Formula::False => Pred::Const(f64::NEG_INFINITY),
            Formula::Cmp(a, op, b) => Pred::Cmp(Expr::compile(a, slot)?, *op, Expr::compile(b, slot)?),
            Formula::Not(g) => Pred::Not(Box::new(Pred::compile(g, slot)?)),
            Formula::And(parts) => {
                Pred::And(parts.iter().map(|p| Pred::compile(p, slot)).collect::<Result<_, _>>()?)
            }
            other => return Err(SemanticsError::NotFirstOrder(other.to_string())),
        })
    }

    pub fn indexed(f: &Formula, vars: &[String]) -> Result<Pred, SemanticsError> {
        Pred::compile(f, &|v| vars.iter().position(|n| n == v).map(Slot::Index))
    }

    pub fn robustness(&self, x: &[f64]) -> Result<f64, Pole> {
        Ok(match self {
            Pred::Const(c) => *c,
            Pred::Cmp(a, op, b) => cmp_robustness(*op, a.eval(x)?, b.eval(x)?),
            Pred::Not(p) => -p.robustness(x)?,
            Pred::And(parts) => {
                let mut m = f64::INFINITY;
                for p in parts {
                    m = m.min(p.robustness(x)?);
                }
                m
            }
        })
    }
}

/// Robustness of a first-order formula at a named state.
pub fn robustness(f: &Formula, state: &State) -> Result<f64, SemanticsError> {
    let (names, values) = flatten(state);
    let p = Pred::indexed(f, &names)?;
    p.robustness(&values).map_err(|_| SemanticsError::PoleEncountered { time: 0.0 })
}

pub fn eval_term(t: &Term, state: &State) -> Result<f64, SemanticsError> {
    let (names, values) = flatten(state);
    Expr::indexed(t, &names)?
        .eval(&values)
        .map_err(|_| SemanticsError::PoleEncountered { time: 0.0 })
}

/// Whether `f` holds at `state` up to `slack` in robustness.
pub fn holds(f: &Formula, state: &State, slack: f64) -> Result<bool, SemanticsError> {
    Ok(robustness(f, state)? >= -slack)
}

pub fn flatten(state: &State) -> (Vec<String>, Vec<f64>) {
    state.iter().map(|(k, v)| (k.clone(), *v)).unzip()
}

pub fn state_of(pairs: &[(&str, f64)]) -> State {
    pairs.iter().map(|(k, v)| (k.to_string(), *v)).collect::<BTreeMap<_, _>>()
}
