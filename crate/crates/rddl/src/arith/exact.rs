use std::collections::BTreeMap;

use num_rational::BigRational;
use num_traits::{One, Zero};

use crate::syntax::{Formula, Term};

pub type ExactState = BTreeMap<String, BigRational>;

/// `None` on division by zero or an unassigned variable.
pub fn eval_term(t: &Term, env: &ExactState) -> Option<BigRational> {
    Some(match t {
        Term::Var(v) => env.get(v)?.clone(),
        Term::Const(c) => c.clone(),
        Term::Neg(a) => -eval_term(a, env)?,
        Term::Add(a, b) => eval_term(a, env)? + eval_term(b, env)?,
        Term::Sub(a, b) => eval_term(a, env)? - eval_term(b, env)?,
        Term::Mul(a, b) => eval_term(a, env)? * eval_term(b, env)?,
        Term::Div(a, b) => {
            let d = eval_term(b, env)?;
            if d.is_zero() {
                return None;
            }
            eval_term(a, env)? / d
        }
        Term::Pow(a, k) => {
            let base = eval_term(a, env)?;
            let mut acc = BigRational::one();
            for _ in 0..*k {
                acc *= &base;
            }
            acc
        }
    })
}

/// Truth of a modality-free, quantifier-free formula; `None` when undefined.
pub fn holds(f: &Formula, env: &ExactState) -> Option<bool> {
    Some(match f {
        Formula::True => true,
        Formula::False => false,
        Formula::Cmp(a, op, b) => op.holds(&eval_term(a, env)?, &eval_term(b, env)?),
        Formula::Not(g) => !holds(g, env)?,
        Formula::And(parts) => {
            for p in parts {
                if !holds(p, env)? {
                    return Some(false);
                }
            }
            true
        }
        Formula::Forall(..) | Formula::Box(..) | Formula::Diamond(..) => return None,
    })
}
