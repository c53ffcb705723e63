use std::collections::BTreeMap;

use num_traits::ToPrimitive;

use super::script::{decimal, ScriptError};
use crate::arith::{eval_term_exact, ExactState};
use crate::semantics::State;
use crate::syntax::{CmpOp, Dynamics, Formula, Parser, RddFormula, Term, Tok};

/// A simulation model: one dynamics with an optional exit, or an RDD formula.
#[derive(Clone, Debug, PartialEq)]
pub enum ModelBody {
    Single { dynamics: Dynamics, exit: Option<Formula> },
    Pair(RddFormula),
}

#[derive(Clone, Debug, PartialEq)]
pub struct Model {
    /// Conjunction of the `assume` lines; `True` when there are none.
    pub assumptions: Formula,
    pub body: ModelBody,
}

/// `('param' IDENT ('=' DECIMAL)?)* ('assume' formula (';' formula)* ';'?)? (rdd | dynamics ('exit' formula)?)`
pub fn parse_model(text: &str) -> Result<Model, ScriptError> {
    let mut p = Parser::new(text)?;
    let mut bindings: Vec<(String, Term)> = Vec::new();
    while p.eat_keyword("param") {
        let name = p.ident()?;
        if p.eat(&Tok::Eq) {
            bindings.push((name, Term::from_rational(decimal(&mut p)?)));
        }
    }
    let mut assumptions = Vec::new();
    if p.eat_keyword("assume") {
        assumptions.push(p.formula()?);
        while p.eat(&Tok::Semi) {
            if p.is_keyword("rdd") || p.peek() == Some(&Tok::LBrace) {
                break;
            }
            assumptions.push(p.formula()?);
        }
    }
    let body = if p.is_keyword("rdd") {
        ModelBody::Pair(p.rdd()?)
    } else {
        let dynamics = p.dynamics()?;
        let exit = if p.eat_keyword("exit") { Some(p.formula()?) } else { None };
        ModelBody::Single { dynamics, exit }
    };
    p.finish()?;
    let mut model = Model { assumptions: Formula::and(assumptions), body };
    for (name, t) in &bindings {
        model = model.substitute(name, t);
    }
    Ok(model)
}

impl Model {
    fn substitute(&self, name: &str, t: &Term) -> Model {
        let body = match &self.body {
            ModelBody::Single { dynamics, exit } => ModelBody::Single {
                dynamics: substitute_dynamics(dynamics, name, t),
                exit: exit.as_ref().map(|e| e.substitute(name, t)),
            },
            ModelBody::Pair(a) => ModelBody::Pair(
                RddFormula::new(
                    substitute_dynamics(a.left(), name, t),
                    substitute_dynamics(a.right(), name, t),
                    a.exit().substitute(name, t),
                    a.post().substitute(name, t),
                )
                .expect("substituting a constant keeps the sides disjoint"),
            ),
        };
        Model { assumptions: self.assumptions.substitute(name, t), body }
    }

    /// Values forced by equalities in the assumptions, e.g. `0 = x = x#`.
    pub fn initial_state(&self) -> State {
        let mut known = ExactState::new();
        let conj = self.assumptions.conjuncts();
        loop {
            let before = known.len();
            for c in &conj {
                let Formula::Cmp(l, CmpOp::Eq, r) = c else { continue };
                for (var, other) in [(l, r), (r, l)] {
                    if let Term::Var(v) = var {
                        if known.contains_key(v) {
                            continue;
                        }
                        if let Some(value) = eval_term_exact(other, &known) {
                            known.insert(v.clone(), value);
                        }
                    }
                }
            }
            if known.len() == before {
                break;
            }
        }
        known.into_iter().filter_map(|(k, v)| Some((k, v.to_f64()?))).collect::<BTreeMap<_, _>>()
    }
}

fn substitute_dynamics(d: &Dynamics, name: &str, t: &Term) -> Dynamics {
    Dynamics::new(
        d.odes.iter().map(|(v, rhs)| (v.clone(), rhs.substitute(name, t))).collect(),
        d.constraint.substitute(name, t),
    )
}
