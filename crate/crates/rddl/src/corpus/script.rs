use std::collections::BTreeSet;

use num_rational::BigRational;

use crate::kernel::{Param, ParamKind, ProofNode, Rule, RuleApp, Sequent};
use crate::syntax::{parse_decimal, Formula, ParseError, Parser, Program, Term, Tok};

#[derive(Clone, Debug, PartialEq, thiserror::Error)]
pub enum ScriptError {
    #[error(transparent)]
    Syntax(#[from] ParseError),
    #[error("unknown rule {name} at byte {position}")]
    UnknownRule { name: String, position: usize },
    #[error("{rule} takes no parameter {key} (byte {position})")]
    UnknownParam { rule: String, key: String, position: usize },
    #[error("{rule} at byte {position} needs {expected} premise proofs, found {found}")]
    ArityMismatch { rule: String, position: usize, expected: usize, found: usize },
    #[error("unresolved identifiers: {}", .0.join(", "))]
    Unresolved(Vec<String>),
    #[error("parameter {0} declared twice")]
    DuplicateParam(String),
}

/// A parsed proof script with declared parameters substituted.
#[derive(Clone, Debug, PartialEq)]
pub struct Script {
    /// Declared parameters; a bound value has already replaced the name everywhere.
    pub params: Vec<(String, Option<BigRational>)>,
    pub sequent: Sequent,
    pub proof: ProofNode,
}

pub fn parse_script(text: &str) -> Result<Script, ScriptError> {
    let mut p = Parser::new(text)?;
    let mut params: Vec<(String, Option<BigRational>)> = Vec::new();
    while p.eat_keyword("param") {
        let name = p.ident()?;
        let value = if p.eat(&Tok::Eq) { Some(decimal(&mut p)?) } else { None };
        if params.iter().any(|(n, _)| *n == name) {
            return Err(ScriptError::DuplicateParam(name));
        }
        params.push((name, value));
    }
    p.expect_keyword("sequent")?;
    p.expect(&Tok::LBrace)?;
    p.expect_keyword("assume")?;
    let mut context = vec![p.formula()?];
    while p.eat(&Tok::Semi) {
        if p.is_keyword("goal") {
            break;
        }
        context.push(p.formula()?);
    }
    p.expect_keyword("goal")?;
    let goal = p.formula()?;
    p.expect(&Tok::RBrace)?;
    let proof = proof(&mut p)?;
    p.finish()?;

    let mut sequent = Sequent::new(context.iter().flat_map(Formula::conjuncts).collect(), goal);
    let mut proof = proof;
    for (name, value) in &params {
        if let Some(q) = value {
            let t = Term::from_rational(q.clone());
            sequent = Sequent::new(
                sequent.context.iter().map(|c| c.substitute(name, &t)).collect(),
                sequent.goal.substitute(name, &t),
            );
            substitute_proof(&mut proof, name, &t);
        }
    }
    check_resolved(&params, &sequent, &proof)?;
    Ok(Script { params, sequent, proof })
}

pub(super) fn decimal(p: &mut Parser) -> Result<BigRational, ScriptError> {
    let neg = p.eat(&Tok::Minus);
    match p.peek().cloned() {
        Some(Tok::Decimal(d)) => {
            p.bump();
            let q = parse_decimal(&d).expect("lexer produces valid decimals");
            Ok(if neg { -q } else { q })
        }
        _ => Err(p.error(&["decimal"]).into()),
    }
}

/// Rule names may contain one hyphen, which the lexer splits.
fn rule_name(p: &mut Parser) -> Result<(String, usize), ScriptError> {
    let position = p.offset();
    let Some(Tok::Ident(head)) = p.peek().cloned() else {
        return Err(p.error(&["rule name"]).into());
    };
    p.bump();
    let mut name = head;
    if p.peek() == Some(&Tok::Minus) {
        if let Some(Tok::Ident(tail)) = p.peek_at(1).cloned() {
            p.bump();
            p.bump();
            name = format!("{name}-{tail}");
        }
    }
    Ok((name, position))
}

fn proof(p: &mut Parser) -> Result<ProofNode, ScriptError> {
    p.expect(&Tok::LParen)?;
    let (name, position) = rule_name(p)?;
    let rule: Rule = name.parse().map_err(|_| ScriptError::UnknownRule { name: name.clone(), position })?;
    let mut app = RuleApp::new(rule);
    while let (Some(Tok::Ident(key)), Some(Tok::Eq)) = (p.peek().cloned(), p.peek_at(1)) {
        let at = p.offset();
        p.bump();
        p.bump();
        let kind = rule.param_kind(&key).ok_or_else(|| ScriptError::UnknownParam {
            rule: name.clone(),
            key: key.clone(),
            position: at,
        })?;
        let value = match kind {
            ParamKind::Formula => Param::Formula(p.formula()?),
            ParamKind::Term => Param::Term(p.term()?),
            ParamKind::Ident => Param::Ident(p.ident()?),
            ParamKind::Int => match p.peek().cloned() {
                Some(Tok::Decimal(d)) if !d.contains('.') => {
                    p.bump();
                    Param::Int(d.parse().map_err(|_| p.error(&["small integer"]))?)
                }
                _ => return Err(p.error(&["integer"]).into()),
            },
        };
        app = app.with(&key, value);
    }
    let mut children = Vec::new();
    while p.peek() == Some(&Tok::LParen) {
        children.push(proof(p)?);
    }
    p.expect(&Tok::RParen)?;
    if let Some(expected) = rule.arity() {
        if expected != children.len() {
            return Err(ScriptError::ArityMismatch { rule: name, position, expected, found: children.len() });
        }
    }
    Ok(ProofNode::new(app, children))
}

fn substitute_proof(node: &mut ProofNode, name: &str, by: &Term) {
    for v in node.app.params.values_mut() {
        match v {
            Param::Formula(f) => *f = f.substitute(name, by),
            Param::Term(t) => *t = t.substitute(name, by),
            Param::Int(_) | Param::Ident(_) => {}
        }
    }
    for c in &mut node.children {
        substitute_proof(c, name, by);
    }
}

fn bound_in_formula(f: &Formula, out: &mut BTreeSet<String>) {
    match f {
        Formula::Box(p, g) | Formula::Diamond(p, g) => {
            bound_in_program(p, out);
            bound_in_formula(g, out);
        }
        Formula::Not(g) | Formula::Forall(_, g) => bound_in_formula(g, out),
        Formula::And(parts) => parts.iter().for_each(|g| bound_in_formula(g, out)),
        Formula::True | Formula::False | Formula::Cmp(..) => {}
    }
}

fn bound_in_program(p: &Program, out: &mut BTreeSet<String>) {
    out.extend(p.bound_variables());
    match p {
        Program::Test(f) => bound_in_formula(f, out),
        Program::Dyn(d) => bound_in_formula(&d.constraint, out),
        Program::Seq(parts) => parts.iter().for_each(|q| bound_in_program(q, out)),
        Program::Choice(a, b) => {
            bound_in_program(a, out);
            bound_in_program(b, out);
        }
    }
}

fn proof_formulas<'a>(node: &'a ProofNode, out: &mut Vec<&'a Param>) {
    out.extend(node.app.params.values());
    for c in &node.children {
        proof_formulas(c, out);
    }
}

/// Every variable must be a declared parameter or evolve under some dynamics.
fn check_resolved(
    params: &[(String, Option<BigRational>)],
    s: &Sequent,
    proof: &ProofNode,
) -> Result<(), ScriptError> {
    let mut known: BTreeSet<String> = params.iter().map(|(n, _)| n.clone()).collect();
    let mut used = BTreeSet::new();
    let mut formulas: Vec<Formula> = s.context.clone();
    formulas.push(s.goal.clone());
    let mut ps = Vec::new();
    proof_formulas(proof, &mut ps);
    for p in ps {
        match p {
            Param::Formula(f) => formulas.push(f.clone()),
            Param::Term(t) => used.extend(t.free_variables()),
            Param::Int(_) | Param::Ident(_) => {}
        }
    }
    for f in &formulas {
        bound_in_formula(f, &mut known);
        used.extend(f.free_variables());
    }
    let missing: Vec<String> = used.difference(&known).cloned().collect();
    if missing.is_empty() {
        Ok(())
    } else {
        Err(ScriptError::Unresolved(missing))
    }
}
