//! Decision support for closing first-order real-arithmetic leaves.
//!
//! `prove_arith` refutes `hyps ∧ ¬goal` disjunct by disjunct: linear equalities are
//! eliminated, denominators cleared, and the remaining polynomial system is shown
//! infeasible by exact linear programming over monomials, optionally strengthened with
//! products of the hypotheses. Failing that, a sampler looks for an exact rational
//! counterexample. Anything else is `Unknown`.

mod exact;
mod refute;
pub mod simplex;

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;

use num_rational::BigRational;
use num_traits::{Signed, Zero};

use crate::algebra::{normalize, AlgebraError, Monomial, Poly, RationalFunction};
use crate::syntax::{CmpOp, Formula};

pub use exact::{eval_term as eval_term_exact, holds as holds_exact, ExactState};
pub use refute::{find_counterexample, REFUTER_CANDIDATES};
use simplex::{infeasible, LinRow, Rel};

/// DNF width beyond which the prover gives up.
pub const MAX_DISJUNCTS: usize = 256;
/// Row budget for one linear program.
const MAX_ROWS: usize = 1500;
/// Triple products are only formed for at most this many inequality atoms.
const TRIPLE_ATOMS: usize = 8;

#[derive(Clone, Debug, PartialEq)]
pub enum ArithVerdict {
    /// Valid; the string names the strongest tier needed.
    Proved(String),
    /// An exact state satisfying every hypothesis and violating the goal.
    Refuted(ExactState),
    Unknown,
}

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
pub enum ArithError {
    #[error("not a first-order arithmetic formula: {0}")]
    NonArithmeticInput(String),
    #[error(transparent)]
    Algebra(#[from] AlgebraError),
}

/// `p rel 0`.
#[derive(Clone, Debug, PartialEq, Eq)]
struct Lit {
    p: RationalFunction,
    rel: Rel,
}

enum Dnf {
    Clauses(Vec<Vec<Lit>>),
    TooWide,
}

fn lit(p: RationalFunction, rel: Rel) -> Lit {
    Lit { p, rel }
}

/// Literals of `l op r` (or its negation) as a disjunction of conjunctions.
fn cmp_dnf(l: &crate::syntax::Term, op: CmpOp, r: &crate::syntax::Term, positive: bool) -> Result<Vec<Vec<Lit>>, ArithError> {
    let p = normalize(&crate::syntax::Term::sub(l.clone(), r.clone()))?.value;
    let ne = |p: &RationalFunction| {
        let n = RationalFunction::poly(p.numerator().clone());
        vec![vec![lit(n.clone(), Rel::Gt)], vec![lit(n.neg(), Rel::Gt)]]
    };
    Ok(match (op, positive) {
        (CmpOp::Eq, true) => vec![vec![lit(p, Rel::Eq)]],
        (CmpOp::Eq, false) => ne(&p),
        (CmpOp::Ge, true) | (CmpOp::Lt, false) => vec![vec![lit(p, Rel::Ge)]],
        (CmpOp::Gt, true) | (CmpOp::Le, false) => vec![vec![lit(p, Rel::Gt)]],
        (CmpOp::Le, true) | (CmpOp::Gt, false) => vec![vec![lit(p.neg(), Rel::Ge)]],
        (CmpOp::Lt, true) | (CmpOp::Ge, false) => vec![vec![lit(p.neg(), Rel::Gt)]],
    })
}

fn dnf(f: &Formula, positive: bool) -> Result<Dnf, ArithError> {
    Ok(Dnf::Clauses(match (f, positive) {
        (Formula::True, true) | (Formula::False, false) => vec![vec![]],
        (Formula::True, false) | (Formula::False, true) => vec![],
        (Formula::Cmp(l, op, r), _) => cmp_dnf(l, *op, r, positive)?,
        (Formula::Not(g), _) => return dnf(g, !positive),
        (Formula::And(parts), true) => return conjoin(parts.iter().map(|p| (p, true))),
        (Formula::And(parts), false) => {
            let mut out = Vec::new();
            for p in parts {
                match dnf(p, false)? {
                    Dnf::Clauses(c) => out.extend(c),
                    Dnf::TooWide => return Ok(Dnf::TooWide),
                }
                if out.len() > MAX_DISJUNCTS {
                    return Ok(Dnf::TooWide);
                }
            }
            out
        }
        _ => return Err(ArithError::NonArithmeticInput(f.to_string())),
    }))
}

fn conjoin<'a>(parts: impl IntoIterator<Item = (&'a Formula, bool)>) -> Result<Dnf, ArithError> {
    let mut acc: Vec<Vec<Lit>> = vec![vec![]];
    for (p, pos) in parts {
        let Dnf::Clauses(c) = dnf(p, pos)? else { return Ok(Dnf::TooWide) };
        if acc.len() * c.len() > MAX_DISJUNCTS {
            return Ok(Dnf::TooWide);
        }
        acc = acc
            .iter()
            .flat_map(|a| {
                c.iter().map(move |b| {
                    let mut x = a.clone();
                    x.extend(b.iter().cloned());
                    x
                })
            })
            .collect();
    }
    Ok(Dnf::Clauses(acc))
}

/// Validity of `∧hyps → goal` over the reals, assuming every denominator is nonzero.
pub fn prove_arith(hyps: &[Formula], goal: &Formula) -> Result<ArithVerdict, ArithError> {
    for f in hyps.iter().chain([goal]) {
        if !f.is_first_order() || f.contains_forall() {
            return Err(ArithError::NonArithmeticInput(f.to_string()));
        }
    }
    let parts = hyps.iter().map(|h| (h, true)).chain([(goal, false)]);
    let mut proved = match conjoin(parts)? {
        Dnf::Clauses(clauses) => {
            let mut worst = 0;
            let mut all = true;
            for c in clauses {
                match refute_conjunction(c) {
                    Some(tier) => worst = worst.max(tier),
                    None => {
                        all = false;
                        break;
                    }
                }
            }
            all.then_some(worst)
        }
        Dnf::TooWide => None,
    };
    if let Some(tier) = proved.take() {
        return Ok(ArithVerdict::Proved(tier_name(tier).to_string()));
    }
    Ok(match find_counterexample(hyps, goal, 0) {
        Some(s) => ArithVerdict::Refuted(s),
        None => ArithVerdict::Unknown,
    })
}

fn tier_name(t: u8) -> &'static str {
    match t {
        0 => "constant",
        1 => "linear",
        2 => "products",
        _ => "triple-products",
    }
}

/// Tier at which the conjunction was shown unsatisfiable.
fn refute_conjunction(mut lits: Vec<Lit>) -> Option<u8> {
    eliminate_equalities(&mut lits);
    let mut rest = Vec::new();
    for l in lits {
        match l.p.as_constant() {
            Some(c) if !constant_holds(&c, l.rel) => return Some(0),
            Some(_) => {}
            None => rest.push(l),
        }
    }
    let polys = clear_denominators(&rest);
    refute_polys(&polys, 3)
}

fn constant_holds(c: &BigRational, rel: Rel) -> bool {
    match rel {
        Rel::Eq => c.is_zero(),
        Rel::Ge => !c.is_negative(),
        Rel::Gt => c.is_positive(),
    }
}

/// Repeatedly solves an equality for a variable occurring linearly with a constant
/// coefficient (largest name first) and substitutes it everywhere.
fn eliminate_equalities(lits: &mut Vec<Lit>) {
    loop {
        let mut choice: Option<(usize, String, RationalFunction)> = None;
        for (i, l) in lits.iter().enumerate() {
            if l.rel != Rel::Eq {
                continue;
            }
            let n = l.p.numerator();
            for v in n.variables().into_iter().rev() {
                if n.degree_in(&v) != 1 {
                    continue;
                }
                let coeffs = n.coefficients_in(&v);
                let Some(a) = coeffs[1].as_constant() else { continue };
                let better = choice.as_ref().is_none_or(|(_, w, _)| v > *w);
                if better {
                    let sol = coeffs[0].scale(&(-a.recip()));
                    choice = Some((i, v, RationalFunction::poly(sol)));
                }
                break;
            }
        }
        let Some((i, v, sol)) = choice else { return };
        lits.remove(i);
        // A literal whose denominator vanishes identically under the substitution is
        // undefined there and is dropped, which only weakens the hypotheses.
        *lits = lits.drain(..).filter_map(|l| Some(lit(l.p.substitute(&v, &sol).ok()?, l.rel))).collect();
    }
}

/// Polynomial literals equivalent to `rest` wherever every denominator is nonzero.
fn clear_denominators(rest: &[Lit]) -> Vec<(Poly, Rel)> {
    let known: Vec<(Poly, Rel)> =
        rest.iter().filter(|l| l.p.is_polynomial()).map(|l| (l.p.numerator().clone(), l.rel)).collect();
    let mut sign_cache: HashMap<Poly, Option<bool>> = HashMap::new();
    let mut sign = |d: &Poly| -> Option<bool> {
        *sign_cache.entry(d.clone()).or_insert_with(|| {
            let with = |extra: (Poly, Rel)| {
                let mut sys = known.clone();
                sys.push(extra);
                refute_polys(&sys, 2).is_some()
            };
            // d ≠ 0 is assumed, so d ≥ 0 already means d > 0.
            if with((d.neg(), Rel::Gt)) {
                Some(true)
            } else if with((d.clone(), Rel::Gt)) {
                Some(false)
            } else {
                None
            }
        })
    };
    let mut out = Vec::new();
    for l in rest {
        let (n, d) = (l.p.numerator(), l.p.denominator());
        if d.is_constant() {
            out.push((n.clone(), l.rel));
            continue;
        }
        let p = match (l.rel, sign(d)) {
            (Rel::Eq, _) => n.clone(),
            (_, Some(true)) => n.clone(),
            (_, Some(false)) => n.neg(),
            // n/d and n·d share their sign when d ≠ 0.
            (_, None) => n.mul(d),
        };
        out.push((p, l.rel));
    }
    out
}

/// Tier (1 to `max_tier`) at which the polynomial system is infeasible.
fn refute_polys(atoms: &[(Poly, Rel)], max_tier: u8) -> Option<u8> {
    let mut rows: Vec<(Poly, Rel)> = atoms.iter().filter(|(p, _)| !p.is_zero()).cloned().collect();
    if atoms.iter().any(|(p, r)| p.is_zero() && *r == Rel::Gt) {
        return Some(0);
    }
    if linear_infeasible(&rows) {
        return Some(1);
    }
    let ineq: Vec<(Poly, Rel)> = rows.iter().filter(|(_, r)| *r != Rel::Eq).cloned().collect();
    let eqs: Vec<Poly> = rows.iter().filter(|(_, r)| *r == Rel::Eq).map(|(p, _)| p.clone()).collect();
    let vars: BTreeSet<String> = rows.iter().flat_map(|(p, _)| p.variables()).collect();
    let both = |a: Rel, b: Rel| if a == Rel::Gt && b == Rel::Gt { Rel::Gt } else { Rel::Ge };
    let mut extra = Vec::new();
    for i in 0..ineq.len() {
        for j in i..ineq.len() {
            extra.push((ineq[i].0.mul(&ineq[j].0), both(ineq[i].1, ineq[j].1)));
        }
    }
    for e in &eqs {
        for v in &vars {
            extra.push((e.mul(&Poly::var(v)), Rel::Eq));
        }
        for (p, _) in &ineq {
            extra.push((e.mul(p), Rel::Eq));
        }
    }
    if max_tier < 2 {
        return None;
    }
    rows.extend(extra);
    add_even_monomials(&mut rows);
    if rows.len() <= MAX_ROWS && linear_infeasible(&rows) {
        return Some(2);
    }
    if max_tier < 3 || ineq.len() > TRIPLE_ATOMS {
        return None;
    }
    for i in 0..ineq.len() {
        for j in i..ineq.len() {
            for k in j..ineq.len() {
                let p = ineq[i].0.mul(&ineq[j].0).mul(&ineq[k].0);
                rows.push((p, both(both(ineq[i].1, ineq[j].1), ineq[k].1)));
            }
        }
    }
    add_even_monomials(&mut rows);
    (rows.len() <= MAX_ROWS && linear_infeasible(&rows)).then_some(3)
}

/// Adds `m ≥ 0` for every monomial with only even exponents.
fn add_even_monomials(rows: &mut Vec<(Poly, Rel)>) {
    let present: BTreeSet<Monomial> = rows.iter().flat_map(|(p, _)| p.terms().map(|(m, _)| m.clone())).collect();
    for m in present {
        if !m.is_one() && m.powers().iter().all(|(_, e)| e % 2 == 0) {
            let row = (Poly::monomial(m, BigRational::from_integer(1.into())), Rel::Ge);
            if !rows.contains(&row) {
                rows.push(row);
            }
        }
    }
}

/// Infeasibility with every non-constant monomial treated as an independent variable.
fn linear_infeasible(rows: &[(Poly, Rel)]) -> bool {
    let mut index: BTreeMap<Monomial, usize> = BTreeMap::new();
    let mut lin = Vec::with_capacity(rows.len());
    for (p, rel) in rows {
        let mut coeffs = Vec::new();
        let mut constant = BigRational::zero();
        for (m, c) in p.terms() {
            if m.is_one() {
                constant = c.clone();
            } else {
                let n = index.len();
                let j = *index.entry(m.clone()).or_insert(n);
                coeffs.push((j, c.clone()));
            }
        }
        lin.push(LinRow { coeffs, constant, rel: *rel });
    }
    infeasible(&lin, index.len())
}

/// Deduplicated arithmetic obligations left open by a proof.
#[derive(Clone, Debug, Default)]
pub struct ObligationLedger {
    items: Vec<Obligation>,
    index: HashMap<String, usize>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Obligation {
    pub id: usize,
    pub hyps: Vec<Formula>,
    pub goal: Formula,
    pub text: String,
}

impl fmt::Display for Obligation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{}] {}", self.id, self.text)
    }
}

/// Canonical `h1, h2 |- g` with conjuncts flattened, sorted and deduplicated.
pub fn sequent_text(hyps: &[Formula], goal: &Formula) -> String {
    let set: BTreeSet<String> = hyps.iter().flat_map(|h| h.conjuncts()).map(|c| c.to_string()).collect();
    let hs: Vec<String> = set.into_iter().collect();
    format!("{} |- {}", hs.join(", "), goal)
}

impl ObligationLedger {
    pub fn new() -> ObligationLedger {
        ObligationLedger::default()
    }

    /// Records the obligation unless an identical one exists; returns its id.
    pub fn record(&mut self, hyps: &[Formula], goal: &Formula) -> usize {
        let text = sequent_text(hyps, goal);
        if let Some(&id) = self.index.get(&text) {
            return id;
        }
        let id = self.items.len() + 1;
        self.index.insert(text.clone(), id);
        self.items.push(Obligation { id, hyps: hyps.to_vec(), goal: goal.clone(), text });
        id
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &Obligation> {
        self.items.iter()
    }
}

#[cfg(test)]
mod tests;
