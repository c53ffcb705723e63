use crate::algebra::{
    compare_zero, dii_disjunction, lie_derivative, normalize, split_exit_parts, sync_vector_field, terms_equal,
    to_rf, Poly, RationalFunction, VectorField,
};
use crate::arith::{prove_arith, ArithError, ArithVerdict};
use crate::semantics::{check_simulation_numeric, SimViolationKind};
use crate::syntax::{check_disjoint, desugar_rdd, CmpOp, Dynamics, Formula, Program, RddFormula, Term};

use super::{KernelConfig, KernelError, Rule, RuleApp, Sequent};

/// Premises produced by one rule application, plus anything it asks the certificate
/// to record.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Applied {
    pub premises: Vec<Sequent>,
    /// Facts accepted without proof, as (hypotheses, goal).
    pub obligations: Vec<(Vec<Formula>, Formula)>,
    /// Divisors assumed nonzero, as `p != 0`.
    pub side_conditions: Vec<String>,
    pub experimental: Option<String>,
}

impl Applied {
    fn premises(premises: Vec<Sequent>) -> Applied {
        Applied { premises, ..Applied::default() }
    }

    fn with_side(mut self, polys: &[Poly]) -> Applied {
        for p in polys {
            push_side(&mut self.side_conditions, p);
        }
        self
    }
}

fn push_side(out: &mut Vec<String>, p: &Poly) {
    if p.is_constant() {
        return;
    }
    let s = format!("{} != 0", p.monic().to_term());
    if !out.contains(&s) {
        out.push(s);
    }
}

fn mismatch(what: &str, goal: &Formula) -> KernelError {
    KernelError::RuleMismatch(format!("expected {what}, found {goal}"))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Modality {
    Box,
    Diamond,
}

/// Modality, sequential components and postcondition of a modal goal.
fn modal(goal: &Formula) -> Option<(Modality, Vec<Program>, &Formula)> {
    match goal {
        Formula::Box(p, f) => Some((Modality::Box, p.components(), f)),
        Formula::Diamond(p, f) => Some((Modality::Diamond, p.components(), f)),
        _ => None,
    }
}

fn rebuild(m: Modality, comps: Vec<Program>, post: Formula) -> Formula {
    if comps.is_empty() {
        return post;
    }
    let p = Program::seq(comps);
    match m {
        Modality::Box => Formula::boxed(p, post),
        Modality::Diamond => Formula::diamond(p, post),
    }
}

fn boxed(comps: Vec<Program>, post: Formula) -> Formula {
    rebuild(Modality::Box, comps, post)
}

/// `[d]φ` with `d` a single dynamics.
fn box_dyn(goal: &Formula) -> Option<(&Dynamics, &Formula)> {
    match goal {
        Formula::Box(p, f) => match &**p {
            Program::Dyn(d) => Some((d, f)),
            _ => None,
        },
        _ => None,
    }
}

/// `[d; rest]φ`.
fn box_leading_dyn(goal: &Formula) -> Option<(Dynamics, Vec<Program>, &Formula)> {
    let (Modality::Box, comps, post) = modal(goal)? else { return None };
    let mut it = comps.into_iter();
    match it.next()? {
        Program::Dyn(d) => Some((d, it.collect(), post)),
        _ => None,
    }
}

fn require_first_order(f: &Formula, what: &str) -> Result<(), KernelError> {
    if f.is_first_order() {
        Ok(())
    } else {
        Err(KernelError::RuleMismatch(format!("{what} must be first-order: {f}")))
    }
}

/// `l ∼ r` as `(g, ∼)` with `∼ ∈ {=, >, ≥}`, mirroring `<` and `≤`.
fn oriented(post: &Formula) -> Option<(Term, CmpOp)> {
    let Formula::Cmp(l, op, r) = post else { return None };
    Some(match op {
        CmpOp::Eq | CmpOp::Gt | CmpOp::Ge => (Term::sub(l.clone(), r.clone()), *op),
        CmpOp::Lt | CmpOp::Le => (Term::sub(r.clone(), l.clone()), op.mirror()),
    })
}

fn field(d: &Dynamics) -> Result<(VectorField, Vec<Poly>), KernelError> {
    Ok(VectorField::from_dynamics(d)?)
}

fn lie_of(d: &Dynamics, t: &Term) -> Result<(RationalFunction, Vec<Poly>), KernelError> {
    let (f, mut side) = field(d)?;
    let n = normalize(t)?;
    side.extend(n.side_conditions);
    let l = lie_derivative(&f, &n.value);
    side.push(l.denominator().clone());
    Ok((l, side))
}

/// Conjuncts of the context that mention no variable the dynamics changes.
pub fn frame(context: &[Formula], d: &Dynamics) -> Vec<Formula> {
    let bound = d.bound_variables();
    context
        .iter()
        .flat_map(|c| c.conjuncts())
        .filter(|c| c.free_variables().is_disjoint(&bound))
        .collect()
}

pub fn apply_di(s: &Sequent) -> Result<Applied, KernelError> {
    let (d, post) = box_dyn(&s.goal).ok_or_else(|| mismatch("[dynamics] comparison", &s.goal))?;
    let (g, op) = oriented(post).ok_or_else(|| mismatch("[dynamics] comparison", &s.goal))?;
    let (l, side) = lie_of(d, &g)?;
    let dop = if op == CmpOp::Eq { CmpOp::Eq } else { CmpOp::Ge };
    Ok(Applied::premises(vec![
        s.assuming(&d.constraint).with_goal(post.clone()),
        s.with_goal(Formula::boxed(Program::Dyn(d.clone()), compare_zero(&l, dop))),
    ])
    .with_side(&side))
}

pub fn apply_dc(s: &Sequent, cut: &Formula) -> Result<Applied, KernelError> {
    require_first_order(cut, "DC cut")?;
    let (d, rest, post) = box_leading_dyn(&s.goal).ok_or_else(|| mismatch("[dynamics; ...]φ", &s.goal))?;
    let strengthened = d.with_constraint(Formula::and2(d.constraint.clone(), cut.clone()));
    let mut comps = vec![Program::Dyn(strengthened)];
    comps.extend(rest);
    Ok(Applied::premises(vec![
        s.with_goal(Formula::boxed(Program::Dyn(d.clone()), cut.clone())),
        s.with_goal(boxed(comps, post.clone())),
    ]))
}

pub fn apply_dw(s: &Sequent) -> Result<Applied, KernelError> {
    let (d, rest, post) = box_leading_dyn(&s.goal).ok_or_else(|| mismatch("[dynamics; ...]φ", &s.goal))?;
    let mut context = frame(&s.context, &d);
    context.extend(d.constraint.conjuncts());
    Ok(Applied::premises(vec![Sequent::new(context, boxed(rest, post.clone()))]))
}

pub fn apply_dii(s: &Sequent, n: u32) -> Result<Applied, KernelError> {
    if n == 0 {
        return Err(KernelError::BadParam("DII order must be positive".into()));
    }
    let (d, post) = box_dyn(&s.goal).ok_or_else(|| mismatch("[dynamics] g >= 0", &s.goal))?;
    let (g, op) = oriented(post).ok_or_else(|| mismatch("[dynamics] g >= 0", &s.goal))?;
    if op != CmpOp::Ge {
        return Err(mismatch("[dynamics] g >= 0", &s.goal));
    }
    let (f, mut side) = field(d)?;
    let gn = normalize(&g)?;
    side.extend(gn.side_conditions);
    let dn = dii_disjunction(&f, &gn.value, n);
    let domain = d.with_constraint(Formula::and2(d.constraint.clone(), post.clone()));
    Ok(Applied::premises(vec![
        s.assuming(&d.constraint).with_goal(post.clone()),
        s.with_goal(Formula::boxed(Program::Dyn(domain), dn)),
    ])
    .with_side(&side))
}

/// `[?Q ∧ Q♯]φ`.
fn at_start(q: &Formula, qs: &Formula, phi: Formula) -> Formula {
    Formula::boxed(Program::Test(Formula::and2(q.clone(), qs.clone())), phi)
}

fn rdd_goal(goal: &Formula) -> Result<RddFormula, KernelError> {
    RddFormula::from_formula(goal).ok_or_else(|| mismatch("[δ; δ♯; ?E]B with disjoint sides", goal))
}

pub fn apply_ts(s: &Sequent, backward_via: Option<&Formula>) -> Result<Applied, KernelError> {
    let rdd = rdd_goal(backward_via.unwrap_or(&s.goal))?;
    let sync = sync_vector_field(&rdd)?;
    let synchronized = Formula::boxed(Program::Dyn(sync.dynamics.clone()), rdd.post().clone());
    let third = match backward_via {
        None => synchronized,
        Some(via) => {
            let (d, post) = box_dyn(&s.goal).ok_or_else(|| mismatch("[synchronized dynamics]B", &s.goal))?;
            if !dynamics_equal(&sync.dynamics, d) || post != rdd.post() {
                return Err(KernelError::RuleMismatch(format!(
                    "goal is not the synchronization of {via}: expected {synchronized}"
                )));
            }
            via.clone()
        }
    };
    let (l, r) = (rdd.left(), rdd.right());
    let ratio = Formula::cmp(sync.ratio_term(), CmpOp::Gt, Term::zero());
    Ok(Applied::premises(vec![
        s.with_goal(at_start(&l.constraint, &r.constraint, rdd.exit().clone())),
        s.with_goal(Formula::boxed(Program::seq(vec![Program::Dyn(l.clone()), Program::Dyn(r.clone())]), ratio)),
        s.with_goal(third),
    ])
    .with_side(&sync.side_conditions))
}

/// Structural equality after normalizing every right-hand side and constraint term.
pub fn dynamics_equal(a: &Dynamics, b: &Dynamics) -> bool {
    if a.bound_variables() != b.bound_variables() {
        return false;
    }
    let rhs_equal = a.odes.iter().all(|(v, t)| b.rhs(v).is_some_and(|u| terms_equal(t, u)));
    rhs_equal && canonical(&a.constraint) == canonical(&b.constraint)
}

fn canonical(f: &Formula) -> Formula {
    match f {
        Formula::Cmp(l, op, r) => match to_rf(&Term::sub(l.clone(), r.clone())) {
            Ok(p) => Formula::Cmp(p.to_term(), *op, Term::zero()),
            Err(_) => f.clone(),
        },
        Formula::Not(g) => Formula::Not(Box::new(canonical(g))),
        Formula::And(parts) => Formula::And(parts.iter().map(canonical).collect()),
        other => other.clone(),
    }
}

/// Splits `l op r` into a left-side term and a right-side term.
fn split_sides(a: &RddFormula, f: &Formula) -> Option<(Term, CmpOp, Term)> {
    let Formula::Cmp(l, op, r) = f else { return None };
    let (lb, rb) = (a.left().bound_variables(), a.right().bound_variables());
    let fits = |x: &Term, y: &Term| x.free_variables().is_disjoint(&rb) && y.free_variables().is_disjoint(&lb);
    if fits(l, r) {
        Some((l.clone(), *op, r.clone()))
    } else if fits(r, l) {
        Some((r.clone(), op.mirror(), l.clone()))
    } else {
        None
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Monotone {
    Inc,
    Dec,
}

impl Monotone {
    fn parse(s: Option<&str>) -> Result<Monotone, KernelError> {
        match s {
            None | Some("inc") => Ok(Monotone::Inc),
            Some("dec") => Ok(Monotone::Dec),
            Some(other) => Err(KernelError::BadParam(format!("monotonicity flag {other}"))),
        }
    }
}

pub fn apply_mcs(s: &Sequent, gdir: Monotone, hdir: Monotone) -> Result<Applied, KernelError> {
    let a = rdd_goal(&s.goal)?;
    let (g, gs) = split_exit_parts(&a.left().bound_variables(), &a.right().bound_variables(), a.exit())?;
    let (h, op, hs) = split_sides(&a, a.post()).ok_or_else(|| mismatch("post h <= h#", a.post()))?;
    if op != CmpOp::Le {
        return Err(mismatch("post h <= h# (non-strict)", a.post()));
    }
    let (l, r) = (a.left(), a.right());
    let (lg, mut side) = lie_of(l, &g)?;
    let (lgs, s2) = lie_of(r, &gs)?;
    let (lh, s3) = lie_of(l, &h)?;
    let (lhs, s4) = lie_of(r, &hs)?;
    side.extend(s2.into_iter().chain(s3).chain(s4));
    // The side whose exit term must be strictly monotone, and the swapped post.
    let (strict_dyn, strict_lie, swapped_op) = match (gdir, hdir) {
        (Monotone::Inc, Monotone::Inc) => (l, (lg, CmpOp::Gt), CmpOp::Ge),
        (Monotone::Dec, Monotone::Inc) => (l, (lg, CmpOp::Lt), CmpOp::Le),
        (Monotone::Inc, Monotone::Dec) => (r, (lgs, CmpOp::Gt), CmpOp::Le),
        (Monotone::Dec, Monotone::Dec) => (r, (lgs, CmpOp::Lt), CmpOp::Ge),
    };
    let hop = if hdir == Monotone::Inc { CmpOp::Ge } else { CmpOp::Le };
    let swapped = RddFormula::new(
        l.clone(),
        r.clone(),
        Formula::cmp(h.clone(), CmpOp::Eq, hs.clone()),
        Formula::cmp(g.clone(), swapped_op, gs.clone()),
    )
    .expect("sides already disjoint");
    let mut applied = Applied::premises(vec![
        s.with_goal(desugar_rdd(&swapped)),
        s.with_goal(at_start(&l.constraint, &r.constraint, Formula::cmp(h, CmpOp::Le, hs))),
        s.with_goal(Formula::boxed(Program::Dyn(strict_dyn.clone()), compare_zero(&strict_lie.0, strict_lie.1))),
        s.with_goal(Formula::boxed(Program::Dyn(l.clone()), compare_zero(&lh, hop))),
        s.with_goal(Formula::boxed(Program::Dyn(r.clone()), compare_zero(&lhs, hop))),
    ])
    .with_side(&side);
    if (gdir, hdir) != (Monotone::Inc, Monotone::Inc) {
        applied.experimental = Some(format!("MCS g={gdir:?} h={hdir:?}").to_lowercase());
    }
    Ok(applied)
}

pub fn apply_rdc(s: &Sequent, cut: &Formula) -> Result<Applied, KernelError> {
    let Some((Modality::Box, comps, post)) = modal(&s.goal) else {
        return Err(mismatch("[δ; δ♯; ?P]φ", &s.goal));
    };
    let [Program::Dyn(l), Program::Dyn(r), Program::Test(p)] = comps.as_slice() else {
        return Err(mismatch("[δ; δ♯; ?P]φ", &s.goal));
    };
    check_disjoint(&Program::Dyn(l.clone()), &Program::Dyn(r.clone()))
        .map_err(|e| KernelError::SideConditionFailed(e.to_string()))?;
    split_exit_parts(&l.bound_variables(), &r.bound_variables(), cut)?;
    let (dl, dr) = (Program::Dyn(l.clone()), Program::Dyn(r.clone()));
    Ok(Applied::premises(vec![
        s.with_goal(boxed(
            vec![dl.clone(), dr.clone(), Program::Test(cut.clone()), Program::Test(p.clone())],
            post.clone(),
        )),
        s.with_goal(boxed(vec![dl, dr, Program::Test(p.clone())], cut.clone())),
    ]))
}

pub fn apply_ecp(s: &Sequent) -> Result<Applied, KernelError> {
    let shape = "[δ; δ♯1; ?P; δ♯2; ?g = g#]φ";
    let Some((Modality::Box, comps, post)) = modal(&s.goal) else { return Err(mismatch(shape, &s.goal)) };
    let [Program::Dyn(a), Program::Dyn(b1), Program::Test(p), Program::Dyn(b2), Program::Test(e)] = comps.as_slice()
    else {
        return Err(mismatch(shape, &s.goal));
    };
    if b1.bound_variables() != b2.bound_variables() {
        return Err(KernelError::SideConditionFailed(format!("{b1} and {b2} evolve different variables")));
    }
    for b in [b1, b2] {
        check_disjoint(&Program::Dyn(a.clone()), &Program::Dyn(b.clone()))
            .map_err(|e| KernelError::SideConditionFailed(e.to_string()))?;
    }
    if !p.free_variables().is_disjoint(&a.bound_variables()) {
        return Err(KernelError::SideConditionFailed(format!("test {p} mentions variables of {a}")));
    }
    let (g, gs) = split_exit_parts(&a.bound_variables(), &b1.bound_variables(), e)?;
    let (l1, mut side) = lie_of(b1, &gs)?;
    let (l2, s2) = lie_of(b2, &gs)?;
    side.extend(s2);
    let (da, db1, db2) = (Program::Dyn(a.clone()), Program::Dyn(b1.clone()), Program::Dyn(b2.clone()));
    let alpha = vec![
        da.clone(),
        db1.clone(),
        Program::Test(e.clone()),
        Program::Test(p.clone()),
        da,
        db2.clone(),
        Program::Test(e.clone()),
    ];
    Ok(Applied::premises(vec![
        s.with_goal(boxed(alpha, post.clone())),
        s.with_goal(Formula::boxed(db1.clone(), compare_zero(&l1, CmpOp::Ge))),
        s.with_goal(boxed(vec![db1, db2], compare_zero(&l2, CmpOp::Ge))),
        s.with_goal(Formula::cmp(g, CmpOp::Le, gs)),
    ])
    .with_side(&side))
}

fn modality_for(rule: Rule) -> Modality {
    match rule {
        Rule::SccDia | Rule::MidDia => Modality::Diamond,
        _ => Modality::Box,
    }
}

pub fn apply_scc(s: &Sequent, rule: Rule, at: usize) -> Result<Applied, KernelError> {
    let want = modality_for(rule);
    let (m, mut comps, post) = modal(&s.goal).ok_or_else(|| mismatch("a modal goal", &s.goal))?;
    if m != want || at + 1 >= comps.len() {
        return Err(mismatch(&format!("{want:?} over at least {} components", at + 2), &s.goal));
    }
    check_disjoint(&comps[at], &comps[at + 1]).map_err(|e| KernelError::SideConditionFailed(e.to_string()))?;
    comps.swap(at, at + 1);
    Ok(Applied::premises(vec![s.with_goal(rebuild(m, comps, post.clone()))]))
}

pub fn apply_mid(s: &Sequent, rule: Rule, at: usize) -> Result<Applied, KernelError> {
    let want = modality_for(rule);
    let (m, mut comps, post) = modal(&s.goal).ok_or_else(|| mismatch("a modal goal", &s.goal))?;
    if m != want || at + 1 >= comps.len() {
        return Err(mismatch(&format!("{want:?} over at least {} components", at + 2), &s.goal));
    }
    let (Program::Dyn(a), Program::Dyn(b)) = (&comps[at], &comps[at + 1]) else {
        return Err(mismatch("two adjacent dynamics", &s.goal));
    };
    if !dynamics_equal(a, b) {
        return Err(KernelError::RuleMismatch(format!("{a} and {b} differ")));
    }
    let mut side = field(a)?.1;
    side.extend(field(b)?.1);
    comps.remove(at + 1);
    Ok(Applied::premises(vec![s.with_goal(rebuild(m, comps, post.clone()))]).with_side(&side))
}

/// Splits `post` as `cond → φ`.
fn strip_implication(post: &Formula, cond: &Formula) -> Option<Formula> {
    let Formula::Not(inner) = post else { return None };
    let parts = inner.conjuncts();
    let k = cond.conjuncts().len();
    if parts.len() <= k {
        return None;
    }
    let phi = Formula::not(Formula::and(parts[k..].to_vec()));
    (Formula::implies(cond.clone(), phi.clone()) == *post).then_some(phi)
}

pub fn apply_dcc(s: &Sequent, cond: &Formula) -> Result<Applied, KernelError> {
    require_first_order(cond, "DCC condition")?;
    let (d, post) = box_dyn(&s.goal).ok_or_else(|| mismatch("[dynamics](C -> φ)", &s.goal))?;
    let phi = if *cond == Formula::True {
        post.clone()
    } else {
        strip_implication(post, cond).ok_or_else(|| mismatch(&format!("[dynamics]({cond} -> φ)"), &s.goal))?
    };
    let not_c = Formula::not(cond.clone());
    let mut ctx = d.constraint.conjuncts();
    ctx.extend(not_c.conjuncts());
    Ok(Applied::premises(vec![
        s.with_goal(Formula::boxed(
            Program::Dyn(d.with_constraint(Formula::and2(d.constraint.clone(), cond.clone()))),
            phi,
        )),
        Sequent::new(ctx, Formula::boxed(Program::Dyn(d.clone()), not_c)),
    ]))
}

pub fn apply_dbx_gt(s: &Sequent, cofactor: &Term) -> Result<Applied, KernelError> {
    let c = normalize(cofactor)?;
    if !c.value.is_polynomial() || !c.side_conditions.is_empty() {
        return Err(KernelError::NonPolynomialCofactor(cofactor.to_string()));
    }
    let (d, post) = box_dyn(&s.goal).ok_or_else(|| mismatch("[dynamics] h > 0", &s.goal))?;
    let (h, op) = oriented(post).ok_or_else(|| mismatch("[dynamics] h > 0", &s.goal))?;
    if op != CmpOp::Gt {
        return Err(mismatch("[dynamics] h > 0", &s.goal));
    }
    let (lh, side) = lie_of(d, &h)?;
    let hn = to_rf(&h)?;
    let rhs = c.value.mul(&hn);
    let premise = Formula::cmp(lh.to_term(), CmpOp::Ge, rhs.to_term());
    let mut premises = vec![Sequent::new(d.constraint.conjuncts(), premise)];
    if !s.hypotheses().contains(post) {
        premises.push(s.with_goal(post.clone()));
    }
    Ok(Applied::premises(premises).with_side(&side))
}

pub fn apply_sim(s: &Sequent, r: &Formula, cfg: &KernelConfig) -> Result<Applied, KernelError> {
    require_first_order(r, "SIM relation")?;
    let a = rdd_goal(&s.goal)?;
    let report = check_simulation_numeric(&a, r, &cfg.sample_box, cfg.simulation_grid, &cfg.numerics)
        .map_err(|e| KernelError::SimulationRefuted(e.to_string()))?;
    if let Some(v) = report.violations.iter().find(|v| v.kind == SimViolationKind::Simulation) {
        let state: Vec<String> = v.state.iter().map(|(k, x)| format!("{k}={x}")).collect();
        return Err(KernelError::SimulationRefuted(state.join(", ")));
    }
    let simulation = Formula::boxed(
        Program::Dyn(a.left().clone()),
        Formula::diamond(Program::Dyn(a.right().clone()), r.clone()),
    );
    let mut support = r.conjuncts();
    support.extend(a.exit().conjuncts());
    let mut applied = Applied::premises(vec![
        Sequent::new(support, a.post().clone()),
        Sequent::new(r.conjuncts(), desugar_rdd(&RddFormula::new(
            a.left().clone(),
            a.right().clone(),
            a.exit().clone(),
            r.clone(),
        ).expect("sides already disjoint"))),
        s.with_goal(at_start(&a.left().constraint, &a.right().constraint, r.clone())),
    ]);
    applied.obligations.push((r.conjuncts(), simulation));
    Ok(applied)
}

pub fn apply_split(s: &Sequent) -> Result<Applied, KernelError> {
    if let Some((m, comps, post)) = modal(&s.goal) {
        if let Some(Program::Choice(a, b)) = comps.first() {
            let rest = &comps[1..];
            let branch = |x: &Program| {
                let mut c = vec![x.clone()];
                c.extend(rest.iter().cloned());
                s.with_goal(rebuild(m, c, post.clone()))
            };
            if m == Modality::Diamond {
                return Err(mismatch("a box over a choice", &s.goal));
            }
            return Ok(Applied::premises(vec![branch(a), branch(b)]));
        }
        if m == Modality::Box {
            if let Formula::And(parts) = post {
                return Ok(Applied::premises(
                    parts.iter().map(|p| s.with_goal(rebuild(m, comps.clone(), p.clone()))).collect(),
                ));
            }
        }
    }
    if let Formula::And(parts) = &s.goal {
        return Ok(Applied::premises(parts.iter().map(|p| s.with_goal(p.clone())).collect()));
    }
    Err(mismatch("[α ++ β]φ, [α](φ & ψ) or a conjunction", &s.goal))
}

pub fn apply_compose(s: &Sequent, at: Option<u32>, join: bool) -> Result<Applied, KernelError> {
    let (m, comps, post) = modal(&s.goal).ok_or_else(|| mismatch("a modal goal", &s.goal))?;
    let goal = if join {
        let (m2, inner, post2) = modal(post).ok_or_else(|| mismatch("[α][β]φ", &s.goal))?;
        if m2 != m {
            return Err(mismatch("two modalities of the same kind", &s.goal));
        }
        let mut all = comps;
        all.extend(inner);
        rebuild(m, all, post2.clone())
    } else {
        let k = at.unwrap_or(1) as usize;
        if k == 0 || k >= comps.len() {
            return Err(mismatch(&format!("a sequence of more than {k} programs"), &s.goal));
        }
        let inner = rebuild(m, comps[k..].to_vec(), post.clone());
        rebuild(m, comps[..k].to_vec(), inner)
    };
    Ok(Applied::premises(vec![s.with_goal(goal)]))
}

pub fn apply_test(s: &Sequent) -> Result<Applied, KernelError> {
    let Some((Modality::Box, comps, post)) = modal(&s.goal) else {
        return Err(mismatch("[?P]φ", &s.goal));
    };
    if let Some(Program::Test(p)) = comps.first() {
        require_first_order(p, "test")?;
        return Ok(Applied::premises(vec![s.assuming(p).with_goal(boxed(comps[1..].to_vec(), post.clone()))]));
    }
    if let Some(Program::Test(p)) = comps.last() {
        let prefix = comps[..comps.len() - 1].to_vec();
        return Ok(Applied::premises(vec![s.with_goal(boxed(prefix, Formula::implies(p.clone(), post.clone())))]));
    }
    Err(mismatch("a box whose program starts or ends with a test", &s.goal))
}

pub fn apply_weaken(s: &Sequent, post: Option<&Formula>, ctx: Option<&Formula>) -> Result<Applied, KernelError> {
    match (post, ctx) {
        (Some(c), None) => {
            require_first_order(c, "WEAKEN post")?;
            let (m, comps, phi) = modal(&s.goal).ok_or_else(|| mismatch("a modal goal", &s.goal))?;
            Ok(Applied::premises(vec![
                s.with_goal(rebuild(m, comps, c.clone())),
                Sequent::new(c.conjuncts(), phi.clone()),
            ]))
        }
        (None, Some(delta)) => {
            require_first_order(delta, "WEAKEN ctx")?;
            Ok(Applied::premises(vec![s.with_goal(delta.clone()), Sequent::new(delta.conjuncts(), s.goal.clone())]))
        }
        _ => Err(KernelError::BadParam("WEAKEN needs exactly one of post= or ctx=".into())),
    }
}

pub fn apply_arith(s: &Sequent) -> Result<Applied, KernelError> {
    let hyps = s.hypotheses();
    let verdict = prove_arith(&hyps, &s.goal).map_err(|e| match e {
        ArithError::NonArithmeticInput(f) => KernelError::RuleMismatch(format!("not arithmetic: {f}")),
        ArithError::Algebra(a) => a.into(),
    })?;
    let mut applied = Applied::default();
    let mut side = Vec::new();
    for f in hyps.iter().chain([&s.goal]) {
        collect_divisors(f, &mut side);
    }
    applied = applied.with_side(&side);
    match verdict {
        ArithVerdict::Proved(_) => Ok(applied),
        ArithVerdict::Unknown => {
            applied.obligations.push((hyps, s.goal.clone()));
            Ok(applied)
        }
        ArithVerdict::Refuted(w) => Err(KernelError::ProofRefuted {
            sequent: s.to_string(),
            witness: w.iter().map(|(k, v)| format!("{k}={v}")).collect::<Vec<_>>().join(", "),
        }),
    }
}

fn collect_divisors(f: &Formula, out: &mut Vec<Poly>) {
    match f {
        Formula::Cmp(l, _, r) => {
            for t in [l, r] {
                if let Ok(n) = normalize(t) {
                    out.extend(n.side_conditions);
                }
            }
        }
        Formula::Not(g) => collect_divisors(g, out),
        Formula::And(parts) => parts.iter().for_each(|p| collect_divisors(p, out)),
        _ => {}
    }
}

/// Dispatches a rule application.
pub fn apply(app: &RuleApp, s: &Sequent, cfg: &KernelConfig) -> Result<Applied, KernelError> {
    for c in &s.context {
        require_first_order(c, "context formula")?;
    }
    let at = || -> Result<usize, KernelError> { Ok(app.int("at")?.unwrap_or(0) as usize) };
    match app.rule {
        Rule::Di => apply_di(s),
        Rule::Dc => apply_dc(s, app.required_formula("cut")?),
        Rule::Dw => apply_dw(s),
        Rule::Dii => apply_dii(s, app.int("n")?.unwrap_or(1)),
        Rule::Sim => apply_sim(s, app.required_formula("R")?, cfg),
        Rule::Ts => match app.ident("dir")?.unwrap_or("fwd") {
            "fwd" | "forward" => apply_ts(s, None),
            "back" | "backward" => apply_ts(s, Some(app.required_formula("via")?)),
            other => Err(KernelError::BadParam(format!("TS dir={other}"))),
        },
        Rule::Mcs => apply_mcs(s, Monotone::parse(app.ident("g")?)?, Monotone::parse(app.ident("h")?)?),
        Rule::Rdc => apply_rdc(s, app.required_formula("cut")?),
        Rule::Ecp => apply_ecp(s),
        Rule::SccBox | Rule::SccDia => apply_scc(s, app.rule, at()?),
        Rule::MidBox | Rule::MidDia => apply_mid(s, app.rule, at()?),
        Rule::Dcc => apply_dcc(s, app.required_formula("cond")?),
        Rule::DbxGt => apply_dbx_gt(
            s,
            app.term("cofactor")?.ok_or_else(|| KernelError::BadParam("DBX-GT needs cofactor=".into()))?,
        ),
        Rule::Split => apply_split(s),
        Rule::Compose => match app.ident("dir")?.unwrap_or("split") {
            "split" => apply_compose(s, app.int("at")?, false),
            "join" => apply_compose(s, None, true),
            other => Err(KernelError::BadParam(format!("COMPOSE dir={other}"))),
        },
        Rule::Test => apply_test(s),
        Rule::Weaken => apply_weaken(s, app.formula("post")?, app.formula("ctx")?),
        Rule::Arith => apply_arith(s),
    }
}
