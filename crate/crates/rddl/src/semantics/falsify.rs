use std::cell::RefCell;
use std::collections::{BTreeSet, HashMap};
use std::fmt;
use std::rc::Rc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::eval::{flatten, Expr, Pred};
use super::ode::{bisect, integrate_flow, Flow, Trajectory};
use super::region::{Region, SampleBox};
use super::{Numerics, SemanticsError, State};
use crate::syntax::{desugar_rdd, Dynamics, Formula, Program, RddFormula, Term};

#[derive(Clone, Debug, PartialEq)]
pub struct Counterexample {
    pub sample: usize,
    pub initial: State,
    /// State at which the violated first-order formula was evaluated.
    pub witness: State,
    pub violated: Formula,
    pub robustness: f64,
}

fn fmt_state(s: &State) -> String {
    s.iter().map(|(k, v)| format!("{k}={v}")).collect::<Vec<_>>().join(", ")
}

impl fmt::Display for Counterexample {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "counterexample:")?;
        writeln!(f, "  sample: {}", self.sample)?;
        writeln!(f, "  initial: {}", fmt_state(&self.initial))?;
        writeln!(f, "  witness: {}", fmt_state(&self.witness))?;
        writeln!(f, "  violated: {}", self.violated)?;
        write!(f, "  robustness: {:e}", self.robustness)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct FalsifyOutcome {
    pub counterexample: Option<Counterexample>,
    pub checked: usize,
    /// Samples abandoned because a trajectory hit a pole.
    pub skipped: usize,
}

#[derive(Clone, Copy)]
struct Eval<'a> {
    rob: f64,
    at: Option<(&'a Formula, usize)>,
}

/// Values of one expression along one trajectory, split into monotone runs.
struct Series {
    values: Vec<f64>,
    runs: Vec<(usize, usize)>,
}

impl Series {
    fn new(values: Vec<f64>) -> Series {
        let mut runs = Vec::new();
        let mut start = 0;
        let mut dir = 0.0;
        for j in 1..values.len() {
            let d = (values[j] - values[j - 1]).signum();
            if values[j] == values[j - 1] {
                continue;
            }
            if dir != 0.0 && d != dir {
                runs.push((start, j - 1));
                start = j - 1;
            }
            dir = d;
        }
        runs.push((start, values.len() - 1));
        Series { values, runs }
    }

    /// Indices `j` such that the series reaches `c` in `(j-1, j]`, or at `j = 0`.
    fn crossings(&self, c: f64, limit: usize) -> Vec<usize> {
        let mut out = Vec::new();
        for &(a, b) in &self.runs {
            let (va, vb) = (self.values[a] - c, self.values[b] - c);
            if va == 0.0 {
                out.push(a);
            } else if va.signum() != vb.signum() {
                let up = vb > va;
                let off = self.values[a..=b].partition_point(|v| if up { *v < c } else { *v > c });
                out.push(a + off);
            }
            if out.len() >= limit {
                break;
            }
        }
        out.dedup();
        out
    }
}

type TrajKey = (usize, Vec<u64>);

/// Evaluates formulas over sampled reachable states. Caches are per evaluator and
/// keyed by addresses inside the formula it was given, so it must not outlive it.
struct Evaluator<'a> {
    num: &'a Numerics,
    flows: RefCell<HashMap<usize, Rc<Flow>>>,
    trajs: RefCell<HashMap<TrajKey, Option<Rc<Trajectory>>>>,
    series: RefCell<HashMap<(TrajKey, String), Rc<Series>>>,
    preds: RefCell<HashMap<usize, (Vec<String>, Rc<Pred>)>>,
    states: RefCell<Vec<State>>,
}

impl<'a> Evaluator<'a> {
    fn new(num: &'a Numerics) -> Self {
        Evaluator {
            num,
            flows: RefCell::default(),
            trajs: RefCell::default(),
            series: RefCell::default(),
            preds: RefCell::default(),
            states: RefCell::default(),
        }
    }

    fn remember(&self, s: State) -> usize {
        let mut states = self.states.borrow_mut();
        states.push(s);
        states.len() - 1
    }

    fn first_order(&self, f: &'a Formula, state: &State) -> Result<f64, SemanticsError> {
        let key = f as *const Formula as usize;
        let (names, values) = flatten(state);
        let cached = self.preds.borrow().get(&key).filter(|(n, _)| *n == names).map(|(_, p)| p.clone());
        let pred = match cached {
            Some(p) => p,
            None => {
                let p = Rc::new(Pred::indexed(f, &names)?);
                self.preds.borrow_mut().insert(key, (names, p.clone()));
                p
            }
        };
        pred.robustness(&values).map_err(|_| SemanticsError::PoleEncountered { time: 0.0 })
    }

    fn formula(&self, f: &'a Formula, state: &State) -> Result<Eval<'a>, SemanticsError> {
        if f.is_first_order() {
            let rob = self.first_order(f, state)?;
            return Ok(Eval { rob, at: Some((f, self.remember(state.clone()))) });
        }
        match f {
            Formula::Not(g) => {
                let e = self.formula(g, state)?;
                Ok(Eval { rob: -e.rob, at: e.at })
            }
            Formula::And(parts) => {
                let mut best = Eval { rob: f64::INFINITY, at: None };
                for p in parts {
                    let e = self.formula(p, state)?;
                    if e.rob < best.rob {
                        best = e;
                    }
                }
                Ok(best)
            }
            Formula::Box(p, post) | Formula::Diamond(p, post) => {
                let is_box = matches!(f, Formula::Box(..));
                let post: &'a Formula = post;
                let reach = self.reach(p, state, &[post])?;
                let mut best = Eval { rob: if is_box { f64::INFINITY } else { f64::NEG_INFINITY }, at: None };
                for s in &reach {
                    let e = self.formula(post, s)?;
                    if (is_box && e.rob < best.rob) || (!is_box && e.rob > best.rob) {
                        best = e;
                    }
                }
                Ok(best)
            }
            Formula::Forall(..) => Err(SemanticsError::Quantifier),
            _ => unreachable!("first-order formulas handled above"),
        }
    }

    fn flow(&self, d: &Dynamics) -> Result<Rc<Flow>, SemanticsError> {
        let key = d as *const Dynamics as usize;
        if let Some(f) = self.flows.borrow().get(&key) {
            return Ok(f.clone());
        }
        let f = Rc::new(Flow::new(d)?);
        self.flows.borrow_mut().insert(key, f.clone());
        Ok(f)
    }

    fn trajectory(&self, d: &Dynamics, flow: &Flow, state: &State) -> Result<(TrajKey, Option<Rc<Trajectory>>), SemanticsError> {
        let x0 = flow.initial(state)?;
        let key = (d as *const Dynamics as usize, x0.iter().map(|v| v.to_bits()).collect::<Vec<_>>());
        if let Some(t) = self.trajs.borrow().get(&key) {
            return Ok((key, t.clone()));
        }
        let traj = match integrate_flow(flow, x0, self.num.step, self.num.horizon, None) {
            Ok(t) => Some(Rc::new(t)),
            Err(SemanticsError::DomainViolatedAtStart) => None,
            Err(e) => return Err(e),
        };
        self.trajs.borrow_mut().insert(key.clone(), traj.clone());
        Ok((key, traj))
    }

    fn reach(&self, p: &'a Program, state: &State, later: &[&'a Formula]) -> Result<Vec<State>, SemanticsError> {
        match p {
            Program::Test(q) => {
                Ok(if self.first_order(q, state)? >= -self.num.tolerance { vec![state.clone()] } else { vec![] })
            }
            Program::Dyn(d) => self.dyn_states(d, state, later),
            Program::Choice(a, b) => {
                let mut out = self.reach(a, state, later)?;
                out.extend(self.reach(b, state, later)?);
                Ok(out)
            }
            Program::Seq(parts) => {
                let mut cur = vec![state.clone()];
                for (i, part) in parts.iter().enumerate() {
                    let mut ahead: Vec<&'a Formula> = parts[i + 1..]
                        .iter()
                        .filter_map(|q| if let Program::Test(f) = q { Some(f) } else { None })
                        .collect();
                    ahead.extend_from_slice(later);
                    let mut next = Vec::new();
                    for s in &cur {
                        next.extend(self.reach(part, s, &ahead)?);
                    }
                    cur = next;
                }
                Ok(cur)
            }
        }
    }

    /// Grid samples of the trajectory plus the points where atoms of `later` change sign.
    fn dyn_states(&self, d: &Dynamics, state: &State, later: &[&Formula]) -> Result<Vec<State>, SemanticsError> {
        let flow = self.flow(d)?;
        let (key, traj) = self.trajectory(d, &flow, state)?;
        let Some(traj) = traj else { return Ok(vec![]) };
        let m = self.num.grid.max(2);
        let n = traj.len();
        let mut points: Vec<Vec<f64>> = if n <= m {
            traj.states.clone()
        } else {
            let mut idx: Vec<usize> = (0..m).map(|i| i * (n - 1) / (m - 1)).collect();
            idx.dedup();
            idx.into_iter().map(|i| traj.states[i].clone()).collect()
        };
        let bound = d.bound_variables();
        for atom in atoms(later, &bound) {
            points.extend(self.crossings(&flow, &traj, &key, &atom, state, m)?);
        }
        Ok(points
            .into_iter()
            .map(|x| {
                let mut s = state.clone();
                for (v, val) in flow.vars.iter().zip(x) {
                    s.insert(v.clone(), val);
                }
                s
            })
            .collect())
    }

    fn crossings(
        &self,
        flow: &Flow,
        traj: &Trajectory,
        key: &TrajKey,
        (l, r): &(Term, Term),
        state: &State,
        limit: usize,
    ) -> Result<Vec<Vec<f64>>, SemanticsError> {
        let inside = |t: &Term| t.free_variables().iter().all(|v| flow.index(v).is_some());
        let outside = |t: &Term| t.free_variables().iter().all(|v| flow.index(v).is_none());
        let diff = match flow.compile(&Term::sub(l.clone(), r.clone()), state) {
            Ok(e) => e,
            Err(SemanticsError::MissingVariable(_)) => return Ok(vec![]),
            Err(e) => return Err(e),
        };
        // Separable atoms reuse one series per trajectory and side.
        let hits = if let Some((side, other)) =
            [(l, r), (r, l)].into_iter().find(|(a, b)| inside(a) && outside(b))
        {
            let Ok(c) = flow.compile(other, state).and_then(|e| {
                e.eval(&[]).map_err(|_| SemanticsError::PoleEncountered { time: 0.0 })
            }) else {
                return Ok(vec![]);
            };
            let skey = (key.clone(), side.to_string());
            let cached = self.series.borrow().get(&skey).cloned();
            let series = match cached {
                Some(s) => s,
                None => {
                    let e = Expr::indexed(side, &flow.vars)?;
                    let vals = traj.states.iter().map(|x| e.eval(x).unwrap_or(f64::NAN)).collect();
                    let s = Rc::new(Series::new(vals));
                    self.series.borrow_mut().insert(skey, s.clone());
                    s
                }
            };
            series.crossings(c, limit)
        } else {
            let vals = traj.states.iter().map(|x| diff.eval(x).unwrap_or(f64::NAN)).collect();
            Series::new(vals).crossings(0.0, limit)
        };
        let mut out = Vec::new();
        for j in hits {
            if j == 0 {
                out.push(traj.states[0].clone());
                continue;
            }
            let base = &traj.states[j - 1];
            let width = traj.times[j] - traj.times[j - 1];
            let phi = |h: f64| -> Result<f64, SemanticsError> {
                diff.eval(&flow.rk4(base, h)?).map_err(|_| SemanticsError::PoleEncountered { time: 0.0 })
            };
            let (a, b) = (phi(0.0)?, phi(width)?);
            let h = if b == 0.0 || a.signum() == b.signum() {
                width
            } else {
                bisect(0.0, width, &mut |h| phi(h))?
            };
            out.push(flow.rk4(base, h)?);
        }
        Ok(out)
    }
}

/// Comparison atoms of `fs` mentioning a variable in `bound`, including atoms obtained
/// by substituting defining equalities `v = t` (for `v` not in `bound`) into the others.
fn atoms(fs: &[&Formula], bound: &BTreeSet<String>) -> Vec<(Term, Term)> {
    fn collect(f: &Formula, out: &mut Vec<(Term, Term)>) {
        match f {
            Formula::Cmp(l, _, r) => out.push((l.clone(), r.clone())),
            Formula::Not(g) | Formula::Forall(_, g) => collect(g, out),
            Formula::And(ps) => ps.iter().for_each(|p| collect(p, out)),
            Formula::Box(p, g) | Formula::Diamond(p, g) => {
                for c in p.components() {
                    if let Program::Test(q) = c {
                        collect(&q, out);
                    }
                }
                collect(g, out)
            }
            Formula::True | Formula::False => {}
        }
    }
    let mentions = |(l, r): &(Term, Term)| {
        l.free_variables().iter().chain(r.free_variables().iter()).any(|v| bound.contains(v))
    };
    let mut out: Vec<(Term, Term)> = Vec::new();
    for f in fs {
        let mut local = Vec::new();
        collect(f, &mut local);
        let mut derived = Vec::new();
        for c in f.conjuncts() {
            let Formula::Cmp(l, crate::syntax::CmpOp::Eq, r) = &c else { continue };
            for (a, b) in [(l, r), (r, l)] {
                let Term::Var(v) = a else { continue };
                if bound.contains(v) || b.free_variables().contains(v) {
                    continue;
                }
                for (x, y) in &local {
                    if x.free_variables().contains(v) || y.free_variables().contains(v) {
                        derived.push((x.substitute(v, b), y.substitute(v, b)));
                    }
                }
            }
        }
        for a in local.into_iter().chain(derived) {
            if mentions(&a) && !out.contains(&a) {
                out.push(a);
            }
        }
    }
    out
}

/// Robustness of `f` at `state` with the state where its deciding atom was evaluated.
pub fn eval_formula(f: &Formula, state: &State, num: &Numerics) -> Result<(f64, Option<State>), SemanticsError> {
    let ev = Evaluator::new(num);
    let e = ev.formula(f, state)?;
    let witness = e.at.map(|(_, i)| ev.states.borrow()[i].clone());
    Ok((e.rob, witness))
}

enum Verdict {
    Pass,
    Skip,
    Fail { witness: State, violated: Formula, robustness: f64 },
}

/// Samples initial states from `gamma` and searches for one where `goal` is violated
/// by more than the tolerance. Deterministic for a fixed seed.
pub fn falsify(
    gamma: &Formula,
    goal: &Formula,
    samples: usize,
    sbox: &SampleBox,
    num: &Numerics,
    seed: u64,
) -> Result<FalsifyOutcome, SemanticsError> {
    let region = Region::new(gamma, &goal.free_variables(), sbox)?;
    let eval = |initial: &State| -> Result<Verdict, SemanticsError> {
        let ev = Evaluator::new(num);
        match ev.formula(goal, initial) {
            Ok(e) if e.rob < -num.tolerance => {
                let (violated, witness) = match e.at {
                    Some((f, j)) => (f.clone(), ev.states.borrow()[j].clone()),
                    None => (goal.clone(), initial.clone()),
                };
                Ok(Verdict::Fail { witness, violated, robustness: e.rob })
            }
            Ok(_) => Ok(Verdict::Pass),
            Err(SemanticsError::PoleEncountered { .. }) => Ok(Verdict::Skip),
            Err(e) => Err(e),
        }
    };
    // Chunks are evaluated in order, so the reported counterexample is always the
    // lowest failing index regardless of thread count. Repeated initial states (Γ may
    // pin every variable) are evaluated once.
    let chunk = 4 * rayon::current_num_threads().max(1);
    let mut seen: HashMap<Vec<u64>, Verdict> = HashMap::new();
    let mut outcome = FalsifyOutcome { counterexample: None, checked: 0, skipped: 0 };
    let mut start = 0;
    while start < samples {
        let end = (start + chunk).min(samples);
        let initials = (start..end)
            .map(|i| {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                rng.set_stream(i as u64);
                region.sample(&mut rng, num.tolerance)
            })
            .collect::<Result<Vec<State>, _>>()?;
        let key = |s: &State| s.values().map(|v| v.to_bits()).collect::<Vec<u64>>();
        let mut fresh: Vec<&State> = Vec::new();
        for s in &initials {
            if !seen.contains_key(&key(s)) && !fresh.iter().any(|f| key(f) == key(s)) {
                fresh.push(s);
            }
        }
        let verdicts: Vec<Result<Verdict, SemanticsError>> = fresh.par_iter().map(|s| eval(s)).collect();
        for (s, v) in fresh.iter().zip(verdicts) {
            seen.insert(key(s), v?);
        }
        for (i, initial) in (start..end).zip(initials) {
            match &seen[&key(&initial)] {
                Verdict::Pass => outcome.checked += 1,
                Verdict::Skip => outcome.skipped += 1,
                Verdict::Fail { witness, violated, robustness } => {
                    outcome.checked += 1;
                    outcome.counterexample = Some(Counterexample {
                        sample: i,
                        initial,
                        witness: witness.clone(),
                        violated: violated.clone(),
                        robustness: *robustness,
                    });
                    return Ok(outcome);
                }
            }
        }
        start = end;
    }
    Ok(outcome)
}

pub fn falsify_rdd(
    a: &RddFormula,
    gamma: &Formula,
    samples: usize,
    sbox: &SampleBox,
    num: &Numerics,
    seed: u64,
) -> Result<FalsifyOutcome, SemanticsError> {
    falsify(gamma, &desugar_rdd(a), samples, sbox, num, seed)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SimViolationKind {
    /// Some left step from an R-pair cannot be matched by the right side.
    Simulation,
    /// An exit pair in R violates the postcondition.
    Support,
    /// An exit pair reachable from R is not itself in R.
    EssentialInclusion,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SimViolation {
    pub kind: SimViolationKind,
    pub state: State,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SimulationReport {
    pub pairs_checked: usize,
    pub steps_checked: usize,
    pub violations: Vec<SimViolation>,
}

/// Numerically checks that `r` is a simulation for `a` on up to `grid` initial pairs
/// and `grid` left durations each.
pub fn check_simulation_numeric(
    a: &RddFormula,
    r: &Formula,
    sbox: &SampleBox,
    grid: usize,
    num: &Numerics,
) -> Result<SimulationReport, SemanticsError> {
    let goal = desugar_rdd(a);
    let mut vars = goal.free_variables();
    vars.extend(r.free_variables());
    let region = Region::new(r, &vars, sbox)?;
    let pairs = region.grid(grid, grid, num.tolerance);
    if pairs.is_empty() {
        return Err(SemanticsError::GammaUnsatisfiedInBox { attempts: grid });
    }
    let matched = Formula::diamond(Program::Dyn(a.right().clone()), r.clone());
    let run = Program::seq(vec![
        Program::Dyn(a.left().clone()),
        Program::Dyn(a.right().clone()),
        Program::Test(a.exit().clone()),
    ]);
    let results: Vec<Result<(usize, Vec<SimViolation>), SemanticsError>> = pairs
        .par_iter()
        .map(|pair| {
            let ev = Evaluator::new(num);
            let mut found = Vec::new();
            let mut steps = 0;
            let flow = ev.flow(a.left())?;
            if let (_, Some(traj)) = ev.trajectory(a.left(), &flow, pair)? {
                let n = traj.len();
                let picks: BTreeSet<usize> = (1..=grid).map(|j| j * (n - 1) / grid.max(1)).collect();
                for i in picks {
                    let mut s = pair.clone();
                    s.extend(traj.state(i));
                    steps += 1;
                    match ev.formula(&matched, &s) {
                        Ok(e) if e.rob < -num.tolerance => {
                            found.push(SimViolation { kind: SimViolationKind::Simulation, state: s })
                        }
                        Ok(_) | Err(SemanticsError::PoleEncountered { .. }) => {}
                        Err(e) => return Err(e),
                    }
                }
            }
            for s in ev.reach(&run, pair, &[r, a.post()])? {
                if ev.first_order(r, &s)? < -num.tolerance {
                    found.push(SimViolation { kind: SimViolationKind::EssentialInclusion, state: s });
                } else if ev.first_order(a.post(), &s)? < -num.tolerance {
                    found.push(SimViolation { kind: SimViolationKind::Support, state: s });
                }
            }
            Ok((steps, found))
        })
        .collect();
    let mut report = SimulationReport { pairs_checked: pairs.len(), steps_checked: 0, violations: Vec::new() };
    for r in results {
        let (steps, found) = r?;
        report.steps_checked += steps;
        report.violations.extend(found);
    }
    Ok(report)
}
