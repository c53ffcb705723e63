use std::collections::{BTreeMap, BTreeSet};

use num_traits::ToPrimitive;
use rand::Rng;

use super::eval::{Expr, Pred, Slot};
use super::{SemanticsError, State};
use crate::syntax::{CmpOp, Formula, Term};

/// Per-variable sampling ranges with a default for everything else.
#[derive(Clone, Debug, PartialEq)]
pub struct SampleBox {
    pub default: (f64, f64),
    pub ranges: BTreeMap<String, (f64, f64)>,
}

impl Default for SampleBox {
    fn default() -> Self {
        SampleBox { default: (-10.0, 10.0), ranges: BTreeMap::new() }
    }
}

impl SampleBox {
    pub fn symmetric(r: f64) -> SampleBox {
        SampleBox { default: (-r, r), ranges: BTreeMap::new() }
    }

    pub fn with(mut self, var: &str, lo: f64, hi: f64) -> SampleBox {
        self.ranges.insert(var.to_string(), (lo, hi));
        self
    }

    pub fn range(&self, var: &str) -> (f64, f64) {
        self.ranges.get(var).copied().unwrap_or(self.default)
    }
}

/// A first-order region prepared for sampling: equalities `x = t` define variables
/// from independent ones, single-variable bounds shrink the box, and the remaining
/// constraints are checked by rejection.
#[derive(Clone, Debug)]
pub struct Region {
    pub independent: Vec<(String, f64, f64)>,
    /// `x = t` with `t` over independent variables only.
    pub definitions: Vec<(String, Term)>,
    /// Defined variables with an explicit box range must land inside it.
    dependent: Vec<(String, Expr, Option<(f64, f64)>)>,
    filter: Pred,
    names: Vec<String>,
}

const MAX_DRAWS: usize = 10_000;

impl Region {
    /// Region over `gamma` whose samples assign every variable in `extra` as well.
    pub fn new(gamma: &Formula, extra: &BTreeSet<String>, sbox: &SampleBox) -> Result<Region, SemanticsError> {
        if !gamma.is_first_order() {
            return Err(SemanticsError::NotFirstOrder(gamma.to_string()));
        }
        let mut vars = gamma.free_variables();
        vars.extend(extra.iter().cloned());
        let mut defs: BTreeMap<String, Term> = BTreeMap::new();
        let resolve = |t: &Term, defs: &BTreeMap<String, Term>| t.map_vars(&|v| defs.get(v).cloned());
        for c in gamma.conjuncts() {
            let Formula::Cmp(l, CmpOp::Eq, r) = &c else { continue };
            let (l, r) = (resolve(l, &defs), resolve(r, &defs));
            let pick = |a: &Term, b: &Term| match a {
                Term::Var(v) if !b.free_variables().contains(v) => Some((v.clone(), b.clone())),
                _ => None,
            };
            if let Some((v, t)) = pick(&l, &r).or_else(|| pick(&r, &l)) {
                for d in defs.values_mut() {
                    *d = d.substitute(&v, &t);
                }
                defs.insert(v, t);
            }
        }
        let mut bounds: BTreeMap<String, (f64, f64)> =
            vars.iter().filter(|v| !defs.contains_key(*v)).map(|v| (v.clone(), sbox.range(v))).collect();
        for c in gamma.conjuncts() {
            let Formula::Cmp(l, op, r) = &c else { continue };
            let (l, r) = (resolve(l, &defs), resolve(r, &defs));
            let (v, op, c) = match (&l, constant(&r), &r, constant(&l)) {
                (Term::Var(v), Some(c), _, _) => (v, *op, c),
                (_, _, Term::Var(v), Some(c)) => (v, op.mirror(), c),
                _ => continue,
            };
            let Some(b) = bounds.get_mut(v) else { continue };
            match op {
                CmpOp::Ge | CmpOp::Gt => b.0 = b.0.max(c),
                CmpOp::Le | CmpOp::Lt => b.1 = b.1.min(c),
                CmpOp::Eq => *b = (c, c),
            }
        }
        if bounds.values().any(|(lo, hi)| lo > hi) {
            return Err(SemanticsError::GammaUnsatisfiedInBox { attempts: 0 });
        }
        let independent: Vec<(String, f64, f64)> = bounds.into_iter().map(|(v, (lo, hi))| (v, lo, hi)).collect();
        let names: Vec<String> = independent.iter().map(|(v, ..)| v.clone()).chain(defs.keys().cloned()).collect();
        let index = |v: &str| names.iter().position(|n| n == v).map(Slot::Index);
        let dependent = defs
            .iter()
            .map(|(v, t)| Ok((v.clone(), Expr::compile(t, &index)?, sbox.ranges.get(v).copied())))
            .collect::<Result<_, SemanticsError>>()?;
        let filter = Pred::compile(gamma, &index)?;
        let definitions = defs.into_iter().collect();
        Ok(Region { independent, definitions, dependent, filter, names })
    }

    fn complete(&self, mut values: Vec<f64>, slack: f64) -> Option<State> {
        for (_, e, range) in &self.dependent {
            let v = e.eval(&values).ok()?;
            if range.is_some_and(|(lo, hi)| v < lo - slack || v > hi + slack) {
                return None;
            }
            values.push(v);
        }
        if values.iter().any(|v| !v.is_finite()) || self.filter.robustness(&values).ok()? < -slack {
            return None;
        }
        Some(self.names.iter().cloned().zip(values).collect())
    }

    /// Rejection sampling; `slack` is the robustness tolerance for the filter.
    pub fn sample<R: Rng>(&self, rng: &mut R, slack: f64) -> Result<State, SemanticsError> {
        for _ in 0..MAX_DRAWS {
            let values = self
                .independent
                .iter()
                .map(|(_, lo, hi)| if lo < hi { rng.gen_range(*lo..=*hi) } else { *lo })
                .collect();
            if let Some(s) = self.complete(values, slack) {
                return Ok(s);
            }
        }
        Err(SemanticsError::GammaUnsatisfiedInBox { attempts: MAX_DRAWS })
    }

    /// Up to `cap` satisfying points of a tensor grid with at most `n` points per
    /// independent variable. Axes are coarsened so that every variable varies.
    pub fn grid(&self, n: usize, cap: usize, slack: f64) -> Vec<State> {
        let dims = self.independent.iter().filter(|(_, lo, hi)| lo < hi).count().max(1);
        let mut m = ((cap.max(1) as f64).powf(1.0 / dims as f64).ceil() as usize).clamp(1, n.max(1));
        if m < n && m % 2 == 0 {
            m += 1;
        }
        let axes: Vec<Vec<f64>> = self
            .independent
            .iter()
            .map(|(_, lo, hi)| {
                if m <= 1 || lo == hi {
                    vec![0.5 * (lo + hi)]
                } else {
                    (0..m).map(|i| lo + (hi - lo) * i as f64 / (m - 1) as f64).collect()
                }
            })
            .collect();
        let total: usize = axes.iter().map(Vec::len).product();
        let stride = (total / cap.max(1)).max(1);
        let mut out = Vec::new();
        let mut idx = 0;
        while idx < total && out.len() < cap {
            let mut rest = idx;
            let values = axes
                .iter()
                .map(|a| {
                    let v = a[rest % a.len()];
                    rest /= a.len();
                    v
                })
                .collect();
            if let Some(s) = self.complete(values, slack) {
                out.push(s);
            }
            idx += stride;
        }
        out
    }
}

fn constant(t: &Term) -> Option<f64> {
    match t {
        Term::Const(c) => c.to_f64(),
        Term::Neg(a) => constant(a).map(|c| -c),
        _ => None,
    }
}
