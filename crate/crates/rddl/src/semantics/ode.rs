use super::eval::{Expr, Pred, Slot};
use super::{SemanticsError, State};
use crate::syntax::{Dynamics, Term};

/// Evolution-domain violations below this robustness count as leaving the domain.
pub const DOMAIN_SLACK: f64 = 1e-9;
/// Residual at which boundary and event bisection stops.
pub const BISECTION_RESIDUAL: f64 = 1e-10;

/// A dynamics compiled over its free variables (sorted); parameters have derivative 0.
#[derive(Clone, Debug)]
pub struct Flow {
    pub vars: Vec<String>,
    rhs: Vec<Option<Expr>>,
    domain: Pred,
}

impl Flow {
    pub fn new(d: &Dynamics) -> Result<Flow, SemanticsError> {
        let vars: Vec<String> = d.free_variables().into_iter().collect();
        let rhs = vars
            .iter()
            .map(|v| d.rhs(v).map(|t| Expr::indexed(t, &vars)).transpose())
            .collect::<Result<_, _>>()?;
        let domain = Pred::indexed(&d.constraint, &vars)?;
        Ok(Flow { vars, rhs, domain })
    }

    pub fn index(&self, var: &str) -> Option<usize> {
        self.vars.iter().position(|v| v == var)
    }

    /// Initial vector from a named state; every free variable must be present.
    pub fn initial(&self, state: &State) -> Result<Vec<f64>, SemanticsError> {
        self.vars
            .iter()
            .map(|v| state.get(v).copied().ok_or_else(|| SemanticsError::MissingVariable(v.clone())))
            .collect()
    }

    /// Compiles a term whose variables are either flow variables or fixed by `outer`.
    pub fn compile(&self, t: &Term, outer: &State) -> Result<Expr, SemanticsError> {
        Expr::compile(t, &|v| self.index(v).map(Slot::Index).or_else(|| outer.get(v).map(|x| Slot::Value(*x))))
    }

    fn deriv(&self, x: &[f64], scale: f64, out: &mut [f64]) -> Result<(), SemanticsError> {
        for (o, r) in out.iter_mut().zip(&self.rhs) {
            *o = match r {
                Some(e) => scale * e.eval(x).map_err(|_| SemanticsError::PoleEncountered { time: f64::NAN })?,
                None => 0.0,
            };
        }
        Ok(())
    }

    /// One classical RK4 step; `scale(s)` multiplies the field at relative time `s`.
    pub fn rk4_scaled(
        &self,
        x: &[f64],
        h: f64,
        scale: &dyn Fn(f64) -> f64,
    ) -> Result<Vec<f64>, SemanticsError> {
        let n = x.len();
        let (mut k1, mut k2, mut k3, mut k4) = (vec![0.0; n], vec![0.0; n], vec![0.0; n], vec![0.0; n]);
        let mut tmp = vec![0.0; n];
        self.deriv(x, scale(0.0), &mut k1)?;
        for i in 0..n {
            tmp[i] = x[i] + 0.5 * h * k1[i];
        }
        self.deriv(&tmp, scale(0.5 * h), &mut k2)?;
        for i in 0..n {
            tmp[i] = x[i] + 0.5 * h * k2[i];
        }
        self.deriv(&tmp, scale(0.5 * h), &mut k3)?;
        for i in 0..n {
            tmp[i] = x[i] + h * k3[i];
        }
        self.deriv(&tmp, scale(h), &mut k4)?;
        Ok((0..n).map(|i| x[i] + h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i])).collect())
    }

    pub fn rk4(&self, x: &[f64], h: f64) -> Result<Vec<f64>, SemanticsError> {
        self.rk4_scaled(x, h, &|_| 1.0)
    }

    /// Advances by `duration` in steps of at most `step`, ignoring the domain.
    pub fn advance(&self, x: &[f64], duration: f64, step: f64) -> Result<Vec<f64>, SemanticsError> {
        let n = (duration / step).ceil().max(1.0) as usize;
        let h = duration / n as f64;
        let mut cur = x.to_vec();
        for _ in 0..n {
            cur = self.rk4(&cur, h)?;
        }
        Ok(cur)
    }

    pub fn domain_robustness(&self, x: &[f64]) -> Result<f64, SemanticsError> {
        self.domain.robustness(x).map_err(|_| SemanticsError::PoleEncountered { time: f64::NAN })
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Termination {
    DomainViolation,
    Horizon,
    ExitEvent(f64),
}

/// Time-stamped states of one flow; times strictly increase from 0.
#[derive(Clone, Debug)]
pub struct Trajectory {
    pub vars: Vec<String>,
    pub times: Vec<f64>,
    pub states: Vec<Vec<f64>>,
    pub terminated_by: Termination,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn state(&self, i: usize) -> State {
        self.vars.iter().cloned().zip(self.states[i].iter().copied()).collect()
    }

    pub fn final_state(&self) -> State {
        self.state(self.len() - 1)
    }

    pub fn final_time(&self) -> f64 {
        *self.times.last().expect("nonempty")
    }

    pub fn column(&self, var: &str) -> Option<Vec<f64>> {
        let i = self.vars.iter().position(|v| v == var)?;
        Some(self.states.iter().map(|s| s[i]).collect())
    }

    /// CSV with header `t,<vars>` followed by any extra named columns.
    pub fn to_csv(&self, extra: &[(String, Vec<f64>)]) -> String {
        let mut out = String::from("t");
        for v in &self.vars {
            out.push(',');
            out.push_str(v);
        }
        for (name, _) in extra {
            out.push(',');
            out.push_str(name);
        }
        out.push('\n');
        for (i, (t, s)) in self.times.iter().zip(&self.states).enumerate() {
            out.push_str(&format!("{t}"));
            for x in s {
                out.push_str(&format!(",{x}"));
            }
            for (_, col) in extra {
                out.push_str(&format!(",{}", col[i]));
            }
            out.push('\n');
        }
        out
    }
}

/// Bisects `phi(h)` on `[lo, hi]` where `phi(lo)` and `phi(hi)` have opposite signs.
/// Returns the endpoint on the side of `lo`.
pub fn bisect(mut lo: f64, mut hi: f64, phi: &mut dyn FnMut(f64) -> Result<f64, SemanticsError>) -> Result<f64, SemanticsError> {
    let s_lo = phi(lo)?.signum();
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let v = phi(mid)?;
        if v.abs() <= BISECTION_RESIDUAL {
            return Ok(mid);
        }
        if v.signum() == s_lo {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(lo)
}

/// RK4 with fixed step until the horizon, the domain boundary or the first zero of `event`.
pub fn integrate_flow(
    flow: &Flow,
    x0: Vec<f64>,
    step: f64,
    horizon: f64,
    event: Option<&Expr>,
) -> Result<Trajectory, SemanticsError> {
    if !(step > 0.0) || !(horizon >= 0.0) {
        return Err(SemanticsError::InvalidConfig(format!("step {step}, horizon {horizon}")));
    }
    let pole = |t: f64| move |e: SemanticsError| match e {
        SemanticsError::PoleEncountered { .. } => SemanticsError::PoleEncountered { time: t },
        other => other,
    };
    if flow.domain_robustness(&x0).map_err(pole(0.0))? < -DOMAIN_SLACK {
        return Err(SemanticsError::DomainViolatedAtStart);
    }
    let ev = |x: &[f64], t: f64| -> Result<f64, SemanticsError> {
        match event {
            Some(e) => e.eval(x).map_err(|_| SemanticsError::PoleEncountered { time: t }),
            None => Ok(1.0),
        }
    };
    let mut traj = Trajectory {
        vars: flow.vars.clone(),
        times: vec![0.0],
        states: vec![x0.clone()],
        terminated_by: Termination::Horizon,
    };
    let e0 = ev(&x0, 0.0)?;
    if event.is_some() && e0.abs() <= BISECTION_RESIDUAL {
        traj.terminated_by = Termination::ExitEvent(0.0);
        return Ok(traj);
    }
    let (mut t, mut x, mut e) = (0.0f64, x0, e0);
    let max_steps = (horizon / step).ceil() as usize + 1;
    for _ in 0..max_steps {
        if t >= horizon {
            break;
        }
        let mut h = step.min(horizon - t);
        let mut next = flow.rk4(&x, h).map_err(pole(t))?;
        let mut left_domain = false;
        if flow.domain_robustness(&next).map_err(pole(t + h))? < -DOMAIN_SLACK {
            let base = x.clone();
            h = bisect(0.0, h, &mut |s| flow.domain_robustness(&flow.rk4(&base, s)?))?;
            next = flow.rk4(&x, h).map_err(pole(t))?;
            left_domain = true;
        }
        if event.is_some() && h > 0.0 {
            let en = ev(&next, t + h)?;
            if en.abs() <= BISECTION_RESIDUAL || en.signum() != e.signum() {
                let base = x.clone();
                let hs = if en.abs() <= BISECTION_RESIDUAL {
                    h
                } else {
                    let sol = bisect(0.0, h, &mut |s| ev(&flow.rk4(&base, s)?, t + s))?;
                    // Take whichever bracket end has the smaller residual.
                    let a = ev(&flow.rk4(&base, sol)?, t + sol)?.abs();
                    let upper = (sol + (h - sol).min(f64::EPSILON * (1.0 + t) * 4.0)).min(h);
                    let b = ev(&flow.rk4(&base, upper)?, t + upper)?.abs();
                    if b < a { upper } else { sol }
                };
                if hs > 0.0 {
                    traj.times.push(t + hs);
                    traj.states.push(flow.rk4(&x, hs).map_err(pole(t))?);
                }
                traj.terminated_by = Termination::ExitEvent(t + hs);
                return Ok(traj);
            }
            e = en;
        }
        if h > 0.0 {
            t += h;
            x = next;
            traj.times.push(t);
            traj.states.push(x.clone());
        }
        if left_domain {
            traj.terminated_by = Termination::DomainViolation;
            return Ok(traj);
        }
    }
    Ok(traj)
}

pub fn integrate(d: &Dynamics, x0: &State, step: f64, horizon: f64) -> Result<Trajectory, SemanticsError> {
    let flow = Flow::new(d)?;
    integrate_flow(&flow, flow.initial(x0)?, step, horizon, None)
}

/// First time at which `target` reaches `level`, with the state there.
pub fn solve_exit(
    d: &Dynamics,
    x0: &State,
    target: &Term,
    level: f64,
    step: f64,
    horizon: f64,
) -> Result<Option<(f64, State)>, SemanticsError> {
    let flow = Flow::new(d)?;
    let event = Expr::Sub(Box::new(flow.compile(target, x0)?), Box::new(Expr::Const(level)));
    let traj = integrate_flow(&flow, flow.initial(x0)?, step, horizon, Some(&event))?;
    Ok(match traj.terminated_by {
        Termination::ExitEvent(t) => {
            let mut s = x0.clone();
            s.extend(traj.final_state());
            Some((t, s))
        }
        _ => None,
    })
}
