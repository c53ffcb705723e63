use std::fmt;

use super::eval::Expr;
use super::ode::{bisect, integrate_flow, Flow, Termination, Trajectory};
use super::{SemanticsError, State};
use crate::algebra::{lie_derivative, normalize, split_exit, sync_vector_field, VectorField};
use crate::syntax::{Dynamics, RddFormula, Term};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Side {
    Left,
    Right,
}

impl fmt::Display for Side {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Side::Left => "left",
            Side::Right => "right",
        })
    }
}

/// Sampled time stretch `k` with `k(s[i]) = k[i]`, interpolated by cubic Hermite
/// splines so that its derivative is continuous and integrates back to the nodes.
#[derive(Clone, Debug, PartialEq)]
pub struct TimeStretch {
    pub s: Vec<f64>,
    pub k: Vec<f64>,
}

impl TimeStretch {
    pub fn is_strictly_increasing(&self) -> bool {
        self.s.len() >= 2
            && self.s.len() == self.k.len()
            && self.s.windows(2).all(|w| w[0] < w[1])
            && self.k.windows(2).all(|w| w[0] < w[1])
    }

    pub fn inverse(&self) -> TimeStretch {
        TimeStretch { s: self.k.clone(), k: self.s.clone() }
    }

    /// Three-point derivative estimates at every node.
    pub fn node_derivatives(&self) -> Vec<f64> {
        let n = self.s.len();
        (0..n)
            .map(|i| {
                let j = i.clamp(1, n - 2) - 1;
                lagrange_derivative(&self.s[j..j + 3], &self.k[j..j + 3], self.s[i])
            })
            .collect()
    }

    fn segment(&self, s: f64) -> usize {
        self.s.partition_point(|x| *x <= s).clamp(1, self.s.len() - 1) - 1
    }

    pub fn eval(&self, s: f64) -> f64 {
        self.hermite(s, &self.node_derivatives()).0
    }

    pub fn derivative(&self, s: f64) -> f64 {
        self.hermite(s, &self.node_derivatives()).1
    }

    fn hermite(&self, s: f64, m: &[f64]) -> (f64, f64) {
        let i = self.segment(s);
        let d = self.s[i + 1] - self.s[i];
        let u = (s - self.s[i]) / d;
        let (k0, k1, m0, m1) = (self.k[i], self.k[i + 1], m[i] * d, m[i + 1] * d);
        let (u2, u3) = (u * u, u * u * u);
        let value = (2.0 * u3 - 3.0 * u2 + 1.0) * k0
            + (u3 - 2.0 * u2 + u) * m0
            + (-2.0 * u3 + 3.0 * u2) * k1
            + (u3 - u2) * m1;
        let slope = ((6.0 * u2 - 6.0 * u) * k0
            + (3.0 * u2 - 4.0 * u + 1.0) * m0
            + (-6.0 * u2 + 6.0 * u) * k1
            + (3.0 * u2 - 2.0 * u) * m1)
            / d;
        (value, slope)
    }
}

fn lagrange_derivative(xs: &[f64], ys: &[f64], at: f64) -> f64 {
    let mut total = 0.0;
    for j in 0..3 {
        let mut denom = 1.0;
        for l in 0..3 {
            if l != j {
                denom *= xs[j] - xs[l];
            }
        }
        let mut numer = 0.0;
        for m in 0..3 {
            if m == j {
                continue;
            }
            let mut prod = 1.0;
            for l in 0..3 {
                if l != j && l != m {
                    prod *= at - xs[l];
                }
            }
            numer += prod;
        }
        total += ys[j] * numer / denom;
    }
    total
}

/// State of `traj` at time `t`, advancing by one partial step from the previous sample.
fn state_at(flow: &Flow, traj: &Trajectory, t: f64) -> Result<Vec<f64>, SemanticsError> {
    let i = traj.times.partition_point(|x| *x <= t).max(1) - 1;
    let dt = t - traj.times[i];
    if dt <= 0.0 {
        Ok(traj.states[i].clone())
    } else {
        flow.rk4(&traj.states[i], dt)
    }
}

fn reach_time(flow: &Flow, x0: &State, t: f64, step: f64, side: Side) -> Result<Trajectory, SemanticsError> {
    let traj = integrate_flow(flow, flow.initial(x0)?, step, t, None)?;
    if traj.terminated_by == Termination::DomainViolation && traj.final_time() < t - step * 1e-6 {
        return Err(SemanticsError::MismatchedEndpoints(format!(
            "{side} solution leaves its domain at t = {} before {t}",
            traj.final_time()
        )));
    }
    Ok(traj)
}

fn pole(time: f64) -> impl Fn(super::Pole) -> SemanticsError {
    move |_| SemanticsError::PoleEncountered { time }
}

fn exit_and_lie(flow: &Flow, d: &Dynamics, g: &Term, x0: &State) -> Result<(Expr, Expr), SemanticsError> {
    let rf = normalize(g)?.value;
    let lie = lie_derivative(&VectorField::of(d)?, &rf);
    Ok((flow.compile(g, x0)?, flow.compile(&lie.to_term(), x0)?))
}

/// Checks that `lie` keeps one strict sign along `traj` and returns it.
fn monotone_sign(lie: &Expr, traj: &Trajectory, side: Side, expected: Option<f64>) -> Result<f64, SemanticsError> {
    let mut sign = expected;
    for (t, x) in traj.times.iter().zip(&traj.states) {
        let v = lie.eval(x).map_err(pole(*t))?;
        let s = if v.abs() > 1e-12 { v.signum() } else { 0.0 };
        match sign {
            _ if s == 0.0 => return Err(SemanticsError::MonotonicityViolated { time: *t, side }),
            None => sign = Some(s),
            Some(prev) if prev != s => return Err(SemanticsError::MonotonicityViolated { time: *t, side }),
            _ => {}
        }
    }
    Ok(sign.unwrap_or(1.0))
}

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * (1.0 + a.abs().max(b.abs()))
}

/// Canonical stretch `k` matching exit values: `g♯(ψ♯(k(s))) = g(ψ(s))` on a grid
/// of `grid + 1` points over `[0, t]`, with `k(0) = 0` and `k(t) = ts`.
pub fn canonical_time_stretch(
    a: &RddFormula,
    x0: &State,
    x0s: &State,
    t: f64,
    ts: f64,
    grid: usize,
    step: f64,
) -> Result<TimeStretch, SemanticsError> {
    if grid < 2 || !(t > 0.0) || !(ts > 0.0) {
        return Err(SemanticsError::InvalidConfig(format!("grid {grid}, t {t}, t# {ts}")));
    }
    let (g, gs) = split_exit(a)?;
    let (fl, fr) = (Flow::new(a.left())?, Flow::new(a.right())?);
    let (g_expr, lie_l) = exit_and_lie(&fl, a.left(), &g, x0)?;
    let (gs_expr, lie_r) = exit_and_lie(&fr, a.right(), &gs, x0s)?;

    let left = reach_time(&fl, x0, t, step, Side::Left)?;
    let right = reach_time(&fr, x0s, ts, step, Side::Right)?;
    let (g0, gs0) = (g_expr.eval(&left.states[0]).map_err(pole(0.0))?, gs_expr.eval(&right.states[0]).map_err(pole(0.0))?);
    if !close(g0, gs0, 1e-9) {
        return Err(SemanticsError::MismatchedEndpoints(format!("initial exit values {g0} and {gs0}")));
    }
    let end_l = state_at(&fl, &left, t)?;
    let end_r = state_at(&fr, &right, ts)?;
    let (g1, gs1) = (g_expr.eval(&end_l).map_err(pole(t))?, gs_expr.eval(&end_r).map_err(pole(ts))?);
    if !close(g1, gs1, 1e-6) {
        return Err(SemanticsError::MismatchedEndpoints(format!("final exit values {g1} and {gs1}")));
    }
    let sign = monotone_sign(&lie_l, &left, Side::Left, None)?;
    monotone_sign(&lie_r, &right, Side::Right, Some(sign))?;

    let gs_series: Vec<f64> = right
        .states
        .iter()
        .zip(&right.times)
        .map(|(x, tt)| gs_expr.eval(x).map(|v| v * sign).map_err(pole(*tt)))
        .collect::<Result<_, _>>()?;
    let mut s = Vec::with_capacity(grid + 1);
    let mut k = Vec::with_capacity(grid + 1);
    for i in 0..=grid {
        let si = t * i as f64 / grid as f64;
        s.push(si);
        if i == 0 {
            k.push(0.0);
            continue;
        }
        if i == grid {
            k.push(ts);
            continue;
        }
        let target = g_expr.eval(&state_at(&fl, &left, si)?).map_err(pole(si))? * sign;
        // Increasing series: first sample at or above the target.
        let j = gs_series.partition_point(|v| *v < target).clamp(1, right.len() - 1);
        let base = &right.states[j - 1];
        let width = right.times[j] - right.times[j - 1];
        let h = bisect(0.0, width, &mut |h| {
            Ok(gs_expr.eval(&fr.rk4(base, h)?).map_err(pole(right.times[j - 1] + h))? * sign - target)
        })?;
        k.push((right.times[j - 1] + h).clamp(0.0, ts));
    }
    Ok(TimeStretch { s, k })
}

/// Integrates `x' = f♯(x)·k̇(s)` from `x0s` and returns the largest deviation from
/// `ψ♯(k(s))` at the stretch nodes.
pub fn check_stretched_solution(
    d_sharp: &Dynamics,
    stretch: &TimeStretch,
    x0s: &State,
    step: f64,
) -> Result<f64, SemanticsError> {
    if !stretch.is_strictly_increasing() {
        return Err(SemanticsError::NonMonotoneSamples);
    }
    let flow = Flow::new(d_sharp)?;
    let m = stretch.node_derivatives();
    let mut y = flow.initial(x0s)?;
    let mut reference = y.clone();
    let mut worst = 0.0f64;
    for i in 0..stretch.s.len() - 1 {
        let (s0, s1) = (stretch.s[i], stretch.s[i + 1]);
        let n = ((s1 - s0) / step).ceil().max(1.0) as usize;
        let h = (s1 - s0) / n as f64;
        for j in 0..n {
            let start = s0 + j as f64 * h;
            y = flow.rk4_scaled(&y, h, &|r| stretch.hermite((start + r).min(s1), &m).1)?;
        }
        reference = flow.advance(&reference, stretch.k[i + 1] - stretch.k[i], step)?;
        for (a, b) in y.iter().zip(&reference) {
            worst = worst.max((a - b).abs());
        }
    }
    Ok(worst)
}

#[derive(Clone, Debug)]
pub struct SyncRun {
    pub trajectory: Trajectory,
    /// `|g - g♯|` at every sample.
    pub residual: Vec<f64>,
    pub max_residual: f64,
    pub max_abs_g: f64,
}

/// Runs the synchronized dynamics from a pair of states with matching exit values.
pub fn simulate_synchronized(
    a: &RddFormula,
    x0: &State,
    x0s: &State,
    step: f64,
    horizon: f64,
) -> Result<SyncRun, SemanticsError> {
    let sync = sync_vector_field(a)?;
    let mut init = x0.clone();
    init.extend(x0s.iter().map(|(k, v)| (k.clone(), *v)));
    let flow = Flow::new(&sync.dynamics)?;
    let g = flow.compile(&sync.g, &init)?;
    let gs = flow.compile(&sync.g_sharp, &init)?;
    let start = flow.initial(&init)?;
    let (g0, gs0) = (g.eval(&start).map_err(pole(0.0))?, gs.eval(&start).map_err(pole(0.0))?);
    if !close(g0, gs0, 1e-9) {
        return Err(SemanticsError::MismatchedEndpoints(format!("initial exit values {g0} and {gs0}")));
    }
    let trajectory = integrate_flow(&flow, start, step, horizon, None)?;
    let mut residual = Vec::with_capacity(trajectory.len());
    let mut max_abs_g = 0.0f64;
    for (t, x) in trajectory.times.iter().zip(&trajectory.states) {
        let (a, b) = (g.eval(x).map_err(pole(*t))?, gs.eval(x).map_err(pole(*t))?);
        residual.push((a - b).abs());
        max_abs_g = max_abs_g.max(a.abs());
    }
    let max_residual = residual.iter().copied().fold(0.0, f64::max);
    Ok(SyncRun { trajectory, residual, max_residual, max_abs_g })
}
