//! Numeric semantics: RK4 trajectories, time stretches, synchronized runs and a
//! sampling falsifier. Everything here is an oracle for testing, never a proof.

mod eval;
mod falsify;
mod ode;
mod region;
mod stretch;

use std::collections::BTreeMap;

pub use eval::{
    cmp_robustness, eval_term, flatten, holds, margin, robustness, state_of, Expr, Pole, Pred, Slot,
    POLE_TOLERANCE,
};
pub use falsify::{
    check_simulation_numeric, eval_formula, falsify, falsify_rdd, Counterexample, FalsifyOutcome,
    SimViolation, SimViolationKind, SimulationReport,
};
pub use ode::{
    bisect, integrate, integrate_flow, solve_exit, Flow, Termination, Trajectory, BISECTION_RESIDUAL,
    DOMAIN_SLACK,
};
pub use region::{Region, SampleBox};
pub use stretch::{
    canonical_time_stretch, check_stretched_solution, simulate_synchronized, Side, SyncRun, TimeStretch,
};

use crate::algebra::AlgebraError;

pub type State = BTreeMap<String, f64>;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Numerics {
    pub step: f64,
    pub horizon: f64,
    /// Robustness slack below which a formula counts as violated.
    pub tolerance: f64,
    /// Samples per trajectory when enumerating reachable states.
    pub grid: usize,
}

impl Default for Numerics {
    fn default() -> Self {
        Numerics { step: 1e-4, horizon: 10.0, tolerance: 1e-6, grid: 64 }
    }
}

#[derive(Clone, Debug, PartialEq, thiserror::Error)]
pub enum SemanticsError {
    #[error("division by a vanishing denominator at t = {time}")]
    PoleEncountered { time: f64 },
    #[error("initial state violates the evolution domain")]
    DomainViolatedAtStart,
    #[error("exit term is not strictly monotone on the {side} trajectory near t = {time}")]
    MonotonicityViolated { time: f64, side: Side },
    #[error("exit values do not match: {0}")]
    MismatchedEndpoints(String),
    #[error("time-stretch samples are not strictly increasing")]
    NonMonotoneSamples,
    #[error("no sample in the box satisfies the initial region after {attempts} draws")]
    GammaUnsatisfiedInBox { attempts: usize },
    #[error("variable {0} has no value")]
    MissingVariable(String),
    #[error("formula is not first order: {0}")]
    NotFirstOrder(String),
    #[error("quantifiers are not supported by the numeric semantics")]
    Quantifier,
    #[error("invalid numeric configuration: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Algebra(#[from] AlgebraError),
}
