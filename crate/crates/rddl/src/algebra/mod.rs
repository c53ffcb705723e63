mod lie;
mod poly;
mod rf;

pub use lie::{
    compare_zero, dii_disjunction, lie_derivative, lie_derivative_n, split_exit, split_exit_parts,
    sync_vector_field, SyncField, VectorField,
};
pub use poly::{gcd, pseudo_remainder, Monomial, Poly};
pub use rf::{normalize, terms_equal, to_rf, Normalized, RationalFunction};

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
pub enum AlgebraError {
    #[error("denominator is identically zero")]
    ZeroDenominator,
    #[error("exit condition is not a single equality between the two sides: {0}")]
    ExitShape(String),
    #[error("Lie derivative of the right exit term {0} is identically zero")]
    DegenerateExit(String),
}

pub fn partial_derivative(t: &RationalFunction, x: &str) -> RationalFunction {
    t.partial_derivative(x)
}
