use std::collections::BTreeSet;

use super::poly::Poly;
use super::rf::{normalize, RationalFunction};
use super::AlgebraError;
use crate::syntax::{CmpOp, Dynamics, Formula, RddFormula, Term};

/// Right-hand sides of an ODE system, in declaration order.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct VectorField {
    pub entries: Vec<(String, RationalFunction)>,
}

impl VectorField {
    /// Normalizes every right-hand side; divisors introduced along the way are returned.
    pub fn from_dynamics(d: &Dynamics) -> Result<(VectorField, Vec<Poly>), AlgebraError> {
        let mut entries = Vec::new();
        let mut side = Vec::new();
        for (v, t) in &d.odes {
            let n = normalize(t)?;
            for p in n.side_conditions {
                if !side.contains(&p) {
                    side.push(p);
                }
            }
            entries.push((v.clone(), n.value));
        }
        Ok((VectorField { entries }, side))
    }

    pub fn of(d: &Dynamics) -> Result<VectorField, AlgebraError> {
        VectorField::from_dynamics(d).map(|(f, _)| f)
    }

    pub fn get(&self, var: &str) -> Option<&RationalFunction> {
        self.entries.iter().find(|(v, _)| v == var).map(|(_, r)| r)
    }

    pub fn variables(&self) -> BTreeSet<String> {
        self.entries.iter().map(|(v, _)| v.clone()).collect()
    }
}

/// Σ_x ∂g/∂x · f(x); variables without an entry are constant along the flow.
pub fn lie_derivative(f: &VectorField, g: &RationalFunction) -> RationalFunction {
    let mut acc = RationalFunction::zero();
    for (v, rhs) in &f.entries {
        let d = g.partial_derivative(v);
        if !d.is_zero() {
            acc = acc.add(&d.mul(rhs));
        }
    }
    acc
}

pub fn lie_derivative_n(f: &VectorField, g: &RationalFunction, n: u32) -> RationalFunction {
    let mut out = g.clone();
    for _ in 0..n {
        out = lie_derivative(f, &out);
    }
    out
}

/// `r ∼ 0`, folded to a literal when `r` is constant.
pub fn compare_zero(r: &RationalFunction, op: CmpOp) -> Formula {
    match r.as_constant() {
        Some(c) => {
            if op.holds(&c, &num_traits::Zero::zero()) {
                Formula::True
            } else {
                Formula::False
            }
        }
        None => Formula::cmp(r.to_term(), op, Term::zero()),
    }
}

/// Dₙ(g) = ⋁_{p<n} (⋀_{1≤k≤p} L⁽ᵏ⁾g ≥ 0) ∧ L⁽ᵖ⁺¹⁾g > 0.
pub fn dii_disjunction(f: &VectorField, g: &RationalFunction, n: u32) -> Formula {
    assert!(n >= 1, "DII order must be positive");
    let mut derivs = Vec::with_capacity(n as usize);
    let mut cur = g.clone();
    for _ in 0..n {
        cur = lie_derivative(f, &cur);
        derivs.push(cur.clone());
    }
    let mut disjunction = Formula::False;
    for p in 0..n as usize {
        let mut parts: Vec<Formula> =
            derivs[..p].iter().map(|l| compare_zero(l, CmpOp::Ge)).collect();
        parts.push(compare_zero(&derivs[p], CmpOp::Gt));
        let disjunct = Formula::and(parts);
        disjunction = if p == 0 { disjunct } else { Formula::or(disjunction, disjunct) };
    }
    disjunction
}

/// The two sides of an equational exit `g(x̄) = g♯(x̄♯)`, oriented left then right.
pub fn split_exit(a: &RddFormula) -> Result<(Term, Term), AlgebraError> {
    split_exit_parts(&a.left().bound_variables(), &a.right().bound_variables(), a.exit())
}

pub fn split_exit_parts(
    left_bound: &BTreeSet<String>,
    right_bound: &BTreeSet<String>,
    exit: &Formula,
) -> Result<(Term, Term), AlgebraError> {
    let Formula::Cmp(l, CmpOp::Eq, r) = exit else {
        return Err(AlgebraError::ExitShape(exit.to_string()));
    };
    let fits = |g: &Term, gs: &Term| {
        g.free_variables().is_disjoint(right_bound) && gs.free_variables().is_disjoint(left_bound)
    };
    if fits(l, r) {
        Ok((l.clone(), r.clone()))
    } else if fits(r, l) {
        Ok((r.clone(), l.clone()))
    } else {
        Err(AlgebraError::ExitShape(exit.to_string()))
    }
}

/// Synchronized dynamics δ_A together with the exit Lie derivatives it was built from.
#[derive(Clone, Debug)]
pub struct SyncField {
    pub dynamics: Dynamics,
    /// L_f g and L_{f♯} g♯.
    pub lie_left: RationalFunction,
    pub lie_right: RationalFunction,
    pub g: Term,
    pub g_sharp: Term,
    pub side_conditions: Vec<Poly>,
}

impl SyncField {
    /// L_f g / L_{f♯} g♯ as a term.
    pub fn ratio_term(&self) -> Term {
        Term::div(self.lie_left.to_term(), self.lie_right.to_term())
    }
}

pub fn sync_vector_field(a: &RddFormula) -> Result<SyncField, AlgebraError> {
    let (g, gs) = split_exit(a)?;
    let (f, mut side) = VectorField::from_dynamics(a.left())?;
    let (fs, side_s) = VectorField::from_dynamics(a.right())?;
    let gn = normalize(&g)?;
    let gsn = normalize(&gs)?;
    for p in side_s.into_iter().chain(gn.side_conditions).chain(gsn.side_conditions) {
        if !side.contains(&p) {
            side.push(p);
        }
    }
    let lie_left = lie_derivative(&f, &gn.value);
    let lie_right = lie_derivative(&fs, &gsn.value);
    if lie_right.is_zero() {
        return Err(AlgebraError::DegenerateExit(gs.to_string()));
    }
    for p in [lie_left.denominator(), lie_right.denominator(), lie_right.numerator()] {
        if !p.is_constant() && !side.contains(&p.monic()) {
            side.push(p.monic());
        }
    }
    let ratio = Term::div(lie_left.to_term(), lie_right.to_term());
    let mut odes = a.left().odes.clone();
    for (v, t) in &a.right().odes {
        odes.push((v.clone(), Term::mul(t.clone(), ratio.clone())));
    }
    let constraint = Formula::and2(a.left().constraint.clone(), a.right().constraint.clone());
    Ok(SyncField {
        dynamics: Dynamics::new(odes, constraint),
        lie_left,
        lie_right,
        g,
        g_sharp: gs,
        side_conditions: side,
    })
}
