use std::collections::BTreeSet;
use std::fmt;

use num_rational::BigRational;
use num_traits::{One, Zero};

use super::poly::{gcd, Poly};
use super::AlgebraError;
use crate::syntax::Term;

/// Reduced quotient of polynomials with a monic denominator.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct RationalFunction {
    num: Poly,
    den: Poly,
}

impl RationalFunction {
    pub fn new(num: Poly, den: Poly) -> Result<RationalFunction, AlgebraError> {
        if den.is_zero() {
            return Err(AlgebraError::ZeroDenominator);
        }
        if num.is_zero() {
            return Ok(RationalFunction::zero());
        }
        let g = gcd(&num, &den);
        let (num, den) = if g.is_constant() {
            (num, den)
        } else {
            (num.div_exact(&g).expect("gcd divides"), den.div_exact(&g).expect("gcd divides"))
        };
        let lc = den.leading_coefficient().recip();
        Ok(RationalFunction { num: num.scale(&lc), den: den.scale(&lc) })
    }

    pub fn poly(p: Poly) -> RationalFunction {
        RationalFunction { num: p, den: Poly::one() }
    }

    pub fn zero() -> RationalFunction {
        RationalFunction::poly(Poly::zero())
    }

    pub fn one() -> RationalFunction {
        RationalFunction::poly(Poly::one())
    }

    pub fn constant(c: BigRational) -> RationalFunction {
        RationalFunction::poly(Poly::constant(c))
    }

    pub fn var(name: &str) -> RationalFunction {
        RationalFunction::poly(Poly::var(name))
    }

    pub fn numerator(&self) -> &Poly {
        &self.num
    }

    pub fn denominator(&self) -> &Poly {
        &self.den
    }

    pub fn is_zero(&self) -> bool {
        self.num.is_zero()
    }

    pub fn is_polynomial(&self) -> bool {
        self.den.is_constant()
    }

    pub fn as_constant(&self) -> Option<BigRational> {
        if self.den.is_constant() {
            self.num.as_constant()
        } else {
            None
        }
    }

    pub fn variables(&self) -> BTreeSet<String> {
        let mut v = self.num.variables();
        v.extend(self.den.variables());
        v
    }

    /// Henrici addition: with both operands reduced only gcd(num, gcd(b, d)) can cancel.
    pub fn add(&self, other: &RationalFunction) -> RationalFunction {
        if self.is_zero() {
            return other.clone();
        }
        if other.is_zero() {
            return self.clone();
        }
        let g = gcd(&self.den, &other.den);
        let (b1, d1) = if g.is_constant() {
            (self.den.clone(), other.den.clone())
        } else {
            (self.den.div_exact(&g).expect("gcd divides"), other.den.div_exact(&g).expect("gcd divides"))
        };
        let num = self.num.mul(&d1).add(&other.num.mul(&b1));
        let den = self.den.mul(&d1);
        if g.is_constant() {
            return RationalFunction::from_coprime(num, den);
        }
        RationalFunction::new(num, den).expect("nonzero")
    }

    /// Skips the gcd when the caller guarantees the parts are coprime.
    fn from_coprime(num: Poly, den: Poly) -> RationalFunction {
        if num.is_zero() {
            return RationalFunction::zero();
        }
        let lc = den.leading_coefficient().recip();
        RationalFunction { num: num.scale(&lc), den: den.scale(&lc) }
    }

    pub fn neg(&self) -> RationalFunction {
        RationalFunction { num: self.num.neg(), den: self.den.clone() }
    }

    pub fn sub(&self, other: &RationalFunction) -> RationalFunction {
        self.add(&other.neg())
    }

    /// Henrici multiplication: cancel across the diagonals only.
    pub fn mul(&self, other: &RationalFunction) -> RationalFunction {
        if self.is_zero() || other.is_zero() {
            return RationalFunction::zero();
        }
        let cancel = |n: &Poly, d: &Poly| {
            let g = gcd(n, d);
            if g.is_constant() {
                (n.clone(), d.clone())
            } else {
                (n.div_exact(&g).expect("gcd divides"), d.div_exact(&g).expect("gcd divides"))
            }
        };
        let (a, d) = cancel(&self.num, &other.den);
        let (c, b) = cancel(&other.num, &self.den);
        RationalFunction::from_coprime(a.mul(&c), b.mul(&d))
    }

    pub fn scale(&self, k: &BigRational) -> RationalFunction {
        RationalFunction::from_coprime(self.num.scale(k), self.den.clone())
    }

    pub fn div(&self, other: &RationalFunction) -> Result<RationalFunction, AlgebraError> {
        RationalFunction::new(self.num.mul(&other.den), self.den.mul(&other.num))
    }

    pub fn pow(&self, n: u32) -> RationalFunction {
        RationalFunction { num: self.num.pow(n), den: self.den.pow(n) }
    }

    pub fn partial_derivative(&self, var: &str) -> RationalFunction {
        let dn = self.num.derivative(var);
        let dd = self.den.derivative(var);
        if dd.is_zero() {
            return RationalFunction::new(dn, self.den.clone()).expect("nonzero");
        }
        RationalFunction::new(dn.mul(&self.den).sub(&self.num.mul(&dd)), self.den.pow(2))
            .expect("nonzero")
    }

    pub fn substitute(&self, var: &str, by: &RationalFunction) -> Result<RationalFunction, AlgebraError> {
        let sub = |p: &Poly| -> RationalFunction {
            let mut acc = RationalFunction::zero();
            for (m, c) in p.terms() {
                let e = m.exponent(var);
                let rest = RationalFunction::poly(Poly::monomial(m.without(var), c.clone()));
                acc = acc.add(&rest.mul(&by.pow(e)));
            }
            acc
        };
        sub(&self.num).div(&sub(&self.den))
    }

    pub fn eval_exact(&self, env: &dyn Fn(&str) -> Option<BigRational>) -> Option<BigRational> {
        let d = self.den.eval_exact(env)?;
        if d.is_zero() {
            return None;
        }
        Some(self.num.eval_exact(env)? / d)
    }

    /// Errors when the denominator magnitude is below `pole_tol`.
    pub fn eval_f64(&self, env: &dyn Fn(&str) -> f64, pole_tol: f64) -> Result<f64, f64> {
        let d = self.den.eval_f64(env);
        if d.abs() < pole_tol || !d.is_finite() {
            return Err(d);
        }
        Ok(self.num.eval_f64(env) / d)
    }

    pub fn to_term(&self) -> Term {
        if self.den.as_constant().is_some_and(|c| c.is_one()) {
            self.num.to_term()
        } else {
            Term::div(self.num.to_term(), self.den.to_term())
        }
    }
}

impl fmt::Display for RationalFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.to_term())
    }
}

/// A rational function together with the divisors that must be nonzero for it to
/// agree with the term it was built from.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Normalized {
    pub value: RationalFunction,
    pub side_conditions: Vec<Poly>,
}

pub fn normalize(t: &Term) -> Result<Normalized, AlgebraError> {
    let mut side = Vec::new();
    let value = normalize_into(t, &mut side)?;
    Ok(Normalized { value, side_conditions: side })
}

/// Normalization discarding side conditions.
pub fn to_rf(t: &Term) -> Result<RationalFunction, AlgebraError> {
    normalize(t).map(|n| n.value)
}

fn normalize_into(t: &Term, side: &mut Vec<Poly>) -> Result<RationalFunction, AlgebraError> {
    Ok(match t {
        Term::Var(v) => RationalFunction::var(v),
        Term::Const(c) => RationalFunction::constant(c.clone()),
        Term::Neg(a) => normalize_into(a, side)?.neg(),
        Term::Add(a, b) => normalize_into(a, side)?.add(&normalize_into(b, side)?),
        Term::Sub(a, b) => normalize_into(a, side)?.sub(&normalize_into(b, side)?),
        Term::Mul(a, b) => normalize_into(a, side)?.mul(&normalize_into(b, side)?),
        Term::Div(a, b) => {
            let (n, d) = (normalize_into(a, side)?, normalize_into(b, side)?);
            record_nonzero(side, d.numerator());
            n.div(&d)?
        }
        Term::Pow(a, k) => normalize_into(a, side)?.pow(*k),
    })
}

fn record_nonzero(side: &mut Vec<Poly>, p: &Poly) {
    if p.is_constant() {
        return;
    }
    let p = p.monic();
    if !side.contains(&p) {
        side.push(p);
    }
}

/// Semantic equality of two terms as rational functions.
pub fn terms_equal(a: &Term, b: &Term) -> bool {
    match (to_rf(a), to_rf(b)) {
        (Ok(x), Ok(y)) => x == y,
        _ => false,
    }
}
