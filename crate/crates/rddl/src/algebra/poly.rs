use std::cmp::Ordering;
use std::collections::btree_map::Entry;
use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

use crate::syntax::Term;

/// Power product with variables sorted by name and positive exponents only.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Default)]
pub struct Monomial(Vec<(String, u32)>);

impl Monomial {
    pub fn one() -> Monomial {
        Monomial(Vec::new())
    }

    pub fn var(name: &str) -> Monomial {
        Monomial(vec![(name.to_string(), 1)])
    }

    pub fn from_powers(powers: impl IntoIterator<Item = (String, u32)>) -> Monomial {
        let mut map: BTreeMap<String, u32> = BTreeMap::new();
        for (v, e) in powers {
            *map.entry(v).or_default() += e;
        }
        Monomial(map.into_iter().filter(|(_, e)| *e > 0).collect())
    }

    pub fn powers(&self) -> &[(String, u32)] {
        &self.0
    }

    pub fn degree(&self) -> u32 {
        self.0.iter().map(|(_, e)| e).sum()
    }

    pub fn exponent(&self, var: &str) -> u32 {
        self.0.iter().find(|(v, _)| v == var).map_or(0, |(_, e)| *e)
    }

    pub fn is_one(&self) -> bool {
        self.0.is_empty()
    }

    pub fn mul(&self, other: &Monomial) -> Monomial {
        Monomial::from_powers(self.0.iter().chain(other.0.iter()).cloned())
    }

    /// `self / other` when `other` divides `self`.
    pub fn div(&self, other: &Monomial) -> Option<Monomial> {
        let mut out = Vec::new();
        for (v, e) in &self.0 {
            let d = other.exponent(v);
            if d > *e {
                return None;
            }
            if e - d > 0 {
                out.push((v.clone(), e - d));
            }
        }
        if other.0.iter().any(|(v, _)| self.exponent(v) == 0) {
            return None;
        }
        Some(Monomial(out))
    }

    pub fn without(&self, var: &str) -> Monomial {
        Monomial(self.0.iter().filter(|(v, _)| v != var).cloned().collect())
    }

    pub fn to_term(&self) -> Option<Term> {
        self.0
            .iter()
            .map(|(v, e)| if *e == 1 { Term::var(v) } else { Term::pow(Term::var(v), *e) })
            .reduce(Term::mul)
    }
}

/// Graded lexicographic; among equal degrees the alphabetically first name is the largest.
impl Ord for Monomial {
    fn cmp(&self, other: &Self) -> Ordering {
        self.degree().cmp(&other.degree()).then_with(|| {
            let (mut i, mut j) = (0, 0);
            while i < self.0.len() && j < other.0.len() {
                let (a, b) = (&self.0[i], &other.0[j]);
                match a.0.cmp(&b.0) {
                    Ordering::Less => return Ordering::Greater,
                    Ordering::Greater => return Ordering::Less,
                    Ordering::Equal => match a.1.cmp(&b.1) {
                        Ordering::Equal => {
                            i += 1;
                            j += 1;
                        }
                        o => return o,
                    },
                }
            }
            (self.0.len() - i).cmp(&(other.0.len() - j))
        })
    }
}

impl PartialOrd for Monomial {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Multivariate polynomial with exact rational coefficients; no zero coefficients are stored.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Default)]
pub struct Poly(BTreeMap<Monomial, BigRational>);

impl Poly {
    pub fn zero() -> Poly {
        Poly(BTreeMap::new())
    }

    pub fn one() -> Poly {
        Poly::constant(BigRational::one())
    }

    pub fn constant(c: BigRational) -> Poly {
        Poly::monomial(Monomial::one(), c)
    }

    pub fn int(n: i64) -> Poly {
        Poly::constant(BigRational::from_integer(n.into()))
    }

    pub fn var(name: &str) -> Poly {
        Poly::monomial(Monomial::var(name), BigRational::one())
    }

    pub fn monomial(m: Monomial, c: BigRational) -> Poly {
        let mut map = BTreeMap::new();
        if !c.is_zero() {
            map.insert(m, c);
        }
        Poly(map)
    }

    pub fn terms(&self) -> impl DoubleEndedIterator<Item = (&Monomial, &BigRational)> {
        self.0.iter()
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn is_zero(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_constant(&self) -> Option<BigRational> {
        match self.0.len() {
            0 => Some(BigRational::zero()),
            1 => self.0.get(&Monomial::one()).cloned(),
            _ => None,
        }
    }

    pub fn is_constant(&self) -> bool {
        self.as_constant().is_some()
    }

    pub fn leading(&self) -> Option<(&Monomial, &BigRational)> {
        self.0.iter().next_back()
    }

    pub fn leading_coefficient(&self) -> BigRational {
        self.leading().map_or_else(BigRational::zero, |(_, c)| c.clone())
    }

    pub fn coefficient(&self, m: &Monomial) -> BigRational {
        self.0.get(m).cloned().unwrap_or_else(BigRational::zero)
    }

    pub fn degree(&self) -> u32 {
        self.0.keys().map(Monomial::degree).max().unwrap_or(0)
    }

    pub fn variables(&self) -> BTreeSet<String> {
        self.0.keys().flat_map(|m| m.0.iter().map(|(v, _)| v.clone())).collect()
    }

    fn add_term(&mut self, m: Monomial, c: BigRational) {
        if c.is_zero() {
            return;
        }
        match self.0.entry(m) {
            Entry::Occupied(mut e) => {
                *e.get_mut() += c;
                if e.get().is_zero() {
                    e.remove();
                }
            }
            Entry::Vacant(e) => {
                e.insert(c);
            }
        }
    }

    pub fn add(&self, other: &Poly) -> Poly {
        let mut out = self.clone();
        for (m, c) in &other.0 {
            out.add_term(m.clone(), c.clone());
        }
        out
    }

    pub fn sub(&self, other: &Poly) -> Poly {
        self.add(&other.neg())
    }

    pub fn neg(&self) -> Poly {
        Poly(self.0.iter().map(|(m, c)| (m.clone(), -c)).collect())
    }

    pub fn scale(&self, k: &BigRational) -> Poly {
        if k.is_zero() {
            return Poly::zero();
        }
        Poly(self.0.iter().map(|(m, c)| (m.clone(), c * k)).collect())
    }

    pub fn mul(&self, other: &Poly) -> Poly {
        let mut acc: BTreeMap<Monomial, BigRational> = BTreeMap::new();
        for (m1, c1) in &self.0 {
            for (m2, c2) in &other.0 {
                *acc.entry(m1.mul(m2)).or_insert_with(BigRational::zero) += c1 * c2;
            }
        }
        acc.retain(|_, c| !c.is_zero());
        Poly(acc)
    }

    pub fn pow(&self, n: u32) -> Poly {
        let mut out = Poly::one();
        for _ in 0..n {
            out = out.mul(self);
        }
        out
    }

    /// Scales so that the leading coefficient is 1 (zero stays zero).
    pub fn monic(&self) -> Poly {
        match self.leading() {
            Some((_, c)) => self.scale(&c.recip()),
            None => Poly::zero(),
        }
    }

    /// Integer coefficients with no common factor and a positive leading coefficient.
    pub fn integer_primitive(&self) -> Poly {
        let Some((_, lc)) = self.leading() else {
            return Poly::zero();
        };
        let mut den = BigInt::one();
        let mut num = BigInt::zero();
        for c in self.0.values() {
            den = den.lcm(c.denom());
            num = num.gcd(c.numer());
        }
        let mut k = BigRational::new(den, num);
        if lc.is_negative() {
            k = -k;
        }
        self.scale(&k)
    }

    pub fn derivative(&self, var: &str) -> Poly {
        let mut out = Poly::zero();
        for (m, c) in &self.0 {
            let e = m.exponent(var);
            if e == 0 {
                continue;
            }
            let powers = m.0.iter().map(|(v, k)| (v.clone(), if v == var { k - 1 } else { *k }));
            out.add_term(Monomial::from_powers(powers), c * BigRational::from_integer(e.into()));
        }
        out
    }

    pub fn degree_in(&self, var: &str) -> u32 {
        self.0.keys().map(|m| m.exponent(var)).max().unwrap_or(0)
    }

    /// Coefficients of `self` viewed as a univariate polynomial in `var`, indexed by power.
    pub fn coefficients_in(&self, var: &str) -> Vec<Poly> {
        let mut out = vec![Poly::zero(); self.degree_in(var) as usize + 1];
        for (m, c) in &self.0 {
            out[m.exponent(var) as usize].add_term(m.without(var), c.clone());
        }
        out
    }

    pub fn from_coefficients(var: &str, coeffs: &[Poly]) -> Poly {
        let mut out = Poly::zero();
        for (k, c) in coeffs.iter().enumerate() {
            out = out.add(&c.mul(&Poly::var(var).pow(k as u32)));
        }
        out
    }

    pub fn substitute(&self, var: &str, by: &Poly) -> Poly {
        let mut out = Poly::zero();
        for (m, c) in &self.0 {
            let e = m.exponent(var);
            let rest = Poly::monomial(m.without(var), c.clone());
            out = out.add(&rest.mul(&by.pow(e)));
        }
        out
    }

    /// Multivariate division that succeeds only when `divisor` divides `self` exactly.
    pub fn div_exact(&self, divisor: &Poly) -> Option<Poly> {
        let (lm, lc) = divisor.leading()?;
        let mut rem = self.clone();
        let mut quot = Poly::zero();
        while let Some((m, c)) = rem.leading() {
            let qm = m.div(lm)?;
            let qc = c / lc;
            for (dm, dc) in &divisor.0 {
                rem.add_term(dm.mul(&qm), -(dc * &qc));
            }
            quot.add_term(qm, qc);
        }
        Some(quot)
    }

    pub fn eval_exact(&self, env: &dyn Fn(&str) -> Option<BigRational>) -> Option<BigRational> {
        let mut total = BigRational::zero();
        for (m, c) in &self.0 {
            let mut t = c.clone();
            for (v, e) in &m.0 {
                t *= num_traits::pow(env(v)?, *e as usize);
            }
            total += t;
        }
        Some(total)
    }

    pub fn eval_f64(&self, env: &dyn Fn(&str) -> f64) -> f64 {
        self.0
            .iter()
            .map(|(m, c)| {
                let coeff = c.to_f64().unwrap_or(f64::NAN);
                m.0.iter().fold(coeff, |acc, (v, e)| acc * env(v).powi(*e as i32))
            })
            .sum()
    }

    /// Leading term first; a leading negative coefficient becomes a unary minus.
    pub fn to_term(&self) -> Term {
        let mut out: Option<Term> = None;
        for (m, c) in self.0.iter().rev() {
            let mag = c.abs();
            let leading_negative = out.is_none() && c.is_negative();
            let mut factors: Vec<Term> = Vec::new();
            if !mag.is_one() || m.is_one() {
                factors.push(Term::from_rational(mag));
            }
            factors.extend(m.powers().iter().map(|(v, e)| {
                if *e == 1 { Term::var(v) } else { Term::pow(Term::var(v), *e) }
            }));
            if leading_negative {
                factors[0] = Term::neg(factors[0].clone());
            }
            let unit = factors.into_iter().reduce(Term::mul).expect("nonempty");
            out = Some(match out {
                None => unit,
                Some(acc) if c.is_negative() => Term::sub(acc, unit),
                Some(acc) => Term::add(acc, unit),
            });
        }
        out.unwrap_or_else(Term::zero)
    }
}

impl fmt::Display for Poly {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.to_term())
    }
}

/// Greatest common divisor up to a rational unit, returned monic; gcd(0, 0) = 0.
pub fn gcd(a: &Poly, b: &Poly) -> Poly {
    if a.is_zero() {
        return b.monic();
    }
    if b.is_zero() {
        return a.monic();
    }
    if a.is_constant() || b.is_constant() {
        return Poly::one();
    }
    if a.len() == 1 || b.len() == 1 {
        return monomial_gcd(a, b);
    }
    if a.len() <= b.len() && b.div_exact(a).is_some() {
        return a.monic();
    }
    if b.len() < a.len() && a.div_exact(b).is_some() {
        return b.monic();
    }
    let mut vars = a.variables();
    vars.extend(b.variables());
    // If some variable provably does not occur in the gcd, the gcd divides every
    // coefficient with respect to that variable.
    if let Some(x) = vars.iter().find(|x| gcd_free_of(a, b, x)) {
        let mut g = Poly::zero();
        for c in a.coefficients_in(x).into_iter().chain(b.coefficients_in(x)) {
            if c.is_zero() {
                continue;
            }
            g = gcd(&g, &c);
            if g.is_constant() {
                return Poly::one();
            }
        }
        return g.monic();
    }
    let x = vars.iter().next_back().cloned().expect("nonconstant");
    let (ca, pa) = content_split(a, &x);
    let (cb, pb) = content_split(b, &x);
    let c = gcd(&ca, &cb);
    let g = primitive_prs(pa, pb, &x);
    c.mul(&g).monic()
}

/// Sound test that gcd(a, b) has degree 0 in `x`: specialise the other variables at an
/// integer point keeping the leading coefficient of `a` nonzero; the gcd's image there
/// keeps its degree in `x`, so a constant univariate gcd proves the claim.
fn gcd_free_of(a: &Poly, b: &Poly, x: &str) -> bool {
    if a.degree_in(x) == 0 || b.degree_in(x) == 0 {
        return true;
    }
    let others: Vec<String> = a.variables().union(&b.variables()).filter(|v| *v != x).cloned().collect();
    let lca = a.coefficients_in(x).pop().expect("nonempty");
    for attempt in 0..3i64 {
        let point: Vec<(String, BigRational)> = others
            .iter()
            .enumerate()
            .map(|(i, v)| (v.clone(), BigRational::from_integer((3 + 7 * i as i64 + 11 * attempt).into())))
            .collect();
        let env = |v: &str| point.iter().find(|(n, _)| n == v).map(|(_, q)| q.clone());
        if lca.eval_exact(&env).is_none_or(|c| c.is_zero()) {
            continue;
        }
        let ua = univariate_image(a, x, &env);
        let ub = univariate_image(b, x, &env);
        return univariate_gcd(ua, ub).len() == 1;
    }
    false
}

/// Coefficients (low to high) after specialising every variable except `x`.
fn univariate_image(p: &Poly, x: &str, env: &dyn Fn(&str) -> Option<BigRational>) -> Vec<BigRational> {
    let mut out: Vec<BigRational> = p
        .coefficients_in(x)
        .iter()
        .map(|c| c.eval_exact(env).expect("all variables bound"))
        .collect();
    while out.last().is_some_and(|c| c.is_zero()) {
        out.pop();
    }
    out
}

fn univariate_gcd(mut a: Vec<BigRational>, mut b: Vec<BigRational>) -> Vec<BigRational> {
    while !b.is_empty() {
        let lb = b.last().expect("nonempty").clone();
        while a.len() >= b.len() {
            let k = a.last().expect("nonempty") / &lb;
            let shift = a.len() - b.len();
            for (i, c) in b.iter().enumerate() {
                a[i + shift] -= &k * c;
            }
            a.pop();
            while a.last().is_some_and(|c| c.is_zero()) {
                a.pop();
            }
        }
        std::mem::swap(&mut a, &mut b);
    }
    a
}

/// Largest monomial dividing every term of both polynomials.
fn monomial_gcd(a: &Poly, b: &Poly) -> Poly {
    let mut common: Option<Vec<(String, u32)>> = None;
    for (m, _) in a.terms().chain(b.terms()) {
        common = Some(match common {
            None => m.powers().to_vec(),
            Some(c) => c
                .into_iter()
                .filter_map(|(v, e)| {
                    let k = e.min(m.exponent(&v));
                    (k > 0).then_some((v, k))
                })
                .collect(),
        });
    }
    Poly::monomial(Monomial::from_powers(common.unwrap_or_default()), BigRational::one())
}

/// Content with respect to `x` (a polynomial free of `x`) and the primitive part.
fn content_split(a: &Poly, x: &str) -> (Poly, Poly) {
    let mut content = Poly::zero();
    for c in a.coefficients_in(x) {
        if c.is_zero() {
            continue;
        }
        content = gcd(&content, &c);
        if content.is_constant() {
            break;
        }
    }
    if content.is_constant() {
        return (Poly::one(), a.integer_primitive());
    }
    let pp = a.div_exact(&content).expect("content divides");
    (content, pp.integer_primitive())
}

fn primitive_prs(mut a: Poly, mut b: Poly, x: &str) -> Poly {
    if a.degree_in(x) < b.degree_in(x) {
        std::mem::swap(&mut a, &mut b);
    }
    while !b.is_zero() {
        if b.degree_in(x) == 0 {
            // b is free of x and primitive, hence a unit.
            return Poly::one();
        }
        let r = pseudo_remainder(&a, &b, x);
        a = b;
        b = if r.is_zero() { r } else { content_split(&r, x).1 };
    }
    a.monic()
}

pub fn pseudo_remainder(a: &Poly, b: &Poly, x: &str) -> Poly {
    let db = b.degree_in(x);
    let lcb = b.coefficients_in(x).pop().expect("nonempty");
    let mut r = a.clone();
    while !r.is_zero() && r.degree_in(x) >= db {
        let dr = r.degree_in(x);
        let lcr = r.coefficients_in(x).pop().expect("nonempty");
        let shift = Poly::var(x).pow(dr - db);
        r = r.mul(&lcb).sub(&lcr.mul(&shift).mul(b));
    }
    r
}
