use num_rational::BigRational;
use num_traits::{One, Signed, Zero};

type Q = BigRational;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Rel {
    Eq,
    Ge,
    Gt,
}

/// `Σ coeffs[j]·y_j + constant (rel) 0` over free real variables `y`.
#[derive(Clone, Debug)]
pub struct LinRow {
    pub coeffs: Vec<(usize, Q)>,
    pub constant: Q,
    pub rel: Rel,
}

/// Dense tableau for `max c·x` subject to `A x + s = b`, `x, s ≥ 0`.
struct Tableau {
    rows: Vec<Vec<Q>>,
    rhs: Vec<Q>,
    basis: Vec<usize>,
    cols: usize,
}

impl Tableau {
    fn pivot(&mut self, r: usize, c: usize, obj: &mut [Q], value: &mut Q) {
        let p = self.rows[r][c].clone();
        for x in self.rows[r].iter_mut() {
            *x /= &p;
        }
        self.rhs[r] /= &p;
        let (prow, prhs) = (self.rows[r].clone(), self.rhs[r].clone());
        for i in 0..self.rows.len() {
            if i == r || self.rows[i][c].is_zero() {
                continue;
            }
            let f = self.rows[i][c].clone();
            for (x, y) in self.rows[i].iter_mut().zip(&prow) {
                if !y.is_zero() {
                    *x -= &f * y;
                }
            }
            self.rhs[i] -= &f * &prhs;
        }
        if !obj[c].is_zero() {
            let f = obj[c].clone();
            for (x, y) in obj.iter_mut().zip(&prow) {
                if !y.is_zero() {
                    *x -= &f * y;
                }
            }
            *value += &f * &prhs;
        }
        self.basis[r] = c;
    }

    /// Bland's rule; `obj[j]` is the reduced gain of raising nonbasic `x_j`.
    /// Returns false when unbounded.
    fn optimize(&mut self, obj: &mut [Q], value: &mut Q, banned: Option<usize>) -> bool {
        loop {
            let Some(c) = (0..self.cols).find(|&j| Some(j) != banned && obj[j].is_positive()) else {
                return true;
            };
            let mut best: Option<(usize, Q)> = None;
            for r in 0..self.rows.len() {
                if self.rows[r][c].is_positive() {
                    let ratio = &self.rhs[r] / &self.rows[r][c];
                    let better = match &best {
                        None => true,
                        Some((br, bq)) => ratio < *bq || (ratio == *bq && self.basis[r] < self.basis[*br]),
                    };
                    if better {
                        best = Some((r, ratio));
                    }
                }
            }
            let Some((r, _)) = best else { return false };
            self.pivot(r, c, obj, value);
        }
    }
}

/// Maximum of `objective·x` over `A x ≤ b, x ≥ 0`: `None` if infeasible,
/// `Some(None)` if unbounded.
pub fn maximize(a: &[Vec<Q>], b: &[Q], objective: &[Q]) -> Option<Option<Q>> {
    let m = a.len();
    let n = objective.len();
    // Columns: original, slacks, auxiliary.
    let aux = n + m;
    let cols = n + m + 1;
    let mut rows = Vec::with_capacity(m);
    for (i, row) in a.iter().enumerate() {
        let mut full = vec![Q::zero(); cols];
        full[..n].clone_from_slice(row);
        full[n + i] = Q::one();
        full[aux] = -Q::one();
        rows.push(full);
    }
    let mut t = Tableau { rows, rhs: b.to_vec(), basis: (n..n + m).collect(), cols };
    // Phase 1: maximize -aux.
    let mut obj = vec![Q::zero(); cols];
    obj[aux] = -Q::one();
    let mut value = Q::zero();
    if let Some(r) = (0..m).filter(|&r| t.rhs[r].is_negative()).min_by(|&x, &y| t.rhs[x].cmp(&t.rhs[y])) {
        t.pivot(r, aux, &mut obj, &mut value);
        t.optimize(&mut obj, &mut value, None);
        let aux_value = t.basis.iter().position(|&bv| bv == aux).map(|r| t.rhs[r].clone()).unwrap_or_else(Q::zero);
        if aux_value.is_positive() {
            return None;
        }
        if let Some(r) = t.basis.iter().position(|&bv| bv == aux) {
            if let Some(c) = (0..cols).find(|&j| j != aux && !t.rows[r][j].is_zero()) {
                let mut dummy = vec![Q::zero(); cols];
                let mut dv = Q::zero();
                t.pivot(r, c, &mut dummy, &mut dv);
            }
        }
    }
    for row in t.rows.iter_mut() {
        row[aux] = Q::zero();
    }
    // Phase 2: reduced gains for the real objective under the current basis.
    let mut cost = vec![Q::zero(); cols];
    cost[..n].clone_from_slice(objective);
    let mut obj = cost.clone();
    let mut value = Q::zero();
    for r in 0..m {
        let cb = &cost[t.basis[r]];
        if cb.is_zero() {
            continue;
        }
        for j in 0..cols {
            if !t.rows[r][j].is_zero() {
                obj[j] -= cb * &t.rows[r][j];
            }
        }
        value += cb * &t.rhs[r];
    }
    if !t.optimize(&mut obj, &mut value, Some(aux)) {
        return Some(None);
    }
    Some(Some(value))
}

/// Whether the rows have no common real solution.
pub fn infeasible(rows: &[LinRow], nvars: usize) -> bool {
    let strict = rows.iter().any(|r| r.rel == Rel::Gt);
    // Variables: y+ (nvars), y- (nvars), then t+ and t- when strict rows exist.
    let width = 2 * nvars + if strict { 2 } else { 0 };
    let mut a = Vec::new();
    let mut b = Vec::new();
    let mut push = |coeffs: &[(usize, Q)], sign: i32, t: bool, rhs: Q| {
        let mut row = vec![Q::zero(); width];
        for (j, c) in coeffs {
            let c = if sign > 0 { c.clone() } else { -c.clone() };
            row[*j] += &c;
            row[nvars + *j] -= &c;
        }
        if t {
            row[2 * nvars] = Q::one();
            row[2 * nvars + 1] = -Q::one();
        }
        a.push(row);
        b.push(rhs);
    };
    for r in rows {
        match r.rel {
            // a·y + c ≥ 0  ⇔  -a·y ≤ c
            Rel::Ge => push(&r.coeffs, -1, false, r.constant.clone()),
            // a·y + c ≥ t  ⇔  -a·y + t ≤ c
            Rel::Gt => push(&r.coeffs, -1, true, r.constant.clone()),
            Rel::Eq => {
                push(&r.coeffs, 1, false, -r.constant.clone());
                push(&r.coeffs, -1, false, r.constant.clone());
            }
        }
    }
    let mut objective = vec![Q::zero(); width];
    if strict {
        let mut cap = vec![Q::zero(); width];
        cap[2 * nvars] = Q::one();
        cap[2 * nvars + 1] = -Q::one();
        a.push(cap);
        b.push(Q::one());
        objective[2 * nvars] = Q::one();
        objective[2 * nvars + 1] = -Q::one();
    }
    match maximize(&a, &b, &objective) {
        None => true,
        Some(Some(v)) => strict && !v.is_positive(),
        Some(None) => false,
    }
}
