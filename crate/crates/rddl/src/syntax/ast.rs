use std::collections::BTreeSet;

use num_rational::BigRational;
use num_traits::{Signed, Zero};

/// Real-valued term over named variables. Names ending in `#` are sharp variables.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum Term {
    Var(String),
    /// Always nonnegative when produced by the parser or by `from_*` helpers.
    Const(BigRational),
    Neg(Box<Term>),
    Add(Box<Term>, Box<Term>),
    Sub(Box<Term>, Box<Term>),
    Mul(Box<Term>, Box<Term>),
    Div(Box<Term>, Box<Term>),
    Pow(Box<Term>, u32),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum CmpOp {
    Eq,
    Le,
    Lt,
    Ge,
    Gt,
}

impl CmpOp {
    pub fn symbol(self) -> &'static str {
        match self {
            CmpOp::Eq => "=",
            CmpOp::Le => "<=",
            CmpOp::Lt => "<",
            CmpOp::Ge => ">=",
            CmpOp::Gt => ">",
        }
    }

    /// The operator obtained by swapping the operands.
    pub fn mirror(self) -> CmpOp {
        match self {
            CmpOp::Eq => CmpOp::Eq,
            CmpOp::Le => CmpOp::Ge,
            CmpOp::Lt => CmpOp::Gt,
            CmpOp::Ge => CmpOp::Le,
            CmpOp::Gt => CmpOp::Lt,
        }
    }

    /// Complement, if expressible as a single comparison (`=` is not).
    pub fn negate(self) -> Option<CmpOp> {
        match self {
            CmpOp::Eq => None,
            CmpOp::Le => Some(CmpOp::Gt),
            CmpOp::Lt => Some(CmpOp::Ge),
            CmpOp::Ge => Some(CmpOp::Lt),
            CmpOp::Gt => Some(CmpOp::Le),
        }
    }

    pub fn holds<T: PartialOrd>(self, a: &T, b: &T) -> bool {
        match self {
            CmpOp::Eq => a == b,
            CmpOp::Le => a <= b,
            CmpOp::Lt => a < b,
            CmpOp::Ge => a >= b,
            CmpOp::Gt => a > b,
        }
    }
}

/// dL formula in the normal form used by every consumer: `Or` and `Implies`
/// only exist as constructors, `And` is flat, and `Not` never wraps a
/// non-equality comparison, a literal or another `Not`.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum Formula {
    True,
    False,
    Cmp(Term, CmpOp, Term),
    Not(Box<Formula>),
    And(Vec<Formula>),
    Forall(String, Box<Formula>),
    Box(Box<Program>, Box<Formula>),
    Diamond(Box<Program>, Box<Formula>),
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum Program {
    Test(Formula),
    Dyn(Dynamics),
    /// Flat, at least two components.
    Seq(Vec<Program>),
    Choice(Box<Program>, Box<Program>),
}

/// `{x' = f(x) & Q}`. Variables without an ODE are parameters with derivative 0.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Dynamics {
    pub odes: Vec<(String, Term)>,
    pub constraint: Formula,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RddFormula {
    left: Dynamics,
    right: Dynamics,
    exit: Formula,
    post: Formula,
}

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
#[error("variables shared across the two sides of an RDD formula: {}", shared.join(", "))]
pub struct DisjointnessError {
    pub shared: Vec<String>,
}

impl Term {
    pub fn var(name: &str) -> Term {
        Term::Var(name.to_string())
    }

    pub fn int(n: i64) -> Term {
        Term::from_rational(BigRational::from_integer(n.into()))
    }

    /// Builds a constant, wrapping negative values in `Neg` so that printed
    /// terms re-parse to the same tree.
    pub fn from_rational(q: BigRational) -> Term {
        if q.is_negative() {
            Term::Neg(Box::new(Term::Const(-q)))
        } else {
            Term::Const(q)
        }
    }

    pub fn zero() -> Term {
        Term::Const(BigRational::zero())
    }

    pub fn add(a: Term, b: Term) -> Term {
        Term::Add(Box::new(a), Box::new(b))
    }

    pub fn sub(a: Term, b: Term) -> Term {
        Term::Sub(Box::new(a), Box::new(b))
    }

    pub fn mul(a: Term, b: Term) -> Term {
        Term::Mul(Box::new(a), Box::new(b))
    }

    pub fn div(a: Term, b: Term) -> Term {
        Term::Div(Box::new(a), Box::new(b))
    }

    pub fn neg(a: Term) -> Term {
        Term::Neg(Box::new(a))
    }

    pub fn pow(a: Term, n: u32) -> Term {
        Term::Pow(Box::new(a), n)
    }

    pub fn free_variables(&self) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        self.collect_vars(&mut out);
        out
    }

    pub(crate) fn collect_vars(&self, out: &mut BTreeSet<String>) {
        match self {
            Term::Var(v) => {
                out.insert(v.clone());
            }
            Term::Const(_) => {}
            Term::Neg(a) | Term::Pow(a, _) => a.collect_vars(out),
            Term::Add(a, b) | Term::Sub(a, b) | Term::Mul(a, b) | Term::Div(a, b) => {
                a.collect_vars(out);
                b.collect_vars(out);
            }
        }
    }

    pub fn substitute(&self, var: &str, by: &Term) -> Term {
        self.map_vars(&|v| if v == var { Some(by.clone()) } else { None })
    }

    pub fn map_vars(&self, f: &dyn Fn(&str) -> Option<Term>) -> Term {
        match self {
            Term::Var(v) => f(v).unwrap_or_else(|| self.clone()),
            Term::Const(_) => self.clone(),
            Term::Neg(a) => Term::neg(a.map_vars(f)),
            Term::Pow(a, n) => Term::pow(a.map_vars(f), *n),
            Term::Add(a, b) => Term::add(a.map_vars(f), b.map_vars(f)),
            Term::Sub(a, b) => Term::sub(a.map_vars(f), b.map_vars(f)),
            Term::Mul(a, b) => Term::mul(a.map_vars(f), b.map_vars(f)),
            Term::Div(a, b) => Term::div(a.map_vars(f), b.map_vars(f)),
        }
    }
}

impl Formula {
    pub fn cmp(a: Term, op: CmpOp, b: Term) -> Formula {
        Formula::Cmp(a, op, b)
    }

    #[allow(clippy::should_implement_trait)]
    pub fn not(f: Formula) -> Formula {
        match f {
            Formula::True => Formula::False,
            Formula::False => Formula::True,
            Formula::Not(g) => *g,
            Formula::Cmp(a, op, b) => match op.negate() {
                Some(nop) => Formula::Cmp(a, nop, b),
                None => Formula::Not(Box::new(Formula::Cmp(a, op, b))),
            },
            other => Formula::Not(Box::new(other)),
        }
    }

    pub fn and(parts: Vec<Formula>) -> Formula {
        let mut flat = Vec::new();
        for p in parts {
            match p {
                Formula::True => {}
                Formula::False => return Formula::False,
                Formula::And(inner) => flat.extend(inner),
                other => flat.push(other),
            }
        }
        match flat.len() {
            0 => Formula::True,
            1 => flat.pop().unwrap(),
            _ => Formula::And(flat),
        }
    }

    pub fn and2(a: Formula, b: Formula) -> Formula {
        Formula::and(vec![a, b])
    }

    pub fn or(a: Formula, b: Formula) -> Formula {
        Formula::not(Formula::and2(Formula::not(a), Formula::not(b)))
    }

    pub fn implies(a: Formula, b: Formula) -> Formula {
        Formula::not(Formula::and2(a, Formula::not(b)))
    }

    pub fn boxed(p: Program, f: Formula) -> Formula {
        Formula::Box(Box::new(p), Box::new(f))
    }

    pub fn diamond(p: Program, f: Formula) -> Formula {
        Formula::Diamond(Box::new(p), Box::new(f))
    }

    /// Top-level conjuncts (a non-conjunction is its own single conjunct).
    pub fn conjuncts(&self) -> Vec<Formula> {
        match self {
            Formula::And(parts) => parts.clone(),
            Formula::True => vec![],
            other => vec![other.clone()],
        }
    }

    pub fn free_variables(&self) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        self.collect_vars(&mut out);
        out
    }

    fn collect_vars(&self, out: &mut BTreeSet<String>) {
        match self {
            Formula::True | Formula::False => {}
            Formula::Cmp(a, _, b) => {
                a.collect_vars(out);
                b.collect_vars(out);
            }
            Formula::Not(f) => f.collect_vars(out),
            Formula::And(parts) => parts.iter().for_each(|p| p.collect_vars(out)),
            Formula::Forall(v, f) => {
                let mut inner = f.free_variables();
                inner.remove(v);
                out.extend(inner);
            }
            Formula::Box(p, f) | Formula::Diamond(p, f) => {
                p.collect_vars(out);
                f.collect_vars(out);
            }
        }
    }

    /// No modalities and no quantifiers.
    pub fn is_first_order(&self) -> bool {
        match self {
            Formula::True | Formula::False | Formula::Cmp(..) => true,
            Formula::Not(f) => f.is_first_order(),
            Formula::And(parts) => parts.iter().all(Formula::is_first_order),
            Formula::Forall(..) | Formula::Box(..) | Formula::Diamond(..) => false,
        }
    }

    pub fn contains_forall(&self) -> bool {
        match self {
            Formula::True | Formula::False | Formula::Cmp(..) => false,
            Formula::Not(f) => f.contains_forall(),
            Formula::And(parts) => parts.iter().any(Formula::contains_forall),
            Formula::Forall(..) => true,
            Formula::Box(p, f) | Formula::Diamond(p, f) => {
                p.contains_forall() || f.contains_forall()
            }
        }
    }

    pub fn map_terms(&self, f: &dyn Fn(&Term) -> Term) -> Formula {
        match self {
            Formula::True | Formula::False => self.clone(),
            Formula::Cmp(a, op, b) => Formula::Cmp(f(a), *op, f(b)),
            Formula::Not(g) => Formula::not(g.map_terms(f)),
            Formula::And(parts) => Formula::and(parts.iter().map(|p| p.map_terms(f)).collect()),
            Formula::Forall(v, g) => Formula::Forall(v.clone(), Box::new(g.map_terms(f))),
            Formula::Box(p, g) => Formula::boxed(p.map_terms(f), g.map_terms(f)),
            Formula::Diamond(p, g) => Formula::diamond(p.map_terms(f), g.map_terms(f)),
        }
    }

    /// Rebuilds the formula through the smart constructors.
    pub fn normalized(&self) -> Formula {
        self.map_terms(&|t| t.clone())
    }

    pub fn substitute(&self, var: &str, by: &Term) -> Formula {
        self.map_terms(&|t| t.substitute(var, by))
    }
}

impl Program {
    pub fn seq(parts: Vec<Program>) -> Program {
        let mut flat = Vec::new();
        for p in parts {
            match p {
                Program::Seq(inner) => flat.extend(inner),
                other => flat.push(other),
            }
        }
        if flat.len() == 1 {
            flat.pop().unwrap()
        } else {
            Program::Seq(flat)
        }
    }

    pub fn choice(a: Program, b: Program) -> Program {
        Program::Choice(Box::new(a), Box::new(b))
    }

    /// Components of a sequential composition (a non-sequence is a single component).
    pub fn components(&self) -> Vec<Program> {
        match self {
            Program::Seq(parts) => parts.clone(),
            other => vec![other.clone()],
        }
    }

    pub fn free_variables(&self) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        self.collect_vars(&mut out);
        out
    }

    fn collect_vars(&self, out: &mut BTreeSet<String>) {
        match self {
            Program::Test(f) => f.collect_vars(out),
            Program::Dyn(d) => out.extend(d.free_variables()),
            Program::Seq(parts) => parts.iter().for_each(|p| p.collect_vars(out)),
            Program::Choice(a, b) => {
                a.collect_vars(out);
                b.collect_vars(out);
            }
        }
    }

    /// Variables the program may change.
    pub fn bound_variables(&self) -> BTreeSet<String> {
        match self {
            Program::Test(_) => BTreeSet::new(),
            Program::Dyn(d) => d.bound_variables(),
            Program::Seq(parts) => parts.iter().flat_map(|p| p.bound_variables()).collect(),
            Program::Choice(a, b) => {
                let mut s = a.bound_variables();
                s.extend(b.bound_variables());
                s
            }
        }
    }

    fn contains_forall(&self) -> bool {
        match self {
            Program::Test(f) => f.contains_forall(),
            Program::Dyn(d) => d.constraint.contains_forall(),
            Program::Seq(parts) => parts.iter().any(Program::contains_forall),
            Program::Choice(a, b) => a.contains_forall() || b.contains_forall(),
        }
    }

    pub fn map_terms(&self, f: &dyn Fn(&Term) -> Term) -> Program {
        match self {
            Program::Test(g) => Program::Test(g.map_terms(f)),
            Program::Dyn(d) => Program::Dyn(Dynamics {
                odes: d.odes.iter().map(|(v, t)| (v.clone(), f(t))).collect(),
                constraint: d.constraint.map_terms(f),
            }),
            Program::Seq(parts) => Program::seq(parts.iter().map(|p| p.map_terms(f)).collect()),
            Program::Choice(a, b) => Program::choice(a.map_terms(f), b.map_terms(f)),
        }
    }
}

impl Dynamics {
    pub fn new(odes: Vec<(String, Term)>, constraint: Formula) -> Dynamics {
        Dynamics { odes, constraint }
    }

    pub fn bound_variables(&self) -> BTreeSet<String> {
        self.odes.iter().map(|(v, _)| v.clone()).collect()
    }

    pub fn free_variables(&self) -> BTreeSet<String> {
        let mut out = self.bound_variables();
        for (_, t) in &self.odes {
            t.collect_vars(&mut out);
        }
        self.constraint.collect_vars(&mut out);
        out
    }

    /// Variables occurring without their own ODE.
    pub fn parameters(&self) -> BTreeSet<String> {
        let bound = self.bound_variables();
        self.free_variables().into_iter().filter(|v| !bound.contains(v)).collect()
    }

    pub fn rhs(&self, var: &str) -> Option<&Term> {
        self.odes.iter().find(|(v, _)| v == var).map(|(_, t)| t)
    }

    pub fn with_constraint(&self, constraint: Formula) -> Dynamics {
        Dynamics { odes: self.odes.clone(), constraint }
    }
}

impl RddFormula {
    /// Rejects formulas where one side changes a variable the other side mentions.
    /// Unchanged parameters (e.g. a shared speed limit) may appear on both sides.
    pub fn new(
        left: Dynamics,
        right: Dynamics,
        exit: Formula,
        post: Formula,
    ) -> Result<RddFormula, DisjointnessError> {
        check_disjoint(&Program::Dyn(left.clone()), &Program::Dyn(right.clone()))?;
        Ok(RddFormula { left, right, exit, post })
    }

    pub fn left(&self) -> &Dynamics {
        &self.left
    }

    pub fn right(&self) -> &Dynamics {
        &self.right
    }

    pub fn exit(&self) -> &Formula {
        &self.exit
    }

    pub fn post(&self) -> &Formula {
        &self.post
    }

    /// Recognises a desugared RDD box `[δ; δ♯; ?E]B`.
    pub fn from_formula(f: &Formula) -> Option<RddFormula> {
        let Formula::Box(p, post) = f else {
            return None;
        };
        let Program::Seq(parts) = &**p else {
            return None;
        };
        match parts.as_slice() {
            [Program::Dyn(l), Program::Dyn(r), Program::Test(e)] => {
                RddFormula::new(l.clone(), r.clone(), e.clone(), (**post).clone()).ok()
            }
            _ => None,
        }
    }
}

/// Bound variables of each program must not occur in the other.
pub fn check_disjoint(a: &Program, b: &Program) -> Result<(), DisjointnessError> {
    let (ba, fa) = (a.bound_variables(), a.free_variables());
    let (bb, fb) = (b.bound_variables(), b.free_variables());
    let mut shared: BTreeSet<String> = ba.intersection(&fb).cloned().collect();
    shared.extend(bb.intersection(&fa).cloned());
    if shared.is_empty() {
        Ok(())
    } else {
        Err(DisjointnessError { shared: shared.into_iter().collect() })
    }
}

/// `[δ; δ♯; ?E] B`.
pub fn desugar_rdd(a: &RddFormula) -> Formula {
    Formula::boxed(
        Program::Seq(vec![
            Program::Dyn(a.left.clone()),
            Program::Dyn(a.right.clone()),
            Program::Test(a.exit.clone()),
        ]),
        a.post.clone(),
    )
}

pub fn is_sharp(name: &str) -> bool {
    name.ends_with('#')
}

