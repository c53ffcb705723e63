use std::fmt::{self, Display, Formatter, Write};

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};

use super::ast::*;

const SUM: u8 = 0;
const PRODUCT: u8 = 1;
const UNARY: u8 = 2;
const POWER: u8 = 3;

/// Finite decimal expansion when one exists, `p/q` otherwise.
pub fn format_rational(q: &BigRational) -> String {
    let mut out = String::new();
    if q.is_negative() {
        out.push('-');
    }
    let q = q.abs();
    let (num, den) = (q.numer().clone(), q.denom().clone());
    let mut d = den.clone();
    let (mut twos, mut fives) = (0usize, 0usize);
    let two = BigInt::from(2);
    let five = BigInt::from(5);
    while d.is_even() {
        d /= &two;
        twos += 1;
    }
    while (&d % &five).is_zero() {
        d /= &five;
        fives += 1;
    }
    if !d.is_one() {
        let _ = write!(out, "{num}/{den}");
        return out;
    }
    let scale = twos.max(fives);
    let scaled = num * num_traits::pow(BigInt::from(10), scale) / den;
    let digits = scaled.to_string();
    if scale == 0 {
        out.push_str(&digits);
    } else {
        let padded = format!("{:0>width$}", digits, width = scale + 1);
        let (int, frac) = padded.split_at(padded.len() - scale);
        let _ = write!(out, "{int}.{frac}");
    }
    out
}

fn term_level(t: &Term) -> u8 {
    match t {
        Term::Add(..) | Term::Sub(..) => SUM,
        Term::Mul(..) | Term::Div(..) => PRODUCT,
        Term::Neg(_) => UNARY,
        Term::Pow(..) => POWER,
        Term::Const(c) if !c.is_integer() && format_rational(c).contains('/') => PRODUCT,
        Term::Const(c) if c.is_negative() => UNARY,
        Term::Var(_) | Term::Const(_) => POWER + 1,
    }
}

fn write_term(f: &mut Formatter<'_>, t: &Term, min: u8) -> fmt::Result {
    let paren = term_level(t) < min;
    if paren {
        f.write_char('(')?;
    }
    match t {
        Term::Var(v) => f.write_str(v)?,
        Term::Const(c) => f.write_str(&format_rational(c))?,
        Term::Neg(a) => {
            f.write_char('-')?;
            write_term(f, a, UNARY)?;
        }
        Term::Add(a, b) | Term::Sub(a, b) => {
            write_term(f, a, SUM)?;
            f.write_str(if matches!(t, Term::Add(..)) { " + " } else { " - " })?;
            write_operand(f, b, PRODUCT)?;
        }
        Term::Mul(a, b) | Term::Div(a, b) => {
            write_term(f, a, PRODUCT)?;
            f.write_str(if matches!(t, Term::Mul(..)) { "*" } else { "/" })?;
            write_operand(f, b, UNARY)?;
        }
        Term::Pow(a, n) => {
            write_term(f, a, POWER)?;
            write!(f, "^{n}")?;
        }
    }
    if paren {
        f.write_char(')')?;
    }
    Ok(())
}

/// Right operands that start with a minus sign get parentheses for readability.
fn write_operand(f: &mut Formatter<'_>, t: &Term, min: u8) -> fmt::Result {
    if matches!(t, Term::Neg(_)) || matches!(t, Term::Const(c) if c.is_negative()) {
        f.write_char('(')?;
        write_term(f, t, SUM)?;
        f.write_char(')')
    } else {
        write_term(f, t, min)
    }
}

impl Display for Term {
    fn fmt(&self, f: &mut Formatter<'_>) -> fmt::Result {
        write_term(f, self, SUM)
    }
}

impl Display for CmpOp {
    fn fmt(&self, f: &mut Formatter<'_>) -> fmt::Result {
        f.write_str(self.symbol())
    }
}

fn write_formula(f: &mut Formatter<'_>, phi: &Formula, top: bool) -> fmt::Result {
    match phi {
        Formula::True => f.write_str("true"),
        Formula::False => f.write_str("false"),
        Formula::Cmp(a, op, b) => write!(f, "{a} {op} {b}"),
        Formula::Not(g) if matches!(**g, Formula::Cmp(..)) => write!(f, "!({g})"),
        Formula::Not(g) => {
            f.write_char('!')?;
            write_formula(f, g, false)
        }
        Formula::And(parts) => {
            if !top {
                f.write_char('(')?;
            }
            for (i, p) in parts.iter().enumerate() {
                if i > 0 {
                    f.write_str(" & ")?;
                }
                write_formula(f, p, false)?;
            }
            if !top {
                f.write_char(')')?;
            }
            Ok(())
        }
        Formula::Forall(v, g) => {
            write!(f, "forall {v}. ")?;
            write_formula(f, g, false)
        }
        Formula::Box(p, g) => {
            write!(f, "[{p}]")?;
            write_formula(f, g, false)
        }
        Formula::Diamond(p, g) => {
            write!(f, "<{p}>")?;
            write_formula(f, g, false)
        }
    }
}

impl Display for Formula {
    fn fmt(&self, f: &mut Formatter<'_>) -> fmt::Result {
        write_formula(f, self, true)
    }
}

impl Display for Dynamics {
    fn fmt(&self, f: &mut Formatter<'_>) -> fmt::Result {
        f.write_char('{')?;
        write_dynamics_body(f, self)?;
        f.write_char('}')
    }
}

fn write_dynamics_body(f: &mut Formatter<'_>, d: &Dynamics) -> fmt::Result {
    for (i, (v, t)) in d.odes.iter().enumerate() {
        if i > 0 {
            f.write_str(", ")?;
        }
        write!(f, "{v}' = {t}")?;
    }
    if d.constraint != Formula::True {
        write!(f, " & {}", d.constraint)?;
    }
    Ok(())
}

fn write_program(f: &mut Formatter<'_>, p: &Program, in_seq: bool) -> fmt::Result {
    match p {
        Program::Test(phi) => match phi {
            Formula::True | Formula::False => write!(f, "?{phi}"),
            _ => write!(f, "?({phi})"),
        },
        Program::Dyn(d) => write!(f, "{d}"),
        Program::Seq(parts) => {
            for (i, q) in parts.iter().enumerate() {
                if i > 0 {
                    f.write_str("; ")?;
                }
                write_program(f, q, true)?;
            }
            Ok(())
        }
        Program::Choice(a, b) => {
            if in_seq {
                f.write_char('(')?;
            }
            write_program(f, a, false)?;
            f.write_str(" ++ ")?;
            if matches!(**b, Program::Choice(..)) {
                f.write_char('(')?;
                write_program(f, b, false)?;
                f.write_char(')')?;
            } else {
                write_program(f, b, false)?;
            }
            if in_seq {
                f.write_char(')')?;
            }
            Ok(())
        }
    }
}

impl Display for Program {
    fn fmt(&self, f: &mut Formatter<'_>) -> fmt::Result {
        write_program(f, self, false)
    }
}

impl Display for RddFormula {
    fn fmt(&self, f: &mut Formatter<'_>) -> fmt::Result {
        f.write_str("rdd {")?;
        write_dynamics_body(f, self.left())?;
        f.write_str(" || ")?;
        write_dynamics_body(f, self.right())?;
        write!(f, "}} exit {} post {}", self.exit(), self.post())
    }
}
