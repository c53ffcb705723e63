use num_bigint::BigInt;
use num_rational::BigRational;

use super::ast::*;

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Tok {
    Ident(String),
    Decimal(String),
    Prime,
    Eq,
    Le,
    Lt,
    Ge,
    Gt,
    Bang,
    Amp,
    Bar,
    BarBar,
    Arrow,
    LParen,
    RParen,
    LBrack,
    RBrack,
    LBrace,
    RBrace,
    Comma,
    Semi,
    Question,
    PlusPlus,
    Plus,
    Minus,
    Star,
    Slash,
    Caret,
    Dot,
}

impl Tok {
    pub fn describe(&self) -> String {
        match self {
            Tok::Ident(s) => format!("identifier `{s}`"),
            Tok::Decimal(s) => format!("number `{s}`"),
            other => format!("`{}`", other.text()),
        }
    }

    fn text(&self) -> &str {
        match self {
            Tok::Ident(s) | Tok::Decimal(s) => s,
            Tok::Prime => "'",
            Tok::Eq => "=",
            Tok::Le => "<=",
            Tok::Lt => "<",
            Tok::Ge => ">=",
            Tok::Gt => ">",
            Tok::Bang => "!",
            Tok::Amp => "&",
            Tok::Bar => "|",
            Tok::BarBar => "||",
            Tok::Arrow => "->",
            Tok::LParen => "(",
            Tok::RParen => ")",
            Tok::LBrack => "[",
            Tok::RBrack => "]",
            Tok::LBrace => "{",
            Tok::RBrace => "}",
            Tok::Comma => ",",
            Tok::Semi => ";",
            Tok::Question => "?",
            Tok::PlusPlus => "++",
            Tok::Plus => "+",
            Tok::Minus => "-",
            Tok::Star => "*",
            Tok::Slash => "/",
            Tok::Caret => "^",
            Tok::Dot => ".",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
pub enum ParseError {
    #[error("syntax error at byte {position}: expected {}, found {found}", expected.join(" or "))]
    Syntax { position: usize, expected: Vec<String>, found: String },
    #[error(transparent)]
    Disjointness(#[from] DisjointnessError),
}

impl ParseError {
    pub fn position(&self) -> Option<usize> {
        match self {
            ParseError::Syntax { position, .. } => Some(*position),
            ParseError::Disjointness(_) => None,
        }
    }
}

const KEYWORDS: &[&str] = &["true", "false", "forall", "rdd", "exit", "post"];

pub fn tokenize(text: &str) -> Result<Vec<(Tok, usize)>, ParseError> {
    let bytes = text.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i] as char;
        if c.is_ascii_whitespace() {
            i += 1;
            continue;
        }
        if c == '/' && bytes.get(i + 1) == Some(&b'/') {
            while i < bytes.len() && bytes[i] != b'\n' {
                i += 1;
            }
            continue;
        }
        let start = i;
        if c.is_ascii_alphabetic() {
            while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_') {
                i += 1;
            }
            if i < bytes.len() && bytes[i] == b'#' {
                i += 1;
            }
            out.push((Tok::Ident(text[start..i].to_string()), start));
            continue;
        }
        if c.is_ascii_digit() {
            while i < bytes.len() && bytes[i].is_ascii_digit() {
                i += 1;
            }
            if i + 1 < bytes.len() && bytes[i] == b'.' && bytes[i + 1].is_ascii_digit() {
                i += 1;
                while i < bytes.len() && bytes[i].is_ascii_digit() {
                    i += 1;
                }
            }
            out.push((Tok::Decimal(text[start..i].to_string()), start));
            continue;
        }
        let two = if i + 1 < bytes.len() { &text[i..i + 2] } else { "" };
        let (tok, len) = match two {
            "<=" => (Tok::Le, 2),
            ">=" => (Tok::Ge, 2),
            "||" => (Tok::BarBar, 2),
            "->" => (Tok::Arrow, 2),
            "++" => (Tok::PlusPlus, 2),
            _ => {
                let t = match c {
                    '\'' => Tok::Prime,
                    '=' => Tok::Eq,
                    '<' => Tok::Lt,
                    '>' => Tok::Gt,
                    '!' => Tok::Bang,
                    '&' => Tok::Amp,
                    '|' => Tok::Bar,
                    '(' => Tok::LParen,
                    ')' => Tok::RParen,
                    '[' => Tok::LBrack,
                    ']' => Tok::RBrack,
                    '{' => Tok::LBrace,
                    '}' => Tok::RBrace,
                    ',' => Tok::Comma,
                    ';' => Tok::Semi,
                    '?' => Tok::Question,
                    '+' => Tok::Plus,
                    '-' => Tok::Minus,
                    '*' => Tok::Star,
                    '/' => Tok::Slash,
                    '^' => Tok::Caret,
                    '.' => Tok::Dot,
                    _ => {
                        return Err(ParseError::Syntax {
                            position: i,
                            expected: vec!["a token".into()],
                            found: format!("character `{c}`"),
                        })
                    }
                };
                (t, 1)
            }
        };
        out.push((tok, start));
        i += len;
    }
    Ok(out)
}

pub fn parse_decimal(s: &str) -> Option<BigRational> {
    let (int, frac) = match s.split_once('.') {
        Some((a, b)) => (a, b),
        None => (s, ""),
    };
    if int.is_empty() || !int.bytes().all(|b| b.is_ascii_digit()) || !frac.bytes().all(|b| b.is_ascii_digit()) {
        return None;
    }
    let digits: BigInt = format!("{int}{frac}").parse().ok()?;
    let den = num_traits::pow(BigInt::from(10), frac.len());
    Some(BigRational::new(digits, den))
}

/// Recursive-descent parser over a token stream; reusable by the script loader.
pub struct Parser {
    toks: Vec<(Tok, usize)>,
    pos: usize,
    end: usize,
}

impl Parser {
    pub fn new(text: &str) -> Result<Parser, ParseError> {
        Ok(Parser { toks: tokenize(text)?, pos: 0, end: text.len() })
    }

    pub fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos).map(|(t, _)| t)
    }

    pub fn peek_at(&self, k: usize) -> Option<&Tok> {
        self.toks.get(self.pos + k).map(|(t, _)| t)
    }

    pub fn offset(&self) -> usize {
        self.toks.get(self.pos).map(|(_, p)| *p).unwrap_or(self.end)
    }

    pub fn at_end(&self) -> bool {
        self.pos >= self.toks.len()
    }

    pub fn bump(&mut self) -> Option<Tok> {
        let t = self.toks.get(self.pos).map(|(t, _)| t.clone());
        self.pos += 1;
        t
    }

    pub fn error(&self, expected: &[&str]) -> ParseError {
        ParseError::Syntax {
            position: self.offset(),
            expected: expected.iter().map(|s| s.to_string()).collect(),
            found: self.peek().map(Tok::describe).unwrap_or_else(|| "end of input".into()),
        }
    }

    pub fn eat(&mut self, t: &Tok) -> bool {
        if self.peek() == Some(t) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    pub fn expect(&mut self, t: &Tok) -> Result<(), ParseError> {
        if self.eat(t) {
            Ok(())
        } else {
            Err(self.error(&[&format!("`{}`", t.text())]))
        }
    }

    pub fn is_keyword(&self, kw: &str) -> bool {
        matches!(self.peek(), Some(Tok::Ident(s)) if s == kw)
    }

    pub fn eat_keyword(&mut self, kw: &str) -> bool {
        if self.is_keyword(kw) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    pub fn expect_keyword(&mut self, kw: &str) -> Result<(), ParseError> {
        if self.eat_keyword(kw) {
            Ok(())
        } else {
            Err(self.error(&[&format!("`{kw}`")]))
        }
    }

    pub fn ident(&mut self) -> Result<String, ParseError> {
        match self.peek() {
            Some(Tok::Ident(s)) if !KEYWORDS.contains(&s.as_str()) => {
                let s = s.clone();
                self.pos += 1;
                Ok(s)
            }
            _ => Err(self.error(&["identifier"])),
        }
    }

    pub fn finish(&self) -> Result<(), ParseError> {
        if self.at_end() {
            Ok(())
        } else {
            Err(self.error(&["end of input"]))
        }
    }

    // term := sum
    pub fn term(&mut self) -> Result<Term, ParseError> {
        let mut lhs = self.product()?;
        loop {
            if self.eat(&Tok::Plus) {
                lhs = Term::add(lhs, self.product()?);
            } else if self.eat(&Tok::Minus) {
                lhs = Term::sub(lhs, self.product()?);
            } else {
                return Ok(lhs);
            }
        }
    }

    fn product(&mut self) -> Result<Term, ParseError> {
        let mut lhs = self.unary()?;
        loop {
            if self.eat(&Tok::Star) {
                lhs = Term::mul(lhs, self.unary()?);
            } else if self.eat(&Tok::Slash) {
                lhs = Term::div(lhs, self.unary()?);
            } else {
                return Ok(lhs);
            }
        }
    }

    fn unary(&mut self) -> Result<Term, ParseError> {
        if self.eat(&Tok::Minus) {
            return Ok(Term::neg(self.unary()?));
        }
        self.power()
    }

    fn power(&mut self) -> Result<Term, ParseError> {
        let mut base = self.term_atom()?;
        while self.eat(&Tok::Caret) {
            match self.bump() {
                Some(Tok::Decimal(d)) if !d.contains('.') => match d.parse::<u32>() {
                    Ok(n) => base = Term::pow(base, n),
                    Err(_) => {
                        self.pos -= 1;
                        return Err(self.error(&["exponent below 2^32"]));
                    }
                },
                _ => {
                    self.pos -= 1;
                    return Err(self.error(&["nonnegative integer exponent"]));
                }
            }
        }
        Ok(base)
    }

    fn term_atom(&mut self) -> Result<Term, ParseError> {
        match self.peek().cloned() {
            Some(Tok::LParen) => {
                self.pos += 1;
                let t = self.term()?;
                self.expect(&Tok::RParen)?;
                Ok(t)
            }
            Some(Tok::Decimal(d)) => {
                self.pos += 1;
                Ok(Term::Const(parse_decimal(&d).expect("lexer produces valid decimals")))
            }
            Some(Tok::Ident(s)) if !KEYWORDS.contains(&s.as_str()) => {
                self.pos += 1;
                Ok(Term::Var(s))
            }
            _ => Err(self.error(&["term"])),
        }
    }

    fn cmp_op(&mut self) -> Option<CmpOp> {
        let op = match self.peek()? {
            Tok::Eq => CmpOp::Eq,
            Tok::Le => CmpOp::Le,
            Tok::Lt => CmpOp::Lt,
            Tok::Ge => CmpOp::Ge,
            Tok::Gt => CmpOp::Gt,
            _ => return None,
        };
        self.pos += 1;
        Some(op)
    }

    /// Comparison chain `t0 op t1 op t2 ...`, read as a conjunction.
    fn comparison(&mut self) -> Result<Formula, ParseError> {
        let mut lhs = self.term()?;
        let Some(mut op) = self.cmp_op() else {
            return Err(self.error(&["comparison operator"]));
        };
        let mut parts = Vec::new();
        loop {
            let rhs = self.term()?;
            parts.push(Formula::Cmp(lhs, op, rhs.clone()));
            lhs = rhs;
            match self.cmp_op() {
                Some(next) => op = next,
                None => break,
            }
        }
        Ok(Formula::and(parts))
    }

    // formula := implication
    pub fn formula(&mut self) -> Result<Formula, ParseError> {
        let lhs = self.disjunction()?;
        if self.eat(&Tok::Arrow) {
            let rhs = self.formula()?;
            return Ok(Formula::implies(lhs, rhs));
        }
        Ok(lhs)
    }

    fn disjunction(&mut self) -> Result<Formula, ParseError> {
        let mut lhs = self.conjunction()?;
        while self.eat(&Tok::Bar) {
            lhs = Formula::or(lhs, self.conjunction()?);
        }
        Ok(lhs)
    }

    fn conjunction(&mut self) -> Result<Formula, ParseError> {
        let mut parts = vec![self.unary_formula()?];
        while self.eat(&Tok::Amp) {
            parts.push(self.unary_formula()?);
        }
        Ok(Formula::and(parts))
    }

    fn unary_formula(&mut self) -> Result<Formula, ParseError> {
        match self.peek().cloned() {
            Some(Tok::Bang) => {
                self.pos += 1;
                Ok(Formula::not(self.unary_formula()?))
            }
            Some(Tok::LBrack) => {
                self.pos += 1;
                let p = self.program()?;
                self.expect(&Tok::RBrack)?;
                Ok(Formula::boxed(p, self.unary_formula()?))
            }
            Some(Tok::Lt) => {
                self.pos += 1;
                let p = self.program()?;
                self.expect(&Tok::Gt)?;
                Ok(Formula::diamond(p, self.unary_formula()?))
            }
            Some(Tok::Ident(s)) if s == "forall" => {
                self.pos += 1;
                let v = self.ident()?;
                self.expect(&Tok::Dot)?;
                Ok(Formula::Forall(v, Box::new(self.unary_formula()?)))
            }
            Some(Tok::Ident(s)) if s == "true" => {
                self.pos += 1;
                Ok(Formula::True)
            }
            Some(Tok::Ident(s)) if s == "false" => {
                self.pos += 1;
                Ok(Formula::False)
            }
            Some(Tok::Ident(s)) if s == "rdd" => Ok(desugar_rdd(&self.rdd()?)),
            Some(Tok::LParen) => {
                let save = self.pos;
                self.pos += 1;
                let grouped = match self.formula() {
                    Ok(f) if self.eat(&Tok::RParen) => Some((f, self.pos)),
                    _ => None,
                };
                match grouped {
                    Some((f, _)) if !self.continues_term() => Ok(f),
                    Some((f, after)) => {
                        // `(..) >` may close a diamond rather than start a comparison.
                        self.pos = save;
                        match self.comparison() {
                            Ok(c) => Ok(c),
                            Err(_) => {
                                self.pos = after;
                                Ok(f)
                            }
                        }
                    }
                    None => {
                        self.pos = save;
                        self.comparison()
                    }
                }
            }
            _ => self.comparison(),
        }
    }

    fn continues_term(&self) -> bool {
        matches!(
            self.peek(),
            Some(
                Tok::Plus
                    | Tok::Minus
                    | Tok::Star
                    | Tok::Slash
                    | Tok::Caret
                    | Tok::Eq
                    | Tok::Le
                    | Tok::Lt
                    | Tok::Ge
                    | Tok::Gt
            )
        )
    }

    // program := seq ('++' seq)*
    pub fn program(&mut self) -> Result<Program, ParseError> {
        let mut lhs = self.seq_program()?;
        while self.eat(&Tok::PlusPlus) {
            lhs = Program::choice(lhs, self.seq_program()?);
        }
        Ok(lhs)
    }

    fn seq_program(&mut self) -> Result<Program, ParseError> {
        let mut parts = vec![self.program_atom()?];
        while self.eat(&Tok::Semi) {
            parts.push(self.program_atom()?);
        }
        Ok(Program::seq(parts))
    }

    fn program_atom(&mut self) -> Result<Program, ParseError> {
        match self.peek() {
            Some(Tok::Question) => {
                self.pos += 1;
                Ok(Program::Test(self.formula()?))
            }
            Some(Tok::LBrace) => Ok(Program::Dyn(self.dynamics()?)),
            Some(Tok::LParen) => {
                self.pos += 1;
                let p = self.program()?;
                self.expect(&Tok::RParen)?;
                Ok(p)
            }
            _ => Err(self.error(&["`?`", "`{`", "`(`"])),
        }
    }

    pub fn dynamics(&mut self) -> Result<Dynamics, ParseError> {
        self.expect(&Tok::LBrace)?;
        let d = self.dynamics_body()?;
        self.expect(&Tok::RBrace)?;
        Ok(d)
    }

    /// `x' = f, ... (& Q)?` without braces.
    pub fn dynamics_body(&mut self) -> Result<Dynamics, ParseError> {
        let mut odes = vec![self.ode()?];
        while self.eat(&Tok::Comma) {
            odes.push(self.ode()?);
        }
        let constraint = if self.eat(&Tok::Amp) { self.formula()? } else { Formula::True };
        Ok(Dynamics { odes, constraint })
    }

    fn ode(&mut self) -> Result<(String, Term), ParseError> {
        let v = self.ident()?;
        self.expect(&Tok::Prime)?;
        self.expect(&Tok::Eq)?;
        Ok((v, self.term()?))
    }

    pub fn rdd(&mut self) -> Result<RddFormula, ParseError> {
        self.expect_keyword("rdd")?;
        self.expect(&Tok::LBrace)?;
        let left = self.dynamics_body()?;
        self.expect(&Tok::BarBar)?;
        let right = self.dynamics_body()?;
        self.expect(&Tok::RBrace)?;
        self.expect_keyword("exit")?;
        let exit = self.formula()?;
        self.expect_keyword("post")?;
        let post = self.formula()?;
        Ok(RddFormula::new(left, right, exit, post)?)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Category {
    Term,
    Formula,
    Program,
    Rdd,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Parsed {
    Term(Term),
    Formula(Formula),
    Program(Program),
    Rdd(RddFormula),
}

pub fn parse(text: &str, category: Category) -> Result<Parsed, ParseError> {
    Ok(match category {
        Category::Term => Parsed::Term(parse_term(text)?),
        Category::Formula => Parsed::Formula(parse_formula(text)?),
        Category::Program => Parsed::Program(parse_program(text)?),
        Category::Rdd => Parsed::Rdd(parse_rdd(text)?),
    })
}

fn whole<T>(text: &str, f: impl FnOnce(&mut Parser) -> Result<T, ParseError>) -> Result<T, ParseError> {
    let mut p = Parser::new(text)?;
    let out = f(&mut p)?;
    p.finish()?;
    Ok(out)
}

pub fn parse_term(text: &str) -> Result<Term, ParseError> {
    whole(text, Parser::term)
}

pub fn parse_formula(text: &str) -> Result<Formula, ParseError> {
    whole(text, Parser::formula)
}

pub fn parse_program(text: &str) -> Result<Program, ParseError> {
    whole(text, Parser::program)
}

pub fn parse_rdd(text: &str) -> Result<RddFormula, ParseError> {
    whole(text, Parser::rdd)
}

/// Accepts a dynamics with or without surrounding braces.
pub fn parse_dynamics(text: &str) -> Result<Dynamics, ParseError> {
    whole(text, |p| {
        if p.peek() == Some(&Tok::LBrace) {
            p.dynamics()
        } else {
            p.dynamics_body()
        }
    })
}
