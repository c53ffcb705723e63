//! Abstract syntax, parser and printer for terms, formulas, hybrid programs
//! and RDD formulas.

mod ast;
mod parser;
mod printer;

pub use ast::*;
pub use parser::{
    parse, parse_decimal, parse_dynamics, parse_formula, parse_program, parse_rdd, parse_term,
    tokenize, Category, ParseError, Parsed, Parser, Tok,
};
pub use printer::format_rational;

#[cfg(test)]
mod tests;
