//! The surface language: syntax, evaluation, typing and the copy rule.

mod ast;
mod eval;
mod inline;
mod lexer;
mod parser;
mod pretty;
mod typecheck;

pub use ast::*;
pub use eval::{atoms_in, atoms_of, eval_dist, eval_expr, AtomSet, Env, EvalError};
pub use inline::{composite, composite_context, declare_encap_domains, inline, Datatype, ProgramContext};
pub use parser::{is_reserved, parse_decls, parse_expr, parse_file, parse_program, parse_table};
pub use typecheck::{context_of, typecheck, Node, Program};

use std::fmt;

/// A lexical or syntax error, positioned at the offending token.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParseError {
    pub line: usize,
    pub col: usize,
    pub msg: String,
}

impl fmt::Display for ParseError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}: {}", self.line, self.col, self.msg)
    }
}

impl std::error::Error for ParseError {}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TypeError(pub String);

impl TypeError {
    pub fn context(self, what: &str) -> TypeError {
        TypeError(format!("{}: {}", what, self.0))
    }
}

impl fmt::Display for TypeError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for TypeError {}
