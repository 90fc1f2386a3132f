//! Recursive-descent parser for programs, datatypes, contexts and tables.

use std::sync::Arc;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{Signed, Zero};

use super::ast::*;
use super::lexer::{lex, Tok, Token};
use super::ParseError;
use crate::algebra::{ExtRat, Value};

const KEYWORDS: &[&str] = &[
    "skip", "abort", "hidvar", "unvar", "if", "else", "while", "print", "assert", "call", "int", "true", "false",
    "and", "or", "not", "xor", "div", "mod", "in", "uniform", "inf",
];

/// Words that open a section of a datatype, context or program file.
const SECTIONS: &[&str] = &["shared", "encap", "init", "op", "final", "client", "body", "context"];

pub fn is_reserved(word: &str) -> bool {
    KEYWORDS.contains(&word) || SECTIONS.contains(&word)
}

struct Parser {
    toks: Vec<Token>,
    pos: usize,
}

type PResult<T> = Result<T, ParseError>;

impl Parser {
    fn new(src: &str) -> PResult<Self> {
        Ok(Parser { toks: lex(src)?, pos: 0 })
    }

    fn peek(&self) -> &Tok {
        &self.toks[self.pos].tok
    }

    fn peek_at(&self, k: usize) -> &Tok {
        &self.toks[(self.pos + k).min(self.toks.len() - 1)].tok
    }

    fn bump(&mut self) -> Tok {
        let t = self.toks[self.pos].tok.clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    fn err<T>(&self, msg: impl Into<String>) -> PResult<T> {
        let t = &self.toks[self.pos];
        Err(ParseError { line: t.line, col: t.col, msg: msg.into() })
    }

    fn is_sym(&self, s: &str) -> bool {
        matches!(self.peek(), Tok::Sym(x) if *x == s)
    }

    fn is_word(&self, w: &str) -> bool {
        matches!(self.peek(), Tok::Ident(x) if x == w)
    }

    fn eat_sym(&mut self, s: &str) -> bool {
        if self.is_sym(s) {
            self.bump();
            true
        } else {
            false
        }
    }

    fn eat_word(&mut self, w: &str) -> bool {
        if self.is_word(w) {
            self.bump();
            true
        } else {
            false
        }
    }

    fn expect_sym(&mut self, s: &str) -> PResult<()> {
        if self.eat_sym(s) {
            Ok(())
        } else {
            self.err(format!("expected `{}`, found {}", s, self.peek()))
        }
    }

    fn expect_word(&mut self, w: &str) -> PResult<()> {
        if self.eat_word(w) {
            Ok(())
        } else {
            self.err(format!("expected `{}`, found {}", w, self.peek()))
        }
    }

    fn expect_eof(&self) -> PResult<()> {
        match self.peek() {
            Tok::Eof => Ok(()),
            t => self.err(format!("unexpected {}", t)),
        }
    }

    fn name(&mut self) -> PResult<Name> {
        match self.peek().clone() {
            Tok::Ident(s) if !is_reserved(&s) => {
                self.bump();
                Ok(Arc::from(s.as_str()))
            }
            t => self.err(format!("expected an identifier, found {}", t)),
        }
    }

    fn int(&mut self) -> PResult<BigInt> {
        let neg = self.eat_sym("-");
        match self.bump() {
            Tok::Int(n) => Ok(if neg { -n } else { n }),
            t => {
                self.pos -= 1;
                self.err(format!("expected an integer, found {}", t))
            }
        }
    }

    fn small_int(&mut self) -> PResult<i64> {
        let n = self.int()?;
        i64::try_from(n).or_else(|_| self.err("integer too large"))
    }

    fn rational(&mut self) -> PResult<BigRational> {
        let num = self.int()?;
        if self.eat_sym("/") {
            let den = self.int()?;
            if den.is_zero() {
                return self.err("zero denominator");
            }
            Ok(BigRational::new(num, den))
        } else {
            Ok(BigRational::from_integer(num))
        }
    }

    fn at_block_end(&self) -> bool {
        match self.peek() {
            Tok::Eof => true,
            Tok::Sym("}") => true,
            Tok::Ident(w) => SECTIONS.contains(&w.as_str()),
            _ => false,
        }
    }

    // ---- programs ----

    fn program(&mut self) -> PResult<Stmt> {
        let mut parts = vec![self.stmt()?];
        while self.eat_sym(";") {
            if self.at_block_end() {
                break;
            }
            parts.push(self.stmt()?);
        }
        Ok(if parts.len() == 1 { parts.pop().unwrap() } else { Stmt::Seq(parts) })
    }

    fn block(&mut self) -> PResult<Stmt> {
        self.expect_sym("{")?;
        let p = self.program()?;
        self.expect_sym("}")?;
        Ok(p)
    }

    fn stmt(&mut self) -> PResult<Stmt> {
        if self.is_sym("{") {
            let mut s = self.block()?;
            while self.eat_sym("[]") {
                let rhs = self.block()?;
                s = Stmt::nondet(s, rhs);
            }
            return Ok(s);
        }
        let word = match self.peek() {
            Tok::Ident(w) => w.clone(),
            t => return self.err(format!("expected a statement, found {}", t)),
        };
        match word.as_str() {
            "skip" => {
                self.bump();
                Ok(Stmt::Skip)
            }
            "abort" => {
                self.bump();
                Ok(Stmt::Abort)
            }
            "unvar" => {
                self.bump();
                Ok(Stmt::Unvar(self.name()?))
            }
            "call" => {
                self.bump();
                Ok(Stmt::Call(self.name()?))
            }
            "assert" => {
                self.bump();
                Ok(Stmt::Assert(self.expr()?))
            }
            "print" => {
                self.bump();
                let alts = self.choice_rhs()?;
                Ok(fold_choice(alts.into_iter().map(Stmt::Print).collect()))
            }
            "if" => {
                self.bump();
                let guard = self.expr()?;
                let then = self.block()?;
                let els = if self.eat_word("else") {
                    if self.is_word("if") {
                        self.stmt()?
                    } else {
                        self.block()?
                    }
                } else {
                    Stmt::Skip
                };
                Ok(Stmt::If { guard, then: Box::new(then), els: Box::new(els) })
            }
            "while" => {
                self.bump();
                let guard = self.expr()?;
                let body = self.block()?;
                Ok(Stmt::While { guard, body: Box::new(body) })
            }
            "hidvar" => {
                self.bump();
                let name = self.name()?;
                let mut domain = if self.eat_sym(":") { Some(self.domain()?) } else { None };
                self.expect_sym(":=")?;
                let alts = self.choice_rhs()?;
                if domain.is_none() && alts.len() > 1 {
                    domain = literal_domain(&alts);
                }
                Ok(fold_choice(
                    alts.into_iter()
                        .map(|rhs| Stmt::HidVar { name: name.clone(), domain: domain.clone(), rhs })
                        .collect(),
                ))
            }
            _ => {
                let mut targets = vec![self.name()?];
                while self.eat_sym(",") {
                    targets.push(self.name()?);
                }
                self.expect_sym(":=")?;
                let alts = self.choice_rhs()?;
                Ok(fold_choice(
                    alts.into_iter().map(|rhs| Stmt::Assign { targets: targets.clone(), rhs }).collect(),
                ))
            }
        }
    }

    /// A distribution expression, or the `{d} [] {d}` shorthand for a choice
    /// between statements that differ only in it.
    fn choice_rhs(&mut self) -> PResult<Vec<DistExpr>> {
        if !self.is_sym("{") {
            return Ok(vec![self.dexpr()?]);
        }
        let mut alts = Vec::new();
        loop {
            self.expect_sym("{")?;
            alts.push(self.dexpr()?);
            self.expect_sym("}")?;
            if !self.eat_sym("[]") {
                break;
            }
        }
        if alts.len() < 2 {
            return self.err("expected `[]` after a braced alternative");
        }
        Ok(alts)
    }

    fn dexpr(&mut self) -> PResult<DistExpr> {
        if self.is_word("uniform") && matches!(self.peek_at(1), Tok::Sym("(")) {
            self.bump();
            self.bump();
            let first = self.expr()?;
            if self.eat_sym("..") {
                let hi = self.expr()?;
                self.expect_sym(")")?;
                return Ok(DistExpr::UniformRange(first, hi));
            }
            let mut es = vec![first];
            while self.eat_sym(",") {
                es.push(self.expr()?);
            }
            self.expect_sym(")")?;
            return Ok(DistExpr::Uniform(es));
        }
        let mut branches = Vec::new();
        loop {
            let e = self.expr()?;
            let w = if self.eat_sym("@") {
                let r = self.rational()?;
                if !r.is_positive() {
                    return self.err("weights must be positive");
                }
                Some(r)
            } else {
                None
            };
            let more = self.eat_sym("|");
            if w.is_none() && more {
                return self.err("only the last alternative may omit its weight");
            }
            branches.push((e, w));
            if !more {
                break;
            }
        }
        Ok(DistExpr::Weighted(branches))
    }

    fn domain(&mut self) -> PResult<Domain> {
        if self.eat_word("int") {
            let lo = self.small_int()?;
            self.expect_sym("..")?;
            let hi = self.small_int()?;
            if hi < lo {
                return self.err("empty range");
            }
            return Ok(Domain::Range(lo, hi));
        }
        self.expect_sym("{")?;
        let mut vs = vec![self.value()?];
        while self.eat_sym(",") {
            vs.push(self.value()?);
        }
        self.expect_sym("}")?;
        Ok(Domain::List(vs))
    }

    fn value(&mut self) -> PResult<Value> {
        match self.peek().clone() {
            Tok::Int(_) | Tok::Sym("-") => Ok(Value::Num(self.rational()?)),
            Tok::Ident(w) if w == "true" || w == "false" => {
                self.bump();
                Ok(Value::bool(w == "true"))
            }
            Tok::Ident(w) if !is_reserved(&w) => {
                self.bump();
                Ok(Value::atom(&w))
            }
            Tok::Sym("[") => {
                self.bump();
                let mut vs = vec![self.value()?];
                while self.eat_sym(",") {
                    vs.push(self.value()?);
                }
                self.expect_sym("]")?;
                Ok(Value::Array(vs))
            }
            t => self.err(format!("expected a value, found {}", t)),
        }
    }

    fn decls(&mut self) -> PResult<Vec<Decl>> {
        let mut out: Vec<Decl> = Vec::new();
        while matches!(self.peek(), Tok::Ident(w) if !is_reserved(w)) && matches!(self.peek_at(1), Tok::Sym(":")) {
            let name = self.name()?;
            if out.iter().any(|d| d.name == name) {
                return self.err(format!("`{}` declared twice", name));
            }
            self.bump();
            let domain = self.domain()?;
            out.push(Decl { name, domain });
            self.eat_sym(",");
        }
        Ok(out)
    }

    // ---- expressions ----

    fn expr(&mut self) -> PResult<Expr> {
        let mut e = self.xor_expr()?;
        while self.eat_sym("||") || self.eat_word("or") {
            e = Expr::bin(BinOp::Or, e, self.xor_expr()?);
        }
        Ok(e)
    }

    fn xor_expr(&mut self) -> PResult<Expr> {
        let mut e = self.and_expr()?;
        while self.eat_word("xor") {
            e = Expr::bin(BinOp::Xor, e, self.and_expr()?);
        }
        Ok(e)
    }

    fn and_expr(&mut self) -> PResult<Expr> {
        let mut e = self.not_expr()?;
        while self.eat_sym("&&") || self.eat_word("and") {
            e = Expr::bin(BinOp::And, e, self.not_expr()?);
        }
        Ok(e)
    }

    fn not_expr(&mut self) -> PResult<Expr> {
        if self.eat_sym("!") || self.eat_word("not") {
            return Ok(Expr::Not(Box::new(self.not_expr()?)));
        }
        self.cmp_expr()
    }

    fn cmp_expr(&mut self) -> PResult<Expr> {
        let e = self.add_expr()?;
        let op = match self.peek() {
            Tok::Sym("=") | Tok::Sym("==") => BinOp::Eq,
            Tok::Sym("!=") | Tok::Sym("<>") => BinOp::Ne,
            Tok::Sym("<") => BinOp::Lt,
            Tok::Sym("<=") => BinOp::Le,
            Tok::Sym(">") => BinOp::Gt,
            Tok::Sym(">=") => BinOp::Ge,
            Tok::Ident(w) if w == "in" => BinOp::In,
            _ => return Ok(e),
        };
        self.bump();
        Ok(Expr::bin(op, e, self.add_expr()?))
    }

    fn add_expr(&mut self) -> PResult<Expr> {
        let mut e = self.mul_expr()?;
        loop {
            let op = if self.eat_sym("+") {
                BinOp::Add
            } else if self.eat_sym("-") {
                BinOp::Sub
            } else {
                return Ok(e);
            };
            e = Expr::bin(op, e, self.mul_expr()?);
        }
    }

    fn mul_expr(&mut self) -> PResult<Expr> {
        let mut e = self.unary()?;
        loop {
            let op = if self.eat_sym("*") {
                BinOp::Mul
            } else if self.eat_sym("/") {
                BinOp::Div
            } else if self.eat_word("div") {
                BinOp::IntDiv
            } else if self.eat_word("mod") || self.eat_sym("%") {
                BinOp::Mod
            } else {
                return Ok(e);
            };
            e = Expr::bin(op, e, self.unary()?);
        }
    }

    fn unary(&mut self) -> PResult<Expr> {
        if self.eat_sym("-") {
            if let Tok::Int(n) = self.peek().clone() {
                self.bump();
                return self.postfix(Expr::Num(BigRational::from_integer(-n)));
            }
            let e = self.unary()?;
            return Ok(Expr::bin(BinOp::Sub, Expr::int(0), e));
        }
        let a = self.atom()?;
        self.postfix(a)
    }

    fn postfix(&mut self, mut e: Expr) -> PResult<Expr> {
        while self.eat_sym("[") {
            let i = self.expr()?;
            self.expect_sym("]")?;
            e = Expr::Index(Box::new(e), Box::new(i));
        }
        Ok(e)
    }

    fn atom(&mut self) -> PResult<Expr> {
        match self.peek().clone() {
            Tok::Int(n) => {
                self.bump();
                Ok(Expr::Num(BigRational::from_integer(n)))
            }
            Tok::Ident(w) if w == "true" || w == "false" => {
                self.bump();
                Ok(Expr::Bool(w == "true"))
            }
            Tok::Ident(w) if !is_reserved(&w) => {
                self.bump();
                let name: Name = Arc::from(w.as_str());
                if self.eat_sym("(") {
                    let mut args = Vec::new();
                    if !self.is_sym(")") {
                        args.push(self.expr()?);
                        while self.eat_sym(",") {
                            args.push(self.expr()?);
                        }
                    }
                    self.expect_sym(")")?;
                    return Ok(Expr::Call(name, args));
                }
                Ok(Expr::Ident(name))
            }
            Tok::Sym("(") => {
                self.bump();
                let first = self.expr()?;
                if self.eat_sym(")") {
                    return Ok(first);
                }
                let mut items = vec![first];
                while self.eat_sym(",") {
                    items.push(self.expr()?);
                }
                self.expect_sym(")")?;
                Ok(Expr::Tuple(items))
            }
            Tok::Sym("[") => {
                self.bump();
                let mut items = vec![self.expr()?];
                while self.eat_sym(",") {
                    items.push(self.expr()?);
                }
                self.expect_sym("]")?;
                Ok(Expr::Array(items))
            }
            t => self.err(format!("expected an expression, found {}", t)),
        }
    }

    // ---- files ----

    fn file(&mut self) -> PResult<SourceFile> {
        if self.is_word("shared") {
            return self.datatype().map(SourceFile::Datatype);
        }
        if self.is_word("client") {
            self.bump();
            self.expect_sym(":")?;
            let client = self.decls()?;
            self.expect_word("body")?;
            self.expect_sym(":")?;
            let body = self.program()?;
            self.expect_eof()?;
            return Ok(SourceFile::Context(ContextDef { client, body }));
        }
        let context = if self.eat_word("context") {
            self.eat_sym(":");
            self.decls()?
        } else {
            Vec::new()
        };
        let body = self.program()?;
        self.expect_eof()?;
        Ok(SourceFile::Program(ProgramFile { context, body }))
    }

    fn section(&mut self, word: &str) -> PResult<()> {
        self.expect_word(word)?;
        self.expect_sym(":")
    }

    fn datatype(&mut self) -> PResult<DatatypeDef> {
        self.section("shared")?;
        let shared = self.decls()?;
        let encap = if self.is_word("encap") {
            self.section("encap")?;
            self.decls()?
        } else {
            Vec::new()
        };
        self.section("init")?;
        let init = self.program()?;
        let mut ops: Vec<(Name, Stmt)> = Vec::new();
        while self.eat_word("op") {
            let name = self.name()?;
            if ops.iter().any(|(n, _)| *n == name) {
                return self.err(format!("operation `{}` defined twice", name));
            }
            self.expect_sym(":")?;
            ops.push((name, self.program()?));
        }
        self.section("final")?;
        let fin = self.program()?;
        self.expect_eof()?;
        Ok(DatatypeDef { shared, encap, init, ops, fin })
    }

    fn table(&mut self) -> PResult<Vec<(Vec<Value>, ExtRat)>> {
        let mut out = Vec::new();
        while !matches!(self.peek(), Tok::Eof) {
            let state = if self.eat_sym("(") {
                let mut vs = vec![self.value()?];
                while self.eat_sym(",") {
                    vs.push(self.value()?);
                }
                self.expect_sym(")")?;
                vs
            } else {
                vec![self.value()?]
            };
            self.expect_sym("=")?;
            let w = if self.eat_word("inf") {
                ExtRat::Inf
            } else {
                let r = self.rational()?;
                if r.is_negative() {
                    return self.err("negative weight");
                }
                ExtRat::Fin(r)
            };
            out.push((state, w));
            self.eat_sym(",");
        }
        Ok(out)
    }
}

fn fold_choice(mut alts: Vec<Stmt>) -> Stmt {
    let first = alts.remove(0);
    alts.into_iter().fold(first, Stmt::nondet)
}

fn literal_value(e: &Expr) -> Option<Value> {
    match e {
        Expr::Num(r) => Some(Value::Num(r.clone())),
        Expr::Bool(b) => Some(Value::bool(*b)),
        Expr::Array(xs) => xs.iter().map(literal_value).collect::<Option<Vec<_>>>().map(Value::Array),
        _ => None,
    }
}

/// The domain implied by a choice among literal alternatives, so that every
/// branch declares the variable identically.
fn literal_domain(alts: &[DistExpr]) -> Option<Domain> {
    let mut vs = Vec::new();
    for d in alts {
        let DistExpr::Weighted(bs) = d else { return None };
        for (e, _) in bs {
            vs.push(literal_value(e)?);
        }
    }
    vs.sort();
    vs.dedup();
    Some(Domain::List(vs))
}

pub fn parse_file(src: &str) -> Result<SourceFile, ParseError> {
    Parser::new(src)?.file()
}

pub fn parse_program(src: &str) -> Result<Stmt, ParseError> {
    let mut p = Parser::new(src)?;
    let s = p.program()?;
    p.expect_eof()?;
    Ok(s)
}

pub fn parse_expr(src: &str) -> Result<Expr, ParseError> {
    let mut p = Parser::new(src)?;
    let e = p.expr()?;
    p.expect_eof()?;
    Ok(e)
}

pub fn parse_decls(src: &str) -> Result<Vec<Decl>, ParseError> {
    let mut p = Parser::new(src)?;
    let d = p.decls()?;
    p.expect_eof()?;
    Ok(d)
}

/// `state=weight` pairs, a state being a value or a parenthesized tuple.
pub fn parse_table(src: &str) -> Result<Vec<(Vec<Value>, ExtRat)>, ParseError> {
    Parser::new(src)?.table()
}
