use std::fmt;

use num_bigint::BigInt;

use super::ParseError;

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Tok {
    Int(BigInt),
    Ident(String),
    Sym(&'static str),
    Eof,
}

impl fmt::Display for Tok {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Tok::Int(n) => write!(f, "`{}`", n),
            Tok::Ident(s) => write!(f, "`{}`", s),
            Tok::Sym(s) => write!(f, "`{}`", s),
            Tok::Eof => write!(f, "end of input"),
        }
    }
}

#[derive(Clone, Debug)]
pub struct Token {
    pub tok: Tok,
    pub line: usize,
    pub col: usize,
}

// longest first
const SYMBOLS: &[&str] = &[
    ":=", "[]", "..", "==", "!=", "<>", "<=", ">=", "&&", "||", ";", ",", ":", "{", "}", "[", "]", "(", ")", "@",
    "|", "+", "-", "*", "/", "%", "=", "<", ">", "!",
];

const UNICODE: &[(char, &str)] = &[
    ('⊓', "[]"),
    ('¬', "!"),
    ('≠', "!="),
    ('≤', "<="),
    ('≥', ">="),
    ('∧', "&&"),
    ('∨', "||"),
];

pub fn lex(src: &str) -> Result<Vec<Token>, ParseError> {
    let chars: Vec<char> = src.chars().collect();
    let mut out = Vec::new();
    let (mut i, mut line, mut col) = (0usize, 1usize, 1usize);
    let advance = |i: &mut usize, line: &mut usize, col: &mut usize, n: usize| {
        for k in 0..n {
            if chars[*i + k] == '\n' {
                *line += 1;
                *col = 1;
            } else {
                *col += 1;
            }
        }
        *i += n;
    };
    while i < chars.len() {
        let c = chars[i];
        if c.is_whitespace() {
            advance(&mut i, &mut line, &mut col, 1);
            continue;
        }
        if c == '/' && chars.get(i + 1) == Some(&'/') {
            while i < chars.len() && chars[i] != '\n' {
                advance(&mut i, &mut line, &mut col, 1);
            }
            continue;
        }
        let (l, cl) = (line, col);
        if c.is_ascii_digit() {
            let start = i;
            while i < chars.len() && chars[i].is_ascii_digit() {
                advance(&mut i, &mut line, &mut col, 1);
            }
            let text: String = chars[start..i].iter().collect();
            out.push(Token { tok: Tok::Int(text.parse().expect("digits")), line: l, col: cl });
            continue;
        }
        if c.is_alphabetic() || c == '_' {
            let start = i;
            while i < chars.len() && (chars[i].is_alphanumeric() || chars[i] == '_' || chars[i] == '\'') {
                advance(&mut i, &mut line, &mut col, 1);
            }
            let text: String = chars[start..i].iter().collect();
            out.push(Token { tok: Tok::Ident(text), line: l, col: cl });
            continue;
        }
        if let Some((_, s)) = UNICODE.iter().find(|(u, _)| *u == c) {
            advance(&mut i, &mut line, &mut col, 1);
            out.push(Token { tok: Tok::Sym(s), line: l, col: cl });
            continue;
        }
        let rest: String = chars[i..chars.len().min(i + 2)].iter().collect();
        match SYMBOLS.iter().find(|s| rest.starts_with(*s)) {
            Some(s) => {
                advance(&mut i, &mut line, &mut col, s.len());
                out.push(Token { tok: Tok::Sym(s), line: l, col: cl });
            }
            None => {
                return Err(ParseError { line: l, col: cl, msg: format!("unexpected character `{}`", c) });
            }
        }
    }
    out.push(Token { tok: Tok::Eof, line, col });
    Ok(out)
}
