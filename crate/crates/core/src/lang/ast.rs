//! Untyped syntax trees as produced by the parser.

use std::sync::Arc;

use num_rational::BigRational;

use crate::algebra::Value;

pub type Name = Arc<str>;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum BinOp {
    Or,
    Xor,
    And,
    Eq,
    Ne,
    Lt,
    Le,
    Gt,
    Ge,
    In,
    Add,
    Sub,
    Mul,
    Div,
    IntDiv,
    Mod,
}

impl BinOp {
    pub fn symbol(self) -> &'static str {
        match self {
            BinOp::Or => "or",
            BinOp::Xor => "xor",
            BinOp::And => "and",
            BinOp::Eq => "=",
            BinOp::Ne => "!=",
            BinOp::Lt => "<",
            BinOp::Le => "<=",
            BinOp::Gt => ">",
            BinOp::Ge => ">=",
            BinOp::In => "in",
            BinOp::Add => "+",
            BinOp::Sub => "-",
            BinOp::Mul => "*",
            BinOp::Div => "/",
            BinOp::IntDiv => "div",
            BinOp::Mod => "mod",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum Expr {
    Num(BigRational),
    Bool(bool),
    /// A variable, or an atom when no variable of that name is in scope.
    Ident(Name),
    Array(Vec<Expr>),
    Tuple(Vec<Expr>),
    Not(Box<Expr>),
    Binary(BinOp, Box<Expr>, Box<Expr>),
    Index(Box<Expr>, Box<Expr>),
    Call(Name, Vec<Expr>),
}

impl Expr {
    pub fn int(n: i64) -> Expr {
        Expr::Num(BigRational::from_integer(n.into()))
    }

    pub fn ident(s: &str) -> Expr {
        Expr::Ident(Arc::from(s))
    }

    pub fn bin(op: BinOp, a: Expr, b: Expr) -> Expr {
        Expr::Binary(op, Box::new(a), Box::new(b))
    }

    /// Every identifier occurring in the expression.
    pub fn idents(&self, out: &mut Vec<Name>) {
        match self {
            Expr::Num(_) | Expr::Bool(_) => {}
            Expr::Ident(n) => out.push(n.clone()),
            Expr::Array(xs) | Expr::Tuple(xs) | Expr::Call(_, xs) => xs.iter().for_each(|x| x.idents(out)),
            Expr::Not(a) => a.idents(out),
            Expr::Binary(_, a, b) | Expr::Index(a, b) => {
                a.idents(out);
                b.idents(out);
            }
        }
    }

    pub fn rename(&self, f: &impl Fn(&str) -> Option<Name>) -> Expr {
        match self {
            Expr::Num(_) | Expr::Bool(_) => self.clone(),
            Expr::Ident(n) => Expr::Ident(f(n).unwrap_or_else(|| n.clone())),
            Expr::Array(xs) => Expr::Array(xs.iter().map(|x| x.rename(f)).collect()),
            Expr::Tuple(xs) => Expr::Tuple(xs.iter().map(|x| x.rename(f)).collect()),
            Expr::Call(g, xs) => Expr::Call(g.clone(), xs.iter().map(|x| x.rename(f)).collect()),
            Expr::Not(a) => Expr::Not(Box::new(a.rename(f))),
            Expr::Binary(op, a, b) => Expr::bin(*op, a.rename(f), b.rename(f)),
            Expr::Index(a, b) => Expr::Index(Box::new(a.rename(f)), Box::new(b.rename(f))),
        }
    }
}

/// A distribution over values, evaluated per state.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum DistExpr {
    /// `e1 @ p1 | e2 @ p2 | e3`; a missing weight (last branch only) takes
    /// the remainder up to 1.
    Weighted(Vec<(Expr, Option<BigRational>)>),
    Uniform(Vec<Expr>),
    /// `uniform(lo..hi)`, both ends included.
    UniformRange(Expr, Expr),
}

impl DistExpr {
    pub fn point(e: Expr) -> DistExpr {
        DistExpr::Weighted(vec![(e, None)])
    }

    pub fn exprs(&self) -> Vec<&Expr> {
        match self {
            DistExpr::Weighted(bs) => bs.iter().map(|(e, _)| e).collect(),
            DistExpr::Uniform(es) => es.iter().collect(),
            DistExpr::UniformRange(a, b) => vec![a, b],
        }
    }

    pub fn rename(&self, f: &impl Fn(&str) -> Option<Name>) -> DistExpr {
        match self {
            DistExpr::Weighted(bs) => DistExpr::Weighted(bs.iter().map(|(e, w)| (e.rename(f), w.clone())).collect()),
            DistExpr::Uniform(es) => DistExpr::Uniform(es.iter().map(|e| e.rename(f)).collect()),
            DistExpr::UniformRange(a, b) => DistExpr::UniformRange(a.rename(f), b.rename(f)),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum Domain {
    List(Vec<Value>),
    Range(i64, i64),
}

impl Domain {
    pub fn values(&self) -> Vec<Value> {
        match self {
            Domain::List(vs) => vs.clone(),
            Domain::Range(lo, hi) => (*lo..=*hi).map(Value::int).collect(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Decl {
    pub name: Name,
    pub domain: Domain,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum Stmt {
    Skip,
    Abort,
    Seq(Vec<Stmt>),
    Assign { targets: Vec<Name>, rhs: DistExpr },
    HidVar { name: Name, domain: Option<Domain>, rhs: DistExpr },
    Unvar(Name),
    If { guard: Expr, then: Box<Stmt>, els: Box<Stmt> },
    While { guard: Expr, body: Box<Stmt> },
    Print(DistExpr),
    NonDet(Box<Stmt>, Box<Stmt>),
    Assert(Expr),
    Call(Name),
}

impl Stmt {
    /// Sequential composition, flattening nested sequences and dropping
    /// nothing else.
    pub fn seq(parts: impl IntoIterator<Item = Stmt>) -> Stmt {
        let mut out = Vec::new();
        for p in parts {
            match p {
                Stmt::Seq(inner) => out.extend(inner),
                other => out.push(other),
            }
        }
        match out.len() {
            0 => Stmt::Skip,
            1 => out.pop().unwrap(),
            _ => Stmt::Seq(out),
        }
    }

    pub fn nondet(a: Stmt, b: Stmt) -> Stmt {
        Stmt::NonDet(Box::new(a), Box::new(b))
    }

    /// Applies `f` to every immediate child statement.
    pub fn map_children(&self, f: &mut impl FnMut(&Stmt) -> Stmt) -> Stmt {
        match self {
            Stmt::Seq(xs) => Stmt::Seq(xs.iter().map(&mut *f).collect()),
            Stmt::If { guard, then, els } => {
                Stmt::If { guard: guard.clone(), then: Box::new(f(then)), els: Box::new(f(els)) }
            }
            Stmt::While { guard, body } => Stmt::While { guard: guard.clone(), body: Box::new(f(body)) },
            Stmt::NonDet(a, b) => Stmt::NonDet(Box::new(f(a)), Box::new(f(b))),
            other => other.clone(),
        }
    }

    pub fn children(&self) -> Vec<&Stmt> {
        match self {
            Stmt::Seq(xs) => xs.iter().collect(),
            Stmt::If { then, els, .. } => vec![then, els],
            Stmt::While { body, .. } => vec![body],
            Stmt::NonDet(a, b) => vec![a, b],
            _ => vec![],
        }
    }

    /// Names of variables declared by `hidvar` anywhere inside.
    pub fn hidvars(&self, out: &mut Vec<Name>) {
        if let Stmt::HidVar { name, .. } = self {
            if !out.contains(name) {
                out.push(name.clone());
            }
        }
        for c in self.children() {
            c.hidvars(out);
        }
    }

    /// Every identifier mentioned, as a target, declaration or in an expression.
    pub fn idents(&self, out: &mut Vec<Name>) {
        match self {
            Stmt::Assign { targets, rhs } => {
                out.extend(targets.iter().cloned());
                rhs.exprs().into_iter().for_each(|e| e.idents(out));
            }
            Stmt::HidVar { name, rhs, .. } => {
                out.push(name.clone());
                rhs.exprs().into_iter().for_each(|e| e.idents(out));
            }
            Stmt::Unvar(n) => out.push(n.clone()),
            Stmt::If { guard, .. } | Stmt::While { guard, .. } | Stmt::Assert(guard) => guard.idents(out),
            Stmt::Print(d) => d.exprs().into_iter().for_each(|e| e.idents(out)),
            _ => {}
        }
        for c in self.children() {
            c.idents(out);
        }
    }

    /// Renames variables throughout; `f` returns `None` for names to keep.
    pub fn rename(&self, f: &impl Fn(&str) -> Option<Name>) -> Stmt {
        let n = |x: &Name| f(x).unwrap_or_else(|| x.clone());
        match self {
            Stmt::Assign { targets, rhs } => {
                Stmt::Assign { targets: targets.iter().map(n).collect(), rhs: rhs.rename(f) }
            }
            Stmt::HidVar { name, domain, rhs } => {
                Stmt::HidVar { name: n(name), domain: domain.clone(), rhs: rhs.rename(f) }
            }
            Stmt::Unvar(x) => Stmt::Unvar(n(x)),
            Stmt::If { guard, then, els } => {
                Stmt::If { guard: guard.rename(f), then: Box::new(then.rename(f)), els: Box::new(els.rename(f)) }
            }
            Stmt::While { guard, body } => Stmt::While { guard: guard.rename(f), body: Box::new(body.rename(f)) },
            Stmt::Print(d) => Stmt::Print(d.rename(f)),
            Stmt::Assert(g) => Stmt::Assert(g.rename(f)),
            Stmt::Seq(_) | Stmt::NonDet(..) => self.map_children(&mut |c| c.rename(f)),
            Stmt::Skip | Stmt::Abort | Stmt::Call(_) => self.clone(),
        }
    }

    /// Replaces every `call NAME` with the statement `f` provides.
    pub fn substitute_calls<E>(&self, f: &impl Fn(&str) -> Result<Stmt, E>) -> Result<Stmt, E> {
        Ok(match self {
            Stmt::Call(name) => f(name)?,
            Stmt::Seq(xs) => Stmt::seq(xs.iter().map(|x| x.substitute_calls(f)).collect::<Result<Vec<_>, E>>()?),
            Stmt::If { guard, then, els } => Stmt::If {
                guard: guard.clone(),
                then: Box::new(then.substitute_calls(f)?),
                els: Box::new(els.substitute_calls(f)?),
            },
            Stmt::While { guard, body } => {
                Stmt::While { guard: guard.clone(), body: Box::new(body.substitute_calls(f)?) }
            }
            Stmt::NonDet(a, b) => Stmt::nondet(a.substitute_calls(f)?, b.substitute_calls(f)?),
            other => other.clone(),
        })
    }
}

/// A program file: optional declarations of the initial context, then a body.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ProgramFile {
    pub context: Vec<Decl>,
    pub body: Stmt,
}

/// A datatype `(I, OP, F)` over shared and encapsulated variables.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DatatypeDef {
    pub shared: Vec<Decl>,
    pub encap: Vec<Decl>,
    pub init: Stmt,
    pub ops: Vec<(Name, Stmt)>,
    pub fin: Stmt,
}

impl DatatypeDef {
    pub fn op(&self, name: &str) -> Option<&Stmt> {
        self.ops.iter().find(|(n, _)| &**n == name).map(|(_, s)| s)
    }
}

/// A client program with `call` holes.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ContextDef {
    pub client: Vec<Decl>,
    pub body: Stmt,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum SourceFile {
    Program(ProgramFile),
    Datatype(DatatypeDef),
    Context(ContextDef),
}
