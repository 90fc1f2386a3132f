//! Expression evaluation at a single state.

use std::collections::BTreeSet;
use std::sync::Arc;

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use thiserror::Error;

use super::ast::{BinOp, DistExpr, Expr, Name};
use crate::algebra::{Value, VarContext};

#[derive(Debug, Clone, Error, PartialEq, Eq)]
pub enum EvalError {
    #[error("unbound variable `{0}`")]
    Unbound(String),
    #[error("type error: {0}")]
    Type(String),
    #[error("division by zero")]
    DivZero,
    #[error("index {0} out of bounds for length {1}")]
    Index(String, usize),
    #[error("unknown function `{0}`")]
    UnknownFn(String),
    #[error("bad distribution: {0}")]
    Dist(String),
}

pub type AtomSet = BTreeSet<Name>;

/// Every atom occurring in the domains of `ctx`.
pub fn atoms_of(ctx: &VarContext, out: &mut AtomSet) {
    for var in ctx.vars() {
        for v in var.domain() {
            atoms_in(v, out);
        }
    }
}

pub fn atoms_in(v: &Value, out: &mut AtomSet) {
    match v {
        Value::Num(_) => {}
        Value::Atom(a) => {
            out.insert(a.clone());
        }
        Value::Array(xs) => xs.iter().for_each(|x| atoms_in(x, out)),
    }
}

/// A state: the context and a digit per variable.
pub struct Env<'a> {
    ctx: &'a VarContext,
    digits: &'a [usize],
    atoms: Option<&'a AtomSet>,
}

impl<'a> Env<'a> {
    pub fn new(ctx: &'a VarContext, digits: &'a [usize]) -> Self {
        Env { ctx, digits, atoms: None }
    }

    /// Also accepts the given atoms, beyond those in `ctx`'s domains.
    pub fn with_atoms(ctx: &'a VarContext, digits: &'a [usize], atoms: &'a AtomSet) -> Self {
        Env { ctx, digits, atoms: Some(atoms) }
    }

    fn lookup(&self, name: &str) -> Result<Value, EvalError> {
        if let Some(p) = self.ctx.position(name) {
            return Ok(self.ctx.vars()[p].domain()[self.digits[p]].clone());
        }
        let known = match self.atoms {
            Some(a) => a.contains(name),
            None => {
                let mut a = AtomSet::new();
                atoms_of(self.ctx, &mut a);
                a.contains(name)
            }
        };
        if known {
            Ok(Value::Atom(Arc::from(name)))
        } else {
            Err(EvalError::Unbound(name.to_string()))
        }
    }
}

fn num(v: Value, what: &str) -> Result<BigRational, EvalError> {
    match v {
        Value::Num(r) => Ok(r),
        other => Err(EvalError::Type(format!("{} expects a number, got {}", what, other))),
    }
}

fn boolean(v: Value, what: &str) -> Result<bool, EvalError> {
    if v.is_true() {
        Ok(true)
    } else if v.is_false() {
        Ok(false)
    } else {
        Err(EvalError::Type(format!("{} expects a boolean, got {}", what, v)))
    }
}

fn integer(r: &BigRational, what: &str) -> Result<BigInt, EvalError> {
    if r.is_integer() {
        Ok(r.to_integer())
    } else {
        Err(EvalError::Type(format!("{} expects an integer, got {}", what, r)))
    }
}

fn array(v: Value, what: &str) -> Result<Vec<Value>, EvalError> {
    match v {
        Value::Array(xs) => Ok(xs),
        other => Err(EvalError::Type(format!("{} expects an array, got {}", what, other))),
    }
}

pub fn eval_expr(e: &Expr, env: &Env) -> Result<Value, EvalError> {
    match e {
        Expr::Num(r) => Ok(Value::Num(r.clone())),
        Expr::Bool(b) => Ok(Value::bool(*b)),
        Expr::Ident(n) => env.lookup(n),
        Expr::Array(xs) | Expr::Tuple(xs) => {
            Ok(Value::Array(xs.iter().map(|x| eval_expr(x, env)).collect::<Result<_, _>>()?))
        }
        Expr::Not(a) => Ok(Value::bool(!boolean(eval_expr(a, env)?, "not")?)),
        Expr::Index(a, i) => {
            let xs = array(eval_expr(a, env)?, "indexing")?;
            let i = integer(&num(eval_expr(i, env)?, "an index")?, "an index")?;
            match i.to_usize() {
                Some(k) if k < xs.len() => Ok(xs[k].clone()),
                _ => Err(EvalError::Index(i.to_string(), xs.len())),
            }
        }
        Expr::Call(g, args) => {
            let vs = args.iter().map(|x| eval_expr(x, env)).collect::<Result<Vec<_>, _>>()?;
            call(g, vs)
        }
        Expr::Binary(op, a, b) => binary(*op, a, b, env),
    }
}

fn binary(op: BinOp, a: &Expr, b: &Expr, env: &Env) -> Result<Value, EvalError> {
    let sym = op.symbol();
    match op {
        BinOp::And => {
            if !boolean(eval_expr(a, env)?, sym)? {
                return Ok(Value::bool(false));
            }
            return Ok(Value::bool(boolean(eval_expr(b, env)?, sym)?));
        }
        BinOp::Or => {
            if boolean(eval_expr(a, env)?, sym)? {
                return Ok(Value::bool(true));
            }
            return Ok(Value::bool(boolean(eval_expr(b, env)?, sym)?));
        }
        _ => {}
    }
    let x = eval_expr(a, env)?;
    let y = eval_expr(b, env)?;
    Ok(match op {
        BinOp::Xor => Value::bool(boolean(x, sym)? != boolean(y, sym)?),
        BinOp::Eq => Value::bool(x == y),
        BinOp::Ne => Value::bool(x != y),
        BinOp::In => Value::bool(array(y, sym)?.contains(&x)),
        BinOp::Lt | BinOp::Le | BinOp::Gt | BinOp::Ge => {
            let (x, y) = (num(x, sym)?, num(y, sym)?);
            Value::bool(match op {
                BinOp::Lt => x < y,
                BinOp::Le => x <= y,
                BinOp::Gt => x > y,
                _ => x >= y,
            })
        }
        BinOp::Add => Value::Num(num(x, sym)? + num(y, sym)?),
        BinOp::Sub => Value::Num(num(x, sym)? - num(y, sym)?),
        BinOp::Mul => Value::Num(num(x, sym)? * num(y, sym)?),
        BinOp::Div => {
            let d = num(y, sym)?;
            if d.is_zero() {
                return Err(EvalError::DivZero);
            }
            Value::Num(num(x, sym)? / d)
        }
        BinOp::IntDiv => {
            let d = num(y, sym)?;
            if d.is_zero() {
                return Err(EvalError::DivZero);
            }
            Value::Num((num(x, sym)? / d).floor())
        }
        BinOp::Mod => {
            let m = integer(&num(y, sym)?, sym)?;
            if m.is_zero() {
                return Err(EvalError::DivZero);
            }
            let n = integer(&num(x, sym)?, sym)?;
            Value::Num(BigRational::from_integer(n.mod_floor(&m.abs())))
        }
        BinOp::And | BinOp::Or => unreachable!(),
    })
}

fn call(g: &str, vs: Vec<Value>) -> Result<Value, EvalError> {
    match g {
        "distinct" => {
            let xs = match vs.as_slice() {
                [Value::Array(xs)] => xs.clone(),
                _ => vs,
            };
            let set: BTreeSet<&Value> = xs.iter().collect();
            Ok(Value::bool(set.len() == xs.len()))
        }
        "len" => match vs.as_slice() {
            [Value::Array(xs)] => Ok(Value::int(xs.len() as i64)),
            _ => Err(EvalError::Type("len expects one array".into())),
        },
        "min" | "max" => {
            let xs = match vs.as_slice() {
                [Value::Array(xs)] => xs.clone(),
                _ => vs,
            };
            let mut ns = xs.into_iter().map(|v| num(v, g)).collect::<Result<Vec<_>, _>>()?;
            ns.sort();
            let pick = if g == "min" { ns.first() } else { ns.last() };
            pick.cloned().map(Value::Num).ok_or_else(|| EvalError::Type(format!("{} of nothing", g)))
        }
        _ => Err(EvalError::UnknownFn(g.to_string())),
    }
}

/// The distribution denoted at one state: distinct values with positive
/// weights summing to at most one, in order of first appearance.
pub fn eval_dist(d: &DistExpr, env: &Env) -> Result<Vec<(Value, BigRational)>, EvalError> {
    let mut raw: Vec<(Value, BigRational)> = Vec::new();
    match d {
        DistExpr::Weighted(bs) => {
            let mut used = BigRational::zero();
            for (e, w) in bs {
                let w = match w {
                    Some(w) => w.clone(),
                    None => BigRational::one() - &used,
                };
                if w.is_negative() {
                    return Err(EvalError::Dist(format!("weights of `{}` exceed 1", d)));
                }
                used += &w;
                raw.push((eval_expr(e, env)?, w));
            }
            if used > BigRational::one() {
                return Err(EvalError::Dist(format!("weights of `{}` sum to {}", d, used)));
            }
        }
        DistExpr::Uniform(es) => {
            let w = BigRational::new(One::one(), BigInt::from(es.len()));
            for e in es {
                raw.push((eval_expr(e, env)?, w.clone()));
            }
        }
        DistExpr::UniformRange(lo, hi) => {
            let lo = integer(&num(eval_expr(lo, env)?, "uniform")?, "uniform")?;
            let hi = integer(&num(eval_expr(hi, env)?, "uniform")?, "uniform")?;
            if hi < lo {
                return Err(EvalError::Dist(format!("empty range {}..{}", lo, hi)));
            }
            let count = &hi - &lo + 1;
            let w = BigRational::new(One::one(), count);
            let mut k = lo;
            while k <= hi {
                raw.push((Value::Num(BigRational::from_integer(k.clone())), w.clone()));
                k += 1;
            }
        }
    }
    let mut out: Vec<(Value, BigRational)> = Vec::with_capacity(raw.len());
    for (v, w) in raw {
        if w.is_zero() {
            continue;
        }
        match out.iter_mut().find(|(u, _)| *u == v) {
            Some((_, acc)) => *acc += w,
            None => out.push((v, w)),
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algebra::{int_context, Var};
    use crate::lang::parse_expr;

    fn at(ctx: &VarContext, digits: &[usize], src: &str) -> Result<Value, EvalError> {
        eval_expr(&parse_expr(src).unwrap(), &Env::new(ctx, digits))
    }

    #[test]
    fn arithmetic() {
        let c = int_context(&[("n", 4), ("b", 2)]);
        assert_eq!(at(&c, &[3, 1], "(n + b) mod 2 = 0").unwrap(), Value::bool(true));
        assert_eq!(at(&c, &[3, 1], "n div 2").unwrap(), Value::int(1));
        assert_eq!(at(&c, &[0, 0], "-7 mod 3").unwrap(), Value::int(2));
        assert_eq!(at(&c, &[0, 0], "-7 div 2").unwrap(), Value::int(-4));
        assert_eq!(at(&c, &[1, 0], "n / 2").unwrap(), Value::Num(BigRational::new(1.into(), 2.into())));
        assert_eq!(at(&c, &[0, 0], "n / 0"), Err(EvalError::DivZero));
        assert_eq!(at(&c, &[0, 0], "z"), Err(EvalError::Unbound("z".into())));
    }

    #[test]
    fn short_circuit_guards_out_of_range_index() {
        let arr = Value::Array(vec![Value::atom("a"), Value::atom("b")]);
        let c = VarContext::new(vec![
            Var::new("H", vec![arr]).unwrap(),
            Var::range("n", 0, 2).unwrap(),
            Var::new("x", vec![Value::atom("a"), Value::atom("b")]).unwrap(),
        ])
        .unwrap();
        assert_eq!(at(&c, &[0, 2, 0], "n != 2 && H[n] != x").unwrap(), Value::bool(false));
        assert!(matches!(at(&c, &[0, 2, 0], "H[n] != x"), Err(EvalError::Index(..))));
        assert_eq!(at(&c, &[0, 1, 0], "H[n] = b").unwrap(), Value::bool(true));
        assert_eq!(at(&c, &[0, 1, 0], "x in H").unwrap(), Value::bool(true));
        assert_eq!(at(&c, &[0, 1, 0], "distinct(H)").unwrap(), Value::bool(true));
        assert_eq!(at(&c, &[0, 1, 0], "distinct([a, a])").unwrap(), Value::bool(false));
        assert_eq!(at(&c, &[0, 1, 0], "len(H) + max(n, 5)").unwrap(), Value::int(7));
    }

    #[test]
    fn distributions() {
        let c = int_context(&[("n", 4)]);
        let d = |src: &str| {
            let s = crate::lang::parse_program(&format!("n := {}", src)).unwrap();
            let crate::lang::Stmt::Assign { rhs, .. } = s else { panic!() };
            eval_dist(&rhs, &Env::new(&c, &[1]))
        };
        let half = BigRational::new(1.into(), 2.into());
        assert_eq!(d("0 @ 1/2 | 1").unwrap(), vec![(Value::int(0), half.clone()), (Value::int(1), half.clone())]);
        assert_eq!(d("n @ 1/2 | 1").unwrap(), vec![(Value::int(1), BigRational::one())]);
        assert_eq!(d("0 @ 1/4").unwrap(), vec![(Value::int(0), BigRational::new(1.into(), 4.into()))]);
        assert!(d("0 @ 3/4 | 1 @ 1/2").is_err());
        assert_eq!(d("uniform(0..3)").unwrap().len(), 4);
        assert_eq!(d("uniform(n, 1)").unwrap(), vec![(Value::int(1), BigRational::one())]);
    }
}
