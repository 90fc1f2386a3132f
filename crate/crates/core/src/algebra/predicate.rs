//! Extended-rational-valued predicates over a finite context, and
//! sub-distributions over the same state spaces.

use std::fmt;

use num_rational::BigRational;
use num_traits::{One, Zero};

use super::{AlgebraError, ExtRat, VarContext};
use crate::lang::{eval_expr, Env, Expr};

#[derive(Clone, PartialEq, Eq)]
pub struct Predicate {
    ctx: VarContext,
    entries: Vec<ExtRat>,
}

pub(crate) fn same_ctx(a: &VarContext, b: &VarContext) -> Result<(), AlgebraError> {
    if a == b {
        Ok(())
    } else {
        Err(AlgebraError::ContextMismatch(format!("[{}] vs [{}]", a, b)))
    }
}

impl Predicate {
    pub fn new(ctx: VarContext, entries: Vec<ExtRat>) -> Result<Self, AlgebraError> {
        if entries.len() != ctx.state_count() {
            return Err(AlgebraError::ContextMismatch(format!(
                "{} entries for {} states",
                entries.len(),
                ctx.state_count()
            )));
        }
        Ok(Predicate { ctx, entries })
    }

    pub fn constant(ctx: &VarContext, c: ExtRat) -> Self {
        Predicate { ctx: ctx.clone(), entries: vec![c; ctx.state_count()] }
    }

    pub fn zero(ctx: &VarContext) -> Self {
        Predicate::constant(ctx, ExtRat::zero())
    }

    pub fn ones(ctx: &VarContext) -> Self {
        Predicate::constant(ctx, ExtRat::one())
    }

    /// The point indicator of a single state.
    pub fn point(ctx: &VarContext, index: usize) -> Self {
        let mut p = Predicate::zero(ctx);
        p.entries[index] = ExtRat::one();
        p
    }

    pub fn from_fn(ctx: &VarContext, f: impl FnMut(usize) -> ExtRat) -> Self {
        Predicate { ctx: ctx.clone(), entries: (0..ctx.state_count()).map(f).collect() }
    }

    /// The 0/1 indicator of a boolean expression over `ctx`.
    pub fn indicator(ctx: &VarContext, expr: &Expr) -> Result<Self, AlgebraError> {
        let mut entries = Vec::with_capacity(ctx.state_count());
        for idx in 0..ctx.state_count() {
            let digits = ctx.decode(idx);
            let v = eval_expr(expr, &Env::new(ctx, &digits))
                .map_err(|e| AlgebraError::Expr(e.to_string()))?;
            if v.is_true() {
                entries.push(ExtRat::one());
            } else if v.is_false() {
                entries.push(ExtRat::zero());
            } else {
                return Err(AlgebraError::Expr(format!(
                    "`{}` is not boolean at state {}",
                    expr,
                    ctx.show_state(idx)
                )));
            }
        }
        Ok(Predicate { ctx: ctx.clone(), entries })
    }

    /// A nonnegative numeric expression as a predicate.
    pub fn from_expr(ctx: &VarContext, expr: &Expr) -> Result<Self, AlgebraError> {
        let mut entries = Vec::with_capacity(ctx.state_count());
        for idx in 0..ctx.state_count() {
            let digits = ctx.decode(idx);
            let v = eval_expr(expr, &Env::new(ctx, &digits))
                .map_err(|e| AlgebraError::Expr(e.to_string()))?;
            match v.as_num() {
                Some(r) => entries.push(ExtRat::new(r.clone())?),
                None => {
                    return Err(AlgebraError::Expr(format!(
                        "`{}` is not numeric at state {}",
                        expr,
                        ctx.show_state(idx)
                    )))
                }
            }
        }
        Ok(Predicate { ctx: ctx.clone(), entries })
    }

    pub fn ctx(&self) -> &VarContext {
        &self.ctx
    }

    pub fn entries(&self) -> &[ExtRat] {
        &self.entries
    }

    pub fn get(&self, index: usize) -> &ExtRat {
        &self.entries[index]
    }

    pub fn is_zero(&self) -> bool {
        self.entries.iter().all(ExtRat::is_zero)
    }

    pub fn is_finite(&self) -> bool {
        self.entries.iter().all(|e| !e.is_inf())
    }

    pub fn add(&self, other: &Predicate) -> Result<Predicate, AlgebraError> {
        same_ctx(&self.ctx, &other.ctx)?;
        Ok(self.zip(other, |a, b| a + b))
    }

    pub fn scale(&self, r: &ExtRat) -> Predicate {
        self.map(|a| r * a)
    }

    /// Pointwise product.
    pub fn conj(&self, other: &Predicate) -> Result<Predicate, AlgebraError> {
        same_ctx(&self.ctx, &other.ctx)?;
        Ok(self.zip(other, |a, b| a * b))
    }

    /// `1 - e`, defined when `e <= 1`.
    pub fn complement(&self) -> Result<Predicate, AlgebraError> {
        let one = ExtRat::one();
        let entries = self
            .entries
            .iter()
            .enumerate()
            .map(|(i, e)| {
                one.checked_sub(e).ok_or_else(|| {
                    AlgebraError::NotSubunit(format!("{} at {}", e, self.ctx.show_state(i)))
                })
            })
            .collect::<Result<Vec<_>, _>>()?;
        Ok(Predicate { ctx: self.ctx.clone(), entries })
    }

    /// Pointwise `self <= other`.
    pub fn le(&self, other: &Predicate) -> Result<bool, AlgebraError> {
        same_ctx(&self.ctx, &other.ctx)?;
        Ok(self.entries.iter().zip(&other.entries).all(|(a, b)| a <= b))
    }

    /// Context extension: the same values, constant in the extra variables,
    /// which are placed after the existing ones.
    pub fn extend(&self, extra: &VarContext) -> Result<Predicate, AlgebraError> {
        let ctx = self.ctx.merge(extra)?;
        let k = extra.state_count();
        let entries = self
            .entries
            .iter()
            .flat_map(|e| std::iter::repeat(e.clone()).take(k))
            .collect();
        Ok(Predicate { ctx, entries })
    }

    /// `(self ⊗ other)(x, y) = self(x) · other(y)` over the merged context.
    pub fn tensor(&self, other: &Predicate) -> Result<Predicate, AlgebraError> {
        let ctx = self.ctx.merge(&other.ctx)?;
        let entries = self
            .entries
            .iter()
            .flat_map(|a| other.entries.iter().map(move |b| a * b))
            .collect();
        Ok(Predicate { ctx, entries })
    }

    /// The same predicate over a permutation of its context.
    pub fn reorder(&self, target: &VarContext) -> Result<Predicate, AlgebraError> {
        if &self.ctx == target {
            return Ok(self.clone());
        }
        if !self.ctx.same_vars(target) {
            return Err(AlgebraError::ContextMismatch(format!("[{}] vs [{}]", self.ctx, target)));
        }
        let proj = target.projection_onto(&self.ctx)?;
        Ok(Predicate {
            ctx: target.clone(),
            entries: proj.into_iter().map(|i| self.entries[i].clone()).collect(),
        })
    }

    /// `Σ_x self(x) · d(x)`.
    pub fn expect(&self, d: &SubDist) -> Result<ExtRat, AlgebraError> {
        same_ctx(&self.ctx, &d.ctx)?;
        Ok(self.entries.iter().zip(&d.mass).map(|(e, m)| e.mul_rat(m)).sum())
    }

    pub fn map(&self, f: impl Fn(&ExtRat) -> ExtRat) -> Predicate {
        Predicate { ctx: self.ctx.clone(), entries: self.entries.iter().map(f).collect() }
    }

    fn zip(&self, other: &Predicate, f: impl Fn(&ExtRat, &ExtRat) -> ExtRat) -> Predicate {
        Predicate {
            ctx: self.ctx.clone(),
            entries: self.entries.iter().zip(&other.entries).map(|(a, b)| f(a, b)).collect(),
        }
    }
}

impl fmt::Debug for Predicate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self)
    }
}

impl fmt::Display for Predicate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut first = true;
        write!(f, "{{")?;
        for (i, e) in self.entries.iter().enumerate() {
            if e.is_zero() {
                continue;
            }
            if !first {
                write!(f, " ")?;
            }
            first = false;
            write!(f, "{}={}", self.ctx.show_state(i), e)?;
        }
        write!(f, "}}")
    }
}

/// A sub-probability distribution over the states of a context.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct SubDist {
    ctx: VarContext,
    mass: Vec<BigRational>,
}

impl SubDist {
    pub fn new(ctx: VarContext, mass: Vec<BigRational>) -> Result<Self, AlgebraError> {
        if mass.len() != ctx.state_count() {
            return Err(AlgebraError::ContextMismatch(format!(
                "{} weights for {} states",
                mass.len(),
                ctx.state_count()
            )));
        }
        if mass.iter().any(|m| m < &BigRational::zero()) {
            return Err(AlgebraError::Negative("distribution weight".into()));
        }
        let total: BigRational = mass.iter().sum();
        if total > BigRational::one() {
            return Err(AlgebraError::NotSubunit(format!("total mass {}", total)));
        }
        Ok(SubDist { ctx, mass })
    }

    pub fn zero(ctx: &VarContext) -> Self {
        SubDist { ctx: ctx.clone(), mass: vec![BigRational::zero(); ctx.state_count()] }
    }

    pub fn point(ctx: &VarContext, index: usize) -> Self {
        let mut d = SubDist::zero(ctx);
        d.mass[index] = BigRational::one();
        d
    }

    pub fn uniform(ctx: &VarContext) -> Self {
        let n = ctx.state_count();
        let w = BigRational::new(1.into(), (n as i64).into());
        SubDist { ctx: ctx.clone(), mass: vec![w; n] }
    }

    pub fn ctx(&self) -> &VarContext {
        &self.ctx
    }

    pub fn mass(&self) -> &[BigRational] {
        &self.mass
    }

    pub fn total(&self) -> BigRational {
        self.mass.iter().sum()
    }

    pub fn reorder(&self, target: &VarContext) -> Result<SubDist, AlgebraError> {
        if &self.ctx == target {
            return Ok(self.clone());
        }
        if !self.ctx.same_vars(target) {
            return Err(AlgebraError::ContextMismatch(format!("[{}] vs [{}]", self.ctx, target)));
        }
        let proj = target.projection_onto(&self.ctx)?;
        Ok(SubDist { ctx: target.clone(), mass: proj.into_iter().map(|i| self.mass[i].clone()).collect() })
    }

    /// Product with an independent distribution over disjoint variables.
    pub fn tensor(&self, other: &SubDist) -> Result<SubDist, AlgebraError> {
        let ctx = self.ctx.merge(&other.ctx)?;
        let mass = self.mass.iter().flat_map(|a| other.mass.iter().map(move |b| a * b)).collect();
        Ok(SubDist { ctx, mass })
    }
}

impl fmt::Display for SubDist {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self
            .mass
            .iter()
            .enumerate()
            .filter(|(_, m)| !m.is_zero())
            .map(|(i, m)| format!("{}={}", self.ctx.show_state(i), m))
            .collect();
        write!(f, "{}", parts.join(" "))
    }
}
