//! Sub-stochastic kernels between finite contexts and their dual
//! (linear, partial) predicate transformers.

use num_rational::BigRational;
use num_traits::{One, Zero};

use super::{AlgebraError, ExtRat, Predicate, SubDist, Var, VarContext};
use crate::algebra::predicate::same_ctx;

/// A kernel `src -> D≤ dst`, stored as sparse rows with strictly positive
/// entries sorted by destination index.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Kernel {
    src: VarContext,
    dst: VarContext,
    rows: Vec<Vec<(usize, BigRational)>>,
}

fn normalize_row(mut row: Vec<(usize, BigRational)>) -> Vec<(usize, BigRational)> {
    row.sort_by_key(|(j, _)| *j);
    let mut out: Vec<(usize, BigRational)> = Vec::with_capacity(row.len());
    for (j, p) in row {
        match out.last_mut() {
            Some((k, q)) if *k == j => *q += p,
            _ => out.push((j, p)),
        }
    }
    out.retain(|(_, p)| !p.is_zero());
    out
}

impl Kernel {
    pub fn new(
        src: VarContext,
        dst: VarContext,
        rows: Vec<Vec<(usize, BigRational)>>,
    ) -> Result<Self, AlgebraError> {
        if rows.len() != src.state_count() {
            return Err(AlgebraError::ContextMismatch(format!(
                "{} rows for {} source states",
                rows.len(),
                src.state_count()
            )));
        }
        let n = dst.state_count();
        let mut out = Vec::with_capacity(rows.len());
        for (i, row) in rows.into_iter().enumerate() {
            if row.iter().any(|(j, p)| *j >= n || p < &BigRational::zero()) {
                return Err(AlgebraError::BadKernel(format!("row {} has an invalid entry", i)));
            }
            let row = normalize_row(row);
            let sum: BigRational = row.iter().map(|(_, p)| p).sum();
            if sum > BigRational::one() {
                return Err(AlgebraError::BadKernel(format!(
                    "row {} ({}) sums to {}",
                    i,
                    src.show_state(i),
                    sum
                )));
            }
            out.push(row);
        }
        Ok(Kernel { src, dst, rows: out })
    }

    pub fn identity(ctx: &VarContext) -> Self {
        Kernel {
            src: ctx.clone(),
            dst: ctx.clone(),
            rows: (0..ctx.state_count()).map(|i| vec![(i, BigRational::one())]).collect(),
        }
    }

    /// Deterministic map between state indices.
    pub fn deterministic(
        src: &VarContext,
        dst: &VarContext,
        f: impl Fn(usize) -> usize,
    ) -> Result<Self, AlgebraError> {
        let rows = (0..src.state_count()).map(|i| vec![(f(i), BigRational::one())]).collect();
        Kernel::new(src.clone(), dst.clone(), rows)
    }

    /// Forgets the variables of `src` that are not in `dst`.
    pub fn projection(src: &VarContext, dst: &VarContext) -> Result<Self, AlgebraError> {
        let proj = src.projection_onto(dst)?;
        Kernel::deterministic(src, dst, |i| proj[i])
    }

    /// `Diag(y) = point mass at (y, y')` where the copy renames every variable
    /// with a trailing prime.
    pub fn diag(ctx: &VarContext) -> Result<Self, AlgebraError> {
        let copy = VarContext::new(
            ctx.vars().iter().map(|v| v.renamed(format!("{}'", v.name()))).collect::<Vec<Var>>(),
        )?;
        let dst = ctx.merge(&copy)?;
        let n = ctx.state_count();
        Kernel::deterministic(ctx, &dst, |i| i * n + i)
    }

    /// The assertion kernel `diag g`: stay put with probability `g(x)`.
    pub fn assertion(g: &Predicate) -> Result<Self, AlgebraError> {
        let rows = g
            .entries()
            .iter()
            .enumerate()
            .map(|(i, e)| match e {
                ExtRat::Fin(r) => Ok(vec![(i, r.clone())]),
                ExtRat::Inf => Err(AlgebraError::NotSubunit("infinite guard".into())),
            })
            .collect::<Result<Vec<_>, _>>()?;
        Kernel::new(g.ctx().clone(), g.ctx().clone(), rows)
    }

    pub fn src(&self) -> &VarContext {
        &self.src
    }

    pub fn dst(&self) -> &VarContext {
        &self.dst
    }

    pub fn rows(&self) -> &[Vec<(usize, BigRational)>] {
        &self.rows
    }

    pub fn row_sum(&self, i: usize) -> BigRational {
        self.rows[i].iter().map(|(_, p)| p).sum()
    }

    pub fn is_total(&self) -> bool {
        (0..self.rows.len()).all(|i| self.row_sum(i).is_one())
    }

    /// `f^T(e)(x) = Σ_y e(y) f(x)(y)`.
    pub fn dual_apply(&self, e: &Predicate) -> Result<Predicate, AlgebraError> {
        same_ctx(&self.dst, e.ctx())?;
        let entries = self
            .rows
            .iter()
            .map(|row| row.iter().map(|(j, p)| e.get(*j).mul_rat(p)).sum())
            .collect();
        Predicate::new(self.src.clone(), entries)
    }

    /// Pushes a sub-distribution forward.
    pub fn push(&self, d: &SubDist) -> Result<SubDist, AlgebraError> {
        same_ctx(&self.src, d.ctx())?;
        let mut out = vec![BigRational::zero(); self.dst.state_count()];
        for (row, m) in self.rows.iter().zip(d.mass()) {
            if m.is_zero() {
                continue;
            }
            for (j, p) in row {
                out[*j] += m * p;
            }
        }
        SubDist::new(self.dst.clone(), out)
    }

    /// Run `self`, then `next`.
    pub fn then(&self, next: &Kernel) -> Result<Kernel, AlgebraError> {
        same_ctx(&self.dst, &next.src)?;
        let rows = self
            .rows
            .iter()
            .map(|row| {
                let mut acc = Vec::new();
                for (j, p) in row {
                    for (k, q) in &next.rows[*j] {
                        acc.push((*k, p * q));
                    }
                }
                acc
            })
            .collect();
        Kernel::new(self.src.clone(), next.dst.clone(), rows)
    }

    /// Independent product over disjoint variable sets: the source is
    /// `self.src` followed by `other.src`, likewise the destination.
    pub fn tensor(&self, other: &Kernel) -> Result<Kernel, AlgebraError> {
        let src = self.src.merge(&other.src)?;
        let dst = self.dst.merge(&other.dst)?;
        let m = other.dst.state_count();
        let mut rows = Vec::with_capacity(src.state_count());
        for r1 in &self.rows {
            for r2 in &other.rows {
                let mut row = Vec::with_capacity(r1.len() * r2.len());
                for (j1, p1) in r1 {
                    for (j2, p2) in r2 {
                        row.push((j1 * m + j2, p1 * p2));
                    }
                }
                rows.push(row);
            }
        }
        Kernel::new(src, dst, rows)
    }

    /// The same kernel over permuted source and destination contexts.
    pub fn reorder(&self, src: &VarContext, dst: &VarContext) -> Result<Kernel, AlgebraError> {
        if !self.src.same_vars(src) || !self.dst.same_vars(dst) {
            return Err(AlgebraError::ContextMismatch("kernel reorder".into()));
        }
        let src_map = src.projection_onto(&self.src)?;
        let dst_back = self.dst.projection_onto(dst)?;
        let rows = src_map
            .iter()
            .map(|&i| self.rows[i].iter().map(|(j, p)| (dst_back[*j], p.clone())).collect())
            .collect();
        Kernel::new(src.clone(), dst.clone(), rows)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algebra::int_context;
    use crate::lang::parse_expr;

    fn half() -> BigRational {
        BigRational::new(1.into(), 2.into())
    }

    fn coin(ctx: &VarContext) -> Kernel {
        // ignores the source, flips a fair coin into `b`
        let b = int_context(&[("b", 2)]);
        let rows = (0..ctx.state_count()).map(|_| vec![(0, half()), (1, half())]).collect();
        Kernel::new(ctx.clone(), b, rows).unwrap()
    }

    #[test]
    fn identity_dual_is_identity() {
        let c = int_context(&[("n", 3)]);
        let e = Predicate::from_fn(&c, |i| ExtRat::from_int(i as u64 + 1));
        assert_eq!(Kernel::identity(&c).dual_apply(&e).unwrap(), e);
    }

    #[test]
    fn fair_coin_dual() {
        let c = int_context(&[("x", 2)]);
        let b = int_context(&[("b", 2)]);
        let e = Predicate::indicator(&b, &parse_expr("b = 0").unwrap()).unwrap();
        let got = coin(&c).dual_apply(&e).unwrap();
        assert_eq!(got, Predicate::constant(&c, ExtRat::from_ratio(1, 2)));
    }

    #[test]
    fn partial_kernel_has_partial_dual() {
        let c = int_context(&[("x", 2)]);
        let rows = vec![vec![(0, half())], vec![(0, half())]];
        let k = Kernel::new(c.clone(), c.clone(), rows).unwrap();
        assert_eq!(
            k.dual_apply(&Predicate::ones(&c)).unwrap(),
            Predicate::constant(&c, ExtRat::from_ratio(1, 2))
        );
        assert!(!k.is_total());
    }

    #[test]
    fn overfull_rows_rejected() {
        let c = int_context(&[("x", 2)]);
        let rows = vec![vec![(0, half()), (1, BigRational::one())], vec![]];
        assert!(Kernel::new(c.clone(), c, rows).is_err());
    }

    #[test]
    fn identity_tensor_identity() {
        let a = int_context(&[("x", 2)]);
        let b = int_context(&[("y", 3)]);
        let t = Kernel::identity(&a).tensor(&Kernel::identity(&b)).unwrap();
        assert_eq!(t, Kernel::identity(&a.merge(&b).unwrap()));
    }

    #[test]
    fn tensor_acts_on_rectangles() {
        let x = int_context(&[("x", 2)]);
        let z = int_context(&[("z", 2)]);
        let f = coin(&x);
        let g = Kernel::identity(&z);
        let e1 = Predicate::new(f.dst().clone(), vec![ExtRat::from_int(2), ExtRat::from_int(4)]).unwrap();
        let e2 = Predicate::new(z.clone(), vec![ExtRat::from_int(1), ExtRat::from_ratio(1, 3)]).unwrap();
        let lhs = f.tensor(&g).unwrap().dual_apply(&e1.tensor(&e2).unwrap()).unwrap();
        let rhs = f.dual_apply(&e1).unwrap().tensor(&g.dual_apply(&e2).unwrap()).unwrap();
        assert_eq!(lhs, rhs);
    }

    #[test]
    fn partial_tensor_partial() {
        let x = int_context(&[("x", 2)]);
        let y = int_context(&[("y", 2)]);
        let fx = Kernel::new(x.clone(), x.clone(), vec![vec![(0, half())], vec![(1, BigRational::one())]]).unwrap();
        let fy = Kernel::new(y.clone(), y.clone(), vec![vec![], vec![(0, half())]]).unwrap();
        let t = fx.tensor(&fy).unwrap();
        let one = t.dual_apply(&Predicate::ones(t.dst())).unwrap();
        assert!(one.le(&Predicate::ones(t.src())).unwrap());
    }

    #[test]
    fn diagonal_copies() {
        let y = int_context(&[("y", 3)]);
        let d = Kernel::diag(&y).unwrap();
        let eq = Predicate::indicator(d.dst(), &parse_expr("y = y'").unwrap()).unwrap();
        assert_eq!(d.dual_apply(&eq).unwrap(), Predicate::ones(&y));
        let e = Predicate::from_fn(&y, |i| ExtRat::from_int(i as u64 + 2));
        let e2 = Predicate::from_fn(&y, |i| ExtRat::from_ratio(1, i as i64 + 1));
        let copy = VarContext::new(vec![y.vars()[0].renamed("y'")]).unwrap();
        let e2c = Predicate::new(copy, e2.entries().to_vec()).unwrap();
        let got = d.dual_apply(&e.tensor(&e2c).unwrap()).unwrap();
        assert_eq!(got, e.conj(&e2).unwrap());
    }

    #[test]
    fn composition_matches_dual_composition() {
        let x = int_context(&[("x", 2)]);
        let f = coin(&x);
        let b = f.dst().clone();
        let flip = Kernel::deterministic(&b, &b, |i| 1 - i).unwrap();
        let e = Predicate::new(b.clone(), vec![ExtRat::from_int(3), ExtRat::zero()]).unwrap();
        let lhs = f.then(&flip).unwrap().dual_apply(&e).unwrap();
        let rhs = f.dual_apply(&flip.dual_apply(&e).unwrap()).unwrap();
        assert_eq!(lhs, rhs);
    }
}
