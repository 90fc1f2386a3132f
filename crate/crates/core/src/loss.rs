//! Loss functions: finitely generated upper convex sets of predicates.
//!
//! A [`LossFunction`] stores generators; its meaning is the upper convex
//! closure of that list. Comparisons are always semantic. Membership is
//! decided by an exact LP that also yields a certificate either way: convex
//! weights when the predicate is a member, or a separating distribution over
//! states when it is not.

use std::cmp::Ordering;
use std::fmt;

use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

use crate::algebra::{AlgebraError, ExtRat, Kernel, Predicate, SubDist, VarContext};
use crate::lp::{maximize, maximize_approx, LpOutcome};

#[derive(Clone)]
pub struct LossFunction {
    ctx: VarContext,
    gens: Vec<Predicate>,
    canonical: bool,
}

/// Outcome of a membership query, with its certificate.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Membership {
    /// Convex weights, one per generator, whose combination is `<= e`.
    Member { weights: Vec<BigRational> },
    /// A distribution `w` with `<w, e>` strictly below every generator.
    NonMember { witness: SubDist },
}

impl Membership {
    pub fn is_member(&self) -> bool {
        matches!(self, Membership::Member { .. })
    }

    /// Re-checks the certificate by direct arithmetic.
    pub fn verify(&self, e: &Predicate, loss: &LossFunction) -> bool {
        match self {
            Membership::Member { weights } => {
                if weights.len() != loss.gens.len()
                    || weights.iter().any(|w| w.is_negative())
                    || weights.iter().sum::<BigRational>() != BigRational::one()
                {
                    return false;
                }
                (0..loss.ctx.state_count()).all(|x| {
                    let combo: ExtRat =
                        loss.gens.iter().zip(weights).map(|(g, w)| g.get(x).mul_rat(w)).sum();
                    &combo <= e.get(x)
                })
            }
            Membership::NonMember { witness } => {
                if witness.total() != BigRational::one() {
                    return false;
                }
                let Ok(lhs) = e.expect(witness) else { return false };
                loss.gens.iter().all(|g| g.expect(witness).map(|v| lhs < v).unwrap_or(false))
            }
        }
    }
}

fn cmp_preds(a: &Predicate, b: &Predicate) -> Ordering {
    a.entries().cmp(b.entries())
}

impl LossFunction {
    pub fn new(ctx: &VarContext, gens: Vec<Predicate>) -> Result<Self, AlgebraError> {
        if gens.is_empty() {
            return Err(AlgebraError::EmptyLoss);
        }
        for g in &gens {
            crate::algebra::same_ctx(ctx, g.ctx())?;
        }
        Ok(LossFunction { ctx: ctx.clone(), gens, canonical: false })
    }

    /// The principal filter of one predicate.
    pub fn embed(e: Predicate) -> Self {
        LossFunction { ctx: e.ctx().clone(), gens: vec![e], canonical: true }
    }

    /// `embed(0)`, the least loss function.
    pub fn bottom(ctx: &VarContext) -> Self {
        LossFunction::embed(Predicate::zero(ctx))
    }

    pub fn ctx(&self) -> &VarContext {
        &self.ctx
    }

    pub fn gens(&self) -> &[Predicate] {
        &self.gens
    }

    pub fn is_canonical(&self) -> bool {
        self.canonical
    }

    /// Semantically equal to `embed(0)`.
    pub fn is_bottom(&self) -> bool {
        self.gens.iter().any(Predicate::is_zero)
    }

    fn check(&self, ctx: &VarContext) -> Result<(), AlgebraError> {
        crate::algebra::same_ctx(&self.ctx, ctx)
    }

    /// Decides whether `e` lies in the upper convex closure of the generators.
    pub fn member(&self, e: &Predicate) -> Result<Membership, AlgebraError> {
        self.check(e.ctx())?;
        Ok(member_of(&self.gens, e))
    }

    pub fn contains(&self, e: &Predicate) -> Result<bool, AlgebraError> {
        Ok(self.member(e)?.is_member())
    }

    /// `self ⊑ other`: every generator of `other` belongs to `self`.
    pub fn refines(&self, other: &LossFunction) -> Result<bool, AlgebraError> {
        Ok(self.refinement_gap(other)?.is_none())
    }

    /// The first generator of `other` outside `self`, with its separating
    /// distribution, or `None` when `self ⊑ other`.
    pub fn refinement_gap(&self, other: &LossFunction) -> Result<Option<(Predicate, SubDist)>, AlgebraError> {
        self.check(&other.ctx)?;
        for g in &other.gens {
            if let Membership::NonMember { witness } = member_of(&self.gens, g) {
                return Ok(Some((g.clone(), witness)));
            }
        }
        Ok(None)
    }

    pub fn equals(&self, other: &LossFunction) -> Result<bool, AlgebraError> {
        Ok(self.refines(other)? && other.refines(self)?)
    }

    /// Removes every generator lying in the upper convex closure of the others.
    pub fn canonicalize(&self) -> LossFunction {
        if self.canonical {
            return self.clone();
        }
        let mut gens = self.gens.clone();
        gens.sort_by(cmp_preds);
        gens.dedup();
        // cheap pass: pointwise domination by some other generator
        let mut keep = vec![true; gens.len()];
        for i in 0..gens.len() {
            for j in 0..gens.len() {
                if i != j && keep[j] && gens[j].entries().iter().zip(gens[i].entries()).all(|(a, b)| a <= b) {
                    keep[i] = false;
                    break;
                }
            }
        }
        let mut gens: Vec<Predicate> =
            gens.into_iter().zip(keep).filter(|(_, k)| *k).map(|(g, _)| g).collect();
        // exact pass: convex domination, screening obvious extreme points first
        let mut approx: Vec<Option<Vec<f64>>> = gens.iter().map(as_floats).collect();
        let mut i = 0;
        while i < gens.len() && gens.len() > 1 {
            if separated(&gens, &approx, i) {
                i += 1;
                continue;
            }
            let others: Vec<Predicate> =
                gens.iter().enumerate().filter(|(j, _)| *j != i).map(|(_, g)| g.clone()).collect();
            if member_of(&others, &gens[i]).is_member() {
                gens.remove(i);
                approx.remove(i);
            } else {
                i += 1;
            }
        }
        LossFunction { ctx: self.ctx.clone(), gens, canonical: true }
    }

    /// Minkowski sum `self + other`.
    pub fn add(&self, other: &LossFunction) -> Result<LossFunction, AlgebraError> {
        self.check(&other.ctx)?;
        let a = self.canonicalize();
        let b = other.canonicalize();
        let mut gens = Vec::with_capacity(a.gens.len() * b.gens.len());
        for g in &a.gens {
            for h in &b.gens {
                gens.push(g.add(h)?);
            }
        }
        // canonical summands on disjoint supports have only extreme sums
        let canonical = disjoint(&support(&a), &support(&b));
        if canonical {
            gens.sort_by(cmp_preds);
        }
        let sum = LossFunction { ctx: self.ctx.clone(), gens, canonical };
        Ok(sum.canonicalize())
    }

    pub fn scale(&self, r: &ExtRat) -> LossFunction {
        if r.is_zero() {
            return LossFunction::bottom(&self.ctx);
        }
        let gens = self.gens.iter().map(|g| g.scale(r)).collect();
        LossFunction { ctx: self.ctx.clone(), gens, canonical: false }.canonicalize()
    }

    /// The formal meet: union of generators.
    pub fn min(&self, other: &LossFunction) -> Result<LossFunction, AlgebraError> {
        self.check(&other.ctx)?;
        let mut gens = self.gens.clone();
        gens.extend(other.gens.iter().cloned());
        Ok(LossFunction { ctx: self.ctx.clone(), gens, canonical: false }.canonicalize())
    }

    /// Applies the dual of `f` to every generator.
    pub fn map(&self, f: &Kernel) -> Result<LossFunction, AlgebraError> {
        self.check(f.dst())?;
        let gens = self.gens.iter().map(|g| f.dual_apply(g)).collect::<Result<Vec<_>, _>>()?;
        Ok(LossFunction { ctx: f.src().clone(), gens, canonical: false }.canonicalize())
    }

    /// Applies an arbitrary generator-wise map; callers are responsible for
    /// the map being linear and monotone.
    pub fn map_gens(
        &self,
        ctx: &VarContext,
        f: impl Fn(&Predicate) -> Result<Predicate, AlgebraError>,
    ) -> Result<LossFunction, AlgebraError> {
        let gens = self.gens.iter().map(f).collect::<Result<Vec<_>, _>>()?;
        LossFunction::new(ctx, gens).map(|l| l.canonicalize())
    }

    /// `e ⊠ self`.
    pub fn conj(&self, e: &Predicate) -> Result<LossFunction, AlgebraError> {
        self.check(e.ctx())?;
        self.map_gens(&self.ctx, |g| e.conj(g))
    }

    /// Context extension of every generator.
    pub fn extend(&self, extra: &VarContext) -> Result<LossFunction, AlgebraError> {
        let ctx = self.ctx.merge(extra)?;
        self.map_gens(&ctx, |g| g.extend(extra))
    }

    pub fn reorder(&self, target: &VarContext) -> Result<LossFunction, AlgebraError> {
        if &self.ctx == target {
            return Ok(self.clone());
        }
        let gens = self.gens.iter().map(|g| g.reorder(target)).collect::<Result<Vec<_>, _>>()?;
        Ok(LossFunction { ctx: target.clone(), gens, canonical: self.canonical })
    }

    /// Bayes risk: the least expected value of a generator.
    pub fn eval(&self, d: &SubDist) -> Result<ExtRat, AlgebraError> {
        self.check(d.ctx())?;
        let mut best: Option<ExtRat> = None;
        for g in &self.gens {
            let v = g.expect(d)?;
            if best.as_ref().is_none_or(|b| v < *b) {
                best = Some(v);
            }
        }
        Ok(best.expect("nonempty"))
    }
}

/// Sums a nonempty sequence of loss functions, canonicalizing as it goes.
pub fn sum_losses(
    ctx: &VarContext,
    losses: impl IntoIterator<Item = LossFunction>,
) -> Result<LossFunction, AlgebraError> {
    let mut acc: Option<LossFunction> = None;
    for l in losses {
        acc = Some(match acc {
            None => l.canonicalize(),
            Some(a) => a.add(&l)?,
        });
    }
    Ok(acc.unwrap_or_else(|| LossFunction::bottom(ctx)))
}

impl fmt::Debug for LossFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self)
    }
}

impl fmt::Display for LossFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, g) in self.gens.iter().enumerate() {
            if i > 0 {
                write!(f, " MIN ")?;
            }
            write!(f, "{}", g)?;
        }
        Ok(())
    }
}

fn rat(e: &ExtRat) -> &BigRational {
    e.finite().expect("finite entry")
}

/// States where some generator is nonzero.
fn support(e: &LossFunction) -> Vec<bool> {
    let mut s = vec![false; e.ctx.state_count()];
    for g in &e.gens {
        for (x, w) in g.entries().iter().enumerate() {
            s[x] |= !w.is_zero();
        }
    }
    s
}

fn disjoint(a: &[bool], b: &[bool]) -> bool {
    a.iter().zip(b).all(|(x, y)| !(*x && *y))
}

fn as_floats(g: &Predicate) -> Option<Vec<f64>> {
    g.entries().iter().map(|e| e.finite().and_then(|r| r.to_f64())).collect()
}

/// Whether a floating-point LP finds a distribution on which `gens[i]` is
/// strictly cheaper than every other generator, confirmed exactly.
/// `false` means only that no such certificate was found.
fn separated(gens: &[Predicate], approx: &[Option<Vec<f64>>], i: usize) -> bool {
    let Some(target) = &approx[i] else { return false };
    let mut others = Vec::with_capacity(gens.len() - 1);
    for (j, a) in approx.iter().enumerate() {
        if j != i {
            match a {
                Some(v) => others.push((j, v)),
                None => return false,
            }
        }
    }
    let active: Vec<usize> = (0..target.len()).filter(|&x| others.iter().any(|(_, v)| v[x] != 0.0)).collect();
    let mut a: Vec<Vec<f64>> = others
        .iter()
        .map(|(_, v)| active.iter().map(|&x| -v[x]).chain(std::iter::once(1.0)).collect())
        .collect();
    a.push(active.iter().map(|_| 1.0).chain(std::iter::once(0.0)).collect());
    let mut b = vec![0.0; others.len()];
    b.push(1.0);
    let c: Vec<f64> = active.iter().map(|&x| -target[x]).chain(std::iter::once(1.0)).collect();
    let Some((value, primal)) = maximize_approx(&a, &b, &c) else { return false };
    if value <= 1e-9 {
        return false;
    }
    const SCALE: f64 = (1u64 << 30) as f64;
    let mut w = vec![BigRational::zero(); target.len()];
    for (slot, &x) in active.iter().enumerate() {
        let k = (primal[slot].max(0.0) * SCALE).round() as i64;
        w[x] = BigRational::from_integer(k.into());
    }
    let dot = |g: &Predicate| -> BigRational {
        g.entries().iter().zip(&w).filter(|(_, m)| !m.is_zero()).map(|(e, m)| rat(e) * m).sum()
    };
    let mine = dot(&gens[i]);
    w.iter().any(|m| !m.is_zero()) && others.iter().all(|(j, _)| dot(&gens[*j]) > mine)
}

/// Membership of `e` in the upper convex closure of `gens`.
fn member_of(gens: &[Predicate], e: &Predicate) -> Membership {
    let n = e.ctx().state_count();
    let ctx = e.ctx();
    // states constraining the combination
    let constrained: Vec<usize> = (0..n).filter(|&x| !e.get(x).is_inf()).collect();
    let (usable, excluded): (Vec<usize>, Vec<usize>) =
        (0..gens.len()).partition(|&i| constrained.iter().all(|&x| !gens[i].get(x).is_inf()));

    let unit = |i: usize| {
        let mut w = vec![BigRational::zero(); gens.len()];
        w[i] = BigRational::one();
        Membership::Member { weights: w }
    };

    for &i in &usable {
        if constrained.iter().all(|&x| gens[i].get(x) <= e.get(x)) {
            return unit(i);
        }
    }

    // states where some excluded generator is infinite
    let inf_states: Vec<usize> = constrained
        .iter()
        .copied()
        .filter(|&x| excluded.iter().any(|&i| gens[i].get(x).is_inf()))
        .collect();
    let uniform_on = |states: &[usize]| {
        let mut mass = vec![BigRational::zero(); n];
        let w = BigRational::new(1.into(), (states.len() as i64).into());
        for &x in states {
            mass[x] = w.clone();
        }
        mass
    };

    if usable.is_empty() {
        let witness = SubDist::new(ctx.clone(), uniform_on(&inf_states)).expect("distribution");
        return Membership::NonMember { witness };
    }

    let active: Vec<usize> = constrained
        .iter()
        .copied()
        .filter(|&x| usable.iter().any(|&i| !gens[i].get(x).is_zero()))
        .collect();
    let d = active.len();
    let k = usable.len();
    // variables: w_x for active states, then v
    let mut a: Vec<Vec<BigRational>> = Vec::with_capacity(k + 1);
    for &i in &usable {
        let mut row: Vec<BigRational> = active.iter().map(|&x| -rat(gens[i].get(x))).collect();
        row.push(BigRational::one());
        a.push(row);
    }
    let mut last: Vec<BigRational> = vec![BigRational::one(); d];
    last.push(BigRational::zero());
    a.push(last);
    let mut b = vec![BigRational::zero(); k];
    b.push(BigRational::one());
    let mut c: Vec<BigRational> = active.iter().map(|&x| -rat(e.get(x))).collect();
    c.push(BigRational::one());

    let LpOutcome::Optimal(sol) = maximize(&a, &b, &c) else {
        unreachable!("membership LP is bounded")
    };

    if sol.value.is_positive() {
        let total: BigRational = sol.primal[..d].iter().sum();
        let mut mass = vec![BigRational::zero(); n];
        for (slot, &x) in active.iter().enumerate() {
            mass[x] = &sol.primal[slot] / &total;
        }
        if !inf_states.is_empty() {
            mass = perturb_towards(gens, &usable, e, mass, uniform_on(&inf_states));
        }
        let witness = SubDist::new(ctx.clone(), mass).expect("distribution");
        Membership::NonMember { witness }
    } else {
        let ys = &sol.dual[..k];
        let total: BigRational = ys.iter().sum();
        let mut weights = vec![BigRational::zero(); gens.len()];
        for (slot, &i) in usable.iter().enumerate() {
            weights[i] = &ys[slot] / &total;
        }
        Membership::Member { weights }
    }
}

/// Mixes a separating distribution with `toward` so that it also charges
/// the states where excluded generators are infinite, keeping a strict gap.
fn perturb_towards(
    gens: &[Predicate],
    usable: &[usize],
    e: &Predicate,
    w: Vec<BigRational>,
    toward: Vec<BigRational>,
) -> Vec<BigRational> {
    let gap = |mass: &[BigRational]| -> BigRational {
        let ev: BigRational = mass.iter().enumerate().map(|(x, m)| m * rat_or_zero(e.get(x), m)).sum();
        usable
            .iter()
            .map(|&i| mass.iter().enumerate().map(|(x, m)| m * rat_or_zero(gens[i].get(x), m)).sum::<BigRational>())
            .min()
            .expect("usable generators")
            - ev
    };
    let fw = gap(&w);
    let fu = gap(&toward);
    let eps = if fu >= BigRational::zero() {
        BigRational::new(1.into(), 2.into())
    } else {
        &fw / (BigRational::from_integer(2.into()) * (&fw - &fu))
    };
    let keep = BigRational::one() - &eps;
    w.iter().zip(&toward).map(|(a, b)| &keep * a + &eps * b).collect()
}

fn rat_or_zero(e: &ExtRat, weight: &BigRational) -> BigRational {
    match e {
        ExtRat::Fin(r) => r.clone(),
        ExtRat::Inf => {
            debug_assert!(weight.is_zero());
            BigRational::zero()
        }
    }
}
