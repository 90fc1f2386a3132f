//! Forward semantics for loop-free programs.
//!
//! Execution splits into branches at visible events (prints and `if`
//! outcomes). Each branch carries its observation history and an
//! unnormalized joint sub-distribution over the current state; its mass is
//! the probability of that history and the normalized joint is the posterior.
//! Demonic choices are resolved by a strategy that sees only the history.

use std::collections::BTreeMap;
use std::fmt;

use num_rational::BigRational;
use num_traits::Zero;
use thiserror::Error;

use crate::algebra::{AlgebraError, ExtRat, Predicate, SubDist, Value};
use crate::lang::{Node, Program};
use crate::loss::LossFunction;

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Event {
    Guard { site: usize, taken: bool },
    Obs { site: usize, value: Value },
}

impl fmt::Display for Event {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Event::Guard { site, taken } => write!(f, "if#{}={}", site, if *taken { "then" } else { "else" }),
            Event::Obs { site, value } => write!(f, "print#{}={}", site, value),
        }
    }
}

pub type History = Vec<Event>;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Choice {
    Left,
    Right,
}

/// Choices keyed by the history so far and the choice site.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Strategy {
    pub choices: BTreeMap<(History, usize), Choice>,
}

impl Strategy {
    pub fn with(&self, key: (History, usize), c: Choice) -> Strategy {
        let mut s = self.clone();
        s.choices.insert(key, c);
        s
    }
}

#[derive(Clone, Debug)]
pub struct Branch {
    pub history: History,
    pub joint: SubDist,
}

impl Branch {
    pub fn mass(&self) -> BigRational {
        self.joint.total()
    }

    /// The normalized joint, or zero for a branch of no mass.
    pub fn posterior(&self) -> SubDist {
        let m = self.mass();
        if m.is_zero() {
            return SubDist::zero(self.joint.ctx());
        }
        let mass = self.joint.mass().iter().map(|x| x / &m).collect();
        SubDist::new(self.joint.ctx().clone(), mass).expect("normalized")
    }
}

#[derive(Debug, Clone, Error, PartialEq, Eq)]
pub enum OracleError {
    #[error("the oracle handles loop-free programs only")]
    Loop,
    #[error("program still contains `call {0}`")]
    Call(String),
    #[error("strategy has no choice for site {site} after history [{history}]")]
    NotTotal { history: String, site: usize },
    #[error("context mismatch: {0}")]
    Context(String),
    #[error("more than {0} strategies")]
    TooLarge(usize),
    #[error(transparent)]
    Algebra(#[from] AlgebraError),
}

fn show_history(h: &History) -> String {
    h.iter().map(|e| e.to_string()).collect::<Vec<_>>().join(", ")
}

fn weigh(joint: &SubDist, g: &Predicate) -> SubDist {
    let mass = joint
        .mass()
        .iter()
        .zip(g.entries())
        .map(|(m, w)| match w {
            ExtRat::Fin(r) => m * r,
            ExtRat::Inf => unreachable!("probabilities are finite"),
        })
        .collect();
    SubDist::new(joint.ctx().clone(), mass).expect("weighted sub-distribution")
}

fn complement(g: &Predicate) -> Predicate {
    g.complement().expect("guards lie in [0,1]")
}

/// Runs `p` from `prior`, resolving choices by `s`.
pub fn run_strategy(p: &Program, prior: &SubDist, s: &Strategy) -> Result<Vec<Branch>, OracleError> {
    if prior.ctx() != &p.pre {
        return Err(OracleError::Context(format!("prior over [{}], program over [{}]", prior.ctx(), p.pre)));
    }
    exec(p, vec![Branch { history: vec![], joint: prior.clone() }], s)
}

fn exec(p: &Program, branches: Vec<Branch>, s: &Strategy) -> Result<Vec<Branch>, OracleError> {
    let mut out = Vec::with_capacity(branches.len());
    if let Node::Seq(parts) = &p.node {
        let mut cur = branches;
        for q in parts {
            cur = exec(q, cur, s)?;
        }
        return Ok(cur);
    }
    for b in branches {
        if b.mass().is_zero() {
            continue;
        }
        let h = b.history;
        let j = b.joint;
        match &p.node {
            Node::Seq(_) => unreachable!(),
            Node::Skip => out.push(Branch { history: h, joint: j }),
            Node::Abort => {}
            Node::Assign { kernel, .. } | Node::HidVar { kernel, .. } | Node::Unvar { kernel, .. } => {
                out.push(Branch { history: h, joint: kernel.push(&j)? })
            }
            Node::Assert { prob, .. } => out.push(Branch { history: h, joint: weigh(&j, prob) }),
            Node::If { site, prob, then, els, .. } => {
                let mut ht = h.clone();
                ht.push(Event::Guard { site: *site, taken: true });
                let mut he = h;
                he.push(Event::Guard { site: *site, taken: false });
                out.extend(exec(then, vec![Branch { history: ht, joint: weigh(&j, prob) }], s)?);
                out.extend(exec(els, vec![Branch { history: he, joint: weigh(&j, &complement(prob)) }], s)?);
            }
            Node::Print { site, channel, .. } => {
                for (v, pw) in channel {
                    let mut hv = h.clone();
                    hv.push(Event::Obs { site: *site, value: v.clone() });
                    let joint = weigh(&j, pw);
                    if !joint.total().is_zero() {
                        out.push(Branch { history: hv, joint });
                    }
                }
            }
            Node::NonDet { site, left, right } => {
                let key = (h.clone(), *site);
                let c = s.choices.get(&key).ok_or_else(|| OracleError::NotTotal {
                    history: show_history(&h),
                    site: *site,
                })?;
                let next = if *c == Choice::Left { left } else { right };
                out.extend(exec(next, vec![Branch { history: h, joint: j }], s)?);
            }
            Node::While { .. } => return Err(OracleError::Loop),
            Node::Call { name } => return Err(OracleError::Call(name.to_string())),
        }
    }
    Ok(out)
}

fn check_inputs(p: &Program, prior: &SubDist, e: &LossFunction) -> Result<LossFunction, OracleError> {
    if p.has_loops() {
        return Err(OracleError::Loop);
    }
    if prior.ctx() != &p.pre {
        return Err(OracleError::Context(format!("prior over [{}], program over [{}]", prior.ctx(), p.pre)));
    }
    if !e.ctx().same_vars(&p.post) {
        return Err(OracleError::Context(format!("loss over [{}], program ends in [{}]", e.ctx(), p.post)));
    }
    Ok(e.reorder(&p.post)?)
}

/// The Bayes risk of a final sub-distribution: the best generator's expectation.
fn final_risk(e: &LossFunction, joint: &SubDist) -> ExtRat {
    e.eval(joint).expect("same context")
}

/// Total risk of a strategy's outcome.
pub fn strategy_risk(branches: &[Branch], e: &LossFunction) -> ExtRat {
    branches.iter().map(|b| final_risk(e, &b.joint)).sum()
}

/// The least expected loss any history-based strategy can achieve.
///
/// Choices at different histories never interact, so the minimum is taken
/// locally at each choice point.
pub fn min_bayes_risk(p: &Program, prior: &SubDist, e: &LossFunction) -> Result<ExtRat, OracleError> {
    let e = check_inputs(p, prior, e)?;
    greedy(&[p], prior.clone(), &e)
}

fn greedy<'p>(k: &[&'p Program], joint: SubDist, e: &LossFunction) -> Result<ExtRat, OracleError> {
    if joint.total().is_zero() {
        return Ok(ExtRat::zero());
    }
    let Some((p, rest)) = k.split_first() else {
        return Ok(final_risk(e, &joint));
    };
    let then_rest = |first: &'p Program| -> Vec<&'p Program> {
        let mut v: Vec<&'p Program> = Vec::with_capacity(rest.len() + 1);
        v.push(first);
        v.extend_from_slice(rest);
        v
    };
    match &p.node {
        Node::Seq(parts) => {
            let mut v: Vec<&'p Program> = parts.iter().collect();
            v.extend_from_slice(rest);
            greedy(&v, joint, e)
        }
        Node::Skip => greedy(rest, joint, e),
        Node::Abort => Ok(ExtRat::zero()),
        Node::Assign { kernel, .. } | Node::HidVar { kernel, .. } | Node::Unvar { kernel, .. } => {
            greedy(rest, kernel.push(&joint)?, e)
        }
        Node::Assert { prob, .. } => greedy(rest, weigh(&joint, prob), e),
        Node::If { prob, then, els, .. } => {
            let a = greedy(&then_rest(then), weigh(&joint, prob), e)?;
            let b = greedy(&then_rest(els), weigh(&joint, &complement(prob)), e)?;
            Ok(a + b)
        }
        Node::Print { channel, .. } => {
            let mut total = ExtRat::zero();
            for (_, pw) in channel {
                total = total + greedy(rest, weigh(&joint, pw), e)?;
            }
            Ok(total)
        }
        Node::NonDet { left, right, .. } => {
            let a = greedy(&then_rest(left), joint.clone(), e)?;
            let b = greedy(&then_rest(right), joint, e)?;
            Ok(a.min(b))
        }
        Node::While { .. } => Err(OracleError::Loop),
        Node::Call { name } => Err(OracleError::Call(name.to_string())),
    }
}

/// Enumerates every deterministic strategy on the reachable histories and
/// returns the least risk, or an error beyond `cap` strategies.
pub fn min_bayes_risk_exhaustive(
    p: &Program,
    prior: &SubDist,
    e: &LossFunction,
    cap: usize,
) -> Result<(ExtRat, usize), OracleError> {
    let e = check_inputs(p, prior, e)?;
    let mut best: Option<ExtRat> = None;
    let mut explored = 0usize;
    let mut pending = vec![Strategy::default()];
    while let Some(s) = pending.pop() {
        match missing_choice(p, prior, &s)? {
            Some(key) => {
                pending.push(s.with(key.clone(), Choice::Right));
                pending.push(s.with(key, Choice::Left));
            }
            None => {
                explored += 1;
                if explored > cap {
                    return Err(OracleError::TooLarge(cap));
                }
                let v = strategy_risk(&run_strategy(p, prior, &s)?, &e);
                if best.as_ref().is_none_or(|b| v < *b) {
                    best = Some(v);
                }
            }
        }
    }
    Ok((best.expect("at least one strategy"), explored))
}

/// The first choice point a partial strategy leaves open, if any.
fn missing_choice(p: &Program, prior: &SubDist, s: &Strategy) -> Result<Option<(History, usize)>, OracleError> {
    fn find(p: &Program, branches: Vec<Branch>, s: &Strategy) -> Result<Result<Vec<Branch>, (History, usize)>, OracleError> {
        if let Node::Seq(parts) = &p.node {
            let mut cur = branches;
            for q in parts {
                match find(q, cur, s)? {
                    Ok(next) => cur = next,
                    Err(k) => return Ok(Err(k)),
                }
            }
            return Ok(Ok(cur));
        }
        if let Node::NonDet { site, left, right } = &p.node {
            let mut out = Vec::new();
            for b in branches {
                if b.mass().is_zero() {
                    continue;
                }
                let key = (b.history.clone(), *site);
                let Some(c) = s.choices.get(&key) else { return Ok(Err(key)) };
                let next = if *c == Choice::Left { left } else { right };
                match find(next, vec![b], s)? {
                    Ok(bs) => out.extend(bs),
                    Err(k) => return Ok(Err(k)),
                }
            }
            return Ok(Ok(out));
        }
        if let Node::If { site, prob, then, els, .. } = &p.node {
            let mut out = Vec::new();
            for b in branches {
                if b.mass().is_zero() {
                    continue;
                }
                for (taken, sub, w) in [(true, then, prob.clone()), (false, els, complement(prob))] {
                    let mut h = b.history.clone();
                    h.push(Event::Guard { site: *site, taken });
                    match find(sub, vec![Branch { history: h, joint: weigh(&b.joint, &w) }], s)? {
                        Ok(bs) => out.extend(bs),
                        Err(k) => return Ok(Err(k)),
                    }
                }
            }
            return Ok(Ok(out));
        }
        match exec(p, branches, s) {
            Ok(bs) => Ok(Ok(bs)),
            Err(e) => Err(e),
        }
    }
    Ok(find(p, vec![Branch { history: vec![], joint: prior.clone() }], s)?.err())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algebra::{int_context, VarContext};
    use crate::lang::{parse_expr, parse_program, typecheck};

    fn prog(src: &str, ctx: &VarContext) -> Program {
        typecheck(&parse_program(src).unwrap(), ctx).unwrap()
    }

    fn embed(ctx: &VarContext, src: &str) -> LossFunction {
        LossFunction::embed(Predicate::indicator(ctx, &parse_expr(src).unwrap()).unwrap())
    }

    fn q(n: i64, d: i64) -> BigRational {
        BigRational::new(n.into(), d.into())
    }

    #[test]
    fn skip_keeps_prior() {
        let c = int_context(&[("b", 2)]);
        let prior = SubDist::uniform(&c);
        let bs = run_strategy(&prog("skip", &c), &prior, &Strategy::default()).unwrap();
        assert_eq!(bs.len(), 1);
        assert_eq!(bs[0].posterior(), prior);
        let one = LossFunction::embed(Predicate::ones(&c));
        assert_eq!(min_bayes_risk(&prog("skip", &c), &prior, &one).unwrap(), ExtRat::one());
    }

    #[test]
    fn print_splits_by_observation() {
        let c = int_context(&[("b", 2)]);
        let bs = run_strategy(&prog("print b", &c), &SubDist::uniform(&c), &Strategy::default()).unwrap();
        assert_eq!(bs.len(), 2);
        for (i, b) in bs.iter().enumerate() {
            assert_eq!(b.mass(), q(1, 2));
            assert_eq!(b.posterior(), SubDist::point(&c, i));
        }
    }

    #[test]
    fn choice_after_observation() {
        let c = int_context(&[("n", 4)]);
        let p = prog("print (n div 2); hidvar b := {0} [] {1}", &c);
        let post = embed(&p.post, "(n + b) mod 2 = 0");
        let left = |h: Vec<Event>| (h, 1usize);
        let s = Strategy::default()
            .with(left(vec![Event::Obs { site: 0, value: Value::int(0) }]), Choice::Left)
            .with(left(vec![Event::Obs { site: 0, value: Value::int(1) }]), Choice::Right);
        let bs = run_strategy(&p, &SubDist::uniform(&c), &s).unwrap();
        assert_eq!(bs.len(), 2);
        assert!(run_strategy(&p, &SubDist::uniform(&c), &Strategy::default()).is_err());
        // a prior with δ(0) ≤ δ(1) and δ(3) ≤ δ(2): the best is δ(0) + δ(3)
        let prior = SubDist::new(c.clone(), vec![q(1, 10), q(2, 10), q(4, 10), q(3, 10)]).unwrap();
        let r = min_bayes_risk(&p, &prior, &post).unwrap();
        assert_eq!(r, ExtRat::Fin(q(4, 10)));
        let (ex, n) = min_bayes_risk_exhaustive(&p, &prior, &post, 100).unwrap();
        assert_eq!(ex, r);
        assert_eq!(n, 4);
    }

    #[test]
    fn abort_mass_is_free() {
        let c = int_context(&[("b", 2)]);
        let one = LossFunction::embed(Predicate::ones(&c));
        let r = min_bayes_risk(&prog("b := 0 @ 1/4", &c), &SubDist::uniform(&c), &one).unwrap();
        assert_eq!(r, ExtRat::from_ratio(1, 4));
        assert!(matches!(
            min_bayes_risk(&prog("while b = 1 { b := 0 }", &c), &SubDist::uniform(&c), &one),
            Err(OracleError::Loop)
        ));
    }
}
