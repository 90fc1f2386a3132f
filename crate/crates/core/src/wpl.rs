//! Weakest pre-loss transformer.
//!
//! The working context is the program context followed by the extension
//! variables `Z`; every kernel and guard is extended by the identity on `Z`.
//! Loops are evaluated as a sum of terms `t0 = ¬g ⊠ E`,
//! `t(n+1) = g ⊠ wpl(body, t(n))`. A budget of `N` sums `t0 ..= tN`; the loop
//! counts as converged as soon as some term is `embed(0)`, since every later
//! term is then `embed(0)` too.

use std::collections::{BTreeMap, HashMap};
use std::fmt;

use thiserror::Error;

use crate::algebra::{AlgebraError, Kernel, Predicate, VarContext};
use crate::lang::{Node, Program};
use crate::loss::{sum_losses, LossFunction};

pub const DEFAULT_LOOP_BUDGET: usize = 64;
pub const LOOP_BUDGET_ENV: &str = "KUIFJE_LOOP_BUDGET";

/// The default budget, overridable through the environment.
pub fn default_loop_budget() -> usize {
    std::env::var(LOOP_BUDGET_ENV)
        .ok()
        .and_then(|s| s.trim().parse().ok())
        .filter(|&n| n > 0)
        .unwrap_or(DEFAULT_LOOP_BUDGET)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LoopStatus {
    /// The given term was `embed(0)`; the sum is exact.
    Converged(usize),
    /// Terms up to the budget were summed; the result is a lower bound.
    Truncated(usize),
}

impl fmt::Display for LoopStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LoopStatus::Converged(n) => write!(f, "converged({})", n),
            LoopStatus::Truncated(n) => write!(f, "truncated({})", n),
        }
    }
}

#[derive(Debug, Clone, Error, PartialEq, Eq)]
pub enum WplError {
    #[error(transparent)]
    Algebra(#[from] AlgebraError),
    #[error("program still contains `call {0}`")]
    Call(String),
    #[error("post-loss context [{found}] does not match [{expected}]")]
    Context { expected: String, found: String },
    #[error("loop budget must be positive")]
    Budget,
}

#[derive(Debug, Clone)]
pub struct WplResult {
    pub pre: LossFunction,
    /// Per loop site, the weakest status over all its evaluations.
    pub loops: BTreeMap<usize, LoopStatus>,
}

impl WplResult {
    pub fn exact(&self) -> bool {
        self.loops.values().all(|s| matches!(s, LoopStatus::Converged(_)))
    }
}

/// `wpl(p, post)` with no extension.
pub fn wpl(p: &Program, post: &LossFunction, budget: usize) -> Result<WplResult, WplError> {
    wpl_extended(p, post, &VarContext::empty(), budget)
}

/// `Wpl_Z(p, post)`: `post` lives over the program's post-context followed
/// by `ext`; the result over the pre-context followed by `ext`.
pub fn wpl_extended(
    p: &Program,
    post: &LossFunction,
    ext: &VarContext,
    budget: usize,
) -> Result<WplResult, WplError> {
    if budget == 0 {
        return Err(WplError::Budget);
    }
    let expected = p.post.merge(ext)?;
    let post = if post.ctx().same_vars(&expected) {
        post.reorder(&expected)?
    } else {
        return Err(WplError::Context { expected: expected.to_string(), found: post.ctx().to_string() });
    };
    let mut ev = Evaluator { ext, budget, kernels: HashMap::new(), preds: HashMap::new(), loops: BTreeMap::new() };
    let pre = ev.run(p, &post)?;
    Ok(WplResult { pre, loops: ev.loops })
}

struct Evaluator<'a> {
    ext: &'a VarContext,
    budget: usize,
    kernels: HashMap<*const Program, Kernel>,
    preds: HashMap<(*const Program, usize), Predicate>,
    loops: BTreeMap<usize, LoopStatus>,
}

impl Evaluator<'_> {
    fn kernel(&mut self, p: &Program, k: &Kernel) -> Result<Kernel, AlgebraError> {
        if self.ext.is_empty() {
            return Ok(k.clone());
        }
        if let Some(k) = self.kernels.get(&(p as *const _)) {
            return Ok(k.clone());
        }
        let ext = k.tensor(&Kernel::identity(self.ext))?;
        self.kernels.insert(p as *const _, ext.clone());
        Ok(ext)
    }

    /// `which` distinguishes several predicates attached to one node.
    fn pred(&mut self, p: &Program, which: usize, e: &Predicate) -> Result<Predicate, AlgebraError> {
        if self.ext.is_empty() {
            return Ok(e.clone());
        }
        let key = (p as *const _, which);
        if let Some(x) = self.preds.get(&key) {
            return Ok(x.clone());
        }
        let x = e.extend(self.ext)?;
        self.preds.insert(key, x.clone());
        Ok(x)
    }

    fn note(&mut self, site: usize, s: LoopStatus) {
        let merged = match (self.loops.get(&site), s) {
            (Some(LoopStatus::Truncated(n)), _) => LoopStatus::Truncated(*n),
            (_, LoopStatus::Truncated(n)) => LoopStatus::Truncated(n),
            (Some(LoopStatus::Converged(a)), LoopStatus::Converged(b)) => LoopStatus::Converged((*a).max(b)),
            (None, s) => s,
        };
        self.loops.insert(site, merged);
    }

    fn run(&mut self, p: &Program, e: &LossFunction) -> Result<LossFunction, WplError> {
        Ok(match &p.node {
            Node::Skip => e.clone(),
            Node::Abort => LossFunction::bottom(&p.pre.merge(self.ext)?),
            Node::Seq(parts) => {
                let mut acc = e.clone();
                for q in parts.iter().rev() {
                    acc = self.run(q, &acc)?;
                }
                acc
            }
            Node::Assign { kernel, .. } | Node::HidVar { kernel, .. } | Node::Unvar { kernel, .. } => {
                let k = self.kernel(p, kernel)?;
                e.map(&k)?
            }
            Node::If { prob, then, els, .. } => {
                let g = self.pred(p, 0, prob)?;
                let ng = self.pred(p, 1, &prob.complement()?)?;
                let a = if g.is_zero() { None } else { Some(self.run(then, e)?.conj(&g)?) };
                let b = if ng.is_zero() { None } else { Some(self.run(els, e)?.conj(&ng)?) };
                match (a, b) {
                    (Some(a), Some(b)) => a.add(&b)?,
                    (Some(x), None) | (None, Some(x)) => x,
                    (None, None) => unreachable!("g + ¬g = 1"),
                }
            }
            Node::While { site, prob, body, .. } => {
                let g = self.pred(p, 0, prob)?;
                let ng = self.pred(p, 1, &prob.complement()?)?;
                let mut term = e.conj(&ng)?;
                let mut terms = Vec::new();
                let mut status = LoopStatus::Truncated(self.budget);
                for n in 0..=self.budget {
                    if term.is_bottom() {
                        status = LoopStatus::Converged(n);
                        break;
                    }
                    terms.push(term.clone());
                    if n < self.budget {
                        term = self.run(body, &term)?.conj(&g)?;
                    }
                }
                self.note(*site, status);
                sum_losses(e.ctx(), terms)?
            }
            Node::Print { channel, .. } => {
                let mut parts = Vec::with_capacity(channel.len());
                for (i, (_, pw)) in channel.iter().enumerate() {
                    let pw = self.pred(p, i, pw)?;
                    parts.push(e.conj(&pw)?);
                }
                sum_losses(e.ctx(), parts)?
            }
            Node::NonDet { left, right, .. } => {
                let a = self.run(left, e)?;
                let b = self.run(right, e)?;
                a.min(&b)?
            }
            Node::Assert { prob, .. } => {
                let g = self.pred(p, 0, prob)?;
                e.conj(&g)?
            }
            Node::Call { name } => return Err(WplError::Call(name.to_string())),
        })
    }
}
