//! Refinement checking over finite test families.
//!
//! `P ⊑ Q` holds when `wpl(P, E) ⊑ wpl(Q, E)` for every post-loss `E`. Only
//! finitely many `E` can be tried, so `Holds` is relative to the family. A
//! `Fails` carries a prior at which `P`'s pre-loss evaluates strictly above
//! `Q`'s, which anyone can re-check.

use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::algebra::{AlgebraError, ExtRat, Predicate, SubDist, VarContext};
use crate::lang::{composite, declare_encap_domains, typecheck, Datatype, Name, Program, ProgramContext, Stmt, TypeError};
use crate::loss::LossFunction;
use crate::wpl::{wpl_extended, LoopStatus, WplError};

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Provenance {
    /// Built from the state space alone: singletons, subsets, all-ones.
    Atomic(String),
    /// A known witness supplied with an example.
    Witness(String),
    User(String),
    Random { seed: u64, index: usize },
}

impl fmt::Display for Provenance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Provenance::Atomic(s) => write!(f, "atomic {}", s),
            Provenance::Witness(s) => write!(f, "witness {}", s),
            Provenance::User(s) => write!(f, "user {}", s),
            Provenance::Random { seed, index } => write!(f, "random seed={} #{}", seed, index),
        }
    }
}

#[derive(Debug, Clone)]
pub struct TestFamily {
    ctx: VarContext,
    entries: Vec<(LossFunction, Provenance)>,
}

impl TestFamily {
    pub fn new(ctx: &VarContext) -> Self {
        TestFamily { ctx: ctx.clone(), entries: Vec::new() }
    }

    pub fn ctx(&self) -> &VarContext {
        &self.ctx
    }

    pub fn entries(&self) -> &[(LossFunction, Provenance)] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Adds `e`, reordered to the family's context when it names the same
    /// variables in another order.
    pub fn push(&mut self, e: LossFunction, why: Provenance) -> Result<(), AlgebraError> {
        let e = if e.ctx().same_vars(&self.ctx) { e.reorder(&self.ctx)? } else { e };
        crate::algebra::same_ctx(&self.ctx, e.ctx())?;
        self.entries.push((e, why));
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FamilyOptions {
    /// Indicators of all state subsets up to this size.
    pub max_subset: usize,
    pub random: usize,
    pub seed: u64,
    /// Refuse families larger than this.
    pub cap: usize,
}

impl Default for FamilyOptions {
    fn default() -> Self {
        FamilyOptions { max_subset: 2, random: 50, seed: 0, cap: 20_000 }
    }
}

#[derive(Debug, Clone, Error, PartialEq, Eq)]
pub enum RefineError {
    #[error(transparent)]
    Type(#[from] TypeError),
    #[error(transparent)]
    Algebra(#[from] AlgebraError),
    #[error(transparent)]
    Wpl(#[from] WplError),
    #[error("family over [{ctx}] would have {size} entries, above the cap of {cap}")]
    FamilyTooLarge { ctx: String, size: usize, cap: usize },
    #[error("type mismatch: {0}")]
    Mismatch(String),
    #[error("rep may act only on encapsulated variables, but it changes `{0}`")]
    RepTouchesShared(String),
}

fn binomial(n: usize, k: usize) -> usize {
    let mut r: usize = 1;
    for i in 0..k {
        r = r.saturating_mul(n - i) / (i + 1);
    }
    r
}

fn indicator(ctx: &VarContext, set: &[usize]) -> Predicate {
    Predicate::from_fn(ctx, |i| if set.contains(&i) { ExtRat::one() } else { ExtRat::zero() })
}

/// Singletons, all-ones, complements of singletons, subsets of size
/// `2..=max_subset`, then seeded random losses with up to four generators
/// and entries in `{0, 1/4, ..., 2}`.
pub fn standard_family(ctx: &VarContext, opts: &FamilyOptions) -> Result<TestFamily, RefineError> {
    let n = ctx.state_count();
    let mut size = 2 * n + 1 + opts.random;
    for k in 2..=opts.max_subset.min(n) {
        size = size.saturating_add(binomial(n, k));
    }
    if size > opts.cap {
        return Err(RefineError::FamilyTooLarge { ctx: ctx.to_string(), size, cap: opts.cap });
    }
    let mut fam = TestFamily::new(ctx);
    let show = |set: &[usize]| set.iter().map(|&i| ctx.show_state(i)).collect::<Vec<_>>().join(",");
    for i in 0..n {
        fam.push(LossFunction::embed(indicator(ctx, &[i])), Provenance::Atomic(format!("{{{}}}", show(&[i]))))?;
    }
    fam.push(LossFunction::embed(Predicate::ones(ctx)), Provenance::Atomic("all".into()))?;
    if n > 1 {
        for i in 0..n {
            let rest: Vec<usize> = (0..n).filter(|&j| j != i).collect();
            fam.push(LossFunction::embed(indicator(ctx, &rest)), Provenance::Atomic(format!("not {{{}}}", show(&[i]))))?;
        }
    }
    for k in 2..=opts.max_subset.min(n) {
        let mut set: Vec<usize> = (0..k).collect();
        loop {
            // complements of singletons were added already
            if k + 1 != n {
                fam.push(LossFunction::embed(indicator(ctx, &set)), Provenance::Atomic(format!("{{{}}}", show(&set))))?;
            }
            let Some(i) = (0..k).rev().find(|&i| set[i] < n - k + i) else { break };
            set[i] += 1;
            for j in i + 1..k {
                set[j] = set[j - 1] + 1;
            }
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    for index in 0..opts.random {
        fam.push(random_loss(ctx, &mut rng), Provenance::Random { seed: opts.seed, index })?;
    }
    Ok(fam)
}

/// A loss with one to four generators, entries multiples of 1/4 in `[0, 2]`.
pub fn random_loss(ctx: &VarContext, rng: &mut impl Rng) -> LossFunction {
    let count = rng.gen_range(1..=4);
    let gens = (0..count)
        .map(|_| Predicate::from_fn(ctx, |_| ExtRat::from_ratio(rng.gen_range(0..=8), 4)))
        .collect();
    LossFunction::new(ctx, gens).expect("nonempty")
}

/// How to build a family for an arbitrary context.
#[derive(Debug, Clone, Default)]
pub struct FamilySpec {
    pub opts: FamilyOptions,
    /// Extra losses, used wherever their variables match the context.
    pub extra: Vec<(LossFunction, Provenance)>,
}

impl FamilySpec {
    /// The extra losses that fit come first, then the standard family.
    pub fn build(&self, ctx: &VarContext) -> Result<TestFamily, RefineError> {
        let mut fam = TestFamily::new(ctx);
        for (e, why) in &self.extra {
            if e.ctx().same_vars(ctx) {
                fam.push(e.clone(), why.clone())?;
            }
        }
        for (e, why) in standard_family(ctx, &self.opts)?.entries {
            fam.push(e, why)?;
        }
        Ok(fam)
    }
}

/// A refutation of `P ⊑ Q`: at prior `witness`, `P`'s pre-loss evaluates
/// strictly above `Q`'s.
#[derive(Debug, Clone)]
pub struct Failure {
    pub loss: LossFunction,
    pub provenance: Provenance,
    pub witness: SubDist,
    pub lhs: ExtRat,
    pub rhs: ExtRat,
    pub lhs_pre: LossFunction,
    pub rhs_pre: LossFunction,
    /// Which context or square failed, when checking datatypes.
    pub label: Option<String>,
}

impl Failure {
    /// Re-evaluates both pre-losses at the witness.
    pub fn certified(&self) -> bool {
        match (self.lhs_pre.eval(&self.witness), self.rhs_pre.eval(&self.witness)) {
            (Ok(l), Ok(r)) => l == self.lhs && r == self.rhs && l > r,
            _ => false,
        }
    }
}

#[derive(Debug, Clone)]
pub enum Verdict {
    /// No entry of a family of this size separates the programs.
    Holds(usize),
    Fails(Box<Failure>),
    Inconclusive(String),
}

impl Verdict {
    pub fn holds(&self) -> bool {
        matches!(self, Verdict::Holds(_))
    }

    pub fn fails(&self) -> bool {
        matches!(self, Verdict::Fails(_))
    }

    pub fn failure(&self) -> Option<&Failure> {
        match self {
            Verdict::Fails(f) => Some(f),
            _ => None,
        }
    }

    fn labelled(self, label: &str) -> Verdict {
        match self {
            Verdict::Fails(mut f) => {
                f.label = Some(label.to_string());
                Verdict::Fails(f)
            }
            other => other,
        }
    }
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Verdict::Holds(n) => write!(f, "holds on a family of {} losses", n),
            Verdict::Fails(x) => {
                if let Some(l) = &x.label {
                    write!(f, "{}: ", l)?;
                }
                write!(f, "fails ({}): {} > {}", x.provenance, x.lhs, x.rhs)
            }
            Verdict::Inconclusive(r) => write!(f, "inconclusive: {}", r),
        }
    }
}

fn truncated(loops: &std::collections::BTreeMap<usize, LoopStatus>) -> bool {
    loops.values().any(|s| matches!(s, LoopStatus::Truncated(_)))
}

/// Checks `P ⊑ Q` with respect to every loss in `family`, which lives over
/// the common post-context followed by `ext`.
pub fn program_refines(
    p: &Program,
    q: &Program,
    family: &TestFamily,
    ext: &VarContext,
    budget: usize,
) -> Result<Verdict, RefineError> {
    if !p.pre.same_vars(&q.pre) || !p.post.same_vars(&q.post) {
        return Err(RefineError::Mismatch(format!(
            "[{}] -> [{}] against [{}] -> [{}]",
            p.pre, p.post, q.pre, q.post
        )));
    }
    let pre_ctx = p.pre.merge(ext)?;
    for (e, why) in family.entries() {
        let a = wpl_extended(p, e, ext, budget)?;
        let b = wpl_extended(q, e, ext, budget)?;
        let inexact = truncated(&a.loops) || truncated(&b.loops);
        let b_pre = b.pre.reorder(&pre_ctx)?;
        if let Some((_, witness)) = a.pre.refinement_gap(&b_pre)? {
            if inexact {
                return Ok(Verdict::Inconclusive(format!("loop budget reached while checking {}", why)));
            }
            let failure = Failure {
                lhs: a.pre.eval(&witness)?,
                rhs: b_pre.eval(&witness)?,
                loss: e.clone(),
                provenance: why.clone(),
                witness,
                lhs_pre: a.pre,
                rhs_pre: b_pre,
                label: None,
            };
            debug_assert!(failure.certified());
            return Ok(Verdict::Fails(Box::new(failure)));
        }
        if inexact {
            return Ok(Verdict::Inconclusive(format!("loop budget reached while checking {}", why)));
        }
    }
    Ok(Verdict::Holds(family.len()))
}

fn check_signatures(a: &Datatype, c: &Datatype) -> Result<(), RefineError> {
    if !a.shared().same_vars(c.shared()) {
        return Err(RefineError::Mismatch(format!("shared [{}] against [{}]", a.shared(), c.shared())));
    }
    let mut na = a.op_names();
    let mut nc = c.op_names();
    na.sort();
    nc.sort();
    if na != nc {
        return Err(RefineError::Mismatch("the datatypes offer different operations".into()));
    }
    Ok(())
}

/// Checks `I; P(OP); F ⊑ I'; P(OP'); F'` for each context.
pub fn data_refines(
    a: &Datatype,
    c: &Datatype,
    contexts: &[(String, ProgramContext)],
    spec: &FamilySpec,
    budget: usize,
) -> Result<Verdict, RefineError> {
    check_signatures(a, c)?;
    let mut checked = 0;
    for (label, ctx) in contexts {
        let pa = composite(ctx, a).map_err(|e| e.context(label))?;
        let pc = composite(ctx, c).map_err(|e| e.context(label))?;
        let fam = spec.build(&pa.post)?;
        match program_refines(&pa, &pc, &fam, &VarContext::empty(), budget)? {
            Verdict::Holds(n) => checked += n,
            other => return Ok(other.labelled(label)),
        }
    }
    Ok(Verdict::Holds(checked))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    Forward,
    Backward,
}

impl fmt::Display for Direction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Direction::Forward => "forward",
            Direction::Backward => "backward",
        })
    }
}

#[derive(Debug, Clone)]
pub struct Square {
    pub name: String,
    pub verdict: Verdict,
    /// The reverse refinement, checked only when the square holds; if it
    /// holds too the square is an equality on the family.
    pub converse: Option<Verdict>,
}

impl Square {
    pub fn is_equality(&self) -> bool {
        self.verdict.holds() && self.converse.as_ref().is_some_and(Verdict::holds)
    }
}

#[derive(Debug, Clone)]
pub struct SimulationReport {
    pub direction: Direction,
    /// The healthiness condition the representation must meet.
    pub gate: &'static str,
    pub gate_passed: bool,
    pub squares: Vec<Square>,
    pub verdict: Verdict,
}

fn assigned(s: &Stmt, out: &mut Vec<Name>) {
    match s {
        Stmt::Assign { targets, .. } => out.extend(targets.iter().cloned()),
        Stmt::HidVar { name, .. } | Stmt::Unvar(name) => out.push(name.clone()),
        _ => {}
    }
    for c in s.children() {
        assigned(c, out);
    }
}

/// Forward: `I_A; rep ⊑ I_C`, `OP_A; rep ⊑ rep; OP_C`, `F_A ⊑ rep; F_C`,
/// with `rep` mapping the abstract state to the concrete one. Sound only for
/// hidden `rep`.
pub fn check_forward_simulation(
    a: &Datatype,
    c: &Datatype,
    rep: &Stmt,
    spec: &FamilySpec,
    ext: &VarContext,
    budget: usize,
) -> Result<SimulationReport, RefineError> {
    simulate(Direction::Forward, a, c, rep, spec, ext, budget)
}

/// Backward: `I_A ⊑ I_C; rep`, `rep; OP_A ⊑ OP_C; rep`, `rep; F_A ⊑ F_C`,
/// with `rep` mapping the concrete state to the abstract one. Sound only for
/// choiceless `rep`.
pub fn check_backward_simulation(
    a: &Datatype,
    c: &Datatype,
    rep: &Stmt,
    spec: &FamilySpec,
    ext: &VarContext,
    budget: usize,
) -> Result<SimulationReport, RefineError> {
    simulate(Direction::Backward, a, c, rep, spec, ext, budget)
}

fn simulate(
    dir: Direction,
    a: &Datatype,
    c: &Datatype,
    rep: &Stmt,
    spec: &FamilySpec,
    ext: &VarContext,
    budget: usize,
) -> Result<SimulationReport, RefineError> {
    check_signatures(a, c)?;
    let shared = a.shared();
    let mut touched = Vec::new();
    assigned(rep, &mut touched);
    if let Some(x) = touched.iter().find(|x| shared.contains(x)) {
        return Err(RefineError::RepTouchesShared(x.to_string()));
    }
    let (rep_from, rep_to) = match dir {
        Direction::Forward => (a.full(), c.full()),
        Direction::Backward => (c.full(), a.full()),
    };
    let target = match dir {
        Direction::Forward => c,
        Direction::Backward => a,
    };
    let rep = &declare_encap_domains(rep, &target.def.encap);
    let rep_prog = typecheck(rep, &rep_from).map_err(|e| e.context("rep"))?;
    if !rep_prog.post.same_vars(&rep_to) {
        return Err(RefineError::Mismatch(format!("rep must produce [{}], produces [{}]", rep_to, rep_prog.post)));
    }
    let (gate, gate_passed) = match dir {
        Direction::Forward => ("hidden", rep_prog.is_hidden()),
        Direction::Backward => ("choiceless", rep_prog.is_choiceless()),
    };

    let (ia, ic) = (&a.def.init, &c.def.init);
    let (fa, fc) = (&a.def.fin, &c.def.fin);
    let seq = |x: &Stmt, y: &Stmt| Stmt::seq([x.clone(), y.clone()]);
    // (name, lhs, rhs, pre-context)
    let mut plan: Vec<(String, Stmt, Stmt, VarContext)> = Vec::new();
    match dir {
        Direction::Forward => {
            plan.push(("init".into(), seq(ia, rep), ic.clone(), shared.clone()));
            for (name, op) in &a.def.ops {
                let op_c = c.def.op(name).expect("checked");
                plan.push((format!("op {}", name), seq(op, rep), seq(rep, op_c), a.full()));
            }
            plan.push(("final".into(), fa.clone(), seq(rep, fc), a.full()));
        }
        Direction::Backward => {
            plan.push(("init".into(), ia.clone(), seq(ic, rep), shared.clone()));
            for (name, op) in &a.def.ops {
                let op_c = c.def.op(name).expect("checked");
                plan.push((format!("op {}", name), seq(rep, op), seq(op_c, rep), c.full()));
            }
            plan.push(("final".into(), seq(rep, fa), fc.clone(), c.full()));
        }
    }

    let mut squares = Vec::new();
    for (name, lhs, rhs, pre) in plan {
        let lp = typecheck(&lhs, &pre).map_err(|e| e.context(&name))?;
        let rp = typecheck(&rhs, &pre).map_err(|e| e.context(&name))?;
        let fam = spec.build(&lp.post.merge(ext)?)?;
        let verdict = program_refines(&lp, &rp, &fam, ext, budget)?.labelled(&name);
        let converse = if verdict.holds() {
            Some(program_refines(&rp, &lp, &fam, ext, budget)?.labelled(&format!("{} (converse)", name)))
        } else {
            None
        };
        squares.push(Square { name, verdict, converse });
    }

    let verdict = if !gate_passed {
        Verdict::Inconclusive(format!("healthiness: rep is not {}", gate))
    } else if let Some(s) = squares.iter().find(|s| !s.verdict.holds()) {
        Verdict::Inconclusive(format!("square {} does not hold, so the simulation proves nothing", s.name))
    } else {
        Verdict::Holds(squares.iter().map(|s| if let Verdict::Holds(n) = s.verdict { n } else { 0 }).sum())
    };
    Ok(SimulationReport { direction: dir, gate, gate_passed, squares, verdict })
}
