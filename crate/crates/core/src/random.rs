//! Seeded generators of small programs, priors and losses, used by the
//! property suites and the acceptance run.
//!
//! Programs are produced as source text and parsed, so every generated case
//! also goes through the front end. All variables range over `0..k`, and
//! every assignment reduces modulo the target's size, so no generated
//! program aborts by leaving a domain.

use num_rational::BigRational;
use rand::seq::SliceRandom;
use rand::Rng;

use crate::algebra::{SubDist, VarContext};
use crate::lang::{context_of, parse_decls, parse_program, typecheck, Program, Stmt};
use crate::loss::LossFunction;
use crate::refine::random_loss;

/// Contexts of at most twelve states.
pub const CONTEXTS: &[&str] = &[
    "x:{0,1} y:{0,1}",
    "x:{0,1,2} y:{0,1}",
    "x:{0,1,2,3} y:{0,1,2}",
    "x:{0,1,2,3}",
    "x:{0,1} y:{0,1} z:{0,1}",
];

/// Which constructs a generated program may use, and how many of each.
#[derive(Debug, Clone, Copy)]
pub struct GenOptions {
    pub depth: usize,
    pub nondet: usize,
    pub prints: usize,
    pub conditionals: bool,
    pub loops: bool,
    pub asserts: bool,
}

impl Default for GenOptions {
    fn default() -> Self {
        GenOptions { depth: 5, nondet: 2, prints: 2, conditionals: true, loops: false, asserts: true }
    }
}

impl GenOptions {
    /// No conditionals, loops or prints.
    pub fn hidden() -> Self {
        GenOptions { conditionals: false, loops: false, prints: 0, ..Default::default() }
    }

    pub fn choiceless() -> Self {
        GenOptions { nondet: 0, ..Default::default() }
    }
}

/// A random context from [`CONTEXTS`].
pub fn random_context(rng: &mut impl Rng) -> VarContext {
    let decls = CONTEXTS.choose(rng).expect("nonempty");
    context_of(&parse_decls(decls).expect("well formed")).expect("distinct names")
}

struct Gen<'r, R: Rng> {
    rng: &'r mut R,
    opts: GenOptions,
    nondet: usize,
    prints: usize,
    fresh: usize,
    /// Variables in scope with their domain sizes.
    scope: Vec<(String, usize)>,
}

impl<R: Rng> Gen<'_, R> {
    fn var(&mut self) -> (String, usize) {
        self.scope.choose(self.rng).expect("nonempty scope").clone()
    }

    /// A value in `0..k`.
    fn expr(&mut self, k: usize) -> String {
        let (v, n) = self.var();
        let (w, _) = self.var();
        let c = self.rng.gen_range(0..k);
        match self.rng.gen_range(0..5) {
            0 => c.to_string(),
            1 if n <= k => v,
            2 => format!("({} + {}) mod {}", v, c, k),
            3 => format!("({} + {}) mod {}", v, w, k),
            _ => format!("({} * {} + {}) mod {}", v, w, c, k),
        }
    }

    fn guard(&mut self) -> String {
        let (v, n) = self.var();
        let c = self.rng.gen_range(0..n);
        match self.rng.gen_range(0..3) {
            0 => format!("{} = {}", v, c),
            1 => format!("{} != {}", v, c),
            _ => {
                let (w, _) = self.var();
                format!("{} < {}", v, w)
            }
        }
    }

    fn rhs(&mut self, k: usize) -> String {
        match self.rng.gen_range(0..4) {
            0 => {
                let num = self.rng.gen_range(1..4);
                format!("{} @ {}/4 | {}", self.expr(k), num, self.expr(k))
            }
            1 => format!("uniform(0..{})", k - 1),
            _ => self.expr(k),
        }
    }

    fn leaf(&mut self) -> String {
        let roll = self.rng.gen_range(0..10);
        if roll == 0 {
            return "skip".into();
        }
        if roll == 1 && self.opts.asserts {
            let g = self.guard();
            return format!("assert {}", g);
        }
        if roll <= 3 && self.prints < self.opts.prints {
            self.prints += 1;
            let (_, n) = self.var();
            let k = n.min(2);
            return if self.rng.gen_bool(0.5) {
                format!("print {}", self.expr(k))
            } else {
                format!("print {} @ 2/3 | {}", self.expr(k), self.expr(k))
            };
        }
        let outer: Vec<(String, usize)> =
            self.scope.iter().filter(|(v, _)| !v.starts_with('h')).cloned().collect();
        let (v, n) = outer.choose(self.rng).expect("context variables").clone();
        format!("{} := {}", v, self.rhs(n))
    }

    fn stmt(&mut self, depth: usize) -> String {
        if depth == 0 {
            return self.leaf();
        }
        match self.rng.gen_range(0..8) {
            0 | 1 => {
                let a = self.stmt(depth - 1);
                let b = self.stmt(depth - 1);
                format!("{}; {}", a, b)
            }
            2 if self.nondet < self.opts.nondet => {
                self.nondet += 1;
                let a = self.stmt(depth - 1);
                let b = self.stmt(depth - 1);
                format!("{{ {} }} [] {{ {} }}", a, b)
            }
            3 if self.opts.conditionals => {
                let g = self.guard();
                let a = self.stmt(depth - 1);
                let b = self.stmt(depth - 1);
                format!("if {} {{ {} }} else {{ {} }}", g, a, b)
            }
            4 => {
                let name = format!("h{}", self.fresh);
                self.fresh += 1;
                let init = self.rhs(2);
                self.scope.push((name.clone(), 2));
                let body = self.stmt(depth - 1);
                self.scope.pop();
                format!("hidvar {} : {{0,1}} := {}; {}; unvar {}", name, init, body, name)
            }
            5 if self.opts.loops => {
                let outer: Vec<(String, usize)> =
                    self.scope.iter().filter(|(v, _)| !v.starts_with('h')).cloned().collect();
                let (v, _) = outer.choose(self.rng).expect("context variables").clone();
                let step = if self.rng.gen_bool(0.5) {
                    format!("{} := {} - 1", v, v)
                } else {
                    format!("{} := {} - 1 @ 1/2 | {}", v, v, v)
                };
                format!("while {} > 0 {{ {} }}", v, step)
            }
            _ => self.leaf(),
        }
    }
}

/// Source text of a random program over `ctx`.
pub fn random_source(ctx: &VarContext, opts: GenOptions, rng: &mut impl Rng) -> String {
    let scope = ctx.vars().iter().map(|v| (v.name().to_string(), v.domain().len())).collect();
    let mut g = Gen { rng, opts, nondet: 0, prints: 0, fresh: 0, scope };
    let depth = g.rng.gen_range(1..=opts.depth);
    g.stmt(depth)
}

pub fn random_stmt(ctx: &VarContext, opts: GenOptions, rng: &mut impl Rng) -> Stmt {
    let src = random_source(ctx, opts, rng);
    parse_program(&src).unwrap_or_else(|e| panic!("generated program `{}` does not parse: {}", src, e))
}

/// A random typed program from `ctx` to itself.
pub fn random_program(ctx: &VarContext, opts: GenOptions, rng: &mut impl Rng) -> Program {
    let src = random_source(ctx, opts, rng);
    let stmt = parse_program(&src).unwrap_or_else(|e| panic!("generated program `{}` does not parse: {}", src, e));
    typecheck(&stmt, ctx).unwrap_or_else(|e| panic!("generated program `{}` does not typecheck: {}", src, e))
}

/// A full-support prior with small integer weights.
pub fn random_prior(ctx: &VarContext, rng: &mut impl Rng) -> SubDist {
    let weights: Vec<i64> = (0..ctx.state_count()).map(|_| rng.gen_range(0..5)).collect();
    let total: i64 = weights.iter().sum();
    if total == 0 {
        return SubDist::uniform(ctx);
    }
    let mass = weights.iter().map(|&w| BigRational::new(w.into(), total.into())).collect();
    SubDist::new(ctx.clone(), mass).expect("sums to one")
}

/// A random loss, as in the standard family.
pub fn random_post(ctx: &VarContext, rng: &mut impl Rng) -> LossFunction {
    random_loss(ctx, rng)
}
