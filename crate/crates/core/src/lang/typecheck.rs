//! Typing and elaboration: every statement is checked at every state of its
//! (finite) pre-context and compiled to kernels, guard predicates and
//! observation channels.

use std::collections::BTreeMap;

use num_rational::BigRational;
use num_traits::{One, Zero};

use super::ast::*;
use super::eval::{atoms_in, atoms_of, eval_dist, eval_expr, AtomSet, Env, EvalError};
use super::TypeError;
use crate::algebra::{ExtRat, Kernel, Predicate, Value, Var, VarContext};

/// A typed statement with its contexts.
#[derive(Clone, Debug)]
pub struct Program {
    pub node: Node,
    pub pre: VarContext,
    pub post: VarContext,
}

#[derive(Clone, Debug)]
pub enum Node {
    Skip,
    Abort,
    Seq(Vec<Program>),
    /// `kernel` acts on the whole pre-context.
    Assign { targets: Vec<Name>, rhs: DistExpr, kernel: Kernel },
    /// `kernel` maps pre to pre with the new variable appended.
    HidVar { name: Name, rhs: DistExpr, kernel: Kernel },
    Unvar { name: Name, kernel: Kernel },
    If { site: usize, guard: Expr, prob: Predicate, then: Box<Program>, els: Box<Program> },
    While { site: usize, guard: Expr, prob: Predicate, body: Box<Program> },
    /// One predicate per observable value: the probability of emitting it.
    Print { site: usize, rhs: DistExpr, channel: Vec<(Value, Predicate)> },
    NonDet { site: usize, left: Box<Program>, right: Box<Program> },
    Assert { guard: Expr, prob: Predicate },
    Call { name: Name },
}

impl Program {
    pub fn children(&self) -> Vec<&Program> {
        match &self.node {
            Node::Seq(xs) => xs.iter().collect(),
            Node::If { then, els, .. } => vec![then, els],
            Node::While { body, .. } => vec![body],
            Node::NonDet { left, right, .. } => vec![left, right],
            _ => vec![],
        }
    }

    fn any(&self, f: &impl Fn(&Node) -> bool) -> bool {
        f(&self.node) || self.children().into_iter().any(|c| c.any(f))
    }

    fn count(&self, f: &impl Fn(&Node) -> bool) -> usize {
        f(&self.node) as usize + self.children().into_iter().map(|c| c.count(f)).sum::<usize>()
    }

    /// No visible control flow and no leaks: no `if`, `while` or `print`.
    pub fn is_hidden(&self) -> bool {
        !self.any(&|n| matches!(n, Node::If { .. } | Node::While { .. } | Node::Print { .. }))
    }

    /// No demonic choice.
    pub fn is_choiceless(&self) -> bool {
        !self.any(&|n| matches!(n, Node::NonDet { .. }))
    }

    pub fn has_loops(&self) -> bool {
        self.any(&|n| matches!(n, Node::While { .. }))
    }

    pub fn has_calls(&self) -> bool {
        self.any(&|n| matches!(n, Node::Call { .. }))
    }

    pub fn nondet_sites(&self) -> usize {
        self.count(&|n| matches!(n, Node::NonDet { .. }))
    }

    pub fn print_sites(&self) -> usize {
        self.count(&|n| matches!(n, Node::Print { .. }))
    }
}

pub fn typecheck(stmt: &Stmt, pre: &VarContext) -> Result<Program, TypeError> {
    let mut atoms = AtomSet::new();
    atoms_of(pre, &mut atoms);
    collect_domain_atoms(stmt, &mut atoms);
    let mut tc = Checker { atoms, next_site: 0, inferred: Vec::new() };
    tc.check(stmt, pre)
}

fn collect_domain_atoms(s: &Stmt, out: &mut AtomSet) {
    if let Stmt::HidVar { domain: Some(d), .. } = s {
        d.values().iter().for_each(|v| atoms_in(v, out));
    }
    for c in s.children() {
        collect_domain_atoms(c, out);
    }
}

struct Checker {
    atoms: AtomSet,
    next_site: usize,
    /// Variables in scope whose domain was read off their initial values.
    inferred: Vec<Name>,
}

fn err(stmt: &Stmt, msg: impl std::fmt::Display) -> TypeError {
    let mut text = stmt.to_string();
    if text.len() > 80 {
        text.truncate(77);
        text.push_str("...");
    }
    TypeError(format!("in `{}`: {}", text, msg))
}

impl Checker {
    fn site(&mut self) -> usize {
        self.next_site += 1;
        self.next_site - 1
    }

    fn at_state(&self, stmt: &Stmt, ctx: &VarContext, idx: usize, e: EvalError) -> TypeError {
        err(stmt, format!("{} at state {}", e, ctx.show_state(idx)))
    }

    fn each_state<T>(
        &self,
        stmt: &Stmt,
        ctx: &VarContext,
        mut f: impl FnMut(&Env, &[usize]) -> Result<T, EvalError>,
    ) -> Result<Vec<T>, TypeError> {
        let n = ctx.state_count();
        let mut out = Vec::with_capacity(n);
        let mut digits = vec![0usize; ctx.len()];
        for idx in 0..n {
            let env = Env::with_atoms(ctx, &digits, &self.atoms);
            out.push(f(&env, &digits).map_err(|e| self.at_state(stmt, ctx, idx, e))?);
            ctx.increment(&mut digits);
        }
        Ok(out)
    }

    fn guard(&self, stmt: &Stmt, g: &Expr, ctx: &VarContext) -> Result<Predicate, TypeError> {
        let entries = self.each_state(stmt, ctx, |env, _| {
            let v = eval_expr(g, env)?;
            match v.as_num() {
                Some(r) if *r >= BigRational::zero() && *r <= BigRational::one() => Ok(ExtRat::Fin(r.clone())),
                _ => Err(EvalError::Type(format!("guard `{}` evaluates to {}, outside [0,1]", g, v))),
            }
        })?;
        Ok(Predicate::new(ctx.clone(), entries).expect("sized"))
    }

    fn check(&mut self, stmt: &Stmt, pre: &VarContext) -> Result<Program, TypeError> {
        let same = |node| Ok(Program { node, pre: pre.clone(), post: pre.clone() });
        match stmt {
            Stmt::Skip => same(Node::Skip),
            Stmt::Abort => same(Node::Abort),
            Stmt::Call(name) => same(Node::Call { name: name.clone() }),
            Stmt::Seq(xs) => {
                let mut ctx = pre.clone();
                let mut parts = Vec::with_capacity(xs.len());
                for x in xs {
                    let p = self.check(x, &ctx)?;
                    ctx = p.post.clone();
                    parts.push(p);
                }
                Ok(Program { node: Node::Seq(parts), pre: pre.clone(), post: ctx })
            }
            Stmt::Assign { targets, rhs } => {
                let mut positions = Vec::with_capacity(targets.len());
                for t in targets {
                    let p = pre.position(t).ok_or_else(|| err(stmt, format!("unbound variable `{}`", t)))?;
                    if positions.contains(&p) {
                        return Err(err(stmt, format!("`{}` assigned twice", t)));
                    }
                    positions.push(p);
                }
                let inferred = self.inferred.clone();
                let rows = self.each_state(stmt, pre, |env, digits| {
                    let mut row = Vec::new();
                    for (v, w) in eval_dist(rhs, env)? {
                        let parts = if positions.len() == 1 {
                            vec![v]
                        } else {
                            match v {
                                Value::Array(xs) if xs.len() == positions.len() => xs,
                                other => {
                                    return Err(EvalError::Type(format!(
                                        "{} targets but the value {} is not a {}-tuple",
                                        positions.len(),
                                        other,
                                        positions.len()
                                    )))
                                }
                            }
                        };
                        let mut next = digits.to_vec();
                        let mut inside = true;
                        for (&p, v) in positions.iter().zip(&parts) {
                            let var = &pre.vars()[p];
                            match var.index_of(v) {
                                Some(k) => next[p] = k,
                                None if inferred.iter().any(|n| **n == *var.name()) => {
                                    return Err(EvalError::Type(format!(
                                        "{} is outside the inferred domain of `{}`; declare it with `hidvar {} : ... :=`",
                                        v,
                                        var.name(),
                                        var.name()
                                    )))
                                }
                                // outside the declared domain: the mass aborts
                                None => inside = false,
                            }
                        }
                        if inside {
                            row.push((pre.encode(&next), w));
                        }
                    }
                    Ok(row)
                })?;
                let kernel = Kernel::new(pre.clone(), pre.clone(), rows).map_err(|e| err(stmt, e))?;
                same(Node::Assign { targets: targets.clone(), rhs: rhs.clone(), kernel })
            }
            Stmt::HidVar { name, domain, rhs } => {
                if pre.contains(name) {
                    return Err(err(stmt, format!("`{}` is already declared", name)));
                }
                let dists = self.each_state(stmt, pre, |env, _| eval_dist(rhs, env))?;
                let values = match domain {
                    Some(d) => d.values(),
                    None => {
                        self.inferred.push(name.clone());
                        let mut vs: Vec<Value> = dists.iter().flatten().map(|(v, _)| v.clone()).collect();
                        vs.sort();
                        vs.dedup();
                        vs
                    }
                };
                let var = Var::new(name.to_string(), values).map_err(|e| err(stmt, e))?;
                let post = pre.push(var.clone()).map_err(|e| err(stmt, e))?;
                let width = var.domain().len();
                let rows = dists
                    .into_iter()
                    .enumerate()
                    .map(|(i, d)| {
                        d.into_iter()
                            .filter_map(|(v, w)| var.index_of(&v).map(|k| (i * width + k, w)))
                            .collect()
                    })
                    .collect();
                let kernel = Kernel::new(pre.clone(), post.clone(), rows).map_err(|e| err(stmt, e))?;
                Ok(Program {
                    node: Node::HidVar { name: name.clone(), rhs: rhs.clone(), kernel },
                    pre: pre.clone(),
                    post,
                })
            }
            Stmt::Unvar(name) => {
                let post = pre.remove(name).map_err(|_| err(stmt, format!("`{}` is not declared", name)))?;
                self.inferred.retain(|n| n != name);
                let kernel = Kernel::projection(pre, &post).map_err(|e| err(stmt, e))?;
                Ok(Program { node: Node::Unvar { name: name.clone(), kernel }, pre: pre.clone(), post })
            }
            Stmt::If { guard, then, els } => {
                let site = self.site();
                let prob = self.guard(stmt, guard, pre)?;
                let then = self.check(then, pre)?;
                let els = self.check(els, pre)?;
                if then.post != els.post {
                    return Err(err(
                        stmt,
                        format!("branches end in different contexts: [{}] vs [{}]", then.post, els.post),
                    ));
                }
                let post = then.post.clone();
                Ok(Program {
                    node: Node::If { site, guard: guard.clone(), prob, then: Box::new(then), els: Box::new(els) },
                    pre: pre.clone(),
                    post,
                })
            }
            Stmt::While { guard, body } => {
                let site = self.site();
                let prob = self.guard(stmt, guard, pre)?;
                let body = self.check(body, pre)?;
                if body.post != *pre {
                    return Err(err(stmt, format!("loop body changes the context to [{}]", body.post)));
                }
                same(Node::While { site, guard: guard.clone(), prob, body: Box::new(body) })
            }
            Stmt::Print(rhs) => {
                let site = self.site();
                let dists = self.each_state(stmt, pre, |env, _| eval_dist(rhs, env))?;
                let n = pre.state_count();
                let mut by_value: BTreeMap<Value, Vec<ExtRat>> = BTreeMap::new();
                for (i, d) in dists.into_iter().enumerate() {
                    for (v, w) in d {
                        by_value.entry(v).or_insert_with(|| vec![ExtRat::zero(); n])[i] = ExtRat::Fin(w);
                    }
                }
                let channel = by_value
                    .into_iter()
                    .map(|(v, es)| (v, Predicate::new(pre.clone(), es).expect("sized")))
                    .collect();
                same(Node::Print { site, rhs: rhs.clone(), channel })
            }
            Stmt::NonDet(a, b) => {
                let site = self.site();
                let left = self.check(a, pre)?;
                let right = self.check(b, pre)?;
                if left.post != right.post {
                    return Err(err(
                        stmt,
                        format!("branches end in different contexts: [{}] vs [{}]", left.post, right.post),
                    ));
                }
                let post = left.post.clone();
                Ok(Program {
                    node: Node::NonDet { site, left: Box::new(left), right: Box::new(right) },
                    pre: pre.clone(),
                    post,
                })
            }
            Stmt::Assert(g) => {
                let prob = self.guard(stmt, g, pre)?;
                same(Node::Assert { guard: g.clone(), prob })
            }
        }
    }
}

/// Context from declarations.
pub fn context_of(decls: &[Decl]) -> Result<VarContext, TypeError> {
    let vars = decls
        .iter()
        .map(|d| Var::new(d.name.to_string(), d.domain.values()))
        .collect::<Result<Vec<_>, _>>()
        .map_err(|e| TypeError(e.to_string()))?;
    VarContext::new(vars).map_err(|e| TypeError(e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algebra::int_context;
    use crate::lang::parse_program;

    fn tc(src: &str, ctx: &VarContext) -> Result<Program, TypeError> {
        typecheck(&parse_program(src).unwrap(), ctx)
    }

    #[test]
    fn hidvar_then_unvar_restores_context() {
        let c = int_context(&[("s", 2)]);
        let p = tc("hidvar b := 0 @ 1/2 | 1; unvar b", &c).unwrap();
        assert_eq!(p.pre, p.post);
        let q = tc("hidvar b := 0 @ 1/2 | 1", &c).unwrap();
        assert_eq!(q.post.names().collect::<Vec<_>>(), vec!["s", "b"]);
    }

    #[test]
    fn errors() {
        let c = int_context(&[("s", 2)]);
        assert!(tc("s := t", &c).unwrap_err().0.contains("unbound variable `t`"));
        assert!(tc("hidvar s := 0", &c).unwrap_err().0.contains("already declared"));
        assert!(tc("unvar b", &c).is_err());
        assert!(tc("if s = 0 { hidvar b := 0 } else { skip }", &c).unwrap_err().0.contains("different contexts"));
        assert!(tc("if s + 1 { skip } else { skip }", &c).unwrap_err().0.contains("outside [0,1]"));
        assert!(tc("while s = 0 { hidvar b := 0 }", &c).is_err());
        assert!(tc("s := s and 1", &int_context(&[("s", 3)])).is_err());
    }

    #[test]
    fn probabilistic_guards_are_allowed() {
        let c = int_context(&[("s", 2)]);
        assert!(tc("if s / 2 { skip } else { abort }", &c).is_ok());
    }

    #[test]
    fn out_of_domain_assignment_aborts() {
        let c = int_context(&[("n", 3)]);
        let p = tc("n := n + 1", &c).unwrap();
        let Node::Assign { kernel, .. } = &p.node else { panic!() };
        assert!(!kernel.is_total());
        assert_eq!(kernel.row_sum(2), BigRational::zero());
        assert_eq!(kernel.row_sum(1), BigRational::one());
    }

    #[test]
    fn inferred_domains_do_not_silently_abort() {
        let c = VarContext::empty();
        let e = tc("hidvar n := 0; n := n + 1", &c).unwrap_err();
        assert!(e.0.contains("inferred domain"), "{}", e);
        assert!(tc("hidvar n : int 0..1 := 0; n := n + 1", &c).is_ok());
        assert!(tc("hidvar n := 0; unvar n; hidvar n : {0,1} := 0; n := 1 - n", &c).is_ok());
    }

    #[test]
    fn classifiers() {
        let c = int_context(&[("x", 2), ("b", 2)]);
        let h = tc("hidvar c := 0 @ 1/2 | 1; unvar c", &c).unwrap();
        assert!(h.is_hidden() && h.is_choiceless());
        let p = tc("print b", &c).unwrap();
        assert!(!p.is_hidden() && p.is_choiceless());
        let n = tc("{x:=0}[]{x:=1}", &c).unwrap();
        assert!(n.is_hidden() && !n.is_choiceless());
        assert!(tc("assert b = 0", &c).unwrap().is_hidden());
    }

    #[test]
    fn print_channel_lists_reachable_values() {
        let c = int_context(&[("n", 4)]);
        let p = tc("print (n div 2)", &c).unwrap();
        let Node::Print { channel, .. } = &p.node else { panic!() };
        assert_eq!(channel.len(), 2);
        assert_eq!(channel[0].0, Value::int(0));
    }
}
