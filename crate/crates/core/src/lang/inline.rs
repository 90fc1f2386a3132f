//! Datatypes, program contexts and the copy rule.

use std::sync::Arc;

use super::ast::*;
use super::typecheck::{context_of, typecheck, Program};
use super::TypeError;
use crate::algebra::VarContext;

/// A datatype whose programs have been checked against its signature.
#[derive(Clone, Debug)]
pub struct Datatype {
    pub def: DatatypeDef,
    shared: VarContext,
    encap: VarContext,
}

impl Datatype {
    pub fn new(mut def: DatatypeDef) -> Result<Self, TypeError> {
        def.init = declare_encap_domains(&def.init, &def.encap);
        let shared = context_of(&def.shared)?;
        let encap = context_of(&def.encap)?;
        let full = shared.merge(&encap).map_err(|e| TypeError(format!("shared and encapsulated: {}", e)))?;
        let init = typecheck(&def.init, &shared).map_err(|e| e.context("init"))?;
        if !init.post.same_vars(&full) {
            return Err(TypeError(format!("init must produce [{}], produces [{}]", full, init.post)));
        }
        for (name, op) in &def.ops {
            let p = typecheck(op, &full).map_err(|e| e.context(&format!("op {}", name)))?;
            if p.post != full {
                return Err(TypeError(format!("op {} must preserve [{}], ends in [{}]", name, full, p.post)));
            }
            if p.has_calls() {
                return Err(TypeError(format!("op {} contains a call", name)));
            }
        }
        let fin = typecheck(&def.fin, &init.post).map_err(|e| e.context("final"))?;
        if !fin.post.same_vars(&shared) {
            return Err(TypeError(format!("final must produce [{}], produces [{}]", shared, fin.post)));
        }
        if init.has_calls() || fin.has_calls() {
            return Err(TypeError("init and final may not contain calls".into()));
        }
        Ok(Datatype { def, shared, encap })
    }

    pub fn shared(&self) -> &VarContext {
        &self.shared
    }

    pub fn encap(&self) -> &VarContext {
        &self.encap
    }

    /// Shared then encapsulated variables, the context of every operation.
    pub fn full(&self) -> VarContext {
        self.shared.merge(&self.encap).expect("checked in new")
    }

    pub fn op_names(&self) -> Vec<Name> {
        self.def.ops.iter().map(|(n, _)| n.clone()).collect()
    }

    /// Names private to the datatype: encapsulated variables and local
    /// declarations inside its programs.
    pub fn local_names(&self) -> Vec<Name> {
        let mut out: Vec<Name> = self.encap.names().map(Arc::from).collect();
        self.def.init.hidvars(&mut out);
        for (_, op) in &self.def.ops {
            op.hidvars(&mut out);
        }
        self.def.fin.hidvars(&mut out);
        out
    }
}

/// Gives `hidvar x := ...` without a domain the domain `x` is declared with
/// among the encapsulated variables.
pub fn declare_encap_domains(s: &Stmt, encap: &[Decl]) -> Stmt {
    match s {
        Stmt::HidVar { name, domain: None, rhs } => match encap.iter().find(|d| d.name == *name) {
            Some(d) => Stmt::HidVar { name: name.clone(), domain: Some(d.domain.clone()), rhs: rhs.clone() },
            None => s.clone(),
        },
        _ => s.map_children(&mut |c| declare_encap_domains(c, encap)),
    }
}

/// A client program with `call` holes, checked against its declarations.
#[derive(Clone, Debug)]
pub struct ProgramContext {
    pub def: ContextDef,
    client: VarContext,
}

impl ProgramContext {
    pub fn new(def: ContextDef) -> Result<Self, TypeError> {
        let client = context_of(&def.client)?;
        Ok(ProgramContext { def, client })
    }

    /// The trivial context `call OP` with no client variables.
    pub fn hole(op: &str) -> Self {
        ProgramContext::new(ContextDef { client: vec![], body: Stmt::Call(Arc::from(op)) }).expect("empty")
    }

    pub fn client(&self) -> &VarContext {
        &self.client
    }

    fn names(&self) -> Vec<Name> {
        let mut out: Vec<Name> = self.client.names().map(Arc::from).collect();
        self.def.body.idents(&mut out);
        out
    }
}

/// The context in which a composite runs: shared then client variables.
pub fn composite_context(ctx: &ProgramContext, d: &Datatype) -> Result<VarContext, TypeError> {
    d.shared()
        .merge(ctx.client())
        .map_err(|e| TypeError(format!("client variables clash with shared ones: {}", e)))
}

/// `name'`, then `name'1`, `name'2`, ... avoiding everything in `taken`.
fn fresh(name: &str, taken: &[Name]) -> Result<Name, TypeError> {
    let base = format!("{}'", name);
    if !taken.iter().any(|t| **t == *base) {
        return Ok(Arc::from(base.as_str()));
    }
    for k in 1..10_000 {
        let cand = format!("{}{}", base, k);
        if !taken.iter().any(|t| **t == *cand) {
            return Ok(Arc::from(cand.as_str()));
        }
    }
    Err(TypeError(format!("no fresh name available for `{}`", name)))
}

/// The copy rule: `I; body[call OP := OP]; F`, with datatype-local names
/// renamed away from client names.
pub fn inline(ctx: &ProgramContext, d: &Datatype) -> Result<Stmt, TypeError> {
    composite_context(ctx, d)?;
    let locals = d.local_names();
    let client_names = ctx.names();
    for n in &client_names {
        if locals.contains(n) && !ctx.client.contains(n) && !declared_in(&ctx.def.body, n) {
            return Err(TypeError(format!("the context refers to encapsulated variable `{}`", n)));
        }
    }
    let mut taken: Vec<Name> = client_names.clone();
    taken.extend(locals.iter().cloned());
    taken.extend(d.shared().names().map(Arc::from));
    let mut renames: Vec<(Name, Name)> = Vec::new();
    for l in &locals {
        if client_names.contains(l) {
            let f = fresh(l, &taken)?;
            taken.push(f.clone());
            renames.push((l.clone(), f));
        }
    }
    let rn = |s: &str| renames.iter().find(|(a, _)| &**a == s).map(|(_, b)| b.clone());
    let body = ctx.def.body.substitute_calls(&|name| match d.def.op(name) {
        Some(op) => Ok(op.rename(&rn)),
        None => Err(TypeError(format!("unknown operation `{}`", name))),
    })?;
    Ok(Stmt::seq([d.def.init.rename(&rn), body, d.def.fin.rename(&rn)]))
}

fn declared_in(s: &Stmt, n: &Name) -> bool {
    let mut hv = Vec::new();
    s.hidvars(&mut hv);
    hv.contains(n)
}

/// Inlines and typechecks the composite over shared and client variables.
pub fn composite(ctx: &ProgramContext, d: &Datatype) -> Result<Program, TypeError> {
    let pre = composite_context(ctx, d)?;
    let stmt = inline(ctx, d)?;
    let p = typecheck(&stmt, &pre)?;
    if p.post != pre {
        return Err(TypeError(format!("composite ends in [{}] instead of [{}]", p.post, pre)));
    }
    Ok(p)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lang::{parse_file, parse_program, SourceFile};

    fn dt(src: &str) -> Datatype {
        let SourceFile::Datatype(d) = parse_file(src).unwrap() else { panic!() };
        Datatype::new(d).unwrap()
    }

    fn cx(src: &str) -> ProgramContext {
        let SourceFile::Context(c) = parse_file(src).unwrap() else { panic!() };
        ProgramContext::new(c).unwrap()
    }

    const ABSTRACT: &str = "shared: s:{0,1}\ninit: skip\nop OP: s := 0 @ 1/2 | 1\nfinal: skip";
    const CONCRETE: &str =
        "shared: s:{0,1}\nencap: b:{0,1}\ninit: hidvar b := 0 @ 1/2 | 1\nop OP: s := b; b := 0 @ 1/2 | 1\nfinal: unvar b";

    #[test]
    fn hole_context_inlines_to_init_op_final() {
        let got = inline(&ProgramContext::hole("OP"), &dt(ABSTRACT)).unwrap();
        assert_eq!(got, parse_program("skip; s := 0 @ 1/2 | 1; skip").unwrap());
    }

    #[test]
    fn client_context_inlines_in_order() {
        let c = cx("client: x:{0,1} y:{0,1}\nbody: x := {0}[]{1}; call OP; y := s");
        let got = inline(&c, &dt(CONCRETE)).unwrap();
        let expect = parse_program(
            "hidvar b : {0,1} := 0 @ 1/2 | 1; x := {0}[]{1}; s := b; b := 0 @ 1/2 | 1; y := s; unvar b",
        )
        .unwrap();
        assert_eq!(got, expect);
        assert_eq!(composite(&c, &dt(CONCRETE)).unwrap().post.len(), 3);
    }

    #[test]
    fn clashing_encapsulated_names_are_primed() {
        let c = cx("client: b:{0,1}\nbody: b := s; call OP");
        let got = inline(&c, &dt(CONCRETE)).unwrap();
        let expect =
            parse_program("hidvar b' : {0,1} := 0 @ 1/2 | 1; b := s; s := b'; b' := 0 @ 1/2 | 1; unvar b'").unwrap();
        assert_eq!(got, expect);
        let c2 = cx("client: b:{0,1} b':{0,1}\nbody: call OP");
        let got2 = inline(&c2, &dt(CONCRETE)).unwrap();
        assert!(got2.to_string().contains("hidvar b'1"));
    }

    #[test]
    fn rejects_bad_inputs() {
        assert!(inline(&ProgramContext::hole("NOPE"), &dt(ABSTRACT)).is_err());
        let leaky = cx("client: y:{0,1}\nbody: call OP; y := b");
        assert!(inline(&leaky, &dt(CONCRETE)).is_err());
        let SourceFile::Datatype(bad) =
            parse_file("shared: s:{0,1}\nencap: b:{0,1}\ninit: skip\nop OP: skip\nfinal: skip").unwrap()
        else {
            panic!()
        };
        assert!(Datatype::new(bad).is_err());
    }
}
