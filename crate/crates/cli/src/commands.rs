use std::path::{Path, PathBuf};

use serde_json::{json, Value as Json};

use kuifje::algebra::{SubDist, VarContext};
use kuifje::lang::{
    composite, context_of, parse_decls, parse_file, typecheck, Datatype, Program, ProgramContext, SourceFile, Stmt,
};
use kuifje::loss::LossFunction;
use kuifje::oracle::{min_bayes_risk, min_bayes_risk_exhaustive};
use kuifje::refine::{
    check_backward_simulation, check_forward_simulation, data_refines, program_refines, FamilySpec, Provenance,
    SimulationReport, Verdict,
};
use kuifje::wpl::{default_loop_budget, wpl_extended, WplResult};

use crate::literal::{format_loss, parse_family, parse_loss, parse_prior};
use crate::{CliError, Command, Done, FamilyArgs, Inputs};

pub(crate) fn run(cmd: &Command, inputs: &mut Inputs) -> Result<Done, CliError> {
    match cmd {
        Command::Check { file } => check(inputs, file),
        Command::Wpl { file, post, ext, loop_budget, prior } => {
            wpl_cmd(inputs, file, post, ext.as_deref(), *loop_budget, prior.as_deref())
        }
        Command::Refine { p, q, family, ext, loop_budget } => refine(inputs, p, q, family, ext.as_deref(), *loop_budget),
        Command::Datatype { abs, conc, contexts, family, loop_budget, prior } => {
            datatype(inputs, abs, conc, contexts, family, *loop_budget, prior.as_deref())
        }
        Command::Simulate { direction, abs, conc, rep, family, ext, loop_budget } => {
            simulate(inputs, direction.forward, abs, conc, rep, family, ext.as_deref(), *loop_budget)
        }
        Command::Oracle { file, prior, post, exhaustive, cap } => oracle(inputs, file, prior, post, *exhaustive, *cap),
    }
}

fn budget(b: Option<usize>) -> usize {
    b.unwrap_or_else(default_loop_budget)
}

fn ext_context(ext: Option<&str>) -> Result<VarContext, CliError> {
    match ext {
        None => Ok(VarContext::empty()),
        Some(src) => Ok(context_of(&parse_decls(src)?)?),
    }
}

fn load_source(inputs: &mut Inputs, role: &str, path: &Path) -> Result<SourceFile, CliError> {
    let src = inputs.read(role, path)?;
    parse_file(&src).map_err(|e| CliError::Syntax(format!("{}:{}", path.display(), e)))
}

fn load_program(inputs: &mut Inputs, role: &str, path: &Path) -> Result<Program, CliError> {
    match load_source(inputs, role, path)? {
        SourceFile::Program(pf) => {
            let ctx = context_of(&pf.context)?;
            Ok(typecheck(&pf.body, &ctx).map_err(|e| e.context(&path.display().to_string()))?)
        }
        _ => Err(CliError::Type(format!("{}: expected a program", path.display()))),
    }
}

/// A statement whose context comes from elsewhere, such as a simulation.
fn load_stmt(inputs: &mut Inputs, role: &str, path: &Path) -> Result<Stmt, CliError> {
    match load_source(inputs, role, path)? {
        SourceFile::Program(pf) => Ok(pf.body),
        _ => Err(CliError::Type(format!("{}: expected a program", path.display()))),
    }
}

fn load_datatype(inputs: &mut Inputs, role: &str, path: &Path) -> Result<Datatype, CliError> {
    match load_source(inputs, role, path)? {
        SourceFile::Datatype(d) => Ok(Datatype::new(d).map_err(|e| e.context(&path.display().to_string()))?),
        _ => Err(CliError::Type(format!("{}: expected a datatype", path.display()))),
    }
}

fn load_context(inputs: &mut Inputs, path: &Path) -> Result<ProgramContext, CliError> {
    match load_source(inputs, "context", path)? {
        SourceFile::Context(c) => Ok(ProgramContext::new(c)?),
        _ => Err(CliError::Type(format!("{}: expected a program context", path.display()))),
    }
}

fn load_loss(inputs: &mut Inputs, role: &str, path: &Path) -> Result<LossFunction, CliError> {
    let src = inputs.read(role, path)?;
    parse_loss(&src).map_err(|e| match e {
        CliError::Syntax(m) => CliError::Syntax(format!("{}: {}", path.display(), m)),
        CliError::Type(m) => CliError::Type(format!("{}: {}", path.display(), m)),
        other => other,
    })
}

fn family_spec(inputs: &mut Inputs, args: &FamilyArgs) -> Result<FamilySpec, CliError> {
    let opts = parse_family(&args.family)?;
    let mut extra = Vec::new();
    for w in &args.witnesses {
        let e = load_loss(inputs, "witness", w)?;
        extra.push((e, Provenance::User(w.display().to_string())));
    }
    Ok(FamilySpec { opts, extra })
}

fn check(inputs: &mut Inputs, file: &Path) -> Result<Done, CliError> {
    if file.extension().is_some_and(|e| e == "loss") {
        let e = load_loss(inputs, "loss", file)?;
        return Ok(Done {
            code: 0,
            text: format!("loss over [{}] with {} generators\n", e.ctx(), e.gens().len()),
            result: json!({ "kind": "loss", "context": e.ctx().to_string(), "generators": e.gens().len() }),
        });
    }
    let (text, result) = match load_source(inputs, "file", file)? {
        SourceFile::Program(pf) => {
            let ctx = context_of(&pf.context)?;
            let p = typecheck(&pf.body, &ctx)?;
            let text = format!(
                "program [{}] -> [{}]\n  hidden: {}, choiceless: {}, loops: {}, choice sites: {}, print sites: {}\n",
                p.pre,
                p.post,
                p.is_hidden(),
                p.is_choiceless(),
                p.has_loops(),
                p.nondet_sites(),
                p.print_sites()
            );
            let result = json!({
                "kind": "program",
                "pre": p.pre.to_string(),
                "post": p.post.to_string(),
                "hidden": p.is_hidden(),
                "choiceless": p.is_choiceless(),
                "loops": p.has_loops(),
            });
            (text, result)
        }
        SourceFile::Datatype(d) => {
            let d = Datatype::new(d)?;
            let ops: Vec<String> = d.op_names().iter().map(|n| n.to_string()).collect();
            let text = format!("datatype shared [{}] encapsulated [{}] ops {}\n", d.shared(), d.encap(), ops.join(" "));
            let result = json!({
                "kind": "datatype",
                "shared": d.shared().to_string(),
                "encapsulated": d.encap().to_string(),
                "ops": ops,
            });
            (text, result)
        }
        SourceFile::Context(c) => {
            let c = ProgramContext::new(c)?;
            let text = format!("program context with client variables [{}]\n", c.client());
            (text, json!({ "kind": "context", "client": c.client().to_string() }))
        }
    };
    Ok(Done { code: 0, text, result })
}

fn loops_json(r: &WplResult) -> Json {
    Json::Array(r.loops.iter().map(|(site, s)| json!({ "site": site, "status": s.to_string() })).collect())
}

fn wpl_cmd(
    inputs: &mut Inputs,
    file: &Path,
    post: &Path,
    ext: Option<&str>,
    loop_budget: Option<usize>,
    prior: Option<&str>,
) -> Result<Done, CliError> {
    let p = load_program(inputs, "program", file)?;
    let e = load_loss(inputs, "post", post)?;
    let z = ext_context(ext)?;
    let r = wpl_extended(&p, &e, &z, budget(loop_budget))?;
    let pre = r.pre.canonicalize();
    let mut text = format!("pre-loss, {} generators:\n{}", pre.gens().len(), format_loss(&pre));
    for (site, s) in &r.loops {
        text.push_str(&format!("loop {}: {}\n", site, s));
    }
    let mut result = json!({
        "pre": format_loss(&pre),
        "generators": pre.gens().len(),
        "loops": loops_json(&r),
        "exact": r.exact(),
    });
    if let Some(spec) = prior {
        let src = inputs.read_spec("prior", spec)?;
        let d = parse_prior(&src, pre.ctx())?;
        let v = pre.eval(&d)?;
        text.push_str(&format!("value at prior: {}\n", v));
        result["value"] = json!(v.to_string());
    }
    Ok(Done { code: 0, text, result })
}

fn dist_json(d: &SubDist) -> Json {
    Json::Array(
        d.mass()
            .iter()
            .enumerate()
            .filter(|(_, m)| !num_traits::Zero::is_zero(*m))
            .map(|(i, m)| json!({ "state": d.ctx().show_state(i), "weight": m.to_string() }))
            .collect(),
    )
}

pub(crate) fn verdict_json(v: &Verdict) -> Json {
    match v {
        Verdict::Holds(n) => json!({ "kind": "holds", "checked": n, "note": "relative to the test family" }),
        Verdict::Inconclusive(r) => json!({ "kind": "inconclusive", "reason": r }),
        Verdict::Fails(f) => json!({
            "kind": "fails",
            "label": f.label,
            "provenance": f.provenance.to_string(),
            "loss": format_loss(&f.loss),
            "witness": dist_json(&f.witness),
            "lhs": f.lhs.to_string(),
            "rhs": f.rhs.to_string(),
            "certified": f.certified(),
        }),
    }
}

fn verdict_text(v: &Verdict) -> String {
    match v {
        Verdict::Fails(f) => {
            let mut t = format!("FAILS{}\n", f.label.as_ref().map(|l| format!(" in {}", l)).unwrap_or_default());
            t.push_str(&format!("  loss ({}):\n", f.provenance));
            for line in format_loss(&f.loss).lines() {
                t.push_str(&format!("    {}\n", line));
            }
            t.push_str(&format!("  at prior {}\n", f.witness));
            t.push_str(&format!("  left pre-loss {} > right pre-loss {}", f.lhs, f.rhs));
            t.push_str(if f.certified() { " (re-checked)\n" } else { " (NOT re-checked)\n" });
            t
        }
        Verdict::Holds(n) => format!("HOLDS on a family of {} losses (not a proof for all losses)\n", n),
        Verdict::Inconclusive(r) => format!("INCONCLUSIVE: {}\n", r),
    }
}

pub(crate) fn verdict_code(v: &Verdict) -> i32 {
    match v {
        Verdict::Holds(_) => 0,
        Verdict::Fails(_) => 3,
        Verdict::Inconclusive(_) => 4,
    }
}

fn refine(
    inputs: &mut Inputs,
    p: &Path,
    q: &Path,
    family: &FamilyArgs,
    ext: Option<&str>,
    loop_budget: Option<usize>,
) -> Result<Done, CliError> {
    let pp = load_program(inputs, "p", p)?;
    let qp = load_program(inputs, "q", q)?;
    let spec = family_spec(inputs, family)?;
    let z = ext_context(ext)?;
    let fam = spec.build(&pp.post.merge(&z)?)?;
    let v = program_refines(&pp, &qp, &fam, &z, budget(loop_budget))?;
    Ok(Done { code: verdict_code(&v), text: verdict_text(&v), result: json!({ "verdict": verdict_json(&v) }) })
}

fn datatype(
    inputs: &mut Inputs,
    abs: &Path,
    conc: &Path,
    contexts: &[PathBuf],
    family: &FamilyArgs,
    loop_budget: Option<usize>,
    prior: Option<&str>,
) -> Result<Done, CliError> {
    let a = load_datatype(inputs, "abstract", abs)?;
    let c = load_datatype(inputs, "concrete", conc)?;
    let mut ctxs = Vec::new();
    for path in contexts {
        ctxs.push((path.display().to_string(), load_context(inputs, path)?));
    }
    let spec = family_spec(inputs, family)?;
    let b = budget(loop_budget);
    let mut text = String::new();
    let mut evaluations = Vec::new();
    if let Some(prior) = prior {
        let prior_src = inputs.read_spec("prior", prior)?;
        for (label, ctx) in &ctxs {
            let pa = composite(ctx, &a)?;
            let pc = composite(ctx, &c)?;
            let d = parse_prior(&prior_src, &pa.pre)?;
            for (e, why) in spec.extra.iter().filter(|(e, _)| e.ctx().same_vars(&pa.post)) {
                let none = VarContext::empty();
                let va = wpl_extended(&pa, e, &none, b)?.pre.eval(&d)?;
                let vc = wpl_extended(&pc, e, &none, b)?.pre.reorder(&pa.pre)?.eval(&d)?;
                text.push_str(&format!("{} with {}: abstract {} , concrete {}\n", label, why, va, vc));
                evaluations.push(json!({
                    "context": label,
                    "loss": why.to_string(),
                    "abstract": va.to_string(),
                    "concrete": vc.to_string(),
                }));
            }
        }
    }
    let v = data_refines(&a, &c, &ctxs, &spec, b)?;
    text.push_str(&verdict_text(&v));
    Ok(Done {
        code: verdict_code(&v),
        text,
        result: json!({ "verdict": verdict_json(&v), "evaluations": evaluations }),
    })
}

pub(crate) fn simulation_json(r: &SimulationReport) -> Json {
    json!({
        "direction": r.direction.to_string(),
        "gate": { "condition": r.gate, "passed": r.gate_passed },
        "squares": r.squares.iter().map(|s| json!({
            "square": s.name,
            "verdict": verdict_json(&s.verdict),
            "converse": s.converse.as_ref().map(verdict_json),
            "equality": s.is_equality(),
        })).collect::<Vec<_>>(),
        "verdict": verdict_json(&r.verdict),
    })
}

#[allow(clippy::too_many_arguments)]
fn simulate(
    inputs: &mut Inputs,
    forward: bool,
    abs: &Path,
    conc: &Path,
    rep: &Path,
    family: &FamilyArgs,
    ext: Option<&str>,
    loop_budget: Option<usize>,
) -> Result<Done, CliError> {
    let a = load_datatype(inputs, "abstract", abs)?;
    let c = load_datatype(inputs, "concrete", conc)?;
    let rep = load_stmt(inputs, "rep", rep)?;
    let spec = family_spec(inputs, family)?;
    let z = ext_context(ext)?;
    let b = budget(loop_budget);
    let r = if forward {
        check_forward_simulation(&a, &c, &rep, &spec, &z, b)?
    } else {
        check_backward_simulation(&a, &c, &rep, &spec, &z, b)?
    };
    let mut text = format!(
        "{} simulation, rep is {}{}\n",
        r.direction,
        if r.gate_passed { "" } else { "NOT " },
        r.gate
    );
    for s in &r.squares {
        text.push_str(&format!("square {}: ", s.name));
        text.push_str(&verdict_text(&s.verdict));
        match &s.converse {
            Some(v) if v.holds() => text.push_str("  converse holds too: an equality on the family\n"),
            Some(v) => {
                text.push_str("  converse: ");
                text.push_str(&verdict_text(v));
            }
            None => {}
        }
    }
    text.push_str("overall: ");
    text.push_str(&verdict_text(&r.verdict));
    Ok(Done { code: verdict_code(&r.verdict), text, result: simulation_json(&r) })
}

fn oracle(
    inputs: &mut Inputs,
    file: &Path,
    prior: &str,
    post: &Path,
    exhaustive: bool,
    cap: usize,
) -> Result<Done, CliError> {
    let p = load_program(inputs, "program", file)?;
    let e = load_loss(inputs, "post", post)?;
    let src = inputs.read_spec("prior", prior)?;
    let d = parse_prior(&src, &p.pre)?;
    let risk = min_bayes_risk(&p, &d, &e)?;
    let via_wpl = wpl_extended(&p, &e, &VarContext::empty(), default_loop_budget())?.pre.eval(&d)?;
    let agrees = risk == via_wpl;
    let mut text = format!("least expected loss: {}\nweakest pre-loss at the prior: {}{}\n", risk, via_wpl, if agrees { " (agrees)" } else { " (DISAGREES)" });
    let mut result = json!({ "risk": risk.to_string(), "wpl_value": via_wpl.to_string(), "agrees": agrees });
    if exhaustive {
        let (ex, n) = min_bayes_risk_exhaustive(&p, &d, &e, cap)?;
        text.push_str(&format!("exhaustive over {} strategies: {}\n", n, ex));
        result["exhaustive"] = json!({ "risk": ex.to_string(), "strategies": n });
    }
    Ok(Done { code: if agrees { 0 } else { 4 }, text, result })
}
