//! Text formats for losses, priors and family specifications.
//!
//! A loss file starts with a `context` line and lists one generator per line:
//!
//! ```text
//! context n:{0,1,2,3} b:{0,1}
//! expr: (n + b) mod 2 = 0
//! table: (0,0)=1 (1,1)=1/2 (3,1)=inf
//! ```
//!
//! Expressions are evaluated per state, booleans counting as 0 and 1.
//! Omitted table states weigh 0. `//` starts a comment.

use kuifje::algebra::{ExtRat, Predicate, SubDist, Value, VarContext};
use kuifje::lang::{context_of, parse_decls, parse_expr, parse_table};
use kuifje::loss::LossFunction;
use kuifje::refine::FamilyOptions;
use num_rational::BigRational;
use num_traits::{One, Zero};

use crate::CliError;

fn strip_comment(line: &str) -> &str {
    line.split_once("//").map_or(line, |(a, _)| a).trim()
}

fn syntax(line: usize, msg: impl std::fmt::Display) -> CliError {
    CliError::Syntax(format!("line {}: {}", line, msg))
}

fn table_entries(ctx: &VarContext, src: &str, line: usize) -> Result<Vec<(usize, ExtRat)>, CliError> {
    let rows = parse_table(src).map_err(|e| syntax(line, e))?;
    let mut out = Vec::with_capacity(rows.len());
    for (state, w) in rows {
        let idx = ctx
            .index_of_values(&state)
            .ok_or_else(|| CliError::Type(format!("line {}: ({}) is not a state of [{}]", line, show(&state), ctx)))?;
        if out.iter().any(|(i, _)| *i == idx) {
            return Err(CliError::Type(format!("line {}: state ({}) listed twice", line, show(&state))));
        }
        out.push((idx, w));
    }
    Ok(out)
}

fn show(vs: &[Value]) -> String {
    vs.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(",")
}

fn generator(ctx: &VarContext, body: &str, line: usize) -> Result<Predicate, CliError> {
    if let Some(src) = body.strip_prefix("expr:") {
        let e = parse_expr(src).map_err(|e| syntax(line, e))?;
        let p = Predicate::from_expr(ctx, &e);
        p.map_err(|e| CliError::Type(format!("line {}: {}", line, e)))
    } else if let Some(src) = body.strip_prefix("table:") {
        let mut entries = vec![ExtRat::zero(); ctx.state_count()];
        for (i, w) in table_entries(ctx, src, line)? {
            entries[i] = w;
        }
        Predicate::new(ctx.clone(), entries).map_err(|e| CliError::Type(format!("line {}: {}", line, e)))
    } else {
        Err(syntax(line, "expected `expr:` or `table:`"))
    }
}

pub fn parse_loss(src: &str) -> Result<LossFunction, CliError> {
    let mut ctx: Option<VarContext> = None;
    let mut gens = Vec::new();
    for (i, raw) in src.lines().enumerate() {
        let line = strip_comment(raw);
        if line.is_empty() {
            continue;
        }
        match &ctx {
            None => {
                let rest = line
                    .strip_prefix("context")
                    .ok_or_else(|| syntax(i + 1, "a loss file starts with `context`"))?;
                let decls = parse_decls(rest.trim_start_matches(':')).map_err(|e| syntax(i + 1, e))?;
                ctx = Some(context_of(&decls).map_err(|e| CliError::Type(e.to_string()))?);
            }
            Some(c) => gens.push(generator(c, line, i + 1)?),
        }
    }
    let ctx = ctx.ok_or_else(|| syntax(1, "empty loss file"))?;
    LossFunction::new(&ctx, gens).map_err(|e| CliError::Type(e.to_string()))
}

/// The literal form of a loss, one `table:` line per generator.
pub fn format_loss(e: &LossFunction) -> String {
    let ctx = e.ctx();
    let mut out = format!("context {}\n", ctx);
    for g in e.gens() {
        out.push_str("table:");
        for (i, w) in g.entries().iter().enumerate() {
            if !w.is_zero() {
                out.push_str(&format!(" {}={}", ctx.show_state(i), w));
            }
        }
        out.push('\n');
    }
    out
}

/// `uniform`, or `state=weight` pairs summing to one.
pub fn parse_prior(src: &str, ctx: &VarContext) -> Result<SubDist, CliError> {
    let body: String = src.lines().map(strip_comment).collect::<Vec<_>>().join(" ");
    if body.trim() == "uniform" {
        return Ok(SubDist::uniform(ctx));
    }
    let mut mass = vec![BigRational::zero(); ctx.state_count()];
    for (i, w) in table_entries(ctx, &body, 1)? {
        match w {
            ExtRat::Fin(r) => mass[i] = r,
            ExtRat::Inf => return Err(CliError::Type("a prior cannot weigh a state `inf`".into())),
        }
    }
    let total: BigRational = mass.iter().sum();
    if !total.is_one() {
        return Err(CliError::Type(format!("prior weights sum to {}, not 1", total)));
    }
    SubDist::new(ctx.clone(), mass).map_err(|e| CliError::Type(e.to_string()))
}

/// `key=value` pairs separated by commas: `k`, `random`, `seed`, `cap`.
/// `default` or an empty string keeps the defaults.
pub fn parse_family(src: &str) -> Result<FamilyOptions, CliError> {
    let mut opts = FamilyOptions::default();
    let src = src.trim();
    if src.is_empty() || src == "default" {
        return Ok(opts);
    }
    for part in src.split(',') {
        let (k, v) = part
            .split_once('=')
            .ok_or_else(|| CliError::Syntax(format!("family option `{}` is not key=value", part)))?;
        let n: u64 = v
            .trim()
            .parse()
            .map_err(|_| CliError::Syntax(format!("family option `{}` needs a whole number", part)))?;
        match k.trim() {
            "k" | "max_subset" => opts.max_subset = n as usize,
            "random" => opts.random = n as usize,
            "seed" => opts.seed = n,
            "cap" => opts.cap = n as usize,
            other => return Err(CliError::Syntax(format!("unknown family option `{}`", other))),
        }
    }
    Ok(opts)
}
