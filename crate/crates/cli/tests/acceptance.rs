//! Acceptance run. Prints one line per criterion and exits non-zero if any
//! criterion fails.

use std::path::PathBuf;
use std::str::FromStr;
use std::time::{Duration, Instant};

use kuifje::algebra::{ExtRat, Kernel, Predicate, SubDist, VarContext};
use kuifje::lang::{composite, context_of, parse_decls, parse_file, Datatype, Program, ProgramContext, SourceFile};
use kuifje::loss::LossFunction;
use kuifje::oracle::{min_bayes_risk, min_bayes_risk_exhaustive};
use kuifje::random::{random_context, random_post, random_prior, random_program, GenOptions};
use kuifje::refine::{data_refines, FamilySpec, Verdict};
use kuifje::wpl::{wpl, wpl_extended, LoopStatus};
use kuifje_cli::literal::parse_loss;
use kuifje_cli::{execute_args, Outcome};
use num_rational::BigRational;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::Value;

type Check = Result<String, String>;

fn corpus(rel: &str) -> String {
    let p: PathBuf = [env!("CARGO_MANIFEST_DIR"), "..", "..", "corpus", rel].iter().collect();
    p.to_string_lossy().into_owned()
}

fn cli(args: &[&str]) -> Outcome {
    let mut all = vec!["kuifje", "--json"];
    all.extend_from_slice(args);
    execute_args(all).expect("arguments parse")
}

fn ensure(cond: bool, msg: impl Into<String>) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg.into())
    }
}

fn ext(v: &Value) -> ExtRat {
    ExtRat::from_str(v.as_str().expect("a rational string")).expect("a rational")
}

fn ctx(decls: &str) -> VarContext {
    context_of(&parse_decls(decls).unwrap()).unwrap()
}

fn datatype(rel: &str) -> Datatype {
    match parse_file(&std::fs::read_to_string(corpus(rel)).unwrap()).unwrap() {
        SourceFile::Datatype(d) => Datatype::new(d).unwrap(),
        _ => panic!("{} is not a datatype", rel),
    }
}

fn program_context(rel: &str) -> ProgramContext {
    match parse_file(&std::fs::read_to_string(corpus(rel)).unwrap()).unwrap() {
        SourceFile::Context(c) => ProgramContext::new(c).unwrap(),
        _ => panic!("{} is not a context", rel),
    }
}

fn verdict_kind(v: &Value) -> &str {
    v["kind"].as_str().unwrap_or("?")
}

fn c1_reveal_then_choose() -> Check {
    let out = cli(&["wpl", &corpus("reveal_choose/program.kf"), "--post", &corpus("reveal_choose/loss.loss")]);
    ensure(out.code == 0, format!("exit {}", out.code))?;
    let pre = parse_loss(out.report["result"]["pre"].as_str().unwrap()).map_err(|e| e.to_string())?;
    let expected = parse_loss(&std::fs::read_to_string(corpus("reveal_choose/expected.loss")).unwrap()).unwrap();
    ensure(pre.equals(&expected).unwrap(), "pre-loss differs from the four-generator meet")?;
    Ok(format!("{} generators, semantically equal to the expected meet", pre.gens().len()))
}

fn c2_database() -> Check {
    let out = cli(&[
        "datatype",
        &corpus("database/abstract.kf"),
        &corpus("database/concrete_offset.kf"),
        "--context",
        &corpus("database/context.kf"),
        "--witness",
        &corpus("database/loss.loss"),
        "--prior",
        &corpus("database/prior.txt"),
    ]);
    let r = &out.report["result"];
    let eval = &r["evaluations"][0];
    let (a, c) = (ext(&eval["abstract"]), ext(&eval["concrete"]));
    ensure(a >= ExtRat::from_ratio(1, 2), format!("abstract composite {} < 1/2", a))?;
    ensure(c <= ExtRat::from_ratio(3, 8), format!("concrete composite {} > 3/8", c))?;
    ensure(verdict_kind(&r["verdict"]) == "fails", "data refinement did not fail")?;
    ensure(r["verdict"]["certified"] == true, "failure not certified")?;
    ensure(out.code == 3, format!("exit {}", out.code))?;
    Ok(format!("abstract {} >= 1/2, concrete {} <= 3/8, refinement fails (certified)", a, c))
}

fn equalities(report: &Value) -> Result<usize, String> {
    let squares = report["squares"].as_array().unwrap();
    for s in squares {
        ensure(s["equality"] == true, format!("square {} is not an equality", s["square"]))?;
    }
    Ok(squares.len())
}

fn c3_random_bit_generator() -> Check {
    let (a, c, rep) = (corpus("coin/abstract.kf"), corpus("coin/concrete.kf"), corpus("coin/rep.kf"));
    let fam = "k=2,random=50,seed=0";
    let fwd = cli(&["simulate", "--forward", &a, &c, "--rep", &rep, "--family", fam]);
    ensure(fwd.code == 0, format!("forward simulation exit {}", fwd.code))?;
    let nf = equalities(&fwd.report["result"])?;
    let bwd = cli(&["simulate", "--backward", &c, &a, "--rep", &rep, "--family", fam]);
    ensure(bwd.code == 0, format!("backward simulation exit {}", bwd.code))?;
    let nb = equalities(&bwd.report["result"])?;
    let ctx = corpus("coin/context.kf");
    let there = cli(&["datatype", &a, &c, "--context", &ctx, "--family", fam]);
    let back = cli(&["datatype", &c, &a, "--context", &ctx, "--family", fam]);
    ensure(there.code == 0 && back.code == 0, "datatype refinement does not hold both ways")?;
    Ok(format!("forward {} and backward {} squares are equalities; datatypes refine both ways", nf, nb))
}

/// The failure's witness loss and prior, replayed through forward execution.
fn oracle_confirms(abs: &str, conc: &str, context: &str) -> Check {
    let (a, c) = (datatype(abs), datatype(conc));
    let pctx = program_context(context);
    let v = data_refines(&a, &c, &[("context".into(), pctx.clone())], &FamilySpec::default(), 64).unwrap();
    let Verdict::Fails(f) = v else { return Err("no failure to replay".into()) };
    let (pa, pc) = (composite(&pctx, &a).unwrap(), composite(&pctx, &c).unwrap());
    let ra = min_bayes_risk(&pa, &f.witness.reorder(&pa.pre).unwrap(), &f.loss).map_err(|e| e.to_string())?;
    let rc = min_bayes_risk(&pc, &f.witness.reorder(&pc.pre).unwrap(), &f.loss).map_err(|e| e.to_string())?;
    ensure(ra == f.lhs && rc == f.rhs && ra > rc, format!("oracle gives {} and {}, pre-losses {} and {}", ra, rc, f.lhs, f.rhs))?;
    Ok(format!("oracle replays {} > {} with loss {}", ra, rc, f.provenance))
}

fn counterexample(dir: &str, direction: &str) -> Check {
    let (a, c, rep, ctx) = (
        corpus(&format!("{}/abstract.kf", dir)),
        corpus(&format!("{}/concrete.kf", dir)),
        corpus(&format!("{}/rep.kf", dir)),
        corpus(&format!("{}/context.kf", dir)),
    );
    let sim = cli(&["simulate", direction, &a, &c, "--rep", &rep]);
    let r = &sim.report["result"];
    for s in r["squares"].as_array().unwrap() {
        ensure(verdict_kind(&s["verdict"]) == "holds", format!("square {} does not hold", s["square"]))?;
    }
    ensure(r["gate"]["passed"] == false, "gate unexpectedly passed")?;
    ensure(verdict_kind(&r["verdict"]) == "inconclusive" && sim.code == 4, "simulation not reported inconclusive")?;
    let dt = cli(&["datatype", &a, &c, "--context", &ctx]);
    let v = &dt.report["result"]["verdict"];
    ensure(verdict_kind(v) == "fails" && v["certified"] == true && dt.code == 3, "datatype refinement did not fail with a certificate")?;
    let replay = oracle_confirms(&format!("{}/abstract.kf", dir), &format!("{}/concrete.kf", dir), &format!("{}/context.kf", dir))?;
    Ok(format!("squares hold, {} gate fails, datatype fails; {}", r["gate"]["condition"].as_str().unwrap(), replay))
}

fn c4_counterexamples() -> Check {
    let mut parts = Vec::new();
    for (dir, dir_flag) in [("leaky_rep", "--forward"), ("masking_choice", "--backward")] {
        let start = Instant::now();
        let msg = counterexample(dir, dir_flag).map_err(|e| format!("{}: {}", dir, e))?;
        let t = start.elapsed();
        ensure(t < Duration::from_secs(10), format!("{} took {:.1?}", dir, t))?;
        parts.push(format!("{}: {} ({:.2?})", dir, msg, t));
    }
    Ok(parts.join("; "))
}

fn c5_print_laws() -> Check {
    let p = |f: &str| corpus(&format!("print_laws/{}.kf", f));
    let code = |a: &str, b: &str| cli(&["refine", &p(a), &p(b)]).code;
    ensure(code("print", "skip") == 0, "print b does not refine skip")?;
    ensure(code("skip", "print") == 3, "skip refines print b")?;
    ensure(code("print_twice", "print") == 0, "print b; print b does not refine print b")?;
    ensure(code("print", "print_not") == 0 && code("print_not", "print") == 0, "print b and print not b differ")?;
    Ok("print b ⊑ skip, skip ⋢ print b, print b; print b ⊑ print b, print b ≡ print not b".into())
}

fn kernel(src: &VarContext, dst: &VarContext, rng: &mut impl Rng) -> Kernel {
    let n = dst.state_count();
    let rows = (0..src.state_count())
        .map(|_| {
            let j = rng.gen_range(0..n);
            let k = rng.gen_range(0..n);
            let w = rng.gen_range(1..=3);
            vec![(j, BigRational::new(w.into(), 4.into())), (k, BigRational::new((3 - w).into(), 4.into()))]
        })
        .collect();
    Kernel::new(src.clone(), dst.clone(), rows).unwrap()
}

fn small_loss(ctx: &VarContext, rng: &mut impl Rng) -> LossFunction {
    let n = rng.gen_range(1..=2);
    let gens = (0..n).map(|_| Predicate::from_fn(ctx, |_| ExtRat::from_ratio(rng.gen_range(0..=8), 4))).collect();
    LossFunction::new(ctx, gens).unwrap()
}

/// Runs `law` on `cases` seeds and names the first failing one.
fn law(name: &str, cases: u64, law: impl Fn(&mut ChaCha8Rng) -> bool) -> Result<(), String> {
    for seed in 0..cases {
        if !law(&mut ChaCha8Rng::seed_from_u64(seed)) {
            return Err(format!("{} fails at seed {}", name, seed));
        }
    }
    Ok(())
}

fn pre(p: &Program, e: &LossFunction) -> LossFunction {
    wpl(p, e, 64).unwrap().pre
}

fn c6_healthiness() -> Check {
    const N: u64 = 100;
    let same = |a: &LossFunction, b: &LossFunction| a.equals(b).unwrap();
    let setup = |r: &mut ChaCha8Rng, opts: GenOptions| {
        let x = random_context(r);
        let p = random_program(&x, opts, r);
        (x, p)
    };
    let laws: Vec<(&str, Box<dyn Fn(&mut ChaCha8Rng) -> bool>)> = vec![
        ("monotone", Box::new(move |r| {
            let (_, p) = setup(r, GenOptions::default());
            let e2 = random_post(&p.post, r);
            let e1 = e2.min(&random_post(&p.post, r)).unwrap();
            pre(&p, &e1).refines(&pre(&p, &e2)).unwrap()
        })),
        ("superlinear", Box::new(move |r| {
            let (_, p) = setup(r, GenOptions::default());
            let (e1, e2) = (small_loss(&p.post, r), small_loss(&p.post, r));
            pre(&p, &e1).add(&pre(&p, &e2)).unwrap().refines(&pre(&p, &e1.add(&e2).unwrap())).unwrap()
        })),
        ("homogeneous", Box::new(move |r| {
            let (_, p) = setup(r, GenOptions::default());
            let e = random_post(&p.post, r);
            [ExtRat::zero(), ExtRat::from_ratio(2, 3), ExtRat::Inf].iter().all(|k| same(&pre(&p, &e.scale(k)), &pre(&p, &e).scale(k)))
        })),
        ("partial", Box::new(move |r| {
            let (_, p) = setup(r, GenOptions::default());
            let z = ctx("u:{0,1}");
            let one = LossFunction::embed(Predicate::ones(&p.post.merge(&z).unwrap()));
            let w = wpl_extended(&p, &one, &z, 64).unwrap().pre;
            w.contains(&Predicate::ones(w.ctx())).unwrap()
        })),
        ("hidden programs preserve meets", Box::new(move |r| {
            let (_, p) = setup(r, GenOptions::hidden());
            let (e1, e2) = (random_post(&p.post, r), random_post(&p.post, r));
            p.is_hidden() && same(&pre(&p, &e1.min(&e2).unwrap()), &pre(&p, &e1).min(&pre(&p, &e2)).unwrap())
        })),
        ("choiceless programs are linear", Box::new(move |r| {
            let (_, p) = setup(r, GenOptions::choiceless());
            let (e1, e2) = (small_loss(&p.post, r), small_loss(&p.post, r));
            p.is_choiceless() && same(&pre(&p, &e1.add(&e2).unwrap()), &pre(&p, &e1).add(&pre(&p, &e2)).unwrap())
        })),
        ("weak frame rule", Box::new(move |r| {
            let (x, p) = setup(r, GenOptions::default());
            let z = ctx("u:{0,1,2}");
            let e_z = Predicate::from_fn(&z, |_| ExtRat::from_ratio(r.gen_range(0..=4), 2));
            let e_y = random_post(&p.post, r);
            let yz = p.post.merge(&z).unwrap();
            let framed = e_y.extend(&z).unwrap().conj(&e_z.extend(&p.post).unwrap().reorder(&yz).unwrap()).unwrap();
            let xz = x.merge(&z).unwrap();
            let lhs = wpl_extended(&p, &framed, &z, 64).unwrap().pre;
            let rhs = pre(&p, &e_y).extend(&z).unwrap().conj(&e_z.extend(&x).unwrap().reorder(&xz).unwrap()).unwrap();
            same(&lhs, &rhs)
        })),
        ("correlation transformer", Box::new(move |r| {
            let (x, p) = setup(r, GenOptions::default());
            let (z, w) = (ctx("u:{0,1}"), ctx("w:{0,1,2}"));
            let g = kernel(&z, &w, r);
            let e = small_loss(&p.post.merge(&w).unwrap(), r);
            let lhs = wpl_extended(&p, &e, &w, 64).unwrap().pre.map(&Kernel::identity(&x).tensor(&g).unwrap()).unwrap();
            let moved = e.map(&Kernel::identity(&p.post).tensor(&g).unwrap()).unwrap();
            same(&lhs, &wpl_extended(&p, &moved, &z, 64).unwrap().pre)
        })),
        ("loss maps are linear and preserve meets", Box::new(move |r| {
            let (x, y) = (random_context(r), random_context(r));
            let f = kernel(&x, &y, r);
            let (e1, e2) = (random_post(&y, r), random_post(&y, r));
            same(&e1.add(&e2).unwrap().map(&f).unwrap(), &e1.map(&f).unwrap().add(&e2.map(&f).unwrap()).unwrap())
                && same(&e1.min(&e2).unwrap().map(&f).unwrap(), &e1.map(&f).unwrap().min(&e2.map(&f).unwrap()).unwrap())
        })),
        ("tensor is functorial", Box::new(move |r| {
            let (a, b, c) = (ctx("a:{0,1}"), ctx("b:{0,1,2}"), ctx("c:{0,1}"));
            let (p, q, s) = (ctx("p:{0,1,2}"), ctx("q:{0,1}"), ctx("s:{0,1}"));
            let (f1, f2, g1, g2) = (kernel(&a, &b, r), kernel(&b, &c, r), kernel(&p, &q, r), kernel(&q, &s, r));
            f1.tensor(&g1).unwrap().then(&f2.tensor(&g2).unwrap()).unwrap()
                == f1.then(&f2).unwrap().tensor(&g1.then(&g2).unwrap()).unwrap()
        })),
    ];
    let count = laws.len();
    for (name, f) in laws {
        law(name, N, f)?;
    }
    Ok(format!("{} laws x {} seeded cases, no failures", count, N))
}

fn c7_oracle_duality() -> Check {
    let mut small_sites = 0;
    for seed in 0..200u64 {
        let mut r = ChaCha8Rng::seed_from_u64(1_000 + seed);
        let x = random_context(&mut r);
        let p = random_program(&x, GenOptions::default(), &mut r);
        ensure(!p.has_loops() && p.nondet_sites() <= 2 && p.print_sites() <= 2 && x.state_count() <= 12, "generator out of bounds")?;
        let e = random_post(&p.post, &mut r);
        let d: SubDist = random_prior(&x, &mut r);
        let risk = min_bayes_risk(&p, &d, &e).map_err(|e| e.to_string())?;
        let via = pre(&p, &e).eval(&d).unwrap();
        ensure(risk == via, format!("seed {}: oracle {} but pre-loss {}", seed, risk, via))?;
        if p.nondet_sites() <= 3 {
            small_sites += 1;
            let (all, _) = min_bayes_risk_exhaustive(&p, &d, &e, 1 << 16).map_err(|e| e.to_string())?;
            ensure(all == risk, format!("seed {}: exhaustive {} but greedy {}", seed, all, risk))?;
        }
    }
    Ok(format!("200 programs agree exactly; exhaustive search agrees on {}", small_sites))
}

fn c8_loops() -> Check {
    let load = |rel: &str| match parse_file(&std::fs::read_to_string(corpus(rel)).unwrap()).unwrap() {
        SourceFile::Program(pf) => kuifje::lang::typecheck(&pf.body, &context_of(&pf.context).unwrap()).unwrap(),
        _ => panic!("not a program"),
    };
    let p = load("loops/geometric.kf");
    let one = LossFunction::embed(Predicate::ones(&p.post));
    let at_one = SubDist::point(&p.pre, p.pre.index_of_values(&[kuifje::algebra::Value::int(1)]).unwrap());
    let mut last: Option<LossFunction> = None;
    for n in 1..=20usize {
        let s = wpl(&p, &one, n).unwrap();
        ensure(s.loops.values().all(|st| *st == LoopStatus::Truncated(n)), format!("N={}: not reported truncated", n))?;
        let bound = ExtRat::from(BigRational::new(((1i64 << n) - 1).into(), (1i64 << n).into()));
        ensure(s.pre.eval(&at_one).unwrap() == bound, format!("N={}: value at c=1 is not {}", n, bound))?;
        let judgement = LossFunction::embed(Predicate::constant(&p.pre, bound.clone()));
        ensure(judgement.refines(&s.pre).unwrap(), format!("N={}: {}·[[true]] is not below the partial sum", n, bound))?;
        if let Some(prev) = &last {
            ensure(prev.refines(&s.pre).unwrap(), format!("partial sums decrease at N={}", n))?;
        }
        last = Some(s.pre);
    }
    let bounded = load("loops/bounded.kf");
    let st = wpl(&bounded, &LossFunction::embed(Predicate::ones(&bounded.post)), 64).unwrap();
    ensure(st.loops.values().all(|s| matches!(s, LoopStatus::Converged(_))), "bounded loop not converged")?;
    Ok("S_1..S_20 increase, value at c=1 is exactly 1-2^-N, truncation reported; bounded loop converges".into())
}

fn main() {
    let criteria: Vec<(u32, &str, Duration, fn() -> Check)> = vec![
        (1, "reveal-then-choose pre-loss", Duration::from_secs(1), c1_reveal_then_choose),
        (2, "encrypted database", Duration::from_secs(30), c2_database),
        (3, "random bit generator simulations", Duration::from_secs(10), c3_random_bit_generator),
        (4, "counterexample fidelity", Duration::from_secs(20), c4_counterexamples),
        (5, "print laws", Duration::from_secs(60), c5_print_laws),
        (6, "healthiness properties", Duration::from_secs(300), c6_healthiness),
        (7, "oracle duality", Duration::from_secs(300), c7_oracle_duality),
        (8, "loop soundness", Duration::from_secs(60), c8_loops),
    ];
    let mut failed = 0;
    for (n, title, limit, run) in criteria {
        let start = Instant::now();
        let result = std::panic::catch_unwind(run).unwrap_or_else(|_| Err("panicked".into()));
        let took = start.elapsed();
        let result = result.and_then(|msg| {
            if took <= limit {
                Ok(msg)
            } else {
                Err(format!("{} but took {:.2?}, over the {:?} limit", msg, took, limit))
            }
        });
        match result {
            Ok(msg) => println!("criterion {} PASS  {} ({:.2?}): {}", n, title, took, msg),
            Err(msg) => {
                failed += 1;
                println!("criterion {} FAIL  {} ({:.2?}): {}", n, title, took, msg);
            }
        }
    }
    if failed > 0 {
        println!("{} criteria failed", failed);
        std::process::exit(1);
    }
    println!("all criteria pass");
}
