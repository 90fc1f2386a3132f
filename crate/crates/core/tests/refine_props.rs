mod common;

use common::*;
use kuifje::algebra::VarContext;
use kuifje::lang::{parse_program, typecheck, Program};
use kuifje::random::{random_context, random_post, random_source, GenOptions};
use kuifje::refine::{program_refines, FamilyOptions, FamilySpec, Provenance, TestFamily, Verdict};
use proptest::prelude::*;

const BUDGET: usize = 64;

fn compile(src: &str, x: &VarContext) -> Program {
    typecheck(&parse_program(src).unwrap(), x).unwrap()
}

fn small_family(x: &VarContext) -> TestFamily {
    let spec = FamilySpec { opts: FamilyOptions { max_subset: 1, random: 2, ..Default::default() }, extra: vec![] };
    spec.build(x).unwrap()
}

fn check(p: &Program, q: &Program, fam: &TestFamily) -> Verdict {
    program_refines(p, q, fam, &VarContext::empty(), BUDGET).unwrap()
}

proptest! {
    #![proptest_config(config(100))]

    #[test]
    fn failures_are_certified(seed in any::<u64>()) {
        let mut r = rng(seed);
        let x = random_context(&mut r);
        let opts = GenOptions { depth: 3, ..Default::default() };
        let p = compile(&random_source(&x, opts, &mut r), &x);
        let q = compile(&random_source(&x, opts, &mut r), &x);
        if let Verdict::Fails(f) = check(&p, &q, &small_family(&x)) {
            prop_assert!(f.certified());
            prop_assert!(f.lhs > f.rhs);
        }
    }

    #[test]
    fn more_losses_never_rescue_a_failure(seed in any::<u64>()) {
        let mut r = rng(seed);
        let x = random_context(&mut r);
        let opts = GenOptions { depth: 3, ..Default::default() };
        let p = compile(&random_source(&x, opts, &mut r), &x);
        let q = compile(&random_source(&x, opts, &mut r), &x);
        let small = check(&p, &q, &small_family(&x));
        let extra = (0..3).map(|i| (random_post(&x, &mut r), Provenance::User(format!("extra {}", i)))).collect();
        let spec = FamilySpec { opts: FamilyOptions { max_subset: 1, random: 2, ..Default::default() }, extra };
        let big = check(&p, &q, &spec.build(&x).unwrap());
        if small.fails() {
            prop_assert!(big.fails());
        }
    }

    #[test]
    fn refinement_chains_compose(seed in any::<u64>()) {
        let mut r = rng(seed);
        let x = random_context(&mut r);
        let opts = GenOptions { depth: 3, prints: 0, ..Default::default() };
        let body = random_source(&x, opts, &mut r);
        let leak = ["x mod 2", "x", "x @ 1/3 | 0"];
        let most = compile(&format!("{}; print {}; print {}", body, leak[seed as usize % 3], leak[(seed as usize + 1) % 3]), &x);
        let some = compile(&format!("{}; print {}", body, leak[seed as usize % 3]), &x);
        let none = compile(&body, &x);
        let fam = small_family(&x);
        let ab = check(&most, &some, &fam);
        let bc = check(&some, &none, &fam);
        prop_assert!(ab.holds() && bc.holds());
        prop_assert!(check(&most, &none, &fam).holds());
    }
}
