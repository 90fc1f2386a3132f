mod common;

use common::*;
use kuifje::algebra::{ExtRat, Predicate};
use kuifje::loss::{LossFunction, Membership};
use kuifje::random::random_context;
use proptest::prelude::*;
use rand::Rng;

/// Some member of the upper closure of `e`: a convex mix of two generators
/// plus a nonnegative bump.
fn member_of(e: &LossFunction, rng: &mut impl Rng) -> Predicate {
    let g = &e.gens()[rng.gen_range(0..e.gens().len())];
    let h = &e.gens()[rng.gen_range(0..e.gens().len())];
    let w = rng.gen_range(0..=4);
    let mix = g.scale(&ExtRat::from_ratio(w, 4)).add(&h.scale(&ExtRat::from_ratio(4 - w, 4))).unwrap();
    mix.add(&predicate(e.ctx(), rng, false).scale(&ExtRat::from_ratio(1, 3))).unwrap()
}

proptest! {
    #![proptest_config(config(150))]

    #[test]
    fn refinement_is_a_preorder_with_meet(seed in any::<u64>()) {
        let mut r = rng(seed);
        let x = random_context(&mut r);
        let (e, f, h) = (loss(&x, &mut r), loss(&x, &mut r), loss(&x, &mut r));
        let m = e.min(&f).unwrap();
        prop_assert!(e.refines(&e).unwrap());
        prop_assert!(m.refines(&e).unwrap() && m.refines(&f).unwrap());
        // any common lower bound lies below the meet
        let g = m.min(&h).unwrap();
        prop_assert!(g.refines(&e).unwrap() && g.refines(&f).unwrap());
        prop_assert!(g.refines(&m).unwrap());
        // and the meet is not below a strictly smaller bound unless they agree
        if m.refines(&g).unwrap() {
            prop_assert!(same(&m, &g));
        }
        prop_assert!(same(&e.min(&f).unwrap(), &f.min(&e).unwrap()));
        prop_assert!(same(&e.min(&f.min(&h).unwrap()).unwrap(), &e.min(&f).unwrap().min(&h).unwrap()));
    }

    #[test]
    fn mutual_refinement_means_equal_risk(seed in any::<u64>()) {
        let mut r = rng(seed);
        let x = random_context(&mut r);
        let e = loss(&x, &mut r);
        let f = e.min(&LossFunction::embed(member_of(&e, &mut r))).unwrap();
        prop_assert!(e.refines(&f).unwrap() && f.refines(&e).unwrap());
        for _ in 0..5 {
            let d = prior(&x, &mut r);
            prop_assert_eq!(e.eval(&d).unwrap(), f.eval(&d).unwrap());
        }
    }

    #[test]
    fn risk_ignores_redundant_generators(seed in any::<u64>()) {
        let mut r = rng(seed);
        let x = random_context(&mut r);
        let mut gens: Vec<Predicate> = (0..6).map(|_| predicate(&x, &mut r, true)).collect();
        let e = LossFunction::new(&x, gens.clone()).unwrap();
        gens.push(member_of(&e, &mut r));
        let bigger = LossFunction::new(&x, gens).unwrap();
        let canon = e.canonicalize();
        prop_assert!(canon.gens().len() <= e.gens().len());
        for _ in 0..10 {
            let d = prior(&x, &mut r);
            let v = e.eval(&d).unwrap();
            prop_assert_eq!(&canon.eval(&d).unwrap(), &v);
            prop_assert_eq!(&bigger.eval(&d).unwrap(), &v);
        }
    }

    #[test]
    fn sums_and_scalings_are_cone_operations(seed in any::<u64>()) {
        let mut r = rng(seed);
        let x = random_context(&mut r);
        let (e, f, h) = (loss(&x, &mut r), loss(&x, &mut r), loss(&x, &mut r));
        let k = scalar(&mut r, false);
        prop_assert!(same(&e.add(&f).unwrap(), &f.add(&e).unwrap()));
        prop_assert!(same(&e.add(&f.add(&h).unwrap()).unwrap(), &e.add(&f).unwrap().add(&h).unwrap()));
        prop_assert!(same(&e.add(&f).unwrap().scale(&k), &e.scale(&k).add(&f.scale(&k)).unwrap()));
        prop_assert!(same(&e.add(&LossFunction::bottom(&x)).unwrap(), &e));
        prop_assert!(e.scale(&ExtRat::zero()).is_bottom());
        // monotone in each argument
        let lower = e.min(&h).unwrap();
        prop_assert!(lower.add(&f).unwrap().refines(&e.add(&f).unwrap()).unwrap());
        prop_assert!(lower.scale(&k).refines(&e.scale(&k)).unwrap());
    }

    #[test]
    fn loss_maps_are_linear_and_preserve_meets(seed in any::<u64>()) {
        let mut r = rng(seed);
        let (x, y) = (random_context(&mut r), random_context(&mut r));
        let f = kernel(&x, &y, &mut r, false);
        let (e1, e2) = (loss(&y, &mut r), loss(&y, &mut r));
        let k = scalar(&mut r, true);
        prop_assert!(same(&e1.add(&e2).unwrap().map(&f).unwrap(), &e1.map(&f).unwrap().add(&e2.map(&f).unwrap()).unwrap()));
        prop_assert!(same(&e1.scale(&k).map(&f).unwrap(), &e1.map(&f).unwrap().scale(&k)));
        prop_assert!(same(&e1.min(&e2).unwrap().map(&f).unwrap(), &e1.map(&f).unwrap().min(&e2.map(&f).unwrap()).unwrap()));
    }

    #[test]
    fn membership_answers_carry_certificates(seed in any::<u64>()) {
        let mut r = rng(seed);
        let x = random_context(&mut r);
        let gens: Vec<Predicate> = (0..r.gen_range(1..=5)).map(|_| predicate(&x, &mut r, true)).collect();
        let e = LossFunction::new(&x, gens).unwrap();
        let probe = if r.gen_bool(0.5) { member_of(&e, &mut r) } else { predicate(&x, &mut r, true) };
        let m = e.member(&probe).unwrap();
        prop_assert!(m.verify(&probe, &e));
        if let Membership::NonMember { witness } = &m {
            prop_assert!(probe.expect(witness).unwrap() < e.eval(witness).unwrap());
        }
    }

    #[test]
    fn refinement_gaps_are_witnessed(seed in any::<u64>()) {
        let mut r = rng(seed);
        let x = random_context(&mut r);
        let (e, f) = (loss(&x, &mut r), loss(&x, &mut r));
        match e.refinement_gap(&f).unwrap() {
            None => prop_assert!(e.refines(&f).unwrap()),
            Some((g, w)) => {
                prop_assert!(f.gens().contains(&g));
                prop_assert!(f.eval(&w).unwrap() <= g.expect(&w).unwrap());
                prop_assert!(e.eval(&w).unwrap() > f.eval(&w).unwrap());
            }
        }
    }
}
