//! Seeded generators shared by the property suites.
#![allow(dead_code)]

use kuifje::algebra::{ExtRat, Kernel, Predicate, SubDist, VarContext};
use kuifje::lang::{context_of, parse_decls};
use kuifje::loss::LossFunction;
use num_rational::BigRational;
use proptest::test_runner::{Config, RngSeed};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn config(cases: u32) -> Config {
    Config { cases, rng_seed: RngSeed::Fixed(0x6b75_6966), failure_persistence: None, ..Config::default() }
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn ctx(decls: &str) -> VarContext {
    context_of(&parse_decls(decls).unwrap()).unwrap()
}

/// Mostly small rationals, sometimes zero or infinite.
pub fn scalar(rng: &mut impl Rng, allow_inf: bool) -> ExtRat {
    match rng.gen_range(0..10) {
        0 => ExtRat::zero(),
        1 if allow_inf => ExtRat::Inf,
        _ => ExtRat::from_ratio(rng.gen_range(0..=12), rng.gen_range(1..=4)),
    }
}

pub fn predicate(ctx: &VarContext, rng: &mut impl Rng, allow_inf: bool) -> Predicate {
    Predicate::from_fn(ctx, |_| if rng.gen_bool(0.3) { ExtRat::zero() } else { scalar(rng, allow_inf) })
}

pub fn loss(ctx: &VarContext, rng: &mut impl Rng) -> LossFunction {
    loss_with(ctx, rng, 4)
}

/// Sums multiply generator counts through every leak, so laws about sums
/// use fewer generators.
pub fn loss_with(ctx: &VarContext, rng: &mut impl Rng, max_gens: usize) -> LossFunction {
    let n = rng.gen_range(1..=max_gens);
    LossFunction::new(ctx, (0..n).map(|_| predicate(ctx, rng, false)).collect()).unwrap()
}

/// A sub-stochastic kernel with up to three targets per row.
pub fn kernel(src: &VarContext, dst: &VarContext, rng: &mut impl Rng, total: bool) -> Kernel {
    let n = dst.state_count();
    let rows = (0..src.state_count())
        .map(|_| {
            let k = rng.gen_range(1..=3.min(n));
            let targets: Vec<usize> = (0..n).collect::<Vec<_>>().choose_multiple(rng, k).copied().collect();
            let weights: Vec<i64> = (0..k).map(|_| rng.gen_range(1..=4)).collect();
            let mut denom: i64 = weights.iter().sum();
            if !total {
                denom += rng.gen_range(0..=2);
            }
            targets
                .into_iter()
                .zip(weights)
                .map(|(j, w)| (j, BigRational::new(w.into(), denom.into())))
                .collect()
        })
        .collect();
    Kernel::new(src.clone(), dst.clone(), rows).unwrap()
}

pub fn prior(ctx: &VarContext, rng: &mut impl Rng) -> SubDist {
    kuifje::random::random_prior(ctx, rng)
}

pub fn same(a: &LossFunction, b: &LossFunction) -> bool {
    a.equals(b).unwrap()
}
