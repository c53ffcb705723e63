use std::collections::BTreeSet;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::FromPrimitive;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::exact::{eval_term, holds, ExactState};
use crate::semantics::{Region, SampleBox};
use crate::syntax::Formula;

pub const REFUTER_CANDIDATES: usize = 10_000;

/// Denominators tried when rounding a sampled coordinate; 0 keeps the exact float.
const ROUNDINGS: [i64; 4] = [1, 10, 1000, 0];

fn round(x: f64, denom: i64) -> Option<BigRational> {
    if denom == 0 {
        return BigRational::from_f64(x);
    }
    let n = (x * denom as f64).round();
    Some(BigRational::new(BigInt::from_f64(n)?, BigInt::from(denom)))
}

/// Searches for an exact rational state satisfying every hypothesis and falsifying
/// `goal`. Candidate 0 is the origin clamped into the hypothesis box.
pub fn find_counterexample(hyps: &[Formula], goal: &Formula, seed: u64) -> Option<ExactState> {
    let gamma = Formula::and(hyps.to_vec());
    let vars: BTreeSet<String> = goal.free_variables();
    let region = Region::new(&gamma, &vars, &SampleBox::default()).ok()?;
    let check = |env: &ExactState| holds(&gamma, env) == Some(true) && holds(goal, env) == Some(false);
    let build = |values: &[f64], denom: i64| -> Option<ExactState> {
        let mut env = ExactState::new();
        for ((v, ..), x) in region.independent.iter().zip(values) {
            env.insert(v.clone(), round(*x, denom)?);
        }
        for (v, t) in &region.definitions {
            let val = eval_term(t, &env)?;
            env.insert(v.clone(), val);
        }
        Some(env)
    };
    (0..REFUTER_CANDIDATES).into_par_iter().find_map_first(|i| {
        let values: Vec<f64> = if i == 0 {
            region.independent.iter().map(|(_, lo, hi)| 0f64.clamp(*lo, *hi)).collect()
        } else {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(i as u64);
            region.independent.iter().map(|(_, lo, hi)| if lo < hi { rng.gen_range(*lo..=*hi) } else { *lo }).collect()
        };
        ROUNDINGS.iter().filter_map(|&d| build(&values, d)).find(|env| check(env))
    })
}
