#![allow(dead_code)]

use kcl_core::action::{random_subset, random_system, FiniteSystem, PointSet};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Random system plus a random nonempty subset.
pub fn system_and_set(seed: u64, d: usize, max_points: usize) -> (FiniteSystem, PointSet) {
    let mut r = rng(seed);
    let sys = random_system(&mut r, d, max_points);
    let p = r.gen_range(0.1..0.6);
    let mut e = random_subset(&mut r, sys.len(), p);
    if e.is_empty() {
        e.insert(r.gen_range(0..sys.len()));
    }
    (sys, e)
}
