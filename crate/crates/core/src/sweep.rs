//! Seeded random instances shared by batch runs.

use crate::action::{random_subset, random_system, torus_index, FiniteSystem, GroupElement, PointSet};
use crate::chain::*;
use crate::rational::{ratio, Rational};
use crate::returns::{Identity, IdentityParams};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// A system with every parameter any kernel or identity may ask for.
#[derive(Clone, Debug)]
pub struct RandomInstance {
    pub seed: u64,
    pub system: FiniteSystem,
    pub e: PointSet,
    pub e2: PointSet,
    pub f: Vec<Rational>,
    pub s: Vec<Rational>,
    pub gaps: Vec<u64>,
    pub back_gaps: Vec<u64>,
}

fn nonempty_subset(r: &mut ChaCha8Rng, n: usize, p: f64) -> PointSet {
    let mut s = random_subset(r, n, p);
    if s.is_empty() {
        s.insert(r.gen_range(0..n));
    }
    s
}

/// Instance number `seed`: `d ∈ {1, 2}`, at most `max_points` points, gap
/// vectors of length at most 3 with entries at most 8.
pub fn random_instance(seed: u64, d: usize, max_points: usize) -> RandomInstance {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    let system = random_system(&mut r, d, max_points);
    let n = system.len();
    let p = r.gen_range(0.1..0.6);
    let e = nonempty_subset(&mut r, n, p);
    let e2 = nonempty_subset(&mut r, n, 0.3);
    let f = (0..n).map(|_| ratio(r.gen_range(0..6), r.gen_range(1..4))).collect();
    let s = random_s_table(&mut r, n);
    let m = r.gen_range(1..=3);
    let gaps = (0..m).map(|_| r.gen_range(1..=8)).collect();
    let back_gaps = (0..r.gen_range(1..=3)).map(|_| r.gen_range(1..=8)).collect();
    RandomInstance { seed, system, e, e2, f, s, gaps, back_gaps }
}

/// Weight table `s[0..=n]` with small nonnegative rational entries.
pub fn random_s_table<R: Rng>(r: &mut R, n: usize) -> Vec<Rational> {
    (0..=n).map(|_| ratio(r.gen_range(0..6), r.gen_range(1..4))).collect()
}

impl RandomInstance {
    /// Every kernel family on this instance, saturation-covered so that
    /// orbits missing `E` contribute nothing instead of failing.
    pub fn kernels(&self) -> Result<Vec<(String, ChainKernel)>, ChainError> {
        let sys = &self.system;
        let e = &self.e;
        let cov = Coverage::Saturation;
        let mut out = vec![
            ("kac".to_string(), kac_kernel_with(sys, e, cov)?),
            (
                "weighted-kac.source".to_string(),
                weighted_kac_kernel_with(sys, e, &self.f, &self.s, WeightAnchor::Source, cov)?,
            ),
            (
                "weighted-kac.target".to_string(),
                weighted_kac_kernel_with(sys, e, &self.f, &self.s, WeightAnchor::Target, cov)?,
            ),
            ("two-sets".to_string(), two_sets_kernel_with(sys, e, &self.e2, cov)?),
            ("induced".to_string(), induced_kernel(sys, e, &self.f)),
        ];
        let d = sys.dim();
        let zs: Vec<GroupElement> = if d == 1 {
            vec![GroupElement(vec![0]), GroupElement(vec![1]), GroupElement(vec![3])]
        } else {
            vec![GroupElement(vec![0, 0]), GroupElement(vec![1, 0]), GroupElement(vec![1, 2])]
        };
        for z in &zs {
            for (name, v) in [
                ("F'", WindowVariant::FPrime),
                ("F''", WindowVariant::FDouble),
                ("F'''", WindowVariant::FTriple),
            ] {
                out.push((format!("window.{name}.z={z}"), window_kernel(sys, e, z, v)));
            }
        }
        let fwd: Vec<u64> = self.gaps.clone();
        let specs = [
            ("joint.all-in-e", JointSpec::all_in_e(fwd.clone())),
            ("joint.first-outside", JointSpec::first_outside(fwd.clone())),
            ("joint.straddle", JointSpec::straddle(&fwd[..1], &self.back_gaps)),
        ];
        for (name, spec) in specs {
            out.push((name.to_string(), joint_kernel(sys, e, &spec)?));
        }
        Ok(out)
    }

    /// Parameters for one identity; the single-gap identities use the first
    /// entry of each gap vector.
    pub fn identity_params(&self, id: Identity) -> IdentityParams {
        let mut p = IdentityParams::new(self.e.clone())
            .with_e2(self.e2.clone())
            .with_f(self.f.clone())
            .with_s(self.s.clone())
            .with_gaps(self.gaps.clone())
            .with_back_gaps(self.back_gaps.clone());
        if id == Identity::KacDec {
            p.gaps.truncate(1);
            p.back_gaps.truncate(1);
        }
        p
    }

    /// `count` weight tables: the instance's own first, then fresh draws.
    pub fn s_tables(&self, count: usize) -> Vec<Vec<Rational>> {
        let n = self.system.len();
        let mut out = vec![self.s.clone()];
        for j in 1..count {
            let mut r = ChaCha8Rng::seed_from_u64(self.seed ^ (j as u64).rotate_left(32));
            out.push(random_s_table(&mut r, n));
        }
        out.truncate(count);
        out
    }
}

/// `(Z/a) x (Z/b)` with `2 <= a, b <= max_side` and a subset meeting every
/// row and every column, so all epochs and durations fit in the box
/// `[0, max(a, b)]^2`.
pub fn random_covering_torus(seed: u64, max_side: usize) -> (FiniteSystem, PointSet, usize) {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    let a = r.gen_range(2..=max_side);
    let b = r.gen_range(2..=max_side);
    let mut e = random_subset(&mut r, a * b, 0.2);
    for s in 0..a {
        if !(0..b).any(|t| e.contains(torus_index(&[a, b], &[s, t]))) {
            e.insert(torus_index(&[a, b], &[s, r.gen_range(0..b)]));
        }
    }
    for t in 0..b {
        if !(0..a).any(|s| e.contains(torus_index(&[a, b], &[s, t]))) {
            e.insert(torus_index(&[a, b], &[r.gen_range(0..a), t]));
        }
    }
    (FiniteSystem::torus(&[a, b]), e, a.max(b))
}
