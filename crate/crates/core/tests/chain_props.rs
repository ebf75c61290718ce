mod common;

use common::{rng, system_and_set};
use kcl_core::action::{box_points, random_system, FiniteSystem, GroupElement, PointSet};
use kcl_core::chain::*;
use kcl_core::rational::{int, ratio, Rational};
use num_traits::Zero;
use proptest::prelude::*;
use rand::Rng;

/// Enumerates the simplices of the chain of `ω` anchored at every `x` with
/// `‖x‖∞ <= B` and sums those whose vertex `i` sits at the identity.
fn brute_coefficient(k: &ChainKernel, sys: &FiniteSystem, omega: usize, i: usize) -> Rational {
    let b = k.offset_bound() as i64;
    let d = sys.dim();
    let mut total = Rational::zero();
    for x in box_points(&vec![-b; d], &vec![b; d]) {
        let anchor = sys.act(&x, omega);
        for e in k.entries(anchor) {
            let vertex = if i == 0 { x.clone() } else { &x + &e.offsets[i - 1] };
            if vertex.is_zero() {
                total += &e.weight;
            }
        }
    }
    total
}

fn random_kernel(seed: u64, sys: &FiniteSystem, m: usize, bound: i64) -> ChainKernel {
    let mut r = rng(seed);
    let d = sys.dim();
    let entries = (0..sys.len())
        .map(|_| {
            (0..r.gen_range(0..3))
                .map(|_| KernelEntry {
                    offsets: (0..m)
                        .map(|_| GroupElement((0..d).map(|_| r.gen_range(-bound..=bound)).collect()))
                        .collect(),
                    weight: ratio(r.gen_range(0..4), r.gen_range(1..4)),
                })
                .collect()
        })
        .collect();
    ChainKernel::new(m, d, entries).unwrap()
}

#[test]
fn kac_coefficient_matches_enumeration() {
    let z5 = FiniteSystem::rotation(5);
    let k = kac_kernel(&z5, &PointSet::from_indices(5, &[0])).unwrap();
    assert_eq!(brute_coefficient(&k, &z5, 0, 1), int(5));
    assert_eq!(vertex_coefficient(&k, &z5, 0, 1), int(5));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn coefficient_three_ways(seed in any::<u64>(), d in 1usize..=2, m in 1usize..=3) {
        let mut r = rng(seed);
        let sys = random_system(&mut r, d, 12);
        let bound = if d == 1 { 12 } else { 3 };
        let k = random_kernel(seed ^ 0x5eed, &sys, m, bound);
        for i in 0..=m {
            let table = vertex_coefficients(&k, &sys, i);
            for omega in 0..sys.len() {
                let literal = vertex_coefficient(&k, &sys, omega, i);
                prop_assert_eq!(&literal, &brute_coefficient(&k, &sys, omega, i));
                prop_assert_eq!(&literal, &table[omega]);
            }
        }
    }

    #[test]
    fn random_kernels_satisfy_ve(seed in any::<u64>(), d in 1usize..=2, m in 1usize..=3) {
        let mut r = rng(seed);
        let sys = random_system(&mut r, d, 24);
        let k = random_kernel(seed.wrapping_add(1), &sys, m, 5);
        prop_assert!(verify_ve(&k, &sys).equal);
    }

    #[test]
    fn expectation_is_linear(seed in any::<u64>()) {
        let mut r = rng(seed);
        let sys = random_system(&mut r, 2, 16);
        let a = random_kernel(seed ^ 1, &sys, 2, 4);
        let b = random_kernel(seed ^ 2, &sys, 2, 4);
        let (ca, cb) = (ratio(r.gen_range(0..5), 3), ratio(r.gen_range(0..5), 7));
        let combo = a.scaled(&ca).plus(&b.scaled(&cb));
        for i in 0..=2 {
            let lhs = vertex_expectation(&combo, &sys, i);
            let rhs = &ca * vertex_expectation(&a, &sys, i) + &cb * vertex_expectation(&b, &sys, i);
            prop_assert_eq!(lhs, rhs);
        }
    }

    #[test]
    fn constructed_kernels_satisfy_ve(seed in any::<u64>(), d in 1usize..=2) {
        let (sys, e) = system_and_set(seed, d, 24);
        let mut r = rng(seed ^ 7);
        let e2 = {
            let mut s = kcl_core::action::random_subset(&mut r, sys.len(), 0.3);
            if s.is_empty() { s.insert(0); }
            s
        };
        let f: Vec<Rational> = (0..sys.len()).map(|_| int(r.gen_range(0..5))).collect();
        let s: Vec<Rational> = (0..=24).map(|_| ratio(r.gen_range(0..5), 2)).collect();
        let mut kernels = vec![
            kac_kernel_with(&sys, &e, Coverage::Saturation).unwrap(),
            weighted_kac_kernel_with(&sys, &e, &f, &s, WeightAnchor::Source, Coverage::Saturation).unwrap(),
            weighted_kac_kernel_with(&sys, &e, &f, &s, WeightAnchor::Target, Coverage::Saturation).unwrap(),
            two_sets_kernel_with(&sys, &e, &e2, Coverage::Saturation).unwrap(),
            induced_kernel(&sys, &e, &f),
        ];
        let zs: Vec<GroupElement> = if d == 1 {
            (0..4).map(|n| GroupElement(vec![n])).collect()
        } else {
            vec![GroupElement(vec![1, 0]), GroupElement(vec![1, 2]), GroupElement(vec![0, 0])]
        };
        for z in &zs {
            for v in [WindowVariant::FPrime, WindowVariant::FDouble, WindowVariant::FTriple] {
                kernels.push(window_kernel(&sys, &e, z, v));
            }
        }
        for spec in [
            JointSpec::all_in_e(vec![r.gen_range(1..5), r.gen_range(1..5)]),
            JointSpec::first_outside(vec![r.gen_range(1..5)]),
            JointSpec::straddle(&[r.gen_range(1..4)], &[r.gen_range(1..4), 2]),
        ] {
            kernels.push(joint_kernel(&sys, &e, &spec).unwrap());
        }
        for k in &kernels {
            let rep = verify_ve(k, &sys);
            prop_assert!(rep.equal, "{:?}", rep.expectations);
        }
    }
}
