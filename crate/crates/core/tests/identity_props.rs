mod common;

use common::{rng, system_and_set};
use kcl_core::action::random_subset;
use kcl_core::rational::{int, ratio, Rational};
use kcl_core::returns::*;
use num_traits::Zero;
use proptest::prelude::*;
use rand::Rng;

fn random_params(seed: u64, n: usize, e: kcl_core::PointSet) -> IdentityParams {
    let mut r = rng(seed);
    let mut e2 = random_subset(&mut r, n, 0.3);
    if e2.is_empty() {
        e2.insert(r.gen_range(0..n));
    }
    let f: Vec<Rational> = (0..n).map(|_| ratio(r.gen_range(0..6), r.gen_range(1..4))).collect();
    let s: Vec<Rational> = (0..=n).map(|_| ratio(r.gen_range(0..6), 2)).collect();
    let m = r.gen_range(1..=3);
    let gaps: Vec<u64> = (0..m).map(|_| r.gen_range(1..=8)).collect();
    let back: Vec<u64> = (0..r.gen_range(1..=3)).map(|_| r.gen_range(1..=8)).collect();
    IdentityParams::new(e)
        .with_e2(e2)
        .with_f(f)
        .with_s(s)
        .with_gaps(gaps)
        .with_back_gaps(back)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn catalog_holds(seed in any::<u64>()) {
        let (sys, e) = system_and_set(seed, 1, 24);
        let mut params = random_params(seed ^ 11, sys.len(), e);
        for id in Identity::ALL {
            if id == Identity::KacDec {
                params.gaps.truncate(1);
                params.back_gaps.truncate(1);
            }
            let rep = evaluate_identity(&sys, &params, id).unwrap();
            prop_assert!(rep.passed(), "{} {} {:?}", id, rep.params, rep.checks);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn kacdist_telescopes_to_kac(seed in any::<u64>()) {
        let (sys, e) = system_and_set(seed, 1, 24);
        let params = IdentityParams::new(e.clone());
        let dist = evaluate_identity(&sys, &params, Identity::KacDist).unwrap();
        let total = dist.checks.iter().fold(Rational::zero(), |acc, c| acc + &c.sides[0].value);
        let kac = evaluate_identity(&sys, &params, Identity::Kac).unwrap();
        prop_assert_eq!(&total, &kac.checks[0].sides[0].value);
        prop_assert_eq!(&total, &sys.measure(&sys.saturation(&e)));
    }

    #[test]
    fn joint_a_reversal_tables(seed in any::<u64>(), m in 1usize..=3) {
        let (sys, e) = system_and_set(seed, 1, 24);
        let fwd = return_sequence_distribution(&sys, &e, m, Direction::Forward).unwrap();
        let inv = return_sequence_distribution(&sys, &e, m, Direction::Inverse).unwrap();
        let reversed: std::collections::BTreeMap<Vec<u64>, Rational> = inv
            .into_iter()
            .map(|(mut k, v)| { k.reverse(); (k, v) })
            .collect();
        prop_assert_eq!(fwd, reversed);
    }

    #[test]
    fn joint_c_depends_on_sum_only(seed in any::<u64>(), a in 1u64..=4, b in 1u64..=4) {
        let (sys, e) = system_and_set(seed, 1, 24);
        let total = a + b;
        let eval = |r1: u64| {
            let p = IdentityParams::new(e.clone()).with_gaps(vec![r1, 2]).with_back_gaps(vec![total - r1]);
            evaluate_identity(&sys, &p, Identity::JointC).unwrap().checks[0].sides[0].value.clone()
        };
        let base = eval(a);
        for r1 in 1..total {
            prop_assert_eq!(&eval(r1), &base);
        }
    }

    #[test]
    fn zd_systems_use_time_axis(seed in any::<u64>()) {
        let (sys, e) = system_and_set(seed, 2, 24);
        let rep = evaluate_identity(&sys, &IdentityParams::new(e.clone()), Identity::Kac).unwrap();
        prop_assert!(rep.passed());
        let sub = sys.axis_subsystem(0);
        prop_assert_eq!(&rep.checks[0].sides[1].value, &sub.measure(&sub.saturation(&e)));
    }
}

#[test]
fn induced_map_on_nonuniform_two_orbit_system() {
    let sys = kcl_core::FiniteSystem::new_unchecked(
        vec![vec![1, 2, 0, 4, 3]],
        vec![ratio(1, 4), ratio(1, 4), ratio(1, 4), ratio(1, 8), ratio(1, 8)],
    );
    let e = kcl_core::PointSet::from_indices(5, &[0, 2, 4]);
    let map = induced_transform(&sys, &e).unwrap();
    assert!(map.is_bijection());
    assert!(map.preserves_conditional_measure(&sys));
    let rep = evaluate_identity(&sys, &IdentityParams::new(e), Identity::InducedMp).unwrap();
    assert!(rep.passed());
    assert_eq!(rep.checks[0].sides[0].value, ratio(1, 4) * int(1) + ratio(1, 4) * int(3) + ratio(1, 8) * int(5));
}
