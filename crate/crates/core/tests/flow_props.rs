mod common;

use common::rng;
use kcl_core::circle::*;
use kcl_core::mc::{self, sample_rng};
use kcl_core::rational::{ratio, to_f64, Rational};
use kcl_core::renewal::*;
use num_traits::{One, Signed};
use proptest::prelude::*;
use rand::Rng;

/// Arcs as `(start, end)` floats, end possibly above 1.
fn float_arcs(e: &ArcUnion) -> Vec<(f64, f64)> {
    e.arcs()
        .iter()
        .map(|a| (to_f64(&a.start), to_f64(&a.start) + to_f64(&a.length)))
        .collect()
}

fn in_arc(x: f64, (a, b): (f64, f64)) -> bool {
    (x - a).rem_euclid(1.0) <= b - a
}

/// Midpoint quadrature of the two Helmberg functionals, straight from the
/// set descriptions: trailing window after an exit, or leading window before.
fn helmberg_quadrature(e: &ArcUnion, s: f64, forward: bool, n: usize) -> f64 {
    let arcs = float_arcs(e);
    let mut total = 0.0;
    for i in 0..n {
        let w = (i as f64 + 0.5) / n as f64;
        let inside = arcs.iter().any(|&a| in_arc(w, a));
        let to_entry = |x: f64| {
            arcs.iter()
                .map(|&(a, _)| (a - x).rem_euclid(1.0))
                .fold(f64::INFINITY, f64::min)
        };
        if !forward {
            if inside {
                continue;
            }
            let since_exit = arcs
                .iter()
                .map(|&(_, b)| (w - b).rem_euclid(1.0))
                .fold(f64::INFINITY, f64::min);
            if since_exit <= s {
                total += to_entry(w);
            }
        } else if inside {
            let (_, b) = *arcs.iter().find(|&&a| in_arc(w, a)).unwrap();
            let to_exit = (b - w).rem_euclid(1.0);
            if to_exit <= s {
                total += to_exit + to_entry(b + 1e-15);
            }
        }
    }
    total / n as f64 / s
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(20))]

    #[test]
    fn enhanced_return_is_complement(seed in any::<u64>(), k in 1usize..=4) {
        let mut r = rng(seed);
        let den = r.gen_range(9..60);
        let e = random_arc_union(&mut r, k, den);
        prop_assert_eq!(circle_enhanced_return(&e), Rational::one() - e.measure());
    }

    #[test]
    fn helmberg_matches_quadrature(seed in any::<u64>(), k in 1usize..=3) {
        let mut r = rng(seed);
        let den = r.gen_range(9..40);
        let e = random_arc_union(&mut r, k, den);
        let min_gap = e.gaps().into_iter().min().unwrap();
        let s = min_gap * ratio(r.gen_range(1..10), 10);
        let exact = helmberg_functional(&e, &s).unwrap();
        let q = helmberg_quadrature(&e, to_f64(&s), false, 400_000);
        prop_assert!((to_f64(&exact) - q).abs() < 2e-3, "{} vs {}", to_f64(&exact), q);
        let min_len = e.arcs().iter().map(|a| a.length.clone()).min().unwrap();
        let s = min_len * ratio(r.gen_range(1..10), 10);
        let exact = helmberg_functional_forward(&e, &s).unwrap();
        let q = helmberg_quadrature(&e, to_f64(&s), true, 400_000);
        prop_assert!((to_f64(&exact) - q).abs() < 2e-3, "{} vs {}", to_f64(&exact), q);
    }

    #[test]
    fn helmberg_is_affine(seed in any::<u64>(), k in 1usize..=4) {
        let mut r = rng(seed);
        let den = r.gen_range(12..50);
        let e = random_arc_union(&mut r, k, den);
        let g = e.gaps().into_iter().min().unwrap();
        let (s1, s2, s3) = (&g * ratio(1, 7), &g * ratio(3, 7), &g * ratio(6, 7));
        let f = |s: &Rational| helmberg_functional(&e, s).unwrap();
        let slope = (f(&s2) - f(&s1)) / (&s2 - &s1);
        prop_assert_eq!(&slope, &ratio(-(k as i64), 2));
        prop_assert_eq!((f(&s3) - f(&s2)) / (&s3 - &s2), slope);
    }
}

#[test]
fn helmberg_quadrature_example() {
    let e = ArcUnion::parse("0:3/10").unwrap();
    let q = helmberg_quadrature(&e, 0.01, false, 2_000_000);
    assert!((q - 139.0 / 200.0).abs() < 1e-4, "{q}");
}

#[test]
fn dyadic_limit() {
    let e = ArcUnion::parse("0:1/10,1/2:7/10").unwrap();
    let seq = helmberg_dyadic_sequence(&e, 30);
    let (j, last) = seq.last().unwrap();
    assert_eq!(*j, 30);
    let target = Rational::one() - e.measure();
    assert!(to_f64(&(last - &target)).abs() <= 1e-9);
    assert!(seq.windows(2).all(|w| (&w[1].1 - &target).abs() < (&w[0].1 - &target).abs()));
}

#[test]
fn window_estimator_matches_closed_form() {
    let e = ArcUnion::parse("0:3/10").unwrap();
    let est = circle_window_mc(&e, &ratio(2, 1), 100_000, 11).unwrap();
    assert!(est.within(0.7, 3.0), "{est:?}");
}

#[test]
fn window_stderr_decreases_in_t() {
    let e = ArcUnion::parse("1/10:1/5,1/3:1/2,3/4:4/5").unwrap();
    let errs: Vec<f64> = ["1/2", "3/2", "9/2"]
        .iter()
        .map(|t| {
            let t = kcl_core::rational::parse_rational(t).unwrap();
            circle_window_mc(&e, &t, 20_000, 5).unwrap().stderr
        })
        .collect();
    assert!(errs[0] > errs[1] && errs[1] > errs[2], "{errs:?}");
}

#[test]
fn flow_crossing_cases() {
    let s2 = 2f64.sqrt();
    let cases = [
        (1.0, s2, (0.0, 0.0), (0.5, 0.0)),
        (1.0, 2.0, (0.1, 0.1), (0.35, 0.6)),
        (0.0, 1.0, (0.0, 0.0), (0.0, 1.0)),
        (0.0, 1.0, (0.0, 0.0), (1.0, 0.0)),
        (3f64.sqrt(), 0.4, (1.0 / 3.0, 0.2), (2.0 / 3.0, 0.8)),
    ];
    for (i, (a, b, p0, p1)) in cases.into_iter().enumerate() {
        let est = torus_flow_crossings(a, b, p0, p1, 1.5, 100_000, 40 + i as u64).unwrap();
        let target = flow_crossing_rate(a, b, (p1.0 - p0.0, p1.1 - p0.1));
        assert!(est.within(target, 3.0), "case {i}: {est:?} vs {target}");
    }
}

#[test]
fn stationary_straddle_is_length_biased() {
    let d = RenewalDistribution::exponential(1.0).unwrap();
    let est = mc::run(50_000, 8, |r| sample_path(&d, Origin::Stationary, 1.0, r).straddle());
    assert!(est.within(2.0, 3.0), "{est:?}");
    let u = RenewalDistribution::uniform(0.0, 2.0).unwrap();
    let est = mc::run(50_000, 9, |r| sample_path(&u, Origin::Stationary, 1.0, r).straddle());
    assert!(est.within(4.0 / 3.0, 3.0), "{est:?}");
}

#[test]
fn rnwl_t_identity() {
    let exp = RenewalDistribution::exponential(1.0).unwrap();
    let coin = RenewalDistribution::lattice(vec![1, 2], vec![ratio(1, 2), ratio(1, 2)]).unwrap();
    for (d, a, seed) in [(&exp, 10.3, 1), (&exp, 100.7, 2), (&coin, 7.0, 3)] {
        let est = check_rnwl_t(d, a, 100_000, seed).unwrap();
        assert!(est.within(1.0, 3.0), "a={a}: {est:?}");
    }
}

#[test]
fn rnwl_k_means() {
    let cases = [
        (RenewalDistribution::exponential(1.0).unwrap(), 1.0),
        (RenewalDistribution::lattice(vec![1, 2], vec![ratio(1, 2), ratio(1, 2)]).unwrap(), 1.5),
        (RenewalDistribution::uniform(0.0, 2.0).unwrap(), 1.0),
    ];
    for (i, (d, m)) in cases.iter().enumerate() {
        assert!(check_rnwl_k(d, 100_000, i as u64).unwrap().within(*m, 3.0));
    }
}

#[test]
fn discrete_renewal_agrees_with_convolution() {
    let coin = RenewalDistribution::lattice(vec![1, 2], vec![ratio(1, 2), ratio(1, 2)]).unwrap();
    let exact = renewal_mass_exact(&coin, 60).unwrap();
    let mc = renewal_mass_mc(&coin, 60, 100_000, 17).unwrap();
    for n in 0..=60 {
        assert!(mc[n].within(to_f64(&exact[n]), 3.0), "n={n}: {:?} vs {}", mc[n], exact[n]);
    }
    let (est, target) = renewal_limit(&coin, 50.0, 1.0, 100_000, 18).unwrap();
    assert!((target - 2.0 / 3.0).abs() < 1e-12);
    assert!(est.within(to_f64(&exact[50]), 3.0));
}

#[test]
fn exponential_renewal_limit() {
    let exp = RenewalDistribution::exponential(1.0).unwrap();
    let (est, target) = renewal_limit(&exp, 100.7, 1.0, 100_000, 21).unwrap();
    assert!(est.within(target, 3.0), "{est:?}");
}

#[test]
fn streams_are_reproducible() {
    let a: f64 = sample_rng(5, 9).gen();
    let b: f64 = sample_rng(5, 9).gen();
    let c: f64 = sample_rng(5, 10).gen();
    assert_eq!(a, b);
    assert_ne!(a, c);
}
