//! Random Kac function on the product of a finite Z^d-system with the dyadic
//! odometer, truncated at depth `D`.
//!
//! The parameter `α ∈ (Z/2^D)^d` fixes a hierarchy of dyadic cubes: the level-`n`
//! cube of `x` is indexed by `⌊(x + α) / 2^n⌋`. Every `x` sends one edge to the
//! lexicographically first visit of `E` in the smallest cube of the hierarchy
//! containing `x` that meets the visit set `O_ω E`. `S(ω, α)` collects the
//! sources of edges into `0`, and `φ` is the L∞ radius of `S`.

use crate::action::{box_points, FiniteSystem, GroupElement, PointSet};
use crate::rational::{self, Rational};
use num_traits::Zero;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum OdometerError {
    #[error("depth {depth} insufficient: a level-{depth} cube misses the visits of E from point {point}")]
    DepthInsufficient { depth: u32, point: usize },
    #[error("invalid odometer input: {0}")]
    Invalid(String),
}

/// `α mod 2^D` for each coordinate.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct DyadicParameter {
    pub depth: u32,
    pub digits: Vec<u64>,
}

impl DyadicParameter {
    pub fn new(depth: u32, digits: Vec<u64>) -> Result<Self, OdometerError> {
        if depth == 0 || depth > 16 {
            return Err(OdometerError::Invalid(format!("depth {depth} outside 1..=16")));
        }
        if digits.is_empty() || digits.iter().any(|&a| a >> depth != 0) {
            return Err(OdometerError::Invalid("α coordinate outside [0, 2^D)".into()));
        }
        Ok(DyadicParameter { depth, digits })
    }

    pub fn zero(depth: u32, d: usize) -> Self {
        DyadicParameter { depth, digits: vec![0; d] }
    }

    pub fn dim(&self) -> usize {
        self.digits.len()
    }

    pub fn side(&self) -> i64 {
        1i64 << self.depth
    }

    /// `α + x` reduced mod `2^D`.
    pub fn shifted(&self, x: &GroupElement) -> Self {
        let side = self.side();
        DyadicParameter {
            depth: self.depth,
            digits: self
                .digits
                .iter()
                .zip(x.coords())
                .map(|(&a, &c)| (a as i64 + c).rem_euclid(side) as u64)
                .collect(),
        }
    }

    /// Index among the `2^(Dd)` parameters, coordinate 0 most significant.
    pub fn index(&self) -> usize {
        self.digits
            .iter()
            .fold(0usize, |acc, &a| (acc << self.depth) | a as usize)
    }

    pub fn from_index(depth: u32, d: usize, mut idx: usize) -> Self {
        let mask = (1usize << depth) - 1;
        let mut digits = vec![0u64; d];
        for slot in digits.iter_mut().rev() {
            *slot = (idx & mask) as u64;
            idx >>= depth;
        }
        DyadicParameter { depth, digits }
    }
}

/// Lower corner and level of a cube of the hierarchy.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Cube {
    pub level: u32,
    pub corner: GroupElement,
}

impl Cube {
    pub fn side(&self) -> i64 {
        1i64 << self.level
    }

    pub fn contains(&self, x: &GroupElement) -> bool {
        x.coords()
            .iter()
            .zip(self.corner.coords())
            .all(|(&c, &k)| c >= k && c < k + self.side())
    }

    /// Points in lexicographic order, coordinate 0 most significant.
    pub fn points(&self) -> impl Iterator<Item = GroupElement> {
        let hi: Vec<i64> = self.corner.coords().iter().map(|k| k + self.side() - 1).collect();
        box_points(self.corner.coords(), &hi)
    }
}

/// The level-`n` cube containing `x`.
pub fn cube_of(x: &GroupElement, alpha: &DyadicParameter, level: u32) -> Cube {
    assert!(level >= 1 && level <= alpha.depth, "level outside 1..=D");
    let side = 1i64 << level;
    let corner = x
        .coords()
        .iter()
        .zip(&alpha.digits)
        .map(|(&c, &a)| (c + a as i64).div_euclid(side) * side - a as i64)
        .collect();
    Cube { level, corner: GroupElement(corner) }
}

fn check_inputs(system: &FiniteSystem, e: &PointSet, alpha: &DyadicParameter) -> Result<(), OdometerError> {
    if alpha.dim() != system.dim() {
        return Err(OdometerError::Invalid("α dimension differs from the system".into()));
    }
    if e.universe() != system.len() {
        return Err(OdometerError::Invalid("E has the wrong universe".into()));
    }
    Ok(())
}

/// Target of the edge leaving `x`, by direct scan of the cubes around `x`.
pub fn aw_target(
    system: &FiniteSystem,
    e: &PointSet,
    omega: usize,
    alpha: &DyadicParameter,
    x: &GroupElement,
) -> Result<GroupElement, OdometerError> {
    check_inputs(system, e, alpha)?;
    for level in 1..=alpha.depth {
        let cube = cube_of(x, alpha, level);
        if let Some(z) = cube.points().find(|z| e.contains(system.act(z, omega))) {
            return Ok(z);
        }
    }
    Err(OdometerError::DepthInsufficient { depth: alpha.depth, point: omega })
}

/// `S(ω, α)` with its radius.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct AwSample {
    pub omega: usize,
    pub alpha: DyadicParameter,
    pub sources: Vec<GroupElement>,
    pub phi: u64,
}

impl AwSample {
    pub fn card(&self) -> usize {
        self.sources.len()
    }

    /// L∞ diameter of `S ∪ {0}`.
    pub fn diameter(&self) -> u64 {
        let d = self.alpha.dim();
        (0..d)
            .map(|i| {
                let it = self.sources.iter().map(|z| z.coords()[i]).chain(std::iter::once(0));
                let (lo, hi) = it.fold((0i64, 0i64), |(lo, hi), c| (lo.min(c), hi.max(c)));
                (hi - lo) as u64
            })
            .max()
            .unwrap_or(0)
    }

    /// `card(S) >= 2^{-d} (diam + 1)^d`, vacuous for empty `S`.
    pub fn is_thick(&self) -> bool {
        if self.sources.is_empty() {
            return true;
        }
        let d = self.alpha.dim() as u32;
        (self.card() as u128) << d >= ((self.diameter() + 1) as u128).pow(d)
    }
}

/// Whole-window evaluation for one `(ω, α)`.
///
/// The window is the level-`D` cube containing 0; local coordinates are
/// `u = x + α ∈ [0, 2^D)^d`, so every cube of the hierarchy inside it is an
/// aligned block and lexicographic order is row-major index order.
struct Window {
    d: usize,
    depth: u32,
    side: usize,
    hit: Vec<bool>,
    /// `first[n][block]`: least hit index in the level-`n` block, `n = 0..=D`.
    first: Vec<Vec<usize>>,
}

const NONE: usize = usize::MAX;

impl Window {
    fn new(d: usize, depth: u32) -> Self {
        let side = 1usize << depth;
        let cells = side.pow(d as u32);
        let first = (0..=depth)
            .map(|n| vec![NONE; (side >> n).pow(d as u32)])
            .collect();
        Window { d, depth, side, hit: vec![false; cells], first }
    }

    fn coords(&self, idx: usize) -> Vec<usize> {
        let mut c = vec![0; self.d];
        let mut r = idx;
        for slot in c.iter_mut().rev() {
            *slot = r % self.side;
            r /= self.side;
        }
        c
    }

    fn block(&self, coords: &[usize], level: u32) -> usize {
        let per = self.side >> level;
        coords.iter().fold(0, |acc, &c| acc * per + (c >> level))
    }

    fn fill(&mut self, system: &FiniteSystem, e: &PointSet, omega: usize, alpha: &DyadicParameter) {
        for idx in 0..self.hit.len() {
            let u = self.coords(idx);
            let x = GroupElement(
                u.iter().zip(&alpha.digits).map(|(&c, &a)| c as i64 - a as i64).collect(),
            );
            self.hit[idx] = e.contains(system.act(&x, omega));
        }
        for level in 0..=self.depth {
            self.first[level as usize].iter_mut().for_each(|v| *v = NONE);
        }
        for idx in 0..self.hit.len() {
            if !self.hit[idx] {
                continue;
            }
            let u = self.coords(idx);
            for level in 0..=self.depth {
                let b = self.block(&u, level);
                let slot = &mut self.first[level as usize][b];
                if *slot == NONE {
                    *slot = idx;
                }
            }
        }
    }

    fn target(&self, idx: usize) -> usize {
        let u = self.coords(idx);
        for level in 1..=self.depth {
            let t = self.first[level as usize][self.block(&u, level)];
            if t != NONE {
                return t;
            }
        }
        NONE
    }
}

fn window_sample(
    w: &mut Window,
    system: &FiniteSystem,
    e: &PointSet,
    omega: usize,
    alpha: &DyadicParameter,
) -> Result<AwSample, OdometerError> {
    w.fill(system, e, omega, alpha);
    if w.first[w.depth as usize][0] == NONE {
        return Err(OdometerError::DepthInsufficient { depth: alpha.depth, point: omega });
    }
    let origin = alpha
        .digits
        .iter()
        .fold(0usize, |acc, &a| acc * w.side + a as usize);
    let mut sources = Vec::new();
    if w.hit[origin] {
        for idx in 0..w.hit.len() {
            if w.target(idx) == origin {
                let u = w.coords(idx);
                sources.push(GroupElement(
                    u.iter().zip(&alpha.digits).map(|(&c, &a)| c as i64 - a as i64).collect(),
                ));
            }
        }
    }
    let phi = sources.iter().map(|z| z.norm_inf()).max().unwrap_or(0);
    Ok(AwSample { omega, alpha: alpha.clone(), sources, phi })
}

/// `S(ω, α)` and `φ(ω, α)`.
pub fn aw_sample(
    system: &FiniteSystem,
    e: &PointSet,
    omega: usize,
    alpha: &DyadicParameter,
) -> Result<AwSample, OdometerError> {
    check_inputs(system, e, alpha)?;
    let mut w = Window::new(system.dim(), alpha.depth);
    window_sample(&mut w, system, e, omega, alpha)
}

/// Per-point tallies over all `α`.
#[derive(Clone, Debug, Default)]
struct Tally {
    card: u64,
    phi_pow: u128,
    thickness_violations: u64,
    max_phi: u64,
}

fn sweep(
    system: &FiniteSystem,
    e: &PointSet,
    depth: u32,
) -> Result<Vec<(Tally, Vec<AwSample>)>, OdometerError> {
    let d = system.dim();
    let alphas = 1usize << (depth as usize * d);
    (0..system.len())
        .into_par_iter()
        .map(|omega| {
            let mut w = Window::new(d, depth);
            let mut t = Tally::default();
            let mut samples = Vec::with_capacity(alphas);
            for ai in 0..alphas {
                let alpha = DyadicParameter::from_index(depth, d, ai);
                let s = window_sample(&mut w, system, e, omega, &alpha)?;
                t.card += s.card() as u64;
                t.phi_pow += (s.phi as u128).pow(d as u32);
                t.max_phi = t.max_phi.max(s.phi);
                if !s.is_thick() {
                    t.thickness_violations += 1;
                }
                samples.push(s);
            }
            Ok((t, samples))
        })
        .collect()
}

fn check_depth(system: &FiniteSystem, depth: u32) -> Result<(), OdometerError> {
    if depth == 0 || depth > 8 {
        return Err(OdometerError::Invalid(format!("depth {depth} outside 1..=8")));
    }
    if system.dim() > 3 {
        return Err(OdometerError::Invalid("dimension above 3".into()));
    }
    Ok(())
}

fn weighted_mean(system: &FiniteSystem, per_point: impl Iterator<Item = Rational>, alphas: usize) -> Rational {
    let total = per_point
        .enumerate()
        .fold(Rational::zero(), |acc, (p, v)| acc + system.weight(p) * v);
    total / rational::int(alphas as i64)
}

/// Exact `E[card S]` over `μ × uniform(α)`.
pub fn aw_expect_card_s(system: &FiniteSystem, e: &PointSet, depth: u32) -> Result<Rational, OdometerError> {
    check_depth(system, depth)?;
    check_inputs(system, e, &DyadicParameter::zero(depth, system.dim()))?;
    let tallies = sweep(system, e, depth)?;
    let alphas = 1usize << (depth as usize * system.dim());
    Ok(weighted_mean(
        system,
        tallies.iter().map(|(t, _)| rational::int(t.card as i64)),
        alphas,
    ))
}

/// Exhaustive verification of the Kac-function conditions at one depth.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct AwReport {
    pub depth: u32,
    pub configurations: u64,
    #[serde(with = "rational::pq")]
    pub expect_card_s: Rational,
    #[serde(with = "rational::pq")]
    pub expect_phi_pow_d: Rational,
    #[serde(with = "rational::pq")]
    pub moment_bound: Rational,
    pub coverage_failures: u64,
    pub thickness_violations: u64,
    pub max_phi: u64,
}

impl AwReport {
    pub fn card_is_one(&self) -> bool {
        self.expect_card_s == rational::int(1)
    }

    pub fn coverage_holds(&self) -> bool {
        self.coverage_failures == 0
    }

    pub fn thickness_holds(&self) -> bool {
        self.thickness_violations == 0
    }

    pub fn moment_holds(&self) -> bool {
        self.expect_phi_pow_d <= self.moment_bound
    }

    pub fn passed(&self) -> bool {
        self.card_is_one() && self.coverage_holds() && self.thickness_holds() && self.moment_holds()
    }
}

/// Covering check for `(ω', α')`: with `t` the target of 0, the point
/// `x = -t` must lie in `S(T^{t} ω', α' - x)` and satisfy `1 <= ‖x‖ ∨ 1 <= φ`.
fn covered(
    system: &FiniteSystem,
    e: &PointSet,
    omega: usize,
    alpha: &DyadicParameter,
    table: &[(Tally, Vec<AwSample>)],
) -> Result<bool, OdometerError> {
    let t = aw_target(system, e, omega, alpha, &GroupElement::zero(system.dim()))?;
    let x = -&t;
    let base = system.act(&t, omega);
    let shifted = alpha.shifted(&t);
    let sample = &table[base].1[shifted.index()];
    let n = sample.phi;
    Ok(n >= 1 && sample.sources.contains(&x) && x.norm_inf() <= n)
}

/// `E[card S] = 1`, covering, thickness and `E[φ^d] <= 2^d E[card S]`.
pub fn aw_kac_conditions(system: &FiniteSystem, e: &PointSet, depth: u32) -> Result<AwReport, OdometerError> {
    check_depth(system, depth)?;
    check_inputs(system, e, &DyadicParameter::zero(depth, system.dim()))?;
    let d = system.dim();
    let alphas = 1usize << (depth as usize * d);
    let table = sweep(system, e, depth)?;
    let expect_card_s = weighted_mean(
        system,
        table.iter().map(|(t, _)| rational::int(t.card as i64)),
        alphas,
    );
    let expect_phi_pow_d = weighted_mean(
        system,
        table.iter().map(|(t, _)| Rational::from_integer(t.phi_pow.into())),
        alphas,
    );
    let moment_bound = rational::int(1 << d) * &expect_card_s;
    let coverage_failures: u64 = (0..system.len())
        .into_par_iter()
        .map(|omega| -> Result<u64, OdometerError> {
            let mut fails = 0;
            for ai in 0..alphas {
                let alpha = DyadicParameter::from_index(depth, d, ai);
                if !covered(system, e, omega, &alpha, &table)? {
                    fails += 1;
                }
            }
            Ok(fails)
        })
        .collect::<Result<Vec<_>, _>>()?
        .into_iter()
        .sum();
    Ok(AwReport {
        depth,
        configurations: (system.len() * alphas) as u64,
        expect_card_s,
        expect_phi_pow_d,
        moment_bound,
        coverage_failures,
        thickness_violations: table.iter().map(|(t, _)| t.thickness_violations).sum(),
        max_phi: table.iter().map(|(t, _)| t.max_phi).max().unwrap_or(0),
    })
}

/// Draws `(ω, α)` from `μ × uniform`.
pub fn random_configuration<R: Rng>(rng: &mut R, system: &FiniteSystem, depth: u32) -> (usize, DyadicParameter) {
    let u: f64 = rng.gen();
    let mut acc = 0.0;
    let mut omega = system.len() - 1;
    for p in 0..system.len() {
        acc += rational::to_f64(system.weight(p));
        if u < acc {
            omega = p;
            break;
        }
    }
    let digits = (0..system.dim()).map(|_| rng.gen_range(0..1u64 << depth)).collect();
    (omega, DyadicParameter { depth, digits })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::action::torus_index;
    use crate::rational::int;

    fn g(v: &[i64]) -> GroupElement {
        GroupElement(v.to_vec())
    }

    #[test]
    fn cubes() {
        let a0 = DyadicParameter::zero(3, 1);
        assert_eq!(cube_of(&g(&[5]), &a0, 2), Cube { level: 2, corner: g(&[4]) });
        let a1 = DyadicParameter::new(3, vec![1]).unwrap();
        let c = cube_of(&g(&[0]), &a1, 1);
        assert_eq!(c.points().collect::<Vec<_>>(), vec![g(&[-1]), g(&[0])]);
        let x = g(&[3]);
        let c1 = cube_of(&x, &a0, 2);
        let c2 = cube_of(&g(&[7]), &a0, 2);
        assert_ne!(c1, c2);
        assert_eq!(c2.corner, g(&[c1.corner.coords()[0] + 4]));
    }

    #[test]
    fn two_point_rotation_target() {
        let sys = FiniteSystem::rotation(2);
        let e = PointSet::from_indices(2, &[0]);
        let a = DyadicParameter::zero(1, 1);
        // From ω = 1 the cube {0, 1} has its only visit at 1.
        assert_eq!(aw_target(&sys, &e, 1, &a, &g(&[0])).unwrap(), g(&[1]));
        assert_eq!(aw_target(&sys, &e, 0, &a, &g(&[1])).unwrap(), g(&[0]));
    }

    #[test]
    fn full_set_targets_level_one() {
        let sys = FiniteSystem::torus(&[2, 2]);
        let e = PointSet::full(4);
        let a = DyadicParameter::new(2, vec![1, 2]).unwrap();
        for x in box_points(&[-3, -3], &[3, 3]) {
            let c = cube_of(&x, &a, 1);
            assert_eq!(aw_target(&sys, &e, 0, &a, &x).unwrap(), c.corner);
        }
        let rep = aw_kac_conditions(&sys, &e, 2).unwrap();
        assert!(rep.passed());
        assert_eq!(rep.max_phi, 1);
    }

    #[test]
    fn sample_matches_direct_targets() {
        let sys = FiniteSystem::torus(&[2, 2]);
        let e = PointSet::from_indices(4, &[torus_index(&[2, 2], &[0, 0])]);
        for ai in 0..16 {
            let a = DyadicParameter::from_index(2, 2, ai);
            for omega in 0..4 {
                let s = aw_sample(&sys, &e, omega, &a).unwrap();
                let window = cube_of(&GroupElement::zero(2), &a, 2);
                let brute: Vec<GroupElement> = window
                    .points()
                    .filter(|x| aw_target(&sys, &e, omega, &a, x).unwrap().is_zero())
                    .collect();
                assert_eq!(s.sources, brute);
            }
        }
    }

    #[test]
    fn small_torus_expectation() {
        let sys = FiniteSystem::torus(&[2, 2]);
        let e = PointSet::from_indices(4, &[0]);
        assert_eq!(aw_expect_card_s(&sys, &e, 2).unwrap(), int(1));
    }

    #[test]
    fn insufficient_depth() {
        let sys = FiniteSystem::rotation(4);
        let e = PointSet::from_indices(4, &[0]);
        assert!(matches!(
            aw_expect_card_s(&sys, &e, 1),
            Err(OdometerError::DepthInsufficient { .. })
        ));
    }

    #[test]
    fn missing_orbit_is_rejected() {
        let sys = FiniteSystem::new_unchecked(vec![vec![1, 0, 2]], vec![rational::ratio(1, 3); 3]);
        let e = PointSet::from_indices(3, &[0]);
        assert!(aw_kac_conditions(&sys, &e, 2).is_err());
    }

    #[test]
    fn parameter_index_roundtrip() {
        for i in 0..64 {
            assert_eq!(DyadicParameter::from_index(3, 2, i).index(), i);
        }
    }
}
