//! Finite measure-preserving Z^d-systems.
//!
//! Points are dense indices `0..N`. Each of the `d` generators is stored as a
//! permutation array, and its cycle decomposition is cached so that `act` costs
//! O(d) regardless of the magnitude of the group element.

use crate::rational::{self, Rational};
use num_integer::Integer;
use num_traits::{One, Signed, Zero};
use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};
use std::collections::VecDeque;
use std::fmt;
use std::ops::{Add, Neg, Sub};

/// Element of Z^d.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct GroupElement(pub Vec<i64>);

impl GroupElement {
    pub fn zero(d: usize) -> Self {
        GroupElement(vec![0; d])
    }

    /// `k` times the unit vector along `axis`.
    pub fn axis(d: usize, axis: usize, k: i64) -> Self {
        let mut v = vec![0; d];
        v[axis] = k;
        GroupElement(v)
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn coords(&self) -> &[i64] {
        &self.0
    }

    pub fn is_zero(&self) -> bool {
        self.0.iter().all(|&c| c == 0)
    }

    /// L-infinity norm.
    pub fn norm_inf(&self) -> u64 {
        self.0.iter().map(|c| c.unsigned_abs()).max().unwrap_or(0)
    }

    /// Componentwise `self <= other`.
    pub fn le(&self, other: &Self) -> bool {
        self.0.iter().zip(&other.0).all(|(a, b)| a <= b)
    }
}

impl Add for &GroupElement {
    type Output = GroupElement;
    fn add(self, rhs: &GroupElement) -> GroupElement {
        assert_eq!(self.dim(), rhs.dim(), "dimension mismatch");
        GroupElement(self.0.iter().zip(&rhs.0).map(|(a, b)| a + b).collect())
    }
}

impl Sub for &GroupElement {
    type Output = GroupElement;
    fn sub(self, rhs: &GroupElement) -> GroupElement {
        assert_eq!(self.dim(), rhs.dim(), "dimension mismatch");
        GroupElement(self.0.iter().zip(&rhs.0).map(|(a, b)| a - b).collect())
    }
}

impl Neg for &GroupElement {
    type Output = GroupElement;
    fn neg(self) -> GroupElement {
        GroupElement(self.0.iter().map(|a| -a).collect())
    }
}

impl fmt::Display for GroupElement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        for (i, c) in self.0.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{c}")?;
        }
        write!(f, ")")
    }
}

/// Subset of the point set of a system.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct PointSet {
    members: Vec<bool>,
}

impl PointSet {
    pub fn empty(n: usize) -> Self {
        PointSet { members: vec![false; n] }
    }

    pub fn full(n: usize) -> Self {
        PointSet { members: vec![true; n] }
    }

    /// Builds a set from indices. Panics if an index is out of range.
    pub fn from_indices(n: usize, indices: &[usize]) -> Self {
        let mut s = Self::empty(n);
        for &i in indices {
            s.insert(i);
        }
        s
    }

    pub fn from_mask(members: Vec<bool>) -> Self {
        PointSet { members }
    }

    /// Size of the ambient point set.
    pub fn universe(&self) -> usize {
        self.members.len()
    }

    pub fn contains(&self, i: usize) -> bool {
        self.members[i]
    }

    pub fn insert(&mut self, i: usize) {
        assert!(i < self.members.len(), "point {i} out of range");
        self.members[i] = true;
    }

    pub fn len(&self) -> usize {
        self.members.iter().filter(|&&b| b).count()
    }

    pub fn is_empty(&self) -> bool {
        !self.members.iter().any(|&b| b)
    }

    pub fn iter(&self) -> impl Iterator<Item = usize> + '_ {
        self.members
            .iter()
            .enumerate()
            .filter_map(|(i, &b)| b.then_some(i))
    }

    pub fn to_vec(&self) -> Vec<usize> {
        self.iter().collect()
    }

    pub fn union(&self, other: &Self) -> Self {
        PointSet {
            members: self
                .members
                .iter()
                .zip(&other.members)
                .map(|(a, b)| *a || *b)
                .collect(),
        }
    }

    pub fn intersection(&self, other: &Self) -> Self {
        PointSet {
            members: self
                .members
                .iter()
                .zip(&other.members)
                .map(|(a, b)| *a && *b)
                .collect(),
        }
    }

    pub fn complement(&self) -> Self {
        PointSet {
            members: self.members.iter().map(|b| !b).collect(),
        }
    }

    pub fn is_subset(&self, other: &Self) -> bool {
        self.members
            .iter()
            .zip(&other.members)
            .all(|(a, b)| !*a || *b)
    }

    pub fn mask(&self) -> &[bool] {
        &self.members
    }
}

/// Violated invariant reported by [`FiniteSystem::invariant_measure_check`] and the
/// checked constructors.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum SystemError {
    #[error("dimension must be at least 1")]
    ZeroDimension,
    #[error("expected {expected} generators, found {found}")]
    GeneratorCount { expected: usize, found: usize },
    #[error("generator {generator} has length {found}, expected {expected}")]
    GeneratorLength {
        generator: usize,
        expected: usize,
        found: usize,
    },
    #[error("generator {0} is not a bijection")]
    NotBijection(usize),
    #[error("weight at point {0} is negative")]
    NegativeWeight(usize),
    #[error("weights sum to {0}, expected 1")]
    WeightSum(String),
    #[error("generator {generator} moves point {point} to a point of different weight")]
    NotInvariant { generator: usize, point: usize },
    #[error("generators {0} and {1} do not commute")]
    NotCommuting(usize, usize),
    #[error("empty point set")]
    Empty,
    #[error("malformed descriptor: {0}")]
    Descriptor(String),
}

#[derive(Clone, Debug)]
struct CycleTable {
    /// Cycle index of each point.
    cycle_of: Vec<usize>,
    /// Position of each point inside its cycle.
    pos: Vec<usize>,
    cycles: Vec<Vec<usize>>,
}

impl CycleTable {
    fn new(perm: &[usize]) -> Self {
        let n = perm.len();
        let mut cycle_of = vec![usize::MAX; n];
        let mut pos = vec![0; n];
        let mut cycles = Vec::new();
        for start in 0..n {
            if cycle_of[start] != usize::MAX {
                continue;
            }
            let id = cycles.len();
            let mut cyc = Vec::new();
            let mut p = start;
            loop {
                cycle_of[p] = id;
                pos[p] = cyc.len();
                cyc.push(p);
                p = perm[p];
                if p == start {
                    break;
                }
            }
            cycles.push(cyc);
        }
        CycleTable {
            cycle_of,
            pos,
            cycles,
        }
    }

    fn step(&self, p: usize, k: i64) -> usize {
        let cyc = &self.cycles[self.cycle_of[p]];
        let len = cyc.len() as i64;
        let idx = (self.pos[p] as i64 + k).rem_euclid(len);
        cyc[idx as usize]
    }

    fn order(&self) -> u64 {
        self.cycles
            .iter()
            .fold(1u64, |acc, c| acc.lcm(&(c.len() as u64)))
    }
}

/// A finite Z^d-action with an exact invariant probability measure.
#[derive(Clone, Debug)]
pub struct FiniteSystem {
    d: usize,
    weights: Vec<Rational>,
    gens: Vec<Vec<usize>>,
    inv: Vec<Vec<usize>>,
    cycles: Vec<CycleTable>,
}

fn invert(perm: &[usize]) -> Vec<usize> {
    let mut inv = vec![0; perm.len()];
    for (i, &p) in perm.iter().enumerate() {
        inv[p] = i;
    }
    inv
}

fn is_bijection(perm: &[usize]) -> bool {
    let mut seen = vec![false; perm.len()];
    for &p in perm {
        if p >= perm.len() || seen[p] {
            return false;
        }
        seen[p] = true;
    }
    true
}

impl FiniteSystem {
    /// Validated constructor.
    pub fn from_permutations(
        gens: Vec<Vec<usize>>,
        weights: Vec<Rational>,
    ) -> Result<Self, SystemError> {
        check_parts(gens.len(), &gens, &weights)?;
        let sys = Self::new_unchecked(gens, weights);
        sys.invariant_measure_check()?;
        Ok(sys)
    }

    /// Constructor without measure checks. Generators must still be bijections.
    /// Used to build negative controls with non-invariant weights.
    pub fn new_unchecked(gens: Vec<Vec<usize>>, weights: Vec<Rational>) -> Self {
        let d = gens.len();
        assert!(d >= 1, "dimension must be at least 1");
        for g in &gens {
            assert!(is_bijection(g), "generator is not a bijection");
            assert_eq!(g.len(), weights.len(), "generator length mismatch");
        }
        let inv = gens.iter().map(|g| invert(g)).collect();
        let cycles = gens.iter().map(|g| CycleTable::new(g)).collect();
        FiniteSystem {
            d,
            weights,
            gens,
            inv,
            cycles,
        }
    }

    /// Rotation `k -> k+1` on Z/n with uniform weights.
    pub fn rotation(n: usize) -> Self {
        assert!(n >= 1);
        let g = (0..n).map(|k| (k + 1) % n).collect();
        Self::new_unchecked(vec![g], vec![rational::ratio(1, n as i64); n])
    }

    /// Map `k -> k+step` on Z/n with uniform weights.
    pub fn rotation_by(n: usize, step: usize) -> Self {
        assert!(n >= 1);
        let g = (0..n).map(|k| (k + step) % n).collect();
        Self::new_unchecked(vec![g], vec![rational::ratio(1, n as i64); n])
    }

    /// Product torus (Z/n_1) x ... x (Z/n_d), generator i rotating coordinate i.
    /// Point index is row-major with coordinate 0 most significant.
    pub fn torus(sizes: &[usize]) -> Self {
        assert!(!sizes.is_empty() && sizes.iter().all(|&n| n >= 1));
        let n: usize = sizes.iter().product();
        let strides = torus_strides(sizes);
        let gens = (0..sizes.len())
            .map(|axis| {
                (0..n)
                    .map(|p| {
                        let c = (p / strides[axis]) % sizes[axis];
                        let nc = (c + 1) % sizes[axis];
                        p - c * strides[axis] + nc * strides[axis]
                    })
                    .collect()
            })
            .collect();
        Self::new_unchecked(gens, vec![rational::ratio(1, n as i64); n])
    }

    /// Disjoint union of systems of equal dimension, component `j` scaled by `masses[j]`.
    pub fn disjoint_union(parts: &[(FiniteSystem, Rational)]) -> Result<Self, SystemError> {
        let first = parts.first().ok_or(SystemError::Empty)?;
        let d = first.0.d;
        let mut gens = vec![Vec::new(); d];
        let mut weights = Vec::new();
        for (sys, mass) in parts {
            if sys.d != d {
                return Err(SystemError::GeneratorCount {
                    expected: d,
                    found: sys.d,
                });
            }
            let off = weights.len();
            for (axis, g) in sys.gens.iter().enumerate() {
                gens[axis].extend(g.iter().map(|p| p + off));
            }
            weights.extend(sys.weights.iter().map(|w| w * mass));
        }
        Self::from_permutations(gens, weights)
    }

    /// Same dynamics, new weights (validated).
    pub fn with_weights(&self, weights: Vec<Rational>) -> Result<Self, SystemError> {
        Self::from_permutations(self.gens.clone(), weights)
    }

    /// The action of `x -> T^{-x}`: every generator replaced by its inverse.
    pub fn inverse(&self) -> Self {
        FiniteSystem {
            d: self.d,
            weights: self.weights.clone(),
            gens: self.inv.clone(),
            inv: self.gens.clone(),
            cycles: self.inv.iter().map(|g| CycleTable::new(g)).collect(),
        }
    }

    /// The Z-action generated by generator `axis` alone.
    pub fn axis_subsystem(&self, axis: usize) -> Self {
        Self::new_unchecked(vec![self.gens[axis].clone()], self.weights.clone())
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn weights(&self) -> &[Rational] {
        &self.weights
    }

    pub fn weight(&self, p: usize) -> &Rational {
        &self.weights[p]
    }

    pub fn generator(&self, axis: usize) -> &[usize] {
        &self.gens[axis]
    }

    pub fn generator_inverse(&self, axis: usize) -> &[usize] {
        &self.inv[axis]
    }

    /// Order of generator `axis` as a permutation.
    pub fn generator_order(&self, axis: usize) -> u64 {
        self.cycles[axis].order()
    }

    /// Length of the cycle of generator `axis` through `p`.
    pub fn axis_period(&self, axis: usize, p: usize) -> usize {
        let t = &self.cycles[axis];
        t.cycles[t.cycle_of[p]].len()
    }

    /// `T^x ω`.
    pub fn act(&self, x: &GroupElement, omega: usize) -> usize {
        assert_eq!(x.dim(), self.d, "dimension mismatch");
        let mut p = omega;
        for (axis, &c) in x.0.iter().enumerate() {
            if c != 0 {
                p = self.cycles[axis].step(p, c);
            }
        }
        p
    }

    /// `T^{k e_axis} ω`.
    pub fn step(&self, axis: usize, k: i64, omega: usize) -> usize {
        self.cycles[axis].step(omega, k)
    }

    /// Orbit of `ω` under all generators.
    pub fn orbit(&self, omega: usize) -> PointSet {
        let mut set = PointSet::empty(self.len());
        let mut queue = VecDeque::from([omega]);
        set.insert(omega);
        while let Some(p) = queue.pop_front() {
            for axis in 0..self.d {
                for q in [self.gens[axis][p], self.inv[axis][p]] {
                    if !set.contains(q) {
                        set.insert(q);
                        queue.push_back(q);
                    }
                }
            }
        }
        set
    }

    /// Partition of the point set into orbits, each sorted, ordered by least element.
    pub fn orbits(&self) -> Vec<Vec<usize>> {
        let mut seen = vec![false; self.len()];
        let mut out = Vec::new();
        for p in 0..self.len() {
            if seen[p] {
                continue;
            }
            let o = self.orbit(p).to_vec();
            for &q in &o {
                seen[q] = true;
            }
            out.push(o);
        }
        out
    }

    /// Union of the orbits meeting `e`.
    pub fn saturation(&self, e: &PointSet) -> PointSet {
        let mut sat = PointSet::empty(self.len());
        for o in self.orbits() {
            if o.iter().any(|&p| e.contains(p)) {
                for p in o {
                    sat.insert(p);
                }
            }
        }
        sat
    }

    /// Points with a visit to `e` at some `x <= 0`. Every class of Z^d modulo the
    /// period lattice has a representative in the box `prod [-(p_i - 1), 0]`, so
    /// the search is finite.
    pub fn past_saturation(&self, e: &PointSet) -> PointSet {
        let orders: Vec<u64> = (0..self.d).map(|a| self.generator_order(a)).collect();
        let lo: Vec<i64> = orders.iter().map(|&o| -(o as i64 - 1)).collect();
        let hi = vec![0; self.d];
        let mut sat = PointSet::empty(self.len());
        for p in 0..self.len() {
            let hit = box_points(&lo, &hi).any(|x| e.contains(self.act(&x, p)));
            if hit {
                sat.insert(p);
            }
        }
        sat
    }

    /// Measure of a point set.
    pub fn measure(&self, e: &PointSet) -> Rational {
        e.iter().fold(Rational::zero(), |acc, p| acc + &self.weights[p])
    }

    /// Integral of a point function.
    pub fn integrate(&self, f: &[Rational]) -> Rational {
        self.weights
            .iter()
            .zip(f)
            .fold(Rational::zero(), |acc, (w, v)| acc + w * v)
    }

    /// Checks every system invariant and returns the first violation.
    pub fn invariant_measure_check(&self) -> Result<(), SystemError> {
        check_parts(self.d, &self.gens, &self.weights)?;
        if let Some(p) = self.weights.iter().position(|w| w.is_negative()) {
            return Err(SystemError::NegativeWeight(p));
        }
        let total = rational::sum(&self.weights);
        if !total.is_one() {
            return Err(SystemError::WeightSum(rational::to_pq(&total)));
        }
        for (axis, g) in self.gens.iter().enumerate() {
            for (p, &q) in g.iter().enumerate() {
                if self.weights[p] != self.weights[q] {
                    return Err(SystemError::NotInvariant {
                        generator: axis,
                        point: p,
                    });
                }
            }
        }
        for a in 0..self.d {
            for b in a + 1..self.d {
                let (ga, gb) = (&self.gens[a], &self.gens[b]);
                if (0..self.len()).any(|p| ga[gb[p]] != gb[ga[p]]) {
                    return Err(SystemError::NotCommuting(a, b));
                }
            }
        }
        Ok(())
    }

    /// `true` iff every invariant holds.
    pub fn is_valid(&self) -> bool {
        self.invariant_measure_check().is_ok()
    }

    /// Quotient box `prod [0, order_i)`; one representative per element of the
    /// finite group through which the action factors.
    pub fn quotient_window(&self) -> Vec<GroupElement> {
        let hi: Vec<i64> = (0..self.d)
            .map(|a| self.generator_order(a) as i64 - 1)
            .collect();
        box_points(&vec![0; self.d], &hi).collect()
    }

    pub fn to_descriptor(&self) -> SystemDescriptor {
        SystemDescriptor {
            d: self.d,
            sizes: None,
            permutations: Some(self.gens.clone()),
            weights: Some(self.weights.iter().map(rational::to_pq).collect()),
        }
    }
}

fn check_parts(d: usize, gens: &[Vec<usize>], weights: &[Rational]) -> Result<(), SystemError> {
    if d == 0 {
        return Err(SystemError::ZeroDimension);
    }
    if gens.len() != d {
        return Err(SystemError::GeneratorCount {
            expected: d,
            found: gens.len(),
        });
    }
    if weights.is_empty() {
        return Err(SystemError::Empty);
    }
    for (i, g) in gens.iter().enumerate() {
        if g.len() != weights.len() {
            return Err(SystemError::GeneratorLength {
                generator: i,
                expected: weights.len(),
                found: g.len(),
            });
        }
        if !is_bijection(g) {
            return Err(SystemError::NotBijection(i));
        }
    }
    Ok(())
}

/// Row-major strides for a torus with coordinate 0 most significant.
pub fn torus_strides(sizes: &[usize]) -> Vec<usize> {
    let mut strides = vec![1; sizes.len()];
    for i in (0..sizes.len().saturating_sub(1)).rev() {
        strides[i] = strides[i + 1] * sizes[i + 1];
    }
    strides
}

/// Point index of torus coordinates.
pub fn torus_index(sizes: &[usize], coords: &[usize]) -> usize {
    torus_strides(sizes)
        .iter()
        .zip(coords)
        .map(|(s, c)| s * c)
        .sum()
}

/// All lattice points of the box `[lo, hi]`, lexicographic with coordinate 0 most
/// significant. Empty when some `lo_i > hi_i`.
pub fn box_points(lo: &[i64], hi: &[i64]) -> impl Iterator<Item = GroupElement> {
    let lo = lo.to_vec();
    let hi = hi.to_vec();
    let empty = lo.iter().zip(&hi).any(|(a, b)| a > b);
    let mut cur = if empty { None } else { Some(lo.clone()) };
    std::iter::from_fn(move || {
        let out = cur.clone()?;
        let mut next = out.clone();
        let mut i = next.len();
        loop {
            if i == 0 {
                cur = None;
                break;
            }
            i -= 1;
            if next[i] < hi[i] {
                next[i] += 1;
                cur = Some(next);
                break;
            }
            next[i] = lo[i];
        }
        Some(GroupElement(out))
    })
}

/// JSON system descriptor: either `sizes` (uniform torus) or explicit
/// `permutations`, with optional weights given as `"p/q"` strings.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct SystemDescriptor {
    pub d: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sizes: Option<Vec<usize>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub permutations: Option<Vec<Vec<usize>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub weights: Option<Vec<String>>,
}

impl SystemDescriptor {
    pub fn build(&self) -> Result<FiniteSystem, SystemError> {
        let base = match (&self.sizes, &self.permutations) {
            (Some(sizes), None) => {
                if sizes.len() != self.d {
                    return Err(SystemError::GeneratorCount {
                        expected: self.d,
                        found: sizes.len(),
                    });
                }
                if sizes.iter().any(|&n| n == 0) {
                    return Err(SystemError::Empty);
                }
                FiniteSystem::torus(sizes)
            }
            (None, Some(perms)) => {
                if perms.is_empty() || perms[0].is_empty() {
                    return Err(SystemError::Empty);
                }
                let n = perms[0].len();
                let uniform = vec![rational::ratio(1, n as i64); n];
                check_parts(self.d, perms, &uniform)?;
                FiniteSystem::new_unchecked(perms.clone(), uniform)
            }
            _ => {
                return Err(SystemError::Descriptor(
                    "exactly one of `sizes` and `permutations` is required".into(),
                ))
            }
        };
        match &self.weights {
            None => Ok(base),
            Some(ws) => {
                let weights = ws
                    .iter()
                    .map(|s| rational::parse_rational(s))
                    .collect::<Result<Vec<_>, _>>()
                    .map_err(|e| SystemError::Descriptor(e.to_string()))?;
                base.with_weights(weights)
            }
        }
    }

    pub fn from_json(text: &str) -> Result<FiniteSystem, SystemError> {
        let desc: SystemDescriptor =
            serde_json::from_str(text).map_err(|e| SystemError::Descriptor(e.to_string()))?;
        desc.build()
    }
}

/// Random permutation with a prescribed cycle structure, on `offset..offset+sum`.
fn cycles_permutation(lengths: &[usize], offset: usize) -> Vec<usize> {
    let n: usize = lengths.iter().sum();
    let mut perm = vec![0; n];
    let mut start = 0;
    for &len in lengths {
        for i in 0..len {
            perm[start + i] = offset + start + (i + 1) % len;
        }
        start += len;
    }
    perm
}

/// Random valid system with `d` generators and at most `max_points` points.
///
/// Components are tori `Z/a x Z/b` (d = 2) or cycles (d = 1, or d = 2 with the
/// second generator a power of the first). Orbit masses are random small
/// integers, occasionally zero, normalized to 1. Point labels are shuffled.
pub fn random_system<R: Rng + ?Sized>(rng: &mut R, d: usize, max_points: usize) -> FiniteSystem {
    assert!((1..=2).contains(&d) && max_points >= 1);
    let n_target = rng.gen_range(1..=max_points);
    let mut comps: Vec<(Vec<Vec<usize>>, usize)> = Vec::new();
    let mut used = 0;
    while used < n_target {
        let room = n_target - used;
        let offset = used;
        let comp = if d == 1 {
            let len = rng.gen_range(1..=room.min(12));
            (vec![cycles_permutation(&[len], offset)], len)
        } else if rng.gen_bool(0.5) && room >= 1 {
            let a = rng.gen_range(1..=room.min(6));
            let b = rng.gen_range(1..=(room / a).clamp(1, 6));
            let t = FiniteSystem::torus(&[a, b]);
            let gens = t
                .gens
                .iter()
                .map(|g| g.iter().map(|p| p + offset).collect())
                .collect();
            (gens, a * b)
        } else {
            let len = rng.gen_range(1..=room.min(12));
            let k = rng.gen_range(0..len.max(1));
            let g1: Vec<usize> = (0..len).map(|i| offset + (i + 1) % len).collect();
            let g2: Vec<usize> = (0..len).map(|i| offset + (i + k) % len).collect();
            (vec![g1, g2], len)
        };
        used += comp.1;
        comps.push(comp);
    }
    let n = used;
    let mut gens = vec![Vec::with_capacity(n); d];
    for (cg, _) in &comps {
        for axis in 0..d {
            gens[axis].extend_from_slice(&cg[axis]);
        }
    }
    let mut sys = FiniteSystem::new_unchecked(gens, vec![Rational::zero(); n]);
    let orbits = sys.orbits();
    let mut masses: Vec<i64> = orbits
        .iter()
        .map(|_| if rng.gen_bool(0.1) { 0 } else { rng.gen_range(1..=5) })
        .collect();
    if masses.iter().all(|&m| m == 0) {
        masses[0] = 1;
    }
    let total: i64 = orbits
        .iter()
        .zip(&masses)
        .map(|(o, &m)| m * o.len() as i64)
        .sum();
    let mut weights = vec![Rational::zero(); n];
    for (o, &m) in orbits.iter().zip(&masses) {
        for &p in o {
            weights[p] = rational::ratio(m, total);
        }
    }
    sys.weights = weights;
    let mut labels: Vec<usize> = (0..n).collect();
    labels.shuffle(rng);
    relabel(&sys, &labels)
}

/// Image of the system under the point relabelling `p -> labels[p]`.
pub fn relabel(sys: &FiniteSystem, labels: &[usize]) -> FiniteSystem {
    let n = sys.len();
    let gens = sys
        .gens
        .iter()
        .map(|g| {
            let mut ng = vec![0; n];
            for p in 0..n {
                ng[labels[p]] = labels[g[p]];
            }
            ng
        })
        .collect();
    let mut weights = vec![Rational::zero(); n];
    for p in 0..n {
        weights[labels[p]] = sys.weights[p].clone();
    }
    FiniteSystem::new_unchecked(gens, weights)
}

/// Random subset, each point included with probability `p`.
pub fn random_subset<R: Rng + ?Sized>(rng: &mut R, n: usize, p: f64) -> PointSet {
    PointSet::from_mask((0..n).map(|_| rng.gen_bool(p)).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::ratio;

    #[test]
    fn act_examples() {
        let z5 = FiniteSystem::rotation(5);
        assert_eq!(z5.act(&GroupElement(vec![3]), 1), 4);
        assert_eq!(z5.act(&GroupElement(vec![0]), 2), 2);
        assert_eq!(z5.act(&GroupElement(vec![-7]), 1), 4);
        let t = FiniteSystem::torus(&[4, 4]);
        let p = torus_index(&[4, 4], &[3, 3]);
        assert_eq!(t.act(&GroupElement(vec![1, 2]), p), torus_index(&[4, 4], &[0, 1]));
    }

    #[test]
    fn orbit_examples() {
        let s = FiniteSystem::rotation_by(6, 2);
        assert_eq!(s.orbit(0).to_vec(), vec![0, 2, 4]);
        assert_eq!(FiniteSystem::rotation(5).orbit(3).len(), 5);
        let two = FiniteSystem::disjoint_union(&[
            (FiniteSystem::rotation(3), ratio(1, 2)),
            (FiniteSystem::rotation(3), ratio(1, 2)),
        ])
        .unwrap();
        assert_eq!(two.orbit(0).to_vec(), vec![0, 1, 2]);
    }

    #[test]
    fn saturation_examples() {
        let z5 = FiniteSystem::rotation(5);
        assert_eq!(z5.saturation(&PointSet::from_indices(5, &[0])).len(), 5);
        assert!(z5.saturation(&PointSet::empty(5)).is_empty());
        let two = FiniteSystem::disjoint_union(&[
            (FiniteSystem::rotation(2), ratio(1, 2)),
            (FiniteSystem::rotation(3), ratio(1, 2)),
        ])
        .unwrap();
        let sat = two.saturation(&PointSet::from_indices(5, &[1]));
        assert_eq!(sat.to_vec(), vec![0, 1]);
    }

    #[test]
    fn measure_check_examples() {
        let z4 = FiniteSystem::rotation(4);
        assert!(z4.is_valid());
        let bad = z4.with_weights(vec![ratio(1, 2), ratio(1, 2), ratio(0, 1), ratio(0, 1)]);
        assert!(matches!(bad, Err(SystemError::NotInvariant { .. })));
        let two = FiniteSystem::new_unchecked(
            vec![vec![1, 2, 0, 4, 3]],
            vec![ratio(1, 4), ratio(1, 4), ratio(1, 4), ratio(1, 8), ratio(1, 8)],
        );
        assert!(two.is_valid());
        let per_orbit = FiniteSystem::new_unchecked(
            vec![vec![1, 2, 0, 4, 5, 3]],
            vec![
                ratio(1, 3),
                ratio(1, 3),
                ratio(1, 3),
                ratio(0, 1),
                ratio(0, 1),
                ratio(0, 1),
            ],
        );
        assert!(per_orbit.is_valid());
        let sum2 = z4.with_weights(vec![ratio(1, 2); 4]);
        assert!(matches!(sum2, Err(SystemError::WeightSum(_))));
        let noncomm = FiniteSystem::new_unchecked(
            vec![vec![1, 0, 2], vec![0, 2, 1]],
            vec![ratio(1, 3); 3],
        );
        assert_eq!(
            noncomm.invariant_measure_check(),
            Err(SystemError::NotCommuting(0, 1))
        );
    }

    #[test]
    fn descriptor_roundtrip() {
        let s = SystemDescriptor::from_json(r#"{"d":2,"sizes":[2,3]}"#).unwrap();
        assert_eq!(s.len(), 6);
        let text = serde_json::to_string(&s.to_descriptor()).unwrap();
        let back = SystemDescriptor::from_json(&text).unwrap();
        assert_eq!(back.weights(), s.weights());
        let bad = SystemDescriptor::from_json(
            r#"{"d":1,"permutations":[[1,0]],"weights":["1/1","1/1"]}"#,
        );
        assert!(matches!(bad, Err(SystemError::WeightSum(_))));
    }

    #[test]
    fn box_points_order() {
        let pts: Vec<_> = box_points(&[0, -1], &[1, 0]).collect();
        assert_eq!(
            pts,
            vec![
                GroupElement(vec![0, -1]),
                GroupElement(vec![0, 0]),
                GroupElement(vec![1, -1]),
                GroupElement(vec![1, 0]),
            ]
        );
        assert_eq!(box_points(&[1], &[0]).count(), 0);
    }

    #[test]
    fn random_systems_are_valid() {
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(1);
        for d in 1..=2 {
            for _ in 0..50 {
                let s = random_system(&mut rng, d, 24);
                assert!(s.len() <= 24);
                s.invariant_measure_check().unwrap();
            }
        }
    }
}
