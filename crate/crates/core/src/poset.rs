//! Partially ordered time on Z^d: epochs and durations.
//!
//! All four sets are computed by one flood from the origin inside the box
//! `[0, H]^d`. A duration is downward closed, and `x` belongs to it iff `x` is
//! clean and each predecessor `x - e_i` (for `x_i > 0`) does. An epoch point is
//! a visit whose predecessors all lie in the duration. Visiting cells level by
//! level (by coordinate sum) decides every predecessor before its successors.
//! If a duration cell touches the far face of the box, the sets may continue
//! past it and the result is flagged truncated. Membership of points inside
//! the box is exact either way.

use crate::action::{FiniteSystem, GroupElement, PointSet};
use crate::chain::{verify_ve, window_kernel, WindowVariant};
use crate::rational::{self, Rational};
use crate::returns::{Direction, EqualityCheck, IdentityReport};
use num_traits::Zero;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum PosetError {
    #[error("horizon {horizon} too small: {what}")]
    HorizonExceeded { horizon: usize, what: String },
    #[error("invalid input: {0}")]
    Invalid(String),
}

/// Order interval `[lo, hi]` with optionally excluded endpoints.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct OrderInterval {
    pub lo: GroupElement,
    pub hi: GroupElement,
    pub lo_open: bool,
    pub hi_open: bool,
}

impl OrderInterval {
    pub fn closed(lo: GroupElement, hi: GroupElement) -> Self {
        OrderInterval {
            lo,
            hi,
            lo_open: false,
            hi_open: false,
        }
    }

    pub fn open(lo: GroupElement, hi: GroupElement) -> Self {
        OrderInterval {
            lo,
            hi,
            lo_open: true,
            hi_open: true,
        }
    }

    pub fn contains(&self, z: &GroupElement) -> bool {
        self.lo.le(z)
            && z.le(&self.hi)
            && !(self.lo_open && *z == self.lo)
            && !(self.hi_open && *z == self.hi)
    }

    pub fn points(&self) -> Vec<GroupElement> {
        crate::action::box_points(self.lo.coords(), self.hi.coords())
            .filter(|z| self.contains(z))
            .collect()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EpochKind {
    ReturnEpoch,
    ReturnDuration,
    ArrivalEpoch,
    ArrivalDuration,
}

/// One of the four sets at a point, restricted to the search box.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct EpochDurationSet {
    pub kind: EpochKind,
    pub elements: Vec<GroupElement>,
    pub truncated: bool,
}

/// Cell indices of one flood.
#[derive(Clone, Debug, Default)]
pub struct Flood {
    pub duration: Vec<usize>,
    pub epoch: Vec<usize>,
    pub truncated: bool,
}

/// Reusable flood workspace over the box `[0, H]^d`.
pub struct PosetScanner<'a> {
    system: &'a FiniteSystem,
    e: &'a PointSet,
    h: usize,
    d: usize,
    strides: Vec<usize>,
    alive: Vec<u32>,
    seen: Vec<u32>,
    point: Vec<usize>,
    stamp: u32,
    queue: Vec<usize>,
}

impl<'a> PosetScanner<'a> {
    pub fn new(system: &'a FiniteSystem, e: &'a PointSet, h: usize) -> Self {
        assert!(h >= 1, "horizon must be at least 1");
        let d = system.dim();
        let side = h + 1;
        let cells = side.pow(d as u32);
        let mut strides = vec![1; d];
        for i in (0..d.saturating_sub(1)).rev() {
            strides[i] = strides[i + 1] * side;
        }
        PosetScanner {
            system,
            e,
            h,
            d,
            strides,
            alive: vec![0; cells],
            seen: vec![0; cells],
            point: vec![0; cells],
            stamp: 0,
            queue: Vec::new(),
        }
    }

    pub fn horizon(&self) -> usize {
        self.h
    }

    pub fn num_cells(&self) -> usize {
        self.alive.len()
    }

    /// Coordinates of a cell.
    pub fn cell_coords(&self, cell: usize) -> GroupElement {
        GroupElement(
            self.strides
                .iter()
                .map(|&s| ((cell / s) % (self.h + 1)) as i64)
                .collect(),
        )
    }

    /// Cell of `z`, if `0 <= z <= H`.
    pub fn cell_of(&self, z: &GroupElement) -> Option<usize> {
        let mut idx = 0;
        for (c, s) in z.coords().iter().zip(&self.strides) {
            if *c < 0 || *c as usize > self.h {
                return None;
            }
            idx += *c as usize * s;
        }
        Some(idx)
    }

    fn coord(&self, cell: usize, axis: usize) -> usize {
        (cell / self.strides[axis]) % (self.h + 1)
    }

    /// Runs the return flood (`returns = true`, needs `ω ∈ E`) or the arrival
    /// flood from `ω` in direction `dir`.
    pub fn flood(&mut self, omega: usize, dir: Direction, returns: bool) -> Flood {
        let mut out = Flood::default();
        let in_e = self.e.contains(omega);
        if returns && !in_e {
            return out;
        }
        if !returns && in_e {
            out.epoch.push(0);
            return out;
        }
        self.stamp = self.stamp.wrapping_add(1);
        if self.stamp == 0 {
            self.alive.iter_mut().for_each(|v| *v = 0);
            self.seen.iter_mut().for_each(|v| *v = 0);
            self.stamp = 1;
        }
        let stamp = self.stamp;
        self.queue.clear();
        self.queue.push(0);
        self.seen[0] = stamp;
        self.point[0] = omega;
        let mut head = 0;
        while head < self.queue.len() {
            let cell = self.queue[head];
            head += 1;
            if cell != 0 {
                let preds_alive = (0..self.d).all(|i| {
                    self.coord(cell, i) == 0 || self.alive[cell - self.strides[i]] == stamp
                });
                if !preds_alive {
                    continue;
                }
                if self.e.contains(self.point[cell]) {
                    out.epoch.push(cell);
                    continue;
                }
            }
            self.alive[cell] = stamp;
            out.duration.push(cell);
            for i in 0..self.d {
                if self.coord(cell, i) == self.h {
                    out.truncated = true;
                    continue;
                }
                let next = cell + self.strides[i];
                if self.seen[next] != stamp {
                    self.seen[next] = stamp;
                    let gen = match dir {
                        Direction::Forward => self.system.generator(i),
                        Direction::Inverse => self.system.generator_inverse(i),
                    };
                    self.point[next] = gen[self.point[cell]];
                    self.queue.push(next);
                }
            }
        }
        out
    }
}

/// One of the four sets at `ω` inside the box `[0, H]^d`.
pub fn epoch_duration(
    system: &FiniteSystem,
    e: &PointSet,
    omega: usize,
    kind: EpochKind,
    dir: Direction,
    horizon: usize,
) -> EpochDurationSet {
    let mut sc = PosetScanner::new(system, e, horizon);
    let returns = matches!(kind, EpochKind::ReturnEpoch | EpochKind::ReturnDuration);
    let fl = sc.flood(omega, dir, returns);
    let cells = match kind {
        EpochKind::ReturnEpoch | EpochKind::ArrivalEpoch => &fl.epoch,
        EpochKind::ReturnDuration | EpochKind::ArrivalDuration => &fl.duration,
    };
    let mut elements: Vec<GroupElement> = cells.iter().map(|&c| sc.cell_coords(c)).collect();
    elements.sort();
    EpochDurationSet {
        kind,
        elements,
        truncated: fl.truncated,
    }
}

/// As [`epoch_duration`], failing when the set may extend beyond the box.
pub fn epoch_duration_exact(
    system: &FiniteSystem,
    e: &PointSet,
    omega: usize,
    kind: EpochKind,
    dir: Direction,
    horizon: usize,
) -> Result<EpochDurationSet, PosetError> {
    let s = epoch_duration(system, e, omega, kind, dir, horizon);
    if s.truncated {
        return Err(PosetError::HorizonExceeded {
            horizon,
            what: format!("set at point {omega} reaches the box boundary"),
        });
    }
    Ok(s)
}

/// Index of the eight sets: (kind, direction).
const SETS: [(EpochKind, Direction); 8] = [
    (EpochKind::ReturnEpoch, Direction::Forward),
    (EpochKind::ReturnEpoch, Direction::Inverse),
    (EpochKind::ReturnDuration, Direction::Forward),
    (EpochKind::ReturnDuration, Direction::Inverse),
    (EpochKind::ArrivalEpoch, Direction::Forward),
    (EpochKind::ArrivalEpoch, Direction::Inverse),
    (EpochKind::ArrivalDuration, Direction::Forward),
    (EpochKind::ArrivalDuration, Direction::Inverse),
];

fn set_index(kind: EpochKind, dir: Direction) -> usize {
    SETS.iter().position(|s| *s == (kind, dir)).unwrap()
}

/// The three pairs, each as (first member, second member).
pub const PAIRS: [(&str, (EpochKind, Direction), (EpochKind, Direction)); 3] = [
    (
        "i",
        (EpochKind::ReturnEpoch, Direction::Forward),
        (EpochKind::ReturnEpoch, Direction::Inverse),
    ),
    (
        "ii",
        (EpochKind::ReturnDuration, Direction::Forward),
        (EpochKind::ArrivalEpoch, Direction::Inverse),
    ),
    (
        "iii",
        (EpochKind::ArrivalDuration, Direction::Forward),
        (EpochKind::ArrivalDuration, Direction::Inverse),
    ),
];

/// All eight sets at every point, as per-cell membership masks.
pub struct EpoDurTable {
    horizon: usize,
    cells: usize,
    /// `members[set][ω]` lists the cells of that set at `ω`.
    members: Vec<Vec<Vec<usize>>>,
    truncated: bool,
    scanner_strides: Vec<usize>,
}

impl EpoDurTable {
    pub fn new(system: &FiniteSystem, e: &PointSet, horizon: usize) -> Self {
        let mut sc = PosetScanner::new(system, e, horizon);
        let mut members = vec![vec![Vec::new(); system.len()]; SETS.len()];
        let mut truncated = false;
        for omega in 0..system.len() {
            for dir in [Direction::Forward, Direction::Inverse] {
                for returns in [true, false] {
                    let fl = sc.flood(omega, dir, returns);
                    truncated |= fl.truncated;
                    let (ep, du) = if returns {
                        (EpochKind::ReturnEpoch, EpochKind::ReturnDuration)
                    } else {
                        (EpochKind::ArrivalEpoch, EpochKind::ArrivalDuration)
                    };
                    members[set_index(ep, dir)][omega] = fl.epoch;
                    members[set_index(du, dir)][omega] = fl.duration;
                }
            }
        }
        EpoDurTable {
            horizon,
            cells: sc.num_cells(),
            members,
            truncated,
            scanner_strides: sc.strides.clone(),
        }
    }

    pub fn truncated(&self) -> bool {
        self.truncated
    }

    fn cell_of(&self, z: &GroupElement) -> Option<usize> {
        let mut idx = 0;
        for (c, s) in z.coords().iter().zip(&self.scanner_strides) {
            if *c < 0 || *c as usize > self.horizon {
                return None;
            }
            idx += *c as usize * s;
        }
        Some(idx)
    }

    /// `μ{ω : z ∈ set(ω)}` for `z` inside the box.
    pub fn probability(
        &self,
        system: &FiniteSystem,
        kind: EpochKind,
        dir: Direction,
        z: &GroupElement,
    ) -> Rational {
        let Some(cell) = self.cell_of(z) else {
            return Rational::zero();
        };
        let lists = &self.members[set_index(kind, dir)];
        (0..system.len())
            .filter(|&p| lists[p].contains(&cell))
            .fold(Rational::zero(), |acc, p| acc + system.weight(p))
    }

    /// `E |set|`, exact when the table is not truncated.
    pub fn mean_cardinality(&self, system: &FiniteSystem, kind: EpochKind, dir: Direction) -> Rational {
        let lists = &self.members[set_index(kind, dir)];
        (0..system.len()).fold(Rational::zero(), |acc, p| {
            acc + system.weight(p) * rational::int(lists[p].len() as i64)
        })
    }

    pub fn num_cells(&self) -> usize {
        self.cells
    }
}

fn chain_pair(system: &FiniteSystem, e: &PointSet, z: &GroupElement, pair: &str) -> Option<(Rational, Rational)> {
    let variant = match pair {
        "i" if z.is_zero() => return None,
        "i" => WindowVariant::FPrime,
        "ii" => WindowVariant::FTriple,
        _ => WindowVariant::FDouble,
    };
    let v = verify_ve(&window_kernel(system, e, z, variant), system).expectations;
    Some((v[1].clone(), v[0].clone()))
}

fn pair_checks(
    system: &FiniteSystem,
    e: &PointSet,
    table: &EpoDurTable,
    z: &GroupElement,
) -> Vec<EqualityCheck> {
    PAIRS
        .iter()
        .map(|(name, a, b)| {
            let mut c = EqualityCheck::new(format!("pair {name} z={z}"))
                .direct("first", table.probability(system, a.0, a.1, z))
                .direct("second", table.probability(system, b.0, b.1, z));
            if let Some((x, y)) = chain_pair(system, e, z, name) {
                c = c.chain("window.target", x).chain("window.source", y);
            }
            c
        })
        .collect()
}

fn cardinality_checks(system: &FiniteSystem, table: &EpoDurTable) -> Vec<EqualityCheck> {
    PAIRS
        .iter()
        .map(|(name, a, b)| {
            EqualityCheck::new(format!("pair {name} cardinality"))
                .direct("E|first|", table.mean_cardinality(system, a.0, a.1))
                .direct("E|second|", table.mean_cardinality(system, b.0, b.1))
        })
        .collect()
}

fn unpaired_note(system: &FiniteSystem, table: &EpoDurTable) -> String {
    format!(
        "E|r.du.| = {}, E|r.du.(-)| = {} (no equality asserted)",
        rational::to_pq(&table.mean_cardinality(system, EpochKind::ReturnDuration, Direction::Forward)),
        rational::to_pq(&table.mean_cardinality(system, EpochKind::ReturnDuration, Direction::Inverse)),
    )
}

/// Pair probabilities at `z` (direct and through window kernels) plus the
/// cardinality expectations when no set was truncated.
pub fn check_epodur(
    system: &FiniteSystem,
    e: &PointSet,
    z: &GroupElement,
    horizon: usize,
) -> Result<IdentityReport, PosetError> {
    if z.dim() != system.dim() {
        return Err(PosetError::Invalid("z has the wrong dimension".into()));
    }
    if z.coords().iter().any(|&c| c > horizon as i64) {
        return Err(PosetError::HorizonExceeded {
            horizon,
            what: format!("z = {z} lies outside the box"),
        });
    }
    let table = EpoDurTable::new(system, e, horizon);
    let mut checks = pair_checks(system, e, &table, z);
    let mut notes = vec![unpaired_note(system, &table)];
    if table.truncated() {
        notes.push("truncated: cardinality checks omitted".into());
    } else {
        checks.extend(cardinality_checks(system, &table));
    }
    Ok(IdentityReport {
        identity: "EPODUR".into(),
        params: format!("z={z};H={horizon}"),
        checks,
        notes,
    })
}

/// [`check_epodur`] for every `z` in the box, sharing one table.
pub fn epodur_sweep(
    system: &FiniteSystem,
    e: &PointSet,
    horizon: usize,
) -> IdentityReport {
    let table = EpoDurTable::new(system, e, horizon);
    let d = system.dim();
    let mut checks = Vec::new();
    for z in crate::action::box_points(&vec![0; d], &vec![horizon as i64; d]) {
        checks.extend(pair_checks(system, e, &table, &z));
    }
    let mut notes = vec![unpaired_note(system, &table)];
    if table.truncated() {
        notes.push("truncated: cardinality checks omitted".into());
    } else {
        checks.extend(cardinality_checks(system, &table));
    }
    IdentityReport {
        identity: "EPODUR".into(),
        params: format!("H={horizon}"),
        checks,
        notes,
    }
}

/// Upper triangle `{(s,t): 1 <= s,t <= n, s+t >= n}` on `(Z/n)^2`, with the
/// representative `n` stored as coordinate 0.
pub fn torus_triangle(n: usize) -> (FiniteSystem, PointSet) {
    let sys = FiniteSystem::torus(&[n, n]);
    let mut e = PointSet::empty(n * n);
    for s in 1..=n {
        for t in 1..=n {
            if s + t >= n {
                e.insert(crate::action::torus_index(&[n, n], &[s % n, t % n]));
            }
        }
    }
    (sys, e)
}

/// Exact averages over the torus of the four cardinalities.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TorusStats {
    pub n: usize,
    #[serde(with = "rational::pq")]
    pub return_duration: Rational,
    #[serde(with = "rational::pq")]
    pub return_duration_inv: Rational,
    #[serde(with = "rational::pq")]
    pub arrival_epoch: Rational,
    #[serde(with = "rational::pq")]
    pub arrival_epoch_inv: Rational,
}

/// Averages of `|r.du.|`, `|r.du.(-)|`, `|a.ep.|`, `|a.ep.(-)|` for the triangle.
pub fn torus_triangle_stats(n: usize) -> TorusStats {
    assert!(n >= 2, "n must be at least 2");
    let (sys, e) = torus_triangle(n);
    let mut sc = PosetScanner::new(&sys, &e, 2 * n);
    let mut sums = [0u64; 4];
    for omega in 0..sys.len() {
        let floods = [
            sc.flood(omega, Direction::Forward, true),
            sc.flood(omega, Direction::Inverse, true),
        ];
        sums[0] += floods[0].duration.len() as u64;
        sums[1] += floods[1].duration.len() as u64;
        let fa = sc.flood(omega, Direction::Forward, false);
        let ia = sc.flood(omega, Direction::Inverse, false);
        sums[2] += fa.epoch.len() as u64;
        sums[3] += ia.epoch.len() as u64;
        debug_assert!(!(floods[0].truncated || floods[1].truncated || fa.truncated || ia.truncated));
    }
    let avg = |s: u64| rational::ratio(s as i64, (n * n) as i64);
    TorusStats {
        n,
        return_duration: avg(sums[0]),
        return_duration_inv: avg(sums[1]),
        arrival_epoch: avg(sums[2]),
        arrival_epoch_inv: avg(sums[3]),
    }
}
