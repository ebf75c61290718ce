//! Invariant m-chains stored as anchored offset kernels.
//!
//! A kernel assigns to every point `ω` a finite list of entries `(g_1..g_m, w)`.
//! The chain of `ω` is the union over `x ∈ Z^d` of the simplices
//! `(x, x+g_1, .., x+g_m)` taken from the entries at `T^x ω`, so right-shift
//! invariance holds by construction. Offsets are kept in Z^d and never reduced
//! modulo a period.
//!
//! Kernels built from return structure along one time direction use generator 0.

use crate::action::{box_points, FiniteSystem, GroupElement, PointSet};
use crate::rational::{self, Rational};
use num_traits::{Signed, Zero};
use serde::{Deserialize, Serialize};

/// Time axis used by the one-dimensional kernels and identities.
pub const TIME_AXIS: usize = 0;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ChainError {
    #[error("the orbit of point {0} never visits E")]
    OrbitMissesE(usize),
    #[error("horizon exceeded: needed {needed}, available {available}")]
    HorizonExceeded { needed: u64, available: u64 },
    #[error("invalid kernel: {0}")]
    InvalidKernel(String),
}

/// One simplex pattern anchored at vertex 0.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct KernelEntry {
    pub offsets: Vec<GroupElement>,
    pub weight: Rational,
}

/// Anchored representation of an invariant m-chain.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ChainKernel {
    m: usize,
    d: usize,
    bound: u64,
    entries: Vec<Vec<KernelEntry>>,
}

impl ChainKernel {
    /// Validates weights and offset shapes and computes the offset bound.
    pub fn new(m: usize, d: usize, entries: Vec<Vec<KernelEntry>>) -> Result<Self, ChainError> {
        if m == 0 {
            return Err(ChainError::InvalidKernel("m must be at least 1".into()));
        }
        let mut bound = 0;
        for (p, list) in entries.iter().enumerate() {
            for e in list {
                if e.offsets.len() != m {
                    return Err(ChainError::InvalidKernel(format!(
                        "entry at point {p} has {} offsets, expected {m}",
                        e.offsets.len()
                    )));
                }
                if e.weight.is_negative() {
                    return Err(ChainError::InvalidKernel(format!(
                        "negative weight at point {p}"
                    )));
                }
                for g in &e.offsets {
                    if g.dim() != d {
                        return Err(ChainError::InvalidKernel(format!(
                            "offset {g} at point {p} is not in Z^{d}"
                        )));
                    }
                    bound = bound.max(g.norm_inf());
                }
            }
        }
        Ok(ChainKernel {
            m,
            d,
            bound,
            entries,
        })
    }

    /// Kernel with no entries.
    pub fn zero(m: usize, d: usize, n: usize) -> Self {
        ChainKernel {
            m,
            d,
            bound: 0,
            entries: vec![Vec::new(); n],
        }
    }

    /// Fails with `HorizonExceeded` if the offset bound is above `cap`.
    pub fn with_cap(self, cap: u64) -> Result<Self, ChainError> {
        if self.bound > cap {
            return Err(ChainError::HorizonExceeded {
                needed: self.bound,
                available: cap,
            });
        }
        Ok(self)
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    /// L-infinity bound on every offset.
    pub fn offset_bound(&self) -> u64 {
        self.bound
    }

    pub fn entries(&self, p: usize) -> &[KernelEntry] {
        &self.entries[p]
    }

    pub fn num_points(&self) -> usize {
        self.entries.len()
    }

    /// Kernel with every weight multiplied by `c >= 0`.
    pub fn scaled(&self, c: &Rational) -> Self {
        assert!(!c.is_negative(), "negative scale");
        let entries = self
            .entries
            .iter()
            .map(|l| {
                l.iter()
                    .map(|e| KernelEntry {
                        offsets: e.offsets.clone(),
                        weight: &e.weight * c,
                    })
                    .collect()
            })
            .collect();
        ChainKernel {
            m: self.m,
            d: self.d,
            bound: self.bound,
            entries,
        }
    }

    /// Sum of two chains on the same system.
    pub fn plus(&self, other: &Self) -> Self {
        assert_eq!(self.m, other.m);
        assert_eq!(self.entries.len(), other.entries.len());
        let entries = self
            .entries
            .iter()
            .zip(&other.entries)
            .map(|(a, b)| a.iter().chain(b).cloned().collect())
            .collect();
        ChainKernel {
            m: self.m,
            d: self.d,
            bound: self.bound.max(other.bound),
            entries,
        }
    }

    /// Debug dump: list of `{point, offsets, weight}`.
    pub fn to_json(&self) -> serde_json::Value {
        let rows: Vec<KernelRow> = self
            .entries
            .iter()
            .enumerate()
            .flat_map(|(p, l)| {
                l.iter().map(move |e| KernelRow {
                    point: p,
                    offsets: e.offsets.clone(),
                    weight: e.weight.clone(),
                })
            })
            .collect();
        serde_json::to_value(rows).expect("kernel rows serialize")
    }

    /// Inverse of [`ChainKernel::to_json`].
    pub fn from_json(
        value: &serde_json::Value,
        m: usize,
        d: usize,
        n: usize,
    ) -> Result<Self, ChainError> {
        let rows: Vec<KernelRow> = serde_json::from_value(value.clone())
            .map_err(|e| ChainError::InvalidKernel(e.to_string()))?;
        let mut entries = vec![Vec::new(); n];
        for r in rows {
            if r.point >= n {
                return Err(ChainError::InvalidKernel(format!(
                    "point {} out of range",
                    r.point
                )));
            }
            entries[r.point].push(KernelEntry {
                offsets: r.offsets,
                weight: r.weight,
            });
        }
        Self::new(m, d, entries)
    }
}

#[derive(Serialize, Deserialize)]
struct KernelRow {
    point: usize,
    offsets: Vec<GroupElement>,
    #[serde(with = "rational::pq")]
    weight: Rational,
}

/// Vertex expectations of a kernel.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct VertexReport {
    pub expectations: Vec<Rational>,
    pub equal: bool,
    pub per_point: Option<Vec<Vec<Rational>>>,
}

fn check_dims(kernel: &ChainKernel, system: &FiniteSystem) {
    assert_eq!(kernel.d, system.dim(), "kernel and system dimensions differ");
    assert_eq!(
        kernel.entries.len(),
        system.len(),
        "kernel and system sizes differ"
    );
}

/// Total weight of the simplices of the chain of `ω` whose vertex `i` is the
/// group identity, computed literally by scanning `h ∈ [-B, B]^d`.
pub fn vertex_coefficient(
    kernel: &ChainKernel,
    system: &FiniteSystem,
    omega: usize,
    i: usize,
) -> Rational {
    check_dims(kernel, system);
    assert!(i <= kernel.m, "vertex index out of range");
    if i == 0 {
        return kernel.entries[omega]
            .iter()
            .fold(Rational::zero(), |acc, e| acc + &e.weight);
    }
    let b = kernel.bound as i64;
    let lo = vec![-b; kernel.d];
    let hi = vec![b; kernel.d];
    let mut total = Rational::zero();
    for h in box_points(&lo, &hi) {
        let src = system.act(&-&h, omega);
        for e in &kernel.entries[src] {
            if e.offsets[i - 1] == h {
                total += &e.weight;
            }
        }
    }
    total
}

/// Vertex-`i` coefficients at every point, by pushing each entry's weight
/// forward to the point its vertex `i` lands on.
pub fn vertex_coefficients(kernel: &ChainKernel, system: &FiniteSystem, i: usize) -> Vec<Rational> {
    check_dims(kernel, system);
    assert!(i <= kernel.m, "vertex index out of range");
    let mut out = vec![Rational::zero(); system.len()];
    for (p, list) in kernel.entries.iter().enumerate() {
        for e in list {
            let q = if i == 0 {
                p
            } else {
                system.act(&e.offsets[i - 1], p)
            };
            out[q] += &e.weight;
        }
    }
    out
}

/// `Σ_ω μ(ω) · vertex_coefficient(ω, i)`.
pub fn vertex_expectation(kernel: &ChainKernel, system: &FiniteSystem, i: usize) -> Rational {
    system.integrate(&vertex_coefficients(kernel, system, i))
}

/// All `m + 1` vertex expectations.
pub fn verify_ve(kernel: &ChainKernel, system: &FiniteSystem) -> VertexReport {
    let expectations: Vec<Rational> = (0..=kernel.m)
        .map(|i| vertex_expectation(kernel, system, i))
        .collect();
    let equal = expectations.windows(2).all(|w| w[0] == w[1]);
    VertexReport {
        expectations,
        equal,
        per_point: None,
    }
}

/// As [`verify_ve`], also keeping the per-point coefficient table.
pub fn verify_ve_with_table(kernel: &ChainKernel, system: &FiniteSystem) -> VertexReport {
    let table: Vec<Vec<Rational>> = (0..=kernel.m)
        .map(|i| vertex_coefficients(kernel, system, i))
        .collect();
    let expectations: Vec<Rational> = table.iter().map(|c| system.integrate(c)).collect();
    let equal = expectations.windows(2).all(|w| w[0] == w[1]);
    VertexReport {
        expectations,
        equal,
        per_point: Some(table),
    }
}

/// Smallest `j >= 0` with `T^{-j e_0} ω ∈ E`, searching one cycle.
fn back_visit(system: &FiniteSystem, e: &PointSet, omega: usize) -> Option<u64> {
    let period = system.axis_period(TIME_AXIS, omega) as i64;
    (0..period)
        .find(|&j| e.contains(system.step(TIME_AXIS, -j, omega)))
        .map(|j| j as u64)
}

/// Smallest `j >= 1` with `T^{j s e_0} ω ∈ E` for direction `s = ±1`.
fn strict_visit(system: &FiniteSystem, e: &PointSet, omega: usize, sign: i64) -> Option<u64> {
    let period = system.axis_period(TIME_AXIS, omega) as i64;
    (1..=period)
        .find(|&j| e.contains(system.step(TIME_AXIS, sign * j, omega)))
        .map(|j| j as u64)
}

fn time_offset(d: usize, k: i64) -> GroupElement {
    GroupElement::axis(d, TIME_AXIS, k)
}

/// Policy for points whose time orbit never meets `E`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Coverage {
    /// Such points are an error (`OrbitMissesE`).
    Strict,
    /// Such points carry no entries; the kernel lives on the saturation.
    Saturation,
}

fn kac_arrows(
    system: &FiniteSystem,
    e: &PointSet,
    coverage: Coverage,
) -> Result<Vec<Option<u64>>, ChainError> {
    (0..system.len())
        .map(|p| match (back_visit(system, e, p), coverage) {
            (None, Coverage::Strict) => Err(ChainError::OrbitMissesE(p)),
            (j, _) => Ok(j),
        })
        .collect()
}

/// Kac kernel: every point sends one arrow of weight 1 back to its most recent
/// visit to `E` at or before time 0 (offset 0 when `ω ∈ E`).
pub fn kac_kernel(system: &FiniteSystem, e: &PointSet) -> Result<ChainKernel, ChainError> {
    kac_kernel_with(system, e, Coverage::Strict)
}

/// Kac kernel with an explicit coverage policy.
pub fn kac_kernel_with(
    system: &FiniteSystem,
    e: &PointSet,
    coverage: Coverage,
) -> Result<ChainKernel, ChainError> {
    let d = system.dim();
    let entries = kac_arrows(system, e, coverage)?
        .into_iter()
        .map(|j| match j {
            Some(j) => vec![KernelEntry {
                offsets: vec![time_offset(d, -(j as i64))],
                weight: rational::int(1),
            }],
            None => Vec::new(),
        })
        .collect();
    ChainKernel::new(1, d, entries)
}

/// Which end of a Kac arrow supplies the `f` factor.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum WeightAnchor {
    Source,
    Target,
}

/// Kac arrows `(k, l)` weighted `f(T^k ω) s(k-l)` (source) or `f(T^l ω) s(k-l)`
/// (target). `s[j]` must exist for every arrow length `j`.
pub fn weighted_kac_kernel(
    system: &FiniteSystem,
    e: &PointSet,
    f: &[Rational],
    s: &[Rational],
    anchor: WeightAnchor,
) -> Result<ChainKernel, ChainError> {
    weighted_kac_kernel_with(system, e, f, s, anchor, Coverage::Strict)
}

/// [`weighted_kac_kernel`] with an explicit coverage policy.
pub fn weighted_kac_kernel_with(
    system: &FiniteSystem,
    e: &PointSet,
    f: &[Rational],
    s: &[Rational],
    anchor: WeightAnchor,
    coverage: Coverage,
) -> Result<ChainKernel, ChainError> {
    assert_eq!(f.len(), system.len(), "f table size");
    let d = system.dim();
    let arrows = kac_arrows(system, e, coverage)?;
    let mut entries = Vec::with_capacity(system.len());
    for (p, j) in arrows.into_iter().enumerate() {
        let Some(j) = j else {
            entries.push(Vec::new());
            continue;
        };
        let sj = s.get(j as usize).ok_or(ChainError::HorizonExceeded {
            needed: j + 1,
            available: s.len() as u64,
        })?;
        let fv = match anchor {
            WeightAnchor::Source => &f[p],
            WeightAnchor::Target => &f[system.step(TIME_AXIS, -(j as i64), p)],
        };
        entries.push(vec![KernelEntry {
            offsets: vec![time_offset(d, -(j as i64))],
            weight: fv * sj,
        }]);
    }
    ChainKernel::new(1, d, entries)
}

/// The three one-step window graphs, stated on componentwise-ordered Z^d with
/// target `y = x - z`:
/// `F'`: `x, y ∈ E`, no visit in `]y, x[`;
/// `F''`: no visit in `[y, x]`;
/// `F'''`: `y ∈ E`, no visit in `]y, x]`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum WindowVariant {
    #[serde(rename = "F'")]
    FPrime,
    #[serde(rename = "F''")]
    FDouble,
    #[serde(rename = "F'''")]
    FTriple,
}

/// Window kernel with fixed difference `z` between source and target.
pub fn window_kernel(
    system: &FiniteSystem,
    e: &PointSet,
    z: &GroupElement,
    variant: WindowVariant,
) -> ChainKernel {
    let d = system.dim();
    assert_eq!(z.dim(), d);
    let neg_z = -z;
    let lo = neg_z.coords().to_vec();
    let hi = vec![0i64; d];
    let mut entries = Vec::with_capacity(system.len());
    for p in 0..system.len() {
        let src_in = e.contains(p);
        let tgt_in = e.contains(system.act(&neg_z, p));
        let clean = |skip_lo: bool, skip_hi: bool| {
            box_points(&lo, &hi).all(|u| {
                let at_lo = u == neg_z;
                let at_hi = u.is_zero();
                (skip_lo && at_lo) || (skip_hi && at_hi) || !e.contains(system.act(&u, p))
            })
        };
        let keep = match variant {
            WindowVariant::FPrime => src_in && tgt_in && clean(true, true),
            WindowVariant::FDouble => clean(false, false),
            WindowVariant::FTriple => tgt_in && clean(true, false),
        };
        entries.push(if keep {
            vec![KernelEntry {
                offsets: vec![neg_z.clone()],
                weight: rational::int(1),
            }]
        } else {
            Vec::new()
        });
    }
    ChainKernel::new(1, d, entries).expect("window kernel is well formed")
}

/// Window kernel along the time axis with difference `n`.
pub fn window_kernel_1d(
    system: &FiniteSystem,
    e: &PointSet,
    n: u64,
    variant: WindowVariant,
) -> ChainKernel {
    window_kernel(system, e, &time_offset(system.dim(), n as i64), variant)
}

/// Shape of a gap hypergraph along the time axis: vertices at increasing times
/// separated by `gaps`, every vertex in `E` except `pivot`, whose membership is
/// `pivot_in_e`, and no visits strictly between adjacent vertices.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct JointSpec {
    pub gaps: Vec<u64>,
    pub pivot: usize,
    pub pivot_in_e: bool,
}

impl JointSpec {
    /// All vertices in `E`.
    pub fn all_in_e(gaps: Vec<u64>) -> Self {
        JointSpec {
            gaps,
            pivot: 0,
            pivot_in_e: true,
        }
    }

    /// First vertex outside `E`.
    pub fn first_outside(gaps: Vec<u64>) -> Self {
        JointSpec {
            gaps,
            pivot: 0,
            pivot_in_e: false,
        }
    }

    /// Vertex outside `E` preceded by `backward` gaps (nearest first) and
    /// followed by `forward` gaps.
    pub fn straddle(forward: &[u64], backward: &[u64]) -> Self {
        let mut gaps: Vec<u64> = backward.iter().rev().copied().collect();
        gaps.extend_from_slice(forward);
        JointSpec {
            gaps,
            pivot: backward.len(),
            pivot_in_e: false,
        }
    }
}

/// Indicator kernel of the gap hypergraph, anchored at the earliest vertex.
pub fn joint_kernel(
    system: &FiniteSystem,
    e: &PointSet,
    spec: &JointSpec,
) -> Result<ChainKernel, ChainError> {
    let m = spec.gaps.len();
    if m == 0 || spec.gaps.contains(&0) || spec.pivot > m {
        return Err(ChainError::InvalidKernel(
            "joint spec needs m >= 1 positive gaps and a pivot in 0..=m".into(),
        ));
    }
    let d = system.dim();
    let mut pos = vec![0i64];
    for &g in &spec.gaps {
        pos.push(pos.last().unwrap() + g as i64);
    }
    let span = *pos.last().unwrap();
    let mut entries = Vec::with_capacity(system.len());
    for p in 0..system.len() {
        let mut v = 0;
        let ok = (0..=span).all(|t| {
            let inside = e.contains(system.step(TIME_AXIS, t, p));
            if pos[v] == t {
                let want = v != spec.pivot || spec.pivot_in_e;
                v += 1;
                inside == want
            } else {
                !inside
            }
        });
        entries.push(if ok {
            vec![KernelEntry {
                offsets: pos[1..].iter().map(|&t| time_offset(d, t)).collect(),
                weight: rational::int(1),
            }]
        } else {
            Vec::new()
        });
    }
    ChainKernel::new(m, d, entries)
}

/// Two-set 2-hypergraph: simplices `(k0, k1, k2)` with `k2 < k0 < k1`,
/// `[k2, k1[ ∩ E2 = {k2}` and `]k2, k1] ∩ E1 = {k1}`, anchored at `k0`.
pub fn two_sets_kernel(
    system: &FiniteSystem,
    e1: &PointSet,
    e2: &PointSet,
) -> Result<ChainKernel, ChainError> {
    two_sets_kernel_with(system, e1, e2, Coverage::Strict)
}

/// [`two_sets_kernel`] with an explicit coverage policy.
pub fn two_sets_kernel_with(
    system: &FiniteSystem,
    e1: &PointSet,
    e2: &PointSet,
    coverage: Coverage,
) -> Result<ChainKernel, ChainError> {
    let d = system.dim();
    let mut entries = Vec::with_capacity(system.len());
    for p in 0..system.len() {
        if e1.contains(p) || e2.contains(p) {
            entries.push(Vec::new());
            continue;
        }
        let k1 = strict_visit(system, e1, p, 1);
        let k2 = strict_visit(system, e2, p, -1);
        let (k1, k2) = match (k1, k2) {
            (Some(a), Some(b)) => (a as i64, -(b as i64)),
            _ if coverage == Coverage::Strict => {
                return Err(ChainError::HorizonExceeded {
                    needed: system.axis_period(TIME_AXIS, p) as u64 + 1,
                    available: system.axis_period(TIME_AXIS, p) as u64,
                })
            }
            _ => {
                entries.push(Vec::new());
                continue;
            }
        };
        let no_e2_ahead = (1..k1).all(|t| !e2.contains(system.step(TIME_AXIS, t, p)));
        let no_e1_behind = (k2 + 1..0).all(|t| !e1.contains(system.step(TIME_AXIS, t, p)));
        entries.push(if no_e2_ahead && no_e1_behind {
            vec![KernelEntry {
                offsets: vec![time_offset(d, k1), time_offset(d, k2)],
                weight: rational::int(1),
            }]
        } else {
            Vec::new()
        });
    }
    ChainKernel::new(2, d, entries)
}

/// Arrows of the induced map: from each `ω ∈ E` back to the previous visit,
/// weighted `f(ω)`. Vertex 0 integrates `f` over `E`, vertex 1 integrates
/// `f ∘ T_E` over `E`. Points of `E` on time orbits are always covered.
pub fn induced_kernel(system: &FiniteSystem, e: &PointSet, f: &[Rational]) -> ChainKernel {
    assert_eq!(f.len(), system.len(), "f table size");
    let d = system.dim();
    let entries = (0..system.len())
        .map(|p| {
            if !e.contains(p) {
                return Vec::new();
            }
            let j = strict_visit(system, e, p, -1).expect("a point of E revisits E");
            vec![KernelEntry {
                offsets: vec![time_offset(d, -(j as i64))],
                weight: f[p].clone(),
            }]
        })
        .collect();
    ChainKernel::new(1, d, entries).expect("induced kernel is well formed")
}
