//! Return and arrival times, the induced map, and the exact identity catalog.
//!
//! Every identity is evaluated twice: by summing times against the measure
//! ("direct") and through vertex expectations of a chain kernel ("chain").
//! On a Z^d system the identities concern the time axis (generator 0), so they
//! are evaluated on that sub-action.
//!
//! Functions of an infinite time contribute 0; an event `ξ > n` holds when `ξ`
//! is infinite.

use crate::action::{FiniteSystem, PointSet};
use crate::chain::{
    self, joint_kernel, two_sets_kernel_with, verify_ve, weighted_kac_kernel_with, window_kernel_1d,
    ChainError, ChainKernel, Coverage, JointSpec, WeightAnchor, WindowVariant, TIME_AXIS,
};
use crate::rational::{self, Rational};
use num_traits::Zero;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

/// A time that may be infinite.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum TimeValue {
    Finite(u64),
    Infinite,
}

impl TimeValue {
    pub fn finite(self) -> Option<u64> {
        match self {
            TimeValue::Finite(k) => Some(k),
            TimeValue::Infinite => None,
        }
    }

    pub fn is_infinite(self) -> bool {
        self == TimeValue::Infinite
    }
}

impl fmt::Display for TimeValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TimeValue::Finite(k) => write!(f, "{k}"),
            TimeValue::Infinite => write!(f, "inf"),
        }
    }
}

/// Time direction: the action itself or its inverse.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    Forward,
    Inverse,
}

impl Direction {
    fn sign(self) -> i64 {
        match self {
            Direction::Forward => 1,
            Direction::Inverse => -1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ReturnError {
    #[error("operation defined for d = 1 only, system has d = {0}")]
    DimensionUnsupported(usize),
    #[error("point {0} is not in E")]
    NotInE(usize),
    #[error("missing parameter `{0}`")]
    MissingParameter(&'static str),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error(transparent)]
    Chain(#[from] ChainError),
}

/// Smallest `k >= start` with `T^{±k} ω ∈ E`, searching one full cycle.
fn visit_from(
    system: &FiniteSystem,
    e: &PointSet,
    omega: usize,
    dir: Direction,
    start: u64,
) -> TimeValue {
    let perm = match dir {
        Direction::Forward => system.generator(TIME_AXIS),
        Direction::Inverse => system.generator_inverse(TIME_AXIS),
    };
    let period = system.axis_period(TIME_AXIS, omega) as u64;
    let mut p = omega;
    for _ in 0..start {
        p = perm[p];
    }
    for k in start..start + period {
        if e.contains(p) {
            return TimeValue::Finite(k);
        }
        p = perm[p];
    }
    TimeValue::Infinite
}

/// Strict first hitting time `min{k >= 1: T^{±k} ω ∈ E}`.
pub fn first_hit_time(
    system: &FiniteSystem,
    e: &PointSet,
    omega: usize,
    dir: Direction,
) -> TimeValue {
    visit_from(system, e, omega, dir, 1)
}

/// Return time `ρ_E`: 0 off `E`, strict first return on `E`.
pub fn return_time(system: &FiniteSystem, e: &PointSet, omega: usize) -> TimeValue {
    return_time_dir(system, e, omega, Direction::Forward)
}

/// Return time in a given direction (`ρ` or `ρ^(-)`).
pub fn return_time_dir(
    system: &FiniteSystem,
    e: &PointSet,
    omega: usize,
    dir: Direction,
) -> TimeValue {
    if !e.contains(omega) {
        return TimeValue::Finite(0);
    }
    first_hit_time(system, e, omega, dir)
}

/// Arrival time `ξ_E` (or `ξ^(-)_E`): least `k >= 0` with `T^{±k} ω ∈ E`.
pub fn arrival_time(
    system: &FiniteSystem,
    e: &PointSet,
    omega: usize,
    dir: Direction,
) -> TimeValue {
    visit_from(system, e, omega, dir, 0)
}

fn require_1d(system: &FiniteSystem) -> Result<(), ReturnError> {
    if system.dim() != 1 {
        return Err(ReturnError::DimensionUnsupported(system.dim()));
    }
    Ok(())
}

/// First-return map on `E`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct InducedMap {
    pub domain: PointSet,
    image: Vec<Option<usize>>,
}

impl InducedMap {
    pub fn apply(&self, omega: usize) -> Option<usize> {
        self.image[omega]
    }

    /// `true` iff the map permutes its domain.
    pub fn is_bijection(&self) -> bool {
        let mut hit = vec![false; self.image.len()];
        for p in self.domain.iter() {
            match self.image[p] {
                Some(q) if self.domain.contains(q) && !hit[q] => hit[q] = true,
                _ => return false,
            }
        }
        true
    }

    /// Exact check that `μ(·|E)` is preserved, i.e. `μ(T_E^{-1}{η}) = μ(η)` on `E`.
    pub fn preserves_conditional_measure(&self, system: &FiniteSystem) -> bool {
        let mut pre = vec![Rational::zero(); self.image.len()];
        for p in self.domain.iter() {
            if let Some(q) = self.image[p] {
                pre[q] += system.weight(p);
            }
        }
        self.domain.iter().all(|q| &pre[q] == system.weight(q))
    }
}

/// Induced transformation `T_E ω = T^{ρ(ω)} ω` on `E`.
pub fn induced_transform(system: &FiniteSystem, e: &PointSet) -> Result<InducedMap, ReturnError> {
    require_1d(system)?;
    let image = (0..system.len())
        .map(|p| {
            if !e.contains(p) {
                return None;
            }
            let r = return_time(system, e, p).finite()?;
            Some(system.step(TIME_AXIS, r as i64, p))
        })
        .collect();
    Ok(InducedMap {
        domain: e.clone(),
        image,
    })
}

/// Which repeated-time sequence to produce.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SequenceKind {
    /// `ρ^(1), ρ^(2), ..` for a point of `E`.
    Return,
    /// `ξ^(1), ξ^(2), ..`: arrival, then subsequent returns.
    Arrival,
}

/// First `m` terms of the return or arrival sequence in a direction.
pub fn joint_return_sequence(
    system: &FiniteSystem,
    e: &PointSet,
    omega: usize,
    m: usize,
    dir: Direction,
    kind: SequenceKind,
) -> Result<Vec<TimeValue>, ReturnError> {
    require_1d(system)?;
    if kind == SequenceKind::Return && !e.contains(omega) {
        return Err(ReturnError::NotInE(omega));
    }
    Ok(sequence(system, e, omega, m, dir, kind))
}

fn sequence(
    system: &FiniteSystem,
    e: &PointSet,
    omega: usize,
    m: usize,
    dir: Direction,
    kind: SequenceKind,
) -> Vec<TimeValue> {
    let mut out = Vec::with_capacity(m);
    let mut p = omega;
    for j in 0..m {
        let t = if j == 0 && kind == SequenceKind::Arrival {
            arrival_time(system, e, p, dir)
        } else {
            return_time_dir(system, e, p, dir)
        };
        out.push(t);
        match t {
            TimeValue::Finite(k) => p = system.step(TIME_AXIS, dir.sign() * k as i64, p),
            TimeValue::Infinite => {
                out.resize(m, TimeValue::Infinite);
                break;
            }
        }
    }
    out
}

/// Exact law of `(ρ^(1), .., ρ^(m))` on `E` (unnormalized measure), keyed by the
/// gap vector. Points of zero weight are skipped.
pub fn return_sequence_distribution(
    system: &FiniteSystem,
    e: &PointSet,
    m: usize,
    dir: Direction,
) -> Result<BTreeMap<Vec<u64>, Rational>, ReturnError> {
    require_1d(system)?;
    let mut table: BTreeMap<Vec<u64>, Rational> = BTreeMap::new();
    for p in e.iter() {
        if system.weight(p).is_zero() {
            continue;
        }
        let key: Vec<u64> = sequence(system, e, p, m, dir, SequenceKind::Return)
            .into_iter()
            .map(|t| t.finite().expect("points of E return"))
            .collect();
        *table.entry(key).or_insert_with(Rational::zero) += system.weight(p);
    }
    Ok(table)
}

/// Identity catalog mnemonics.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Identity {
    #[serde(rename = "KAC")]
    Kac,
    #[serde(rename = "INDUCED_MP")]
    InducedMp,
    #[serde(rename = "KACDIST")]
    KacDist,
    #[serde(rename = "INVDIST")]
    InvDist,
    #[serde(rename = "SSDIST")]
    SsDist,
    #[serde(rename = "SF")]
    Sf,
    #[serde(rename = "SSF")]
    Ssf,
    #[serde(rename = "TWOSETS")]
    TwoSets,
    #[serde(rename = "JOINT_A")]
    JointA,
    #[serde(rename = "JOINT_B")]
    JointB,
    #[serde(rename = "JOINT_C")]
    JointC,
    #[serde(rename = "JOINT_E")]
    JointE,
    #[serde(rename = "KACDEC")]
    KacDec,
}

impl Identity {
    pub const ALL: [Identity; 13] = [
        Identity::Kac,
        Identity::InducedMp,
        Identity::KacDist,
        Identity::InvDist,
        Identity::SsDist,
        Identity::Sf,
        Identity::Ssf,
        Identity::TwoSets,
        Identity::JointA,
        Identity::JointB,
        Identity::JointC,
        Identity::JointE,
        Identity::KacDec,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Identity::Kac => "KAC",
            Identity::InducedMp => "INDUCED_MP",
            Identity::KacDist => "KACDIST",
            Identity::InvDist => "INVDIST",
            Identity::SsDist => "SSDIST",
            Identity::Sf => "SF",
            Identity::Ssf => "SSF",
            Identity::TwoSets => "TWOSETS",
            Identity::JointA => "JOINT_A",
            Identity::JointB => "JOINT_B",
            Identity::JointC => "JOINT_C",
            Identity::JointE => "JOINT_E",
            Identity::KacDec => "KACDEC",
        }
    }
}

impl fmt::Display for Identity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Identity {
    type Err = ReturnError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Identity::ALL
            .iter()
            .copied()
            .find(|i| i.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| ReturnError::InvalidParameter(format!("unknown identity `{s}`")))
    }
}

/// Inputs for [`evaluate_identity`].
#[derive(Clone, Debug)]
pub struct IdentityParams {
    pub e: PointSet,
    pub e2: Option<PointSet>,
    pub f: Option<Vec<Rational>>,
    pub s: Option<Vec<Rational>>,
    pub n: Option<u64>,
    pub gaps: Vec<u64>,
    pub back_gaps: Vec<u64>,
}

impl IdentityParams {
    pub fn new(e: PointSet) -> Self {
        IdentityParams {
            e,
            e2: None,
            f: None,
            s: None,
            n: None,
            gaps: Vec::new(),
            back_gaps: Vec::new(),
        }
    }

    pub fn with_e2(mut self, e2: PointSet) -> Self {
        self.e2 = Some(e2);
        self
    }

    pub fn with_f(mut self, f: Vec<Rational>) -> Self {
        self.f = Some(f);
        self
    }

    pub fn with_s(mut self, s: Vec<Rational>) -> Self {
        self.s = Some(s);
        self
    }

    pub fn with_n(mut self, n: u64) -> Self {
        self.n = Some(n);
        self
    }

    pub fn with_gaps(mut self, gaps: Vec<u64>) -> Self {
        self.gaps = gaps;
        self
    }

    pub fn with_back_gaps(mut self, back: Vec<u64>) -> Self {
        self.back_gaps = back;
        self
    }

    fn describe(&self, id: Identity) -> String {
        let set = |s: &PointSet| {
            let v: Vec<String> = s.iter().map(|p| p.to_string()).collect();
            format!("{{{}}}", v.join(","))
        };
        let list = |v: &[u64]| v.iter().map(|k| k.to_string()).collect::<Vec<_>>().join(",");
        let mut parts = vec![format!("E={}", set(&self.e))];
        if id == Identity::TwoSets {
            if let Some(e2) = &self.e2 {
                parts.push(format!("E2={}", set(e2)));
            }
        }
        if let Some(n) = self.n {
            if matches!(id, Identity::KacDist | Identity::InvDist) {
                parts.push(format!("n={n}"));
            }
        }
        if matches!(
            id,
            Identity::JointA | Identity::JointB | Identity::JointC | Identity::JointE | Identity::KacDec
        ) {
            parts.push(format!("gaps={}", list(&self.gaps)));
        }
        if matches!(id, Identity::JointC | Identity::KacDec) {
            parts.push(format!("back={}", list(&self.back_gaps)));
        }
        if matches!(id, Identity::SsDist | Identity::Sf | Identity::Ssf) {
            if let Some(s) = &self.s {
                let v: Vec<String> = s.iter().map(rational::to_pq).collect();
                parts.push(format!("s={}", v.join(",")));
            }
        }
        parts.join(";")
    }
}

/// Which evaluation produced a side.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Path {
    Direct,
    Chain,
}

/// One labelled value.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Side {
    pub label: String,
    pub path: Path,
    #[serde(with = "rational::pq")]
    pub value: Rational,
}

/// A group of values that must all coincide.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct EqualityCheck {
    pub label: String,
    pub sides: Vec<Side>,
}

impl EqualityCheck {
    pub fn new(label: impl Into<String>) -> Self {
        EqualityCheck {
            label: label.into(),
            sides: Vec::new(),
        }
    }

    pub fn direct(mut self, label: impl Into<String>, value: Rational) -> Self {
        self.sides.push(Side {
            label: label.into(),
            path: Path::Direct,
            value,
        });
        self
    }

    pub fn chain(mut self, label: impl Into<String>, value: Rational) -> Self {
        self.sides.push(Side {
            label: label.into(),
            path: Path::Chain,
            value,
        });
        self
    }

    pub fn chain_all(mut self, prefix: &str, values: &[Rational]) -> Self {
        for (i, v) in values.iter().enumerate() {
            self = self.chain(format!("{prefix}.v{i}"), v.clone());
        }
        self
    }

    pub fn equal(&self) -> bool {
        self.sides.windows(2).all(|w| w[0].value == w[1].value)
    }
}

/// Result of evaluating one identity.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct IdentityReport {
    pub identity: String,
    pub params: String,
    pub checks: Vec<EqualityCheck>,
    pub notes: Vec<String>,
}

impl IdentityReport {
    pub fn passed(&self) -> bool {
        !self.checks.is_empty() && self.checks.iter().all(EqualityCheck::equal)
    }
}

/// Per-point return and arrival times in both directions.
struct Times {
    rho: Vec<TimeValue>,
    rho_inv: Vec<TimeValue>,
    xi: Vec<TimeValue>,
    xi_inv: Vec<TimeValue>,
}

impl Times {
    fn new(system: &FiniteSystem, e: &PointSet) -> Self {
        let all = |f: &dyn Fn(usize) -> TimeValue| (0..system.len()).map(f).collect();
        Times {
            rho: all(&|p| return_time_dir(system, e, p, Direction::Forward)),
            rho_inv: all(&|p| return_time_dir(system, e, p, Direction::Inverse)),
            xi: all(&|p| arrival_time(system, e, p, Direction::Forward)),
            xi_inv: all(&|p| arrival_time(system, e, p, Direction::Inverse)),
        }
    }
}

fn measure_where(system: &FiniteSystem, pred: impl Fn(usize) -> bool) -> Rational {
    (0..system.len())
        .filter(|&p| pred(p))
        .fold(Rational::zero(), |acc, p| acc + system.weight(p))
}

fn integral_of(system: &FiniteSystem, f: impl Fn(usize) -> Rational) -> Rational {
    (0..system.len()).fold(Rational::zero(), |acc, p| acc + system.weight(p) * f(p))
}

fn ve(kernel: &ChainKernel, system: &FiniteSystem) -> Vec<Rational> {
    verify_ve(kernel, system).expectations
}

fn max_period(system: &FiniteSystem) -> u64 {
    (0..system.len())
        .map(|p| system.axis_period(TIME_AXIS, p) as u64)
        .max()
        .unwrap_or(1)
}

/// `Σ_{k<n} s(k)`; `None` when the table is too short.
fn partial_sum(s: &[Rational], n: u64) -> Option<Rational> {
    if n as usize > s.len() {
        return None;
    }
    Some(rational::sum(&s[..n as usize]))
}

fn s_at(s: &[Rational], t: TimeValue) -> Result<Rational, ReturnError> {
    match t {
        TimeValue::Infinite => Ok(Rational::zero()),
        TimeValue::Finite(k) => s.get(k as usize).cloned().ok_or(horizon(k + 1, s.len())),
    }
}

fn horizon(needed: u64, available: usize) -> ReturnError {
    ReturnError::Chain(ChainError::HorizonExceeded {
        needed,
        available: available as u64,
    })
}

fn fwd_seq(system: &FiniteSystem, e: &PointSet, p: usize, m: usize, dir: Direction) -> Vec<TimeValue> {
    sequence(system, e, p, m, dir, SequenceKind::Return)
}

fn finite_eq(seq: &[TimeValue], want: &[u64]) -> bool {
    seq.len() == want.len()
        && seq
            .iter()
            .zip(want)
            .all(|(t, &w)| *t == TimeValue::Finite(w))
}

/// Evaluates one catalog identity by both paths.
pub fn evaluate_identity(
    system: &FiniteSystem,
    params: &IdentityParams,
    id: Identity,
) -> Result<IdentityReport, ReturnError> {
    let sys = if system.dim() == 1 {
        system.clone()
    } else {
        system.axis_subsystem(TIME_AXIS)
    };
    let sys = &sys;
    let e = &params.e;
    if e.universe() != sys.len() {
        return Err(ReturnError::InvalidParameter("E has the wrong universe".into()));
    }
    let times = Times::new(sys, e);
    let period = max_period(sys);
    let mut notes = Vec::new();
    if system.dim() > 1 {
        notes.push("evaluated on the time-axis sub-action".to_string());
    }
    let checks = match id {
        Identity::Kac => {
            let kernel = chain::kac_kernel_with(sys, e, Coverage::Saturation)?;
            let v = ve(&kernel, sys);
            let int_rho = integral_of(sys, |p| rational::int(times.rho[p].finite().unwrap_or(0) as i64));
            vec![EqualityCheck::new("kac")
                .direct("int_E rho", int_rho)
                .direct("mu(satur E)", sys.measure(&sys.saturation(e)))
                .direct("mu(satur' E)", sys.measure(&sys.past_saturation(e)))
                .chain("kac.source", v[0].clone())
                .chain("kac.target", v[1].clone())]
        }
        Identity::InducedMp => {
            let f = params
                .f
                .clone()
                .unwrap_or_else(|| (0..sys.len()).map(|p| rational::int(p as i64 + 1)).collect());
            check_table(&f, sys.len(), "f")?;
            let map = induced_transform(sys, e)?;
            let lhs = integral_of(sys, |p| if e.contains(p) { f[p].clone() } else { Rational::zero() });
            let rhs = integral_of(sys, |p| match map.apply(p) {
                Some(q) => f[q].clone(),
                None => Rational::zero(),
            });
            let v = ve(&chain::induced_kernel(sys, e, &f), sys);
            let mut checks = vec![EqualityCheck::new("induced")
                .direct("int_E f", lhs)
                .direct("int_E f(T_E)", rhs)
                .chain("induced.v0", v[0].clone())
                .chain("induced.v1", v[1].clone())];
            let preserved = map.is_bijection() && map.preserves_conditional_measure(sys);
            checks.push(
                EqualityCheck::new("conditional-measure")
                    .direct("preserved", rational::int(preserved as i64))
                    .direct("expected", rational::int(1)),
            );
            checks
        }
        Identity::KacDist => {
            let ns: Vec<u64> = match params.n {
                Some(n) => vec![n],
                None => (0..=period).collect(),
            };
            let inv = sys.inverse();
            ns.into_iter()
                .map(|n| {
                    let p_rho = measure_where(sys, |p| {
                        e.contains(p) && times.rho[p].finite().map_or(true, |r| r > n)
                    });
                    let p_xi = measure_where(sys, |p| times.xi[p] == TimeValue::Finite(n));
                    let fwd = ve(&window_kernel_1d(sys, e, n, WindowVariant::FTriple), sys);
                    let bwd = ve(&window_kernel_1d(&inv, e, n, WindowVariant::FTriple), &inv);
                    let mut tail0 = Rational::zero();
                    let mut tail1 = Rational::zero();
                    for k in n + 1..=period {
                        let v = ve(&window_kernel_1d(sys, e, k, WindowVariant::FPrime), sys);
                        tail0 += &v[0];
                        tail1 += &v[1];
                    }
                    EqualityCheck::new(format!("n={n}"))
                        .direct("P(rho>n)", p_rho)
                        .direct("P(xi=n)", p_xi)
                        .chain("F'''.target", fwd[1].clone())
                        .chain("F'''.source", fwd[0].clone())
                        .chain("F'''inv.target", bwd[1].clone())
                        .chain("F'''inv.source", bwd[0].clone())
                        .chain("sum F'.target", tail1)
                        .chain("sum F'.source", tail0)
                })
                .collect()
        }
        Identity::InvDist => {
            let ns: Vec<u64> = match params.n {
                Some(n) => vec![n],
                None => (0..=period).collect(),
            };
            let mut checks = Vec::new();
            for n in ns {
                if n >= 1 {
                    let v = ve(&window_kernel_1d(sys, e, n, WindowVariant::FPrime), sys);
                    checks.push(
                        EqualityCheck::new(format!("rho n={n}"))
                            .direct(
                                "P(rho=n)",
                                measure_where(sys, |p| e.contains(p) && times.rho[p] == TimeValue::Finite(n)),
                            )
                            .direct(
                                "P(rho-=n)",
                                measure_where(sys, |p| {
                                    e.contains(p) && times.rho_inv[p] == TimeValue::Finite(n)
                                }),
                            )
                            .chain("F'.target", v[1].clone())
                            .chain("F'.source", v[0].clone()),
                    );
                }
                let v = ve(&window_kernel_1d(sys, e, n, WindowVariant::FDouble), sys);
                let gt = |t: TimeValue| t.finite().map_or(true, |k| k > n);
                checks.push(
                    EqualityCheck::new(format!("xi n={n}"))
                        .direct("P(xi>n)", measure_where(sys, |p| gt(times.xi[p])))
                        .direct("P(xi->n)", measure_where(sys, |p| gt(times.xi_inv[p])))
                        .chain("F''.target", v[1].clone())
                        .chain("F''.source", v[0].clone()),
                );
            }
            checks
        }
        Identity::SsDist => {
            let s = params.s.as_ref().ok_or(ReturnError::MissingParameter("s"))?;
            let ones = vec![rational::int(1); sys.len()];
            let big_s = |t: TimeValue| -> Result<Rational, ReturnError> {
                let k = t.finite().unwrap_or(0);
                partial_sum(s, k).ok_or(horizon(k, s.len()))
            };
            let mut es_xi = Rational::zero();
            let mut es_xi_inv = Rational::zero();
            let mut es_rho = Rational::zero();
            let mut es_rho_inv = Rational::zero();
            for p in 0..sys.len() {
                let w = sys.weight(p);
                es_xi += w * s_at(s, times.xi[p])?;
                es_xi_inv += w * s_at(s, times.xi_inv[p])?;
                es_rho += w * big_s(times.rho[p])?;
                es_rho_inv += w * big_s(times.rho_inv[p])?;
            }
            let inv = sys.inverse();
            let k = weighted_kac_kernel_with(sys, e, &ones, s, WeightAnchor::Source, Coverage::Saturation)?;
            let ki = weighted_kac_kernel_with(&inv, e, &ones, s, WeightAnchor::Source, Coverage::Saturation)?;
            let v = ve(&k, sys);
            let vi = ve(&ki, &inv);
            vec![EqualityCheck::new("ssdist")
                .direct("E s(xi)", es_xi)
                .direct("E s(xi-)", es_xi_inv)
                .direct("E S(rho)", es_rho)
                .direct("E S(rho-)", es_rho_inv)
                .chain("kac.source", v[0].clone())
                .chain("kac.target", v[1].clone())
                .chain("kacinv.source", vi[0].clone())
                .chain("kacinv.target", vi[1].clone())]
        }
        Identity::Sf | Identity::Ssf => {
            let s = params.s.as_ref().ok_or(ReturnError::MissingParameter("s"))?;
            let f = params.f.as_ref().ok_or(ReturnError::MissingParameter("f"))?;
            check_table(f, sys.len(), "f")?;
            let mut lhs = Rational::zero();
            let mut rhs = Rational::zero();
            for p in 0..sys.len() {
                let w = sys.weight(p);
                if let TimeValue::Finite(j) = times.xi_inv[p] {
                    let fv = if id == Identity::Sf {
                        &f[p]
                    } else {
                        &f[sys.step(TIME_AXIS, -(j as i64), p)]
                    };
                    lhs += w * fv * s_at(s, times.xi_inv[p])?;
                }
                if e.contains(p) {
                    let r = times.rho[p].finite().unwrap_or(0);
                    let inner = if id == Identity::Sf {
                        let mut acc = Rational::zero();
                        for k in 0..r {
                            let sk = s.get(k as usize).ok_or(horizon(k + 1, s.len()))?;
                            acc += &f[sys.step(TIME_AXIS, k as i64, p)] * sk;
                        }
                        acc
                    } else {
                        &f[p] * partial_sum(s, r).ok_or(horizon(r, s.len()))?
                    };
                    rhs += w * inner;
                }
            }
            let anchor = if id == Identity::Sf {
                WeightAnchor::Source
            } else {
                WeightAnchor::Target
            };
            let v = ve(
                &weighted_kac_kernel_with(sys, e, f, s, anchor, Coverage::Saturation)?,
                sys,
            );
            let label = if id == Identity::Sf { "sf" } else { "ssf" };
            vec![EqualityCheck::new(label)
                .direct("source side", lhs)
                .direct("target side", rhs)
                .chain("kac.source", v[0].clone())
                .chain("kac.target", v[1].clone())]
        }
        Identity::TwoSets => {
            let e1 = e;
            let e2 = params.e2.as_ref().ok_or(ReturnError::MissingParameter("e2"))?;
            if e2.universe() != sys.len() {
                return Err(ReturnError::InvalidParameter("E2 has the wrong universe".into()));
            }
            let fwd1: Vec<TimeValue> = (0..sys.len())
                .map(|p| first_hit_time(sys, e1, p, Direction::Forward))
                .collect();
            let inv2: Vec<TimeValue> = (0..sys.len())
                .map(|p| first_hit_time(sys, e2, p, Direction::Inverse))
                .collect();
            let t2 = Times::new(sys, e2);
            let first = integral_of(sys, |p| {
                match (e2.contains(p), fwd1[p], t2.rho[p]) {
                    (true, TimeValue::Finite(a), TimeValue::Finite(b)) if a <= b => rational::int(a as i64 - 1),
                    _ => Rational::zero(),
                }
            });
            let second = integral_of(sys, |p| {
                match (e1.contains(p), inv2[p], times.rho_inv[p]) {
                    (true, TimeValue::Finite(a), TimeValue::Finite(b)) if a <= b => rational::int(a as i64 - 1),
                    _ => Rational::zero(),
                }
            });
            let sat = sys.saturation(e1).intersection(&sys.saturation(e2));
            let le_pos = |a: TimeValue, b: TimeValue| match (a, b) {
                (TimeValue::Finite(a), TimeValue::Finite(b)) => a > 0 && a <= b,
                _ => false,
            };
            let third = measure_where(sys, |p| {
                sat.contains(p) && le_pos(times.xi[p], t2.xi[p]) && le_pos(t2.xi_inv[p], times.xi_inv[p])
            });
            let v = ve(&two_sets_kernel_with(sys, e1, e2, Coverage::Saturation)?, sys);
            vec![EqualityCheck::new("twosets")
                .direct("int_E2 (xi_E1 - 1)", first)
                .direct("int_E1 (xi-_E2 - 1)", second)
                .direct("mu(straddle set)", third)
                .chain("v2", v[2].clone())
                .chain("v1", v[1].clone())
                .chain("v0", v[0].clone())]
        }
        Identity::JointA => {
            let r = &params.gaps;
            check_gaps(r, false)?;
            let m = r.len();
            let mut check = EqualityCheck::new("joint-a");
            for p_split in 0..=m {
                let fwd_want = &r[p_split..];
                let inv_want: Vec<u64> = r[..p_split].iter().rev().copied().collect();
                let val = measure_where(sys, |p| {
                    e.contains(p)
                        && finite_eq(&fwd_seq(sys, e, p, m - p_split, Direction::Forward), fwd_want)
                        && finite_eq(&fwd_seq(sys, e, p, p_split, Direction::Inverse), &inv_want)
                });
                check = check.direct(format!("p={p_split}"), val);
            }
            let v = ve(&joint_kernel(sys, e, &JointSpec::all_in_e(r.clone()))?, sys);
            vec![check.chain_all("a", &v)]
        }
        Identity::JointB => {
            let r = &params.gaps;
            check_gaps(r, true)?;
            let m = r.len();
            let r1 = r[0];
            let tail = &r[1..];
            let lhs = measure_where(sys, |p| {
                if !e.contains(p) {
                    return false;
                }
                let seq = fwd_seq(sys, e, p, m, Direction::Forward);
                seq[0].finite().map_or(true, |k| k > r1) && finite_eq(&seq[1..], tail)
            });
            let rhs = measure_where(sys, |p| {
                finite_eq(&sequence(sys, e, p, m, Direction::Forward, SequenceKind::Arrival), r)
            });
            let mid = measure_where(sys, |p| {
                e.contains(p)
                    && times.rho_inv[p].finite().map_or(true, |k| k > r1)
                    && finite_eq(&fwd_seq(sys, e, p, m - 1, Direction::Forward), tail)
            });
            let mut sum0 = Rational::zero();
            let mut sum1 = Rational::zero();
            for first in r1 + 1..=period {
                let mut g = vec![first];
                g.extend_from_slice(tail);
                let v = ve(&joint_kernel(sys, e, &JointSpec::all_in_e(g))?, sys);
                sum0 += &v[0];
                sum1 += &v[1];
            }
            let mut check = EqualityCheck::new("joint-b")
                .direct("P(rho>r1, ...)", lhs)
                .direct("P(xi seq)", rhs)
                .direct("P(rho->r1, ...)", mid)
                .chain("sum a.v0", sum0)
                .chain("sum a.v1", sum1);
            if r1 >= 1 {
                let v = ve(&joint_kernel(sys, e, &JointSpec::first_outside(r.clone()))?, sys);
                check = check.chain("b.v0", v[0].clone()).chain("b.v1", v[1].clone());
            } else {
                notes.push("r1 = 0: the outside-vertex hypergraph is empty".into());
            }
            vec![check]
        }
        Identity::JointC | Identity::KacDec => {
            let r = &params.gaps;
            let rb = &params.back_gaps;
            check_gaps(r, false)?;
            check_gaps(rb, false)?;
            if id == Identity::KacDec && (r.len() != 1 || rb.len() != 1) {
                return Err(ReturnError::InvalidParameter(
                    "KACDEC takes one forward and one backward gap".into(),
                ));
            }
            let lhs = measure_where(sys, |p| {
                finite_eq(&sequence(sys, e, p, r.len(), Direction::Forward, SequenceKind::Arrival), r)
                    && finite_eq(
                        &sequence(sys, e, p, rb.len(), Direction::Inverse, SequenceKind::Arrival),
                        rb,
                    )
            });
            let mut merged: Vec<u64> = rb[1..].iter().rev().copied().collect();
            merged.push(r[0] + rb[0]);
            merged.extend_from_slice(&r[1..]);
            let rhs = measure_where(sys, |p| {
                e.contains(p) && finite_eq(&fwd_seq(sys, e, p, merged.len(), Direction::Forward), &merged)
            });
            let straddle = ve(&joint_kernel(sys, e, &JointSpec::straddle(r, rb))?, sys);
            let merged_v = ve(&joint_kernel(sys, e, &JointSpec::all_in_e(merged.clone()))?, sys);
            let label = if id == Identity::KacDec { "kacdec" } else { "joint-c" };
            let mut check = EqualityCheck::new(label)
                .direct("P(xi seqs)", lhs)
                .direct("P[merged]", rhs)
                .chain_all("c", &straddle)
                .chain("a.v0", merged_v[0].clone());
            if id == Identity::KacDec {
                let w = ve(&window_kernel_1d(sys, e, r[0] + rb[0], WindowVariant::FPrime), sys);
                check = check.chain("F'.target", w[1].clone()).chain("F'.source", w[0].clone());
            }
            vec![check]
        }
        Identity::JointE => {
            let r = &params.gaps;
            check_gaps(r, false)?;
            let m = r.len();
            let lhs = measure_where(sys, |p| {
                e.contains(p) && finite_eq(&fwd_seq(sys, e, p, m, Direction::Forward), r)
            });
            let rhs = measure_where(sys, |p| {
                e.contains(p) && finite_eq(&fwd_seq(sys, e, p, m + 1, Direction::Forward)[1..], r)
            });
            let mut sum0 = Rational::zero();
            let mut sum1 = Rational::zero();
            for first in 1..=period {
                let mut g = vec![first];
                g.extend_from_slice(r);
                let v = ve(&joint_kernel(sys, e, &JointSpec::all_in_e(g))?, sys);
                sum0 += &v[0];
                sum1 += &v[1];
            }
            let v = ve(&joint_kernel(sys, e, &JointSpec::all_in_e(r.clone()))?, sys);
            notes.push("sides are unnormalized measures on E".into());
            vec![EqualityCheck::new("joint-e")
                .direct("P(rho(1..m)=r)", lhs)
                .direct("P(rho(2..m+1)=r)", rhs)
                .chain("sum a.v0", sum0)
                .chain("sum a.v1", sum1)
                .chain("a.v0", v[0].clone())]
        }
    };
    Ok(IdentityReport {
        identity: id.name().to_string(),
        params: params.describe(id),
        checks,
        notes,
    })
}

fn check_table(f: &[Rational], n: usize, name: &str) -> Result<(), ReturnError> {
    if f.len() != n {
        return Err(ReturnError::InvalidParameter(format!(
            "{name} table has {} entries, system has {n} points",
            f.len()
        )));
    }
    if f.iter().any(|v| !rational::is_nonneg(v)) {
        return Err(ReturnError::InvalidParameter(format!("{name} must be nonnegative")));
    }
    Ok(())
}

/// Gap vectors must be nonempty with positive entries; the first entry may be
/// zero when `allow_zero_first` is set.
fn check_gaps(r: &[u64], allow_zero_first: bool) -> Result<(), ReturnError> {
    if r.is_empty() {
        return Err(ReturnError::MissingParameter("gaps"));
    }
    if (r[0] == 0 && !allow_zero_first) || r[1..].contains(&0) {
        return Err(ReturnError::InvalidParameter("gaps must be positive".into()));
    }
    Ok(())
}
