//! Equidecomposability of functions on finite systems, by exact LP.
//!
//! `f` and `g` are equidecomposable over a window `X` when some nonnegative
//! family `(f_x)_{x ∈ X}` has `Σ f_x = f` and `Σ f_x ∘ T^{-x} = g`. Two
//! variables `f_x(ω)`, `f_y(ω)` with `xω = yω` enter both systems through the
//! same rows, so the LP carries one column per pair `(ω, xω)` and the witness
//! puts the mass on the first `x` realizing the pair.

use crate::action::{FiniteSystem, GroupElement};
use crate::lp::{LinearProgram, LpOutcome, Relation};
use crate::rational::{self, Rational};
use num_traits::{One, Signed, Zero};
use serde::Serialize;
use std::collections::{BTreeMap, HashSet, VecDeque};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum EquidecompError {
    #[error("window too small: the problem is infeasible on this window although every orbit balances")]
    WindowTooSmall,
    #[error("invalid input: {0}")]
    Invalid(String),
}

/// One group element per distinct permutation of the points, found by
/// breadth-first search from 0 along the positive generators.
pub fn group_representatives(system: &FiniteSystem) -> Vec<GroupElement> {
    let d = system.dim();
    let n = system.len();
    let identity: Vec<usize> = (0..n).collect();
    let mut seen: HashSet<Vec<usize>> = HashSet::from([identity.clone()]);
    let mut out = vec![GroupElement::zero(d)];
    let mut queue = VecDeque::from([(GroupElement::zero(d), identity)]);
    while let Some((x, perm)) = queue.pop_front() {
        for axis in 0..d {
            let g = system.generator(axis);
            let next: Vec<usize> = perm.iter().map(|&p| g[p]).collect();
            if seen.insert(next.clone()) {
                let y = &x + &GroupElement::axis(d, axis, 1);
                out.push(y.clone());
                queue.push_back((y, next));
            }
        }
    }
    out
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct DecompositionWitness {
    pub window: Vec<GroupElement>,
    /// `family[k][ω] = f_{window[k]}(ω)`.
    #[serde(serialize_with = "ser_matrix")]
    pub family: Vec<Vec<Rational>>,
}

fn ser_matrix<S: serde::Serializer>(m: &[Vec<Rational>], s: S) -> Result<S::Ok, S::Error> {
    let strs: Vec<Vec<String>> = m.iter().map(|r| r.iter().map(rational::to_pq).collect()).collect();
    serde::Serialize::serialize(&strs, s)
}

impl DecompositionWitness {
    /// Plugs the family into both constraint systems.
    pub fn verify(&self, system: &FiniteSystem, f: &[Rational], g: &[Rational]) -> bool {
        let n = system.len();
        if self.family.len() != self.window.len() || self.family.iter().any(|r| r.len() != n) {
            return false;
        }
        if self.family.iter().flatten().any(|v| v.is_negative()) {
            return false;
        }
        (0..n).all(|w| {
            let sum_f = self.family.iter().fold(Rational::zero(), |acc, r| acc + &r[w]);
            let sum_g = self
                .window
                .iter()
                .zip(&self.family)
                .fold(Rational::zero(), |acc, (x, r)| acc + &r[system.act(&-x, w)]);
            sum_f == f[w] && sum_g == g[w]
        })
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct SeparatingCertificate {
    #[serde(with = "rational::pq_vec")]
    pub nu: Vec<Rational>,
    #[serde(with = "rational::pq")]
    pub f_integral: Rational,
    #[serde(with = "rational::pq")]
    pub g_integral: Rational,
}

impl SeparatingCertificate {
    /// `ν` is an invariant probability vector and separates `f` from `g`.
    pub fn verify(&self, system: &FiniteSystem, f: &[Rational], g: &[Rational]) -> bool {
        let n = system.len();
        if self.nu.len() != n || self.nu.iter().any(|v| v.is_negative()) {
            return false;
        }
        if rational::sum(&self.nu) != Rational::one() {
            return false;
        }
        let invariant = (0..system.dim()).all(|i| (0..n).all(|w| self.nu[system.generator(i)[w]] == self.nu[w]));
        let dot = |h: &[Rational]| self.nu.iter().zip(h).fold(Rational::zero(), |acc, (a, b)| acc + a * b);
        invariant && dot(f) == self.f_integral && dot(g) == self.g_integral && self.f_integral != self.g_integral
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
#[serde(tag = "verdict", rename_all = "lowercase")]
pub enum Decomposition {
    Witness(DecompositionWitness),
    Certificate(SeparatingCertificate),
}

fn check_vec(system: &FiniteSystem, v: &[Rational], name: &str, nonneg: bool) -> Result<(), EquidecompError> {
    if v.len() != system.len() {
        return Err(EquidecompError::Invalid(format!(
            "{name} has {} entries, expected {}",
            v.len(),
            system.len()
        )));
    }
    if nonneg && v.iter().any(|x| x.is_negative()) {
        return Err(EquidecompError::Invalid(format!("{name} must be nonnegative")));
    }
    Ok(())
}

fn resolve_window(system: &FiniteSystem, window: Option<&[GroupElement]>) -> Result<Vec<GroupElement>, EquidecompError> {
    let w = match window {
        Some(w) => w.to_vec(),
        None => group_representatives(system),
    };
    if w.is_empty() {
        return Err(EquidecompError::Invalid("empty window".into()));
    }
    if w.iter().any(|x| x.dim() != system.dim()) {
        return Err(EquidecompError::Invalid("window element has the wrong dimension".into()));
    }
    Ok(w)
}

/// Distinct `(source, target, first window index)` transport columns.
fn transport_columns(system: &FiniteSystem, window: &[GroupElement]) -> Vec<(usize, usize, usize)> {
    let mut cols: BTreeMap<(usize, usize), usize> = BTreeMap::new();
    for (k, x) in window.iter().enumerate() {
        for w in 0..system.len() {
            cols.entry((w, system.act(x, w))).or_insert(k);
        }
    }
    cols.into_iter().map(|((s, t), k)| (s, t, k)).collect()
}

fn transport_rows(
    lp: &mut LinearProgram,
    cols: &[(usize, usize, usize)],
    n: usize,
    f: &[Rational],
) -> Vec<Vec<(usize, Rational)>> {
    let mut by_source = vec![Vec::new(); n];
    let mut by_target = vec![Vec::new(); n];
    for (j, &(s, t, _)) in cols.iter().enumerate() {
        by_source[s].push((j, Rational::one()));
        by_target[t].push((j, Rational::one()));
    }
    for (w, terms) in by_source.into_iter().enumerate() {
        lp.add(terms, Relation::Eq, f[w].clone());
    }
    by_target
}

fn witness_from(
    system: &FiniteSystem,
    window: Vec<GroupElement>,
    cols: &[(usize, usize, usize)],
    x: &[Rational],
) -> DecompositionWitness {
    let mut family = vec![vec![Rational::zero(); system.len()]; window.len()];
    for (j, &(s, _, k)) in cols.iter().enumerate() {
        family[k][s] += &x[j];
    }
    DecompositionWitness { window, family }
}

/// Orbit averages `Σ_O h / |O|`, one per orbit.
pub fn orbit_averages(system: &FiniteSystem, h: &[Rational]) -> Vec<Rational> {
    system
        .orbits()
        .iter()
        .map(|o| o.iter().fold(Rational::zero(), |acc, &p| acc + &h[p]) / rational::int(o.len() as i64))
        .collect()
}

fn separating_orbit(system: &FiniteSystem, f: &[Rational], g: &[Rational]) -> Option<SeparatingCertificate> {
    for orbit in system.orbits() {
        let sf = orbit.iter().fold(Rational::zero(), |acc, &p| acc + &f[p]);
        let sg = orbit.iter().fold(Rational::zero(), |acc, &p| acc + &g[p]);
        if sf != sg {
            let size = rational::int(orbit.len() as i64);
            let mut nu = vec![Rational::zero(); system.len()];
            for &p in &orbit {
                nu[p] = Rational::one() / &size;
            }
            return Some(SeparatingCertificate {
                nu,
                f_integral: sf / &size,
                g_integral: sg / size,
            });
        }
    }
    None
}

/// Witness when the LP is feasible, otherwise an invariant probability
/// vector integrating `f` and `g` differently.
pub fn find_equidecomposition(
    system: &FiniteSystem,
    f: &[Rational],
    g: &[Rational],
    window: Option<&[GroupElement]>,
) -> Result<Decomposition, EquidecompError> {
    check_vec(system, f, "f", true)?;
    check_vec(system, g, "g", true)?;
    let window = resolve_window(system, window)?;
    let n = system.len();
    let cols = transport_columns(system, &window);
    let mut lp = LinearProgram::new(cols.len());
    let by_target = transport_rows(&mut lp, &cols, n, f);
    for (w, terms) in by_target.into_iter().enumerate() {
        lp.add(terms, Relation::Eq, g[w].clone());
    }
    match lp.solve() {
        LpOutcome::Optimal { x, .. } => Ok(Decomposition::Witness(witness_from(system, window, &cols, &x))),
        LpOutcome::Infeasible => separating_orbit(system, f, g)
            .map(Decomposition::Certificate)
            .ok_or(EquidecompError::WindowTooSmall),
        LpOutcome::Unbounded => unreachable!("feasibility problem has no objective"),
    }
}

/// Supremum of `∫ f dν` over invariant probability vectors: the largest
/// orbit average.
pub fn sup_invariant_integral(system: &FiniteSystem, f: &[Rational]) -> Rational {
    orbit_averages(system, f).into_iter().max().expect("nonempty system")
}

/// Least `max g` over all `g` equidecomposable with `f` on the window.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct MinEquiMax {
    #[serde(with = "rational::pq")]
    pub value: Rational,
    pub witness: DecompositionWitness,
}

pub fn min_equi_max(
    system: &FiniteSystem,
    f: &[Rational],
    window: Option<&[GroupElement]>,
) -> Result<MinEquiMax, EquidecompError> {
    check_vec(system, f, "f", true)?;
    let window = resolve_window(system, window)?;
    let n = system.len();
    let cols = transport_columns(system, &window);
    let t = cols.len();
    let mut lp = LinearProgram::new(cols.len() + 1);
    let by_target = transport_rows(&mut lp, &cols, n, f);
    for mut terms in by_target {
        terms.push((t, -Rational::one()));
        lp.add(terms, Relation::Le, Rational::zero());
    }
    lp.minimize(vec![(t, Rational::one())]);
    let LpOutcome::Optimal { x, value } = lp.solve() else {
        unreachable!("the identity decomposition is feasible and t >= 0 bounds the objective");
    };
    if value > sup_invariant_integral(system, f) {
        return Err(EquidecompError::WindowTooSmall);
    }
    Ok(MinEquiMax {
        value,
        witness: witness_from(system, window, &cols, &x[..t]),
    })
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct AverageNorm {
    #[serde(with = "rational::pq")]
    pub value: Rational,
    pub window: Vec<GroupElement>,
    #[serde(with = "rational::pq_vec")]
    pub weights: Vec<Rational>,
}

/// Least pointwise maximum over averages `Σ λ_x v ∘ T^{-x}` on the window.
pub fn average_norm_a(
    system: &FiniteSystem,
    v: &[Rational],
    window: Option<&[GroupElement]>,
) -> Result<AverageNorm, EquidecompError> {
    check_vec(system, v, "v", false)?;
    let window = resolve_window(system, window)?;
    let k = window.len();
    let (tp, tm) = (k, k + 1);
    let mut lp = LinearProgram::new(k + 2);
    lp.add((0..k).map(|j| (j, Rational::one())).collect(), Relation::Eq, Rational::one());
    for w in 0..system.len() {
        let mut terms: Vec<(usize, Rational)> = window
            .iter()
            .enumerate()
            .map(|(j, x)| (j, v[system.act(&-x, w)].clone()))
            .filter(|(_, a)| !a.is_zero())
            .collect();
        terms.push((tp, -Rational::one()));
        terms.push((tm, Rational::one()));
        lp.add(terms, Relation::Le, Rational::zero());
    }
    lp.minimize(vec![(tp, Rational::one()), (tm, -Rational::one())]);
    let LpOutcome::Optimal { x, value } = lp.solve() else {
        unreachable!("the value is bounded below by the least entry of v");
    };
    Ok(AverageNorm {
        value,
        window,
        weights: x[..k].to_vec(),
    })
}

/// Parses `x1;x2;...` with each element written `a,b,...`.
pub fn parse_window(s: &str, d: usize) -> Result<Vec<GroupElement>, EquidecompError> {
    s.split(';')
        .map(|part| {
            let coords: Result<Vec<i64>, _> = part.split(',').map(|c| c.trim().parse::<i64>()).collect();
            match coords {
                Ok(c) if c.len() == d => Ok(GroupElement(c)),
                _ => Err(EquidecompError::Invalid(format!("bad window element `{part}`"))),
            }
        })
        .collect()
}
