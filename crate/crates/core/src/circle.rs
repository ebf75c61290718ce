//! Continuous-time returns on the circle `R/Z` under unit-speed rotation, and
//! crossing rates of linear flows on the 2-torus.

use crate::mc::{self, McEstimate};
use crate::rational::{self, Rational};
use num_traits::{One, Signed, Zero};
use rand::Rng;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum CircleError {
    #[error("invalid arc: {0}")]
    InvalidArc(String),
    #[error("arcs overlap or touch")]
    Overlap,
    #[error("arcs cover the whole circle")]
    FullMeasure,
    #[error("s = {s} is not below the threshold {threshold}")]
    GapTooSmall { s: String, threshold: String },
    #[error("invalid parameter: {0}")]
    Invalid(String),
}

/// Closed arc `[start, start + length]` taken mod 1.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Arc {
    #[serde(with = "rational::pq")]
    pub start: Rational,
    #[serde(with = "rational::pq")]
    pub length: Rational,
}

/// Disjoint closed arcs sorted by start point, total length below 1.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct ArcUnion {
    arcs: Vec<Arc>,
}

fn frac(r: &Rational) -> Rational {
    r - r.floor()
}

impl ArcUnion {
    pub fn empty() -> Self {
        ArcUnion { arcs: Vec::new() }
    }

    /// Arcs given by endpoints `[a, b]`, read counterclockwise from `a`.
    pub fn from_endpoints(pairs: &[(Rational, Rational)]) -> Result<Self, CircleError> {
        let mut arcs: Vec<Arc> = pairs
            .iter()
            .map(|(a, b)| {
                let start = frac(a);
                let length = frac(&(b - a));
                if length.is_zero() {
                    return Err(CircleError::InvalidArc(format!(
                        "[{}, {}] has no length",
                        rational::to_pq(a),
                        rational::to_pq(b)
                    )));
                }
                Ok(Arc { start, length })
            })
            .collect::<Result<_, _>>()?;
        arcs.sort_by(|x, y| x.start.cmp(&y.start));
        let u = ArcUnion { arcs };
        if u.measure() >= Rational::one() {
            return Err(CircleError::FullMeasure);
        }
        if u.gaps().iter().any(|g| !g.is_positive()) {
            return Err(CircleError::Overlap);
        }
        Ok(u)
    }

    /// Parses `a:b` pairs separated by commas, e.g. `0:3/10,1/2:7/10`.
    pub fn parse(s: &str) -> Result<Self, CircleError> {
        if s.trim().is_empty() {
            return Ok(ArcUnion::empty());
        }
        let pairs = s
            .split(',')
            .map(|p| {
                let (a, b) = p
                    .split_once(':')
                    .ok_or_else(|| CircleError::InvalidArc(format!("`{p}` is not a:b")))?;
                let a = rational::parse_rational(a).map_err(|e| CircleError::InvalidArc(e.to_string()))?;
                let b = rational::parse_rational(b).map_err(|e| CircleError::InvalidArc(e.to_string()))?;
                Ok((a, b))
            })
            .collect::<Result<Vec<_>, CircleError>>()?;
        ArcUnion::from_endpoints(&pairs)
    }

    pub fn arcs(&self) -> &[Arc] {
        &self.arcs
    }

    pub fn len(&self) -> usize {
        self.arcs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.arcs.is_empty()
    }

    pub fn measure(&self) -> Rational {
        self.arcs.iter().fold(Rational::zero(), |acc, a| acc + &a.length)
    }

    /// Exit point of each arc.
    pub fn exits(&self) -> Vec<Rational> {
        self.arcs.iter().map(|a| frac(&(&a.start + &a.length))).collect()
    }

    /// Gap following each arc, up to the start of the next one.
    pub fn gaps(&self) -> Vec<Rational> {
        let k = self.arcs.len();
        (0..k)
            .map(|i| {
                let end = &self.arcs[i].start + &self.arcs[i].length;
                let next = if i + 1 < k {
                    self.arcs[i + 1].start.clone()
                } else {
                    &self.arcs[0].start + Rational::one()
                };
                next - end
            })
            .collect()
    }

    pub fn contains(&self, x: &Rational) -> bool {
        let x = frac(x);
        self.arcs.iter().any(|a| {
            let off = frac(&(&x - &a.start));
            off <= a.length
        })
    }

    pub fn to_spec(&self) -> String {
        self.arcs
            .iter()
            .map(|a| format!("{}:{}", rational::to_pq(&a.start), rational::to_pq(&frac(&(&a.start + &a.length)))))
            .collect::<Vec<_>>()
            .join(",")
    }
}

/// Sum over exit points of the gap to the next arc: the enhanced return
/// function integrated against the exit-counting measure.
pub fn circle_enhanced_return(e: &ArcUnion) -> Rational {
    rational::sum(&e.gaps())
}

/// Window estimator: for `ω` uniform, the return gaps of all exits in
/// `[0, T)` summed and divided by `T`.
pub fn circle_window_mc(e: &ArcUnion, t: &Rational, samples: u64, seed: u64) -> Result<McEstimate, CircleError> {
    if !t.is_positive() {
        return Err(CircleError::Invalid("T must be positive".into()));
    }
    let exits: Vec<f64> = e.exits().iter().map(rational::to_f64).collect();
    let gaps: Vec<f64> = e.gaps().iter().map(rational::to_f64).collect();
    let tf = rational::to_f64(t);
    Ok(mc::run(samples, seed, |r| {
        let omega: f64 = r.gen();
        let mut total = 0.0;
        for (b, g) in exits.iter().zip(&gaps) {
            let first = (b - omega).rem_euclid(1.0);
            if first < tf {
                total += (tf - first).ceil() * g;
            }
        }
        total / tf
    }))
}

fn min_of(v: &[Rational]) -> Option<Rational> {
    v.iter().min().cloned()
}

/// `(1/s)·∫_{E_s} r_E dμ` with `E_s` the points that left `E` at most `s`
/// ago and `r_E` the remaining wait to re-enter: `(1 - μ(E)) - k·s/2`.
pub fn helmberg_functional(e: &ArcUnion, s: &Rational) -> Result<Rational, CircleError> {
    check_s(e, s, min_of(&e.gaps()))?;
    let k = rational::int(e.len() as i64);
    Ok(circle_enhanced_return(e) - k * s / rational::int(2))
}

/// Variant with `E_s` the points of `E` exiting within time `s` and `r_E`
/// the wait to exit plus the following gap: `(1 - μ(E)) + k·s/2`.
pub fn helmberg_functional_forward(e: &ArcUnion, s: &Rational) -> Result<Rational, CircleError> {
    let lengths: Vec<Rational> = e.arcs.iter().map(|a| a.length.clone()).collect();
    let threshold = min_of(&lengths);
    check_s(e, s, threshold)?;
    let k = rational::int(e.len() as i64);
    Ok(circle_enhanced_return(e) + k * s / rational::int(2))
}

fn check_s(e: &ArcUnion, s: &Rational, threshold: Option<Rational>) -> Result<(), CircleError> {
    if e.is_empty() {
        return Err(CircleError::Invalid("E is empty".into()));
    }
    if !s.is_positive() {
        return Err(CircleError::Invalid("s must be positive".into()));
    }
    let threshold = threshold.expect("nonempty union");
    if *s >= threshold {
        return Err(CircleError::GapTooSmall {
            s: rational::to_pq(s),
            threshold: rational::to_pq(&threshold),
        });
    }
    Ok(())
}

/// Functional values at `s = 2^{-j}` for every admissible `j <= j_max`.
pub fn helmberg_dyadic_sequence(e: &ArcUnion, j_max: u32) -> Vec<(u32, Rational)> {
    (0..=j_max)
        .filter_map(|j| {
            let s = Rational::new(One::one(), num_traits::pow(num_bigint::BigInt::from(2), j as usize));
            helmberg_functional(e, &s).ok().map(|v| (j, v))
        })
        .collect()
}

/// Random union of `k` arcs with endpoints on the grid `1/den`.
pub fn random_arc_union<R: Rng>(rng: &mut R, k: usize, den: i64) -> ArcUnion {
    assert!(k >= 1 && den >= 2 * k as i64 + 1, "grid too coarse");
    loop {
        let mut cuts: Vec<i64> = (0..2 * k).map(|_| rng.gen_range(0..den)).collect();
        cuts.sort_unstable();
        cuts.dedup();
        if cuts.len() != 2 * k {
            continue;
        }
        let shift = rng.gen_range(0..den);
        let pairs: Vec<(Rational, Rational)> = cuts
            .chunks(2)
            .map(|c| (rational::ratio(c[0] + shift, den), rational::ratio(c[1] + shift, den)))
            .collect();
        if let Ok(u) = ArcUnion::from_endpoints(&pairs) {
            return u;
        }
    }
}

/// Expected crossings per unit time of a straight segment with displacement
/// `delta` by the flow with velocity `(a, b)`.
pub fn flow_crossing_rate(a: f64, b: f64, delta: (f64, f64)) -> f64 {
    (a * delta.1 - b * delta.0).abs()
}

fn cross(u: (f64, f64), w: (f64, f64)) -> f64 {
    u.0 * w.1 - u.1 * w.0
}

/// Crossings of the segment `p0 + λΔ`, `λ ∈ [0, 1)`, by the flow line
/// `x0 + τv`, `τ ∈ [0, T)`, counted over all lattice translates.
pub fn count_crossings(x0: (f64, f64), v: (f64, f64), t: f64, p0: (f64, f64), delta: (f64, f64)) -> u64 {
    let det = cross(v, delta);
    let scale = (v.0.abs() + v.1.abs()) * (delta.0.abs() + delta.1.abs());
    if det.abs() <= 1e-14 * scale {
        return 0;
    }
    let line_end = (x0.0 + t * v.0, x0.1 + t * v.1);
    let seg_end = (p0.0 + delta.0, p0.1 + delta.1);
    let range = |l0: f64, l1: f64, s0: f64, s1: f64| {
        let lo = (l0.min(l1) - s0.max(s1)).floor() as i64 - 1;
        let hi = (l0.max(l1) - s0.min(s1)).ceil() as i64 + 1;
        lo..=hi
    };
    let mut count = 0;
    for m0 in range(x0.0, line_end.0, p0.0, seg_end.0) {
        for m1 in range(x0.1, line_end.1, p0.1, seg_end.1) {
            let w = (x0.0 - p0.0 - m0 as f64, x0.1 - p0.1 - m1 as f64);
            let tau = cross(delta, w) / det;
            let lambda = cross(v, w) / det;
            if (0.0..t).contains(&tau) && (0.0..1.0).contains(&lambda) {
                count += 1;
            }
        }
    }
    count
}

/// Crossing rate of the segment `p0 → p1` by the flow `(a, b)` started at a
/// uniform point, averaged over `[0, T)`.
pub fn torus_flow_crossings(
    a: f64,
    b: f64,
    p0: (f64, f64),
    p1: (f64, f64),
    t: f64,
    samples: u64,
    seed: u64,
) -> Result<McEstimate, CircleError> {
    if a == 0.0 && b == 0.0 {
        return Err(CircleError::Invalid("flow velocity is zero".into()));
    }
    if !(t > 0.0 && t.is_finite()) {
        return Err(CircleError::Invalid("T must be positive".into()));
    }
    let delta = (p1.0 - p0.0, p1.1 - p0.1);
    Ok(mc::run(samples, seed, |r| {
        let x0 = (r.gen::<f64>(), r.gen::<f64>());
        count_crossings(x0, (a, b), t, p0, delta) as f64 / t
    }))
}
