//! Stationary renewal processes on R and their Palm identities.

use crate::mc::{self, McEstimate};
use crate::rational::{self, Rational};
use num_integer::Integer;
use num_traits::{One, Signed, Zero};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum RenewalError {
    #[error("invalid distribution: {0}")]
    InvalidDistribution(String),
    #[error("lattice distribution with span {span}: window length {c} is not a multiple")]
    PeriodicDistribution { span: u64, c: String },
    #[error("invalid parameter: {0}")]
    Invalid(String),
}

/// Law of the gaps between epochs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum RenewalDistribution {
    Exponential {
        rate: f64,
    },
    UniformCont {
        a: f64,
        b: f64,
    },
    DiscreteLattice {
        support: Vec<u64>,
        #[serde(with = "rational::pq_vec")]
        probs: Vec<Rational>,
    },
}

impl RenewalDistribution {
    pub fn exponential(rate: f64) -> Result<Self, RenewalError> {
        let d = RenewalDistribution::Exponential { rate };
        d.validate()?;
        Ok(d)
    }

    pub fn uniform(a: f64, b: f64) -> Result<Self, RenewalError> {
        let d = RenewalDistribution::UniformCont { a, b };
        d.validate()?;
        Ok(d)
    }

    pub fn lattice(support: Vec<u64>, probs: Vec<Rational>) -> Result<Self, RenewalError> {
        let d = RenewalDistribution::DiscreteLattice { support, probs };
        d.validate()?;
        Ok(d)
    }

    pub fn validate(&self) -> Result<(), RenewalError> {
        let bad = |m: &str| Err(RenewalError::InvalidDistribution(m.into()));
        match self {
            RenewalDistribution::Exponential { rate } => {
                if !(rate.is_finite() && *rate > 0.0) {
                    return bad("rate must be positive");
                }
            }
            RenewalDistribution::UniformCont { a, b } => {
                if !(a.is_finite() && b.is_finite() && *a >= 0.0 && b > a) {
                    return bad("need 0 <= a < b");
                }
            }
            RenewalDistribution::DiscreteLattice { support, probs } => {
                if support.is_empty() || support.len() != probs.len() {
                    return bad("support and probabilities differ in length");
                }
                if support.contains(&0) {
                    return bad("support must be positive");
                }
                let mut sorted = support.clone();
                sorted.sort_unstable();
                sorted.dedup();
                if sorted.len() != support.len() {
                    return bad("repeated support point");
                }
                if probs.iter().any(|p| p.is_negative()) || rational::sum(probs) != Rational::one() {
                    return bad("probabilities must be nonnegative and sum to 1");
                }
            }
        }
        Ok(())
    }

    pub fn mean(&self) -> f64 {
        match self {
            RenewalDistribution::Exponential { rate } => 1.0 / rate,
            RenewalDistribution::UniformCont { a, b } => (a + b) / 2.0,
            RenewalDistribution::DiscreteLattice { .. } => rational::to_f64(&self.exact_mean().unwrap()),
        }
    }

    /// Exact mean of a lattice law.
    pub fn exact_mean(&self) -> Option<Rational> {
        match self {
            RenewalDistribution::DiscreteLattice { support, probs } => Some(
                support
                    .iter()
                    .zip(probs)
                    .fold(Rational::zero(), |acc, (&k, p)| acc + rational::int(k as i64) * p),
            ),
            _ => None,
        }
    }

    /// Span of the lattice generated by the charged support points.
    pub fn lattice_span(&self) -> Option<u64> {
        match self {
            RenewalDistribution::DiscreteLattice { support, probs } => Some(
                support
                    .iter()
                    .zip(probs)
                    .filter(|(_, p)| p.is_positive())
                    .fold(0u64, |g, (&k, _)| g.gcd(&k)),
            ),
            _ => None,
        }
    }

    pub fn sample<R: Rng>(&self, rng: &mut R) -> f64 {
        match self {
            RenewalDistribution::Exponential { rate } => -(1.0 - rng.gen::<f64>()).ln() / rate,
            RenewalDistribution::UniformCont { a, b } => a + (b - a) * rng.gen::<f64>(),
            RenewalDistribution::DiscreteLattice { support, probs } => {
                pick(rng, support, probs.iter().map(rational::to_f64)) as f64
            }
        }
    }

    /// Draw from the length-biased law `x·F(dx) / E X`.
    pub fn sample_length_biased<R: Rng>(&self, rng: &mut R) -> f64 {
        match self {
            RenewalDistribution::Exponential { .. } => self.sample(rng) + self.sample(rng),
            RenewalDistribution::UniformCont { a, b } => {
                let u: f64 = rng.gen();
                (a * a + u * (b * b - a * a)).sqrt()
            }
            RenewalDistribution::DiscreteLattice { support, probs } => {
                let w = support.iter().zip(probs).map(|(&k, p)| k as f64 * rational::to_f64(p));
                pick(rng, support, w) as f64
            }
        }
    }
}

fn pick<R: Rng>(rng: &mut R, support: &[u64], weights: impl Iterator<Item = f64>) -> u64 {
    let w: Vec<f64> = weights.collect();
    let total: f64 = w.iter().sum();
    let u = rng.gen::<f64>() * total;
    let mut acc = 0.0;
    for (k, wi) in support.iter().zip(&w) {
        acc += wi;
        if u < acc {
            return *k;
        }
    }
    *support
        .iter()
        .zip(&w)
        .rev()
        .find(|(_, &wi)| wi > 0.0)
        .map(|(k, _)| k)
        .unwrap()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Origin {
    /// An epoch sits at 0.
    Palm,
    /// The origin is uniform inside a length-biased straddling gap.
    Stationary,
}

/// Epochs covering `[-W, W]`, sorted.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PointProcessPath {
    pub epochs: Vec<f64>,
    pub window: f64,
    pub origin: Origin,
}

impl PointProcessPath {
    /// Epochs in `[lo, hi)`.
    pub fn count_in(&self, lo: f64, hi: f64) -> usize {
        let a = self.epochs.partition_point(|&x| x < lo);
        let b = self.epochs.partition_point(|&x| x < hi);
        b - a
    }

    /// The gap straddling the origin (`X_1` under the Palm origin).
    pub fn straddle(&self) -> f64 {
        let i = self.epochs.partition_point(|&x| x <= 0.0);
        self.epochs[i] - self.epochs[i - 1]
    }
}

pub fn sample_path<R: Rng>(dist: &RenewalDistribution, origin: Origin, window: f64, rng: &mut R) -> PointProcessPath {
    assert!(window > 0.0, "window must be positive");
    let (left, right) = match origin {
        Origin::Palm => (0.0, 0.0),
        Origin::Stationary => {
            let l = dist.sample_length_biased(rng);
            let u: f64 = rng.gen();
            (-u * l, (1.0 - u) * l)
        }
    };
    let mut fwd = vec![right];
    while *fwd.last().unwrap() <= window {
        let next = fwd.last().unwrap() + dist.sample(rng);
        fwd.push(next);
    }
    let mut back = Vec::new();
    if origin == Origin::Stationary {
        back.push(left);
    }
    let mut cur = if origin == Origin::Palm { 0.0 } else { left };
    while cur >= -window {
        cur -= dist.sample(rng);
        back.push(cur);
    }
    back.reverse();
    back.extend(fwd);
    PointProcessPath { epochs: back, window, origin }
}

/// Epochs of a Palm path in `[0, end)`, generated forward only.
fn forward_epochs(dist: &RenewalDistribution, rng: &mut ChaCha8Rng, end: f64, mut visit: impl FnMut(f64)) {
    let mut t = 0.0;
    while t < end {
        visit(t);
        t += dist.sample(rng);
    }
}

/// Palm-origin count of epochs in `[a, a + X_1)`; its mean is 1 for every `a`.
pub fn check_rnwl_t(dist: &RenewalDistribution, a: f64, samples: u64, seed: u64) -> Result<McEstimate, RenewalError> {
    dist.validate()?;
    if !(a >= 0.0 && a.is_finite()) {
        return Err(RenewalError::Invalid("a must be nonnegative".into()));
    }
    Ok(mc::run(samples, seed, |r| {
        let x1 = dist.sample(r);
        let end = a + x1;
        let mut count = usize::from(a <= 0.0);
        let mut t = x1;
        while t < end {
            if t >= a {
                count += 1;
            }
            t += dist.sample(r);
        }
        count as f64
    }))
}

/// Sample mean of `X_1`, the measure of the Palm interval `[0, X_1)`.
pub fn check_rnwl_k(dist: &RenewalDistribution, samples: u64, seed: u64) -> Result<McEstimate, RenewalError> {
    dist.validate()?;
    Ok(mc::run(samples, seed, |r| dist.sample(r)))
}

/// Palm-origin mean count of epochs in `[a, a + c)`.
pub fn renewal_count(dist: &RenewalDistribution, a: f64, c: f64, samples: u64, seed: u64) -> Result<McEstimate, RenewalError> {
    dist.validate()?;
    if !(a >= 0.0 && c > 0.0 && (a + c).is_finite()) {
        return Err(RenewalError::Invalid("need a >= 0 and c > 0".into()));
    }
    Ok(mc::run(samples, seed, |r| {
        let mut count = 0usize;
        forward_epochs(dist, r, a + c, |t| {
            if t >= a {
                count += 1;
            }
        });
        count as f64
    }))
}

/// [`renewal_count`] with its limit `c / E X_1`; refuses lattice laws whose
/// span does not divide `c`.
pub fn renewal_limit(
    dist: &RenewalDistribution,
    a: f64,
    c: f64,
    samples: u64,
    seed: u64,
) -> Result<(McEstimate, f64), RenewalError> {
    if let Some(span) = dist.lattice_span() {
        if span > 1 && (c / span as f64).fract() != 0.0 {
            return Err(RenewalError::PeriodicDistribution { span, c: c.to_string() });
        }
    }
    let est = renewal_count(dist, a, c, samples, seed)?;
    Ok((est, c / dist.mean()))
}

/// `u_n = P(n is an epoch)` for a Palm lattice path, by `u_0 = 1`,
/// `u_n = Σ_k p_k u_{n-k}`.
pub fn renewal_mass_exact(dist: &RenewalDistribution, n_max: usize) -> Result<Vec<Rational>, RenewalError> {
    let RenewalDistribution::DiscreteLattice { support, probs } = dist else {
        return Err(RenewalError::InvalidDistribution("lattice law required".into()));
    };
    dist.validate()?;
    let mut u = vec![Rational::zero(); n_max + 1];
    u[0] = Rational::one();
    for n in 1..=n_max {
        let mut acc = Rational::zero();
        for (&k, p) in support.iter().zip(probs) {
            if k as usize <= n {
                acc += p * &u[n - k as usize];
            }
        }
        u[n] = acc;
    }
    Ok(u)
}

/// Monte-Carlo indicators `1{n is an epoch}` for `n = 0..=n_max`.
pub fn renewal_mass_mc(dist: &RenewalDistribution, n_max: usize, samples: u64, seed: u64) -> Result<Vec<McEstimate>, RenewalError> {
    if dist.lattice_span().is_none() {
        return Err(RenewalError::InvalidDistribution("lattice law required".into()));
    }
    dist.validate()?;
    Ok(mc::run_vec(samples, seed, n_max + 1, |r, out| {
        forward_epochs(dist, r, (n_max + 1) as f64, |t| {
            out[t as usize] = 1.0;
        });
    }))
}
