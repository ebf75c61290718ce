//! Reproducible Monte-Carlo plumbing.
//!
//! Sample `i` of a run with seed `s` draws from ChaCha8 seeded with `s` on
//! stream `i`, so results do not depend on how samples are scheduled. Samples
//! are grouped in fixed chunks, each reduced with compensated sums, and the
//! chunk triples are merged in index order.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

const CHUNK: usize = 4096;

/// Random stream of one sample.
pub fn sample_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    r.set_stream(index);
    r
}

/// Neumaier compensated sum.
#[derive(Clone, Copy, Debug, Default)]
pub struct CompensatedSum {
    sum: f64,
    comp: f64,
}

impl CompensatedSum {
    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn merge(&mut self, other: &CompensatedSum) {
        self.add(other.sum);
        self.add(other.comp);
    }

    pub fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

/// `(count, Σx, Σx²)` of a batch.
#[derive(Clone, Copy, Debug, Default)]
pub struct Moments {
    pub count: u64,
    pub sum: CompensatedSum,
    pub sum_sq: CompensatedSum,
}

impl Moments {
    pub fn push(&mut self, x: f64) {
        self.count += 1;
        self.sum.add(x);
        self.sum_sq.add(x * x);
    }

    pub fn merge(&mut self, other: &Moments) {
        self.count += other.count;
        self.sum.merge(&other.sum);
        self.sum_sq.merge(&other.sum_sq);
    }

    pub fn estimate(&self, seed: u64) -> McEstimate {
        let n = self.count as f64;
        let mean = self.sum.value() / n;
        let var = if self.count > 1 {
            ((self.sum_sq.value() - self.sum.value() * mean) / (n - 1.0)).max(0.0)
        } else {
            0.0
        };
        McEstimate {
            mean,
            stderr: (var / n).sqrt(),
            samples: self.count,
            seed,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct McEstimate {
    pub mean: f64,
    pub stderr: f64,
    pub samples: u64,
    pub seed: u64,
}

impl McEstimate {
    /// `|mean - target| <= k·stderr`, with a rounding allowance so that
    /// zero-variance runs compare equal to an exact target.
    pub fn within(&self, target: f64, k: f64) -> bool {
        let slack = 1e-9 * target.abs().max(1.0);
        (self.mean - target).abs() <= k * self.stderr + slack
    }

    /// Distance from `target` in standard errors.
    pub fn z_score(&self, target: f64) -> f64 {
        let d = (self.mean - target).abs();
        if self.stderr == 0.0 {
            if d <= 1e-9 * target.abs().max(1.0) {
                0.0
            } else {
                f64::INFINITY
            }
        } else {
            d / self.stderr
        }
    }
}

/// Mean of `f(rng_i)` over `samples` independent streams.
pub fn run<F>(samples: u64, seed: u64, f: F) -> McEstimate
where
    F: Fn(&mut ChaCha8Rng) -> f64 + Sync,
{
    assert!(samples > 0, "need at least one sample");
    let chunks = (samples as usize).div_ceil(CHUNK);
    let parts: Vec<Moments> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let lo = (c * CHUNK) as u64;
            let hi = (lo + CHUNK as u64).min(samples);
            let mut m = Moments::default();
            for i in lo..hi {
                m.push(f(&mut sample_rng(seed, i)));
            }
            m
        })
        .collect();
    let mut total = Moments::default();
    for p in &parts {
        total.merge(p);
    }
    total.estimate(seed)
}

/// As [`run`] for a vector-valued sample; one estimate per component.
pub fn run_vec<F>(samples: u64, seed: u64, width: usize, f: F) -> Vec<McEstimate>
where
    F: Fn(&mut ChaCha8Rng, &mut [f64]) + Sync,
{
    assert!(samples > 0, "need at least one sample");
    let chunks = (samples as usize).div_ceil(CHUNK);
    let parts: Vec<Vec<Moments>> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let lo = (c * CHUNK) as u64;
            let hi = (lo + CHUNK as u64).min(samples);
            let mut m = vec![Moments::default(); width];
            let mut buf = vec![0.0; width];
            for i in lo..hi {
                buf.iter_mut().for_each(|v| *v = 0.0);
                f(&mut sample_rng(seed, i), &mut buf);
                for (mm, &x) in m.iter_mut().zip(&buf) {
                    mm.push(x);
                }
            }
            m
        })
        .collect();
    let mut total = vec![Moments::default(); width];
    for p in &parts {
        for (t, m) in total.iter_mut().zip(p) {
            t.merge(m);
        }
    }
    total.iter().map(|m| m.estimate(seed)).collect()
}
