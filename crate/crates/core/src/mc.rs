//! Reproducible Monte Carlo plumbing.
//!
//! Every trial draws from its own ChaCha8 stream: the generator is seeded
//! with the experiment seed and the stream is set to the trial index. Trial
//! outcomes are collected in trial order and reduced sequentially, so the
//! aggregate statistics are bit-identical for any number of worker threads.

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

/// Generator for trial `trial` of an experiment seeded with `seed`.
pub fn trial_rng(seed: u64, trial: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(trial);
    rng
}

/// Runs `trials` independent trials in parallel and returns the outcomes in
/// trial order.
pub fn run_trials<T, F>(trials: u64, seed: u64, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(&mut ChaCha8Rng) -> T + Sync,
{
    (0..trials)
        .into_par_iter()
        .map(|i| {
            let mut rng = trial_rng(seed, i);
            f(&mut rng)
        })
        .collect()
}

/// Sampler for a finite distribution by inversion of the cumulative table.
#[derive(Debug, Clone)]
pub struct DiscreteSampler {
    cumulative: Vec<f64>,
}

impl DiscreteSampler {
    pub fn new(probs: &[f64]) -> Self {
        let mut acc = 0.0;
        let mut cumulative: Vec<f64> = probs
            .iter()
            .map(|p| {
                acc += p;
                acc
            })
            .collect();
        // Guard against the last cumulative value falling short of 1.
        if let Some(last_positive) = probs.iter().rposition(|&p| p > 0.0) {
            for c in &mut cumulative[last_positive..] {
                *c = f64::INFINITY;
            }
        }
        Self { cumulative }
    }

    #[inline]
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        let u: f64 = rng.random();
        self.cumulative.partition_point(|&c| c <= u)
    }
}

/// Mean and standard error of a sample, reduced in slice order.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SampleSummary {
    pub mean: f64,
    pub std_error: f64,
    pub count: usize,
}

impl SampleSummary {
    pub fn of<I: IntoIterator<Item = f64>>(values: I) -> Self {
        // Welford's update, applied sequentially.
        let mut count = 0usize;
        let mut mean = 0.0;
        let mut m2 = 0.0;
        for v in values {
            count += 1;
            let delta = v - mean;
            mean += delta / count as f64;
            m2 += delta * (v - mean);
        }
        let std_error = if count > 1 {
            (m2 / (count - 1) as f64 / count as f64).sqrt()
        } else {
            0.0
        };
        Self { mean, std_error, count }
    }
}
