use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::walk::WalkRng;

/// Sufficient statistics of a batch of trials, merged by addition.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Tally {
    pub trials: u64,
    pub counts: Vec<u64>,
    pub sums: Vec<f64>,
}

impl Tally {
    pub fn new(counts: usize, sums: usize) -> Self {
        Tally {
            trials: 0,
            counts: vec![0; counts],
            sums: vec![0.0; sums],
        }
    }

    pub fn merge(&mut self, other: &Tally) {
        if self.counts.len() < other.counts.len() {
            self.counts.resize(other.counts.len(), 0);
        }
        if self.sums.len() < other.sums.len() {
            self.sums.resize(other.sums.len(), 0.0);
        }
        self.trials += other.trials;
        for (a, b) in self.counts.iter_mut().zip(&other.counts) {
            *a += b;
        }
        for (a, b) in self.sums.iter_mut().zip(&other.sums) {
            *a += b;
        }
    }

    /// `counts[k] / trials` and its binomial standard error.
    pub fn proportion(&self, k: usize) -> (f64, f64) {
        let n = self.trials as f64;
        let p = self.counts[k] as f64 / n;
        (p, (p * (1.0 - p) / n).sqrt())
    }
}

/// The fixed layout of trials over random streams.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Plan {
    pub seed: u64,
    pub trials: u64,
    pub batch_size: u64,
    pub workers: usize,
    /// Upper bits of the stream index, separating independent sub-runs.
    pub family: u64,
}

impl Plan {
    pub fn batches(&self) -> u64 {
        self.trials.div_ceil(self.batch_size)
    }

    fn stream(&self, batch: u64) -> u64 {
        (self.family << 32) | batch
    }
}

/// Runs `batch(rng, trials)` for every batch, in parallel on `workers`
/// threads, and merges the tallies in batch order. The result depends on the
/// plan only, not on scheduling.
pub fn run_batches<F>(plan: &Plan, batch: F) -> Result<Tally>
where
    F: Fn(&mut WalkRng, u64) -> Result<Tally> + Sync,
{
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(plan.workers.max(1))
        .build()
        .map_err(|e| Error::Precondition(format!("thread pool: {e}")))?;
    let parts: Vec<Result<Tally>> = pool.install(|| {
        (0..plan.batches())
            .into_par_iter()
            .map(|b| {
                let n = plan.batch_size.min(plan.trials - b * plan.batch_size);
                let mut rng = WalkRng::new(plan.seed, plan.stream(b));
                let mut t = batch(&mut rng, n)?;
                t.trials = n;
                Ok(t)
            })
            .collect()
    });
    let mut total = Tally::default();
    for p in parts {
        total.merge(&p?);
    }
    Ok(total)
}
