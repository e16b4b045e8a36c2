//! Parallel, reproducible averaging of path functionals.

use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::path::{PathOutcome, STOP_TOL};
use super::stats::Moments;
use crate::error::{Error, Result};

/// Paths per work unit. Results are merged in chunk order, so they do not
/// depend on the number of threads.
pub const CHUNK: u64 = 4096;

/// Monte Carlo estimate of an expectation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub mean: f64,
    pub std_error: f64,
    pub n: u64,
    pub seed: u64,
    pub seconds: f64,
    /// Paths cut at the truncation horizon.
    pub truncated: u64,
    /// Bound on the bias from truncated and early stopped paths.
    pub truncation_bound: f64,
}

/// Simulation controls.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimOptions {
    pub n: u64,
    pub seed: u64,
    /// Worker threads; 0 uses all cores.
    pub threads: usize,
    /// Truncation horizon; `None` derives one from the model moments.
    pub t_max: Option<f64>,
}

impl Default for SimOptions {
    fn default() -> Self {
        SimOptions {
            n: 100_000,
            seed: 0,
            threads: 0,
            t_max: None,
        }
    }
}

/// Generator for path `index` of the stream `(seed, salt)`.
pub fn path_rng(seed: u64, salt: u64, index: u64) -> ChaCha8Rng {
    let mut key = [0u8; 32];
    key[..8].copy_from_slice(&seed.to_le_bytes());
    key[8..16].copy_from_slice(&salt.to_le_bytes());
    let mut rng = ChaCha8Rng::from_seed(key);
    rng.set_stream(index);
    rng
}

#[derive(Debug, Clone, Copy, Default)]
pub(crate) struct Tally {
    pub moments: Moments,
    pub truncated: u64,
    pub stopped: u64,
}

impl Tally {
    fn push(&mut self, o: PathOutcome) {
        self.moments.push(o.value);
        self.truncated += o.truncated as u64;
        self.stopped += o.stopped as u64;
    }

    fn merge(&mut self, other: &Tally) {
        self.moments.merge(&other.moments);
        self.truncated += other.truncated;
        self.stopped += other.stopped;
    }

    pub fn into_estimate(self, seed: u64, seconds: f64) -> Estimate {
        let n = self.moments.n;
        Estimate {
            mean: self.moments.mean,
            std_error: self.moments.std_error(),
            n,
            seed,
            seconds,
            truncated: self.truncated,
            truncation_bound: (self.truncated as f64 + self.stopped as f64 * STOP_TOL) / n as f64,
        }
    }
}

pub(crate) fn with_threads<T: Send>(threads: usize, job: impl FnOnce() -> T + Send) -> Result<T> {
    if threads == 0 {
        return Ok(job());
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Error::invalid(format!("cannot start {threads} threads: {e}")))?;
    Ok(pool.install(job))
}

/// Averages `f` over `n` independent paths.
pub(crate) fn run<F>(n: u64, seed: u64, salt: u64, threads: usize, f: F) -> Result<Estimate>
where
    F: Fn(&mut ChaCha8Rng) -> Result<PathOutcome> + Sync,
{
    if n < 2 {
        return Err(Error::invalid(format!("need at least 2 paths, got {n}")));
    }
    let start = Instant::now();
    let chunks = n.div_ceil(CHUNK);
    let parts = with_threads(threads, || {
        (0..chunks)
            .into_par_iter()
            .map(|c| {
                let mut tally = Tally::default();
                for i in c * CHUNK..((c + 1) * CHUNK).min(n) {
                    tally.push(f(&mut path_rng(seed, salt, i))?);
                }
                Ok(tally)
            })
            .collect::<Result<Vec<Tally>>>()
    })??;
    let mut total = Tally::default();
    parts.iter().for_each(|t| total.merge(t));
    Ok(total.into_estimate(seed, start.elapsed().as_secs_f64()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    fn uniform(rng: &mut ChaCha8Rng) -> Result<PathOutcome> {
        Ok(PathOutcome {
            value: rng.random::<f64>(),
            truncated: false,
            stopped: false,
        })
    }

    #[test]
    fn independent_of_thread_count() {
        let a = run(10_000, 3, 1, 1, uniform).unwrap();
        let b = run(10_000, 3, 1, 4, uniform).unwrap();
        assert_eq!(a.mean.to_bits(), b.mean.to_bits());
        assert_eq!(a.std_error.to_bits(), b.std_error.to_bits());
        assert!((a.mean - 0.5).abs() < 4.0 * a.std_error);
        let c = run(10_000, 4, 1, 1, uniform).unwrap();
        assert_ne!(a.mean, c.mean);
    }

    #[test]
    fn streams_differ_by_index_and_salt() {
        let x: f64 = path_rng(1, 0, 0).random();
        let y: f64 = path_rng(1, 0, 1).random();
        let z: f64 = path_rng(1, 1, 0).random();
        assert!(x != y && x != z && y != z);
    }

    #[test]
    fn rejects_tiny_samples() {
        assert!(run(1, 0, 0, 1, uniform).is_err());
    }
}
