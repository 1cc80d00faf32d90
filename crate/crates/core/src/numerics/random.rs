//! Seedable random-variate layer.
//!
//! Every stream is a ChaCha8 generator keyed by a 64-bit seed and positioned
//! on one of its 2^64 independent streams, so `(seed, stream_id)` fixes the
//! variate sequence regardless of which worker consumes it. Monte Carlo
//! batches are mapped to streams by batch index, never by worker.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1, Gamma, Poisson, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type StreamRng = ChaCha8Rng;

/// Draws per Monte Carlo batch; each batch owns one stream.
pub const BATCH_SIZE: usize = 8192;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct RngStream {
    pub seed: u64,
    pub stream_id: u64,
}

impl RngStream {
    pub fn new(seed: u64, stream_id: u64) -> Self {
        Self { seed, stream_id }
    }

    pub fn rng(&self) -> StreamRng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(self.stream_id);
        rng
    }
}

pub fn uniform<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    rng.random::<f64>()
}

pub fn standard_normal<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    StandardNormal.sample(rng)
}

/// Exponential variate with the given rate.
pub fn exponential<R: Rng + ?Sized>(rng: &mut R, rate: f64) -> f64 {
    let e: f64 = Exp1.sample(rng);
    e / rate
}

/// Gamma variate with shape `k` and rate `theta` (mean `k / theta`).
pub fn gamma_sample<R: Rng + ?Sized>(rng: &mut R, shape: f64, rate: f64) -> f64 {
    debug_assert!(shape > 0.0 && rate > 0.0);
    if shape == 1.0 {
        return exponential(rng, rate);
    }
    Gamma::new(shape, 1.0 / rate)
        .expect("gamma parameters validated upstream")
        .sample(rng)
}

/// Poisson count with mean `m >= 0`.
pub fn poisson_sample<R: Rng + ?Sized>(rng: &mut R, mean: f64) -> u64 {
    debug_assert!(mean >= 0.0);
    if mean <= 0.0 {
        return 0;
    }
    let x: f64 = Poisson::new(mean)
        .expect("poisson mean validated upstream")
        .sample(rng);
    x as u64
}

/// Event times on `(s, t]` of a Poisson process with intensity `rate(v)`,
/// by thinning a homogeneous stream of intensity `bound`.
pub fn inhomogeneous_poisson_times<R, F>(
    rng: &mut R,
    rate: F,
    s: f64,
    t: f64,
    bound: f64,
) -> Result<Vec<f64>>
where
    R: Rng + ?Sized,
    F: Fn(f64) -> f64,
{
    if !(bound >= 0.0) || !bound.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "thinning bound must be finite and nonnegative, got {bound}"
        )));
    }
    let mut times = Vec::new();
    if bound == 0.0 || t <= s {
        return Ok(times);
    }
    let mut v = s;
    loop {
        v += exponential(rng, bound);
        if v > t {
            break;
        }
        let r = rate(v);
        if r > bound * (1.0 + 1e-12) {
            return Err(Error::BoundViolated {
                rate: r,
                bound,
                time: v,
            });
        }
        if uniform(rng) * bound < r {
            times.push(v);
        }
    }
    Ok(times)
}

/// Draw `n` values with `draw`, batch `b` using stream `(seed, b)`.
///
/// The output is identical for every worker count.
pub fn sample_batched<F>(n: usize, seed: u64, workers: usize, draw: F) -> Vec<f64>
where
    F: Fn(&mut StreamRng) -> f64 + Sync,
{
    let batches = n.div_ceil(BATCH_SIZE);
    let run = || {
        (0..batches)
            .into_par_iter()
            .map(|b| {
                let mut rng = RngStream::new(seed, b as u64).rng();
                let len = BATCH_SIZE.min(n - b * BATCH_SIZE);
                (0..len).map(|_| draw(&mut rng)).collect::<Vec<f64>>()
            })
            .collect::<Vec<_>>()
    };
    let chunks = with_workers(workers, run);
    let mut out = Vec::with_capacity(n);
    for c in chunks {
        out.extend(c);
    }
    out
}

/// Run `job` on a dedicated pool of `workers` threads (0 = rayon default).
pub fn with_workers<T: Send, J: FnOnce() -> T + Send>(workers: usize, job: J) -> T {
    if workers == 0 {
        return job();
    }
    match rayon::ThreadPoolBuilder::new().num_threads(workers).build() {
        Ok(pool) => pool.install(job),
        Err(_) => job(),
    }
}
