//! Counter-based random streams.
//!
//! Each [`RngStream`] is a ChaCha8 keystream addressed by `(seed, stream_id,
//! counter)`. Streams never overlap and any position can be re-entered
//! directly, so a run is reproducible from its seed and stream assignment
//! alone, independent of how work is scheduled across threads.

use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use statrs::function::erf::erfc_inv;

/// 64-bit draws consumed by one call to [`RngStream::standard_normal`].
pub const DRAWS_PER_NORMAL: u64 = 1;

#[derive(Clone, Debug)]
pub struct RngStream {
    seed: u64,
    stream_id: u64,
    counter: u64,
    core: ChaCha8Rng,
}

impl RngStream {
    pub fn new(seed: u64, stream_id: u64) -> Self {
        Self::at(seed, stream_id, 0)
    }

    /// Stream positioned after `counter` 64-bit draws.
    pub fn at(seed: u64, stream_id: u64, counter: u64) -> Self {
        let mut core = ChaCha8Rng::seed_from_u64(seed);
        core.set_stream(stream_id);
        core.set_word_pos(u128::from(counter) * 2);
        Self {
            seed,
            stream_id,
            counter,
            core,
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stream_id(&self) -> u64 {
        self.stream_id
    }

    /// Number of 64-bit draws consumed so far.
    pub fn counter(&self) -> u64 {
        self.counter
    }

    pub fn next_u64(&mut self) -> u64 {
        self.counter += 1;
        self.core.next_u64()
    }

    /// Uniform variate on the open interval (0, 1) with 53 bits of resolution.
    pub fn uniform(&mut self) -> f64 {
        ((self.next_u64() >> 11) as f64 + 0.5) * (1.0 / (1u64 << 53) as f64)
    }

    /// Standard normal variate by inversion of the normal CDF.
    pub fn standard_normal(&mut self) -> f64 {
        let u = self.uniform();
        -std::f64::consts::SQRT_2 * erfc_inv(2.0 * u)
    }
}

/// `n` streams sharing `seed`, with stream ids `0..n`.
pub fn make_streams(seed: u64, n: usize) -> Vec<RngStream> {
    (0..n as u64).map(|id| RngStream::new(seed, id)).collect()
}
