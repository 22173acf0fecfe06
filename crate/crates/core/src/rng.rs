//! Seeded, counter-addressable random streams.
//!
//! Every stochastic stage of the pipeline draws from its own ChaCha8 stream,
//! derived from the global seed and a label. Streams that drive per-sample
//! decisions consume a fixed number of generator words per sample, so any
//! sample index can be seeked directly; chunked and monolithic execution of
//! the same run therefore consume identical random values.

use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};

const GAUSSIAN_WORDS_PER_ITEM: u128 = 4; // two u64 draws
const UNIFORM_WORDS_PER_ITEM: u128 = 2; // one u64 draw

/// Derive a child seed from a root seed and a purpose label.
pub fn derive_seed(root: u64, label: &str) -> u64 {
    mix64(mix64(root ^ 0x9E37_79B9_7F4A_7C15) ^ fnv1a64(label.as_bytes()))
}

fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut hash = 0xcbf2_9ce4_8422_2325u64;
    for &b in bytes {
        hash ^= u64::from(b);
        hash = hash.wrapping_mul(0x100_0000_01b3);
    }
    hash
}

fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Map a u64 to [0, 1) with 53-bit resolution.
#[inline]
fn unit_f64(x: u64) -> f64 {
    (x >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// Map a u64 to (0, 1]; safe as a logarithm argument.
#[inline]
fn unit_open_f64(x: u64) -> f64 {
    ((x >> 11) + 1) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// Standard normal via the cosine branch of Box-Muller. Fixed two-draw cost
/// keeps the stream seekable per item.
#[inline]
fn box_muller(a: u64, b: u64) -> f64 {
    let r = (-2.0 * unit_open_f64(a).ln()).sqrt();
    r * (std::f64::consts::TAU * unit_f64(b)).cos()
}

/// Counter-addressable stream of standard-normal samples.
pub struct GaussianStream {
    rng: ChaCha8Rng,
}

impl GaussianStream {
    pub fn new(seed: u64) -> Self {
        GaussianStream {
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    /// Position the stream so the next sample is item `index`.
    pub fn seek(&mut self, index: u64) {
        self.rng
            .set_word_pos(u128::from(index) * GAUSSIAN_WORDS_PER_ITEM);
    }

    #[inline]
    pub fn next(&mut self) -> f64 {
        let a = self.rng.next_u64();
        let b = self.rng.next_u64();
        box_muller(a, b)
    }
}

/// Counter-addressable stream of uniform samples in [0, 1).
pub struct UniformStream {
    rng: ChaCha8Rng,
}

impl UniformStream {
    pub fn new(seed: u64) -> Self {
        UniformStream {
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    pub fn seek(&mut self, index: u64) {
        self.rng
            .set_word_pos(u128::from(index) * UNIFORM_WORDS_PER_ITEM);
    }

    #[inline]
    pub fn next(&mut self) -> f64 {
        unit_f64(self.rng.next_u64())
    }
}

/// Sequential exponential-gap sampler for homogeneous Poisson processes.
pub struct ExponentialGaps {
    rng: ChaCha8Rng,
    rate_per_ns: f64,
}

impl ExponentialGaps {
    pub fn new(seed: u64, rate_per_ns: f64) -> Self {
        ExponentialGaps {
            rng: ChaCha8Rng::seed_from_u64(seed),
            rate_per_ns,
        }
    }

    /// Next inter-event gap in ns; infinite for zero rate.
    pub fn next_gap_ns(&mut self) -> f64 {
        if self.rate_per_ns <= 0.0 {
            return f64::INFINITY;
        }
        -unit_open_f64(self.rng.next_u64()).ln() / self.rate_per_ns
    }
}
