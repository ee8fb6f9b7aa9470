//! Counter-based uniform streams keyed by `(master_seed, stream_index, lane)`.
//!
//! Every trajectory owns its own stream, so results do not depend on how
//! trajectories are scheduled across workers. ChaCha8 is a block cipher in
//! counter mode: the key comes from the master seed and lane, the 64-bit
//! stream id is the trajectory ordinal and the word position is the draw
//! counter.

use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};

/// `2^-53`, the smallest positive value of the 53-bit uniform grid.
pub const MIN_UNIFORM: f64 = 1.0 / (1u64 << 53) as f64;

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    let mut z = x;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[derive(Clone, Debug)]
pub struct RngStream {
    master_seed: u64,
    stream_index: u64,
    lane: u32,
    inner: ChaCha8Rng,
}

impl RngStream {
    pub fn new(master_seed: u64, stream_index: u64) -> Self {
        Self::with_lane(master_seed, stream_index, 0)
    }

    /// An independent stream for a sub-trajectory of `stream_index`.
    pub fn with_lane(master_seed: u64, stream_index: u64, lane: u32) -> Self {
        let mut key = [0u8; 32];
        let mut s = master_seed ^ ((lane as u64) << 32 | lane as u64).rotate_left(17);
        for chunk in key.chunks_exact_mut(8) {
            s = splitmix64(s);
            chunk.copy_from_slice(&s.to_le_bytes());
        }
        let mut inner = ChaCha8Rng::from_seed(key);
        inner.set_stream(stream_index);
        Self { master_seed, stream_index, lane, inner }
    }

    pub fn master_seed(&self) -> u64 {
        self.master_seed
    }

    pub fn stream_index(&self) -> u64 {
        self.stream_index
    }

    pub fn lane(&self) -> u32 {
        self.lane
    }

    /// Uniform on `[0, 1)` with 53 random bits.
    pub fn uniform(&mut self) -> f64 {
        (self.inner.next_u64() >> 11) as f64 * MIN_UNIFORM
    }

    /// Uniform on `(0, 1)`: a zero draw is replaced by [`MIN_UNIFORM`].
    pub fn uniform_positive(&mut self) -> f64 {
        let u = self.uniform();
        if u == 0.0 {
            MIN_UNIFORM
        } else {
            u
        }
    }
}
