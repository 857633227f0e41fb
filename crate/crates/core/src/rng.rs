//! Deterministic random streams and uniform sampling on the unit sphere.
//!
//! Every random draw in the crate goes through an [`RngHandle`]: a 64-bit
//! seed plus a stream id. The generator is ChaCha8, whose stream counter
//! makes `(seed, stream_id)` pairs independent and portable, so Monte Carlo
//! replication `r` simply uses `stream_id = r`.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sample::Direction;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct RngHandle {
    pub seed: u64,
    pub stream_id: u64,
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

impl RngHandle {
    pub fn new(seed: u64, stream_id: u64) -> Self {
        Self { seed, stream_id }
    }

    /// Same seed, different stream.
    pub fn stream(&self, stream_id: u64) -> Self {
        Self {
            seed: self.seed,
            stream_id,
        }
    }

    /// Derive an independent handle for a named purpose (sampling, epoch
    /// directions, evaluation directions, ...) within the same stream.
    pub fn child(&self, tag: u64) -> Self {
        Self {
            seed: splitmix64(self.seed ^ splitmix64(tag.wrapping_add(0x5851_F42D_4C95_7F2D))),
            stream_id: self.stream_id,
        }
    }

    pub fn rng(&self) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(self.stream_id);
        rng
    }
}

/// Tags used with [`RngHandle::child`].
pub mod tags {
    pub const DATA: u64 = 1;
    pub const EPOCH_DIRECTIONS: u64 = 2;
    pub const EVAL_DIRECTIONS: u64 = 3;
    pub const INFERENCE_DIRECTIONS: u64 = 4;
    pub const SYNTHETIC: u64 = 5;
}

/// Draw one direction uniformly from the unit sphere in `R^d` by normalizing
/// a standard Gaussian vector.
pub fn sample_sphere<R: Rng + ?Sized>(rng: &mut R, d: usize) -> Result<Direction> {
    if d == 0 {
        return Err(Error::InvalidDimension(
            "sphere dimension must be positive".into(),
        ));
    }
    let mut v = vec![0.0; d];
    loop {
        for c in v.iter_mut() {
            *c = rng.sample(StandardNormal);
        }
        let norm = v.iter().map(|c| c * c).sum::<f64>().sqrt();
        if norm >= 1e-12 && norm.is_finite() {
            for c in v.iter_mut() {
                *c /= norm;
            }
            return Direction::new(v);
        }
    }
}

pub fn draw_directions<R: Rng + ?Sized>(rng: &mut R, d: usize, m: usize) -> Result<Vec<Direction>> {
    (0..m).map(|_| sample_sphere(rng, d)).collect()
}
