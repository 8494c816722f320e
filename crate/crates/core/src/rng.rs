//! Deterministic random substreams.
//!
//! Every random draw of a Monte Carlo trial comes from a ChaCha8 stream keyed
//! by `(seed, trial)` with a per-purpose stream id, so results do not depend
//! on evaluation order or on which frames a run actually synthesizes.

use num_complex::Complex64;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand::SeedableRng;
use rand_distr::StandardNormal;

/// Stream carrying the small-scale gains `β_p`.
pub const BETA_STREAM: u64 = 0;
/// Stream used for bootstrap resampling.
pub const BOOTSTRAP_STREAM: u64 = u64::MAX;

/// Noise stream of frame `m`.
pub fn frame_stream(m: usize) -> u64 {
    m as u64 + 1
}

pub fn substream(seed: u64, trial: u64, stream: u64) -> ChaCha8Rng {
    let mut key = [0u8; 32];
    key[..8].copy_from_slice(&seed.to_le_bytes());
    key[8..16].copy_from_slice(&trial.to_le_bytes());
    let mut rng = ChaCha8Rng::from_seed(key);
    rng.set_stream(stream);
    rng
}

/// One draw from `CN(0, variance)`.
pub fn complex_normal<R: Rng + ?Sized>(rng: &mut R, variance: f64) -> Complex64 {
    let scale = libm::sqrt(variance / 2.0);
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    Complex64::new(scale * re, scale * im)
}
