//! Discrete echo synthesis at one sample per symbol.
//!
//! Frame `m` holds `y[m, k]` for `k` in `[0, K_pre + range_gate)`, i.e. the
//! receiver listens from the start of the transmission until the last
//! possible preamble tail. Doppler phase is referenced to the absolute
//! sample index `k + mK`.

use alloc::vec::Vec;
use core::f64::consts::PI;
use num_complex::Complex64;
use rand::Rng;

use crate::scene::{FrameTruth, Scene};
use crate::sequences::Preamble;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct EchoFrame {
    pub index: usize,
    /// Sample index `k` of `samples[0]`.
    pub k_start: usize,
    pub samples: Vec<Complex64>,
}

impl EchoFrame {
    /// Samples covering `[k, k + len)`, if the frame holds them.
    pub fn span(&self, k: usize, len: usize) -> Option<&[Complex64]> {
        let start = k.checked_sub(self.k_start)?;
        self.samples.get(start..start.checked_add(len)?)
    }

    /// Samples from `k` to the end of the frame.
    pub fn from(&self, k: usize) -> Option<&[Complex64]> {
        let start = k.checked_sub(self.k_start)?;
        self.samples.get(start..)
    }

    pub fn end(&self) -> usize {
        self.k_start + self.samples.len()
    }
}

/// Listening window length in samples.
pub fn listen_len(scene: &Scene) -> usize {
    scene.params.preamble_len + scene.range_gate
}

/// `y[m,k] = Σ_p √P_TX h_p e^{j2πν_p(k+mK)T_s} s[k-ℓ_p] + z[m,k]`.
///
/// Pass `None` for a noiseless frame.
pub fn synthesize_frame<R: Rng + ?Sized>(
    scene: &Scene,
    truth: &FrameTruth,
    preamble: &Preamble,
    m: usize,
    noise: Option<&mut R>,
) -> Result<EchoFrame> {
    let len = listen_len(scene);
    let k_pre = preamble.len();
    if truth.delays.iter().any(|&d| d + k_pre > len) {
        return Err(Error::Scenario("target delay outside the listening window"));
    }
    let mut samples = alloc::vec![Complex64::new(0.0, 0.0); len];
    if let Some(rng) = noise {
        for s in samples.iter_mut() {
            *s = crate::rng::complex_normal(rng, scene.noise_variance);
        }
    }
    let ts = scene.params.symbol_period();
    let offset = (m * scene.params.frame_len) as f64;
    let amp = libm::sqrt(scene.tx_power);
    for ((&delay, &nu), &h) in truth.delays.iter().zip(&truth.doppler).zip(&truth.h) {
        let gain = amp * h;
        let w = 2.0 * PI * nu * ts;
        for (n, &sym) in preamble.samples().iter().enumerate() {
            let k = delay + n;
            let rot = Complex64::from_polar(1.0, w * (k as f64 + offset));
            samples[k] += gain * rot * sym as f64;
        }
    }
    Ok(EchoFrame { index: m, k_start: 0, samples })
}

/// Noise substream for frame `m` of a trial.
pub fn frame_noise(seed: u64, trial: u64, m: usize) -> rand_chacha::ChaCha8Rng {
    crate::rng::substream(seed, trial, crate::rng::frame_stream(m))
}
