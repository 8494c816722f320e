//! Waveform and physical constants of the 802.11ad single-carrier PHY.

use crate::{Error, Result};

pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

/// Timing and carrier parameters of the radar waveform.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WaveformParams {
    pub carrier_hz: f64,
    pub bandwidth_hz: f64,
    /// Training samples at the start of every frame.
    pub preamble_len: usize,
    /// Samples per frame.
    pub frame_len: usize,
}

impl WaveformParams {
    pub const fn ieee_80211ad() -> Self {
        Self {
            carrier_hz: 60e9,
            bandwidth_hz: 1.76e9,
            preamble_len: crate::sequences::PREAMBLE_LEN,
            frame_len: 13_632,
        }
    }

    pub fn symbol_period(&self) -> f64 {
        1.0 / self.bandwidth_hz
    }

    pub fn wavelength(&self) -> f64 {
        SPEED_OF_LIGHT / self.carrier_hz
    }

    pub fn frame_duration(&self) -> f64 {
        self.frame_len as f64 * self.symbol_period()
    }

    /// `M = floor(CPI / T_f)`.
    pub fn frames_in_cpi(&self, cpi: f64) -> Result<usize> {
        if !(cpi.is_finite() && cpi > 0.0) {
            return Err(Error::InvalidArgument("CPI must be positive"));
        }
        // The small slack keeps CPIs that are exact multiples of T_f from
        // losing a frame to rounding.
        let frames = libm::floor(cpi / self.frame_duration() * (1.0 + 1e-12)) as usize;
        Ok(frames)
    }

    /// Coherent interval actually spanned by `frames` frames.
    pub fn effective_cpi(&self, frames: usize) -> f64 {
        frames as f64 * self.frame_duration()
    }

    /// Round-trip delay in whole samples for a one-way range.
    pub fn delay_samples(&self, range_m: f64) -> f64 {
        2.0 * range_m / SPEED_OF_LIGHT * self.bandwidth_hz
    }
}

impl Default for WaveformParams {
    fn default() -> Self {
        Self::ieee_80211ad()
    }
}

pub fn db_to_linear(db: f64) -> f64 {
    libm::pow(10.0, db / 10.0)
}

pub fn dbm_to_watts(dbm: f64) -> f64 {
    db_to_linear(dbm) * 1e-3
}
