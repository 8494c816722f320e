//! Delay-Doppler map baseline.
//!
//! Every frame of the CPI is correlated against `s_c`, and a DFT across the
//! frames (slow time) turns each delay row into a Doppler spectrum. Targets
//! are the strongest map cells; their Doppler resolution is one bin,
//! `1/(M·T_f)`.

use alloc::vec::Vec;
use core::f64::consts::PI;
use core::ops::Range;
use num_complex::Complex64;

use crate::echo::EchoFrame;
use crate::estimator::{velocity_from_doppler, DelayEstimator};
use crate::sequences::{correlate_lags, CORRELATION_OFFSET};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct DelayDopplerMap {
    /// Row-major, one row per lag.
    values: Vec<Complex64>,
    pub lags: Range<usize>,
    pub bins: usize,
    pub frames: usize,
    pub frame_duration: f64,
}

impl DelayDopplerMap {
    pub fn value(&self, lag: usize, bin: usize) -> Complex64 {
        self.values[(lag - self.lags.start) * self.bins + bin]
    }

    pub fn row(&self, lag: usize) -> &[Complex64] {
        let r = lag - self.lags.start;
        &self.values[r * self.bins..(r + 1) * self.bins]
    }

    /// Spacing between Doppler bins, `1/(bins·T_f)`.
    pub fn bin_width(&self) -> f64 {
        1.0 / (self.bins as f64 * self.frame_duration)
    }

    /// Doppler of bin `q`, in `(-1/(2T_f), 1/(2T_f)]`. The correlator
    /// conjugates the echo, so a positive Doppler shows up at negative bins.
    pub fn bin_doppler(&self, bin: usize) -> f64 {
        let n = self.bins as isize;
        let mut q = (-(bin as isize)).rem_euclid(n);
        if 2 * q > n {
            q -= n;
        }
        q as f64 * self.bin_width()
    }
}

/// Builds the map over `lags` from frames `0..M` (any order, unique
/// indices). `padding` multiplies the DFT length.
pub fn delay_doppler_map(
    frames: &[EchoFrame],
    s_c: &[i8],
    lags: Range<usize>,
    frame_duration: f64,
    padding: usize,
) -> Result<DelayDopplerMap> {
    let m = frames.len();
    if m < 2 {
        return Err(Error::InvalidArgument("the map needs at least two frames"));
    }
    if padding == 0 || lags.is_empty() || !(frame_duration > 0.0) {
        return Err(Error::InvalidArgument("invalid map dimensions"));
    }
    let mut seen = alloc::vec![false; m];
    for f in frames {
        if f.index >= m || core::mem::replace(&mut seen[f.index], true) {
            return Err(Error::InvalidArgument("frames must be indexed 0..M without gaps"));
        }
    }
    let bins = m * padding;
    let n_lags = lags.len();
    // slow[l][m]
    let mut slow = alloc::vec![Complex64::new(0.0, 0.0); n_lags * m];
    for f in frames {
        let window = f
            .from(CORRELATION_OFFSET)
            .ok_or(Error::InvalidArgument("frame does not cover the correlation window"))?;
        let r = correlate_lags(s_c, window, lags.clone())?;
        for (l, v) in r.into_iter().enumerate() {
            slow[l * m + f.index] = v;
        }
    }
    let twiddle: Vec<Complex64> =
        (0..bins).map(|r| Complex64::from_polar(1.0, -2.0 * PI * r as f64 / bins as f64)).collect();
    let mut values = alloc::vec![Complex64::new(0.0, 0.0); n_lags * bins];
    for l in 0..n_lags {
        let x = &slow[l * m..(l + 1) * m];
        for q in 0..bins {
            values[l * bins + q] = x.iter().enumerate().map(|(i, v)| v * twiddle[(q * i) % bins]).sum();
        }
    }
    Ok(DelayDopplerMap { values, lags, bins, frames: m, frame_duration })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MapDetection {
    pub lag: usize,
    pub bin: usize,
    pub doppler: f64,
    pub velocity: f64,
    pub magnitude: f64,
}

/// Picks the `targets` strongest map cells above `threshold`. After each
/// pick the target's delay response is removed from the other rows, and
/// rows within `guard` lags are excluded. Detections come back sorted by
/// delay.
pub fn baseline_velocities(
    map: &DelayDopplerMap,
    estimator: &DelayEstimator,
    source_velocity: f64,
    wavelength: f64,
    targets: usize,
    threshold: f64,
    guard: usize,
) -> Result<Vec<MapDetection>> {
    let bins = map.bins;
    let n_lags = map.lags.len();
    let mut residual = map.values.clone();
    let mut blocked = alloc::vec![false; n_lags];
    let mut found: Vec<MapDetection> = Vec::new();
    let t0 = estimator.template(0);
    while found.len() < targets {
        let mut best: Option<(usize, usize, f64)> = None;
        for l in (0..n_lags).filter(|&l| !blocked[l]) {
            for q in 0..bins {
                let v = residual[l * bins + q].norm();
                if v > threshold && best.is_none_or(|b| v > b.2) {
                    best = Some((l, q, v));
                }
            }
        }
        let Some((l, q, mag)) = best else { break };
        let doppler = map.bin_doppler(q);
        found.push(MapDetection {
            lag: map.lags.start + l,
            bin: q,
            doppler,
            velocity: velocity_from_doppler(doppler, source_velocity, wavelength),
            magnitude: mag,
        });
        let picked: Vec<Complex64> = residual[l * bins..(l + 1) * bins].to_vec();
        for r in 0..n_lags {
            let t = estimator.template(r as isize - l as isize) / t0;
            if t != 0.0 {
                for (v, p) in residual[r * bins..(r + 1) * bins].iter_mut().zip(&picked) {
                    *v -= p * t;
                }
            }
        }
        for b in blocked.iter_mut().take((l + guard + 1).min(n_lags)).skip(l.saturating_sub(guard)) {
            *b = true;
        }
    }
    if found.is_empty() {
        return Err(Error::NoTarget);
    }
    if found.len() < targets {
        return Err(Error::DetectionShortfall { expected: targets, found: found.len() });
    }
    found.sort_by_key(|d| d.lag);
    Ok(found)
}
