//! Root-raised-cosine pulse shaping.
//!
//! The simulation runs at one sample per symbol straight on the discrete
//! echo model, so these filters are only used to check that the TX/RX
//! cascade is Nyquist (no ISI at symbol instants) for the configured span.

use alloc::vec::Vec;
use core::f64::consts::{PI, SQRT_2};
use libm::{cos, fabs, sin, sqrt};

use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct RrcFilter {
    pub rolloff: f64,
    pub span: usize,
    pub samples_per_symbol: usize,
    pub taps: Vec<f64>,
}

fn rrc_at(t: f64, beta: f64) -> f64 {
    if fabs(t) < 1e-12 {
        return 1.0 - beta + 4.0 * beta / PI;
    }
    if beta > 0.0 && fabs(fabs(t) - 1.0 / (4.0 * beta)) < 1e-9 {
        let x = PI / (4.0 * beta);
        return beta / SQRT_2 * ((1.0 + 2.0 / PI) * sin(x) + (1.0 - 2.0 / PI) * cos(x));
    }
    let num = sin(PI * t * (1.0 - beta)) + 4.0 * beta * t * cos(PI * t * (1.0 + beta));
    let den = PI * t * (1.0 - (4.0 * beta * t) * (4.0 * beta * t));
    num / den
}

/// Unit-energy RRC taps spanning `span` symbols (`span·sps + 1` taps).
pub fn rrc_taps(rolloff: f64, span: usize, samples_per_symbol: usize) -> Result<RrcFilter> {
    if !(0.0..=1.0).contains(&rolloff) {
        return Err(Error::InvalidArgument("roll-off must lie in [0, 1]"));
    }
    if span < 2 || !span.is_multiple_of(2) {
        return Err(Error::InvalidArgument("span must be an even number of symbols >= 2"));
    }
    if samples_per_symbol < 2 {
        return Err(Error::InvalidArgument("at least two samples per symbol are required"));
    }
    let len = span * samples_per_symbol + 1;
    let mid = (len / 2) as f64;
    let mut taps: Vec<f64> = (0..len)
        .map(|i| rrc_at((i as f64 - mid) / samples_per_symbol as f64, rolloff))
        .collect();
    let energy = sqrt(taps.iter().map(|t| t * t).sum::<f64>());
    taps.iter_mut().for_each(|t| *t /= energy);
    Ok(RrcFilter { rolloff, span, samples_per_symbol, taps })
}

/// Worst symbol-spaced ISI of `g_TX * g_RX`, relative to its peak.
pub fn nyquist_residual(f: &RrcFilter) -> f64 {
    let n = f.taps.len();
    let mut cascade = alloc::vec![0.0; 2 * n - 1];
    for (i, a) in f.taps.iter().enumerate() {
        for (j, b) in f.taps.iter().enumerate() {
            cascade[i + j] += a * b;
        }
    }
    let centre = n - 1;
    let peak = cascade[centre];
    let sps = f.samples_per_symbol;
    (1..=centre / sps)
        .flat_map(|k| [cascade[centre - k * sps], cascade[centre + k * sps]])
        .map(|v| fabs(v) / peak)
        .fold(0.0, f64::max)
}
