//! Uniform planar array steering vectors and the weighted wide beam.
//!
//! Angles are in radians with broadside at `(0, 0)`; azimuth moves along the
//! x-axis, elevation along the y-axis. Element spacings are in wavelengths.

use alloc::vec::Vec;
use core::f64::consts::{FRAC_PI_2, PI};
use libm::{cos, sin};
use num_complex::Complex64;

use crate::{Error, Result};

/// One side (TX or RX) of the array.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Upa {
    pub nx: usize,
    pub ny: usize,
    pub dx: f64,
    pub dy: f64,
}

impl Upa {
    pub fn new(nx: usize, ny: usize, dx: f64, dy: f64) -> Result<Self> {
        if nx == 0 || ny == 0 {
            return Err(Error::InvalidArgument("antenna counts must be positive"));
        }
        if !(dx > 0.0 && dy > 0.0) {
            return Err(Error::InvalidArgument("element spacing must be positive"));
        }
        Ok(Self { nx, ny, dx, dy })
    }

    /// 8 × 2 elements at half-wavelength spacing.
    pub fn half_wave_8x2() -> Self {
        Self { nx: 8, ny: 2, dx: 0.5, dy: 0.5 }
    }

    pub fn elements(&self) -> usize {
        self.nx * self.ny
    }
}

/// Co-located TX and RX arrays of the source vehicle.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UpaGeometry {
    pub tx: Upa,
    pub rx: Upa,
}

impl UpaGeometry {
    pub fn side(&self, side: Side) -> &Upa {
        match side {
            Side::Tx => &self.tx,
            Side::Rx => &self.rx,
        }
    }
}

impl Default for UpaGeometry {
    fn default() -> Self {
        Self { tx: Upa::half_wave_8x2(), rx: Upa::half_wave_8x2() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    Tx,
    Rx,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SteeringVector(pub Vec<Complex64>);

impl SteeringVector {
    pub fn entries(&self) -> &[Complex64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// How a wide beam was assembled.
#[derive(Debug, Clone, PartialEq)]
pub struct BeamMeta {
    pub azimuths: Vec<f64>,
    pub weights: Vec<Complex64>,
    pub elevation: f64,
}

/// Unit-norm antenna weights.
#[derive(Debug, Clone, PartialEq)]
pub struct BeamformerWeights {
    pub entries: Vec<Complex64>,
    pub meta: BeamMeta,
}

impl BeamformerWeights {
    pub fn norm(&self) -> f64 {
        norm(&self.entries)
    }
}

fn norm(v: &[Complex64]) -> f64 {
    libm::sqrt(v.iter().map(|x| x.norm_sqr()).sum::<f64>())
}

fn progression(n: usize, psi: f64) -> SteeringVector {
    SteeringVector((0..n).map(|m| Complex64::from_polar(1.0, m as f64 * psi)).collect())
}

/// `[1, e^{jψx}, …]` with `ψx = 2π·dx·cos(ϑ)·sin(φ)`.
pub fn steering_x(azimuth: f64, elevation: f64, n: usize, dx: f64) -> SteeringVector {
    progression(n, 2.0 * PI * dx * cos(elevation) * sin(azimuth))
}

/// `[1, e^{jψy}, …]` with `ψy = 2π·dy·sin(ϑ)`.
pub fn steering_y(elevation: f64, n: usize, dy: f64) -> SteeringVector {
    progression(n, 2.0 * PI * dy * sin(elevation))
}

pub fn kron(x: &[Complex64], y: &[Complex64]) -> Vec<Complex64> {
    x.iter().flat_map(|a| y.iter().map(move |b| a * b)).collect()
}

/// Full-array response `a_x(φ, ϑ) ⊗ a_y(ϑ)`.
pub fn steering_upa(azimuth: f64, elevation: f64, upa: &Upa) -> SteeringVector {
    let x = steering_x(azimuth, elevation, upa.nx, upa.dx);
    let y = steering_y(elevation, upa.ny, upa.dy);
    SteeringVector(kron(&x.0, &y.0))
}

/// Weighted sum of x-axis beams at a common elevation, Kronecker-combined
/// with the y-axis beam and normalized.
pub fn wide_beam(
    azimuths: &[f64],
    weights: &[Complex64],
    elevation: f64,
    upa: &Upa,
) -> Result<BeamformerWeights> {
    if azimuths.is_empty() || azimuths.len() != weights.len() {
        return Err(Error::InvalidArgument(
            "beam angles and weights must be non-empty and of equal length",
        ));
    }
    let mut fx = alloc::vec![Complex64::new(0.0, 0.0); upa.nx];
    for (&phi, &gamma) in azimuths.iter().zip(weights) {
        for (acc, a) in fx.iter_mut().zip(steering_x(phi, elevation, upa.nx, upa.dx).0) {
            *acc += gamma * a;
        }
    }
    let fy = steering_y(elevation, upa.ny, upa.dy);
    let mut entries = kron(&fx, &fy.0);
    let n = norm(&entries);
    if !(n > 1e-12 * libm::sqrt(upa.elements() as f64)) {
        return Err(Error::DegenerateBeam);
    }
    entries.iter_mut().for_each(|e| *e /= n);
    Ok(BeamformerWeights {
        entries,
        meta: BeamMeta { azimuths: azimuths.to_vec(), weights: weights.to_vec(), elevation },
    })
}

/// Reciprocal receive beam `f_RX = f_TX*`.
pub fn rx_beam(f_tx: &BeamformerWeights) -> BeamformerWeights {
    BeamformerWeights {
        entries: f_tx.entries.iter().map(|e| e.conj()).collect(),
        meta: f_tx.meta.clone(),
    }
}

/// `|a(φ, ϑ)ᴴ f|²`.
pub fn beam_gain(f: &BeamformerWeights, azimuth: f64, elevation: f64, upa: &Upa) -> f64 {
    let a = steering_upa(azimuth, elevation, upa);
    a.0.iter()
        .zip(&f.entries)
        .map(|(a, f)| a.conj() * f)
        .sum::<Complex64>()
        .norm_sqr()
}

/// Pattern cut used by [`measure_beamwidth`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Cut {
    /// Sweep azimuth at a fixed elevation.
    Azimuth { elevation: f64 },
    /// Sweep elevation at a fixed azimuth.
    Elevation { azimuth: f64 },
}

const SCAN_STEP: f64 = 1e-3;

/// Width of the contiguous half-power region around the mainlobe peak.
pub fn measure_beamwidth(f: &BeamformerWeights, upa: &Upa, cut: Cut) -> Result<f64> {
    let n = libm::floor(PI / SCAN_STEP) as usize + 1;
    let angle = |i: usize| -FRAC_PI_2 + i as f64 * SCAN_STEP;
    let gain_at = |x: f64| match cut {
        Cut::Azimuth { elevation } => beam_gain(f, x, elevation, upa),
        Cut::Elevation { azimuth } => beam_gain(f, azimuth, x, upa),
    };
    let gains: Vec<f64> = (0..n).map(|i| gain_at(angle(i))).collect();
    let (peak_idx, &peak) = gains
        .iter()
        .enumerate()
        .fold((0, &f64::MIN), |best, cur| if cur.1 > best.1 { cur } else { best });
    if !(peak > 0.0) {
        return Err(Error::Measurement("pattern has no energy"));
    }
    let half = 0.5 * peak;

    let mut lo = peak_idx;
    while lo > 0 && gains[lo - 1] >= half {
        lo -= 1;
    }
    let mut hi = peak_idx;
    while hi + 1 < n && gains[hi + 1] >= half {
        hi += 1;
    }
    if lo == 0 || hi + 1 == n {
        return Err(Error::Measurement("no half-power crossing inside the scan"));
    }
    let left = refine_crossing(&gains, lo - 1, half, &angle);
    let right = refine_crossing(&gains, hi, half, &angle);
    Ok(right - left)
}

// Crossing between samples i and i+1: fit a parabola through three samples
// around the bracket and take its half-power root inside the bracket.
fn refine_crossing(g: &[f64], i: usize, half: f64, angle: &impl Fn(usize) -> f64) -> f64 {
    let linear = {
        let t = (half - g[i]) / (g[i + 1] - g[i]);
        angle(i) + t * SCAN_STEP
    };
    let c = i.clamp(1, g.len() - 2);
    let (y0, y1, y2) = (g[c - 1], g[c], g[c + 1]);
    // g(t) = a t² + b t + y1 with t in samples relative to c
    let a = 0.5 * (y0 + y2) - y1;
    let b = 0.5 * (y2 - y0);
    let cc = y1 - half;
    let lo = i as f64 - c as f64;
    let hi = lo + 1.0;
    let root = if libm::fabs(a) < 1e-15 {
        if b == 0.0 {
            None
        } else {
            Some(-cc / b)
        }
    } else {
        let disc = b * b - 4.0 * a * cc;
        if disc < 0.0 {
            None
        } else {
            let s = libm::sqrt(disc);
            [(-b + s) / (2.0 * a), (-b - s) / (2.0 * a)]
                .into_iter()
                .find(|t| *t >= lo - 1e-9 && *t <= hi + 1e-9)
        }
    };
    match root {
        Some(t) => angle(c) + t * SCAN_STEP,
        None => linear,
    }
}

/// Symmetric `N_c`-beam design with equal real weights at `{-kΔ, …, kΔ}`,
/// with `Δ` tuned so the azimuth half-power width hits `target_width`.
pub fn design_wide_beam(
    n_beams: usize,
    target_width: f64,
    elevation: f64,
    upa: &Upa,
) -> Result<BeamformerWeights> {
    if n_beams == 0 {
        return Err(Error::InvalidArgument("at least one beam is required"));
    }
    let build = |delta: f64| {
        let centre = (n_beams as f64 - 1.0) / 2.0;
        let az: Vec<f64> = (0..n_beams).map(|i| (i as f64 - centre) * delta).collect();
        let w = alloc::vec![Complex64::new(1.0, 0.0); n_beams];
        wide_beam(&az, &w, elevation, upa)
    };
    let cut = Cut::Azimuth { elevation };
    let width = |delta: f64| -> Result<f64> { measure_beamwidth(&build(delta)?, upa, cut) };

    if n_beams == 1 {
        return build(0.0);
    }
    if width(0.0)? >= target_width {
        return Err(Error::InvalidArgument("target beamwidth narrower than a single beam"));
    }
    // Coarse march until the width first reaches the target, then bisect.
    let step = 2e-3;
    let mut lo = 0.0;
    let mut hi = None;
    let mut delta = step;
    while delta < FRAC_PI_2 / n_beams as f64 {
        if let Ok(w) = width(delta) {
            if w >= target_width {
                hi = Some(delta);
                break;
            }
            lo = delta;
        }
        delta += step;
    }
    let mut hi = hi.ok_or(Error::Measurement("target beamwidth unreachable"))?;
    for _ in 0..40 {
        let mid = 0.5 * (lo + hi);
        if width(mid)? >= target_width {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    build(hi)
}
