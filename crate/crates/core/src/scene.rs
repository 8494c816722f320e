//! Ground truth of the V2V radar scene.
//!
//! Targets move at constant velocity along the road. The Doppler shift uses
//! the small-azimuth form `ν = 2(V_s - V_p)/λ`, delays are rounded to whole
//! samples, and each backscatter coefficient is fixed for the whole CPI.

use alloc::vec::Vec;
use core::f64::consts::PI;
use num_complex::Complex64;

use crate::params::{WaveformParams, SPEED_OF_LIGHT};
use crate::phasedarray::{steering_upa, BeamformerWeights, UpaGeometry};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Target {
    /// Absolute velocity `V_p` in m/s.
    pub velocity: f64,
    /// Range at the start of the CPI, meters.
    pub range: f64,
    pub azimuth: f64,
    pub elevation: f64,
    /// Radar cross section in m².
    pub rcs: f64,
    /// Small-scale gain `β_p`.
    pub beta: Complex64,
}

impl Target {
    /// Range after `t` seconds; the gap closes when the source is faster.
    pub fn range_at(&self, source_velocity: f64, t: f64) -> f64 {
        self.range + (self.velocity - source_velocity) * t
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scene {
    pub source_velocity: f64,
    pub targets: Vec<Target>,
    pub params: WaveformParams,
    pub tx_power: f64,
    /// `σ_cn²` in watts.
    pub noise_variance: f64,
    pub geometry: UpaGeometry,
    pub f_tx: BeamformerWeights,
    pub f_rx: BeamformerWeights,
    /// Receive window length past the preamble, in samples.
    pub range_gate: usize,
    h: Vec<Complex64>,
}

impl Scene {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        source_velocity: f64,
        targets: Vec<Target>,
        params: WaveformParams,
        tx_power: f64,
        noise_variance: f64,
        geometry: UpaGeometry,
        f_tx: BeamformerWeights,
        range_gate: usize,
    ) -> Result<Self> {
        if targets.is_empty() {
            return Err(Error::Scenario("scene needs at least one target"));
        }
        if !(noise_variance > 0.0) {
            return Err(Error::Scenario("noise-plus-clutter variance must be positive"));
        }
        if !(tx_power >= 0.0) {
            return Err(Error::Scenario("TX power must be nonnegative"));
        }
        let lambda = params.wavelength();
        let f_rx = crate::phasedarray::rx_beam(&f_tx);
        let h = targets
            .iter()
            .map(|t| {
                let g = large_scale_gain(t.range, t.rcs, lambda)?;
                Ok(backscatter_coefficient(t, &f_tx, &f_rx, g, &geometry))
            })
            .collect::<Result<Vec<_>>>()?;
        let scene = Self {
            source_velocity,
            targets,
            params,
            tx_power,
            noise_variance,
            geometry,
            f_tx,
            f_rx,
            range_gate,
            h,
        };
        scene.delays_at(0)?;
        Ok(scene)
    }

    /// Backscatter coefficients `h_p`, constant over the CPI.
    pub fn backscatter(&self) -> &[Complex64] {
        &self.h
    }

    /// Same scene with `β_p` replaced, keeping beams and geometry.
    pub fn with_betas(&self, betas: &[Complex64]) -> Result<Self> {
        if betas.len() != self.targets.len() {
            return Err(Error::InvalidArgument("one β per target is required"));
        }
        let mut targets = self.targets.clone();
        for (t, &b) in targets.iter_mut().zip(betas) {
            t.beta = b;
        }
        Self::new(
            self.source_velocity,
            targets,
            self.params,
            self.tx_power,
            self.noise_variance,
            self.geometry,
            self.f_tx.clone(),
            self.range_gate,
        )
    }

    /// Same scene at a different TX power.
    pub fn with_tx_power(&self, tx_power: f64) -> Self {
        Self { tx_power, ..self.clone() }
    }

    pub fn dopplers(&self) -> Vec<f64> {
        let lambda = self.params.wavelength();
        self.targets
            .iter()
            .map(|t| doppler_shift(self.source_velocity, t.velocity, lambda))
            .collect()
    }

    fn delays_at(&self, m: usize) -> Result<Vec<usize>> {
        let t = m as f64 * self.params.frame_duration();
        let mut delays = Vec::with_capacity(self.targets.len());
        for target in &self.targets {
            let r = target.range_at(self.source_velocity, t);
            let d = libm::round(self.params.delay_samples(r));
            if !(d >= 0.0) {
                return Err(Error::Scenario("target delay became negative"));
            }
            let d = d as usize;
            if let Some(&prev) = delays.last() {
                if d <= prev {
                    return Err(Error::Scenario("target delays must be strictly increasing"));
                }
            }
            if d > self.range_gate {
                return Err(Error::Scenario("target delay beyond the range gate"));
            }
            delays.push(d);
        }
        Ok(delays)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FrameTruth {
    pub doppler: Vec<f64>,
    pub delays: Vec<usize>,
    pub h: Vec<Complex64>,
}

/// Two-way `ν = 2(V_s - V_p)/λ`.
pub fn doppler_shift(source_velocity: f64, target_velocity: f64, wavelength: f64) -> f64 {
    2.0 * (source_velocity - target_velocity) / wavelength
}

/// Monostatic radar range equation `λ²σ / ((4π)³ r⁴)`.
pub fn large_scale_gain(range: f64, rcs: f64, wavelength: f64) -> Result<f64> {
    if !(range > 0.0) {
        return Err(Error::InvalidArgument("range must be positive"));
    }
    if !(rcs > 0.0) {
        return Err(Error::InvalidArgument("RCS must be positive"));
    }
    let four_pi_cubed = libm::pow(4.0 * PI, 3.0);
    Ok(wavelength * wavelength * rcs / (four_pi_cubed * libm::pow(range, 4.0)))
}

/// `h_p = √G_p β_p (f_RXᴴ a_RX*(φ,θ)) (a_TXᴴ(φ,θ) f_TX)`.
pub fn backscatter_coefficient(
    target: &Target,
    f_tx: &BeamformerWeights,
    f_rx: &BeamformerWeights,
    gain: f64,
    geometry: &UpaGeometry,
) -> Complex64 {
    let a_rx = steering_upa(target.azimuth, target.elevation, &geometry.rx);
    let a_tx = steering_upa(target.azimuth, target.elevation, &geometry.tx);
    let rx: Complex64 = f_rx.entries.iter().zip(&a_rx.0).map(|(f, a)| f.conj() * a.conj()).sum();
    let tx: Complex64 = a_tx.0.iter().zip(&f_tx.entries).map(|(a, f)| a.conj() * f).sum();
    libm::sqrt(gain) * target.beta * rx * tx
}

/// Doppler, integer delay and coefficient of every target at frame `m`.
pub fn frame_truth(scene: &Scene, m: usize) -> Result<FrameTruth> {
    Ok(FrameTruth {
        doppler: scene.dopplers(),
        delays: scene.delays_at(m)?,
        h: scene.h.clone(),
    })
}

/// `σ_cn² = N0·W + κ·P_TX`.
pub fn noise_clutter_variance(n0: f64, bandwidth: f64, tx_power: f64, clutter_ratio: f64) -> f64 {
    n0 * bandwidth + clutter_ratio * tx_power
}

/// Range whose round-trip delay is `samples` at the given bandwidth.
pub fn range_for_delay(samples: f64, bandwidth: f64) -> f64 {
    samples * SPEED_OF_LIGHT / (2.0 * bandwidth)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::params::db_to_linear;
    use crate::phasedarray::{wide_beam, Upa};

    fn broadside_beam() -> BeamformerWeights {
        wide_beam(&[0.0], &[Complex64::new(1.0, 0.0)], 0.0, &Upa::half_wave_8x2()).unwrap()
    }

    fn target(velocity: f64, range: f64) -> Target {
        Target {
            velocity,
            range,
            azimuth: 0.0,
            elevation: 0.0,
            rcs: 100.0,
            beta: Complex64::new(1.0, 0.0),
        }
    }

    fn scene(targets: Vec<Target>) -> Result<Scene> {
        Scene::new(
            25.271,
            targets,
            WaveformParams::ieee_80211ad(),
            0.01,
            1e-11,
            UpaGeometry::default(),
            broadside_beam(),
            1024,
        )
    }

    #[test]
    fn gain_follows_range_equation() {
        let g1 = large_scale_gain(50.0, 100.0, 5e-3).unwrap();
        let g2 = large_scale_gain(100.0, 100.0, 5e-3).unwrap();
        assert!((g1 / g2 - 16.0).abs() < 1e-9);
        let unit = large_scale_gain(50.0, 1.0, 5e-3).unwrap();
        let rcs20 = large_scale_gain(50.0, db_to_linear(20.0), 5e-3).unwrap();
        assert!((rcs20 / unit - 100.0).abs() < 1e-9);
        // (4π)³ = 1984.40..., 25e-6·100 / (1984.40·6.25e6)
        let expected = 25e-6 * 100.0 / (1984.4017 * 6.25e6);
        assert!((g1 / expected - 1.0).abs() < 1e-6, "{g1}");
        assert!((g1 - 2.016e-13).abs() < 1e-16);
        assert!(large_scale_gain(0.0, 1.0, 5e-3).is_err());
        assert!(large_scale_gain(-3.0, 1.0, 5e-3).is_err());
    }

    #[test]
    fn backscatter_matches_term_by_term() {
        let upa = Upa::half_wave_8x2();
        let geometry = UpaGeometry::default();
        let f = broadside_beam();
        let frx = crate::phasedarray::rx_beam(&f);
        let t = target(20.0, 30.0);
        let h = backscatter_coefficient(&t, &f, &frx, 1.0, &geometry);
        // Matched broadside beam: each array factor is 16 / 4 = 4.
        assert!((h - Complex64::new(16.0, 0.0)).norm() < 1e-12);

        let off = Target { azimuth: 0.17, elevation: -0.05, beta: Complex64::new(0.3, -0.8), ..t };
        let h = backscatter_coefficient(&off, &f, &frx, 2.5, &geometry);
        let a = steering_upa(0.17, -0.05, &upa);
        let mut rx = Complex64::new(0.0, 0.0);
        let mut tx = Complex64::new(0.0, 0.0);
        for i in 0..16 {
            rx += frx.entries[i].conj() * a.0[i].conj();
            tx += a.0[i].conj() * f.entries[i];
        }
        let direct = 2.5f64.sqrt() * Complex64::new(0.3, -0.8) * rx * tx;
        assert!((h - direct).norm() < 1e-12);

        let zero = Target { beta: Complex64::new(0.0, 0.0), ..off.clone() };
        assert_eq!(backscatter_coefficient(&zero, &f, &frx, 2.5, &geometry), Complex64::new(0.0, 0.0));
        let rotated = Target { beta: off.beta * Complex64::from_polar(1.0, 1.1), ..off };
        let hr = backscatter_coefficient(&rotated, &f, &frx, 2.5, &geometry);
        assert!((hr.norm() - h.norm()).abs() < 1e-12);
    }

    #[test]
    fn frame_truth_examples() {
        let s = scene(vec![target(25.271, 20.0), target(20.279, 50.0)]).unwrap();
        let t0 = frame_truth(&s, 0).unwrap();
        assert_eq!(t0.doppler[0], 0.0);
        let lambda = SPEED_OF_LIGHT / 60e9;
        assert!((t0.doppler[1] - 2.0 * 4.992 / lambda).abs() < 1e-9);
        assert!((t0.doppler[1] - 1998.2).abs() < 0.05);
        // 2·50/c·1.76e9 = 587.07
        assert_eq!(t0.delays[1], 587);
        let t100 = frame_truth(&s, 100).unwrap();
        assert_eq!(t100.delays[0], t0.delays[0]);
        assert_eq!(t100.h, t0.h);
    }

    #[test]
    fn delays_drift_slowly() {
        let s = scene(vec![target(15.271, 40.0)]).unwrap();
        let mut prev = frame_truth(&s, 0).unwrap().delays[0];
        for m in 1..129 {
            let d = frame_truth(&s, m).unwrap().delays[0];
            assert!(d.abs_diff(prev) <= 1);
            prev = d;
        }
    }

    #[test]
    fn scene_rejects_bad_ordering() {
        assert!(matches!(scene(vec![target(20.0, 50.0), target(20.0, 30.0)]), Err(Error::Scenario(_))));
        assert!(matches!(scene(vec![target(20.0, 30.0), target(20.0, 30.01)]), Err(Error::Scenario(_))));
        assert!(matches!(scene(vec![]), Err(Error::Scenario(_))));
        assert!(matches!(scene(vec![target(20.0, 200.0)]), Err(Error::Scenario(_))));
    }

    #[test]
    fn noise_variance_examples() {
        let n0 = db_to_linear(-174.0) * 1e-3;
        let s = noise_clutter_variance(n0, 1.76e9, 1.0, 0.0);
        assert!((s / 7.007e-12 - 1.0).abs() < 1e-3, "{s}");
        assert!((noise_clutter_variance(n0, 3.52e9, 1.0, 0.0) / s - 2.0).abs() < 1e-12);
        assert_eq!(noise_clutter_variance(n0, 1.76e9, 0.0, 0.5), n0 * 1.76e9);
    }
}
