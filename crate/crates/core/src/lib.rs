//! Multi-target velocity estimation for IEEE 802.11ad joint radar-communication.
//!
//! The crate covers the full symbol-rate signal chain of a vehicle-to-vehicle
//! radar that reuses the 802.11ad training field:
//!
//! - [`sequences`]: Golay complementary pairs, the 3328-sample preamble and the
//!   512-sample correlation segment.
//! - [`phasedarray`]: UPA steering vectors, the weighted wide beam and its
//!   beamwidth measurement.
//! - [`scene`]: target kinematics, radar-equation gains, backscatter
//!   coefficients and per-frame ground truth.
//! - [`waveform`]: root-raised-cosine filters used to check the Nyquist
//!   assumption behind the symbol-rate echo model.
//! - [`echo`]: discrete echo synthesis for every frame of a CPI.
//! - [`estimator`]: correlation delay search, least-squares coefficient
//!   recovery, Doppler extraction with wrap compensation and velocity mapping.
//! - [`baseline`]: a delay-Doppler-map reference estimator.
//!
//! Everything here is `no_std` with `alloc`; file formats, the CLI and the
//! Monte Carlo driver live in the `wigig-radar` crate.

#![cfg_attr(not(test), no_std)]
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;

pub mod baseline;
pub mod echo;
mod error;
pub mod estimator;
pub mod params;
pub mod phasedarray;
pub mod rng;
pub mod scene;
pub mod sequences;
pub mod waveform;

pub use error::{Error, Result};
pub use num_complex::Complex64;
pub use params::WaveformParams;
