//! Scenario files.
//!
//! A scenario is a TOML document. Every key is optional and falls back to
//! the built-in V2V scene:
//!
//! ```toml
//! source_velocity = 25.271   # m/s
//! tx_power_dbm = 10.0
//! cpi = 0.5e-3               # s
//! n0_dbm_hz = -174.0         # noise density
//! clutter_db = -130.0        # P_c = κ·P_TX
//! n_beams = 3
//! beamwidth = 0.4084         # rad, 3 dB azimuth width of the TX beam
//! beam_elevation = 0.0
//! range_gate = 256           # samples listened to past the preamble
//! random_beta = true         # β ~ CN(0,1) per trial, otherwise β = 1
//! preamble_only_window = false # least squares over K_pre rows only
//! noiseless = false          # skip noise and clutter samples
//! wrap_rule = "crossing-aware" # or "sign-branch", "signed-when-mixed"
//! seed = 1
//! trials = 200
//! m_i_offset = 6             # m_i = m_d - m_i_offset
//! search_halfwidth = 1024
//! threshold_scale = 1.0      # detection threshold in units of 512·σ_cn
//!
//! [[targets]]
//! velocity = 20.279
//! range = 5.0
//! azimuth = -0.1
//! elevation = 0.0
//! rcs_dbsm = 20.0
//! ```

use std::path::Path;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use wigig_radar_core::estimator::WrapRule;
use wigig_radar_core::params::{db_to_linear, dbm_to_watts};
use wigig_radar_core::phasedarray::{design_wide_beam, BeamformerWeights, UpaGeometry};
use wigig_radar_core::scene::{noise_clutter_variance, Scene, Target};
use wigig_radar_core::WaveformParams;

use crate::HarnessError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TargetConfig {
    pub velocity: f64,
    pub range: f64,
    pub azimuth: f64,
    pub elevation: f64,
    pub rcs_dbsm: f64,
}

impl Default for TargetConfig {
    fn default() -> Self {
        Self { velocity: 20.0, range: 5.0, azimuth: 0.0, elevation: 0.0, rcs_dbsm: 20.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum WrapRuleConfig {
    SignBranch,
    SignedWhenMixed,
    #[default]
    CrossingAware,
}

impl From<WrapRuleConfig> for WrapRule {
    fn from(r: WrapRuleConfig) -> Self {
        match r {
            WrapRuleConfig::SignBranch => WrapRule::SignBranch,
            WrapRuleConfig::SignedWhenMixed => WrapRule::SignedWhenMixed,
            WrapRuleConfig::CrossingAware => WrapRule::CrossingAware,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Scenario {
    pub source_velocity: f64,
    pub tx_power_dbm: f64,
    pub cpi: f64,
    pub n0_dbm_hz: f64,
    pub clutter_db: f64,
    pub n_beams: usize,
    pub beamwidth: f64,
    pub beam_elevation: f64,
    pub range_gate: usize,
    pub random_beta: bool,
    pub preamble_only_window: bool,
    pub noiseless: bool,
    pub wrap_rule: WrapRuleConfig,
    pub seed: u64,
    pub trials: usize,
    pub m_i_offset: usize,
    pub search_halfwidth: usize,
    pub threshold_scale: f64,
    pub targets: Vec<TargetConfig>,
}

impl Default for Scenario {
    fn default() -> Self {
        let target = |velocity, range, azimuth| TargetConfig { velocity, range, azimuth, ..Default::default() };
        Self {
            source_velocity: 25.271,
            tx_power_dbm: 10.0,
            cpi: 0.5e-3,
            n0_dbm_hz: -174.0,
            clutter_db: -130.0,
            n_beams: 3,
            beamwidth: 0.4084,
            beam_elevation: 0.0,
            range_gate: 256,
            random_beta: true,
            preamble_only_window: false,
            noiseless: false,
            wrap_rule: WrapRuleConfig::default(),
            seed: 1,
            trials: 200,
            m_i_offset: 6,
            search_halfwidth: 1024,
            threshold_scale: 1.0,
            targets: vec![target(20.279, 5.0, -0.1), target(24.949, 6.5, 0.0), target(21.806, 8.0, 0.1)],
        }
    }
}

impl Scenario {
    pub fn from_toml(text: &str) -> Result<Self, HarnessError> {
        let s: Scenario = toml::from_str(text).map_err(|e| HarnessError::Config(e.to_string()))?;
        s.validate()?;
        Ok(s)
    }

    pub fn load(path: &Path) -> Result<Self, HarnessError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| HarnessError::Config(format!("{}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        let bad = |m: &str| Err(HarnessError::Config(m.to_string()));
        if self.targets.is_empty() {
            return bad("scenario needs at least one target");
        }
        if self.trials == 0 {
            return bad("trials must be at least 1");
        }
        if self.n_beams == 0 {
            return bad("n_beams must be at least 1");
        }
        if self.targets.iter().any(|t| !(t.range > 0.0)) {
            return bad("target ranges must be positive");
        }
        if !(self.threshold_scale > 0.0) {
            return bad("threshold_scale must be positive");
        }
        if self.m_i_offset == 0 {
            return bad("m_i_offset must be at least 1");
        }
        let params = WaveformParams::ieee_80211ad();
        if !(self.cpi >= 2.0 * params.frame_duration()) {
            return bad("CPI must cover at least two frames");
        }
        Ok(())
    }

    pub fn params(&self) -> WaveformParams {
        WaveformParams::ieee_80211ad()
    }

    pub fn noise_variance(&self, tx_power_dbm: f64) -> f64 {
        let params = self.params();
        noise_clutter_variance(
            dbm_to_watts(self.n0_dbm_hz),
            params.bandwidth_hz,
            dbm_to_watts(tx_power_dbm),
            db_to_linear(self.clutter_db),
        )
    }

    pub fn beam(&self) -> Result<BeamformerWeights, HarnessError> {
        let geometry = UpaGeometry::default();
        design_wide_beam(self.n_beams, self.beamwidth, self.beam_elevation, &geometry.tx)
            .map_err(|e| HarnessError::Config(format!("beam design: {e}")))
    }

    /// Scene with `β_p = 1` at the given TX power.
    pub fn scene(&self, beam: &BeamformerWeights, tx_power_dbm: f64) -> Result<Scene, HarnessError> {
        let targets = self
            .targets
            .iter()
            .map(|t| Target {
                velocity: t.velocity,
                range: t.range,
                azimuth: t.azimuth,
                elevation: t.elevation,
                rcs: db_to_linear(t.rcs_dbsm),
                beta: Complex64::new(1.0, 0.0),
            })
            .collect();
        Scene::new(
            self.source_velocity,
            targets,
            self.params(),
            dbm_to_watts(tx_power_dbm),
            self.noise_variance(tx_power_dbm),
            UpaGeometry::default(),
            beam.clone(),
            self.range_gate,
        )
        .map_err(|e| HarnessError::Config(format!("scenario: {e}")))
    }
}
