//! Monte Carlo trials, NMSE aggregation and the frame-gap / CPI sweeps.
//!
//! Every random draw of a trial comes from a substream keyed by
//! `(seed, trial, stream)`: stream 0 for `β`, stream `m + 1` for the noise of
//! frame `m`. Frame `m` of trial `t` is therefore identical across gaps,
//! CPIs and estimators (common random numbers), and results do not depend on
//! how trials are spread over threads.

use num_complex::Complex64;
use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;
use wigig_radar_core::baseline::{baseline_velocities, delay_doppler_map};
use wigig_radar_core::echo::{frame_noise, synthesize_frame, EchoFrame};
use wigig_radar_core::estimator::{run_pipeline, DelayEstimator, DelaySearch, PipelineConfig, RowSpan};
use wigig_radar_core::phasedarray::BeamformerWeights;
use wigig_radar_core::rng::{complex_normal, substream, BETA_STREAM, BOOTSTRAP_STREAM};
use wigig_radar_core::scene::{frame_truth, Scene};
use wigig_radar_core::sequences::{build_preamble, Preamble, CORRELATION_LEN};
use wigig_radar_core::Error as CoreError;

use crate::config::Scenario;
use crate::HarnessError;

pub const BOOTSTRAP_RESAMPLES: usize = 1000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum EstimatorKind {
    Proposed,
    Baseline,
}

impl EstimatorKind {
    pub fn name(self) -> &'static str {
        match self {
            EstimatorKind::Proposed => "proposed",
            EstimatorKind::Baseline => "baseline",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, clap::ValueEnum)]
pub enum Selection {
    Proposed,
    Baseline,
    #[default]
    Both,
}

impl Selection {
    pub fn kinds(self) -> &'static [EstimatorKind] {
        match self {
            Selection::Proposed => &[EstimatorKind::Proposed],
            Selection::Baseline => &[EstimatorKind::Baseline],
            Selection::Both => &[EstimatorKind::Proposed, EstimatorKind::Baseline],
        }
    }
}

/// One operating point of an experiment.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub scenario: Scenario,
    pub cpi: f64,
    pub tx_power_dbm: f64,
    pub trials: usize,
    pub m_i_offset: usize,
    pub selection: Selection,
    pub seed: u64,
}

impl ExperimentConfig {
    pub fn from_scenario(scenario: Scenario) -> Self {
        Self {
            cpi: scenario.cpi,
            tx_power_dbm: scenario.tx_power_dbm,
            trials: scenario.trials,
            m_i_offset: scenario.m_i_offset,
            seed: scenario.seed,
            selection: Selection::Both,
            scenario,
        }
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        if self.trials == 0 {
            return Err(HarnessError::Config("trials must be at least 1".into()));
        }
        let m = frames_in_cpi(&self.scenario, self.cpi)?;
        if self.m_i_offset == 0 || self.m_i_offset >= m {
            return Err(HarnessError::Config(format!(
                "m_i offset {} must lie in 1..{m} for {m} frames",
                self.m_i_offset
            )));
        }
        Ok(())
    }
}

fn frames_in_cpi(scenario: &Scenario, cpi: f64) -> Result<usize, HarnessError> {
    let m = scenario
        .params()
        .frames_in_cpi(cpi)
        .map_err(|e| HarnessError::Config(format!("CPI {cpi}: {e}")))?;
    if m < 2 {
        return Err(HarnessError::Config(format!("CPI {cpi} s holds fewer than two frames")));
    }
    Ok(m)
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrialEstimate {
    pub velocities: Vec<f64>,
    /// Frame-0 delays for the proposed estimator, map lags for the baseline.
    pub delays: Vec<usize>,
    /// Empty for the baseline.
    pub wrap_counts: Vec<i64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrialRecord {
    pub seed: u64,
    pub trial: u64,
    pub estimator: EstimatorKind,
    pub truth: Vec<f64>,
    /// `Err` carries the reason a trial failed (missed detection and the like).
    pub outcome: Result<TrialEstimate, String>,
}

impl TrialRecord {
    pub fn failed(&self) -> bool {
        self.outcome.is_err()
    }
}

/// Errors that make a single trial fail rather than the whole run.
fn is_trial_failure(e: &CoreError) -> bool {
    matches!(
        e,
        CoreError::NoTarget
            | CoreError::DetectionShortfall { .. }
            | CoreError::Association { .. }
            | CoreError::IllConditioned { .. }
            | CoreError::SingularDesign(_)
            | CoreError::ZeroCoefficient(_)
    )
}

fn outcome(r: Result<TrialEstimate, CoreError>) -> Result<Result<TrialEstimate, String>, HarnessError> {
    match r {
        Ok(e) => Ok(Ok(e)),
        Err(e) if is_trial_failure(&e) => Ok(Err(e.to_string())),
        Err(e) => Err(e.into()),
    }
}

/// `(1/P) Σ_p mean_t ((V_p - V̂_p)/V_p)²` over the successful trials.
pub fn nmse(records: &[TrialRecord]) -> Result<f64, HarnessError> {
    let ok: Vec<&TrialRecord> = records.iter().filter(|r| !r.failed()).collect();
    nmse_of(&ok)
}

fn nmse_of(ok: &[&TrialRecord]) -> Result<f64, HarnessError> {
    let first = ok
        .first()
        .ok_or_else(|| HarnessError::Aggregation("no successful trials".into()))?;
    let p = first.truth.len();
    let mut per_target = vec![0.0; p];
    for r in ok {
        let est = r.outcome.as_ref().expect("filtered");
        if est.velocities.len() != p || r.truth.len() != p {
            return Err(HarnessError::Aggregation("target count differs between trials".into()));
        }
        for (acc, (v, v_hat)) in per_target.iter_mut().zip(r.truth.iter().zip(&est.velocities)) {
            *acc += ((v - v_hat) / v).powi(2);
        }
    }
    Ok(per_target.iter().map(|s| s / ok.len() as f64).sum::<f64>() / p as f64)
}

/// Percentile bootstrap 95% interval of the NMSE over successful trials.
pub fn bootstrap_ci(records: &[TrialRecord], seed: u64, resamples: usize) -> Result<(f64, f64), HarnessError> {
    let ok: Vec<&TrialRecord> = records.iter().filter(|r| !r.failed()).collect();
    if ok.is_empty() {
        return Err(HarnessError::Aggregation("no successful trials".into()));
    }
    let mut rng = substream(seed, 0, BOOTSTRAP_STREAM);
    let mut stats = Vec::with_capacity(resamples);
    let mut sample = Vec::with_capacity(ok.len());
    for _ in 0..resamples {
        sample.clear();
        sample.extend((0..ok.len()).map(|_| ok[rng.random_range(0..ok.len())]));
        stats.push(nmse_of(&sample)?);
    }
    stats.sort_by(f64::total_cmp);
    let pick = |q: f64| stats[((q * (resamples - 1) as f64).round() as usize).min(resamples - 1)];
    Ok((pick(0.025), pick(0.975)))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PointResult {
    pub x: f64,
    pub estimator: EstimatorKind,
    pub p_tx_dbm: f64,
    pub nmse: f64,
    pub ci_lo: f64,
    pub ci_hi: f64,
    pub trials: usize,
    pub failures: usize,
}

impl PointResult {
    pub fn summarize(
        x: f64,
        estimator: EstimatorKind,
        p_tx_dbm: f64,
        records: &[TrialRecord],
        seed: u64,
    ) -> Result<Self, HarnessError> {
        let nmse = nmse(records)?;
        let (ci_lo, ci_hi) = bootstrap_ci(records, seed, BOOTSTRAP_RESAMPLES)?;
        Ok(Self {
            x,
            estimator,
            p_tx_dbm,
            nmse,
            ci_lo,
            ci_hi,
            trials: records.len(),
            failures: records.iter().filter(|r| r.failed()).count(),
        })
    }
}

/// Shared state for running trials of one scenario.
#[derive(Debug, Clone)]
pub struct Simulator {
    pub scenario: Scenario,
    beam: BeamformerWeights,
    preamble: Preamble,
    estimator: DelayEstimator,
}

impl Simulator {
    pub fn new(scenario: Scenario) -> Result<Self, HarnessError> {
        scenario.validate()?;
        let beam = scenario.beam()?;
        let preamble = build_preamble();
        let estimator = DelayEstimator::new(&preamble, scenario.range_gate);
        Ok(Self { scenario, beam, preamble, estimator })
    }

    pub fn beam(&self) -> &BeamformerWeights {
        &self.beam
    }

    pub fn truth(&self) -> Vec<f64> {
        self.scenario.targets.iter().map(|t| t.velocity).collect()
    }

    /// Scene of one trial: `β` drawn from the trial's β stream, or pinned.
    pub fn trial_scene(&self, tx_power_dbm: f64, seed: u64, trial: u64) -> Result<Scene, HarnessError> {
        let scene = self.scenario.scene(&self.beam, tx_power_dbm)?;
        if !self.scenario.random_beta {
            return Ok(scene);
        }
        let mut rng = substream(seed, trial, BETA_STREAM);
        let betas: Vec<Complex64> = scene.targets.iter().map(|_| complex_normal(&mut rng, 1.0)).collect();
        Ok(scene.with_betas(&betas)?)
    }

    pub fn frame(&self, scene: &Scene, seed: u64, trial: u64, m: usize) -> Result<EchoFrame, HarnessError> {
        let truth = frame_truth(scene, m)?;
        let frame = if self.scenario.noiseless {
            synthesize_frame::<rand_chacha::ChaCha8Rng>(scene, &truth, &self.preamble, m, None)?
        } else {
            let mut rng = frame_noise(seed, trial, m);
            synthesize_frame(scene, &truth, &self.preamble, m, Some(&mut rng))?
        };
        Ok(frame)
    }

    pub fn frames(
        &self,
        scene: &Scene,
        seed: u64,
        trial: u64,
        indices: impl IntoIterator<Item = usize>,
    ) -> Result<Vec<EchoFrame>, HarnessError> {
        indices.into_iter().map(|m| self.frame(scene, seed, trial, m)).collect()
    }

    fn span(&self) -> RowSpan {
        if self.scenario.preamble_only_window {
            RowSpan::PreambleOnly
        } else {
            RowSpan::Extended
        }
    }

    pub fn proposed(&self, scene: &Scene, frames: &[EchoFrame], m_d: usize, m_i: usize) -> Result<TrialEstimate, CoreError> {
        let threshold = self.scenario.threshold_scale * DelaySearch::noise_threshold(scene.noise_variance);
        let mut search = DelaySearch::new(threshold, Some(scene.targets.len()));
        search.search_halfwidth = self.scenario.search_halfwidth;
        let cfg = PipelineConfig { m_d, m_i, search, span: self.span(), wrap_rule: self.scenario.wrap_rule.into() };
        let out = run_pipeline(frames, &cfg, &self.estimator, &scene.params, scene.tx_power, scene.source_velocity)?;
        Ok(TrialEstimate {
            velocities: out.velocities,
            delays: out.delays[0].delays.clone(),
            wrap_counts: out.doppler.iter().map(|d| d.wrap_count).collect(),
        })
    }

    /// Baseline on frames `0..M`; `frames` must hold exactly those.
    pub fn baseline(&self, scene: &Scene, frames: &[EchoFrame]) -> Result<TrialEstimate, CoreError> {
        let m = frames.len();
        let map = delay_doppler_map(
            frames,
            self.estimator.segment(),
            0..self.scenario.range_gate + 1,
            scene.params.frame_duration(),
            1,
        )?;
        let threshold =
            self.scenario.threshold_scale * CORRELATION_LEN as f64 * (m as f64).sqrt() * scene.noise_variance.sqrt();
        let found = baseline_velocities(
            &map,
            &self.estimator,
            scene.source_velocity,
            scene.params.wavelength(),
            scene.targets.len(),
            threshold,
            8,
        )?;
        Ok(TrialEstimate {
            velocities: found.iter().map(|d| d.velocity).collect(),
            delays: found.iter().map(|d| d.lag).collect(),
            wrap_counts: Vec::new(),
        })
    }

    fn record(&self, seed: u64, trial: u64, kind: EstimatorKind, r: Result<TrialEstimate, CoreError>) -> Result<TrialRecord, HarnessError> {
        Ok(TrialRecord { seed, trial, estimator: kind, truth: self.truth(), outcome: outcome(r)? })
    }

    /// All trials of one operating point, one record list per selected
    /// estimator.
    pub fn run_point(&self, cfg: &ExperimentConfig) -> Result<Vec<(EstimatorKind, Vec<TrialRecord>)>, HarnessError> {
        cfg.validate()?;
        let m = frames_in_cpi(&self.scenario, cfg.cpi)?;
        let (m_d, m_i) = (m - 1, m - 1 - cfg.m_i_offset);
        let kinds = cfg.selection.kinds();
        let per_trial: Vec<Vec<TrialRecord>> = (0..cfg.trials as u64)
            .into_par_iter()
            .map(|t| -> Result<Vec<TrialRecord>, HarnessError> {
                let scene = self.trial_scene(cfg.tx_power_dbm, cfg.seed, t)?;
                let frames = if kinds.contains(&EstimatorKind::Baseline) {
                    self.frames(&scene, cfg.seed, t, 0..m)?
                } else {
                    self.frames(&scene, cfg.seed, t, [0, m_i, m_d])?
                };
                kinds
                    .iter()
                    .map(|&k| {
                        let r = match k {
                            EstimatorKind::Proposed => self.proposed(&scene, &frames, m_d, m_i),
                            EstimatorKind::Baseline => self.baseline(&scene, &frames),
                        };
                        self.record(cfg.seed, t, k, r)
                    })
                    .collect()
            })
            .collect::<Result<_, _>>()?;
        Ok(kinds
            .iter()
            .enumerate()
            .map(|(i, &k)| (k, per_trial.iter().map(|v| v[i].clone()).collect()))
            .collect())
    }

    pub fn simulate(&self, cfg: &ExperimentConfig) -> Result<(Vec<PointResult>, Vec<TrialRecord>), HarnessError> {
        let runs = self.run_point(cfg)?;
        let mut rows = Vec::new();
        let mut all = Vec::new();
        for (k, records) in runs {
            rows.push(PointResult::summarize(cfg.cpi, k, cfg.tx_power_dbm, &records, cfg.seed)?);
            all.extend(records);
        }
        Ok((rows, all))
    }

    /// Proposed estimator over frame gaps `m_d - m_i` with `m_d = M - 1`.
    pub fn sweep_framegap(&self, cfg: &ExperimentConfig, gaps: &[usize]) -> Result<Vec<PointResult>, HarnessError> {
        if cfg.trials == 0 {
            return Err(HarnessError::Config("trials must be at least 1".into()));
        }
        let m = frames_in_cpi(&self.scenario, cfg.cpi)?;
        if let Some(&g) = gaps.iter().find(|&&g| g == 0 || g >= m) {
            return Err(HarnessError::Config(format!("frame gap {g} must lie in 1..{m}")));
        }
        let m_d = m - 1;
        let mut needed: Vec<usize> = gaps.iter().map(|g| m_d - g).chain([0, m_d]).collect();
        needed.sort_unstable();
        needed.dedup();
        let per_trial: Vec<Vec<TrialRecord>> = (0..cfg.trials as u64)
            .into_par_iter()
            .map(|t| -> Result<Vec<TrialRecord>, HarnessError> {
                let scene = self.trial_scene(cfg.tx_power_dbm, cfg.seed, t)?;
                let frames = self.frames(&scene, cfg.seed, t, needed.iter().copied())?;
                gaps.iter()
                    .map(|&g| {
                        let r = self.proposed(&scene, &frames, m_d, m_d - g);
                        self.record(cfg.seed, t, EstimatorKind::Proposed, r)
                    })
                    .collect()
            })
            .collect::<Result<_, _>>()?;
        gaps.iter()
            .enumerate()
            .map(|(i, &g)| {
                let records: Vec<TrialRecord> = per_trial.iter().map(|v| v[i].clone()).collect();
                PointResult::summarize(g as f64, EstimatorKind::Proposed, cfg.tx_power_dbm, &records, cfg.seed)
            })
            .collect()
    }

    /// NMSE per `(CPI, estimator, P_TX)` with `m_i = m_d - m_i_offset`.
    pub fn sweep_cpi(
        &self,
        cfg: &ExperimentConfig,
        cpis: &[f64],
        powers_dbm: &[f64],
    ) -> Result<Vec<PointResult>, HarnessError> {
        if cfg.trials == 0 {
            return Err(HarnessError::Config("trials must be at least 1".into()));
        }
        let ms = cpis.iter().map(|&c| frames_in_cpi(&self.scenario, c)).collect::<Result<Vec<_>, _>>()?;
        if let Some(&m) = ms.iter().find(|&&m| cfg.m_i_offset == 0 || cfg.m_i_offset >= m) {
            return Err(HarnessError::Config(format!("m_i offset {} does not fit {m} frames", cfg.m_i_offset)));
        }
        let m_max = ms.iter().copied().max().unwrap_or(0);
        let kinds = cfg.selection.kinds();
        let with_baseline = kinds.contains(&EstimatorKind::Baseline);
        let mut rows = Vec::new();
        for &p in powers_dbm {
            // per_trial[t][cpi][kind]
            let per_trial: Vec<Vec<Vec<TrialRecord>>> = (0..cfg.trials as u64)
                .into_par_iter()
                .map(|t| -> Result<_, HarnessError> {
                    let scene = self.trial_scene(p, cfg.seed, t)?;
                    let frames = if with_baseline {
                        self.frames(&scene, cfg.seed, t, 0..m_max)?
                    } else {
                        let mut idx: Vec<usize> =
                            ms.iter().flat_map(|&m| [m - 1, m - 1 - cfg.m_i_offset]).chain([0]).collect();
                        idx.sort_unstable();
                        idx.dedup();
                        self.frames(&scene, cfg.seed, t, idx)?
                    };
                    ms.iter()
                        .map(|&m| {
                            kinds
                                .iter()
                                .map(|&k| {
                                    let r = match k {
                                        EstimatorKind::Proposed => {
                                            self.proposed(&scene, &frames, m - 1, m - 1 - cfg.m_i_offset)
                                        }
                                        EstimatorKind::Baseline => self.baseline(&scene, &frames[..m]),
                                    };
                                    self.record(cfg.seed, t, k, r)
                                })
                                .collect()
                        })
                        .collect()
                })
                .collect::<Result<_, _>>()?;
            for (ci, &cpi) in cpis.iter().enumerate() {
                for (ki, &k) in kinds.iter().enumerate() {
                    let records: Vec<TrialRecord> = per_trial.iter().map(|v| v[ci][ki].clone()).collect();
                    rows.push(PointResult::summarize(cpi, k, p, &records, cfg.seed)?);
                }
            }
        }
        Ok(rows)
    }
}

pub fn write_csv<W: std::io::Write>(w: W, rows: &[PointResult]) -> Result<(), HarnessError> {
    let mut out = csv::Writer::from_writer(w);
    for r in rows {
        out.serialize(r)?;
    }
    out.flush()?;
    Ok(())
}

/// Per-trial, per-target rows: `trial,estimator,target,truth,estimate,delay,wrap_count,status`.
pub fn write_records<W: std::io::Write>(w: W, records: &[TrialRecord]) -> Result<(), HarnessError> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["trial", "estimator", "target", "truth", "estimate", "delay", "wrap_count", "status"])?;
    for r in records {
        for (p, v) in r.truth.iter().enumerate() {
            let (est, delay, wrap, status) = match &r.outcome {
                Ok(e) => (
                    e.velocities[p].to_string(),
                    e.delays[p].to_string(),
                    e.wrap_counts.get(p).map(|w| w.to_string()).unwrap_or_default(),
                    "ok".to_string(),
                ),
                Err(msg) => (String::new(), String::new(), String::new(), msg.clone()),
            };
            out.write_record([
                r.trial.to_string(),
                r.estimator.name().to_string(),
                p.to_string(),
                v.to_string(),
                est,
                delay,
                wrap,
                status,
            ])?;
        }
    }
    out.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rec(truth: &[f64], est: Option<&[f64]>) -> TrialRecord {
        TrialRecord {
            seed: 0,
            trial: 0,
            estimator: EstimatorKind::Proposed,
            truth: truth.to_vec(),
            outcome: est
                .map(|e| TrialEstimate { velocities: e.to_vec(), delays: vec![0; e.len()], wrap_counts: vec![] })
                .ok_or_else(|| "missed".to_string()),
        }
    }

    #[test]
    fn nmse_examples() {
        assert_eq!(nmse(&[rec(&[20.0, 25.0], Some(&[20.0, 25.0]))]).unwrap(), 0.0);
        let r = vec![rec(&[20.0], Some(&[22.0])); 5];
        assert!((nmse(&r).unwrap() - 0.01).abs() < 1e-15);
        // per-target MSEs 0.01 and 0.03
        let a = rec(&[10.0, 10.0], Some(&[11.0, 10.0 + 0.03f64.sqrt() * 10.0]));
        assert!((nmse(&[a]).unwrap() - 0.02).abs() < 1e-12);
    }

    #[test]
    fn failures_are_excluded() {
        let r = vec![rec(&[20.0], Some(&[22.0])), rec(&[20.0], None)];
        assert!((nmse(&r).unwrap() - 0.01).abs() < 1e-15);
        assert!(matches!(nmse(&[rec(&[20.0], None)]), Err(HarnessError::Aggregation(_))));
    }

    #[test]
    fn bootstrap_brackets_estimate() {
        let r: Vec<TrialRecord> = (0..50).map(|i| rec(&[20.0], Some(&[20.0 + (i % 7) as f64 * 0.1]))).collect();
        let (lo, hi) = bootstrap_ci(&r, 3, 500).unwrap();
        let n = nmse(&r).unwrap();
        assert!(lo <= n && n <= hi && lo < hi);
        assert_eq!(bootstrap_ci(&r, 3, 500).unwrap(), (lo, hi));
    }
}
