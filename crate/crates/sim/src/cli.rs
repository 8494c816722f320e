//! `wigig-radar` command line.

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use wigig_radar_core::phasedarray::{beam_gain, measure_beamwidth, Cut, UpaGeometry};
use wigig_radar_core::sequences::{build_preamble, correlation_segment, GolayPair, CORRELATION_OFFSET};
use wigig_radar_core::waveform::{nyquist_residual, rrc_taps};

use crate::config::Scenario;
use crate::experiment::{write_csv, write_records, ExperimentConfig, Selection, Simulator};
use crate::{dump, thread_pool, HarnessError};

#[derive(Debug, Parser)]
#[command(name = "wigig-radar", version, about = "802.11ad preamble radar velocity estimation")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Monte Carlo NMSE at one operating point.
    Simulate(SimulateArgs),
    /// NMSE against CPI for both estimators and several TX powers.
    SweepCpi(SweepCpiArgs),
    /// Proposed-estimator NMSE against the frame gap m_d - m_i.
    SweepFramegap(SweepGapArgs),
    /// TX beam gain along an azimuth or elevation cut.
    BeamPattern(BeamArgs),
    /// Run the built-in invariant checks.
    Selftest,
}

#[derive(Debug, Args)]
pub struct Common {
    /// Scenario TOML file; built-in defaults when absent.
    #[arg(long)]
    pub scenario: Option<PathBuf>,
    #[arg(long)]
    pub trials: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// CSV destination; stdout when absent.
    #[arg(long, short)]
    pub output: Option<PathBuf>,
}

impl Common {
    fn experiment(&self) -> Result<ExperimentConfig, HarnessError> {
        let scenario = match &self.scenario {
            Some(p) => Scenario::load(p)?,
            None => Scenario::default(),
        };
        let mut cfg = ExperimentConfig::from_scenario(scenario);
        if let Some(t) = self.trials {
            cfg.trials = t;
        }
        if let Some(s) = self.seed {
            cfg.seed = s;
        }
        if cfg.trials == 0 {
            return Err(HarnessError::Config("trials must be at least 1".into()));
        }
        Ok(cfg)
    }
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub common: Common,
    /// Coherent processing interval in seconds.
    #[arg(long)]
    pub cpi: Option<f64>,
    /// TX power in dBm.
    #[arg(long = "p-tx")]
    pub p_tx: Option<f64>,
    #[arg(long = "m-i-offset")]
    pub m_i_offset: Option<usize>,
    #[arg(long, value_enum, default_value_t = Selection::Both)]
    pub estimator: Selection,
    /// Per-trial CSV with every target's estimate.
    #[arg(long)]
    pub records: Option<PathBuf>,
    /// Directory receiving binary dumps of trial 0's frames.
    #[arg(long = "dump-frames")]
    pub dump_frames: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SweepCpiArgs {
    #[command(flatten)]
    pub common: Common,
    /// CPIs in seconds.
    #[arg(long, value_delimiter = ',', default_values_t = [1e-4, 2e-4, 4e-4, 6e-4, 8e-4, 1e-3])]
    pub cpis: Vec<f64>,
    /// TX powers in dBm.
    #[arg(long = "p-tx", value_delimiter = ',', default_values_t = [10.0, 20.0])]
    pub p_tx: Vec<f64>,
    #[arg(long = "m-i-offset")]
    pub m_i_offset: Option<usize>,
    #[arg(long, value_enum, default_value_t = Selection::Both)]
    pub estimator: Selection,
}

#[derive(Debug, Args)]
pub struct SweepGapArgs {
    #[command(flatten)]
    pub common: Common,
    #[arg(long)]
    pub cpi: Option<f64>,
    #[arg(long = "p-tx")]
    pub p_tx: Option<f64>,
    #[arg(long, value_delimiter = ',', default_values_t = [1usize, 2, 3, 4, 5, 6, 7, 8, 9, 10])]
    pub gaps: Vec<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum CutKind {
    Azimuth,
    Elevation,
}

#[derive(Debug, Args)]
pub struct BeamArgs {
    #[arg(long)]
    pub scenario: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = CutKind::Azimuth)]
    pub cut: CutKind,
    #[arg(long, default_value_t = 721)]
    pub points: usize,
    #[arg(long, short)]
    pub output: Option<PathBuf>,
}

fn sink(path: &Option<PathBuf>) -> Result<Box<dyn Write>, HarnessError> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p)?)),
        None => Box::new(io::stdout().lock()),
    })
}

/// Parses `argv` (program name first) and runs it; returns the exit code.
pub fn run_cli<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    match execute(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

pub fn execute(command: Command) -> Result<i32, HarnessError> {
    match command {
        Command::Simulate(a) => simulate(a),
        Command::SweepCpi(a) => sweep_cpi(a),
        Command::SweepFramegap(a) => sweep_framegap(a),
        Command::BeamPattern(a) => beam_pattern(a),
        Command::Selftest => Ok(selftest()),
    }
}

fn simulate(a: SimulateArgs) -> Result<i32, HarnessError> {
    let mut cfg = a.common.experiment()?;
    if let Some(c) = a.cpi {
        cfg.cpi = c;
    }
    if let Some(p) = a.p_tx {
        cfg.tx_power_dbm = p;
    }
    if let Some(o) = a.m_i_offset {
        cfg.m_i_offset = o;
    }
    cfg.selection = a.estimator;
    cfg.validate()?;
    let sim = Simulator::new(cfg.scenario.clone())?;
    let (rows, records) = thread_pool()?.install(|| sim.simulate(&cfg))?;
    write_csv(sink(&a.common.output)?, &rows)?;
    if let Some(p) = &a.records {
        write_records(BufWriter::new(File::create(p)?), &records)?;
    }
    if let Some(dir) = &a.dump_frames {
        dump_trial_frames(&sim, &cfg, dir)?;
    }
    let summary: Vec<String> = rows
        .iter()
        .map(|r| format!("{} nmse={:.4e} failures={}/{}", r.estimator.name(), r.nmse, r.failures, r.trials))
        .collect();
    eprintln!("simulate cpi={} p_tx={} dBm: {}", cfg.cpi, cfg.tx_power_dbm, summary.join(", "));
    Ok(0)
}

fn dump_trial_frames(sim: &Simulator, cfg: &ExperimentConfig, dir: &Path) -> Result<(), HarnessError> {
    std::fs::create_dir_all(dir)?;
    let m = cfg
        .scenario
        .params()
        .frames_in_cpi(cfg.cpi)
        .map_err(|e| HarnessError::Config(e.to_string()))?;
    let scene = sim.trial_scene(cfg.tx_power_dbm, cfg.seed, 0)?;
    for frame in sim.frames(&scene, cfg.seed, 0, 0..m)? {
        let path = dir.join(format!("frame_{:04}.bin", frame.index));
        dump::write_frame(BufWriter::new(File::create(path)?), &frame)?;
    }
    Ok(())
}

fn sweep_cpi(a: SweepCpiArgs) -> Result<i32, HarnessError> {
    let mut cfg = a.common.experiment()?;
    if let Some(o) = a.m_i_offset {
        cfg.m_i_offset = o;
    }
    cfg.selection = a.estimator;
    let sim = Simulator::new(cfg.scenario.clone())?;
    let rows = thread_pool()?.install(|| sim.sweep_cpi(&cfg, &a.cpis, &a.p_tx))?;
    write_csv(sink(&a.common.output)?, &rows)?;
    eprintln!("sweep-cpi: {} rows, {} trials per point", rows.len(), cfg.trials);
    Ok(0)
}

fn sweep_framegap(a: SweepGapArgs) -> Result<i32, HarnessError> {
    let mut cfg = a.common.experiment()?;
    if let Some(c) = a.cpi {
        cfg.cpi = c;
    }
    if let Some(p) = a.p_tx {
        cfg.tx_power_dbm = p;
    }
    let sim = Simulator::new(cfg.scenario.clone())?;
    let rows = thread_pool()?.install(|| sim.sweep_framegap(&cfg, &a.gaps))?;
    write_csv(sink(&a.common.output)?, &rows)?;
    eprintln!("sweep-framegap cpi={}: {} rows, {} trials per point", cfg.cpi, rows.len(), cfg.trials);
    Ok(0)
}

fn beam_pattern(a: BeamArgs) -> Result<i32, HarnessError> {
    let scenario = match &a.scenario {
        Some(p) => Scenario::load(p)?,
        None => Scenario::default(),
    };
    if a.points < 2 {
        return Err(HarnessError::Config("at least two points are required".into()));
    }
    let beam = scenario.beam()?;
    let upa = UpaGeometry::default().tx;
    let cut = match a.cut {
        CutKind::Azimuth => Cut::Azimuth { elevation: scenario.beam_elevation },
        CutKind::Elevation => Cut::Elevation { azimuth: 0.0 },
    };
    let mut out = csv::Writer::from_writer(sink(&a.output)?);
    out.write_record(["angle_rad", "gain_db"])?;
    let half = std::f64::consts::FRAC_PI_2;
    for i in 0..a.points {
        let angle = -half + 2.0 * half * i as f64 / (a.points - 1) as f64;
        let g = match cut {
            Cut::Azimuth { elevation } => beam_gain(&beam, angle, elevation, &upa),
            Cut::Elevation { azimuth } => beam_gain(&beam, azimuth, angle, &upa),
        };
        out.write_record([angle.to_string(), (10.0 * g.log10()).to_string()])?;
    }
    out.flush()?;
    let width = measure_beamwidth(&beam, &upa, cut)?;
    eprintln!("beam-pattern {:?}: 3 dB width {width:.4} rad", a.cut);
    Ok(0)
}

/// Quick invariant checks; exit code 0 when all pass, 2 otherwise.
pub fn selftest() -> i32 {
    let checks: Vec<(&str, Result<bool, String>)> = vec![
        ("golay complementarity", Ok(golay_ok())),
        ("preamble correlation window", Ok(window_ok())),
        ("rrc cascade nyquist", rrc_taps(0.25, 16, 4).map(|f| nyquist_residual(&f) < 1e-3).map_err(|e| e.to_string())),
        ("wide-beam width", beam_ok()),
        ("noiseless velocity recovery", noiseless_ok()),
    ];
    let mut all = true;
    for (name, r) in &checks {
        let ok = matches!(r, Ok(true));
        all &= ok;
        match r {
            Err(e) => println!("FAIL {name}: {e}"),
            _ => println!("{} {name}", if ok { "ok  " } else { "FAIL" }),
        }
    }
    if all {
        0
    } else {
        2
    }
}

fn golay_ok() -> bool {
    let g = GolayPair::ieee_80211ad();
    let auto = |s: &[i8], lag: usize| -> i64 { (0..s.len() - lag).map(|n| s[n] as i64 * s[n + lag] as i64).sum() };
    (0..g.len()).all(|l| auto(g.a(), l) + auto(g.b(), l) == if l == 0 { 256 } else { 0 })
}

fn window_ok() -> bool {
    let g = GolayPair::ieee_80211ad();
    let p = build_preamble();
    let neg = |s: &[i8]| s.iter().map(|v| -v).collect::<Vec<i8>>();
    let expect: Vec<i8> = [neg(g.a()), neg(g.b()), neg(g.a()), g.b().to_vec()].concat();
    correlation_segment(&p) == &expect[..] && p.samples()[CORRELATION_OFFSET..CORRELATION_OFFSET + 512] == expect[..]
}

fn beam_ok() -> Result<bool, String> {
    let s = Scenario::default();
    let beam = s.beam().map_err(|e| e.to_string())?;
    let upa = UpaGeometry::default().tx;
    let w = measure_beamwidth(&beam, &upa, Cut::Azimuth { elevation: 0.0 }).map_err(|e| e.to_string())?;
    Ok((w - 0.4084).abs() <= 0.05 * 0.4084)
}

fn noiseless_ok() -> Result<bool, String> {
    let scenario = Scenario { noiseless: true, random_beta: false, trials: 1, ..Scenario::default() };
    let sim = Simulator::new(scenario.clone()).map_err(|e| e.to_string())?;
    let mut cfg = ExperimentConfig::from_scenario(scenario);
    cfg.selection = Selection::Proposed;
    let runs = sim.run_point(&cfg).map_err(|e| e.to_string())?;
    let rec = &runs[0].1[0];
    let est = rec.outcome.as_ref().map_err(|e| e.clone())?;
    Ok(rec.truth.iter().zip(&est.velocities).all(|(v, e)| (v - e).abs() < 0.02))
}
