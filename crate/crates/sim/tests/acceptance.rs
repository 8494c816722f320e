#![allow(clippy::neg_cmp_op_on_partial_ord)]

use std::f64::consts::PI;
use std::process::{Command, ExitCode};
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use wigig_radar::experiment::{EstimatorKind, PointResult};
use wigig_radar::{ExperimentConfig, Scenario, Selection, Simulator};
use wigig_radar_core::estimator::denominator_inverse;
use wigig_radar_core::phasedarray::{measure_beamwidth, Cut, UpaGeometry};
use wigig_radar_core::scene::{doppler_shift, frame_truth};
use wigig_radar_core::sequences::{build_preamble, GolayPair, CORRELATION_OFFSET, CORRELATION_LEN};

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: impl Into<String>) -> Verdict {
    Verdict { pass, detail: detail.into() }
}

fn autocorr(x: &[i8], lag: usize) -> i64 {
    x.iter().zip(&x[lag..]).map(|(a, b)| *a as i64 * *b as i64).sum()
}

fn golay() -> Verdict {
    let g = GolayPair::ieee_80211ad();
    let n = g.len() as isize;
    let bad: Vec<isize> = (-(n - 1)..n)
        .filter(|&l| {
            let lag = l.unsigned_abs();
            autocorr(g.a(), lag) + autocorr(g.b(), lag) != if l == 0 { 2 * n as i64 } else { 0 }
        })
        .collect();
    verdict(bad.is_empty(), format!("{} lags checked, {} violations", 2 * n - 1, bad.len()))
}

fn preamble_window() -> Verdict {
    let g = GolayPair::ieee_80211ad();
    let neg = |s: &[i8]| s.iter().map(|v| -v).collect::<Vec<i8>>();
    let expect = [neg(g.a()), neg(g.b()), neg(g.a()), g.b().to_vec()].concat();
    let p = build_preamble();
    let window = &p.samples()[CORRELATION_OFFSET..CORRELATION_OFFSET + CORRELATION_LEN];
    verdict(window == &expect[..], format!("samples [{CORRELATION_OFFSET}, {}) vs [-a, -b, -a, b]", CORRELATION_OFFSET + CORRELATION_LEN))
}

fn noiseless_recovery() -> Result<Verdict, String> {
    let scenario = Scenario { noiseless: true, random_beta: false, trials: 1, cpi: 0.5e-3, ..Scenario::default() };
    let sim = Simulator::new(scenario.clone()).map_err(|e| e.to_string())?;
    let mut cfg = ExperimentConfig::from_scenario(scenario);
    cfg.selection = Selection::Proposed;
    let runs = sim.run_point(&cfg).map_err(|e| e.to_string())?;
    let record = &runs[0].1[0];
    let est = record.outcome.as_ref().map_err(|e| e.clone())?;
    let errors: Vec<f64> = est.velocities.iter().zip(&record.truth).map(|(v, t)| (v - t).abs()).collect();
    let worst = errors.iter().cloned().fold(0.0, f64::max);
    Ok(verdict(worst <= 0.02, format!("max |V - V_true| = {worst:.3e} m/s over {} targets (tol 0.02)", errors.len())))
}

fn wrap_compensation() -> Result<Verdict, String> {
    let (m_d, m_i) = (63usize, 57usize);
    let scenario = Scenario {
        noiseless: true,
        random_beta: false,
        trials: 1,
        cpi: 0.5e-3,
        targets: vec![Scenario::default().targets[1].clone()],
        ..Scenario::default()
    };
    let mut sim = Simulator::new(scenario).map_err(|e| e.to_string())?;
    let params = sim.scenario.params();
    let lambda = params.wavelength();
    let v_s = sim.scenario.source_velocity;
    let delay = {
        let scene = sim.trial_scene(10.0, 1, 0).map_err(|e| e.to_string())?;
        frame_truth(&scene, 0).map_err(|e| e.to_string())?.delays[0]
    };
    let d_md = denominator_inverse(delay, m_d, &params);
    let d_mi = denominator_inverse(delay, m_i, &params);
    let (mut checked, mut skipped, mut worst) = (0usize, 0usize, 0.0f64);
    let mut misses = Vec::new();
    for i in 0..=140 {
        // wraps at m_d from -3.5 to 3.5, never landing on zero
        let wraps = -3.5 + 0.05 * i as f64 + 0.013;
        let nu = wraps * 2.0 * PI * d_md;
        let same_n = (nu / d_md / (2.0 * PI)).round() == (nu / d_mi / (2.0 * PI)).round();
        if !same_n {
            skipped += 1;
            continue;
        }
        sim.scenario.targets[0].velocity = v_s - nu * lambda / 2.0;
        let scene = sim.trial_scene(10.0, 1, 0).map_err(|e| e.to_string())?;
        if (scene.dopplers()[0] - nu).abs() > 1e-6 * nu.abs().max(1.0) {
            return Err(format!("scene Doppler {} differs from grid value {nu}", scene.dopplers()[0]));
        }
        let frames = sim.frames(&scene, 1, 0, [0, m_i, m_d]).map_err(|e| e.to_string())?;
        let est = sim.proposed(&scene, &frames, m_d, m_i).map_err(|e| format!("ν = {nu:.1} Hz: {e}"))?;
        let nu_hat = doppler_shift(v_s, est.velocities[0], lambda);
        let rel = (nu_hat - nu).abs() / nu.abs();
        worst = worst.max(rel);
        checked += 1;
        if rel > 0.005 {
            misses.push(format!("{nu:.1}"));
        }
    }
    Ok(verdict(
        misses.is_empty(),
        format!(
            "{checked} same-N points within ±3.5 wraps, {skipped} straddling points skipped, worst rel err {worst:.2e} (tol 5e-3){}",
            if misses.is_empty() { String::new() } else { format!(", misses at ν = {}", misses.join(" ")) }
        ),
    ))
}

fn base_config(cpi: f64) -> Result<(Simulator, ExperimentConfig), String> {
    let scenario = Scenario { trials: 200, ..Scenario::default() };
    let sim = Simulator::new(scenario.clone()).map_err(|e| e.to_string())?;
    let mut cfg = ExperimentConfig::from_scenario(scenario);
    cfg.cpi = cpi;
    Ok((sim, cfg))
}

/// No later point lies above an earlier one with disjoint intervals.
fn non_increasing_within_ci(rows: &[PointResult]) -> Vec<(f64, f64)> {
    let mut violations = Vec::new();
    for (i, a) in rows.iter().enumerate() {
        for b in &rows[i + 1..] {
            if b.ci_lo > a.ci_hi {
                violations.push((a.x, b.x));
            }
        }
    }
    violations
}

fn framegap_trend() -> Result<Verdict, String> {
    let gaps: Vec<usize> = (1..=10).collect();
    let mut at_gap1 = Vec::new();
    let mut notes = Vec::new();
    let mut trend_ok = true;
    for cpi in [0.2e-3, 0.6e-3] {
        let (sim, cfg) = base_config(cpi)?;
        let rows = sim.sweep_framegap(&cfg, &gaps).map_err(|e| e.to_string())?;
        let v = non_increasing_within_ci(&rows);
        trend_ok &= v.is_empty();
        let failures: usize = rows.iter().map(|r| r.failures).sum();
        notes.push(format!(
            "CPI {:.1} ms: gap-1 NMSE {:.3e}, increases {:?}, failures {failures}",
            cpi * 1e3,
            rows[0].nmse,
            v
        ));
        at_gap1.push(rows[0].nmse);
    }
    let order_ok = at_gap1[0] < at_gap1[1];
    notes.push(format!(
        "non-increasing within CI: {}, NMSE(0.2 ms) < NMSE(0.6 ms) at gap 1: {}",
        trend_ok, order_ok
    ));
    Ok(verdict(trend_ok && order_ok, notes.join("; ")))
}

fn cpi_trend() -> Result<Verdict, String> {
    let cpis = [0.1e-3, 0.2e-3, 0.4e-3, 0.6e-3, 0.8e-3, 1.0e-3];
    let (sim, cfg) = base_config(0.5e-3)?;
    let rows = sim.sweep_cpi(&cfg, &cpis, &[10.0, 20.0]).map_err(|e| e.to_string())?;
    let get = |cpi: f64, k: EstimatorKind, p: f64| {
        rows.iter()
            .find(|r| r.x == cpi && r.estimator == k && r.p_tx_dbm == p)
            .map(|r| r.nmse)
            .ok_or_else(|| format!("missing row {cpi} {k:?} {p}"))
    };
    let mut beats = true;
    let mut monotone = true;
    let mut flat = true;
    let mut improves = true;
    let mut notes = Vec::new();
    for p in [10.0, 20.0] {
        let mut prev = f64::INFINITY;
        for &c in &cpis {
            let (prop, base) = (get(c, EstimatorKind::Proposed, p)?, get(c, EstimatorKind::Baseline, p)?);
            if !(prop < base) {
                beats = false;
                notes.push(format!("proposed {prop:.3e} >= baseline {base:.3e} at {:.1} ms {p} dBm", c * 1e3));
            }
            if base > prev {
                monotone = false;
                notes.push(format!("baseline rises to {base:.3e} at {:.1} ms {p} dBm (prev {prev:.3e})", c * 1e3));
            }
            prev = base;
        }
    }
    for &c in &cpis {
        let (b10, b20) = (get(c, EstimatorKind::Baseline, 10.0)?, get(c, EstimatorKind::Baseline, 20.0)?);
        if !((b20 - b10).abs() < 0.1 * b10) {
            flat = false;
            notes.push(format!("baseline moves {b10:.3e} -> {b20:.3e} at {:.1} ms", c * 1e3));
        }
        let (p10, p20) = (get(c, EstimatorKind::Proposed, 10.0)?, get(c, EstimatorKind::Proposed, 20.0)?);
        if !(p20 < p10) {
            improves = false;
            notes.push(format!("proposed does not improve {p10:.3e} -> {p20:.3e} at {:.1} ms", c * 1e3));
        }
    }
    notes.insert(
        0,
        format!("proposed<baseline: {beats}, baseline non-increasing: {monotone}, baseline flat in P_TX: {flat}, proposed improves with P_TX: {improves}"),
    );
    Ok(verdict(beats && monotone && flat && improves, notes.join("; ")))
}

fn beamwidths() -> Result<Verdict, String> {
    let beam = Scenario::default().beam().map_err(|e| e.to_string())?;
    let upa = UpaGeometry::default().tx;
    let az = measure_beamwidth(&beam, &upa, Cut::Azimuth { elevation: 0.0 }).map_err(|e| e.to_string())?;
    let el = measure_beamwidth(&beam, &upa, Cut::Elevation { azimuth: 0.0 }).map_err(|e| e.to_string())?;
    let ok = (az - 0.4084).abs() <= 0.05 * 0.4084 && (el - 1.0399).abs() <= 0.05 * 1.0399;
    Ok(verdict(ok, format!("azimuth {az:.4} rad (0.4084 ± 5%), elevation {el:.4} rad (1.0399 ± 5%)")))
}

fn baseline_quantisation() -> Result<Verdict, String> {
    let scenario = Scenario {
        noiseless: true,
        random_beta: false,
        trials: 1,
        cpi: 1e-3,
        targets: vec![Scenario::default().targets[1].clone()],
        ..Scenario::default()
    };
    let mut sim = Simulator::new(scenario).map_err(|e| e.to_string())?;
    let params = sim.scenario.params();
    let m = params.frames_in_cpi(1e-3).map_err(|e| e.to_string())?;
    let lambda = params.wavelength();
    let bound = lambda / (4.0 * params.effective_cpi(m)) * (1.0 + 1e-6);
    let bin = 1.0 / params.effective_cpi(m);
    let v_s = sim.scenario.source_velocity;
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut worst = 0.0f64;
    let mut over = 0;
    for _ in 0..50 {
        let nu = loop {
            let nu: f64 = rng.random_range(-20e3..20e3);
            let frac = (nu / bin).fract().abs();
            if frac > 1e-3 && frac < 1.0 - 1e-3 {
                break nu;
            }
        };
        sim.scenario.targets[0].velocity = v_s - nu * lambda / 2.0;
        let scene = sim.trial_scene(10.0, 1, 0).map_err(|e| e.to_string())?;
        let frames = sim.frames(&scene, 1, 0, 0..m).map_err(|e| e.to_string())?;
        let est = sim.baseline(&scene, &frames).map_err(|e| format!("ν = {nu:.1} Hz: {e}"))?;
        let err = (est.velocities[0] - sim.scenario.targets[0].velocity).abs();
        worst = worst.max(err);
        if err > bound {
            over += 1;
        }
    }
    Ok(verdict(over == 0, format!("M = {m}, worst error {worst:.4e} m/s, bound {bound:.4e} m/s, {over}/50 over")))
}

fn run_cli(args: &[&str], threads: &str) -> Result<Vec<u8>, String> {
    let out = Command::new(env!("CARGO_BIN_EXE_wigig-radar"))
        .args(args)
        .env(wigig_radar::THREADS_ENV, threads)
        .output()
        .map_err(|e| e.to_string())?;
    if !out.status.success() {
        return Err(format!("{args:?} exited with {}: {}", out.status, String::from_utf8_lossy(&out.stderr)));
    }
    Ok(out.stdout)
}

fn determinism() -> Result<Verdict, String> {
    let invocations: [&[&str]; 3] = [
        &["simulate", "--trials", "40", "--seed", "7", "--cpi", "4e-4"],
        &["sweep-framegap", "--trials", "30", "--seed", "3", "--cpi", "2e-4", "--gaps", "1,4,9"],
        &["sweep-cpi", "--trials", "20", "--cpis", "1e-4,6e-4", "--p-tx", "10"],
    ];
    let mut notes = Vec::new();
    let mut ok = true;
    for args in invocations {
        let first = run_cli(args, "1")?;
        let again = run_cli(args, "1")?;
        let parallel = run_cli(args, "2")?;
        let same = !first.is_empty() && first == again && first == parallel;
        ok &= same;
        notes.push(format!("{} {} bytes {}", args[0], first.len(), if same { "identical" } else { "DIFFER" }));
    }
    Ok(verdict(ok, notes.join(", ")))
}

fn main() -> ExitCode {
    type Check = fn() -> Result<Verdict, String>;
    let criteria: [(&str, Duration, Check); 9] = [
        ("golay complementarity", Duration::from_secs(1), || Ok(golay())),
        ("preamble window identity", Duration::from_secs(1), || Ok(preamble_window())),
        ("noiseless end-to-end recovery", Duration::from_secs(10), noiseless_recovery),
        ("wrap compensation", Duration::from_secs(30), wrap_compensation),
        ("frame-gap trend", Duration::from_secs(600), framegap_trend),
        ("CPI trend", Duration::from_secs(900), cpi_trend),
        ("beamwidth", Duration::from_secs(10), beamwidths),
        ("baseline quantisation bound", Duration::from_secs(60), baseline_quantisation),
        ("determinism", Duration::from_secs(600), determinism),
    ];
    let mut failed = 0;
    for (i, (name, limit, check)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let result = check();
        let elapsed = start.elapsed();
        let (pass, detail) = match result {
            Ok(v) => (v.pass && elapsed < *limit, v.detail),
            Err(e) => (false, format!("error: {e}")),
        };
        if !pass {
            failed += 1;
        }
        println!(
            "criterion {}: {} {name} [{:.2}s / {}s] {detail}",
            i + 1,
            if pass { "PASS" } else { "FAIL" },
            elapsed.as_secs_f64(),
            limit.as_secs()
        );
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
