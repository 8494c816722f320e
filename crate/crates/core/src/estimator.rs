//! Multi-target delay and Doppler estimation from preamble echoes.
//!
//! Delay stage: the correlation segment `s_c` is slid over the echo starting
//! at sample 2048, the dominant peak is taken as the strongest target and
//! further targets are accepted around it while their (sidelobe-cleaned)
//! correlation exceeds the threshold.
//!
//! Doppler stage: a least-squares fit against shifted copies of the preamble
//! gives per-target coefficients at frame 0 and at two later frames `m_i <
//! m_d`. The phase of `ĥ_{m_d}[p] / ĥ[p]` yields a wrapped Doppler estimate,
//! and the difference between the `m_d` and `m_i` estimates recovers the
//! number of lost `2π` turns.

use alloc::vec::Vec;
use core::f64::consts::PI;
use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;

use crate::echo::EchoFrame;
use crate::params::WaveformParams;
use crate::sequences::{correlate_unchecked, correlation_segment, Preamble, CORRELATION_LEN, CORRELATION_OFFSET};
use crate::{Error, Result};

/// Largest condition number accepted for `SᴴS`.
pub const MAX_CONDITION: f64 = 1e12;

#[derive(Debug, Clone, PartialEq)]
pub struct DelayEstimate {
    /// Strictly increasing delays in samples.
    pub delays: Vec<usize>,
    /// Position of the dominant delay inside `delays`.
    pub dominant_index: usize,
    /// Correlation magnitude at acceptance, aligned with `delays`.
    pub peaks: Vec<f64>,
}

impl DelayEstimate {
    pub fn dominant(&self) -> usize {
        self.delays[self.dominant_index]
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DelaySearch {
    /// Magnitude a correlation peak must exceed (`512·σ_cn` by default).
    pub threshold: f64,
    /// Stop after this many targets; fewer is a detection shortfall.
    pub expected_targets: Option<usize>,
    /// Secondary peaks are only searched within this many lags of the
    /// dominant one.
    pub search_halfwidth: usize,
    /// Lags around an accepted peak that can never hold another target.
    pub guard: usize,
}

impl DelaySearch {
    pub fn new(threshold: f64, expected_targets: Option<usize>) -> Self {
        Self { threshold, expected_targets, search_halfwidth: 1024, guard: 8 }
    }

    /// `512·σ_cn`, the Cauchy-Schwarz bound on `|z̃ᴴ s_c|`.
    pub fn noise_threshold(noise_variance: f64) -> f64 {
        CORRELATION_LEN as f64 * libm::sqrt(noise_variance)
    }
}

/// Correlator over the preamble's `s_c` segment with a cached response
/// template used to cancel the sidelobes of accepted targets.
#[derive(Debug, Clone)]
pub struct DelayEstimator {
    preamble: Preamble,
    s_c: Vec<i8>,
    max_lag: usize,
    // template[max_lag + δ] = Σ_k s_c[k] s[δ + k + 2048]
    template: Vec<f64>,
}

impl DelayEstimator {
    pub fn new(preamble: &Preamble, max_lag: usize) -> Self {
        let s_c = correlation_segment(preamble).to_vec();
        let template = (0..=2 * max_lag)
            .map(|i| {
                let delta = i as isize - max_lag as isize;
                s_c.iter()
                    .enumerate()
                    .map(|(k, &c)| {
                        c as f64 * preamble.symbol(delta + k as isize + CORRELATION_OFFSET as isize) as f64
                    })
                    .sum()
            })
            .collect();
        Self { preamble: preamble.clone(), s_c, max_lag, template }
    }

    pub fn preamble(&self) -> &Preamble {
        &self.preamble
    }

    pub fn segment(&self) -> &[i8] {
        &self.s_c
    }

    pub fn max_lag(&self) -> usize {
        self.max_lag
    }

    /// Correlator output for a unit target at offset `delta` lags.
    pub fn template(&self, delta: isize) -> f64 {
        let i = delta + self.max_lag as isize;
        if i < 0 {
            return 0.0;
        }
        self.template.get(i as usize).copied().unwrap_or(0.0)
    }

    /// `R[ℓ] = Σ s_c[k] conj(y[ℓ + k + 2048])` for `ℓ` in `0..=max_lag`,
    /// truncated to what the frame holds.
    pub fn profile(&self, frame: &EchoFrame) -> Result<Vec<Complex64>> {
        let window = frame
            .from(CORRELATION_OFFSET)
            .ok_or(Error::InvalidArgument("frame does not cover the correlation window"))?;
        if window.len() < CORRELATION_LEN {
            return Err(Error::InvalidArgument("frame does not cover the correlation window"));
        }
        let last = (window.len() - CORRELATION_LEN).min(self.max_lag);
        Ok((0..=last)
            .map(|l| correlate_unchecked(&self.s_c, &window[l..l + CORRELATION_LEN]))
            .collect())
    }

    // residual[ℓ] -= (residual[ℓp] / T[0]) · T[ℓ - ℓp]
    fn cancel(&self, residual: &mut [Complex64], lag: usize) {
        let c = residual[lag] / self.template(0);
        for (l, r) in residual.iter_mut().enumerate() {
            let t = self.template(l as isize - lag as isize);
            if t != 0.0 {
                *r -= c * t;
            }
        }
    }

    pub fn estimate(&self, frame: &EchoFrame, search: &DelaySearch) -> Result<DelayEstimate> {
        if !(search.threshold > 0.0) {
            return Err(Error::InvalidArgument("threshold must be positive"));
        }
        let mut residual = self.profile(frame)?;
        let (dominant, dom_mag) = residual
            .iter()
            .map(|r| r.norm())
            .enumerate()
            .fold((0, f64::MIN), |b, c| if c.1 > b.1 { c } else { b });
        if !(dom_mag > search.threshold) {
            return Err(Error::NoTarget);
        }
        let mut accepted = alloc::vec![(dominant, dom_mag)];
        self.cancel(&mut residual, dominant);

        let lo = dominant.saturating_sub(search.search_halfwidth);
        let hi = (dominant + search.search_halfwidth).min(residual.len() - 1);
        loop {
            if search.expected_targets.is_some_and(|p| accepted.len() >= p) {
                break;
            }
            let mut best: Option<(usize, f64)> = None;
            for l in lo..=hi {
                if accepted.iter().any(|&(a, _)| a.abs_diff(l) <= search.guard) {
                    continue;
                }
                let m = residual[l].norm();
                if m <= search.threshold {
                    continue;
                }
                let left = if l > 0 { residual[l - 1].norm() } else { 0.0 };
                let right = residual.get(l + 1).map_or(0.0, |r| r.norm());
                if m < left || m < right {
                    continue;
                }
                if best.is_none_or(|(_, b)| m > b) {
                    best = Some((l, m));
                }
            }
            match best {
                Some((l, m)) => {
                    accepted.push((l, m));
                    self.cancel(&mut residual, l);
                }
                None => break,
            }
        }
        if let Some(expected) = search.expected_targets {
            if accepted.len() < expected {
                return Err(Error::DetectionShortfall { expected, found: accepted.len() });
            }
        }
        accepted.sort_by_key(|&(l, _)| l);
        let dominant_index = accepted.iter().position(|&(l, _)| l == dominant).unwrap_or(0);
        Ok(DelayEstimate {
            delays: accepted.iter().map(|a| a.0).collect(),
            peaks: accepted.iter().map(|a| a.1).collect(),
            dominant_index,
        })
    }
}

/// One-shot delay search; builds a [`DelayEstimator`] covering the frame.
pub fn estimate_delays(frame: &EchoFrame, preamble: &Preamble, search: &DelaySearch) -> Result<DelayEstimate> {
    let max_lag = frame.end().saturating_sub(CORRELATION_OFFSET + CORRELATION_LEN);
    DelayEstimator::new(preamble, max_lag).estimate(frame, search)
}

/// Which echo samples enter the least-squares fit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum RowSpan {
    /// `k` from `ℓ̂_0` through `K_pre - 1 + ℓ̂_{P-1}`: every target's full
    /// preamble copy is inside the fit.
    #[default]
    Extended,
    /// `k` from `ℓ̂_0` through `K_pre - 1 + ℓ̂_0`, truncating later targets.
    PreambleOnly,
}

impl RowSpan {
    pub fn rows(&self, delays: &[usize], preamble_len: usize) -> usize {
        match self {
            RowSpan::Extended => delays[delays.len() - 1] - delays[0] + preamble_len,
            RowSpan::PreambleOnly => preamble_len,
        }
    }
}

/// `S[r, p] = s[row_start + r - ℓ_p]`, zero outside the preamble.
pub fn build_shift_matrix(
    delays: &[usize],
    preamble: &Preamble,
    row_start: usize,
    rows: usize,
) -> Result<DMatrix<f64>> {
    if delays.is_empty() {
        return Err(Error::InvalidArgument("at least one delay is required"));
    }
    for w in delays.windows(2) {
        if w[1] == w[0] {
            return Err(Error::SingularDesign(w[0]));
        }
        if w[1] < w[0] {
            return Err(Error::InvalidArgument("delays must be sorted"));
        }
    }
    Ok(DMatrix::from_fn(rows, delays.len(), |r, p| {
        preamble.symbol((row_start + r) as isize - delays[p] as isize) as f64
    }))
}

/// `(SᴴS)⁻¹ Sᴴ y / √P_TX` for a real design matrix `S`.
pub fn lse_coefficients(y: &[Complex64], s: &DMatrix<f64>, tx_power: f64) -> Result<Vec<Complex64>> {
    if y.len() != s.nrows() {
        return Err(Error::InvalidArgument("sample vector and shift matrix differ in length"));
    }
    if !(tx_power > 0.0) {
        return Err(Error::InvalidArgument("TX power must be positive"));
    }
    let p = s.ncols();
    let gram = s.transpose() * s;
    let eig = SymmetricEigen::new(gram.clone());
    let (lmin, lmax) = eig
        .eigenvalues
        .iter()
        .fold((f64::MAX, f64::MIN), |(a, b), &v| (a.min(v), b.max(v)));
    let cond = if lmin > 0.0 { lmax / lmin } else { f64::INFINITY };
    if !(cond < MAX_CONDITION) {
        let (first, second) = most_collinear(&gram);
        return Err(Error::IllConditioned { cond, first, second });
    }
    let mut rhs = DMatrix::<f64>::zeros(p, 2);
    for (col, c) in s.column_iter().enumerate() {
        let (mut re, mut im) = (0.0, 0.0);
        for (v, yk) in c.iter().zip(y) {
            if *v != 0.0 {
                re += v * yk.re;
                im += v * yk.im;
            }
        }
        rhs[(col, 0)] = re;
        rhs[(col, 1)] = im;
    }
    let chol = gram
        .cholesky()
        .ok_or(Error::IllConditioned { cond, first: 0, second: p.saturating_sub(1) })?;
    let sol = chol.solve(&rhs);
    let scale = libm::sqrt(tx_power);
    Ok((0..p).map(|i| Complex64::new(sol[(i, 0)], sol[(i, 1)]) / scale).collect())
}

fn most_collinear(gram: &DMatrix<f64>) -> (usize, usize) {
    let n = gram.nrows();
    let mut best = (0, n.saturating_sub(1), f64::MIN);
    for i in 0..n {
        for j in i + 1..n {
            let denom = libm::sqrt(gram[(i, i)] * gram[(j, j)]);
            let c = if denom > 0.0 { libm::fabs(gram[(i, j)]) / denom } else { 1.0 };
            if c > best.2 {
                best = (i, j, c);
            }
        }
    }
    (best.0, best.1)
}

/// Least-squares coefficients of frame `frame` for the given delays.
pub fn frame_coefficients(
    frame: &EchoFrame,
    delays: &[usize],
    preamble: &Preamble,
    tx_power: f64,
    span: RowSpan,
) -> Result<Vec<Complex64>> {
    if delays.is_empty() {
        return Err(Error::InvalidArgument("at least one delay is required"));
    }
    let rows = span.rows(delays, preamble.len());
    let y = frame
        .span(delays[0], rows)
        .ok_or(Error::Scenario("frame does not cover the least-squares rows"))?;
    let s = build_shift_matrix(delays, preamble, delays[0], rows)?;
    lse_coefficients(y, &s, tx_power).map_err(|e| match e {
        Error::IllConditioned { cond, first, second } => {
            Error::IllConditioned { cond, first: delays[first], second: delays[second] }
        }
        other => other,
    })
}

/// `D_m = 1 / (2π((2ℓ̂_0 + K_pre - 1)/2 + mK)T_s)`, Hz per radian.
pub fn denominator_inverse(first_delay: usize, m: usize, params: &WaveformParams) -> f64 {
    let centre = (2.0 * first_delay as f64 + params.preamble_len as f64 - 1.0) / 2.0;
    let k = centre + (m * params.frame_len) as f64;
    1.0 / (2.0 * PI * k * params.symbol_period())
}

/// Wrapped Doppler `∠(ĥ_m[p]/ĥ[p])·D_m`.
pub fn raw_doppler(h_m: Complex64, h_ref: Complex64, d_m: f64) -> Result<f64> {
    if h_ref == Complex64::new(0.0, 0.0) {
        return Err(Error::ZeroCoefficient(0));
    }
    Ok((h_m * h_ref.conj()).arg() * d_m)
}

/// Wrap count from the magnitude difference `ĉ = |ν̂_md| - |ν̂_mi|`,
/// branching on the sign of the wrapped phase.
pub fn wrap_count(nu_md: f64, nu_mi: f64, d_md: f64, d_mi: f64, wrapped_sign: f64) -> Result<i64> {
    let step = frame_pair_step(d_md, d_mi)?;
    let c_hat = libm::fabs(nu_md) - libm::fabs(nu_mi);
    let x = c_hat / step;
    Ok(libm::round(if wrapped_sign < 0.0 { -x } else { x }) as i64)
}

/// Wrap count from the signed difference `ν̂_md - ν̂_mi`. Equals
/// [`wrap_count`] whenever both wrapped phases share a sign and stays valid
/// when they straddle zero.
pub fn wrap_count_signed(nu_md: f64, nu_mi: f64, d_md: f64, d_mi: f64) -> Result<i64> {
    let step = frame_pair_step(d_md, d_mi)?;
    Ok(libm::round((nu_md - nu_mi) / step) as i64)
}

/// Net number of `±π` boundaries the wrapped phase crossed between `m_i` and
/// `m_d`, assuming the true phase moved by less than `π` in between.
pub fn boundary_crossings(nu_md: f64, nu_mi: f64, d_md: f64, d_mi: f64) -> i64 {
    let (z_md, z_mi) = (nu_md / d_md, nu_mi / d_mi);
    let step = (z_md - z_mi + PI).rem_euclid(2.0 * PI) - PI;
    libm::round((z_mi + step - z_md) / (2.0 * PI)) as i64
}

/// Wrap count at `m_d` when the counts at `m_i` and `m_d` may differ by the
/// observed boundary crossings. Reduces to [`wrap_count_signed`] when
/// nothing was crossed.
pub fn wrap_count_crossing(nu_md: f64, nu_mi: f64, d_md: f64, d_mi: f64) -> Result<i64> {
    let step = frame_pair_step(d_md, d_mi)?;
    let delta = boundary_crossings(nu_md, nu_mi, d_md, d_mi) as f64;
    Ok(libm::round((nu_md - nu_mi + 2.0 * PI * delta * d_mi) / step) as i64)
}

fn frame_pair_step(d_md: f64, d_mi: f64) -> Result<f64> {
    if d_mi == d_md {
        return Err(Error::DegenerateFramePair);
    }
    if d_mi < d_md {
        return Err(Error::InvalidArgument("frame m_i must precede frame m_d"));
    }
    Ok(2.0 * PI * (d_mi - d_md))
}

/// `ν̂̂ = ν̂ + 2π·N̄·D_md`.
pub fn refine_doppler(nu_md: f64, wraps: i64, d_md: f64) -> f64 {
    nu_md + 2.0 * PI * wraps as f64 * d_md
}

/// `V̂ = V_s - ν̂̂·λ/2`.
pub fn velocity_from_doppler(doppler: f64, source_velocity: f64, wavelength: f64) -> f64 {
    source_velocity - doppler * wavelength / 2.0
}

/// How the pipeline turns the wrapped estimates at `m_d` and `m_i` into `N̄`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum WrapRule {
    /// [`wrap_count`] with the `m_d` wrapped-phase sign, always.
    SignBranch,
    /// [`wrap_count`] when both wrapped phases share a sign,
    /// [`wrap_count_signed`] otherwise.
    SignedWhenMixed,
    /// [`wrap_count_crossing`].
    #[default]
    CrossingAware,
}

impl WrapRule {
    pub fn count(self, nu_md: f64, nu_mi: f64, d_md: f64, d_mi: f64) -> Result<i64> {
        match self {
            WrapRule::SignBranch => wrap_count(nu_md, nu_mi, d_md, d_mi, nu_md),
            WrapRule::SignedWhenMixed if (nu_md >= 0.0) == (nu_mi >= 0.0) => {
                wrap_count(nu_md, nu_mi, d_md, d_mi, nu_md)
            }
            WrapRule::SignedWhenMixed => wrap_count_signed(nu_md, nu_mi, d_md, d_mi),
            WrapRule::CrossingAware => wrap_count_crossing(nu_md, nu_mi, d_md, d_mi),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DopplerEstimate {
    pub h_hat: Complex64,
    pub h_hat_mi: Complex64,
    pub h_hat_md: Complex64,
    pub nu_raw_mi: f64,
    pub nu_raw: f64,
    pub wrap_count: i64,
    pub nu_refined: f64,
    pub d_md: f64,
    pub d_mi: f64,
    /// Boundary crossings seen between `m_i` and `m_d`.
    pub crossings: i64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PipelineConfig {
    pub m_d: usize,
    pub m_i: usize,
    pub search: DelaySearch,
    pub span: RowSpan,
    pub wrap_rule: WrapRule,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineOutput {
    /// Delay estimates at frames 0, `m_i` and `m_d`.
    pub delays: [DelayEstimate; 3],
    pub doppler: Vec<DopplerEstimate>,
    pub velocities: Vec<f64>,
}

fn find_frame(frames: &[EchoFrame], m: usize) -> Result<&EchoFrame> {
    frames.iter().find(|f| f.index == m).ok_or(Error::MissingFrame(m))
}

/// Delay search, least squares at frames `0, m_i, m_d`, wrap compensation
/// and velocity mapping. Targets are associated across frames by delay rank.
pub fn run_pipeline(
    frames: &[EchoFrame],
    config: &PipelineConfig,
    estimator: &DelayEstimator,
    params: &WaveformParams,
    tx_power: f64,
    source_velocity: f64,
) -> Result<PipelineOutput> {
    if config.m_i >= config.m_d {
        return Err(Error::InvalidArgument("m_i must be smaller than m_d"));
    }
    let preamble = estimator.preamble();
    let f0 = find_frame(frames, 0)?;
    let fi = find_frame(frames, config.m_i)?;
    let fd = find_frame(frames, config.m_d)?;

    let del0 = estimator.estimate(f0, &config.search)?;
    let deli = estimator.estimate(fi, &config.search)?;
    let deld = estimator.estimate(fd, &config.search)?;
    let p = del0.delays.len();
    for (m, d) in [(config.m_i, &deli), (config.m_d, &deld)] {
        if d.delays.len() != p {
            return Err(Error::Association { frame: m, expected: p, found: d.delays.len() });
        }
    }

    let h0 = frame_coefficients(f0, &del0.delays, preamble, tx_power, config.span)?;
    let hi = frame_coefficients(fi, &deli.delays, preamble, tx_power, config.span)?;
    let hd = frame_coefficients(fd, &deld.delays, preamble, tx_power, config.span)?;
    let d_mi = denominator_inverse(deli.delays[0], config.m_i, params);
    let d_md = denominator_inverse(deld.delays[0], config.m_d, params);
    let lambda = params.wavelength();

    let mut doppler = Vec::with_capacity(p);
    let mut velocities = Vec::with_capacity(p);
    for t in 0..p {
        let nu_raw = raw_doppler(hd[t], h0[t], d_md).map_err(|_| Error::ZeroCoefficient(t))?;
        let nu_raw_mi = raw_doppler(hi[t], h0[t], d_mi).map_err(|_| Error::ZeroCoefficient(t))?;
        let wraps = config.wrap_rule.count(nu_raw, nu_raw_mi, d_md, d_mi)?;
        let nu_refined = refine_doppler(nu_raw, wraps, d_md);
        velocities.push(velocity_from_doppler(nu_refined, source_velocity, lambda));
        doppler.push(DopplerEstimate {
            h_hat: h0[t],
            h_hat_mi: hi[t],
            h_hat_md: hd[t],
            nu_raw_mi,
            nu_raw,
            wrap_count: wraps,
            nu_refined,
            d_md,
            d_mi,
            crossings: boundary_crossings(nu_raw, nu_raw_mi, d_md, d_mi),
        });
    }
    Ok(PipelineOutput { delays: [del0, deli, deld], doppler, velocities })
}
