//! Golay complementary pairs and the 802.11ad single-carrier training field.
//!
//! The preamble is the short training field (16 repetitions of `Ga128`
//! followed by `-Ga128`) and the channel estimation field (`Gu512`, `Gv512`,
//! `-Gb128`). Symbols are kept as the unrotated ±1 sequence; the π/2-BPSK
//! rotation of the air interface is a per-sample unitary that the estimators
//! never need.

use alloc::vec::Vec;
use num_complex::Complex64;

use crate::{Error, Result};

pub const GOLAY_LEN: usize = 128;
pub const PREAMBLE_LEN: usize = 3328;
/// 0-based start of the correlation segment inside the preamble.
pub const CORRELATION_OFFSET: usize = 2048;
pub const CORRELATION_LEN: usize = 512;

/// Pair of ±1 sequences whose aperiodic autocorrelations sum to `2n·δ`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GolayPair {
    a: Vec<i8>,
    b: Vec<i8>,
}

// Delay and weight vectors of the 802.11ad generator (Ga/Gb 32, 64, 128).
const DELAYS_32: [usize; 5] = [1, 4, 8, 2, 16];
const WEIGHTS_32: [i8; 5] = [-1, 1, -1, 1, -1];
const DELAYS_64: [usize; 6] = [2, 1, 4, 8, 16, 32];
const WEIGHTS_64: [i8; 6] = [1, 1, -1, -1, 1, -1];
const DELAYS_128: [usize; 7] = [1, 8, 2, 4, 16, 32, 64];
const WEIGHTS_128: [i8; 7] = [-1, -1, -1, -1, 1, -1, -1];

impl GolayPair {
    /// Builds a complementary pair of the given power-of-two length in
    /// `2..=128`. Lengths 32, 64 and 128 follow the 802.11ad generator; other
    /// lengths use the plain `[a, b] / [a, -b]` doubling.
    pub fn generate(len: usize) -> Result<Self> {
        if !(2..=GOLAY_LEN).contains(&len) || !len.is_power_of_two() {
            return Err(Error::InvalidArgument(
                "Golay length must be a power of two in 2..=128",
            ));
        }
        match len {
            32 => Ok(Self::recursive(&DELAYS_32, &WEIGHTS_32)),
            64 => Ok(Self::recursive(&DELAYS_64, &WEIGHTS_64)),
            128 => Ok(Self::recursive(&DELAYS_128, &WEIGHTS_128)),
            _ => Ok(Self::doubling(len)),
        }
    }

    /// `Ga128` / `Gb128`.
    pub fn ieee_80211ad() -> Self {
        Self::recursive(&DELAYS_128, &WEIGHTS_128)
    }

    // A_k(n) = W_k A_{k-1}(n) + B_{k-1}(n - D_k)
    // B_k(n) = W_k A_{k-1}(n) - B_{k-1}(n - D_k)
    // and the pair is read out time-reversed.
    fn recursive(delays: &[usize], weights: &[i8]) -> Self {
        let len = 1usize << delays.len();
        let mut a = alloc::vec![0i8; len];
        let mut b = alloc::vec![0i8; len];
        a[0] = 1;
        b[0] = 1;
        for (&d, &w) in delays.iter().zip(weights) {
            let mut next_a = alloc::vec![0i8; len];
            let mut next_b = alloc::vec![0i8; len];
            for n in 0..len {
                let shifted = if n >= d { b[n - d] } else { 0 };
                next_a[n] = w * a[n] + shifted;
                next_b[n] = w * a[n] - shifted;
            }
            a = next_a;
            b = next_b;
        }
        a.reverse();
        b.reverse();
        Self { a, b }
    }

    fn doubling(len: usize) -> Self {
        let mut a = alloc::vec![1i8];
        let mut b = alloc::vec![1i8];
        while a.len() < len {
            let mut next_a = a.clone();
            next_a.extend_from_slice(&b);
            let mut next_b = a;
            next_b.extend(b.iter().map(|x| -x));
            a = next_a;
            b = next_b;
        }
        Self { a, b }
    }

    pub fn a(&self) -> &[i8] {
        &self.a
    }

    pub fn b(&self) -> &[i8] {
        &self.b
    }

    pub fn len(&self) -> usize {
        self.a.len()
    }

    pub fn is_empty(&self) -> bool {
        self.a.is_empty()
    }
}

/// The 3328-sample training field `s[n]`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Preamble {
    samples: Vec<i8>,
}

impl Preamble {
    pub fn samples(&self) -> &[i8] {
        &self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// `s[n]`, zero outside `[0, K_pre)`.
    #[inline]
    pub fn symbol(&self, n: isize) -> i8 {
        if n < 0 {
            0
        } else {
            self.samples.get(n as usize).copied().unwrap_or(0)
        }
    }
}

/// STF followed by CEF, built from `Ga128`/`Gb128`.
pub fn build_preamble() -> Preamble {
    let pair = GolayPair::ieee_80211ad();
    let a = pair.a();
    let b = pair.b();
    let neg = |x: &[i8]| x.iter().map(|v| -v).collect::<Vec<_>>();
    let (na, nb) = (neg(a), neg(b));

    let mut samples = Vec::with_capacity(PREAMBLE_LEN);
    for _ in 0..16 {
        samples.extend_from_slice(a);
    }
    samples.extend_from_slice(&na);
    // Gu512 = [-Gb, -Ga, Gb, -Ga]
    for block in [&nb, &na, b, &na] {
        samples.extend_from_slice(block);
    }
    // Gv512 = [-Gb, Ga, -Gb, -Ga]
    for block in [&nb, a, &nb, &na] {
        samples.extend_from_slice(block);
    }
    samples.extend_from_slice(&nb);
    debug_assert_eq!(samples.len(), PREAMBLE_LEN);
    Preamble { samples }
}

/// The 512-sample segment `s_c = [-a, -b, -a, b]` at offset 2048.
pub fn correlation_segment(p: &Preamble) -> &[i8] {
    &p.samples[CORRELATION_OFFSET..CORRELATION_OFFSET + CORRELATION_LEN]
}

/// `R[ℓ] = Σ s_c[k] · conj(window[ℓ + k])`.
pub fn cross_correlate(s_c: &[i8], window: &[Complex64], lag: usize) -> Result<Complex64> {
    let end = lag
        .checked_add(s_c.len())
        .ok_or(Error::InvalidArgument("lag overflow"))?;
    if end > window.len() {
        return Err(Error::InvalidArgument("lag out of range for window"));
    }
    Ok(correlate_unchecked(s_c, &window[lag..end]))
}

#[inline]
pub(crate) fn correlate_unchecked(s_c: &[i8], window: &[Complex64]) -> Complex64 {
    // four independent accumulators keep the adds pipelined
    let mut acc = [0.0f64; 8];
    let mut s_chunks = s_c.chunks_exact(4);
    let mut w_chunks = window.chunks_exact(4);
    for (s, w) in (&mut s_chunks).zip(&mut w_chunks) {
        for i in 0..4 {
            let v = s[i] as f64;
            acc[2 * i] += v * w[i].re;
            acc[2 * i + 1] += v * w[i].im;
        }
    }
    for (&s, y) in s_chunks.remainder().iter().zip(w_chunks.remainder()) {
        acc[0] += s as f64 * y.re;
        acc[1] += s as f64 * y.im;
    }
    let re = (acc[0] + acc[2]) + (acc[4] + acc[6]);
    let im = (acc[1] + acc[3]) + (acc[5] + acc[7]);
    // conj(y) flips the imaginary part
    Complex64::new(re, -im)
}

/// Correlation of `s_c` with `window` at every lag in `lags`.
pub fn correlate_lags(
    s_c: &[i8],
    window: &[Complex64],
    lags: core::ops::Range<usize>,
) -> Result<Vec<Complex64>> {
    if lags.end + s_c.len() > window.len() + 1 && !lags.is_empty() {
        return Err(Error::InvalidArgument("lag range exceeds window"));
    }
    Ok(lags
        .map(|l| correlate_unchecked(s_c, &window[l..l + s_c.len()]))
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    // Oracle: aperiodic autocorrelation in plain integer arithmetic.
    fn autocorr(x: &[i8], lag: usize) -> i64 {
        (0..x.len() - lag)
            .map(|n| x[n] as i64 * x[n + lag] as i64)
            .sum()
    }

    fn assert_complementary(pair: &GolayPair) {
        let n = pair.len();
        for lag in 0..n {
            let sum = autocorr(pair.a(), lag) + autocorr(pair.b(), lag);
            let expected = if lag == 0 { 2 * n as i64 } else { 0 };
            assert_eq!(sum, expected, "length {n}, lag {lag}");
        }
    }

    #[test]
    fn length_two_pair() {
        let pair = GolayPair::generate(2).unwrap();
        assert_eq!(pair.a(), &[1, 1]);
        assert_eq!(pair.b(), &[1, -1]);
        assert_eq!(autocorr(pair.a(), 1) + autocorr(pair.b(), 1), 0);
    }

    #[test]
    fn all_lengths_complementary() {
        for k in 1..=7 {
            let pair = GolayPair::generate(1 << k).unwrap();
            assert!(pair.a().iter().chain(pair.b()).all(|&v| v == 1 || v == -1));
            assert_complementary(&pair);
        }
    }

    #[test]
    fn invalid_lengths() {
        for len in [0, 1, 3, 96, 256] {
            assert!(matches!(
                GolayPair::generate(len),
                Err(Error::InvalidArgument(_))
            ));
        }
    }

    #[test]
    fn preamble_layout() {
        let p = build_preamble();
        let pair = GolayPair::ieee_80211ad();
        assert_eq!(p.len(), PREAMBLE_LEN);
        assert!(p.samples().iter().all(|&v| v.abs() == 1));
        let mut expected = Vec::new();
        for (sign, block) in [(-1, pair.a()), (-1, pair.b()), (-1, pair.a()), (1, pair.b())] {
            expected.extend(block.iter().map(|v| sign * v));
        }
        assert_eq!(&p.samples()[2048..2560], &expected[..]);
        assert_eq!(correlation_segment(&p), &expected[..]);
        let sc = correlation_segment(&p);
        assert_eq!(sc.iter().map(|&v| (v as i32).pow(2)).sum::<i32>(), 512);
        assert_eq!(p.symbol(-1), 0);
        assert_eq!(p.symbol(PREAMBLE_LEN as isize), 0);
    }

    #[test]
    fn correlation_peak_and_zero_window() {
        let p = build_preamble();
        let sc = correlation_segment(&p);
        let window: Vec<Complex64> = sc.iter().map(|&v| Complex64::new(v as f64, 0.0)).collect();
        assert_eq!(cross_correlate(sc, &window, 0).unwrap(), Complex64::new(512.0, 0.0));
        let zeros = alloc::vec![Complex64::new(0.0, 0.0); 1024];
        for lag in 0..=512 {
            assert_eq!(cross_correlate(sc, &zeros, lag).unwrap(), Complex64::new(0.0, 0.0));
        }
        assert!(cross_correlate(sc, &zeros, 513).is_err());
    }

    #[test]
    fn correlation_peaks_at_echo_delay() {
        let p = build_preamble();
        let sc = correlation_segment(&p);
        let delay = 587;
        let len = PREAMBLE_LEN + 700;
        let frame: Vec<Complex64> = (0..len)
            .map(|k| Complex64::new(p.symbol(k as isize - delay as isize) as f64, 0.0))
            .collect();
        let window = &frame[CORRELATION_OFFSET..];
        let max_lag = window.len() - CORRELATION_LEN;
        let mags: Vec<f64> = (0..=max_lag)
            .map(|l| cross_correlate(sc, window, l).unwrap().norm())
            .collect();
        let best = mags
            .iter()
            .enumerate()
            .max_by(|x, y| x.1.partial_cmp(y.1).unwrap())
            .unwrap();
        assert_eq!(best.0, delay);
        assert_eq!(*best.1, 512.0);
        let fast = correlate_lags(sc, window, 0..max_lag + 1).unwrap();
        assert_eq!(fast.len(), mags.len());
        assert!(fast.iter().zip(&mags).all(|(c, m)| (c.norm() - m).abs() < 1e-9));
    }

    proptest! {
        #[test]
        fn correlation_conjugate_linear(
            re in -5.0f64..5.0, im in -5.0f64..5.0, seed in any::<u64>(), lag in 0usize..64
        ) {
            use rand::{Rng, SeedableRng};
            let p = build_preamble();
            let sc = correlation_segment(&p);
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let w: Vec<Complex64> = (0..600)
                .map(|_| Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
                .collect();
            let alpha = Complex64::new(re, im);
            let scaled: Vec<Complex64> = w.iter().map(|x| alpha * x).collect();
            let lhs = cross_correlate(sc, &scaled, lag).unwrap();
            let rhs = alpha.conj() * cross_correlate(sc, &w, lag).unwrap();
            prop_assert!((lhs - rhs).norm() < 1e-9 * (1.0 + rhs.norm()));
        }
    }
}
