use rustfft::num_complex::Complex64;

use super::{HrirSet, PreprocessFlags};
use crate::error::{Error, Result};
use crate::fft::{next_power_of_two, Radix2Fft};

/// Fraction of the peak magnitude that marks the onset of an HRIR.
pub const DEFAULT_ONSET_THRESHOLD: f64 = 0.1;

/// Magnitudes below this fraction of the spectral peak are clamped before the log.
const LOG_FLOOR: f64 = 1e-12;
/// Longest cepstrum FFT the min-phase search will try.
const MAX_CEPSTRUM_LEN: usize = 1 << 20;
/// Target agreement between input and output magnitude spectra.
const MAGNITUDE_TOLERANCE: f64 = 1e-9;

/// Minimum-phase sequence with the same magnitude spectrum as `h`.
///
/// Uses the folded real cepstrum. The cepstrum is time-aliased at any finite
/// FFT length, and badly so when `h` has zeros near the unit circle, so the
/// length starts at the next power of two `>= 4 * len(h)` and doubles until
/// the truncated output reproduces the input magnitudes on that first grid.
pub fn to_min_phase(h: &[f64]) -> Result<Vec<f64>> {
    if h.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("min-phase input".into()));
    }
    if h.iter().all(|&v| v == 0.0) {
        return Err(Error::Degenerate("min-phase input is all zeros".into()));
    }
    let m = h.len();
    let check_len = next_power_of_two(4 * m);
    let check_fft = Radix2Fft::new(check_len);
    let reference = magnitudes(&check_fft, h);
    let peak = reference.iter().cloned().fold(0.0, f64::max);
    let floor = LOG_FLOOR * peak;

    let mut best: Option<(f64, Vec<f64>)> = None;
    let mut n = check_len;
    loop {
        let candidate = cepstral_min_phase(h, n);
        let got = magnitudes(&check_fft, &candidate);
        let err = reference
            .iter()
            .zip(&got)
            .map(|(r, g)| (r - g).abs() / r.max(floor))
            .fold(0.0, f64::max);
        if best.as_ref().is_none_or(|(e, _)| err < *e) {
            best = Some((err, candidate));
        }
        if err <= MAGNITUDE_TOLERANCE || n >= MAX_CEPSTRUM_LEN {
            break;
        }
        n *= 2;
    }
    Ok(best.expect("at least one candidate").1)
}

fn magnitudes(fft: &Radix2Fft, h: &[f64]) -> Vec<f64> {
    let mut buf = vec![Complex64::new(0.0, 0.0); fft.len()];
    for (b, &v) in buf.iter_mut().zip(h) {
        b.re = v;
    }
    fft.forward(&mut buf);
    buf.iter().map(|c| c.norm()).collect()
}

fn cepstral_min_phase(h: &[f64], n: usize) -> Vec<f64> {
    let fft = Radix2Fft::new(n);
    let mut buf = vec![Complex64::new(0.0, 0.0); n];
    for (b, &v) in buf.iter_mut().zip(h) {
        b.re = v;
    }
    fft.forward(&mut buf);
    let peak = buf.iter().map(|c| c.norm()).fold(0.0, f64::max);
    for c in buf.iter_mut() {
        *c = Complex64::new(c.norm().max(LOG_FLOOR * peak).ln(), 0.0);
    }
    fft.inverse(&mut buf);
    // fold the anticausal half of the real cepstrum onto the causal half
    for (i, c) in buf.iter_mut().enumerate() {
        let w = if i == 0 || i == n / 2 {
            1.0
        } else if i < n / 2 {
            2.0
        } else {
            0.0
        };
        *c = Complex64::new(c.re * w, 0.0);
    }
    fft.forward(&mut buf);
    for c in buf.iter_mut() {
        *c = c.exp();
    }
    fft.inverse(&mut buf);
    buf.iter().take(h.len()).map(|c| c.re).collect()
}

/// Shifts `h` left so the first sample reaching `threshold_fraction * max|h|`
/// lands at index 0, zero-filling the tail.
pub fn remove_onset_delay(h: &[f64], threshold_fraction: f64) -> Result<Vec<f64>> {
    if !(threshold_fraction > 0.0 && threshold_fraction < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "onset threshold fraction {threshold_fraction} outside (0, 1)"
        )));
    }
    let peak = h.iter().map(|v| v.abs()).fold(0.0, f64::max);
    if !(peak > 0.0) || !peak.is_finite() {
        return Err(Error::Degenerate("onset detection on a zero or non-finite vector".into()));
    }
    let level = threshold_fraction * peak;
    let onset = h.iter().position(|v| v.abs() >= level).unwrap_or(0);
    let mut out = vec![0.0; h.len()];
    out[..h.len() - onset].copy_from_slice(&h[onset..]);
    Ok(out)
}

/// Scales `h` so its absolute values sum to one.
pub fn normalize_abs_sum(h: &[f64]) -> Result<Vec<f64>> {
    let s: f64 = h.iter().map(|v| v.abs()).sum();
    if !(s > 0.0) || !s.is_finite() {
        return Err(Error::Degenerate("cannot normalise a zero or non-finite vector".into()));
    }
    Ok(h.iter().map(|v| v / s).collect())
}

/// Which steps [`preprocess`] runs, in the fixed order min-phase, delay removal, normalisation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PreprocessOptions {
    pub minphase: bool,
    pub remove_delay: bool,
    pub normalize: bool,
    pub onset_threshold: f64,
}

impl Default for PreprocessOptions {
    fn default() -> Self {
        Self {
            minphase: true,
            remove_delay: true,
            normalize: true,
            onset_threshold: DEFAULT_ONSET_THRESHOLD,
        }
    }
}

/// Applies the selected steps to every column. Flags already set on the
/// input stay set.
pub fn preprocess(set: &HrirSet, opts: &PreprocessOptions) -> Result<HrirSet> {
    let columns = set
        .columns()
        .into_iter()
        .map(|mut h| {
            if opts.minphase {
                h = to_min_phase(&h)?;
            }
            if opts.remove_delay {
                h = remove_onset_delay(&h, opts.onset_threshold)?;
            }
            if opts.normalize {
                h = normalize_abs_sum(&h)?;
            }
            Ok(h)
        })
        .collect::<Result<Vec<_>>>()?;
    let old = set.flags();
    let flags = PreprocessFlags {
        minphase: old.minphase || opts.minphase,
        delay_removed: old.delay_removed || opts.remove_delay,
        normalized: old.normalized || opts.normalize,
    };
    HrirSet::from_columns(&columns, set.sample_rate_hz(), set.directions().to_vec(), flags)
}
