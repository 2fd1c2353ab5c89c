//! Reconstruction error measures and per-direction reports.

use std::io::Write;

use nalgebra::DMatrix;
use rayon::prelude::*;
use rustfft::num_complex::Complex64;
use rustfft::FftPlanner;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::hrir::{Direction, HrirSet};
use crate::model::FactorModel;

const MAGNITUDE_FLOOR: f64 = 1e-12;
/// Half-width in degrees of the horizontal and median plane slices.
pub const PLANE_TOLERANCE_DEG: f64 = 2.5;

/// `sqrt(||X - Xhat||_F^2 / (M N))`.
pub fn rmse(x: &DMatrix<f64>, xhat: &DMatrix<f64>) -> Result<f64> {
    if x.shape() != xhat.shape() {
        return Err(Error::DimensionMismatch(format!(
            "{:?} vs {:?}",
            x.shape(),
            xhat.shape()
        )));
    }
    if x.is_empty() {
        return Err(Error::Degenerate("RMSE of an empty matrix".into()));
    }
    Ok(((x - xhat).norm_squared() / x.len() as f64).sqrt())
}

fn dft_magnitudes(planner: &mut FftPlanner<f64>, x: &[f64]) -> Vec<f64> {
    let mut buf: Vec<Complex64> = x.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    planner.plan_fft_forward(x.len()).process(&mut buf);
    buf.iter().map(|c| c.norm()).collect()
}

/// RMS over all `M` bins of the `M`-point DFT of `20 log10(|H| / |Hhat|)`.
/// Each spectrum is floored at `1e-12` of its own peak.
pub fn spectral_distortion(x: &[f64], xhat: &[f64]) -> Result<f64> {
    if x.len() != xhat.len() {
        return Err(Error::DimensionMismatch(format!("{} vs {} samples", x.len(), xhat.len())));
    }
    if x.iter().chain(xhat).any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("spectral distortion input".into()));
    }
    if x.iter().all(|&v| v == 0.0) || xhat.iter().all(|&v| v == 0.0) {
        return Err(Error::Degenerate("spectral distortion of an all-zero response".into()));
    }
    let mut planner = FftPlanner::new();
    let floored = |mags: Vec<f64>| {
        let peak = mags.iter().cloned().fold(0.0, f64::max);
        mags.into_iter().map(move |m| m.max(MAGNITUDE_FLOOR * peak))
    };
    let h = floored(dft_magnitudes(&mut planner, x));
    let hhat = floored(dft_magnitudes(&mut planner, xhat));
    let sum: f64 = h.zip(hhat).map(|(a, b)| (20.0 * (a / b).log10()).powi(2)).sum();
    Ok((sum / x.len() as f64).sqrt())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DirectionReport {
    pub index: usize,
    pub direction: Direction,
    pub rmse: f64,
    /// `None` when the reconstruction is identically zero.
    pub sd_db: Option<f64>,
    pub nnze: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Aggregates {
    pub count: usize,
    /// Mean over directions with a defined SD.
    pub mean_sd_db: Option<f64>,
    pub mean_nnze: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvalReport {
    pub per_direction: Vec<DirectionReport>,
    pub aggregates: Aggregates,
    pub rmse_global: f64,
    /// Directions with `|elevation| < 2.5` degrees.
    pub horizontal: Aggregates,
    /// Directions with `|azimuth| < 2.5` degrees.
    pub median: Aggregates,
}

fn aggregate<'a>(rows: impl Iterator<Item = &'a DirectionReport>) -> Aggregates {
    let rows: Vec<_> = rows.collect();
    let sds: Vec<f64> = rows.iter().filter_map(|r| r.sd_db).collect();
    let count = rows.len();
    Aggregates {
        count,
        mean_sd_db: (!sds.is_empty()).then(|| sds.iter().sum::<f64>() / sds.len() as f64),
        mean_nnze: if count == 0 {
            0.0
        } else {
            rows.iter().map(|r| r.nnze as f64).sum::<f64>() / count as f64
        },
    }
}

/// Per-direction RMSE, SD and NNZE (entries above `prune_threshold`) plus aggregates.
pub fn evaluate(model: &FactorModel, set: &HrirSet, prune_threshold: f64) -> Result<EvalReport> {
    if set.num_taps() != model.num_taps() || set.num_directions() != model.num_directions() {
        return Err(Error::DimensionMismatch(format!(
            "model is {}x{} but HRIR set is {}x{}",
            model.num_taps(),
            model.num_directions(),
            set.num_taps(),
            set.num_directions()
        )));
    }
    let recon = model.reconstruct_all();
    let per_direction = (0..set.num_directions())
        .into_par_iter()
        .map(|j| {
            let x: Vec<f64> = set.data().column(j).iter().copied().collect();
            let xhat: Vec<f64> = recon.column(j).iter().copied().collect();
            let sq: f64 = x.iter().zip(&xhat).map(|(a, b)| (a - b).powi(2)).sum();
            let sd_db = if xhat.iter().all(|&v| v == 0.0) {
                None
            } else {
                Some(spectral_distortion(&x, &xhat)?)
            };
            Ok(DirectionReport {
                index: j,
                direction: set.directions()[j],
                rmse: (sq / x.len() as f64).sqrt(),
                sd_db,
                nnze: model.sparse_reflection(j, prune_threshold)?.nnze(),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let aggregates = aggregate(per_direction.iter());
    let horizontal = aggregate(
        per_direction
            .iter()
            .filter(|r| r.direction.elevation_deg.abs() < PLANE_TOLERANCE_DEG),
    );
    let median = aggregate(
        per_direction
            .iter()
            .filter(|r| r.direction.azimuth_deg.abs() < PLANE_TOLERANCE_DEG),
    );
    Ok(EvalReport {
        rmse_global: rmse(set.data(), &recon)?,
        per_direction,
        aggregates,
        horizontal,
        median,
    })
}

impl EvalReport {
    /// CSV with columns `direction_index, az_deg, el_deg, rmse, sd_db, nnze`.
    /// Floats carry 17 significant digits; an undefined SD is left empty.
    pub fn write_csv<W: Write>(&self, out: W) -> std::io::Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["direction_index", "az_deg", "el_deg", "rmse", "sd_db", "nnze"])?;
        for r in &self.per_direction {
            w.write_record([
                r.index.to_string(),
                format_f64(r.direction.azimuth_deg),
                format_f64(r.direction.elevation_deg),
                format_f64(r.rmse),
                r.sd_db.map(format_f64).unwrap_or_default(),
                r.nnze.to_string(),
            ])?;
        }
        w.flush()
    }
}

/// Scientific notation with 17 significant digits.
pub fn format_f64(v: f64) -> String {
    format!("{v:.16e}")
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn rmse_examples() {
        let x = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(rmse(&x, &x).unwrap(), 0.0);
        assert!((rmse(&x, &x.add_scalar(1.0)).unwrap() - 1.0).abs() < 1e-15);
        assert!(rmse(&x, &DMatrix::zeros(2, 3)).is_err());
    }

    #[test]
    fn rmse_matches_loop() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let a = DMatrix::from_fn(4, 3, |_, _| rng.gen_range(-1.0..1.0));
        let b = DMatrix::from_fn(4, 3, |_, _| rng.gen_range(-1.0..1.0));
        let mut acc = 0.0;
        for i in 0..4 {
            for j in 0..3 {
                acc += (a[(i, j)] - b[(i, j)]) * (a[(i, j)] - b[(i, j)]);
            }
        }
        assert!((rmse(&a, &b).unwrap() - (acc / 12.0).sqrt()).abs() < 1e-15);
    }

    #[test]
    fn sd_examples() {
        let x = [1.0, 0.5, -0.25, 0.1, 0.05];
        assert_eq!(spectral_distortion(&x, &x).unwrap(), 0.0);
        let scaled: Vec<f64> = x.iter().map(|v| 0.1 * v).collect();
        assert!((spectral_distortion(&x, &scaled).unwrap() - 20.0).abs() < 1e-9);
        assert!(spectral_distortion(&x, &[0.0; 5]).is_err());
        assert!(spectral_distortion(&x, &[1.0]).is_err());
    }

    #[test]
    fn sd_matches_brute_force_dft() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let n = 13;
        let x: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let y: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let mag = |v: &[f64], k: usize| {
            let (mut re, mut im) = (0.0, 0.0);
            for (t, &s) in v.iter().enumerate() {
                let a = -2.0 * std::f64::consts::PI * (k * t) as f64 / n as f64;
                re += s * a.cos();
                im += s * a.sin();
            }
            re.hypot(im)
        };
        let sum: f64 = (0..n).map(|k| (20.0 * (mag(&x, k) / mag(&y, k)).log10()).powi(2)).sum();
        let expected = (sum / n as f64).sqrt();
        assert!((spectral_distortion(&x, &y).unwrap() - expected).abs() < 1e-9);
    }

    #[test]
    fn format_round_trips() {
        for v in [0.1, 1.0 / 3.0, -2.5e-300, 123456.789] {
            assert_eq!(format_f64(v).parse::<f64>().unwrap(), v);
        }
    }
}
