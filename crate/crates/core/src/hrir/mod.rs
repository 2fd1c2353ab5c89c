//! HRIR collections, their preprocessing, and on-disk formats.

mod bundle;
mod csv_ingest;
mod preprocess;
mod signal;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use bundle::{load_bundle, save_bundle, Manifest, BUNDLE_DATA_FILE, MANIFEST_FILE};
pub use csv_ingest::load_csv;
pub use preprocess::{
    normalize_abs_sum, preprocess, remove_onset_delay, to_min_phase, PreprocessOptions,
    DEFAULT_ONSET_THRESHOLD,
};
pub use signal::{load_signal, save_signal, SignalFormat};

/// Measurement direction in degrees.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Direction {
    #[serde(rename = "az_deg")]
    pub azimuth_deg: f64,
    #[serde(rename = "el_deg")]
    pub elevation_deg: f64,
}

impl Direction {
    pub fn new(azimuth_deg: f64, elevation_deg: f64) -> Self {
        Self {
            azimuth_deg,
            elevation_deg,
        }
    }
}

/// Which preprocessing steps have been applied to every column.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PreprocessFlags {
    pub minphase: bool,
    pub delay_removed: bool,
    pub normalized: bool,
}

impl PreprocessFlags {
    pub fn all() -> Self {
        Self {
            minphase: true,
            delay_removed: true,
            normalized: true,
        }
    }

    pub fn is_complete(&self) -> bool {
        self.minphase && self.delay_removed && self.normalized
    }
}

/// `M x N` matrix of impulse responses, one column per direction.
#[derive(Debug, Clone, PartialEq)]
pub struct HrirSet {
    data: DMatrix<f64>,
    sample_rate_hz: u32,
    directions: Vec<Direction>,
    flags: PreprocessFlags,
}

impl HrirSet {
    pub fn new(
        data: DMatrix<f64>,
        sample_rate_hz: u32,
        directions: Vec<Direction>,
        flags: PreprocessFlags,
    ) -> Result<Self> {
        let (m, n) = data.shape();
        if m == 0 || n == 0 {
            return Err(Error::Degenerate(format!("HRIR set of shape {m}x{n}")));
        }
        if sample_rate_hz == 0 {
            return Err(Error::InvalidArgument("sample rate must be positive".into()));
        }
        if directions.len() != n {
            return Err(Error::DimensionMismatch(format!(
                "{} directions for {n} HRIR columns",
                directions.len()
            )));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("HRIR samples".into()));
        }
        if flags.normalized {
            for (j, col) in data.column_iter().enumerate() {
                let s: f64 = col.iter().map(|v| v.abs()).sum();
                if (s - 1.0).abs() > 1e-6 {
                    return Err(Error::InvalidArgument(format!(
                        "column {j} is flagged normalized but has absolute sum {s}"
                    )));
                }
            }
        }
        Ok(Self {
            data,
            sample_rate_hz,
            directions,
            flags,
        })
    }

    /// Builds a set from one vector per direction; all must share a length.
    pub fn from_columns(
        columns: &[Vec<f64>],
        sample_rate_hz: u32,
        directions: Vec<Direction>,
        flags: PreprocessFlags,
    ) -> Result<Self> {
        let m = columns.first().map_or(0, Vec::len);
        if let Some((j, c)) = columns.iter().enumerate().find(|(_, c)| c.len() != m) {
            return Err(Error::DimensionMismatch(format!(
                "column {j} has {} taps, expected {m}",
                c.len()
            )));
        }
        let data = DMatrix::from_fn(m, columns.len(), |i, j| columns[j][i]);
        Self::new(data, sample_rate_hz, directions, flags)
    }

    /// Rows (taps per HRIR).
    pub fn num_taps(&self) -> usize {
        self.data.nrows()
    }

    /// Columns (directions).
    pub fn num_directions(&self) -> usize {
        self.data.ncols()
    }

    pub fn data(&self) -> &DMatrix<f64> {
        &self.data
    }

    pub fn sample_rate_hz(&self) -> u32 {
        self.sample_rate_hz
    }

    pub fn directions(&self) -> &[Direction] {
        &self.directions
    }

    pub fn flags(&self) -> PreprocessFlags {
        self.flags
    }

    pub fn column(&self, j: usize) -> Result<DVector<f64>> {
        if j >= self.num_directions() {
            return Err(Error::IndexOutOfRange {
                index: j,
                len: self.num_directions(),
            });
        }
        Ok(self.data.column(j).into_owned())
    }

    pub fn columns(&self) -> Vec<Vec<f64>> {
        self.data.column_iter().map(|c| c.iter().copied().collect()).collect()
    }
}

/// Mono sample stream.
#[derive(Debug, Clone, PartialEq)]
pub struct Signal {
    samples: Vec<f64>,
    sample_rate_hz: u32,
}

impl Signal {
    pub fn new(samples: Vec<f64>, sample_rate_hz: u32) -> Result<Self> {
        if sample_rate_hz == 0 {
            return Err(Error::InvalidArgument("sample rate must be positive".into()));
        }
        if samples.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("signal samples".into()));
        }
        Ok(Self {
            samples,
            sample_rate_hz,
        })
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn into_samples(self) -> Vec<f64> {
        self.samples
    }

    pub fn sample_rate_hz(&self) -> u32 {
        self.sample_rate_hz
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }
}
