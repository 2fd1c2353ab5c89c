//! Trained factorisation and its JSON file format.

use std::fs;
use std::path::Path;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hrir::Direction;
use crate::sparse::{ResidualTransform, SparseFilter};

const FORMAT_VERSION: u32 = 1;

/// Per-direction statistics recorded when a model is sparsified.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DirectionStats {
    pub nnze: usize,
    /// `None` when the pruned reconstruction is identically zero.
    pub sd_db: Option<f64>,
}

/// Settings and outcome of the sparsification pass.
#[derive(Debug, Clone, PartialEq)]
pub struct SparsityInfo {
    pub lambda: f64,
    pub transform: ResidualTransform,
    pub prune_threshold: f64,
    pub per_direction: Vec<DirectionStats>,
}

/// Resonance filter `f` shared by all directions plus one non-negative
/// reflection filter per direction (the rows of `G`).
#[derive(Debug, Clone, PartialEq)]
pub struct FactorModel {
    resonance: Vec<f64>,
    reflections: DMatrix<f64>,
    num_taps: usize,
    sample_rate_hz: u32,
    seed: u64,
    training_log: Vec<f64>,
    directions: Vec<Direction>,
    sparsity: Option<SparsityInfo>,
}

impl FactorModel {
    pub fn new(
        resonance: Vec<f64>,
        reflections: DMatrix<f64>,
        num_taps: usize,
        sample_rate_hz: u32,
        seed: u64,
        training_log: Vec<f64>,
        directions: Vec<Direction>,
    ) -> Result<Self> {
        let (n, k) = reflections.shape();
        if k == 0 || k > num_taps {
            return Err(Error::InvalidArgument(format!("K = {k} must lie in 1..={num_taps}")));
        }
        if resonance.len() != num_taps - k + 1 {
            return Err(Error::DimensionMismatch(format!(
                "resonance filter has {} taps, expected M - K + 1 = {}",
                resonance.len(),
                num_taps - k + 1
            )));
        }
        if directions.len() != n {
            return Err(Error::DimensionMismatch(format!(
                "{} directions for {n} reflection filters",
                directions.len()
            )));
        }
        if resonance.iter().chain(reflections.iter()).any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("model coefficients".into()));
        }
        if reflections.iter().any(|&v| v < 0.0) {
            return Err(Error::InvalidArgument("reflection filters must be non-negative".into()));
        }
        Ok(Self {
            resonance,
            reflections,
            num_taps,
            sample_rate_hz,
            seed,
            training_log,
            directions,
            sparsity: None,
        })
    }

    pub fn with_sparsity(mut self, reflections: DMatrix<f64>, info: SparsityInfo) -> Result<Self> {
        if reflections.shape() != self.reflections.shape() {
            return Err(Error::DimensionMismatch("sparse reflections change the model shape".into()));
        }
        if info.per_direction.len() != self.num_directions() {
            return Err(Error::DimensionMismatch("per-direction statistics length".into()));
        }
        if reflections.iter().any(|&v| v < 0.0 || !v.is_finite()) {
            return Err(Error::InvalidArgument("reflection filters must be finite and non-negative".into()));
        }
        self.reflections = reflections;
        self.sparsity = Some(info);
        Ok(self)
    }

    pub fn resonance(&self) -> &[f64] {
        &self.resonance
    }

    /// `N x K` reflection matrix.
    pub fn reflections(&self) -> &DMatrix<f64> {
        &self.reflections
    }

    pub fn reflection(&self, j: usize) -> Result<Vec<f64>> {
        self.check_index(j)?;
        Ok(self.reflections.row(j).iter().copied().collect())
    }

    /// Row `j` as a sparse filter keeping entries above `threshold`.
    pub fn sparse_reflection(&self, j: usize, threshold: f64) -> Result<SparseFilter> {
        Ok(SparseFilter::prune(&self.reflection(j)?, threshold))
    }

    pub fn num_taps(&self) -> usize {
        self.num_taps
    }

    pub fn num_directions(&self) -> usize {
        self.reflections.nrows()
    }

    pub fn filter_len(&self) -> usize {
        self.reflections.ncols()
    }

    pub fn sample_rate_hz(&self) -> u32 {
        self.sample_rate_hz
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn training_log(&self) -> &[f64] {
        &self.training_log
    }

    pub fn directions(&self) -> &[Direction] {
        &self.directions
    }

    pub fn sparsity(&self) -> Option<&SparsityInfo> {
        self.sparsity.as_ref()
    }

    /// `(c * f, G / c)`, which reconstructs the same HRIRs for `c > 0`.
    pub fn rescaled(&self, c: f64) -> Result<Self> {
        if !(c > 0.0) || !c.is_finite() {
            return Err(Error::InvalidArgument(format!("scale {c} must be positive")));
        }
        let mut out = self.clone();
        out.resonance.iter_mut().for_each(|v| *v *= c);
        out.reflections /= c;
        Ok(out)
    }

    /// HRIR for direction `j`: `conv(f, G_j)`, exactly `M` taps long.
    pub fn reconstruct(&self, j: usize) -> Result<Vec<f64>> {
        self.check_index(j)?;
        let mut out = vec![0.0; self.num_taps];
        for (s, &gs) in self.reflections.row(j).iter().enumerate() {
            if gs == 0.0 {
                continue;
            }
            for (m, &fm) in self.resonance.iter().enumerate() {
                out[s + m] += fm * gs;
            }
        }
        Ok(out)
    }

    /// All reconstructions as an `M x N` matrix.
    pub fn reconstruct_all(&self) -> DMatrix<f64> {
        let mut out = DMatrix::zeros(self.num_taps, self.num_directions());
        for j in 0..self.num_directions() {
            let col = self.reconstruct(j).expect("index in range");
            out.set_column(j, &nalgebra::DVector::from_vec(col));
        }
        out
    }

    fn check_index(&self, j: usize) -> Result<()> {
        if j >= self.num_directions() {
            return Err(Error::IndexOutOfRange {
                index: j,
                len: self.num_directions(),
            });
        }
        Ok(())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&ModelFile::from(self)).expect("model serialises")
    }

    pub fn from_json(text: &str) -> std::result::Result<Self, ModelParseError> {
        let file: ModelFile = serde_json::from_str(text).map_err(ModelParseError::Json)?;
        file.into_model().map_err(ModelParseError::Invalid)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.to_json()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text).map_err(|e| match e {
            ModelParseError::Json(source) => Error::ModelFile {
                path: path.to_path_buf(),
                source,
            },
            ModelParseError::Invalid(err) => err,
        })
    }
}

#[derive(Debug)]
pub enum ModelParseError {
    Json(serde_json::Error),
    Invalid(Error),
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(untagged)]
enum ReflectionField {
    Dense(Vec<Vec<f64>>),
    Sparse(Vec<SparseRow>),
}

#[derive(Debug, Serialize, Deserialize)]
struct SparseRow {
    indices: Vec<usize>,
    values: Vec<f64>,
}

#[derive(Debug, Serialize, Deserialize)]
#[allow(non_snake_case)]
struct ModelFile {
    format_version: u32,
    M: usize,
    N: usize,
    K: usize,
    sample_rate_hz: u32,
    seed: u64,
    f: Vec<f64>,
    G: ReflectionField,
    training_log: Vec<f64>,
    directions: Vec<Direction>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    lambda: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    transform: Option<ResidualTransform>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    prune_threshold: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    per_direction: Option<Vec<DirectionStats>>,
}

impl From<&FactorModel> for ModelFile {
    fn from(m: &FactorModel) -> Self {
        let rows = m.reflections.row_iter();
        let g = match &m.sparsity {
            None => ReflectionField::Dense(rows.map(|r| r.iter().copied().collect()).collect()),
            Some(_) => ReflectionField::Sparse(
                rows.map(|r| {
                    let sf = SparseFilter::prune(&r.iter().copied().collect::<Vec<_>>(), 0.0);
                    SparseRow {
                        indices: sf.indices().to_vec(),
                        values: sf.values().to_vec(),
                    }
                })
                .collect(),
            ),
        };
        let sp = m.sparsity.as_ref();
        ModelFile {
            format_version: FORMAT_VERSION,
            M: m.num_taps,
            N: m.num_directions(),
            K: m.filter_len(),
            sample_rate_hz: m.sample_rate_hz,
            seed: m.seed,
            f: m.resonance.clone(),
            G: g,
            training_log: m.training_log.clone(),
            directions: m.directions.clone(),
            lambda: sp.map(|s| s.lambda),
            transform: sp.map(|s| s.transform),
            prune_threshold: sp.map(|s| s.prune_threshold),
            per_direction: sp.map(|s| s.per_direction.clone()),
        }
    }
}

impl ModelFile {
    fn into_model(self) -> Result<FactorModel> {
        if self.format_version != FORMAT_VERSION {
            return Err(Error::Unsupported(format!("model format_version {}", self.format_version)));
        }
        let (n, k) = (self.N, self.K);
        let mut g = DMatrix::zeros(n, k);
        let row_count = match &self.G {
            ReflectionField::Dense(rows) => rows.len(),
            ReflectionField::Sparse(rows) => rows.len(),
        };
        if row_count != n {
            return Err(Error::DimensionMismatch(format!("G has {row_count} rows, N = {n}")));
        }
        match self.G {
            ReflectionField::Dense(rows) => {
                for (i, row) in rows.iter().enumerate() {
                    if row.len() != k {
                        return Err(Error::DimensionMismatch(format!(
                            "G row {i} has {} entries, K = {k}",
                            row.len()
                        )));
                    }
                    for (j, &v) in row.iter().enumerate() {
                        g[(i, j)] = v;
                    }
                }
            }
            ReflectionField::Sparse(rows) => {
                for (i, row) in rows.into_iter().enumerate() {
                    let sf = SparseFilter::new(k, row.indices, row.values)?;
                    for (idx, v) in sf.iter() {
                        g[(i, idx)] = v;
                    }
                }
            }
        }
        let model = FactorModel::new(
            self.f,
            g.clone(),
            self.M,
            self.sample_rate_hz,
            self.seed,
            self.training_log,
            self.directions,
        )?;
        match (self.lambda, self.transform, self.prune_threshold, self.per_direction) {
            (Some(lambda), Some(transform), Some(prune_threshold), Some(per_direction)) => model.with_sparsity(
                g,
                SparsityInfo {
                    lambda,
                    transform,
                    prune_threshold,
                    per_direction,
                },
            ),
            (None, None, None, None) => Ok(model),
            _ => Err(Error::InvalidArgument(
                "sparse model file must carry lambda, transform, prune_threshold and per_direction together".into(),
            )),
        }
    }
}
