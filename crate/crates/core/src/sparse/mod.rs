//! Sparsification of reflection filters.
//!
//! With the resonance filter fixed, each direction's reflection filter is
//! re-solved as a penalised non-negative least-squares problem
//! `min ||D (F g - x)||^2 + lambda |g|_1, g >= 0`, where `D` reweights the
//! residual, and the result is pruned to drop negligible taps.

mod solver;

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hrir::HrirSet;
use crate::metrics::spectral_distortion;
use crate::model::{DirectionStats, FactorModel, SparsityInfo};
use crate::seminmf::resonance_matrix;
use crate::toeplitz::{toeplitz_from_params, ToeplitzParams};

pub use solver::{L1Problem, L1Solution};

/// Taps at or below this magnitude are dropped.
pub const DEFAULT_PRUNE_THRESHOLD: f64 = 1e-4;
/// Penalty used for the sparse model when none is given.
pub const DEFAULT_LAMBDA: f64 = 1e-3;

/// `15, 17, ..., 63, 100, 160, 250`.
pub fn default_sigma_grid() -> Vec<f64> {
    (0..25).map(|i| 15.0 + 2.0 * i as f64).chain([100.0, 160.0, 250.0]).collect()
}

/// Residual weighting `D`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum ResidualTransform {
    Identity,
    /// Symmetric Toeplitz matrix of Gaussian taps `N_sigma(k)`; low-passes the residual.
    Convolution { sigma: f64 },
    /// Diagonal `exp(-i^2 / sigma^2)`; emphasises early taps.
    Window { sigma: f64 },
}

impl ResidualTransform {
    pub fn sigma(&self) -> Option<f64> {
        match *self {
            ResidualTransform::Identity => None,
            ResidualTransform::Convolution { sigma } | ResidualTransform::Window { sigma } => Some(sigma),
        }
    }
}

fn gaussian(x: f64, sigma: f64) -> f64 {
    (-x * x / (2.0 * sigma * sigma)).exp() / (sigma * (2.0 * PI).sqrt())
}

/// Dense `M x M` matrix for `t`.
pub fn build_transform(t: &ResidualTransform, m: usize) -> Result<DMatrix<f64>> {
    if let Some(sigma) = t.sigma() {
        if !(sigma > 0.0) || !sigma.is_finite() {
            return Err(Error::InvalidArgument(format!("transform bandwidth sigma = {sigma} must be positive")));
        }
    }
    if m == 0 {
        return Err(Error::InvalidArgument("transform size must be positive".into()));
    }
    Ok(match *t {
        ResidualTransform::Identity => DMatrix::identity(m, m),
        ResidualTransform::Convolution { sigma } => {
            let theta = (1 - m as isize..m as isize).map(|k| gaussian(k as f64, sigma)).collect();
            toeplitz_from_params(&ToeplitzParams::from_theta(m, m, theta, false)?)
        }
        ResidualTransform::Window { sigma } => {
            DMatrix::from_diagonal(&DVector::from_fn(m, |i, _| (-((i * i) as f64) / (sigma * sigma)).exp()))
        }
    })
}

fn check_finite<'a>(what: &str, values: impl IntoIterator<Item = &'a f64>) -> Result<()> {
    if values.into_iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite(what.into()));
    }
    Ok(())
}

fn check_lambda(lambda: f64) -> Result<()> {
    if !(lambda >= 0.0) || !lambda.is_finite() {
        return Err(Error::InvalidArgument(format!("lambda = {lambda} must be finite and >= 0")));
    }
    Ok(())
}

fn problem_for(df: &DMatrix<f64>, d: &DMatrix<f64>, x: &[f64], lambda: f64, nonneg: bool) -> L1Problem {
    let dx = d * DVector::from_column_slice(x);
    L1Problem::new(df.transpose() * df, df.transpose() * &dx, dx.norm_squared(), lambda, nonneg)
}

fn check_square(d: &DMatrix<f64>, m: usize) -> Result<()> {
    if d.shape() != (m, m) {
        return Err(Error::DimensionMismatch(format!(
            "transform is {}x{}, expected {m}x{m}",
            d.nrows(),
            d.ncols()
        )));
    }
    Ok(())
}

/// `argmin_{g >= 0} ||D (F g - x)||^2 + lambda |g|_1`.
pub fn l1_nnls(f: &DMatrix<f64>, x: &[f64], d: &DMatrix<f64>, lambda: f64) -> Result<L1Solution> {
    let m = f.nrows();
    if x.len() != m {
        return Err(Error::DimensionMismatch(format!("target has {} samples, F has {m} rows", x.len())));
    }
    check_square(d, m)?;
    check_lambda(lambda)?;
    check_finite("l1_nnls inputs", f.iter().chain(x).chain(d.iter()))?;
    Ok(problem_for(&(d * f), d, x, lambda, true).solve())
}

/// Signed baseline `argmin ||D (xhat - x)||^2 + lambda |xhat|_1` with no filter structure.
pub fn l1_ls_baseline(x: &[f64], d: &DMatrix<f64>, lambda: f64) -> Result<L1Solution> {
    check_square(d, x.len())?;
    check_lambda(lambda)?;
    check_finite("l1_ls_baseline inputs", x.iter().chain(d.iter()))?;
    Ok(problem_for(d, d, x, lambda, false).solve())
}

/// Index/value pairs of a reflection filter of nominal length `len`.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseFilter {
    len: usize,
    indices: Vec<usize>,
    values: Vec<f64>,
}

impl SparseFilter {
    pub fn new(len: usize, indices: Vec<usize>, values: Vec<f64>) -> Result<Self> {
        if indices.len() != values.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} indices for {} values",
                indices.len(),
                values.len()
            )));
        }
        if indices.windows(2).any(|w| w[0] >= w[1]) || indices.last().is_some_and(|&i| i >= len) {
            return Err(Error::InvalidArgument(format!(
                "sparse indices must be strictly increasing and below {len}"
            )));
        }
        if values.iter().any(|v| !(*v > 0.0) || !v.is_finite()) {
            return Err(Error::InvalidArgument("sparse values must be positive".into()));
        }
        Ok(Self { len, indices, values })
    }

    /// Keeps the entries of `g` strictly greater than `threshold`.
    pub fn prune(g: &[f64], threshold: f64) -> Self {
        let (indices, values) = g.iter().enumerate().filter(|(_, &v)| v > threshold).map(|(i, &v)| (i, v)).unzip();
        Self {
            len: g.len(),
            indices,
            values,
        }
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn nnze(&self) -> usize {
        self.indices.len()
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.indices.iter().copied().zip(self.values.iter().copied())
    }

    pub fn to_dense(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.len];
        for (i, v) in self.iter() {
            out[i] = v;
        }
        out
    }
}

/// See [`SparseFilter::prune`].
pub fn prune(g: &[f64], threshold: f64) -> SparseFilter {
    SparseFilter::prune(g, threshold)
}

struct Fitted {
    row: Vec<f64>,
    stats: DirectionStats,
}

fn check_model_data(model: &FactorModel, set: &HrirSet) -> Result<()> {
    if set.num_taps() != model.num_taps() || set.num_directions() != model.num_directions() {
        return Err(Error::DimensionMismatch(format!(
            "model is {}x{} but HRIR set is {}x{}",
            model.num_taps(),
            model.num_directions(),
            set.num_taps(),
            set.num_directions()
        )));
    }
    Ok(())
}

fn fit_direction(
    df: &DMatrix<f64>,
    d: &DMatrix<f64>,
    model: &FactorModel,
    x: &[f64],
    lambda: f64,
    threshold: f64,
) -> Result<Fitted> {
    check_lambda(lambda)?;
    let sol = problem_for(df, d, x, lambda, true).solve();
    let pruned = SparseFilter::prune(&sol.coefficients, threshold);
    let row = pruned.to_dense();
    let mut recon = vec![0.0; x.len()];
    for (s, v) in pruned.iter() {
        for (m, &fm) in model.resonance().iter().enumerate() {
            recon[s + m] += fm * v;
        }
    }
    Ok(Fitted {
        row,
        stats: DirectionStats {
            nnze: pruned.nnze(),
            sd_db: spectral_distortion(x, &recon).ok(),
        },
    })
}

/// Re-solves every reflection filter with penalty `lambda` under transform `t`
/// and prunes at `threshold`. Directions are solved in parallel on the
/// current rayon pool.
pub fn sparsify_model(
    model: &FactorModel,
    set: &HrirSet,
    lambda: f64,
    t: ResidualTransform,
    threshold: f64,
) -> Result<FactorModel> {
    sparsify_model_per_direction(model, set, &vec![lambda; model.num_directions()], t, threshold)
}

/// As [`sparsify_model`] but with one penalty per direction.
pub fn sparsify_model_per_direction(
    model: &FactorModel,
    set: &HrirSet,
    lambdas: &[f64],
    t: ResidualTransform,
    threshold: f64,
) -> Result<FactorModel> {
    check_model_data(model, set)?;
    if lambdas.len() != model.num_directions() {
        return Err(Error::DimensionMismatch(format!(
            "{} penalties for {} directions",
            lambdas.len(),
            model.num_directions()
        )));
    }
    if !(threshold >= 0.0) {
        return Err(Error::InvalidArgument(format!("prune threshold {threshold} must be >= 0")));
    }
    let f = resonance_matrix(model.resonance(), model.filter_len())?;
    let d = build_transform(&t, model.num_taps())?;
    let df = &d * &f;
    let columns = set.columns();
    let fitted = columns
        .par_iter()
        .zip(lambdas.par_iter())
        .map(|(x, &lambda)| fit_direction(&df, &d, model, x, lambda, threshold))
        .collect::<Result<Vec<_>>>()?;
    let mut g = DMatrix::zeros(model.num_directions(), model.filter_len());
    for (j, fit) in fitted.iter().enumerate() {
        for (s, &v) in fit.row.iter().enumerate() {
            g[(j, s)] = v;
        }
    }
    let uniform = lambdas.iter().all(|&l| l == lambdas[0]);
    let info = SparsityInfo {
        lambda: if uniform { lambdas[0] } else { lambdas.iter().cloned().fold(0.0, f64::max) },
        transform: t,
        prune_threshold: threshold,
        per_direction: fitted.iter().map(|f| f.stats).collect(),
    };
    model.clone().with_sparsity(g, info)
}

/// Outcome of a bandwidth search for one direction.
#[derive(Debug, Clone, PartialEq)]
pub struct SigmaChoice {
    pub sigma: f64,
    pub sd_db: f64,
    pub nnze: usize,
    /// `(sigma, sd_db)` for every distinct grid value, ascending in sigma.
    pub curve: Vec<(f64, f64)>,
}

/// Picks the window bandwidth from `grid` that minimises the spectral
/// distortion of direction `j`. Ties go to the smaller sigma.
pub fn tune_sigma(
    model: &FactorModel,
    set: &HrirSet,
    j: usize,
    grid: &[f64],
    lambda: f64,
    threshold: f64,
) -> Result<SigmaChoice> {
    check_model_data(model, set)?;
    if grid.is_empty() {
        return Err(Error::InvalidArgument("sigma grid is empty".into()));
    }
    let x: Vec<f64> = set.column(j)?.iter().copied().collect();
    let mut sigmas = grid.to_vec();
    sigmas.sort_by(f64::total_cmp);
    sigmas.dedup();
    let f = resonance_matrix(model.resonance(), model.filter_len())?;
    let mut best: Option<SigmaChoice> = None;
    let mut curve = Vec::with_capacity(sigmas.len());
    for sigma in sigmas {
        let d = build_transform(&ResidualTransform::Window { sigma }, model.num_taps())?;
        let fit = fit_direction(&(&d * &f), &d, model, &x, lambda, threshold)?;
        let sd = fit.stats.sd_db.unwrap_or(f64::INFINITY);
        curve.push((sigma, sd));
        if best.as_ref().is_none_or(|b| sd < b.sd_db) {
            best = Some(SigmaChoice {
                sigma,
                sd_db: sd,
                nnze: fit.stats.nnze,
                curve: Vec::new(),
            });
        }
    }
    let mut best = best.expect("non-empty grid");
    best.curve = curve;
    Ok(best)
}

/// Spectral distortion of direction `j` when its filter is re-solved under the identity transform.
pub fn identity_sd(model: &FactorModel, set: &HrirSet, j: usize, lambda: f64, threshold: f64) -> Result<Option<f64>> {
    check_model_data(model, set)?;
    let x: Vec<f64> = set.column(j)?.iter().copied().collect();
    let f = resonance_matrix(model.resonance(), model.filter_len())?;
    let d = DMatrix::identity(model.num_taps(), model.num_taps());
    Ok(fit_direction(&f, &d, model, &x, lambda, threshold)?.stats.sd_db)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn transforms() {
        assert_eq!(build_transform(&ResidualTransform::Identity, 3).unwrap(), DMatrix::identity(3, 3));
        let w = build_transform(&ResidualTransform::Window { sigma: 1e9 }, 8).unwrap();
        for i in 0..8 {
            assert!((w[(i, i)] - 1.0).abs() < 1e-12);
        }
        let c = build_transform(&ResidualTransform::Convolution { sigma: 1.0 }, 3).unwrap();
        assert!((c[(0, 0)] - 1.0 / (2.0 * PI).sqrt()).abs() < 1e-15);
        assert_eq!(c, c.transpose());
        assert_eq!(c[(0, 1)], c[(1, 2)]);
        assert!((c[(0, 2)] - (-2.0f64).exp() / (2.0 * PI).sqrt()).abs() < 1e-15);
        assert!(build_transform(&ResidualTransform::Window { sigma: 0.0 }, 3).is_err());
        assert!(build_transform(&ResidualTransform::Convolution { sigma: -1.0 }, 3).is_err());
    }

    #[test]
    fn nnls_examples() {
        let eye2 = DMatrix::identity(2, 2);
        let s = l1_nnls(&eye2, &[3.0, -1.0], &eye2, 0.0).unwrap();
        assert!((s.coefficients[0] - 3.0).abs() < 1e-12 && s.coefficients[1] == 0.0);
        let eye1 = DMatrix::identity(1, 1);
        let s = l1_nnls(&eye1, &[3.0], &eye1, 2.0).unwrap();
        assert!((s.coefficients[0] - 2.0).abs() < 1e-12);
        assert!(l1_nnls(&eye1, &[f64::NAN], &eye1, 0.0).is_err());
        assert!(l1_nnls(&eye1, &[1.0, 2.0], &eye1, 0.0).is_err());
        assert!(l1_nnls(&eye1, &[1.0], &eye1, -1.0).is_err());
    }

    #[test]
    fn baseline_soft_thresholds() {
        let eye = DMatrix::identity(2, 2);
        let s = l1_ls_baseline(&[3.0, -1.0], &eye, 2.0).unwrap();
        assert!((s.coefficients[0] - 2.0).abs() < 1e-12 && s.coefficients[1].abs() < 1e-12);
        let s = l1_ls_baseline(&[3.0, -1.0], &eye, 0.0).unwrap();
        assert!((s.coefficients[0] - 3.0).abs() < 1e-12 && (s.coefficients[1] + 1.0).abs() < 1e-12);
    }

    #[test]
    fn prune_examples() {
        let s = prune(&[0.5, 1e-5, 0.2], DEFAULT_PRUNE_THRESHOLD);
        assert_eq!(s.indices(), &[0, 2]);
        assert_eq!(s.values(), &[0.5, 0.2]);
        assert_eq!(s.len(), 3);
        let empty = prune(&[1e-6, 0.0], 1e-4);
        assert!(empty.is_empty());
        assert_eq!(empty.to_dense(), vec![0.0, 0.0]);
        assert_eq!(prune(&[0.0, 1e-300, 2.0], 0.0).indices(), &[1, 2]);
    }

    #[test]
    fn sparse_filter_validation() {
        assert!(SparseFilter::new(4, vec![0, 2], vec![1.0, 2.0]).is_ok());
        assert!(SparseFilter::new(4, vec![2, 2], vec![1.0, 2.0]).is_err());
        assert!(SparseFilter::new(4, vec![4], vec![1.0]).is_err());
        assert!(SparseFilter::new(4, vec![1], vec![0.0]).is_err());
        assert!(SparseFilter::new(4, vec![1], vec![]).is_err());
    }

    #[test]
    fn default_grid_shape() {
        let g = default_sigma_grid();
        assert_eq!(g.len(), 28);
        assert_eq!(g[0], 15.0);
        assert_eq!(g[24], 63.0);
        assert_eq!(&g[25..], &[100.0, 160.0, 250.0]);
    }

    #[test]
    fn transform_serde_shape() {
        let v = serde_json::to_value(ResidualTransform::Window { sigma: 30.0 }).unwrap();
        assert_eq!(v, serde_json::json!({"kind": "window", "sigma": 30.0}));
        let id: ResidualTransform = serde_json::from_str(r#"{"kind":"identity"}"#).unwrap();
        assert_eq!(id, ResidualTransform::Identity);
    }
}
