//! Toeplitz-constrained semi-NMF.
//!
//! Factorises `X (M x N) ~= F G^T` where `F` is the constrained Toeplitz
//! matrix built from a shared resonance filter `f` of length `M - K + 1` and
//! `G (N x K)` is non-negative. Each iteration solves for `f` exactly given
//! `G`, then applies one multiplicative update to `G` given `F`. Both steps
//! are non-increasing in the Frobenius residual, so the RMSE log is monotone.

use log::{debug, warn};
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::hrir::HrirSet;
use crate::metrics::rmse;
use crate::model::FactorModel;
use crate::toeplitz::{diagonal_sum, toeplitz_from_params, ToeplitzParams};

/// Added to the multiplicative-update denominator.
pub const DEFAULT_EPSILON: f64 = 1e-12;
/// Relative ridge (times `trace(A) / dim(A)`) applied when the resonance system will not factor.
pub const DEFAULT_RIDGE: f64 = 1e-10;
const EARLY_STOP_DELTA: f64 = 1e-10;
const EARLY_STOP_PATIENCE: usize = 3;

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    /// Reflection filter length `K`.
    pub filter_len: usize,
    /// Maximum number of iterations `T`.
    pub iterations: usize,
    pub seed: u64,
    pub epsilon_denom: f64,
    pub ridge: f64,
    /// Stop once the RMSE has improved by less than 1e-10 for three iterations in a row.
    pub early_stop: bool,
}

impl TrainConfig {
    pub fn new(filter_len: usize, iterations: usize, seed: u64) -> Self {
        Self {
            filter_len,
            iterations,
            seed,
            epsilon_denom: DEFAULT_EPSILON,
            ridge: DEFAULT_RIDGE,
            early_stop: false,
        }
    }

    fn validate(&self, num_taps: usize) -> Result<()> {
        if self.filter_len == 0 || self.filter_len > num_taps {
            return Err(Error::InvalidArgument(format!(
                "filter length K = {} must lie in 1..={num_taps}",
                self.filter_len
            )));
        }
        if self.iterations == 0 {
            return Err(Error::InvalidArgument("at least one iteration is required".into()));
        }
        if !(self.epsilon_denom >= 0.0) || !(self.ridge >= 0.0) {
            return Err(Error::InvalidArgument("epsilon and ridge must be non-negative".into()));
        }
        Ok(())
    }
}

/// Raw result of [`factorize`].
#[derive(Debug, Clone)]
pub struct Factorization {
    pub resonance: Vec<f64>,
    /// `N x K`, non-negative.
    pub reflections: DMatrix<f64>,
    /// RMSE after each completed iteration.
    pub rmse_log: Vec<f64>,
}

fn split_parts(q: &DMatrix<f64>) -> (DMatrix<f64>, DMatrix<f64>) {
    let pos = q.map(|v| (v.abs() + v) / 2.0);
    let neg = q.map(|v| (v.abs() - v) / 2.0);
    (pos, neg)
}

/// One multiplicative update of `G` for fixed `F`.
///
/// `G'_ij = G_ij * sqrt(((X^T F)+ + [G (F^T F)-])_ij / ((X^T F)- + [G (F^T F)+] + eps)_ij)`.
pub fn update_g(x: &DMatrix<f64>, f: &DMatrix<f64>, g: &DMatrix<f64>, epsilon: f64) -> Result<DMatrix<f64>> {
    let (m, n) = x.shape();
    let k = f.ncols();
    if f.nrows() != m || g.shape() != (n, k) {
        return Err(Error::DimensionMismatch(format!(
            "X is {m}x{n}, F is {}x{k}, G is {}x{}; expected F {m}xK and G {n}xK",
            f.nrows(),
            g.nrows(),
            g.ncols()
        )));
    }
    if g.iter().any(|&v| v < 0.0) {
        return Err(Error::InvalidArgument("G must be non-negative".into()));
    }
    let xtf = x.transpose() * f;
    let ftf = f.transpose() * f;
    let (xtf_pos, xtf_neg) = split_parts(&xtf);
    let (ftf_pos, ftf_neg) = split_parts(&ftf);
    let numer = xtf_pos + g * ftf_neg;
    let denom = xtf_neg + g * ftf_pos;
    Ok(DMatrix::from_fn(n, k, |i, j| {
        let gij = g[(i, j)];
        if gij == 0.0 {
            return 0.0;
        }
        gij * (numer[(i, j)] / (denom[(i, j)] + epsilon)).sqrt()
    }))
}

/// Normal-equation matrix and right-hand side for the constrained resonance
/// solve. Both come from diagonal sums: `A[p][q]` sums diagonal `p - q` of
/// `G^T G` and `b[p]` sums diagonal `-p` of `X G`.
pub fn resonance_system(x: &DMatrix<f64>, g: &DMatrix<f64>) -> Result<(DMatrix<f64>, Vec<f64>)> {
    let (m, n) = x.shape();
    let k = g.ncols();
    if g.nrows() != n {
        return Err(Error::DimensionMismatch(format!(
            "G has {} rows for {n} directions",
            g.nrows()
        )));
    }
    if k == 0 || k > m {
        return Err(Error::InvalidArgument(format!("K = {k} must lie in 1..={m}")));
    }
    let len = m - k + 1;
    let gtg = g.transpose() * g;
    let xg = x * g;
    let by_offset: Vec<f64> = (-(k as isize) + 1..k as isize).map(|d| diagonal_sum(&gtg, d)).collect();
    let a = DMatrix::from_fn(len, len, |p, q| {
        let d = p as isize - q as isize;
        if d.unsigned_abs() >= k {
            0.0
        } else {
            by_offset[(d + k as isize - 1) as usize]
        }
    });
    let b = (0..len).map(|p| diagonal_sum(&xg, -(p as isize))).collect();
    Ok((a, b))
}

/// Exact minimiser of `||X - T(theta) G^T||_F` over constrained Toeplitz `theta`.
///
/// `ridge` is relative: on a failed Cholesky factorisation the system is
/// retried with `ridge * trace(A) / dim(A)` added to the diagonal.
pub fn solve_resonance(x: &DMatrix<f64>, g: &DMatrix<f64>, ridge: f64) -> Result<ToeplitzParams> {
    if g.iter().any(|&v| v < 0.0) {
        return Err(Error::InvalidArgument("G must be non-negative".into()));
    }
    let (a, b) = resonance_system(x, g)?;
    let dim = a.nrows();
    let rhs = nalgebra::DVector::from_vec(b);
    let theta = match a.clone().cholesky() {
        Some(ch) => ch.solve(&rhs),
        None => {
            let shift = ridge * a.trace() / dim as f64;
            debug!("resonance system not positive definite, adding ridge {shift:e}");
            let mut reg = a;
            for i in 0..dim {
                reg[(i, i)] += shift;
            }
            match reg.cholesky() {
                Some(ch) if shift > 0.0 => ch.solve(&rhs),
                _ => return Err(Error::SingularSystem { dim, ridge: shift }),
            }
        }
    };
    if theta.iter().any(|v| !v.is_finite()) {
        return Err(Error::SingularSystem { dim, ridge });
    }
    ToeplitzParams::from_filter(theta.as_slice(), g.ncols())
}

/// Dense constrained Toeplitz matrix (`M x K`) whose columns are shifted copies of `filter`.
pub fn resonance_matrix(filter: &[f64], k: usize) -> Result<DMatrix<f64>> {
    Ok(toeplitz_from_params(&ToeplitzParams::from_filter(filter, k)?))
}

fn uniform_open_closed(rng: &mut ChaCha8Rng) -> f64 {
    // gen::<f64>() is in [0, 1)
    1.0 - rng.gen::<f64>()
}

/// Runs the alternating resonance solve / multiplicative update loop on a raw matrix.
pub fn factorize(x: &DMatrix<f64>, cfg: &TrainConfig) -> Result<Factorization> {
    let (m, n) = x.shape();
    if m == 0 || n == 0 {
        return Err(Error::Degenerate(format!("input matrix is {m}x{n}")));
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("training matrix".into()));
    }
    cfg.validate(m)?;
    let k = cfg.filter_len;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut g = DMatrix::from_fn(n, k, |_, _| 0.0);
    for v in g.iter_mut() {
        *v = uniform_open_closed(&mut rng);
    }
    let mut reinitialised = vec![false; n];
    let mut rmse_log = Vec::with_capacity(cfg.iterations);
    let mut resonance = Vec::new();
    let mut stalled = 0;

    for iteration in 0..cfg.iterations {
        let theta = solve_resonance(x, &g, cfg.ridge)?;
        resonance = theta.filter();
        let f = toeplitz_from_params(&theta);
        g = update_g(x, &f, &g, cfg.epsilon_denom)?;

        for row in 0..n {
            if g.row(row).iter().all(|&v| v == 0.0) {
                if reinitialised[row] {
                    return Err(Error::DegenerateRow { row, iteration });
                }
                warn!("reflection row {row} collapsed at iteration {iteration}; re-drawing it");
                reinitialised[row] = true;
                for j in 0..k {
                    g[(row, j)] = uniform_open_closed(&mut rng);
                }
            }
        }

        let err = rmse(x, &(&f * g.transpose()))?;
        if let Some(&prev) = rmse_log.last() {
            stalled = if prev - err < EARLY_STOP_DELTA { stalled + 1 } else { 0 };
        }
        rmse_log.push(err);
        if cfg.early_stop && stalled >= EARLY_STOP_PATIENCE {
            debug!("early stop after {} iterations", iteration + 1);
            break;
        }
    }

    Ok(Factorization {
        resonance,
        reflections: g,
        rmse_log,
    })
}

/// Trains a [`FactorModel`] on a preprocessed HRIR set.
pub fn train(set: &HrirSet, cfg: &TrainConfig) -> Result<FactorModel> {
    if !set.flags().is_complete() {
        warn!("training on an HRIR set that is not fully preprocessed: {:?}", set.flags());
    }
    let fac = factorize(set.data(), cfg)?;
    FactorModel::new(
        fac.resonance,
        fac.reflections,
        set.num_taps(),
        set.sample_rate_hz(),
        cfg.seed,
        fac.rmse_log,
        set.directions().to_vec(),
    )
}
