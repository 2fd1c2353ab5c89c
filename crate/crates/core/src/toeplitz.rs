//! Toeplitz parameterisation of `M x K` matrices.
//!
//! A Toeplitz matrix is described by one value per diagonal. Entry `(i, j)`
//! holds `theta[j - i]`, so offset `0` is the main diagonal, positive offsets
//! run above it and negative offsets below. Offsets span `1 - M ..= K - 1`.
//!
//! The *constrained* form keeps only offsets `K - M ..= 0`. Its columns are
//! shifted copies of a length `M - K + 1` filter and multiplying it with a
//! vector `g` is the linear convolution of that filter with `g`.
//!
//! Shift matrices never get built here. Every `trace(A^T S^k)` collapses to a
//! sum along one diagonal of `A`, which is what [`diagonal_sum`] computes.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Diagonal values of a Toeplitz matrix with `rows x cols` shape.
#[derive(Debug, Clone, PartialEq)]
pub struct ToeplitzParams {
    rows: usize,
    cols: usize,
    constrained: bool,
    /// `theta[k + rows - 1]` is the value on diagonal `k`.
    theta: Vec<f64>,
}

impl ToeplitzParams {
    /// All-zero parameters.
    pub fn zeros(rows: usize, cols: usize, constrained: bool) -> Result<Self> {
        check_dims(rows, cols, constrained)?;
        Ok(Self {
            rows,
            cols,
            constrained,
            theta: vec![0.0; rows + cols - 1],
        })
    }

    /// Builds parameters from the full offset range `1 - M ..= K - 1`, in order.
    pub fn from_theta(rows: usize, cols: usize, theta: Vec<f64>, constrained: bool) -> Result<Self> {
        check_dims(rows, cols, constrained)?;
        if theta.len() != rows + cols - 1 {
            return Err(Error::DimensionMismatch(format!(
                "expected {} Toeplitz parameters for a {rows}x{cols} matrix, got {}",
                rows + cols - 1,
                theta.len()
            )));
        }
        let p = Self {
            rows,
            cols,
            constrained,
            theta,
        };
        if constrained {
            if let Some(k) = p.offsets().find(|&k| !p.is_free(k) && p.get(k) != 0.0) {
                return Err(Error::InvalidArgument(format!(
                    "constrained Toeplitz parameter at offset {k} must be zero"
                )));
            }
        }
        Ok(p)
    }

    /// Constrained parameters whose non-zero diagonals carry `filter`, with
    /// `filter[m]` on diagonal `-m`. `filter.len()` must be `rows - cols + 1`.
    pub fn from_filter(filter: &[f64], cols: usize) -> Result<Self> {
        if filter.is_empty() || cols == 0 {
            return Err(Error::InvalidArgument("filter and column count must be non-empty".into()));
        }
        let rows = filter.len() + cols - 1;
        let mut p = Self::zeros(rows, cols, true)?;
        for (m, &v) in filter.iter().enumerate() {
            p.set(-(m as isize), v);
        }
        Ok(p)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn is_constrained(&self) -> bool {
        self.constrained
    }

    /// Smallest diagonal offset, `1 - M`.
    pub fn min_offset(&self) -> isize {
        1 - self.rows as isize
    }

    /// Largest diagonal offset, `K - 1`.
    pub fn max_offset(&self) -> isize {
        self.cols as isize - 1
    }

    pub fn offsets(&self) -> impl Iterator<Item = isize> {
        self.min_offset()..=self.max_offset()
    }

    /// Whether diagonal `k` may be non-zero.
    pub fn is_free(&self, k: isize) -> bool {
        !self.constrained || (self.cols as isize - self.rows as isize..=0).contains(&k)
    }

    pub fn get(&self, k: isize) -> f64 {
        self.theta[self.slot(k)]
    }

    /// Panics when `k` is out of range, or when writing a non-zero value to a
    /// diagonal the constrained form pins at zero.
    pub fn set(&mut self, k: isize, value: f64) {
        assert!(
            self.is_free(k) || value == 0.0,
            "offset {k} is fixed at zero in the constrained form"
        );
        let s = self.slot(k);
        self.theta[s] = value;
    }

    /// Parameters ordered from offset `1 - M` to `K - 1`.
    pub fn theta(&self) -> &[f64] {
        &self.theta
    }

    /// The resonance filter `(theta_0, theta_-1, ..., theta_{K-M})`.
    pub fn filter(&self) -> Vec<f64> {
        let len = self.rows - self.cols + 1;
        (0..len).map(|m| self.get(-(m as isize))).collect()
    }

    fn slot(&self, k: isize) -> usize {
        assert!(
            (self.min_offset()..=self.max_offset()).contains(&k),
            "offset {k} outside {}..={}",
            self.min_offset(),
            self.max_offset()
        );
        (k + self.rows as isize - 1) as usize
    }
}

fn check_dims(rows: usize, cols: usize, constrained: bool) -> Result<()> {
    if rows == 0 || cols == 0 {
        return Err(Error::InvalidArgument(format!("Toeplitz shape {rows}x{cols} is empty")));
    }
    if constrained && cols > rows {
        return Err(Error::InvalidArgument(format!(
            "constrained Toeplitz form needs K <= M, got {rows}x{cols}"
        )));
    }
    Ok(())
}

/// Number of entries on diagonal `k` of an `rows x cols` matrix.
pub fn diagonal_len(rows: usize, cols: usize, k: isize) -> usize {
    let (m, kk) = (rows as isize, cols as isize);
    (k + m).min(kk - k).min(kk).min(m).max(0) as usize
}

/// `trace(A^T S^k)`: the sum of `a[(i, i + k)]` over the diagonal.
pub fn diagonal_sum(a: &DMatrix<f64>, k: isize) -> f64 {
    let (rows, cols) = a.shape();
    let start_row = (-k).max(0) as usize;
    (start_row..rows)
        .map_while(|i| {
            let j = i as isize + k;
            (j < cols as isize).then(|| a[(i, j as usize)])
        })
        .sum()
}

/// Dense matrix with entry `(i, j) = theta[j - i]`.
pub fn toeplitz_from_params(p: &ToeplitzParams) -> DMatrix<f64> {
    DMatrix::from_fn(p.rows, p.cols, |i, j| p.get(j as isize - i as isize))
}

/// Nearest Toeplitz matrix in Frobenius norm: each diagonal is replaced by its mean.
pub fn nearest_toeplitz(f: &DMatrix<f64>) -> Result<ToeplitzParams> {
    let (rows, cols) = f.shape();
    if f.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("matrix passed to nearest_toeplitz".into()));
    }
    let mut p = ToeplitzParams::zeros(rows, cols, false)?;
    for k in p.min_offset()..=p.max_offset() {
        p.set(k, diagonal_sum(f, k) / diagonal_len(rows, cols, k) as f64);
    }
    Ok(p)
}

/// `T(p) * g` for the constrained form, evaluated as `conv(filter, g)`.
pub fn constrained_product(p: &ToeplitzParams, g: &[f64]) -> Result<Vec<f64>> {
    if !p.constrained {
        return Err(Error::InvalidArgument(
            "constrained_product needs constrained Toeplitz parameters".into(),
        ));
    }
    if g.len() != p.cols {
        return Err(Error::DimensionMismatch(format!(
            "vector of length {} against {} Toeplitz columns",
            g.len(),
            p.cols
        )));
    }
    let filter = p.filter();
    let mut out = vec![0.0; p.rows];
    for (j, &gj) in g.iter().enumerate() {
        if gj == 0.0 {
            continue;
        }
        for (m, &fm) in filter.iter().enumerate() {
            out[j + m] += fm * gj;
        }
    }
    Ok(out)
}

/// Dense `T(p) * g`, for callers holding a `DVector`.
pub fn product(p: &ToeplitzParams, g: &DVector<f64>) -> Result<DVector<f64>> {
    if g.len() != p.cols {
        return Err(Error::DimensionMismatch(format!(
            "vector of length {} against {} Toeplitz columns",
            g.len(),
            p.cols
        )));
    }
    Ok(toeplitz_from_params(p) * g)
}
