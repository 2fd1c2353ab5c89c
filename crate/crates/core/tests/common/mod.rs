//! Independent oracles and fixtures shared by the integration tests.
#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize, lo: f64, hi: f64) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols, |_, _| rng.gen_range(lo..hi))
}

pub fn random_vec(rng: &mut ChaCha8Rng, len: usize, lo: f64, hi: f64) -> Vec<f64> {
    (0..len).map(|_| rng.gen_range(lo..hi)).collect()
}

/// Full linear convolution from the definition.
pub fn naive_conv(a: &[f64], b: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; a.len() + b.len() - 1];
    for (i, &x) in a.iter().enumerate() {
        for (j, &y) in b.iter().enumerate() {
            out[i + j] += x * y;
        }
    }
    out
}

pub fn max_abs(v: &[f64]) -> f64 {
    v.iter().map(|x| x.abs()).fold(0.0, f64::max)
}

pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

/// Least-squares fit of a Toeplitz matrix to `f` by regressing `vec(F)` on
/// the indicator matrix of each diagonal. Returns parameters for offsets
/// `1 - M ..= K - 1`.
pub fn dense_toeplitz_fit(f: &DMatrix<f64>) -> Vec<f64> {
    let (m, k) = f.shape();
    let p = m + k - 1;
    let design = DMatrix::from_fn(m * k, p, |row, col| {
        let (i, j) = (row / k, row % k);
        let offset = j as isize - i as isize;
        if offset == col as isize + 1 - m as isize {
            1.0
        } else {
            0.0
        }
    });
    let target = DVector::from_fn(m * k, |row, _| f[(row / k, row % k)]);
    let svd = design.svd(true, true);
    svd.solve(&target, 1e-14).unwrap().iter().copied().collect()
}

/// `||X - T G^T||_F^2` with `T` the constrained Toeplitz matrix of `filter`,
/// evaluated column by column through explicit convolution.
pub fn factor_objective(x: &DMatrix<f64>, filter: &[f64], g: &DMatrix<f64>) -> f64 {
    let mut total = 0.0;
    for n in 0..x.ncols() {
        let row: Vec<f64> = g.row(n).iter().copied().collect();
        let recon = naive_conv(filter, &row);
        for i in 0..x.nrows() {
            total += (x[(i, n)] - recon[i]).powi(2);
        }
    }
    total
}

/// `||D (F g - x)||^2 + lambda * |g|_1`.
pub fn l1_objective(f: &DMatrix<f64>, x: &[f64], d: &DMatrix<f64>, lambda: f64, g: &[f64]) -> f64 {
    let r = d * (f * DVector::from_column_slice(g) - DVector::from_column_slice(x));
    r.norm_squared() + lambda * g.iter().map(|v| v.abs()).sum::<f64>()
}

/// Global minimiser of the penalised problem by enumerating every support
/// (and, for the signed case, every sign pattern) and solving the
/// stationarity equations on it with an LU factorisation.
fn enumerate(f: &DMatrix<f64>, x: &[f64], d: &DMatrix<f64>, lambda: f64, signed: bool) -> (Vec<f64>, f64) {
    let k = f.ncols();
    let a = d * f;
    let q = a.transpose() * &a;
    let c = a.transpose() * (d * DVector::from_column_slice(x));
    let patterns: usize = if signed { 3usize.pow(k as u32) } else { 1 << k };
    let mut best = (vec![0.0; k], l1_objective(f, x, d, lambda, &vec![0.0; k]));
    for code in 0..patterns {
        let mut signs = vec![0.0; k];
        let mut rest = code;
        for s in signs.iter_mut() {
            if signed {
                *s = [0.0, 1.0, -1.0][rest % 3];
                rest /= 3;
            } else {
                *s = (rest & 1) as f64;
                rest >>= 1;
            }
        }
        let support: Vec<usize> = (0..k).filter(|&i| signs[i] != 0.0).collect();
        if support.is_empty() {
            continue;
        }
        let qs = DMatrix::from_fn(support.len(), support.len(), |i, j| q[(support[i], support[j])]);
        let rhs = DVector::from_fn(support.len(), |i, _| c[support[i]] - 0.5 * lambda * signs[support[i]]);
        let Some(z) = qs.lu().solve(&rhs) else { continue };
        if support.iter().enumerate().any(|(i, &s)| z[i] * signs[s] < 0.0) {
            continue;
        }
        let mut g = vec![0.0; k];
        for (i, &s) in support.iter().enumerate() {
            g[s] = z[i];
        }
        let obj = l1_objective(f, x, d, lambda, &g);
        if obj < best.1 {
            best = (g, obj);
        }
    }
    best
}

pub fn nnls_oracle(f: &DMatrix<f64>, x: &[f64], d: &DMatrix<f64>, lambda: f64) -> (Vec<f64>, f64) {
    enumerate(f, x, d, lambda, false)
}

pub fn signed_oracle(x: &[f64], d: &DMatrix<f64>, lambda: f64) -> (Vec<f64>, f64) {
    let eye = DMatrix::identity(x.len(), x.len());
    enumerate(&eye, x, d, lambda, true)
}

/// HRIR-like resonance filter: decaying oscillation.
pub fn decaying_filter(rng: &mut ChaCha8Rng, len: usize) -> Vec<f64> {
    (0..len)
        .map(|i| rng.gen_range(-1.0..1.0) * (-(i as f64) / 6.0).exp())
        .collect()
}

/// `M x N` matrix whose columns are `conv(f0, g0_j)` with `g0 >= 0`.
pub fn synthetic_factorisable(seed: u64, m: usize, n: usize, k: usize) -> (DMatrix<f64>, Vec<f64>, DMatrix<f64>) {
    let mut rng = rng(seed);
    let f0 = decaying_filter(&mut rng, m - k + 1);
    let g0 = random_matrix(&mut rng, n, k, 0.0, 1.0);
    let mut x = DMatrix::zeros(m, n);
    for j in 0..n {
        let row: Vec<f64> = g0.row(j).iter().copied().collect();
        let col = naive_conv(&f0, &row);
        for i in 0..m {
            x[(i, j)] = col[i];
        }
    }
    (x, f0, g0)
}
