//! Linear convolution engines.
//!
//! Three interchangeable modes produce the full linear convolution
//! (`|y| + len(taps) - 1` samples):
//!
//! * `SparseDirect` walks only the non-zero taps, one multiply-add per
//!   non-zero tap per output sample.
//! * `DenseDirect` is the textbook double loop over every tap.
//! * `FftOverlapSave` filters blocks of `B` samples through a radix-2 FFT and
//!   keeps the `B - len(taps) + 1` alias-free outputs of each block.

mod bench;
mod cost;
mod render;

use rustfft::num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fft::{is_power_of_two, next_power_of_two, Radix2Fft};
use crate::sparse::SparseFilter;

pub use bench::{bench, write_bench_csv, BenchRow, BENCH_CSV_HEADER};
pub use cost::{crossover_taps, CostModel, REAL_FLOPS_PER_COMPLEX_FLOP};
pub use render::{RenderStats, Renderer};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConvMode {
    SparseDirect,
    DenseDirect,
    FftOverlapSave,
}

impl ConvMode {
    pub const ALL: [ConvMode; 3] = [ConvMode::SparseDirect, ConvMode::DenseDirect, ConvMode::FftOverlapSave];

    pub fn name(&self) -> &'static str {
        match self {
            ConvMode::SparseDirect => "sparse_direct",
            ConvMode::DenseDirect => "dense_direct",
            ConvMode::FftOverlapSave => "fft_overlap_save",
        }
    }
}

impl std::str::FromStr for ConvMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ConvMode::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown convolution mode {s:?}")))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Taps {
    Dense(Vec<f64>),
    Sparse(SparseFilter),
}

impl Taps {
    /// Nominal filter length (including zeros).
    pub fn len(&self) -> usize {
        match self {
            Taps::Dense(v) => v.len(),
            Taps::Sparse(s) => s.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn to_dense(&self) -> Vec<f64> {
        match self {
            Taps::Dense(v) => v.clone(),
            Taps::Sparse(s) => s.to_dense(),
        }
    }

    fn nonzero(&self) -> Vec<(usize, f64)> {
        match self {
            Taps::Dense(v) => v.iter().copied().enumerate().filter(|&(_, x)| x != 0.0).collect(),
            Taps::Sparse(s) => s.iter().collect(),
        }
    }
}

/// Mode, taps and (for the FFT mode) block size.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvPlan {
    mode: ConvMode,
    taps: Taps,
    block_size: usize,
}

impl ConvPlan {
    /// Uses the default block size, the next power of two `>= 4 * len(taps)`.
    pub fn new(mode: ConvMode, taps: Taps) -> Result<Self> {
        let block = next_power_of_two(4 * taps.len());
        Self::with_block_size(mode, taps, block)
    }

    pub fn with_block_size(mode: ConvMode, taps: Taps, block_size: usize) -> Result<Self> {
        if taps.is_empty() {
            return Err(Error::InvalidArgument("convolution taps must be non-empty".into()));
        }
        if taps.to_dense().iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("convolution taps".into()));
        }
        if mode == ConvMode::FftOverlapSave && (!is_power_of_two(block_size) || block_size < taps.len()) {
            return Err(Error::InvalidArgument(format!(
                "block size {block_size} must be a power of two >= {} taps",
                taps.len()
            )));
        }
        Ok(Self {
            mode,
            taps,
            block_size,
        })
    }

    pub fn mode(&self) -> ConvMode {
        self.mode
    }

    pub fn taps(&self) -> &Taps {
        &self.taps
    }

    pub fn block_size(&self) -> usize {
        self.block_size
    }
}

enum Engine {
    Direct { taps: Vec<(usize, f64)> },
    Fft { fft: Radix2Fft, spectrum: Vec<Complex64>, scratch: Vec<Complex64> },
}

/// Stateful convolver. Holds scratch buffers, so use one per worker.
pub struct Convolver {
    plan: ConvPlan,
    engine: Engine,
    multiply_adds: u64,
}

impl Convolver {
    pub fn new(plan: ConvPlan) -> Self {
        let engine = match plan.mode {
            ConvMode::SparseDirect => Engine::Direct {
                taps: plan.taps.nonzero(),
            },
            ConvMode::DenseDirect => Engine::Direct {
                taps: plan.taps.to_dense().into_iter().enumerate().collect(),
            },
            ConvMode::FftOverlapSave => {
                let fft = Radix2Fft::new(plan.block_size);
                let mut spectrum = vec![Complex64::new(0.0, 0.0); plan.block_size];
                for (s, v) in spectrum.iter_mut().zip(plan.taps.to_dense()) {
                    s.re = v;
                }
                fft.forward(&mut spectrum);
                Engine::Fft {
                    scratch: vec![Complex64::new(0.0, 0.0); plan.block_size],
                    fft,
                    spectrum,
                }
            }
        };
        Self {
            plan,
            engine,
            multiply_adds: 0,
        }
    }

    pub fn plan(&self) -> &ConvPlan {
        &self.plan
    }

    /// Multiply-adds performed by the direct modes since construction.
    pub fn multiply_adds(&self) -> u64 {
        self.multiply_adds
    }

    pub fn convolve(&mut self, y: &[f64]) -> Result<Vec<f64>> {
        if y.is_empty() {
            return Err(Error::InvalidArgument("cannot convolve an empty signal".into()));
        }
        let len = self.plan.taps.len();
        let out_len = y.len() + len - 1;
        match &mut self.engine {
            Engine::Direct { taps } => {
                // y is read as if zero-padded on both sides, so every output
                // sample costs exactly one multiply-add per stored tap
                let mut padded = vec![0.0; y.len() + 2 * (len - 1)];
                padded[len - 1..len - 1 + y.len()].copy_from_slice(y);
                let mut out = vec![0.0; out_len];
                for (i, o) in out.iter_mut().enumerate() {
                    let base = i + len - 1;
                    let mut acc = 0.0;
                    for &(idx, v) in taps.iter() {
                        acc += v * padded[base - idx];
                    }
                    *o = acc;
                }
                self.multiply_adds += (taps.len() * out_len) as u64;
                Ok(out)
            }
            Engine::Fft { fft, spectrum, scratch } => {
                let block = fft.len();
                let valid = block - len + 1;
                let mut out = vec![0.0; out_len];
                let lead = len - 1;
                let mut start = 0;
                while start < out_len {
                    // padded input index p maps to y[p - lead]
                    for (k, s) in scratch.iter_mut().enumerate() {
                        let p = start + k;
                        let v = if p >= lead && p - lead < y.len() { y[p - lead] } else { 0.0 };
                        *s = Complex64::new(v, 0.0);
                    }
                    fft.forward(scratch);
                    for (s, h) in scratch.iter_mut().zip(spectrum.iter()) {
                        *s *= h;
                    }
                    fft.inverse(scratch);
                    for k in 0..valid.min(out_len - start) {
                        out[start + k] = scratch[lead + k].re;
                    }
                    start += valid;
                }
                Ok(out)
            }
        }
    }
}

/// One-shot convenience wrapper around [`Convolver`].
pub fn convolve(plan: &ConvPlan, y: &[f64]) -> Result<Vec<f64>> {
    Convolver::new(plan.clone()).convolve(y)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Reference: plain definition of full linear convolution.
    fn naive(y: &[f64], h: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; y.len() + h.len() - 1];
        for (i, &a) in y.iter().enumerate() {
            for (j, &b) in h.iter().enumerate() {
                out[i + j] += a * b;
            }
        }
        out
    }

    fn all_modes(taps: Taps, y: &[f64]) -> Vec<Vec<f64>> {
        ConvMode::ALL
            .iter()
            .map(|&m| convolve(&ConvPlan::new(m, taps.clone()).unwrap(), y).unwrap())
            .collect()
    }

    #[test]
    fn identity_taps() {
        let y = [0.3, -1.0, 2.0];
        for out in all_modes(Taps::Dense(vec![1.0]), &y) {
            for (a, b) in out.iter().zip(&y) {
                assert!((a - b).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn small_example() {
        for out in all_modes(Taps::Dense(vec![1.0, 2.0]), &[3.0, 4.0]) {
            let expected = [3.0, 10.0, 8.0];
            assert_eq!(out.len(), 3);
            for (a, b) in out.iter().zip(&expected) {
                assert!((a - b).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn sparse_example() {
        let taps = Taps::Sparse(SparseFilter::new(4, vec![0, 3], vec![1.0, 2.0]).unwrap());
        let expected = naive(&[1.0, 1.0, 1.0], &taps.to_dense());
        assert_eq!(expected, vec![1.0, 1.0, 1.0, 2.0, 2.0, 2.0]);
        for out in all_modes(taps, &[1.0, 1.0, 1.0]) {
            for (a, b) in out.iter().zip(&expected) {
                assert!((a - b).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn empty_inputs_rejected() {
        assert!(ConvPlan::new(ConvMode::DenseDirect, Taps::Dense(vec![])).is_err());
        let plan = ConvPlan::new(ConvMode::DenseDirect, Taps::Dense(vec![1.0])).unwrap();
        assert!(convolve(&plan, &[]).is_err());
        assert!(ConvPlan::with_block_size(ConvMode::FftOverlapSave, Taps::Dense(vec![1.0; 8]), 4).is_err());
        assert!(ConvPlan::with_block_size(ConvMode::FftOverlapSave, Taps::Dense(vec![1.0; 3]), 12).is_err());
    }

    #[test]
    fn block_size_does_not_matter() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let y: Vec<f64> = (0..3000).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let h: Vec<f64> = (0..100).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let reference = naive(&y, &h);
        let peak = reference.iter().map(|v| v.abs()).fold(0.0, f64::max);
        for e in 7..=13 {
            let plan = ConvPlan::with_block_size(ConvMode::FftOverlapSave, Taps::Dense(h.clone()), 1 << e).unwrap();
            let out = convolve(&plan, &y).unwrap();
            let err = out.iter().zip(&reference).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            assert!(err <= 1e-10 * peak, "block 2^{e}: {err}");
        }
    }

    #[test]
    fn sparse_counts_one_multiply_add_per_tap_per_sample() {
        let taps = Taps::Sparse(SparseFilter::new(10, vec![1, 4, 9], vec![0.5, 1.0, 2.0]).unwrap());
        let mut c = Convolver::new(ConvPlan::new(ConvMode::SparseDirect, taps).unwrap());
        let out = c.convolve(&[1.0; 50]).unwrap();
        assert_eq!(c.multiply_adds(), 3 * out.len() as u64);
    }

    #[test]
    fn mode_names_parse() {
        for m in ConvMode::ALL {
            assert_eq!(m.name().parse::<ConvMode>().unwrap(), m);
        }
        assert!("fast".parse::<ConvMode>().is_err());
    }
}
