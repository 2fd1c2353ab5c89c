//! Per-output-sample operation counts for direct and FFT convolution.

use crate::error::{Error, Result};

/// Real operations charged per complex operation in the adjusted FFT figure.
pub const REAL_FLOPS_PER_COMPLEX_FLOP: f64 = 3.0;

/// Signal length `|y|` and filter NNZE `|x|`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CostModel {
    pub signal_len: usize,
    pub taps_nnze: usize,
}

impl CostModel {
    pub fn new(signal_len: usize, taps_nnze: usize) -> Result<Self> {
        if signal_len == 0 || taps_nnze == 0 {
            return Err(Error::InvalidArgument("cost model lengths must be >= 1".into()));
        }
        Ok(Self { signal_len, taps_nnze })
    }

    /// Direct convolution: `min(|x|, |y|)` real operations per output sample.
    pub fn time_domain(&self) -> f64 {
        self.taps_nnze.min(self.signal_len) as f64
    }

    /// FFT convolution: `(68/9) (|y| log2 |y| + |y|) / (|y| - |x| + 1)` complex
    /// operations per output sample.
    pub fn fft(&self) -> Result<f64> {
        if self.signal_len < self.taps_nnze {
            return Err(Error::InvalidArgument(format!(
                "FFT cost needs |y| >= |x|, got |y| = {} and |x| = {}",
                self.signal_len, self.taps_nnze
            )));
        }
        let y = self.signal_len as f64;
        let valid = (self.signal_len - self.taps_nnze + 1) as f64;
        Ok(68.0 / 9.0 * (y * y.log2() + y) / valid)
    }

    /// [`Self::fft`] converted to real operations.
    pub fn fft_real_adjusted(&self) -> Result<f64> {
        Ok(self.fft()? * REAL_FLOPS_PER_COMPLEX_FLOP)
    }
}

/// Smallest `|x|` at which direct convolution stops being cheaper than the raw
/// FFT figure, i.e. direct wins exactly for `|x| <` the returned value.
pub fn crossover_taps(signal_len: usize) -> Result<usize> {
    for x in 1..=signal_len {
        let c = CostModel::new(signal_len, x)?;
        if c.time_domain() >= c.fft()? {
            return Ok(x);
        }
    }
    Ok(signal_len + 1)
}
