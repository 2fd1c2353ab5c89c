//! Wall-clock comparison of the convolution modes.

use std::io::Write;
use std::time::Instant;

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{ConvMode, ConvPlan, Convolver, CostModel, Taps};
use crate::error::{Error, Result};
use crate::metrics::format_f64;
use crate::sparse::SparseFilter;

pub const BENCH_CSV_HEADER: [&str; 6] =
    ["mode", "signal_len", "nnze", "block_size", "ns_per_sample_median", "flops_model"];

#[derive(Debug, Clone, PartialEq)]
pub struct BenchRow {
    pub mode: ConvMode,
    pub signal_len: usize,
    pub nnze: usize,
    /// FFT block size; `None` for the direct modes.
    pub block_size: Option<usize>,
    pub ns_per_sample_median: f64,
    /// Modelled operations per output sample (real for direct, complex for FFT).
    pub flops_model: f64,
    /// Algorithmic latency in samples: one block for the FFT mode, zero otherwise.
    pub latency_samples: usize,
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        (v[n / 2 - 1] + v[n / 2]) / 2.0
    }
}

/// Times every mode on a random signal of `signal_len` samples for each
/// requested NNZE. Sparse filters spread their taps over twice their NNZE;
/// the dense and FFT modes use a fully dense filter of length NNZE.
pub fn bench(signal_len: usize, nnze_list: &[usize], repeats: usize, seed: u64) -> Result<Vec<BenchRow>> {
    if repeats < 3 {
        return Err(Error::InvalidArgument(format!("bench needs at least 3 repeats, got {repeats}")));
    }
    if signal_len == 0 || nnze_list.contains(&0) {
        return Err(Error::InvalidArgument("signal length and NNZE values must be >= 1".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let y: Vec<f64> = (0..signal_len).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let mut rows = Vec::with_capacity(nnze_list.len() * ConvMode::ALL.len());
    for &nnze in nnze_list {
        let span = 2 * nnze;
        let mut idx = sample(&mut rng, span, nnze).into_vec();
        idx.sort_unstable();
        let values = (0..nnze).map(|_| rng.gen_range(0.01..1.0)).collect();
        let sparse = SparseFilter::new(span, idx, values)?;
        let dense: Vec<f64> = (0..nnze).map(|_| rng.gen_range(-1.0..1.0)).collect();

        for mode in ConvMode::ALL {
            let taps = match mode {
                ConvMode::SparseDirect => Taps::Sparse(sparse.clone()),
                _ => Taps::Dense(dense.clone()),
            };
            let plan = ConvPlan::new(mode, taps)?;
            let block = plan.block_size();
            let mut conv = Convolver::new(plan);
            let out_len = signal_len + conv.plan().taps().len() - 1;
            let timings = (0..repeats)
                .map(|_| {
                    let t0 = Instant::now();
                    let out = conv.convolve(&y)?;
                    let ns = t0.elapsed().as_nanos() as f64;
                    std::hint::black_box(out);
                    Ok(ns / out_len as f64)
                })
                .collect::<Result<Vec<_>>>()?;
            let (block_size, flops_model, latency_samples) = match mode {
                ConvMode::FftOverlapSave => (Some(block), CostModel::new(block, nnze)?.fft()?, block),
                _ => (None, CostModel::new(signal_len, nnze)?.time_domain(), 0),
            };
            rows.push(BenchRow {
                mode,
                signal_len,
                nnze,
                block_size,
                ns_per_sample_median: median(timings),
                flops_model,
                latency_samples,
            });
        }
    }
    Ok(rows)
}

pub fn write_bench_csv<W: Write>(rows: &[BenchRow], out: W) -> std::io::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(BENCH_CSV_HEADER)?;
    for r in rows {
        w.write_record([
            r.mode.name().to_string(),
            r.signal_len.to_string(),
            r.nnze.to_string(),
            r.block_size.map(|b| b.to_string()).unwrap_or_default(),
            format_f64(r.ns_per_sample_median),
            format_f64(r.flops_model),
        ])?;
    }
    w.flush()
}
