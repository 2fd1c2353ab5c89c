//! Factorisation of head-related impulse responses into one shared
//! resonance filter convolved with short, sparse, non-negative per-direction
//! reflection filters, plus the tooling to preprocess HRIR sets, sparsify
//! and evaluate the factors, and render signals through them.
//!
//! Pipeline: [`hrir::preprocess`] → [`seminmf::train`] →
//! [`sparse::sparsify_model`] → [`metrics::evaluate`] / [`conv::Renderer`].

// `!(x > 0.0)` is used on purpose so that NaN is rejected too
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod conv;
pub mod error;
pub mod fft;
pub mod hrir;
pub mod metrics;
pub mod model;
pub mod seminmf;
pub mod sparse;
pub mod toeplitz;

pub use error::{Error, ErrorKind, Result};
pub use hrir::{Direction, HrirSet, PreprocessFlags, Signal};
pub use model::FactorModel;
