use super::{ConvMode, ConvPlan, Convolver, Taps};
use crate::error::{Error, Result};
use crate::hrir::Signal;
use crate::model::FactorModel;

/// Work counters for a [`Renderer`].
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct RenderStats {
    pub resonance_convolutions: usize,
    pub reflection_convolutions: usize,
    /// Multiply-adds spent in direct-mode reflection convolutions.
    pub reflection_multiply_adds: u64,
}

/// Renders one source signal through many directions of a model.
///
/// The direction-independent part `y * f` is computed on first use and
/// reused; each direction then costs one convolution with its reflection
/// filter.
pub struct Renderer<'a> {
    model: &'a FactorModel,
    signal: &'a Signal,
    mode: ConvMode,
    resonated: Option<Vec<f64>>,
    stats: RenderStats,
}

impl<'a> Renderer<'a> {
    pub fn new(model: &'a FactorModel, signal: &'a Signal, mode: ConvMode) -> Result<Self> {
        if signal.is_empty() {
            return Err(Error::InvalidArgument("cannot render an empty signal".into()));
        }
        Ok(Self {
            model,
            signal,
            mode,
            resonated: None,
            stats: RenderStats::default(),
        })
    }

    pub fn stats(&self) -> RenderStats {
        self.stats
    }

    /// `y * f`, computed once.
    pub fn resonated(&mut self) -> Result<&[f64]> {
        if self.resonated.is_none() {
            let plan = ConvPlan::new(self.mode, Taps::Dense(self.model.resonance().to_vec()))?;
            let out = Convolver::new(plan).convolve(self.signal.samples())?;
            self.stats.resonance_convolutions += 1;
            self.resonated = Some(out);
        }
        Ok(self.resonated.as_deref().expect("just filled"))
    }

    /// `(y * f) * G_j`, of length `|y| + M - 1`.
    pub fn render(&mut self, j: usize) -> Result<Signal> {
        let taps = match self.mode {
            ConvMode::SparseDirect => Taps::Sparse(self.model.sparse_reflection(j, 0.0)?),
            _ => Taps::Dense(self.model.reflection(j)?),
        };
        let plan = ConvPlan::new(self.mode, taps)?;
        let mut conv = Convolver::new(plan);
        let out = conv.convolve(self.resonated()?)?;
        self.stats.reflection_convolutions += 1;
        self.stats.reflection_multiply_adds += conv.multiply_adds();
        Signal::new(out, self.signal.sample_rate_hz())
    }
}
