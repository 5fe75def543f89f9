//! Solver configuration.

use crate::error::{Error, Result};
use crate::fastsum::FastSumParams;
use crate::scalar::Real;

/// How edge kernels act on vectors: exact dense matrices or NFFT fast
/// summation.
#[derive(Debug, Clone)]
pub enum KernelMode<T: Real> {
    Direct,
    Fast(FastSumParams<T>),
}

/// Parameters of the Sinkhorn iteration.
#[derive(Debug, Clone)]
pub struct SinkhornConfig<T: Real> {
    /// Entropic regularization `eta > 0`.
    pub eta: T,
    /// Stop once the Sinkhorn-function change over a full sweep drops
    /// below this threshold.
    pub delta: T,
    /// Hard cap on the number of sweeps.
    pub max_iterations: usize,
    pub kernel_mode: KernelMode<T>,
}

impl<T: Real> SinkhornConfig<T> {
    pub fn new(eta: T, delta: T) -> Self {
        Self {
            eta,
            delta,
            max_iterations: 10_000,
            kernel_mode: KernelMode::Direct,
        }
    }

    pub fn with_max_iterations(mut self, max_iterations: usize) -> Self {
        self.max_iterations = max_iterations;
        self
    }

    pub fn with_kernel_mode(mut self, mode: KernelMode<T>) -> Self {
        self.kernel_mode = mode;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.eta > T::zero()) || !self.eta.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "eta must be positive and finite, got {}",
                self.eta
            )));
        }
        if !(self.delta > T::zero()) {
            return Err(Error::InvalidParameter(format!(
                "delta must be positive, got {}",
                self.delta
            )));
        }
        if self.max_iterations == 0 {
            return Err(Error::InvalidParameter(
                "max_iterations must be at least 1".into(),
            ));
        }
        if let KernelMode::Fast(p) = &self.kernel_mode {
            p.validate()?;
        }
        Ok(())
    }
}
