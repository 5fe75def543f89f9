//! Shared run parameters resolved from command-line flags.

use std::path::PathBuf;

use motsink_core::{FastSumParams, KernelMode, SinkhornConfig};

use crate::{CliError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KernelChoice {
    Direct,
    Nfft,
}

impl std::str::FromStr for KernelChoice {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "direct" => Ok(KernelChoice::Direct),
            "nfft" => Ok(KernelChoice::Nfft),
            other => Err(format!("unknown kernel '{other}' (expected direct|nfft)")),
        }
    }
}

/// Fully resolved experiment parameters; the seed pins every generated
/// point set, so identical specs give identical numerical output.
#[derive(Debug, Clone)]
pub struct ExperimentSpec {
    pub eta: f64,
    pub delta: f64,
    pub iterations: usize,
    pub half_degree: usize,
    pub smoothness: usize,
    pub eps_b: f64,
    pub kernel: KernelChoice,
    pub cutoff: usize,
    pub oversampling: f64,
    pub seed: u64,
    pub out_dir: PathBuf,
    pub emit_log: bool,
}

impl ExperimentSpec {
    pub fn fastsum_params(&self) -> FastSumParams<f64> {
        FastSumParams::new(self.half_degree, self.smoothness, self.eps_b)
            .with_cutoff(self.cutoff)
            .with_oversampling(self.oversampling)
    }

    pub fn config(&self) -> SinkhornConfig<f64> {
        let mode = match self.kernel {
            KernelChoice::Direct => KernelMode::Direct,
            KernelChoice::Nfft => KernelMode::Fast(self.fastsum_params()),
        };
        SinkhornConfig::new(self.eta, self.delta)
            .with_max_iterations(self.iterations)
            .with_kernel_mode(mode)
    }

    /// A stopping threshold that never fires, for fixed-iteration runs.
    pub fn never_stop() -> f64 {
        f64::MIN_POSITIVE
    }

    pub fn validate(&self) -> Result<()> {
        self.config().validate().map_err(CliError::Core)
    }
}
