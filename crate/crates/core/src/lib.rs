//! Multi-marginal entropic optimal transport with tree- and circle-structured
//! costs, solved by Sinkhorn scaling with message recursions, plus an
//! NFFT-based fast Gaussian summation backend for the kernel products.
//!
//! The solver family:
//!
//! * [`dense`] — a brute-force full-tensor Sinkhorn used as a correctness
//!   oracle on small instances,
//! * [`tree`] — the structured solver for tree costs; one sweep costs
//!   `2(K-1)` kernel applications,
//! * [`circle`] — the structured solver for cycle costs using matrix-valued
//!   messages, with pair-marginal extraction,
//! * [`fastsum`] — kernel regularization, Fourier coefficients and
//!   nonuniform FFTs that turn a dense Gaussian matrix product into an
//!   `O(M log M + N)` transform,
//! * [`apps`] — fixed-support Wasserstein barycenters on trees and
//!   generalized Euler flows on the circle.
//!
//! All numerics are generic over the scalar type through [`Real`];
//! `f64` aliases for the main types live at the crate root.

pub mod apps;
pub mod circle;
pub mod config;
pub mod dense;
pub mod error;
pub mod fastsum;
pub mod graph;
pub mod kernel;
pub mod measure;
pub mod scalar;
pub mod solve;
pub mod tree;

pub use config::{KernelMode, SinkhornConfig};
pub use error::{Error, Result};
pub use fastsum::FastSumParams;
pub use graph::{CircleGraph, CostGraph, TreeGraph};
pub use kernel::{
    build_gaussian_kernel, DirectFactory, DualPotentials, FastFactory, KernelApplicator,
    KernelFactory,
};
pub use measure::DiscreteMeasure;
pub use scalar::Real;

/// Concrete `f64` instantiations of the core types.
pub type Measure64 = DiscreteMeasure<f64>;
pub type Config64 = SinkhornConfig<f64>;
pub type Potentials64 = DualPotentials<f64>;
pub type Applicator64 = KernelApplicator<f64>;
pub type FastSumParams64 = FastSumParams<f64>;
