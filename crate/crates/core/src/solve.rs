//! Observation hooks and reporting types shared by the structured solvers.

use ndarray::Array1;

use crate::kernel::DualPotentials;
use crate::scalar::Real;

/// Fired right after one potential update inside a sweep.
pub struct NodeUpdate<'a, T: Real> {
    pub sweep: usize,
    pub node: usize,
    /// The update denominator (the node's marginal with its own potential
    /// divided out).
    pub denominator: &'a Array1<T>,
    pub phi: &'a Array1<T>,
}

/// Fired after a completed sweep, once the Sinkhorn value is known.
pub struct SweepEnd<'a, T: Real> {
    pub sweep: usize,
    pub potentials: &'a DualPotentials<T>,
    pub objective: T,
    /// Kernel applications this sweep requested.
    pub applications: u64,
}

pub enum SolverEvent<'a, T: Real> {
    NodeUpdated(NodeUpdate<'a, T>),
    SweepEnded(SweepEnd<'a, T>),
}

/// One row of the per-sweep iteration log.
#[derive(Debug, Clone, Copy)]
pub struct IterationRow<T> {
    pub sweep: usize,
    pub objective: T,
    pub seconds: f64,
}
