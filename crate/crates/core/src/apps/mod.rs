//! Application drivers built on the structured solvers.

pub mod barycenter;
pub mod euler;

pub use barycenter::{solve_barycenter, BarycenterProblem, BarycenterSolution};
pub use euler::{solve_euler_flow, ConnectionMap, EulerFlowProblem, EulerFlowSolution};
