//! Brute-force full-tensor reference implementation.
//!
//! Everything here materializes the complete cost/kernel/plan tensors and
//! sums them with plain loops. It exists to pin down the structured
//! solvers on small instances, so it favors transparency and determinism
//! over speed and is capped in size.
//!
//! The scaling update for node `k` reads the other potentials from a
//! snapshot that mirrors the message solvers exactly: potentials of
//! ancestors of `k` (tree) respectively all previously updated nodes
//! (circle) are current within the sweep, every other node contributes its
//! start-of-sweep value. On chains and circles this is plain Gauss-Seidel;
//! on branching trees the sibling subtrees are one refresh behind, which
//! is precisely what the message recursions produce.

use ndarray::{Array1, Array2, ArrayD, ArrayView1, IxDyn};

use crate::config::SinkhornConfig;
use crate::error::{Error, Result};
use crate::graph::CostGraph;
use crate::kernel::DualPotentials;
use crate::measure::{common_dimension, DiscreteMeasure};
use crate::scalar::Real;

/// Default cap on dense tensor entries.
pub const DEFAULT_TENSOR_CAP: usize = 10_000_000;

/// Entries of a plan marginal below this abort the iteration.
const UNDERFLOW_FLOOR: f64 = 1e-300;

/// A dense transport plan (or kernel) tensor.
pub type TransportPlanTensor<T> = ArrayD<T>;

fn checked_shape<T: Real>(measures: &[DiscreteMeasure<T>], cap: usize) -> Result<Vec<usize>> {
    let shape: Vec<usize> = measures.iter().map(|m| m.len()).collect();
    let mut size = 1usize;
    for &n in &shape {
        size = size.checked_mul(n).ok_or(Error::SizeCapExceeded {
            size: usize::MAX,
            cap,
        })?;
    }
    if size > cap {
        return Err(Error::SizeCapExceeded { size, cap });
    }
    Ok(shape)
}

/// Full cost tensor `C_i = sum_{(a,b) in edges} |x^a_{i_a} - x^b_{i_b}|^2`
/// for an explicit edge list.
pub fn cost_tensor_from_edges<T: Real>(
    measures: &[DiscreteMeasure<T>],
    edges: &[(usize, usize)],
    cap: usize,
) -> Result<TransportPlanTensor<T>> {
    common_dimension(measures)?;
    let shape = checked_shape(measures, cap)?;
    let k = shape.len();
    for &(a, b) in edges {
        if a >= k || b >= k {
            return Err(Error::InvalidGraph(format!("edge ({a}, {b}) out of range")));
        }
    }
    let mut cost = ArrayD::<T>::zeros(IxDyn(&shape));
    for (idx, c) in cost.indexed_iter_mut() {
        let i = &idx;
        let mut acc = T::zero();
        for &(a, b) in edges {
            let pa = measures[a].points();
            let pb = measures[b].points();
            for ax in 0..pa.ncols() {
                let diff = pa[(i[a], ax)] - pb[(i[b], ax)];
                acc += diff * diff;
            }
        }
        *c = acc;
    }
    Ok(cost)
}

/// Cost tensor of a structured instance, capped at `DEFAULT_TENSOR_CAP`.
pub fn full_cost_tensor<T: Real>(
    measures: &[DiscreteMeasure<T>],
    graph: &CostGraph,
) -> Result<TransportPlanTensor<T>> {
    cost_tensor_from_edges(measures, &graph.edges(), DEFAULT_TENSOR_CAP)
}

/// Tensor with entries `prod_(a,b,M) M[i_a, i_b]` over the given factors.
pub fn product_tensor<T: Real>(
    shape: &[usize],
    factors: &[(usize, usize, &Array2<T>)],
) -> TransportPlanTensor<T> {
    let mut out = ArrayD::<T>::from_elem(IxDyn(shape), T::one());
    for (idx, v) in out.indexed_iter_mut() {
        let i = &idx;
        for &(a, b, m) in factors {
            *v = *v * m[(i[a], i[b])];
        }
    }
    out
}

/// `exp(-C/eta)` elementwise.
pub fn kernel_tensor<T: Real>(cost: &TransportPlanTensor<T>, eta: T) -> TransportPlanTensor<T> {
    cost.mapv(|c| (-c / eta).exp())
}

/// Sum of the tensor over every axis except `k`.
pub fn project_marginal<T: Real>(t: &TransportPlanTensor<T>, k: usize) -> Result<Array1<T>> {
    if k >= t.ndim() {
        return Err(Error::InvalidParameter(format!(
            "marginal index {k} out of range for a {}-way tensor",
            t.ndim()
        )));
    }
    let mut out = Array1::zeros(t.shape()[k]);
    for (idx, &v) in t.indexed_iter() {
        out[idx[k]] += v;
    }
    Ok(out)
}

/// Sum of the tensor over every axis except `a` and `b` (`a < b`).
pub fn project_pair<T: Real>(
    t: &TransportPlanTensor<T>,
    a: usize,
    b: usize,
) -> Result<Array2<T>> {
    if a >= b || b >= t.ndim() {
        return Err(Error::InvalidParameter(format!(
            "pair ({a}, {b}) invalid for a {}-way tensor",
            t.ndim()
        )));
    }
    let mut out = Array2::zeros((t.shape()[a], t.shape()[b]));
    for (idx, &v) in t.indexed_iter() {
        out[(idx[a], idx[b])] += v;
    }
    Ok(out)
}

/// The plan `K . outer(phi^1, ..., phi^K)`.
pub fn plan_tensor<T: Real>(
    kernel: &TransportPlanTensor<T>,
    potentials: &DualPotentials<T>,
) -> TransportPlanTensor<T> {
    let mut out = kernel.clone();
    for (idx, v) in out.indexed_iter_mut() {
        for (k, phi) in potentials.phi.iter().enumerate() {
            *v = *v * phi[idx[k]];
        }
    }
    out
}

/// The dual objective
/// `eta (sum_k mu^k . log phi^k - sum_i K_i Phi_i)`,
/// with the `0 log 0` convention for zero-weight atoms.
pub fn sinkhorn_function<T: Real>(
    potentials: &DualPotentials<T>,
    measures: &[DiscreteMeasure<T>],
    kernel: &TransportPlanTensor<T>,
    eta: T,
) -> Result<T> {
    let mut log_term = T::zero();
    for (k, (phi, m)) in potentials.phi.iter().zip(measures).enumerate() {
        for (&p, &w) in phi.iter().zip(m.weights().iter()) {
            if w > T::zero() {
                if !(p > T::zero()) {
                    return Err(Error::NonPositivePotential { node: k });
                }
                log_term += w * p.ln();
            }
        }
    }
    let mut mass = T::zero();
    for (idx, &v) in kernel.indexed_iter() {
        let mut t = v;
        for (k, phi) in potentials.phi.iter().enumerate() {
            t = t * phi[idx[k]];
        }
        mass += t;
    }
    Ok(eta * (log_term - mass))
}

/// Contraction of `K . Phi` over all axes but `k`, with the `k`-th
/// potential left out (so the result is exactly the update denominator).
fn contraction_without<T: Real>(
    kernel: &TransportPlanTensor<T>,
    snapshot: &[&Array1<T>],
    k: usize,
) -> Array1<T> {
    let mut out = Array1::zeros(kernel.shape()[k]);
    for (idx, &v) in kernel.indexed_iter() {
        let mut t = v;
        for (l, phi) in snapshot.iter().enumerate() {
            if l != k {
                t = t * phi[idx[l]];
            }
        }
        out[idx[k]] += t;
    }
    out
}

/// Result of a dense Sinkhorn run.
pub struct DenseSolution<T: Real> {
    pub potentials: DualPotentials<T>,
    pub plan: TransportPlanTensor<T>,
    /// Dual objective after each completed sweep.
    pub trace: Vec<T>,
    pub converged: bool,
    pub sweeps: usize,
}

/// Snapshot handed to a sweep observer.
pub struct SweepRecord<'a, T: Real> {
    pub sweep: usize,
    pub potentials: &'a DualPotentials<T>,
    pub objective: T,
}

pub fn sinkhorn_dense<T: Real>(
    measures: &[DiscreteMeasure<T>],
    graph: &CostGraph,
    config: &SinkhornConfig<T>,
) -> Result<DenseSolution<T>> {
    sinkhorn_dense_observed(measures, graph, config, |_| {})
}

pub fn sinkhorn_dense_observed<T: Real>(
    measures: &[DiscreteMeasure<T>],
    graph: &CostGraph,
    config: &SinkhornConfig<T>,
    observer: impl FnMut(&SweepRecord<'_, T>),
) -> Result<DenseSolution<T>> {
    let cost = full_cost_tensor(measures, graph)?;
    let kernel = kernel_tensor(&cost, config.eta);
    sinkhorn_dense_with_kernel(&kernel, measures, graph, config, observer)
}

/// Dense iteration on an explicitly supplied kernel tensor (used for
/// weighted and twisted-edge instances in tests).
pub fn sinkhorn_dense_with_kernel<T: Real>(
    kernel: &TransportPlanTensor<T>,
    measures: &[DiscreteMeasure<T>],
    graph: &CostGraph,
    config: &SinkhornConfig<T>,
    mut observer: impl FnMut(&SweepRecord<'_, T>),
) -> Result<DenseSolution<T>> {
    config.validate()?;
    let k_count = measures.len();
    if graph.node_count() != k_count {
        return Err(Error::InvalidGraph(format!(
            "graph has {} nodes but {} measures were given",
            graph.node_count(),
            k_count
        )));
    }
    let sizes: Vec<usize> = measures.iter().map(|m| m.len()).collect();
    let mut potentials = DualPotentials::ones(&sizes);
    let ancestors: Vec<Vec<usize>> = match graph {
        CostGraph::Tree(t) => (0..k_count).map(|k| t.ancestors(k)).collect(),
        CostGraph::Circle(_) => Vec::new(),
    };
    let mut trace: Vec<T> = Vec::new();
    let mut converged = false;
    let mut sweeps = 0;
    while sweeps < config.max_iterations {
        let start = potentials.phi.clone();
        for k in 0..k_count {
            let snapshot: Vec<&Array1<T>> = match graph {
                CostGraph::Circle(_) => potentials.phi.iter().collect(),
                CostGraph::Tree(_) => (0..k_count)
                    .map(|l| {
                        if ancestors[k].contains(&l) {
                            &potentials.phi[l]
                        } else {
                            &start[l]
                        }
                    })
                    .collect(),
            };
            let denom = contraction_without(kernel, &snapshot, k);
            for (j, &d) in denom.iter().enumerate() {
                if d == T::zero() {
                    return Err(Error::ZeroDenominator { node: k });
                }
                if d.to_f64().map(|v| v.abs() < UNDERFLOW_FLOOR).unwrap_or(true) && d.is_finite() {
                    return Err(Error::Underflow {
                        node: k,
                        value: d.to_f64().unwrap_or(0.0),
                    });
                }
                if !d.is_finite() {
                    return Err(Error::NonFiniteMessage { node: k });
                }
                potentials.phi[k][j] = measures[k].weights()[j] / d;
            }
        }
        sweeps += 1;
        let objective = sinkhorn_function(&potentials, measures, kernel, config.eta)?;
        if !objective.is_finite() {
            return Err(Error::NonFiniteObjective { sweep: sweeps });
        }
        trace.push(objective);
        observer(&SweepRecord {
            sweep: sweeps,
            potentials: &potentials,
            objective,
        });
        let n = trace.len();
        if n >= 2 && (trace[n - 1] - trace[n - 2]).abs() < config.delta {
            converged = true;
            break;
        }
    }
    let plan = plan_tensor(kernel, &potentials);
    Ok(DenseSolution {
        potentials,
        plan,
        trace,
        converged,
        sweeps,
    })
}

/// Max-norm marginal residuals of a plan against the prescribed measures.
pub fn marginal_residuals<T: Real>(
    plan: &TransportPlanTensor<T>,
    measures: &[DiscreteMeasure<T>],
) -> Result<Vec<T>> {
    let mut out = Vec::with_capacity(measures.len());
    for (k, m) in measures.iter().enumerate() {
        let p = project_marginal(plan, k)?;
        let r = p
            .iter()
            .zip(m.weights().iter())
            .map(|(&a, &b)| (a - b).abs())
            .fold(T::zero(), T::max);
        out.push(r);
    }
    Ok(out)
}

/// Infinity-norm distance between a projected marginal and a weight vector.
pub fn residual_inf<T: Real>(projected: &Array1<T>, weights: ArrayView1<'_, T>) -> T {
    projected
        .iter()
        .zip(weights.iter())
        .map(|(&a, &b)| (a - b).abs())
        .fold(T::zero(), T::max)
}
