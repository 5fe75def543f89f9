//! Sinkhorn solver for tree-structured costs.
//!
//! Marginals of the plan `K . Phi` are assembled from an upward message
//! pass (`beta`, child to parent) and a downward pass (`gamma`, parent to
//! child) instead of any tensor contraction. One sweep performs the
//! downward recursion interleaved with the potential updates, then
//! refreshes the upward messages: exactly `2(K-1)` kernel applications.
//!
//! Within a sweep the downward recursion reads the potentials of the
//! node's ancestors at their freshly updated values and everything else
//! through the upward messages of the previous refresh. The dense oracle
//! reproduces this exact staleness pattern, which the lockstep tests pin.

use std::time::Instant;

use ndarray::Array1;

use crate::config::SinkhornConfig;
use crate::error::{Error, Result};
use crate::graph::TreeGraph;
use crate::kernel::{DualPotentials, KernelApplicator, KernelFactory};
use crate::measure::{common_dimension, DiscreteMeasure};
use crate::scalar::Real;
use crate::solve::{IterationRow, NodeUpdate, SolverEvent, SweepEnd};

/// Edge kernels of a tree, indexed by the child node (`1..K`).
pub struct TreeKernels<T: Real> {
    by_child: Vec<KernelApplicator<T>>,
}

impl<T: Real> TreeKernels<T> {
    /// Builds one applicator per edge `(parent(k), k)`. The effective
    /// regularization of the edge to child `k` is `eta / edge_weights[k-1]`
    /// when weights are given (a zero weight yields the constant kernel).
    pub fn build(
        factory: &mut dyn KernelFactory<T>,
        measures: &[DiscreteMeasure<T>],
        tree: &TreeGraph,
        eta: T,
        edge_weights: Option<&[T]>,
    ) -> Result<Self> {
        let k_count = tree.node_count();
        if let Some(w) = edge_weights {
            if w.len() != k_count - 1 {
                return Err(Error::InvalidParameter(format!(
                    "need {} edge weights, got {}",
                    k_count - 1,
                    w.len()
                )));
            }
        }
        let mut by_child = Vec::with_capacity(k_count - 1);
        for k in 1..k_count {
            let eta_edge = match edge_weights {
                Some(w) => eta / w[k - 1],
                None => eta,
            };
            by_child.push(factory.make_edge(
                measures[tree.parent(k)].points(),
                measures[k].points(),
                eta_edge,
            )?);
        }
        Ok(Self { by_child })
    }

    /// Applicator of the edge `(parent(k), k)`.
    pub fn edge(&self, child: usize) -> &KernelApplicator<T> {
        &self.by_child[child - 1]
    }
}

fn hadamard_all<T: Real>(base: &Array1<T>, factors: &[&Array1<T>]) -> Array1<T> {
    let mut out = base.clone();
    for f in factors {
        out = out * *f;
    }
    out
}

fn check_finite<T: Real>(v: &Array1<T>, node: usize) -> Result<()> {
    if v.iter().any(|x| !x.is_finite()) {
        return Err(Error::NonFiniteMessage { node });
    }
    Ok(())
}

/// Upward messages: for `l = K-1 .. 1`,
/// `beta_l = K^(p(l), l) (phi^l . prod_{t in children(l)} beta_t)`,
/// with the empty child product equal to ones. `beta[0]` is unused.
pub fn upward_pass<T: Real>(
    potentials: &DualPotentials<T>,
    kernels: &TreeKernels<T>,
    tree: &TreeGraph,
) -> Result<Vec<Array1<T>>> {
    let k_count = tree.node_count();
    let mut beta: Vec<Array1<T>> = vec![Array1::zeros(0); k_count];
    for l in (1..k_count).rev() {
        let children: Vec<&Array1<T>> = tree.children(l).iter().map(|&t| &beta[t]).collect();
        let input = hadamard_all(&potentials.phi[l], &children);
        beta[l] = kernels.edge(l).apply(input.view())?;
        check_finite(&beta[l], l)?;
    }
    Ok(beta)
}

/// Downward messages for one consistent potential snapshot:
/// `gamma_0 = 1` and
/// `gamma_l = (K^(p(l), l))^T (phi^p . gamma_p . prod_{t in children(p), t != l} beta_t)`.
pub fn downward_pass<T: Real>(
    potentials: &DualPotentials<T>,
    kernels: &TreeKernels<T>,
    tree: &TreeGraph,
    beta: &[Array1<T>],
) -> Result<Vec<Array1<T>>> {
    let k_count = tree.node_count();
    let mut gamma: Vec<Array1<T>> = vec![Array1::zeros(0); k_count];
    gamma[0] = Array1::from_elem(potentials.phi[0].len(), T::one());
    for l in 1..k_count {
        let p = tree.parent(l);
        let siblings: Vec<&Array1<T>> = tree
            .children(p)
            .iter()
            .filter(|&&t| t != l)
            .map(|&t| &beta[t])
            .collect();
        let mut input = hadamard_all(&potentials.phi[p], &siblings);
        input = input * &gamma[p];
        gamma[l] = kernels.edge(l).apply_transpose(input.view())?;
        check_finite(&gamma[l], l)?;
    }
    Ok(gamma)
}

/// Marginal of the plan at node `k`:
/// `phi^k . gamma_k . prod_{t in children(k)} beta_t`.
pub fn tree_marginal<T: Real>(
    potentials: &DualPotentials<T>,
    beta: &[Array1<T>],
    gamma: &[Array1<T>],
    tree: &TreeGraph,
    k: usize,
) -> Array1<T> {
    let children: Vec<&Array1<T>> = tree.children(k).iter().map(|&t| &beta[t]).collect();
    let mut out = hadamard_all(&potentials.phi[k], &children);
    out = out * &gamma[k];
    out
}

/// Result of a structured tree solve.
pub struct TreeSolution<T: Real> {
    pub potentials: DualPotentials<T>,
    /// Sinkhorn value recorded at each sweep (the dual objective of the
    /// potentials the sweep started from).
    pub trace: Vec<T>,
    /// Final plan marginals per node, from messages consistent with the
    /// final potentials.
    pub marginals: Vec<Array1<T>>,
    /// Max-norm residuals of those marginals against the prescribed
    /// weights (zero for unconstrained nodes).
    pub residuals: Vec<T>,
    pub converged: bool,
    pub sweeps: usize,
    pub applications_per_sweep: Vec<u64>,
    pub log: Vec<IterationRow<T>>,
}

pub fn sinkhorn_tree<T: Real>(
    measures: &[DiscreteMeasure<T>],
    tree: &TreeGraph,
    config: &SinkhornConfig<T>,
    factory: &mut dyn KernelFactory<T>,
) -> Result<TreeSolution<T>> {
    sinkhorn_tree_observed(measures, tree, config, factory, |_| {})
}

pub fn sinkhorn_tree_observed<T: Real>(
    measures: &[DiscreteMeasure<T>],
    tree: &TreeGraph,
    config: &SinkhornConfig<T>,
    factory: &mut dyn KernelFactory<T>,
    observer: impl FnMut(SolverEvent<'_, T>),
) -> Result<TreeSolution<T>> {
    solve_tree(measures, tree, config, factory, None, None, observer)
}

/// Full tree solver, also covering the barycenter variant: nodes with
/// `constrained[k] = false` keep their potential at one instead of
/// enforcing their marginal, and edge kernels may carry weights.
pub fn solve_tree<T: Real>(
    measures: &[DiscreteMeasure<T>],
    tree: &TreeGraph,
    config: &SinkhornConfig<T>,
    factory: &mut dyn KernelFactory<T>,
    edge_weights: Option<&[T]>,
    constrained: Option<&[bool]>,
    mut observer: impl FnMut(SolverEvent<'_, T>),
) -> Result<TreeSolution<T>> {
    config.validate()?;
    common_dimension(measures)?;
    let k_count = tree.node_count();
    if measures.len() != k_count {
        return Err(Error::InvalidGraph(format!(
            "tree has {k_count} nodes but {} measures were given",
            measures.len()
        )));
    }
    if let Some(c) = constrained {
        if c.len() != k_count {
            return Err(Error::InvalidParameter(format!(
                "need {k_count} constraint flags, got {}",
                c.len()
            )));
        }
        if !c[0] {
            return Err(Error::InvalidParameter(
                "the root node must be constrained (relabel the tree onto a constrained leaf)"
                    .into(),
            ));
        }
    }
    let is_constrained = |k: usize| constrained.map_or(true, |c| c[k]);
    let kernels = TreeKernels::build(factory, measures, tree, config.eta, edge_weights)?;
    let sizes: Vec<usize> = measures.iter().map(|m| m.len()).collect();
    let mut potentials = DualPotentials::ones(&sizes);
    let mut beta = upward_pass(&potentials, &kernels, tree)?;

    let mut trace: Vec<T> = Vec::new();
    let mut log: Vec<IterationRow<T>> = Vec::new();
    let mut applications_per_sweep: Vec<u64> = Vec::new();
    let mut converged = false;
    let mut sweeps = 0;
    let started = Instant::now();

    while sweeps < config.max_iterations {
        let apps_before = factory.applications();
        let phi_start = potentials.phi.clone();
        let mut gamma: Vec<Array1<T>> = vec![Array1::zeros(0); k_count];
        let mut root_denominator = Array1::zeros(0);
        for k in 0..k_count {
            if k == 0 {
                gamma[0] = Array1::from_elem(sizes[0], T::one());
            } else {
                let p = tree.parent(k);
                let siblings: Vec<&Array1<T>> = tree
                    .children(p)
                    .iter()
                    .filter(|&&t| t != k)
                    .map(|&t| &beta[t])
                    .collect();
                let mut input = hadamard_all(&potentials.phi[p], &siblings);
                input = input * &gamma[p];
                gamma[k] = kernels.edge(k).apply_transpose(input.view())?;
                check_finite(&gamma[k], k)?;
            }
            let children: Vec<&Array1<T>> = tree.children(k).iter().map(|&t| &beta[t]).collect();
            let denominator = hadamard_all(&gamma[k], &children);
            if is_constrained(k) {
                let w = measures[k].weights();
                for (j, &d) in denominator.iter().enumerate() {
                    if w[j] > T::zero() && d == T::zero() {
                        return Err(Error::ZeroDenominator { node: k });
                    }
                    if !d.is_finite() {
                        return Err(Error::NonFiniteMessage { node: k });
                    }
                    potentials.phi[k][j] = if w[j] > T::zero() {
                        w[j] / d
                    } else {
                        T::zero()
                    };
                }
                for (&p, &wj) in potentials.phi[k].iter().zip(w.iter()) {
                    if !p.is_finite() || (wj > T::zero() && !(p > T::zero())) {
                        return Err(Error::NonPositivePotential { node: k });
                    }
                }
            } else {
                potentials.phi[k].fill(T::one());
            }
            if k == 0 {
                root_denominator = denominator.clone();
            }
            observer(SolverEvent::NodeUpdated(NodeUpdate {
                sweep: sweeps,
                node: k,
                denominator: &denominator,
                phi: &potentials.phi[k],
            }));
        }
        beta = upward_pass(&potentials, &kernels, tree)?;

        // S = eta ( sum_k mu^k . log phi_start^k - <mu^0 / phi^0_new, phi^0_start> );
        // the second factor is the saved root denominator, which equals the
        // quotient wherever the weight is positive and stays finite at
        // zero-weight atoms
        let mut log_term = T::zero();
        for (k, m) in measures.iter().enumerate() {
            if !is_constrained(k) {
                continue;
            }
            for (&p, &w) in phi_start[k].iter().zip(m.weights().iter()) {
                if w > T::zero() {
                    if !(p > T::zero()) {
                        return Err(Error::NonPositivePotential { node: k });
                    }
                    log_term += w * p.ln();
                }
            }
        }
        let mass: T = root_denominator
            .iter()
            .zip(phi_start[0].iter())
            .map(|(&d, &p)| d * p)
            .sum();
        let objective = config.eta * (log_term - mass);
        if !objective.is_finite() {
            return Err(Error::NonFiniteObjective { sweep: sweeps });
        }
        sweeps += 1;
        trace.push(objective);
        let applications = factory.applications() - apps_before;
        applications_per_sweep.push(applications);
        log.push(IterationRow {
            sweep: sweeps,
            objective,
            seconds: started.elapsed().as_secs_f64(),
        });
        observer(SolverEvent::SweepEnded(SweepEnd {
            sweep: sweeps,
            potentials: &potentials,
            objective,
            applications,
        }));
        let n = trace.len();
        if n >= 2 && (trace[n - 1] - trace[n - 2]).abs() < config.delta {
            converged = true;
            break;
        }
    }

    // consistent final diagnostics (extra applications, outside the sweeps)
    let gamma = downward_pass(&potentials, &kernels, tree, &beta)?;
    let mut marginals = Vec::with_capacity(k_count);
    let mut residuals = Vec::with_capacity(k_count);
    for k in 0..k_count {
        let m = tree_marginal(&potentials, &beta, &gamma, tree, k);
        let r = if is_constrained(k) {
            m.iter()
                .zip(measures[k].weights().iter())
                .map(|(&a, &b)| (a - b).abs())
                .fold(T::zero(), T::max)
        } else {
            T::zero()
        };
        marginals.push(m);
        residuals.push(r);
    }

    Ok(TreeSolution {
        potentials,
        trace,
        marginals,
        residuals,
        converged,
        sweeps,
        applications_per_sweep,
        log,
    })
}
