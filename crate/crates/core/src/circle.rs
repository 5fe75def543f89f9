//! Sinkhorn solver for circle-structured costs.
//!
//! On a cycle the messages are matrices: `beta[k]` accumulates the kernel
//! chain from node `k` forward around the circle to node `0`, `gamma[k]`
//! the chain from node `0` up to node `k`. Marginals and pair marginals
//! come out of row-wise contractions of these, never a plan tensor. One
//! sweep requests `2(K-1)` kernel applications (the two recursion base
//! cases are served from a cached materialization).

use std::time::Instant;

use ndarray::{Array1, Array2, ArrayView2, Axis};

use crate::config::SinkhornConfig;
use crate::error::{Error, Result};
use crate::graph::CircleGraph;
use crate::kernel::{DualPotentials, KernelApplicator, KernelFactory};
use crate::measure::{common_dimension, DiscreteMeasure};
use crate::scalar::Real;
use crate::solve::{IterationRow, NodeUpdate, SolverEvent, SweepEnd};

/// Edge kernels of the cycle: `edges[k]` couples node `k` (rows) with
/// node `k+1 mod K` (columns).
pub struct CircleKernels<T: Real> {
    edges: Vec<KernelApplicator<T>>,
}

impl<T: Real> CircleKernels<T> {
    /// Builds all `K` edge applicators. `closing_sources` substitutes the
    /// column point set of the closing edge `(K-1, 0)`; the Euler-flow
    /// driver passes the connection-mapped first marginal here.
    pub fn build<'a>(
        factory: &mut dyn KernelFactory<T>,
        measures: &'a [DiscreteMeasure<T>],
        circle: &CircleGraph,
        eta: T,
        closing_sources: Option<ArrayView2<'a, T>>,
    ) -> Result<Self> {
        let k_count = circle.node_count();
        let mut edges = Vec::with_capacity(k_count);
        for k in 0..k_count {
            let next = circle.next(k);
            let cols = if k == k_count - 1 {
                closing_sources.unwrap_or_else(|| measures[next].points())
            } else {
                measures[next].points()
            };
            edges.push(factory.make_edge(measures[k].points(), cols, eta)?);
        }
        Ok(Self { edges })
    }

    pub fn edge(&self, k: usize) -> &KernelApplicator<T> {
        &self.edges[k]
    }
}

/// Matrix messages. `beta[k]` has shape `(n_k, n_0)` and carries the
/// contraction of the chain `k -> k+1 -> ... -> K-1 -> 0`; `gamma_t[k]`
/// has the same shape and is the transpose of the chain `0 -> 1 -> ... -> k`.
/// Index 0 of both is unused.
pub struct CircleMessages<T: Real> {
    pub beta: Vec<Array2<T>>,
    pub gamma_t: Vec<Array2<T>>,
}

fn scale_rows<T: Real>(phi: &Array1<T>, m: &Array2<T>) -> Array2<T> {
    let mut out = m.clone();
    for (mut row, &f) in out.outer_iter_mut().zip(phi.iter()) {
        row.mapv_inplace(|v| v * f);
    }
    out
}

fn check_finite_mat<T: Real>(m: &Array2<T>, node: usize) -> Result<()> {
    if m.iter().any(|x| !x.is_finite()) {
        return Err(Error::NonFiniteMessage { node });
    }
    Ok(())
}

/// Backward message pass: `beta[K-1]` is the closing-edge kernel matrix,
/// then `beta[k] = K^(k,k+1) (phi^{k+1} . beta[k+1])` down to `k = 1`.
pub fn beta_pass<T: Real>(
    potentials: &DualPotentials<T>,
    kernels: &CircleKernels<T>,
) -> Result<Vec<Array2<T>>> {
    let k_count = potentials.node_count();
    let mut beta: Vec<Array2<T>> = vec![Array2::zeros((0, 0)); k_count];
    beta[k_count - 1] = kernels.edge(k_count - 1).materialized()?.as_ref().clone();
    for k in (1..k_count - 1).rev() {
        let scaled = scale_rows(&potentials.phi[k + 1], &beta[k + 1]);
        beta[k] = kernels.edge(k).apply_mat(scaled.view())?;
        check_finite_mat(&beta[k], k)?;
    }
    Ok(beta)
}

/// Forward message pass (transposed storage): `gamma_t[1]` is the first
/// edge kernel transposed, then
/// `gamma_t[k] = (K^(k-1,k))^T (phi^{k-1} . gamma_t[k-1])`.
pub fn gamma_pass_t<T: Real>(
    potentials: &DualPotentials<T>,
    kernels: &CircleKernels<T>,
) -> Result<Vec<Array2<T>>> {
    let k_count = potentials.node_count();
    let mut gamma_t: Vec<Array2<T>> = vec![Array2::zeros((0, 0)); k_count];
    gamma_t[1] = kernels.edge(0).materialized()?.t().to_owned();
    for k in 2..k_count {
        let scaled = scale_rows(&potentials.phi[k - 1], &gamma_t[k - 1]);
        gamma_t[k] = kernels.edge(k - 1).apply_transpose_mat(scaled.view())?;
        check_finite_mat(&gamma_t[k], k)?;
    }
    Ok(gamma_t)
}

/// Forward messages in their natural orientation `(n_0, n_k)`.
pub fn gamma_pass<T: Real>(
    potentials: &DualPotentials<T>,
    kernels: &CircleKernels<T>,
) -> Result<Vec<Array2<T>>> {
    Ok(gamma_pass_t(potentials, kernels)?
        .into_iter()
        .map(|m| m.reversed_axes())
        .collect())
}

/// Builds consistent messages for one potential snapshot.
pub fn circle_messages<T: Real>(
    potentials: &DualPotentials<T>,
    kernels: &CircleKernels<T>,
) -> Result<CircleMessages<T>> {
    Ok(CircleMessages {
        beta: beta_pass(potentials, kernels)?,
        gamma_t: gamma_pass_t(potentials, kernels)?,
    })
}

/// Marginal of the plan at node `k` by row-wise contraction of the two
/// chain messages (for `k = 0`, of the first-edge kernel and `beta[1]`).
pub fn circle_marginal<T: Real>(
    potentials: &DualPotentials<T>,
    messages: &CircleMessages<T>,
    k: usize,
) -> Result<Array1<T>> {
    let k_count = potentials.node_count();
    if k >= k_count {
        return Err(Error::InvalidParameter(format!(
            "marginal index {k} out of range for {k_count} nodes"
        )));
    }
    if k == 0 {
        // sum over i1 of K01[i0, i1] phi1[i1] beta1[i1, i0], with K01^T
        // available as gamma_t[1]
        let g = &messages.gamma_t[1];
        let b = &messages.beta[1];
        let phi1 = &potentials.phi[1];
        let n0 = potentials.phi[0].len();
        let mut out = Array1::zeros(n0);
        for i1 in 0..phi1.len() {
            let f = phi1[i1];
            for i0 in 0..n0 {
                out[i0] += g[(i1, i0)] * f * b[(i1, i0)];
            }
        }
        Ok(out * &potentials.phi[0])
    } else {
        let b = &messages.beta[k];
        let g = &messages.gamma_t[k];
        let phi0 = &potentials.phi[0];
        let nk = potentials.phi[k].len();
        let mut out = Array1::zeros(nk);
        for ik in 0..nk {
            let mut acc = T::zero();
            for i0 in 0..phi0.len() {
                acc += b[(ik, i0)] * phi0[i0] * g[(ik, i0)];
            }
            out[ik] = acc;
        }
        Ok(out * &potentials.phi[k])
    }
}

/// Pair marginal of the plan over nodes `0` and `k` (`1 <= k < K`):
/// `Pi[i0, ik] = phi0[i0] phik[ik] gamma[k][i0, ik] beta[k][ik, i0]`.
pub fn pair_marginal<T: Real>(
    potentials: &DualPotentials<T>,
    messages: &CircleMessages<T>,
    k: usize,
) -> Result<Array2<T>> {
    let k_count = potentials.node_count();
    if k == 0 || k >= k_count {
        return Err(Error::InvalidParameter(format!(
            "pair-marginal index {k} out of range (expected 1..{k_count})"
        )));
    }
    let b = &messages.beta[k];
    let g = &messages.gamma_t[k];
    let phi0 = &potentials.phi[0];
    let phik = &potentials.phi[k];
    let mut out = Array2::zeros((phi0.len(), phik.len()));
    for ik in 0..phik.len() {
        for i0 in 0..phi0.len() {
            out[(i0, ik)] = phi0[i0] * phik[ik] * g[(ik, i0)] * b[(ik, i0)];
        }
    }
    Ok(out)
}

/// Result of a structured circle solve.
pub struct CircleSolution<T: Real> {
    pub potentials: DualPotentials<T>,
    pub trace: Vec<T>,
    /// Messages consistent with the final potentials.
    pub messages: CircleMessages<T>,
    pub marginals: Vec<Array1<T>>,
    pub residuals: Vec<T>,
    pub converged: bool,
    pub sweeps: usize,
    pub applications_per_sweep: Vec<u64>,
    pub log: Vec<IterationRow<T>>,
}

pub fn sinkhorn_circle<T: Real>(
    measures: &[DiscreteMeasure<T>],
    circle: &CircleGraph,
    config: &SinkhornConfig<T>,
    factory: &mut dyn KernelFactory<T>,
) -> Result<CircleSolution<T>> {
    sinkhorn_circle_observed(measures, circle, config, factory, None, |_| {})
}

/// Circle solver with an observer and an optional substitute for the
/// closing-edge source points (the connection map of an Euler flow).
pub fn sinkhorn_circle_observed<'a, T: Real>(
    measures: &'a [DiscreteMeasure<T>],
    circle: &CircleGraph,
    config: &SinkhornConfig<T>,
    factory: &mut dyn KernelFactory<T>,
    closing_sources: Option<ArrayView2<'a, T>>,
    mut observer: impl FnMut(SolverEvent<'_, T>),
) -> Result<CircleSolution<T>> {
    config.validate()?;
    common_dimension(measures)?;
    let k_count = circle.node_count();
    if measures.len() != k_count {
        return Err(Error::InvalidGraph(format!(
            "circle has {k_count} nodes but {} measures were given",
            measures.len()
        )));
    }
    let kernels = CircleKernels::build(factory, measures, circle, config.eta, closing_sources)?;
    let sizes: Vec<usize> = measures.iter().map(|m| m.len()).collect();
    let mut potentials = DualPotentials::ones(&sizes);
    let mut beta = beta_pass(&potentials, &kernels)?;
    // the forward-chain base K^(0,1) is constant; kept transposed for the
    // recursion and referenced untransposed in the node-0 update
    let first_edge = kernels.edge(0).materialized()?;
    let gamma_t1 = first_edge.t().to_owned();

    let mut trace: Vec<T> = Vec::new();
    let mut log: Vec<IterationRow<T>> = Vec::new();
    let mut applications_per_sweep: Vec<u64> = Vec::new();
    let mut converged = false;
    let mut sweeps = 0;
    let started = Instant::now();

    let update_node = |k: usize,
                       denominator: &Array1<T>,
                       potentials: &mut DualPotentials<T>|
     -> Result<()> {
        let w = measures[k].weights();
        for (j, &d) in denominator.iter().enumerate() {
            if w[j] > T::zero() && d == T::zero() {
                return Err(Error::ZeroDenominator { node: k });
            }
            if !d.is_finite() {
                return Err(Error::NonFiniteMessage { node: k });
            }
            potentials.phi[k][j] = if w[j] > T::zero() { w[j] / d } else { T::zero() };
        }
        for (&p, &wj) in potentials.phi[k].iter().zip(w.iter()) {
            if !p.is_finite() || (wj > T::zero() && !(p > T::zero())) {
                return Err(Error::NonPositivePotential { node: k });
            }
        }
        Ok(())
    };

    while sweeps < config.max_iterations {
        let apps_before = factory.applications();
        let phi_start = potentials.phi.clone();
        // node 0: denominator from the first-edge kernel and stale beta[1];
        // the counted materialization request is this sweep's gamma base case
        kernels.edge(0).materialized()?;
        let mut denom0 = Array1::zeros(sizes[0]);
        {
            let b = &beta[1];
            let phi1 = &potentials.phi[1];
            for i1 in 0..sizes[1] {
                let f = phi1[i1];
                for i0 in 0..sizes[0] {
                    denom0[i0] += gamma_t1[(i1, i0)] * f * b[(i1, i0)];
                }
            }
        }
        update_node(0, &denom0, &mut potentials)?;
        observer(SolverEvent::NodeUpdated(NodeUpdate {
            sweep: sweeps,
            node: 0,
            denominator: &denom0,
            phi: &potentials.phi[0],
        }));

        // nodes 1..K-1: advance gamma, update the potential
        let mut gamma_t_prev = gamma_t1.clone();
        for k in 1..k_count {
            if k >= 2 {
                let scaled = scale_rows(&potentials.phi[k - 1], &gamma_t_prev);
                gamma_t_prev = kernels.edge(k - 1).apply_transpose_mat(scaled.view())?;
                check_finite_mat(&gamma_t_prev, k)?;
            }
            let phi0 = &potentials.phi[0];
            let mut denom = Array1::zeros(sizes[k]);
            for ik in 0..sizes[k] {
                let mut acc = T::zero();
                for i0 in 0..sizes[0] {
                    acc += beta[k][(ik, i0)] * phi0[i0] * gamma_t_prev[(ik, i0)];
                }
                denom[ik] = acc;
            }
            update_node(k, &denom, &mut potentials)?;
            observer(SolverEvent::NodeUpdated(NodeUpdate {
                sweep: sweeps,
                node: k,
                denominator: &denom,
                phi: &potentials.phi[k],
            }));
        }

        beta = beta_pass(&potentials, &kernels)?;

        let mut log_term = T::zero();
        for (k, m) in measures.iter().enumerate() {
            for (&p, &w) in phi_start[k].iter().zip(m.weights().iter()) {
                if w > T::zero() {
                    if !(p > T::zero()) {
                        return Err(Error::NonPositivePotential { node: k });
                    }
                    log_term += w * p.ln();
                }
            }
        }
        let mass: T = denom0
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

    // consistent final messages and feasibility diagnostics
    let messages = CircleMessages {
        gamma_t: gamma_pass_t(&potentials, &kernels)?,
        beta,
    };
    let mut marginals = Vec::with_capacity(k_count);
    let mut residuals = Vec::with_capacity(k_count);
    for k in 0..k_count {
        let m = circle_marginal(&potentials, &messages, k)?;
        let r = m
            .iter()
            .zip(measures[k].weights().iter())
            .map(|(&a, &b)| (a - b).abs())
            .fold(T::zero(), T::max);
        marginals.push(m);
        residuals.push(r);
    }

    Ok(CircleSolution {
        potentials,
        trace,
        messages,
        marginals,
        residuals,
        converged,
        sweeps,
        applications_per_sweep,
        log,
    })
}

/// Sum of a pair marginal along rows and columns, for feasibility checks.
pub fn pair_marginal_sums<T: Real>(pair: &Array2<T>) -> (Array1<T>, Array1<T>) {
    (pair.sum_axis(Axis(1)), pair.sum_axis(Axis(0)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::SinkhornConfig;
    use crate::dense::{
        full_cost_tensor, kernel_tensor, plan_tensor, project_marginal, project_pair,
        sinkhorn_dense_observed,
    };
    use crate::graph::CostGraph;
    use crate::kernel::DirectFactory;
    use ndarray::{arr2, Array2};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_measure(n: usize, d: usize, rng: &mut ChaCha8Rng, span: f64) -> DiscreteMeasure<f64> {
        let pts = Array2::from_shape_fn((n, d), |_| rng.gen::<f64>() * span);
        let mut w = Array1::from_shape_fn(n, |_| rng.gen::<f64>() + 0.1);
        let s: f64 = w.sum();
        w.mapv_inplace(|v| v / s);
        DiscreteMeasure::new(pts, w).unwrap()
    }

    fn build_all(
        measures: &[DiscreteMeasure<f64>],
        eta: f64,
    ) -> (CircleKernels<f64>, DirectFactory<f64>, CircleGraph) {
        let circle = CircleGraph::new(measures.len()).unwrap();
        let mut factory = DirectFactory::new();
        let kernels = CircleKernels::build(&mut factory, measures, &circle, eta, None).unwrap();
        (kernels, factory, circle)
    }

    fn random_potentials(
        measures: &[DiscreteMeasure<f64>],
        rng: &mut ChaCha8Rng,
    ) -> DualPotentials<f64> {
        DualPotentials {
            phi: measures
                .iter()
                .map(|m| Array1::from_shape_fn(m.len(), |_| rng.gen::<f64>() + 0.3))
                .collect(),
        }
    }

    #[test]
    fn scalar_circle_messages_are_all_one() {
        let m = DiscreteMeasure::uniform(arr2(&[[0.0]])).unwrap();
        let measures = vec![m.clone(), m.clone(), m];
        let (kernels, _, _) = build_all(&measures, 1.0);
        let phi = DualPotentials::ones(&[1, 1, 1]);
        let beta = beta_pass(&phi, &kernels).unwrap();
        assert_eq!(beta[2][(0, 0)], 1.0);
        assert_eq!(beta[1][(0, 0)], 1.0);
        let gamma = gamma_pass(&phi, &kernels).unwrap();
        assert_eq!(gamma[1][(0, 0)], 1.0);
        assert_eq!(gamma[2][(0, 0)], 1.0);
        let msgs = circle_messages(&phi, &kernels).unwrap();
        for k in 0..3 {
            let marg = circle_marginal(&phi, &msgs, k).unwrap();
            assert_eq!(marg[0], 1.0);
        }
    }

    #[test]
    fn base_cases_equal_edge_kernels() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let measures: Vec<_> = [3usize, 2, 4]
            .iter()
            .map(|&n| random_measure(n, 1, &mut rng, 1.0))
            .collect();
        let (kernels, _, _) = build_all(&measures, 0.6);
        let phi = random_potentials(&measures, &mut rng);
        let beta = beta_pass(&phi, &kernels).unwrap();
        let k20 = kernels.edge(2).dense_view().unwrap();
        assert_eq!(&beta[2], k20);
        let gamma = gamma_pass(&phi, &kernels).unwrap();
        let k01 = kernels.edge(0).dense_view().unwrap();
        assert_eq!(&gamma[1], k01);
    }

    #[test]
    fn gamma_chain_matches_triple_loop() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let measures: Vec<_> = [3usize, 2, 4]
            .iter()
            .map(|&n| random_measure(n, 2, &mut rng, 0.9))
            .collect();
        let eta = 0.8;
        let (kernels, _, _) = build_all(&measures, eta);
        let phi = random_potentials(&measures, &mut rng);
        let gamma = gamma_pass(&phi, &kernels).unwrap();
        // gamma[2][i0, i2] = sum_i1 K01[i0,i1] phi1[i1] K12[i1,i2]
        let k01 = kernels.edge(0).dense_view().unwrap();
        let k12 = kernels.edge(1).dense_view().unwrap();
        for i0 in 0..3 {
            for i2 in 0..4 {
                let mut acc = 0.0;
                for i1 in 0..2 {
                    acc += k01[(i0, i1)] * phi.phi[1][i1] * k12[(i1, i2)];
                }
                assert!((gamma[2][(i0, i2)] / acc - 1.0).abs() < 1e-13);
            }
        }
    }

    #[test]
    fn beta_chain_matches_brute_force_sum() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let measures: Vec<_> = (0..4).map(|_| random_measure(3, 1, &mut rng, 1.0)).collect();
        let eta = 0.7;
        let (kernels, _, _) = build_all(&measures, eta);
        let phi = random_potentials(&measures, &mut rng);
        let beta = beta_pass(&phi, &kernels).unwrap();
        // beta[1][i1, i0] = sum_{i2, i3} K12 phi2 K23 phi3 K30
        let k12 = kernels.edge(1).dense_view().unwrap();
        let k23 = kernels.edge(2).dense_view().unwrap();
        let k30 = kernels.edge(3).dense_view().unwrap();
        for i1 in 0..3 {
            for i0 in 0..3 {
                let mut acc = 0.0;
                for i2 in 0..3 {
                    for i3 in 0..3 {
                        acc += k12[(i1, i2)]
                            * phi.phi[2][i2]
                            * k23[(i2, i3)]
                            * phi.phi[3][i3]
                            * k30[(i3, i0)];
                    }
                }
                assert!((beta[1][(i1, i0)] / acc - 1.0).abs() < 1e-13);
            }
        }
    }

    #[test]
    fn marginals_match_dense_projection() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let measures: Vec<_> = (0..3).map(|_| random_measure(2, 1, &mut rng, 0.8)).collect();
        let eta = 0.5;
        let (kernels, _, circle) = build_all(&measures, eta);
        let phi = random_potentials(&measures, &mut rng);
        let msgs = circle_messages(&phi, &kernels).unwrap();
        let g = CostGraph::Circle(circle);
        let kten = kernel_tensor(&full_cost_tensor(&measures, &g).unwrap(), eta);
        let plan = plan_tensor(&kten, &phi);
        for k in 0..3 {
            let marg = circle_marginal(&phi, &msgs, k).unwrap();
            let dense = project_marginal(&plan, k).unwrap();
            for j in 0..measures[k].len() {
                assert!((marg[j] / dense[j] - 1.0).abs() < 1e-12);
            }
        }
        // pair-marginal consistency: summing over the second index gives
        // the first marginal, converged or not
        for k in 1..3 {
            let pair = pair_marginal(&phi, &msgs, k).unwrap();
            let (rows, _) = pair_marginal_sums(&pair);
            let m0 = circle_marginal(&phi, &msgs, 0).unwrap();
            for i in 0..measures[0].len() {
                assert!((rows[i] / m0[i] - 1.0).abs() < 1e-12);
            }
            let dense_pair = project_pair(&plan, 0, k).unwrap();
            for (a, b) in pair.iter().zip(dense_pair.iter()) {
                assert!((a / b - 1.0).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn lockstep_with_dense_oracle_on_random_circles() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for trial in 0..10 {
            let k = rng.gen_range(3..=5);
            let circle = CircleGraph::new(k).unwrap();
            let d = rng.gen_range(1..=2);
            let measures: Vec<_> = (0..k)
                .map(|_| random_measure(rng.gen_range(1..=4), d, &mut rng, 0.6))
                .collect();
            let eta = if trial % 2 == 0 { 0.1 } else { 1.0 };
            let config = SinkhornConfig::new(eta, 1e-30).with_max_iterations(5);
            let mut dense_iters: Vec<Vec<Array1<f64>>> = Vec::new();
            sinkhorn_dense_observed(
                &measures,
                &CostGraph::Circle(circle),
                &config,
                |rec| dense_iters.push(rec.potentials.phi.clone()),
            )
            .unwrap();
            let mut circ_iters: Vec<Vec<Array1<f64>>> = Vec::new();
            let mut factory = DirectFactory::new();
            sinkhorn_circle_observed(&measures, &circle, &config, &mut factory, None, |e| {
                if let SolverEvent::SweepEnded(s) = e {
                    circ_iters.push(s.potentials.phi.clone());
                }
            })
            .unwrap();
            for (a, b) in dense_iters.iter().zip(&circ_iters) {
                for (x, y) in a.iter().zip(b) {
                    for (u, v) in x.iter().zip(y.iter()) {
                        assert!((u / v - 1.0).abs() < 1e-10, "trial {trial}");
                    }
                }
            }
        }
    }

    #[test]
    fn immediate_constraint_after_each_update() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let measures: Vec<_> = (0..4).map(|_| random_measure(3, 1, &mut rng, 0.7)).collect();
        let circle = CircleGraph::new(4).unwrap();
        let config = SinkhornConfig::new(0.5, 1e-30).with_max_iterations(3);
        let mut factory = DirectFactory::new();
        sinkhorn_circle_observed(&measures, &circle, &config, &mut factory, None, |e| {
            if let SolverEvent::NodeUpdated(u) = e {
                for (j, (&p, &d)) in u.phi.iter().zip(u.denominator.iter()).enumerate() {
                    let w = measures[u.node].weights()[j];
                    assert!((p * d / w - 1.0).abs() < 1e-12);
                }
            }
        })
        .unwrap();
    }

    #[test]
    fn per_sweep_kernel_work_is_two_k_minus_one() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for k in [3usize, 4, 6] {
            let measures: Vec<_> =
                (0..k).map(|_| random_measure(2, 1, &mut rng, 0.8)).collect();
            let circle = CircleGraph::new(k).unwrap();
            let config = SinkhornConfig::new(0.8, 1e-30).with_max_iterations(4);
            let mut factory = DirectFactory::new();
            let sol = sinkhorn_circle(&measures, &circle, &config, &mut factory).unwrap();
            for &a in &sol.applications_per_sweep {
                assert_eq!(a as usize, 2 * (k - 1), "K = {k}");
            }
        }
    }

    #[test]
    fn converged_circle_is_feasible_and_single_atom_is_immediate() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let measures: Vec<_> = (0..4).map(|_| random_measure(3, 1, &mut rng, 0.5)).collect();
        let circle = CircleGraph::new(4).unwrap();
        let config = SinkhornConfig::new(1.0, 1e-12);
        let mut factory = DirectFactory::new();
        let sol = sinkhorn_circle(&measures, &circle, &config, &mut factory).unwrap();
        assert!(sol.converged);
        assert!(sol.residuals.iter().all(|&r| r < 1e-8));
        // all-singleton circle: the unique plan has mass one
        let s = DiscreteMeasure::uniform(arr2(&[[0.3]])).unwrap();
        let singles = vec![s.clone(), s.clone(), s];
        let circle = CircleGraph::new(3).unwrap();
        let mut factory = DirectFactory::new();
        let sol = sinkhorn_circle(&singles, &circle, &config, &mut factory).unwrap();
        assert!(sol.converged && sol.sweeps <= 3);
        assert!((sol.marginals[0][0] - 1.0).abs() < 1e-12);
        let pair = pair_marginal(&sol.potentials, &sol.messages, 1).unwrap();
        assert!((pair[(0, 0)] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn rotating_the_labels_rotates_the_converged_plan() {
        // potentials carry a schedule-dependent gauge, so equivariance is
        // asserted on the plan marginals and pair marginals instead
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let k = 4;
        let measures: Vec<_> = (0..k).map(|_| random_measure(3, 1, &mut rng, 0.7)).collect();
        let circle = CircleGraph::new(k).unwrap();
        let config = SinkhornConfig::new(0.6, 1e-15).with_max_iterations(5000);
        let mut f1 = DirectFactory::new();
        let sol1 = sinkhorn_circle(&measures, &circle, &config, &mut f1).unwrap();
        let rotated: Vec<_> = (0..k).map(|i| measures[(i + 1) % k].clone()).collect();
        let mut f2 = DirectFactory::new();
        let sol2 = sinkhorn_circle(&rotated, &circle, &config, &mut f2).unwrap();
        let mut worst = 0.0f64;
        for i in 0..k {
            let a = &sol1.marginals[(i + 1) % k];
            let b = &sol2.marginals[i];
            for (x, y) in a.iter().zip(b.iter()) {
                worst = worst.max((x - y).abs());
            }
        }
        assert!(worst < 1e-10, "marginal rotation mismatch {worst:e} (sweeps {} / {})", sol1.sweeps, sol2.sweeps);
        // pair (0,1) of the rotated instance couples original nodes (1,2);
        // compare against the dense pairwise projection of instance 1
        let g = CostGraph::Circle(circle);
        let kten = kernel_tensor(&full_cost_tensor(&measures, &g).unwrap(), 0.6);
        let plan = plan_tensor(&kten, &sol1.potentials);
        let dense_12 = project_pair(&plan, 1, 2).unwrap();
        let pair_rot = pair_marginal(&sol2.potentials, &sol2.messages, 1).unwrap();
        for (a, b) in dense_12.iter().zip(pair_rot.iter()) {
            assert!((a - b).abs() < 1e-10);
        }
    }

    #[test]
    fn rejects_mismatched_inputs() {
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let measures: Vec<_> = (0..3).map(|_| random_measure(2, 1, &mut rng, 1.0)).collect();
        let circle = CircleGraph::new(4).unwrap();
        let config = SinkhornConfig::new(1.0, 1e-9);
        let mut factory = DirectFactory::new();
        assert!(sinkhorn_circle(&measures, &circle, &config, &mut factory).is_err());
    }
}
