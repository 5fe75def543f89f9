//! Experiment drivers: oracle cross-checks, barycenters, Euler flows.

use std::path::{Path, PathBuf};

use motsink_core::apps::{
    solve_barycenter, solve_euler_flow, BarycenterProblem, BarycenterSolution, ConnectionMap,
    EulerFlowProblem, EulerFlowSolution,
};
use motsink_core::apps::barycenter::BarycenterNode;
use motsink_core::circle::{circle_messages, pair_marginal, sinkhorn_circle_observed, CircleKernels};
use motsink_core::dense::{
    plan_tensor, project_marginal, project_pair, sinkhorn_dense_observed, kernel_tensor,
    full_cost_tensor,
};
use motsink_core::graph::{CircleGraph, CostGraph, TreeGraph};
use motsink_core::kernel::{DirectFactory, DualPotentials};
use motsink_core::solve::SolverEvent;
use motsink_core::tree::sinkhorn_tree_observed;
use motsink_core::{DiscreteMeasure, Error as CoreError, SinkhornConfig};
use ndarray::{Array1, Array2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::bench::Structure;
use crate::gen::{box_cloud, uniform_cloud};
use crate::io::{write_grid_file, write_measure_file, write_series_file};
use crate::spec::ExperimentSpec;
use crate::{CliError, Result};

// ---------------------------------------------------------------------
// oracle-check
// ---------------------------------------------------------------------

pub struct OracleOpts {
    pub structure: Structure,
    pub instances: usize,
    pub sweeps: usize,
    /// Side length of the sampling box for atom positions. Small boxes
    /// keep the kernels well conditioned, which the tight feasibility
    /// targets at delta-stagnation require.
    pub span: f64,
}

impl Default for OracleOpts {
    fn default() -> Self {
        Self {
            structure: Structure::Tree,
            instances: 50,
            sweeps: 5,
            span: 0.35,
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct OracleRow {
    pub instance: usize,
    pub k: usize,
    pub dim: usize,
    pub eta: f64,
    /// Worst entrywise relative deviation of the structured potentials
    /// from the dense ones over the compared sweeps.
    pub lockstep: f64,
    /// Worst pair-marginal relative deviation (circle only, 0 for trees).
    pub pair: f64,
    /// Max-norm marginal residual of the structured plan after running to
    /// `delta = 1e-12` convergence.
    pub residual: f64,
}

fn random_instance(
    rng: &mut ChaCha8Rng,
    structure: Structure,
    span: f64,
    seed: u64,
) -> (Vec<DiscreteMeasure<f64>>, Option<TreeGraph>, f64) {
    let k = match structure {
        Structure::Tree => rng.gen_range(2..=5),
        Structure::Circle => rng.gen_range(3..=5),
    };
    let dim = rng.gen_range(1..=2);
    let eta = if rng.gen_bool(0.5) { 0.1 } else { 1.0 };
    let measures: Vec<DiscreteMeasure<f64>> = (0..k)
        .map(|j| {
            let n = rng.gen_range(1..=4);
            let pts = box_cloud(n, dim, span, seed.wrapping_mul(1315423911) ^ j as u64);
            let mut w = Array1::from_shape_fn(n, |_| rng.gen::<f64>() + 0.1);
            let s = w.sum();
            w.mapv_inplace(|v| v / s);
            DiscreteMeasure::new(pts, w).expect("valid instance measure")
        })
        .collect();
    let tree = match structure {
        Structure::Tree => {
            let parents: Vec<usize> = (1..k).map(|i| rng.gen_range(0..i)).collect();
            Some(TreeGraph::from_parents(&parents).expect("valid parents"))
        }
        Structure::Circle => None,
    };
    (measures, tree, eta)
}

/// Runs seeded random small instances, comparing the structured solvers
/// against the dense oracle sweep by sweep, then re-running to
/// convergence for the feasibility residual.
pub fn cmd_oracle_check(spec: &ExperimentSpec, opts: &OracleOpts) -> Result<Vec<OracleRow>> {
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut rows = Vec::new();
    for instance in 0..opts.instances {
        let inst_seed = spec.seed.wrapping_add(instance as u64 + 1);
        let (measures, tree, eta) = random_instance(&mut rng, opts.structure, opts.span, inst_seed);
        let k = measures.len();
        let dim = measures[0].dim();
        let lockstep_config = SinkhornConfig::new(eta, ExperimentSpec::never_stop())
            .with_max_iterations(opts.sweeps);

        let mut dense_iters: Vec<Vec<Array1<f64>>> = Vec::new();
        let graph = match &tree {
            Some(t) => CostGraph::Tree(t.clone()),
            None => CostGraph::Circle(CircleGraph::new(k)?),
        };
        sinkhorn_dense_observed(&measures, &graph, &lockstep_config, |rec| {
            dense_iters.push(rec.potentials.phi.clone())
        })?;

        let mut fast_iters: Vec<Vec<Array1<f64>>> = Vec::new();
        let final_pots: DualPotentials<f64>;
        match &tree {
            Some(t) => {
                let mut factory = DirectFactory::new();
                let sol = sinkhorn_tree_observed(
                    &measures,
                    t,
                    &lockstep_config,
                    &mut factory,
                    |e| {
                        if let SolverEvent::SweepEnded(s) = e {
                            fast_iters.push(s.potentials.phi.clone());
                        }
                    },
                )?;
                final_pots = sol.potentials;
            }
            None => {
                let circle = CircleGraph::new(k)?;
                let mut factory = DirectFactory::new();
                let sol = sinkhorn_circle_observed(
                    &measures,
                    &circle,
                    &lockstep_config,
                    &mut factory,
                    None,
                    |e| {
                        if let SolverEvent::SweepEnded(s) = e {
                            fast_iters.push(s.potentials.phi.clone());
                        }
                    },
                )?;
                final_pots = sol.potentials;
            }
        }

        let mut lockstep = 0.0f64;
        for (a, b) in dense_iters.iter().zip(&fast_iters) {
            for (x, y) in a.iter().zip(b) {
                for (u, v) in x.iter().zip(y.iter()) {
                    lockstep = lockstep.max((u / v - 1.0).abs());
                }
            }
        }

        // circle: pair marginals against the dense pairwise projection at
        // the final compared state
        let mut pair_err = 0.0f64;
        if tree.is_none() {
            let pots = final_pots;
            let circle = CircleGraph::new(k)?;
            let mut factory = DirectFactory::new();
            let kernels = CircleKernels::build(&mut factory, &measures, &circle, eta, None)?;
            let msgs = circle_messages(&pots, &kernels)?;
            let kten = kernel_tensor(&full_cost_tensor(&measures, &graph)?, eta);
            let plan = plan_tensor(&kten, &pots);
            for node in 1..k {
                let fast_pair = pair_marginal(&pots, &msgs, node)?;
                let dense_pair = project_pair(&plan, 0, node)?;
                for (a, b) in fast_pair.iter().zip(dense_pair.iter()) {
                    pair_err = pair_err.max((a / b - 1.0).abs());
                }
            }
        }

        // feasibility at tight convergence
        let converge_config = SinkhornConfig::new(eta, 1e-12).with_max_iterations(100_000);
        let residual = match &tree {
            Some(t) => {
                let mut factory = DirectFactory::new();
                let sol = sinkhorn_tree_observed(&measures, t, &converge_config, &mut factory, |_| {})?;
                let kten = kernel_tensor(&full_cost_tensor(&measures, &graph)?, eta);
                let plan = plan_tensor(&kten, &sol.potentials);
                let mut worst = 0.0f64;
                for (node, m) in measures.iter().enumerate() {
                    let p = project_marginal(&plan, node)?;
                    for (a, b) in p.iter().zip(m.weights().iter()) {
                        worst = worst.max((a - b).abs());
                    }
                }
                worst
            }
            None => {
                let circle = CircleGraph::new(k)?;
                let mut factory = DirectFactory::new();
                let sol = sinkhorn_circle_observed(
                    &measures,
                    &circle,
                    &converge_config,
                    &mut factory,
                    None,
                    |_| {},
                )?;
                let kten = kernel_tensor(&full_cost_tensor(&measures, &graph)?, eta);
                let plan = plan_tensor(&kten, &sol.potentials);
                let mut worst = 0.0f64;
                for (node, m) in measures.iter().enumerate() {
                    let p = project_marginal(&plan, node)?;
                    for (a, b) in p.iter().zip(m.weights().iter()) {
                        worst = worst.max((a - b).abs());
                    }
                }
                worst
            }
        };

        rows.push(OracleRow {
            instance,
            k,
            dim,
            eta,
            lockstep,
            pair: pair_err,
            residual,
        });
    }
    write_series_file(
        &spec.out_dir.join(format!("oracle_check_{}.dat", opts.structure.as_str())),
        &[format!(
            "structured-vs-dense checks, {} instances, {} lockstep sweeps, box span {}",
            opts.instances, opts.sweeps, opts.span
        )],
        &["instance", "k", "dim", "eta", "lockstep", "pair", "residual"],
        &rows
            .iter()
            .map(|r| {
                vec![
                    r.instance as f64,
                    r.k as f64,
                    r.dim as f64,
                    r.eta,
                    r.lockstep,
                    r.pair,
                    r.residual,
                ]
            })
            .collect::<Vec<_>>(),
    )?;
    Ok(rows)
}

// ---------------------------------------------------------------------
// barycenter
// ---------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TreeShape {
    /// The 7-node tree with four leaves used by the image study.
    H7,
    /// One internal hub with all inputs as leaves.
    Star,
}

impl std::str::FromStr for TreeShape {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "h7" => Ok(TreeShape::H7),
            "star" => Ok(TreeShape::Star),
            other => Err(format!("unknown tree shape '{other}' (expected h7|star)")),
        }
    }
}

pub struct BarycenterOpts {
    pub inputs: Vec<PathBuf>,
    pub shape: TreeShape,
    pub weights: Option<Vec<f64>>,
}

/// Builds the tree for a shape. Returns the tree and, in leaf order, the
/// node index each input measure is assigned to.
fn shape_tree(shape: TreeShape, leaf_count: usize) -> Result<(TreeGraph, Vec<usize>)> {
    match shape {
        TreeShape::H7 => {
            if leaf_count != 4 {
                return Err(CliError::Usage(format!(
                    "the h7 tree takes exactly 4 input measures, got {leaf_count}"
                )));
            }
            // leaves 0, 3, 5, 6; internal 1, 2, 4
            let tree = TreeGraph::from_parents(&[0, 1, 1, 2, 4, 4]).map_err(CliError::Core)?;
            Ok((tree, vec![0, 3, 5, 6]))
        }
        TreeShape::Star => {
            if leaf_count < 2 {
                return Err(CliError::Usage(
                    "a star barycenter needs at least 2 input measures".into(),
                ));
            }
            // node 0 is a leaf root, node 1 the internal hub
            let mut parents = vec![0usize];
            parents.extend(std::iter::repeat(1).take(leaf_count - 1));
            let tree = TreeGraph::from_parents(&parents).map_err(CliError::Core)?;
            let mut leaves = vec![0usize];
            leaves.extend(2..=leaf_count);
            Ok((tree, leaves))
        }
    }
}

/// Assembles the barycenter problem: input measures at the leaves, the
/// union of all input supports at every internal node.
pub fn barycenter_problem(
    leaf_measures: Vec<DiscreteMeasure<f64>>,
    shape: TreeShape,
    weights: Option<Vec<f64>>,
) -> Result<BarycenterProblem<f64>> {
    let l = leaf_measures.len();
    let (tree, leaf_nodes) = shape_tree(shape, l)?;
    let w = match weights {
        Some(w) => {
            if w.len() != l {
                return Err(CliError::Usage(format!(
                    "got {} weights for {l} input measures",
                    w.len()
                )));
            }
            w
        }
        None => vec![1.0 / l as f64; l],
    };
    let d = leaf_measures[0].dim();
    let union_rows: usize = leaf_measures.iter().map(|m| m.len()).sum();
    let mut union = Array2::zeros((union_rows, d));
    let mut at = 0;
    for m in &leaf_measures {
        for row in m.points().outer_iter() {
            for ax in 0..d {
                union[(at, ax)] = row[ax];
            }
            at += 1;
        }
    }
    let mut nodes: Vec<Option<BarycenterNode<f64>>> =
        (0..tree.node_count()).map(|_| None).collect();
    for ((node, measure), weight) in leaf_nodes.iter().zip(leaf_measures).zip(w) {
        nodes[*node] = Some(BarycenterNode::Leaf { measure, weight });
    }
    for (k, slot) in nodes.iter_mut().enumerate() {
        if slot.is_none() {
            *slot = Some(BarycenterNode::Internal {
                support: union.clone(),
            });
        }
        debug_assert!(tree.is_leaf(k) != matches!(slot, Some(BarycenterNode::Internal { .. })));
    }
    BarycenterProblem::new(tree, nodes.into_iter().map(Option::unwrap).collect())
        .map_err(CliError::Core)
}

pub fn cmd_barycenter(spec: &ExperimentSpec, opts: &BarycenterOpts) -> Result<BarycenterSolution<f64>> {
    if opts.inputs.is_empty() {
        return Err(CliError::Usage(
            "barycenter needs input measure files".into(),
        ));
    }
    eprintln!(
        "note: marginal constraints are enforced at the input (leaf) nodes only; \
         interior potentials are held fixed at one"
    );
    let leaf_measures: Vec<DiscreteMeasure<f64>> = opts
        .inputs
        .iter()
        .map(|p| crate::io::read_measure_file(p))
        .collect::<Result<_>>()?;
    let problem = barycenter_problem(leaf_measures, opts.shape, opts.weights.clone())?;
    let config = spec.config();
    let sol = solve_barycenter(&problem, &config).map_err(CliError::Core)?;
    for (node, measure) in &sol.barycenters {
        write_measure_file(
            &spec.out_dir.join(format!("barycenter_node{node}.dat")),
            measure,
        )?;
    }
    if spec.emit_log {
        emit_log(&spec.out_dir.join("barycenter_log.dat"), &sol.tree_solution.log)?;
    }
    for (leaf, r) in &sol.leaf_residuals {
        eprintln!("leaf {leaf}: marginal residual {r:.3e}");
    }
    Ok(sol)
}

// ---------------------------------------------------------------------
// euler-flow
// ---------------------------------------------------------------------

pub struct EulerOpts {
    pub n: usize,
    pub time_steps: usize,
    pub sigma: String,
    pub bins: usize,
}

pub fn connection_from_name(name: &str) -> Result<ConnectionMap<f64>> {
    match name {
        "identity" => Ok(ConnectionMap::Identity),
        "reflect" => Ok(ConnectionMap::Reflect),
        "two-branch" => Ok(ConnectionMap::TwoBranch),
        other => Err(CliError::Usage(format!(
            "unknown connection map '{other}' (expected identity|reflect|two-branch)"
        ))),
    }
}

/// Aggregates a pair marginal over atoms into a positional grid over
/// `[0, 1]^2` (start position by row, end position by column).
pub fn bin_pair_marginal(
    pair: &Array2<f64>,
    starts: &Array1<f64>,
    ends: &Array1<f64>,
    bins: usize,
) -> Array2<f64> {
    let mut grid = Array2::zeros((bins, bins));
    let clamp = |x: f64| ((x * bins as f64) as usize).min(bins - 1);
    for i in 0..pair.nrows() {
        for j in 0..pair.ncols() {
            grid[(clamp(starts[i]), clamp(ends[j]))] += pair[(i, j)];
        }
    }
    grid
}

pub fn cmd_euler_flow(spec: &ExperimentSpec, opts: &EulerOpts) -> Result<EulerFlowSolution<f64>> {
    let sigma = connection_from_name(&opts.sigma)?;
    // particles uniform on [0, 1]
    let mut points = uniform_cloud(opts.n, 1, spec.seed);
    points.mapv_inplace(|x| x + 0.5);
    let problem =
        EulerFlowProblem::new(points.clone(), opts.time_steps, sigma).map_err(CliError::Core)?;
    let config = spec.config();
    let sol = solve_euler_flow(&problem, &config).map_err(CliError::Core)?;
    let x = points.column(0).to_owned();
    let times = problem.times();
    for (idx, pair) in sol.pair_marginals.iter().enumerate() {
        let grid = bin_pair_marginal(pair, &x, &x, opts.bins);
        write_grid_file(
            &spec
                .out_dir
                .join(format!("euler_pair_t{:.2}.dat", times[idx + 1])),
            &grid,
        )?;
    }
    if spec.emit_log {
        emit_log(&spec.out_dir.join("euler_log.dat"), &sol.circle_solution.log)?;
    }
    let worst = sol
        .circle_solution
        .residuals
        .iter()
        .fold(0.0f64, |a, &b| a.max(b));
    eprintln!("euler flow: worst marginal residual {worst:.3e}");
    Ok(sol)
}

fn emit_log(path: &Path, log: &[motsink_core::solve::IterationRow<f64>]) -> Result<()> {
    write_series_file(
        path,
        &["per-sweep iteration log".into()],
        &["sweep", "objective", "seconds"],
        &log
            .iter()
            .map(|r| vec![r.sweep as f64, r.objective, r.seconds])
            .collect::<Vec<_>>(),
    )
}

// keep the core error type in the public signature surface of this module
pub type CoreResult<T> = std::result::Result<T, CoreError>;
