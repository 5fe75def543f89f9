//! Fixed-support Wasserstein barycenters on trees.
//!
//! Leaves carry known measures with barycenter weights `w~`, internal
//! nodes carry a fixed support with free weights. Edges touching exactly
//! one leaf are weighted by that leaf's `w~`; all other edges get weight
//! one. The tree Sinkhorn runs with the kernel of edge `e` built for
//! `eta / w_e`, marginal updates applied only at leaves, and the
//! barycenter estimates read off as the final plan marginals at the
//! internal nodes.

use ndarray::{Array1, Array2};

use crate::config::SinkhornConfig;
use crate::error::{Error, Result};
use crate::graph::TreeGraph;
use crate::kernel::AutoFactory;
use crate::measure::DiscreteMeasure;
use crate::scalar::{cast, Real};
use crate::solve::SolverEvent;
use crate::tree::{solve_tree, TreeSolution};

/// Per-node payload of a barycenter instance.
pub enum BarycenterNode<T: Real> {
    /// A known input measure with its barycenter weight.
    Leaf { measure: DiscreteMeasure<T>, weight: T },
    /// Fixed support points whose weights are to be found.
    Internal { support: Array2<T> },
}

pub struct BarycenterProblem<T: Real> {
    pub tree: TreeGraph,
    nodes: Vec<BarycenterNode<T>>,
}

impl<T: Real> BarycenterProblem<T> {
    /// Validates that leaves and internal nodes line up with the tree and
    /// that the leaf weights lie in `[0, 1]` and sum to one (renormalized
    /// within the same slack as measure weights). The tree root must be a
    /// leaf so the solver's objective bookkeeping has a constrained root.
    pub fn new(tree: TreeGraph, mut nodes: Vec<BarycenterNode<T>>) -> Result<Self> {
        if nodes.len() != tree.node_count() {
            return Err(Error::InvalidParameter(format!(
                "tree has {} nodes but {} payloads were given",
                tree.node_count(),
                nodes.len()
            )));
        }
        if !tree.is_leaf(0) {
            return Err(Error::InvalidGraph(
                "root must be a leaf; relabel the tree onto one of the input measures".into(),
            ));
        }
        let mut weight_sum = T::zero();
        for (k, node) in nodes.iter().enumerate() {
            match node {
                BarycenterNode::Leaf { weight, .. } => {
                    if !tree.is_leaf(k) {
                        return Err(Error::InvalidParameter(format!(
                            "node {k} is internal but got a leaf measure"
                        )));
                    }
                    if !(*weight >= T::zero() && *weight <= T::one()) {
                        return Err(Error::InvalidParameter(format!(
                            "leaf weight of node {k} is {weight}, must be in [0, 1]"
                        )));
                    }
                    weight_sum += *weight;
                }
                BarycenterNode::Internal { support } => {
                    if tree.is_leaf(k) {
                        return Err(Error::InvalidParameter(format!(
                            "node {k} is a leaf but got a fixed support"
                        )));
                    }
                    if support.nrows() == 0 {
                        return Err(Error::InvalidParameter(format!(
                            "internal node {k} has an empty support"
                        )));
                    }
                }
            }
        }
        if (weight_sum - T::one()).abs() > cast(1e-9) {
            return Err(Error::InvalidParameter(format!(
                "leaf weights sum to {weight_sum}, expected 1"
            )));
        }
        for node in nodes.iter_mut() {
            if let BarycenterNode::Leaf { weight, .. } = node {
                *weight = *weight / weight_sum;
            }
        }
        Ok(Self { tree, nodes })
    }

    pub fn node(&self, k: usize) -> &BarycenterNode<T> {
        &self.nodes[k]
    }

    /// Edge weights in child order (`1..K`): weight one unless the edge
    /// touches exactly one leaf, in which case that leaf's barycenter
    /// weight.
    pub fn edge_weights(&self) -> Vec<T> {
        (1..self.tree.node_count())
            .map(|k| {
                let p = self.tree.parent(k);
                let leaf_end = match (self.tree.is_leaf(p), self.tree.is_leaf(k)) {
                    (true, false) => Some(p),
                    (false, true) => Some(k),
                    _ => None,
                };
                match leaf_end {
                    Some(l) => match &self.nodes[l] {
                        BarycenterNode::Leaf { weight, .. } => *weight,
                        BarycenterNode::Internal { .. } => unreachable!(),
                    },
                    None => T::one(),
                }
            })
            .collect()
    }

    /// The solver-facing measure list: leaf measures as given, internal
    /// nodes as uniform placeholders over their support.
    pub fn solver_measures(&self) -> Result<Vec<DiscreteMeasure<T>>> {
        self.nodes
            .iter()
            .map(|n| match n {
                BarycenterNode::Leaf { measure, .. } => Ok(measure.clone()),
                BarycenterNode::Internal { support } => DiscreteMeasure::uniform(support.clone()),
            })
            .collect()
    }

    pub fn constrained_flags(&self) -> Vec<bool> {
        (0..self.tree.node_count())
            .map(|k| self.tree.is_leaf(k))
            .collect()
    }
}

pub struct BarycenterSolution<T: Real> {
    /// `(node, measure)` for every internal node; weights are the final
    /// plan marginals renormalized to unit mass over the fixed support.
    pub barycenters: Vec<(usize, DiscreteMeasure<T>)>,
    /// `(leaf, residual)` marginal feasibility at the constrained nodes.
    pub leaf_residuals: Vec<(usize, T)>,
    pub tree_solution: TreeSolution<T>,
}

pub fn solve_barycenter<T: Real>(
    problem: &BarycenterProblem<T>,
    config: &SinkhornConfig<T>,
) -> Result<BarycenterSolution<T>> {
    solve_barycenter_observed(problem, config, |_| {})
}

pub fn solve_barycenter_observed<T: Real>(
    problem: &BarycenterProblem<T>,
    config: &SinkhornConfig<T>,
    observer: impl FnMut(SolverEvent<'_, T>),
) -> Result<BarycenterSolution<T>> {
    let measures = problem.solver_measures()?;
    let weights = problem.edge_weights();
    let constrained = problem.constrained_flags();
    let mut factory = AutoFactory::from_config(config, &measures)?;
    let tree_solution = solve_tree(
        &measures,
        &problem.tree,
        config,
        &mut factory,
        Some(&weights),
        Some(&constrained),
        observer,
    )?;
    let mut barycenters = Vec::new();
    let mut leaf_residuals = Vec::new();
    for k in 0..problem.tree.node_count() {
        match problem.node(k) {
            BarycenterNode::Internal { support } => {
                let marginal = &tree_solution.marginals[k];
                let total: T = marginal.sum();
                if !(total > T::zero()) || !total.is_finite() {
                    return Err(Error::NonFiniteMessage { node: k });
                }
                let weights: Array1<T> = marginal.mapv(|v| v / total);
                barycenters.push((k, DiscreteMeasure::new(support.clone(), weights)?));
            }
            BarycenterNode::Leaf { .. } => {
                leaf_residuals.push((k, tree_solution.residuals[k]));
            }
        }
    }
    Ok(BarycenterSolution {
        barycenters,
        leaf_residuals,
        tree_solution,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::SinkhornConfig;
    use ndarray::arr2;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn kl(p: &Array1<f64>, q: &Array1<f64>) -> f64 {
        p.iter()
            .zip(q.iter())
            .map(|(&a, &b)| if a > 0.0 { a * (a / b).ln() } else { 0.0 })
            .sum()
    }

    /// Chain 0 - 1 - 2 with the internal node in the middle: the two-leaf
    /// barycenter instance.
    fn two_leaf_problem(
        measure: &DiscreteMeasure<f64>,
        support: Array2<f64>,
    ) -> BarycenterProblem<f64> {
        let tree = TreeGraph::from_parents(&[0, 1]).unwrap();
        BarycenterProblem::new(
            tree,
            vec![
                BarycenterNode::Leaf {
                    measure: measure.clone(),
                    weight: 0.5,
                },
                BarycenterNode::Internal { support },
                BarycenterNode::Leaf {
                    measure: measure.clone(),
                    weight: 0.5,
                },
            ],
        )
        .unwrap()
    }

    #[test]
    fn edge_weight_rule_over_random_trees() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..20 {
            let k = rng.gen_range(3..=8);
            // rooted at a leaf: node 1 is the hub, everything hangs off it
            let mut parents = vec![0usize];
            for i in 2..k {
                parents.push(rng.gen_range(1..i));
            }
            let tree = TreeGraph::from_parents(&parents).unwrap();
            if !tree.is_leaf(0) {
                continue;
            }
            let leaves: Vec<usize> = tree.leaves().to_vec();
            let w = 1.0 / leaves.len() as f64;
            let nodes: Vec<BarycenterNode<f64>> = (0..k)
                .map(|v| {
                    if tree.is_leaf(v) {
                        BarycenterNode::Leaf {
                            measure: DiscreteMeasure::uniform(arr2(&[[0.0], [1.0]])).unwrap(),
                            weight: w,
                        }
                    } else {
                        BarycenterNode::Internal {
                            support: arr2(&[[0.5]]),
                        }
                    }
                })
                .collect();
            let problem = BarycenterProblem::new(tree.clone(), nodes).unwrap();
            let weights = problem.edge_weights();
            for child in 1..k {
                let p = tree.parent(child);
                let leaf_count =
                    usize::from(tree.is_leaf(p)) + usize::from(tree.is_leaf(child));
                let expect = if leaf_count == 1 { w } else { 1.0 };
                assert_eq!(weights[child - 1], expect);
            }
        }
    }

    #[test]
    fn identical_leaves_concentrate_the_barycenter_near_them() {
        let pts = arr2(&[[0.0], [0.35], [0.7], [1.0]]);
        let w = Array1::from(vec![0.4, 0.3, 0.2, 0.1]);
        let leaf = DiscreteMeasure::new(pts.clone(), w).unwrap();
        let problem = two_leaf_problem(&leaf, pts.clone());
        let config = SinkhornConfig::new(0.05, 1e-12).with_max_iterations(4000);
        let sol = solve_barycenter(&problem, &config).unwrap();
        for &(_, r) in &sol.leaf_residuals {
            assert!(r < 1e-6, "leaf residual {r:e}");
        }
        let bary = &sol.barycenters[0].1;
        let uniform = Array1::from_elem(4, 0.25);
        let bw = bary.weights().to_owned();
        let lw = leaf.weights().to_owned();
        assert!(
            kl(&bw, &lw) < kl(&uniform, &lw),
            "barycenter {bw:?} further from the input than uniform"
        );
    }

    #[test]
    fn zero_weight_leaf_is_allowed_and_ignored_geometrically() {
        let a = DiscreteMeasure::uniform(arr2(&[[0.0], [0.1]])).unwrap();
        let b = DiscreteMeasure::uniform(arr2(&[[5.0], [5.1]])).unwrap();
        let tree = TreeGraph::from_parents(&[0, 1]).unwrap();
        let problem = BarycenterProblem::new(
            tree,
            vec![
                BarycenterNode::Leaf { measure: a.clone(), weight: 1.0 },
                BarycenterNode::Internal { support: a.points().to_owned() },
                BarycenterNode::Leaf { measure: b, weight: 0.0 },
            ],
        )
        .unwrap();
        assert_eq!(problem.edge_weights(), vec![1.0, 0.0]);
        let config = SinkhornConfig::new(0.1, 1e-10).with_max_iterations(500);
        let sol = solve_barycenter(&problem, &config).unwrap();
        // the weighted-out leaf contributes a constant kernel, so the run
        // must still satisfy the first leaf's constraint
        assert!(sol.leaf_residuals.iter().all(|&(_, r)| r < 1e-6));
    }

    #[test]
    fn weighted_kernel_identity() {
        // exp(-w d^2 / eta) must equal exp(-d^2/eta)^w entrywise
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let eta = 0.3f64;
        for _ in 0..50 {
            let d2: f64 = rng.gen::<f64>() * 2.0;
            let w: f64 = rng.gen();
            let direct = (-w * d2 / eta).exp();
            let powered = (-d2 / eta).exp().powf(w);
            assert!((direct / powered - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn rejects_malformed_problems() {
        let leaf = DiscreteMeasure::uniform(arr2(&[[0.0]])).unwrap();
        let tree = TreeGraph::from_parents(&[0, 1]).unwrap();
        // empty internal support
        assert!(BarycenterProblem::new(
            tree.clone(),
            vec![
                BarycenterNode::Leaf { measure: leaf.clone(), weight: 0.5 },
                BarycenterNode::Internal { support: Array2::zeros((0, 1)) },
                BarycenterNode::Leaf { measure: leaf.clone(), weight: 0.5 },
            ],
        )
        .is_err());
        // weights not summing to one
        assert!(BarycenterProblem::new(
            tree.clone(),
            vec![
                BarycenterNode::Leaf { measure: leaf.clone(), weight: 0.5 },
                BarycenterNode::Internal { support: arr2(&[[0.0]]) },
                BarycenterNode::Leaf { measure: leaf.clone(), weight: 0.1 },
            ],
        )
        .is_err());
        // internal payload on a leaf node
        assert!(BarycenterProblem::new(
            tree,
            vec![
                BarycenterNode::Leaf { measure: leaf.clone(), weight: 1.0 },
                BarycenterNode::Leaf { measure: leaf, weight: 0.0 },
                BarycenterNode::Internal { support: arr2(&[[0.0]]) },
            ],
        )
        .is_err());
    }
}
