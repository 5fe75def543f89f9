//! Cost-decoupling graphs: rooted trees and cycles.
//!
//! Nodes are indexed `0..K` with node `0` as the tree root; every non-root
//! node has a parent with a smaller index, which makes the message
//! recursions purely index-ordered.

use crate::error::{Error, Result};

/// A rooted tree on `K >= 2` nodes with `parent[k] < k` for all `k >= 1`.
#[derive(Debug, Clone)]
pub struct TreeGraph {
    /// `parent[k]` for `k = 1..K`; entry `k-1` is the parent of node `k`.
    parent: Vec<usize>,
    children: Vec<Vec<usize>>,
    neighbors: Vec<Vec<usize>>,
    leaves: Vec<usize>,
}

impl TreeGraph {
    /// Builds a tree from parent pointers; `parent[k-1]` is the parent of
    /// node `k` and must satisfy `parent[k-1] < k`.
    pub fn from_parents(parent: &[usize]) -> Result<Self> {
        let k = parent.len() + 1;
        if k < 2 {
            return Err(Error::InvalidGraph("a tree needs at least 2 nodes".into()));
        }
        for (i, &p) in parent.iter().enumerate() {
            let node = i + 1;
            if p >= node {
                return Err(Error::InvalidGraph(format!(
                    "parent of node {node} is {p}, but parents must have smaller index"
                )));
            }
        }
        let mut children = vec![Vec::new(); k];
        let mut neighbors = vec![Vec::new(); k];
        for (i, &p) in parent.iter().enumerate() {
            let node = i + 1;
            children[p].push(node);
            neighbors[p].push(node);
            neighbors[node].push(p);
        }
        // parent pointers with p(k) < k always describe a connected acyclic
        // graph with K-1 edges, so only leaf detection remains
        let leaves = (0..k).filter(|&v| neighbors[v].len() == 1).collect();
        Ok(Self {
            parent: parent.to_vec(),
            children,
            neighbors,
            leaves,
        })
    }

    /// Builds a tree from an arbitrary undirected edge list, relabeling the
    /// nodes (breadth-first from `root`) so that every parent has a smaller
    /// index. Returns the tree together with the relabeling permutation:
    /// `perm[old] = new`.
    pub fn from_edges(node_count: usize, edges: &[(usize, usize)], root: usize) -> Result<(Self, Vec<usize>)> {
        if node_count < 2 {
            return Err(Error::InvalidGraph("a tree needs at least 2 nodes".into()));
        }
        if edges.len() != node_count - 1 {
            return Err(Error::InvalidGraph(format!(
                "a tree on {node_count} nodes has {} edges, got {}",
                node_count - 1,
                edges.len()
            )));
        }
        if root >= node_count {
            return Err(Error::InvalidGraph(format!("root {root} out of range")));
        }
        let mut adj = vec![Vec::new(); node_count];
        for &(a, b) in edges {
            if a >= node_count || b >= node_count || a == b {
                return Err(Error::InvalidGraph(format!("bad edge ({a}, {b})")));
            }
            adj[a].push(b);
            adj[b].push(a);
        }
        let mut perm = vec![usize::MAX; node_count];
        let mut parent_new = vec![0usize; node_count - 1];
        let mut queue = std::collections::VecDeque::from([root]);
        perm[root] = 0;
        let mut next = 1;
        while let Some(v) = queue.pop_front() {
            for &w in &adj[v] {
                if perm[w] == usize::MAX {
                    perm[w] = next;
                    parent_new[next - 1] = perm[v];
                    next += 1;
                    queue.push_back(w);
                }
            }
        }
        if next != node_count {
            return Err(Error::InvalidGraph("graph is not connected".into()));
        }
        Ok((Self::from_parents(&parent_new)?, perm))
    }

    /// A path graph `0 - 1 - ... - K-1`.
    pub fn chain(node_count: usize) -> Result<Self> {
        if node_count < 2 {
            return Err(Error::InvalidGraph("a tree needs at least 2 nodes".into()));
        }
        Self::from_parents(&(0..node_count - 1).collect::<Vec<_>>())
    }

    /// A star with node 0 in the center and `node_count - 1` leaves.
    pub fn star(node_count: usize) -> Result<Self> {
        if node_count < 2 {
            return Err(Error::InvalidGraph("a tree needs at least 2 nodes".into()));
        }
        Self::from_parents(&vec![0; node_count - 1])
    }

    pub fn node_count(&self) -> usize {
        self.parent.len() + 1
    }

    /// Parent of a non-root node.
    pub fn parent(&self, k: usize) -> usize {
        debug_assert!(k >= 1);
        self.parent[k - 1]
    }

    pub fn children(&self, k: usize) -> &[usize] {
        &self.children[k]
    }

    pub fn neighbors(&self, k: usize) -> &[usize] {
        &self.neighbors[k]
    }

    pub fn leaves(&self) -> &[usize] {
        &self.leaves
    }

    pub fn is_leaf(&self, k: usize) -> bool {
        self.neighbors[k].len() == 1
    }

    /// Edges as (parent, child) pairs.
    pub fn edges(&self) -> Vec<(usize, usize)> {
        (1..self.node_count()).map(|k| (self.parent(k), k)).collect()
    }

    /// Ancestors of `k` (its parent chain up to the root), excluding `k`.
    pub fn ancestors(&self, k: usize) -> Vec<usize> {
        let mut out = Vec::new();
        let mut v = k;
        while v != 0 {
            v = self.parent(v);
            out.push(v);
        }
        out
    }
}

/// A cycle `0 - 1 - ... - K-1 - 0` on `K >= 3` nodes.
#[derive(Debug, Clone, Copy)]
pub struct CircleGraph {
    node_count: usize,
}

impl CircleGraph {
    pub fn new(node_count: usize) -> Result<Self> {
        if node_count < 3 {
            // K = 2 would duplicate the single edge; use the tree solver
            return Err(Error::InvalidGraph(format!(
                "a circle needs at least 3 nodes, got {node_count}"
            )));
        }
        Ok(Self { node_count })
    }

    pub fn node_count(&self) -> usize {
        self.node_count
    }

    pub fn next(&self, k: usize) -> usize {
        (k + 1) % self.node_count
    }

    pub fn prev(&self, k: usize) -> usize {
        (k + self.node_count - 1) % self.node_count
    }

    /// Directed circular distance from `k1` to `k2`.
    pub fn distance(&self, k1: usize, k2: usize) -> usize {
        if k2 >= k1 {
            k2 - k1
        } else {
            self.node_count - k1 + k2
        }
    }

    /// Edges `(k, k+1 mod K)`.
    pub fn edges(&self) -> Vec<(usize, usize)> {
        (0..self.node_count).map(|k| (k, self.next(k))).collect()
    }
}

/// Either supported decoupling structure.
#[derive(Debug, Clone)]
pub enum CostGraph {
    Tree(TreeGraph),
    Circle(CircleGraph),
}

impl CostGraph {
    pub fn node_count(&self) -> usize {
        match self {
            CostGraph::Tree(t) => t.node_count(),
            CostGraph::Circle(c) => c.node_count(),
        }
    }

    pub fn edges(&self) -> Vec<(usize, usize)> {
        match self {
            CostGraph::Tree(t) => t.edges(),
            CostGraph::Circle(c) => c.edges(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_forward_parents() {
        assert!(TreeGraph::from_parents(&[0, 3]).is_err());
    }

    #[test]
    fn star_chain_structure() {
        let star = TreeGraph::star(4).unwrap();
        assert_eq!(star.children(0), &[1, 2, 3]);
        assert_eq!(star.leaves(), &[1, 2, 3]);
        let chain = TreeGraph::chain(4).unwrap();
        assert_eq!(chain.leaves(), &[0, 3]);
        assert_eq!(chain.parent(3), 2);
        assert_eq!(chain.ancestors(3), vec![2, 1, 0]);
    }

    #[test]
    fn relabeling_orders_parents() {
        // path 2 - 0 - 1 rooted at 2: relabel so parents precede children
        let (t, perm) = TreeGraph::from_edges(3, &[(2, 0), (0, 1)], 2).unwrap();
        assert_eq!(perm[2], 0);
        assert_eq!(t.parent(1), 0);
        assert_eq!(t.parent(2), 1);
        // disconnected graph is rejected
        assert!(TreeGraph::from_edges(4, &[(0, 1), (2, 3), (1, 0)], 0).is_err());
    }

    #[test]
    fn circular_distance_matches_definition() {
        let c = CircleGraph::new(5).unwrap();
        assert_eq!(c.distance(1, 3), 2);
        assert_eq!(c.distance(3, 1), 3);
        for k1 in 0..5 {
            for k2 in 0..5 {
                assert!(c.distance(k1, k2) <= 4);
            }
        }
        assert!(CircleGraph::new(2).is_err());
    }
}
