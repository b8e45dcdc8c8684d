//! Minimum-weight perfect matching on general graphs.
//!
//! [`min_weight_perfect_matching`] runs a primal-dual Edmonds blossom solver
//! and returns the matching together with an LP dual certificate that can be
//! checked independently of the solver. [`brute_force_min_matching`] is an
//! exhaustive oracle for small graphs.

mod blossom;
mod brute;
mod certificate;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::scalar::Scalar;

pub use blossom::BlossomSolver;
pub use brute::{brute_force_min_matching, BRUTE_FORCE_NODE_CAP};
pub use certificate::{CertificateError, DualCertificate, OddSetDual};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MatchingError {
    #[error("graph has no perfect matching")]
    Infeasible,
    #[error("graph has {nodes} nodes, exhaustive search is capped at {cap}")]
    TooLarge { nodes: usize, cap: usize },
    #[error("edge ({0}, {1}) is a self-loop")]
    SelfLoop(usize, usize),
    #[error("edge ({0}, {1}) appears twice")]
    DuplicateEdge(usize, usize),
    #[error("edge ({0}, {1}) references a node outside 0..{2}")]
    NodeOutOfRange(usize, usize, usize),
    #[error("edge ({0}, {1}) has a negative or non-finite weight")]
    BadWeight(usize, usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WeightedEdge<T> {
    pub u: usize,
    pub v: usize,
    pub weight: T,
}

/// Undirected graph with finite nonnegative edge weights, no self-loops and no
/// parallel edges.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightedGraph<T> {
    node_count: usize,
    edges: Vec<WeightedEdge<T>>,
    #[serde(skip)]
    seen: std::collections::HashSet<(usize, usize)>,
}

impl<T: Scalar> WeightedGraph<T> {
    pub fn new(node_count: usize) -> Self {
        WeightedGraph { node_count, edges: Vec::new(), seen: Default::default() }
    }

    pub fn from_edges(node_count: usize, edges: impl IntoIterator<Item = (usize, usize, T)>) -> Result<Self, MatchingError> {
        let mut g = WeightedGraph::new(node_count);
        for (u, v, w) in edges {
            g.add_edge(u, v, w)?;
        }
        Ok(g)
    }

    pub fn add_edge(&mut self, u: usize, v: usize, weight: T) -> Result<usize, MatchingError> {
        if u == v {
            return Err(MatchingError::SelfLoop(u, v));
        }
        if u >= self.node_count || v >= self.node_count {
            return Err(MatchingError::NodeOutOfRange(u, v, self.node_count));
        }
        if !weight.is_finite() || weight < T::zero() {
            return Err(MatchingError::BadWeight(u, v));
        }
        if !self.seen.insert((u.min(v), u.max(v))) {
            return Err(MatchingError::DuplicateEdge(u, v));
        }
        self.edges.push(WeightedEdge { u, v, weight });
        Ok(self.edges.len() - 1)
    }

    pub fn node_count(&self) -> usize {
        self.node_count
    }

    pub fn edges(&self) -> &[WeightedEdge<T>] {
        &self.edges
    }

    pub fn max_weight(&self) -> T {
        self.edges.iter().fold(T::zero(), |m, e| m.max(e.weight))
    }

    /// Returns a copy with every weight multiplied by `k`.
    pub fn scaled(&self, k: T) -> Self {
        let mut g = self.clone();
        for e in &mut g.edges {
            e.weight = e.weight * k;
        }
        g
    }
}

/// A set of vertex-disjoint edges, stored as indices into the graph's edge
/// list, plus the mate of every vertex.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Matching<T> {
    pub edges: Vec<usize>,
    pub mate: Vec<Option<usize>>,
    pub weight: T,
}

impl<T: Scalar> Matching<T> {
    /// Builds a matching from edge indices, rejecting shared vertices.
    pub fn from_edge_indices(graph: &WeightedGraph<T>, mut edges: Vec<usize>) -> Option<Self> {
        edges.sort_unstable();
        let mut mate = vec![None; graph.node_count()];
        let mut weight = T::zero();
        for &k in &edges {
            let e = graph.edges().get(k)?;
            if mate[e.u].is_some() || mate[e.v].is_some() {
                return None;
            }
            mate[e.u] = Some(e.v);
            mate[e.v] = Some(e.u);
            weight = weight + e.weight;
        }
        Some(Matching { edges, mate, weight })
    }

    pub fn is_perfect(&self) -> bool {
        self.mate.iter().all(Option::is_some)
    }

    pub fn len(&self) -> usize {
        self.edges.len()
    }

    pub fn is_empty(&self) -> bool {
        self.edges.is_empty()
    }
}

/// Minimum-weight perfect matching via the blossom algorithm.
pub fn min_weight_perfect_matching<T: Scalar>(graph: &WeightedGraph<T>) -> Result<Matching<T>, MatchingError> {
    let mut solver = BlossomSolver::new(graph);
    solver.solve()?;
    Ok(solver.matching())
}

/// Like [`min_weight_perfect_matching`] but also returns the dual certificate.
pub fn min_weight_perfect_matching_certified<T: Scalar>(
    graph: &WeightedGraph<T>,
) -> Result<(Matching<T>, DualCertificate<T>), MatchingError> {
    let mut solver = BlossomSolver::new(graph);
    solver.solve()?;
    Ok((solver.matching(), solver.certificate()))
}
