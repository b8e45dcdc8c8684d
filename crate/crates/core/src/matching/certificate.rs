use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{Matching, WeightedGraph};
use crate::scalar::Scalar;

/// Dual variable of one odd vertex set (a blossom).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OddSetDual<T> {
    pub members: Vec<usize>,
    pub value: T,
}

/// Optimality certificate for a minimum-weight perfect matching.
///
/// The primal LP is `min Σ w x` subject to `x(δ(v)) = 1` for every vertex,
/// `x(E(B)) <= (|B| - 1) / 2` for every odd set `B`, and `x >= 0`. Its dual
/// has a free potential `y_v` per vertex and `z_B >= 0` per odd set, with the
/// constraint `y_u + y_v - Σ_{B ⊇ {u,v}} z_B <= w_uv` on every edge.
/// A perfect matching is optimal iff some dual solution is feasible, every
/// matched edge is tight and every set with `z_B > 0` is full.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DualCertificate<T> {
    pub vertex_potentials: Vec<T>,
    pub odd_sets: Vec<OddSetDual<T>>,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CertificateError {
    #[error("certificate covers {got} vertices, graph has {expected}")]
    SizeMismatch { expected: usize, got: usize },
    #[error("matching is not perfect (vertex {0} unmatched or matched twice)")]
    NotPerfect(usize),
    #[error("matching references unknown edge {0}")]
    UnknownEdge(usize),
    #[error("dual constraint violated on edge {edge} by {violation}")]
    Infeasible { edge: usize, violation: f64 },
    #[error("matched edge {edge} is not tight (reduced cost {reduced})")]
    NotTight { edge: usize, reduced: f64 },
    #[error("odd set {index} has negative dual {value}")]
    NegativeOddSet { index: usize, value: f64 },
    #[error("odd set {index} has even or trivial size {size}")]
    NotOdd { index: usize, size: usize },
    #[error("odd set {index} has positive dual but only {inside} of {needed} matched edges inside")]
    NotFull { index: usize, inside: usize, needed: usize },
    #[error("duality gap {gap} exceeds tolerance")]
    Gap { gap: f64 },
}

impl<T: Scalar> DualCertificate<T> {
    /// Dual objective `Σ y_v - Σ z_B (|B| - 1) / 2`.
    pub fn dual_objective(&self) -> T {
        let vertices: T = self.vertex_potentials.iter().copied().sum();
        let sets: T = self
            .odd_sets
            .iter()
            .map(|s| s.value * T::of(((s.members.len() - 1) / 2) as f64))
            .sum();
        vertices - sets
    }

    /// Checks the certificate with the scalar's default tolerance, relative
    /// to the largest edge weight.
    pub fn verify(&self, graph: &WeightedGraph<T>, matching: &Matching<T>) -> Result<(), CertificateError> {
        self.verify_with_tolerance(graph, matching, T::tight_eps())
    }

    pub fn verify_with_tolerance(
        &self,
        graph: &WeightedGraph<T>,
        matching: &Matching<T>,
        tol: T,
    ) -> Result<(), CertificateError> {
        let n = graph.node_count();
        if self.vertex_potentials.len() != n {
            return Err(CertificateError::SizeMismatch { expected: n, got: self.vertex_potentials.len() });
        }
        let tol = tol * T::one().max(graph.max_weight());

        let mut cover = vec![0usize; n];
        let mut matched = vec![false; graph.edges().len()];
        for &k in &matching.edges {
            let e = graph.edges().get(k).ok_or(CertificateError::UnknownEdge(k))?;
            cover[e.u] += 1;
            cover[e.v] += 1;
            matched[k] = true;
        }
        if let Some(v) = cover.iter().position(|&c| c != 1) {
            return Err(CertificateError::NotPerfect(v));
        }

        // sets containing each vertex, for summing z over sets holding both ends
        let mut containing: Vec<Vec<usize>> = vec![Vec::new(); n];
        for (index, set) in self.odd_sets.iter().enumerate() {
            if set.members.len() < 3 || set.members.len() % 2 == 0 {
                return Err(CertificateError::NotOdd { index, size: set.members.len() });
            }
            if set.value < -tol {
                return Err(CertificateError::NegativeOddSet { index, value: set.value.to_f64_lossy() });
            }
            for &v in &set.members {
                containing[v].push(index);
            }
        }

        let mut inside = vec![0usize; self.odd_sets.len()];
        for (k, e) in graph.edges().iter().enumerate() {
            let mut shared = T::zero();
            for &s in &containing[e.u] {
                if containing[e.v].contains(&s) {
                    shared = shared + self.odd_sets[s].value;
                    if matched[k] {
                        inside[s] += 1;
                    }
                }
            }
            let reduced = e.weight - self.vertex_potentials[e.u] - self.vertex_potentials[e.v] + shared;
            if reduced < -tol {
                return Err(CertificateError::Infeasible { edge: k, violation: (-reduced).to_f64_lossy() });
            }
            if matched[k] && reduced > tol {
                return Err(CertificateError::NotTight { edge: k, reduced: reduced.to_f64_lossy() });
            }
        }

        for (index, set) in self.odd_sets.iter().enumerate() {
            let needed = (set.members.len() - 1) / 2;
            if set.value > tol && inside[index] != needed {
                return Err(CertificateError::NotFull { index, inside: inside[index], needed });
            }
        }

        let gap = (matching.weight - self.dual_objective()).abs();
        if gap > tol * T::of((n.max(1)) as f64) {
            return Err(CertificateError::Gap { gap: gap.to_f64_lossy() });
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn square() -> WeightedGraph<f64> {
        WeightedGraph::from_edges(4, [(0, 1, 1.0), (1, 2, 2.0), (2, 3, 1.0), (3, 0, 2.0)]).unwrap()
    }

    #[test]
    fn hand_built_certificate() {
        let g = square();
        let m = Matching::from_edge_indices(&g, vec![0, 2]).unwrap();
        let cert = DualCertificate { vertex_potentials: vec![0.5; 4], odd_sets: vec![] };
        cert.verify(&g, &m).unwrap();
    }

    #[test]
    fn detects_suboptimal_matching() {
        let g = square();
        let m = Matching::from_edge_indices(&g, vec![1, 3]).unwrap();
        // tight on the heavy edges, so the light ones become infeasible
        let cert = DualCertificate { vertex_potentials: vec![1.0; 4], odd_sets: vec![] };
        assert!(matches!(cert.verify(&g, &m), Err(CertificateError::Infeasible { .. })));
        let cert = DualCertificate { vertex_potentials: vec![0.5; 4], odd_sets: vec![] };
        assert!(matches!(cert.verify(&g, &m), Err(CertificateError::NotTight { .. })));
    }

    #[test]
    fn detects_imperfect_matching() {
        let g = square();
        let m = Matching::from_edge_indices(&g, vec![0]).unwrap();
        let cert = DualCertificate { vertex_potentials: vec![0.5; 4], odd_sets: vec![] };
        assert_eq!(cert.verify(&g, &m), Err(CertificateError::NotPerfect(2)));
    }

    #[test]
    fn rejects_malformed_odd_sets() {
        let g = square();
        let m = Matching::from_edge_indices(&g, vec![0, 2]).unwrap();
        let cert = DualCertificate {
            vertex_potentials: vec![0.5; 4],
            odd_sets: vec![OddSetDual { members: vec![0, 1], value: 0.0 }],
        };
        assert!(matches!(cert.verify(&g, &m), Err(CertificateError::NotOdd { .. })));
        let cert = DualCertificate {
            vertex_potentials: vec![0.5; 4],
            odd_sets: vec![OddSetDual { members: vec![0, 1, 2], value: -1.0 }],
        };
        assert!(matches!(cert.verify(&g, &m), Err(CertificateError::NegativeOddSet { .. })));
    }
}
