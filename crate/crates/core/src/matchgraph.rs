//! The weighted matching graph whose minimum-weight perfect matchings are
//! exactly the optimal task assignments of a round.
//!
//! Construction:
//! 1. Task-less devices with no task-owning neighbour are pruned.
//! 2. Each task owner `i` gets a replica `i'` joined by an edge of weight
//!    `E_i^l` (local execution).
//! 3. Each remaining task-less device `k` gets an idle dummy `k'` joined by a
//!    zero-weight edge (stays idle).
//! 4. Owner-to-idle links weigh `E_ij^o`, owner-to-owner links weigh
//!    `E_ij^o + E_ji^o` (mutual exchange); idle-to-idle links are dropped.
//! 5. Every real link `(a, b)` is mirrored by a zero-weight edge `(a', b')`
//!    between the private mates.
//!
//! Step 5 is what makes the reduction work for *perfect* matching: when `a`
//! and `b` pair up, their mates are left over and pair with each other at no
//! cost. Any matching of the real nodes therefore extends to a perfect
//! matching of equal weight, and every perfect matching restricted to the
//! real layer is a feasible assignment.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::assignment::{Assignment, EnergyTable};
use crate::matching::{Matching, WeightedGraph};
use crate::model::DeviceId;
use crate::scalar::Scalar;
use crate::scenario::Round;

pub use crate::assignment::AssignmentCounts;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum NodeKind {
    Real,
    Replica,
    IdleDummy,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct MatchNode {
    pub kind: NodeKind,
    pub device: DeviceId,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum EdgeCase<T> {
    /// Owner with its replica.
    Local { owner: DeviceId },
    /// Owner to a task-less neighbour.
    Offload { owner: DeviceId, executor: DeviceId },
    /// Two owners swapping tasks; energies of each direction.
    Exchange { a: DeviceId, b: DeviceId, a_to_b: T, b_to_a: T },
    /// Task-less device with its dummy.
    Idle { device: DeviceId },
    /// Zero-weight link between two private mates.
    Mirror,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MatchEdge<T> {
    pub a: usize,
    pub b: usize,
    pub weight: T,
    pub case: EdgeCase<T>,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MatchGraphError {
    #[error("task owner {0} is not a device of the round")]
    UnknownOwner(DeviceId),
    #[error("device {0} owns more than one task")]
    DuplicateOwner(DeviceId),
    #[error("energy table has no entry for {owner} -> {executor}")]
    MissingEnergy { owner: DeviceId, executor: DeviceId },
    #[error("matching leaves task owner {0} uncovered")]
    Uncovered(DeviceId),
    #[error("matching references edge {0} which is not in the graph")]
    UnknownEdge(usize),
    #[error("matched edges overlap at node {0}")]
    Overlap(usize),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatchingGraph<T> {
    nodes: Vec<MatchNode>,
    edges: Vec<MatchEdge<T>>,
    /// Index of the real node of each kept device.
    real: BTreeMap<DeviceId, usize>,
    owners: Vec<DeviceId>,
}

impl<T: Scalar> MatchingGraph<T> {
    /// Graph over every D2D link of the round.
    pub fn build(round: &Round<T>, table: &EnergyTable<T>) -> Result<Self, MatchGraphError> {
        Self::build_with(round, table, false)
    }

    /// Graph over the links whose offload (or exchange) is strictly cheaper
    /// than local execution. An optimal assignment never needs the other
    /// links, since undoing such an offload costs nothing, so the minimum
    /// is unchanged while the graph gets much smaller.
    pub fn build_pruned(round: &Round<T>, table: &EnergyTable<T>) -> Result<Self, MatchGraphError> {
        Self::build_with(round, table, true)
    }

    fn build_with(round: &Round<T>, table: &EnergyTable<T>, prune: bool) -> Result<Self, MatchGraphError> {
        let n = round.devices.len();
        let mut owns = vec![false; n];
        for task in &round.tasks {
            let slot = owns.get_mut(task.owner.0).ok_or(MatchGraphError::UnknownOwner(task.owner))?;
            if round.device(task.owner).is_none() {
                return Err(MatchGraphError::UnknownOwner(task.owner));
            }
            if *slot {
                return Err(MatchGraphError::DuplicateOwner(task.owner));
            }
            *slot = true;
        }

        // missing prices are kept so the edge loop reports them
        let useful = |a: DeviceId, b: DeviceId| -> bool {
            if !prune {
                return owns[a.0] || owns[b.0];
            }
            let gain = |o: DeviceId, e: DeviceId| match (table.local(o), table.offload(o, e)) {
                (Some(l), Some(x)) => Some(l - x),
                _ => None,
            };
            match (owns[a.0], owns[b.0]) {
                (false, false) => false,
                (true, false) => gain(a, b).map_or(true, |g| g > T::zero()),
                (false, true) => gain(b, a).map_or(true, |g| g > T::zero()),
                (true, true) => match (gain(a, b), gain(b, a)) {
                    (Some(x), Some(y)) => x + y > T::zero(),
                    _ => true,
                },
            }
        };
        let kept: Vec<DeviceId> = (0..n)
            .map(DeviceId)
            .filter(|&d| owns[d.0] || round.connectivity.neighbors(d).any(|(j, _)| useful(d, j)))
            .collect();
        let k = kept.len();
        let mut nodes = Vec::with_capacity(2 * k);
        let mut real = BTreeMap::new();
        for (idx, &d) in kept.iter().enumerate() {
            nodes.push(MatchNode { kind: NodeKind::Real, device: d });
            real.insert(d, idx);
        }
        for &d in &kept {
            let kind = if owns[d.0] { NodeKind::Replica } else { NodeKind::IdleDummy };
            nodes.push(MatchNode { kind, device: d });
        }

        let mut edges = Vec::new();
        for (idx, &d) in kept.iter().enumerate() {
            let (weight, case) = if owns[d.0] {
                let w = table.local(d).ok_or(MatchGraphError::MissingEnergy { owner: d, executor: d })?;
                (w, EdgeCase::Local { owner: d })
            } else {
                (T::zero(), EdgeCase::Idle { device: d })
            };
            edges.push(MatchEdge { a: idx, b: idx + k, weight, case });

            for (j, _) in round.connectivity.neighbors(d) {
                let Some(&jdx) = real.get(&j) else { continue };
                if jdx <= idx || !useful(d, j) {
                    continue;
                }
                let missing = |owner, executor| MatchGraphError::MissingEnergy { owner, executor };
                let (weight, case) = match (owns[d.0], owns[j.0]) {
                    (false, false) => continue,
                    (true, false) => {
                        let w = table.offload(d, j).ok_or(missing(d, j))?;
                        (w, EdgeCase::Offload { owner: d, executor: j })
                    }
                    (false, true) => {
                        let w = table.offload(j, d).ok_or(missing(j, d))?;
                        (w, EdgeCase::Offload { owner: j, executor: d })
                    }
                    (true, true) => {
                        let a_to_b = table.offload(d, j).ok_or(missing(d, j))?;
                        let b_to_a = table.offload(j, d).ok_or(missing(j, d))?;
                        (a_to_b + b_to_a, EdgeCase::Exchange { a: d, b: j, a_to_b, b_to_a })
                    }
                };
                edges.push(MatchEdge { a: idx, b: jdx, weight, case });
                edges.push(MatchEdge { a: idx + k, b: jdx + k, weight: T::zero(), case: EdgeCase::Mirror });
            }
        }
        edges.sort_by_key(|e| (e.a.min(e.b), e.a.max(e.b)));

        let owners = kept.iter().copied().filter(|d| owns[d.0]).collect();
        Ok(MatchingGraph { nodes, edges, real, owners })
    }

    pub fn nodes(&self) -> &[MatchNode] {
        &self.nodes
    }

    pub fn edges(&self) -> &[MatchEdge<T>] {
        &self.edges
    }

    pub fn owners(&self) -> &[DeviceId] {
        &self.owners
    }

    pub fn is_kept(&self, d: DeviceId) -> bool {
        self.real.contains_key(&d)
    }

    /// Edges that correspond to an execution decision (everything except the
    /// idle and mirror edges).
    pub fn decision_edges(&self) -> impl Iterator<Item = (usize, &MatchEdge<T>)> {
        self.edges
            .iter()
            .enumerate()
            .filter(|(_, e)| !matches!(e.case, EdgeCase::Idle { .. } | EdgeCase::Mirror))
    }

    /// Solver input with the same node and edge numbering.
    pub fn to_weighted_graph(&self) -> WeightedGraph<T> {
        WeightedGraph::from_edges(self.nodes.len(), self.edges.iter().map(|e| (e.a, e.b, e.weight)))
            .expect("matching graph edges are simple and nonnegative")
    }

    /// Turns a matching (edge indices into this graph) into an assignment.
    /// Every task owner must be covered; the total is the sum of matched
    /// edge weights.
    pub fn decode(&self, matching: &Matching<T>) -> Result<Assignment<T>, MatchGraphError> {
        self.decode_edges(&matching.edges)
    }

    pub fn decode_edges(&self, matched: &[usize]) -> Result<Assignment<T>, MatchGraphError> {
        let mut used = vec![false; self.nodes.len()];
        let mut executors = BTreeMap::new();
        let mut energies = BTreeMap::new();
        let mut total = T::zero();
        for &k in matched {
            let e = self.edges.get(k).ok_or(MatchGraphError::UnknownEdge(k))?;
            for node in [e.a, e.b] {
                if std::mem::replace(&mut used[node], true) {
                    return Err(MatchGraphError::Overlap(node));
                }
            }
            total = total + e.weight;
            match e.case {
                EdgeCase::Local { owner } => {
                    executors.insert(owner, owner);
                    energies.insert(owner, e.weight);
                }
                EdgeCase::Offload { owner, executor } => {
                    executors.insert(owner, executor);
                    energies.insert(owner, e.weight);
                }
                EdgeCase::Exchange { a, b, a_to_b, b_to_a } => {
                    executors.insert(a, b);
                    executors.insert(b, a);
                    energies.insert(a, a_to_b);
                    energies.insert(b, b_to_a);
                }
                EdgeCase::Idle { .. } | EdgeCase::Mirror => {}
            }
        }
        if let Some(&owner) = self.owners.iter().find(|o| !executors.contains_key(o)) {
            return Err(MatchGraphError::Uncovered(owner));
        }
        Ok(Assignment { executors, energies, total })
    }
}
