//! Task assignments, the per-round energy table they are priced with, and the
//! feasibility rules every assignment must obey.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{local_energy, offload_energy, DeviceId, ModelError};
use crate::scalar::Scalar;
use crate::scenario::Round;

/// Local and offloaded execution energies of every task owner in a round.
#[derive(Debug, Clone, PartialEq)]
pub struct EnergyTable<T> {
    local: BTreeMap<DeviceId, T>,
    /// owner -> (executor -> E^o)
    offload: BTreeMap<DeviceId, BTreeMap<DeviceId, T>>,
}

impl<T: Scalar> EnergyTable<T> {
    /// Prices local execution for every owner and offloading to every D2D
    /// neighbour.
    pub fn compute(round: &Round<T>) -> Result<Self, ModelError> {
        let mut local = BTreeMap::new();
        let mut offload = BTreeMap::new();
        for task in &round.tasks {
            let owner = round
                .device(task.owner)
                .ok_or(ModelError::InvalidTask(task.owner, "owner is not a device of this round"))?;
            local.insert(task.owner, local_energy(owner, task)?.total);
            let mut row = BTreeMap::new();
            for (j, rate_ij) in round.connectivity.neighbors(task.owner) {
                let executor = round.device(j).ok_or(ModelError::InvalidDevice(j, "unknown neighbour"))?;
                let rate_ji = round.connectivity.rate(j, task.owner).unwrap_or(rate_ij);
                row.insert(j, offload_energy(owner, executor, task, rate_ij, rate_ji)?.total);
            }
            offload.insert(task.owner, row);
        }
        Ok(EnergyTable { local, offload })
    }

    pub fn local(&self, owner: DeviceId) -> Option<T> {
        self.local.get(&owner).copied()
    }

    pub fn offload(&self, owner: DeviceId, executor: DeviceId) -> Option<T> {
        self.offload.get(&owner)?.get(&executor).copied()
    }

    /// Energy of `owner`'s task when run on `executor` (itself for local).
    pub fn cost(&self, owner: DeviceId, executor: DeviceId) -> Option<T> {
        if owner == executor {
            self.local(owner)
        } else {
            self.offload(owner, executor)
        }
    }

    pub fn owners(&self) -> impl Iterator<Item = DeviceId> + '_ {
        self.local.keys().copied()
    }

    pub fn all_local_total(&self) -> T {
        self.local.values().copied().sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct AssignmentCounts {
    pub local: usize,
    /// Owners whose task runs on a task-less device.
    pub offload: usize,
    /// Pairs of owners that swap tasks.
    pub exchange: usize,
}

/// Which device executes each task (`owner -> executor`, the owner itself
/// for local execution) and the resulting energy.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Assignment<T> {
    pub executors: BTreeMap<DeviceId, DeviceId>,
    pub energies: BTreeMap<DeviceId, T>,
    pub total: T,
}

impl<T: Scalar> Assignment<T> {
    pub fn empty() -> Self {
        Assignment { executors: BTreeMap::new(), energies: BTreeMap::new(), total: T::zero() }
    }

    /// Prices an executor map with `table`. Fails if some pair has no price
    /// (no D2D link or not a task owner).
    pub fn priced(executors: BTreeMap<DeviceId, DeviceId>, table: &EnergyTable<T>) -> Result<Self, ConstraintViolation> {
        let mut energies = BTreeMap::new();
        for (&owner, &exec) in &executors {
            let e = table.cost(owner, exec).ok_or(ConstraintViolation::NoLink { owner, executor: exec })?;
            energies.insert(owner, e);
        }
        let total = energies.values().copied().sum();
        Ok(Assignment { executors, energies, total })
    }

    pub fn all_local(table: &EnergyTable<T>) -> Self {
        let executors = table.owners().map(|o| (o, o)).collect();
        Assignment::priced(executors, table).expect("local execution is always priced")
    }

    pub fn executor_of(&self, owner: DeviceId) -> Option<DeviceId> {
        self.executors.get(&owner).copied()
    }

    pub fn counts(&self) -> AssignmentCounts {
        let mut c = AssignmentCounts::default();
        for (&owner, &exec) in &self.executors {
            if owner == exec {
                c.local += 1;
            } else if self.executors.get(&exec) == Some(&owner) {
                if owner < exec {
                    c.exchange += 1;
                }
            } else {
                c.offload += 1;
            }
        }
        c
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ConstraintViolation {
    #[error("{owner} offloads to {executor} without a D2D link")]
    NoLink { owner: DeviceId, executor: DeviceId },
    #[error("task of {0} is not assigned")]
    Unassigned(DeviceId),
    #[error("{0} has no task but appears as an owner")]
    PhantomTask(DeviceId),
    #[error("{0} is not a device of this round")]
    UnknownDevice(DeviceId),
    #[error("{executor} executes more than one task ({first} and {second})")]
    Overloaded { executor: DeviceId, first: DeviceId, second: DeviceId },
    #[error("{owner} offloads to task owner {executor} who does not offload back")]
    NotMutual { owner: DeviceId, executor: DeviceId },
    #[error("stored total {stored} differs from recomputed {recomputed}")]
    TotalMismatch { stored: f64, recomputed: f64 },
}

/// Checks the assignment rules: offloads follow D2D links, every task is
/// assigned exactly once, no device runs two tasks, and two owners can only
/// be paired by swapping tasks. Decisions are binary by construction.
pub fn check_feasibility<T: Scalar>(round: &Round<T>, assignment: &Assignment<T>) -> Result<(), ConstraintViolation> {
    for task in &round.tasks {
        if !assignment.executors.contains_key(&task.owner) {
            return Err(ConstraintViolation::Unassigned(task.owner));
        }
    }
    let mut executed_by: BTreeMap<DeviceId, DeviceId> = BTreeMap::new();
    for (&owner, &exec) in &assignment.executors {
        if !round.owns_task(owner) {
            return Err(ConstraintViolation::PhantomTask(owner));
        }
        if round.device(exec).is_none() {
            return Err(ConstraintViolation::UnknownDevice(exec));
        }
        if owner != exec && !round.connectivity.has_edge(owner, exec) {
            return Err(ConstraintViolation::NoLink { owner, executor: exec });
        }
        if let Some(first) = executed_by.insert(exec, owner) {
            return Err(ConstraintViolation::Overloaded { executor: exec, first, second: owner });
        }
        if owner != exec && round.owns_task(exec) && assignment.executors.get(&exec) != Some(&owner) {
            return Err(ConstraintViolation::NotMutual { owner, executor: exec });
        }
    }
    Ok(())
}

/// Total energy of the assignment recomputed from the energy table.
pub fn objective<T: Scalar>(table: &EnergyTable<T>, assignment: &Assignment<T>) -> Result<T, ConstraintViolation> {
    assignment
        .executors
        .iter()
        .map(|(&o, &e)| table.cost(o, e).ok_or(ConstraintViolation::NoLink { owner: o, executor: e }))
        .sum()
}

/// Feasibility plus agreement of the stored total with the recomputed
/// objective, to relative tolerance `tol`.
pub fn check_assignment<T: Scalar>(
    round: &Round<T>,
    table: &EnergyTable<T>,
    assignment: &Assignment<T>,
    tol: T,
) -> Result<(), ConstraintViolation> {
    check_feasibility(round, assignment)?;
    let recomputed = objective(table, assignment)?;
    if !crate::scalar::approx_eq_rel(recomputed, assignment.total, tol) {
        return Err(ConstraintViolation::TotalMismatch {
            stored: assignment.total.to_f64_lossy(),
            recomputed: recomputed.to_f64_lossy(),
        });
    }
    Ok(())
}

/// Energy saving relative to all-local execution, `1 - scheme / all_local`.
/// Zero when there is nothing to save (no tasks).
pub fn saving_ratio<T: Scalar>(scheme: T, all_local: T) -> T {
    if all_local <= T::zero() {
        T::zero()
    } else {
        T::one() - scheme / all_local
    }
}

#[cfg(test)]
pub(crate) mod fixtures {
    use crate::model::{DeviceProfile, Position, Task, TaskKind};
    use crate::scenario::ConnectivityGraph;

    use super::*;

    pub fn device(id: usize, load: f64, cellular_rate: f64) -> DeviceProfile<f64> {
        DeviceProfile {
            id: DeviceId(id),
            cpu_capacity: 2e9,
            load,
            compute_power: 0.9,
            cellular_tx_power: 0.6,
            cellular_rate,
            d2d_tx_power: 0.2,
            d2d_rx_power: 0.2,
            position: Position::new(0.0, 0.0),
        }
    }

    pub fn cpu_task(owner: usize, input: f64) -> Task<f64> {
        Task {
            owner: DeviceId(owner),
            input_size: input,
            cpu_cycles: 3000.0 * input,
            output_size: 0.2 * input,
            cellular_traffic: 0.0,
            kind: TaskKind::PureCpu,
        }
    }

    pub fn cell_task(owner: usize, input: f64) -> Task<f64> {
        Task {
            owner: DeviceId(owner),
            input_size: input,
            cpu_cycles: 0.0,
            output_size: 0.0,
            cellular_traffic: input,
            kind: TaskKind::PureCellular,
        }
    }

    /// Round over `devices` with the given links at 50 Mbit/s.
    pub fn round(devices: Vec<DeviceProfile<f64>>, tasks: Vec<Task<f64>>, links: &[(usize, usize)]) -> Round<f64> {
        let mut g = ConnectivityGraph::new(devices.len());
        for &(a, b) in links {
            g.add_edge(DeviceId(a), DeviceId(b), 5e7).unwrap();
        }
        let mut tasks = tasks;
        tasks.sort_by_key(|t| t.owner);
        Round { devices, tasks, connectivity: g }
    }
}
