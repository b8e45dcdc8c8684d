//! Device and task domain types together with the closed-form execution
//! time and energy formulas for local and D2D-offloaded execution.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::scalar::Scalar;

/// Identifier of a device in a round. Devices are numbered densely from 0.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct DeviceId(pub usize);

impl fmt::Display for DeviceId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Position<T> {
    pub x: T,
    pub y: T,
}

impl<T: Scalar> Position<T> {
    pub fn new(x: T, y: T) -> Self {
        Position { x, y }
    }

    pub fn distance(&self, other: &Position<T>) -> T {
        (self.x - other.x).hypot(self.y - other.y)
    }
}

/// Compute, cellular and D2D capabilities of one device.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeviceProfile<T> {
    pub id: DeviceId,
    /// Z, CPU frequency in cycles per second.
    pub cpu_capacity: T,
    /// δ, fraction of the CPU occupied by background load.
    pub load: T,
    /// ρ^c, power drawn while computing (W).
    pub compute_power: T,
    /// P^b, cellular transmit power (W).
    pub cellular_tx_power: T,
    /// D, average cellular rate (bit/s).
    pub cellular_rate: T,
    /// P^d, D2D transmit power (W).
    pub d2d_tx_power: T,
    /// P^r, D2D receive power (W).
    pub d2d_rx_power: T,
    pub position: Position<T>,
}

impl<T: Scalar> DeviceProfile<T> {
    /// Available processing capacity `(1 - δ) Z`.
    pub fn available_capacity(&self) -> T {
        ((T::one() - self.load) * self.cpu_capacity).max(T::zero())
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        let finite = [
            self.cpu_capacity,
            self.load,
            self.compute_power,
            self.cellular_tx_power,
            self.cellular_rate,
            self.d2d_tx_power,
            self.d2d_rx_power,
            self.position.x,
            self.position.y,
        ]
        .iter()
        .all(|v| v.is_finite());
        if !finite {
            return Err(ModelError::InvalidDevice(self.id, "non-finite field"));
        }
        if self.load < T::zero() || self.load > T::one() {
            return Err(ModelError::InvalidDevice(self.id, "load outside [0, 1]"));
        }
        if self.cpu_capacity <= T::zero() {
            return Err(ModelError::InvalidDevice(self.id, "cpu capacity must be positive"));
        }
        if self.cellular_rate <= T::zero() {
            return Err(ModelError::InvalidDevice(self.id, "cellular rate must be positive"));
        }
        let powers = [
            self.compute_power,
            self.cellular_tx_power,
            self.d2d_tx_power,
            self.d2d_rx_power,
        ];
        if powers.iter().any(|p| *p < T::zero()) {
            return Err(ModelError::InvalidDevice(self.id, "negative power"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TaskKind {
    PureCpu,
    PureCellular,
    Hybrid,
}

impl TaskKind {
    pub const ALL: [TaskKind; 3] = [TaskKind::PureCpu, TaskKind::PureCellular, TaskKind::Hybrid];
}

/// A task `<I, Ψ, O, B>` owned by one device.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Task<T> {
    pub owner: DeviceId,
    /// I, input size in bits.
    pub input_size: T,
    /// Ψ, required CPU cycles.
    pub cpu_cycles: T,
    /// O, output size in bits.
    pub output_size: T,
    /// B, cellular traffic in bits.
    pub cellular_traffic: T,
    pub kind: TaskKind,
}

impl<T: Scalar> Task<T> {
    pub fn validate(&self) -> Result<(), ModelError> {
        let fields = [self.input_size, self.cpu_cycles, self.output_size, self.cellular_traffic];
        if fields.iter().any(|v| !v.is_finite()) {
            return Err(ModelError::InvalidTask(self.owner, "non-finite field"));
        }
        if self.input_size <= T::zero() {
            return Err(ModelError::InvalidTask(self.owner, "input size must be positive"));
        }
        if self.cpu_cycles < T::zero() || self.output_size < T::zero() || self.cellular_traffic < T::zero() {
            return Err(ModelError::InvalidTask(self.owner, "negative demand"));
        }
        match self.kind {
            TaskKind::PureCpu if self.cellular_traffic != T::zero() => {
                Err(ModelError::InvalidTask(self.owner, "pure-cpu task with cellular traffic"))
            }
            TaskKind::PureCellular if self.cpu_cycles != T::zero() => {
                Err(ModelError::InvalidTask(self.owner, "pure-cellular task with cpu cycles"))
            }
            _ => Ok(()),
        }
    }
}

/// Energy split by resource. `total` is always the sum of the three parts.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct EnergyBreakdown<T> {
    pub compute: T,
    pub cellular: T,
    pub d2d_transfer: T,
    pub total: T,
}

impl<T: Scalar> EnergyBreakdown<T> {
    pub fn new(compute: T, cellular: T, d2d_transfer: T) -> Self {
        EnergyBreakdown { compute, cellular, d2d_transfer, total: compute + cellular + d2d_transfer }
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("device {0} has no spare CPU capacity for a task needing cycles")]
    CapacityExhausted(DeviceId),
    #[error("{what} must be positive, got {value}")]
    NonPositiveRate { what: &'static str, value: f64 },
    #[error("task owned by {owner} evaluated on device {device} as local execution")]
    OwnerMismatch { owner: DeviceId, device: DeviceId },
    #[error("device {0} cannot offload a task to itself")]
    SelfOffload(DeviceId),
    #[error("invalid device {0}: {1}")]
    InvalidDevice(DeviceId, &'static str),
    #[error("invalid task of device {0}: {1}")]
    InvalidTask(DeviceId, &'static str),
}

fn compute_energy<T: Scalar>(dev: &DeviceProfile<T>, cycles: T) -> Result<T, ModelError> {
    if cycles == T::zero() {
        return Ok(T::zero());
    }
    let capacity = dev.available_capacity();
    if capacity <= T::zero() {
        return Err(ModelError::CapacityExhausted(dev.id));
    }
    Ok(dev.compute_power * (cycles / capacity))
}

fn cellular_energy<T: Scalar>(dev: &DeviceProfile<T>, traffic: T) -> Result<T, ModelError> {
    if traffic == T::zero() {
        return Ok(T::zero());
    }
    if dev.cellular_rate <= T::zero() {
        return Err(ModelError::NonPositiveRate { what: "cellular rate", value: dev.cellular_rate.to_f64_lossy() });
    }
    Ok(dev.cellular_tx_power * (traffic / dev.cellular_rate))
}

/// Energy of executing `task` on its own device: `E^l = ρ^c Ψ/c + P^b B/D`.
pub fn local_energy<T: Scalar>(dev: &DeviceProfile<T>, task: &Task<T>) -> Result<EnergyBreakdown<T>, ModelError> {
    if task.owner != dev.id {
        return Err(ModelError::OwnerMismatch { owner: task.owner, device: dev.id });
    }
    let compute = compute_energy(dev, task.cpu_cycles)?;
    let cellular = cellular_energy(dev, task.cellular_traffic)?;
    Ok(EnergyBreakdown::new(compute, cellular, T::zero()))
}

/// Energy of shipping `task` from `owner` to `executor` over D2D, running it
/// there and shipping the output back.
///
/// `rate_ij` is the owner→executor D2D rate and `rate_ji` the reverse one;
/// the reverse rate is only needed when the task has output.
pub fn offload_energy<T: Scalar>(
    owner: &DeviceProfile<T>,
    executor: &DeviceProfile<T>,
    task: &Task<T>,
    rate_ij: T,
    rate_ji: T,
) -> Result<EnergyBreakdown<T>, ModelError> {
    if owner.id == executor.id {
        return Err(ModelError::SelfOffload(owner.id));
    }
    if task.owner != owner.id {
        return Err(ModelError::OwnerMismatch { owner: task.owner, device: owner.id });
    }
    if !(rate_ij > T::zero()) {
        return Err(ModelError::NonPositiveRate { what: "owner-to-executor D2D rate", value: rate_ij.to_f64_lossy() });
    }
    let upload = (owner.d2d_tx_power + executor.d2d_rx_power) * (task.input_size / rate_ij);
    let download = if task.output_size > T::zero() {
        if !(rate_ji > T::zero()) {
            return Err(ModelError::NonPositiveRate {
                what: "executor-to-owner D2D rate",
                value: rate_ji.to_f64_lossy(),
            });
        }
        (executor.d2d_tx_power + owner.d2d_rx_power) * (task.output_size / rate_ji)
    } else {
        T::zero()
    };
    let compute = compute_energy(executor, task.cpu_cycles)?;
    let cellular = cellular_energy(executor, task.cellular_traffic)?;
    Ok(EnergyBreakdown::new(compute, cellular, upload + download))
}
