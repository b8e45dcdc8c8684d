//! Energy-optimal task assignment for crowds of D2D-connected mobile devices.
//!
//! A round is a set of devices, the tasks some of them own and the D2D links
//! between them. [`schemes::assign_optimal`] turns the round into a weighted
//! graph whose minimum-weight perfect matching is the cheapest feasible
//! assignment; [`simkit`] runs it against the greedy, reciprocal and random
//! baselines over many rounds.
//!
//! The numeric core is generic over [`Scalar`] (`f32` or `f64`); the aliases
//! below fix it to `f64`, which is what the scenario generator produces.

pub mod assignment;
pub mod incentive;
pub mod matchgraph;
pub mod matching;
pub mod model;
pub mod scalar;
pub mod scenario;
pub mod schemes;
pub mod simkit;

pub use model::{DeviceId, ModelError, Position, TaskKind};
pub use scalar::Scalar;
pub use scenario::{ConnectivityGraph, ScenarioConfig};
pub use schemes::{
    assign_greedy, assign_optimal, assign_random, assign_reciprocal, brute_force_assignment, Scheme, SchemeError,
};
pub use simkit::{run_experiment, ExperimentConfig, ExperimentSummary, SimError};

pub type DeviceProfile = model::DeviceProfile<f64>;
pub type Task = model::Task<f64>;
pub type EnergyBreakdown = model::EnergyBreakdown<f64>;
pub type Round = scenario::Round<f64>;
pub type EnergyTable = assignment::EnergyTable<f64>;
pub type Assignment = assignment::Assignment<f64>;
pub type MatchingGraph = matchgraph::MatchingGraph<f64>;
pub type WeightedGraph = matching::WeightedGraph<f64>;
pub type Matching = matching::Matching<f64>;
pub type DualCertificate = matching::DualCertificate<f64>;
