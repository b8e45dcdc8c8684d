//! Randomised round generation: device sampling, a random-direction mobility
//! step, Shannon-rate D2D connectivity and task arrivals.

use std::f64::consts::PI;

use rand::distributions::{Distribution, WeightedIndex};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{DeviceId, DeviceProfile, Position, Task, TaskKind};
use crate::scalar::Scalar;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ScenarioError {
    #[error("invalid scenario config: {0}")]
    InvalidConfig(String),
    #[error("distance {dist} m is outside (0, {max}] m")]
    DistanceOutOfRange { dist: f64, max: f64 },
}

/// Closed interval `[min, max]`, written as a two-element array in config files.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(from = "[f64; 2]", into = "[f64; 2]")]
pub struct Interval {
    pub min: f64,
    pub max: f64,
}

impl Interval {
    pub const fn new(min: f64, max: f64) -> Self {
        Interval { min, max }
    }

    pub const fn point(v: f64) -> Self {
        Interval { min: v, max: v }
    }

    pub fn mean(&self) -> f64 {
        0.5 * (self.min + self.max)
    }

    pub fn is_valid(&self) -> bool {
        self.min.is_finite() && self.max.is_finite() && self.min <= self.max
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        if self.min == self.max {
            self.min
        } else {
            rng.gen_range(self.min..=self.max)
        }
    }
}

impl From<[f64; 2]> for Interval {
    fn from(v: [f64; 2]) -> Self {
        Interval::new(v[0], v[1])
    }
}

impl From<Interval> for [f64; 2] {
    fn from(r: Interval) -> Self {
        [r.min, r.max]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TaskMix {
    pub pure_cpu: f64,
    pub pure_cellular: f64,
    pub hybrid: f64,
}

impl Default for TaskMix {
    fn default() -> Self {
        TaskMix { pure_cpu: 1.0 / 3.0, pure_cellular: 1.0 / 3.0, hybrid: 1.0 / 3.0 }
    }
}

/// Cycles per input bit for the task kinds that compute.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProcessingDensity {
    pub pure_cpu: f64,
    pub hybrid: f64,
}

impl Default for ProcessingDensity {
    fn default() -> Self {
        ProcessingDensity { pure_cpu: 3000.0, hybrid: 1000.0 }
    }
}

/// Everything needed to generate rounds. Defaults follow the usual D2D crowd
/// evaluation setting (2 GHz CPUs, 0-70 % load, 1-10 Mbps cellular, 20 MHz
/// D2D bandwidth with path-loss exponent 3 and noise 1e-8, 200 m range).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioConfig {
    pub device_count: usize,
    /// Width and height of the deployment area in metres.
    pub area: [f64; 2],
    pub max_d2d_distance: f64,
    /// D2D channel bandwidth in Hz.
    pub d2d_bandwidth: f64,
    pub path_loss_exponent: f64,
    /// Noise power in the SNR denominator (W).
    pub noise: f64,
    /// Probability that a device owns a task in a round.
    pub task_frequency: f64,
    pub task_type_mix: TaskMix,
    /// Task input size in bits.
    pub input_size_range: Interval,
    pub processing_density: ProcessingDensity,
    /// Output size as a fraction of the input, for kinds that return results.
    pub output_ratio: f64,
    /// Cellular traffic of hybrid tasks as a fraction of the input.
    pub hybrid_cellular_ratio: f64,
    pub cellular_rate_range: Interval,
    pub load_range: Interval,
    pub cpu_capacity_range: Interval,
    pub compute_power_range: Interval,
    pub cellular_tx_power_range: Interval,
    pub d2d_tx_power_range: Interval,
    pub d2d_rx_power_range: Interval,
    pub rng_seed: u64,
    /// Distance moved per round, metres.
    pub mobility_speed_range: Interval,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        ScenarioConfig {
            device_count: 50,
            area: [500.0, 500.0],
            max_d2d_distance: 200.0,
            d2d_bandwidth: 20e6,
            path_loss_exponent: 3.0,
            noise: 1e-8,
            task_frequency: 0.5,
            task_type_mix: TaskMix::default(),
            input_size_range: Interval::new(500.0 * 8192.0, 2000.0 * 8192.0),
            processing_density: ProcessingDensity::default(),
            output_ratio: 0.2,
            hybrid_cellular_ratio: 0.1,
            cellular_rate_range: Interval::new(1e6, 10e6),
            load_range: Interval::new(0.0, 0.7),
            cpu_capacity_range: Interval::point(2e9),
            compute_power_range: Interval::point(0.9),
            cellular_tx_power_range: Interval::point(0.6),
            d2d_tx_power_range: Interval::point(0.2),
            d2d_rx_power_range: Interval::point(0.2),
            rng_seed: 1,
            mobility_speed_range: Interval::new(0.0, 30.0),
        }
    }
}

impl ScenarioConfig {
    pub fn validate(&self) -> Result<(), ScenarioError> {
        let bad = |msg: &str| Err(ScenarioError::InvalidConfig(msg.to_string()));
        if !(self.area[0] > 0.0 && self.area[1] > 0.0 && self.area.iter().all(|v| v.is_finite())) {
            return bad("area must be positive and finite");
        }
        if !(self.max_d2d_distance > 0.0 && self.max_d2d_distance.is_finite()) {
            return bad("max_d2d_distance must be positive");
        }
        if !(self.d2d_bandwidth > 0.0 && self.d2d_bandwidth.is_finite()) {
            return bad("d2d_bandwidth must be positive");
        }
        if !(self.path_loss_exponent >= 0.0 && self.path_loss_exponent.is_finite()) {
            return bad("path_loss_exponent must be nonnegative");
        }
        if !(self.noise > 0.0 && self.noise.is_finite()) {
            return bad("noise must be positive");
        }
        if !(0.0..=1.0).contains(&self.task_frequency) {
            return bad("task_frequency must lie in [0, 1]");
        }
        let mix = self.task_type_mix;
        let parts = [mix.pure_cpu, mix.pure_cellular, mix.hybrid];
        if parts.iter().any(|p| !(0.0..=1.0).contains(p)) {
            return bad("task_type_mix entries must lie in [0, 1]");
        }
        if (parts.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
            return bad("task_type_mix must sum to 1");
        }
        let ranges = [
            ("input_size_range", self.input_size_range),
            ("cellular_rate_range", self.cellular_rate_range),
            ("load_range", self.load_range),
            ("cpu_capacity_range", self.cpu_capacity_range),
            ("compute_power_range", self.compute_power_range),
            ("cellular_tx_power_range", self.cellular_tx_power_range),
            ("d2d_tx_power_range", self.d2d_tx_power_range),
            ("d2d_rx_power_range", self.d2d_rx_power_range),
            ("mobility_speed_range", self.mobility_speed_range),
        ];
        for (name, r) in ranges {
            if !r.is_valid() {
                return Err(ScenarioError::InvalidConfig(format!("{name} must satisfy min <= max")));
            }
            if r.min < 0.0 {
                return Err(ScenarioError::InvalidConfig(format!("{name} must be nonnegative")));
            }
        }
        if self.input_size_range.min <= 0.0 {
            return bad("input sizes must be positive");
        }
        if self.cellular_rate_range.min <= 0.0 || self.cpu_capacity_range.min <= 0.0 {
            return bad("cellular rate and cpu capacity must be positive");
        }
        if self.load_range.max >= 1.0 {
            return bad("load_range must stay below 1 so every device has spare capacity");
        }
        let densities = [self.processing_density.pure_cpu, self.processing_density.hybrid];
        if densities.iter().any(|d| !(*d >= 0.0 && d.is_finite())) {
            return bad("processing densities must be nonnegative");
        }
        for (name, v) in [("output_ratio", self.output_ratio), ("hybrid_cellular_ratio", self.hybrid_cellular_ratio)] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(ScenarioError::InvalidConfig(format!("{name} must be nonnegative")));
            }
        }
        Ok(())
    }
}

/// Feasible D2D links of one round with their (symmetric) rates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConnectivityGraph<T> {
    adjacency: Vec<Vec<(DeviceId, T)>>,
    edge_count: usize,
}

impl<T: Scalar> ConnectivityGraph<T> {
    pub fn new(device_count: usize) -> Self {
        ConnectivityGraph { adjacency: vec![Vec::new(); device_count], edge_count: 0 }
    }

    /// Adds the undirected link `a`-`b`. Self-links, duplicates and
    /// nonpositive rates are rejected.
    pub fn add_edge(&mut self, a: DeviceId, b: DeviceId, rate: T) -> Result<(), ScenarioError> {
        let n = self.adjacency.len();
        if a == b || a.0 >= n || b.0 >= n {
            return Err(ScenarioError::InvalidConfig(format!("bad link {a}-{b}")));
        }
        if !(rate > T::zero()) || !rate.is_finite() {
            return Err(ScenarioError::InvalidConfig(format!("link {a}-{b} needs a positive rate")));
        }
        if self.has_edge(a, b) {
            return Err(ScenarioError::InvalidConfig(format!("duplicate link {a}-{b}")));
        }
        for (from, to) in [(a, b), (b, a)] {
            let list = &mut self.adjacency[from.0];
            let at = list.partition_point(|(d, _)| *d < to);
            list.insert(at, (to, rate));
        }
        self.edge_count += 1;
        Ok(())
    }

    /// Removes every link touching `d`.
    pub fn isolate(&mut self, d: DeviceId) {
        let neighbors: Vec<DeviceId> = self.adjacency[d.0].drain(..).map(|(n, _)| n).collect();
        for n in &neighbors {
            self.adjacency[n.0].retain(|(x, _)| *x != d);
        }
        self.edge_count -= neighbors.len();
    }

    pub fn device_count(&self) -> usize {
        self.adjacency.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edge_count
    }

    pub fn rate(&self, from: DeviceId, to: DeviceId) -> Option<T> {
        let list = self.adjacency.get(from.0)?;
        list.binary_search_by(|(d, _)| d.cmp(&to)).ok().map(|i| list[i].1)
    }

    pub fn has_edge(&self, a: DeviceId, b: DeviceId) -> bool {
        self.rate(a, b).is_some()
    }

    /// Neighbours of `d` in increasing id order.
    pub fn neighbors(&self, d: DeviceId) -> impl Iterator<Item = (DeviceId, T)> + '_ {
        self.adjacency[d.0].iter().copied()
    }

    pub fn degree(&self, d: DeviceId) -> usize {
        self.adjacency[d.0].len()
    }

    /// Each undirected link once, as `(lower id, higher id, rate)`.
    pub fn edges(&self) -> impl Iterator<Item = (DeviceId, DeviceId, T)> + '_ {
        self.adjacency.iter().enumerate().flat_map(|(i, list)| {
            list.iter().filter(move |(j, _)| j.0 > i).map(move |&(j, r)| (DeviceId(i), j, r))
        })
    }

    pub fn mean_degree(&self) -> f64 {
        if self.adjacency.is_empty() {
            0.0
        } else {
            2.0 * self.edge_count as f64 / self.adjacency.len() as f64
        }
    }
}

/// One round's complete input: devices, the tasks they own and the D2D links.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Round<T> {
    pub devices: Vec<DeviceProfile<T>>,
    /// At most one task per device, sorted by owner.
    pub tasks: Vec<Task<T>>,
    pub connectivity: ConnectivityGraph<T>,
}

impl<T: Scalar> Round<T> {
    pub fn task_of(&self, d: DeviceId) -> Option<&Task<T>> {
        self.tasks.binary_search_by(|t| t.owner.cmp(&d)).ok().map(|i| &self.tasks[i])
    }

    pub fn owns_task(&self, d: DeviceId) -> bool {
        self.task_of(d).is_some()
    }

    pub fn device(&self, d: DeviceId) -> Option<&DeviceProfile<T>> {
        self.devices.get(d.0).filter(|dev| dev.id == d)
    }
}

pub fn generate_devices<R: Rng + ?Sized>(cfg: &ScenarioConfig, rng: &mut R) -> Vec<DeviceProfile<f64>> {
    (0..cfg.device_count)
        .map(|i| {
            let x = Interval::new(0.0, cfg.area[0]).sample(rng);
            let y = Interval::new(0.0, cfg.area[1]).sample(rng);
            DeviceProfile {
                id: DeviceId(i),
                cpu_capacity: cfg.cpu_capacity_range.sample(rng),
                load: cfg.load_range.sample(rng),
                compute_power: cfg.compute_power_range.sample(rng),
                cellular_tx_power: cfg.cellular_tx_power_range.sample(rng),
                cellular_rate: cfg.cellular_rate_range.sample(rng),
                d2d_tx_power: cfg.d2d_tx_power_range.sample(rng),
                d2d_rx_power: cfg.d2d_rx_power_range.sample(rng),
                position: Position::new(x, y),
            }
        })
        .collect()
}

/// Shannon-capacity D2D rate `W log2(1 + P d^-α / N0)` at the nominal D2D
/// transmit power. Distances below 1 m are evaluated at 1 m.
pub fn d2d_rate(dist: f64, cfg: &ScenarioConfig) -> Result<f64, ScenarioError> {
    if !(dist > 0.0) || dist > cfg.max_d2d_distance {
        return Err(ScenarioError::DistanceOutOfRange { dist, max: cfg.max_d2d_distance });
    }
    let d = dist.max(1.0);
    let snr = cfg.d2d_tx_power_range.mean() * d.powf(-cfg.path_loss_exponent) / cfg.noise;
    Ok(cfg.d2d_bandwidth * (1.0 + snr).log2())
}

pub fn build_connectivity(devices: &[DeviceProfile<f64>], cfg: &ScenarioConfig) -> ConnectivityGraph<f64> {
    let mut graph = ConnectivityGraph::new(devices.len());
    for (i, a) in devices.iter().enumerate() {
        for b in &devices[i + 1..] {
            let dist = a.position.distance(&b.position);
            if dist <= cfg.max_d2d_distance {
                // co-located devices use the 1 m floor
                let rate = d2d_rate(dist.max(1.0), cfg).expect("distance checked above");
                graph.add_edge(a.id, b.id, rate).expect("fresh pair with positive rate");
            }
        }
    }
    graph
}

pub fn generate_tasks<R: Rng + ?Sized>(
    devices: &[DeviceProfile<f64>],
    cfg: &ScenarioConfig,
    rng: &mut R,
) -> Vec<Task<f64>> {
    let mix = cfg.task_type_mix;
    let kinds = WeightedIndex::new([mix.pure_cpu, mix.pure_cellular, mix.hybrid]).ok();
    let mut tasks = Vec::new();
    for dev in devices {
        if !rng.gen_bool(cfg.task_frequency) {
            continue;
        }
        let kind = match &kinds {
            Some(dist) => TaskKind::ALL[dist.sample(rng)],
            None => TaskKind::PureCpu,
        };
        let input = cfg.input_size_range.sample(rng);
        let (cycles, traffic, output) = match kind {
            TaskKind::PureCpu => (cfg.processing_density.pure_cpu * input, 0.0, cfg.output_ratio * input),
            TaskKind::PureCellular => (0.0, input, 0.0),
            TaskKind::Hybrid => (
                cfg.processing_density.hybrid * input,
                cfg.hybrid_cellular_ratio * input,
                cfg.output_ratio * input,
            ),
        };
        tasks.push(Task {
            owner: dev.id,
            input_size: input,
            cpu_cycles: cycles,
            output_size: output,
            cellular_traffic: traffic,
            kind,
        });
    }
    tasks
}

fn reflect(v: f64, upper: f64) -> f64 {
    // fold onto [0, upper] by mirroring at both walls
    let period = 2.0 * upper;
    let m = v.rem_euclid(period);
    let r = if m > upper { period - m } else { m };
    r.clamp(0.0, upper)
}

/// Moves every device a random distance in a random direction, reflecting at
/// the area walls, and resamples its background load.
pub fn step_mobility<R: Rng + ?Sized>(
    devices: &[DeviceProfile<f64>],
    cfg: &ScenarioConfig,
    rng: &mut R,
) -> Vec<DeviceProfile<f64>> {
    devices
        .iter()
        .map(|dev| {
            let step = cfg.mobility_speed_range.sample(rng);
            let heading = rng.gen_range(0.0..2.0 * PI);
            let mut next = dev.clone();
            if step > 0.0 {
                next.position.x = reflect(dev.position.x + step * heading.cos(), cfg.area[0]);
                next.position.y = reflect(dev.position.y + step * heading.sin(), cfg.area[1]);
            }
            next.load = cfg.load_range.sample(rng);
            next
        })
        .collect()
}

/// Deterministic generator of consecutive rounds for one configuration.
///
/// Stream 0 of the seed places the initial devices; round `r` (1-based) draws
/// its mobility step and tasks from stream `r`.
pub struct RoundStream {
    cfg: ScenarioConfig,
    devices: Vec<DeviceProfile<f64>>,
    next_round: u64,
}

impl RoundStream {
    pub fn new(cfg: ScenarioConfig) -> Result<Self, ScenarioError> {
        cfg.validate()?;
        let mut rng = round_rng(cfg.rng_seed, 0);
        let devices = generate_devices(&cfg, &mut rng);
        Ok(RoundStream { cfg, devices, next_round: 1 })
    }

    pub fn config(&self) -> &ScenarioConfig {
        &self.cfg
    }

    pub fn next_round(&mut self) -> (u64, Round<f64>) {
        let index = self.next_round;
        self.next_round += 1;
        let mut rng = round_rng(self.cfg.rng_seed, index);
        self.devices = step_mobility(&self.devices, &self.cfg, &mut rng);
        let tasks = generate_tasks(&self.devices, &self.cfg, &mut rng);
        let connectivity = build_connectivity(&self.devices, &self.cfg);
        (index, Round { devices: self.devices.clone(), tasks, connectivity })
    }
}

/// RNG for one (seed, stream) pair; streams are independent ChaCha streams.
pub fn round_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg() -> ScenarioConfig {
        ScenarioConfig::default()
    }

    fn device_at(id: usize, x: f64, y: f64) -> DeviceProfile<f64> {
        let mut rng = round_rng(0, 0);
        let mut d = generate_devices(&ScenarioConfig { device_count: 1, ..cfg() }, &mut rng).remove(0);
        d.id = DeviceId(id);
        d.position = Position::new(x, y);
        d
    }

    #[test]
    fn default_config_is_valid() {
        cfg().validate().unwrap();
    }

    #[test]
    fn config_validation_catches_bad_values() {
        let mut c = cfg();
        c.task_frequency = 1.5;
        assert!(c.validate().is_err());
        let mut c = cfg();
        c.task_type_mix.hybrid = 0.5;
        assert!(c.validate().is_err());
        let mut c = cfg();
        c.load_range = Interval::new(0.7, 0.1);
        assert!(c.validate().is_err());
        let mut c = cfg();
        c.load_range = Interval::new(0.0, 1.0);
        assert!(c.validate().is_err());
    }

    #[test]
    fn no_devices() {
        let c = ScenarioConfig { device_count: 0, ..cfg() };
        assert!(generate_devices(&c, &mut round_rng(1, 0)).is_empty());
    }

    #[test]
    fn default_device_parameters() {
        let devices = generate_devices(&ScenarioConfig { device_count: 200, ..cfg() }, &mut round_rng(9, 0));
        for d in &devices {
            assert_eq!(d.cpu_capacity, 2e9);
            assert!((0.0..=0.7).contains(&d.load));
            assert_eq!(d.compute_power, 0.9);
            assert_eq!(d.cellular_tx_power, 0.6);
            assert_eq!(d.d2d_tx_power, 0.2);
            assert_eq!(d.d2d_rx_power, 0.2);
            assert!((1e6..=1e7).contains(&d.cellular_rate));
            assert!((0.0..=500.0).contains(&d.position.x) && (0.0..=500.0).contains(&d.position.y));
            d.validate().unwrap();
        }
    }

    #[test]
    fn devices_are_deterministic() {
        let c = cfg();
        assert_eq!(generate_devices(&c, &mut round_rng(4, 0)), generate_devices(&c, &mut round_rng(4, 0)));
        assert_ne!(generate_devices(&c, &mut round_rng(4, 0)), generate_devices(&c, &mut round_rng(5, 0)));
    }

    #[test]
    fn rate_hand_values() {
        let c = cfg();
        let at_1m = d2d_rate(1.0, &c).unwrap();
        assert!((at_1m - 2e7 * (1.0f64 + 2e7).log2()).abs() < 1e-3);
        assert!((at_1m - 4.85e8).abs() / 4.85e8 < 0.01);
        let at_200m = d2d_rate(200.0, &c).unwrap();
        assert!((at_200m - 2e7 * 3.5f64.log2()).abs() < 1e-3);
        assert!((at_200m - 3.61e7).abs() / 3.61e7 < 0.01);
    }

    #[test]
    fn rate_errors_and_clamp() {
        let c = cfg();
        assert!(d2d_rate(0.0, &c).is_err());
        assert!(d2d_rate(-3.0, &c).is_err());
        assert!(d2d_rate(200.5, &c).is_err());
        assert!(d2d_rate(f64::NAN, &c).is_err());
        assert_eq!(d2d_rate(0.25, &c).unwrap(), d2d_rate(1.0, &c).unwrap());
    }

    #[test]
    fn rate_decreases_with_distance() {
        let c = cfg();
        let mut prev = f64::INFINITY;
        for d in [1.0, 2.0, 10.0, 50.0, 120.0, 199.0, 200.0] {
            let r = d2d_rate(d, &c).unwrap();
            assert!(r < prev);
            prev = r;
        }
    }

    #[test]
    fn connectivity_respects_range() {
        let c = cfg();
        let far = build_connectivity(&[device_at(0, 0.0, 0.0), device_at(1, 250.0, 0.0)], &c);
        assert_eq!(far.edge_count(), 0);
        let near = build_connectivity(&[device_at(0, 0.0, 0.0), device_at(1, 100.0, 0.0)], &c);
        assert_eq!(near.edge_count(), 1);
        assert_eq!(near.rate(DeviceId(0), DeviceId(1)), near.rate(DeviceId(1), DeviceId(0)));
        assert_eq!(near.rate(DeviceId(0), DeviceId(1)), Some(d2d_rate(100.0, &c).unwrap()));
    }

    #[test]
    fn co_located_devices_form_a_clique() {
        let devices: Vec<_> = (0..6).map(|i| device_at(i, 10.0, 10.0)).collect();
        let g = build_connectivity(&devices, &cfg());
        assert_eq!(g.edge_count(), 15);
        assert!(g.edges().all(|(_, _, r)| r == d2d_rate(1.0, &cfg()).unwrap()));
    }

    #[test]
    fn isolate_removes_links() {
        let devices: Vec<_> = (0..4).map(|i| device_at(i, 10.0, 10.0)).collect();
        let mut g = build_connectivity(&devices, &cfg());
        g.isolate(DeviceId(2));
        assert_eq!(g.edge_count(), 3);
        assert_eq!(g.degree(DeviceId(2)), 0);
        assert!(!g.has_edge(DeviceId(0), DeviceId(2)));
    }

    #[test]
    fn task_frequency_extremes() {
        let devices = generate_devices(&cfg(), &mut round_rng(2, 0));
        let none = ScenarioConfig { task_frequency: 0.0, ..cfg() };
        assert!(generate_tasks(&devices, &none, &mut round_rng(2, 1)).is_empty());
        let all = ScenarioConfig { task_frequency: 1.0, ..cfg() };
        assert_eq!(generate_tasks(&devices, &all, &mut round_rng(2, 1)).len(), devices.len());
    }

    #[test]
    fn task_shapes_follow_kind() {
        let devices = generate_devices(&ScenarioConfig { device_count: 300, ..cfg() }, &mut round_rng(3, 0));
        let c = ScenarioConfig { task_frequency: 1.0, ..cfg() };
        for t in generate_tasks(&devices, &c, &mut round_rng(3, 1)) {
            t.validate().unwrap();
            let i = t.input_size;
            assert!((4.096e6..=1.6384e7).contains(&i));
            match t.kind {
                TaskKind::PureCpu => {
                    assert_eq!(t.cpu_cycles, 3000.0 * i);
                    assert_eq!(t.cellular_traffic, 0.0);
                    assert_eq!(t.output_size, 0.2 * i);
                }
                TaskKind::PureCellular => {
                    assert_eq!(t.cpu_cycles, 0.0);
                    assert_eq!(t.cellular_traffic, i);
                    assert_eq!(t.output_size, 0.0);
                }
                TaskKind::Hybrid => {
                    assert_eq!(t.cpu_cycles, 1000.0 * i);
                    assert_eq!(t.cellular_traffic, 0.1 * i);
                }
            }
        }
    }

    #[test]
    fn smallest_pure_cpu_task() {
        let c = ScenarioConfig {
            task_frequency: 1.0,
            task_type_mix: TaskMix { pure_cpu: 1.0, pure_cellular: 0.0, hybrid: 0.0 },
            input_size_range: Interval::point(500.0 * 8192.0),
            ..cfg()
        };
        let devices = generate_devices(&ScenarioConfig { device_count: 1, ..c.clone() }, &mut round_rng(1, 0));
        let t = &generate_tasks(&devices, &c, &mut round_rng(1, 1))[0];
        assert_eq!(t.input_size, 4.096e6);
        assert_eq!(t.cpu_cycles, 1.2288e10);
        assert_eq!(t.cellular_traffic, 0.0);
    }

    #[test]
    fn ownership_frequency_within_three_sigma() {
        let c = ScenarioConfig { device_count: 40, task_frequency: 0.3, ..cfg() };
        let mut stream = RoundStream::new(c.clone()).unwrap();
        let rounds = 200;
        let owned: usize = (0..rounds).map(|_| stream.next_round().1.tasks.len()).sum();
        let trials = (rounds * c.device_count) as f64;
        let sigma = (trials * 0.3 * 0.7).sqrt();
        assert!((owned as f64 - trials * 0.3).abs() <= 3.0 * sigma);
    }

    #[test]
    fn zero_speed_keeps_positions() {
        let c = ScenarioConfig { mobility_speed_range: Interval::point(0.0), ..cfg() };
        let devices = generate_devices(&c, &mut round_rng(1, 0));
        let moved = step_mobility(&devices, &c, &mut round_rng(1, 1));
        for (a, b) in devices.iter().zip(&moved) {
            assert_eq!(a.position, b.position);
            assert_eq!(a.cpu_capacity, b.cpu_capacity);
            assert_eq!(a.cellular_rate, b.cellular_rate);
        }
    }

    #[test]
    fn reflection_folds_into_range() {
        assert_eq!(reflect(-10.0, 100.0), 10.0);
        assert_eq!(reflect(110.0, 100.0), 90.0);
        assert_eq!(reflect(250.0, 100.0), 50.0);
        assert_eq!(reflect(42.0, 100.0), 42.0);
    }

    #[test]
    fn stream_is_deterministic() {
        let c = ScenarioConfig { device_count: 30, rng_seed: 77, ..cfg() };
        let mut a = RoundStream::new(c.clone()).unwrap();
        let mut b = RoundStream::new(c).unwrap();
        for _ in 0..5 {
            assert_eq!(a.next_round(), b.next_round());
        }
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(64))]
            #[test]
            fn mobility_stays_inside_area(seed in any::<u64>(), w in 10.0..1000.0f64, h in 10.0..1000.0f64, speed in 0.0..2000.0f64) {
                let c = ScenarioConfig { area: [w, h], mobility_speed_range: Interval::new(0.0, speed), device_count: 20, ..cfg() };
                let mut devices = generate_devices(&c, &mut round_rng(seed, 0));
                for r in 1..5 {
                    devices = step_mobility(&devices, &c, &mut round_rng(seed, r));
                    for d in &devices {
                        prop_assert!(d.position.x >= 0.0 && d.position.x <= w);
                        prop_assert!(d.position.y >= 0.0 && d.position.y <= h);
                        prop_assert!(c.load_range.min <= d.load && d.load <= c.load_range.max);
                    }
                }
            }

            #[test]
            fn connectivity_is_symmetric_and_bounded(seed in any::<u64>(), n in 0usize..40) {
                let c = ScenarioConfig { device_count: n, ..cfg() };
                let devices = generate_devices(&c, &mut round_rng(seed, 0));
                let g = build_connectivity(&devices, &c);
                for (a, b, r) in g.edges() {
                    prop_assert!(a != b);
                    prop_assert!(r > 0.0);
                    prop_assert_eq!(g.rate(b, a), Some(r));
                    prop_assert!(devices[a.0].position.distance(&devices[b.0].position) <= c.max_d2d_distance);
                }
                for i in 0..n {
                    for j in (i + 1)..n {
                        let close = devices[i].position.distance(&devices[j].position) <= c.max_d2d_distance;
                        prop_assert_eq!(close, g.has_edge(DeviceId(i), DeviceId(j)));
                    }
                }
            }
        }
    }
}
