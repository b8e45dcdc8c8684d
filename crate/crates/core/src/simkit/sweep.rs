use rand::RngCore;
use serde::{Deserialize, Serialize};

use super::{run_experiment, ExperimentConfig, ExperimentSummary, SimError};
use crate::scenario::round_rng;
use crate::schemes::Scheme;

const SWEEP_STREAM: u64 = 1 << 48;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SweepParam {
    /// Number of devices; the area stays fixed, so density grows.
    Devices,
    /// Task generation probability.
    TaskFreq,
}

impl SweepParam {
    pub fn name(self) -> &'static str {
        match self {
            SweepParam::Devices => "devices",
            SweepParam::TaskFreq => "task-freq",
        }
    }

    /// Copy of `cfg` with the parameter set to `value`.
    pub fn apply(self, cfg: &ExperimentConfig, value: f64) -> Result<ExperimentConfig, SimError> {
        let mut out = cfg.clone();
        match self {
            SweepParam::Devices => {
                if !(value >= 1.0 && value.fract() == 0.0 && value <= u32::MAX as f64) {
                    return Err(SimError::Config(format!("device count must be a positive integer, got {value}")));
                }
                out.scenario.device_count = value as usize;
            }
            SweepParam::TaskFreq => out.scenario.task_frequency = value,
        }
        out.validate()?;
        Ok(out)
    }
}

impl std::fmt::Display for SweepParam {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for SweepParam {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim() {
            "devices" | "device_count" | "device-count" => Ok(SweepParam::Devices),
            "task-freq" | "task_frequency" | "task-frequency" => Ok(SweepParam::TaskFreq),
            other => Err(format!("unknown sweep parameter `{other}` (expected devices or task-freq)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepPoint {
    pub value: f64,
    pub seed: u64,
    pub summary: ExperimentSummary,
}

/// One line of `sweep.csv`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub param: SweepParam,
    pub value: f64,
    pub seed: u64,
    pub scheme: Scheme,
    pub rounds: usize,
    pub mean_tasks: f64,
    pub mean_energy_j: f64,
    pub mean_saving_ratio: f64,
    pub ci_half_width: f64,
    pub mean_solve_ms: f64,
    pub p50_solve_ms: f64,
    pub p95_solve_ms: f64,
}

impl SweepRow {
    pub fn from_point(param: SweepParam, p: &SweepPoint) -> Vec<SweepRow> {
        p.summary
            .schemes
            .iter()
            .map(|s| SweepRow {
                param,
                value: p.value,
                seed: p.seed,
                scheme: s.scheme,
                rounds: s.rounds,
                mean_tasks: s.mean_tasks,
                mean_energy_j: s.mean_energy_j,
                mean_saving_ratio: s.mean_saving_ratio,
                ci_half_width: s.ci_half_width,
                mean_solve_ms: s.mean_solve_ms,
                p50_solve_ms: s.p50_solve_ms,
                p95_solve_ms: s.p95_solve_ms,
            })
            .collect()
    }
}

/// Seed of the `index`-th sweep value, drawn from the base seed.
pub fn derive_seed(base: u64, index: usize) -> u64 {
    round_rng(base, SWEEP_STREAM + index as u64).next_u64()
}

/// One experiment per value. All values are validated before anything runs.
pub fn sweep(cfg: &ExperimentConfig, param: SweepParam, values: &[f64]) -> Result<Vec<SweepPoint>, SimError> {
    if values.is_empty() {
        return Err(SimError::Config("sweep needs at least one value".into()));
    }
    let configs = values
        .iter()
        .enumerate()
        .map(|(i, &v)| {
            let mut c = param.apply(cfg, v)?;
            c.scenario.rng_seed = derive_seed(cfg.scenario.rng_seed, i);
            Ok(c)
        })
        .collect::<Result<Vec<_>, SimError>>()?;
    configs
        .into_iter()
        .zip(values)
        .map(|(c, &value)| {
            let seed = c.scenario.rng_seed;
            Ok(SweepPoint { value, seed, summary: run_experiment(&c)? })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::ScenarioConfig;

    fn base() -> ExperimentConfig {
        ExperimentConfig {
            scenario: ScenarioConfig { device_count: 8, ..Default::default() },
            rounds: 2,
            schemes: vec![Scheme::Optimal, Scheme::Greedy],
            ..Default::default()
        }
    }

    #[test]
    fn one_point_per_value() {
        let pts = sweep(&base(), SweepParam::TaskFreq, &[0.2, 0.8]).unwrap();
        assert_eq!(pts.len(), 2);
        assert_eq!(pts[0].summary.config.scenario.task_frequency, 0.2);
        assert_ne!(pts[0].seed, pts[1].seed);
        let rows: Vec<SweepRow> = pts.iter().flat_map(|p| SweepRow::from_point(SweepParam::TaskFreq, p)).collect();
        assert_eq!(rows.len(), 4);
    }

    #[test]
    fn devices_sweep_sets_the_count() {
        let pts = sweep(&base(), SweepParam::Devices, &[3.0, 6.0]).unwrap();
        assert_eq!(pts[1].summary.config.scenario.device_count, 6);
    }

    #[test]
    fn bad_values_are_rejected() {
        assert!(sweep(&base(), SweepParam::Devices, &[]).is_err());
        assert!(sweep(&base(), SweepParam::TaskFreq, &[0.5, 1.5]).is_err());
        assert!(sweep(&base(), SweepParam::Devices, &[2.5]).is_err());
        assert!(sweep(&base(), SweepParam::Devices, &[0.0]).is_err());
    }

    #[test]
    fn param_names_parse() {
        assert_eq!("devices".parse::<SweepParam>().unwrap(), SweepParam::Devices);
        assert_eq!("task-freq".parse::<SweepParam>().unwrap(), SweepParam::TaskFreq);
        assert!("speed".parse::<SweepParam>().is_err());
    }

    #[test]
    fn derived_seeds_are_stable() {
        assert_eq!(derive_seed(5, 0), derive_seed(5, 0));
        assert_ne!(derive_seed(5, 0), derive_seed(5, 1));
        assert_ne!(derive_seed(5, 0), derive_seed(6, 0));
    }
}
