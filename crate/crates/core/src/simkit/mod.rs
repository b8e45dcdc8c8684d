//! Multi-round experiment driver, summary statistics and result files.

mod output;
mod stats;
mod sweep;
mod verify;

use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::assignment::{saving_ratio, Assignment, EnergyTable};
use crate::incentive::{CreditLedger, IncentiveConfig, IncentiveError};
use crate::model::DeviceId;
use crate::scenario::{round_rng, Round, RoundStream, ScenarioConfig, ScenarioError};
use crate::schemes::{run_scheme, Scheme, SchemeError};

pub use output::{resolve_out_dir, write_experiment, write_sweep, Manifest, OUT_DIR_ENV};
pub use stats::{normal_quantile, percentile, summarize, SchemeSummary};
pub use sweep::{derive_seed, sweep, SweepParam, SweepPoint, SweepRow};
pub use verify::{random_even_graph, random_small_round, run_verify, VerifyConfig, VerifyReport, ORACLE_TOL};

/// Stream offset for the random baseline's per-round generator, far above
/// the scenario's round streams.
pub const RANDOM_SCHEME_STREAM: u64 = 1 << 32;

#[derive(Debug, Error)]
pub enum SimError {
    #[error("invalid experiment config: {0}")]
    Config(String),
    #[error(transparent)]
    Scenario(#[from] ScenarioError),
    #[error(transparent)]
    Incentive(#[from] IncentiveError),
    #[error("round {round}, scheme {scheme}: {source}")]
    Scheme { round: u64, scheme: Scheme, source: SchemeError },
    #[error("round {round}: schemes saw different inputs")]
    InputMismatch { round: u64 },
    #[error("round {round}: {scheme} offloaded the task of ineligible owner {owner}")]
    IneligibleOffload { round: u64, scheme: Scheme, owner: DeviceId },
    #[error("round {round}: credit ledger out of balance")]
    Unbalanced { round: u64 },
    #[error("cannot read {path}: {source}")]
    Read { path: PathBuf, source: std::io::Error },
    #[error("cannot parse {path}: {source}")]
    Parse { path: PathBuf, source: toml::de::Error },
    #[error("cannot write {path}: {message}")]
    Write { path: PathBuf, message: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OutputFormat {
    #[default]
    Csv,
    Json,
}

impl std::str::FromStr for OutputFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "csv" => Ok(OutputFormat::Csv),
            "json" => Ok(OutputFormat::Json),
            other => Err(format!("unknown format `{other}` (expected csv or json)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub scenario: ScenarioConfig,
    pub rounds: usize,
    pub schemes: Vec<Scheme>,
    /// Apply the credit ledger's eligibility filter before every round.
    pub incentive: bool,
    pub incentive_params: IncentiveConfig,
    pub confidence_level: f64,
    pub out_dir: PathBuf,
    pub format: OutputFormat,
    /// Worker threads; 1 runs everything on the calling thread.
    pub jobs: usize,
    /// Record wall-clock solve times. Off by default so result files are
    /// reproducible byte for byte; `solve_ms` is then written as 0.
    pub timing: bool,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            scenario: ScenarioConfig::default(),
            rounds: 100,
            schemes: Scheme::ALL.to_vec(),
            incentive: false,
            incentive_params: IncentiveConfig::default(),
            confidence_level: 0.9,
            out_dir: PathBuf::from("results"),
            format: OutputFormat::Csv,
            jobs: 1,
            timing: false,
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str) -> Result<Self, toml::de::Error> {
        toml::from_str(text)
    }

    pub fn load(path: &Path) -> Result<Self, SimError> {
        let text = std::fs::read_to_string(path).map_err(|source| SimError::Read { path: path.to_path_buf(), source })?;
        Self::from_toml_str(&text).map_err(|source| SimError::Parse { path: path.to_path_buf(), source })
    }

    pub fn validate(&self) -> Result<(), SimError> {
        if self.rounds == 0 {
            return Err(SimError::Config("rounds must be at least 1".into()));
        }
        if self.schemes.is_empty() {
            return Err(SimError::Config("at least one scheme is required".into()));
        }
        let mut seen = self.schemes.clone();
        seen.sort();
        seen.dedup();
        if seen.len() != self.schemes.len() {
            return Err(SimError::Config("schemes are listed more than once".into()));
        }
        if !(self.confidence_level > 0.0 && self.confidence_level < 1.0) {
            return Err(SimError::Config("confidence_level must lie strictly between 0 and 1".into()));
        }
        if self.jobs == 0 {
            return Err(SimError::Config("jobs must be at least 1".into()));
        }
        self.scenario.validate()?;
        self.incentive_params.validate()?;
        Ok(())
    }
}

/// One scheme on one round. Field order is the column order of `rounds.csv`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundRecord {
    pub round: u64,
    pub scheme: Scheme,
    pub tasks: usize,
    pub energy_j: f64,
    pub saving_ratio: f64,
    pub solve_ms: f64,
    pub n_local: usize,
    pub n_offload: usize,
    pub n_exchange: usize,
}

pub const ROUND_COLUMNS: [&str; 9] =
    ["round", "scheme", "tasks", "energy_j", "saving_ratio", "solve_ms", "n_local", "n_offload", "n_exchange"];

/// What every scheme of a round was given.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundInput {
    pub round: u64,
    pub input_sha256: String,
    pub tasks: usize,
    pub mean_degree: f64,
    pub all_local_j: f64,
    /// Owners held to local execution by the credit ledger.
    pub ineligible: Vec<DeviceId>,
}

/// Ledger sums at the end of a round.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LedgerTotals {
    pub round: u64,
    pub x_cpu: f64,
    pub y_cpu: f64,
    pub x_cell: f64,
    pub y_cell: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSummary {
    pub config: ExperimentConfig,
    pub records: Vec<RoundRecord>,
    pub schemes: Vec<SchemeSummary>,
    pub inputs: Vec<RoundInput>,
    pub ledger: Option<CreditLedger>,
    pub ledger_trace: Vec<LedgerTotals>,
}

impl ExperimentSummary {
    pub fn scheme(&self, s: Scheme) -> Option<&SchemeSummary> {
        self.schemes.iter().find(|x| x.scheme == s)
    }

    /// Digest over every round's input hash, in round order.
    pub fn inputs_sha256(&self) -> String {
        let mut h = Sha256::new();
        for i in &self.inputs {
            h.update(i.input_sha256.as_bytes());
        }
        hex::encode(h.finalize())
    }
}

pub fn hash_round(round: &Round<f64>) -> String {
    let bytes = serde_json::to_vec(round).expect("rounds serialize");
    hex::encode(Sha256::digest(bytes))
}

struct Outcome {
    hash: String,
    assignment: Assignment<f64>,
    all_local: f64,
    solve_ms: f64,
}

fn run_one(round_index: u64, round: &Round<f64>, scheme: Scheme, cfg: &ExperimentConfig) -> Result<Outcome, SimError> {
    let hash = hash_round(round);
    let wrap = |source| SimError::Scheme { round: round_index, scheme, source };
    let mut rng = round_rng(cfg.scenario.rng_seed, RANDOM_SCHEME_STREAM + round_index);
    let start = Instant::now();
    let table = EnergyTable::compute(round).map_err(|e| wrap(SchemeError::Model(e)))?;
    let assignment = run_scheme(scheme, round, &table, &mut rng).map_err(wrap)?;
    let elapsed = start.elapsed().as_secs_f64() * 1e3;
    Ok(Outcome { hash, assignment, all_local: table.all_local_total(), solve_ms: if cfg.timing { elapsed } else { 0.0 } })
}

/// Runs `cfg.rounds` rounds. Every configured scheme sees the same round;
/// with incentives on, the first scheme's assignment is what the ledger
/// records.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentSummary, SimError> {
    cfg.validate()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.jobs)
        .build()
        .map_err(|e| SimError::Config(format!("cannot start worker pool: {e}")))?;
    let mut stream = RoundStream::new(cfg.scenario.clone())?;
    let mut ledger = if cfg.incentive { Some(CreditLedger::from_config(&cfg.incentive_params, &cfg.scenario)?) } else { None };

    // With a ledger each round depends on the previous one.
    let batch = if ledger.is_some() { 1 } else { 2 * cfg.jobs };
    let mut records = Vec::with_capacity(cfg.rounds * cfg.schemes.len());
    let mut inputs = Vec::with_capacity(cfg.rounds);
    let mut ledger_trace = Vec::new();
    let mut done = 0;
    while done < cfg.rounds {
        let take = batch.min(cfg.rounds - done);
        let mut rounds = Vec::with_capacity(take);
        for _ in 0..take {
            let (index, round) = stream.next_round();
            let (round, ineligible) = match &ledger {
                Some(l) => (l.filter_round(&round)?, l.ineligible_owners(&round)),
                None => (round, Vec::new()),
            };
            rounds.push((index, round, ineligible));
        }
        let jobs: Vec<(usize, Scheme)> =
            (0..rounds.len()).flat_map(|r| cfg.schemes.iter().map(move |&s| (r, s))).collect();
        let run = |&(r, s): &(usize, Scheme)| run_one(rounds[r].0, &rounds[r].1, s, cfg);
        let outcomes: Vec<Outcome> = if cfg.jobs == 1 {
            jobs.iter().map(run).collect::<Result<_, _>>()?
        } else {
            pool.install(|| jobs.par_iter().map(run).collect::<Result<_, _>>())?
        };

        for (r, (index, round, ineligible)) in rounds.iter().enumerate() {
            let per_round = &outcomes[r * cfg.schemes.len()..(r + 1) * cfg.schemes.len()];
            let hash = &per_round[0].hash;
            if per_round.iter().any(|o| &o.hash != hash) {
                return Err(SimError::InputMismatch { round: *index });
            }
            for (&scheme, out) in cfg.schemes.iter().zip(per_round) {
                if let Some(&owner) = ineligible.iter().find(|&&o| out.assignment.executor_of(o) != Some(o)) {
                    return Err(SimError::IneligibleOffload { round: *index, scheme, owner });
                }
                let counts = out.assignment.counts();
                records.push(RoundRecord {
                    round: *index,
                    scheme,
                    tasks: round.tasks.len(),
                    energy_j: out.assignment.total,
                    saving_ratio: saving_ratio(out.assignment.total, out.all_local),
                    solve_ms: out.solve_ms,
                    n_local: counts.local,
                    n_offload: counts.offload,
                    n_exchange: counts.exchange,
                });
            }
            inputs.push(RoundInput {
                round: *index,
                input_sha256: hash.clone(),
                tasks: round.tasks.len(),
                mean_degree: round.connectivity.mean_degree(),
                all_local_j: per_round[0].all_local,
                ineligible: ineligible.clone(),
            });
            if let Some(l) = ledger.as_mut() {
                l.record(&per_round[0].assignment, round);
                let (x_cpu, y_cpu, x_cell, y_cell) = l.totals();
                if !balanced(x_cpu, y_cpu) || !balanced(x_cell, y_cell) {
                    return Err(SimError::Unbalanced { round: *index });
                }
                ledger_trace.push(LedgerTotals { round: *index, x_cpu, y_cpu, x_cell, y_cell });
            }
        }
        done += take;
    }

    let schemes = summarize(&records, &cfg.schemes, cfg.confidence_level);
    Ok(ExperimentSummary { config: cfg.clone(), records, schemes, inputs, ledger, ledger_trace })
}

fn balanced(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-12 * a.abs().max(b.abs())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(rounds: usize) -> ExperimentConfig {
        ExperimentConfig {
            scenario: ScenarioConfig { device_count: 12, area: [300.0, 300.0], ..Default::default() },
            rounds,
            ..Default::default()
        }
    }

    #[test]
    fn config_round_trips_through_toml() {
        let cfg = small(7);
        let text = toml::to_string(&cfg).unwrap();
        assert_eq!(ExperimentConfig::from_toml_str(&text).unwrap(), cfg);
    }

    #[test]
    fn partial_toml_uses_defaults() {
        let cfg = ExperimentConfig::from_toml_str("rounds = 3\nschemes = [\"optimal\"]\n[scenario]\ndevice_count = 5\n").unwrap();
        assert_eq!(cfg.rounds, 3);
        assert_eq!(cfg.schemes, vec![Scheme::Optimal]);
        assert_eq!(cfg.scenario.device_count, 5);
        assert_eq!(cfg.scenario.area, [500.0, 500.0]);
        assert!(ExperimentConfig::from_toml_str("bogus = 1").is_err());
    }

    #[test]
    fn invalid_configs_are_rejected() {
        for cfg in [
            ExperimentConfig { rounds: 0, ..small(1) },
            ExperimentConfig { schemes: vec![], ..small(1) },
            ExperimentConfig { schemes: vec![Scheme::Greedy, Scheme::Greedy], ..small(1) },
            ExperimentConfig { confidence_level: 1.0, ..small(1) },
            ExperimentConfig { jobs: 0, ..small(1) },
        ] {
            assert!(matches!(run_experiment(&cfg), Err(SimError::Config(_))));
        }
        let mut bad = small(1);
        bad.scenario.task_frequency = 1.5;
        assert!(matches!(run_experiment(&bad), Err(SimError::Scenario(_))));
    }

    #[test]
    fn lone_device_always_runs_locally() {
        let mut cfg = small(1);
        cfg.scenario.device_count = 1;
        cfg.scenario.task_frequency = 1.0;
        let s = run_experiment(&cfg).unwrap();
        assert_eq!(s.records.len(), 4);
        for r in &s.records {
            assert_eq!((r.tasks, r.n_local, r.saving_ratio), (1, 1, 0.0));
        }
    }

    #[test]
    fn records_cover_every_round_and_scheme() {
        let s = run_experiment(&small(5)).unwrap();
        assert_eq!(s.records.len(), 20);
        assert_eq!(s.inputs.len(), 5);
        for (i, chunk) in s.records.chunks(4).enumerate() {
            assert!(chunk.iter().all(|r| r.round == i as u64 + 1));
            let schemes: Vec<Scheme> = chunk.iter().map(|r| r.scheme).collect();
            assert_eq!(schemes, Scheme::ALL.to_vec());
            assert!(chunk.iter().all(|r| r.energy_j >= chunk[0].energy_j * (1.0 - 1e-12)));
        }
    }

    #[test]
    fn parallel_run_matches_serial() {
        let serial = run_experiment(&small(6)).unwrap();
        let parallel = run_experiment(&ExperimentConfig { jobs: 3, ..small(6) }).unwrap();
        assert_eq!(serial.records, parallel.records);
        assert_eq!(serial.inputs, parallel.inputs);
    }

    #[test]
    fn timing_is_opt_in() {
        let s = run_experiment(&small(2)).unwrap();
        assert!(s.records.iter().all(|r| r.solve_ms == 0.0));
        let t = run_experiment(&ExperimentConfig { timing: true, ..small(2) }).unwrap();
        assert!(t.records.iter().any(|r| r.solve_ms > 0.0));
    }

    #[test]
    fn incentive_run_keeps_the_ledger_balanced() {
        let mut cfg = small(15);
        cfg.incentive = true;
        cfg.incentive_params.beta_cpu = 0.05;
        cfg.incentive_params.beta_cell = 0.05;
        let s = run_experiment(&cfg).unwrap();
        assert_eq!(s.ledger_trace.len(), 15);
        assert!(s.ledger.is_some());
        assert!(s.inputs.iter().any(|i| !i.ineligible.is_empty()));
    }

    #[test]
    fn format_parses() {
        assert_eq!("CSV".parse::<OutputFormat>().unwrap(), OutputFormat::Csv);
        assert_eq!("json".parse::<OutputFormat>().unwrap(), OutputFormat::Json);
        assert!("xml".parse::<OutputFormat>().is_err());
    }
}
