//! Resource tit-for-tat credit ledger. A device may only have its task
//! offloaded while the resources it has received stay within what it has
//! contributed plus an allowance.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::assignment::Assignment;
use crate::model::{DeviceId, Task};
use crate::scenario::{Round, ScenarioConfig};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum IncentiveError {
    #[error("{0} must lie in [0, 1], got {1}")]
    OutOfRange(&'static str, f64),
    #[error("allowance must be finite and nonnegative, got {0}")]
    BadAllowance(f64),
    #[error("ledger tracks {ledger} devices, round has {round}")]
    SizeMismatch { ledger: usize, round: usize },
}

/// When an owner counts as eligible.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EligibilityRule {
    /// `α X <= β + Y` on the current balances.
    #[default]
    Standing,
    /// The balances must still satisfy the constraint after this round's
    /// task is credited, so `X <= β + Y` holds at every round end.
    Admission,
}

/// Incentive settings as they appear in an experiment config. `beta` is a
/// fraction of the allowance; the allowances default to one mean task's
/// CPU cycles and cellular bits.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IncentiveConfig {
    pub alpha_cpu: f64,
    pub beta_cpu: f64,
    pub alpha_cell: f64,
    pub beta_cell: f64,
    pub allowance_cpu: Option<f64>,
    pub allowance_cell: Option<f64>,
    pub rule: EligibilityRule,
}

impl Default for IncentiveConfig {
    fn default() -> Self {
        IncentiveConfig {
            alpha_cpu: 1.0,
            beta_cpu: 1.0,
            alpha_cell: 1.0,
            beta_cell: 1.0,
            allowance_cpu: None,
            allowance_cell: None,
            rule: EligibilityRule::Standing,
        }
    }
}

impl IncentiveConfig {
    pub fn validate(&self) -> Result<(), IncentiveError> {
        for (name, v) in [
            ("alpha_cpu", self.alpha_cpu),
            ("beta_cpu", self.beta_cpu),
            ("alpha_cell", self.alpha_cell),
            ("beta_cell", self.beta_cell),
        ] {
            if !(0.0..=1.0).contains(&v) {
                return Err(IncentiveError::OutOfRange(name, v));
            }
        }
        for a in [self.allowance_cpu, self.allowance_cell].into_iter().flatten() {
            if !a.is_finite() || a < 0.0 {
                return Err(IncentiveError::BadAllowance(a));
            }
        }
        Ok(())
    }

    /// Absolute terms for every device of a scenario.
    pub fn terms(&self, scenario: &ScenarioConfig) -> Terms {
        let (mean_cpu, mean_cell) = mean_task_demand(scenario);
        Terms {
            alpha_cpu: self.alpha_cpu,
            beta_cpu: self.beta_cpu * self.allowance_cpu.unwrap_or(mean_cpu),
            alpha_cell: self.alpha_cell,
            beta_cell: self.beta_cell * self.allowance_cell.unwrap_or(mean_cell),
        }
    }
}

/// Expected CPU cycles and cellular bits of one generated task.
pub fn mean_task_demand(cfg: &ScenarioConfig) -> (f64, f64) {
    let mix = &cfg.task_type_mix;
    let weight = mix.pure_cpu + mix.pure_cellular + mix.hybrid;
    if weight <= 0.0 {
        return (0.0, 0.0);
    }
    let input = cfg.input_size_range.mean();
    let cpu = input * (mix.pure_cpu * cfg.processing_density.pure_cpu + mix.hybrid * cfg.processing_density.hybrid);
    let cell = input * (mix.pure_cellular + mix.hybrid * cfg.hybrid_cellular_ratio);
    (cpu / weight, cell / weight)
}

/// Per-device constraint parameters; `beta_*` are in resource units.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Terms {
    pub alpha_cpu: f64,
    pub beta_cpu: f64,
    pub alpha_cell: f64,
    pub beta_cell: f64,
}

/// Resources one device has received (`x_*`) and contributed (`y_*`).
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Account {
    pub x_cpu: f64,
    pub y_cpu: f64,
    pub x_cell: f64,
    pub y_cell: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CreditLedger {
    pub accounts: Vec<Account>,
    pub terms: Vec<Terms>,
    pub rule: EligibilityRule,
}

impl CreditLedger {
    pub fn new(device_count: usize, terms: Terms, rule: EligibilityRule) -> Self {
        CreditLedger { accounts: vec![Account::default(); device_count], terms: vec![terms; device_count], rule }
    }

    pub fn from_config(cfg: &IncentiveConfig, scenario: &ScenarioConfig) -> Result<Self, IncentiveError> {
        cfg.validate()?;
        Ok(CreditLedger::new(scenario.device_count, cfg.terms(scenario), cfg.rule))
    }

    pub fn device_count(&self) -> usize {
        self.accounts.len()
    }

    pub fn account(&self, d: DeviceId) -> Account {
        self.accounts[d.0]
    }

    /// Whether both the CPU and the cellular constraint hold for `dev`.
    /// Under the admission rule `task` is the demand about to be offloaded.
    pub fn eligible(&self, dev: DeviceId, task: Option<&Task<f64>>) -> bool {
        let a = &self.accounts[dev.0];
        let t = &self.terms[dev.0];
        let (extra_cpu, extra_cell) = match (self.rule, task) {
            (EligibilityRule::Admission, Some(task)) => (task.cpu_cycles, task.cellular_traffic),
            _ => (0.0, 0.0),
        };
        t.alpha_cpu * (a.x_cpu + extra_cpu) <= t.beta_cpu + a.y_cpu
            && t.alpha_cell * (a.x_cell + extra_cell) <= t.beta_cell + a.y_cell
    }

    /// Credits every offloaded task: the owner receives, the executor
    /// contributes. Local executions change nothing.
    pub fn record(&mut self, assignment: &Assignment<f64>, round: &Round<f64>) {
        for (&owner, &exec) in &assignment.executors {
            if owner == exec {
                continue;
            }
            let Some(task) = round.task_of(owner) else { continue };
            self.accounts[owner.0].x_cpu += task.cpu_cycles;
            self.accounts[owner.0].x_cell += task.cellular_traffic;
            self.accounts[exec.0].y_cpu += task.cpu_cycles;
            self.accounts[exec.0].y_cell += task.cellular_traffic;
        }
    }

    /// Copy of `round` where every ineligible owner has lost its D2D links,
    /// so any scheme must run its task locally.
    pub fn filter_round(&self, round: &Round<f64>) -> Result<Round<f64>, IncentiveError> {
        if round.devices.len() != self.device_count() {
            return Err(IncentiveError::SizeMismatch { ledger: self.device_count(), round: round.devices.len() });
        }
        let mut out = round.clone();
        for task in &round.tasks {
            if !self.eligible(task.owner, Some(task)) {
                out.connectivity.isolate(task.owner);
            }
        }
        Ok(out)
    }

    pub fn ineligible_owners(&self, round: &Round<f64>) -> Vec<DeviceId> {
        round.tasks.iter().filter(|t| !self.eligible(t.owner, Some(t))).map(|t| t.owner).collect()
    }

    /// `(Σ X^CPU, Σ Y^CPU, Σ X^Cell, Σ Y^Cell)`.
    pub fn totals(&self) -> (f64, f64, f64, f64) {
        self.accounts.iter().fold((0.0, 0.0, 0.0, 0.0), |acc, a| {
            (acc.0 + a.x_cpu, acc.1 + a.y_cpu, acc.2 + a.x_cell, acc.3 + a.y_cell)
        })
    }
}

#[cfg(test)]
mod tests {
    use std::collections::BTreeMap;

    use super::*;
    use crate::assignment::fixtures::*;
    use crate::schemes::assign_optimal;

    fn d(i: usize) -> DeviceId {
        DeviceId(i)
    }

    fn terms(alpha: f64, beta: f64) -> Terms {
        Terms { alpha_cpu: alpha, beta_cpu: beta, alpha_cell: alpha, beta_cell: beta }
    }

    fn offload(pairs: &[(usize, usize)]) -> Assignment<f64> {
        let executors: BTreeMap<_, _> = pairs.iter().map(|&(a, b)| (d(a), d(b))).collect();
        Assignment { executors, energies: BTreeMap::new(), total: 0.0 }
    }

    #[test]
    fn fresh_ledger_is_eligible() {
        let l = CreditLedger::new(3, terms(1.0, 10.0), EligibilityRule::Standing);
        assert!((0..3).all(|i| l.eligible(d(i), None)));
    }

    #[test]
    fn overdrawn_device_is_ineligible() {
        let mut l = CreditLedger::new(1, terms(1.0, 0.0), EligibilityRule::Standing);
        l.accounts[0].x_cpu = 100.0;
        l.accounts[0].y_cpu = 50.0;
        assert!(!l.eligible(d(0), None));
        l.terms[0].alpha_cpu = 0.0;
        assert!(l.eligible(d(0), None));
    }

    #[test]
    fn cellular_constraint_counts_too() {
        let mut l = CreditLedger::new(1, terms(1.0, 0.0), EligibilityRule::Standing);
        l.accounts[0].x_cell = 1.0;
        assert!(!l.eligible(d(0), None));
    }

    #[test]
    fn record_credits_offloads_only() {
        let r = round(
            vec![device(0, 0.5, 5e6), device(1, 0.0, 5e6), device(2, 0.5, 5e6)],
            vec![cpu_task(0, 1e6), cell_task(2, 2e6)],
            &[(0, 1)],
        );
        let mut l = CreditLedger::new(3, terms(1.0, 1.0), EligibilityRule::Standing);
        l.record(&offload(&[(0, 0), (2, 2)]), &r);
        assert_eq!(l.totals(), (0.0, 0.0, 0.0, 0.0));
        l.record(&offload(&[(0, 1), (2, 2)]), &r);
        assert_eq!(l.account(d(0)).x_cpu, 3e9);
        assert_eq!(l.account(d(1)).y_cpu, 3e9);
        assert_eq!(l.account(d(2)), Account::default());
    }

    #[test]
    fn exchange_credits_both_sides() {
        let r = round(
            vec![device(0, 0.5, 5e6), device(1, 0.5, 5e6)],
            vec![cpu_task(0, 1e6), cell_task(1, 2e6)],
            &[(0, 1)],
        );
        let mut l = CreditLedger::new(2, terms(1.0, 1.0), EligibilityRule::Standing);
        l.record(&offload(&[(0, 1), (1, 0)]), &r);
        let (a, b) = (l.account(d(0)), l.account(d(1)));
        assert_eq!((a.x_cpu, a.y_cell), (3e9, 2e6));
        assert_eq!((b.x_cell, b.y_cpu), (2e6, 3e9));
        let (xc, yc, xl, yl) = l.totals();
        assert_eq!((xc, xl), (yc, yl));
    }

    #[test]
    fn ineligible_owners_stay_local() {
        let r = round(vec![device(0, 0.9, 5e6), device(1, 0.0, 5e6)], vec![cpu_task(0, 8e6)], &[(0, 1)]);
        assert_eq!(assign_optimal(&r).unwrap().executor_of(d(0)), Some(d(1)));
        let mut l = CreditLedger::new(2, terms(1.0, 0.0), EligibilityRule::Standing);
        l.accounts[0].x_cpu = 1.0;
        let filtered = l.filter_round(&r).unwrap();
        assert_eq!(l.ineligible_owners(&r), vec![d(0)]);
        assert_eq!(assign_optimal(&filtered).unwrap().executor_of(d(0)), Some(d(0)));
    }

    #[test]
    fn fresh_ledger_leaves_round_unchanged() {
        let r = round(vec![device(0, 0.9, 5e6), device(1, 0.0, 5e6)], vec![cpu_task(0, 8e6)], &[(0, 1)]);
        let l = CreditLedger::new(2, terms(1.0, 1.0), EligibilityRule::Standing);
        assert_eq!(l.filter_round(&r).unwrap(), r);
    }

    #[test]
    fn admission_rule_looks_ahead() {
        let r = round(vec![device(0, 0.9, 5e6), device(1, 0.0, 5e6)], vec![cpu_task(0, 8e6)], &[(0, 1)]);
        let task = r.task_of(d(0)).unwrap();
        let standing = CreditLedger::new(2, terms(1.0, 1e9), EligibilityRule::Standing);
        let admission = CreditLedger { rule: EligibilityRule::Admission, ..standing.clone() };
        assert!(standing.eligible(d(0), Some(task)));
        assert!(!admission.eligible(d(0), Some(task)));
    }

    #[test]
    fn size_mismatch_is_rejected() {
        let r = round(vec![device(0, 0.5, 5e6)], vec![], &[]);
        let l = CreditLedger::new(2, terms(1.0, 1.0), EligibilityRule::Standing);
        assert!(l.filter_round(&r).is_err());
    }

    #[test]
    fn config_validation_and_allowance() {
        let cfg = IncentiveConfig { beta_cpu: 1.5, ..Default::default() };
        assert!(cfg.validate().is_err());
        let scenario = ScenarioConfig::default();
        let (cpu, cell) = mean_task_demand(&scenario);
        let input = scenario.input_size_range.mean();
        assert!((cpu - input * (3000.0 + 1000.0) / 3.0).abs() < 1e-6 * cpu);
        assert!((cell - input * 1.1 / 3.0).abs() < 1e-6 * cell);
        let t = IncentiveConfig { beta_cpu: 0.5, ..Default::default() }.terms(&scenario);
        assert!((t.beta_cpu - 0.5 * cpu).abs() < 1e-6 * cpu);
    }
}
