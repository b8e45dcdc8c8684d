use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use super::RoundRecord;
use crate::schemes::Scheme;

/// Per-scheme aggregate over all rounds. Field order is the column order of
/// `summary.csv`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SchemeSummary {
    pub scheme: Scheme,
    pub rounds: usize,
    pub mean_tasks: f64,
    pub mean_energy_j: f64,
    pub mean_saving_ratio: f64,
    pub ci_level: f64,
    /// Normal-approximation half-width of the confidence interval of the
    /// mean saving ratio.
    pub ci_half_width: f64,
    pub mean_solve_ms: f64,
    pub p50_solve_ms: f64,
    pub p95_solve_ms: f64,
    pub n_local: usize,
    pub n_offload: usize,
    pub n_exchange: usize,
}

/// Two-sided standard normal quantile for a central interval of `level`.
pub fn normal_quantile(level: f64) -> f64 {
    Normal::new(0.0, 1.0).expect("standard normal").inverse_cdf(0.5 + level / 2.0)
}

/// Nearest-rank percentile of `values` (`q` in [0, 100]); 0 when empty.
pub fn percentile(values: &[f64], q: f64) -> f64 {
    if values.is_empty() {
        return 0.0;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let rank = ((q / 100.0) * v.len() as f64).ceil() as usize;
    v[rank.clamp(1, v.len()) - 1]
}

fn mean(v: &[f64]) -> f64 {
    if v.is_empty() {
        0.0
    } else {
        v.iter().sum::<f64>() / v.len() as f64
    }
}

/// Summaries of `records` for each scheme in `schemes`, in that order.
pub fn summarize(records: &[RoundRecord], schemes: &[Scheme], level: f64) -> Vec<SchemeSummary> {
    let z = normal_quantile(level);
    schemes
        .iter()
        .map(|&scheme| {
            let rows: Vec<&RoundRecord> = records.iter().filter(|r| r.scheme == scheme).collect();
            let n = rows.len();
            let savings: Vec<f64> = rows.iter().map(|r| r.saving_ratio).collect();
            let times: Vec<f64> = rows.iter().map(|r| r.solve_ms).collect();
            let m = mean(&savings);
            let half = if n > 1 {
                let var = savings.iter().map(|s| (s - m).powi(2)).sum::<f64>() / (n - 1) as f64;
                z * var.sqrt() / (n as f64).sqrt()
            } else {
                0.0
            };
            SchemeSummary {
                scheme,
                rounds: n,
                mean_tasks: mean(&rows.iter().map(|r| r.tasks as f64).collect::<Vec<_>>()),
                mean_energy_j: mean(&rows.iter().map(|r| r.energy_j).collect::<Vec<_>>()),
                mean_saving_ratio: m,
                ci_level: level,
                ci_half_width: half,
                mean_solve_ms: mean(&times),
                p50_solve_ms: percentile(&times, 50.0),
                p95_solve_ms: percentile(&times, 95.0),
                n_local: rows.iter().map(|r| r.n_local).sum(),
                n_offload: rows.iter().map(|r| r.n_offload).sum(),
                n_exchange: rows.iter().map(|r| r.n_exchange).sum(),
            }
        })
        .collect()
}
