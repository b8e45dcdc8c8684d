use rand::Rng;
use serde::{Deserialize, Serialize};

use super::SimError;
use crate::assignment::{check_feasibility, objective, EnergyTable};
use crate::matchgraph::{EdgeCase, MatchingGraph};
use crate::matching::{brute_force_min_matching, min_weight_perfect_matching_certified, BlossomSolver, WeightedGraph};
use crate::scalar::approx_eq_rel;
use crate::scenario::{build_connectivity, generate_devices, generate_tasks, round_rng, Round, ScenarioConfig};
use crate::schemes::{brute_force_assignment, BRUTE_FORCE_DEVICE_CAP};

/// Relative tolerance for oracle agreement.
pub const ORACLE_TOL: f64 = 1e-9;
const MATCHING_NODE_CAP: usize = 12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerifyConfig {
    pub instances: usize,
    pub max_devices: usize,
    pub seed: u64,
    /// Debug aid: inflate local-execution edge weights by this factor
    /// before solving. Any nonzero value should make the check fail.
    pub perturb: Option<f64>,
}

impl Default for VerifyConfig {
    fn default() -> Self {
        VerifyConfig { instances: 500, max_devices: BRUTE_FORCE_DEVICE_CAP, seed: 1, perturb: None }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct VerifyReport {
    pub instances: usize,
    pub oracle_agreements: usize,
    pub certificates_valid: usize,
    pub feasible: usize,
    pub matching_graphs: usize,
    pub matching_agreements: usize,
    pub failures: Vec<String>,
}

impl VerifyReport {
    pub fn passed(&self) -> bool {
        self.failures.is_empty()
            && self.oracle_agreements == self.instances
            && self.certificates_valid == self.instances
            && self.feasible == self.instances
            && self.matching_agreements == self.matching_graphs
    }
}

/// Random small round: 1..=max_devices devices in a square whose side is
/// drawn so that connectivity ranges from sparse to complete.
pub fn random_small_round<R: Rng + ?Sized>(max_devices: usize, rng: &mut R) -> Round<f64> {
    let n = rng.gen_range(1..=max_devices.max(1));
    let side = rng.gen_range(50.0..450.0);
    let cfg = ScenarioConfig {
        device_count: n,
        area: [side, side],
        task_frequency: rng.gen_range(0.2..=1.0),
        ..Default::default()
    };
    let devices = generate_devices(&cfg, rng);
    let tasks = generate_tasks(&devices, &cfg, rng);
    let connectivity = build_connectivity(&devices, &cfg);
    Round { devices, tasks, connectivity }
}

/// Random graph on an even number of nodes (2..=cap) where every node has a
/// private mate, so a perfect matching always exists.
pub fn random_even_graph<R: Rng + ?Sized>(cap: usize, rng: &mut R) -> WeightedGraph<f64> {
    let half = rng.gen_range(1..=cap / 2);
    let n = 2 * half;
    let mut g = WeightedGraph::new(n);
    for i in 0..half {
        g.add_edge(i, i + half, rng.gen_range(0.0..10.0)).unwrap();
    }
    let density = rng.gen_range(0.1..0.9);
    for u in 0..n {
        for v in u + 1..n {
            if v != u + half && rng.gen_bool(density) {
                g.add_edge(u, v, rng.gen_range(0.0..10.0)).unwrap();
            }
        }
    }
    g
}

/// Oracle agreement, certificate validity and feasibility on `instances`
/// random rounds, plus solver-vs-enumeration on as many random graphs.
pub fn run_verify(cfg: &VerifyConfig) -> Result<VerifyReport, SimError> {
    if cfg.max_devices == 0 || cfg.max_devices > BRUTE_FORCE_DEVICE_CAP {
        return Err(SimError::Config(format!("max_devices must lie in 1..={BRUTE_FORCE_DEVICE_CAP}")));
    }
    if let Some(p) = cfg.perturb {
        if !(p.is_finite() && p > -1.0) {
            return Err(SimError::Config("perturbation factor must be finite and above -1".into()));
        }
    }
    let mut report = VerifyReport { instances: cfg.instances, matching_graphs: cfg.instances, ..Default::default() };
    for i in 0..cfg.instances {
        let mut rng = round_rng(cfg.seed, i as u64);
        let round = random_small_round(cfg.max_devices, &mut rng);
        if let Err(msg) = check_instance(&round, cfg.perturb, &mut report) {
            report.failures.push(format!("instance {i}: {msg}"));
        }

        let g = random_even_graph(MATCHING_NODE_CAP, &mut rng);
        match (min_weight_perfect_matching_certified(&g), brute_force_min_matching(&g)) {
            (Ok((m, cert)), Ok(b)) => {
                if approx_eq_rel(m.weight, b.weight, ORACLE_TOL) && cert.verify(&g, &m).is_ok() {
                    report.matching_agreements += 1;
                } else {
                    report.failures.push(format!("graph {i}: solver {} vs enumeration {}", m.weight, b.weight));
                }
            }
            (a, b) => report.failures.push(format!("graph {i}: {:?} / {:?}", a.err(), b.err())),
        }
    }
    Ok(report)
}

fn check_instance(round: &Round<f64>, perturb: Option<f64>, report: &mut VerifyReport) -> Result<(), String> {
    let table = EnergyTable::compute(round).map_err(|e| e.to_string())?;
    let graph = MatchingGraph::build(round, &table).map_err(|e| e.to_string())?;
    let factor = 1.0 + perturb.unwrap_or(0.0);
    let weighted = WeightedGraph::from_edges(
        graph.nodes().len(),
        graph.edges().iter().map(|e| {
            let w = if matches!(e.case, EdgeCase::Local { .. }) { e.weight * factor } else { e.weight };
            (e.a, e.b, w)
        }),
    )
    .map_err(|e| e.to_string())?;
    let mut solver = BlossomSolver::new(&weighted);
    solver.solve().map_err(|e| e.to_string())?;
    let matching = solver.matching();
    let certificate = solver.certificate();
    if certificate.verify(&weighted, &matching).is_ok() {
        report.certificates_valid += 1;
    } else {
        return Err("dual certificate rejected".into());
    }
    let decoded = graph.decode(&matching).map_err(|e| e.to_string())?;
    if check_feasibility(round, &decoded).is_ok() {
        report.feasible += 1;
    } else {
        return Err("decoded assignment is infeasible".into());
    }
    let optimal = objective(&table, &decoded).map_err(|e| e.to_string())?;
    let brute = brute_force_assignment(round).map_err(|e| e.to_string())?;
    if approx_eq_rel(optimal, brute.total, ORACLE_TOL) {
        report.oracle_agreements += 1;
        Ok(())
    } else {
        Err(format!("matching total {optimal} J, exhaustive optimum {} J", brute.total))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn clean_run_passes() {
        let r = run_verify(&VerifyConfig { instances: 60, ..Default::default() }).unwrap();
        assert!(r.passed(), "{:?}", r.failures);
        assert_eq!(r.oracle_agreements, 60);
    }

    #[test]
    fn tiny_rounds_pass_trivially() {
        let r = run_verify(&VerifyConfig { instances: 20, max_devices: 2, ..Default::default() }).unwrap();
        assert!(r.passed());
    }

    #[test]
    fn perturbation_is_caught() {
        let r = run_verify(&VerifyConfig { instances: 60, perturb: Some(1.0), ..Default::default() }).unwrap();
        assert!(!r.passed());
        assert!(r.oracle_agreements < 60);
    }

    #[test]
    fn cap_is_enforced() {
        assert!(run_verify(&VerifyConfig { max_devices: 9, ..Default::default() }).is_err());
    }
}
