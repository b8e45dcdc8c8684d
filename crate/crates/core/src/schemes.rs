//! Task assignment schemes: the matching-based optimum, the greedy,
//! reciprocal and random baselines, and an exhaustive oracle.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::assignment::{Assignment, EnergyTable};
use crate::matchgraph::{MatchGraphError, MatchingGraph};
use crate::matching::{BlossomSolver, DualCertificate, Matching, MatchingError, WeightedGraph};
use crate::model::{DeviceId, ModelError};
use crate::scalar::Scalar;
use crate::scenario::Round;

/// Largest round [`brute_force_assignment`] accepts.
pub const BRUTE_FORCE_DEVICE_CAP: usize = 8;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SchemeError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Graph(#[from] MatchGraphError),
    #[error(transparent)]
    Matching(#[from] MatchingError),
    #[error("round has {devices} devices, exhaustive search is capped at {cap}")]
    TooLarge { devices: usize, cap: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scheme {
    Optimal,
    Greedy,
    Reciprocal,
    Random,
}

impl Scheme {
    pub const ALL: [Scheme; 4] = [Scheme::Optimal, Scheme::Greedy, Scheme::Reciprocal, Scheme::Random];

    pub fn name(self) -> &'static str {
        match self {
            Scheme::Optimal => "optimal",
            Scheme::Greedy => "greedy",
            Scheme::Reciprocal => "reciprocal",
            Scheme::Random => "random",
        }
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Scheme {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Scheme::ALL
            .into_iter()
            .find(|x| x.name().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| format!("unknown scheme `{s}` (expected optimal, greedy, reciprocal or random)"))
    }
}

/// Everything the optimal pipeline produced for one round, kept so callers
/// can re-check the solver's answer.
#[derive(Debug, Clone)]
pub struct OptimalSolution<T> {
    pub graph: MatchingGraph<T>,
    pub weighted: WeightedGraph<T>,
    pub matching: Matching<T>,
    pub certificate: DualCertificate<T>,
    pub assignment: Assignment<T>,
}

/// Builds the matching graph over the improving links, solves it and
/// decodes the result.
pub fn solve_optimal<T: Scalar>(round: &Round<T>, table: &EnergyTable<T>) -> Result<OptimalSolution<T>, SchemeError> {
    let graph = MatchingGraph::build_pruned(round, table)?;
    let weighted = graph.to_weighted_graph();
    let mut solver = BlossomSolver::new(&weighted);
    solver.solve()?;
    let matching = solver.matching();
    let certificate = solver.certificate();
    let assignment = graph.decode(&matching)?;
    Ok(OptimalSolution { graph, weighted, matching, certificate, assignment })
}

pub fn assign_optimal<T: Scalar>(round: &Round<T>) -> Result<Assignment<T>, SchemeError> {
    let table = EnergyTable::compute(round)?;
    optimal_with_table(round, &table)
}

pub fn optimal_with_table<T: Scalar>(round: &Round<T>, table: &EnergyTable<T>) -> Result<Assignment<T>, SchemeError> {
    Ok(solve_optimal(round, table)?.assignment)
}

pub fn assign_greedy<T: Scalar>(round: &Round<T>) -> Result<Assignment<T>, SchemeError> {
    let table = EnergyTable::compute(round)?;
    greedy_with_table(round, &table)
}

/// One ascending pass over the local, offload and exchange edges of the
/// matching graph, taking every edge whose real endpoints are still free.
/// Ties go to the smaller node pair.
pub fn greedy_with_table<T: Scalar>(round: &Round<T>, table: &EnergyTable<T>) -> Result<Assignment<T>, SchemeError> {
    let graph = MatchingGraph::build(round, table)?;
    let mut order: Vec<usize> = graph.decision_edges().map(|(k, _)| k).collect();
    let edges = graph.edges();
    order.sort_by(|&x, &y| {
        let (ex, ey) = (&edges[x], &edges[y]);
        ex.weight
            .partial_cmp(&ey.weight)
            .unwrap_or(std::cmp::Ordering::Equal)
            .then_with(|| (ex.a.min(ex.b), ex.a.max(ex.b)).cmp(&(ey.a.min(ey.b), ey.a.max(ey.b))))
    });
    let mut used = vec![false; graph.nodes().len()];
    let mut chosen = Vec::new();
    for k in order {
        let e = &edges[k];
        if used[e.a] || used[e.b] {
            continue;
        }
        used[e.a] = true;
        used[e.b] = true;
        chosen.push(k);
    }
    Ok(graph.decode_edges(&chosen)?)
}

pub fn assign_reciprocal<T: Scalar>(round: &Round<T>) -> Result<Assignment<T>, SchemeError> {
    let table = EnergyTable::compute(round)?;
    reciprocal_with_table(round, &table)
}

/// Pairs of linked owners that both gain by swapping, taken cheapest pair
/// first; everyone else runs locally.
pub fn reciprocal_with_table<T: Scalar>(round: &Round<T>, table: &EnergyTable<T>) -> Result<Assignment<T>, SchemeError> {
    let mut pairs = Vec::new();
    for (a, b, _) in round.connectivity.edges() {
        let (Some(la), Some(lb)) = (table.local(a), table.local(b)) else { continue };
        let ab = table.offload(a, b).ok_or(MatchGraphError::MissingEnergy { owner: a, executor: b })?;
        let ba = table.offload(b, a).ok_or(MatchGraphError::MissingEnergy { owner: b, executor: a })?;
        if ab < la && ba < lb {
            pairs.push((ab + ba, a, b));
        }
    }
    pairs.sort_by(|x, y| x.0.partial_cmp(&y.0).unwrap_or(std::cmp::Ordering::Equal).then((x.1, x.2).cmp(&(y.1, y.2))));
    let mut executors: BTreeMap<DeviceId, DeviceId> = BTreeMap::new();
    for (_, a, b) in pairs {
        if executors.contains_key(&a) || executors.contains_key(&b) {
            continue;
        }
        executors.insert(a, b);
        executors.insert(b, a);
    }
    for owner in table.owners() {
        executors.entry(owner).or_insert(owner);
    }
    Ok(Assignment::priced(executors, table).expect("reciprocal pairs are linked owners"))
}

pub fn assign_random<T: Scalar, R: Rng + ?Sized>(round: &Round<T>, rng: &mut R) -> Result<Assignment<T>, SchemeError> {
    let table = EnergyTable::compute(round)?;
    random_with_table(round, &table, rng)
}

/// Owners in random order each pick uniformly among themselves and their
/// still-unused task-less neighbours.
pub fn random_with_table<T: Scalar, R: Rng + ?Sized>(
    round: &Round<T>,
    table: &EnergyTable<T>,
    rng: &mut R,
) -> Result<Assignment<T>, SchemeError> {
    let mut owners: Vec<DeviceId> = table.owners().collect();
    owners.shuffle(rng);
    let mut used = vec![false; round.devices.len()];
    let mut executors = BTreeMap::new();
    let mut candidates = Vec::new();
    for owner in owners {
        candidates.clear();
        candidates.push(owner);
        candidates.extend(
            round
                .connectivity
                .neighbors(owner)
                .map(|(j, _)| j)
                .filter(|&j| !round.owns_task(j) && !used[j.0]),
        );
        let exec = *candidates.choose(rng).expect("owner is always a candidate");
        used[exec.0] = true;
        executors.insert(owner, exec);
    }
    Ok(Assignment::priced(executors, table).expect("random picks follow links"))
}

pub fn brute_force_assignment<T: Scalar>(round: &Round<T>) -> Result<Assignment<T>, SchemeError> {
    if round.devices.len() > BRUTE_FORCE_DEVICE_CAP {
        return Err(SchemeError::TooLarge { devices: round.devices.len(), cap: BRUTE_FORCE_DEVICE_CAP });
    }
    let table = EnergyTable::compute(round)?;
    let owners: Vec<DeviceId> = table.owners().collect();
    let mut search = Exhaustive {
        round,
        table: &table,
        owners: &owners,
        current: BTreeMap::new(),
        busy: vec![false; round.devices.len()],
        best: None,
    };
    search.descend(0, T::zero());
    let (_, executors) = search.best.expect("all-local is always feasible");
    Ok(Assignment::priced(executors, &table).expect("search only follows links"))
}

/// Depth-first search over per-owner executor choices. `busy` marks devices
/// already running some task.
struct Exhaustive<'a, T> {
    round: &'a Round<T>,
    table: &'a EnergyTable<T>,
    owners: &'a [DeviceId],
    current: BTreeMap<DeviceId, DeviceId>,
    busy: Vec<bool>,
    best: Option<(T, BTreeMap<DeviceId, DeviceId>)>,
}

impl<T: Scalar> Exhaustive<'_, T> {
    fn descend(&mut self, idx: usize, cost: T) {
        let Some(&owner) = self.owners.get(idx) else {
            if self.best.as_ref().map_or(true, |(b, _)| cost < *b) {
                self.best = Some((cost, self.current.clone()));
            }
            return;
        };
        if self.current.contains_key(&owner) {
            // already placed by an earlier exchange
            self.descend(idx + 1, cost);
            return;
        }
        let local = self.table.local(owner).expect("owners have a local price");
        self.place(&[(owner, owner)], idx, cost + local);

        let neighbours: Vec<DeviceId> = self.round.connectivity.neighbors(owner).map(|(j, _)| j).collect();
        for j in neighbours {
            if self.busy[j.0] {
                continue;
            }
            let there = self.table.offload(owner, j).expect("neighbours are priced");
            if !self.round.owns_task(j) {
                self.place(&[(owner, j)], idx, cost + there);
            } else if !self.current.contains_key(&j) {
                let back = self.table.offload(j, owner).expect("neighbours are priced");
                self.place(&[(owner, j), (j, owner)], idx, cost + there + back);
            }
        }
    }

    fn place(&mut self, moves: &[(DeviceId, DeviceId)], idx: usize, cost: T) {
        for &(o, e) in moves {
            self.current.insert(o, e);
            self.busy[e.0] = true;
        }
        self.descend(idx + 1, cost);
        for &(o, e) in moves {
            self.current.remove(&o);
            self.busy[e.0] = false;
        }
    }
}

/// Runs `scheme` against a precomputed table. `rng` is only used by the
/// random baseline.
pub fn run_scheme<T: Scalar, R: Rng + ?Sized>(
    scheme: Scheme,
    round: &Round<T>,
    table: &EnergyTable<T>,
    rng: &mut R,
) -> Result<Assignment<T>, SchemeError> {
    match scheme {
        Scheme::Optimal => optimal_with_table(round, table),
        Scheme::Greedy => greedy_with_table(round, table),
        Scheme::Reciprocal => reciprocal_with_table(round, table),
        Scheme::Random => random_with_table(round, table, rng),
    }
}

pub fn total_energy<T: Scalar>(a: &Assignment<T>) -> T {
    a.total
}

pub use crate::assignment::saving_ratio;

#[cfg(test)]
mod tests {
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    use super::*;
    use crate::assignment::check_assignment;
    use crate::assignment::fixtures::*;

    fn d(i: usize) -> DeviceId {
        DeviceId(i)
    }

    #[test]
    fn scheme_names_round_trip() {
        for s in Scheme::ALL {
            assert_eq!(s.name().parse::<Scheme>().unwrap(), s);
        }
        assert!("matching".parse::<Scheme>().is_err());
    }

    #[test]
    fn lonely_owner_runs_locally() {
        let r = round(vec![device(0, 0.2, 5e6)], vec![cpu_task(0, 8e6)], &[]);
        for a in [assign_optimal(&r).unwrap(), assign_greedy(&r).unwrap(), assign_reciprocal(&r).unwrap()] {
            assert_eq!(a.executor_of(d(0)), Some(d(0)));
        }
    }

    #[test]
    fn cheap_idle_neighbour_takes_the_task() {
        // heavily loaded owner next to an idle device
        let r = round(vec![device(0, 0.9, 5e6), device(1, 0.0, 5e6)], vec![cpu_task(0, 8e6)], &[(0, 1)]);
        let t = EnergyTable::compute(&r).unwrap();
        assert!(t.offload(d(0), d(1)).unwrap() < t.local(d(0)).unwrap());
        assert_eq!(assign_optimal(&r).unwrap().executor_of(d(0)), Some(d(1)));
        assert_eq!(assign_greedy(&r).unwrap().executor_of(d(0)), Some(d(1)));
        let brute = brute_force_assignment(&r).unwrap();
        assert_eq!(brute.total, t.offload(d(0), d(1)).unwrap().min(t.local(d(0)).unwrap()));
    }

    #[test]
    fn no_tasks_costs_nothing() {
        let r = round(vec![device(0, 0.1, 5e6), device(1, 0.1, 5e6)], vec![], &[(0, 1)]);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        assert_eq!(assign_optimal(&r).unwrap().total, 0.0);
        assert_eq!(assign_greedy(&r).unwrap().total, 0.0);
        assert_eq!(assign_random(&r, &mut rng).unwrap().total, 0.0);
        assert_eq!(brute_force_assignment(&r).unwrap().total, 0.0);
        assert_eq!(saving_ratio(0.0, 0.0), 0.0);
    }

    #[test]
    fn greedy_can_be_beaten() {
        // Owner 0 saves a little by offloading to 2, owner 1 saves a lot.
        // Both can only reach 2; greedy gives it to whichever is cheaper in
        // absolute terms, which is the small task.
        let r = round(
            vec![device(0, 0.2, 5e6), device(1, 0.85, 5e6), device(2, 0.0, 5e6), device(3, 0.0, 5e6)],
            vec![cpu_task(0, 1e6), cpu_task(1, 8e6)],
            &[(0, 2), (1, 2)],
        );
        let g = assign_greedy(&r).unwrap();
        let o = assign_optimal(&r).unwrap();
        let b = brute_force_assignment(&r).unwrap();
        assert_eq!(g.executor_of(d(0)), Some(d(2)));
        assert_eq!(o.executor_of(d(1)), Some(d(2)));
        assert!(g.total > o.total * (1.0 + 1e-9));
        assert!((o.total - b.total).abs() <= 1e-9 * b.total);
    }

    #[test]
    fn reciprocal_pair_is_exchanged() {
        // both owners are better off on the other's cpu only if loads differ
        // in opposite directions for different task types
        let r = round(
            vec![device(0, 0.8, 1e6), device(1, 0.8, 1e6), device(2, 0.0, 5e6)],
            vec![cell_task(0, 4e6), cpu_task(1, 4e6)],
            &[(0, 1)],
        );
        let mut r = r;
        r.devices[1].cellular_rate = 1e7;
        r.devices[0].load = 0.0;
        let t = EnergyTable::compute(&r).unwrap();
        assert!(t.offload(d(0), d(1)).unwrap() < t.local(d(0)).unwrap());
        assert!(t.offload(d(1), d(0)).unwrap() < t.local(d(1)).unwrap());
        let a = assign_reciprocal(&r).unwrap();
        assert_eq!(a.executor_of(d(0)), Some(d(1)));
        assert_eq!(a.executor_of(d(1)), Some(d(0)));
        let expected = t.offload(d(0), d(1)).unwrap() + t.offload(d(1), d(0)).unwrap();
        assert!((a.total - expected).abs() < 1e-12 * expected);
    }

    #[test]
    fn one_sided_gain_is_not_reciprocal() {
        let r = round(
            vec![device(0, 0.9, 5e6), device(1, 0.0, 5e6)],
            vec![cpu_task(0, 8e6), cpu_task(1, 8e6)],
            &[(0, 1)],
        );
        let a = assign_reciprocal(&r).unwrap();
        assert_eq!(a.counts().local, 2);
    }

    #[test]
    fn random_without_idle_neighbours_is_local() {
        let r = round(
            vec![device(0, 0.5, 5e6), device(1, 0.5, 5e6)],
            vec![cpu_task(0, 8e6), cpu_task(1, 8e6)],
            &[(0, 1)],
        );
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..20 {
            assert_eq!(assign_random(&r, &mut rng).unwrap().counts().local, 2);
        }
    }

    #[test]
    fn random_is_reproducible_for_a_seed() {
        let r = round(
            vec![device(0, 0.5, 5e6), device(1, 0.5, 5e6), device(2, 0.0, 5e6), device(3, 0.1, 5e6)],
            vec![cpu_task(0, 8e6), cpu_task(1, 8e6)],
            &[(0, 2), (1, 2), (0, 3), (1, 3)],
        );
        let a = assign_random(&r, &mut ChaCha8Rng::seed_from_u64(9)).unwrap();
        let b = assign_random(&r, &mut ChaCha8Rng::seed_from_u64(9)).unwrap();
        assert_eq!(a, b);
        let t = EnergyTable::compute(&r).unwrap();
        check_assignment(&r, &t, &a, 1e-12).unwrap();
    }

    #[test]
    fn brute_force_refuses_large_rounds() {
        let devices = (0..9).map(|i| device(i, 0.1, 5e6)).collect();
        let r = round(devices, vec![], &[]);
        assert!(matches!(brute_force_assignment(&r), Err(SchemeError::TooLarge { devices: 9, cap: 8 })));
    }

    #[test]
    fn capacity_errors_propagate() {
        let r = round(vec![device(0, 1.0, 5e6)], vec![cpu_task(0, 8e6)], &[]);
        assert!(matches!(assign_optimal(&r), Err(SchemeError::Model(_))));
        assert!(matches!(assign_greedy(&r), Err(SchemeError::Model(_))));
    }
}
