use super::{Matching, MatchingError, WeightedGraph};
use crate::scalar::Scalar;

/// Largest graph the exhaustive search accepts.
pub const BRUTE_FORCE_NODE_CAP: usize = 16;

/// Enumerates every perfect matching and returns one of minimum weight.
///
/// Ties keep the first matching found, where the lowest unmatched vertex is
/// paired with its neighbours in edge-list order.
pub fn brute_force_min_matching<T: Scalar>(graph: &WeightedGraph<T>) -> Result<Matching<T>, MatchingError> {
    let n = graph.node_count();
    if n > BRUTE_FORCE_NODE_CAP {
        return Err(MatchingError::TooLarge { nodes: n, cap: BRUTE_FORCE_NODE_CAP });
    }
    if n % 2 == 1 {
        return Err(MatchingError::Infeasible);
    }
    let mut incident: Vec<Vec<(usize, usize)>> = vec![Vec::new(); n];
    for (k, e) in graph.edges().iter().enumerate() {
        incident[e.u].push((e.v, k));
        incident[e.v].push((e.u, k));
    }

    struct Search<'a, T> {
        graph: &'a WeightedGraph<T>,
        incident: Vec<Vec<(usize, usize)>>,
        used: Vec<bool>,
        stack: Vec<usize>,
        best: Option<(T, Vec<usize>)>,
    }

    impl<T: Scalar> Search<'_, T> {
        fn run(&mut self, acc: T) {
            let Some(first) = self.used.iter().position(|u| !u) else {
                if self.best.as_ref().map_or(true, |(w, _)| acc < *w) {
                    self.best = Some((acc, self.stack.clone()));
                }
                return;
            };
            self.used[first] = true;
            for idx in 0..self.incident[first].len() {
                let (other, k) = self.incident[first][idx];
                if self.used[other] {
                    continue;
                }
                self.used[other] = true;
                self.stack.push(k);
                let w = self.graph.edges()[k].weight;
                self.run(acc + w);
                self.stack.pop();
                self.used[other] = false;
            }
            self.used[first] = false;
        }
    }

    let mut search = Search { graph, incident, used: vec![false; n], stack: Vec::new(), best: None };
    search.run(T::zero());
    let (_, edges) = search.best.ok_or(MatchingError::Infeasible)?;
    Ok(Matching::from_edge_indices(graph, edges).expect("enumerated edges are disjoint"))
}
