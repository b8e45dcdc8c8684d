// Primal-dual blossom algorithm for weighted matching in general graphs.
//
// The structure follows the classic O(n^3) formulation (Galil 1986; Gabow
// 1973) as popularised by Joris van Rantwijk's reference implementation:
// vertices are 0..n, non-trivial blossoms n..2n, edge k has endpoints 2k and
// 2k+1. The solver maximises Σ (C - w) over maximum-cardinality matchings,
// where C is the largest input weight, which is the same as minimising Σ w
// over perfect matchings whenever one exists.

use std::fmt::Write as _;

use super::certificate::{DualCertificate, OddSetDual};
use super::{Matching, MatchingError, WeightedGraph};
use crate::scalar::Scalar;

const NONE: usize = usize::MAX;

// Labels. BREADCRUMB is or-ed onto S while scanning for a blossom base.
const FREE: u8 = 0;
const S: u8 = 1;
const T: u8 = 2;
const BREADCRUMB: u8 = 4;

/// Mutable solver state for one graph. Single-threaded; build one per graph.
pub struct BlossomSolver<'g, W> {
    graph: &'g WeightedGraph<W>,
    n: usize,
    /// Shift that turns min-weight into max-weight: w' = offset - w.
    offset: W,
    eps: W,
    weight: Vec<W>,
    endpoint: Vec<usize>,
    neighbend: Vec<Vec<usize>>,
    mate: Vec<usize>,
    label: Vec<u8>,
    labelend: Vec<usize>,
    inblossom: Vec<usize>,
    blossomparent: Vec<usize>,
    blossomchilds: Vec<Vec<usize>>,
    blossombase: Vec<usize>,
    blossomendps: Vec<Vec<usize>>,
    bestedge: Vec<usize>,
    blossombestedges: Vec<Option<Vec<usize>>>,
    unusedblossoms: Vec<usize>,
    /// Vertices: 2u(v). Blossoms: z(b).
    dualvar: Vec<W>,
    allowedge: Vec<bool>,
    queue: Vec<usize>,
    solved: bool,
}

impl<'g, W: Scalar> BlossomSolver<'g, W> {
    pub fn new(graph: &'g WeightedGraph<W>) -> Self {
        let n = graph.node_count();
        let m = graph.edges().len();
        let offset = graph.max_weight();
        let eps = W::tight_eps() * W::one().max(offset);
        let weight: Vec<W> = graph.edges().iter().map(|e| offset - e.weight).collect();
        let mut endpoint = Vec::with_capacity(2 * m);
        let mut neighbend = vec![Vec::new(); n];
        for (k, e) in graph.edges().iter().enumerate() {
            endpoint.push(e.u);
            endpoint.push(e.v);
            neighbend[e.u].push(2 * k + 1);
            neighbend[e.v].push(2 * k);
        }
        let max_transformed = weight.iter().fold(W::zero(), |a, &b| a.max(b));
        let mut dualvar = vec![max_transformed; n];
        dualvar.extend(std::iter::repeat(W::zero()).take(n));
        let mut blossombase: Vec<usize> = (0..n).collect();
        blossombase.extend(std::iter::repeat(NONE).take(n));
        BlossomSolver {
            graph,
            n,
            offset,
            eps,
            weight,
            endpoint,
            neighbend,
            mate: vec![NONE; n],
            label: vec![FREE; 2 * n],
            labelend: vec![NONE; 2 * n],
            inblossom: (0..n).collect(),
            blossomparent: vec![NONE; 2 * n],
            blossomchilds: vec![Vec::new(); 2 * n],
            blossombase,
            blossomendps: vec![Vec::new(); 2 * n],
            bestedge: vec![NONE; 2 * n],
            blossombestedges: vec![None; 2 * n],
            unusedblossoms: (n..2 * n).rev().collect(),
            dualvar,
            allowedge: vec![false; m],
            queue: Vec::new(),
            solved: false,
        }
    }

    #[inline]
    fn slack(&self, k: usize) -> W {
        let i = self.endpoint[2 * k];
        let j = self.endpoint[2 * k + 1];
        self.dualvar[i] + self.dualvar[j] - (self.weight[k] + self.weight[k])
    }

    fn leaves(&self, b: usize) -> Vec<usize> {
        let mut out = Vec::new();
        self.collect_leaves(b, &mut out);
        out
    }

    fn collect_leaves(&self, b: usize, out: &mut Vec<usize>) {
        if b < self.n {
            out.push(b);
        } else {
            for &t in &self.blossomchilds[b] {
                self.collect_leaves(t, out);
            }
        }
    }

    fn assign_label(&mut self, w: usize, t: u8, p: usize) {
        let mut w = w;
        let mut t = t;
        let mut p = p;
        loop {
            let b = self.inblossom[w];
            debug_assert!(self.label[w] == FREE && self.label[b] == FREE);
            self.label[w] = t;
            self.label[b] = t;
            self.labelend[w] = p;
            self.labelend[b] = p;
            self.bestedge[w] = NONE;
            self.bestedge[b] = NONE;
            if t == S {
                let leaves = self.leaves(b);
                self.queue.extend(leaves);
                return;
            }
            // T-blossom: its base is matched, label the mate S
            let base = self.blossombase[b];
            let mb = self.mate[base];
            debug_assert!(mb != NONE);
            w = self.endpoint[mb];
            t = S;
            p = mb ^ 1;
        }
    }

    /// Walks up the alternating trees from v and w. Returns the base of a new
    /// blossom, or NONE if the trees are different (augmenting path).
    fn scan_blossom(&mut self, v: usize, w: usize) -> usize {
        let mut path = Vec::new();
        let mut base = NONE;
        let (mut v, mut w) = (v, w);
        while v != NONE || w != NONE {
            let b = self.inblossom[v];
            if self.label[b] & BREADCRUMB != 0 {
                base = self.blossombase[b];
                break;
            }
            debug_assert_eq!(self.label[b], S);
            path.push(b);
            self.label[b] = S | BREADCRUMB;
            if self.labelend[b] == NONE {
                v = NONE;
            } else {
                v = self.endpoint[self.labelend[b]];
                let bt = self.inblossom[v];
                debug_assert_eq!(self.label[bt], T);
                v = self.endpoint[self.labelend[bt]];
            }
            if w != NONE {
                std::mem::swap(&mut v, &mut w);
            }
        }
        for b in path {
            self.label[b] = S;
        }
        base
    }

    fn add_blossom(&mut self, base: usize, k: usize) {
        let mut v = self.endpoint[2 * k];
        let mut w = self.endpoint[2 * k + 1];
        let bb = self.inblossom[base];
        let mut bv = self.inblossom[v];
        let mut bw = self.inblossom[w];
        let b = self.unusedblossoms.pop().expect("blossom ids available");
        self.blossombase[b] = base;
        self.blossomparent[b] = NONE;
        self.blossomparent[bb] = b;
        let mut path = Vec::new();
        let mut endps = Vec::new();
        while bv != bb {
            self.blossomparent[bv] = b;
            path.push(bv);
            endps.push(self.labelend[bv]);
            v = self.endpoint[self.labelend[bv]];
            bv = self.inblossom[v];
        }
        path.push(bb);
        path.reverse();
        endps.reverse();
        endps.push(2 * k);
        while bw != bb {
            self.blossomparent[bw] = b;
            path.push(bw);
            endps.push(self.labelend[bw] ^ 1);
            w = self.endpoint[self.labelend[bw]];
            bw = self.inblossom[w];
        }
        debug_assert_eq!(self.label[bb], S);
        self.label[b] = S;
        self.labelend[b] = self.labelend[bb];
        self.dualvar[b] = W::zero();
        for leaf in {
            self.blossomchilds[b] = path.clone();
            self.leaves(b)
        } {
            if self.label[self.inblossom[leaf]] == T {
                // former T-vertices become S and must be scanned
                self.queue.push(leaf);
            }
            self.inblossom[leaf] = b;
        }
        self.blossomendps[b] = endps;

        // least-slack edges from the new blossom to every other S-blossom
        let mut bestedgeto = vec![NONE; 2 * self.n];
        for &sub in &path {
            let lists: Vec<Vec<usize>> = match self.blossombestedges[sub].take() {
                Some(list) => vec![list],
                None => self
                    .leaves(sub)
                    .into_iter()
                    .map(|leaf| self.neighbend[leaf].iter().map(|p| p / 2).collect())
                    .collect(),
            };
            for list in lists {
                for k in list {
                    let (mut i, mut j) = (self.endpoint[2 * k], self.endpoint[2 * k + 1]);
                    if self.inblossom[j] == b {
                        std::mem::swap(&mut i, &mut j);
                    }
                    let _ = i;
                    let bj = self.inblossom[j];
                    if bj != b
                        && self.label[bj] == S
                        && (bestedgeto[bj] == NONE || self.slack(k) < self.slack(bestedgeto[bj]))
                    {
                        bestedgeto[bj] = k;
                    }
                }
            }
            self.bestedge[sub] = NONE;
        }
        let best: Vec<usize> = bestedgeto.into_iter().filter(|&k| k != NONE).collect();
        self.bestedge[b] = NONE;
        for &k in &best {
            if self.bestedge[b] == NONE || self.slack(k) < self.slack(self.bestedge[b]) {
                self.bestedge[b] = k;
            }
        }
        self.blossombestedges[b] = Some(best);
    }

    fn expand_blossom(&mut self, b: usize, endstage: bool) {
        let childs = self.blossomchilds[b].clone();
        for &s in &childs {
            self.blossomparent[s] = NONE;
            if s < self.n {
                self.inblossom[s] = s;
            } else if endstage && self.dualvar[s] == W::zero() {
                self.expand_blossom(s, endstage);
            } else {
                for leaf in self.leaves(s) {
                    self.inblossom[leaf] = s;
                }
            }
        }

        if !endstage && self.label[b] == T {
            // Relabel the sub-blossoms on the even-length path from the entry
            // child to the base; the rest become free or stay reachable.
            let len = childs.len() as isize;
            let at = |j: isize| -> usize { j.rem_euclid(len) as usize };
            let entrychild = self.inblossom[self.endpoint[self.labelend[b] ^ 1]];
            let mut j = childs.iter().position(|&c| c == entrychild).expect("entry child") as isize;
            let (jstep, endptrick): (isize, usize) = if j & 1 == 1 {
                j -= len;
                (1, 0)
            } else {
                (-1, 1)
            };
            let endps = self.blossomendps[b].clone();
            let mut p = self.labelend[b];
            while j != 0 {
                let q = endps[at(j - endptrick as isize)] ^ endptrick;
                self.label[self.endpoint[p ^ 1]] = FREE;
                self.label[self.endpoint[q ^ 1]] = FREE;
                self.assign_label(self.endpoint[p ^ 1], T, p);
                self.allowedge[q / 2] = true;
                j += jstep;
                p = endps[at(j - endptrick as isize)] ^ endptrick;
                self.allowedge[p / 2] = true;
                j += jstep;
            }
            let bv = childs[at(j)];
            let ep = self.endpoint[p ^ 1];
            self.label[ep] = T;
            self.label[bv] = T;
            self.labelend[ep] = p;
            self.labelend[bv] = p;
            self.bestedge[bv] = NONE;
            j += jstep;
            while childs[at(j)] != entrychild {
                let bv = childs[at(j)];
                if self.label[bv] == S {
                    j += jstep;
                    continue;
                }
                let reached = self.leaves(bv).into_iter().find(|&v| self.label[v] != FREE);
                if let Some(v) = reached {
                    debug_assert_eq!(self.label[v], T);
                    debug_assert_eq!(self.inblossom[v], bv);
                    self.label[v] = FREE;
                    let base_mate = self.endpoint[self.mate[self.blossombase[bv]]];
                    self.label[base_mate] = FREE;
                    self.assign_label(v, T, self.labelend[v]);
                }
                j += jstep;
            }
        }

        self.label[b] = FREE;
        self.labelend[b] = NONE;
        self.blossomchilds[b].clear();
        self.blossomendps[b].clear();
        self.blossombase[b] = NONE;
        self.blossombestedges[b] = None;
        self.bestedge[b] = NONE;
        self.unusedblossoms.push(b);
    }

    /// Swaps matched and unmatched edges along the even path from v to the
    /// base of blossom b, making v the new base.
    fn augment_blossom(&mut self, b: usize, v: usize) {
        let mut t = v;
        while self.blossomparent[t] != b {
            t = self.blossomparent[t];
        }
        if t >= self.n {
            self.augment_blossom(t, v);
        }
        let len = self.blossomchilds[b].len() as isize;
        let at = |j: isize| -> usize { j.rem_euclid(len) as usize };
        let i = self.blossomchilds[b].iter().position(|&c| c == t).expect("child") as isize;
        let mut j = i;
        let (jstep, endptrick): (isize, usize) = if i & 1 == 1 {
            j -= len;
            (1, 0)
        } else {
            (-1, 1)
        };
        while j != 0 {
            j += jstep;
            let t1 = self.blossomchilds[b][at(j)];
            let p = self.blossomendps[b][at(j - endptrick as isize)] ^ endptrick;
            if t1 >= self.n {
                self.augment_blossom(t1, self.endpoint[p]);
            }
            j += jstep;
            let t2 = self.blossomchilds[b][at(j)];
            if t2 >= self.n {
                self.augment_blossom(t2, self.endpoint[p ^ 1]);
            }
            self.mate[self.endpoint[p]] = p ^ 1;
            self.mate[self.endpoint[p ^ 1]] = p;
        }
        self.blossomchilds[b].rotate_left(i as usize);
        self.blossomendps[b].rotate_left(i as usize);
        self.blossombase[b] = self.blossombase[self.blossomchilds[b][0]];
        debug_assert_eq!(self.blossombase[b], v);
    }

    fn augment_matching(&mut self, k: usize) {
        let v = self.endpoint[2 * k];
        let w = self.endpoint[2 * k + 1];
        for (start, first_p) in [(v, 2 * k + 1), (w, 2 * k)] {
            let mut s = start;
            let mut p = first_p;
            loop {
                let bs = self.inblossom[s];
                debug_assert_eq!(self.label[bs], S);
                if bs >= self.n {
                    self.augment_blossom(bs, s);
                }
                self.mate[s] = p;
                if self.labelend[bs] == NONE {
                    break;
                }
                let t = self.endpoint[self.labelend[bs]];
                let bt = self.inblossom[t];
                debug_assert_eq!(self.label[bt], T);
                s = self.endpoint[self.labelend[bt]];
                let j = self.endpoint[self.labelend[bt] ^ 1];
                if bt >= self.n {
                    self.augment_blossom(bt, j);
                }
                self.mate[j] = self.labelend[bt];
                p = self.labelend[bt] ^ 1;
            }
        }
    }

    fn scan_queue(&mut self) -> bool {
        while let Some(v) = self.queue.pop() {
            debug_assert_eq!(self.label[self.inblossom[v]], S);
            for idx in 0..self.neighbend[v].len() {
                let p = self.neighbend[v][idx];
                let k = p / 2;
                let w = self.endpoint[p];
                if self.inblossom[v] == self.inblossom[w] {
                    continue;
                }
                let mut kslack = W::zero();
                if !self.allowedge[k] {
                    kslack = self.slack(k);
                    if kslack <= self.eps {
                        self.allowedge[k] = true;
                    }
                }
                if self.allowedge[k] {
                    let bw = self.inblossom[w];
                    if self.label[bw] == FREE {
                        self.assign_label(w, T, p ^ 1);
                    } else if self.label[bw] == S {
                        let base = self.scan_blossom(v, w);
                        if base != NONE {
                            self.add_blossom(base, k);
                        } else {
                            self.augment_matching(k);
                            return true;
                        }
                    } else if self.label[w] == FREE {
                        // w is inside a T-blossom but not yet reached
                        self.label[w] = T;
                        self.labelend[w] = p ^ 1;
                    }
                } else if self.label[self.inblossom[w]] == S {
                    let b = self.inblossom[v];
                    if self.bestedge[b] == NONE || kslack < self.slack(self.bestedge[b]) {
                        self.bestedge[b] = k;
                    }
                } else if self.label[w] == FREE
                    && (self.bestedge[w] == NONE || kslack < self.slack(self.bestedge[w]))
                {
                    self.bestedge[w] = k;
                }
            }
        }
        false
    }

    /// Heuristic start: feasible min-form potentials `y` raised vertex by
    /// vertex until some incident edge is tight, then a greedy matching on
    /// tight edges. Stored as `2u = C - 2y` so the blossom stages only have
    /// to cover what is left.
    fn warm_start(&mut self) {
        let n = self.n;
        let two = W::one() + W::one();
        let edges = self.graph.edges();
        let mut y = vec![W::infinity(); n];
        for e in edges {
            let half = e.weight / two;
            y[e.u] = y[e.u].min(half);
            y[e.v] = y[e.v].min(half);
        }
        for v in 0..n {
            if y[v].is_infinite() {
                // isolated vertex: no perfect matching, leave it to solve()
                y[v] = W::zero();
                continue;
            }
            let mut room = W::infinity();
            for &p in &self.neighbend[v] {
                let k = p / 2;
                let u = self.endpoint[p];
                room = room.min(edges[k].weight - y[v] - y[u]);
            }
            if room > W::zero() {
                y[v] = y[v] + room;
            }
        }
        for v in 0..n {
            self.dualvar[v] = self.offset - two * y[v];
        }
        for v in 0..n {
            if self.mate[v] != NONE {
                continue;
            }
            for idx in 0..self.neighbend[v].len() {
                let p = self.neighbend[v][idx];
                let u = self.endpoint[p];
                if self.mate[u] == NONE && self.slack(p / 2) <= self.eps {
                    self.mate[v] = p;
                    self.mate[u] = p ^ 1;
                    break;
                }
            }
        }
    }

    /// Runs the solver. Fails with [`MatchingError::Infeasible`] if the graph
    /// has no perfect matching.
    pub fn solve(&mut self) -> Result<(), MatchingError> {
        let n = self.n;
        if n % 2 == 1 {
            return Err(MatchingError::Infeasible);
        }
        self.warm_start();
        for _stage in 0..n {
            self.label.fill(FREE);
            self.bestedge.fill(NONE);
            for b in n..2 * n {
                self.blossombestedges[b] = None;
            }
            self.allowedge.fill(false);
            self.queue.clear();
            for v in 0..n {
                if self.mate[v] == NONE && self.label[self.inblossom[v]] == FREE {
                    self.assign_label(v, S, NONE);
                }
            }

            let mut augmented = false;
            loop {
                if self.scan_queue() {
                    augmented = true;
                    break;
                }

                // No tight edge left to explore: pick the smallest dual step.
                enum Step {
                    ToFree(usize),
                    BetweenS(usize),
                    ExpandT(usize),
                }
                let mut best: Option<(W, Step)> = None;
                for v in 0..n {
                    if self.label[self.inblossom[v]] == FREE && self.bestedge[v] != NONE {
                        let d = self.slack(self.bestedge[v]);
                        if best.as_ref().map_or(true, |(bd, _)| d < *bd) {
                            best = Some((d, Step::ToFree(self.bestedge[v])));
                        }
                    }
                }
                for b in 0..2 * n {
                    if self.blossomparent[b] == NONE && self.label[b] == S && self.bestedge[b] != NONE {
                        let d = self.slack(self.bestedge[b]) / (W::one() + W::one());
                        if best.as_ref().map_or(true, |(bd, _)| d < *bd) {
                            best = Some((d, Step::BetweenS(self.bestedge[b])));
                        }
                    }
                }
                for b in n..2 * n {
                    if self.blossombase[b] != NONE
                        && self.blossomparent[b] == NONE
                        && self.label[b] == T
                        && best.as_ref().map_or(true, |(bd, _)| self.dualvar[b] < *bd)
                    {
                        best = Some((self.dualvar[b], Step::ExpandT(b)));
                    }
                }
                let Some((delta, step)) = best else {
                    // no augmenting path exists: matching cannot grow
                    break;
                };
                let delta = delta.max(W::zero());

                for v in 0..n {
                    match self.label[self.inblossom[v]] {
                        S => self.dualvar[v] = self.dualvar[v] - delta,
                        T => self.dualvar[v] = self.dualvar[v] + delta,
                        _ => {}
                    }
                }
                for b in n..2 * n {
                    if self.blossombase[b] != NONE && self.blossomparent[b] == NONE {
                        match self.label[b] {
                            S => self.dualvar[b] = self.dualvar[b] + delta,
                            T => self.dualvar[b] = (self.dualvar[b] - delta).max(W::zero()),
                            _ => {}
                        }
                    }
                }

                match step {
                    Step::ToFree(k) => {
                        self.allowedge[k] = true;
                        let (mut i, j) = (self.endpoint[2 * k], self.endpoint[2 * k + 1]);
                        if self.label[self.inblossom[i]] == FREE {
                            i = j;
                        }
                        self.queue.push(i);
                    }
                    Step::BetweenS(k) => {
                        self.allowedge[k] = true;
                        self.queue.push(self.endpoint[2 * k]);
                    }
                    Step::ExpandT(b) => {
                        self.dualvar[b] = W::zero();
                        self.expand_blossom(b, false);
                    }
                }
            }

            if !augmented {
                break;
            }
            for b in n..2 * n {
                if self.blossomparent[b] == NONE
                    && self.blossombase[b] != NONE
                    && self.label[b] == S
                    && self.dualvar[b] == W::zero()
                {
                    self.expand_blossom(b, true);
                }
            }
        }
        self.solved = true;
        if self.mate.iter().any(|&m| m == NONE) {
            return Err(MatchingError::Infeasible);
        }
        Ok(())
    }

    pub fn matching(&self) -> Matching<W> {
        assert!(self.solved, "solve() must run first");
        let mut edges: Vec<usize> = (0..self.n).filter_map(|v| {
            let p = self.mate[v];
            (p != NONE && v < self.endpoint[p]).then_some(p / 2)
        })
        .collect();
        edges.sort_unstable();
        Matching::from_edge_indices(self.graph, edges).expect("solver matching is vertex-disjoint")
    }

    /// Converts the internal max-weight duals into a min-weight certificate:
    /// `y_v = C/2 - u_v`, `z_B` unchanged.
    pub fn certificate(&self) -> DualCertificate<W> {
        let half = W::one() / (W::one() + W::one());
        let vertex_potentials = (0..self.n)
            .map(|v| self.offset * half - self.dualvar[v] * half)
            .collect();
        let odd_sets = (self.n..2 * self.n)
            .filter(|&b| self.blossombase[b] != NONE)
            .map(|b| {
                let mut members = self.leaves(b);
                members.sort_unstable();
                OddSetDual { members, value: self.dualvar[b] }
            })
            .collect();
        DualCertificate { vertex_potentials, odd_sets }
    }

    /// Plain-text dump of the current blossom forest, one top-level blossom
    /// per line with nested children in brackets.
    pub fn dump_forest(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "# blossom forest: {} vertices", self.n);
        for b in self.n..2 * self.n {
            if self.blossombase[b] != NONE && self.blossomparent[b] == NONE {
                let _ = writeln!(out, "{}", self.describe(b));
            }
        }
        for v in 0..self.n {
            let mate = match self.mate[v] {
                NONE => "-".to_string(),
                p => self.endpoint[p].to_string(),
            };
            let _ = writeln!(
                out,
                "v{v} mate={mate} top={} label={} u2={}",
                self.inblossom[v], self.label[self.inblossom[v]], self.dualvar[v]
            );
        }
        out
    }

    fn describe(&self, b: usize) -> String {
        if b < self.n {
            return format!("v{b}");
        }
        let inner: Vec<String> = self.blossomchilds[b].iter().map(|&c| self.describe(c)).collect();
        format!("B{b}(base={} z={})[{}]", self.blossombase[b], self.dualvar[b], inner.join(" "))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dump_lists_blossoms_and_mates() {
        let g = WeightedGraph::from_edges(
            6,
            [(0, 1, 1.0), (1, 2, 1.0), (0, 2, 1.0), (2, 3, 10.0), (3, 4, 1.0), (4, 5, 1.0), (3, 5, 1.0)],
        )
        .unwrap();
        let mut solver = BlossomSolver::new(&g);
        solver.solve().unwrap();
        let dump = solver.dump_forest();
        assert!(dump.starts_with("# blossom forest: 6 vertices"));
        assert_eq!(dump.lines().filter(|l| l.starts_with('v')).count(), 6);
        assert!(dump.contains("v2 mate=3"));
    }

    #[test]
    #[should_panic(expected = "solve() must run first")]
    fn matching_before_solve_panics() {
        let g = WeightedGraph::from_edges(2, [(0, 1, 1.0)]).unwrap();
        let solver = BlossomSolver::new(&g);
        let _ = solver.matching();
    }
}
