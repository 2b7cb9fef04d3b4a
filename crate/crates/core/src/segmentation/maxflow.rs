//! s-t maximum flow by Dinic's blocking-flow algorithm over a residual
//! edge list, with the minimum cut read off residual reachability.

use std::collections::VecDeque;

/// Residual capacities at or below this are treated as saturated.
const RESIDUAL_EPS: f64 = 1e-12;

#[derive(Clone, Debug)]
struct Arc {
    to: usize,
    cap: f64,
    flow: f64,
}

#[derive(Clone, Debug, Default)]
pub struct FlowGraph {
    arcs: Vec<Arc>,
    adj: Vec<Vec<usize>>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct MaxFlowResult {
    pub value: f64,
    /// `true` for nodes on the source side of the minimum cut.
    pub source_side: Vec<bool>,
    /// Total capacity of arcs leaving the source side.
    pub cut_value: f64,
}

impl FlowGraph {
    pub fn new(n_nodes: usize) -> Self {
        FlowGraph {
            arcs: Vec::new(),
            adj: vec![Vec::new(); n_nodes],
        }
    }

    pub fn with_capacity(n_nodes: usize, n_edges: usize) -> Self {
        FlowGraph {
            arcs: Vec::with_capacity(2 * n_edges),
            adj: vec![Vec::new(); n_nodes],
        }
    }

    pub fn n_nodes(&self) -> usize {
        self.adj.len()
    }

    /// Adds `u -> v` with capacity `cap_uv` and `v -> u` with `cap_vu` as one
    /// residual pair. Returns the id of the forward arc.
    pub fn add_edge_pair(&mut self, u: usize, v: usize, cap_uv: f64, cap_vu: f64) -> usize {
        assert!(cap_uv >= 0.0 && cap_vu >= 0.0, "capacities must be nonnegative");
        let id = self.arcs.len();
        self.arcs.push(Arc {
            to: v,
            cap: cap_uv,
            flow: 0.0,
        });
        self.arcs.push(Arc {
            to: u,
            cap: cap_vu,
            flow: 0.0,
        });
        self.adj[u].push(id);
        self.adj[v].push(id + 1);
        id
    }

    pub fn add_edge(&mut self, u: usize, v: usize, cap: f64) -> usize {
        self.add_edge_pair(u, v, cap, 0.0)
    }

    /// Net flow on arc `id` (negative when the pair carries flow backwards).
    pub fn flow(&self, id: usize) -> f64 {
        self.arcs[id].flow
    }

    pub fn capacity(&self, id: usize) -> f64 {
        self.arcs[id].cap
    }

    /// `(from, to, capacity, flow)` for every arc, including reverse arcs.
    pub fn arcs(&self) -> impl Iterator<Item = (usize, usize, f64, f64)> + '_ {
        self.arcs
            .iter()
            .enumerate()
            .map(|(i, a)| (self.arcs[i ^ 1].to, a.to, a.cap, a.flow))
    }

    #[inline]
    fn residual(&self, id: usize) -> f64 {
        self.arcs[id].cap - self.arcs[id].flow
    }

    fn push(&mut self, id: usize, amount: f64) {
        self.arcs[id].flow += amount;
        self.arcs[id ^ 1].flow -= amount;
    }

    fn levels(&self, s: usize, t: usize) -> Option<Vec<u32>> {
        let mut level = vec![u32::MAX; self.n_nodes()];
        level[s] = 0;
        let mut queue = VecDeque::from([s]);
        while let Some(u) = queue.pop_front() {
            for &id in &self.adj[u] {
                let v = self.arcs[id].to;
                if level[v] == u32::MAX && self.residual(id) > RESIDUAL_EPS {
                    level[v] = level[u] + 1;
                    queue.push_back(v);
                }
            }
        }
        (level[t] != u32::MAX).then_some(level)
    }

    // Iterative DFS that finds one augmenting path in the level graph and
    // pushes its bottleneck. Returns the amount pushed (0 when blocked).
    fn augment(&mut self, s: usize, t: usize, level: &[u32], next: &mut [usize]) -> f64 {
        let mut path: Vec<usize> = Vec::new();
        let mut u = s;
        loop {
            if u == t {
                let amount = path
                    .iter()
                    .map(|&id| self.residual(id))
                    .fold(f64::INFINITY, f64::min);
                for &id in &path {
                    self.push(id, amount);
                }
                return amount;
            }
            let mut advanced = false;
            while next[u] < self.adj[u].len() {
                let id = self.adj[u][next[u]];
                let v = self.arcs[id].to;
                if self.residual(id) > RESIDUAL_EPS && level[v] == level[u] + 1 {
                    path.push(id);
                    u = v;
                    advanced = true;
                    break;
                }
                next[u] += 1;
            }
            if !advanced {
                // dead end: retreat and skip the arc that led here
                match path.pop() {
                    None => return 0.0,
                    Some(id) => {
                        u = self.arcs[id ^ 1].to;
                        next[u] += 1;
                    }
                }
            }
        }
    }

    pub fn max_flow(&mut self, s: usize, t: usize) -> MaxFlowResult {
        assert!(s != t && s < self.n_nodes() && t < self.n_nodes());
        let mut value = 0.0;
        while let Some(level) = self.levels(s, t) {
            let mut next = vec![0usize; self.n_nodes()];
            loop {
                let pushed = self.augment(s, t, &level, &mut next);
                if pushed <= 0.0 {
                    break;
                }
                value += pushed;
            }
        }
        let source_side = self.reachable_from(s);
        let cut_value = self
            .arcs()
            .filter(|&(u, v, _, _)| source_side[u] && !source_side[v])
            .map(|(_, _, cap, _)| cap)
            .sum();
        MaxFlowResult {
            value,
            source_side,
            cut_value,
        }
    }

    fn reachable_from(&self, s: usize) -> Vec<bool> {
        let mut seen = vec![false; self.n_nodes()];
        seen[s] = true;
        let mut stack = vec![s];
        while let Some(u) = stack.pop() {
            for &id in &self.adj[u] {
                let v = self.arcs[id].to;
                if !seen[v] && self.residual(id) > RESIDUAL_EPS {
                    seen[v] = true;
                    stack.push(v);
                }
            }
        }
        seen
    }
}
