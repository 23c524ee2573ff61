//! Dinic's max-flow over real capacities.

use std::collections::VecDeque;

/// Residual capacities at or below this are treated as saturated.
pub const RESIDUAL_EPS: f64 = 1e-12;

const UNREACHED: usize = usize::MAX;

/// Directed flow network with paired residual edges (`e` and `e ^ 1`).
#[derive(Clone, Debug, Default)]
pub struct FlowNetwork {
    adj: Vec<Vec<usize>>,
    to: Vec<usize>,
    cap: Vec<f64>,
}

impl FlowNetwork {
    pub fn new(nodes: usize) -> Self {
        Self {
            adj: vec![Vec::new(); nodes],
            to: Vec::new(),
            cap: Vec::new(),
        }
    }

    pub fn node_count(&self) -> usize {
        self.adj.len()
    }

    fn push_pair(&mut self, u: usize, v: usize, forward: f64, backward: f64) {
        let e = self.to.len();
        self.to.extend([v, u]);
        self.cap.extend([forward, backward]);
        self.adj[u].push(e);
        self.adj[v].push(e + 1);
    }

    /// Arc `u -> v` with capacity `cap`.
    pub fn add_edge(&mut self, u: usize, v: usize, cap: f64) {
        self.push_pair(u, v, cap, 0.0);
    }

    /// Undirected edge: capacity `cap` in each direction.
    pub fn add_undirected(&mut self, u: usize, v: usize, cap: f64) {
        self.push_pair(u, v, cap, cap);
    }

    fn levels(&self, s: usize) -> Vec<usize> {
        let mut level = vec![UNREACHED; self.adj.len()];
        let mut queue = VecDeque::new();
        level[s] = 0;
        queue.push_back(s);
        while let Some(u) = queue.pop_front() {
            for &e in &self.adj[u] {
                let v = self.to[e];
                if level[v] == UNREACHED && self.cap[e] > RESIDUAL_EPS {
                    level[v] = level[u] + 1;
                    queue.push_back(v);
                }
            }
        }
        level
    }

    /// Finds and pushes one augmenting path in the level graph; 0 when blocked.
    fn augment(&mut self, s: usize, t: usize, level: &mut [usize], next: &mut [usize]) -> f64 {
        let mut path: Vec<usize> = Vec::new();
        let mut u = s;
        loop {
            if u == t {
                let f = path
                    .iter()
                    .map(|&e| self.cap[e])
                    .fold(f64::INFINITY, f64::min);
                for &e in &path {
                    self.cap[e] -= f;
                    self.cap[e ^ 1] += f;
                }
                return f;
            }
            let mut advanced = false;
            while next[u] < self.adj[u].len() {
                let e = self.adj[u][next[u]];
                let v = self.to[e];
                if self.cap[e] > RESIDUAL_EPS && level[v] != UNREACHED && level[v] == level[u] + 1 {
                    path.push(e);
                    u = v;
                    advanced = true;
                    break;
                }
                next[u] += 1;
            }
            if !advanced {
                if u == s {
                    return 0.0;
                }
                // Dead end: prune it from this phase and retreat.
                level[u] = UNREACHED;
                let e = path
                    .pop()
                    .expect("non-source node has an incoming path edge");
                u = self.to[e ^ 1];
                next[u] += 1;
            }
        }
    }

    /// Pushes a maximum flow from `s` to `t` and returns its value.
    pub fn max_flow(&mut self, s: usize, t: usize) -> f64 {
        let mut total = 0.0;
        loop {
            let mut level = self.levels(s);
            if level[t] == UNREACHED {
                return total;
            }
            let mut next = vec![0usize; self.adj.len()];
            loop {
                let f = self.augment(s, t, &mut level, &mut next);
                if f <= 0.0 {
                    break;
                }
                total += f;
            }
        }
    }

    /// Nodes reachable from `s` in the residual network. After
    /// [`max_flow`](Self::max_flow) this is the source side of the minimal
    /// minimum cut.
    pub fn source_side(&self, s: usize) -> Vec<bool> {
        self.levels(s).into_iter().map(|l| l != UNREACHED).collect()
    }
}
