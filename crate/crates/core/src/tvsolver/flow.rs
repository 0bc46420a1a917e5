//! Dinic max-flow on real capacities, used to route certificate demands
//! through unit-capacity edges.

use std::collections::VecDeque;

#[derive(Debug, Clone)]
struct Arc {
    to: usize,
    cap: f64,
    flow: f64,
}

#[derive(Debug, Clone)]
pub(crate) struct FlowNetwork {
    arcs: Vec<Arc>,
    adj: Vec<Vec<usize>>,
    level: Vec<i64>,
    next: Vec<usize>,
    eps: f64,
}

impl FlowNetwork {
    pub(crate) fn new(nodes: usize, eps: f64) -> Self {
        Self { arcs: Vec::new(), adj: vec![Vec::new(); nodes], level: vec![0; nodes], next: vec![0; nodes], eps }
    }

    /// Adds `a -> b` with capacity `cap` and a reverse arc with capacity
    /// `rev_cap`; returns the forward arc id. The reverse arc is `id ^ 1`.
    pub(crate) fn add_arc(&mut self, a: usize, b: usize, cap: f64, rev_cap: f64) -> usize {
        let id = self.arcs.len();
        self.arcs.push(Arc { to: b, cap, flow: 0.0 });
        self.arcs.push(Arc { to: a, cap: rev_cap, flow: 0.0 });
        self.adj[a].push(id);
        self.adj[b].push(id + 1);
        id
    }

    pub(crate) fn flow(&self, arc: usize) -> f64 {
        self.arcs[arc].flow
    }

    fn residual(&self, arc: usize) -> f64 {
        self.arcs[arc].cap - self.arcs[arc].flow
    }

    fn bfs(&mut self, s: usize, t: usize) -> bool {
        self.level.iter_mut().for_each(|l| *l = -1);
        self.level[s] = 0;
        let mut queue = VecDeque::from([s]);
        while let Some(u) = queue.pop_front() {
            for &a in &self.adj[u] {
                let v = self.arcs[a].to;
                if self.level[v] < 0 && self.residual(a) > self.eps {
                    self.level[v] = self.level[u] + 1;
                    queue.push_back(v);
                }
            }
        }
        self.level[t] >= 0
    }

    fn dfs(&mut self, u: usize, t: usize, pushed: f64) -> f64 {
        if u == t {
            return pushed;
        }
        while self.next[u] < self.adj[u].len() {
            let a = self.adj[u][self.next[u]];
            let v = self.arcs[a].to;
            let r = self.residual(a);
            if r > self.eps && self.level[v] == self.level[u] + 1 {
                let got = self.dfs(v, t, pushed.min(r));
                if got > 0.0 {
                    self.arcs[a].flow += got;
                    self.arcs[a ^ 1].flow -= got;
                    return got;
                }
            }
            self.next[u] += 1;
        }
        0.0
    }

    pub(crate) fn max_flow(&mut self, s: usize, t: usize) -> f64 {
        let mut total = 0.0;
        while self.bfs(s, t) {
            self.next.iter_mut().for_each(|n| *n = 0);
            loop {
                let f = self.dfs(s, t, f64::INFINITY);
                if f <= self.eps {
                    break;
                }
                total += f;
            }
        }
        total
    }
}
