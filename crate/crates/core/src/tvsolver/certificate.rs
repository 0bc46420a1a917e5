//! Subgradient certificates for `min 1/2 |theta - y|^2 + mu |D theta|_1`.
//!
//! A point `theta` is optimal iff some `z` with `|z|_inf <= 1` satisfies
//! `theta - y + mu D^T z = 0` and `z_e = sign((D theta)_e)` on every edge where
//! `theta` jumps. The jump entries are forced, so the remaining work is to
//! route the leftover demand through the fused (non-jump) edges with unit
//! capacity, one fused group at a time.

use crate::graphs::{IncidenceMatrix, UnionFind};

use super::flow::FlowNetwork;

/// Edge endpoints with rows that have a single `+1` attached to a virtual
/// ground vertex `n` whose value is pinned at zero and whose balance is free.
#[derive(Debug, Clone)]
pub(crate) struct EdgeLayout {
    pub n: usize,
    pub has_ground: bool,
    pub ends: Vec<(usize, usize)>,
}

impl EdgeLayout {
    pub(crate) fn new(d: &IncidenceMatrix) -> Self {
        let n = d.n();
        let ends: Vec<(usize, usize)> = d.rows().iter().map(|r| (r.pos, r.neg.unwrap_or(n))).collect();
        let has_ground = ends.iter().any(|&(_, b)| b == n);
        Self { n, has_ground, ends }
    }

    pub(crate) fn nodes(&self) -> usize {
        self.n + usize::from(self.has_ground)
    }

    #[inline]
    pub(crate) fn value(&self, theta: &[f64], v: usize) -> f64 {
        if v == self.n {
            0.0
        } else {
            theta[v]
        }
    }

    #[inline]
    pub(crate) fn diff(&self, theta: &[f64], e: usize) -> f64 {
        let (a, b) = self.ends[e];
        self.value(theta, a) - self.value(theta, b)
    }
}

#[derive(Debug, Clone)]
pub(crate) struct Certificate {
    pub z: Vec<f64>,
    /// `|theta - y + mu D^T z|_inf` over real vertices.
    pub residual: f64,
    pub dual_feasibility: f64,
}

/// How hard to try when the demand of a fused group cannot be routed exactly.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Effort {
    /// Least-norm solve, then max-flow.
    Quick,
    /// Additionally minimize the box-constrained least-squares residual.
    Full,
}

pub(crate) fn certify(
    layout: &EdgeLayout,
    y: &[f64],
    theta: &[f64],
    mu: f64,
    jump_tol: f64,
    effort: Effort,
) -> Certificate {
    let n = layout.n;
    let m = layout.ends.len();
    let mut z = vec![0.0; m];
    if mu <= 0.0 {
        let residual = theta.iter().zip(y).map(|(t, v)| (t - v).abs()).fold(0.0, f64::max);
        return Certificate { z, residual, dual_feasibility: 0.0 };
    }

    let nodes = layout.nodes();
    let mut uf = UnionFind::new(nodes);
    let mut free = Vec::new();
    for e in 0..m {
        let diff = layout.diff(theta, e);
        if diff.abs() > jump_tol {
            z[e] = diff.signum();
        } else {
            free.push(e);
            let (a, b) = layout.ends[e];
            uf.union(a, b);
        }
    }

    // demand[i]: what the free edges must contribute to (D^T z)_i.
    let mut demand = vec![0.0; nodes];
    for i in 0..n {
        demand[i] = -(theta[i] - y[i]) / mu;
    }
    for e in 0..m {
        if z[e] != 0.0 {
            let (a, b) = layout.ends[e];
            demand[a] -= z[e];
            demand[b] += z[e];
        }
    }

    let labels = uf.labels();
    let groups = labels.iter().copied().max().map_or(0, |g| g + 1);
    let mut members: Vec<Vec<usize>> = vec![Vec::new(); groups];
    for v in 0..nodes {
        members[labels[v]].push(v);
    }
    let mut group_edges: Vec<Vec<usize>> = vec![Vec::new(); groups];
    for &e in &free {
        group_edges[labels[layout.ends[e].0]].push(e);
    }

    let mut local = vec![usize::MAX; nodes];
    for g in 0..groups {
        if group_edges[g].is_empty() {
            continue;
        }
        for (li, &v) in members[g].iter().enumerate() {
            local[v] = li;
        }
        let ground_local = (layout.has_ground && labels[n] == g).then(|| local[n]);
        let mut b: Vec<f64> = members[g].iter().map(|&v| demand[v]).collect();
        if let Some(gl) = ground_local {
            // The ground balances whatever the real vertices need.
            let real: f64 = b.iter().enumerate().filter(|&(i, _)| i != gl).map(|(_, v)| v).sum();
            b[gl] = -real;
        }
        let edges: Vec<(usize, usize)> = group_edges[g]
            .iter()
            .map(|&e| (local[layout.ends[e].0], local[layout.ends[e].1]))
            .collect();
        let zg = route_group(members[g].len(), &edges, &b, effort);
        for (&e, &val) in group_edges[g].iter().zip(&zg) {
            z[e] = val;
        }
    }

    let mut stat = vec![0.0; nodes];
    for e in 0..m {
        let (a, b) = layout.ends[e];
        stat[a] += z[e];
        stat[b] -= z[e];
    }
    let residual = (0..n)
        .map(|i| (theta[i] - y[i] + mu * stat[i]).abs())
        .fold(0.0, f64::max);
    let dual_feasibility = z.iter().fold(0.0f64, |acc, v| acc.max(v.abs()));
    Certificate { z, residual, dual_feasibility }
}

/// Finds `z` with `|z| <= 1` and `D_g^T z` as close as possible to `b`.
fn route_group(nodes: usize, edges: &[(usize, usize)], b: &[f64], effort: Effort) -> Vec<f64> {
    let mean = b.iter().sum::<f64>() / nodes as f64;
    let centered: Vec<f64> = b.iter().map(|v| v - mean).collect();
    let w = laplacian_solve(nodes, edges, &centered);
    let least_norm: Vec<f64> = edges.iter().map(|&(a, c)| w[a] - w[c]).collect();
    if least_norm.iter().all(|v| v.abs() <= 1.0 + 1e-12) {
        return least_norm.into_iter().map(|v| v.clamp(-1.0, 1.0)).collect();
    }

    let (flow_z, feasible) = route_by_flow(nodes, edges, b);
    if feasible || effort == Effort::Quick {
        return flow_z;
    }
    let clipped: Vec<f64> = least_norm.iter().map(|v| v.clamp(-1.0, 1.0)).collect();
    let start = if misfit(nodes, edges, b, &flow_z) <= misfit(nodes, edges, b, &clipped) {
        flow_z
    } else {
        clipped
    };
    box_least_squares(nodes, edges, b, start)
}

fn apply_dt(nodes: usize, edges: &[(usize, usize)], z: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; nodes];
    for (&(a, c), &v) in edges.iter().zip(z) {
        out[a] += v;
        out[c] -= v;
    }
    out
}

fn misfit(nodes: usize, edges: &[(usize, usize)], b: &[f64], z: &[f64]) -> f64 {
    apply_dt(nodes, edges, z).iter().zip(b).map(|(u, v)| (u - v).abs()).fold(0.0, f64::max)
}

/// Conjugate gradients on the (singular, consistent) group Laplacian.
fn laplacian_solve(nodes: usize, edges: &[(usize, usize)], rhs: &[f64]) -> Vec<f64> {
    let apply = |x: &[f64], out: &mut [f64]| {
        out.iter_mut().for_each(|v| *v = 0.0);
        for &(a, c) in edges {
            let d = x[a] - x[c];
            out[a] += d;
            out[c] -= d;
        }
    };
    let mut x = vec![0.0; nodes];
    let mut r = rhs.to_vec();
    let mut p = r.clone();
    let mut ap = vec![0.0; nodes];
    let b_norm = rhs.iter().map(|v| v * v).sum::<f64>().sqrt();
    if b_norm == 0.0 {
        return x;
    }
    let mut rr = b_norm * b_norm;
    let max_iter = 4 * nodes + 200;
    for _ in 0..max_iter {
        apply(&p, &mut ap);
        let pap: f64 = p.iter().zip(&ap).map(|(u, v)| u * v).sum();
        if pap <= 0.0 {
            break;
        }
        let alpha = rr / pap;
        for i in 0..nodes {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        let rr_new: f64 = r.iter().map(|v| v * v).sum();
        if rr_new.sqrt() <= 1e-14 * b_norm {
            break;
        }
        let beta = rr_new / rr;
        rr = rr_new;
        for i in 0..nodes {
            p[i] = r[i] + beta * p[i];
        }
    }
    x
}

/// Unit-capacity routing of `b` as a max-flow problem. Vertices with
/// positive demand draw from the sink side, negative ones from the source.
fn route_by_flow(nodes: usize, edges: &[(usize, usize)], b: &[f64]) -> (Vec<f64>, bool) {
    let scale = b.iter().fold(1.0f64, |acc, v| acc.max(v.abs()));
    let eps = 1e-13 * scale;
    let (s, t) = (nodes, nodes + 1);
    let mut net = FlowNetwork::new(nodes + 2, eps);
    let arcs: Vec<usize> = edges.iter().map(|&(a, c)| net.add_arc(a, c, 1.0, 1.0)).collect();
    let mut need = 0.0;
    for (v, &d) in b.iter().enumerate() {
        if d > 0.0 {
            net.add_arc(v, t, d, 0.0);
            need += d;
        } else if d < 0.0 {
            net.add_arc(s, v, -d, 0.0);
        }
    }
    let got = net.max_flow(s, t);
    // Net flow c -> a on the arc pair is exactly z_e in (D^T z)_a = +z_e.
    let z = arcs.iter().map(|&id| -net.flow(id)).collect();
    (z, got >= need - 1e-9 * scale.max(need))
}

/// Accelerated projected gradient for `min 1/2 |D^T z - b|^2, |z| <= 1`.
fn box_least_squares(nodes: usize, edges: &[(usize, usize)], b: &[f64], start: Vec<f64>) -> Vec<f64> {
    let mut deg = vec![0usize; nodes];
    for &(a, c) in edges {
        deg[a] += 1;
        deg[c] += 1;
    }
    let lip = 2.0 * deg.into_iter().max().unwrap_or(1).max(1) as f64;
    let step = 1.0 / lip;
    let mut best = start.clone();
    let mut best_fit = misfit(nodes, edges, b, &best);
    let mut z = start.clone();
    let mut z_prev = start;
    let mut t = 1.0f64;
    for it in 0..(2000 + 10 * edges.len()).min(20000) {
        let t_next = 0.5 * (1.0 + (1.0 + 4.0 * t * t).sqrt());
        let mom = (t - 1.0) / t_next;
        let u: Vec<f64> = z.iter().zip(&z_prev).map(|(a, p)| a + mom * (a - p)).collect();
        let mut r = apply_dt(nodes, edges, &u);
        r.iter_mut().zip(b).for_each(|(v, bb)| *v -= bb);
        let next: Vec<f64> = edges
            .iter()
            .zip(&u)
            .map(|(&(a, c), &ue)| (ue - step * (r[a] - r[c])).clamp(-1.0, 1.0))
            .collect();
        z_prev = std::mem::replace(&mut z, next);
        t = t_next;
        if it % 20 == 0 {
            let fit = misfit(nodes, edges, b, &z);
            if fit < best_fit {
                best_fit = fit;
                best.clone_from(&z);
            }
        }
    }
    let fit = misfit(nodes, edges, b, &z);
    if fit < best_fit {
        best = z;
    }
    best
}
