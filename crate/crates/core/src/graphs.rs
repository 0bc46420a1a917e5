//! Graph families and their edge-vertex incidence matrices.
//!
//! Vertices are 0-based internally. Edges are stored as `(i, j)` with `i < j`
//! and kept sorted lexicographically, so the incidence matrix of a graph is a
//! pure function of its family, parameters and seed.
//!
//! Grid vertices use column-major linearization: the multi-index
//! `(i_1, ..., i_d)` maps to `i_1 + N i_2 + ... + N^{d-1} i_d`. The hypercube
//! is the grid with side 2, so bit `j` of a vertex label is its coordinate `j`.

use std::collections::HashSet;
use std::fmt;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default number of resampling attempts for random graph generators.
pub const DEFAULT_RETRY_LIMIT: usize = 100;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Family {
    Path,
    AugmentedPath,
    Grid { d: usize, side: usize },
    Hypercube { d: usize },
    Complete,
    Star,
    CyclePower { k: usize },
    ErdosRenyi { p: f64, seed: u64 },
    RandomRegular { d: usize, seed: u64 },
    Custom,
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Family::Path => write!(f, "path"),
            Family::AugmentedPath => write!(f, "augmented_path"),
            Family::Grid { d, side } => write!(f, "grid(d={d},N={side})"),
            Family::Hypercube { d } => write!(f, "hypercube(d={d})"),
            Family::Complete => write!(f, "complete"),
            Family::Star => write!(f, "star"),
            Family::CyclePower { k } => write!(f, "cycle_power(k={k})"),
            Family::ErdosRenyi { p, seed } => write!(f, "erdos_renyi(p={p},seed={seed})"),
            Family::RandomRegular { d, seed } => write!(f, "random_regular(d={d},seed={seed})"),
            Family::Custom => write!(f, "custom"),
        }
    }
}

/// An undirected simple graph with a canonical edge order.
#[derive(Debug, Clone, PartialEq)]
pub struct Graph {
    n: usize,
    edges: Vec<(usize, usize)>,
    family: Family,
}

impl Graph {
    /// Builds a graph from an arbitrary edge list. Endpoints are normalized to
    /// `(min, max)` and sorted; self-loops and repeated edges are rejected.
    pub fn new(n: usize, edges: impl IntoIterator<Item = (usize, usize)>, family: Family) -> Result<Self> {
        if n == 0 {
            return Err(Error::invalid("graph needs at least one vertex"));
        }
        let mut list: Vec<(usize, usize)> = Vec::new();
        for (a, b) in edges {
            if a == b {
                return Err(Error::invalid(format!("self-loop at vertex {}", a + 1)));
            }
            if a >= n || b >= n {
                return Err(Error::invalid(format!(
                    "edge ({}, {}) out of range for {n} vertices",
                    a + 1,
                    b + 1
                )));
            }
            list.push((a.min(b), a.max(b)));
        }
        list.sort_unstable();
        if let Some(w) = list.windows(2).find(|w| w[0] == w[1]) {
            return Err(Error::invalid(format!(
                "duplicate edge ({}, {})",
                w[0].0 + 1,
                w[0].1 + 1
            )));
        }
        Ok(Self { n, edges: list, family })
    }

    /// Internal constructor for generators that already emit sorted, simple edges.
    fn from_sorted(n: usize, edges: Vec<(usize, usize)>, family: Family) -> Self {
        debug_assert!(edges.windows(2).all(|w| w[0] < w[1]));
        debug_assert!(edges.iter().all(|&(i, j)| i < j && j < n));
        Self { n, edges, family }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn m(&self) -> usize {
        self.edges.len()
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn family(&self) -> &Family {
        &self.family
    }

    pub fn degrees(&self) -> Vec<usize> {
        let mut deg = vec![0; self.n];
        for &(i, j) in &self.edges {
            deg[i] += 1;
            deg[j] += 1;
        }
        deg
    }

    pub fn max_degree(&self) -> usize {
        self.degrees().into_iter().max().unwrap_or(0)
    }

    pub fn adjacency_dense(&self) -> DMatrix<f64> {
        let mut a = DMatrix::zeros(self.n, self.n);
        for &(i, j) in &self.edges {
            a[(i, j)] = 1.0;
            a[(j, i)] = 1.0;
        }
        a
    }

    /// Component label of every vertex; labels are assigned in order of the
    /// smallest vertex of each component.
    pub fn components(&self) -> Vec<usize> {
        let mut uf = UnionFind::new(self.n);
        for &(i, j) in &self.edges {
            uf.union(i, j);
        }
        uf.labels()
    }

    pub fn is_connected(&self) -> bool {
        is_connected(self)
    }

    pub fn incidence(&self) -> IncidenceMatrix {
        incidence(self)
    }

    /// Serializes to the 1-based edge-list text format.
    pub fn to_edge_list(&self) -> String {
        let mut out = format!("# n = {}\n", self.n);
        for &(i, j) in &self.edges {
            out.push_str(&format!("{} {}\n", i + 1, j + 1));
        }
        out
    }
}

/// Parses the edge-list text format: one `i j` pair per line, 1-based,
/// whitespace-separated, `#` starts a comment. The vertex count is the
/// largest index seen unless `n` is given.
pub fn parse_edge_list(text: &str, n: Option<usize>) -> Result<Graph> {
    let mut edges = Vec::new();
    let mut max_index = 0usize;
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let mut parts = line.split_whitespace();
        let mut next = || -> Result<usize> {
            let tok = parts
                .next()
                .ok_or_else(|| Error::Parse(format!("line {}: expected two vertex indices", lineno + 1)))?;
            let v: usize = tok
                .parse()
                .map_err(|_| Error::Parse(format!("line {}: bad vertex index {tok:?}", lineno + 1)))?;
            if v == 0 {
                return Err(Error::Parse(format!("line {}: vertex indices are 1-based", lineno + 1)));
            }
            Ok(v)
        };
        let a = next()?;
        let b = next()?;
        if parts.next().is_some() {
            return Err(Error::Parse(format!("line {}: trailing tokens", lineno + 1)));
        }
        max_index = max_index.max(a).max(b);
        edges.push((a - 1, b - 1));
    }
    let n = match n {
        Some(n) if n < max_index => {
            return Err(Error::invalid(format!("vertex {max_index} exceeds declared n = {n}")))
        }
        Some(n) => n,
        None => max_index,
    };
    Graph::new(n, edges, Family::Custom)
}

/// One row of an incidence matrix: `+1` at `pos`, `-1` at `neg` when present.
/// Graph edges always have both entries; the augmented path's first row has
/// only the `+1`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct IncidenceRow {
    pub pos: usize,
    pub neg: Option<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct IncidenceMatrix {
    n: usize,
    rows: Vec<IncidenceRow>,
    family: Family,
}

impl IncidenceMatrix {
    pub fn from_rows(n: usize, rows: Vec<IncidenceRow>, family: Family) -> Result<Self> {
        for (e, r) in rows.iter().enumerate() {
            let bad = r.pos >= n || r.neg.is_some_and(|q| q >= n || q == r.pos);
            if bad {
                return Err(Error::invalid(format!("malformed incidence row {e}")));
            }
        }
        Ok(Self { n, rows, family })
    }

    /// Vertex count (number of columns).
    pub fn n(&self) -> usize {
        self.n
    }

    /// Row count.
    pub fn m(&self) -> usize {
        self.rows.len()
    }

    pub fn rows(&self) -> &[IncidenceRow] {
        &self.rows
    }

    pub fn family(&self) -> &Family {
        &self.family
    }

    /// `out = D x`
    pub fn apply(&self, x: &[f64], out: &mut [f64]) {
        debug_assert_eq!(x.len(), self.n);
        debug_assert_eq!(out.len(), self.rows.len());
        for (o, r) in out.iter_mut().zip(&self.rows) {
            *o = x[r.pos] - r.neg.map_or(0.0, |q| x[q]);
        }
    }

    pub fn mul(&self, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.m()];
        self.apply(x, &mut out);
        out
    }

    /// `out = D^T z`
    pub fn apply_t(&self, z: &[f64], out: &mut [f64]) {
        debug_assert_eq!(z.len(), self.rows.len());
        debug_assert_eq!(out.len(), self.n);
        out.iter_mut().for_each(|v| *v = 0.0);
        for (&ze, r) in z.iter().zip(&self.rows) {
            out[r.pos] += ze;
            if let Some(q) = r.neg {
                out[q] -= ze;
            }
        }
    }

    pub fn mul_t(&self, z: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.n];
        self.apply_t(z, &mut out);
        out
    }

    /// `||D x||_1`
    pub fn l1_of_diff(&self, x: &[f64]) -> f64 {
        self.rows
            .iter()
            .map(|r| (x[r.pos] - r.neg.map_or(0.0, |q| x[q])).abs())
            .sum()
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut d = DMatrix::zeros(self.m(), self.n);
        for (e, r) in self.rows.iter().enumerate() {
            d[(e, r.pos)] = 1.0;
            if let Some(q) = r.neg {
                d[(e, q)] = -1.0;
            }
        }
        d
    }

    /// `D^T D`, the unnormalized Laplacian for graph incidence matrices.
    pub fn gram_dense(&self) -> DMatrix<f64> {
        let mut g = DMatrix::zeros(self.n, self.n);
        for r in &self.rows {
            g[(r.pos, r.pos)] += 1.0;
            if let Some(q) = r.neg {
                g[(q, q)] += 1.0;
                g[(r.pos, q)] -= 1.0;
                g[(q, r.pos)] -= 1.0;
            }
        }
        g
    }

    /// Largest number of nonzeros in any column.
    pub fn max_degree(&self) -> usize {
        let mut deg = vec![0usize; self.n];
        for r in &self.rows {
            deg[r.pos] += 1;
            if let Some(q) = r.neg {
                deg[q] += 1;
            }
        }
        deg.into_iter().max().unwrap_or(0)
    }
}

/// Incidence matrix with `+1` at the smaller endpoint and `-1` at the larger,
/// rows in canonical edge order.
pub fn incidence(g: &Graph) -> IncidenceMatrix {
    let rows = g
        .edges
        .iter()
        .map(|&(i, j)| IncidenceRow { pos: i, neg: Some(j) })
        .collect();
    IncidenceMatrix { n: g.n, rows, family: g.family.clone() }
}

pub fn build_path(n: usize) -> Result<Graph> {
    if n < 2 {
        return Err(Error::invalid(format!("path needs N >= 2, got {n}")));
    }
    Ok(Graph::from_sorted(n, (0..n - 1).map(|i| (i, i + 1)).collect(), Family::Path))
}

/// Square path operator with an extra first row penalizing the first entry:
/// `(D x)_1 = x_1`, `(D x)_i = x_i - x_{i-1}`.
pub fn build_augmented_path(n: usize) -> Result<IncidenceMatrix> {
    if n < 1 {
        return Err(Error::invalid("augmented path needs N >= 1"));
    }
    let rows = (0..n)
        .map(|i| IncidenceRow { pos: i, neg: i.checked_sub(1) })
        .collect();
    Ok(IncidenceMatrix { n, rows, family: Family::AugmentedPath })
}

fn checked_pow(base: usize, exp: usize) -> Option<usize> {
    (0..exp).try_fold(1usize, |acc, _| acc.checked_mul(base))
}

pub fn build_grid(d: usize, side: usize) -> Result<Graph> {
    if d < 1 {
        return Err(Error::invalid("grid dimension must be >= 1"));
    }
    if side < 2 {
        return Err(Error::invalid(format!("grid side must be >= 2, got {side}")));
    }
    let n = checked_pow(side, d)
        .filter(|&n| n.checked_mul(d).is_some())
        .ok_or_else(|| Error::invalid(format!("grid {side}^{d} overflows")))?;
    let strides: Vec<usize> = (0..d).map(|j| side.pow(j as u32)).collect();
    let mut edges = Vec::with_capacity(d * (n / side) * (side - 1));
    for v in 0..n {
        // Neighbors v + stride_j are increasing in j, so edges come out sorted.
        for &s in &strides {
            if (v / s) % side + 1 < side {
                edges.push((v, v + s));
            }
        }
    }
    Ok(Graph::from_sorted(n, edges, Family::Grid { d, side }))
}

pub fn build_hypercube(d: usize) -> Result<Graph> {
    if d < 1 {
        return Err(Error::invalid("hypercube dimension must be >= 1"));
    }
    if d >= usize::BITS as usize - 1 {
        return Err(Error::invalid(format!("hypercube dimension {d} overflows")));
    }
    let n = 1usize << d;
    let mut edges = Vec::with_capacity(d * n / 2);
    for v in 0..n {
        for b in 0..d {
            if v & (1 << b) == 0 {
                edges.push((v, v | (1 << b)));
            }
        }
    }
    Ok(Graph::from_sorted(n, edges, Family::Hypercube { d }))
}

pub fn build_complete(n: usize) -> Result<Graph> {
    if n < 1 {
        return Err(Error::invalid("complete graph needs n >= 1"));
    }
    let edges = (0..n).flat_map(|i| (i + 1..n).map(move |j| (i, j))).collect();
    Ok(Graph::from_sorted(n, edges, Family::Complete))
}

/// Star with vertex 0 as its center.
pub fn build_star(n: usize) -> Result<Graph> {
    if n < 2 {
        return Err(Error::invalid("star needs n >= 2"));
    }
    Ok(Graph::from_sorted(n, (1..n).map(|j| (0, j)).collect(), Family::Star))
}

/// `k`-th power of the cycle: `i ~ j` iff their circular distance is at most `k`.
pub fn build_cycle_power(n: usize, k: usize) -> Result<Graph> {
    if n < 3 {
        return Err(Error::invalid("cycle needs n >= 3"));
    }
    if k < 1 || 2 * k > n {
        return Err(Error::invalid(format!("cycle power needs 1 <= k <= n/2, got k={k}, n={n}")));
    }
    let mut edges = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            let gap = j - i;
            if gap.min(n - gap) <= k {
                edges.push((i, j));
            }
        }
    }
    Ok(Graph::from_sorted(n, edges, Family::CyclePower { k }))
}

/// Erdős–Rényi `G(n, p)`, resampled until connected.
pub fn build_erdos_renyi(n: usize, p: f64, seed: u64) -> Result<Graph> {
    build_erdos_renyi_with_limit(n, p, seed, DEFAULT_RETRY_LIMIT)
}

pub fn build_erdos_renyi_with_limit(n: usize, p: f64, seed: u64, retry_limit: usize) -> Result<Graph> {
    if n < 1 {
        return Err(Error::invalid("G(n,p) needs n >= 1"));
    }
    if !(p > 0.0 && p <= 1.0) {
        return Err(Error::invalid(format!("G(n,p) needs 0 < p <= 1, got {p}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..retry_limit.max(1) {
        let mut edges = Vec::new();
        for i in 0..n {
            for j in i + 1..n {
                if p >= 1.0 || rng.gen::<f64>() < p {
                    edges.push((i, j));
                }
            }
        }
        let g = Graph::from_sorted(n, edges, Family::ErdosRenyi { p, seed });
        if g.is_connected() {
            return Ok(g);
        }
    }
    Err(Error::GenerationFailure(format!(
        "no connected G(n={n}, p={p}) draw in {retry_limit} attempts"
    )))
}

/// Random `d`-regular graph from the pairing (configuration) model.
///
/// Points are paired one at a time, only accepting pairs that keep the graph
/// simple; an attempt that gets stuck restarts from scratch. Disconnected
/// draws are also rejected.
pub fn build_random_regular(n: usize, d: usize, seed: u64) -> Result<Graph> {
    build_random_regular_with_limit(n, d, seed, DEFAULT_RETRY_LIMIT)
}

pub fn build_random_regular_with_limit(n: usize, d: usize, seed: u64, retry_limit: usize) -> Result<Graph> {
    if d >= n {
        return Err(Error::invalid(format!("regular degree {d} must be < n = {n}")));
    }
    if !(n * d).is_multiple_of(2) {
        return Err(Error::invalid(format!("n*d must be even, got n={n}, d={d}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    'attempt: for _ in 0..retry_limit.max(1) {
        let mut points: Vec<usize> = (0..n).flat_map(|v| std::iter::repeat_n(v, d)).collect();
        let mut seen: HashSet<(usize, usize)> = HashSet::with_capacity(n * d / 2);
        while !points.is_empty() {
            let mut placed = false;
            for _ in 0..(50 * points.len()).max(100) {
                let a = rng.gen_range(0..points.len());
                let b = rng.gen_range(0..points.len());
                let (u, v) = (points[a], points[b]);
                if a == b || u == v || seen.contains(&(u.min(v), u.max(v))) {
                    continue;
                }
                seen.insert((u.min(v), u.max(v)));
                points.swap_remove(a.max(b));
                points.swap_remove(a.min(b));
                placed = true;
                break;
            }
            if !placed {
                continue 'attempt;
            }
        }
        let mut edges: Vec<(usize, usize)> = seen.into_iter().collect();
        edges.sort_unstable();
        let g = Graph::from_sorted(n, edges, Family::RandomRegular { d, seed });
        if !g.is_connected() {
            continue;
        }
        return Ok(g);
    }
    Err(Error::GenerationFailure(format!(
        "no connected simple {d}-regular graph on n={n} in {retry_limit} attempts"
    )))
}

pub fn is_connected(g: &Graph) -> bool {
    let mut uf = UnionFind::new(g.n);
    let mut parts = g.n;
    for &(i, j) in &g.edges {
        if uf.union(i, j) {
            parts -= 1;
        }
    }
    parts == 1
}

/// Disjoint-set forest with path halving and union by size.
#[derive(Debug, Clone)]
pub(crate) struct UnionFind {
    parent: Vec<usize>,
    size: Vec<usize>,
}

impl UnionFind {
    pub(crate) fn new(n: usize) -> Self {
        Self { parent: (0..n).collect(), size: vec![1; n] }
    }

    pub(crate) fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    /// Returns true when the two sets were distinct.
    pub(crate) fn union(&mut self, a: usize, b: usize) -> bool {
        let (mut ra, mut rb) = (self.find(a), self.find(b));
        if ra == rb {
            return false;
        }
        if self.size[ra] < self.size[rb] {
            std::mem::swap(&mut ra, &mut rb);
        }
        self.parent[rb] = ra;
        self.size[ra] += self.size[rb];
        true
    }

    /// Dense labels `0..k` in order of first appearance.
    pub(crate) fn labels(&mut self) -> Vec<usize> {
        let n = self.parent.len();
        let mut map = vec![usize::MAX; n];
        let mut next = 0;
        let mut out = vec![0; n];
        for v in 0..n {
            let r = self.find(v);
            if map[r] == usize::MAX {
                map[r] = next;
                next += 1;
            }
            out[v] = map[r];
        }
        out
    }
}
