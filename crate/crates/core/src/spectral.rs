//! Laplacian spectra, pseudoinverse column norms and compatibility bounds.
//!
//! The inverse scaling factor `rho` is the largest Euclidean column norm of
//! `S = D^+`. For a general incidence matrix it is computed densely from the
//! eigendecomposition of `D^T D`. For grids (and hypercubes, which are grids
//! of side 2) the Laplacian is a Kronecker sum of path Laplacians whose
//! eigenvectors are the DCT-II basis, so every column norm is an explicit
//! eigensum that needs no matrix factorization.

use nalgebra::{DMatrix, SymmetricEigen};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graphs::{Family, IncidenceMatrix};

/// Largest vertex count accepted by the dense routines.
pub const DEFAULT_DENSE_CAP: usize = 4096;

/// Relative eigenvalue cutoff used when inverting `D^T D`.
pub const RANK_CUTOFF: f64 = 1e-10;

/// Largest edge subset accepted by [`kappa_exact_bruteforce`].
pub const KAPPA_BRUTEFORCE_MAX: usize = 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RhoMethod {
    DensePseudoinverse,
    EigensumStructured,
}

impl std::str::FromStr for RhoMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "dense" | "dense_pseudoinverse" => Ok(RhoMethod::DensePseudoinverse),
            "structured" | "eigensum_structured" => Ok(RhoMethod::EigensumStructured),
            other => Err(Error::invalid(format!("unknown rho method {other:?}"))),
        }
    }
}

/// Eigen-structure of an incidence matrix and the constants derived from it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectralReport {
    #[serde(rename = "n")]
    pub graph_n: usize,
    #[serde(rename = "m")]
    pub graph_m: usize,
    pub rho: f64,
    pub rho_method: RhoMethod,
    #[serde(rename = "lambda2")]
    pub spectral_gap: Option<f64>,
    pub kappa_lower_bound: f64,
    pub family: String,
    #[serde(skip)]
    pub eigenvalues: Option<Vec<f64>>,
}

impl SpectralReport {
    /// JSON object `{n, m, rho, rho_method, lambda2, kappa_lower_bound, family}`.
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

/// Eigenpairs of the path Laplacian `D_1^T D_1` on `N` vertices.
#[derive(Debug, Clone)]
pub struct PathEigenpairs {
    side: usize,
    values: Vec<f64>,
}

impl PathEigenpairs {
    pub fn side(&self) -> usize {
        self.side
    }

    /// `lambda_k = 2 - 2 cos(k pi / N)` for `k = 0..N`.
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Entry `j` (0-based) of the unit eigenvector `v_k`.
    pub fn entry(&self, k: usize, j: usize) -> f64 {
        let n = self.side as f64;
        if k == 0 {
            1.0 / n.sqrt()
        } else {
            (2.0 / n).sqrt() * ((j as f64 + 0.5) * k as f64 * std::f64::consts::PI / n).cos()
        }
    }

    pub fn vector(&self, k: usize) -> Vec<f64> {
        (0..self.side).map(|j| self.entry(k, j)).collect()
    }
}

pub fn path_eigenpairs(side: usize) -> Result<PathEigenpairs> {
    if side < 2 {
        return Err(Error::invalid(format!("path eigenpairs need N >= 2, got {side}")));
    }
    let n = side as f64;
    let values = (0..side)
        .map(|k| 2.0 - 2.0 * (k as f64 * std::f64::consts::PI / n).cos())
        .collect();
    Ok(PathEigenpairs { side, values })
}

/// Laplacian eigenvalues of the cycle power `C_n^k`, indexed by frequency
/// `m = 0..n`: `2 * sum_{l=1..k} (1 - cos(2 pi l m / n))`.
pub fn circulant_eigenvalues(n: usize, k: usize) -> Vec<f64> {
    (0..n)
        .map(|m| {
            (1..=k)
                .map(|l| {
                    let arg = 2.0 * std::f64::consts::PI * ((l * m) % n) as f64 / n as f64;
                    2.0 * (1.0 - arg.cos())
                })
                .sum()
        })
        .collect()
}

/// Sorted eigendecomposition of a symmetric matrix.
#[derive(Debug, Clone)]
pub struct SortedEigen {
    pub values: Vec<f64>,
    /// Eigenvectors as columns, in the order of `values`.
    pub vectors: DMatrix<f64>,
}

pub fn sorted_symmetric_eigen(a: DMatrix<f64>) -> SortedEigen {
    let n = a.nrows();
    let eig = SymmetricEigen::new(a);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let mut vectors = DMatrix::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        vectors.set_column(dst, &eig.eigenvectors.column(src));
    }
    SortedEigen { values, vectors }
}

fn check_dense_cap(d: &IncidenceMatrix, cap: usize) -> Result<()> {
    if d.n() > cap {
        return Err(Error::SizeLimit(format!(
            "dense spectral routines are capped at n = {cap} (got n = {}); use the structured method",
            d.n()
        )));
    }
    Ok(())
}

/// `V f(Lambda) V^T` restricted to eigenvalues above the rank cutoff.
fn spectral_function(eig: &SortedEigen, f: impl Fn(f64) -> f64) -> DMatrix<f64> {
    let n = eig.values.len();
    let lmax = eig.values.last().copied().unwrap_or(0.0).max(0.0);
    let keep: Vec<usize> = (0..n).filter(|&i| eig.values[i] > RANK_CUTOFF * lmax).collect();
    let mut scaled = DMatrix::zeros(n, keep.len());
    let mut basis = DMatrix::zeros(n, keep.len());
    for (c, &i) in keep.iter().enumerate() {
        let col = eig.vectors.column(i);
        basis.set_column(c, &col);
        scaled.set_column(c, &(col * f(eig.values[i])));
    }
    scaled * basis.transpose()
}

/// Columns `s_j` of `S = D^+`, stored as an `n x m` matrix.
#[derive(Debug, Clone)]
pub struct PseudoinverseColumns {
    matrix: DMatrix<f64>,
}

impl PseudoinverseColumns {
    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        self.matrix.column(j).iter().copied().collect()
    }

    pub fn norms(&self) -> Vec<f64> {
        self.matrix.column_iter().map(|c| c.norm()).collect()
    }

    pub fn max_norm(&self) -> f64 {
        self.norms().into_iter().fold(0.0, f64::max)
    }
}

/// `S = (D^T D)^+ D^T` via the eigendecomposition of `D^T D`, dropping
/// eigenvalues below `1e-10 * lambda_max`.
pub fn pseudoinverse_columns_dense(d: &IncidenceMatrix) -> Result<PseudoinverseColumns> {
    pseudoinverse_columns_dense_capped(d, DEFAULT_DENSE_CAP)
}

pub fn pseudoinverse_columns_dense_capped(d: &IncidenceMatrix, cap: usize) -> Result<PseudoinverseColumns> {
    check_dense_cap(d, cap)?;
    let eig = sorted_symmetric_eigen(d.gram_dense());
    let gram_pinv = spectral_function(&eig, |l| 1.0 / l);
    Ok(PseudoinverseColumns { matrix: gram_pinv * d.to_dense().transpose() })
}

/// Column norms of `D^+` without materializing it: with
/// `P = ((D^T D)^+)^2`, `||s_j||^2 = d_j^T P d_j`, which only touches the
/// two nonzeros of row `j`.
pub fn column_norms_dense(d: &IncidenceMatrix) -> Result<Vec<f64>> {
    check_dense_cap(d, DEFAULT_DENSE_CAP)?;
    let eig = sorted_symmetric_eigen(d.gram_dense());
    Ok(column_norms_from_eigen(d, &eig))
}

fn column_norms_from_eigen(d: &IncidenceMatrix, eig: &SortedEigen) -> Vec<f64> {
    let p = spectral_function(eig, |l| 1.0 / (l * l));
    d.rows()
        .iter()
        .map(|r| {
            let sq = match r.neg {
                Some(q) => p[(r.pos, r.pos)] + p[(q, q)] - 2.0 * p[(r.pos, q)],
                None => p[(r.pos, r.pos)],
            };
            sq.max(0.0).sqrt()
        })
        .collect()
}

/// Lower bound `1 / (2 min(sqrt(d), sqrt(|T|)))` on the compatibility
/// factor of a graph with maximal degree `d`; `1` for the empty set.
pub fn kappa_lower_bound(max_degree: usize, t_size: usize) -> f64 {
    if t_size == 0 {
        return 1.0;
    }
    let m = (max_degree as f64).sqrt().min((t_size as f64).sqrt());
    if m == 0.0 {
        return f64::INFINITY;
    }
    1.0 / (2.0 * m)
}

/// Exact compatibility factor `kappa_T` by sign enumeration:
/// `sup_{|theta|=1} ||(D theta)_T||_1 = max_{s in {+-1}^T} ||D_T^T s||_2`.
pub fn kappa_exact_bruteforce(d: &IncidenceMatrix, t: &[usize]) -> Result<f64> {
    if t.is_empty() {
        return Ok(1.0);
    }
    if t.len() > KAPPA_BRUTEFORCE_MAX {
        return Err(Error::SizeLimit(format!(
            "brute-force kappa enumerates 2^|T| signs; |T| = {} exceeds {KAPPA_BRUTEFORCE_MAX}",
            t.len()
        )));
    }
    let mut sorted = t.to_vec();
    sorted.sort_unstable();
    if sorted.windows(2).any(|w| w[0] == w[1]) || sorted.last().is_some_and(|&e| e >= d.m()) {
        return Err(Error::invalid("edge subset must hold distinct row indices of D"));
    }
    let rows: Vec<_> = t.iter().map(|&e| d.rows()[e]).collect();
    // w = sum_e s_e d_e, starting from all signs positive. The global sign is
    // irrelevant, so the first sign stays fixed and a Gray code walks the rest.
    let mut w = vec![0.0; d.n()];
    for r in &rows {
        w[r.pos] += 1.0;
        if let Some(q) = r.neg {
            w[q] -= 1.0;
        }
    }
    let mut signs = vec![1.0f64; rows.len()];
    let mut norm_sq: f64 = w.iter().map(|v| v * v).sum();
    let mut best = norm_sq;
    let steps = 1u64 << (rows.len() - 1);
    for step in 1..steps {
        let bit = step.trailing_zeros() as usize + 1;
        let r = rows[bit];
        let delta = -2.0 * signs[bit];
        signs[bit] = -signs[bit];
        let mut touch = |idx: usize, amount: f64| {
            norm_sq -= w[idx] * w[idx];
            w[idx] += amount;
            norm_sq += w[idx] * w[idx];
        };
        touch(r.pos, delta);
        if let Some(q) = r.neg {
            touch(q, -delta);
        }
        best = best.max(norm_sq);
    }
    Ok((t.len() as f64).sqrt() / best.sqrt())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpectralGap {
    pub lambda2: f64,
    /// `sqrt(2) / lambda2`, an upper bound on `rho` for connected graphs.
    pub rho_bound: f64,
}

pub fn spectral_gap(d: &IncidenceMatrix) -> Result<SpectralGap> {
    check_dense_cap(d, DEFAULT_DENSE_CAP)?;
    if d.n() < 2 {
        return Err(Error::invalid("spectral gap needs at least two vertices"));
    }
    let eig = sorted_symmetric_eigen(d.gram_dense());
    let lambda2 = eig.values[1];
    Ok(SpectralGap { lambda2, rho_bound: gap_bound(lambda2, eig.values[d.n() - 1]) })
}

fn gap_bound(lambda2: f64, lmax: f64) -> f64 {
    if lambda2 > RANK_CUTOFF * lmax.max(1.0) {
        std::f64::consts::SQRT_2 / lambda2
    } else {
        f64::INFINITY
    }
}

/// Grid shape `(d, N)` behind a family, if it has one.
fn grid_shape(d: &IncidenceMatrix) -> Option<(usize, usize)> {
    match *d.family() {
        Family::Grid { d: dim, side } => Some((dim, side)),
        Family::Hypercube { d: dim } => Some((dim, 2)),
        Family::Path => Some((1, d.n())),
        _ => None,
    }
}

/// Computes `rho` and the accompanying constants.
pub fn rho(d: &IncidenceMatrix, method: RhoMethod) -> Result<SpectralReport> {
    let kappa = kappa_lower_bound(d.max_degree(), d.m());
    let family = d.family().to_string();
    match method {
        RhoMethod::DensePseudoinverse => {
            check_dense_cap(d, DEFAULT_DENSE_CAP)?;
            let eig = sorted_symmetric_eigen(d.gram_dense());
            let norms = column_norms_from_eigen(d, &eig);
            let rho = norms.into_iter().fold(0.0, f64::max);
            let spectral_gap = (d.n() >= 2).then(|| eig.values[1]);
            Ok(SpectralReport {
                graph_n: d.n(),
                graph_m: d.m(),
                rho,
                rho_method: method,
                spectral_gap,
                kappa_lower_bound: kappa,
                family,
                eigenvalues: Some(eig.values),
            })
        }
        RhoMethod::EigensumStructured => {
            let (dim, side) = grid_shape(d).ok_or_else(|| {
                Error::UnsupportedMethod(format!("structured eigensum needs a grid family, got {family}"))
            })?;
            let rho = grid_rho_structured(dim, side)?;
            let path = path_eigenpairs(side)?;
            let eigenvalues = (side.checked_pow(dim as u32).is_some_and(|n| n <= DEFAULT_DENSE_CAP))
                .then(|| grid_eigenvalues(&path, dim));
            Ok(SpectralReport {
                graph_n: d.n(),
                graph_m: d.m(),
                rho,
                rho_method: method,
                spectral_gap: Some(path.values()[1]),
                kappa_lower_bound: kappa,
                family,
                eigenvalues,
            })
        }
    }
}

/// All sums `lambda_{k_1} + ... + lambda_{k_d}`, sorted.
fn grid_eigenvalues(path: &PathEigenpairs, dim: usize) -> Vec<f64> {
    let mut vals = vec![0.0];
    for _ in 0..dim {
        vals = vals
            .iter()
            .flat_map(|&acc| path.values().iter().map(move |&l| acc + l))
            .collect();
    }
    vals.sort_by(f64::total_cmp);
    vals
}

/// Squared column tables for the grid eigensum.
struct GridTables {
    lambdas: Vec<f64>,
    /// `diff[k][i] = <v_k, e_i - e_{i+1}>^2`
    diff: Vec<Vec<f64>>,
    /// `point[k][i] = <v_k, e_i>^2`
    point: Vec<Vec<f64>>,
}

impl GridTables {
    fn new(side: usize) -> Result<Self> {
        let path = path_eigenpairs(side)?;
        let vecs: Vec<Vec<f64>> = (0..side).map(|k| path.vector(k)).collect();
        let diff = vecs
            .iter()
            .map(|v| (0..side - 1).map(|i| (v[i] - v[i + 1]).powi(2)).collect())
            .collect();
        let point = vecs.iter().map(|v| v.iter().map(|x| x * x).collect()).collect();
        Ok(Self { lambdas: path.values().to_vec(), diff, point })
    }

    /// `||s||^2` for the edge leaving `start` along the first axis.
    fn column_norm_sq(&self, start: &[usize]) -> f64 {
        let side = self.lambdas.len();
        let mut total = 0.0;
        // k_1 = 0 contributes nothing: v_0 is constant, so <v_0, d_i> = 0.
        for k1 in 1..side {
            let w = self.diff[k1][start[0]];
            if w == 0.0 {
                continue;
            }
            total += w * self.rest(&start[1..], self.lambdas[k1]);
        }
        total
    }

    /// `sum over (k_2..k_d) of (lam + sum lambda_{k_j})^{-2} prod point[k_j][i_j]`
    fn rest(&self, idx: &[usize], lam: f64) -> f64 {
        match idx.split_first() {
            None => 1.0 / (lam * lam),
            Some((&i, tail)) => (0..self.lambdas.len())
                .map(|k| {
                    let p = self.point[k][i];
                    if p == 0.0 {
                        0.0
                    } else {
                        p * self.rest(tail, lam + self.lambdas[k])
                    }
                })
                .sum(),
        }
    }
}

/// Squared norm of the pseudoinverse column belonging to the grid edge that
/// leaves multi-index `start` along axis `axis` (0-based, column-major).
pub fn grid_column_norm_sq(dim: usize, side: usize, axis: usize, start: &[usize]) -> Result<f64> {
    if start.len() != dim || axis >= dim {
        return Err(Error::invalid("multi-index and axis must match the grid dimension"));
    }
    if start[axis] + 1 >= side || start.iter().any(|&i| i >= side) {
        return Err(Error::invalid("edge start lies outside the grid"));
    }
    let tables = GridTables::new(side)?;
    // Coordinate permutations are grid automorphisms, so rotate `axis` first.
    let mut idx = Vec::with_capacity(dim);
    idx.push(start[axis]);
    idx.extend(start.iter().enumerate().filter(|&(j, _)| j != axis).map(|(_, &i)| i));
    Ok(tables.column_norm_sq(&idx))
}

/// `rho` of the `side^dim` grid from the closed-form eigensum.
///
/// Only edges along the first axis are evaluated, and only one representative
/// per orbit of the reflections `i -> N-1-i` and of permutations of the
/// remaining axes; all of these are grid automorphisms that preserve column
/// norms, so the maximum is exact.
pub fn grid_rho_structured(dim: usize, side: usize) -> Result<f64> {
    if dim < 1 || side < 2 {
        return Err(Error::invalid("structured rho needs d >= 1 and N >= 2"));
    }
    let tables = GridTables::new(side)?;
    let half_edge = (side - 2) / 2 + 1;
    let half_vertex = (side - 1) / 2 + 1;
    let mut reps: Vec<Vec<usize>> = Vec::new();
    let mut tail = vec![0usize; dim - 1];
    loop {
        for i1 in 0..half_edge {
            let mut idx = Vec::with_capacity(dim);
            idx.push(i1);
            idx.extend_from_slice(&tail);
            reps.push(idx);
        }
        // next nondecreasing tuple in [0, half_vertex)
        let mut pos = tail.len();
        loop {
            if pos == 0 {
                break;
            }
            pos -= 1;
            if tail[pos] + 1 < half_vertex {
                tail[pos] += 1;
                let v = tail[pos];
                tail[pos + 1..].iter_mut().for_each(|t| *t = v);
                pos = usize::MAX;
                break;
            }
        }
        if pos != usize::MAX {
            break;
        }
    }
    let best = reps
        .par_iter()
        .map(|idx| tables.column_norm_sq(idx))
        .reduce(|| 0.0, f64::max);
    Ok(best.sqrt())
}
