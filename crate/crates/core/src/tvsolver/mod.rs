//! Graph total-variation denoising.
//!
//! Solves `min_theta (1/n) |theta - y|^2 + lambda |D theta|_1` for an
//! incidence matrix `D`. Internally everything is rescaled to
//! `1/2 |theta - y|^2 + mu |D theta|_1` with `mu = n lambda / 2`, which has the
//! same minimizer.
//!
//! The default solver is an accelerated primal-dual iteration. Every so often
//! the iterate is snapped to an exactly fused candidate (vertices joined by
//! near-zero differences share one value, solved in closed form given the
//! jump signs) and checked with a subgradient certificate. Paths and complete
//! graphs also have direct solvers.

mod certificate;
mod exact;
mod flow;
mod lambda;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graphs::{Family, IncidenceMatrix, UnionFind};

use certificate::{certify, Certificate, EdgeLayout, Effort};

pub use lambda::{lambda_value, theorem_lambda, LambdaRule, RuleKind};

pub const DEFAULT_TOL: f64 = 1e-6;
pub const DEFAULT_MAX_ITER: usize = 50_000;
/// Relative threshold above which an edge difference counts as a jump.
pub const JUMP_TOL: f64 = 1e-8;

const POLISH_EVERY: usize = 50;
const POWER_TOL: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Algorithm {
    /// Direct solvers for paths and complete graphs, primal-dual otherwise.
    #[default]
    Auto,
    /// Always use the primal-dual iteration.
    PrimalDual,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverOptions {
    pub tol: f64,
    pub max_iter: usize,
    #[serde(default)]
    pub algorithm: Algorithm,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self { tol: DEFAULT_TOL, max_iter: DEFAULT_MAX_ITER, algorithm: Algorithm::Auto }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct DenoiseProblem<'a> {
    pub y: &'a [f64],
    pub d: &'a IncidenceMatrix,
    pub lambda: f64,
}

impl<'a> DenoiseProblem<'a> {
    pub fn new(y: &'a [f64], d: &'a IncidenceMatrix, lambda: f64) -> Result<Self> {
        let p = Self { y, d, lambda };
        p.validate()?;
        Ok(p)
    }

    fn validate(&self) -> Result<()> {
        if self.y.len() != self.d.n() {
            return Err(Error::invalid(format!(
                "observation has length {} but the graph has {} vertices",
                self.y.len(),
                self.d.n()
            )));
        }
        if !(self.lambda.is_finite() && self.lambda >= 0.0) {
            return Err(Error::invalid(format!("lambda must be finite and nonnegative, got {}", self.lambda)));
        }
        Ok(())
    }

    fn mu(&self) -> f64 {
        0.5 * self.y.len() as f64 * self.lambda
    }

    fn y_scale(&self) -> f64 {
        1.0 + self.y.iter().fold(0.0f64, |a, v| a.max(v.abs()))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DenoiseResult {
    pub theta_hat: Vec<f64>,
    pub dual_z: Vec<f64>,
    pub iterations: usize,
    /// `|(2/n)(theta - y) + lambda D^T z|_inf`
    pub stationarity_residual: f64,
    pub dual_feasibility: f64,
    pub objective: f64,
    pub converged: bool,
    pub method: String,
    #[serde(default)]
    pub warnings: Vec<String>,
}

/// `(1/n) |theta - y|^2 + lambda |D theta|_1`
pub fn objective(d: &IncidenceMatrix, y: &[f64], theta: &[f64], lambda: f64) -> f64 {
    let n = y.len().max(1) as f64;
    let fit: f64 = theta.iter().zip(y).map(|(t, v)| (t - v) * (t - v)).sum();
    fit / n + lambda * d.l1_of_diff(theta)
}

fn scaled_objective(layout: &EdgeLayout, y: &[f64], theta: &[f64], mu: f64) -> f64 {
    let fit: f64 = theta.iter().zip(y).map(|(t, v)| (t - v) * (t - v)).sum();
    let tv: f64 = (0..layout.ends.len()).map(|e| layout.diff(theta, e).abs()).sum();
    0.5 * fit + mu * tv
}

/// Best subgradient certificate for `theta`: jump edges get the sign of the
/// difference, the rest minimize the stationarity residual over `|z| <= 1`.
/// Returns `z` and `|(2/n)(theta - y) + lambda D^T z|_inf`.
pub fn kkt_certificate(p: &DenoiseProblem<'_>, theta: &[f64]) -> (Vec<f64>, f64) {
    let n = p.y.len();
    let layout = EdgeLayout::new(p.d);
    let cert = certify(&layout, p.y, theta, p.mu(), JUMP_TOL * p.y_scale(), Effort::Full);
    (cert.z, objective_units(cert.residual, n))
}

fn objective_units(scaled_residual: f64, n: usize) -> f64 {
    2.0 * scaled_residual / n.max(1) as f64
}

/// Exact minimizer of the objective on a path graph, by a direct 1D scan.
pub fn denoise_path_exact(y: &[f64], lambda: f64) -> Vec<f64> {
    exact::taut_string(y, 0.5 * y.len() as f64 * lambda)
}

pub fn denoise(p: &DenoiseProblem<'_>, opts: &SolverOptions) -> Result<DenoiseResult> {
    p.validate()?;
    if p.y.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidInput("observation contains NaN or infinite values".into()));
    }
    if !(opts.tol > 0.0) {
        return Err(Error::invalid(format!("tolerance must be positive, got {}", opts.tol)));
    }
    let layout = EdgeLayout::new(p.d);
    let mut warnings = Vec::new();
    let parts = real_components(&layout);
    if parts > 1 {
        warnings.push(format!(
            "graph has {parts} connected components; each is denoised separately and the risk bound assumes connectivity"
        ));
    }

    let n = p.y.len();
    let mu = p.mu();
    let y_scale = p.y_scale();
    let jump_tol = JUMP_TOL * y_scale;

    if mu == 0.0 || layout.ends.is_empty() || n == 0 {
        let theta = p.y.to_vec();
        let cert = certify(&layout, p.y, &theta, mu, jump_tol, Effort::Full);
        return Ok(finish(p, theta, cert, 0, "identity", opts.tol, warnings));
    }

    if opts.algorithm == Algorithm::Auto {
        let direct = if is_plain_path(p.d) {
            Some((exact::taut_string(p.y, mu), "taut_string"))
        } else if is_complete(p.d) {
            Some((exact::complete_graph(p.y, mu), "complete_isotonic"))
        } else {
            None
        };
        if let Some((theta, method)) = direct {
            let cert = certify(&layout, p.y, &theta, mu, jump_tol, Effort::Full);
            return Ok(finish(p, theta, cert, 0, method, opts.tol, warnings));
        }
    }

    let out = primal_dual(&layout, p.y, mu, jump_tol, opts.tol * y_scale, opts.max_iter);
    Ok(finish(p, out.theta, out.cert, out.iterations, "primal_dual", opts.tol, warnings))
}

fn finish(
    p: &DenoiseProblem<'_>,
    theta: Vec<f64>,
    cert: Certificate,
    iterations: usize,
    method: &str,
    tol: f64,
    mut warnings: Vec<String>,
) -> DenoiseResult {
    let n = p.y.len();
    let stationarity_residual = objective_units(cert.residual, n);
    let converged = stationarity_residual <= tol * p.y_scale() && cert.dual_feasibility <= 1.0 + tol;
    if !converged {
        warnings.push(format!("stopped without a certificate at tolerance {tol} (residual {stationarity_residual:.3e})"));
    }
    DenoiseResult {
        objective: objective(p.d, p.y, &theta, p.lambda),
        theta_hat: theta,
        dual_z: cert.z,
        iterations,
        stationarity_residual,
        dual_feasibility: cert.dual_feasibility,
        converged,
        method: method.to_string(),
        warnings,
    }
}

fn real_components(layout: &EdgeLayout) -> usize {
    let mut uf = UnionFind::new(layout.n);
    let mut parts = layout.n;
    for &(a, b) in &layout.ends {
        if b < layout.n && uf.union(a, b) {
            parts -= 1;
        }
    }
    parts
}

fn is_plain_path(d: &IncidenceMatrix) -> bool {
    d.m() + 1 == d.n() && d.rows().iter().enumerate().all(|(e, r)| r.neg == Some(e + 1) && r.pos == e)
}

fn is_complete(d: &IncidenceMatrix) -> bool {
    let n = d.n();
    matches!(d.family(), Family::Complete)
        && d.m() == n * n.saturating_sub(1) / 2
        && d.rows().iter().all(|r| r.neg.is_some())
}

/// Largest singular value of `D`, by power iteration on `D^T D`, capped by
/// the bound `sqrt(max over edges of deg(a) + deg(b))`.
fn operator_norm(layout: &EdgeLayout) -> f64 {
    let nodes = layout.nodes();
    let mut deg = vec![0usize; nodes];
    for &(a, b) in &layout.ends {
        deg[a] += 1;
        deg[b] += 1;
    }
    let bound = layout
        .ends
        .iter()
        .map(|&(a, b)| {
            // the ground vertex contributes nothing to D^T D
            let db = if b == layout.n { 0 } else { deg[b] };
            (deg[a] + db) as f64
        })
        .fold(0.0, f64::max)
        .sqrt();
    let n = layout.n;
    let mut x: Vec<f64> = (0..n).map(|i| ((i as f64 + 1.0) * 0.7548776662).sin() + 0.1).collect();
    let mut dx = vec![0.0; layout.ends.len()];
    let mut est = 0.0;
    for _ in 0..5000 {
        let norm = x.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm == 0.0 {
            break;
        }
        x.iter_mut().for_each(|v| *v /= norm);
        for (e, o) in dx.iter_mut().enumerate() {
            *o = layout.diff(&x, e);
        }
        let mut next = vec![0.0; n];
        for (&(a, b), &v) in layout.ends.iter().zip(&dx) {
            next[a] += v;
            if b < n {
                next[b] -= v;
            }
        }
        let new_est = x.iter().zip(&next).map(|(u, v)| u * v).sum::<f64>().max(0.0).sqrt();
        x = next;
        let done = (new_est - est).abs() <= POWER_TOL * new_est;
        est = new_est;
        if done {
            break;
        }
    }
    // The Rayleigh quotient approaches from below; leave some headroom.
    (1.05 * est).min(bound).max(est)
}

struct PrimalDualOutput {
    theta: Vec<f64>,
    cert: Certificate,
    iterations: usize,
}

fn primal_dual(layout: &EdgeLayout, y: &[f64], mu: f64, jump_tol: f64, target: f64, max_iter: usize) -> PrimalDualOutput {
    let n = layout.n;
    let m = layout.ends.len();
    let l = operator_norm(layout).max(1e-12);
    let mut tau = 1.0 / l;
    let mut sigma = 1.0 / l;
    let mut theta = y.to_vec();
    let mut theta_bar = theta.clone();
    let mut p = vec![0.0; m];
    let mut dtp = vec![0.0; n];
    let mut best: Option<(Vec<f64>, Certificate)> = None;

    for it in 1..=max_iter {
        for (e, pe) in p.iter_mut().enumerate() {
            *pe = (*pe + sigma * layout.diff(&theta_bar, e)).clamp(-mu, mu);
        }
        dtp.iter_mut().for_each(|v| *v = 0.0);
        for (&(a, b), &pe) in layout.ends.iter().zip(&p) {
            dtp[a] += pe;
            if b < n {
                dtp[b] -= pe;
            }
        }
        let omega = 1.0 / (1.0 + 2.0 * tau).sqrt();
        for i in 0..n {
            let next = (theta[i] - tau * dtp[i] + tau * y[i]) / (1.0 + tau);
            theta_bar[i] = next + omega * (next - theta[i]);
            theta[i] = next;
        }
        tau *= omega;
        sigma /= omega;

        if it % POLISH_EVERY == 0 || it == max_iter {
            if let Some((cand, cert)) = polish(layout, y, &theta, mu, jump_tol, target) {
                let ok = cert.residual <= target;
                if best.as_ref().is_none_or(|(_, b)| cert.residual < b.residual) {
                    best = Some((cand, cert));
                }
                if ok {
                    let (theta, cert) = best.expect("just stored");
                    return PrimalDualOutput { theta, cert, iterations: it };
                }
            }
        }
    }

    let raw = certify(layout, y, &theta, mu, jump_tol, Effort::Full);
    let (theta, cert) = match best {
        Some((t, c)) if c.residual < raw.residual => (t, c),
        _ => (theta, raw),
    };
    PrimalDualOutput { theta, cert, iterations: max_iter }
}

/// Closed-form minimizer over vectors that are constant on the groups of
/// `uf` and respect the jump signs of `diffs` across groups. Whenever the
/// result flips the sign of a jump, the two sides are merged and the
/// candidate is recomputed.
fn fused_candidate(layout: &EdgeLayout, y: &[f64], diffs: &[f64], mu: f64, mut uf: UnionFind) -> Vec<f64> {
    let n = layout.n;
    loop {
        let labels = uf.labels();
        let groups = labels.iter().copied().max().map_or(0, |g| g + 1);
        let mut sum = vec![0.0; groups];
        let mut count = vec![0usize; groups];
        let mut accum = vec![0.0; groups];
        for i in 0..n {
            sum[labels[i]] += y[i];
            count[labels[i]] += 1;
        }
        for (e, d) in diffs.iter().enumerate() {
            let (a, b) = layout.ends[e];
            if labels[a] != labels[b] {
                accum[labels[a]] += d.signum();
                accum[labels[b]] -= d.signum();
            }
        }
        let grounded = layout.has_ground.then(|| labels[n]);
        let value: Vec<f64> = (0..groups)
            .map(|g| if Some(g) == grounded { 0.0 } else { (sum[g] - mu * accum[g]) / count[g] as f64 })
            .collect();
        let cand: Vec<f64> = (0..n).map(|i| value[labels[i]]).collect();

        let mut merged = false;
        for (e, d) in diffs.iter().enumerate() {
            let (a, b) = layout.ends[e];
            if labels[a] != labels[b] && d.signum() * layout.diff(&cand, e) < 0.0 {
                uf.union(a, b);
                merged = true;
            }
        }
        if !merged {
            return cand;
        }
    }
}

/// Tries fused candidates from a ladder of fusion thresholds and returns the
/// one with the smallest certified residual, stopping early once `target` is
/// met.
fn polish(
    layout: &EdgeLayout,
    y: &[f64],
    theta: &[f64],
    mu: f64,
    jump_tol: f64,
    target: f64,
) -> Option<(Vec<f64>, Certificate)> {
    let nodes = layout.nodes();
    let m = layout.ends.len();
    let diffs: Vec<f64> = (0..m).map(|e| layout.diff(theta, e)).collect();
    let spread = diffs.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    if spread == 0.0 {
        let cert = certify(layout, y, theta, mu, jump_tol, Effort::Quick);
        return Some((theta.to_vec(), cert));
    }
    let reference = scaled_objective(layout, y, theta, mu);
    let mut best: Option<(Vec<f64>, Certificate)> = None;
    let mut last_fused = usize::MAX;

    for k in 1..=14 {
        let t = spread * 10f64.powi(-k);
        let fused = diffs.iter().filter(|d| d.abs() <= t).count();
        if fused == last_fused {
            continue;
        }
        last_fused = fused;

        let mut uf = UnionFind::new(nodes);
        for (e, d) in diffs.iter().enumerate() {
            if d.abs() <= t {
                let (a, b) = layout.ends[e];
                uf.union(a, b);
            }
        }
        let cand = fused_candidate(layout, y, &diffs, mu, uf);
        let obj = scaled_objective(layout, y, &cand, mu);
        if obj > reference + 1e-12 * (1.0 + reference.abs()) {
            continue;
        }
        let cert = certify(layout, y, &cand, mu, jump_tol, Effort::Quick);
        let done = cert.residual <= target;
        if best.as_ref().is_none_or(|(_, b)| cert.residual < b.residual) {
            best = Some((cand, cert));
        }
        if done {
            break;
        }
    }
    best
}
