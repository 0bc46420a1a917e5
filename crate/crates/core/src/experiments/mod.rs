//! Seeded Monte Carlo studies: island-model sweeps over graph families,
//! oracle tuning, and rate studies on 2D grids.
//!
//! A run is a pure function of its [`ExperimentConfig`]. Each trial derives
//! its graph and noise seeds from the master seed and the trial's
//! coordinates, so the work pool can execute trials in any order.

mod fit;
mod output;
mod presets;

use std::collections::HashMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graphs::{
    build_complete, build_cycle_power, build_erdos_renyi, build_grid, build_hypercube, build_path,
    build_random_regular, build_star, incidence, Graph, IncidenceMatrix,
};
use crate::haar::haar_denoise_2d;
use crate::signals::{gaussian_noise, NoiseModel, SignalSpec};
use crate::spectral::{rho, RhoMethod};
use crate::tvsolver::{denoise, lambda_value, DenoiseProblem, LambdaRule, RuleKind, SolverOptions};

pub use fit::{fit_rate, kl_linearity_check, series_points, RateFit, RateModel, SeriesPoint};
pub use output::{write_outputs, Manifest, OutputFiles};
pub use presets::{preset, rate_study_config, rate_study_nonparametric, RateStudyKind, PRESETS};

/// Largest `j` tried by the oracle search.
pub const ORACLE_CAP: usize = 200;

/// Graph family with its non-size parameters; the size comes from the sweep.
/// For grids the size is the side length, for hypercubes the dimension, and
/// the vertex count otherwise.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum GraphSpec {
    Path,
    Grid { d: usize },
    Hypercube,
    Complete,
    Star,
    CyclePower { k: usize },
    /// Edge probability `expected_degree / n`.
    ErdosRenyi { expected_degree: f64 },
    RandomRegular { d: usize },
}

impl GraphSpec {
    pub fn is_random(&self) -> bool {
        matches!(self, GraphSpec::ErdosRenyi { .. } | GraphSpec::RandomRegular { .. })
    }

    pub fn label(&self) -> String {
        match self {
            GraphSpec::Path => "path".into(),
            GraphSpec::Grid { d } => format!("grid_{d}d"),
            GraphSpec::Hypercube => "hypercube".into(),
            GraphSpec::Complete => "complete".into(),
            GraphSpec::Star => "star".into(),
            GraphSpec::CyclePower { k } => format!("cycle_power_k{k}"),
            GraphSpec::ErdosRenyi { expected_degree } => format!("erdos_renyi_d{expected_degree}"),
            GraphSpec::RandomRegular { d } => format!("random_regular_d{d}"),
        }
    }

    pub fn build(&self, size: usize, seed: u64) -> Result<Graph> {
        match *self {
            GraphSpec::Path => build_path(size),
            GraphSpec::Grid { d } => build_grid(d, size),
            GraphSpec::Hypercube => build_hypercube(size),
            GraphSpec::Complete => build_complete(size),
            GraphSpec::Star => build_star(size),
            GraphSpec::CyclePower { k } => build_cycle_power(size, k),
            GraphSpec::ErdosRenyi { expected_degree } => {
                if size == 0 {
                    return Err(Error::invalid("empty graph"));
                }
                build_erdos_renyi(size, (expected_degree / size as f64).min(1.0), seed)
            }
            GraphSpec::RandomRegular { d } => build_random_regular(size, d, seed),
        }
    }

    /// `(d, side)` when signals can be sampled on this family.
    pub fn grid_shape(&self, size: usize) -> Option<(usize, usize)> {
        match *self {
            GraphSpec::Grid { d } => Some((d, size)),
            GraphSpec::Hypercube => Some((size, 2)),
            GraphSpec::Path => Some((1, size)),
            _ => None,
        }
    }

    fn vertex_count(&self, size: usize) -> Option<usize> {
        match *self {
            GraphSpec::Grid { d } => size.checked_pow(d as u32),
            GraphSpec::Hypercube => 1usize.checked_shl(size as u32),
            _ => Some(size),
        }
    }
}

/// How the TV estimator picks its regularization weight.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "policy", rename_all = "snake_case")]
pub enum LambdaPolicy {
    /// Evaluate a tuning rule with the experiment's `sigma`.
    Theoretical {
        rule: RuleKind,
        #[serde(default = "default_delta")]
        delta: f64,
        #[serde(default = "one")]
        constant_c: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        value: Option<f64>,
    },
    /// Geometric search `start_multiplier * lambda_th * beta^j` scored
    /// against the true signal.
    Oracle {
        rule: RuleKind,
        #[serde(default = "default_beta")]
        beta: f64,
        #[serde(default = "default_start")]
        start_multiplier: f64,
        #[serde(default = "default_delta")]
        delta: f64,
        #[serde(default = "one")]
        constant_c: f64,
    },
}

fn default_delta() -> f64 {
    0.1
}
fn one() -> f64 {
    1.0
}
fn default_beta() -> f64 {
    0.85
}
fn default_start() -> f64 {
    10.0
}
fn default_sigma() -> f64 {
    0.5
}
fn default_trials() -> usize {
    50
}

impl LambdaPolicy {
    pub fn theoretical(rule: RuleKind) -> Self {
        LambdaPolicy::Theoretical { rule, delta: default_delta(), constant_c: 1.0, value: None }
    }

    pub fn oracle(rule: RuleKind) -> Self {
        LambdaPolicy::Oracle {
            rule,
            beta: default_beta(),
            start_multiplier: default_start(),
            delta: default_delta(),
            constant_c: 1.0,
        }
    }

    fn rule(&self, sigma: f64) -> LambdaRule {
        match *self {
            LambdaPolicy::Theoretical { rule, delta, constant_c, value } => {
                LambdaRule { rule, sigma, delta, constant_c, value }
            }
            LambdaPolicy::Oracle { rule, delta, constant_c, .. } => {
                LambdaRule { rule, sigma, delta, constant_c, value: None }
            }
        }
    }

    pub fn label(&self) -> String {
        match self {
            LambdaPolicy::Theoretical { rule, .. } => format!("theoretical:{rule}"),
            LambdaPolicy::Oracle { rule, .. } => format!("oracle:{rule}"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum EstimatorSpec {
    Tv { lambda: LambdaPolicy },
    /// Haar soft-thresholding; 2D grids with a power-of-two side only.
    Haar,
    /// Returns the observation unchanged.
    Identity,
}

impl EstimatorSpec {
    pub fn label(&self) -> &'static str {
        match self {
            EstimatorSpec::Tv { .. } => "tv",
            EstimatorSpec::Haar => "haar",
            EstimatorSpec::Identity => "identity",
        }
    }

    fn policy_label(&self) -> String {
        match self {
            EstimatorSpec::Tv { lambda } => lambda.label(),
            _ => "none".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub name: String,
    pub graphs: Vec<GraphSpec>,
    /// Size sweep, interpreted per family (see [`GraphSpec`]).
    pub sizes: Vec<usize>,
    pub signals: Vec<SignalSpec>,
    #[serde(default = "default_sigma")]
    pub sigma: f64,
    #[serde(default = "default_trials")]
    pub trials: usize,
    pub estimators: Vec<EstimatorSpec>,
    #[serde(default)]
    pub master_seed: u64,
    #[serde(default)]
    pub solver: SolverOptions,
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.trials == 0 {
            return Err(Error::invalid("trials must be at least 1"));
        }
        if self.graphs.is_empty() || self.sizes.is_empty() || self.signals.is_empty() || self.estimators.is_empty() {
            return Err(Error::invalid("graphs, sizes, signals and estimators must be non-empty"));
        }
        if !(self.sigma.is_finite() && self.sigma >= 0.0) {
            return Err(Error::invalid(format!("sigma must be finite and nonnegative, got {}", self.sigma)));
        }
        if !(self.solver.tol > 0.0) || self.solver.max_iter == 0 {
            return Err(Error::invalid("solver tolerance and iteration cap must be positive"));
        }
        let non_island = self.signals.iter().filter(|s| !matches!(s, SignalSpec::Island { .. })).count();
        if non_island > 0 && self.signals.len() > 1 {
            // records identify signals only through (k, l)
            return Err(Error::invalid("several signals per experiment are only supported for island signals"));
        }
        for est in &self.estimators {
            match est {
                EstimatorSpec::Tv { lambda } => {
                    if let LambdaPolicy::Oracle { beta, start_multiplier, .. } = lambda {
                        if !(*beta > 0.0 && *beta < 1.0) {
                            return Err(Error::invalid(format!("beta must lie in (0, 1), got {beta}")));
                        }
                        if !(start_multiplier.is_finite() && *start_multiplier > 0.0) {
                            return Err(Error::invalid("start multiplier must be positive"));
                        }
                    }
                    let rule = lambda.rule(self.sigma);
                    if rule.rule == RuleKind::Manual && matches!(lambda, LambdaPolicy::Oracle { .. }) {
                        return Err(Error::invalid("the oracle search needs a formula rule, not a manual value"));
                    }
                    rule.validate()?;
                }
                EstimatorSpec::Haar => {
                    for g in &self.graphs {
                        if !matches!(g, GraphSpec::Grid { d: 2 }) {
                            return Err(Error::invalid("the Haar estimator needs 2D grids"));
                        }
                    }
                    if let Some(s) = self.sizes.iter().find(|s| !s.is_power_of_two()) {
                        return Err(Error::invalid(format!("the Haar estimator needs power-of-two sides, got {s}")));
                    }
                }
                EstimatorSpec::Identity => {}
            }
        }
        for g in &self.graphs {
            for &s in &self.sizes {
                let n = g.vertex_count(s).ok_or_else(|| Error::SizeLimit(format!("{} at size {s}", g.label())))?;
                if n > 1 << 24 {
                    return Err(Error::SizeLimit(format!("{} at size {s} has {n} vertices", g.label())));
                }
            }
        }
        Ok(())
    }

    /// Expected number of records.
    pub fn record_count(&self) -> usize {
        self.graphs.len() * self.sizes.len() * self.signals.len() * self.trials * self.estimators.len()
    }
}

/// One estimator on one trial.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentRecord {
    pub family: String,
    pub n: usize,
    pub k: Option<usize>,
    pub l: Option<usize>,
    pub estimator: String,
    pub lambda_policy: String,
    pub lambda_value: Option<f64>,
    pub trial: usize,
    pub seed: u64,
    pub mse: f64,
    pub converged: bool,
}

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    let mut z = x;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn fnv1a(s: &str) -> u64 {
    s.bytes().fold(0xcbf2_9ce4_8422_2325u64, |h, b| (h ^ b as u64).wrapping_mul(0x0000_0100_0000_01B3))
}

fn derive_seed(master: u64, parts: &[u64]) -> u64 {
    parts.iter().fold(splitmix64(master), |acc, &p| splitmix64(acc ^ p))
}

fn signal_key(s: &SignalSpec) -> String {
    match s {
        SignalSpec::Island { k, l } => format!("island_{k}_{l}"),
        other => serde_json::to_string(other).unwrap_or_else(|_| other.label()),
    }
}

fn mse(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>() / a.len().max(1) as f64
}

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// Smallest `j >= 1` whose error is not beaten by any of the next three,
/// for errors `err(j)` evaluated lazily. Gives up after `cap` and returns
/// the best index seen with `capped = true`.
pub fn oracle_index(mut err: impl FnMut(usize) -> Result<f64>, cap: usize) -> Result<(usize, bool)> {
    let mut cache: Vec<f64> = Vec::new();
    let mut at = |j: usize, cache: &mut Vec<f64>| -> Result<f64> {
        while cache.len() < j {
            let next = cache.len() + 1;
            cache.push(err(next)?);
        }
        Ok(cache[j - 1])
    };
    for j in 1..=cap {
        let here = at(j, &mut cache)?;
        let mut stop = true;
        for i in 1..=3 {
            if at(j + i, &mut cache)? < here {
                stop = false;
                break;
            }
        }
        if stop {
            return Ok((j, false));
        }
    }
    let best = (1..=cap).min_by(|&a, &b| cache[a - 1].total_cmp(&cache[b - 1])).unwrap_or(1);
    Ok((best, true))
}

/// Result of the oracle search over `start_multiplier * lambda_th * beta^j`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleOutcome {
    pub lambda: f64,
    pub index: usize,
    pub capped: bool,
    /// `(lambda, |theta_hat - theta_star|_2)` for every evaluated `j`.
    pub curve: Vec<(f64, f64)>,
    pub theta: Vec<f64>,
    pub converged: bool,
}

pub fn oracle_lambda_search(
    d: &IncidenceMatrix,
    y: &[f64],
    theta_star: &[f64],
    lambda_th: f64,
    beta: f64,
    start_multiplier: f64,
    opts: &SolverOptions,
) -> Result<OracleOutcome> {
    if !(beta > 0.0 && beta < 1.0) {
        return Err(Error::invalid(format!("beta must lie in (0, 1), got {beta}")));
    }
    if theta_star.len() != y.len() {
        return Err(Error::invalid("true signal and observation differ in length"));
    }
    let mut fits: Vec<(f64, f64, Vec<f64>, bool)> = Vec::new();
    let (index, capped) = oracle_index(
        |j| {
            let lambda = start_multiplier * lambda_th * beta.powi(j as i32);
            let r = denoise(&DenoiseProblem::new(y, d, lambda)?, opts)?;
            let e = dist(&r.theta_hat, theta_star);
            fits.push((lambda, e, r.theta_hat, r.converged));
            Ok(e)
        },
        ORACLE_CAP,
    )?;
    let curve = fits.iter().map(|(l, e, _, _)| (*l, *e)).collect();
    let (lambda, _, theta, converged) = fits.swap_remove(index - 1);
    Ok(OracleOutcome { lambda, index, capped, curve, theta, converged })
}

struct Case {
    graph: GraphSpec,
    size: usize,
    signal: SignalSpec,
}

struct Unit {
    case: usize,
    trial: usize,
}

/// Per-case data shared by all trials of a deterministic family.
struct Prepared {
    graph: Option<(Graph, IncidenceMatrix)>,
    rho: Option<f64>,
}

fn needs_rho(cfg: &ExperimentConfig) -> bool {
    cfg.estimators.iter().any(|e| match e {
        EstimatorSpec::Tv { lambda } => lambda.rule(cfg.sigma).rule == RuleKind::TheoremGeneral,
        _ => false,
    })
}

fn compute_rho(d: &IncidenceMatrix, g: &GraphSpec) -> Result<f64> {
    let method = match g {
        GraphSpec::Grid { .. } | GraphSpec::Hypercube | GraphSpec::Path if d.n() > 1024 => {
            RhoMethod::EigensumStructured
        }
        _ => RhoMethod::DensePseudoinverse,
    };
    Ok(rho(d, method)?.rho)
}

/// Runs every (graph, size, signal, trial, estimator) combination on a pool
/// of `threads` workers (`None` uses the machine default). Records come back
/// sorted by case, trial and estimator, independent of scheduling.
pub fn run_experiment(cfg: &ExperimentConfig, threads: Option<usize>) -> Result<Vec<ExperimentRecord>> {
    cfg.validate()?;
    let mut cases = Vec::new();
    for g in &cfg.graphs {
        for &size in &cfg.sizes {
            for s in &cfg.signals {
                cases.push(Case { graph: g.clone(), size, signal: s.clone() });
            }
        }
    }
    let want_rho = needs_rho(cfg);

    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(t) = threads {
        if t == 0 {
            return Err(Error::invalid("thread count must be positive"));
        }
        builder = builder.num_threads(t);
    }
    let pool = builder.build().map_err(|e| Error::invalid(format!("cannot start worker pool: {e}")))?;

    pool.install(|| {
        // Deterministic families share one graph (and rho) per case.
        let prepared: Vec<Prepared> = cases
            .par_iter()
            .map(|c| -> Result<Prepared> {
                if c.graph.is_random() {
                    return Ok(Prepared { graph: None, rho: None });
                }
                let g = c.graph.build(c.size, 0)?;
                let d = incidence(&g);
                let rho = if want_rho { Some(compute_rho(&d, &c.graph)?) } else { None };
                Ok(Prepared { graph: Some((g, d)), rho })
            })
            .collect::<Result<_>>()?;

        let units: Vec<Unit> =
            (0..cases.len()).flat_map(|case| (0..cfg.trials).map(move |trial| Unit { case, trial })).collect();
        let per_unit: Vec<Vec<ExperimentRecord>> = units
            .par_iter()
            .map(|u| run_unit(cfg, &cases[u.case], &prepared[u.case], u.trial, want_rho))
            .collect::<Result<_>>()?;
        Ok(per_unit.into_iter().flatten().collect())
    })
}

fn run_unit(
    cfg: &ExperimentConfig,
    case: &Case,
    prepared: &Prepared,
    trial: usize,
    want_rho: bool,
) -> Result<Vec<ExperimentRecord>> {
    let graph_seed = derive_seed(cfg.master_seed, &[fnv1a(&case.graph.label()), case.size as u64, trial as u64]);
    let noise_seed = derive_seed(cfg.master_seed, &[fnv1a(&signal_key(&case.signal)), case.size as u64, trial as u64]);

    let owned;
    let (g, d, rho_value) = match &prepared.graph {
        Some((g, d)) => (g, d, prepared.rho),
        None => {
            let g = case.graph.build(case.size, graph_seed)?;
            let d = incidence(&g);
            let r = if want_rho { Some(compute_rho(&d, &case.graph)?) } else { None };
            owned = (g, d);
            (&owned.0, &owned.1, r)
        }
    };
    let n = g.n();
    let grid = case.graph.grid_shape(case.size);
    let theta_star = case.signal.generate(n, grid, cfg.master_seed)?;
    let noise = gaussian_noise(n, &NoiseModel { sigma: cfg.sigma, seed: noise_seed, stream_id: trial as u64 })?;
    let y: Vec<f64> = theta_star.iter().zip(&noise).map(|(a, b)| a + b).collect();
    let (k, l) = match case.signal {
        SignalSpec::Island { k, l } => (Some(k), Some(l)),
        _ => (None, None),
    };

    let mut out = Vec::with_capacity(cfg.estimators.len());
    for est in &cfg.estimators {
        let (fit, lambda_value, converged) = match est {
            EstimatorSpec::Identity => (y.clone(), None, true),
            EstimatorSpec::Haar => {
                let side = grid.map(|(_, s)| s).ok_or_else(|| Error::invalid("Haar needs a grid"))?;
                (haar_denoise_2d(&y, side, cfg.sigma)?, None, true)
            }
            EstimatorSpec::Tv { lambda } => {
                let lambda_th = lambda_value(&lambda.rule(cfg.sigma), g, rho_value)?;
                match *lambda {
                    LambdaPolicy::Theoretical { .. } => {
                        let r = denoise(&DenoiseProblem::new(&y, d, lambda_th)?, &cfg.solver)?;
                        (r.theta_hat, Some(lambda_th), r.converged)
                    }
                    LambdaPolicy::Oracle { beta, start_multiplier, .. } => {
                        let o = oracle_lambda_search(d, &y, &theta_star, lambda_th, beta, start_multiplier, &cfg.solver)?;
                        (o.theta, Some(o.lambda), o.converged && !o.capped)
                    }
                }
            }
        };
        out.push(ExperimentRecord {
            family: case.graph.label(),
            n,
            k,
            l,
            estimator: est.label().to_string(),
            lambda_policy: est.policy_label(),
            lambda_value,
            trial,
            seed: noise_seed,
            mse: mse(&fit, &theta_star),
            converged,
        });
    }
    Ok(out)
}

/// Groups records by everything except the trial, preserving first-seen order.
pub fn group_series(records: &[ExperimentRecord]) -> Vec<(SeriesKey, Vec<&ExperimentRecord>)> {
    let mut order: Vec<SeriesKey> = Vec::new();
    let mut groups: HashMap<SeriesKey, Vec<&ExperimentRecord>> = HashMap::new();
    for r in records {
        let key = SeriesKey::of(r);
        if !groups.contains_key(&key) {
            order.push(key.clone());
        }
        groups.entry(key).or_default().push(r);
    }
    order
        .into_iter()
        .map(|k| {
            let v = groups.remove(&k).unwrap_or_default();
            (k, v)
        })
        .collect()
}

/// A curve across sizes: one family, signal parameters and estimator.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SeriesKey {
    pub family: String,
    pub k: Option<usize>,
    pub l: Option<usize>,
    pub estimator: String,
    pub lambda_policy: String,
}

impl SeriesKey {
    pub fn of(r: &ExperimentRecord) -> Self {
        Self {
            family: r.family.clone(),
            k: r.k,
            l: r.l,
            estimator: r.estimator.clone(),
            lambda_policy: r.lambda_policy.clone(),
        }
    }

    pub fn file_stem(&self) -> String {
        let mut s = format!("{}_{}_{}", self.family, self.estimator, self.lambda_policy);
        if let (Some(k), Some(l)) = (self.k, self.l) {
            s.push_str(&format!("_k{k}_l{l}"));
        }
        s.chars().map(|c| if c.is_ascii_alphanumeric() || c == '-' { c } else { '_' }).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn oracle_rule_on_synthetic_curves() {
        let valley = |j: usize| Ok((j as f64 - 5.0).abs());
        assert_eq!(oracle_index(valley, ORACLE_CAP).unwrap(), (5, false));
        let rising = |j: usize| Ok(j as f64);
        assert_eq!(oracle_index(rising, ORACLE_CAP).unwrap(), (1, false));
        // a plateau of ties stops immediately
        assert_eq!(oracle_index(|_| Ok(1.0), ORACLE_CAP).unwrap(), (1, false));
        // a dip two steps later is seen
        let dip = |j: usize| Ok(if j == 3 { 0.0 } else { 1.0 });
        assert_eq!(oracle_index(dip, ORACLE_CAP).unwrap(), (3, false));
        // strictly decreasing never stops
        let falling = |j: usize| Ok(1.0 / j as f64);
        assert_eq!(oracle_index(falling, 20).unwrap(), (20, true));
    }

    #[test]
    fn seeds_are_spread() {
        let a = derive_seed(1, &[2, 3]);
        let b = derive_seed(1, &[3, 2]);
        let c = derive_seed(2, &[2, 3]);
        assert!(a != b && a != c && b != c);
    }
}
