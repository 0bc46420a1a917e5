//! Rate fits and summary statistics over experiment records.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::ExperimentRecord;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RateModel {
    /// `mse ~ C * log(n) / n`, fit through the origin in `x = log(n)/n`.
    CLogNOverN,
    /// `log(mse) = a + b log(n)` by least squares.
    PowerLaw,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RateFit {
    pub model: RateModel,
    /// `C` for the log-rate model, `exp(a)` for the power law.
    pub constant: f64,
    /// Slope `b` of the power law.
    pub exponent: Option<f64>,
    pub r_squared: f64,
    pub points: usize,
}

/// Mean MSE and its standard error at one size.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SeriesPoint {
    pub n: usize,
    pub mean: f64,
    pub stderr: f64,
    pub trials: usize,
}

/// Per-size means, ascending in `n`.
pub fn series_points<'a>(records: impl IntoIterator<Item = &'a ExperimentRecord>) -> Vec<SeriesPoint> {
    let mut by_n: BTreeMap<usize, Vec<f64>> = BTreeMap::new();
    for r in records {
        by_n.entry(r.n).or_default().push(r.mse);
    }
    by_n.into_iter()
        .map(|(n, v)| {
            let (mean, stderr) = mean_stderr(&v);
            SeriesPoint { n, mean, stderr, trials: v.len() }
        })
        .collect()
}

fn mean_stderr(v: &[f64]) -> (f64, f64) {
    let k = v.len() as f64;
    let mean = v.iter().sum::<f64>() / k;
    if v.len() < 2 {
        return (mean, 0.0);
    }
    let var = v.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (k - 1.0);
    (mean, (var / k).sqrt())
}

/// Fits `model` to the per-size mean MSE of `records`, which should hold a
/// single series.
pub fn fit_rate(records: &[ExperimentRecord], model: RateModel) -> Result<RateFit> {
    let pts = series_points(records);
    if pts.len() < 2 {
        return Err(Error::Degenerate(format!("rate fit needs at least two sizes, got {}", pts.len())));
    }
    if let Some(p) = pts.iter().find(|p| !(p.mean > 0.0 && p.mean.is_finite())) {
        return Err(Error::Degenerate(format!("mean MSE at n = {} is {}", p.n, p.mean)));
    }
    if pts.iter().any(|p| p.n < 2) {
        return Err(Error::Degenerate("rate fit needs n >= 2".into()));
    }
    match model {
        RateModel::CLogNOverN => {
            let xs: Vec<f64> = pts.iter().map(|p| (p.n as f64).ln() / p.n as f64).collect();
            let ys: Vec<f64> = pts.iter().map(|p| p.mean).collect();
            let sxx: f64 = xs.iter().map(|x| x * x).sum();
            let c = xs.iter().zip(&ys).map(|(x, y)| x * y).sum::<f64>() / sxx;
            let pred: Vec<f64> = xs.iter().map(|x| c * x).collect();
            Ok(RateFit { model, constant: c, exponent: None, r_squared: r_squared(&ys, &pred), points: pts.len() })
        }
        RateModel::PowerLaw => {
            let xs: Vec<f64> = pts.iter().map(|p| (p.n as f64).ln()).collect();
            let ys: Vec<f64> = pts.iter().map(|p| p.mean.ln()).collect();
            let (a, b) = ols(&xs, &ys);
            let pred: Vec<f64> = xs.iter().map(|x| a + b * x).collect();
            Ok(RateFit {
                model,
                constant: a.exp(),
                exponent: Some(b),
                r_squared: r_squared(&ys, &pred),
                points: pts.len(),
            })
        }
    }
}

fn ols(x: &[f64], y: &[f64]) -> (f64, f64) {
    let k = x.len() as f64;
    let mx = x.iter().sum::<f64>() / k;
    let my = y.iter().sum::<f64>() / k;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    let b = sxy / sxx;
    (my - b * mx, b)
}

fn r_squared(y: &[f64], pred: &[f64]) -> f64 {
    let k = y.len() as f64;
    let my = y.iter().sum::<f64>() / k;
    let ss_tot: f64 = y.iter().map(|v| (v - my) * (v - my)).sum();
    let ss_res: f64 = y.iter().zip(pred).map(|(v, p)| (v - p) * (v - p)).sum();
    if ss_tot == 0.0 {
        return if ss_res == 0.0 { 1.0 } else { 0.0 };
    }
    (1.0 - ss_res / ss_tot).clamp(0.0, 1.0)
}

/// Pearson correlation between the mean MSE of each `(k, l)` island layout
/// and the product `k * l`, over records sharing one `n`.
pub fn kl_linearity_check(records: &[ExperimentRecord]) -> Result<f64> {
    let mut groups: BTreeMap<(usize, usize), Vec<f64>> = BTreeMap::new();
    let mut n = None;
    for r in records {
        let (Some(k), Some(l)) = (r.k, r.l) else {
            return Err(Error::invalid("record without island parameters"));
        };
        if *n.get_or_insert(r.n) != r.n {
            return Err(Error::invalid("island records span several sizes"));
        }
        groups.entry((k, l)).or_default().push(r.mse);
    }
    if groups.len() < 2 {
        return Err(Error::Degenerate("need at least two island layouts".into()));
    }
    let xs: Vec<f64> = groups.keys().map(|(k, l)| (k * l) as f64).collect();
    let ys: Vec<f64> = groups.values().map(|v| mean_stderr(v).0).collect();
    pearson(&xs, &ys)
}

fn pearson(x: &[f64], y: &[f64]) -> Result<f64> {
    let k = x.len() as f64;
    let mx = x.iter().sum::<f64>() / k;
    let my = y.iter().sum::<f64>() / k;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    let syy: f64 = y.iter().map(|b| (b - my) * (b - my)).sum();
    let flat = |v: &[f64]| v.iter().all(|t| *t == v[0]);
    if flat(x) || flat(y) || sxx == 0.0 || syy == 0.0 {
        return Err(Error::Degenerate("correlation undefined for constant data".into()));
    }
    Ok(sxy / (sxx * syy).sqrt())
}
