//! Bundled experiment configurations.

use serde::{Deserialize, Serialize};

use super::fit::{fit_rate, RateFit, RateModel};
use super::{run_experiment, EstimatorSpec, ExperimentConfig, ExperimentRecord, GraphSpec, LambdaPolicy};
use crate::error::{Error, Result};
use crate::signals::{GridShape, SignalSpec};
use crate::tvsolver::{RuleKind, SolverOptions};

pub const PRESETS: [&str; 5] = ["island-fig2", "island-fig3", "holder-2d", "cartoon-2d", "isotonic-2d"];

const RATE_SIDES: [usize; 4] = [16, 32, 64, 128];

/// Signal classes for the 2D-grid rate studies.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum RateStudyKind {
    Holder { alpha: f64, lipschitz: f64 },
    /// Any piecewise shape: a disk on a Holder background, a half-plane, ...
    Cartoon { shape: GridShape },
    BiIsotonic { variation_sqrt: f64 },
}

impl RateStudyKind {
    fn signal(&self) -> SignalSpec {
        match *self {
            RateStudyKind::Holder { alpha, lipschitz } => {
                SignalSpec::Grid { function: GridShape::HolderCone { alpha, lipschitz } }
            }
            RateStudyKind::Cartoon { shape } => SignalSpec::Grid { function: shape },
            RateStudyKind::BiIsotonic { variation_sqrt } => SignalSpec::BiIsotonic { variation_sqrt },
        }
    }
}

/// TV on 2D grids of the given sides with the grid tuning rule.
pub fn rate_study_config(
    kind: RateStudyKind,
    sides: &[usize],
    trials: usize,
    sigma: f64,
    master_seed: u64,
) -> ExperimentConfig {
    ExperimentConfig {
        name: "rate-study".into(),
        graphs: vec![GraphSpec::Grid { d: 2 }],
        sizes: sides.to_vec(),
        signals: vec![kind.signal()],
        sigma,
        trials,
        estimators: vec![EstimatorSpec::Tv { lambda: LambdaPolicy::theoretical(RuleKind::Grid2D) }],
        master_seed,
        solver: SolverOptions::default(),
    }
}

/// Runs [`rate_study_config`] and fits a power law to the TV curve.
pub fn rate_study_nonparametric(
    kind: RateStudyKind,
    sides: &[usize],
    trials: usize,
    sigma: f64,
    master_seed: u64,
    threads: Option<usize>,
) -> Result<(Vec<ExperimentRecord>, RateFit)> {
    let cfg = rate_study_config(kind, sides, trials, sigma, master_seed);
    let records = run_experiment(&cfg, threads)?;
    let fit = fit_rate(&records, RateModel::PowerLaw)?;
    Ok((records, fit))
}

fn with_baselines(mut cfg: ExperimentConfig, name: &str) -> ExperimentConfig {
    cfg.name = name.into();
    cfg.estimators.push(EstimatorSpec::Haar);
    cfg.estimators.push(EstimatorSpec::Identity);
    cfg
}

/// Looks up a bundled configuration by name.
pub fn preset(name: &str) -> Result<ExperimentConfig> {
    let tv = |p: LambdaPolicy| EstimatorSpec::Tv { lambda: p };
    let cfg = match name {
        "island-fig2" => ExperimentConfig {
            name: name.into(),
            graphs: vec![
                GraphSpec::Complete,
                GraphSpec::ErdosRenyi { expected_degree: 12.0 },
                GraphSpec::ErdosRenyi { expected_degree: 16.0 },
                GraphSpec::RandomRegular { d: 12 },
            ],
            sizes: vec![100, 200, 400, 800],
            signals: vec![SignalSpec::Island { k: 3, l: 3 }],
            sigma: 0.5,
            trials: 50,
            estimators: vec![
                tv(LambdaPolicy::oracle(RuleKind::TheoremGeneral)),
                tv(LambdaPolicy::theoretical(RuleKind::TheoremGeneral)),
            ],
            master_seed: 2016,
            solver: SolverOptions::default(),
        },
        "island-fig3" => ExperimentConfig {
            name: name.into(),
            graphs: vec![GraphSpec::ErdosRenyi { expected_degree: 16.0 }],
            sizes: vec![100],
            signals: (2..=5).flat_map(|k| (3..=9).map(move |l| SignalSpec::Island { k, l })).collect(),
            sigma: 0.5,
            trials: 50,
            estimators: vec![tv(LambdaPolicy::theoretical(RuleKind::TheoremGeneral))],
            master_seed: 2016,
            solver: SolverOptions::default(),
        },
        "holder-2d" => with_baselines(
            rate_study_config(RateStudyKind::Holder { alpha: 1.0, lipschitz: 10.0 }, &RATE_SIDES, 20, 0.5, 2016),
            name,
        ),
        "cartoon-2d" => with_baselines(
            rate_study_config(
                RateStudyKind::Cartoon {
                    shape: GridShape::CartoonDisk { alpha: 1.0, lipschitz: 1.0, height: 1.0, radius: 0.3 },
                },
                &RATE_SIDES,
                20,
                0.5,
                2016,
            ),
            name,
        ),
        "isotonic-2d" => {
            let mut cfg =
                rate_study_config(RateStudyKind::BiIsotonic { variation_sqrt: 1.0 }, &[32, 64, 128], 20, 0.5, 2016);
            cfg.name = name.into();
            cfg
        }
        other => {
            return Err(Error::invalid(format!("unknown preset '{other}', expected one of {}", PRESETS.join(", "))))
        }
    };
    Ok(cfg)
}
