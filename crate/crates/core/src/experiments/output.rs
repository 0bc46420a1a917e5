//! On-disk artifacts of an experiment run.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::fit::{fit_rate, kl_linearity_check, series_points, RateFit, RateModel, SeriesPoint};
use super::{group_series, ExperimentConfig, ExperimentRecord, SeriesKey};
use crate::error::Result;

/// Resolved invocation written next to every output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    pub command: String,
    pub config: serde_json::Value,
}

impl Manifest {
    pub fn new(command: &str, config: &impl Serialize) -> Result<Self> {
        Ok(Self {
            tool: "graphtv".into(),
            version: env!("CARGO_PKG_VERSION").into(),
            command: command.into(),
            config: serde_json::to_value(config)?,
        })
    }

    pub fn write(&self, dir: &Path) -> Result<PathBuf> {
        let path = dir.join("manifest.json");
        fs::write(&path, serde_json::to_string_pretty(self)? + "\n")?;
        Ok(path)
    }
}

#[derive(Debug, Clone, Serialize)]
struct SeriesFits {
    series: SeriesKey,
    points: Vec<SeriesPoint>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    fits: Vec<RateFit>,
}

#[derive(Debug, Clone, Serialize)]
struct KlFit {
    family: String,
    n: usize,
    estimator: String,
    lambda_policy: String,
    correlation: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
struct FitsFile {
    series: Vec<SeriesFits>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    kl_linearity: Vec<KlFit>,
}

/// Paths written by [`write_outputs`].
#[derive(Debug, Clone, PartialEq)]
pub struct OutputFiles {
    pub csv: PathBuf,
    pub json: PathBuf,
    pub fits: PathBuf,
    pub manifest: PathBuf,
    pub plots: Vec<PathBuf>,
}

pub fn write_csv(path: &Path, records: &[ExperimentRecord]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for r in records {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

/// Writes `records.csv`, `records.json`, one `plots/<series>.tsv` per curve
/// (`x y yerr` with `x = n`), `fits.json` and `manifest.json` into `dir`.
pub fn write_outputs(dir: &Path, cfg: &ExperimentConfig, records: &[ExperimentRecord]) -> Result<OutputFiles> {
    fs::create_dir_all(dir.join("plots"))?;
    let csv = dir.join("records.csv");
    write_csv(&csv, records)?;
    let json = dir.join("records.json");
    fs::write(&json, serde_json::to_string_pretty(records)? + "\n")?;

    let mut plots = Vec::new();
    let mut series = Vec::new();
    for (key, recs) in group_series(records) {
        let points = series_points(recs.iter().copied());
        let mut tsv = String::from("x\ty\tyerr\n");
        for p in &points {
            tsv.push_str(&format!("{}\t{:e}\t{:e}\n", p.n, p.mean, p.stderr));
        }
        let path = dir.join("plots").join(format!("{}.tsv", key.file_stem()));
        fs::write(&path, tsv)?;
        plots.push(path);
        let owned: Vec<ExperimentRecord> = recs.into_iter().cloned().collect();
        let fits = [RateModel::CLogNOverN, RateModel::PowerLaw]
            .into_iter()
            .filter_map(|m| fit_rate(&owned, m).ok())
            .collect();
        series.push(SeriesFits { series: key, points, fits });
    }

    // island layouts swept at a fixed size
    let mut kl_linearity = Vec::new();
    let mut seen: Vec<(String, usize, String, String)> = Vec::new();
    for r in records.iter().filter(|r| r.k.is_some()) {
        let id = (r.family.clone(), r.n, r.estimator.clone(), r.lambda_policy.clone());
        if seen.contains(&id) {
            continue;
        }
        let group: Vec<ExperimentRecord> = records
            .iter()
            .filter(|o| o.k.is_some() && (&o.family, o.n, &o.estimator, &o.lambda_policy) == (&id.0, id.1, &id.2, &id.3))
            .cloned()
            .collect();
        let layouts = group.iter().map(|o| (o.k, o.l)).collect::<std::collections::BTreeSet<_>>().len();
        if layouts >= 2 {
            kl_linearity.push(KlFit {
                family: id.0.clone(),
                n: id.1,
                estimator: id.2.clone(),
                lambda_policy: id.3.clone(),
                correlation: kl_linearity_check(&group).ok(),
            });
        }
        seen.push(id);
    }

    let fits = dir.join("fits.json");
    fs::write(&fits, serde_json::to_string_pretty(&FitsFile { series, kl_linearity })? + "\n")?;
    let manifest = Manifest::new("experiment", cfg)?.write(dir)?;
    Ok(OutputFiles { csv, json, fits, manifest, plots })
}
