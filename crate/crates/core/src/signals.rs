//! Ground-truth signals and seeded Gaussian noise.
//!
//! Grid signals sample a closed-form function at `x_i = i / N`
//! (`i = 1..=N` per axis) and are flattened column-major.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::{Exp1, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Background level of the island model; island `j` sits at
/// `ISLAND_BASE + ISLAND_STEP * j`.
pub const ISLAND_BASE: f64 = 50.0;
pub const ISLAND_STEP: f64 = 10.0;

/// Closed-form functions on the unit cube that can be sampled on a grid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "shape", rename_all = "snake_case")]
pub enum GridShape {
    /// `L * |x - 1/2|_inf^alpha`
    HolderCone { alpha: f64, lipschitz: f64 },
    /// A ball of height `height` (center `1/2`, radius `radius`) on top of a
    /// Holder cone background.
    CartoonDisk { alpha: f64, lipschitz: f64, height: f64, radius: f64 },
    /// `height * 1(x_1 <= 1/2)`
    PcHalfplane { height: f64 },
    Constant { value: f64 },
}

impl GridShape {
    pub fn validate(&self) -> Result<()> {
        let holder = |alpha: f64, l: f64| {
            if !(alpha > 0.0 && alpha <= 1.0) {
                return Err(Error::invalid(format!("Holder exponent must lie in (0, 1], got {alpha}")));
            }
            if !(l.is_finite() && l >= 0.0) {
                return Err(Error::invalid(format!("Holder constant must be finite and nonnegative, got {l}")));
            }
            Ok(())
        };
        match *self {
            GridShape::HolderCone { alpha, lipschitz } => {
                holder(alpha, lipschitz)?;
                if lipschitz == 0.0 {
                    return Err(Error::invalid("Holder constant must be positive"));
                }
                Ok(())
            }
            GridShape::CartoonDisk { alpha, lipschitz, height, radius } => {
                holder(alpha, lipschitz)?;
                if !(height.is_finite() && radius > 0.0 && radius.is_finite()) {
                    return Err(Error::invalid("disk needs a finite height and positive radius"));
                }
                Ok(())
            }
            GridShape::PcHalfplane { height } | GridShape::Constant { value: height } => {
                if height.is_finite() {
                    Ok(())
                } else {
                    Err(Error::invalid("level must be finite"))
                }
            }
        }
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        let cone = |alpha: f64, l: f64| l * x.iter().map(|v| (v - 0.5).abs()).fold(0.0, f64::max).powf(alpha);
        match *self {
            GridShape::HolderCone { alpha, lipschitz } => cone(alpha, lipschitz),
            GridShape::CartoonDisk { alpha, lipschitz, height, radius } => {
                let r2: f64 = x.iter().map(|v| (v - 0.5) * (v - 0.5)).sum();
                let inside = if r2 <= radius * radius { height } else { 0.0 };
                inside + cone(alpha, lipschitz)
            }
            GridShape::PcHalfplane { height } => {
                if x[0] <= 0.5 {
                    height
                } else {
                    0.0
                }
            }
            GridShape::Constant { value } => value,
        }
    }
}

/// A ground-truth signal description.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SignalSpec {
    /// `k` blocks of `l` leading coordinates on a constant background.
    Island { k: usize, l: usize },
    /// A function sampled on the grid the signal is generated for.
    Grid { function: GridShape },
    /// Monotone in both axes with `theta[N,N] - theta[1,1] = variation_sqrt`.
    BiIsotonic { variation_sqrt: f64 },
    Custom { values: Vec<f64> },
}

impl SignalSpec {
    /// Short label used in result tables.
    pub fn label(&self) -> String {
        match self {
            SignalSpec::Island { .. } => "island".into(),
            SignalSpec::Grid { function } => match function {
                GridShape::HolderCone { .. } => "holder_cone".into(),
                GridShape::CartoonDisk { .. } => "cartoon_disk".into(),
                GridShape::PcHalfplane { .. } => "pc_halfplane".into(),
                GridShape::Constant { .. } => "constant".into(),
            },
            SignalSpec::BiIsotonic { .. } => "bi_isotonic".into(),
            SignalSpec::Custom { .. } => "custom".into(),
        }
    }

    /// Builds the signal for `n` vertices. Grid-based kinds need `grid =
    /// Some((d, side))`; the bi-isotonic kind needs `d = 2` and uses `seed`.
    pub fn generate(&self, n: usize, grid: Option<(usize, usize)>, seed: u64) -> Result<Vec<f64>> {
        let need_grid = || grid.ok_or_else(|| Error::invalid(format!("signal '{}' needs a grid graph", self.label())));
        let out = match self {
            SignalSpec::Island { k, l } => island_signal(n, *k, *l)?,
            SignalSpec::Grid { function } => {
                let (d, side) = need_grid()?;
                sample_grid_function(function, d, side)?
            }
            SignalSpec::BiIsotonic { variation_sqrt } => {
                let (d, side) = need_grid()?;
                if d != 2 {
                    return Err(Error::invalid("bi-isotonic signals live on 2D grids"));
                }
                bi_isotonic_signal(side, *variation_sqrt, seed)?
            }
            SignalSpec::Custom { values } => values.clone(),
        };
        if out.len() != n {
            return Err(Error::invalid(format!("signal has length {} but the graph has {n} vertices", out.len())));
        }
        Ok(out)
    }
}

pub fn island_signal(n: usize, k: usize, l: usize) -> Result<Vec<f64>> {
    if k.checked_mul(l).is_none_or(|kl| kl > n) {
        return Err(Error::invalid(format!("{k} islands of size {l} do not fit in {n} vertices")));
    }
    let mut v = vec![ISLAND_BASE; n];
    for j in 0..k {
        let level = ISLAND_BASE + ISLAND_STEP * (j + 1) as f64;
        v[j * l..(j + 1) * l].iter_mut().for_each(|t| *t = level);
    }
    Ok(v)
}

pub fn sample_grid_function(f: &GridShape, d: usize, side: usize) -> Result<Vec<f64>> {
    f.validate()?;
    if d == 0 || side == 0 {
        return Err(Error::invalid("grid needs d >= 1 and side >= 1"));
    }
    let n = (side as u128).pow(d as u32);
    if n > 1 << 26 {
        return Err(Error::SizeLimit(format!("grid with {n} vertices")));
    }
    let n = n as usize;
    let mut x = vec![0.0; d];
    let mut out = Vec::with_capacity(n);
    for idx in 0..n {
        let mut rest = idx;
        for xi in x.iter_mut() {
            *xi = (rest % side + 1) as f64 / side as f64;
            rest /= side;
        }
        out.push(f.eval(&x));
    }
    Ok(out)
}

/// Two-dimensional cumulative sum of exponential increments, shifted so the
/// corner `(1,1)` is zero and scaled to the requested corner-to-corner rise.
pub fn bi_isotonic_signal(side: usize, variation_sqrt: f64, seed: u64) -> Result<Vec<f64>> {
    if side == 0 {
        return Err(Error::invalid("side must be positive"));
    }
    if !(variation_sqrt.is_finite() && variation_sqrt >= 0.0) {
        return Err(Error::invalid(format!("variation must be finite and nonnegative, got {variation_sqrt}")));
    }
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let mut theta = vec![0.0; side * side];
    for i2 in 0..side {
        for i1 in 0..side {
            let w: f64 = rng.sample(Exp1);
            let left = if i1 > 0 { theta[i1 - 1 + side * i2] } else { 0.0 };
            let below = if i2 > 0 { theta[i1 + side * (i2 - 1)] } else { 0.0 };
            let diag = if i1 > 0 && i2 > 0 { theta[i1 - 1 + side * (i2 - 1)] } else { 0.0 };
            theta[i1 + side * i2] = w + left + below - diag;
        }
    }
    let lo = theta[0];
    let range = theta[side * side - 1] - lo;
    let scale = if range > 0.0 { variation_sqrt / range } else { 0.0 };
    theta.iter_mut().for_each(|t| *t = (*t - lo) * scale);
    Ok(theta)
}

/// Gaussian noise: `sigma` times independent standard normals drawn from
/// ChaCha20 seeded with `seed` on substream `stream_id`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseModel {
    pub sigma: f64,
    pub seed: u64,
    #[serde(default)]
    pub stream_id: u64,
}

pub fn gaussian_noise(n: usize, model: &NoiseModel) -> Result<Vec<f64>> {
    if !(model.sigma.is_finite() && model.sigma >= 0.0) {
        return Err(Error::invalid(format!("sigma must be finite and nonnegative, got {}", model.sigma)));
    }
    let mut rng = ChaCha20Rng::seed_from_u64(model.seed);
    rng.set_stream(model.stream_id);
    Ok((0..n)
        .map(|_| {
            let e: f64 = rng.sample(StandardNormal);
            model.sigma * e
        })
        .collect())
}
