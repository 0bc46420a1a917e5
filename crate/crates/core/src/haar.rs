//! Discrete Haar transforms and the wavelet soft-thresholding estimator used
//! as a baseline against TV denoising on 2D grids.
//!
//! Images are `N x N` with `N` a power of two, flattened column-major
//! (`i1 + N * i2`), the same layout as the grid graphs.
//!
//! 2D coefficients use a fixed order: the mean slot first, then detail
//! coefficients sorted by level `j` (coarse to fine), orientation `e` in
//! `(0,1), (1,0), (1,1)`, and shift `k = (k1, k2)` lexicographically with
//! `k1, k2 in 0..2^j`.

use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// Largest side for which the explicit basis matrix may be assembled.
pub const EXPLICIT_BASIS_MAX_SIDE: usize = 64;

/// Wavelet orientations in canonical order. The first entry acts on `i1`.
pub const ORIENTATIONS: [(u8, u8); 3] = [(0, 1), (1, 0), (1, 1)];

fn check_dyadic(n: usize) -> Result<u32> {
    if n == 0 || !n.is_power_of_two() {
        return Err(Error::invalid(format!("length {n} is not a power of two")));
    }
    Ok(n.trailing_zeros())
}

/// Orthonormal 1D Haar transform. Output: the scaling coefficient, then
/// details from the coarsest level to the finest, each level by shift.
pub fn haar_transform_1d(x: &[f64]) -> Result<Vec<f64>> {
    let levels = check_dyadic(x.len())?;
    let mut out = vec![0.0; x.len()];
    let mut approx = x.to_vec();
    let r = std::f64::consts::FRAC_1_SQRT_2;
    for level in (0..levels).rev() {
        let half = 1usize << level;
        let mut next = vec![0.0; half];
        for k in 0..half {
            let (a, b) = (approx[2 * k], approx[2 * k + 1]);
            next[k] = (a + b) * r;
            out[half + k] = (a - b) * r;
        }
        approx = next;
    }
    out[0] = approx[0];
    Ok(out)
}

pub fn inverse_1d(c: &[f64]) -> Result<Vec<f64>> {
    let levels = check_dyadic(c.len())?;
    let r = std::f64::consts::FRAC_1_SQRT_2;
    let mut approx = vec![c[0]];
    for level in 0..levels {
        let half = 1usize << level;
        let mut next = vec![0.0; 2 * half];
        for k in 0..half {
            let (s, d) = (approx[k], c[half + k]);
            next[2 * k] = (s + d) * r;
            next[2 * k + 1] = (s - d) * r;
        }
        approx = next;
    }
    Ok(approx)
}

fn side_of(len: usize, side: usize) -> Result<u32> {
    if side.checked_mul(side) != Some(len) {
        return Err(Error::invalid(format!("image of length {len} is not {side} x {side}")));
    }
    check_dyadic(side)
}

/// Slot of a detail coefficient in the canonical order.
fn detail_slot(j: u32, e: usize, k1: usize, k2: usize) -> usize {
    let w = 1usize << j;
    w * w + e * w * w + k1 * w + k2
}

/// Orthonormal 2D Haar transform of a column-major `side x side` image.
pub fn haar_transform_2d(x: &[f64], side: usize) -> Result<Vec<f64>> {
    let levels = side_of(x.len(), side)?;
    let mut out = vec![0.0; x.len()];
    let mut approx = x.to_vec();
    let mut s = side;
    for j in (0..levels).rev() {
        let h = s / 2;
        let mut next = vec![0.0; h * h];
        for b2 in 0..h {
            for b1 in 0..h {
                let a00 = approx[2 * b1 + s * 2 * b2];
                let a10 = approx[2 * b1 + 1 + s * 2 * b2];
                let a01 = approx[2 * b1 + s * (2 * b2 + 1)];
                let a11 = approx[2 * b1 + 1 + s * (2 * b2 + 1)];
                next[b1 + h * b2] = 0.5 * (a00 + a10 + a01 + a11);
                out[detail_slot(j, 0, b1, b2)] = 0.5 * (a00 + a10 - a01 - a11);
                out[detail_slot(j, 1, b1, b2)] = 0.5 * (a00 - a10 + a01 - a11);
                out[detail_slot(j, 2, b1, b2)] = 0.5 * (a00 - a10 - a01 + a11);
            }
        }
        approx = next;
        s = h;
    }
    out[0] = approx[0];
    Ok(out)
}

pub fn inverse_2d(c: &[f64], side: usize) -> Result<Vec<f64>> {
    let levels = side_of(c.len(), side)?;
    let mut approx = vec![c[0]];
    for j in 0..levels {
        let h = 1usize << j;
        let s = 2 * h;
        let mut next = vec![0.0; s * s];
        for b2 in 0..h {
            for b1 in 0..h {
                let ll = approx[b1 + h * b2];
                let v = c[detail_slot(j, 0, b1, b2)];
                let u = c[detail_slot(j, 1, b1, b2)];
                let w = c[detail_slot(j, 2, b1, b2)];
                next[2 * b1 + s * 2 * b2] = 0.5 * (ll + v + u + w);
                next[2 * b1 + 1 + s * 2 * b2] = 0.5 * (ll + v - u - w);
                next[2 * b1 + s * (2 * b2 + 1)] = 0.5 * (ll - v + u - w);
                next[2 * b1 + 1 + s * (2 * b2 + 1)] = 0.5 * (ll - v - u + w);
            }
        }
        approx = next;
    }
    Ok(approx)
}

/// `sign(y) * max(|y| - tau, 0)` entrywise.
pub fn soft_threshold(y: &[f64], tau: f64) -> Vec<f64> {
    y.iter().map(|&v| v.signum() * (v.abs() - tau).max(0.0)).collect()
}

/// Transform, soft-threshold every coefficient (the mean slot included) at
/// `sigma * sqrt(2 log n)` with `n = side^2`, and invert.
pub fn haar_denoise_2d(y: &[f64], side: usize, sigma: f64) -> Result<Vec<f64>> {
    if !(sigma.is_finite() && sigma >= 0.0) {
        return Err(Error::invalid(format!("sigma must be finite and nonnegative, got {sigma}")));
    }
    let c = haar_transform_2d(y, side)?;
    let n = (side * side) as f64;
    let tau = sigma * (2.0 * n.ln()).sqrt();
    inverse_2d(&soft_threshold(&c, tau), side)
}

/// Identity of one basis vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HaarIndex {
    Mean,
    Detail { level: u32, orientation: (u8, u8), shift: (usize, usize) },
}

/// The sampled and renormalized 2D Haar basis in canonical order.
#[derive(Debug, Clone)]
pub struct HaarBasis2D {
    side: usize,
    levels: u32,
}

impl HaarBasis2D {
    pub fn new(side: usize) -> Result<Self> {
        let levels = check_dyadic(side)?;
        Ok(Self { side, levels })
    }

    pub fn side(&self) -> usize {
        self.side
    }

    pub fn len(&self) -> usize {
        self.side * self.side
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn index(&self, slot: usize) -> HaarIndex {
        assert!(slot < self.len(), "slot out of range");
        if slot == 0 {
            return HaarIndex::Mean;
        }
        let j = (slot.ilog2() / 2).min(self.levels - 1);
        let w = 1usize << j;
        let rest = slot - w * w;
        let e = rest / (w * w);
        let k = rest % (w * w);
        HaarIndex::Detail { level: j, orientation: ORIENTATIONS[e], shift: (k / w, k % w) }
    }

    /// Samples `x -> H(x)` at `((i1 - 1)/N, (i2 - 1)/N)` for the basis
    /// function in `slot`, then divides by the Euclidean norm.
    pub fn vector(&self, slot: usize) -> Vec<f64> {
        let n = self.side;
        let grid = |i: usize| i as f64 / n as f64;
        let mut v = vec![0.0; n * n];
        match self.index(slot) {
            HaarIndex::Mean => v.iter_mut().for_each(|t| *t = 1.0),
            HaarIndex::Detail { level, orientation, shift } => {
                let scale = (1u64 << level) as f64;
                for i2 in 0..n {
                    for i1 in 0..n {
                        let u = scale * grid(i1) - shift.0 as f64;
                        let w = scale * grid(i2) - shift.1 as f64;
                        v[i1 + n * i2] = scale * haar_1d(orientation.0, u) * haar_1d(orientation.1, w);
                    }
                }
            }
        }
        let norm = v.iter().map(|t| t * t).sum::<f64>().sqrt();
        v.iter_mut().for_each(|t| *t /= norm);
        v
    }

    /// The basis matrix with columns in canonical order.
    pub fn matrix(&self) -> Result<DMatrix<f64>> {
        if self.side > EXPLICIT_BASIS_MAX_SIDE {
            return Err(Error::SizeLimit(format!(
                "explicit Haar basis limited to side {EXPLICIT_BASIS_MAX_SIDE}, got {}",
                self.side
            )));
        }
        let n = self.len();
        let mut o = DMatrix::zeros(n, n);
        for slot in 0..n {
            o.set_column(slot, &nalgebra::DVector::from_vec(self.vector(slot)));
        }
        Ok(o)
    }
}

/// Father (`e = 0`) or mother (`e = 1`) Haar function on the line.
fn haar_1d(e: u8, t: f64) -> f64 {
    if !(0.0..1.0).contains(&t) {
        return 0.0;
    }
    if e == 0 || t < 0.5 {
        1.0
    } else {
        -1.0
    }
}
