//! Sinusoidal scalar encodings and the relative-region embedding that tells
//! the denoiser where its window sits relative to the known anchor region.

use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::geometry::Rect;

/// Sinusoidal embedding width per scalar.
pub const DEFAULT_D_SIN: usize = 64;
/// Token width shared by layout tokens and the projected region token.
pub const DEFAULT_D_TOKEN: usize = 768;
/// Seed for the default random projection; fixed so runs are reproducible
/// without a trained projection on hand.
pub const DEFAULT_PROJECTION_SEED: u64 = 0x7265_6769_6f6e;

/// Geometry of a target window relative to an anchor region: both sizes in
/// pixels plus the center-to-center offset (target minus anchor). Offsets
/// are half-integral when a side length is even, so they are kept as reals.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RelativeRegion {
    pub h_anchor: i64,
    pub w_anchor: i64,
    pub h_target: i64,
    pub w_target: i64,
    pub h_offset: f64,
    pub w_offset: f64,
}

/// Describe `target`'s size and position relative to `anchor`.
pub fn relative_region(anchor: &Rect, target: &Rect) -> RelativeRegion {
    let (ax, ay) = anchor.center();
    let (tx, ty) = target.center();
    RelativeRegion {
        h_anchor: anchor.h,
        w_anchor: anchor.w,
        h_target: target.h,
        w_target: target.w,
        h_offset: ty - ay,
        w_offset: tx - ax,
    }
}

/// `out[2i] = sin(v / 10000^(2i/d))`, `out[2i+1] = cos(v / 10000^(2i/d))`.
pub fn sinusoidal_embed(v: f64, d: usize) -> Result<Vec<f64>> {
    if d < 2 || d % 2 != 0 {
        return Err(Error::InvalidConfig(format!(
            "embedding width must be even and >= 2, got {d}"
        )));
    }
    let mut out = Vec::with_capacity(d);
    for i in 0..d / 2 {
        let scaled = v / 10000f64.powf(2.0 * i as f64 / d as f64);
        out.push(scaled.sin());
        out.push(scaled.cos());
    }
    Ok(out)
}

/// Dense row-major linear map used as the embedding projection.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearMap {
    rows: usize,
    cols: usize,
    weights: Vec<f64>,
}

impl LinearMap {
    pub fn new(rows: usize, cols: usize, weights: Vec<f64>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::InvalidConfig(format!(
                "projection dimensions must be positive, got {rows}x{cols}"
            )));
        }
        if weights.len() != rows * cols {
            return Err(Error::Shape(format!(
                "projection needs {} weights, got {}",
                rows * cols,
                weights.len()
            )));
        }
        if weights.iter().any(|w| !w.is_finite()) {
            return Err(Error::Numeric("projection weights must be finite".into()));
        }
        Ok(LinearMap { rows, cols, weights })
    }

    pub fn identity(n: usize) -> Result<Self> {
        let mut weights = vec![0.0; n * n];
        for i in 0..n {
            weights[i * n + i] = 1.0;
        }
        LinearMap::new(n, n, weights)
    }

    pub fn zeros(rows: usize, cols: usize) -> Result<Self> {
        LinearMap::new(rows, cols, vec![0.0; rows * cols])
    }

    /// Gaussian weights scaled by `1/sqrt(cols)`, drawn from a seeded stream
    /// so the same seed always yields the same map.
    pub fn seeded_random(rows: usize, cols: usize, seed: u64) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::InvalidConfig(format!(
                "projection dimensions must be positive, got {rows}x{cols}"
            )));
        }
        let mut rng = ChaCha12Rng::seed_from_u64(seed);
        let scale = 1.0 / (cols as f64).sqrt();
        let weights = (0..rows * cols)
            .map(|_| {
                let z: f64 = StandardNormal.sample(&mut rng);
                z * scale
            })
            .collect();
        LinearMap::new(rows, cols, weights)
    }

    pub const fn rows(&self) -> usize {
        self.rows
    }

    pub const fn cols(&self) -> usize {
        self.cols
    }

    pub fn apply(&self, input: &[f64]) -> Result<Vec<f64>> {
        if input.len() != self.cols {
            return Err(Error::Shape(format!(
                "projection expects {} inputs, got {}",
                self.cols,
                input.len()
            )));
        }
        Ok((0..self.rows)
            .map(|r| {
                self.weights[r * self.cols..(r + 1) * self.cols]
                    .iter()
                    .zip(input)
                    .map(|(w, x)| w * x)
                    .sum()
            })
            .collect())
    }
}

/// Raw concatenated sinusoidal encoding plus the projected token.
#[derive(Debug, Clone, PartialEq)]
pub struct RegionEmbedding {
    /// Six scalar encodings concatenated: anchor height, anchor width,
    /// target height, target width, height offset, width offset.
    pub raw: Vec<f64>,
    /// `proj * raw`; broadcast-added to layout tokens downstream.
    pub token: Vec<f64>,
}

/// Encode a relative region: embed each of the six scalars with
/// [`sinusoidal_embed`] width `d_sin`, concatenate in the fixed order above,
/// and project.
pub fn region_embedding(
    rr: &RelativeRegion,
    d_sin: usize,
    proj: &LinearMap,
) -> Result<RegionEmbedding> {
    let scalars = [
        rr.h_anchor as f64,
        rr.w_anchor as f64,
        rr.h_target as f64,
        rr.w_target as f64,
        rr.h_offset,
        rr.w_offset,
    ];
    let mut raw = Vec::with_capacity(6 * d_sin);
    for v in scalars {
        raw.extend(sinusoidal_embed(v, d_sin)?);
    }
    if proj.cols() != raw.len() {
        return Err(Error::Shape(format!(
            "projection expects {} inputs but raw embedding has {}",
            proj.cols(),
            raw.len()
        )));
    }
    let token = proj.apply(&raw)?;
    Ok(RegionEmbedding { raw, token })
}
