//! Gaussian window weights and the seam-free weighted merge.
//!
//! Every denoising step produces one latent volume per window; overlapping
//! cells are averaged with center-peaked Gaussian weights so seams fade out
//! smoothly. The reduction runs in ascending window-index order with `f64`
//! accumulators, which makes the merged canvas bit-identical regardless of
//! how the per-window work was scheduled.

use crate::error::{Error, Result};
use crate::geometry::Rect;
use crate::volume::{LatentVolume, VolumeShape};

/// Smallest admissible weight; keeps denominators strictly positive at far
/// corners of large windows.
pub const WEIGHT_FLOOR: f64 = 1e-8;

/// Center-peaked 2-D weight grid for one window size.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightMask {
    height: usize,
    width: usize,
    values: Vec<f64>,
}

impl WeightMask {
    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    #[inline]
    pub fn at(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.width + j]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }
}

/// Isotropic Gaussian centered on the window midpoint:
/// `w(i,j) = max(exp(-((i-ci)^2 + (j-cj)^2) / (2 sigma^2)), WEIGHT_FLOOR)`
/// with `ci = (h-1)/2`, `cj = (w-1)/2`.
pub fn gaussian_weights(h: usize, w: usize, sigma: f64) -> Result<WeightMask> {
    if h == 0 || w == 0 {
        return Err(Error::InvalidInput(format!(
            "weight mask sides must be positive, got {h}x{w}"
        )));
    }
    if !(sigma > 0.0) || !sigma.is_finite() {
        return Err(Error::InvalidConfig(format!(
            "gaussian sigma must be positive and finite, got {sigma}"
        )));
    }
    let ci = (h as f64 - 1.0) / 2.0;
    let cj = (w as f64 - 1.0) / 2.0;
    let inv_two_sigma_sq = 1.0 / (2.0 * sigma * sigma);
    let mut values = Vec::with_capacity(h * w);
    for i in 0..h {
        let di = i as f64 - ci;
        for j in 0..w {
            let dj = j as f64 - cj;
            let weight = (-(di * di + dj * dj) * inv_two_sigma_sq).exp();
            values.push(weight.max(WEIGHT_FLOOR));
        }
    }
    Ok(WeightMask { height: h, width: w, values })
}

/// Weighted average of overlapping window volumes onto a canvas:
/// `out(p) = sum_k w_k(p) x_k(p) / sum_k w_k(p)`.
///
/// Rects are in latent-cell coordinates relative to the canvas origin. All
/// window volumes must match the mask extent and the canvas frame/channel
/// counts, and together the windows must cover every canvas cell.
/// Accumulation order is the given window order, so results are bitwise
/// reproducible.
pub fn merge_windows(
    canvas_shape: VolumeShape,
    windows: &[(Rect, LatentVolume)],
    weights: &WeightMask,
) -> Result<LatentVolume> {
    canvas_shape.validate()?;
    let (frames, channels) = (canvas_shape.frames, canvas_shape.channels);
    let (canvas_h, canvas_w) = (canvas_shape.height, canvas_shape.width);
    if windows.is_empty() {
        return Err(Error::IncompleteCover("no windows to merge".into()));
    }
    for (k, (rect, vol)) in windows.iter().enumerate() {
        if rect.x < 0
            || rect.y < 0
            || rect.right() > canvas_w as i64
            || rect.bottom() > canvas_h as i64
        {
            return Err(Error::Shape(format!(
                "window {k} rect {rect:?} exceeds {canvas_w}x{canvas_h} canvas"
            )));
        }
        let expect = VolumeShape::new(frames, channels, rect.h as usize, rect.w as usize);
        if vol.shape() != expect {
            return Err(Error::Shape(format!(
                "window {k} volume shape {:?} does not match rect {:?}",
                vol.shape(),
                rect
            )));
        }
        if rect.h as usize != weights.height || rect.w as usize != weights.width {
            return Err(Error::Shape(format!(
                "window {k} rect {rect:?} does not match {}x{} weight mask",
                weights.height, weights.width
            )));
        }
    }

    // Weight denominators are shared by all (frame, channel) planes.
    let mut den = vec![0.0f64; canvas_h * canvas_w];
    for (rect, _) in windows {
        let (rx, ry) = (rect.x as usize, rect.y as usize);
        for i in 0..weights.height {
            let row = (ry + i) * canvas_w + rx;
            let mask_row = &weights.values[i * weights.width..(i + 1) * weights.width];
            for (cell, &w) in den[row..row + weights.width].iter_mut().zip(mask_row) {
                *cell += w;
            }
        }
    }
    if let Some(idx) = den.iter().position(|&d| d == 0.0) {
        return Err(Error::IncompleteCover(format!(
            "cell ({}, {}) is covered by no window",
            idx % canvas_w,
            idx / canvas_w
        )));
    }

    let mut out = LatentVolume::zeros(canvas_shape)?;
    let mut num = vec![0.0f64; canvas_h * canvas_w];
    for f in 0..frames {
        for c in 0..channels {
            num.fill(0.0);
            for (rect, vol) in windows {
                let (rx, ry) = (rect.x as usize, rect.y as usize);
                let plane = vol.plane(f, c);
                for i in 0..weights.height {
                    let row = (ry + i) * canvas_w + rx;
                    let mask_row = &weights.values[i * weights.width..(i + 1) * weights.width];
                    let src_row = &plane[i * weights.width..(i + 1) * weights.width];
                    for ((cell, &w), &v) in
                        num[row..row + weights.width].iter_mut().zip(mask_row).zip(src_row)
                    {
                        *cell += w * v as f64;
                    }
                }
            }
            let out_plane = out.plane_mut(f, c);
            for ((o, &n), &d) in out_plane.iter_mut().zip(&num).zip(&den) {
                *o = (n / d) as f32;
            }
        }
    }
    Ok(out)
}
