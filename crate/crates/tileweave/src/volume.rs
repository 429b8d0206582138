//! 4-D latent value grids: frames × channels × height × width.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::Rect;

/// Dimensions of a [`LatentVolume`], in latent-resolution cells.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct VolumeShape {
    pub frames: usize,
    pub channels: usize,
    pub height: usize,
    pub width: usize,
}

impl VolumeShape {
    pub const fn new(frames: usize, channels: usize, height: usize, width: usize) -> Self {
        VolumeShape { frames, channels, height, width }
    }

    /// Total number of scalar cells.
    pub const fn len(&self) -> usize {
        self.frames * self.channels * self.height * self.width
    }

    pub const fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn validate(&self) -> Result<()> {
        if self.is_empty() {
            return Err(Error::Shape(format!(
                "all dimensions must be positive, got {}x{}x{}x{}",
                self.frames, self.channels, self.height, self.width
            )));
        }
        Ok(())
    }
}

/// Dense 4-D grid of `f32` values laid out frame-major:
/// `index = ((f * C + c) * H + i) * W + j`.
#[derive(Debug, Clone, PartialEq)]
pub struct LatentVolume {
    shape: VolumeShape,
    values: Vec<f32>,
}

impl LatentVolume {
    pub fn zeros(shape: VolumeShape) -> Result<Self> {
        shape.validate()?;
        Ok(LatentVolume { shape, values: vec![0.0; shape.len()] })
    }

    pub fn filled(shape: VolumeShape, value: f32) -> Result<Self> {
        shape.validate()?;
        if !value.is_finite() {
            return Err(Error::Numeric(format!("fill value {value} is not finite")));
        }
        Ok(LatentVolume { shape, values: vec![value; shape.len()] })
    }

    /// Wrap a buffer the caller has already produced from finite inputs,
    /// skipping the finite-scan. Length is still enforced in debug builds.
    pub(crate) fn from_values_unchecked(shape: VolumeShape, values: Vec<f32>) -> Self {
        debug_assert_eq!(values.len(), shape.len());
        LatentVolume { shape, values }
    }

    /// Wrap an existing buffer, rejecting length mismatches and non-finite
    /// values.
    pub fn from_values(shape: VolumeShape, values: Vec<f32>) -> Result<Self> {
        shape.validate()?;
        if values.len() != shape.len() {
            return Err(Error::Shape(format!(
                "buffer holds {} values but shape {:?} needs {}",
                values.len(),
                shape,
                shape.len()
            )));
        }
        let vol = LatentVolume { shape, values };
        vol.assert_finite()?;
        Ok(vol)
    }

    pub fn shape(&self) -> VolumeShape {
        self.shape
    }

    pub fn values(&self) -> &[f32] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f32] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f32> {
        self.values
    }

    #[inline]
    fn offset(&self, f: usize, c: usize, i: usize, j: usize) -> usize {
        debug_assert!(
            f < self.shape.frames
                && c < self.shape.channels
                && i < self.shape.height
                && j < self.shape.width
        );
        ((f * self.shape.channels + c) * self.shape.height + i) * self.shape.width + j
    }

    #[inline]
    pub fn at(&self, f: usize, c: usize, i: usize, j: usize) -> f32 {
        self.values[self.offset(f, c, i, j)]
    }

    #[inline]
    pub fn at_mut(&mut self, f: usize, c: usize, i: usize, j: usize) -> &mut f32 {
        let idx = self.offset(f, c, i, j);
        &mut self.values[idx]
    }

    /// Contiguous height × width plane for one (frame, channel) pair.
    pub fn plane(&self, f: usize, c: usize) -> &[f32] {
        let start = self.offset(f, c, 0, 0);
        let len = self.shape.height * self.shape.width;
        &self.values[start..start + len]
    }

    pub fn plane_mut(&mut self, f: usize, c: usize) -> &mut [f32] {
        let start = self.offset(f, c, 0, 0);
        let len = self.shape.height * self.shape.width;
        &mut self.values[start..start + len]
    }

    /// Extract the sub-volume under `rect` (latent-cell coordinates relative
    /// to this volume's origin), across all frames and channels.
    pub fn slice_rect(&self, rect: &Rect) -> Result<LatentVolume> {
        self.check_rect(rect)?;
        let (rx, ry, rw, rh) = (rect.x as usize, rect.y as usize, rect.w as usize, rect.h as usize);
        let out_shape = VolumeShape::new(self.shape.frames, self.shape.channels, rh, rw);
        let mut out = Vec::with_capacity(out_shape.len());
        for f in 0..self.shape.frames {
            for c in 0..self.shape.channels {
                let plane = self.plane(f, c);
                for i in 0..rh {
                    let row = (ry + i) * self.shape.width + rx;
                    out.extend_from_slice(&plane[row..row + rw]);
                }
            }
        }
        Ok(LatentVolume { shape: out_shape, values: out })
    }

    /// Write `src` into the cells under `rect`. The source shape must match
    /// the rect extent and this volume's frame/channel counts.
    pub fn paste_rect(&mut self, rect: &Rect, src: &LatentVolume) -> Result<()> {
        self.check_rect(rect)?;
        let expect = VolumeShape::new(
            self.shape.frames,
            self.shape.channels,
            rect.h as usize,
            rect.w as usize,
        );
        if src.shape != expect {
            return Err(Error::Shape(format!(
                "paste source shape {:?} does not match target {:?}",
                src.shape, expect
            )));
        }
        let (rx, ry, rw, rh) = (rect.x as usize, rect.y as usize, rect.w as usize, rect.h as usize);
        let width = self.shape.width;
        for f in 0..self.shape.frames {
            for c in 0..self.shape.channels {
                let src_plane = src.plane(f, c);
                let dst_plane = self.plane_mut(f, c);
                for i in 0..rh {
                    let dst_row = (ry + i) * width + rx;
                    dst_plane[dst_row..dst_row + rw]
                        .copy_from_slice(&src_plane[i * rw..(i + 1) * rw]);
                }
            }
        }
        Ok(())
    }

    fn check_rect(&self, rect: &Rect) -> Result<()> {
        if rect.x < 0
            || rect.y < 0
            || rect.w <= 0
            || rect.h <= 0
            || rect.right() > self.shape.width as i64
            || rect.bottom() > self.shape.height as i64
        {
            return Err(Error::Shape(format!(
                "rect {:?} out of bounds for {}x{} volume",
                rect, self.shape.width, self.shape.height
            )));
        }
        Ok(())
    }

    /// Reject NaN/Inf anywhere in the grid.
    pub fn assert_finite(&self) -> Result<()> {
        match self.values.iter().position(|v| !v.is_finite()) {
            None => Ok(()),
            Some(idx) => Err(Error::Numeric(format!(
                "non-finite value {} at flat index {idx}",
                self.values[idx]
            ))),
        }
    }
}
