//! Per-window denoiser inputs: the 9-channel latent input and the
//! conditioning token bundle.
//!
//! The latent input concatenates, channel-wise: the noisy window content
//! (4 channels), the masked known content (4 channels, zero where unknown),
//! and a binary mask (1 channel, one where content must be generated). The
//! token bundle carries layout tokens pooled from the anchor region with the
//! relative-region token added, plus opaque text tokens.

use sha2::{Digest, Sha256};

use crate::embedding::LinearMap;
use crate::error::{Error, Result};
use crate::geometry::Rect;
use crate::volume::{LatentVolume, VolumeShape};

/// Channel count of the content latents.
pub const CONTENT_CHANNELS: usize = 4;
/// Content + masked content + mask.
pub const MODEL_INPUT_CHANNELS: usize = 9;
/// Default layout-token grid side (8x8 = 64 tokens).
pub const DEFAULT_LAYOUT_GRID: usize = 8;

/// Canvas-sized binary grid marking which latent cells hold known content.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MaskGrid {
    height: usize,
    width: usize,
    known: Vec<bool>,
}

impl MaskGrid {
    /// All-unknown grid.
    pub fn unknown(height: usize, width: usize) -> Result<Self> {
        if height == 0 || width == 0 {
            return Err(Error::InvalidInput(format!(
                "mask grid sides must be positive, got {height}x{width}"
            )));
        }
        Ok(MaskGrid { height, width, known: vec![false; height * width] })
    }

    /// Mark every cell under `rect` (latent coordinates) as known.
    pub fn mark_known(&mut self, rect: &Rect) -> Result<()> {
        if rect.x < 0
            || rect.y < 0
            || rect.right() > self.width as i64
            || rect.bottom() > self.height as i64
        {
            return Err(Error::Shape(format!(
                "rect {:?} out of bounds for {}x{} mask grid",
                rect, self.width, self.height
            )));
        }
        for i in rect.y as usize..rect.bottom() as usize {
            let row = i * self.width;
            self.known[row + rect.x as usize..row + rect.right() as usize].fill(true);
        }
        Ok(())
    }

    pub fn from_known_rect(height: usize, width: usize, known: &Rect) -> Result<Self> {
        let mut grid = MaskGrid::unknown(height, width)?;
        grid.mark_known(known)?;
        Ok(grid)
    }

    pub const fn height(&self) -> usize {
        self.height
    }

    pub const fn width(&self) -> usize {
        self.width
    }

    #[inline]
    pub fn is_known(&self, i: usize, j: usize) -> bool {
        self.known[i * self.width + j]
    }
}

/// The 9-channel denoiser input for one window.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelInput {
    /// Noisy window content, 4 channels.
    pub noisy: LatentVolume,
    /// Known content with unknown cells zeroed, 4 channels.
    pub masked: LatentVolume,
    /// 1 where content must be generated, 0 where known; 1 channel,
    /// replicated across frames.
    pub mask: LatentVolume,
}

impl ModelInput {
    pub fn channel_count(&self) -> usize {
        self.noisy.shape().channels + self.masked.shape().channels + self.mask.shape().channels
    }
}

/// Slice `window` (latent coordinates) out of the noisy canvas and derive
/// the masked-content and mask channels from the known grid.
pub fn assemble_model_input(
    window: &Rect,
    canvas_latent: &LatentVolume,
    known: &MaskGrid,
) -> Result<ModelInput> {
    let canvas_shape = canvas_latent.shape();
    if canvas_shape.channels != CONTENT_CHANNELS {
        return Err(Error::Shape(format!(
            "canvas latent must have {} channels, got {}",
            CONTENT_CHANNELS, canvas_shape.channels
        )));
    }
    if known.height() != canvas_shape.height || known.width() != canvas_shape.width {
        return Err(Error::Shape(format!(
            "known grid is {}x{} but canvas latent is {}x{}",
            known.width(),
            known.height(),
            canvas_shape.width,
            canvas_shape.height
        )));
    }
    let noisy = canvas_latent.slice_rect(window)?;
    let (wx, wy) = (window.x as usize, window.y as usize);
    let (wh, ww) = (window.h as usize, window.w as usize);
    let frames = canvas_shape.frames;

    let mut mask_plane = vec![0.0f32; wh * ww];
    for i in 0..wh {
        for j in 0..ww {
            if !known.is_known(wy + i, wx + j) {
                mask_plane[i * ww + j] = 1.0;
            }
        }
    }

    let mut masked = noisy.clone();
    for f in 0..frames {
        for c in 0..CONTENT_CHANNELS {
            let plane = masked.plane_mut(f, c);
            // Branchless: the mask is exactly 0 or 1, so this zeroes
            // unknown cells and keeps known ones bit-identical.
            for (v, &m) in plane.iter_mut().zip(&mask_plane) {
                *v *= 1.0 - m;
            }
        }
    }

    let mut mask = LatentVolume::zeros(VolumeShape::new(frames, 1, wh, ww))?;
    for f in 0..frames {
        mask.plane_mut(f, 0).copy_from_slice(&mask_plane);
    }

    Ok(ModelInput { noisy, masked, mask })
}

/// Fixed-width token sequence stored flat; `values.len() == count * dim`.
#[derive(Debug, Clone, PartialEq)]
pub struct TokenSeq {
    dim: usize,
    values: Vec<f64>,
}

impl TokenSeq {
    pub fn new(dim: usize, values: Vec<f64>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidConfig("token dimension must be positive".into()));
        }
        if values.len() % dim != 0 {
            return Err(Error::Shape(format!(
                "{} values do not tile tokens of dimension {dim}",
                values.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numeric("token values must be finite".into()));
        }
        Ok(TokenSeq { dim, values })
    }

    pub fn empty(dim: usize) -> Result<Self> {
        TokenSeq::new(dim, Vec::new())
    }

    pub const fn dim(&self) -> usize {
        self.dim
    }

    pub fn count(&self) -> usize {
        self.values.len() / self.dim
    }

    pub fn token(&self, i: usize) -> &[f64] {
        &self.values[i * self.dim..(i + 1) * self.dim]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }
}

/// Pool the anchor content over a `gh x gw` spatial grid (averaging over
/// frames and each cell's spatial bin, per channel) and lift each pooled
/// cell vector to token width with `lift`. Bins follow the adaptive rule
/// `start = floor(i*h/g)`, `end = ceil((i+1)*h/g)`, so every cell covers at
/// least one row/column and the union covers the plane. Tokens come out in
/// row-major cell order.
pub fn layout_tokens(
    anchor: &LatentVolume,
    grid: (usize, usize),
    lift: &LinearMap,
) -> Result<TokenSeq> {
    let (gh, gw) = grid;
    if gh == 0 || gw == 0 {
        return Err(Error::InvalidInput(format!(
            "layout grid must be positive, got {gh}x{gw}"
        )));
    }
    let shape = anchor.shape();
    if lift.cols() != shape.channels {
        return Err(Error::Shape(format!(
            "lift map expects {} inputs but anchor has {} channels",
            lift.cols(),
            shape.channels
        )));
    }
    let mut values = Vec::with_capacity(gh * gw * lift.rows());
    let mut pooled = vec![0.0f64; shape.channels];
    for gi in 0..gh {
        let i0 = gi * shape.height / gh;
        let i1 = ((gi + 1) * shape.height).div_ceil(gh);
        for gj in 0..gw {
            let j0 = gj * shape.width / gw;
            let j1 = ((gj + 1) * shape.width).div_ceil(gw);
            let cell_count = (shape.frames * (i1 - i0) * (j1 - j0)) as f64;
            for (c, slot) in pooled.iter_mut().enumerate() {
                let mut sum = 0.0f64;
                for f in 0..shape.frames {
                    let plane = anchor.plane(f, c);
                    for i in i0..i1 {
                        for &v in &plane[i * shape.width + j0..i * shape.width + j1] {
                            sum += v as f64;
                        }
                    }
                }
                *slot = sum / cell_count;
            }
            values.extend(lift.apply(&pooled)?);
        }
    }
    TokenSeq::new(lift.rows(), values)
}

/// Layout tokens with the region token added, plus pass-through text tokens.
#[derive(Debug, Clone, PartialEq)]
pub struct ConditioningBundle {
    /// Layout tokens after the element-wise region-token addition.
    pub tokens: TokenSeq,
    /// The region token that was added (kept for inspection).
    pub region_token: Vec<f64>,
    /// Opaque text tokens, possibly empty.
    pub text: TokenSeq,
}

impl ConditioningBundle {
    pub fn d_token(&self) -> usize {
        self.tokens.dim()
    }

    /// Content digest: stable across identical bundles, used by procedural
    /// denoisers to mix conditioning into their outputs.
    pub fn digest(&self) -> [u8; 32] {
        let mut hasher = Sha256::new();
        let mut feed = |seq: &[f64]| {
            for v in seq {
                hasher.update(v.to_le_bytes());
            }
        };
        feed(&[self.tokens.dim() as f64, self.tokens.count() as f64]);
        feed(self.tokens.values());
        feed(&[self.region_token.len() as f64]);
        feed(&self.region_token);
        feed(&[self.text.dim() as f64, self.text.count() as f64]);
        feed(self.text.values());
        hasher.finalize().into()
    }
}

/// Add `region_token` to every layout token; text tokens pass through.
pub fn build_bundle(
    layout: &TokenSeq,
    region_token: &[f64],
    text: TokenSeq,
) -> Result<ConditioningBundle> {
    if region_token.len() != layout.dim() {
        return Err(Error::Shape(format!(
            "region token has dimension {} but layout tokens have {}",
            region_token.len(),
            layout.dim()
        )));
    }
    if text.count() > 0 && text.dim() != layout.dim() {
        return Err(Error::Shape(format!(
            "text tokens have dimension {} but layout tokens have {}",
            text.dim(),
            layout.dim()
        )));
    }
    let dim = layout.dim();
    let values: Vec<f64> = layout
        .values()
        .iter()
        .enumerate()
        .map(|(i, v)| v + region_token[i % dim])
        .collect();
    Ok(ConditioningBundle {
        tokens: TokenSeq::new(dim, values)?,
        region_token: region_token.to_vec(),
        text,
    })
}
