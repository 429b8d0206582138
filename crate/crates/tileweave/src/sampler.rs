//! Training-phase anchor/target window sampling.
//!
//! Each draw produces an anchor rect with uniformly random side lengths and
//! a fixed-size target rect, positioned uniformly among all placements that
//! keep both rects inside the video extent and overlapping each other by at
//! least the minimum overlap on both axes.

use rand::Rng;

use crate::error::{Error, Result};
use crate::geometry::Rect;

/// Sampling constants, in pixels.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SamplerConfig {
    pub anchor_min: i64,
    pub anchor_max: i64,
    pub target_side: i64,
    pub min_overlap: i64,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        SamplerConfig { anchor_min: 512, anchor_max: 1536, target_side: 512, min_overlap: 128 }
    }
}

impl SamplerConfig {
    pub fn validate(&self) -> Result<()> {
        if self.anchor_min <= 0 || self.anchor_min > self.anchor_max {
            return Err(Error::InvalidConfig(format!(
                "need 0 < anchor_min <= anchor_max, got {}..{}",
                self.anchor_min, self.anchor_max
            )));
        }
        if self.min_overlap <= 0 || self.min_overlap >= self.target_side {
            return Err(Error::InvalidConfig(format!(
                "need 0 < min_overlap < target_side, got overlap {} target {}",
                self.min_overlap, self.target_side
            )));
        }
        if self.anchor_min < self.min_overlap {
            return Err(Error::InvalidConfig(format!(
                "anchor_min {} must be at least min_overlap {}",
                self.anchor_min, self.min_overlap
            )));
        }
        Ok(())
    }
}

/// One anchor/target draw. `anchor_clamped` records that the requested
/// anchor side exceeded the extent and was clamped to fit.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SampledWindows {
    pub anchor: Rect,
    pub target: Rect,
    pub anchor_clamped: bool,
}

/// Draw an anchor and a target window inside `extent`.
///
/// Anchor sides are drawn independently and uniformly from
/// `[anchor_min, anchor_max]`, clamped to the extent. The anchor position
/// is uniform over in-extent placements; the target position is uniform
/// over in-extent placements overlapping the anchor by at least
/// `min_overlap` on both axes. Draw order is fixed (anchor height, width,
/// y, x, then target y, x) so a seeded rng reproduces the same sequence.
pub fn sample_training_windows<R: Rng>(
    extent: &Rect,
    cfg: &SamplerConfig,
    rng: &mut R,
) -> Result<SampledWindows> {
    cfg.validate()?;
    if extent.w < cfg.target_side || extent.h < cfg.target_side {
        return Err(Error::InvalidInput(format!(
            "extent {}x{} cannot host a {}px target window",
            extent.w, extent.h, cfg.target_side
        )));
    }

    let ah_raw = rng.random_range(cfg.anchor_min..=cfg.anchor_max);
    let aw_raw = rng.random_range(cfg.anchor_min..=cfg.anchor_max);
    let ah = ah_raw.min(extent.h);
    let aw = aw_raw.min(extent.w);
    let anchor_clamped = ah != ah_raw || aw != aw_raw;

    let ay = rng.random_range(extent.y..=extent.bottom() - ah);
    let ax = rng.random_range(extent.x..=extent.right() - aw);

    // Valid target start positions per axis: inside the extent and
    // overlapping the anchor span by at least min_overlap.
    let t = cfg.target_side;
    let ty_lo = (ay + cfg.min_overlap - t).max(extent.y);
    let ty_hi = (ay + ah - cfg.min_overlap).min(extent.bottom() - t);
    let tx_lo = (ax + cfg.min_overlap - t).max(extent.x);
    let tx_hi = (ax + aw - cfg.min_overlap).min(extent.right() - t);
    debug_assert!(ty_lo <= ty_hi && tx_lo <= tx_hi);
    let ty = rng.random_range(ty_lo..=ty_hi);
    let tx = rng.random_range(tx_lo..=tx_hi);

    Ok(SampledWindows {
        anchor: Rect::new(ax, ay, aw, ah),
        target: Rect::new(tx, ty, t, t),
        anchor_clamped,
    })
}
