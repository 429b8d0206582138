//! Window covers and multi-round growth plans.
//!
//! A round denoises a set of overlapping square windows that together cover
//! the region reachable from the current anchor (the already-known area).
//! Each side of the anchor can grow by at most `window - min_overlap` pixels
//! per round, because every window must overlap the anchor by `min_overlap`
//! on both axes to stay grounded in known content.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Axis-aligned rectangle in integer pixel coordinates.
///
/// `(x, y)` is the top-left corner; `w`/`h` are strictly positive.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Rect {
    pub x: i64,
    pub y: i64,
    pub w: i64,
    pub h: i64,
}

impl Rect {
    pub const fn new(x: i64, y: i64, w: i64, h: i64) -> Self {
        Rect { x, y, w, h }
    }

    /// One past the right edge.
    pub const fn right(&self) -> i64 {
        self.x + self.w
    }

    /// One past the bottom edge.
    pub const fn bottom(&self) -> i64 {
        self.y + self.h
    }

    pub const fn area(&self) -> i64 {
        self.w * self.h
    }

    /// True when `other` lies entirely within `self`.
    pub fn contains_rect(&self, other: &Rect) -> bool {
        other.x >= self.x
            && other.y >= self.y
            && other.right() <= self.right()
            && other.bottom() <= self.bottom()
    }

    /// True when the pixel at `(px, py)` lies inside the rectangle.
    pub fn contains_point(&self, px: i64, py: i64) -> bool {
        px >= self.x && px < self.right() && py >= self.y && py < self.bottom()
    }

    /// Center in pixel-index coordinates: the midpoint of first and last
    /// pixel index, half-integral for even side lengths.
    pub fn center(&self) -> (f64, f64) {
        (
            self.x as f64 + (self.w as f64 - 1.0) / 2.0,
            self.y as f64 + (self.h as f64 - 1.0) / 2.0,
        )
    }

    /// Intersection rectangle, or `None` when disjoint (zero-area overlap
    /// counts as disjoint).
    pub fn intersect(&self, other: &Rect) -> Option<Rect> {
        let x = self.x.max(other.x);
        let y = self.y.max(other.y);
        let r = self.right().min(other.right());
        let b = self.bottom().min(other.bottom());
        if r > x && b > y {
            Some(Rect::new(x, y, r - x, b - y))
        } else {
            None
        }
    }
}

/// Overlap extent of two rectangles per axis, clamped to zero when disjoint
/// on that axis. Symmetric in its arguments.
pub fn rect_overlap(a: &Rect, b: &Rect) -> (i64, i64) {
    let ow = (a.right().min(b.right()) - a.x.max(b.x)).max(0);
    let oh = (a.bottom().min(b.bottom()) - a.y.max(b.y)).max(0);
    (ow, oh)
}

/// Inputs for a full multi-round plan.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PlanConfig {
    /// Full output extent; must sit at the origin.
    pub canvas: Rect,
    /// Known region to grow from; must lie inside the canvas.
    pub source: Rect,
    /// Square window side in pixels.
    pub window: i64,
    /// Minimum overlap between adjacent windows and between every window
    /// and the round's anchor, in pixels.
    pub min_overlap: i64,
}

impl PlanConfig {
    /// Maximum distance a window may extend past the anchor per side.
    pub const fn stride(&self) -> i64 {
        self.window - self.min_overlap
    }

    pub fn validate(&self) -> Result<()> {
        if self.canvas.x != 0 || self.canvas.y != 0 {
            return Err(Error::InvalidConfig(format!(
                "canvas must sit at the origin, got ({}, {})",
                self.canvas.x, self.canvas.y
            )));
        }
        if self.canvas.w <= 0 || self.canvas.h <= 0 {
            return Err(Error::InvalidConfig(format!(
                "canvas sides must be positive, got {}x{}",
                self.canvas.w, self.canvas.h
            )));
        }
        if self.source.w <= 0 || self.source.h <= 0 {
            return Err(Error::InvalidConfig(format!(
                "source sides must be positive, got {}x{}",
                self.source.w, self.source.h
            )));
        }
        if !self.canvas.contains_rect(&self.source) {
            return Err(Error::InvalidConfig(format!(
                "source {:?} not inside canvas {:?}",
                self.source, self.canvas
            )));
        }
        if self.min_overlap <= 0 || self.min_overlap >= self.window {
            return Err(Error::InvalidConfig(format!(
                "need 0 < min_overlap < window, got overlap {} window {}",
                self.min_overlap, self.window
            )));
        }
        // Every first-round window must overlap the source by min_overlap on
        // both axes; a source thinner than min_overlap makes that impossible.
        if self.source.w < self.min_overlap || self.source.h < self.min_overlap {
            return Err(Error::InvalidConfig(format!(
                "source sides ({}x{}) must be at least min_overlap ({})",
                self.source.w, self.source.h, self.min_overlap
            )));
        }
        Ok(())
    }
}

/// One denoising round: the known anchor region plus the window cover that
/// grows it.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Round {
    pub anchor: Rect,
    pub windows: Vec<Rect>,
}

/// Full multi-round plan. Empty `rounds` means the source already fills the
/// canvas.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RoundPlan {
    pub canvas: Rect,
    pub source: Rect,
    pub window: i64,
    pub min_overlap: i64,
    pub rounds: Vec<Round>,
}

impl RoundPlan {
    /// Region covered after round `i` (anchor of round `i + 1`).
    pub fn reach_after(&self, i: usize) -> Rect {
        if i + 1 < self.rounds.len() {
            self.rounds[i + 1].anchor
        } else {
            self.canvas
        }
    }
}

/// Window positions along one axis: start at 0, advance by `stride`, clamp
/// the last position so the final window's far edge meets the extent's far
/// edge. Positions are strictly increasing.
fn axis_positions(extent: i64, window: i64, stride: i64) -> Vec<i64> {
    if extent <= window {
        return vec![0];
    }
    let span = extent - window;
    let count = 1 + (span + stride - 1) / stride;
    (0..count).map(|i| (i * stride).min(span)).collect()
}

/// Cover `region` with `window`-sized squares in row-major order.
///
/// Adjacent windows overlap by at least `min_overlap`; when the region is
/// smaller than the window on an axis, the single window on that axis is
/// clamped to the region extent.
pub fn plan_windows(region: &Rect, window: i64, min_overlap: i64) -> Result<Vec<Rect>> {
    if window <= 0 || min_overlap <= 0 || min_overlap >= window {
        return Err(Error::InvalidConfig(format!(
            "need 0 < min_overlap < window, got overlap {} window {}",
            min_overlap, window
        )));
    }
    if region.w <= 0 || region.h <= 0 {
        return Err(Error::InvalidInput(format!(
            "region sides must be positive, got {}x{}",
            region.w, region.h
        )));
    }
    let stride = window - min_overlap;
    let win_w = window.min(region.w);
    let win_h = window.min(region.h);
    let xs = axis_positions(region.w, window, stride);
    let ys = axis_positions(region.h, window, stride);
    let mut windows = Vec::with_capacity(xs.len() * ys.len());
    for &y in &ys {
        for &x in &xs {
            windows.push(Rect::new(region.x + x, region.y + y, win_w, win_h));
        }
    }
    Ok(windows)
}

/// Grow the source to the canvas round by round.
///
/// Each round covers the largest rectangle reachable from the current
/// anchor — every side extended by `window - min_overlap`, clamped to the
/// canvas — and that reach becomes the next round's anchor. Zero rounds when
/// the source already equals the canvas.
pub fn plan_rounds(cfg: &PlanConfig) -> Result<RoundPlan> {
    cfg.validate()?;
    let stride = cfg.stride();
    let mut rounds = Vec::new();
    let mut anchor = cfg.source;
    while anchor != cfg.canvas {
        let x = (anchor.x - stride).max(cfg.canvas.x);
        let y = (anchor.y - stride).max(cfg.canvas.y);
        let right = (anchor.right() + stride).min(cfg.canvas.right());
        let bottom = (anchor.bottom() + stride).min(cfg.canvas.bottom());
        let reach = Rect::new(x, y, right - x, bottom - y);
        let windows = plan_windows(&reach, cfg.window, cfg.min_overlap)?;
        rounds.push(Round { anchor, windows });
        anchor = reach;
    }
    Ok(RoundPlan {
        canvas: cfg.canvas,
        source: cfg.source,
        window: cfg.window,
        min_overlap: cfg.min_overlap,
        rounds,
    })
}
