//! Brute-force oracles shared by the integration suites. Everything here
//! re-derives expectations from first principles (pixel marking, interval
//! unions) so the library's own arithmetic is never trusted twice.
#![allow(dead_code)] // each test binary uses its own subset

use rand::Rng;
use tileweave::geometry::{rect_overlap, PlanConfig, Rect, RoundPlan};

/// Mark every pixel of every window in a boolean grid over `region` and
/// assert the grid is fully covered. O(region area); use for single plans.
pub fn assert_pixel_cover(region: &Rect, windows: &[Rect]) {
    let (w, h) = (region.w as usize, region.h as usize);
    let mut hit = vec![false; w * h];
    for win in windows {
        assert!(
            region.contains_rect(win),
            "window {win:?} escapes region {region:?}"
        );
        for i in (win.y - region.y)..(win.bottom() - region.y) {
            let row = i as usize * w;
            let lo = (win.x - region.x) as usize;
            let hi = (win.right() - region.x) as usize;
            hit[row + lo..row + hi].fill(true);
        }
    }
    let misses = hit.iter().filter(|&&v| !v).count();
    assert_eq!(misses, 0, "{misses} uncovered pixels in {region:?}");
}

/// Exact coverage check via per-row interval unions. O(height · windows);
/// cheap enough for thousands of random plans.
pub fn assert_row_cover(region: &Rect, windows: &[Rect]) {
    for win in windows {
        assert!(
            region.contains_rect(win),
            "window {win:?} escapes region {region:?}"
        );
    }
    let mut spans: Vec<(i64, i64)> = Vec::new();
    for y in region.y..region.bottom() {
        spans.clear();
        spans.extend(
            windows
                .iter()
                .filter(|r| r.y <= y && y < r.bottom())
                .map(|r| (r.x, r.right())),
        );
        spans.sort_unstable();
        let mut reach = region.x;
        for &(lo, hi) in &spans {
            assert!(lo <= reach, "gap before x={lo} on row {y} of {region:?}");
            reach = reach.max(hi);
        }
        assert!(
            reach >= region.right(),
            "row {y} covered only to x={reach} of {region:?}"
        );
    }
}

/// Every horizontally/vertically adjacent pair of windows must overlap by
/// at least `min_overlap` on the shared axis.
pub fn assert_adjacent_overlaps(windows: &[Rect], min_overlap: i64) {
    // Rows: same y, consecutive in x.
    let mut rows: Vec<&Rect> = windows.iter().collect();
    rows.sort_unstable_by_key(|r| (r.y, r.x));
    for pair in rows.windows(2) {
        let (a, b) = (pair[0], pair[1]);
        if a.y == b.y {
            assert!(b.x > a.x, "duplicate or unsorted windows {a:?} {b:?}");
            let ov = a.right() - b.x;
            assert!(
                ov >= min_overlap,
                "row neighbours {a:?} {b:?} overlap {ov} < {min_overlap}"
            );
        }
    }
    // Columns: same x, consecutive in y.
    let mut cols: Vec<&Rect> = windows.iter().collect();
    cols.sort_unstable_by_key(|r| (r.x, r.y));
    for pair in cols.windows(2) {
        let (a, b) = (pair[0], pair[1]);
        if a.x == b.x {
            assert!(b.y > a.y, "duplicate or unsorted windows {a:?} {b:?}");
            let ov = a.bottom() - b.y;
            assert!(
                ov >= min_overlap,
                "column neighbours {a:?} {b:?} overlap {ov} < {min_overlap}"
            );
        }
    }
}

/// Every window must overlap its round's anchor by >= min_overlap on both
/// axes, so each denoised tile is pinned to known content.
pub fn assert_anchor_overlaps(plan: &RoundPlan) {
    for (i, round) in plan.rounds.iter().enumerate() {
        for win in &round.windows {
            let (ow, oh) = rect_overlap(win, &round.anchor);
            assert!(
                ow >= plan.min_overlap && oh >= plan.min_overlap,
                "round {i} window {win:?} overlaps anchor {:?} by only ({ow},{oh})",
                round.anchor
            );
        }
    }
}

/// Rounds terminate within ceil(max_margin / stride), anchors strictly
/// grow, and the final reach is the whole canvas.
pub fn assert_round_bounds(cfg: &PlanConfig, plan: &RoundPlan) {
    let stride = cfg.window - cfg.min_overlap;
    let margins = [
        cfg.source.x - cfg.canvas.x,
        cfg.source.y - cfg.canvas.y,
        cfg.canvas.right() - cfg.source.right(),
        cfg.canvas.bottom() - cfg.source.bottom(),
    ];
    let max_margin = margins.into_iter().max().unwrap();
    let bound = (max_margin + stride - 1) / stride;
    assert!(
        plan.rounds.len() as i64 <= bound,
        "{} rounds exceed the bound {bound} (margin {max_margin}, stride {stride})",
        plan.rounds.len()
    );
    for (i, round) in plan.rounds.iter().enumerate() {
        let reach = plan.reach_after(i);
        assert!(
            reach.contains_rect(&round.anchor) && reach.area() > round.anchor.area(),
            "round {i} reach {reach:?} does not grow anchor {:?}",
            round.anchor
        );
        if i + 1 < plan.rounds.len() {
            assert_eq!(plan.rounds[i + 1].anchor, reach);
        }
    }
    if let Some(last) = plan.rounds.len().checked_sub(1) {
        assert_eq!(plan.reach_after(last), cfg.canvas);
    } else {
        assert_eq!(cfg.source, cfg.canvas);
    }
}

/// A valid random plan config with bounded area so oracle checks stay fast.
/// Strides are kept >= 64 to bound the round count.
pub fn random_config<R: Rng>(rng: &mut R) -> PlanConfig {
    let min_overlap = rng.random_range(1..=128);
    let window = min_overlap + rng.random_range(64..=400);
    let sw = rng.random_range(min_overlap..=min_overlap + 500);
    let sh = rng.random_range(min_overlap..=min_overlap + 500);
    let extra_w = rng.random_range(0..=900);
    let extra_h = rng.random_range(0..=900);
    let cfg = PlanConfig {
        canvas: Rect::new(0, 0, sw + extra_w, sh + extra_h),
        source: Rect::new(
            rng.random_range(0..=extra_w),
            rng.random_range(0..=extra_h),
            sw,
            sh,
        ),
        window,
        min_overlap,
    };
    cfg.validate().expect("generator must emit valid configs");
    cfg
}
