//! Per-step window dispatch over a worker pool, plus the idealized
//! makespan model for schedule studies.
//!
//! Window tasks within a step are independent pure computations, so they
//! can run on any number of workers in any completion order; the merge
//! reduces their outputs in ascending window-index order behind a barrier,
//! which makes the step result bitwise identical for every worker count.

use std::sync::atomic::{AtomicBool, AtomicUsize, Ordering};
use std::sync::OnceLock;

use crate::blending::{merge_windows, WeightMask};
use crate::conditioning::{assemble_model_input, ConditioningBundle, MaskGrid};
use crate::diffusion::{cfg_combine, ddim_step, Denoiser, DenoiserRequest, NoiseSchedule};
use crate::error::{Error, Result};
use crate::geometry::Rect;
use crate::volume::LatentVolume;

/// Abstract per-window cost and worker count for makespan studies.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CostModel {
    /// Time units one window task takes.
    pub per_window_cost: f64,
    pub workers: usize,
}

impl CostModel {
    pub fn validate(&self) -> Result<()> {
        if !(self.per_window_cost > 0.0) || !self.per_window_cost.is_finite() {
            return Err(Error::InvalidConfig(format!(
                "per-window cost must be positive and finite, got {}",
                self.per_window_cost
            )));
        }
        if self.workers == 0 {
            return Err(Error::InvalidConfig("worker count must be at least 1".into()));
        }
        Ok(())
    }
}

/// Idealized wall time for `tasks` equal-cost independent tasks on
/// `cost.workers` workers: `ceil(tasks / workers) * per_window_cost`.
pub fn makespan(tasks: usize, cost: &CostModel) -> Result<f64> {
    cost.validate()?;
    Ok(tasks.div_ceil(cost.workers) as f64 * cost.per_window_cost)
}

/// Everything one denoising step needs, shared read-only by all workers.
pub struct StepContext<'a> {
    /// Current noisy latent over the round extent.
    pub canvas: &'a LatentVolume,
    /// Canvas-latent coordinates of the extent's top-left cell, used to
    /// report absolute window placements to the denoiser.
    pub origin: (i64, i64),
    /// Window rects in latent cells, relative to the extent.
    pub windows: &'a [Rect],
    /// Which extent cells hold known content.
    pub known: &'a MaskGrid,
    /// Blend weights matching the window size.
    pub weights: &'a WeightMask,
    pub schedule: &'a NoiseSchedule,
    /// Index into the schedule's sampling subsequence.
    pub step_position: usize,
    pub cfg_scale: f64,
    pub workers: usize,
}

/// Builds the conditioning bundle for a window, given its index and its
/// absolute canvas-latent rect.
pub type BundleFn<'a> = dyn Fn(usize, &Rect) -> Result<ConditioningBundle> + Sync + 'a;

/// Run one window task: slice, condition, denoise, guide, and take one DDIM
/// step. Pure in the context, so tasks may run concurrently and in any
/// order.
pub fn run_window_task(
    ctx: &StepContext,
    denoiser: &dyn Denoiser,
    bundle_fn: &BundleFn,
    index: usize,
) -> Result<LatentVolume> {
    let rect = ctx.windows[index];
    let absolute = Rect::new(rect.x + ctx.origin.0, rect.y + ctx.origin.1, rect.w, rect.h);
    let input = assemble_model_input(&rect, ctx.canvas, ctx.known)?;
    let bundle = bundle_fn(index, &absolute)?;
    let timestep = ctx.schedule.step_indices()[ctx.step_position];
    let request = DenoiserRequest {
        input: &input,
        bundle: &bundle,
        timestep,
        window_rect: absolute,
    };
    let response = denoiser.denoise(&request)?;
    let eps = cfg_combine(&response.eps_cond, &response.eps_uncond, ctx.cfg_scale)?;
    ddim_step(&input.noisy, &eps, ctx.schedule.abar_at(ctx.step_position), ctx.schedule.abar_prev(ctx.step_position))
}

/// Denoise every window of the step on up to `ctx.workers` workers and
/// merge the outputs. Fails fast: the error of the lowest-indexed failing
/// window is reported and no partial merge is produced.
pub fn dispatch_step(
    ctx: &StepContext,
    denoiser: &dyn Denoiser,
    bundle_fn: &BundleFn,
) -> Result<LatentVolume> {
    if ctx.workers == 0 {
        return Err(Error::InvalidConfig("worker count must be at least 1".into()));
    }
    if ctx.windows.is_empty() {
        return Err(Error::InvalidInput("dispatch requires at least one window".into()));
    }
    if ctx.step_position >= ctx.schedule.step_indices().len() {
        return Err(Error::InvalidInput(format!(
            "step position {} outside schedule of {} sampling steps",
            ctx.step_position,
            ctx.schedule.step_indices().len()
        )));
    }
    let tasks = ctx.windows.len();
    let worker_count = ctx.workers.min(tasks);

    let mut outputs: Vec<Result<LatentVolume>> = Vec::with_capacity(tasks);
    if worker_count == 1 {
        for index in 0..tasks {
            match run_window_task(ctx, denoiser, bundle_fn, index) {
                Ok(vol) => outputs.push(Ok(vol)),
                Err(e) => {
                    return Err(Error::WindowTask { index, source: Box::new(e) });
                }
            }
        }
    } else {
        let cursor = AtomicUsize::new(0);
        let abort = AtomicBool::new(false);
        let slots: Vec<OnceLock<Result<LatentVolume>>> =
            (0..tasks).map(|_| OnceLock::new()).collect();
        std::thread::scope(|scope| {
            for _ in 0..worker_count {
                scope.spawn(|| loop {
                    if abort.load(Ordering::Acquire) {
                        break;
                    }
                    let index = cursor.fetch_add(1, Ordering::Relaxed);
                    if index >= tasks {
                        break;
                    }
                    let result = run_window_task(ctx, denoiser, bundle_fn, index);
                    if result.is_err() {
                        abort.store(true, Ordering::Release);
                    }
                    let _ = slots[index].set(result);
                });
            }
        });
        // Tasks are claimed in index order, so the first unset or failed
        // slot identifies the earliest outcome worth reporting.
        for (index, slot) in slots.into_iter().enumerate() {
            match slot.into_inner() {
                Some(Ok(vol)) => outputs.push(Ok(vol)),
                Some(Err(e)) => {
                    return Err(Error::WindowTask { index, source: Box::new(e) });
                }
                None => {
                    return Err(Error::InvalidInput(format!(
                        "window task {index} was never executed despite no earlier failure"
                    )));
                }
            }
        }
    }

    let pairs: Vec<(Rect, LatentVolume)> = ctx
        .windows
        .iter()
        .zip(outputs)
        .map(|(&rect, out)| (rect, out.expect("errors returned above")))
        .collect();
    merge_windows(ctx.canvas.shape(), &pairs, ctx.weights)
}
