//! Multi-round outpainting, end to end.
//!
//! Each round: draw one shared Gaussian noise canvas over the round's
//! reachable extent, run the DDIM loop (every step denoises all windows and
//! blends them), and hand the merged result to the next round as its
//! anchor. The final composite pastes the original source back verbatim.

use crate::blending::gaussian_weights;
use crate::conditioning::{
    build_bundle, layout_tokens, ConditioningBundle, MaskGrid, TokenSeq, CONTENT_CHANNELS,
    DEFAULT_LAYOUT_GRID,
};
use crate::diffusion::{
    make_schedule, Denoiser, DEFAULT_GUIDANCE_SCALE, DEFAULT_INFERENCE_STEPS, DEFAULT_TRAIN_STEPS,
};
use crate::embedding::{
    region_embedding, relative_region, LinearMap, DEFAULT_D_SIN, DEFAULT_D_TOKEN,
    DEFAULT_PROJECTION_SEED,
};
use crate::error::{Error, Result};
use crate::executor::{dispatch_step, StepContext};
use crate::geometry::{plan_rounds, PlanConfig, Rect};
use crate::seeding;
use crate::volume::{LatentVolume, VolumeShape};

/// Seed for the default layout lift map (kept distinct from the region
/// projection seed so the two maps never coincide).
pub const DEFAULT_LIFT_SEED: u64 = 0x6c69_6674;

/// How the blend-weight spread is chosen.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SigmaPolicy {
    /// Sigma = configured window side (in latent cells) divided by this.
    WindowFraction(f64),
    /// Fixed sigma in latent cells.
    Fixed(f64),
}

impl SigmaPolicy {
    pub fn sigma_for(&self, window_latent_side: f64) -> Result<f64> {
        let sigma = match *self {
            SigmaPolicy::WindowFraction(divisor) => {
                if !(divisor > 0.0) || !divisor.is_finite() {
                    return Err(Error::InvalidConfig(format!(
                        "sigma divisor must be positive and finite, got {divisor}"
                    )));
                }
                window_latent_side / divisor
            }
            SigmaPolicy::Fixed(sigma) => sigma,
        };
        if !(sigma > 0.0) || !sigma.is_finite() {
            return Err(Error::InvalidConfig(format!(
                "blend sigma must be positive and finite, got {sigma}"
            )));
        }
        Ok(sigma)
    }
}

impl Default for SigmaPolicy {
    fn default() -> Self {
        SigmaPolicy::WindowFraction(4.0)
    }
}

/// Token and embedding widths for the conditioning path.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ConditioningSetup {
    pub layout_grid: (usize, usize),
    pub d_sin: usize,
    pub d_token: usize,
    pub projection_seed: u64,
    pub lift_seed: u64,
}

impl Default for ConditioningSetup {
    fn default() -> Self {
        ConditioningSetup {
            layout_grid: (DEFAULT_LAYOUT_GRID, DEFAULT_LAYOUT_GRID),
            d_sin: DEFAULT_D_SIN,
            d_token: DEFAULT_D_TOKEN,
            projection_seed: DEFAULT_PROJECTION_SEED,
            lift_seed: DEFAULT_LIFT_SEED,
        }
    }
}

/// Full run configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    pub plan: PlanConfig,
    /// DDIM sampling steps per round.
    pub steps: usize,
    pub cfg_scale: f64,
    pub seed: u64,
    /// Pixels per latent cell; must divide the window, the overlap, and
    /// every source/canvas edge so all rects stay latent-aligned.
    pub codec_factor: i64,
    pub sigma: SigmaPolicy,
    /// Re-impose the (noised) anchor content after every merge instead of
    /// relying on channel conditioning alone.
    pub repaint_each_step: bool,
    pub train_steps: usize,
    pub workers: usize,
    pub conditioning: ConditioningSetup,
}

impl PipelineConfig {
    pub fn new(plan: PlanConfig) -> Self {
        PipelineConfig {
            plan,
            steps: DEFAULT_INFERENCE_STEPS,
            cfg_scale: DEFAULT_GUIDANCE_SCALE,
            seed: 0,
            codec_factor: 1,
            sigma: SigmaPolicy::default(),
            repaint_each_step: false,
            train_steps: DEFAULT_TRAIN_STEPS,
            workers: 1,
            conditioning: ConditioningSetup::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.plan.validate()?;
        if self.steps == 0 || self.steps > self.train_steps {
            return Err(Error::InvalidConfig(format!(
                "need 1 <= steps <= train_steps, got {}/{}",
                self.steps, self.train_steps
            )));
        }
        if !self.cfg_scale.is_finite() {
            return Err(Error::InvalidConfig(format!(
                "guidance scale must be finite, got {}",
                self.cfg_scale
            )));
        }
        if self.workers == 0 {
            return Err(Error::InvalidConfig("worker count must be at least 1".into()));
        }
        let f = self.codec_factor;
        if f < 1 {
            return Err(Error::InvalidConfig(format!(
                "codec factor must be at least 1, got {f}"
            )));
        }
        let edges = [
            ("window", self.plan.window),
            ("min_overlap", self.plan.min_overlap),
            ("canvas width", self.plan.canvas.w),
            ("canvas height", self.plan.canvas.h),
            ("source x", self.plan.source.x),
            ("source y", self.plan.source.y),
            ("source width", self.plan.source.w),
            ("source height", self.plan.source.h),
        ];
        for (name, v) in edges {
            if v % f != 0 {
                return Err(Error::InvalidConfig(format!(
                    "{name} ({v}) is not divisible by the codec factor {f}"
                )));
            }
        }
        let (gh, gw) = self.conditioning.layout_grid;
        if gh == 0 || gw == 0 {
            return Err(Error::InvalidConfig("layout grid must be positive".into()));
        }
        if self.conditioning.d_sin < 2 || self.conditioning.d_sin % 2 != 0 {
            return Err(Error::InvalidConfig(format!(
                "sinusoidal width must be even and >= 2, got {}",
                self.conditioning.d_sin
            )));
        }
        if self.conditioning.d_token == 0 {
            return Err(Error::InvalidConfig("token width must be positive".into()));
        }
        Ok(())
    }
}

fn to_latent(rect: &Rect, factor: i64) -> Rect {
    Rect::new(rect.x / factor, rect.y / factor, rect.w / factor, rect.h / factor)
}

/// Grow `source` to the configured canvas with the given denoiser. The
/// returned latent covers the whole canvas; the source rect is bitwise
/// identical to the input.
pub fn outpaint(
    source: &LatentVolume,
    cfg: &PipelineConfig,
    denoiser: &dyn Denoiser,
) -> Result<LatentVolume> {
    cfg.validate()?;
    let f = cfg.codec_factor;
    let source_lat = to_latent(&cfg.plan.source, f);
    let src_shape = source.shape();
    if src_shape.channels != CONTENT_CHANNELS {
        return Err(Error::Shape(format!(
            "source must have {} channels, got {}",
            CONTENT_CHANNELS, src_shape.channels
        )));
    }
    if src_shape.height != source_lat.h as usize || src_shape.width != source_lat.w as usize {
        return Err(Error::Shape(format!(
            "source volume is {}x{} cells but the source rect spans {}x{} at factor {f}",
            src_shape.width, src_shape.height, source_lat.w, source_lat.h
        )));
    }

    let plan = plan_rounds(&cfg.plan)?;
    let canvas_lat = to_latent(&cfg.plan.canvas, f);
    let canvas_shape = VolumeShape::new(
        src_shape.frames,
        CONTENT_CHANNELS,
        canvas_lat.h as usize,
        canvas_lat.w as usize,
    );
    let mut composite = LatentVolume::zeros(canvas_shape)?;
    composite.paste_rect(&source_lat, source)?;
    if plan.rounds.is_empty() {
        return Ok(composite);
    }

    let schedule = make_schedule(cfg.train_steps, cfg.steps)?;
    let setup = &cfg.conditioning;
    let projection = LinearMap::seeded_random(
        setup.d_token,
        6 * setup.d_sin,
        setup.projection_seed,
    )?;
    let lift = LinearMap::seeded_random(setup.d_token, CONTENT_CHANNELS, setup.lift_seed)?;
    let window_latent_side = (cfg.plan.window / f) as f64;
    let sigma = cfg.sigma.sigma_for(window_latent_side)?;

    for (round_index, round) in plan.rounds.iter().enumerate() {
        let reach = plan.reach_after(round_index);
        let reach_lat = to_latent(&reach, f);
        let anchor_lat = to_latent(&round.anchor, f);
        let anchor_rel = Rect::new(
            anchor_lat.x - reach_lat.x,
            anchor_lat.y - reach_lat.y,
            anchor_lat.w,
            anchor_lat.h,
        );
        let extent_shape = VolumeShape::new(
            src_shape.frames,
            CONTENT_CHANNELS,
            reach_lat.h as usize,
            reach_lat.w as usize,
        );

        let anchor_content = composite.slice_rect(&anchor_lat)?;
        let layout = layout_tokens(&anchor_content, setup.layout_grid, &lift)?;
        let bundles: Vec<ConditioningBundle> = round
            .windows
            .iter()
            .map(|window| {
                let rr = relative_region(&round.anchor, window);
                let emb = region_embedding(&rr, setup.d_sin, &projection)?;
                build_bundle(&layout, &emb.token, TokenSeq::empty(setup.d_token)?)
            })
            .collect::<Result<_>>()?;

        let windows_rel: Vec<Rect> = round
            .windows
            .iter()
            .map(|w| {
                let wl = to_latent(w, f);
                Rect::new(wl.x - reach_lat.x, wl.y - reach_lat.y, wl.w, wl.h)
            })
            .collect();
        let (win_h, win_w) = (windows_rel[0].h as usize, windows_rel[0].w as usize);
        let weights = gaussian_weights(win_h, win_w, sigma)?;
        let known = MaskGrid::from_known_rect(
            extent_shape.height,
            extent_shape.width,
            &anchor_rel,
        )?;

        let mut rng = seeding::stream_rng(cfg.seed, "round-noise", &[round_index as i64]);
        let noise = seeding::noise_volume(extent_shape, &mut rng)?;
        let mut x = noise.clone();

        let bundle_fn = |index: usize, _rect: &Rect| Ok(bundles[index].clone());
        for position in 0..cfg.steps {
            let ctx = StepContext {
                canvas: &x,
                origin: (reach_lat.x, reach_lat.y),
                windows: &windows_rel,
                known: &known,
                weights: &weights,
                schedule: &schedule,
                step_position: position,
                cfg_scale: cfg.cfg_scale,
                workers: cfg.workers,
            };
            x = dispatch_step(&ctx, denoiser, &bundle_fn)?;
            if cfg.repaint_each_step {
                repaint_anchor(
                    &mut x,
                    &anchor_rel,
                    &anchor_content,
                    &noise,
                    schedule.abar_prev(position),
                )?;
            }
        }
        composite.paste_rect(&reach_lat, &x)?;
    }

    composite.paste_rect(&source_lat, source)?;
    Ok(composite)
}

/// Overwrite the anchor region of `x` with the anchor content re-noised to
/// the signal level `abar` using the round's shared noise canvas.
fn repaint_anchor(
    x: &mut LatentVolume,
    anchor_rel: &Rect,
    anchor_content: &LatentVolume,
    noise: &LatentVolume,
    abar: f64,
) -> Result<()> {
    let sqrt_a = abar.sqrt();
    let sqrt_oma = (1.0 - abar).sqrt();
    let noise_slice = noise.slice_rect(anchor_rel)?;
    let values: Vec<f32> = anchor_content
        .values()
        .iter()
        .zip(noise_slice.values())
        .map(|(&z, &e)| (sqrt_a * z as f64 + sqrt_oma * e as f64) as f32)
        .collect();
    let renoised = LatentVolume::from_values(anchor_content.shape(), values)?;
    x.paste_rect(anchor_rel, &renoised)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::diffusion::{OracleDenoiser, ProceduralDenoiser};

    fn small_cfg() -> PipelineConfig {
        let plan = PlanConfig {
            canvas: Rect::new(0, 0, 48, 32),
            source: Rect::new(16, 8, 16, 16),
            window: 16,
            min_overlap: 4,
        };
        let mut cfg = PipelineConfig::new(plan);
        cfg.steps = 10;
        cfg.seed = 5;
        cfg.conditioning.d_sin = 8;
        cfg.conditioning.d_token = 16;
        cfg.conditioning.layout_grid = (2, 2);
        cfg
    }

    fn smooth_volume(shape: VolumeShape, scale: f32) -> LatentVolume {
        let mut vol = LatentVolume::zeros(shape).unwrap();
        for f in 0..shape.frames {
            for c in 0..shape.channels {
                for i in 0..shape.height {
                    for j in 0..shape.width {
                        *vol.at_mut(f, c, i, j) = scale
                            * ((i as f32 * 0.35 + f as f32).sin()
                                + (j as f32 * 0.2 + c as f32).cos());
                    }
                }
            }
        }
        vol
    }

    #[test]
    fn zero_round_copy_through() {
        let plan = PlanConfig {
            canvas: Rect::new(0, 0, 32, 32),
            source: Rect::new(0, 0, 32, 32),
            window: 16,
            min_overlap: 4,
        };
        let mut cfg = PipelineConfig::new(plan);
        cfg.steps = 4;
        let source = smooth_volume(VolumeShape::new(2, 4, 32, 32), 0.5);
        struct NeverCalled;
        impl Denoiser for NeverCalled {
            fn denoise(
                &self,
                _: &crate::diffusion::DenoiserRequest,
            ) -> Result<crate::diffusion::DenoiserResponse> {
                Err(Error::InvalidInput("denoiser must not be called".into()))
            }
        }
        let out = outpaint(&source, &cfg, &NeverCalled).unwrap();
        assert_eq!(out.values(), source.values());
    }

    #[test]
    fn oracle_reconstruction_small_canvas() {
        let cfg = small_cfg();
        let canvas_shape = VolumeShape::new(2, 4, 32, 48);
        let target = smooth_volume(canvas_shape, 0.6);
        let schedule = make_schedule(cfg.train_steps, cfg.steps).unwrap();
        let denoiser = OracleDenoiser::new(target.clone(), schedule);
        let source = target.slice_rect(&Rect::new(16, 8, 16, 16)).unwrap();
        let out = outpaint(&source, &cfg, &denoiser).unwrap();
        assert_eq!(out.shape(), canvas_shape);
        let mut max_err = 0.0f32;
        for (got, want) in out.values().iter().zip(target.values()) {
            max_err = max_err.max((got - want).abs());
        }
        assert!(max_err < 1e-4, "max abs error {max_err}");
        // Source rect is pasted verbatim.
        let restored = out.slice_rect(&Rect::new(16, 8, 16, 16)).unwrap();
        assert_eq!(restored.values(), source.values());
    }

    #[test]
    fn worker_count_does_not_change_output() {
        let mut cfg = small_cfg();
        let denoiser = ProceduralDenoiser::new(77);
        let source = smooth_volume(VolumeShape::new(1, 4, 16, 16), 0.4);
        cfg.workers = 1;
        let reference = outpaint(&source, &cfg, &denoiser).unwrap();
        for workers in [2usize, 4, 8] {
            cfg.workers = workers;
            let out = outpaint(&source, &cfg, &denoiser).unwrap();
            assert_eq!(out.values(), reference.values(), "workers {workers}");
        }
    }

    #[test]
    fn reruns_are_bitwise_identical() {
        let cfg = small_cfg();
        let denoiser = ProceduralDenoiser::new(3);
        let source = smooth_volume(VolumeShape::new(1, 4, 16, 16), 0.4);
        let a = outpaint(&source, &cfg, &denoiser).unwrap();
        let b = outpaint(&source, &cfg, &denoiser).unwrap();
        assert_eq!(a.values(), b.values());
    }

    #[test]
    fn different_seeds_change_unknown_region_only_in_content() {
        let mut cfg = small_cfg();
        let denoiser = ProceduralDenoiser::new(3);
        let source = smooth_volume(VolumeShape::new(1, 4, 16, 16), 0.4);
        let a = outpaint(&source, &cfg, &denoiser).unwrap();
        cfg.seed = 6;
        let b = outpaint(&source, &cfg, &denoiser).unwrap();
        assert_ne!(a.values(), b.values());
        // Source rect identical in both (verbatim paste).
        let sa = a.slice_rect(&Rect::new(16, 8, 16, 16)).unwrap();
        let sb = b.slice_rect(&Rect::new(16, 8, 16, 16)).unwrap();
        assert_eq!(sa.values(), sb.values());
    }

    #[test]
    fn more_steps_do_not_hurt_oracle_accuracy() {
        let base = small_cfg();
        let canvas_shape = VolumeShape::new(1, 4, 32, 48);
        let target = smooth_volume(canvas_shape, 0.5);
        let source = target.slice_rect(&Rect::new(16, 8, 16, 16)).unwrap();
        let mut errors = Vec::new();
        for steps in [10usize, 40] {
            let mut cfg = base.clone();
            cfg.steps = steps;
            let schedule = make_schedule(cfg.train_steps, steps).unwrap();
            let denoiser = OracleDenoiser::new(target.clone(), schedule);
            let out = outpaint(&source, &cfg, &denoiser).unwrap();
            let err = out
                .values()
                .iter()
                .zip(target.values())
                .map(|(a, b)| (a - b).abs() as f64)
                .fold(0.0, f64::max);
            errors.push(err);
        }
        assert!(errors[1] <= errors[0] + 1e-6, "10 steps {} vs 40 steps {}", errors[0], errors[1]);
    }

    #[test]
    fn repaint_flag_still_converges_with_oracle() {
        let mut cfg = small_cfg();
        cfg.repaint_each_step = true;
        let canvas_shape = VolumeShape::new(1, 4, 32, 48);
        let target = smooth_volume(canvas_shape, 0.5);
        let schedule = make_schedule(cfg.train_steps, cfg.steps).unwrap();
        let denoiser = OracleDenoiser::new(target.clone(), schedule);
        let source = target.slice_rect(&Rect::new(16, 8, 16, 16)).unwrap();
        let out = outpaint(&source, &cfg, &denoiser).unwrap();
        for (got, want) in out.values().iter().zip(target.values()) {
            assert!((got - want).abs() < 1e-3);
        }
    }

    #[test]
    fn misaligned_codec_factor_is_rejected() {
        let plan = PlanConfig {
            canvas: Rect::new(0, 0, 48, 32),
            source: Rect::new(20, 8, 16, 16), // x not divisible by 8
            window: 16,
            min_overlap: 8,
        };
        let mut cfg = PipelineConfig::new(plan);
        cfg.codec_factor = 8;
        cfg.steps = 2;
        let source = smooth_volume(VolumeShape::new(1, 4, 2, 2), 0.1);
        let denoiser = ProceduralDenoiser::new(0);
        assert!(matches!(
            outpaint(&source, &cfg, &denoiser),
            Err(Error::InvalidConfig(_))
        ));
    }

    #[test]
    fn source_volume_shape_must_match_rect() {
        let cfg = small_cfg();
        let denoiser = ProceduralDenoiser::new(0);
        let bad = smooth_volume(VolumeShape::new(1, 4, 8, 16), 0.1);
        assert!(matches!(outpaint(&bad, &cfg, &denoiser), Err(Error::Shape(_))));
        let bad_channels = smooth_volume(VolumeShape::new(1, 3, 16, 16), 0.1);
        assert!(matches!(outpaint(&bad_channels, &cfg, &denoiser), Err(Error::Shape(_))));
    }
}
