//! Command-line driver for the tiled outpainting engine.
//!
//! Volumes travel as FYCT containers (see the library's `container`
//! module). All verbs are deterministic: the seed comes from `--seed`,
//! falling back to the `FYC_SEED` environment variable, then to 0.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use tileweave::codec::Codec;
use tileweave::container::{read_volume, write_volume};
use tileweave::diffusion::{make_schedule, Denoiser, OracleDenoiser, ProceduralDenoiser};
use tileweave::executor::{makespan, CostModel};
use tileweave::geometry::{plan_rounds, PlanConfig, Rect};
use tileweave::metrics;
use tileweave::pipeline::{outpaint, PipelineConfig};
use tileweave::sampler::{sample_training_windows, SamplerConfig};
use tileweave::seeding::stream_rng;
use tileweave::volume::{LatentVolume, VolumeShape};
use tileweave::{Error, Result};

#[derive(Parser)]
#[command(
    name = "tileweave",
    version,
    about = "Tiled multi-round outpainting over latent video volumes"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Print the multi-round window plan as JSON.
    Plan(PlanArgs),
    /// Grow a source volume onto a larger canvas.
    Outpaint(Box<OutpaintArgs>),
    /// Compare two volume containers with a reference metric.
    Metrics(MetricsArgs),
    /// Evaluate the parallel cost model for one round.
    SimulateSchedule(ScheduleArgs),
    /// Draw training anchor/target window pairs.
    SampleWindows(SampleArgs),
}

#[derive(Args)]
struct PlanArgs {
    #[arg(long)]
    canvas_w: i64,
    #[arg(long)]
    canvas_h: i64,
    #[arg(long)]
    source_x: i64,
    #[arg(long)]
    source_y: i64,
    #[arg(long)]
    source_w: i64,
    #[arg(long)]
    source_h: i64,
    #[arg(long, default_value_t = 512)]
    window: i64,
    #[arg(long, default_value_t = 128)]
    min_overlap: i64,
}

#[derive(Args)]
struct OutpaintArgs {
    /// Source volume container; its spatial dims define the source rect.
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    source_x: i64,
    #[arg(long)]
    source_y: i64,
    #[arg(long)]
    canvas_w: i64,
    #[arg(long)]
    canvas_h: i64,
    #[arg(long, default_value_t = 512)]
    window: i64,
    #[arg(long, default_value_t = 128)]
    min_overlap: i64,
    #[arg(long, default_value_t = 40)]
    steps: usize,
    /// Guidance scale.
    #[arg(long, default_value_t = 7.5)]
    cfg: f64,
    #[arg(long, default_value_t = 1)]
    workers: usize,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, value_enum, default_value_t = DenoiserKind::Procedural)]
    denoiser: DenoiserKind,
    #[arg(long, value_enum, default_value_t = CodecKind::Passthrough)]
    codec: CodecKind,
    /// Latent-domain canvas the oracle denoiser steers toward; synthesized
    /// from the seed when omitted.
    #[arg(long)]
    oracle_target: Option<PathBuf>,
    #[arg(long)]
    output: PathBuf,
}

#[derive(Args)]
struct MetricsArgs {
    #[arg(value_enum)]
    metric: MetricKind,
    a: PathBuf,
    b: PathBuf,
}

#[derive(Args)]
struct ScheduleArgs {
    #[arg(long, default_value_t = 15)]
    tasks: usize,
    #[arg(long, default_value_t = 8)]
    workers: usize,
    /// Cost of one window task, in arbitrary time units.
    #[arg(long, default_value_t = 1.0)]
    cost: f64,
}

#[derive(Args)]
struct SampleArgs {
    #[arg(long)]
    extent_w: i64,
    #[arg(long)]
    extent_h: i64,
    #[arg(long, default_value_t = 0)]
    extent_x: i64,
    #[arg(long, default_value_t = 0)]
    extent_y: i64,
    #[arg(long, default_value_t = 1)]
    count: usize,
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Clone, Copy, ValueEnum)]
enum DenoiserKind {
    Oracle,
    Procedural,
}

#[derive(Clone, Copy, ValueEnum)]
enum CodecKind {
    Passthrough,
    Box8,
}

impl CodecKind {
    fn to_codec(self) -> Codec {
        match self {
            CodecKind::Passthrough => Codec::Passthrough,
            CodecKind::Box8 => Codec::Box8,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum MetricKind {
    Psnr,
    Ssim,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error kind={} message={:?}", e.kind(), e.to_string());
            ExitCode::FAILURE
        }
    }
}

fn run(command: Command) -> Result<()> {
    match command {
        Command::Plan(args) => run_plan(&args),
        Command::Outpaint(args) => run_outpaint(&args),
        Command::Metrics(args) => run_metrics(&args),
        Command::SimulateSchedule(args) => run_schedule(&args),
        Command::SampleWindows(args) => run_sample(&args),
    }
}

fn resolve_seed(flag: Option<u64>) -> Result<u64> {
    if let Some(seed) = flag {
        return Ok(seed);
    }
    match std::env::var("FYC_SEED") {
        Ok(raw) => raw.trim().parse().map_err(|_| {
            Error::InvalidInput(format!("FYC_SEED {raw:?} is not an unsigned integer"))
        }),
        Err(std::env::VarError::NotPresent) => Ok(0),
        Err(e) => Err(Error::InvalidInput(format!("FYC_SEED: {e}"))),
    }
}

fn run_plan(args: &PlanArgs) -> Result<()> {
    let cfg = PlanConfig {
        canvas: Rect::new(0, 0, args.canvas_w, args.canvas_h),
        source: Rect::new(args.source_x, args.source_y, args.source_w, args.source_h),
        window: args.window,
        min_overlap: args.min_overlap,
    };
    let plan = plan_rounds(&cfg)?;
    let text = serde_json::to_string_pretty(&plan)
        .map_err(|e| Error::Format(format!("plan serialization failed: {e}")))?;
    println!("{text}");
    Ok(())
}

fn run_outpaint(args: &OutpaintArgs) -> Result<()> {
    let codec = args.codec.to_codec();
    let input = read_volume(&args.input)?;
    let in_shape = input.shape();
    let plan = PlanConfig {
        canvas: Rect::new(0, 0, args.canvas_w, args.canvas_h),
        source: Rect::new(
            args.source_x,
            args.source_y,
            in_shape.width as i64,
            in_shape.height as i64,
        ),
        window: args.window,
        min_overlap: args.min_overlap,
    };
    let mut cfg = PipelineConfig::new(plan);
    cfg.steps = args.steps;
    cfg.cfg_scale = args.cfg;
    cfg.workers = args.workers;
    cfg.seed = resolve_seed(args.seed)?;
    cfg.codec_factor = codec.factor();
    cfg.validate()?;

    let source_latent = codec.encode(&input)?;
    let denoiser: Box<dyn Denoiser> = match args.denoiser {
        DenoiserKind::Procedural => {
            if args.oracle_target.is_some() {
                return Err(Error::InvalidConfig(
                    "--oracle-target requires --denoiser oracle".into(),
                ));
            }
            Box::new(ProceduralDenoiser::new(cfg.seed))
        }
        DenoiserKind::Oracle => {
            let target = oracle_target(args, &cfg, &source_latent)?;
            let schedule = make_schedule(cfg.train_steps, cfg.steps)?;
            Box::new(OracleDenoiser::new(target, schedule))
        }
    };

    let out_latent = outpaint(&source_latent, &cfg, denoiser.as_ref())?;
    let out = codec.decode(&out_latent)?;
    write_volume(&args.output, &out)?;
    let shape = out.shape();
    println!(
        "wrote path={} frames={} channels={} height={} width={}",
        args.output.display(),
        shape.frames,
        shape.channels,
        shape.height,
        shape.width
    );
    Ok(())
}

/// The latent canvas the oracle steers toward: either a user-supplied
/// container or a seed-derived smooth field, with the encoded source
/// pasted in so the target agrees with the known content.
fn oracle_target(
    args: &OutpaintArgs,
    cfg: &PipelineConfig,
    source_latent: &LatentVolume,
) -> Result<LatentVolume> {
    let f = cfg.codec_factor;
    let shape = VolumeShape::new(
        source_latent.shape().frames,
        source_latent.shape().channels,
        (cfg.plan.canvas.h / f) as usize,
        (cfg.plan.canvas.w / f) as usize,
    );
    let mut target = match &args.oracle_target {
        Some(path) => {
            let vol = read_volume(Path::new(path))?;
            if vol.shape() != shape {
                return Err(Error::Shape(format!(
                    "oracle target shape {:?} does not match the latent canvas {:?}",
                    vol.shape(),
                    shape
                )));
            }
            vol
        }
        None => synthesize_target(shape, cfg.seed)?,
    };
    let source_rect = Rect::new(
        cfg.plan.source.x / f,
        cfg.plan.source.y / f,
        cfg.plan.source.w / f,
        cfg.plan.source.h / f,
    );
    target.paste_rect(&source_rect, source_latent)?;
    Ok(target)
}

/// Seed-derived smooth separable waves, bounded to roughly [-1, 1].
fn synthesize_target(shape: VolumeShape, seed: u64) -> Result<LatentVolume> {
    use rand::Rng;
    let mut rng = stream_rng(seed, "oracle-target", &[]);
    let mut vol = LatentVolume::zeros(shape)?;
    let (h, w) = (shape.height, shape.width);
    for f in 0..shape.frames {
        for c in 0..shape.channels {
            let freq_i: f64 = rng.random_range(0.005..0.05);
            let freq_j: f64 = rng.random_range(0.005..0.05);
            let phase_i: f64 = rng.random_range(0.0..std::f64::consts::TAU);
            let phase_j: f64 = rng.random_range(0.0..std::f64::consts::TAU);
            let rows: Vec<f32> = (0..h)
                .map(|i| (0.5 * (i as f64 * freq_i + phase_i).sin()) as f32)
                .collect();
            let cols: Vec<f32> = (0..w)
                .map(|j| (0.5 * (j as f64 * freq_j + phase_j).cos()) as f32)
                .collect();
            let plane = vol.plane_mut(f, c);
            for i in 0..h {
                let base = rows[i];
                for (out, &cv) in plane[i * w..(i + 1) * w].iter_mut().zip(&cols) {
                    *out = base + cv;
                }
            }
        }
    }
    Ok(vol)
}

fn run_metrics(args: &MetricsArgs) -> Result<()> {
    let a = read_volume(&args.a)?;
    let b = read_volume(&args.b)?;
    let value = match args.metric {
        MetricKind::Psnr => metrics::psnr(&a, &b, 1.0)?,
        MetricKind::Ssim => metrics::ssim(&a, &b)?,
    };
    if value.is_infinite() {
        println!("inf");
    } else {
        println!("{value}");
    }
    Ok(())
}

fn run_schedule(args: &ScheduleArgs) -> Result<()> {
    let model = CostModel {
        per_window_cost: args.cost,
        workers: args.workers,
    };
    let span = makespan(args.tasks, &model)?;
    let serial = makespan(
        args.tasks,
        &CostModel {
            per_window_cost: args.cost,
            workers: 1,
        },
    )?;
    let speedup = if span > 0.0 { serial / span } else { 1.0 };
    println!(
        "tasks={} workers={} cost={} makespan={} speedup={:.2}",
        args.tasks, args.workers, args.cost, span, speedup
    );
    Ok(())
}

fn run_sample(args: &SampleArgs) -> Result<()> {
    let extent = Rect::new(args.extent_x, args.extent_y, args.extent_w, args.extent_h);
    let cfg = SamplerConfig::default();
    let seed = resolve_seed(args.seed)?;
    let mut rng = stream_rng(seed, "cli-sample-windows", &[]);
    for _ in 0..args.count {
        let s = sample_training_windows(&extent, &cfg, &mut rng)?;
        let line = serde_json::json!({
            "anchor": s.anchor,
            "target": s.target,
            "anchor_clamped": s.anchor_clamped,
        });
        println!("{line}");
    }
    Ok(())
}
