//! Tiled video-outpainting engine.
//!
//! The crate grows a source video clip to a larger canvas by repeatedly
//! denoising overlapping spatial windows and blending them back together:
//!
//! * [`geometry`] plans the per-round window covers and the round-by-round
//!   growth of the known region,
//! * [`blending`] merges per-window latents with Gaussian seam weights,
//! * [`embedding`] and [`conditioning`] build the per-window model inputs,
//! * [`diffusion`] runs the deterministic DDIM sampler,
//! * [`executor`] dispatches window tasks over a worker pool with
//!   bitwise-reproducible results,
//! * [`pipeline`] ties the rounds together end to end,
//! * [`container`], [`codec`] and [`metrics`] cover on-disk volumes,
//!   latent-space up/down scaling and quality measurement for the CLI.

pub mod blending;
pub mod codec;
pub mod conditioning;
pub mod container;
pub mod diffusion;
pub mod embedding;
pub mod error;
pub mod executor;
pub mod geometry;
pub mod metrics;
pub mod pipeline;
pub mod sampler;
pub mod seeding;
pub mod volume;

pub use error::{Error, Result};
