//! Software workbench for a five-stage camera ISP pipeline
//! (demosaic, denoise, color transform, gamut map, tone map).
//!
//! The crate provides:
//!
//! * reference kernels and the sequential pipeline composer ([`isp`]),
//! * the optimization-variant engine with instrumented memory traffic and a
//!   direct-mapped constant-cache simulator ([`variants`]),
//! * a channel-connected dataflow executor with stall accounting and an
//!   exact virtual-time model ([`dataflow`]),
//! * an analytic loop-pipelining model: initiation interval, cycles,
//!   resources ([`perfmodel`]),
//! * the benchmark harness and report emitters ([`harness`]).
//!
//! Reference kernels are row-parallel through rayon when the `parallel`
//! feature is enabled (the default) and strictly sequential otherwise. Both
//! paths produce bit-identical output.

pub mod dataflow;
pub mod exec;
pub mod harness;
pub mod image;
pub mod imgio;
pub mod isp;
pub mod params;
pub mod perfmodel;
pub mod synth;
pub mod variants;

pub use exec::Exec;
pub use image::{PlanarImage, RawBayerImage};
pub use isp::{run_pipeline, Stage};
pub use params::{GamutParams, PipelineParams, ToneLut, TransformMatrix};
pub use variants::{ReadonlyMode, VariantConfig};
