//! Optimization variants of every kernel.
//!
//! A [`VariantConfig`] is the knob set of one kernel build:
//!
//! | letter | knob |
//! |--------|------|
//! | `R` | pointer operands declared non-aliasing |
//! | `I` | assumed loop-carried dependences ignored |
//! | `W` | fused rewrite: R, G and B of a pixel produced in one iteration |
//! | `C` | read-only operands through the constant cache |
//! | `B` | read-only operands copied once into a local buffer |
//! | `_K` | constant-cache size in KiB (with `C`), e.g. `RIWC_128` |
//! | `+Un` | inner loop unrolled `n` times (gamut only), e.g. `RIWB+U6` |
//!
//! `BASE` is the configuration with no knob set. `R` and `I` are metadata
//! for [`crate::perfmodel`]; they never change output or counters.
//!
//! Every variant produces the reference output: bit-exact, except that an
//! unrolled gamut reassociates its reduction and is held to 1e-4 relative.

mod cache;
mod counters;
mod kernels;

use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::image::{PlanarImage, RawBayerImage};
use crate::isp::Stage;
use crate::params::PipelineParams;

pub use cache::{valid_cache_size, Access, CacheError, ConstCacheSim, DEFAULT_CACHE_BYTES, LINE_BYTES};
pub use counters::{counters_for_reference, AccessCounters, CachePrediction, PredictedCounters};
pub use kernels::{median9_network, UnrollPlan};
pub(crate) use kernels::{gamut_pixel_fused, gamut_region};

/// Relative tolerance for variants that reassociate floating-point sums.
pub const REASSOCIATION_TOLERANCE: f64 = 1e-4;

#[derive(Debug, Error, PartialEq)]
pub enum VariantError {
    #[error("variant {label} is not valid for {stage}: {reason}")]
    InvalidConfig {
        stage: Stage,
        label: String,
        reason: &'static str,
    },
    #[error("cannot parse variant {input:?}: {reason}")]
    Parse { input: String, reason: String },
    #[error("{stage} expects a {expected} input")]
    WrongInput { stage: Stage, expected: &'static str },
    #[error(transparent)]
    Cache(#[from] CacheError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReadonlyMode {
    #[default]
    None,
    ConstCache,
    Buffered,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct VariantConfig {
    pub restrict_flag: bool,
    pub ivdep_flag: bool,
    pub fused_rewrite: bool,
    pub readonly_mode: ReadonlyMode,
    pub unroll_factor: u32,
    pub cache_size_bytes: u64,
}

impl Default for VariantConfig {
    fn default() -> Self {
        Self::BASE
    }
}

impl VariantConfig {
    pub const BASE: VariantConfig = VariantConfig {
        restrict_flag: false,
        ivdep_flag: false,
        fused_rewrite: false,
        readonly_mode: ReadonlyMode::None,
        unroll_factor: 1,
        cache_size_bytes: DEFAULT_CACHE_BYTES,
    };

    /// Canonical grammar string, e.g. `RIWC_128+U6`.
    pub fn label(&self) -> String {
        let mut s = String::new();
        for (on, ch) in [
            (self.restrict_flag, 'R'),
            (self.ivdep_flag, 'I'),
            (self.fused_rewrite, 'W'),
            (self.readonly_mode == ReadonlyMode::ConstCache, 'C'),
            (self.readonly_mode == ReadonlyMode::Buffered, 'B'),
        ] {
            if on {
                s.push(ch);
            }
        }
        if s.is_empty() {
            s.push_str("BASE");
        }
        if self.readonly_mode == ReadonlyMode::ConstCache && self.cache_size_bytes != DEFAULT_CACHE_BYTES {
            if self.cache_size_bytes % 1024 == 0 {
                s.push_str(&format!("_{}", self.cache_size_bytes / 1024));
            } else {
                s.push_str(&format!("_{}B", self.cache_size_bytes));
            }
        }
        if self.unroll_factor > 1 {
            s.push_str(&format!("+U{}", self.unroll_factor));
        }
        s
    }

    /// Rejects knob combinations a stage does not have.
    pub fn validate_for(&self, stage: Stage) -> Result<(), VariantError> {
        let fail = |reason| {
            Err(VariantError::InvalidConfig {
                stage,
                label: self.label(),
                reason,
            })
        };
        if self.unroll_factor == 0 {
            return fail("unroll factor must be at least 1");
        }
        if self.unroll_factor > 1 && stage != Stage::Gamut {
            return fail("only gamut has an inner loop to unroll");
        }
        if self.readonly_mode != ReadonlyMode::None && matches!(stage, Stage::Demosaic | Stage::Denoise) {
            return fail("stage has no read-only operands");
        }
        if self.fused_rewrite && stage == Stage::Demosaic {
            return fail("demosaic already produces R, G and B in one iteration");
        }
        if !valid_cache_size(self.cache_size_bytes) {
            return fail("cache size must be a power of two of at least one line");
        }
        Ok(())
    }

    /// Drops the knobs `stage` does not have, so one pipeline-wide label can
    /// configure every stage.
    pub fn project_onto(&self, stage: Stage) -> VariantConfig {
        let mut cfg = *self;
        if stage != Stage::Gamut {
            cfg.unroll_factor = 1;
        }
        if matches!(stage, Stage::Demosaic | Stage::Denoise) {
            cfg.readonly_mode = ReadonlyMode::None;
        }
        if stage == Stage::Demosaic {
            cfg.fused_rewrite = false;
        }
        cfg
    }

    /// Whether outputs must match the reference bit for bit.
    pub fn is_order_preserving(&self, stage: Stage) -> bool {
        !(stage == Stage::Gamut && self.unroll_factor > 1)
    }

    /// Every valid configuration of `stage` over the given unroll factors
    /// and cache sizes.
    pub fn enumerate(stage: Stage, unroll_factors: &[u32], cache_sizes: &[u64]) -> Vec<VariantConfig> {
        let mut out = Vec::new();
        for bits in 0..8u8 {
            for mode in [ReadonlyMode::None, ReadonlyMode::ConstCache, ReadonlyMode::Buffered] {
                let sizes: &[u64] = if mode == ReadonlyMode::ConstCache {
                    cache_sizes
                } else {
                    &[DEFAULT_CACHE_BYTES]
                };
                for &cache_size_bytes in sizes {
                    for &unroll_factor in unroll_factors {
                        let cfg = VariantConfig {
                            restrict_flag: bits & 1 != 0,
                            ivdep_flag: bits & 2 != 0,
                            fused_rewrite: bits & 4 != 0,
                            readonly_mode: mode,
                            unroll_factor,
                            cache_size_bytes,
                        };
                        if cfg.validate_for(stage).is_ok() && !out.contains(&cfg) {
                            out.push(cfg);
                        }
                    }
                }
            }
        }
        out
    }
}

impl fmt::Display for VariantConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.label())
    }
}

impl FromStr for VariantConfig {
    type Err = VariantError;

    fn from_str(input: &str) -> Result<Self, Self::Err> {
        let err = |reason: &str| VariantError::Parse {
            input: input.to_string(),
            reason: reason.to_string(),
        };
        let s = input.trim();
        let mut parts = s.split('+');
        let head = parts.next().unwrap_or_default();
        let (letters, size) = match head.split_once('_') {
            Some((l, k)) => (l, Some(k)),
            None => (head, None),
        };
        let mut cfg = VariantConfig::BASE;
        if letters != "BASE" {
            if letters.is_empty() {
                return Err(err("empty knob list"));
            }
            let mut seen = String::new();
            for ch in letters.chars() {
                if seen.contains(ch) {
                    return Err(err("repeated knob"));
                }
                seen.push(ch);
                match ch {
                    'R' => cfg.restrict_flag = true,
                    'I' => cfg.ivdep_flag = true,
                    'W' => cfg.fused_rewrite = true,
                    'C' | 'B' if cfg.readonly_mode != ReadonlyMode::None => {
                        return Err(err("C and B are mutually exclusive"))
                    }
                    'C' => cfg.readonly_mode = ReadonlyMode::ConstCache,
                    'B' => cfg.readonly_mode = ReadonlyMode::Buffered,
                    _ => return Err(err("knobs are R, I, W, C, B")),
                }
            }
        }
        if let Some(k) = size {
            if cfg.readonly_mode != ReadonlyMode::ConstCache {
                return Err(err("a cache size suffix needs C"));
            }
            let bytes = match k.strip_suffix('B') {
                Some(b) => b.parse::<u64>().ok(),
                None => k.parse::<u64>().ok().and_then(|kib| kib.checked_mul(1024)),
            }
            .ok_or_else(|| err("cache size must be an integer (KiB, or bytes with a B suffix)"))?;
            if !valid_cache_size(bytes) {
                return Err(err("cache size must be a power of two of at least 64 bytes"));
            }
            cfg.cache_size_bytes = bytes;
        }
        for part in parts {
            let n = part
                .strip_prefix('U')
                .and_then(|n| n.parse::<u32>().ok())
                .filter(|n| *n >= 1)
                .ok_or_else(|| err("suffix must be +U<n> with n >= 1"))?;
            cfg.unroll_factor = n;
        }
        Ok(cfg)
    }
}

/// Parses a comma-separated list of variant labels.
pub fn parse_list(list: &str) -> Result<Vec<VariantConfig>, VariantError> {
    list.split(',').filter(|s| !s.trim().is_empty()).map(str::parse).collect()
}

#[derive(Debug, Clone, Copy)]
pub enum StageInput<'a> {
    Raw(&'a RawBayerImage),
    Image(&'a PlanarImage),
}

/// Runs one instrumented variant.
pub fn run_variant(
    stage: Stage,
    cfg: &VariantConfig,
    input: StageInput<'_>,
    params: &PipelineParams,
) -> Result<(PlanarImage, AccessCounters), VariantError> {
    cfg.validate_for(stage)?;
    let mut probe = counters::Counting::new(stage, cfg, params)?;
    let t0 = Instant::now();
    let out = kernels::dispatch(stage, cfg, input, params, &mut probe)?;
    let mut counters = probe.finish();
    counters.wall_time_s = t0.elapsed().as_secs_f64();
    Ok((out, counters))
}

/// Runs a variant without instrumentation, for timing.
pub fn run_variant_fast(
    stage: Stage,
    cfg: &VariantConfig,
    input: StageInput<'_>,
    params: &PipelineParams,
) -> Result<PlanarImage, VariantError> {
    cfg.validate_for(stage)?;
    kernels::dispatch(stage, cfg, input, params, &mut counters::Silent)
}

/// Stage `stage`'s part of the fully optimized pipeline: `RIW` everywhere
/// (`RI` for demosaic) with the given gamut unroll factor.
pub fn fused_config(stage: Stage, gamut_unroll: u32) -> VariantConfig {
    VariantConfig {
        restrict_flag: true,
        ivdep_flag: true,
        fused_rewrite: true,
        unroll_factor: gamut_unroll,
        ..VariantConfig::BASE
    }
    .project_onto(stage)
}

/// The five fused variants run back to back, the sequential counterpart of
/// the dataflow executor.
pub fn run_fused_pipeline(
    raw: &RawBayerImage,
    params: &PipelineParams,
    gamut_unroll: u32,
) -> Result<PlanarImage, VariantError> {
    let mut img = run_variant_fast(
        Stage::Demosaic,
        &fused_config(Stage::Demosaic, gamut_unroll),
        StageInput::Raw(raw),
        params,
    )?;
    for stage in &Stage::ALL[1..] {
        img = run_variant_fast(*stage, &fused_config(*stage, gamut_unroll), StageInput::Image(&img), params)?;
    }
    Ok(img)
}

/// Largest relative deviation `|a - b| / max(|a|, |b|)` over all samples
/// (0 for identical samples, infinity when exactly one side is NaN).
pub fn max_relative_deviation(a: &PlanarImage, b: &PlanarImage) -> f64 {
    if a.width() != b.width() || a.height() != b.height() {
        return f64::INFINITY;
    }
    a.as_slice()
        .iter()
        .zip(b.as_slice())
        .map(|(&x, &y)| {
            if x.to_bits() == y.to_bits() || x == y {
                0.0
            } else if x.is_nan() || y.is_nan() {
                f64::INFINITY
            } else {
                let (x, y) = (x as f64, y as f64);
                (x - y).abs() / x.abs().max(y.abs())
            }
        })
        .fold(0.0, f64::max)
}

/// Whether `got` passes the equivalence gate for `cfg` against `reference`.
pub fn equivalent(stage: Stage, cfg: &VariantConfig, got: &PlanarImage, reference: &PlanarImage) -> bool {
    if cfg.is_order_preserving(stage) {
        got.width() == reference.width()
            && got.height() == reference.height()
            && got
                .as_slice()
                .iter()
                .zip(reference.as_slice())
                .all(|(a, b)| a.to_bits() == b.to_bits())
    } else {
        max_relative_deviation(got, reference) <= REASSOCIATION_TOLERANCE
    }
}
