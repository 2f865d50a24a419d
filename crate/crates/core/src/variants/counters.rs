//! Memory-traffic instrumentation and its closed-form predictions.
//!
//! Counting rules (one count per 32-bit element):
//!
//! * `global_reads`: pixel loads, plus read-only loads that reach global
//!   memory: every read-only access with no read-only handling, the one-off
//!   buffer fill when buffered, nothing when served by the constant cache.
//! * `readonly_accesses`: read-only element accesses made by the kernel
//!   body, whatever serves them.
//! * `cache_hits` / `cache_misses`: constant-cache outcomes; their sum is
//!   `readonly_accesses` under `C` and zero otherwise.
//! * `buffer_bytes`: bytes copied into local buffers.

use serde::{Deserialize, Serialize};

use super::cache::{Access, ConstCacheSim, LINE_BYTES};
use super::{ReadonlyMode, VariantConfig, VariantError};
use crate::isp::Stage;
use crate::params::PipelineParams;
use crate::perfmodel::{readonly_bytes, Geometry};

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct AccessCounters {
    pub global_reads: u64,
    pub global_writes: u64,
    pub readonly_accesses: u64,
    pub cache_hits: u64,
    pub cache_misses: u64,
    pub buffer_bytes: u64,
    pub wall_time_s: f64,
}

impl AccessCounters {
    pub fn hit_rate(&self) -> f64 {
        let total = self.cache_hits + self.cache_misses;
        if total == 0 {
            0.0
        } else {
            self.cache_hits as f64 / total as f64
        }
    }
}

/// Hook the kernels call on every counted memory operation.
pub(crate) trait Probe {
    fn pixel_loads(&mut self, n: u64);
    fn stores(&mut self, n: u64);
    /// Read-only access to element `elem` of the stage's flat region.
    fn readonly_load(&mut self, elem: usize);
    /// Copies `elems` read-only elements into a local buffer.
    fn buffer_fill(&mut self, elems: usize);
}

pub(crate) struct Silent;

impl Probe for Silent {
    #[inline(always)]
    fn pixel_loads(&mut self, _: u64) {}
    #[inline(always)]
    fn stores(&mut self, _: u64) {}
    #[inline(always)]
    fn readonly_load(&mut self, _: usize) {}
    #[inline(always)]
    fn buffer_fill(&mut self, _: usize) {}
}

pub(crate) struct Counting {
    counters: AccessCounters,
    mode: ReadonlyMode,
    cache: Option<ConstCacheSim>,
}

impl Counting {
    pub(crate) fn new(stage: Stage, cfg: &VariantConfig, params: &PipelineParams) -> Result<Self, VariantError> {
        let cache = match cfg.readonly_mode {
            ReadonlyMode::ConstCache => Some(ConstCacheSim::new(
                cfg.cache_size_bytes,
                readonly_bytes(stage, params.gamut.points()),
            )?),
            _ => None,
        };
        Ok(Self {
            counters: AccessCounters::default(),
            mode: cfg.readonly_mode,
            cache,
        })
    }

    pub(crate) fn finish(self) -> AccessCounters {
        self.counters
    }
}

impl Probe for Counting {
    #[inline]
    fn pixel_loads(&mut self, n: u64) {
        self.counters.global_reads += n;
    }

    #[inline]
    fn stores(&mut self, n: u64) {
        self.counters.global_writes += n;
    }

    #[inline]
    fn readonly_load(&mut self, elem: usize) {
        self.counters.readonly_accesses += 1;
        match self.mode {
            ReadonlyMode::None => self.counters.global_reads += 1,
            ReadonlyMode::Buffered => {}
            ReadonlyMode::ConstCache => {
                let cache = self.cache.as_mut().expect("cache configured");
                match cache.access(elem as u64 * 4) {
                    Ok(Access::Hit) => self.counters.cache_hits += 1,
                    Ok(Access::Miss) => self.counters.cache_misses += 1,
                    Err(e) => panic!("kernel addressed outside its read-only region: {e}"),
                }
            }
        }
    }

    fn buffer_fill(&mut self, elems: usize) {
        self.counters.global_reads += elems as u64;
        self.counters.buffer_bytes += elems as u64 * 4;
    }
}

/// Constant-cache part of a prediction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum CachePrediction {
    /// No constant cache: hits and misses are zero.
    NotUsed,
    Exact { hits: u64, misses: u64 },
    /// The hit/miss split depends on the data or on conflicts the closed
    /// form does not cover; only the total is predicted.
    TotalOnly { accesses: u64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PredictedCounters {
    pub global_reads: u64,
    pub global_writes: u64,
    pub readonly_accesses: u64,
    pub buffer_bytes: u64,
    pub cache: CachePrediction,
}

impl PredictedCounters {
    /// Whether instrumented counters agree with every predicted field.
    pub fn matches(&self, c: &AccessCounters) -> bool {
        let cache_ok = match self.cache {
            CachePrediction::NotUsed => c.cache_hits == 0 && c.cache_misses == 0,
            CachePrediction::Exact { hits, misses } => c.cache_hits == hits && c.cache_misses == misses,
            CachePrediction::TotalOnly { accesses } => c.cache_hits + c.cache_misses == accesses,
        };
        cache_ok
            && c.global_reads == self.global_reads
            && c.global_writes == self.global_writes
            && c.readonly_accesses == self.readonly_accesses
            && c.buffer_bytes == self.buffer_bytes
    }
}

/// Line sequence of one pixel's read-only accesses, per channel phase.
/// The fused loops make one phase; channel-outer loops make three, run
/// back to back over every pixel.
fn readonly_phases(stage: Stage, fused: bool, points: u64) -> Vec<Vec<u64>> {
    let line = |elem: u64| elem * 4 / LINE_BYTES;
    let gamut = |channels: &[u64]| {
        let mut t = Vec::new();
        for i in 0..points {
            t.extend((0..3).map(|k| line(3 * i + k)));
            t.extend(channels.iter().map(|c| line(3 * points + 3 * i + c)));
        }
        for &c in channels {
            t.extend((0..4).map(|row| line(6 * points + 3 * row + c)));
        }
        t
    };
    let transform = |c: u64| (0..3).map(|k| line(3 * c + k)).collect::<Vec<_>>();
    match (stage, fused) {
        (Stage::Gamut, true) => vec![gamut(&[0, 1, 2])],
        (Stage::Gamut, false) => (0..3).map(|c| gamut(&[c])).collect(),
        (Stage::Transform, true) => vec![(0..3).flat_map(transform).collect()],
        (Stage::Transform, false) => (0..3).map(transform).collect(),
        _ => Vec::new(),
    }
}

/// Direct-mapped misses of each phase repeated `repeats` times in turn,
/// starting cold.
///
/// After one full pass every set the pass touches holds the last line it
/// touched there, whatever it held before, so all later passes of the same
/// phase miss equally: two simulated passes give the whole phase.
pub fn periodic_misses(phases: &[Vec<u64>], cache_lines: u64, repeats: u64) -> u64 {
    if repeats == 0 {
        return 0;
    }
    let mut tags = vec![u64::MAX; cache_lines as usize];
    let mut pass = |trace: &[u64]| {
        let mut misses = 0;
        for &l in trace {
            let set = &mut tags[(l % cache_lines) as usize];
            if *set != l {
                *set = l;
                misses += 1;
            }
        }
        misses
    };
    phases
        .iter()
        .map(|t| {
            let first = pass(t);
            if repeats == 1 {
                first
            } else {
                first + (repeats - 1) * pass(t)
            }
        })
        .sum()
}

/// Closed-form traffic of one variant run on a `geom`-sized problem.
pub fn counters_for_reference(stage: Stage, cfg: &VariantConfig, geom: Geometry) -> PredictedCounters {
    let px = (geom.width * geom.height) as u64;
    let n = geom.points as u64;
    let fused = cfg.fused_rewrite;
    // (pixel loads, read-only accesses, read-only region elements)
    let (pixel_loads, ro_accesses, ro_elems) = match stage {
        // RGGB with even dimensions: a quarter R and B sites reading 9
        // samples, half G sites reading 5
        Stage::Demosaic => (7 * px, 0, 0),
        Stage::Denoise => (27 * px, 0, 0),
        Stage::Transform => (if fused { 3 } else { 9 } * px, 9 * px, 9),
        Stage::Gamut => {
            if fused {
                (3 * px, (6 * n + 12) * px, 6 * n + 12)
            } else {
                (9 * px, 3 * (4 * n + 4) * px, 6 * n + 12)
            }
        }
        Stage::ToneMap => (3 * px, 3 * px, 768),
    };
    let (global_reads, buffer_bytes) = match cfg.readonly_mode {
        ReadonlyMode::None => (pixel_loads + ro_accesses, 0),
        ReadonlyMode::ConstCache => (pixel_loads, 0),
        ReadonlyMode::Buffered => (pixel_loads + ro_elems, ro_elems * 4),
    };
    let cache = if cfg.readonly_mode != ReadonlyMode::ConstCache {
        CachePrediction::NotUsed
    } else {
        let cache_lines = cfg.cache_size_bytes / LINE_BYTES;
        let misses = match stage {
            Stage::Transform | Stage::Gamut => Some(periodic_misses(&readonly_phases(stage, fused, n), cache_lines, px)),
            _ if px == 0 => Some(0),
            // data-dependent LUT indices
            _ => None,
        };
        match misses {
            Some(misses) => CachePrediction::Exact {
                hits: ro_accesses - misses,
                misses,
            },
            None => CachePrediction::TotalOnly {
                accesses: ro_accesses,
            },
        }
    };
    PredictedCounters {
        global_reads,
        global_writes: 3 * px,
        readonly_accesses: ro_accesses,
        buffer_bytes,
        cache,
    }
}
