//! Benchmark report and its text, CSV and JSON renderings.
//!
//! CSV columns, in order: `stage, variant, status, max_rel_dev, mean_s,
//! min_s, speedup, global_reads, global_writes, readonly_accesses,
//! cache_hits, cache_misses, hit_rate, buffer_bytes, counters_source,
//! counters_match, ii, est_cycles, resource_units, fits`. The reference
//! kernel of each stage is a row with variant `REF` and no counters.

use std::fmt::Write as _;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::dataflow::{ClockMode, StageStats};
use crate::isp::Stage;
use crate::perfmodel::{KernelDescriptor, PipelineEstimate};
use crate::variants::{AccessCounters, VariantConfig};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    #[default]
    Sequential,
    Dataflow,
}

impl FromStr for Mode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "sequential" => Ok(Mode::Sequential),
            "dataflow" => Ok(Mode::Dataflow),
            _ => Err(format!("unknown mode {s:?} (expected sequential or dataflow)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Format {
    #[default]
    Text,
    Csv,
    Json,
}

impl FromStr for Format {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "text" => Ok(Format::Text),
            "csv" => Ok(Format::Csv),
            "json" => Ok(Format::Json),
            _ => Err(format!("unknown format {s:?} (expected text, csv or json)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Status {
    #[serde(rename = "PASS")]
    Pass,
    #[serde(rename = "FAILED")]
    Failed,
}

impl Status {
    pub fn as_str(self) -> &'static str {
        match self {
            Status::Pass => "PASS",
            Status::Failed => "FAILED",
        }
    }
}

/// Where a row's counters come from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CountersSource {
    Instrumented,
    /// The instrumented run would exceed the access budget; the counters
    /// are the closed-form prediction.
    ClosedForm,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Timing {
    pub mean_s: f64,
    pub min_s: f64,
}

impl Timing {
    pub fn from_samples(samples: &[f64]) -> Self {
        let mean_s = samples.iter().sum::<f64>() / samples.len() as f64;
        let min_s = samples.iter().copied().fold(f64::INFINITY, f64::min);
        Self { mean_s, min_s }
    }

    pub fn fixed(s: f64) -> Self {
        Self { mean_s: s, min_s: s }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunMeta {
    pub source: String,
    pub width: usize,
    pub height: usize,
    pub points: usize,
    /// Seed of a synthetic noise image.
    pub image_seed: Option<u64>,
    pub repetitions: u32,
    pub selection: String,
    pub mode: Mode,
    pub clock: ClockMode,
    pub channel_depth: usize,
    /// Whether reference kernels ran row-parallel.
    pub parallel_reference: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VariantRow {
    pub variant: String,
    pub config: VariantConfig,
    pub status: Status,
    /// `None` when the deviation is not finite (a NaN on one side).
    pub max_rel_dev: Option<f64>,
    /// Absent for variants that failed equivalence.
    pub timing: Option<Timing>,
    pub speedup: Option<f64>,
    pub counters: AccessCounters,
    pub counters_source: CountersSource,
    /// Whether instrumented counters equal the closed-form prediction.
    pub counters_match: Option<bool>,
    pub estimate: PipelineEstimate,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageReport {
    pub stage: Stage,
    pub reference: Timing,
    pub rows: Vec<VariantRow>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StageShare {
    pub stage: Stage,
    pub time_s: f64,
    pub share: f64,
}

/// A variant applied to every stage at once.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineTotal {
    pub variant: String,
    pub status: Status,
    pub mean_s: Option<f64>,
    pub speedup: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DataflowRow {
    pub variant: String,
    pub gamut_unroll: u32,
    /// Bit-exact against the sequential fused pipeline.
    pub status: Status,
    pub makespan_s: f64,
    pub stats: Vec<StageStats>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineReport {
    pub reference_s: f64,
    pub shares: Vec<StageShare>,
    pub totals: Vec<PipelineTotal>,
    pub dataflow: Vec<DataflowRow>,
}

/// Model view of one candidate, listed in rank order per stage.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimizationEntry {
    pub stage: Stage,
    pub rank: usize,
    pub variant: String,
    pub descriptor: KernelDescriptor,
    pub estimate: PipelineEstimate,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchReport {
    pub schema_version: u32,
    /// Results are comparable with the original FPGA figures only in
    /// their qualitative shape.
    pub paper_comparison: String,
    /// Unix seconds.
    pub timestamp: u64,
    pub run: RunMeta,
    pub stages: Vec<StageReport>,
    pub pipeline: Option<PipelineReport>,
    pub optimization_report: Vec<OptimizationEntry>,
}

impl BenchReport {
    /// Whether every variant, and every dataflow run, passed equivalence.
    pub fn all_passed(&self) -> bool {
        self.stages.iter().flat_map(|s| &s.rows).all(|r| r.status == Status::Pass)
            && self
                .pipeline
                .iter()
                .flat_map(|p| &p.dataflow)
                .all(|d| d.status == Status::Pass)
    }
}

#[derive(Debug, Serialize, Deserialize, PartialEq)]
pub struct CsvRow {
    pub stage: String,
    pub variant: String,
    pub status: String,
    pub max_rel_dev: Option<f64>,
    pub mean_s: Option<f64>,
    pub min_s: Option<f64>,
    pub speedup: Option<f64>,
    pub global_reads: Option<u64>,
    pub global_writes: Option<u64>,
    pub readonly_accesses: Option<u64>,
    pub cache_hits: Option<u64>,
    pub cache_misses: Option<u64>,
    pub hit_rate: Option<f64>,
    pub buffer_bytes: Option<u64>,
    pub counters_source: Option<CountersSource>,
    pub counters_match: Option<bool>,
    pub ii: Option<u64>,
    pub est_cycles: Option<u64>,
    pub resource_units: Option<f64>,
    pub fits: Option<bool>,
}

pub fn csv_rows(r: &BenchReport) -> Vec<CsvRow> {
    let mut rows = Vec::new();
    for s in &r.stages {
        rows.push(CsvRow {
            stage: s.stage.name().into(),
            variant: "REF".into(),
            status: Status::Pass.as_str().into(),
            max_rel_dev: Some(0.0),
            mean_s: Some(s.reference.mean_s),
            min_s: Some(s.reference.min_s),
            speedup: Some(1.0),
            global_reads: None,
            global_writes: None,
            readonly_accesses: None,
            cache_hits: None,
            cache_misses: None,
            hit_rate: None,
            buffer_bytes: None,
            counters_source: None,
            counters_match: None,
            ii: None,
            est_cycles: None,
            resource_units: None,
            fits: None,
        });
        for v in &s.rows {
            let c = &v.counters;
            rows.push(CsvRow {
                stage: s.stage.name().into(),
                variant: v.variant.clone(),
                status: v.status.as_str().into(),
                max_rel_dev: v.max_rel_dev,
                mean_s: v.timing.map(|t| t.mean_s),
                min_s: v.timing.map(|t| t.min_s),
                speedup: v.speedup,
                global_reads: Some(c.global_reads),
                global_writes: Some(c.global_writes),
                readonly_accesses: Some(c.readonly_accesses),
                cache_hits: Some(c.cache_hits),
                cache_misses: Some(c.cache_misses),
                hit_rate: Some(c.hit_rate()),
                buffer_bytes: Some(c.buffer_bytes),
                counters_source: Some(v.counters_source),
                counters_match: v.counters_match,
                ii: Some(v.estimate.ii),
                est_cycles: Some(v.estimate.total_cycles),
                resource_units: Some(v.estimate.resource_units),
                fits: Some(v.estimate.fits),
            });
        }
    }
    rows
}

pub fn emit_report(r: &BenchReport, format: Format) -> Vec<u8> {
    match format {
        Format::Json => {
            let mut out = serde_json::to_vec_pretty(r).expect("report serializes");
            out.push(b'\n');
            out
        }
        Format::Csv => {
            let mut w = csv::Writer::from_writer(Vec::new());
            for row in csv_rows(r) {
                w.serialize(row).expect("csv row serializes");
            }
            w.into_inner().expect("in-memory writer")
        }
        Format::Text => render_text(r).into_bytes(),
    }
}

fn opt<T: std::fmt::Display>(v: Option<T>) -> String {
    v.map_or_else(|| "-".into(), |v| v.to_string())
}

fn secs(v: f64) -> String {
    if v >= 1.0 {
        format!("{v:.3} s")
    } else if v >= 1e-3 {
        format!("{:.3} ms", v * 1e3)
    } else {
        format!("{:.3} us", v * 1e6)
    }
}

fn render_text(r: &BenchReport) -> String {
    let m = &r.run;
    let mut s = String::new();
    let _ = writeln!(
        s,
        "ispbench  {}  {}x{}  N={}  reps={}  mode={:?}  clock={:?}",
        m.source, m.width, m.height, m.points, m.repetitions, m.mode, m.clock
    );
    for st in &r.stages {
        let _ = writeln!(s, "\n[{}]  reference mean {}  min {}", st.stage, secs(st.reference.mean_s), secs(st.reference.min_s));
        let _ = writeln!(
            s,
            "  {:<14} {:<7} {:>10} {:>12} {:>12} {:>9} {:>14} {:>14} {:>9} {:>6} {:>14}",
            "variant", "status", "max_dev", "mean", "min", "speedup", "global_reads", "global_writes", "hit_rate", "II", "est_cycles"
        );
        for v in &st.rows {
            let _ = writeln!(
                s,
                "  {:<14} {:<7} {:>10} {:>12} {:>12} {:>9} {:>14} {:>14} {:>9} {:>6} {:>14}",
                v.variant,
                v.status.as_str(),
                v.max_rel_dev.map_or_else(|| "inf".into(), |d| format!("{d:.2e}")),
                v.timing.map_or_else(|| "-".into(), |t| secs(t.mean_s)),
                v.timing.map_or_else(|| "-".into(), |t| secs(t.min_s)),
                opt(v.speedup.map(|x| format!("{x:.2}x"))),
                v.counters.global_reads,
                v.counters.global_writes,
                format!("{:.4}", v.counters.hit_rate()),
                v.estimate.ii,
                v.estimate.total_cycles,
            );
        }
    }
    if let Some(p) = &r.pipeline {
        let _ = writeln!(s, "\n[profile]  reference pipeline {}", secs(p.reference_s));
        for sh in &p.shares {
            let _ = writeln!(s, "  {:<10} {:>12} {:>8.2}%", sh.stage.name(), secs(sh.time_s), sh.share * 100.0);
        }
        let _ = writeln!(s, "\n[pipeline speedups]");
        for t in &p.totals {
            let _ = writeln!(
                s,
                "  {:<14} {:<7} {:>12} {:>9}",
                t.variant,
                t.status.as_str(),
                opt(t.mean_s.map(secs)),
                opt(t.speedup.map(|x| format!("{x:.2}x")))
            );
        }
        for d in &p.dataflow {
            let _ = writeln!(
                s,
                "\n[dataflow {}]  {}  makespan {}",
                d.variant,
                d.status.as_str(),
                secs(d.makespan_s)
            );
            let _ = writeln!(
                s,
                "  {:<10} {:>10} {:>12} {:>12} {:>12} {:>12}",
                "stage", "items", "busy", "blocked_push", "blocked_pop", "wall"
            );
            for st in &d.stats {
                let _ = writeln!(
                    s,
                    "  {:<10} {:>10} {:>12} {:>12} {:>12} {:>12}",
                    st.stage,
                    st.items_processed,
                    secs(st.busy_time_s),
                    secs(st.blocked_push_time_s),
                    secs(st.blocked_pop_time_s),
                    secs(st.wall_time_s)
                );
            }
        }
    }
    if !r.optimization_report.is_empty() {
        let _ = writeln!(s, "\n[optimization report]");
        let _ = writeln!(
            s,
            "  {:<10} {:>4} {:<14} {:>4} {:>14} {:>10} {:>5}",
            "stage", "rank", "variant", "II", "est_cycles", "resources", "fits"
        );
        for o in &r.optimization_report {
            let _ = writeln!(
                s,
                "  {:<10} {:>4} {:<14} {:>4} {:>14} {:>10.1} {:>5}",
                o.stage.name(),
                o.rank,
                o.variant,
                o.estimate.ii,
                o.estimate.total_cycles,
                o.estimate.resource_units,
                o.estimate.fits
            );
        }
    }
    s
}
