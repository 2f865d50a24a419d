//! Channel-connected pipeline executor.
//!
//! Every stage runs on its own thread and exchanges pixels through bounded
//! FIFOs in raster order. Demosaic reads the mosaic from memory, denoise
//! keeps a three-row window, the rest are one pixel in, one pixel out.
//! Each stage uses its fused per-pixel form, so the output is bit-identical
//! to [`crate::isp::run_pipeline`] (gamut unrolling aside).
//!
//! Two clocks: `Wall` reports measured times, `Virtual` still runs the
//! threads for the output but reports times from [`sim`], with per-item
//! latencies taken from the performance model at one cycle per nanosecond.

mod queue;
pub mod sim;

use std::thread;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::image::{PlanarImage, RawBayerImage};
use crate::imgio::quantize_u8;
use crate::isp::{demosaic_pixel, Stage};
use crate::params::PipelineParams;
use crate::perfmodel::{descriptor_for, estimate_ii, inner_body_cycles, Geometry, ModelConfig};
use crate::variants::{gamut_pixel_fused, gamut_region, median9_network, UnrollPlan, VariantConfig};
pub use queue::{bounded, Disconnected, TimedReceiver, TimedSender};
use sim::{simulate, SimStage, SimStats, Window};

pub const DEFAULT_CHANNEL_DEPTH: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ClockMode {
    #[default]
    Wall,
    Virtual,
}

impl std::str::FromStr for ClockMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "wall" => Ok(ClockMode::Wall),
            "virtual" => Ok(ClockMode::Virtual),
            _ => Err(format!("unknown clock {s:?} (expected wall or virtual)")),
        }
    }
}

/// Make `stage` fail once it has handled `after_items` items.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Fault {
    pub stage: Stage,
    pub after_items: u64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DataflowConfig {
    pub depth: usize,
    pub clock: ClockMode,
    /// Unroll factor of the gamut stage's point loop.
    pub gamut_unroll: u32,
    pub model: ModelConfig,
    pub fault: Option<Fault>,
}

impl Default for DataflowConfig {
    fn default() -> Self {
        Self {
            depth: DEFAULT_CHANNEL_DEPTH,
            clock: ClockMode::Wall,
            gamut_unroll: 1,
            model: ModelConfig::default(),
            fault: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageStats {
    pub stage: String,
    pub items_processed: u64,
    pub busy_time_s: f64,
    pub blocked_push_time_s: f64,
    pub blocked_pop_time_s: f64,
    /// From pipeline start until the stage finished.
    pub wall_time_s: f64,
}

impl StageStats {
    fn fraction(&self, part: f64) -> f64 {
        if self.wall_time_s > 0.0 {
            part / self.wall_time_s
        } else {
            0.0
        }
    }

    pub fn blocked_push_fraction(&self) -> f64 {
        self.fraction(self.blocked_push_time_s)
    }

    pub fn blocked_pop_fraction(&self) -> f64 {
        self.fraction(self.blocked_pop_time_s)
    }

    pub fn busy_fraction(&self) -> f64 {
        self.fraction(self.busy_time_s)
    }

    fn from_sim(stage: String, s: &SimStats) -> Self {
        let secs = |ns: u64| ns as f64 * 1e-9;
        Self {
            stage,
            items_processed: s.items,
            busy_time_s: secs(s.busy_ns),
            blocked_push_time_s: secs(s.blocked_push_ns),
            blocked_pop_time_s: secs(s.blocked_pop_ns),
            wall_time_s: secs(s.end_ns),
        }
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum DataflowError {
    #[error("stage {stage} failed: {reason}")]
    StageFailed { stage: String, reason: String },
    #[error("invalid dataflow configuration: {0}")]
    Config(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct DataflowRun {
    pub output: PlanarImage,
    pub stats: Vec<StageStats>,
    pub makespan_s: f64,
    pub clock: ClockMode,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticRun {
    pub stats: Vec<StageStats>,
    pub makespan_s: f64,
}

enum Failure {
    Fault(String),
    Closed,
}

impl From<Disconnected> for Failure {
    fn from(_: Disconnected) -> Self {
        Failure::Closed
    }
}

/// Per-thread bookkeeping.
struct Meter {
    name: String,
    start: Instant,
    busy: Duration,
    items: u64,
    fault_after: Option<u64>,
}

impl Meter {
    fn new(name: impl Into<String>, start: Instant, fault_after: Option<u64>) -> Self {
        Self {
            name: name.into(),
            start,
            busy: Duration::ZERO,
            items: 0,
            fault_after,
        }
    }

    fn check_fault(&self) -> Result<(), Failure> {
        match self.fault_after {
            Some(n) if self.items == n => Err(Failure::Fault(format!("injected fault after {n} items"))),
            _ => Ok(()),
        }
    }

    fn timed<T>(&mut self, f: impl FnOnce() -> T) -> T {
        let t0 = Instant::now();
        let out = f();
        self.busy += t0.elapsed();
        out
    }

    fn finish<T, U>(self, rx: Option<&TimedReceiver<T>>, tx: Option<&TimedSender<U>>) -> StageStats {
        StageStats {
            stage: self.name,
            items_processed: self.items,
            busy_time_s: self.busy.as_secs_f64(),
            blocked_push_time_s: tx.map_or(0.0, |t| t.blocked().as_secs_f64()),
            blocked_pop_time_s: rx.map_or(0.0, |r| r.blocked().as_secs_f64()),
            wall_time_s: self.start.elapsed().as_secs_f64(),
        }
    }
}

type Px = [f32; 3];

fn demosaic_stage(raw: &RawBayerImage, mut tx: TimedSender<Px>, mut m: Meter) -> Result<StageStats, Failure> {
    for y in 0..raw.height() {
        for x in 0..raw.width() {
            m.check_fault()?;
            let px = m.timed(|| demosaic_pixel(raw, y, x));
            tx.push(px)?;
            m.items += 1;
        }
    }
    Ok(m.finish::<Px, Px>(None, Some(&tx)))
}

/// Buffers three rows and emits row `y - 1` once row `y` is in; the last
/// row goes out after the input ends.
fn denoise_stage(
    w: usize,
    h: usize,
    mut rx: TimedReceiver<Px>,
    mut tx: TimedSender<Px>,
    mut m: Meter,
) -> Result<StageStats, Failure> {
    let mut rows = vec![vec![[0.0f32; 3]; w]; 3];
    let emit = |row: usize, rows: &[Vec<Px>], tx: &mut TimedSender<Px>, m: &mut Meter| -> Result<(), Failure> {
        let above = &rows[row.saturating_sub(1) % 3];
        let here = &rows[row % 3];
        let below = &rows[(row + 1).min(h - 1) % 3];
        for x in 0..w {
            m.check_fault()?;
            let px = m.timed(|| {
                let (l, r) = (x.saturating_sub(1), (x + 1).min(w - 1));
                [0, 1, 2].map(|c| {
                    median9_network([
                        above[l][c],
                        above[x][c],
                        above[r][c],
                        here[l][c],
                        here[x][c],
                        here[r][c],
                        below[l][c],
                        below[x][c],
                        below[r][c],
                    ])
                })
            });
            tx.push(px)?;
            m.items += 1;
        }
        Ok(())
    };
    for y in 0..h {
        for x in 0..w {
            rows[y % 3][x] = rx.pop()?;
        }
        if y >= 1 {
            emit(y - 1, &rows, &mut tx, &mut m)?;
        }
    }
    emit(h - 1, &rows, &mut tx, &mut m)?;
    Ok(m.finish(Some(&rx), Some(&tx)))
}

/// One pixel in, one pixel out; the sink (no `tx`) collects into `sink`.
fn map_stage(
    n: usize,
    mut rx: TimedReceiver<Px>,
    mut tx: Option<TimedSender<Px>>,
    sink: &mut Vec<Px>,
    mut m: Meter,
    mut f: impl FnMut(Px) -> Px,
) -> Result<StageStats, Failure> {
    for _ in 0..n {
        let px = rx.pop()?;
        m.check_fault()?;
        let out = m.timed(|| f(px));
        match tx.as_mut() {
            Some(tx) => tx.push(out)?,
            None => sink.push(out),
        }
        m.items += 1;
    }
    Ok(m.finish(Some(&rx), tx.as_ref()))
}

/// Per-item service time of each stage in the virtual clock.
pub fn virtual_latencies_ns(points: usize, gamut_unroll: u32, model: &ModelConfig) -> [u64; 5] {
    let geom = Geometry {
        width: 1,
        height: 1,
        points,
    };
    Stage::ALL.map(|stage| {
        let cfg = VariantConfig {
            restrict_flag: true,
            ivdep_flag: true,
            fused_rewrite: stage != Stage::Demosaic,
            unroll_factor: if stage == Stage::Gamut { gamut_unroll } else { 1 },
            ..VariantConfig::BASE
        };
        let d = descriptor_for(stage, &cfg, geom, model);
        if d.inner_trip > 0 {
            inner_body_cycles(&d)
        } else {
            estimate_ii(&d)
        }
    })
}

/// Joins stage threads and reduces their outcomes to one error naming the
/// stage that actually failed.
fn collect(
    results: Vec<(String, thread::Result<Result<StageStats, Failure>>)>,
) -> Result<Vec<StageStats>, DataflowError> {
    let mut stats = Vec::with_capacity(results.len());
    let mut closed = None;
    for (name, r) in results {
        match r {
            Ok(Ok(s)) => stats.push(s),
            Ok(Err(Failure::Fault(reason))) => return Err(DataflowError::StageFailed { stage: name, reason }),
            Err(_) => {
                return Err(DataflowError::StageFailed {
                    stage: name,
                    reason: "worker panicked".into(),
                })
            }
            Ok(Err(Failure::Closed)) => {
                closed.get_or_insert(name);
            }
        }
    }
    match closed {
        Some(stage) => Err(DataflowError::StageFailed {
            stage,
            reason: "neighboring queue closed early".into(),
        }),
        None => Ok(stats),
    }
}

pub fn run_pipeline_dataflow(
    raw: &RawBayerImage,
    params: &PipelineParams,
    cfg: &DataflowConfig,
) -> Result<DataflowRun, DataflowError> {
    if cfg.depth == 0 {
        return Err(DataflowError::Config("channel depth must be at least 1".into()));
    }
    if cfg.gamut_unroll == 0 {
        return Err(DataflowError::Config("gamut unroll must be at least 1".into()));
    }
    let (w, h) = (raw.width(), raw.height());
    let n = w * h;
    let matrix = params.transform.0;
    let region = gamut_region(params);
    let plan = UnrollPlan::new(params.gamut.points(), cfg.gamut_unroll as usize);
    let lut = params.tone.rows();
    let fault_for = |s: Stage| cfg.fault.filter(|f| f.stage == s).map(|f| f.after_items);
    let start = Instant::now();
    let meter = |s: Stage| Meter::new(s.name(), start, fault_for(s));

    let mut sink = Vec::with_capacity(n);
    let results = thread::scope(|scope| {
        let (tx0, rx0) = bounded(cfg.depth);
        let (tx1, rx1) = bounded(cfg.depth);
        let (tx2, rx2) = bounded(cfg.depth);
        let (tx3, rx3) = bounded(cfg.depth);
        let handles = [
            scope.spawn(|| demosaic_stage(raw, tx0, meter(Stage::Demosaic))),
            scope.spawn(|| denoise_stage(w, h, rx0, tx1, meter(Stage::Denoise))),
            scope.spawn(|| {
                let m = &matrix;
                map_stage(n, rx1, Some(tx2), &mut Vec::new(), meter(Stage::Transform), |[r, g, b]| {
                    [0, 1, 2].map(|c| m[c][0] * r + m[c][1] * g + m[c][2] * b)
                })
            }),
            scope.spawn(|| {
                let mut partial = vec![[0.0f32; 3]; plan.factor];
                map_stage(n, rx2, Some(tx3), &mut Vec::new(), meter(Stage::Gamut), |p| {
                    gamut_pixel_fused(p, &region, plan, &mut partial)
                })
            }),
            scope.spawn(|| {
                map_stage(n, rx3, None, &mut sink, meter(Stage::ToneMap), |px| {
                    [0, 1, 2].map(|c| lut[quantize_u8(px[c]) as usize][c])
                })
            }),
        ];
        Stage::ALL
            .iter()
            .zip(handles)
            .map(|(s, h)| (s.name().to_string(), h.join()))
            .collect::<Vec<_>>()
    });
    let mut stats = collect(results)?;
    let output = PlanarImage::from_pixels(w, h, &sink).expect("sink collected every pixel");

    if cfg.clock == ClockMode::Virtual {
        let lat = virtual_latencies_ns(params.gamut.points(), cfg.gamut_unroll, &cfg.model);
        let stages: Vec<SimStage> = Stage::ALL
            .iter()
            .map(|&s| SimStage {
                latency_ns: lat[s.index()],
                window: if s == Stage::Denoise {
                    Window::Rows3 { width: w as u64 }
                } else {
                    Window::OneToOne
                },
            })
            .collect();
        let sim = simulate(&stages, n as u64, cfg.depth);
        stats = Stage::ALL
            .iter()
            .zip(&sim)
            .map(|(s, r)| StageStats::from_sim(s.name().to_string(), r))
            .collect();
    }
    let makespan_s = stats.iter().map(|s| s.wall_time_s).fold(0.0, f64::max);
    Ok(DataflowRun {
        output,
        stats,
        makespan_s,
        clock: cfg.clock,
    })
}

fn spin_for(d: Duration) {
    let t0 = Instant::now();
    while t0.elapsed() < d {
        std::hint::spin_loop();
    }
}

/// A chain of stages that each spend a fixed latency per item. Stage `i`
/// is named `s{i}`.
pub fn run_synthetic_stages(
    latencies: &[Duration],
    items: u64,
    depth: usize,
    clock: ClockMode,
) -> Result<SyntheticRun, DataflowError> {
    if depth == 0 {
        return Err(DataflowError::Config("channel depth must be at least 1".into()));
    }
    if latencies.is_empty() {
        return Err(DataflowError::Config("need at least one stage".into()));
    }
    let stats = match clock {
        ClockMode::Virtual => {
            let stages: Vec<SimStage> = latencies
                .iter()
                .map(|d| SimStage::new(d.as_nanos() as u64))
                .collect();
            simulate(&stages, items, depth)
                .iter()
                .enumerate()
                .map(|(i, s)| StageStats::from_sim(format!("s{i}"), s))
                .collect()
        }
        ClockMode::Wall => run_spinning(latencies, items, depth)?,
    };
    let makespan_s = stats.iter().map(|s| s.wall_time_s).fold(0.0, f64::max);
    Ok(SyntheticRun { stats, makespan_s })
}

fn run_spinning(latencies: &[Duration], items: u64, depth: usize) -> Result<Vec<StageStats>, DataflowError> {
    let k = latencies.len();
    let mut senders: Vec<Option<TimedSender<u64>>> = Vec::with_capacity(k);
    let mut receivers: Vec<Option<TimedReceiver<u64>>> = vec![None];
    for _ in 1..k {
        let (tx, rx) = bounded(depth);
        senders.push(Some(tx));
        receivers.push(Some(rx));
    }
    senders.push(None);
    let start = Instant::now();
    let results = thread::scope(|scope| {
        let handles: Vec<_> = latencies
            .iter()
            .zip(senders.into_iter().zip(receivers))
            .enumerate()
            .map(|(i, (&lat, (mut tx, mut rx)))| {
                scope.spawn(move || -> Result<StageStats, Failure> {
                    let mut m = Meter::new(format!("s{i}"), start, None);
                    for item in 0..items {
                        let v = match rx.as_mut() {
                            Some(rx) => rx.pop()?,
                            None => item,
                        };
                        m.timed(|| spin_for(lat));
                        if let Some(tx) = tx.as_mut() {
                            tx.push(v)?;
                        }
                        m.items += 1;
                    }
                    Ok(m.finish(rx.as_ref(), tx.as_ref()))
                })
            })
            .collect();
        handles
            .into_iter()
            .enumerate()
            .map(|(i, h)| (format!("s{i}"), h.join()))
            .collect::<Vec<_>>()
    });
    collect(results)
}
