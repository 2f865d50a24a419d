//! Benchmark harness: runs the variant matrix, gates every variant on
//! equivalence with the reference, times what passed, and assembles a
//! [`BenchReport`].
//!
//! With [`ClockMode::Virtual`] every reported time comes from the
//! performance model (one cycle per nanosecond) or the dataflow simulator,
//! so reports are reproducible byte for byte apart from the timestamp.

mod report;

use std::path::PathBuf;
use std::str::FromStr;
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use thiserror::Error;

pub use report::*;

use crate::dataflow::{run_pipeline_dataflow, ClockMode, DataflowConfig, DataflowError, DEFAULT_CHANNEL_DEPTH};
use crate::exec::Exec;
use crate::image::{ImageError, PlanarImage, RawBayerImage};
use crate::imgio::{self, ImgIoError, RawImage, RawPlanes};
use crate::isp::{self, run_pipeline_timed, stage_outputs, Stage};
use crate::params::{GamutParams, ParamsError, ParamsFile, PipelineParams, DEFAULT_SEED};
use crate::perfmodel::{descriptor_for, estimate, rank_variants, Geometry, ModelConfig};
use crate::synth::{mosaic_rgb, SynthKind, SynthSpec};
use crate::variants::{
    self, counters_for_reference, equivalent, max_relative_deviation, run_fused_pipeline, run_variant,
    run_variant_fast, CachePrediction, ReadonlyMode, StageInput, VariantConfig, VariantError, DEFAULT_CACHE_BYTES,
};

/// Seconds per model cycle under the virtual clock.
pub const VIRTUAL_SECONDS_PER_CYCLE: f64 = 1e-9;

/// Instrumented runs whose predicted read-only accesses exceed this fall
/// back to closed-form counters.
pub const DEFAULT_INSTRUMENT_BUDGET: u64 = 200_000_000;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error(transparent)]
    Image(#[from] ImgIoError),
    #[error(transparent)]
    Dims(#[from] ImageError),
    #[error(transparent)]
    Params(#[from] ParamsError),
    #[error(transparent)]
    Variant(#[from] VariantError),
    #[error(transparent)]
    Dataflow(#[from] DataflowError),
    #[error("{0}")]
    Config(String),
}

#[derive(Debug, Clone, PartialEq)]
pub enum ImageSource {
    Synth(SynthSpec),
    /// An 8-bit P6 file, sampled at its RGGB sites.
    Ppm(PathBuf),
    /// A raw planar file: one plane is a mosaic, three planes are sampled
    /// at their RGGB sites.
    Raw { path: PathBuf, width: usize, height: usize },
}

impl ImageSource {
    pub fn load(&self) -> Result<RawBayerImage, HarnessError> {
        Ok(match self {
            ImageSource::Synth(spec) => spec.generate()?,
            ImageSource::Ppm(path) => mosaic_rgb(&imgio::load_ppm(path)?)?,
            ImageSource::Raw { path, width, height } => {
                let bytes = std::fs::read(path).map_err(|e| ImgIoError::io(path, e))?;
                let planes = if bytes.len() == 12 * width * height {
                    RawPlanes::Rgb
                } else {
                    RawPlanes::Bayer
                };
                match imgio::decode_raw_planar(&bytes, *width, *height, planes)? {
                    RawImage::Bayer(raw) => raw,
                    RawImage::Rgb(rgb) => mosaic_rgb(&rgb)?,
                }
            }
        })
    }

    fn describe(&self) -> String {
        match self {
            ImageSource::Synth(spec) => format!("synth:{spec}"),
            ImageSource::Ppm(p) | ImageSource::Raw { path: p, .. } => p.display().to_string(),
        }
    }

    fn seed(&self) -> Option<u64> {
        match self {
            ImageSource::Synth(SynthSpec {
                kind: SynthKind::SeededNoise(seed),
                ..
            }) => Some(*seed),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Selection {
    Stage(Stage),
    Pipeline,
}

impl Selection {
    fn stages(self) -> Vec<Stage> {
        match self {
            Selection::Stage(s) => vec![s],
            Selection::Pipeline => Stage::ALL.to_vec(),
        }
    }

    fn name(self) -> &'static str {
        match self {
            Selection::Stage(s) => s.name(),
            Selection::Pipeline => "pipeline",
        }
    }
}

impl FromStr for Selection {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s == "pipeline" {
            Ok(Selection::Pipeline)
        } else {
            s.parse().map(Selection::Stage)
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct HarnessConfig {
    pub source: ImageSource,
    pub params_path: Option<PathBuf>,
    /// Gamut control points when no parameter file is given.
    pub points: Option<usize>,
    pub selection: Selection,
    /// Empty means [`default_variants`].
    pub variants: Vec<VariantConfig>,
    pub reps: u32,
    pub mode: Mode,
    pub clock: ClockMode,
    pub channel_depth: usize,
    /// Applied to constant-cache variants that kept the default size.
    pub cache_size: Option<u64>,
    pub exec: Exec,
    pub instrument_budget: u64,
    /// Test hook: flip one output bit of the variant with this label.
    pub corrupt_variant: Option<String>,
}

impl Default for HarnessConfig {
    fn default() -> Self {
        Self {
            source: ImageSource::Synth(SynthSpec::default()),
            params_path: None,
            points: None,
            selection: Selection::Pipeline,
            variants: Vec::new(),
            reps: 10,
            mode: Mode::Sequential,
            clock: ClockMode::Wall,
            channel_depth: DEFAULT_CHANNEL_DEPTH,
            cache_size: None,
            exec: Exec::default(),
            instrument_budget: DEFAULT_INSTRUMENT_BUDGET,
            corrupt_variant: None,
        }
    }
}

/// `RI, RIW, RIWC, RIWB`, plus `RIWB+U6` where unrolling applies, keeping
/// those valid for the selection.
pub fn default_variants(selection: Selection) -> Vec<VariantConfig> {
    let mut labels = vec!["RI", "RIW", "RIWC", "RIWB"];
    if matches!(selection, Selection::Pipeline | Selection::Stage(Stage::Gamut)) {
        labels.push("RIWB+U6");
    }
    labels
        .into_iter()
        .map(|l| l.parse::<VariantConfig>().expect("built-in label"))
        .filter(|c| match selection {
            Selection::Stage(s) => c.validate_for(s).is_ok(),
            Selection::Pipeline => true,
        })
        .collect()
}

/// Reference-pipeline time shares per stage, in stage order.
pub fn profile_breakdown(raw: &RawBayerImage, params: &PipelineParams, exec: Exec) -> Vec<StageShare> {
    let (_, times) = run_pipeline_timed(raw, params, exec);
    let shares = times.shares();
    Stage::ALL
        .iter()
        .map(|&stage| StageShare {
            stage,
            time_s: times.get(stage).as_secs_f64(),
            share: shares[stage.index()],
        })
        .collect()
}

fn load_params(cfg: &HarnessConfig) -> Result<(PipelineParams, ModelConfig), HarnessError> {
    match (&cfg.params_path, cfg.points) {
        (Some(_), Some(_)) => Err(HarnessError::Config(
            "--points only applies to the built-in parameters; set the size in the parameter file".into(),
        )),
        (Some(path), None) => {
            let f = ParamsFile::load(path)?;
            Ok((f.params, f.model))
        }
        (None, points) => {
            let mut p = PipelineParams::default();
            if let Some(n) = points {
                if n == 0 {
                    return Err(HarnessError::Config("--points must be at least 1".into()));
                }
                p.gamut = GamutParams::seeded_zero_weights(n, DEFAULT_SEED);
            }
            Ok((p, ModelConfig::default()))
        }
    }
}

fn reference_kernel(stage: Stage, input: StageInput<'_>, p: &PipelineParams, exec: Exec) -> PlanarImage {
    match (stage, input) {
        (Stage::Demosaic, StageInput::Raw(raw)) => isp::demosaic_with(raw, exec),
        (Stage::Denoise, StageInput::Image(img)) => isp::denoise_with(img, exec),
        (Stage::Transform, StageInput::Image(img)) => isp::transform_with(img, &p.transform, exec),
        (Stage::Gamut, StageInput::Image(img)) => isp::gamut_map_with(img, &p.gamut, exec),
        (Stage::ToneMap, StageInput::Image(img)) => isp::tone_map_with(img, &p.tone, exec),
        _ => unreachable!("stage input kind is fixed by the stage"),
    }
}

fn time_reps(reps: u32, mut f: impl FnMut()) -> Timing {
    let samples: Vec<f64> = (0..reps)
        .map(|_| {
            let t0 = Instant::now();
            f();
            t0.elapsed().as_secs_f64()
        })
        .collect();
    Timing::from_samples(&samples)
}

fn flip_first_bit(img: &mut PlanarImage) {
    if let Some(v) = img.as_mut_slice().first_mut() {
        *v = f32::from_bits(v.to_bits() ^ 1);
    }
}

/// Counters from the prediction, when it pins down every field.
fn closed_form_counters(pred: &variants::PredictedCounters) -> Option<variants::AccessCounters> {
    let (cache_hits, cache_misses) = match pred.cache {
        CachePrediction::NotUsed => (0, 0),
        CachePrediction::Exact { hits, misses } => (hits, misses),
        CachePrediction::TotalOnly { .. } => return None,
    };
    Some(variants::AccessCounters {
        global_reads: pred.global_reads,
        global_writes: pred.global_writes,
        readonly_accesses: pred.readonly_accesses,
        cache_hits,
        cache_misses,
        buffer_bytes: pred.buffer_bytes,
        wall_time_s: 0.0,
    })
}

struct StageRun<'a> {
    cfg: &'a HarnessConfig,
    params: &'a PipelineParams,
    model: &'a ModelConfig,
    geom: Geometry,
}

impl StageRun<'_> {
    fn model_seconds(&self, stage: Stage, v: &VariantConfig) -> f64 {
        let d = descriptor_for(stage, v, self.geom, self.model);
        estimate(&d, &self.model.costs).total_cycles as f64 * VIRTUAL_SECONDS_PER_CYCLE
    }

    fn run(&self, stage: Stage, input: StageInput<'_>, reference: &PlanarImage, variants: &[VariantConfig]) -> StageReport {
        let virtual_clock = self.cfg.clock == ClockMode::Virtual;
        let ref_timing = if virtual_clock {
            Timing::fixed(self.model_seconds(stage, &VariantConfig::BASE))
        } else {
            time_reps(self.cfg.reps, || {
                std::hint::black_box(reference_kernel(stage, input, self.params, self.cfg.exec));
            })
        };
        let rows = variants
            .iter()
            .map(|v| self.row(stage, v, input, reference, ref_timing))
            .collect();
        StageReport {
            stage,
            reference: ref_timing,
            rows,
        }
    }

    fn row(
        &self,
        stage: Stage,
        v: &VariantConfig,
        input: StageInput<'_>,
        reference: &PlanarImage,
        ref_timing: Timing,
    ) -> VariantRow {
        let pred = counters_for_reference(stage, v, self.geom);
        let closed = (pred.readonly_accesses > self.cfg.instrument_budget)
            .then(|| closed_form_counters(&pred))
            .flatten();
        let (mut out, mut counters, source) = match closed {
            Some(c) => {
                let t0 = Instant::now();
                let out = run_variant_fast(stage, v, input, self.params).expect("validated");
                let c = variants::AccessCounters {
                    wall_time_s: t0.elapsed().as_secs_f64(),
                    ..c
                };
                (out, c, CountersSource::ClosedForm)
            }
            None => {
                let (out, c) = run_variant(stage, v, input, self.params).expect("validated");
                (out, c, CountersSource::Instrumented)
            }
        };
        let label = v.label();
        if self.cfg.corrupt_variant.as_deref() == Some(label.as_str()) {
            flip_first_bit(&mut out);
        }
        let pass = equivalent(stage, v, &out, reference);
        let dev = max_relative_deviation(&out, reference);
        drop(out);
        let model_time = self.model_seconds(stage, v);
        if self.cfg.clock == ClockMode::Virtual {
            counters.wall_time_s = model_time;
        }
        let timing = pass.then(|| {
            if self.cfg.clock == ClockMode::Virtual {
                Timing::fixed(model_time)
            } else {
                time_reps(self.cfg.reps, || {
                    std::hint::black_box(run_variant_fast(stage, v, input, self.params).expect("validated"));
                })
            }
        });
        VariantRow {
            variant: label,
            config: *v,
            status: if pass { Status::Pass } else { Status::Failed },
            max_rel_dev: dev.is_finite().then_some(dev),
            timing,
            speedup: timing.map(|t| ref_timing.mean_s / t.mean_s),
            counters,
            counters_source: source,
            counters_match: (source == CountersSource::Instrumented).then(|| pred.matches(&counters)),
            estimate: estimate(&descriptor_for(stage, v, self.geom, self.model), &self.model.costs),
        }
    }
}

fn resolve_variants(cfg: &HarnessConfig) -> Result<Vec<VariantConfig>, HarnessError> {
    let mut list = if cfg.variants.is_empty() {
        default_variants(cfg.selection)
    } else {
        cfg.variants.clone()
    };
    if let Some(size) = cfg.cache_size {
        for v in &mut list {
            if v.readonly_mode == ReadonlyMode::ConstCache && v.cache_size_bytes == DEFAULT_CACHE_BYTES {
                v.cache_size_bytes = size;
            }
        }
    }
    for v in &list {
        let stages = match cfg.selection {
            Selection::Stage(s) => vec![s],
            Selection::Pipeline => Stage::ALL.to_vec(),
        };
        for s in stages {
            let check = match cfg.selection {
                Selection::Stage(_) => *v,
                Selection::Pipeline => v.project_onto(s),
            };
            check.validate_for(s)?;
        }
    }
    Ok(list)
}

pub fn run_matrix(cfg: &HarnessConfig) -> Result<BenchReport, HarnessError> {
    if cfg.reps == 0 {
        return Err(HarnessError::Config("--reps must be at least 1".into()));
    }
    if cfg.channel_depth == 0 {
        return Err(HarnessError::Config("--channel-depth must be at least 1".into()));
    }
    if cfg.mode == Mode::Dataflow && cfg.selection != Selection::Pipeline {
        return Err(HarnessError::Config("--mode dataflow needs --stage pipeline".into()));
    }
    let variants = resolve_variants(cfg)?;
    let raw = cfg.source.load()?;
    let (params, model) = load_params(cfg)?;
    let geom = Geometry {
        width: raw.width(),
        height: raw.height(),
        points: params.gamut.points(),
    };
    let outputs = stage_outputs(&raw, &params, cfg.exec);
    let runner = StageRun {
        cfg,
        params: &params,
        model: &model,
        geom,
    };

    let mut stages = Vec::new();
    let mut optimization_report = Vec::new();
    for stage in cfg.selection.stages() {
        let input = match stage {
            Stage::Demosaic => StageInput::Raw(&raw),
            s => StageInput::Image(&outputs[s.index() - 1]),
        };
        let projected: Vec<VariantConfig> = match cfg.selection {
            Selection::Stage(_) => variants.clone(),
            Selection::Pipeline => variants.iter().map(|v| v.project_onto(stage)).collect(),
        };
        stages.push(runner.run(stage, input, &outputs[stage.index()], &projected));
        let mut unique: Vec<VariantConfig> = Vec::new();
        for v in &projected {
            if !unique.contains(v) {
                unique.push(*v);
            }
        }
        optimization_report.extend(rank_variants(stage, &unique, geom, &model).into_iter().enumerate().map(
            |(rank, r)| OptimizationEntry {
                stage,
                rank: rank + 1,
                variant: r.config.label(),
                descriptor: descriptor_for(stage, &r.config, geom, &model),
                estimate: r.estimate,
            },
        ));
    }

    let pipeline = (cfg.selection == Selection::Pipeline)
        .then(|| pipeline_report(cfg, &raw, &params, &model, &stages, &variants))
        .transpose()?;

    Ok(BenchReport {
        schema_version: SCHEMA_VERSION,
        paper_comparison: "qualitative-only".into(),
        timestamp: SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map_or(0, |d| d.as_secs()),
        run: RunMeta {
            source: cfg.source.describe(),
            width: geom.width,
            height: geom.height,
            points: geom.points,
            image_seed: cfg.source.seed(),
            repetitions: cfg.reps,
            selection: cfg.selection.name().into(),
            mode: cfg.mode,
            clock: cfg.clock,
            channel_depth: cfg.channel_depth,
            parallel_reference: cfg.exec == Exec::Parallel && Exec::parallel_available(),
        },
        stages,
        pipeline,
        optimization_report,
    })
}

fn pipeline_report(
    cfg: &HarnessConfig,
    raw: &RawBayerImage,
    params: &PipelineParams,
    model: &ModelConfig,
    stages: &[StageReport],
    variants: &[VariantConfig],
) -> Result<PipelineReport, HarnessError> {
    let reference_s: f64 = stages.iter().map(|s| s.reference.mean_s).sum();
    let shares = stages
        .iter()
        .map(|s| StageShare {
            stage: s.stage,
            time_s: s.reference.mean_s,
            share: if reference_s > 0.0 {
                s.reference.mean_s / reference_s
            } else {
                0.2
            },
        })
        .collect();
    let totals = variants
        .iter()
        .enumerate()
        .map(|(i, v)| {
            let rows: Vec<&VariantRow> = stages.iter().map(|s| &s.rows[i]).collect();
            let pass = rows.iter().all(|r| r.status == Status::Pass);
            let mean_s = pass.then(|| rows.iter().map(|r| r.timing.expect("passed rows are timed").mean_s).sum::<f64>());
            PipelineTotal {
                variant: v.label(),
                status: if pass { Status::Pass } else { Status::Failed },
                mean_s,
                speedup: mean_s.map(|m| reference_s / m),
            }
        })
        .collect();
    let mut dataflow = Vec::new();
    if cfg.mode == Mode::Dataflow {
        for v in variants {
            let unroll = v.project_onto(Stage::Gamut).unroll_factor;
            let run = run_pipeline_dataflow(
                raw,
                params,
                &DataflowConfig {
                    depth: cfg.channel_depth,
                    clock: cfg.clock,
                    gamut_unroll: unroll,
                    model: *model,
                    fault: None,
                },
            )?;
            let sequential = run_fused_pipeline(raw, params, unroll)?;
            let exact = run.output.as_slice().iter().zip(sequential.as_slice()).all(|(a, b)| a.to_bits() == b.to_bits());
            dataflow.push(DataflowRow {
                variant: v.label(),
                gamut_unroll: unroll,
                status: if exact { Status::Pass } else { Status::Failed },
                makespan_s: run.makespan_s,
                stats: run.stats,
            });
        }
    }
    Ok(PipelineReport {
        reference_s,
        shares,
        totals,
        dataflow,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(selection: Selection) -> HarnessConfig {
        HarnessConfig {
            source: ImageSource::Synth("8x6:noise:5".parse().unwrap()),
            points: Some(16),
            selection,
            reps: 2,
            ..HarnessConfig::default()
        }
    }

    #[test]
    fn two_rows_for_denoise() {
        let cfg = HarnessConfig {
            variants: variants::parse_list("RI,RIW").unwrap(),
            ..small(Selection::Stage(Stage::Denoise))
        };
        let r = run_matrix(&cfg).unwrap();
        assert_eq!(r.stages.len(), 1);
        let rows = &r.stages[0].rows;
        assert_eq!(rows.len(), 2);
        for row in rows {
            assert_eq!(row.status, Status::Pass);
            assert_eq!(row.counters_match, Some(true));
            assert!(row.speedup.unwrap() > 0.0);
        }
        assert!(r.all_passed());
    }

    #[test]
    fn corrupted_variant_is_isolated() {
        let cfg = HarnessConfig {
            variants: variants::parse_list("RI,RIW,RIWB").unwrap(),
            corrupt_variant: Some("RIW".into()),
            ..small(Selection::Stage(Stage::Transform))
        };
        let r = run_matrix(&cfg).unwrap();
        let rows = &r.stages[0].rows;
        assert_eq!(rows[1].status, Status::Failed);
        assert!(rows[1].timing.is_none() && rows[1].speedup.is_none());
        assert!(rows[1].max_rel_dev.unwrap() > 0.0);
        assert_eq!(rows[0].status, Status::Pass);
        assert_eq!(rows[2].status, Status::Pass);
        assert!(!r.all_passed());
    }

    #[test]
    fn invalid_variant_for_stage_is_an_error() {
        let cfg = HarnessConfig {
            variants: variants::parse_list("RIWC").unwrap(),
            ..small(Selection::Stage(Stage::Denoise))
        };
        assert!(matches!(run_matrix(&cfg), Err(HarnessError::Variant(_))));
    }

    #[test]
    fn pipeline_shares_sum_to_one() {
        let r = run_matrix(&small(Selection::Pipeline)).unwrap();
        let p = r.pipeline.unwrap();
        let sum: f64 = p.shares.iter().map(|s| s.share).sum();
        assert!((sum - 1.0).abs() < 1e-9);
        assert_eq!(p.totals.len(), default_variants(Selection::Pipeline).len());
    }

    #[test]
    fn virtual_dataflow_report_is_reproducible() {
        let cfg = HarnessConfig {
            mode: Mode::Dataflow,
            clock: ClockMode::Virtual,
            channel_depth: 4,
            ..small(Selection::Pipeline)
        };
        let mut a = run_matrix(&cfg).unwrap();
        let mut b = run_matrix(&cfg).unwrap();
        a.timestamp = 0;
        b.timestamp = 0;
        assert_eq!(emit_report(&a, Format::Json), emit_report(&b, Format::Json));
        assert!(a.all_passed());
        assert_eq!(a.pipeline.unwrap().dataflow.len(), 5);
    }

    #[test]
    fn cache_size_override_only_touches_default_sizes() {
        let cfg = HarnessConfig {
            variants: variants::parse_list("RIWC,RIWC_1").unwrap(),
            cache_size: Some(4096),
            ..small(Selection::Stage(Stage::Gamut))
        };
        let list = resolve_variants(&cfg).unwrap();
        assert_eq!(list[0].cache_size_bytes, 4096);
        assert_eq!(list[1].cache_size_bytes, 1024);
    }

    #[test]
    fn selection_parse() {
        assert_eq!("pipeline".parse::<Selection>(), Ok(Selection::Pipeline));
        assert_eq!("tonemap".parse::<Selection>(), Ok(Selection::Stage(Stage::ToneMap)));
        assert!("everything".parse::<Selection>().is_err());
    }
}
