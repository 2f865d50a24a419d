//! Reference kernels and the whole pipeline, sequential vs row-parallel.
//! Without the `parallel` feature both arms run the sequential path.

use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use ispbench::isp::{self, stage_outputs};
use ispbench::params::{GamutParams, PipelineParams};
use ispbench::synth::{synth_bayer, SynthKind};
use ispbench::Exec;

const W: usize = 256;
const H: usize = 192;
const POINTS: usize = 256;

fn params() -> PipelineParams {
    PipelineParams {
        gamut: GamutParams::seeded(POINTS, 42),
        ..PipelineParams::default()
    }
}

fn kernels(c: &mut Criterion) {
    let raw = synth_bayer(W, H, SynthKind::SeededNoise(42)).unwrap();
    let p = params();
    let outs = stage_outputs(&raw, &p, Exec::Sequential);
    let mut group = c.benchmark_group("kernels");
    group.sample_size(20);
    for (name, exec) in [("sequential", Exec::Sequential), ("parallel", Exec::Parallel)] {
        group.bench_function(BenchmarkId::new("demosaic", name), |b| {
            b.iter(|| isp::demosaic_with(black_box(&raw), exec))
        });
        group.bench_function(BenchmarkId::new("denoise", name), |b| {
            b.iter(|| isp::denoise_with(black_box(&outs[0]), exec))
        });
        group.bench_function(BenchmarkId::new("transform", name), |b| {
            b.iter(|| isp::transform_with(black_box(&outs[1]), &p.transform, exec))
        });
        group.bench_function(BenchmarkId::new("gamut", name), |b| {
            b.iter(|| isp::gamut_map_with(black_box(&outs[2]), &p.gamut, exec))
        });
        group.bench_function(BenchmarkId::new("tonemap", name), |b| {
            b.iter(|| isp::tone_map_with(black_box(&outs[3]), &p.tone, exec))
        });
    }
    group.finish();
}

fn pipeline(c: &mut Criterion) {
    let raw = synth_bayer(W, H, SynthKind::SeededNoise(7)).unwrap();
    let p = params();
    let mut group = c.benchmark_group("pipeline");
    group.sample_size(10);
    for (name, exec) in [("sequential", Exec::Sequential), ("parallel", Exec::Parallel)] {
        group.bench_function(name, |b| b.iter(|| isp::run_pipeline_timed(black_box(&raw), &p, exec).0));
    }
    group.finish();
}

criterion_group!(benches, kernels, pipeline);
criterion_main!(benches);
