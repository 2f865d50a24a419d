use std::time::Duration;

use ispbench::dataflow::{
    run_pipeline_dataflow, run_synthetic_stages, ClockMode, DataflowConfig, DataflowError, Fault,
};
use ispbench::params::{GamutParams, PipelineParams};
use ispbench::Stage;
use ispbench::synth::{synth_bayer, SynthKind};
use ispbench::variants::run_fused_pipeline;
use proptest::prelude::*;

fn params(points: usize) -> PipelineParams {
    PipelineParams {
        gamut: GamutParams::seeded(points, 8),
        ..PipelineParams::default()
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn output_is_the_fused_pipeline_at_any_depth(
        hw in 1usize..9, hh in 1usize..7, depth in 1usize..80, unroll in 1u32..8, seed: u64, virt: bool,
    ) {
        let raw = synth_bayer(2 * hw, 2 * hh, SynthKind::SeededNoise(seed)).unwrap();
        let p = params(13);
        let cfg = DataflowConfig {
            depth,
            gamut_unroll: unroll,
            clock: if virt { ClockMode::Virtual } else { ClockMode::Wall },
            ..DataflowConfig::default()
        };
        let run = run_pipeline_dataflow(&raw, &p, &cfg).unwrap();
        prop_assert_eq!(run.output, run_fused_pipeline(&raw, &p, unroll).unwrap());
        for s in &run.stats {
            prop_assert_eq!(s.items_processed, (4 * hw * hh) as u64);
        }
    }
}

#[test]
fn virtual_runs_repeat_exactly() {
    let raw = synth_bayer(12, 8, SynthKind::SeededNoise(2)).unwrap();
    let cfg = DataflowConfig {
        depth: 3,
        clock: ClockMode::Virtual,
        ..DataflowConfig::default()
    };
    let a = run_pipeline_dataflow(&raw, &params(40), &cfg).unwrap();
    let b = run_pipeline_dataflow(&raw, &params(40), &cfg).unwrap();
    assert_eq!(a, b);
}

#[test]
fn injected_fault_names_its_stage() {
    let raw = synth_bayer(8, 8, SynthKind::Gradient).unwrap();
    let cfg = DataflowConfig {
        fault: Some(Fault {
            stage: Stage::Transform,
            after_items: 5,
        }),
        ..DataflowConfig::default()
    };
    match run_pipeline_dataflow(&raw, &params(4), &cfg) {
        Err(DataflowError::StageFailed { stage, .. }) => assert_eq!(stage, "transform"),
        other => panic!("{other:?}"),
    }
}

#[test]
fn slow_consumer_backs_up_the_producer() {
    let lat = [Duration::from_micros(1), Duration::from_micros(10)];
    let run = run_synthetic_stages(&lat, 1000, 8, ClockMode::Virtual).unwrap();
    let producer = &run.stats[0];
    assert!(producer.blocked_push_fraction() > 0.8, "{producer:?}");
    assert!(run.stats[1].blocked_pop_fraction() < 0.01);
}
