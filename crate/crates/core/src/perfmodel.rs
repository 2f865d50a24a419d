//! Analytic loop-pipelining model: initiation interval, cycle count and a
//! coarse resource/fit estimate, evaluated before anything runs.

use serde::{Deserialize, Serialize};

use crate::isp::Stage;
use crate::params::readonly_bytes_for;
use crate::variants::{ReadonlyMode, VariantConfig};

/// Resource cost table. Units are abstract.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CostTable {
    pub base: f64,
    pub datapath_per_unroll: f64,
    pub ram_per_byte: f64,
    pub capacity: f64,
}

impl Default for CostTable {
    fn default() -> Self {
        Self {
            base: 10.0,
            datapath_per_unroll: 5.0,
            ram_per_byte: 0.001,
            capacity: 2000.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelConfig {
    pub pipeline_depth: u64,
    /// II charged when a loop-carried dependence cannot be ruled out. A
    /// stand-in for a global-memory load-use chain, not a measured value.
    pub assumed_dep_ii: u64,
    pub costs: CostTable,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            pipeline_depth: 100,
            assumed_dep_ii: 64,
            costs: CostTable::default(),
        }
    }
}

impl ModelConfig {
    pub fn validate(&self) -> Result<(), String> {
        if self.pipeline_depth == 0 || self.assumed_dep_ii == 0 {
            return Err("model: pipeline_depth and assumed_dep_ii must be > 0".into());
        }
        let c = &self.costs;
        if [c.base, c.datapath_per_unroll, c.ram_per_byte, c.capacity]
            .iter()
            .any(|v| !v.is_finite() || *v < 0.0)
        {
            return Err("model: costs must be finite and non-negative".into());
        }
        Ok(())
    }
}

/// Loop-nest summary of one kernel.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KernelDescriptor {
    pub outer_trip: u64,
    /// 0 when the kernel has no inner loop.
    pub inner_trip: u64,
    pub unroll_factor: u64,
    pub restrict_flag: bool,
    pub ivdep_flag: bool,
    pub has_true_carried_dep: bool,
    pub pipeline_depth: u64,
    pub assumed_dep_ii: u64,
    pub mem_ops_per_iter: u64,
    pub readonly_mode: ReadonlyMode,
    pub buffer_bytes: u64,
}

impl KernelDescriptor {
    /// A dependence-free flat loop with the default depth and flags set.
    pub fn flat(outer_trip: u64) -> Self {
        let m = ModelConfig::default();
        Self {
            outer_trip,
            inner_trip: 0,
            unroll_factor: 1,
            restrict_flag: true,
            ivdep_flag: true,
            has_true_carried_dep: false,
            pipeline_depth: m.pipeline_depth,
            assumed_dep_ii: m.assumed_dep_ii,
            mem_ops_per_iter: 1,
            readonly_mode: ReadonlyMode::None,
            buffer_bytes: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PipelineEstimate {
    pub ii: u64,
    pub total_cycles: u64,
    pub resource_units: f64,
    pub fits: bool,
    /// True when `ii` is the assumed-dependence stand-in.
    pub ii_is_assumed: bool,
}

/// II is 1 only when aliasing and carried dependences are both ruled out
/// (`restrict` and `ivdep`) and there is no real carried dependence.
pub fn estimate_ii(d: &KernelDescriptor) -> u64 {
    if d.restrict_flag && d.ivdep_flag && !d.has_true_carried_dep {
        1
    } else {
        d.assumed_dep_ii
    }
}

/// Cycles of one pass of the inner loop (0 if there is none).
pub fn inner_body_cycles(d: &KernelDescriptor) -> u64 {
    if d.inner_trip == 0 {
        return 0;
    }
    let effective = d.inner_trip.div_ceil(d.unroll_factor.max(1));
    d.pipeline_depth + estimate_ii(d) * (effective - 1)
}

/// Flat loop: `depth + II * (outer - 1)`. With an inner loop the outer loop
/// is serialized around it: `outer * (depth + II * (ceil(inner / u) - 1))`.
pub fn estimate_cycles(d: &KernelDescriptor) -> u64 {
    let total = if d.inner_trip == 0 {
        d.pipeline_depth + estimate_ii(d) * d.outer_trip.saturating_sub(1)
    } else {
        d.outer_trip * inner_body_cycles(d)
    };
    total.max(d.pipeline_depth)
}

/// `base + unroll * datapath * mem_ops + buffer_bytes * ram_per_byte`.
pub fn estimate_resources(d: &KernelDescriptor, costs: &CostTable) -> (f64, bool) {
    let units = costs.base
        + d.unroll_factor as f64 * costs.datapath_per_unroll * d.mem_ops_per_iter as f64
        + d.buffer_bytes as f64 * costs.ram_per_byte;
    (units, units <= costs.capacity)
}

pub fn estimate(d: &KernelDescriptor, costs: &CostTable) -> PipelineEstimate {
    let ii = estimate_ii(d);
    let (resource_units, fits) = estimate_resources(d, costs);
    PipelineEstimate {
        ii,
        total_cycles: estimate_cycles(d),
        resource_units,
        fits,
        ii_is_assumed: ii != 1,
    }
}

/// Problem size a descriptor is derived from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Geometry {
    pub width: usize,
    pub height: usize,
    pub points: usize,
}

/// Bytes of read-only operand data a stage touches.
pub fn readonly_bytes(stage: Stage, points: usize) -> u64 {
    match stage {
        Stage::Demosaic | Stage::Denoise => 0,
        Stage::Transform => 9 * 4,
        Stage::Gamut => readonly_bytes_for(points) as u64,
        Stage::ToneMap => 256 * 3 * 4,
    }
}

/// Loads and stores in the body of the innermost pipelined loop.
fn mem_ops(stage: Stage, fused: bool) -> u64 {
    match (stage, fused) {
        (Stage::Demosaic, _) => 12,
        (Stage::Denoise, false) => 10,
        (Stage::Denoise, true) => 30,
        (Stage::Transform, false) => 7,
        (Stage::Transform, true) => 15,
        // inner loop body: one point (3) plus one or three weights
        (Stage::Gamut, false) => 4,
        (Stage::Gamut, true) => 6,
        (Stage::ToneMap, false) => 3,
        (Stage::ToneMap, true) => 9,
    }
}

pub fn descriptor_for(stage: Stage, cfg: &VariantConfig, geom: Geometry, model: &ModelConfig) -> KernelDescriptor {
    let pixels = (geom.width * geom.height) as u64;
    let channel_passes = if cfg.fused_rewrite || stage == Stage::Demosaic { 1 } else { 3 };
    KernelDescriptor {
        outer_trip: pixels * channel_passes,
        inner_trip: if stage == Stage::Gamut { geom.points as u64 } else { 0 },
        unroll_factor: cfg.unroll_factor as u64,
        restrict_flag: cfg.restrict_flag,
        ivdep_flag: cfg.ivdep_flag,
        has_true_carried_dep: false,
        pipeline_depth: model.pipeline_depth,
        assumed_dep_ii: model.assumed_dep_ii,
        mem_ops_per_iter: mem_ops(stage, cfg.fused_rewrite),
        readonly_mode: cfg.readonly_mode,
        buffer_bytes: if cfg.readonly_mode == ReadonlyMode::Buffered {
            readonly_bytes(stage, geom.points)
        } else {
            0
        },
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RankedVariant {
    /// Position in the input list.
    pub input_index: usize,
    pub config: VariantConfig,
    pub estimate: PipelineEstimate,
}

/// Sorts configs by estimated cycles, then resources, then input order.
pub fn rank_variants(stage: Stage, cfgs: &[VariantConfig], geom: Geometry, model: &ModelConfig) -> Vec<RankedVariant> {
    let mut ranked: Vec<RankedVariant> = cfgs
        .iter()
        .enumerate()
        .map(|(input_index, cfg)| RankedVariant {
            input_index,
            config: *cfg,
            estimate: estimate(&descriptor_for(stage, cfg, geom, model), &model.costs),
        })
        .collect();
    // stable sort keeps input order on full ties
    ranked.sort_by(|a, b| {
        a.estimate
            .total_cycles
            .cmp(&b.estimate.total_cycles)
            .then(a.estimate.resource_units.total_cmp(&b.estimate.resource_units))
    });
    ranked
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn gamut_desc(unroll: u64) -> KernelDescriptor {
        KernelDescriptor {
            outer_trip: 1,
            inner_trip: 3611,
            unroll_factor: unroll,
            pipeline_depth: 50,
            ..KernelDescriptor::flat(1)
        }
    }

    #[test]
    fn ii_rule() {
        let d = KernelDescriptor::flat(10);
        assert_eq!(estimate_ii(&d), 1);
        assert_eq!(estimate_ii(&KernelDescriptor { restrict_flag: false, ..d }), 64);
        assert_eq!(estimate_ii(&KernelDescriptor { ivdep_flag: false, ..d }), 64);
        assert_eq!(estimate_ii(&KernelDescriptor { has_true_carried_dep: true, ..d }), 64);
    }

    #[test]
    fn flat_loop_cycles() {
        assert_eq!(estimate_cycles(&KernelDescriptor::flat(1000)), 1099);
        assert_eq!(estimate_cycles(&KernelDescriptor::flat(0)), 100);
    }

    #[test]
    fn gamut_unroll_cycles() {
        // ceil(3611 / 6) = 602 effective iterations
        assert_eq!(estimate_cycles(&gamut_desc(6)), 651);
        assert_eq!(estimate_cycles(&gamut_desc(1)), 3660);
        assert_eq!(estimate_cycles(&gamut_desc(3611)), 50);
        let ratio = 3660.0_f64 / 651.0;
        assert!((ratio - 5.622).abs() < 1e-3);
    }

    #[test]
    fn resource_formula() {
        let d = KernelDescriptor {
            mem_ops_per_iter: 2,
            ..KernelDescriptor::flat(1)
        };
        let costs = CostTable {
            base: 10.0,
            datapath_per_unroll: 5.0,
            ram_per_byte: 1.0,
            capacity: 20.0,
        };
        assert_eq!(estimate_resources(&d, &costs), (20.0, true));
        assert_eq!(estimate_resources(&d, &CostTable { capacity: 19.0, ..costs }), (20.0, false));
    }

    #[test]
    fn gamut_rank_order() {
        let geom = Geometry {
            width: 768,
            height: 512,
            points: 3611,
        };
        let cfgs: Vec<VariantConfig> = ["RI", "RIW", "RIWB", "RIWB+U6"]
            .iter()
            .map(|s| s.parse().unwrap())
            .collect();
        let ranked = rank_variants(Stage::Gamut, &cfgs, geom, &ModelConfig::default());
        let cycles = |label: &str| {
            ranked
                .iter()
                .find(|r| r.config.label() == label)
                .unwrap()
                .estimate
                .total_cycles
        };
        assert!(cycles("RIWB+U6") < cycles("RIWB"));
        assert!(cycles("RIWB") <= cycles("RIW"));
        assert!(cycles("RIW") < cycles("RI"));
        assert_eq!(ranked[0].config.label(), "RIWB+U6");
        assert_eq!(ranked.last().unwrap().config.label(), "RI");
    }

    #[test]
    fn rank_ties_keep_input_order() {
        let geom = Geometry {
            width: 4,
            height: 4,
            points: 8,
        };
        let cfg: VariantConfig = "RIW".parse().unwrap();
        let ranked = rank_variants(Stage::Denoise, &[cfg, cfg, cfg], geom, &ModelConfig::default());
        assert_eq!(ranked.iter().map(|r| r.input_index).collect::<Vec<_>>(), vec![0, 1, 2]);
    }

    proptest! {
        #[test]
        fn cycles_monotone(outer in 0u64..10_000, inner in 0u64..5_000, u in 1u64..64, depth in 1u64..200, dep_ii in 1u64..100) {
            let base = KernelDescriptor {
                outer_trip: outer,
                inner_trip: inner,
                unroll_factor: u,
                pipeline_depth: depth,
                assumed_dep_ii: dep_ii,
                ..KernelDescriptor::flat(0)
            };
            let more_unroll = KernelDescriptor { unroll_factor: u + 1, ..base };
            prop_assert!(estimate_cycles(&more_unroll) <= estimate_cycles(&base));
            // larger II: drop a flag so the assumed II applies
            let slower = KernelDescriptor { ivdep_flag: false, ..base };
            prop_assert!(estimate_cycles(&slower) >= estimate_cycles(&base));
            prop_assert!(estimate_cycles(&base) >= depth);
        }

        #[test]
        fn resources_monotone(u in 1u64..64, buf in 0u64..1_000_000, ops in 0u64..40) {
            let costs = CostTable::default();
            let d = KernelDescriptor { unroll_factor: u, buffer_bytes: buf, mem_ops_per_iter: ops, ..KernelDescriptor::flat(1) };
            let r = estimate_resources(&d, &costs).0;
            let wider = KernelDescriptor { unroll_factor: 2 * u, ..d };
            let bigger = KernelDescriptor { buffer_bytes: buf + 1, ..d };
            prop_assert!(estimate_resources(&wider, &costs).0 >= r);
            prop_assert!(estimate_resources(&bigger, &costs).0 >= r);
            prop_assert!(r >= 0.0);
        }

        #[test]
        fn rank_is_a_sorted_permutation(picks in proptest::collection::vec(0usize..6, 0..10)) {
            let labels = ["RI", "RIW", "RIWB", "RIWC", "RIWB+U6", "BASE"];
            let cfgs: Vec<VariantConfig> = picks.iter().map(|&i| labels[i].parse().unwrap()).collect();
            let geom = Geometry { width: 16, height: 8, points: 50 };
            let ranked = rank_variants(Stage::Gamut, &cfgs, geom, &ModelConfig::default());
            let mut idx: Vec<usize> = ranked.iter().map(|r| r.input_index).collect();
            for w in ranked.windows(2) {
                prop_assert!(w[0].estimate.total_cycles <= w[1].estimate.total_cycles);
            }
            idx.sort_unstable();
            prop_assert_eq!(idx, (0..cfgs.len()).collect::<Vec<_>>());
        }
    }
}
