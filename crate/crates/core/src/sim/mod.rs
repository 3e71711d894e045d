//! Tile-level performance and energy model of a 2D array of compute units
//! running weight-stationary GEMMs against an off-chip memory.
//!
//! Each weight tile is one pipeline stage: phase `p` loads tile `p`, computes
//! tile `p - 1` and stores tile `p - 2`, and lasts as long as the slower of
//! its memory traffic and its compute. Array fill (`rows + cols` cycles per
//! tile) is reported separately and added to the total.

mod config;
pub mod functional;
mod report;

use thiserror::Error;

use crate::cost::CostParams;
use crate::cvu::{macs_per_cycle, plan_composition, CvuError};
use crate::workloads::{LayerKind, LayerSpec, NetworkSpec};

pub use config::{
    AcceleratorConfig, MemorySpec, SramEnergy, Style, DEFAULT_BUDGET_MW, DEFAULT_INPUT_BUFFER_BYTES,
    DEFAULT_OUTPUT_BUFFER_BYTES, DEFAULT_WEIGHT_SCRATCHPAD_BYTES,
};
pub use report::{Bound, ComparisonRow, EnergyBreakdown, LayerReport, SimReport, LAYER_CSV_HEADER};

/// Bytes per spilled partial sum (64-bit accumulators).
const PSUM_BYTES: u64 = 8;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SimError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error(transparent)]
    Cvu(#[from] CvuError),
    #[error("layer {index} ({name}): {source}")]
    Layer {
        index: usize,
        name: String,
        #[source]
        source: Box<SimError>,
    },
    #[error("comparison needs at least 2 configurations, got {0}")]
    TooFewConfigs(usize),
    #[error("64-bit accumulator overflow")]
    Overflow,
    #[error("operand shape mismatch: {0}")]
    Shape(String),
}

/// A layer lowered to `repeats` sequential GEMMs of `M x K` weights by
/// `K x N` inputs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GemmDims {
    pub m: u64,
    pub k: u64,
    pub n: u64,
    pub repeats: u64,
    /// Uses of each weight per repeat.
    pub weight_reuse: u64,
    /// Average uses of each input element per repeat.
    pub input_reuse: f64,
}

pub fn lower_layer(layer: &LayerSpec) -> GemmDims {
    let b = layer.batch as u64;
    let (m, k, n, repeats) = match layer.kind {
        LayerKind::Conv {
            in_channels,
            out_channels,
            kernel_h,
            kernel_w,
            ..
        } => {
            let (oh, ow) = layer.conv_output().unwrap_or((0, 0));
            (
                out_channels as u64,
                in_channels as u64 * kernel_h as u64 * kernel_w as u64,
                oh * ow * b,
                1,
            )
        }
        LayerKind::Fc {
            in_features,
            out_features,
        } => (out_features as u64, in_features as u64, b, 1),
        LayerKind::Recurrent {
            input,
            hidden,
            gates,
            timesteps,
        } => (
            gates as u64 * hidden as u64,
            hidden as u64 + input as u64,
            b,
            timesteps as u64,
        ),
    };
    let raw_inputs = per_repeat_inputs(layer).max(1);
    GemmDims {
        m,
        k,
        n,
        repeats,
        weight_reuse: n,
        input_reuse: (m * k * n) as f64 / raw_inputs as f64,
    }
}

fn per_repeat_inputs(layer: &LayerSpec) -> u64 {
    let b = layer.batch as u64;
    match layer.kind {
        // the hidden half of K stays on chip between steps
        LayerKind::Recurrent { input, hidden, .. } => (input as u64 + hidden as u64) * b,
        _ => layer.input_shape().elements() * b,
    }
}

fn per_repeat_offchip_inputs(layer: &LayerSpec) -> u64 {
    match layer.kind {
        LayerKind::Recurrent { input, .. } => input as u64 * layer.batch as u64,
        _ => per_repeat_inputs(layer),
    }
}

fn per_repeat_outputs(layer: &LayerSpec) -> u64 {
    layer.output_shape().elements() * layer.batch as u64
}

fn bytes(elements: u64, bits: u8) -> u64 {
    (elements * bits as u64).div_ceil(8)
}

#[derive(Debug, Clone, Copy, Default)]
struct Tile {
    load: u64,
    store: u64,
    compute: u64,
}

/// Execution parameters of one layer on one accelerator.
#[derive(Debug, Clone, Copy)]
struct Mapping {
    bw_x: u8,
    bw_w: u8,
    /// Elements of K consumed per unit per cycle.
    effective_length: u64,
    macs_per_cycle: u64,
}

fn mapping(layer: &LayerSpec, acc: &AcceleratorConfig) -> Result<Mapping, SimError> {
    match acc.style {
        Style::Conventional => Ok(Mapping {
            bw_x: 8,
            bw_w: 8,
            effective_length: 1,
            macs_per_cycle: 1,
        }),
        Style::ScalarComposable | Style::VectorComposable => {
            let plan = plan_composition(layer.bw_x, layer.bw_w, &acc.cvu)?;
            Ok(Mapping {
                bw_x: plan.bw_x,
                bw_w: plan.bw_w,
                effective_length: plan.effective_length as u64,
                macs_per_cycle: macs_per_cycle(&plan, &acc.cvu) as u64,
            })
        }
    }
}

pub fn simulate_layer(
    layer: &LayerSpec,
    acc: &AcceleratorConfig,
    mem: &MemorySpec,
    params: &CostParams,
) -> Result<LayerReport, SimError> {
    acc.validate()?;
    mem.validate()?;
    let map = mapping(layer, acc)?;
    let g = lower_layer(layer);
    let units = acc.units() as u64;
    let e = map.effective_length;

    let min_spad = bytes(e, map.bw_w);
    if (acc.weight_scratchpad_bytes as u64) < min_spad {
        return Err(SimError::Config(format!(
            "weight scratchpad of {} bytes cannot hold one {}-element tile at {} bits ({} bytes)",
            acc.weight_scratchpad_bytes, e, map.bw_w, min_spad
        )));
    }

    // Tile shape is fixed at 8-bit weights so narrower weights never change
    // the schedule, only the bytes moved and the cycles spent.
    let capacity = units * acc.weight_scratchpad_bytes as u64;
    let (m_t, k_t) = if g.k <= capacity {
        (g.m.min(capacity / g.k).max(1), g.k)
    } else {
        (1, (capacity / e * e).max(e))
    };
    let m_tiles = g.m.div_ceil(m_t);
    let k_tiles = g.k.div_ceil(k_t);

    let total_weight_bytes = bytes(g.m * g.k, map.bw_w);
    let weights_resident = g.repeats > 1 && total_weight_bytes <= capacity;
    let in_bytes = bytes(per_repeat_offchip_inputs(layer), map.bw_x);
    let inputs_resident = bytes(per_repeat_inputs(layer), map.bw_x) <= acc.input_buffer_bytes as u64;
    let out_elems = per_repeat_outputs(layer);
    let psums_spill = k_tiles > 1 && g.m * g.n * PSUM_BYTES > acc.output_buffer_bytes as u64;

    let mut tiles = Vec::with_capacity((g.repeats * m_tiles * k_tiles) as usize);
    let mut weight_loaded = 0u64;
    let mut input_loaded = 0u64;
    let mut output_stored = 0u64;
    let mut psum_bytes = 0u64;
    for rep in 0..g.repeats {
        for kt in 0..k_tiles {
            let k_len = k_t.min(g.k - kt * k_t);
            for mt in 0..m_tiles {
                let m_len = m_t.min(g.m - mt * m_t);
                let mut t = Tile::default();
                if rep == 0 || !weights_resident {
                    let w = bytes(m_len * k_len, map.bw_w);
                    t.load += w;
                    weight_loaded += w;
                }
                let first = kt == 0 && mt == 0;
                let inp = if inputs_resident {
                    if first {
                        in_bytes
                    } else {
                        0
                    }
                } else {
                    (in_bytes * k_len).div_ceil(g.k)
                };
                t.load += inp;
                input_loaded += inp;
                if psums_spill {
                    let p = m_len * g.n * PSUM_BYTES;
                    if kt > 0 {
                        t.load += p;
                        psum_bytes += p;
                    }
                    if kt + 1 < k_tiles {
                        t.store += p;
                        psum_bytes += p;
                    }
                }
                if kt + 1 == k_tiles {
                    let o = bytes((out_elems * m_len).div_ceil(g.m), map.bw_x);
                    t.store += o;
                    output_stored += o;
                }
                t.compute = (m_len * k_len.div_ceil(e) * e * g.n).div_ceil(units * map.macs_per_cycle);
                tiles.push(t);
            }
        }
    }

    let cycles_for = |b: u64| -> u64 {
        if b == 0 {
            0
        } else {
            (b as f64 * acc.frequency_hz / mem.bandwidth_bytes_per_sec).ceil() as u64
        }
    };
    let n = tiles.len();
    let mut compute_cycles = 0u64;
    let mut memory_cycles = 0u64;
    let mut pipelined = 0u64;
    for p in 0..n + 2 {
        let load = if p < n { tiles[p].load } else { 0 };
        let store = if p >= 2 { tiles[p - 2].store } else { 0 };
        let comp = if p >= 1 && p <= n { tiles[p - 1].compute } else { 0 };
        let mem_c = cycles_for(load + store);
        compute_cycles += comp;
        memory_cycles += mem_c;
        pipelined += mem_c.max(comp);
    }
    let fill_cycles = n as u64 * (acc.rows + acc.cols) as u64;
    let total_cycles = pipelined + fill_cycles;

    let useful_macs = g.m * g.k * g.n * g.repeats;
    let padded_macs = g.m * g.k.div_ceil(e) * e * g.n * g.repeats;
    let offchip_bytes = weight_loaded + input_loaded + output_stored + psum_bytes;

    let unit_energy = acc.unit_energy_pj(params);
    let s = &acc.sram;
    let sram_bits_w = padded_macs as f64 * map.bw_w as f64 + weight_loaded as f64 * 8.0;
    let sram_bits_x = padded_macs as f64 * map.bw_x as f64 / acc.cols as f64 + input_loaded as f64 * 8.0;
    let sram_bits_o = (g.m * g.n * g.repeats * k_tiles * 64) as f64 + (output_stored + psum_bytes) as f64 * 8.0;
    let energy = EnergyBreakdown::new(
        compute_cycles as f64 * units as f64 * unit_energy,
        sram_bits_w * s.weight_pj_per_bit + sram_bits_x * s.input_pj_per_bit + sram_bits_o * s.output_pj_per_bit,
        offchip_bytes as f64 * 8.0 * mem.pj_per_bit,
    );

    let slots = compute_cycles * units * map.macs_per_cycle;
    Ok(LayerReport {
        name: layer.name.clone(),
        kind: match layer.kind {
            LayerKind::Conv { .. } => "conv",
            LayerKind::Fc { .. } => "fc",
            LayerKind::Recurrent { .. } => "recurrent",
        }
        .to_string(),
        m: g.m,
        k: g.k,
        n: g.n,
        repeats: g.repeats,
        bw_x: map.bw_x,
        bw_w: map.bw_w,
        macs: useful_macs,
        tiles: n as u64,
        compute_cycles,
        memory_cycles,
        fill_cycles,
        total_cycles,
        runtime_s: total_cycles as f64 / acc.frequency_hz,
        offchip_bytes,
        energy,
        utilization: if slots == 0 { 0.0 } else { useful_macs as f64 / slots as f64 },
        bound: if memory_cycles > compute_cycles {
            Bound::Memory
        } else {
            Bound::Compute
        },
    })
}

pub fn simulate_network(
    net: &NetworkSpec,
    acc: &AcceleratorConfig,
    mem: &MemorySpec,
    params: &CostParams,
) -> Result<SimReport, SimError> {
    let layers = net
        .layers
        .iter()
        .enumerate()
        .map(|(index, layer)| {
            simulate_layer(layer, acc, mem, params).map_err(|e| SimError::Layer {
                index,
                name: layer.name.clone(),
                source: Box::new(e),
            })
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(SimReport::new(net.name.clone(), acc.style, mem.name.clone(), layers))
}

/// Runtime and energy of `net` on every configuration, as ratios against the
/// first one.
pub fn compare(
    net: &NetworkSpec,
    configs: &[(AcceleratorConfig, MemorySpec)],
    params: &CostParams,
) -> Result<Vec<ComparisonRow>, SimError> {
    if configs.len() < 2 {
        return Err(SimError::TooFewConfigs(configs.len()));
    }
    let reports = configs
        .iter()
        .map(|(acc, mem)| simulate_network(net, acc, mem, params))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(ComparisonRow::against_first(&reports))
}

/// Geometric mean of positive values; 0 for an empty slice.
pub fn geomean(values: &[f64]) -> f64 {
    if values.is_empty() {
        return 0.0;
    }
    (values.iter().map(|v| v.ln()).sum::<f64>() / values.len() as f64).exp()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bitslice::SliceConfig;
    use crate::cvu::CvuConfig;
    use crate::workloads::{BitwidthMode, SCHEMA_VERSION};

    fn params() -> CostParams {
        CostParams::default_calibrated()
    }

    fn vector_2x2() -> AcceleratorConfig {
        let cvu = CvuConfig::new(16, SliceConfig::default()).unwrap();
        AcceleratorConfig::new(Style::VectorComposable, 2, 2, cvu)
    }

    fn infinite() -> MemorySpec {
        MemorySpec::custom(f64::INFINITY, 0.0)
    }

    fn net(layers: Vec<LayerSpec>) -> NetworkSpec {
        NetworkSpec {
            schema: SCHEMA_VERSION,
            name: "t".into(),
            bitwidth_mode: BitwidthMode::Heterogeneous,
            batch: 1,
            layers,
        }
    }

    #[test]
    fn lowering_examples() {
        let conv = LayerSpec::new(
            "c",
            LayerKind::Conv {
                in_channels: 3,
                out_channels: 64,
                in_h: 32,
                in_w: 32,
                kernel_h: 3,
                kernel_w: 3,
                stride: 1,
                padding: None,
                pool: 1,
            },
            8,
            8,
        );
        let g = lower_layer(&conv);
        assert_eq!((g.m, g.k, g.n), (64, 27, 1024));
        let g = lower_layer(&LayerSpec::fc("f", 1024, 1024, 8, 8));
        assert_eq!((g.m, g.k, g.n), (1024, 1024, 1));
        let rnn = LayerSpec::new(
            "r",
            LayerKind::Recurrent {
                input: 256,
                hidden: 512,
                gates: 4,
                timesteps: 10,
            },
            8,
            8,
        );
        let g = lower_layer(&rnn);
        assert_eq!((g.m, g.k, g.n, g.repeats, g.weight_reuse), (2048, 768, 1, 10, 1));
    }

    #[test]
    fn fc_compute_cycles() {
        let p = params();
        let l = LayerSpec::fc("f", 64, 64, 8, 8);
        let r = simulate_layer(&l, &vector_2x2(), &infinite(), &p).unwrap();
        assert_eq!(r.compute_cycles, 64);
        assert_eq!(r.memory_cycles, 0);
        let l = LayerSpec::fc("f", 64, 64, 8, 2);
        let r = simulate_layer(&l, &vector_2x2(), &infinite(), &p).unwrap();
        assert_eq!(r.compute_cycles, 16);
    }

    #[test]
    fn gemv_is_memory_bound_on_ddr4() {
        let p = params();
        let acc = AcceleratorConfig::iso_power(Style::VectorComposable, &p, 250.0).unwrap();
        let l = LayerSpec::fc("g", 4096, 4096, 8, 8);
        let r = simulate_layer(&l, &acc, &MemorySpec::ddr4(), &p).unwrap();
        assert!(r.memory_cycles > r.compute_cycles);
        assert_eq!(r.bound, Bound::Memory);
        // 16 MiB of weights at 16 GB/s and 500 MHz
        assert!(r.memory_cycles >= 4096 * 4096 * 5 / 160);
    }

    #[test]
    fn single_layer_network_matches_layer() {
        let p = params();
        let acc = vector_2x2();
        let l = LayerSpec::fc("f", 300, 100, 4, 8);
        let lr = simulate_layer(&l, &acc, &MemorySpec::ddr4(), &p).unwrap();
        let nr = simulate_network(&net(vec![l]), &acc, &MemorySpec::ddr4(), &p).unwrap();
        assert_eq!(nr.layers, vec![lr.clone()]);
        assert_eq!(nr.total_cycles, lr.total_cycles);
        assert_eq!(nr.energy, lr.energy);
    }

    #[test]
    fn doubling_work_doubles_compute() {
        let p = params();
        let acc = vector_2x2();
        let l = LayerSpec::fc("f", 128, 64, 8, 8).with_batch(4);
        let once = simulate_layer(&l, &acc, &MemorySpec::ddr4(), &p).unwrap();
        let twice = simulate_layer(&l.clone().with_batch(8), &acc, &MemorySpec::ddr4(), &p).unwrap();
        assert_eq!(twice.compute_cycles, 2 * once.compute_cycles);
    }

    #[test]
    fn undersized_scratchpad_rejected() {
        let mut acc = vector_2x2();
        acc.weight_scratchpad_bytes = 8;
        let err = simulate_layer(&LayerSpec::fc("f", 64, 64, 8, 8), &acc, &MemorySpec::ddr4(), &params());
        assert!(matches!(err, Err(SimError::Config(_))));
    }

    #[test]
    fn layer_errors_carry_index() {
        let mut acc = vector_2x2();
        acc.weight_scratchpad_bytes = 8;
        let n = net(vec![LayerSpec::fc("a", 64, 64, 8, 8)]);
        match simulate_network(&n, &acc, &MemorySpec::ddr4(), &params()) {
            Err(SimError::Layer { index, name, .. }) => assert_eq!((index, name.as_str()), (0, "a")),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn conventional_ignores_bitwidths() {
        let p = params();
        let acc = AcceleratorConfig::iso_power(Style::Conventional, &p, 250.0).unwrap();
        let a = simulate_layer(&LayerSpec::fc("f", 512, 512, 8, 8), &acc, &MemorySpec::ddr4(), &p).unwrap();
        let b = simulate_layer(&LayerSpec::fc("f", 512, 512, 2, 3), &acc, &MemorySpec::ddr4(), &p).unwrap();
        assert_eq!(a.total_cycles, b.total_cycles);
        assert_eq!((b.bw_x, b.bw_w), (8, 8));
    }

    #[test]
    fn compare_needs_two_and_self_is_one() {
        let p = params();
        let n = net(vec![LayerSpec::fc("f", 256, 256, 8, 8)]);
        let c = (vector_2x2(), MemorySpec::ddr4());
        assert_eq!(compare(&n, &[c.clone()], &p), Err(SimError::TooFewConfigs(1)));
        let rows = compare(&n, &[c.clone(), c], &p).unwrap();
        assert!(rows.iter().all(|r| r.speedup == 1.0 && r.energy_reduction == 1.0));
    }

    #[test]
    fn energy_closes() {
        let p = params();
        let acc = vector_2x2();
        let l = LayerSpec::fc("f", 300, 200, 4, 4).with_batch(3);
        let r = simulate_layer(&l, &acc, &MemorySpec::ddr4(), &p).unwrap();
        let e = r.energy;
        assert!(e.compute >= 0.0 && e.on_chip_sram >= 0.0 && e.off_chip >= 0.0);
        assert!((e.total() - (e.compute + e.on_chip_sram + e.off_chip)).abs() < 1e-9);
        assert!((e.off_chip - r.offchip_bytes as f64 * 8.0 * 15.0).abs() < 1e-6);
    }

    #[test]
    fn geomean_values() {
        assert!((geomean(&[1.0, 4.0]) - 2.0).abs() < 1e-12);
        assert_eq!(geomean(&[]), 0.0);
    }
}
