use std::fmt::{self, Write as _};

use serde::{Deserialize, Serialize};

use super::Style;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Bound {
    Compute,
    Memory,
}

impl fmt::Display for Bound {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Bound::Compute => "compute",
            Bound::Memory => "memory",
        })
    }
}

/// Energy in pJ.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct EnergyBreakdown {
    pub compute: f64,
    pub on_chip_sram: f64,
    pub off_chip: f64,
}

impl EnergyBreakdown {
    pub fn new(compute: f64, on_chip_sram: f64, off_chip: f64) -> Self {
        Self {
            compute,
            on_chip_sram,
            off_chip,
        }
    }

    pub fn total(&self) -> f64 {
        self.compute + self.on_chip_sram + self.off_chip
    }

    fn add(&mut self, o: &EnergyBreakdown) {
        self.compute += o.compute;
        self.on_chip_sram += o.on_chip_sram;
        self.off_chip += o.off_chip;
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerReport {
    pub name: String,
    pub kind: String,
    pub m: u64,
    pub k: u64,
    pub n: u64,
    pub repeats: u64,
    /// Bitwidths after plan padding.
    pub bw_x: u8,
    pub bw_w: u8,
    pub macs: u64,
    pub tiles: u64,
    pub compute_cycles: u64,
    pub memory_cycles: u64,
    pub fill_cycles: u64,
    pub total_cycles: u64,
    pub runtime_s: f64,
    pub offchip_bytes: u64,
    pub energy: EnergyBreakdown,
    pub utilization: f64,
    pub bound: Bound,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimReport {
    pub network: String,
    pub style: Style,
    pub memory: String,
    pub layers: Vec<LayerReport>,
    pub macs: u64,
    pub compute_cycles: u64,
    pub memory_cycles: u64,
    pub fill_cycles: u64,
    pub total_cycles: u64,
    pub runtime_s: f64,
    pub offchip_bytes: u64,
    pub energy: EnergyBreakdown,
    pub utilization: f64,
    pub bound: Bound,
}

pub const LAYER_CSV_HEADER: &str = "layer,kind,m,k,n,repeats,bw_x,bw_w,macs,tiles,compute_cycles,memory_cycles,fill_cycles,total_cycles,runtime_s,offchip_bytes,energy_compute_pj,energy_sram_pj,energy_offchip_pj,energy_total_pj,utilization,bound";

impl SimReport {
    pub fn new(network: String, style: Style, memory: String, layers: Vec<LayerReport>) -> Self {
        let mut energy = EnergyBreakdown::default();
        let mut r = Self {
            network,
            style,
            memory,
            macs: 0,
            compute_cycles: 0,
            memory_cycles: 0,
            fill_cycles: 0,
            total_cycles: 0,
            runtime_s: 0.0,
            offchip_bytes: 0,
            energy,
            utilization: 0.0,
            bound: Bound::Compute,
            layers: Vec::new(),
        };
        let mut slots = 0.0;
        for l in &layers {
            r.macs += l.macs;
            r.compute_cycles += l.compute_cycles;
            r.memory_cycles += l.memory_cycles;
            r.fill_cycles += l.fill_cycles;
            r.total_cycles += l.total_cycles;
            r.runtime_s += l.runtime_s;
            r.offchip_bytes += l.offchip_bytes;
            energy.add(&l.energy);
            if l.utilization > 0.0 {
                slots += l.macs as f64 / l.utilization;
            }
        }
        r.energy = energy;
        r.utilization = if slots > 0.0 { r.macs as f64 / slots } else { 0.0 };
        r.bound = if r.memory_cycles > r.compute_cycles {
            Bound::Memory
        } else {
            Bound::Compute
        };
        r.layers = layers;
        r
    }

    /// Per-layer rows followed by a `TOTAL` row.
    pub fn to_csv(&self) -> String {
        let mut s = String::from(LAYER_CSV_HEADER);
        s.push('\n');
        for l in &self.layers {
            let _ = writeln!(
                s,
                "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{:.9e},{},{:.6e},{:.6e},{:.6e},{:.6e},{:.6},{}",
                l.name,
                l.kind,
                l.m,
                l.k,
                l.n,
                l.repeats,
                l.bw_x,
                l.bw_w,
                l.macs,
                l.tiles,
                l.compute_cycles,
                l.memory_cycles,
                l.fill_cycles,
                l.total_cycles,
                l.runtime_s,
                l.offchip_bytes,
                l.energy.compute,
                l.energy.on_chip_sram,
                l.energy.off_chip,
                l.energy.total(),
                l.utilization,
                l.bound
            );
        }
        let _ = writeln!(
            s,
            "TOTAL,,,,,,,,{},{},{},{},{},{},{:.9e},{},{:.6e},{:.6e},{:.6e},{:.6e},{:.6},{}",
            self.macs,
            self.layers.iter().map(|l| l.tiles).sum::<u64>(),
            self.compute_cycles,
            self.memory_cycles,
            self.fill_cycles,
            self.total_cycles,
            self.runtime_s,
            self.offchip_bytes,
            self.energy.compute,
            self.energy.on_chip_sram,
            self.energy.off_chip,
            self.energy.total(),
            self.utilization,
            self.bound
        );
        s
    }

    pub fn summary(&self) -> String {
        let mem_bound = self.layers.iter().filter(|l| l.bound == Bound::Memory).count();
        format!(
            "network: {}\nstyle: {}\nmemory: {}\noverlap: double-buffered, max(compute, memory) per tile phase\n\
             layers: {} ({} memory-bound)\nmacs: {}\ntotal_cycles: {} (compute {}, memory {}, fill {})\n\
             runtime_s: {:.6e}\nenergy_pj: {:.6e} (compute {:.6e}, sram {:.6e}, off-chip {:.6e})\n\
             utilization: {:.4}\nbound: {}\n",
            self.network,
            self.style,
            self.memory,
            self.layers.len(),
            mem_bound,
            self.macs,
            self.total_cycles,
            self.compute_cycles,
            self.memory_cycles,
            self.fill_cycles,
            self.runtime_s,
            self.energy.total(),
            self.energy.compute,
            self.energy.on_chip_sram,
            self.energy.off_chip,
            self.utilization,
            self.bound
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub style: Style,
    pub memory: String,
    pub runtime_s: f64,
    pub energy_pj: f64,
    /// Baseline runtime over this runtime.
    pub speedup: f64,
    /// Baseline energy over this energy.
    pub energy_reduction: f64,
}

impl ComparisonRow {
    pub fn against_first(reports: &[SimReport]) -> Vec<Self> {
        let Some(base) = reports.first() else {
            return Vec::new();
        };
        reports
            .iter()
            .map(|r| ComparisonRow {
                style: r.style,
                memory: r.memory.clone(),
                runtime_s: r.runtime_s,
                energy_pj: r.energy.total(),
                speedup: base.runtime_s / r.runtime_s,
                energy_reduction: base.energy.total() / r.energy.total(),
            })
            .collect()
    }
}
