//! Power and area model of a CVU, normalized per 8x8 MAC against a
//! conventional MAC built from the same components.

mod calibrate;
pub mod structure;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bitslice::{SliceConfig, SLICE_WIDTHS};
use crate::cvu::{macs_per_cycle, plan_composition, CvuConfig};

pub use calibrate::{calibrate, default_anchors, Anchor, Calibration, Target, MAC_AREA, MAC_ENERGY_PJ};
pub use structure::{CvuStructure, MacStructure};

/// Clock used to turn per-cycle energy into power.
pub const DEFAULT_FREQUENCY_HZ: f64 = 5.0e8;

const DEFAULT_PARAMS: &str = include_str!("../../data/cost_params.toml");

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CostError {
    #[error("calibration needs at least 3 anchors, got {0}")]
    TooFewAnchors(usize),
    #[error("anchor {0} has no power or area target")]
    EmptyAnchor(usize),
    #[error("calibration infeasible: max relative error {max_error:.3} (residuals {residuals:?})")]
    Infeasible { max_error: f64, residuals: Vec<f64> },
    #[error("invalid design point: {0}")]
    Config(String),
    #[error("cost parameter {0} must be strictly positive")]
    NonPositive(&'static str),
    #[error("unsupported cost parameter file version {0}")]
    Version(u32),
    #[error("cost parameter file: {0}")]
    Parse(String),
}

/// Per-unit constants of one metric (energy in pJ per cycle, or area in um^2).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ComponentConstants {
    /// One AND-plane cell of a multiplier; a `sw x sw` multiplier has `sw^2`.
    pub mult_per_cell: f64,
    /// One full-adder bit, shared by adder trees and multiplier reduction.
    pub adder_per_bit: f64,
    /// One bit of one barrel-shifter mux level.
    pub shifter_per_bit: f64,
    pub register_per_bit: f64,
}

impl ComponentConstants {
    fn validate(&self, metric: &'static str) -> Result<(), CostError> {
        let all = [
            self.mult_per_cell,
            self.adder_per_bit,
            self.shifter_per_bit,
            self.register_per_bit,
        ];
        if all.iter().all(|v| v.is_finite() && *v > 0.0) {
            Ok(())
        } else {
            Err(CostError::NonPositive(metric))
        }
    }

    fn scaled(&self, k: f64) -> Self {
        Self {
            mult_per_cell: self.mult_per_cell * k,
            adder_per_bit: self.adder_per_bit * k,
            shifter_per_bit: self.shifter_per_bit * k,
            register_per_bit: self.register_per_bit * k,
        }
    }

    /// Multiplier cost as a function of slice width: `sw^2` AND cells plus
    /// `sw*(sw-1)` reduction cells.
    pub fn mult(&self, sw: u8) -> f64 {
        let sw = sw as f64;
        self.mult_per_cell * sw * sw + self.adder_per_bit * sw * (sw - 1.0)
    }

    fn categories(&self, s: &CvuStructure) -> [f64; 4] {
        [
            self.mult_per_cell * s.mult_and_cells as f64
                + self.adder_per_bit * s.mult_reduction_cells as f64,
            self.adder_per_bit * s.adder_bits() as f64,
            self.shifter_per_bit * s.shifter_bit_stages as f64,
            self.register_per_bit * s.register_bits as f64,
        ]
    }

    fn mac(&self, m: &MacStructure) -> [f64; 4] {
        [
            self.mult_per_cell * m.mult_and_cells as f64
                + self.adder_per_bit * m.mult_reduction_cells as f64,
            self.adder_per_bit * m.adder_bits as f64,
            0.0,
            self.register_per_bit * m.register_bits as f64,
        ]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CostParams {
    pub version: u32,
    pub frequency_hz: f64,
    /// Energy constants in pJ per active cycle.
    pub energy: ComponentConstants,
    /// Area constants in um^2.
    pub area: ComponentConstants,
}

impl CostParams {
    pub const VERSION: u32 = 1;

    /// Calibrated parameter set shipped with the crate.
    pub fn default_calibrated() -> Self {
        Self::from_toml(DEFAULT_PARAMS).expect("bundled cost parameters are valid")
    }

    pub fn from_toml(text: &str) -> Result<Self, CostError> {
        let p: CostParams = toml::from_str(text).map_err(|e| CostError::Parse(e.to_string()))?;
        p.validate()?;
        Ok(p)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("cost parameters serialize")
    }

    pub fn validate(&self) -> Result<(), CostError> {
        if self.version != Self::VERSION {
            return Err(CostError::Version(self.version));
        }
        if !(self.frequency_hz.is_finite() && self.frequency_hz > 0.0) {
            return Err(CostError::NonPositive("frequency_hz"));
        }
        self.energy.validate("energy")?;
        self.area.validate("area")
    }

    pub fn mult_energy(&self, sw: u8) -> f64 {
        self.energy.mult(sw)
    }

    pub fn mult_area(&self, sw: u8) -> f64 {
        self.area.mult(sw)
    }

    /// Power in mW of a block spending `energy_pj` every cycle.
    pub fn power_mw(&self, energy_pj: f64) -> f64 {
        energy_pj * self.frequency_hz * 1e-9
    }

    pub fn conventional_mac_energy(&self) -> f64 {
        self.energy.mac(&MacStructure::conventional()).iter().sum()
    }

    pub fn conventional_mac_power(&self) -> f64 {
        self.power_mw(self.conventional_mac_energy())
    }

    pub fn conventional_mac_area(&self) -> f64 {
        self.area.mac(&MacStructure::conventional()).iter().sum()
    }

    pub fn conventional_mac_cost(&self) -> CostBreakdown {
        let m = MacStructure::conventional();
        CostBreakdown::from_parts(self.energy.mac(&m), self.area.mac(&m))
    }

    pub(crate) fn with_constants(energy: ComponentConstants, area: ComponentConstants) -> Self {
        Self {
            version: Self::VERSION,
            frequency_hz: DEFAULT_FREQUENCY_HZ,
            energy,
            area,
        }
    }
}

impl Default for CostParams {
    fn default() -> Self {
        Self::default_calibrated()
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct ComponentCost {
    /// pJ per cycle.
    pub energy: f64,
    pub area: f64,
}

impl ComponentCost {
    fn scaled(self, k: f64) -> Self {
        Self {
            energy: self.energy * k,
            area: self.area * k,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct CostBreakdown {
    pub multiply: ComponentCost,
    pub add: ComponentCost,
    pub shift: ComponentCost,
    pub register: ComponentCost,
    pub total: ComponentCost,
}

impl CostBreakdown {
    fn from_parts(energy: [f64; 4], area: [f64; 4]) -> Self {
        let c = |i: usize| ComponentCost {
            energy: energy[i],
            area: area[i],
        };
        Self {
            multiply: c(0),
            add: c(1),
            shift: c(2),
            register: c(3),
            total: ComponentCost {
                energy: energy.iter().sum(),
                area: area.iter().sum(),
            },
        }
    }

    pub fn categories(&self) -> [(&'static str, ComponentCost); 4] {
        [
            ("multiply", self.multiply),
            ("add", self.add),
            ("shift", self.shift),
            ("register", self.register),
        ]
    }

    /// Every category and the total multiplied by `k`.
    pub fn scaled(&self, k: f64) -> Self {
        Self {
            multiply: self.multiply.scaled(k),
            add: self.add.scaled(k),
            shift: self.shift.scaled(k),
            register: self.register.scaled(k),
            total: self.total.scaled(k),
        }
    }
}

pub fn cvu_cost(cfg: &CvuConfig, params: &CostParams) -> CostBreakdown {
    let s = CvuStructure::of(cfg);
    CostBreakdown::from_parts(params.energy.categories(&s), params.area.categories(&s))
}

/// CVU power in mW at the model frequency.
pub fn cvu_power_mw(cfg: &CvuConfig, params: &CostParams) -> f64 {
    params.power_mw(cvu_cost(cfg, params).total.energy)
}

fn homogeneous_macs(cfg: &CvuConfig) -> f64 {
    let max = cfg.max_bw();
    let plan = plan_composition(max, max, cfg).expect("max bitwidth is always plannable");
    macs_per_cycle(&plan, cfg) as f64
}

/// (power, area) per 8x8 MAC divided by the conventional MAC's.
pub fn per_mac_normalized(cfg: &CvuConfig, params: &CostParams) -> (f64, f64) {
    let b = cvu_cost(cfg, params);
    let macs = homogeneous_macs(cfg);
    (
        b.total.energy / macs / params.conventional_mac_energy(),
        b.total.area / macs / params.conventional_mac_area(),
    )
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DsePoint {
    pub slice_width: u8,
    pub lanes: usize,
    pub power_norm: f64,
    pub area_norm: f64,
    /// Per-MAC breakdown normalized to the conventional MAC totals.
    pub breakdown: CostBreakdown,
}

pub fn dse_point(slice_width: u8, lanes: usize, params: &CostParams) -> Result<DsePoint, CostError> {
    let slice = SliceConfig::uniform(slice_width).map_err(|e| CostError::Config(e.to_string()))?;
    let cfg = CvuConfig::new(lanes, slice).map_err(|e| CostError::Config(e.to_string()))?;
    let raw = cvu_cost(&cfg, params);
    let macs = homogeneous_macs(&cfg);
    let (pe, pa) = (params.conventional_mac_energy(), params.conventional_mac_area());
    let norm = |c: ComponentCost| ComponentCost {
        energy: c.energy / macs / pe,
        area: c.area / macs / pa,
    };
    let breakdown = CostBreakdown {
        multiply: norm(raw.multiply),
        add: norm(raw.add),
        shift: norm(raw.shift),
        register: norm(raw.register),
        total: norm(raw.total),
    };
    Ok(DsePoint {
        slice_width,
        lanes,
        power_norm: breakdown.total.energy,
        area_norm: breakdown.total.area,
        breakdown,
    })
}

/// One point per (slice width, L) pair, ordered by slice width then L.
pub fn dse_sweep(
    slice_widths: &[u8],
    lanes: &[usize],
    params: &CostParams,
) -> Result<Vec<DsePoint>, CostError> {
    let mut sws = slice_widths.to_vec();
    sws.sort_unstable();
    sws.dedup();
    let mut ls = lanes.to_vec();
    ls.sort_unstable();
    ls.dedup();
    if let Some(bad) = sws.iter().find(|s| !SLICE_WIDTHS.contains(s)) {
        return Err(CostError::Config(format!("slice width {bad} not in {{1, 2, 4}}")));
    }
    sws.iter()
        .flat_map(|&sw| ls.iter().map(move |&l| (sw, l)))
        .map(|(sw, l)| dse_point(sw, l, params))
        .collect()
}

/// How many units of `per_unit_power` fit in `power_budget` (both in mW).
/// Non-positive or non-finite inputs give 0.
pub fn iso_power_array_size(power_budget: f64, per_unit_power: f64) -> usize {
    if !(power_budget.is_finite() && per_unit_power.is_finite()) || power_budget <= 0.0 || per_unit_power <= 0.0 {
        return 0;
    }
    (power_budget / per_unit_power).floor() as usize
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(sw: u8, lanes: usize) -> CvuConfig {
        CvuConfig::new(lanes, SliceConfig::uniform(sw).unwrap()).unwrap()
    }

    #[test]
    fn shipped_params_load() {
        let p = CostParams::default_calibrated();
        assert_eq!(p.version, CostParams::VERSION);
        assert_eq!(p.frequency_hz, DEFAULT_FREQUENCY_HZ);
        let back = CostParams::from_toml(&p.to_toml()).unwrap();
        assert_eq!(back, p);
    }

    #[test]
    fn rejects_non_positive_and_wrong_version() {
        let mut p = CostParams::default_calibrated();
        p.energy.shifter_per_bit = 0.0;
        assert_eq!(p.validate(), Err(CostError::NonPositive("energy")));
        let mut p = CostParams::default_calibrated();
        p.version = 7;
        assert_eq!(p.validate(), Err(CostError::Version(7)));
        assert!(matches!(CostParams::from_toml("version = 1"), Err(CostError::Parse(_))));
    }

    #[test]
    fn breakdown_sums_to_total() {
        let p = CostParams::default_calibrated();
        for sw in [1, 2, 4] {
            for l in [1, 2, 4, 8, 16] {
                let b = cvu_cost(&cfg(sw, l), &p);
                let e: f64 = b.categories().iter().map(|(_, c)| c.energy).sum();
                let a: f64 = b.categories().iter().map(|(_, c)| c.area).sum();
                assert!((e - b.total.energy).abs() < 1e-12 * e.max(1.0));
                assert!((a - b.total.area).abs() < 1e-12 * a.max(1.0));
                assert!(b.categories().iter().all(|(_, c)| c.energy >= 0.0 && c.area >= 0.0));
            }
        }
    }

    #[test]
    fn adder_tree_dominates_default_point() {
        let b = cvu_cost(&CvuConfig::default(), &CostParams::default_calibrated());
        for (name, c) in b.categories() {
            if name != "add" {
                assert!(b.add.energy >= c.energy, "{name} energy above add");
                assert!(b.add.area >= c.area, "{name} area above add");
            }
        }
    }

    #[test]
    fn single_lane_has_no_private_tree() {
        let s = CvuStructure::of(&cfg(2, 1));
        assert_eq!(s.nbve_tree_bits, 0);
    }

    #[test]
    fn doubling_lanes_less_than_doubles_add_cost() {
        let p = CostParams::default_calibrated();
        let a8 = cvu_cost(&cfg(2, 8), &p).add;
        let a16 = cvu_cost(&cfg(2, 16), &p).add;
        assert!(a16.energy < 2.0 * a8.energy);
        assert!(a16.area < 2.0 * a8.area);
    }

    #[test]
    fn sweep_order_and_count() {
        let p = CostParams::default_calibrated();
        let pts = dse_sweep(&[2, 1], &[16, 1, 2, 4, 8], &p).unwrap();
        assert_eq!(pts.len(), 10);
        let keys: Vec<_> = pts.iter().map(|d| (d.slice_width, d.lanes)).collect();
        let mut sorted = keys.clone();
        sorted.sort();
        assert_eq!(keys, sorted);
        assert!(dse_sweep(&[3], &[1], &p).is_err());
    }

    #[test]
    fn iso_power_examples() {
        assert_eq!(iso_power_array_size(250.0, 0.5), 500);
        assert_eq!(iso_power_array_size(0.0, 0.5), 0);
        assert_eq!(iso_power_array_size(250.0, 0.0), 0);
        assert_eq!(iso_power_array_size(1.0, 0.3), 3);
    }

    #[test]
    fn mult_cost_is_quadratic_in_slice_width() {
        let p = CostParams::default_calibrated();
        let e = &p.energy;
        let expect = |sw: f64| e.mult_per_cell * sw * sw + e.adder_per_bit * sw * (sw - 1.0);
        for sw in [1u8, 2, 4, 8] {
            assert!((p.mult_energy(sw) - expect(sw as f64)).abs() < 1e-15);
        }
    }
}
