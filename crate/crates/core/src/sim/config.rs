use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::SimError;
use crate::bitslice::SliceConfig;
use crate::cost::{cvu_cost, iso_power_array_size, CostParams};
use crate::cvu::{macs_per_cycle, plan_composition, CvuConfig};

pub const DEFAULT_BUDGET_MW: f64 = 250.0;
/// Total weight scratchpad, split evenly across the units.
pub const DEFAULT_WEIGHT_SCRATCHPAD_BYTES: usize = 512 * 1024;
pub const DEFAULT_INPUT_BUFFER_BYTES: usize = 256 * 1024;
pub const DEFAULT_OUTPUT_BUFFER_BYTES: usize = 256 * 1024;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Style {
    /// Fixed 8x8 MAC per unit.
    Conventional,
    /// Composable unit with one lane per NBVE.
    ScalarComposable,
    /// Composable unit with `L` lanes per NBVE.
    VectorComposable,
}

impl Style {
    pub fn as_str(&self) -> &'static str {
        match self {
            Style::Conventional => "conventional",
            Style::ScalarComposable => "scalar",
            Style::VectorComposable => "vector",
        }
    }
}

impl fmt::Display for Style {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Style {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "conventional" | "baseline" => Ok(Style::Conventional),
            "scalar" | "scalar-composable" => Ok(Style::ScalarComposable),
            "vector" | "vector-composable" => Ok(Style::VectorComposable),
            _ => Err(format!("unknown style '{s}' (expected conventional, scalar or vector)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MemorySpec {
    pub name: String,
    pub bandwidth_bytes_per_sec: f64,
    pub pj_per_bit: f64,
}

impl MemorySpec {
    pub fn ddr4() -> Self {
        Self {
            name: "ddr4".into(),
            bandwidth_bytes_per_sec: 16e9,
            pj_per_bit: 15.0,
        }
    }

    pub fn hbm2() -> Self {
        Self {
            name: "hbm2".into(),
            bandwidth_bytes_per_sec: 256e9,
            pj_per_bit: 1.2,
        }
    }

    pub fn custom(bandwidth_bytes_per_sec: f64, pj_per_bit: f64) -> Self {
        Self {
            name: "custom".into(),
            bandwidth_bytes_per_sec,
            pj_per_bit,
        }
    }

    pub fn by_name(name: &str) -> Option<Self> {
        match name {
            "ddr4" => Some(Self::ddr4()),
            "hbm2" => Some(Self::hbm2()),
            _ => None,
        }
    }

    /// Bandwidth may be infinite; both fields must be positive.
    pub fn validate(&self) -> Result<(), SimError> {
        if !(self.bandwidth_bytes_per_sec > 0.0) {
            return Err(SimError::Config(format!("{}: bandwidth must be positive", self.name)));
        }
        if !(self.pj_per_bit >= 0.0 && self.pj_per_bit.is_finite()) {
            return Err(SimError::Config(format!("{}: access energy must be non-negative", self.name)));
        }
        Ok(())
    }
}

/// SRAM access energies in pJ per bit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SramEnergy {
    pub weight_pj_per_bit: f64,
    pub input_pj_per_bit: f64,
    pub output_pj_per_bit: f64,
}

impl Default for SramEnergy {
    fn default() -> Self {
        Self {
            weight_pj_per_bit: 0.04,
            input_pj_per_bit: 0.12,
            output_pj_per_bit: 0.12,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AcceleratorConfig {
    pub style: Style,
    pub rows: usize,
    pub cols: usize,
    /// Unit configuration; ignored by the conventional style.
    pub cvu: CvuConfig,
    /// Per unit.
    pub weight_scratchpad_bytes: usize,
    pub input_buffer_bytes: usize,
    pub output_buffer_bytes: usize,
    pub frequency_hz: f64,
    pub power_budget_mw: f64,
    pub sram: SramEnergy,
}

impl AcceleratorConfig {
    /// An array of `rows x cols` units with the default buffers split across
    /// them.
    pub fn new(style: Style, rows: usize, cols: usize, cvu: CvuConfig) -> Self {
        let units = (rows * cols).max(1);
        Self {
            style,
            rows,
            cols,
            cvu,
            weight_scratchpad_bytes: DEFAULT_WEIGHT_SCRATCHPAD_BYTES / units,
            input_buffer_bytes: DEFAULT_INPUT_BUFFER_BYTES,
            output_buffer_bytes: DEFAULT_OUTPUT_BUFFER_BYTES,
            frequency_hz: crate::cost::DEFAULT_FREQUENCY_HZ,
            power_budget_mw: DEFAULT_BUDGET_MW,
            sram: SramEnergy::default(),
        }
    }

    /// Default unit configuration of a style: 2-bit slices with 16 lanes for
    /// the vector style, one lane for the scalar style.
    pub fn default_cvu(style: Style) -> CvuConfig {
        let lanes = match style {
            Style::ScalarComposable => 1,
            _ => 16,
        };
        CvuConfig::new(lanes, SliceConfig::default()).expect("default unit is valid")
    }

    /// Largest near-square array whose units fit in `budget_mw`.
    pub fn iso_power(style: Style, params: &CostParams, budget_mw: f64) -> Result<Self, SimError> {
        Self::iso_power_with(style, Self::default_cvu(style), params, budget_mw)
    }

    pub fn iso_power_with(
        style: Style,
        cvu: CvuConfig,
        params: &CostParams,
        budget_mw: f64,
    ) -> Result<Self, SimError> {
        let probe = Self::new(style, 1, 1, cvu);
        let units = iso_power_array_size(budget_mw, probe.unit_power_mw(params));
        if units == 0 {
            return Err(SimError::Config(format!("budget of {budget_mw} mW fits no units")));
        }
        let rows = (units as f64).sqrt().floor() as usize;
        let cols = units / rows;
        let mut acc = Self::new(style, rows, cols, cvu);
        acc.power_budget_mw = budget_mw;
        acc.validate()?;
        Ok(acc)
    }

    pub fn units(&self) -> usize {
        self.rows * self.cols
    }

    /// Energy of one unit per active cycle, in pJ.
    pub fn unit_energy_pj(&self, params: &CostParams) -> f64 {
        match self.style {
            Style::Conventional => params.conventional_mac_energy(),
            _ => cvu_cost(&self.cvu, params).total.energy,
        }
    }

    pub fn unit_power_mw(&self, params: &CostParams) -> f64 {
        self.unit_energy_pj(params) * self.frequency_hz * 1e-9
    }

    pub fn array_power_mw(&self, params: &CostParams) -> f64 {
        self.unit_power_mw(params) * self.units() as f64
    }

    /// 8x8 MACs the whole array completes per cycle.
    pub fn mac_capacity(&self) -> usize {
        let per_unit = match self.style {
            Style::Conventional => 1,
            _ => {
                let max = self.cvu.max_bw();
                let plan = plan_composition(max, max, &self.cvu).expect("max bitwidth plans");
                macs_per_cycle(&plan, &self.cvu)
            }
        };
        self.units() * per_unit
    }

    pub fn validate(&self) -> Result<(), SimError> {
        if self.rows == 0 || self.cols == 0 {
            return Err(SimError::Config("array geometry must be positive".into()));
        }
        if self.style == Style::ScalarComposable && self.cvu.lanes() != 1 {
            return Err(SimError::Config(format!(
                "scalar-composable units have one lane, got {}",
                self.cvu.lanes()
            )));
        }
        if !(self.frequency_hz > 0.0 && self.frequency_hz.is_finite()) {
            return Err(SimError::Config("frequency must be positive".into()));
        }
        if self.input_buffer_bytes == 0 || self.output_buffer_bytes == 0 {
            return Err(SimError::Config("buffers must be non-empty".into()));
        }
        Ok(())
    }
}
