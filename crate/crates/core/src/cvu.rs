//! Composable Vector Unit: a bank of narrow-bitwidth vector engines (NBVEs)
//! that are clustered at runtime to match the operand bitwidths of a layer.
//!
//! Each NBVE owns `L` slice multipliers and a private adder tree and produces
//! one slice-plane dot product per cycle. A cluster of NBVEs covers the whole
//! (input slice x weight slice) grid of one dot product; its outputs are
//! shifted and summed (first level), then the clusters are summed into the
//! CVU scalar (second level).

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bitslice::{nbve_dot, slice_vector, ArithError, QuantizedVector, SliceConfig};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CvuError {
    #[error("bitwidth {bitwidth} outside 1..={max_bw}")]
    Bitwidth { bitwidth: u8, max_bw: u8 },
    #[error("lane count must be positive")]
    Lanes,
    #[error("expected {expected} tile pairs, got {got}")]
    TileCount { expected: usize, got: usize },
    #[error("tile {index} has {len} elements but the NBVE width is {lanes}")]
    TileLength { index: usize, len: usize, lanes: usize },
    #[error("tile {index}: operand bitwidth {bitwidth} exceeds plan bitwidth {plan}")]
    TileBitwidth { index: usize, bitwidth: u8, plan: u8 },
    #[error(transparent)]
    Arith(#[from] ArithError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CvuConfig {
    lanes: usize,
    slice: SliceConfig,
}

impl CvuConfig {
    pub fn new(lanes: usize, slice: SliceConfig) -> Result<Self, CvuError> {
        if lanes == 0 {
            return Err(CvuError::Lanes);
        }
        Ok(Self { lanes, slice })
    }

    /// `L` slice multipliers per NBVE.
    pub fn lanes(&self) -> usize {
        self.lanes
    }

    pub fn slice(&self) -> &SliceConfig {
        &self.slice
    }

    pub fn max_bw(&self) -> u8 {
        self.slice.max_bw()
    }

    pub fn x_slices(&self) -> usize {
        (self.slice.max_bw() / self.slice.alpha()) as usize
    }

    pub fn w_slices(&self) -> usize {
        (self.slice.max_bw() / self.slice.beta()) as usize
    }

    pub fn nbve_count(&self) -> usize {
        self.x_slices() * self.w_slices()
    }
}

impl Default for CvuConfig {
    /// 2-bit slicing, 8-bit maximum and 16 lanes: 16 NBVEs.
    fn default() -> Self {
        Self {
            lanes: 16,
            slice: SliceConfig::default(),
        }
    }
}

/// Bitwidth a plan reserves for an operand.
///
/// Rounds up to the smallest multiple of the slice width whose slice count
/// divides the maximum slice count, so that clusters tile the NBVE bank with
/// no idle engine. With 2-bit slices and an 8-bit maximum this is one of
/// {2, 4, 8}.
pub fn plan_bitwidth(bitwidth: u8, slice_width: u8, max_bw: u8) -> Result<u8, CvuError> {
    if bitwidth == 0 || bitwidth > max_bw {
        return Err(CvuError::Bitwidth { bitwidth, max_bw });
    }
    let max_slices = max_bw / slice_width;
    let min_slices = bitwidth.div_ceil(slice_width);
    let slices = (min_slices..=max_slices)
        .find(|s| max_slices % s == 0)
        .unwrap_or(max_slices);
    Ok(slices * slice_width)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CompositionPlan {
    pub bw_x: u8,
    pub bw_w: u8,
    pub alpha: u8,
    pub beta: u8,
    pub lanes: usize,
    pub clusters: usize,
    pub nbves_per_cluster: usize,
    /// Shift applied to each NBVE output inside a cluster, indexed as
    /// `j * w_slices + k`.
    pub shifts: Vec<u32>,
    pub effective_length: usize,
}

impl CompositionPlan {
    pub fn x_slices(&self) -> usize {
        (self.bw_x / self.alpha) as usize
    }

    pub fn w_slices(&self) -> usize {
        (self.bw_w / self.beta) as usize
    }

    /// (j, k) slice pair handled by NBVE `local` of a cluster.
    pub fn slice_pair(&self, local: usize) -> (usize, usize) {
        (local / self.w_slices(), local % self.w_slices())
    }

    /// Whether clusters are further summed into one scalar (second level).
    pub fn has_global_level(&self) -> bool {
        self.clusters > 1
    }
}

pub fn plan_composition(bw_x: u8, bw_w: u8, cfg: &CvuConfig) -> Result<CompositionPlan, CvuError> {
    let alpha = cfg.slice.alpha();
    let beta = cfg.slice.beta();
    let px = plan_bitwidth(bw_x, alpha, cfg.max_bw())?;
    let pw = plan_bitwidth(bw_w, beta, cfg.max_bw())?;
    let xs = (px / alpha) as usize;
    let ws = (pw / beta) as usize;
    let nbves_per_cluster = xs * ws;
    let clusters = cfg.nbve_count() / nbves_per_cluster;
    let shifts = (0..xs)
        .flat_map(|j| (0..ws).map(move |k| alpha as u32 * j as u32 + beta as u32 * k as u32))
        .collect();
    Ok(CompositionPlan {
        bw_x: px,
        bw_w: pw,
        alpha,
        beta,
        lanes: cfg.lanes,
        clusters,
        nbves_per_cluster,
        shifts,
        effective_length: clusters * cfg.lanes,
    })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CvuOutput {
    /// One completed dot product per cluster.
    pub scalars: Vec<i64>,
}

impl CvuOutput {
    /// Second-level aggregate across clusters.
    pub fn aggregate(&self) -> i64 {
        self.scalars.iter().sum()
    }
}

/// Runs one CVU cycle: cluster `c` computes `x_tiles[c] . w_tiles[c]` through
/// its NBVEs and the shift-add tree. Short tiles are zero-padded to `L`.
pub fn execute_cycle(
    x_tiles: &[QuantizedVector],
    w_tiles: &[QuantizedVector],
    plan: &CompositionPlan,
) -> Result<CvuOutput, CvuError> {
    for got in [x_tiles.len(), w_tiles.len()] {
        if got != plan.clusters {
            return Err(CvuError::TileCount {
                expected: plan.clusters,
                got,
            });
        }
    }
    let scalars = x_tiles
        .iter()
        .zip(w_tiles)
        .enumerate()
        .map(|(index, (x, w))| run_cluster(index, x, w, plan))
        .collect::<Result<_, _>>()?;
    Ok(CvuOutput { scalars })
}

fn run_cluster(
    index: usize,
    x: &QuantizedVector,
    w: &QuantizedVector,
    plan: &CompositionPlan,
) -> Result<i64, CvuError> {
    if x.len() != w.len() {
        return Err(ArithError::Shape {
            left: x.len(),
            right: w.len(),
        }
        .into());
    }
    if x.len() > plan.lanes {
        return Err(CvuError::TileLength {
            index,
            len: x.len(),
            lanes: plan.lanes,
        });
    }
    for (bitwidth, pb) in [(x.bitwidth(), plan.bw_x), (w.bitwidth(), plan.bw_w)] {
        if bitwidth > pb {
            return Err(CvuError::TileBitwidth {
                index,
                bitwidth,
                plan: pb,
            });
        }
    }
    let xs = slice_vector(&x.widen(plan.bw_x)?.zero_padded(plan.lanes), plan.alpha)?;
    let ws = slice_vector(&w.widen(plan.bw_w)?.zero_padded(plan.lanes), plan.beta)?;
    let mut acc = 0i64;
    for (local, &shift) in plan.shifts.iter().enumerate() {
        let (j, k) = plan.slice_pair(local);
        let partial = nbve_dot(xs.plane(j), ws.plane(k))?;
        acc = partial
            .checked_mul(1i64 << shift)
            .and_then(|s| acc.checked_add(s))
            .ok_or(ArithError::Overflow)?;
    }
    Ok(acc)
}

/// Multiply-accumulates completed per CVU per cycle under `plan`.
pub fn macs_per_cycle(plan: &CompositionPlan, cfg: &CvuConfig) -> usize {
    plan.clusters * cfg.lanes
}

/// Useful fraction of the lanes when only `useful_macs` of the
/// `clusters * L` slots carry data.
pub fn utilization(useful_macs: usize, plan: &CompositionPlan) -> f64 {
    let slots = plan.clusters * plan.lanes;
    if slots == 0 {
        return 0.0;
    }
    useful_macs.min(slots) as f64 / slots as f64
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(lanes: usize) -> CvuConfig {
        CvuConfig::new(lanes, SliceConfig::default()).unwrap()
    }

    #[test]
    fn default_has_sixteen_nbves() {
        assert_eq!(CvuConfig::default().nbve_count(), 16);
        assert_eq!(CvuConfig::new(4, SliceConfig::uniform(1).unwrap()).unwrap().nbve_count(), 64);
    }

    #[test]
    fn named_modes() {
        let c = cfg(16);
        let p = plan_composition(8, 8, &c).unwrap();
        assert_eq!((p.clusters, p.nbves_per_cluster, p.effective_length), (1, 16, 16));
        assert!(!p.has_global_level());
        let p = plan_composition(8, 2, &c).unwrap();
        assert_eq!((p.clusters, p.nbves_per_cluster, p.effective_length), (4, 4, 64));
        let p = plan_composition(2, 2, &c).unwrap();
        assert_eq!((p.clusters, p.nbves_per_cluster), (16, 1));
        let p = plan_composition(4, 4, &c).unwrap();
        assert_eq!((p.clusters, p.nbves_per_cluster, p.effective_length), (4, 4, 64));
    }

    #[test]
    fn odd_bitwidths_round_up_to_divisors() {
        assert_eq!(plan_bitwidth(3, 2, 8).unwrap(), 4);
        assert_eq!(plan_bitwidth(5, 2, 8).unwrap(), 8);
        assert_eq!(plan_bitwidth(1, 2, 8).unwrap(), 2);
        assert_eq!(plan_bitwidth(3, 1, 8).unwrap(), 4);
        assert_eq!(plan_bitwidth(2, 4, 8).unwrap(), 4);
        assert!(plan_bitwidth(0, 2, 8).is_err());
        assert!(plan_bitwidth(9, 2, 8).is_err());
    }

    #[test]
    fn shifts_follow_slice_significance() {
        let p = plan_composition(8, 4, &cfg(4)).unwrap();
        assert_eq!(p.shifts.len(), 8);
        assert_eq!(p.shifts, vec![0, 2, 2, 4, 4, 6, 6, 8]);
    }

    #[test]
    fn execute_homogeneous() {
        let p = plan_composition(8, 8, &cfg(2)).unwrap();
        let x = QuantizedVector::new(vec![13, 5], 8, false).unwrap();
        let w = QuantizedVector::new(vec![9, 6], 8, false).unwrap();
        let out = execute_cycle(&[x], &[w], &p).unwrap();
        assert_eq!(out.scalars, vec![147]);
    }

    #[test]
    fn execute_two_bit_mode() {
        let p = plan_composition(2, 2, &cfg(16)).unwrap();
        let one = QuantizedVector::new(vec![1], 2, false).unwrap();
        let xs = vec![one.clone(); 16];
        let out = execute_cycle(&xs, &xs, &p).unwrap();
        assert_eq!(out.scalars, vec![1; 16]);
        assert_eq!(out.aggregate(), 16);
    }

    #[test]
    fn execute_rejects_bad_tiles() {
        let p = plan_composition(8, 2, &cfg(2)).unwrap();
        let x = QuantizedVector::new(vec![1, 2], 8, true).unwrap();
        let w = QuantizedVector::new(vec![1, 1], 2, true).unwrap();
        assert!(matches!(
            execute_cycle(&[x.clone()], &[w.clone()], &p),
            Err(CvuError::TileCount { expected: 4, got: 1 })
        ));
        let long = QuantizedVector::new(vec![1, 2, 3], 8, true).unwrap();
        let wl = QuantizedVector::new(vec![1, 1, 1], 2, true).unwrap();
        let xs = vec![x.clone(), x.clone(), x.clone(), long];
        let ws = vec![w.clone(), w.clone(), w.clone(), wl];
        assert!(matches!(
            execute_cycle(&xs, &ws, &p),
            Err(CvuError::TileLength { index: 3, len: 3, lanes: 2 })
        ));
        let wide = QuantizedVector::new(vec![1, 1], 4, true).unwrap();
        let ws = vec![w.clone(), wide, w.clone(), w];
        assert!(matches!(
            execute_cycle(&[x.clone(), x.clone(), x.clone(), x], &ws, &p),
            Err(CvuError::TileBitwidth { index: 1, .. })
        ));
    }

    #[test]
    fn throughput_examples() {
        let c = cfg(16);
        let mpc = |bx, bw| macs_per_cycle(&plan_composition(bx, bw, &c).unwrap(), &c);
        assert_eq!(mpc(8, 8), 16);
        assert_eq!(mpc(8, 2), 64);
        assert_eq!(mpc(2, 2), 256);
        let scalar = cfg(1);
        assert_eq!(macs_per_cycle(&plan_composition(8, 8, &scalar).unwrap(), &scalar), 1);
    }

    #[test]
    fn short_tiles_report_utilization() {
        let p = plan_composition(8, 8, &cfg(16)).unwrap();
        assert_eq!(utilization(8, &p), 0.5);
        assert_eq!(utilization(16, &p), 1.0);
    }
}
