//! Technology-independent gate counts for a CVU and for a conventional MAC.
//!
//! Widths come from exact value-range analysis of the slice products, so an
//! adder that can never see a carry out of bit `w` is charged `w` bits.

use serde::{Deserialize, Serialize};

use crate::cvu::CvuConfig;

/// Bits needed to hold every integer in `[lo, hi]` in two's complement.
pub fn signed_bits(lo: i64, hi: i64) -> u32 {
    let mut b = 1;
    while lo < -(1i64 << (b - 1)) || hi > (1i64 << (b - 1)) - 1 {
        b += 1;
    }
    b
}

/// Range of one slice-by-slice product, over unsigned and signed-MSB slices.
pub fn slice_product_range(alpha: u8, beta: u8) -> (i64, i64) {
    let ranges = |sw: u8| {
        let sw = sw as u32;
        [(0, (1i64 << sw) - 1), (-(1i64 << (sw - 1)), (1i64 << (sw - 1)) - 1)]
    };
    let mut lo = i64::MAX;
    let mut hi = i64::MIN;
    for (xl, xh) in ranges(alpha) {
        for (wl, wh) in ranges(beta) {
            for p in [xl * wl, xl * wh, xh * wl, xh * wh] {
                lo = lo.min(p);
                hi = hi.max(p);
            }
        }
    }
    (lo, hi)
}

/// Pairwise reduction tree over `leaves`; odd nodes pass through to the next
/// level. Returns total adder bits, adder count and the output range.
pub fn adder_tree(leaves: &[(i64, i64)]) -> (u64, usize, (i64, i64)) {
    if leaves.is_empty() {
        return (0, 0, (0, 0));
    }
    let mut level = leaves.to_vec();
    let mut bits = 0u64;
    let mut adders = 0usize;
    while level.len() > 1 {
        let mut next = Vec::with_capacity(level.len().div_ceil(2));
        for pair in level.chunks(2) {
            match pair {
                [a, b] => {
                    let r = (a.0 + b.0, a.1 + b.1);
                    bits += signed_bits(r.0, r.1) as u64;
                    adders += 1;
                    next.push(r);
                }
                [a] => next.push(*a),
                _ => unreachable!(),
            }
        }
        level = next;
    }
    (bits, adders, level[0])
}

/// Gate-level inventory of one CVU.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CvuStructure {
    pub nbves: usize,
    pub lanes: usize,
    /// AND-plane cells of all slice multipliers (`sw_x * sw_w` each).
    pub mult_and_cells: u64,
    /// Reduction cells inside the slice multipliers, costed as adder bits.
    pub mult_reduction_cells: u64,
    /// Adder bits of all private NBVE trees.
    pub nbve_tree_bits: u64,
    pub nbve_tree_adders: usize,
    /// Adder bits of the shift-add tree that recombines NBVE outputs.
    pub global_tree_bits: u64,
    pub global_tree_adders: usize,
    pub nbve_output_bits: u32,
    /// Shifter bit-stages: output width times barrel-shifter mux levels.
    pub shifter_bit_stages: u64,
    pub output_bits: u32,
    pub register_bits: u64,
}

impl CvuStructure {
    pub fn of(cfg: &CvuConfig) -> Self {
        let alpha = cfg.slice().alpha();
        let beta = cfg.slice().beta();
        let xs = cfg.x_slices();
        let ws = cfg.w_slices();
        let nbves = cfg.nbve_count();
        let lanes = cfg.lanes();

        let product = slice_product_range(alpha, beta);
        let (tree_bits, tree_adders, (nlo, nhi)) = adder_tree(&vec![product; lanes]);
        let nbve_output_bits = signed_bits(nlo, nhi);

        let mut shifted = Vec::with_capacity(nbves);
        let mut shifts = Vec::with_capacity(nbves);
        for j in 0..xs {
            for k in 0..ws {
                let s = alpha as u32 * j as u32 + beta as u32 * k as u32;
                shifts.push(s);
                shifted.push((nlo << s, nhi << s));
            }
        }
        let (global_bits, global_adders, (glo, ghi)) = adder_tree(&shifted);
        let output_bits = signed_bits(glo, ghi);

        shifts.sort_unstable();
        shifts.dedup();
        let stages = (shifts.len() as f64).log2().ceil() as u64;
        let max_shift = *shifts.last().unwrap_or(&0);
        let shifter_bit_stages = nbves as u64 * (nbve_output_bits + max_shift) as u64 * stages;

        let ax = alpha as u64;
        let bw = beta as u64;
        let mults = (nbves * lanes) as u64;
        Self {
            nbves,
            lanes,
            mult_and_cells: mults * ax * bw,
            mult_reduction_cells: mults * (ax * bw - ax.max(bw)),
            nbve_tree_bits: nbves as u64 * tree_bits,
            nbve_tree_adders: nbves * tree_adders,
            global_tree_bits: global_bits,
            global_tree_adders: global_adders,
            nbve_output_bits,
            shifter_bit_stages,
            output_bits,
            register_bits: output_bits as u64,
        }
    }

    pub fn adder_bits(&self) -> u64 {
        self.nbve_tree_bits + self.global_tree_bits
    }
}

/// Gate-level inventory of the conventional 8x8 MAC: one array multiplier,
/// a 32-bit accumulate adder and a 32-bit accumulator register.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct MacStructure {
    pub mult_and_cells: u64,
    pub mult_reduction_cells: u64,
    pub adder_bits: u64,
    pub register_bits: u64,
}

impl MacStructure {
    pub fn conventional() -> Self {
        Self::with_widths(8, 32)
    }

    pub fn with_widths(operand_bits: u64, accumulator_bits: u64) -> Self {
        Self {
            mult_and_cells: operand_bits * operand_bits,
            mult_reduction_cells: operand_bits * (operand_bits - 1),
            adder_bits: accumulator_bits,
            register_bits: accumulator_bits,
        }
    }
}
