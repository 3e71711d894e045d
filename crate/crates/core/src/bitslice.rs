//! Exact integer bit-slicing of quantized vectors and slice-plane dot products.
//!
//! A dot product over `bw_x`-bit inputs and `bw_w`-bit weights is rewritten as
//! a grid of narrow dot products, one per (input slice, weight slice) pair,
//! each scaled by `2^(alpha*j + beta*k)`. Slices are stored LSB-first. Signed
//! operands use two's complement where only the most-significant slice is read
//! as a signed value; every other slice is unsigned.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Largest operand bitwidth supported by the arithmetic.
pub const MAX_BITWIDTH: u8 = 8;

/// Slice widths the composition grid accepts.
pub const SLICE_WIDTHS: [u8; 3] = [1, 2, 4];

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ArithError {
    #[error("value {value} at index {index} does not fit in {bitwidth} {} bits", if *.signed { "signed" } else { "unsigned" })]
    Range {
        index: usize,
        value: i64,
        bitwidth: u8,
        signed: bool,
    },
    #[error("bitwidth {0} outside 1..={MAX_BITWIDTH}")]
    Bitwidth(u8),
    #[error("slice width {0} not in {{1, 2, 4}}")]
    SliceWidth(u8),
    #[error("slice width {slice_width} does not divide max bitwidth {max_bw}")]
    SliceDivisor { slice_width: u8, max_bw: u8 },
    #[error("length mismatch: {left} vs {right}")]
    Shape { left: usize, right: usize },
    #[error("64-bit accumulator overflow")]
    Overflow,
}

fn check_bitwidth(bw: u8) -> Result<(), ArithError> {
    if bw == 0 || bw > MAX_BITWIDTH {
        return Err(ArithError::Bitwidth(bw));
    }
    Ok(())
}

fn check_slice_width(sw: u8) -> Result<(), ArithError> {
    if !SLICE_WIDTHS.contains(&sw) {
        return Err(ArithError::SliceWidth(sw));
    }
    Ok(())
}

/// Inclusive value range of a `bitwidth`-bit integer.
pub fn value_range(bitwidth: u8, signed: bool) -> (i64, i64) {
    let bw = bitwidth as u32;
    if signed {
        (-(1i64 << (bw - 1)), (1i64 << (bw - 1)) - 1)
    } else {
        (0, (1i64 << bw) - 1)
    }
}

/// Bitwidth rounded up to the next multiple of `slice_width`.
pub fn padded_bitwidth(bitwidth: u8, slice_width: u8) -> u8 {
    bitwidth.div_ceil(slice_width) * slice_width
}

/// Integer vector with a declared bitwidth and signedness.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QuantizedVector {
    values: Vec<i32>,
    bitwidth: u8,
    signed: bool,
}

impl QuantizedVector {
    pub fn new(values: Vec<i32>, bitwidth: u8, signed: bool) -> Result<Self, ArithError> {
        check_bitwidth(bitwidth)?;
        let (lo, hi) = value_range(bitwidth, signed);
        if let Some((index, &value)) = values
            .iter()
            .enumerate()
            .find(|(_, &v)| (v as i64) < lo || (v as i64) > hi)
        {
            return Err(ArithError::Range {
                index,
                value: value as i64,
                bitwidth,
                signed,
            });
        }
        Ok(Self {
            values,
            bitwidth,
            signed,
        })
    }

    pub fn zeros(len: usize, bitwidth: u8, signed: bool) -> Result<Self, ArithError> {
        Self::new(vec![0; len], bitwidth, signed)
    }

    pub fn values(&self) -> &[i32] {
        &self.values
    }

    pub fn bitwidth(&self) -> u8 {
        self.bitwidth
    }

    pub fn signed(&self) -> bool {
        self.signed
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Reinterprets the same values at a wider bitwidth (sign/zero extension).
    pub fn widen(&self, bitwidth: u8) -> Result<Self, ArithError> {
        check_bitwidth(bitwidth)?;
        if bitwidth < self.bitwidth {
            return Err(ArithError::Bitwidth(bitwidth));
        }
        Ok(Self {
            values: self.values.clone(),
            bitwidth,
            signed: self.signed,
        })
    }

    /// Copy zero-padded to `len` elements.
    pub fn zero_padded(&self, len: usize) -> Self {
        let mut values = self.values.clone();
        if values.len() < len {
            values.resize(len, 0);
        }
        Self {
            values,
            bitwidth: self.bitwidth,
            signed: self.signed,
        }
    }
}

/// Slice widths for the input (`alpha`) and weight (`beta`) operands.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SliceConfig {
    alpha: u8,
    beta: u8,
    max_bw: u8,
}

impl SliceConfig {
    pub fn new(alpha: u8, beta: u8, max_bw: u8) -> Result<Self, ArithError> {
        check_slice_width(alpha)?;
        check_slice_width(beta)?;
        check_bitwidth(max_bw)?;
        for sw in [alpha, beta] {
            if max_bw % sw != 0 {
                return Err(ArithError::SliceDivisor {
                    slice_width: sw,
                    max_bw,
                });
            }
        }
        Ok(Self {
            alpha,
            beta,
            max_bw,
        })
    }

    /// Same slice width for both operands with the default 8-bit maximum.
    pub fn uniform(slice_width: u8) -> Result<Self, ArithError> {
        Self::new(slice_width, slice_width, MAX_BITWIDTH)
    }

    pub fn alpha(&self) -> u8 {
        self.alpha
    }

    pub fn beta(&self) -> u8 {
        self.beta
    }

    pub fn max_bw(&self) -> u8 {
        self.max_bw
    }
}

impl Default for SliceConfig {
    fn default() -> Self {
        Self {
            alpha: 2,
            beta: 2,
            max_bw: MAX_BITWIDTH,
        }
    }
}

/// Per-plane decomposition of a [`QuantizedVector`]; `planes[j][i]` is slice
/// `j` of element `i`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BitSlicedVector {
    planes: Vec<Vec<i32>>,
    slice_width: u8,
    signed_msb: bool,
    len: usize,
}

impl BitSlicedVector {
    pub fn planes(&self) -> &[Vec<i32>] {
        &self.planes
    }

    pub fn plane(&self, j: usize) -> &[i32] {
        &self.planes[j]
    }

    pub fn num_slices(&self) -> usize {
        self.planes.len()
    }

    pub fn slice_width(&self) -> u8 {
        self.slice_width
    }

    pub fn signed_msb(&self) -> bool {
        self.signed_msb
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    /// Rebuilds the original values as `sum_j 2^(sw*j) * slice_j`.
    pub fn reconstruct(&self) -> Vec<i64> {
        (0..self.len)
            .map(|i| {
                self.planes
                    .iter()
                    .enumerate()
                    .map(|(j, p)| (p[i] as i64) << (self.slice_width as u32 * j as u32))
                    .sum()
            })
            .collect()
    }
}

/// One narrow dot product of the composition grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SlicePlaneProduct {
    pub j: usize,
    pub k: usize,
    pub value: i64,
    pub shift: u32,
}

impl SlicePlaneProduct {
    pub fn shifted(&self) -> Result<i64, ArithError> {
        self.value
            .checked_mul(1i64 << self.shift)
            .ok_or(ArithError::Overflow)
    }
}

/// Splits `v` into LSB-first slices of `slice_width` bits.
///
/// The bitwidth is first padded to a multiple of the slice width by sign or
/// zero extension. For signed values the top slice carries the sign.
pub fn slice_value(
    v: i64,
    bitwidth: u8,
    slice_width: u8,
    signed: bool,
) -> Result<Vec<i64>, ArithError> {
    check_bitwidth(bitwidth)?;
    check_slice_width(slice_width)?;
    let (lo, hi) = value_range(bitwidth, signed);
    if v < lo || v > hi {
        return Err(ArithError::Range {
            index: 0,
            value: v,
            bitwidth,
            signed,
        });
    }
    let n = padded_bitwidth(bitwidth, slice_width) / slice_width;
    let sw = slice_width as u32;
    let mask = (1i64 << sw) - 1;
    Ok((0..n as u32)
        .map(|j| {
            let shifted = v >> (sw * j);
            if signed && j + 1 == n as u32 {
                shifted
            } else {
                shifted & mask
            }
        })
        .collect())
}

pub fn slice_vector(v: &QuantizedVector, slice_width: u8) -> Result<BitSlicedVector, ArithError> {
    check_slice_width(slice_width)?;
    let n = (padded_bitwidth(v.bitwidth, slice_width) / slice_width) as usize;
    let mut planes = vec![Vec::with_capacity(v.len()); n];
    for (i, &x) in v.values.iter().enumerate() {
        let slices = slice_value(x as i64, v.bitwidth, slice_width, v.signed).map_err(|e| match e {
            ArithError::Range {
                value,
                bitwidth,
                signed,
                ..
            } => ArithError::Range {
                index: i,
                value,
                bitwidth,
                signed,
            },
            other => other,
        })?;
        for (plane, s) in planes.iter_mut().zip(slices) {
            plane.push(s as i32);
        }
    }
    Ok(BitSlicedVector {
        planes,
        slice_width,
        signed_msb: v.signed,
        len: v.len(),
    })
}

/// Dot product of two slice sub-vectors, as one NBVE computes it.
pub fn nbve_dot(x_slice: &[i32], w_slice: &[i32]) -> Result<i64, ArithError> {
    if x_slice.len() != w_slice.len() {
        return Err(ArithError::Shape {
            left: x_slice.len(),
            right: w_slice.len(),
        });
    }
    Ok(x_slice
        .iter()
        .zip(w_slice)
        .map(|(&a, &b)| a as i64 * b as i64)
        .sum())
}

fn check_pair(x: &QuantizedVector, w: &QuantizedVector, cfg: &SliceConfig) -> Result<(), ArithError> {
    if x.len() != w.len() {
        return Err(ArithError::Shape {
            left: x.len(),
            right: w.len(),
        });
    }
    for bw in [x.bitwidth, w.bitwidth] {
        if bw > cfg.max_bw {
            return Err(ArithError::Bitwidth(bw));
        }
    }
    Ok(())
}

/// Every (j, k) slice-plane product of `x . w`, row-major in `j`.
pub fn plane_products(
    x: &QuantizedVector,
    w: &QuantizedVector,
    cfg: &SliceConfig,
) -> Result<Vec<SlicePlaneProduct>, ArithError> {
    check_pair(x, w, cfg)?;
    let xs = slice_vector(x, cfg.alpha)?;
    let ws = slice_vector(w, cfg.beta)?;
    let mut out = Vec::with_capacity(xs.num_slices() * ws.num_slices());
    for j in 0..xs.num_slices() {
        for k in 0..ws.num_slices() {
            out.push(SlicePlaneProduct {
                j,
                k,
                value: nbve_dot(xs.plane(j), ws.plane(k))?,
                shift: cfg.alpha as u32 * j as u32 + cfg.beta as u32 * k as u32,
            });
        }
    }
    Ok(out)
}

/// Shift-add recomposition of the slice-plane products.
pub fn compose_dot(x: &QuantizedVector, w: &QuantizedVector, cfg: &SliceConfig) -> Result<i64, ArithError> {
    plane_products(x, w, cfg)?
        .iter()
        .try_fold(0i64, |acc, p| acc.checked_add(p.shifted()?).ok_or(ArithError::Overflow))
}

/// Plain widening dot product. Reference for every composed path.
pub fn dot_exact(x: &QuantizedVector, w: &QuantizedVector) -> Result<i64, ArithError> {
    if x.len() != w.len() {
        return Err(ArithError::Shape {
            left: x.len(),
            right: w.len(),
        });
    }
    x.values
        .iter()
        .zip(&w.values)
        .try_fold(0i64, |acc, (&a, &b)| {
            acc.checked_add(a as i64 * b as i64).ok_or(ArithError::Overflow)
        })
}
