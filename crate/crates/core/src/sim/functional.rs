//! Bit-true GEMM on each unit style. All styles must produce identical
//! outputs; only their cycle and energy accounting differs.

use super::{AcceleratorConfig, SimError, Style};
use crate::bitslice::{ArithError, QuantizedVector};
use crate::cvu::{execute_cycle, plan_composition, CvuError};

/// `out[m][n] = weights[m] . inputs[n]`, accumulated in a 64-bit register.
/// Every weight row and input column must have the same length.
pub fn gemm(
    acc: &AcceleratorConfig,
    weights: &[QuantizedVector],
    inputs: &[QuantizedVector],
) -> Result<Vec<Vec<i64>>, SimError> {
    let k = weights.first().or(inputs.first()).map_or(0, |v| v.len());
    if let Some(v) = weights.iter().chain(inputs).find(|v| v.len() != k) {
        return Err(SimError::Shape(format!("expected length {k}, found {}", v.len())));
    }
    weights
        .iter()
        .map(|w| {
            inputs
                .iter()
                .map(|x| match acc.style {
                    Style::Conventional => mac_dot(x, w),
                    _ => composed_dot(acc, x, w),
                })
                .collect()
        })
        .collect()
}

fn mac_dot(x: &QuantizedVector, w: &QuantizedVector) -> Result<i64, SimError> {
    x.values()
        .iter()
        .zip(w.values())
        .try_fold(0i64, |acc, (&a, &b)| acc.checked_add(a as i64 * b as i64))
        .ok_or(SimError::Overflow)
}

fn segment(v: &QuantizedVector, lo: usize, hi: usize) -> Result<QuantizedVector, ArithError> {
    let hi = hi.min(v.len());
    let lo = lo.min(hi);
    QuantizedVector::new(v.values()[lo..hi].to_vec(), v.bitwidth(), v.signed())
}

fn composed_dot(acc: &AcceleratorConfig, x: &QuantizedVector, w: &QuantizedVector) -> Result<i64, SimError> {
    let plan = plan_composition(x.bitwidth(), w.bitwidth(), &acc.cvu)?;
    let l = plan.lanes;
    let e = plan.effective_length;
    let mut total = 0i64;
    for base in (0..x.len()).step_by(e.max(1)) {
        let mut xs = Vec::with_capacity(plan.clusters);
        let mut ws = Vec::with_capacity(plan.clusters);
        for c in 0..plan.clusters {
            let (lo, hi) = (base + c * l, base + (c + 1) * l);
            xs.push(segment(x, lo, hi).map_err(CvuError::from)?);
            ws.push(segment(w, lo, hi).map_err(CvuError::from)?);
        }
        let out = execute_cycle(&xs, &ws, &plan).map_err(|e| match e {
            CvuError::Arith(ArithError::Overflow) => SimError::Overflow,
            other => other.into(),
        })?;
        for s in out.scalars {
            total = total.checked_add(s).ok_or(SimError::Overflow)?;
        }
    }
    Ok(total)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn qv(values: &[i32], bw: u8, signed: bool) -> QuantizedVector {
        QuantizedVector::new(values.to_vec(), bw, signed).unwrap()
    }

    #[test]
    fn styles_agree_on_small_gemm() {
        let w = vec![qv(&[1, -2, 3, -4, 5], 4, true), qv(&[-8, 7, 0, 1, -1], 4, true)];
        let x = vec![qv(&[3, 2, 1, 0, 3], 2, false), qv(&[1, 1, 1, 1, 1], 2, false)];
        let expect = vec![vec![17, 3], vec![-13, -1]];
        for style in [Style::Conventional, Style::ScalarComposable, Style::VectorComposable] {
            let mut acc = AcceleratorConfig::new(style, 2, 2, AcceleratorConfig::default_cvu(style));
            if style == Style::VectorComposable {
                acc.cvu = crate::cvu::CvuConfig::new(2, crate::bitslice::SliceConfig::default()).unwrap();
            }
            assert_eq!(gemm(&acc, &w, &x).unwrap(), expect, "{style}");
        }
    }

    #[test]
    fn ragged_operands_rejected() {
        let acc = AcceleratorConfig::new(Style::Conventional, 1, 1, AcceleratorConfig::default_cvu(Style::Conventional));
        let w = vec![qv(&[1, 2], 8, true)];
        let x = vec![qv(&[1], 8, true)];
        assert!(matches!(gemm(&acc, &w, &x), Err(SimError::Shape(_))));
    }
}
