//! Fits component constants to normalized per-MAC targets.
//!
//! The adder bit is the unit of each metric; the AND cell, shifter and
//! register constants are free log-ratios. After the fit, energy is scaled so
//! a conventional MAC costs [`MAC_ENERGY_PJ`] per cycle and area so it costs
//! [`MAC_AREA`].

use serde::{Deserialize, Serialize};

use super::{ComponentConstants, CostError, CostParams, CvuStructure, MacStructure};
use crate::bitslice::SliceConfig;
use crate::cvu::CvuConfig;

pub const MAC_ENERGY_PJ: f64 = 0.4;
pub const MAC_AREA: f64 = 1000.0;

const LOG_MIN: f64 = -4.605_170_185_988_091; // ln 0.01
const LOG_MAX: f64 = 4.605_170_185_988_091;
const PENALTY: f64 = 100.0;
const GUARD: f64 = 1e-3;
const MAX_RESIDUAL: f64 = 0.25;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "value", rename_all = "snake_case")]
pub enum Target {
    Exact(f64),
    AtLeast(f64),
}

impl Target {
    /// Relative miss: `|v/t - 1|` for exact targets, shortfall for bounds.
    fn residual(self, v: f64) -> f64 {
        match self {
            Target::Exact(t) => (v / t - 1.0).abs(),
            Target::AtLeast(t) => (1.0 - v / t).max(0.0),
        }
    }

    fn objective(self, v: f64) -> f64 {
        match self {
            Target::Exact(_) => self.residual(v),
            Target::AtLeast(t) => PENALTY * (1.0 + GUARD - v / t).max(0.0),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Anchor {
    pub slice_width: u8,
    pub lanes: usize,
    pub power: Option<Target>,
    pub area: Option<Target>,
}

/// Published per-MAC figures: the 2-bit, L=16 point, the 2-bit scalar point
/// and the 1-bit, L=16 point that must not beat a conventional MAC.
pub fn default_anchors() -> Vec<Anchor> {
    vec![
        Anchor {
            slice_width: 2,
            lanes: 16,
            power: Some(Target::Exact(0.5)),
            area: Some(Target::Exact(0.59)),
        },
        Anchor {
            slice_width: 2,
            lanes: 1,
            power: Some(Target::Exact(1.2)),
            area: Some(Target::Exact(1.4)),
        },
        Anchor {
            slice_width: 1,
            lanes: 16,
            power: Some(Target::AtLeast(1.0)),
            area: Some(Target::AtLeast(1.0)),
        },
    ]
}

#[derive(Debug, Clone, PartialEq)]
pub struct Calibration {
    pub params: CostParams,
    /// Per-anchor relative residuals, `None` where the anchor had no target.
    pub power_residuals: Vec<Option<f64>>,
    pub area_residuals: Vec<Option<f64>>,
}

impl Calibration {
    pub fn max_residual(&self) -> f64 {
        self.power_residuals
            .iter()
            .chain(&self.area_residuals)
            .flatten()
            .fold(0.0, |a, &b| a.max(b))
    }
}

struct Point {
    cvu: CvuStructure,
    macs: f64,
}

fn norm(c: &ComponentConstants, p: &Point, mac: &MacStructure) -> f64 {
    let cvu: f64 = c.categories(&p.cvu).iter().sum();
    let conv: f64 = c.mac(mac).iter().sum();
    cvu / p.macs / conv
}

fn constants(x: &[f64; 3]) -> ComponentConstants {
    let e = |v: f64| v.clamp(LOG_MIN, LOG_MAX).exp();
    ComponentConstants {
        mult_per_cell: e(x[0]),
        adder_per_bit: 1.0,
        shifter_per_bit: e(x[1]),
        register_per_bit: e(x[2]),
    }
}

fn fit(points: &[(&Point, Target)], mac: &MacStructure) -> ComponentConstants {
    let obj = |x: &[f64; 3]| {
        let c = constants(x);
        let out_of_box: f64 = x.iter().map(|v| (v.abs() - LOG_MAX).max(0.0)).sum();
        points
            .iter()
            .map(|(p, t)| t.objective(norm(&c, p, mac)))
            .fold(0.0, f64::max)
            + out_of_box
    };
    let grid = [-2.0, 0.0, 2.0];
    let mut best = ([0.0; 3], f64::INFINITY);
    for &a in &grid {
        for &b in &grid {
            for &r in &grid {
                let (x, f) = nelder_mead(&obj, [a, b, r]);
                if f < best.1 {
                    best = (x, f);
                }
            }
        }
    }
    constants(&best.0)
}

/// Plain Nelder-Mead with restarts around the incumbent.
fn nelder_mead(f: &impl Fn(&[f64; 3]) -> f64, x0: [f64; 3]) -> ([f64; 3], f64) {
    let mut start = x0;
    let mut best = (x0, f(&x0));
    for _ in 0..4 {
        let mut simplex: Vec<([f64; 3], f64)> = (0..4)
            .map(|i| {
                let mut x = start;
                if i > 0 {
                    x[i - 1] += 0.5;
                }
                (x, f(&x))
            })
            .collect();
        for _ in 0..2000 {
            simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
            if (simplex[3].1 - simplex[0].1).abs() < 1e-13 {
                break;
            }
            let mut centroid = [0.0; 3];
            for (x, _) in &simplex[..3] {
                for d in 0..3 {
                    centroid[d] += x[d] / 3.0;
                }
            }
            let along = |t: f64| {
                let mut p = [0.0; 3];
                for d in 0..3 {
                    p[d] = centroid[d] + t * (simplex[3].0[d] - centroid[d]);
                }
                p
            };
            let xr = along(-1.0);
            let fr = f(&xr);
            if fr < simplex[0].1 {
                let xe = along(-2.0);
                let fe = f(&xe);
                simplex[3] = if fe < fr { (xe, fe) } else { (xr, fr) };
            } else if fr < simplex[2].1 {
                simplex[3] = (xr, fr);
            } else {
                let xc = if fr < simplex[3].1 { along(-0.5) } else { along(0.5) };
                let fc = f(&xc);
                if fc < fr.min(simplex[3].1) {
                    simplex[3] = (xc, fc);
                } else {
                    let x0 = simplex[0].0;
                    for s in simplex.iter_mut().skip(1) {
                        for d in 0..3 {
                            s.0[d] = x0[d] + 0.5 * (s.0[d] - x0[d]);
                        }
                        s.1 = f(&s.0);
                    }
                }
            }
        }
        simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
        if simplex[0].1 < best.1 {
            best = simplex[0];
        }
        start = best.0;
    }
    best
}

/// Fits energy and area constants independently to `anchors`.
pub fn calibrate(anchors: &[Anchor]) -> Result<Calibration, CostError> {
    if anchors.len() < 3 {
        return Err(CostError::TooFewAnchors(anchors.len()));
    }
    let mut points = Vec::with_capacity(anchors.len());
    for (i, a) in anchors.iter().enumerate() {
        if a.power.is_none() && a.area.is_none() {
            return Err(CostError::EmptyAnchor(i));
        }
        let slice = SliceConfig::uniform(a.slice_width).map_err(|e| CostError::Config(e.to_string()))?;
        let cfg = CvuConfig::new(a.lanes, slice).map_err(|e| CostError::Config(e.to_string()))?;
        points.push(Point {
            cvu: CvuStructure::of(&cfg),
            macs: super::homogeneous_macs(&cfg),
        });
    }
    let mac = MacStructure::conventional();
    let pick = |sel: fn(&Anchor) -> Option<Target>| -> Vec<(&Point, Target)> {
        anchors
            .iter()
            .zip(&points)
            .filter_map(|(a, p)| sel(a).map(|t| (p, t)))
            .collect()
    };
    let energy_pts = pick(|a| a.power);
    let area_pts = pick(|a| a.area);
    let energy = if energy_pts.is_empty() {
        constants(&[0.0; 3])
    } else {
        fit(&energy_pts, &mac)
    };
    let area = if area_pts.is_empty() {
        constants(&[0.0; 3])
    } else {
        fit(&area_pts, &mac)
    };

    let residuals = |c: &ComponentConstants, sel: fn(&Anchor) -> Option<Target>| -> Vec<Option<f64>> {
        anchors
            .iter()
            .zip(&points)
            .map(|(a, p)| sel(a).map(|t| t.residual(norm(c, p, &mac))))
            .collect()
    };
    let power_residuals = residuals(&energy, |a| a.power);
    let area_residuals = residuals(&area, |a| a.area);

    let e_scale = MAC_ENERGY_PJ / energy.mac(&mac).iter().sum::<f64>();
    let a_scale = MAC_AREA / area.mac(&mac).iter().sum::<f64>();
    let out = Calibration {
        params: CostParams::with_constants(energy.scaled(e_scale), area.scaled(a_scale)),
        power_residuals,
        area_residuals,
    };
    let max_error = out.max_residual();
    if max_error > MAX_RESIDUAL {
        return Err(CostError::Infeasible {
            max_error,
            residuals: out
                .power_residuals
                .iter()
                .chain(&out.area_residuals)
                .map(|r| r.unwrap_or(0.0))
                .collect(),
        });
    }
    Ok(out)
}
