//! Browser bindings for the interactive demo. Each export takes plain
//! numbers or strings and returns a JSON document for the page to render.

use bitcompose::bitslice::{dot_exact, plane_products, QuantizedVector, SliceConfig};
use bitcompose::cost::{dse_sweep, CostParams};
use bitcompose::cvu::{macs_per_cycle, plan_composition, CvuConfig};
use bitcompose::sim::{compare, AcceleratorConfig, MemorySpec, Style};
use bitcompose::workloads::{bundled, to_homogeneous};
use serde_json::{json, Value};
use wasm_bindgen::prelude::*;

const BUDGET_MW: f64 = 250.0;

fn parse_values(text: &str) -> Result<Vec<i32>, String> {
    text.split(|c: char| c == ',' || c.is_whitespace())
        .filter(|s| !s.is_empty())
        .map(|s| s.parse::<i32>().map_err(|_| format!("not an integer: {s}")))
        .collect()
}

/// Per-MAC power and area for every lane count at one slice width.
pub fn dse_curve(slice_width: u8) -> Result<Value, String> {
    let params = CostParams::default_calibrated();
    let pts = dse_sweep(&[slice_width], &[1, 2, 4, 8, 16], &params).map_err(|e| e.to_string())?;
    Ok(Value::Array(
        pts.iter()
            .map(|p| {
                let cats: serde_json::Map<_, _> = p
                    .breakdown
                    .categories()
                    .iter()
                    .map(|(name, c)| (name.to_string(), json!(c.energy)))
                    .collect();
                json!({"lanes": p.lanes, "power": p.power_norm, "area": p.area_norm, "power_parts": cats})
            })
            .collect(),
    ))
}

/// Composition plan for one unit plus the slice-plane decomposition of `x . w`.
pub fn decompose(
    xs: &str,
    ws: &str,
    bw_x: u8,
    bw_w: u8,
    w_signed: bool,
    slice_width: u8,
    lanes: usize,
) -> Result<Value, String> {
    let x = QuantizedVector::new(parse_values(xs)?, bw_x, false).map_err(|e| e.to_string())?;
    let w = QuantizedVector::new(parse_values(ws)?, bw_w, w_signed).map_err(|e| e.to_string())?;
    let slice = SliceConfig::uniform(slice_width).map_err(|e| e.to_string())?;
    let cfg = CvuConfig::new(lanes, slice).map_err(|e| e.to_string())?;
    let plan = plan_composition(bw_x, bw_w, &cfg).map_err(|e| e.to_string())?;
    let products = plane_products(&x, &w, &slice).map_err(|e| e.to_string())?;
    let exact = dot_exact(&x, &w).map_err(|e| e.to_string())?;
    Ok(json!({
        "plan": {
            "bw_x": plan.bw_x,
            "bw_w": plan.bw_w,
            "clusters": plan.clusters,
            "nbves_per_cluster": plan.nbves_per_cluster,
            "effective_length": plan.effective_length,
            "macs_per_cycle": macs_per_cycle(&plan, &cfg),
            "nbves": cfg.nbve_count(),
        },
        "products": products.iter().map(|p| json!({
            "j": p.j, "k": p.k, "value": p.value, "shift": p.shift,
            "shifted": p.value << p.shift,
        })).collect::<Vec<_>>(),
        "sum": products.iter().map(|p| p.value << p.shift).sum::<i64>(),
        "exact": exact,
    }))
}

/// Iso-power comparison of the three unit styles on a bundled network.
pub fn compare_styles(network: &str, memory: &str, homogeneous: bool) -> Result<Value, String> {
    let params = CostParams::default_calibrated();
    let mut net = bundled(network).map_err(|e| e.to_string())?;
    if homogeneous {
        net = to_homogeneous(&net);
    }
    let mem = MemorySpec::by_name(memory).ok_or_else(|| format!("unknown memory '{memory}'"))?;
    let configs = [Style::Conventional, Style::ScalarComposable, Style::VectorComposable]
        .into_iter()
        .map(|s| AcceleratorConfig::iso_power(s, &params, BUDGET_MW).map(|a| (a, mem.clone())))
        .collect::<Result<Vec<_>, _>>()
        .map_err(|e| e.to_string())?;
    let rows = compare(&net, &configs, &params).map_err(|e| e.to_string())?;
    Ok(Value::Array(
        rows.iter()
            .zip(&configs)
            .map(|(r, (acc, _))| {
                json!({
                    "style": r.style,
                    "array": format!("{}x{}", acc.rows, acc.cols),
                    "runtime_s": r.runtime_s,
                    "energy_pj": r.energy_pj,
                    "speedup": r.speedup,
                    "energy_reduction": r.energy_reduction,
                })
            })
            .collect(),
    ))
}

fn to_js(r: Result<Value, String>) -> Result<String, JsError> {
    r.map(|v| v.to_string()).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen(js_name = dseCurve)]
pub fn dse_curve_js(slice_width: u8) -> Result<String, JsError> {
    to_js(dse_curve(slice_width))
}

#[wasm_bindgen(js_name = decompose)]
pub fn decompose_js(
    xs: &str,
    ws: &str,
    bw_x: u8,
    bw_w: u8,
    w_signed: bool,
    slice_width: u8,
    lanes: usize,
) -> Result<String, JsError> {
    to_js(decompose(xs, ws, bw_x, bw_w, w_signed, slice_width, lanes))
}

#[wasm_bindgen(js_name = compareStyles)]
pub fn compare_styles_js(network: &str, memory: &str, homogeneous: bool) -> Result<String, JsError> {
    to_js(compare_styles(network, memory, homogeneous))
}

#[wasm_bindgen(js_name = networkNames)]
pub fn network_names() -> String {
    json!(bitcompose::workloads::bundled_names()).to_string()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn curve_has_five_points() {
        let v = dse_curve(2).unwrap();
        assert_eq!(v.as_array().unwrap().len(), 5);
        assert!(dse_curve(3).is_err());
    }

    #[test]
    fn decomposition_sums_to_exact() {
        let v = decompose("3, 1 2 0", "-5,7,-8,1", 2, 4, true, 2, 4).unwrap();
        assert_eq!(v["sum"], v["exact"]);
        assert_eq!(v["exact"], json!(3 * -5 + 7 - 16));
        assert_eq!(v["products"].as_array().unwrap().len(), 2);
        assert!(decompose("1,x", "1,2", 2, 2, true, 2, 4).is_err());
    }

    #[test]
    fn comparison_is_relative_to_conventional() {
        let v = compare_styles("rnn", "hbm2", false).unwrap();
        let rows = v.as_array().unwrap();
        assert_eq!(rows.len(), 3);
        assert_eq!(rows[0]["speedup"], json!(1.0));
        assert!(compare_styles("rnn", "sram", false).is_err());
    }
}
