use bitcompose::bitslice::SliceConfig;
use bitcompose::cost::{calibrate, cvu_cost, default_anchors, dse_sweep, iso_power_array_size, per_mac_normalized, CostParams};
use bitcompose::cvu::CvuConfig;

fn at(sw: u8, l: usize, p: &CostParams) -> (f64, f64) {
    per_mac_normalized(&CvuConfig::new(l, SliceConfig::uniform(sw).unwrap()).unwrap(), p)
}

fn near(v: f64, target: f64, tol: f64) -> bool {
    (v / target - 1.0).abs() <= tol
}

#[test]
fn shipped_params_hit_anchors() {
    let p = CostParams::default_calibrated();
    let (pw, ar) = at(2, 16, &p);
    assert!(near(pw, 0.5, 0.15), "{pw}");
    assert!(near(ar, 0.59, 0.15), "{ar}");
    assert!(near(at(2, 1, &p).1, 1.4, 0.15));
    let (p1, a1) = at(1, 16, &p);
    assert!(p1 >= 1.0 && a1 >= 1.0);
}

#[test]
fn strictly_decreasing_and_saturating_in_lanes() {
    let p = CostParams::default_calibrated();
    for sw in [1u8, 2, 4] {
        let row: Vec<_> = [1usize, 2, 4, 8, 16].iter().map(|&l| at(sw, l, &p)).collect();
        for w in row.windows(2) {
            assert!(w[1].0 < w[0].0 && w[1].1 < w[0].1, "sw={sw}");
        }
        assert!(row[3].0 / row[4].0 < row[0].0 / row[1].0, "sw={sw}");
        assert!(row[3].1 / row[4].1 < row[0].1 / row[1].1, "sw={sw}");
    }
}

#[test]
fn two_bit_dominates_one_bit() {
    let p = CostParams::default_calibrated();
    for l in [1usize, 2, 4, 8, 16] {
        let (p1, a1) = at(1, l, &p);
        let (p2, a2) = at(2, l, &p);
        assert!(p2 < p1 && a2 < a1, "L={l}");
    }
}

#[test]
fn lane_sweep_ratios() {
    let p = CostParams::default_calibrated();
    assert!(near(at(1, 1, &p).0 / at(1, 16, &p).0, 3.0, 0.2));
    assert!(near(at(2, 1, &p).0 / at(2, 16, &p).0, 2.5, 0.2));
    assert!(at(2, 1, &p).0 / at(2, 16, &p).0 >= 2.4 * 0.8);
}

#[test]
fn sweep_matches_pointwise_model() {
    let p = CostParams::default_calibrated();
    let pts = dse_sweep(&[1, 2], &[1, 2, 4, 8, 16], &p).unwrap();
    assert_eq!(pts.len(), 10);
    for d in pts {
        let (pw, ar) = at(d.slice_width, d.lanes, &p);
        assert_eq!((d.power_norm, d.area_norm), (pw, ar));
        let sum: f64 = d.breakdown.categories().iter().map(|(_, c)| c.energy).sum();
        assert!((sum - d.power_norm).abs() < 1e-12);
    }
}

#[test]
fn iso_power_capacity_ratios() {
    let p = CostParams::default_calibrated();
    let mac = p.conventional_mac_power();
    let cvu = |l| p.power_mw(cvu_cost(&CvuConfig::new(l, SliceConfig::default()).unwrap(), &p).total.energy);
    let conv = iso_power_array_size(250.0, mac) as f64;
    let vector = iso_power_array_size(250.0, cvu(16)) as f64 * 16.0;
    let scalar = iso_power_array_size(250.0, cvu(1)) as f64;
    assert!(near(vector / conv, 2.0, 0.2), "{}", vector / conv);
    assert!(near(vector / scalar, 2.3, 0.2), "{}", vector / scalar);
    assert!((mac - 0.2).abs() < 1e-9);
}

#[test]
fn calibration_is_reproducible() {
    let a = calibrate(&default_anchors()).unwrap();
    let b = calibrate(&default_anchors()).unwrap();
    assert_eq!(a, b);
}
