use cgran_core::calibration::*;
use proptest::prelude::*;

fn screen() -> ScreenGeometry {
    ScreenGeometry::new(2360, 1600).unwrap()
}

#[test]
fn anchors() {
    assert_eq!(linear_map(&screen(), (500.0, 500.0)).unwrap(), (1180, 800));
    assert_eq!(linear_map_axis(&screen(), Axis::Y, 512.75).unwrap(), 820);
    assert_eq!(linear_map(&screen(), (1000.0, 1000.0)).unwrap(), (2359, 1599));
    assert!(linear_map(&screen(), (1000.5, 0.0)).is_err());
}

#[test]
fn quadratic_round_trip() {
    let truth = [3.25, 2.17, -4.5e-4];
    let samples: Vec<(f64, f64)> =
        (0..=20).map(|i| i as f64 * 50.0).map(|r| (r, truth[0] + truth[1] * r + truth[2] * r * r)).collect();
    let m = fit_polynomial(Axis::X, &samples, 2).unwrap();
    for (got, want) in m.coeffs.iter().zip(truth) {
        assert!(((got - want) / want).abs() < 1e-6, "{got} vs {want}");
    }
    assert!(m.residual_max < 1e-6);
}

#[test]
fn curved_benchmark_beats_linear() {
    let r = simulate_clicks(&SimConfig::default()).unwrap();
    assert!(r.linear.max_err - r.corrected.max_err >= 3.0, "{r:?}");
    assert!(r.linear.max_err - r.fitted.max_err >= 3.0, "{r:?}");
    assert_eq!(simulate_clicks(&SimConfig::default()).unwrap(), r);
}

#[test]
fn too_few_points() {
    assert!(matches!(fit_polynomial(Axis::X, &[(1.0, 2.0), (1.0, 3.0)], 1), Err(cgran_core::Error::Fit(_))));
}

proptest! {
    #[test]
    fn linear_map_is_monotone_and_on_screen(w in 1u32..5000, h in 1u32..5000, a in 0.0f64..=1000.0, b in 0.0f64..=1000.0) {
        let g = ScreenGeometry::new(w, h).unwrap();
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        let (x0, y0) = linear_map(&g, (lo, lo)).unwrap();
        let (x1, y1) = linear_map(&g, (hi, hi)).unwrap();
        prop_assert!(x0 <= x1 && y0 <= y1);
        prop_assert!(x1 < w && y1 < h);
    }

    #[test]
    fn exact_fit_on_low_degree(a0 in -50.0f64..50.0, a1 in 0.5f64..3.0, a2 in -1e-3f64..1e-3, degree in 0usize..=2) {
        let c = [a0, if degree >= 1 { a1 } else { 0.0 }, if degree == 2 { a2 } else { 0.0 }];
        let samples: Vec<(f64, f64)> = (0..12).map(|i| i as f64 * 83.0).map(|r| (r, c[0] + c[1] * r + c[2] * r * r)).collect();
        let m = fit_polynomial(Axis::Y, &samples, degree).unwrap();
        for (r, y) in &samples {
            prop_assert!((m.eval(*r) - y).abs() < 1e-7);
        }
    }

    #[test]
    fn error_bound_is_linear(w in 1u32..5000, h in 1u32..5000, d in 0.0f64..50.0, k in 0.0f64..10.0) {
        let g = ScreenGeometry::new(w, h).unwrap();
        let (ex, ey) = error_bound(&g, d);
        let (kx, ky) = error_bound(&g, k * d);
        prop_assert!((kx - k * ex).abs() < 1e-9 * kx.max(1.0));
        prop_assert!((ky - k * ey).abs() < 1e-9 * ky.max(1.0));
    }

    #[test]
    fn correction_stays_inside_margin(rel in 0.0f64..=1000.0, residuals in proptest::collection::vec(-400.0f64..400.0, 0..8)) {
        let g = screen();
        let model = CalibrationModel::identity(&g, Axis::X);
        let mut h = ClickHistory::new(5);
        for r in &residuals {
            h.record(rel, 0.0, *r);
        }
        let cfg = CorrectionConfig::default();
        let px = correct(&model, rel, &h, &g, &cfg);
        prop_assert!(px >= cfg.edge_margin && px <= 2360 - 1 - cfg.edge_margin);
    }
}
