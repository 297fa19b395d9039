use proptest::prelude::*;
use spde_wave::covariance::SpectralMeasure;
use spde_wave::greens::GreenMultiplier;
use spde_wave::Error;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn cos_sin_identity(t in 0.0f64..10.0, r in 0.0f64..60.0, k in 1u32..=3) {
        let g = GreenMultiplier::new(k, 10.0).unwrap();
        let a = g.dt_value(t, r);
        let b = g.frequency_power(r) * g.value(t, r);
        prop_assert!((a * a + b * b - 1.0).abs() <= 1e-12);
    }

    #[test]
    fn multiplier_bounds(t in 0.0f64..10.0, r in 1e-6f64..60.0, k in 1u32..=3) {
        let g = GreenMultiplier::new(k, 10.0).unwrap();
        let v = g.value(t, r).abs();
        prop_assert!(v <= t * (1.0 + 1e-15));
        prop_assert!(v <= g.frequency_power(r).recip() * (1.0 + 1e-15));
    }

    /// `|FG(t+h) - FG(t)|² = 4 cos²(·) sin²(h|ζ|^k/2)/|ζ|^{2k} ≤ min(h², 4|ζ|^{-2k})
    /// ≤ max(h², 4) 2^k (1+|ζ|²)^{-k}`.
    #[test]
    fn time_difference_bound(t in 0.0f64..5.0, h in 0.0f64..2.0, r in 1e-4f64..40.0, k in 1u32..=2) {
        let g = GreenMultiplier::new(k, 10.0).unwrap();
        let w = g.frequency_power(r);
        let diff = (g.value(t + h, r) - g.value(t, r)).powi(2);
        let half = 4.0 * (h * w / 2.0).sin().powi(2) / (w * w);
        prop_assert!(diff <= half * (1.0 + 1e-9) + 1e-15);
        let c = h.powi(2).max(4.0) * 2f64.powi(k as i32);
        prop_assert!(half <= c * (1.0 + r * r).powi(-(k as i32)) * (1.0 + 1e-12));
    }

    #[test]
    fn negative_sobolev_gain_bounds_multiplier(t in 0.0f64..5.0, r in 0.0f64..80.0, k in 1u32..=3) {
        let g = GreenMultiplier::new(k, 5.0).unwrap();
        let lhs = (1.0 + r * r).powf(k as f64 / 2.0) * g.value(t, r).abs();
        prop_assert!(lhs <= g.negative_sobolev_gain(t) * (1.0 + 1e-12));
    }
}

/// The pointwise form `|FG(t+h) - FG(t)|² ≤ 4 sin²(h|ζ|^k)/|ζ|^{2k}` fails where
/// `h|ζ|^k` is a multiple of π; the half-angle form above is the one that holds.
#[test]
fn full_angle_difference_form_has_counterexamples() {
    let g = GreenMultiplier::new(1, 10.0).unwrap();
    let (r, h) = (1.0, std::f64::consts::PI);
    let t = 3.0 * std::f64::consts::PI / 2.0;
    let diff = (g.value(t + h, r) - g.value(t, r)).powi(2);
    assert!(diff > 3.9 && 4.0 * (h * r).sin().powi(2) < 1e-20);
}

#[test]
fn special_values() {
    let g3 = GreenMultiplier::new(3, 1.0).unwrap();
    assert_eq!(g3.value(0.8, 0.0), 0.8);
    let g1 = GreenMultiplier::new(1, 1.0).unwrap();
    assert_eq!(g1.value(0.0, 2.0), 0.0);
    assert!(g1.value(1.0, std::f64::consts::PI).abs() < 1e-16);
    assert_eq!(g1.dt_value(0.0, 5.0), 1.0);
    assert_eq!(g1.dt_value(2.0, 0.0), 1.0);
    assert!(g1.dt_value(1.0, std::f64::consts::FRAC_PI_2).abs() < 1e-16);
    assert_eq!(g1.support_radius(2.5), Some(2.5));
    assert_eq!(g1.support_radius(0.0), Some(0.0));
    assert_eq!(GreenMultiplier::new(2, 1.0).unwrap().support_radius(1.0), None);
}

#[test]
fn white_j_is_the_unshifted_value() {
    let g = GreenMultiplier::new(1, 1.0).unwrap();
    let m = SpectralMeasure::white(1).unwrap();
    // ∫ sin²(0.7x)/x² dx / 2π = 0.35
    let at_zero = g.j_functional(&m, 0.7, &[]).unwrap();
    let probed = g.j_functional(&m, 0.7, &[0.5, 3.0, 11.0]).unwrap();
    assert!((at_zero - 0.35).abs() < 1e-9, "{at_zero}");
    assert!((probed - 0.35).abs() < 1e-7, "{probed}");
    assert_eq!(g.j_functional(&m, 0.0, &[1.0]).unwrap(), 0.0);
}

#[test]
fn riesz_three_dimensional_j_probe_grid() {
    let g = GreenMultiplier::new(1, 1.0).unwrap();
    let m = SpectralMeasure::riesz(3, 1.0).unwrap();
    let coarse: Vec<f64> = (1..=8).map(|i| 0.5 * i as f64).collect();
    let dense: Vec<f64> = (1..=80).map(|i| 0.05 * i as f64).collect();
    let a = g.j_functional(&m, 0.5, &coarse).unwrap();
    let b = g.j_functional(&m, 0.5, &dense).unwrap();
    assert!((a - b).abs() <= 1e-4 * b, "{a} vs {b}");
    assert!(b <= g.j_upper_bound(&m, 0.5).unwrap());
}

#[test]
fn inadmissible_measure_has_no_j() {
    let g = GreenMultiplier::new(1, 1.0).unwrap();
    let m = SpectralMeasure::white(2).unwrap();
    assert!(matches!(g.j_functional(&m, 0.5, &[]), Err(Error::NotAdmissible { order: 1 })));
}
