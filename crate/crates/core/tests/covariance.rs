use std::f64::consts::PI;

use proptest::prelude::*;
use spde_wave::covariance::SpectralMeasure;
use spde_wave::quad::sphere_area;
use statrs::function::gamma::gamma;

#[test]
fn white_density_value() {
    let m = SpectralMeasure::white(1).unwrap();
    assert!((m.spectral_density(&[3.7]).unwrap() - 0.15915494309189535).abs() < 1e-15);
}

#[test]
fn riesz_density_scales_with_radius() {
    let m = SpectralMeasure::riesz(2, 1.0).unwrap();
    let c = m.normalization();
    assert!((m.spectral_density(&[2.0f64.sqrt(), 2.0f64.sqrt()]).unwrap() - c / 2.0).abs() < 1e-14);
}

/// `∫ |x|^{-α} (φ*φ̃)(x) dx = ∫ μ(dη) |Fφ(η)|²` for `φ = e^{-|x|²/2}`, both sides in closed
/// form through the Gamma function: `φ*φ̃ = π^{d/2} e^{-|x|²/4}` and `|Fφ|² = (2π)^d e^{-|η|²}`.
#[test]
fn riesz_pairing_identity_with_gaussian() {
    for d in 1..=4usize {
        for step in 1..8 {
            let alpha = 0.5 * step as f64;
            if alpha >= d as f64 {
                continue;
            }
            let m = SpectralMeasure::riesz(d, alpha).unwrap();
            let df = d as f64;
            let area = sphere_area(d);
            let left = PI.powf(df / 2.0) * area * 2f64.powf(df - alpha - 1.0) * gamma((df - alpha) / 2.0);
            let right = m.normalization() * (2.0 * PI).powf(df) * area * gamma(alpha / 2.0) / 2.0;
            assert!((left - right).abs() < 1e-6 * left, "d={d} alpha={alpha}: {left} vs {right}");
        }
    }
}

#[test]
fn white_pairing_identity_with_gaussian() {
    // Γ = δ: left side (φ*φ̃)(0) = π^{d/2}; right side (2π)^{-d} (2π)^d π^{d/2}
    for d in 1..=4usize {
        let m = SpectralMeasure::white(d).unwrap();
        let right = m.normalization() * (2.0 * PI).powi(d as i32) * PI.powf(d as f64 / 2.0);
        assert!((right - PI.powf(d as f64 / 2.0)).abs() < 1e-12);
    }
}

#[test]
fn riesz_sweep_in_four_dimensions() {
    for order in 1..=2u32 {
        for step in 1..8 {
            let alpha = 0.5 * step as f64;
            let r = SpectralMeasure::riesz(4, alpha).unwrap().admissibility_integral(order).unwrap();
            assert_eq!(r.admissible, alpha < 2.0 * order as f64, "alpha={alpha} k={order}");
            assert_eq!(r.value.is_some(), r.admissible);
        }
    }
}

#[test]
fn white_integral_matches_gamma_closed_form() {
    for d in 1..=3usize {
        for order in 1..=2u32 {
            let r = SpectralMeasure::white(d).unwrap().admissibility_integral(order).unwrap();
            let k = order as f64;
            let df = d as f64;
            if df < 2.0 * k {
                let exact = (2.0 * PI).powf(-df) * PI.powf(df / 2.0) * gamma(k - df / 2.0) / gamma(k);
                assert!((r.value.unwrap() - exact).abs() < 1e-8 * exact, "d={d} k={order}");
            } else {
                assert!(!r.admissible);
            }
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn verdicts_follow_thresholds(d in 1usize..=4, order in 1u32..=3, frac in 0.02f64..0.98) {
        let alpha = frac * d as f64;
        let riesz = SpectralMeasure::riesz(d, alpha).unwrap().admissibility_integral(order).unwrap();
        prop_assert_eq!(riesz.admissible, alpha < 2.0 * order as f64);
        let white = SpectralMeasure::white(d).unwrap().admissibility_integral(order).unwrap();
        prop_assert_eq!(white.admissible, d < 2 * order as usize);
    }

    #[test]
    fn admissibility_integral_decreases_in_order(d in 1usize..=3, frac in 0.05f64..0.95) {
        let m = SpectralMeasure::riesz(d, frac * d as f64).unwrap();
        let values: Vec<f64> = (1..=4).filter_map(|k| m.admissibility_integral(k).unwrap().value).collect();
        prop_assert!(values.windows(2).all(|w| w[1] < w[0]));
    }

    #[test]
    fn density_is_even(d in 1usize..=3, x in prop::collection::vec(-10.0f64..10.0, 3)) {
        prop_assume!(x[..d].iter().any(|v| v.abs() > 1e-3));
        let m = SpectralMeasure::riesz(d, 0.5).unwrap();
        let neg: Vec<f64> = x[..d].iter().map(|v| -v).collect();
        prop_assert_eq!(m.spectral_density(&x[..d]).unwrap(), m.spectral_density(&neg).unwrap());
    }
}
