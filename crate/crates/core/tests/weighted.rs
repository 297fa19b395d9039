use proptest::prelude::*;
use spde_wave::covariance::SpectralMeasure;
use spde_wave::greens::GreenMultiplier;
use spde_wave::lattice::{l2_norm_sq, Grid, LatticeField};
use spde_wave::noise::{NoiseModel, StreamKey};
use spde_wave::solver::{Method, Nonlinearity, SolveConfig, Solver};
use spde_wave::stochint::{stochastic_convolution, IntegrandProcess};
use spde_wave::weighted::*;
use spde_wave::Error;

/// Relative `L²(H_n)` change when `Z` is cut off exactly at the light-cone reach of `H_n`;
/// nonzero only through the lattice truncation of the wave kernel.
const LOCALITY_TOL: f64 = 5e-2;

fn field_from(grid: &Grid, coeffs: &[f64]) -> LatticeField {
    grid.sample(|x| {
        let r = x.iter().map(|v| v * v).sum::<f64>().sqrt();
        coeffs.iter().enumerate().map(|(i, c)| c * (-(r - 2.0 * i as f64).powi(2)).exp()).sum()
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn weighted_norm_contracts(coeffs in prop::collection::vec(-3.0f64..3.0, 1..6), k in 1.1f64..4.0) {
        let grid = Grid::new(1, 128, 24.0).unwrap();
        let f = field_from(&grid, &coeffs);
        let w = Weight::new(1, k, 1.0).unwrap();
        prop_assert!(w.norm_sq(&f) <= l2_norm_sq(&f) * (1.0 + 1e-14));
    }

    #[test]
    fn annulus_sum_is_equivalent(coeffs in prop::collection::vec(-3.0f64..3.0, 1..6), d in 1usize..=2, extra in 0.1f64..2.0, radius in 0.5f64..2.0) {
        let grid = Grid::new(d, if d == 1 { 128 } else { 32 }, 24.0).unwrap();
        let f = field_from(&grid, &coeffs);
        let w = Weight::new(d, d as f64 + extra, radius).unwrap();
        let (c, big_c) = w.discrete_equivalence_constants(&grid);
        let norm = w.norm_sq(&f);
        let sum = w.annuli_sum(&f);
        prop_assert!(c * sum <= norm * (1.0 + 1e-12) && norm <= big_c * sum * (1.0 + 1e-12));
    }

    #[test]
    fn sandwich_holds_everywhere(r in 0.0f64..100.0, d in 1usize..=3, extra in 0.1f64..3.0) {
        let w = Weight::new(d, d as f64 + extra, 1.0).unwrap();
        let (c, big_c) = w.sandwich_constants();
        let t = w.theta_at_radius(r);
        prop_assert!(c * w.profile(r) <= t * (1.0 + 1e-14) && t <= big_c * w.profile(r) * (1.0 + 1e-14));
    }
}

#[test]
fn equivalence_constants_respect_the_analytic_range() {
    // with R = 1, θ / max(n,1)^{-K} lies in [5^{-K/2}, 1]
    for d in 1..=2 {
        let grid = Grid::new(d, if d == 1 { 256 } else { 64 }, 40.0).unwrap();
        let w = Weight::default_for(d);
        let (c, big_c) = w.discrete_equivalence_constants(&grid);
        assert!(c >= 5f64.powf(-w.exponent() / 2.0) && big_c <= 1.0, "d={d}: {c} {big_c}");
    }
}

#[test]
fn unit_ball_is_weighted_within_the_sandwich() {
    let grid = Grid::new(2, 64, 8.0).unwrap();
    let w = Weight::default_for(2);
    let f = grid.sample(|x| if x[0] * x[0] + x[1] * x[1] <= 1.0 { 1.0 + x[0] } else { 0.0 });
    let (c, _) = w.sandwich_constants();
    let plain = l2_norm_sq(&f);
    let weighted = w.norm_sq(&f);
    assert!(c * plain <= weighted && weighted <= plain);
    let annuli = w.annuli_norms(&f);
    assert!((annuli.iter().sum::<f64>() - plain).abs() <= 1e-14 * plain);
}

#[test]
fn convolution_is_local_in_annuli() {
    let grid = Grid::new(1, 512, 64.0).unwrap();
    let g = GreenMultiplier::new(1, 2.0).unwrap();
    let dt = 0.125;
    let steps = 16;
    let t = dt * steps as f64;
    let zf = grid.sample(|x| (-x[0] * x[0] / 200.0).exp());
    let z = IntegrandProcess::constant(dt, zf.clone(), steps).unwrap();
    // pooled over replicas
    let annulus_change = |noise: &NoiseModel, n: usize, reach: f64| {
        let cut = zf.masked(|x| if x[0].abs() <= reach { 1.0 } else { 0.0 });
        let z2 = IntegrandProcess::constant(dt, cut, steps).unwrap();
        let (mut num, mut den) = (0.0, 0.0);
        for replica in 0..10 {
            let path = noise.sample_path(t, dt, StreamKey::new(31).with_replica(replica)).unwrap();
            let a = stochastic_convolution(&g, &z, &path, steps).unwrap();
            let b = stochastic_convolution(&g, &z2, &path, steps).unwrap();
            for i in 0..grid.len() {
                let r = grid.point_norm(i);
                if r >= n as f64 && r < n as f64 + 1.0 {
                    num += (a.values()[i] - b.values()[i]).powi(2);
                    den += a.values()[i].powi(2);
                }
            }
        }
        (num / den).sqrt()
    };
    for m in [SpectralMeasure::white(1).unwrap(), SpectralMeasure::riesz(1, 0.5).unwrap()] {
        let noise = NoiseModel::new(&grid, &m).unwrap();
        for n in [0usize, 3, 6] {
            let inside = annulus_change(&noise, n, n as f64 + 1.0 + t);
            assert!(inside < LOCALITY_TOL, "n={n}: {inside}");
            let short = annulus_change(&noise, n, n as f64 + t - 0.5);
            assert!(short > 4.0 * LOCALITY_TOL, "n={n}: {short}");
        }
    }
}

#[test]
fn zero_integrand_has_zero_bound() {
    let grid = Grid::new(1, 32, 8.0).unwrap();
    let noise = NoiseModel::new(&grid, &SpectralMeasure::white(1).unwrap()).unwrap();
    let z = IntegrandProcess::constant(0.25, LatticeField::zeros(&grid), 4).unwrap();
    let g = GreenMultiplier::new(1, 1.0).unwrap();
    assert_eq!(weighted_isometry_bound(&g, &z, &noise, &Weight::default_for(1)).unwrap(), 0.0);
}

#[test]
fn only_the_wave_operator_is_accepted() {
    let grid = Grid::new(1, 32, 8.0).unwrap();
    let cfg = SolveConfig::new(grid, 2, 0.5, 0.125, SpectralMeasure::white(1).unwrap());
    assert!(matches!(weighted_wave_solve(cfg, Weight::default_for(1)), Err(Error::CompactSupportRequired(2))));
    assert!(Weight::new(2, 1.5, 1.0).is_err());
}

#[test]
fn zero_alpha_weighted_solve_is_deterministic() {
    let grid = Grid::new(1, 64, 16.0).unwrap();
    let cfg = SolveConfig::new(grid.clone(), 1, 0.5, 1.0 / 16.0, SpectralMeasure::white(1).unwrap())
        .with_nonlinearity(Nonlinearity::zero())
        .with_initial_data(grid.sample(|_| 1.0), LatticeField::zeros(&grid));
    let solver = weighted_wave_solve(cfg, Weight::default_for(1)).unwrap();
    let r = solver.run_replica(StreamKey::new(32), Method::Sweep).unwrap();
    for (j, t) in solver.times().iter().enumerate() {
        let exact = solver.deterministic_part(*t).unwrap();
        let diff = r.trajectory[j].zip_with(&exact, |a, b| a - b).unwrap().max_abs();
        assert!(diff < 1e-12, "t={t}: {diff}");
    }
}

#[test]
fn affine_envelope_needs_a_weighted_solver() {
    let grid = Grid::new(1, 32, 8.0).unwrap();
    let cfg = SolveConfig::new(grid, 1, 0.5, 0.125, SpectralMeasure::white(1).unwrap());
    let plain = Solver::new(cfg.clone()).unwrap();
    assert!(affine_envelope(&plain).is_err());
    let weighted =
        weighted_wave_solve(cfg.with_nonlinearity(Nonlinearity::constant(1.0)), Weight::default_for(1)).unwrap();
    let env = affine_envelope(&weighted).unwrap();
    assert_eq!(env[0], 0.0);
    assert!(env.windows(2).all(|w| w[1] >= w[0]));
}
