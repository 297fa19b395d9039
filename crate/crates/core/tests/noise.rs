use rayon::prelude::*;
use spde_wave::covariance::SpectralMeasure;
use spde_wave::lattice::Grid;
use spde_wave::noise::*;

const REPLICAS: u64 = 10_000;

fn fields(noise: &NoiseModel, dt: f64, steps: usize, key: StreamKey) -> Vec<Vec<Vec<f64>>> {
    (0..REPLICAS)
        .into_par_iter()
        .map(|r| {
            let path = noise.sample_path(dt * steps as f64, dt, key.with_replica(r)).unwrap();
            path.fields().into_iter().map(|f| f.into_values()).collect()
        })
        .collect()
}

/// Sample covariance of `a` and `b` with the standard error of the product mean.
fn covariance(a: &[f64], b: &[f64]) -> (f64, f64) {
    let n = a.len() as f64;
    let prods: Vec<f64> = a.iter().zip(b).map(|(x, y)| x * y).collect();
    let m = prods.iter().sum::<f64>() / n;
    let var = prods.iter().map(|p| (p - m).powi(2)).sum::<f64>() / (n - 1.0);
    (m, (var / n).sqrt())
}

#[test]
fn white_noise_cells_are_iid_with_variance_dt_over_volume() {
    let grid = Grid::new(1, 16, 4.0).unwrap();
    let noise = NoiseModel::new(&grid, &SpectralMeasure::white(1).unwrap()).unwrap();
    let dt = 0.1;
    let samples = fields(&noise, dt, 1, StreamKey::new(11));
    let expected = dt / grid.cell_volume();
    let column = |i: usize| -> Vec<f64> { samples.iter().map(|s| s[0][i]).collect() };
    for i in 0..16 {
        let ci = column(i);
        let (var, se) = covariance(&ci, &ci);
        assert!((var - expected).abs() < 3.0 * se, "cell {i}: {var} vs {expected}");
        for j in (i + 1)..16 {
            let (c, _) = covariance(&ci, &column(j));
            let rho = c / expected;
            assert!(rho.abs() < 3.0 / (REPLICAS as f64).sqrt() * 1.6, "cells {i},{j}: {rho}");
        }
    }
}

#[test]
fn riesz_covariance_is_homogeneous_and_matches_spectral_sum() {
    let grid = Grid::new(1, 32, 8.0).unwrap();
    let noise = NoiseModel::new(&grid, &SpectralMeasure::riesz(1, 0.5).unwrap()).unwrap();
    let dt = 0.25;
    let samples = fields(&noise, dt, 1, StreamKey::new(12));
    let column = |i: usize| -> Vec<f64> { samples.iter().map(|s| s[0][i]).collect() };
    let masses = noise.cell_masses();
    for lag in [0usize, 1, 2, 5, 9] {
        // E W(x) W(x + z) = dt Σ_j mass_j cos(η_j z)
        let z = lag as f64 * grid.spacing();
        let exact: f64 = dt * (0..grid.len()).map(|j| masses[j] * (grid.frequency(j)[0] * z).cos()).sum::<f64>();
        for start in [0usize, 7, 16] {
            let (c, se) = covariance(&column(start), &column((start + lag) % 32));
            assert!((c - exact).abs() < 3.0 * se, "lag {lag} at {start}: {c} vs {exact} (se {se})");
        }
    }
}

#[test]
fn slices_are_independent_in_time() {
    let grid = Grid::new(1, 8, 2.0).unwrap();
    let noise = NoiseModel::new(&grid, &SpectralMeasure::riesz(1, 0.5).unwrap()).unwrap();
    let samples = fields(&noise, 0.5, 3, StreamKey::new(13));
    for (a, b) in [(0usize, 1usize), (0, 2), (1, 2)] {
        let x: Vec<f64> = samples.iter().map(|s| s[a][3]).collect();
        let y: Vec<f64> = samples.iter().map(|s| s[b][3]).collect();
        let (c, _) = covariance(&x, &y);
        let (vx, _) = covariance(&x, &x);
        let (vy, _) = covariance(&y, &y);
        let rho = c / (vx * vy).sqrt();
        assert!(rho.abs() < 3.0 / (REPLICAS as f64).sqrt(), "slices {a},{b}: {rho}");
    }
}

#[test]
fn two_half_steps_match_one_step_in_variance() {
    let grid = Grid::new(1, 8, 2.0).unwrap();
    let noise = NoiseModel::new(&grid, &SpectralMeasure::white(1).unwrap()).unwrap();
    let dt = 0.2;
    let whole = fields(&noise, dt, 1, StreamKey::new(14));
    let halves = fields(&noise, dt / 2.0, 2, StreamKey::new(15));
    for cell in [0usize, 5] {
        let a: Vec<f64> = whole.iter().map(|s| s[0][cell]).collect();
        let b: Vec<f64> = halves.iter().map(|s| s[0][cell] + s[1][cell]).collect();
        let (va, sa) = covariance(&a, &a);
        let (vb, sb) = covariance(&b, &b);
        assert!((va - vb).abs() < 3.0 * (sa * sa + sb * sb).sqrt(), "{va} vs {vb}");
    }
}

#[test]
fn pairing_is_the_spectral_sum() {
    let grid = Grid::new(2, 8, 4.0).unwrap();
    let noise = NoiseModel::new(&grid, &SpectralMeasure::riesz(2, 1.0).unwrap()).unwrap();
    let phi = grid.sample(|x| (-(x[0] * x[0] + x[1] * x[1])).exp());
    let psi = grid.sample(|x| (-(x[0] - 0.5).powi(2) - x[1] * x[1]).exp());
    let dt = 0.3;
    let samples: Vec<(f64, f64)> = (0..REPLICAS)
        .into_par_iter()
        .map(|r| {
            let mut rng = StreamKey::new(16).with_replica(r).rng(0);
            let w = noise.sample_slice(dt, &mut rng).unwrap().field();
            let h = grid.cell_volume();
            let a: f64 = h * w.values().iter().zip(phi.values()).map(|(x, y)| x * y).sum::<f64>();
            let b: f64 = h * w.values().iter().zip(psi.values()).map(|(x, y)| x * y).sum::<f64>();
            (a, b)
        })
        .collect();
    let a: Vec<f64> = samples.iter().map(|s| s.0).collect();
    let b: Vec<f64> = samples.iter().map(|s| s.1).collect();
    let (c, se) = covariance(&a, &b);
    let exact = noise.pairing(dt, &phi, &psi);
    assert!((c - exact).abs() < 3.0 * se, "{c} vs {exact}");
}

#[test]
fn masses_follow_the_density_away_from_the_origin() {
    let grid = Grid::new(2, 8, 6.0).unwrap();
    let m = SpectralMeasure::riesz(2, 1.5).unwrap();
    let noise = NoiseModel::new(&grid, &m).unwrap();
    for j in 1..grid.len() {
        let eta = grid.frequency(j);
        let expected = grid.dual_cell_volume() * m.spectral_density(&eta[..2]).unwrap();
        assert!((noise.cell_masses()[j] - expected).abs() < 1e-14 * expected);
    }
}

#[test]
fn determinism_and_empty_paths() {
    let grid = Grid::new(1, 16, 4.0).unwrap();
    let noise = NoiseModel::new(&grid, &SpectralMeasure::white(1).unwrap()).unwrap();
    let key = StreamKey::new(99).with_experiment(3).with_replica(5);
    assert_eq!(noise.sample_path(1.0, 0.25, key).unwrap(), noise.sample_path(1.0, 0.25, key).unwrap());
    assert_ne!(noise.sample_path(1.0, 0.25, key).unwrap(), noise.sample_path(1.0, 0.25, key.with_replica(6)).unwrap());
    assert!(noise.sample_path(0.0, 0.25, key).unwrap().is_empty());
    // slice s does not depend on how many slices follow it
    let short = noise.sample_path(0.5, 0.25, key).unwrap();
    let long = noise.sample_path(1.0, 0.25, key).unwrap();
    assert_eq!(short.slices(), &long.slices()[..2]);
}
