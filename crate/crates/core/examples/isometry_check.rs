// Checks E‖v(T)‖² = I for a deterministic integrand and compares the three forms of the
// isometry functional with the J bound.

use rayon::prelude::*;
use spde_wave::covariance::SpectralMeasure;
use spde_wave::greens::GreenMultiplier;
use spde_wave::lattice::{l2_norm_sq, Grid};
use spde_wave::noise::{NoiseModel, StreamKey};
use spde_wave::stochint::*;

fn main() -> spde_wave::Result<()> {
    let grid = Grid::new(1, 64, 8.0)?;
    let noise = NoiseModel::new(&grid, &SpectralMeasure::riesz(1, 0.5)?)?;
    let green = GreenMultiplier::new(1, 0.5)?;
    let dt = 0.125;
    let steps = 4;
    let fields = (0..steps).map(|i| grid.sample(|x| (1.0 + i as f64 * dt) * (-x[0] * x[0] / 2.0).exp())).collect();
    let z = IntegrandProcess::deterministic(dt, fields)?;

    let exact = isometry_functional(&green, &z, &noise)?;
    let alternative = isometry_alternative(&green, &z, &noise)?;
    let bound = isometry_bound(&green, &z, &noise)?;
    let samples: Vec<f64> = (0..2000u64)
        .into_par_iter()
        .map(|r| {
            let path = noise.sample_path(z.horizon(), dt, StreamKey::new(1).with_replica(r))?;
            Ok(l2_norm_sq(&stochastic_convolution(&green, &z, &path, steps)?))
        })
        .collect::<spde_wave::Result<_>>()?;
    let n = samples.len() as f64;
    let mean = samples.iter().sum::<f64>() / n;
    let se = (samples.iter().map(|s| (s - mean).powi(2)).sum::<f64>() / (n - 1.0) / n).sqrt();
    println!("Monte Carlo  {mean:.6} ± {se:.6}");
    println!("I (double)   {exact:.6}");
    println!("I (planes)   {alternative:.6}");
    println!("bound        {bound:.6}");
    Ok(())
}
