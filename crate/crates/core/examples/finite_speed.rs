// Noise and data confined near the origin: the wave solution stays inside the light cone.

use spde_wave::covariance::SpectralMeasure;
use spde_wave::harness::experiments::gaussian_spectral_table;
use spde_wave::lattice::{Grid, LatticeField};
use spde_wave::noise::{NoiseMask, StreamKey};
use spde_wave::solver::{Method, Nonlinearity, SolveConfig, Solver};

fn main() -> spde_wave::Result<()> {
    let grid = Grid::new(1, 2048, 16.0)?;
    let measure = SpectralMeasure::radial_table(1, gaussian_spectral_table(0.3)?)?;
    let width = 0.13;
    let v0 = grid.sample(|x| if x[0].abs() <= 1.0 { (-x[0] * x[0] / (2.0 * width * width)).exp() } else { 0.0 });
    let cfg = SolveConfig::new(grid.clone(), 1, 2.0, 1.0 / 32.0, measure)
        .with_nonlinearity(Nonlinearity::Sine)
        .with_initial_data(v0, LatticeField::zeros(&grid))
        .with_mask(NoiseMask::gaussian(1.0, width));
    let solver = Solver::new(cfg)?;
    let report = solver.run_replica(StreamKey::new(6), Method::Sweep)?;
    for (j, t) in report.times.iter().enumerate().step_by(16) {
        let u = &report.trajectory[j];
        let (mut inside, mut outside) = (0.0f64, 0.0f64);
        for i in 0..grid.len() {
            if grid.point_norm(i) <= 1.0 + t {
                inside = inside.max(u.values()[i].abs());
            } else {
                outside = outside.max(u.values()[i].abs());
            }
        }
        println!("t = {t:.3}: max |u| inside cone {inside:.3e}, outside {outside:.3e}");
    }
    Ok(())
}
