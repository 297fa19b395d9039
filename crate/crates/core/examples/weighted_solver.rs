// With α ≡ 1 and v₀ ≡ 1 the solution is not square integrable, but its weighted moments
// stay below the affine Gronwall envelope.

use spde_wave::covariance::SpectralMeasure;
use spde_wave::lattice::{Grid, LatticeField};
use spde_wave::noise::StreamKey;
use spde_wave::solver::{moment_track, Method, Nonlinearity, SolveConfig};
use spde_wave::weighted::{affine_envelope, weighted_wave_solve, Weight};

fn main() -> spde_wave::Result<()> {
    let grid = Grid::new(1, 128, 16.0)?;
    let cfg = SolveConfig::new(grid.clone(), 1, 1.0, 1.0 / 64.0, SpectralMeasure::white(1)?)
        .with_nonlinearity(Nonlinearity::constant(1.0))
        .with_initial_data(grid.sample(|_| 1.0), LatticeField::zeros(&grid));
    let weight = Weight::new(1, 2.0, 1.0)?;
    let solver = weighted_wave_solve(cfg, weight)?;
    let reports = solver.run_replicas(StreamKey::new(7), 0, 200, Method::Sweep)?;
    let track = moment_track(&reports)?;
    let envelope = affine_envelope(&solver)?;
    println!("‖1‖²_θ on the lattice: {:.5}", weight.constant_mass(&grid));
    for j in (0..track.times.len()).step_by(16) {
        println!(
            "t = {:.3}: E‖u‖²_θ = {:.5} ± {:.5}, envelope {:.5}",
            track.times[j],
            track.mean[j],
            3.0 * track.std_error[j],
            envelope[j]
        );
    }
    Ok(())
}
