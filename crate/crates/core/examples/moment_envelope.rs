// Tracks E‖u(t)‖² for α = sin over replicas and compares it with the Gronwall envelope.

use spde_wave::covariance::SpectralMeasure;
use spde_wave::lattice::{Grid, LatticeField};
use spde_wave::noise::StreamKey;
use spde_wave::solver::{moment_track, Method, Nonlinearity, SolveConfig, Solver};

fn main() -> spde_wave::Result<()> {
    let grid = Grid::new(1, 128, 16.0)?;
    let cfg = SolveConfig::new(grid.clone(), 1, 1.0, 1.0 / 64.0, SpectralMeasure::riesz(1, 0.5)?)
        .with_nonlinearity(Nonlinearity::Sine)
        .with_initial_data(grid.sample(|x| (-x[0] * x[0]).exp()), LatticeField::zeros(&grid));
    let solver = Solver::new(cfg)?;
    let reports = solver.run_replicas(StreamKey::new(4), 0, 100, Method::Sweep)?;
    let track = moment_track(&reports)?;
    let envelope = solver.moment_envelope()?;
    println!("{:>6} {:>12} {:>12} {:>12}", "t", "E|u|^2", "3 s.e.", "envelope");
    for j in (0..track.times.len()).step_by(16) {
        println!(
            "{:>6.3} {:>12.5e} {:>12.5e} {:>12.5e}",
            track.times[j],
            track.mean[j],
            3.0 * track.std_error[j],
            envelope[j]
        );
    }
    println!("worst excess over the envelope: {:.3e}", track.worst_excess(&envelope));
    Ok(())
}
