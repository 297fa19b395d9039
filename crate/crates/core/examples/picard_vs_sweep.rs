// Solves one noise path by the explicit sweep and by Picard iteration and prints the
// iteration distances.

use spde_wave::covariance::SpectralMeasure;
use spde_wave::lattice::{Grid, LatticeField};
use spde_wave::noise::StreamKey;
use spde_wave::solver::{sup_distance, InitialGuess, Nonlinearity, SolveConfig, Solver};

fn main() -> spde_wave::Result<()> {
    let grid = Grid::new(1, 128, 16.0)?;
    let v0 = grid.sample(|x| (-x[0] * x[0]).exp());
    let cfg = SolveConfig::new(grid.clone(), 1, 1.0, 1.0 / 64.0, SpectralMeasure::white(1)?)
        .with_nonlinearity(Nonlinearity::Sine)
        .with_initial_data(v0, LatticeField::zeros(&grid));
    let solver = Solver::new(cfg)?;
    let path = solver.sample_path(StreamKey::new(3))?;
    let sweep = solver.explicit_sweep(&path)?;
    let picard = solver.picard_iterate(&path, InitialGuess::Deterministic)?;
    for rec in picard.iterations.iter().take(12) {
        println!("iteration {:>3}  sup_t |u_(n+1) - u_n| = {:.3e}", rec.iteration, rec.sup_distance());
    }
    println!("iterations: {}, converged: {}", picard.iterations.len(), picard.converged);
    println!("sweep vs Picard: {:.3e}", sup_distance(&sweep.trajectory, &picard.trajectory)?);
    Ok(())
}
