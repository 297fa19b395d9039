// Without noise the spectral energy of the lattice wave and beam equations is constant.

use spde_wave::covariance::SpectralMeasure;
use spde_wave::lattice::Grid;
use spde_wave::solver::{SolveConfig, Solver};

fn main() -> spde_wave::Result<()> {
    let grid = Grid::new(1, 256, 16.0)?;
    for order in [1u32, 2] {
        let cfg = SolveConfig::new(grid.clone(), order, 1.0, 1.0 / 256.0, SpectralMeasure::white(1)?)
            .with_initial_data(grid.sample(|x| (-x[0] * x[0]).exp()), grid.sample(|x| x[0] * (-x[0] * x[0]).exp()));
        let energy = Solver::new(cfg)?.energy_trajectory();
        let drift = energy.iter().map(|e| (e - energy[0]).abs()).fold(0.0, f64::max) / energy[0];
        println!("k = {order}: E(0) = {:.6e}, max relative drift {drift:.2e}", energy[0]);
    }
    Ok(())
}
