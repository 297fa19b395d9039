// Distances of the mollified kernels G * ψ_n and the truncated integrands Z 1_{[-n,n]}
// from the original pair, for white and Riesz noise.

use spde_wave::covariance::SpectralMeasure;
use spde_wave::greens::GreenMultiplier;
use spde_wave::lattice::Grid;
use spde_wave::noise::NoiseModel;
use spde_wave::stochint::{ladder_distance, truncation_distance, IntegrandProcess};

fn main() -> spde_wave::Result<()> {
    let grid = Grid::new(1, 256, 40.0)?;
    let green = GreenMultiplier::new(1, 1.0)?;
    let smooth = IntegrandProcess::constant(0.125, grid.sample(|x| (-x[0] * x[0]).exp()), 8)?;
    let heavy = IntegrandProcess::constant(0.125, grid.sample(|x| 1.0 / (1.0 + x[0] * x[0])), 8)?;
    for (name, m) in [("white", SpectralMeasure::white(1)?), ("riesz(0.5)", SpectralMeasure::riesz(1, 0.5)?)] {
        let noise = NoiseModel::new(&grid, &m)?;
        println!("{name}");
        println!("{:>4} {:>14} {:>14}", "n", "mollifier", "truncation");
        for n in [1u32, 2, 4, 8, 16] {
            let a = ladder_distance(&green, n, &smooth, &noise)?;
            let b = truncation_distance(&green, &heavy, n as f64, &noise)?;
            println!("{n:>4} {a:>14.6e} {b:>14.6e}");
        }
    }
    Ok(())
}
