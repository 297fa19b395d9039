// The kernel functional J(s) = sup_ξ ∫ μ(dη)|FG(s)(ξ-η)|²: probed lower value, analytic
// upper bound and the lattice maximum.

use spde_wave::covariance::SpectralMeasure;
use spde_wave::greens::GreenMultiplier;
use spde_wave::lattice::Grid;
use spde_wave::noise::NoiseModel;
use spde_wave::stochint::lattice_j;

fn main() -> spde_wave::Result<()> {
    let grid = Grid::new(1, 512, 64.0)?;
    let probes: Vec<f64> = (1..=20).map(|i| 0.5 * i as f64).collect();
    for (name, m) in [("white", SpectralMeasure::white(1)?), ("riesz(0.5)", SpectralMeasure::riesz(1, 0.5)?)] {
        let noise = NoiseModel::new(&grid, &m)?;
        for k in [1u32, 2] {
            let g = GreenMultiplier::new(k, 1.0)?;
            for s in [0.25, 0.5, 1.0] {
                println!(
                    "{name:<10} k={k} s={s:<5} J {:.5e}  bound {:.5e}  lattice {:.5e}",
                    g.j_functional(&m, s, &probes)?,
                    g.j_upper_bound(&m, s)?,
                    lattice_j(&g, &noise, s)
                );
            }
        }
    }
    Ok(())
}
