// Samples one time slice of Riesz noise in two dimensions, compares cell variances with the
// spectral prediction and round-trips the field through a snapshot file.

use std::fs::File;
use std::io::{BufReader, BufWriter};

use spde_wave::covariance::SpectralMeasure;
use spde_wave::lattice::{read_snapshot, write_snapshot, Grid};
use spde_wave::noise::{NoiseModel, StreamKey};

fn main() -> spde_wave::Result<()> {
    let grid = Grid::new(2, 32, 8.0)?;
    let noise = NoiseModel::new(&grid, &SpectralMeasure::riesz(2, 1.0)?)?;
    let dt = 0.1;
    let replicas = 400;
    let predicted = dt * noise.cell_masses().iter().sum::<f64>();
    let mut second_moment = 0.0;
    for r in 0..replicas {
        let path = noise.sample_path(dt, dt, StreamKey::new(7).with_replica(r))?;
        let w = &path.fields()[0];
        second_moment += w.values().iter().map(|v| v * v).sum::<f64>() / (grid.len() as f64 * replicas as f64);
    }
    println!("E W(x)^2: sampled {second_moment:.5}, predicted {predicted:.5}");

    let field = noise.sample_path(dt, dt, StreamKey::new(8))?.fields().remove(0);
    let path = std::env::temp_dir().join(format!("spde-wave-noise-{}.bin", std::process::id()));
    write_snapshot(BufWriter::new(File::create(&path)?), &field)?;
    let back = read_snapshot(BufReader::new(File::open(&path)?))?;
    std::fs::remove_file(&path)?;
    println!("snapshot round trip exact: {}", back == field);
    Ok(())
}
