// Prints the admissibility integral ∫ μ(dη)/(1+|η|²)^k for white and Riesz noise.

use spde_wave::covariance::SpectralMeasure;

fn main() -> spde_wave::Result<()> {
    println!("{:<14} {:>2} {:>2} {:>14} {:>10}", "measure", "d", "k", "integral", "admissible");
    for d in 1..=4 {
        for k in 1..=2 {
            let mut measures = vec![("white".to_string(), SpectralMeasure::white(d)?)];
            for alpha in [0.5, 1.5, 3.5] {
                if alpha < d as f64 {
                    measures.push((format!("riesz({alpha})"), SpectralMeasure::riesz(d, alpha)?));
                }
            }
            for (name, m) in measures {
                let report = m.admissibility_integral(k)?;
                let value = report.value.map_or("inf".to_string(), |v| format!("{v:.6e}"));
                println!("{name:<14} {d:>2} {k:>2} {value:>14} {:>10}", report.admissible);
            }
        }
    }
    Ok(())
}
