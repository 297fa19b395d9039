// Runs the isometry experiment as two disjoint replica ranges and pools the result tables.

use spde_wave::harness::{self, Experiment, ExperimentConfig};

fn main() -> spde_wave::Result<()> {
    let root = std::env::temp_dir().join(format!("spde-wave-aggregate-{}", std::process::id()));
    let mut tables = Vec::new();
    for (part, offset) in [(0, 0u64), (1, 30)] {
        let mut cfg = ExperimentConfig::new(Experiment::Isometry, 11);
        cfg.replicas = 30;
        cfg.replica_offset = offset;
        cfg.solve.points = Some(16);
        tables.push(harness::run(&cfg, &root.join(format!("part{part}")))?);
    }
    let pooled = harness::aggregate(&tables)?;
    std::fs::remove_dir_all(&root)?;
    for row in pooled.rows.iter().filter(|r| r.std_error.is_some()) {
        println!(
            "{:<20} {:.5e} ± {:.2e} ({} replicas) vs {:.5e}: {}",
            row.case_id,
            row.value,
            row.std_error.unwrap_or(0.0),
            row.replicas,
            row.reference,
            row.verdict()
        );
    }
    Ok(())
}
