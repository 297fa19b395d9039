//! Runs every shipped config and prints one pass/fail line per acceptance check.

use std::path::Path;
use std::process::ExitCode;

use spde_wave::harness::{self, ExperimentConfig, ResultTable, Verdict, CHECKS};

fn main() -> ExitCode {
    let configs = Path::new(env!("CARGO_MANIFEST_DIR")).join("configs");
    let out = tempfile::tempdir().unwrap();
    let mut combined = ResultTable::new();
    let mut entries: Vec<_> = std::fs::read_dir(&configs)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|x| x == "toml"))
        .collect();
    entries.sort();
    for path in &entries {
        let cfg = ExperimentConfig::load(path).unwrap();
        let table = harness::run(&cfg, &out.path().join(cfg.experiment.name())).unwrap();
        combined.extend(table);
    }
    let mut failed = Vec::new();
    for check in &CHECKS {
        let verdict = combined.check_verdict(check.id);
        let label = if verdict == Verdict::Pass { "PASS" } else { "FAIL" };
        println!("{label} {:<20} {}", check.id, check.summary);
        if verdict != Verdict::Pass {
            failed.push(check.id);
        }
    }
    for row in combined.failures() {
        println!(
            "  failing row: {} {} {} value={:e} reference={:e}",
            row.check, row.case_id, row.quantity, row.value, row.reference
        );
    }
    if failed.is_empty() {
        println!("acceptance: {} of {} checks pass", CHECKS.len(), CHECKS.len());
        ExitCode::SUCCESS
    } else {
        println!("acceptance: failed checks {failed:?}");
        ExitCode::FAILURE
    }
}
