//! Experiment configuration, Monte Carlo orchestration and result files.

pub mod config;
pub mod experiments;
pub mod table;

use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};

pub use config::{Experiment, ExperimentConfig, MeasureBlock, NonlinearityBlock, SolveBlock, WeightBlock};
pub use experiments::{checks_for, Check, CHECKS};
pub use table::{ResultTable, Row, Rule, Verdict};

use crate::error::Result;

/// Environment variable naming the default output directory.
pub const OUTPUT_DIR_ENV: &str = "SPDE_HARNESS_OUT";

/// `$SPDE_HARNESS_OUT`, or `results` when unset.
pub fn default_output_dir() -> PathBuf {
    std::env::var_os(OUTPUT_DIR_ENV).map_or_else(|| PathBuf::from("results"), PathBuf::from)
}

/// Output directory of a run: the config's own, else the default.
pub fn output_dir_for(cfg: &ExperimentConfig) -> PathBuf {
    cfg.output_dir.clone().unwrap_or_else(default_output_dir)
}

/// Runs one experiment, writing `<experiment>.csv` and any auxiliary files into `out_dir`.
pub fn run(cfg: &ExperimentConfig, out_dir: &Path) -> Result<ResultTable> {
    cfg.validate()?;
    fs::create_dir_all(out_dir)?;
    let table = experiments::run_experiment(cfg, out_dir)?;
    table.write_csv(BufWriter::new(File::create(out_dir.join(format!("{}.csv", cfg.experiment.name())))?))?;
    Ok(table)
}

/// Pools result tables row by row.
pub fn aggregate(tables: &[ResultTable]) -> Result<ResultTable> {
    tables.iter().try_fold(ResultTable::new(), |acc, t| acc.merge(t))
}

pub fn read_table(path: &Path) -> Result<ResultTable> {
    ResultTable::read_csv(File::open(path)?)
}
