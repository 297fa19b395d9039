//! Experiment configuration files (TOML).
//!
//! ```toml
//! experiment = "picard"
//! seed = 7
//! replicas = 100
//!
//! [solve]
//! points = 128
//! dt = 0.0078125
//!
//! [solve.measure]
//! kind = "riesz"
//! alpha = 0.5
//! ```
//!
//! Everything under `[solve]` is optional and overrides the experiment's built-in case;
//! matrix experiments ignore the keys that index their matrix.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::covariance::SpectralMeasure;
use crate::error::{Error, Result};
use crate::solver::Nonlinearity;
use crate::weighted::Weight;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Experiment {
    Admissibility,
    Isometry,
    MollifierLadder,
    Picard,
    Energy,
    Support,
    Weighted,
    Refinement,
}

impl Experiment {
    pub const ALL: [Experiment; 8] = [
        Experiment::Admissibility,
        Experiment::Isometry,
        Experiment::MollifierLadder,
        Experiment::Picard,
        Experiment::Energy,
        Experiment::Support,
        Experiment::Weighted,
        Experiment::Refinement,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Experiment::Admissibility => "admissibility",
            Experiment::Isometry => "isometry",
            Experiment::MollifierLadder => "mollifier-ladder",
            Experiment::Picard => "picard",
            Experiment::Energy => "energy",
            Experiment::Support => "support",
            Experiment::Weighted => "weighted",
            Experiment::Refinement => "refinement",
        }
    }

    pub fn description(self) -> &'static str {
        match self {
            Experiment::Admissibility => "Admissibility integral verdicts against the analytic thresholds",
            Experiment::Isometry => "Monte Carlo isometry, its Fourier-side rewriting and the J bound",
            Experiment::MollifierLadder => "mollified Green kernels and truncated integrands converge",
            Experiment::Picard => "Picard iteration against the sweep, and the moment envelope",
            Experiment::Energy => "noise-free spectral energy is conserved",
            Experiment::Support => "finite propagation speed of the wave equation",
            Experiment::Weighted => "weighted norms, the weighted isometry bound and the weighted solver",
            Experiment::Refinement => "mean-square increments shrink as the time step is halved",
        }
    }

    /// The `experiment` component of every stream key this experiment draws from.
    pub fn stream_id(self) -> u64 {
        Experiment::ALL.iter().position(|e| *e == self).unwrap() as u64 + 1
    }

    /// Replica count of the built-in case.
    pub fn default_replicas(self) -> usize {
        match self {
            Experiment::Admissibility | Experiment::Energy => 1,
            Experiment::Isometry | Experiment::Weighted => 1000,
            Experiment::MollifierLadder => 1,
            Experiment::Picard => 100,
            Experiment::Support => 5,
            Experiment::Refinement => 200,
        }
    }
}

impl fmt::Display for Experiment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Experiment {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Experiment::ALL
            .into_iter()
            .find(|e| e.name() == s)
            .ok_or_else(|| Error::invalid(format!("unknown experiment {s:?}")))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum MeasureBlock {
    White,
    Riesz { alpha: f64 },
}

impl MeasureBlock {
    pub fn build(&self, dim: usize) -> Result<SpectralMeasure> {
        match self {
            MeasureBlock::White => SpectralMeasure::white(dim),
            MeasureBlock::Riesz { alpha } => SpectralMeasure::riesz(dim, *alpha),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum NonlinearityBlock {
    Identity,
    Sine,
    OneMinusExp,
    Affine { a: f64, b: f64 },
}

impl NonlinearityBlock {
    pub fn build(&self) -> Nonlinearity {
        match self {
            NonlinearityBlock::Identity => Nonlinearity::Identity,
            NonlinearityBlock::Sine => Nonlinearity::Sine,
            NonlinearityBlock::OneMinusExp => Nonlinearity::OneMinusExp,
            NonlinearityBlock::Affine { a, b } => Nonlinearity::Affine { a: *a, b: *b },
        }
    }
}

/// Overrides of the solver case.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolveBlock {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dim: Option<usize>,
    /// Lattice points per axis.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub points: Option<usize>,
    /// Box side length.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub length: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub order: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub horizon: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dt: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub measure: Option<MeasureBlock>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub nonlinearity: Option<NonlinearityBlock>,
}

impl SolveBlock {
    pub fn is_empty(&self) -> bool {
        *self == SolveBlock::default()
    }

    fn validate(&self) -> Result<()> {
        let positive = |name: &str, v: Option<f64>| match v {
            Some(x) if !(x > 0.0 && x.is_finite()) => Err(Error::invalid(format!("solve.{name} must be positive"))),
            _ => Ok(()),
        };
        positive("length", self.length)?;
        positive("horizon", self.horizon)?;
        positive("dt", self.dt)?;
        if self.points.is_some_and(|n| n < 2) {
            return Err(Error::invalid("solve.points must be at least 2"));
        }
        if self.dim.is_some_and(|d| !(1..=4).contains(&d)) {
            return Err(Error::invalid("solve.dim must lie in 1..=4"));
        }
        if self.order == Some(0) {
            return Err(Error::invalid("solve.order must be at least 1"));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WeightBlock {
    #[serde(rename = "K")]
    pub exponent: f64,
    #[serde(rename = "R", default = "unit_radius")]
    pub radius: f64,
}

fn is_zero(v: &u64) -> bool {
    *v == 0
}

fn unit_radius() -> f64 {
    1.0
}

impl WeightBlock {
    pub fn build(&self, dim: usize) -> Result<Weight> {
        Weight::new(dim, self.exponent, self.radius)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: Experiment,
    pub seed: u64,
    pub replicas: usize,
    /// Index of the first replica; runs with disjoint ranges pool into one larger run.
    #[serde(default, skip_serializing_if = "is_zero")]
    pub replica_offset: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
    /// Replicas of the Picard distance study; the `picard` experiment only.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ratio_replicas: Option<usize>,
    #[serde(default, skip_serializing_if = "SolveBlock::is_empty")]
    pub solve: SolveBlock,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub weight: Option<WeightBlock>,
}

impl ExperimentConfig {
    /// The built-in case of `experiment`.
    pub fn new(experiment: Experiment, seed: u64) -> Self {
        ExperimentConfig {
            experiment,
            seed,
            replicas: experiment.default_replicas(),
            replica_offset: 0,
            output_dir: None,
            ratio_replicas: None,
            solve: SolveBlock::default(),
            weight: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.replicas == 0 {
            return Err(Error::invalid("replicas must be at least 1"));
        }
        if self.ratio_replicas == Some(0) {
            return Err(Error::invalid("ratio_replicas must be at least 1"));
        }
        self.solve.validate()?;
        if let Some(w) = &self.weight {
            if !(w.radius > 0.0 && w.radius.is_finite()) {
                return Err(Error::invalid("weight.R must be positive"));
            }
        }
        Ok(())
    }

    /// Parses and validates; `path` only labels errors.
    pub fn from_toml_str(text: &str, path: &Path) -> Result<Self> {
        let config: ExperimentConfig =
            toml::from_str(text).map_err(|e| Error::Config { path: path.to_path_buf(), message: e.to_string() })?;
        config.validate().map_err(|e| Error::Config { path: path.to_path_buf(), message: e.to_string() })?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        ExperimentConfig::from_toml_str(&text, path)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::invalid(format!("cannot serialize config: {e}")))
    }
}
