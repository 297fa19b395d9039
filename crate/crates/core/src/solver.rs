//! Mild solutions of `∂²u/∂t² + (-1)^k Δ^k u = α(u) Ḟ` on the lattice:
//! `u(t) = u₀(t) + ∫₀^t ∫ G(t-s, · - y) α(u(s,y)) M(ds,dy)` with
//! `u₀(t) = (d/dt)G(t) * v₀ + G(t) * ṽ₀`.
//!
//! Each Fourier mode is advanced by the exact rotation of the harmonic oscillator with
//! frequency `w = |ξ|^k`. The noise impulse of step `i` is added to the velocity before the
//! rotation, which reproduces the left-endpoint sum `Σ_{i<j} G(t_j - t_i) * (α(u_i) W_i)`.

use std::io::Write;
use std::time::{Duration, Instant};

use num_complex::Complex64;
use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::covariance::SpectralMeasure;
use crate::error::{Error, Result};
use crate::greens::{GreenMultiplier, SpectralKernel};
use crate::lattice::{self, Grid, LatticeField};
use crate::noise::{step_count, NoiseMask, NoiseModel, NoisePath, StreamKey};
use crate::stochint::lattice_j;
use crate::weighted::Weight;

/// Piecewise-linear nonlinearity through sorted `(u, α(u))` nodes, constant outside.
#[derive(Clone, Debug, PartialEq)]
pub struct NonlinearityTable {
    nodes: Vec<(f64, f64)>,
}

impl NonlinearityTable {
    pub fn new(nodes: Vec<(f64, f64)>) -> Result<Self> {
        if nodes.len() < 2 || nodes.windows(2).any(|w| w[1].0.partial_cmp(&w[0].0) != Some(std::cmp::Ordering::Greater))
        {
            return Err(Error::invalid("nonlinearity table needs at least two increasing nodes"));
        }
        if nodes.iter().any(|(u, a)| !u.is_finite() || !a.is_finite()) {
            return Err(Error::invalid("nonlinearity table entries must be finite"));
        }
        Ok(NonlinearityTable { nodes })
    }

    pub fn nodes(&self) -> &[(f64, f64)] {
        &self.nodes
    }

    fn eval(&self, u: f64) -> f64 {
        let n = &self.nodes;
        if u <= n[0].0 {
            return n[0].1;
        }
        if u >= n[n.len() - 1].0 {
            return n[n.len() - 1].1;
        }
        let i = n.partition_point(|p| p.0 <= u) - 1;
        let (u0, a0) = n[i];
        let (u1, a1) = n[i + 1];
        a0 + (u - u0) * (a1 - a0) / (u1 - u0)
    }

    fn max_slope(&self) -> f64 {
        self.nodes.windows(2).map(|w| ((w[1].1 - w[0].1) / (w[1].0 - w[0].0)).abs()).fold(0.0, f64::max)
    }
}

/// The coefficient `α` multiplying the noise.
#[derive(Clone, Debug, PartialEq)]
pub enum Nonlinearity {
    Identity,
    Sine,
    /// `1 - e^{-u}`; Lipschitz with constant `e` on `u ≥ -1`, which is the declared range.
    OneMinusExp,
    /// `a u + b`.
    Affine {
        a: f64,
        b: f64,
    },
    Table(NonlinearityTable),
}

impl Nonlinearity {
    pub fn zero() -> Self {
        Nonlinearity::Affine { a: 0.0, b: 0.0 }
    }

    pub fn constant(b: f64) -> Self {
        Nonlinearity::Affine { a: 0.0, b }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Nonlinearity::Identity => "identity",
            Nonlinearity::Sine => "sine",
            Nonlinearity::OneMinusExp => "one-minus-exp",
            Nonlinearity::Affine { .. } => "affine",
            Nonlinearity::Table(_) => "custom-table",
        }
    }

    pub fn eval(&self, u: f64) -> f64 {
        match self {
            Nonlinearity::Identity => u,
            Nonlinearity::Sine => u.sin(),
            Nonlinearity::OneMinusExp => 1.0 - (-u).exp(),
            Nonlinearity::Affine { a, b } => a * u + b,
            Nonlinearity::Table(t) => t.eval(u),
        }
    }

    /// Constant `K` with `|α(u₁) - α(u₂)| ≤ K|u₁ - u₂|`, and also `|α(u)| ≤ K(1 + |u|)`.
    pub fn lipschitz(&self) -> f64 {
        match self {
            Nonlinearity::Identity | Nonlinearity::Sine => 1.0,
            Nonlinearity::OneMinusExp => std::f64::consts::E,
            Nonlinearity::Affine { a, b } => a.abs().max(b.abs()),
            Nonlinearity::Table(t) => t.max_slope().max(t.eval(0.0).abs()),
        }
    }

    pub fn vanishes_at_zero(&self) -> bool {
        self.eval(0.0) == 0.0
    }

    /// Interval on which [`Nonlinearity::lipschitz`] is guaranteed.
    pub fn lipschitz_range(&self) -> (f64, f64) {
        match self {
            Nonlinearity::OneMinusExp => (-1.0, f64::INFINITY),
            _ => (f64::NEG_INFINITY, f64::INFINITY),
        }
    }

    /// Spot-checks the Lipschitz and linear-growth constants on `samples` random pairs from
    /// `[lo, hi]`. Returns the first violating pair.
    pub fn spot_check(&self, lo: f64, hi: f64, samples: usize, seed: u64) -> Option<(f64, f64)> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let k = self.lipschitz();
        let slack = 1e-12;
        for _ in 0..samples {
            let a = lo + (hi - lo) * rng.random::<f64>();
            let b = lo + (hi - lo) * rng.random::<f64>();
            let lip = (self.eval(a) - self.eval(b)).abs() <= k * (a - b).abs() * (1.0 + slack) + slack;
            let growth = if self.vanishes_at_zero() {
                self.eval(a).abs() <= k * a.abs() * (1.0 + slack) + slack
            } else {
                self.eval(a).abs() <= k * (1.0 + a.abs()) * (1.0 + slack)
            };
            if !(lip && growth) {
                return Some((a, b));
            }
        }
        None
    }
}

/// The norm in which a solve is measured.
#[derive(Clone, Debug, PartialEq)]
pub enum NormSpace {
    L2,
    Weighted(Weight),
}

impl NormSpace {
    pub fn label(&self) -> &'static str {
        match self {
            NormSpace::L2 => "L2",
            NormSpace::Weighted(_) => "L2theta",
        }
    }

    pub fn norm_sq(&self, f: &LatticeField) -> f64 {
        match self {
            NormSpace::L2 => lattice::l2_norm_sq(f),
            NormSpace::Weighted(w) => w.norm_sq(f),
        }
    }
}

/// Which fixed-point algorithm produces a report.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Method {
    Sweep,
    Picard(InitialGuess),
}

/// Starting trajectory of the Picard iteration.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum InitialGuess {
    Deterministic,
    Zero,
}

#[derive(Clone, Debug)]
pub struct SolveConfig {
    pub grid: Grid,
    pub order: u32,
    pub horizon: f64,
    pub dt: f64,
    pub measure: SpectralMeasure,
    pub nonlinearity: Nonlinearity,
    /// `v₀`, the initial position.
    pub initial_position: LatticeField,
    /// `ṽ₀`, the initial velocity.
    pub initial_velocity: LatticeField,
    pub noise_mask: Option<NoiseMask>,
    pub seed: u64,
    pub replicas: usize,
    pub picard_tolerance: f64,
    /// Defaults to `steps + 2`, enough to reach the discrete fixed point.
    pub picard_max_iterations: Option<usize>,
    pub snapshot_stride: usize,
    pub keep_trajectory: bool,
}

impl SolveConfig {
    /// Zero initial data, `α = sin`, no mask.
    pub fn new(grid: Grid, order: u32, horizon: f64, dt: f64, measure: SpectralMeasure) -> Self {
        SolveConfig {
            initial_position: LatticeField::zeros(&grid),
            initial_velocity: LatticeField::zeros(&grid),
            grid,
            order,
            horizon,
            dt,
            measure,
            nonlinearity: Nonlinearity::Sine,
            noise_mask: None,
            seed: 0,
            replicas: 1,
            picard_tolerance: 1e-13,
            picard_max_iterations: None,
            snapshot_stride: 10,
            keep_trajectory: true,
        }
    }

    pub fn with_nonlinearity(mut self, alpha: Nonlinearity) -> Self {
        self.nonlinearity = alpha;
        self
    }

    pub fn with_initial_data(mut self, position: LatticeField, velocity: LatticeField) -> Self {
        self.initial_position = position;
        self.initial_velocity = velocity;
        self
    }

    pub fn with_mask(mut self, mask: NoiseMask) -> Self {
        self.noise_mask = Some(mask);
        self
    }

    pub fn steps(&self) -> Result<usize> {
        step_count(self.horizon, self.dt)
    }
}

/// Squared distances `‖u_{n+1}(t_j) - u_n(t_j)‖²` of one Picard iteration.
#[derive(Clone, Debug, PartialEq)]
pub struct IterationRecord {
    pub iteration: usize,
    pub distances_sq: Vec<f64>,
}

impl IterationRecord {
    pub fn sup_distance(&self) -> f64 {
        self.distances_sq.iter().fold(0.0f64, |m, v| m.max(*v)).sqrt()
    }
}

#[derive(Clone, Debug)]
pub struct SolveReport {
    pub space: NormSpace,
    pub method: Method,
    pub times: Vec<f64>,
    /// `‖u(t_j)‖²` in the report's norm.
    pub norms_sq: Vec<f64>,
    /// Picard history; a sweep has none.
    pub iterations: Vec<IterationRecord>,
    pub converged: bool,
    /// Every `snapshot_stride`-th field, plus the last.
    pub snapshots: Vec<(usize, LatticeField)>,
    /// All fields `u(t_0), …, u(t_n)` when the config keeps them.
    pub trajectory: Vec<LatticeField>,
    pub steps: usize,
    pub wall_clock: Duration,
}

impl PartialEq for SolveReport {
    fn eq(&self, other: &Self) -> bool {
        self.space == other.space
            && self.method == other.method
            && self.times == other.times
            && self.norms_sq == other.norms_sq
            && self.iterations == other.iterations
            && self.converged == other.converged
            && self.snapshots == other.snapshots
            && self.trajectory == other.trajectory
            && self.steps == other.steps
    }
}

impl SolveReport {
    pub fn final_field(&self) -> Option<&LatticeField> {
        self.snapshots.last().map(|(_, f)| f)
    }

    /// Writes `space,t,iteration,M_n,moment,band` rows. For a single path `moment` is
    /// `‖u(t)‖²` and `band` is 0; `M_n` is the last recorded Picard distance at `t`.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["space", "t", "iteration", "M_n", "moment", "band"])?;
        for (n, rec) in self.iterations.iter().enumerate() {
            for (j, t) in self.times.iter().enumerate() {
                out.write_record([
                    self.space.label().to_string(),
                    format!("{t:e}"),
                    n.to_string(),
                    format!("{:e}", rec.distances_sq[j]),
                    format!("{:e}", self.norms_sq[j]),
                    "0".to_string(),
                ])?;
            }
        }
        if self.iterations.is_empty() {
            for (j, t) in self.times.iter().enumerate() {
                out.write_record([
                    self.space.label().to_string(),
                    format!("{t:e}"),
                    "0".to_string(),
                    "0".to_string(),
                    format!("{:e}", self.norms_sq[j]),
                    "0".to_string(),
                ])?;
            }
        }
        out.flush()?;
        Ok(())
    }
}

/// Solver for one configuration; cheap to share across replica threads.
#[derive(Debug)]
pub struct Solver {
    cfg: SolveConfig,
    green: GreenMultiplier,
    noise: NoiseModel,
    space: NormSpace,
    steps: usize,
    /// `|ξ|^k`, `cos(dt w)`, `sin(dt w)/w`, `w sin(dt w)` per mode.
    freq: Vec<f64>,
    cos_dt: Vec<f64>,
    sinc_dt: Vec<f64>,
    wsin_dt: Vec<f64>,
    mask: Option<Vec<f64>>,
}

impl Solver {
    /// Unweighted solver; requires `α(0) = 0` and the admissibility condition for `k`.
    pub fn new(cfg: SolveConfig) -> Result<Self> {
        if !cfg.nonlinearity.vanishes_at_zero() {
            return Err(Error::WeightedSolverRequired);
        }
        Solver::build(cfg, NormSpace::L2)
    }

    /// Solver measuring in `L²_θ`; requires the wave operator but admits `α(0) ≠ 0`.
    pub fn weighted(cfg: SolveConfig, weight: Weight) -> Result<Self> {
        if cfg.order != 1 {
            return Err(Error::CompactSupportRequired(cfg.order));
        }
        Solver::build(cfg, NormSpace::Weighted(weight))
    }

    fn build(cfg: SolveConfig, space: NormSpace) -> Result<Self> {
        let steps = cfg.steps()?;
        let green = GreenMultiplier::new(cfg.order, cfg.horizon)?;
        if cfg.measure.dim() != cfg.grid.dim() {
            return Err(Error::GridMismatch("measure and grid dimensions differ".into()));
        }
        if !cfg.measure.admissibility_integral(cfg.order)?.admissible {
            return Err(Error::NotAdmissible { order: cfg.order });
        }
        for f in [&cfg.initial_position, &cfg.initial_velocity] {
            if f.grid() != &cfg.grid {
                return Err(Error::GridMismatch("initial data must live on the solver grid".into()));
            }
            if f.values().iter().any(|v| !v.is_finite()) {
                return Err(Error::invalid("initial data must be finite"));
            }
        }
        if cfg.picard_tolerance.is_nan() || cfg.picard_tolerance < 0.0 {
            return Err(Error::invalid("Picard tolerance must be nonnegative"));
        }
        let noise = NoiseModel::new(&cfg.grid, &cfg.measure)?;
        let grid = &cfg.grid;
        let freq: Vec<f64> = (0..grid.len()).map(|j| green.frequency_power(grid.frequency_norm(j))).collect();
        let cos_dt = (0..grid.len()).map(|j| green.dt_value(cfg.dt, grid.frequency_norm(j))).collect();
        let sinc_dt = (0..grid.len()).map(|j| green.value(cfg.dt, grid.frequency_norm(j))).collect();
        let wsin_dt = freq.iter().map(|w| w * (cfg.dt * w).sin()).collect();
        let mask = cfg.noise_mask.map(|m| m.field(grid).into_values());
        Ok(Solver { cfg, green, noise, space, steps, freq, cos_dt, sinc_dt, wsin_dt, mask })
    }

    pub fn config(&self) -> &SolveConfig {
        &self.cfg
    }

    pub fn green(&self) -> &GreenMultiplier {
        &self.green
    }

    pub fn noise(&self) -> &NoiseModel {
        &self.noise
    }

    pub fn space(&self) -> &NormSpace {
        &self.space
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn times(&self) -> Vec<f64> {
        (0..=self.steps).map(|j| j as f64 * self.cfg.dt).collect()
    }

    /// `u₀(t) = (d/dt)G(t) * v₀ + G(t) * ṽ₀`.
    pub fn deterministic_part(&self, t: f64) -> Result<LatticeField> {
        let grid = &self.cfg.grid;
        let a = lattice::multiplier_apply(&self.cfg.initial_position, &self.green.dt_dual_function(grid, t))?;
        let b = lattice::multiplier_apply(&self.cfg.initial_velocity, &self.green.dual_function(grid, t))?;
        a.zip_with(&b, |x, y| x + y)
    }

    /// `∂_t u₀(t)`, with multipliers `-w sin(tw)` on `v₀` and `cos(tw)` on `ṽ₀`.
    pub fn deterministic_velocity(&self, t: f64) -> Result<LatticeField> {
        let grid = &self.cfg.grid;
        let on_position = lattice::DualFunction(self.freq.iter().map(|w| -w * (t * w).sin()).collect());
        let a = lattice::multiplier_apply(&self.cfg.initial_position, &on_position)?;
        let b = lattice::multiplier_apply(&self.cfg.initial_velocity, &self.green.dt_dual_function(grid, t))?;
        a.zip_with(&b, |x, y| x + y)
    }

    /// `‖u₀(t_j)‖²` in the solver's norm, for every time on the grid.
    pub fn deterministic_norms_sq(&self) -> Result<Vec<f64>> {
        self.times().into_iter().map(|t| Ok(self.space.norm_sq(&self.deterministic_part(t)?))).collect()
    }

    /// Spectral energy `(2π)^{-d} q Σ (w²|Fu|² + |F∂_t u|²)` of the noise-free motion at each
    /// step, obtained by iterating the one-step rotation.
    pub fn energy_trajectory(&self) -> Vec<f64> {
        let weight = self.cfg.grid.spectral_weight();
        let mut p = self.cfg.initial_position.spectrum().data().to_vec();
        let mut q = self.cfg.initial_velocity.spectrum().data().to_vec();
        let mut out = Vec::with_capacity(self.steps + 1);
        for step in 0..=self.steps {
            let e: f64 = (0..p.len()).map(|j| self.freq[j].powi(2) * p[j].norm_sqr() + q[j].norm_sqr()).sum();
            out.push(weight * e);
            if step < self.steps {
                self.rotate(&mut p, &mut q);
            }
        }
        out
    }

    fn rotate(&self, p: &mut [Complex64], q: &mut [Complex64]) {
        for j in 0..p.len() {
            let (pj, qj) = (p[j], q[j]);
            p[j] = pj * self.cos_dt[j] + qj * self.sinc_dt[j];
            q[j] = qj * self.cos_dt[j] - pj * self.wsin_dt[j];
        }
    }

    /// The lattice path for `replica`.
    pub fn sample_path(&self, key: StreamKey) -> Result<NoisePath> {
        self.noise.sample_path(self.cfg.horizon, self.cfg.dt, key)
    }

    /// One pass over the time grid. The forcing at step `j` is `α(source_j) W_j`, where the
    /// source is `previous` when given (a Picard step) and the current solution otherwise.
    fn pass(&self, noise_fields: &[Vec<f64>], previous: Option<&[Vec<f64>]>) -> Vec<Vec<f64>> {
        let grid = &self.cfg.grid;
        let alpha = &self.cfg.nonlinearity;
        let mut p = self.cfg.initial_position.spectrum().data().to_vec();
        let mut q = self.cfg.initial_velocity.spectrum().data().to_vec();
        let mut out = Vec::with_capacity(self.steps + 1);
        let mut buf = vec![Complex64::new(0.0, 0.0); grid.len()];
        for j in 0..=self.steps {
            buf.copy_from_slice(&p);
            grid.inverse_in_place(&mut buf);
            let u: Vec<f64> = buf.iter().map(|c| c.re).collect();
            if j < self.steps {
                let source = previous.map_or(&u, |prev| &prev[j]);
                let w = &noise_fields[j];
                for (m, b) in buf.iter_mut().enumerate() {
                    let mut f = alpha.eval(source[m]) * w[m];
                    if let Some(mask) = &self.mask {
                        f *= mask[m];
                    }
                    *b = Complex64::new(f, 0.0);
                }
                grid.forward_in_place(&mut buf);
                for (qj, fj) in q.iter_mut().zip(&buf) {
                    *qj += fj;
                }
                self.rotate(&mut p, &mut q);
            }
            out.push(u);
        }
        out
    }

    fn deterministic_trajectory(&self) -> Vec<Vec<f64>> {
        let silent = vec![vec![0.0; self.cfg.grid.len()]; self.steps];
        self.pass(&silent, None)
    }

    /// Solves the discrete fixed-point equation by one forward pass.
    pub fn explicit_sweep(&self, path: &NoisePath) -> Result<SolveReport> {
        let start = Instant::now();
        let fields = self.noise_fields(path)?;
        let u = self.pass(&fields, None);
        Ok(self.report(Method::Sweep, u, Vec::new(), true, start))
    }

    /// Pathwise Picard iteration from `guess` until the sup-in-time `L²` distance between
    /// iterates falls below the tolerance or the iteration cap is reached.
    pub fn picard_iterate(&self, path: &NoisePath, guess: InitialGuess) -> Result<SolveReport> {
        let start = Instant::now();
        let fields = self.noise_fields(path)?;
        let mut current = match guess {
            InitialGuess::Deterministic => self.deterministic_trajectory(),
            InitialGuess::Zero => vec![vec![0.0; self.cfg.grid.len()]; self.steps + 1],
        };
        let max_iter = self.cfg.picard_max_iterations.unwrap_or(self.steps + 2);
        let h_d = self.cfg.grid.cell_volume();
        let mut history = Vec::new();
        let mut converged = false;
        for n in 0..max_iter {
            let next = self.pass(&fields, Some(&current));
            let distances_sq: Vec<f64> = next
                .iter()
                .zip(&current)
                .map(|(a, b)| h_d * a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>())
                .collect();
            let record = IterationRecord { iteration: n, distances_sq };
            let sup = record.sup_distance();
            history.push(record);
            current = next;
            if sup < self.cfg.picard_tolerance {
                converged = true;
                break;
            }
        }
        Ok(self.report(Method::Picard(guess), current, history, converged, start))
    }

    /// Runs replica `replica` of stream family `key` with the given method.
    pub fn run_replica(&self, key: StreamKey, method: Method) -> Result<SolveReport> {
        let path = self.sample_path(key)?;
        match method {
            Method::Sweep => self.explicit_sweep(&path),
            Method::Picard(g) => self.picard_iterate(&path, g),
        }
    }

    /// Replicas `first..first+count` of `key`, computed in parallel and returned in order.
    pub fn run_replicas(&self, key: StreamKey, first: u64, count: usize, method: Method) -> Result<Vec<SolveReport>> {
        (0..count as u64).into_par_iter().map(|r| self.run_replica(key.with_replica(first + r), method)).collect()
    }

    fn noise_fields(&self, path: &NoisePath) -> Result<Vec<Vec<f64>>> {
        if path.len() != self.steps {
            return Err(Error::invalid(format!("noise path has {} slices, solver needs {}", path.len(), self.steps)));
        }
        if (path.dt() - self.cfg.dt).abs() > 1e-12 * self.cfg.dt {
            return Err(Error::invalid("noise path time step differs from the solver's"));
        }
        if let Some(s) = path.slices().first() {
            if s.grid() != &self.cfg.grid {
                return Err(Error::GridMismatch("noise path uses a different grid".into()));
            }
        }
        Ok(path.slices().iter().map(|s| s.field().into_values()).collect())
    }

    fn report(
        &self,
        method: Method,
        u: Vec<Vec<f64>>,
        iterations: Vec<IterationRecord>,
        converged: bool,
        start: Instant,
    ) -> SolveReport {
        let grid = &self.cfg.grid;
        let fields: Vec<LatticeField> =
            u.into_iter().map(|v| LatticeField::from_values(grid.clone(), v).unwrap()).collect();
        let norms_sq = fields.iter().map(|f| self.space.norm_sq(f)).collect();
        let stride = self.cfg.snapshot_stride.max(1);
        let mut snapshots: Vec<(usize, LatticeField)> =
            fields.iter().enumerate().filter(|(j, _)| j % stride == 0).map(|(j, f)| (j, f.clone())).collect();
        if !self.steps.is_multiple_of(stride) {
            snapshots.push((self.steps, fields[self.steps].clone()));
        }
        SolveReport {
            space: self.space.clone(),
            method,
            times: self.times(),
            norms_sq,
            iterations,
            converged,
            snapshots,
            trajectory: if self.cfg.keep_trajectory { fields } else { Vec::new() },
            steps: self.steps,
            wall_clock: start.elapsed(),
        }
    }

    /// `C = max_s J(s)` over the lags on the time grid, with the lattice `J`.
    pub fn j_constant(&self) -> f64 {
        (1..=self.steps).map(|i| lattice_j(&self.green, &self.noise, i as f64 * self.cfg.dt)).fold(0.0, f64::max)
    }

    /// `2 ‖u₀(t)‖² e^{2 K² C t}` with `C = max_s J(s)`.
    pub fn moment_envelope(&self) -> Result<Vec<f64>> {
        let k = self.cfg.nonlinearity.lipschitz();
        let c = self.j_constant();
        Ok(self
            .deterministic_norms_sq()?
            .into_iter()
            .zip(self.times())
            .map(|(n, t)| 2.0 * n * (2.0 * k * k * c * t).exp())
            .collect())
    }
}

/// Monte Carlo moment trajectory `E‖u(t)‖²` across replicas.
#[derive(Clone, Debug, PartialEq)]
pub struct MomentTrack {
    pub space: NormSpace,
    pub times: Vec<f64>,
    pub mean: Vec<f64>,
    pub std_error: Vec<f64>,
    pub replicas: usize,
}

pub const MIN_MOMENT_REPLICAS: usize = 30;

/// Replica means and standard errors of `‖u(t)‖²`.
pub fn moment_track(reports: &[SolveReport]) -> Result<MomentTrack> {
    if reports.len() < MIN_MOMENT_REPLICAS {
        return Err(Error::invalid(format!(
            "moment tracking needs at least {MIN_MOMENT_REPLICAS} replicas, got {}",
            reports.len()
        )));
    }
    let first = &reports[0];
    if reports.iter().any(|r| r.times != first.times || r.space != first.space) {
        return Err(Error::invalid("reports disagree on time grid or norm"));
    }
    let n = reports.len() as f64;
    let cols = first.times.len();
    let mut mean = vec![0.0; cols];
    let mut std_error = vec![0.0; cols];
    for j in 0..cols {
        let m = reports.iter().map(|r| r.norms_sq[j]).sum::<f64>() / n;
        let var = reports.iter().map(|r| (r.norms_sq[j] - m).powi(2)).sum::<f64>() / (n - 1.0);
        mean[j] = m;
        std_error[j] = (var / n).sqrt();
    }
    Ok(MomentTrack { space: first.space.clone(), times: first.times.clone(), mean, std_error, replicas: reports.len() })
}

impl MomentTrack {
    /// Largest `mean - 3 s.e. - envelope`; nonpositive means the envelope holds.
    pub fn worst_excess(&self, envelope: &[f64]) -> f64 {
        self.mean
            .iter()
            .zip(&self.std_error)
            .zip(envelope)
            .map(|((m, se), e)| m - 3.0 * se - e)
            .fold(f64::NEG_INFINITY, f64::max)
    }

    /// CSV with `band = 3 s.e.`.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["space", "t", "iteration", "M_n", "moment", "band"])?;
        for j in 0..self.times.len() {
            out.write_record([
                self.space.label().to_string(),
                format!("{:e}", self.times[j]),
                "0".to_string(),
                "0".to_string(),
                format!("{:e}", self.mean[j]),
                format!("{:e}", 3.0 * self.std_error[j]),
            ])?;
        }
        out.flush()?;
        Ok(())
    }
}

/// Replica average of the Picard distances `M̂_n(t_j)`; iterations missing from a report
/// (it converged earlier) count as zero.
pub fn mean_picard_distances(reports: &[SolveReport]) -> Vec<Vec<f64>> {
    let depth = reports.iter().map(|r| r.iterations.len()).max().unwrap_or(0);
    let cols = reports.first().map_or(0, |r| r.times.len());
    let mut out = vec![vec![0.0; cols]; depth];
    for r in reports {
        for (n, rec) in r.iterations.iter().enumerate() {
            for (j, v) in rec.distances_sq.iter().enumerate() {
                out[n][j] += v / reports.len() as f64;
            }
        }
    }
    out
}

/// Largest `sup_t ‖a(t) - b(t)‖` over two trajectories.
pub fn sup_distance(a: &[LatticeField], b: &[LatticeField]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::invalid("trajectories have different lengths"));
    }
    let mut worst = 0.0f64;
    for (x, y) in a.iter().zip(b) {
        worst = worst.max(lattice::l2_norm(&x.zip_with(y, |p, q| p - q)?));
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn base(n: usize, order: u32) -> SolveConfig {
        let grid = Grid::new(1, n, 8.0).unwrap();
        SolveConfig::new(grid, order, 0.5, 1.0 / 32.0, SpectralMeasure::white(1).unwrap())
    }

    #[test]
    fn non_vanishing_alpha_needs_weighted_solver() {
        let cfg = base(32, 1).with_nonlinearity(Nonlinearity::constant(1.0));
        assert!(matches!(Solver::new(cfg), Err(Error::WeightedSolverRequired)));
    }

    #[test]
    fn inadmissible_noise_rejected() {
        let grid = Grid::new(2, 8, 4.0).unwrap();
        let cfg = SolveConfig::new(grid, 1, 1.0, 0.25, SpectralMeasure::white(2).unwrap());
        assert!(matches!(Solver::new(cfg), Err(Error::NotAdmissible { order: 1 })));
    }

    #[test]
    fn zero_alpha_reproduces_deterministic_part() {
        let grid = Grid::new(1, 64, 8.0).unwrap();
        let v0 = grid.sample(|x| (-x[0] * x[0]).exp());
        let v1 = grid.sample(|x| x[0] * (-x[0] * x[0]).exp());
        let cfg = base(64, 2).with_nonlinearity(Nonlinearity::zero()).with_initial_data(v0.clone(), v1);
        let solver = Solver::new(cfg).unwrap();
        let r = solver.explicit_sweep(&solver.sample_path(StreamKey::new(5)).unwrap()).unwrap();
        for (j, t) in solver.times().iter().enumerate() {
            let exact = solver.deterministic_part(*t).unwrap();
            let diff = lattice::l2_norm(&r.trajectory[j].zip_with(&exact, |a, b| a - b).unwrap());
            assert!(diff < 1e-12, "t={t}: {diff}");
        }
        assert_eq!(solver.deterministic_part(0.0).unwrap().values().len(), v0.values().len());
        let d0 = solver.deterministic_part(0.0).unwrap();
        assert!(d0.values().iter().zip(v0.values()).all(|(a, b)| (a - b).abs() < 1e-14));
    }

    #[test]
    fn picard_matches_sweep() {
        let grid = Grid::new(1, 32, 8.0).unwrap();
        let v0 = grid.sample(|x| (-x[0] * x[0]).exp());
        let cfg = base(32, 1).with_initial_data(v0, LatticeField::zeros(&grid));
        let solver = Solver::new(cfg).unwrap();
        let path = solver.sample_path(StreamKey::new(9)).unwrap();
        let sweep = solver.explicit_sweep(&path).unwrap();
        let picard = solver.picard_iterate(&path, InitialGuess::Zero).unwrap();
        assert!(picard.converged);
        assert!(picard.iterations.len() <= solver.steps() + 2);
        assert!(sup_distance(&sweep.trajectory, &picard.trajectory).unwrap() < 1e-10);
    }

    #[test]
    fn nonlinearity_constants() {
        for a in [Nonlinearity::Identity, Nonlinearity::Sine, Nonlinearity::Affine { a: -2.0, b: 0.5 }] {
            assert_eq!(a.spot_check(-10.0, 10.0, 1000, 1), None, "{}", a.name());
        }
        assert_eq!(Nonlinearity::OneMinusExp.spot_check(-1.0, 10.0, 1000, 2), None);
        let t = NonlinearityTable::new(vec![(-1.0, -1.0), (0.0, 0.0), (2.0, 1.0)]).unwrap();
        let alpha = Nonlinearity::Table(t);
        assert!(alpha.vanishes_at_zero());
        assert_eq!(alpha.lipschitz(), 1.0);
        assert_eq!(alpha.spot_check(-5.0, 5.0, 1000, 3), None);
    }
}
