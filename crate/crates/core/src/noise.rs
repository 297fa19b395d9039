//! Lattice increments of the martingale measure: Gaussian, independent across time steps,
//! spatially homogeneous with covariance fixed by a [`SpectralMeasure`].
//!
//! A slice is sampled diagonally in frequency. With `mass_j` the `μ`-mass of the dual cell
//! around `η_j` (equal to `q ρ(η_j)` away from a singular origin), the frequency samples
//! satisfy `E|S_j|² = dt (2π)^{2d} mass_j / q²`, which makes the real-space field `W` obey
//! `E⟨W,φ⟩⟨W,ψ⟩ = dt Σ_j mass_j Fφ(η_j) conj Fψ(η_j)` for lattice test functions.
//!
//! Random streams: a [`StreamKey`] `(seed, experiment, replica)` forms the ChaCha key and
//! the slice index selects the stream, so every slice is reproducible on its own.

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::covariance::{MeasureKind, SpectralMeasure};
use crate::error::{Error, Result};
use crate::lattice::{Grid, LatticeField, Spectrum};

/// Identifies one independent random stream family.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash)]
pub struct StreamKey {
    pub seed: u64,
    pub experiment: u64,
    pub replica: u64,
}

impl StreamKey {
    pub fn new(seed: u64) -> Self {
        StreamKey { seed, experiment: 0, replica: 0 }
    }

    pub fn with_experiment(self, experiment: u64) -> Self {
        StreamKey { experiment, ..self }
    }

    pub fn with_replica(self, replica: u64) -> Self {
        StreamKey { replica, ..self }
    }

    /// Generator for slice `slice` of this key.
    pub fn rng(&self, slice: u64) -> ChaCha8Rng {
        let mut key = [0u8; 32];
        key[..8].copy_from_slice(&self.seed.to_le_bytes());
        key[8..16].copy_from_slice(&self.experiment.to_le_bytes());
        key[16..24].copy_from_slice(&self.replica.to_le_bytes());
        let mut rng = ChaCha8Rng::from_seed(key);
        rng.set_stream(slice);
        rng
    }
}

/// Per-grid sampling data for one spectral measure.
#[derive(Clone, Debug)]
pub struct NoiseModel {
    grid: Grid,
    measure: Option<SpectralMeasure>,
    masses: Vec<f64>,
    /// `E|S_j|²` for unit time step.
    variance: Vec<f64>,
}

impl NoiseModel {
    pub fn new(grid: &Grid, measure: &SpectralMeasure) -> Result<Self> {
        if grid.dim() != measure.dim() {
            return Err(Error::GridMismatch(format!("measure lives in R^{}, grid in R^{}", measure.dim(), grid.dim())));
        }
        let q = grid.dual_cell_volume();
        let masses: Vec<f64> = (0..grid.len())
            .map(|j| {
                if j == 0 {
                    if let MeasureKind::Riesz { .. } = measure.kind() {
                        // the singular cell keeps its exact mass
                        return measure.origin_cell_mass(PI / grid.length());
                    }
                }
                measure.radial_density(grid.frequency_norm(j)).map(|rho| q * rho)
            })
            .collect::<Result<_>>()?;
        let scale = (2.0 * PI).powi(2 * grid.dim() as i32) / (q * q);
        let variance = masses.iter().map(|m| m * scale).collect();
        Ok(NoiseModel { grid: grid.clone(), measure: Some(measure.clone()), masses, variance })
    }

    /// Noise with explicitly given dual-cell masses, not tied to a continuum measure.
    pub fn from_cell_masses(grid: &Grid, masses: Vec<f64>) -> Result<Self> {
        if masses.len() != grid.len() {
            return Err(Error::GridMismatch("mass array does not match the grid".into()));
        }
        if masses.iter().any(|m| !m.is_finite() || *m < 0.0) {
            return Err(Error::invalid("cell masses must be finite and nonnegative"));
        }
        if (0..grid.len()).any(|j| masses[j] != masses[grid.partner(j)]) {
            return Err(Error::invalid("cell masses must be symmetric under η ↦ -η"));
        }
        let q = grid.dual_cell_volume();
        let scale = (2.0 * PI).powi(2 * grid.dim() as i32) / (q * q);
        let variance = masses.iter().map(|m| m * scale).collect();
        Ok(NoiseModel { grid: grid.clone(), measure: None, masses, variance })
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    /// The continuum measure behind the masses, when there is one.
    pub fn measure(&self) -> Option<&SpectralMeasure> {
        self.measure.as_ref()
    }

    /// `μ`-mass attributed to each dual cell, in FFT order.
    pub fn cell_masses(&self) -> &[f64] {
        &self.masses
    }

    /// `E|S_j|²` for a slice of width `dt`.
    pub fn frequency_variance(&self, j: usize, dt: f64) -> f64 {
        dt * self.variance[j]
    }

    /// `dt Σ_j mass_j Fφ(η_j) conj Fψ(η_j)`, the exact covariance of `⟨W,φ⟩` and `⟨W,ψ⟩`.
    pub fn pairing(&self, dt: f64, phi: &LatticeField, psi: &LatticeField) -> f64 {
        let (a, b) = (phi.spectrum().data(), psi.spectrum().data());
        dt * self.masses.iter().zip(a.iter().zip(b)).map(|(m, (x, y))| m * (x * y.conj()).re).sum::<f64>()
    }

    /// Draws one slice from `rng`.
    pub fn sample_slice<R: RngExt + ?Sized>(&self, dt: f64, rng: &mut R) -> Result<NoiseSlice> {
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(Error::invalid(format!("time step must be positive, got {dt}")));
        }
        let n = self.grid.len();
        let mut data = vec![Complex64::new(0.0, 0.0); n];
        for j in 0..n {
            let partner = self.grid.partner(j);
            if partner < j {
                continue;
            }
            let var = dt * self.variance[j];
            if partner == j {
                let z: f64 = rng.sample(StandardNormal);
                data[j] = Complex64::new(var.sqrt() * z, 0.0);
            } else {
                let (a, b): (f64, f64) = (rng.sample(StandardNormal), rng.sample(StandardNormal));
                let s = (var / 2.0).sqrt();
                data[j] = Complex64::new(s * a, s * b);
                data[partner] = data[j].conj();
            }
        }
        Ok(NoiseSlice { dt, spectrum: Spectrum::new(self.grid.clone(), data)? })
    }

    /// `T/dt` independent slices, slice `i` drawn from stream `i` of `key`.
    pub fn sample_path(&self, horizon: f64, dt: f64, key: StreamKey) -> Result<NoisePath> {
        let steps = step_count(horizon, dt)?;
        let slices = (0..steps).map(|i| self.sample_slice(dt, &mut key.rng(i as u64))).collect::<Result<Vec<_>>>()?;
        Ok(NoisePath { key, dt, slices })
    }
}

/// One time step of noise, stored in frequency space.
#[derive(Clone, Debug, PartialEq)]
pub struct NoiseSlice {
    dt: f64,
    spectrum: Spectrum,
}

impl NoiseSlice {
    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn spectrum(&self) -> &Spectrum {
        &self.spectrum
    }

    pub fn grid(&self) -> &Grid {
        self.spectrum.grid()
    }

    /// The real-space increment field `W`. Hermitian pairing makes it real by construction,
    /// so the imaginary roundoff is dropped.
    pub fn field(&self) -> LatticeField {
        let grid = self.spectrum.grid();
        let mut buf = self.spectrum.data().to_vec();
        grid.inverse_in_place(&mut buf);
        LatticeField::from_values(grid.clone(), buf.into_iter().map(|c| c.re).collect())
            .expect("slice spectrum matches its grid")
    }

    /// Sum of two consecutive slices, the increment over the doubled step.
    pub fn merge(&self, next: &NoiseSlice) -> Result<NoiseSlice> {
        if self.grid() != next.grid() {
            return Err(Error::GridMismatch("slices live on different grids".into()));
        }
        let data = self.spectrum.data().iter().zip(next.spectrum.data()).map(|(a, b)| a + b).collect();
        Ok(NoiseSlice { dt: self.dt + next.dt, spectrum: Spectrum::new(self.grid().clone(), data)? })
    }
}

/// The noise driving one replica: slices indexed by time step.
#[derive(Clone, Debug, PartialEq)]
pub struct NoisePath {
    key: StreamKey,
    dt: f64,
    slices: Vec<NoiseSlice>,
}

impl NoisePath {
    pub fn from_slices(key: StreamKey, dt: f64, slices: Vec<NoiseSlice>) -> Result<Self> {
        if slices.iter().any(|s| (s.dt - dt).abs() > 1e-12 * dt) {
            return Err(Error::invalid("all slices of a path share one time step"));
        }
        Ok(NoisePath { key, dt, slices })
    }

    pub fn key(&self) -> StreamKey {
        self.key
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn len(&self) -> usize {
        self.slices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.slices.is_empty()
    }

    pub fn slices(&self) -> &[NoiseSlice] {
        &self.slices
    }

    /// Real-space fields of all slices.
    pub fn fields(&self) -> Vec<LatticeField> {
        self.slices.iter().map(NoiseSlice::field).collect()
    }

    /// The same noise seen on a grid of step `2 dt` (consecutive pairs summed).
    pub fn coarsen(&self) -> Result<NoisePath> {
        if !self.slices.len().is_multiple_of(2) {
            return Err(Error::invalid("coarsening needs an even number of slices"));
        }
        let slices = self.slices.chunks_exact(2).map(|pair| pair[0].merge(&pair[1])).collect::<Result<Vec<_>>>()?;
        Ok(NoisePath { key: self.key, dt: 2.0 * self.dt, slices })
    }
}

/// Number of steps of width `dt` covering `[0, horizon]`; rejects non-integral ratios.
pub fn step_count(horizon: f64, dt: f64) -> Result<usize> {
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::invalid(format!("time step must be positive, got {dt}")));
    }
    if !(horizon >= 0.0 && horizon.is_finite()) {
        return Err(Error::invalid(format!("horizon must be nonnegative, got {horizon}")));
    }
    let ratio = horizon / dt;
    let steps = ratio.round();
    if (ratio - steps).abs() > 1e-9 * ratio.max(1.0) {
        return Err(Error::invalid(format!("horizon {horizon} is not a whole number of steps {dt}")));
    }
    Ok(steps as usize)
}

/// Free-function form of [`NoiseModel::sample_slice`].
pub fn sample_slice<R: RngExt + ?Sized>(
    grid: &Grid,
    measure: &SpectralMeasure,
    dt: f64,
    rng: &mut R,
) -> Result<NoiseSlice> {
    NoiseModel::new(grid, measure)?.sample_slice(dt, rng)
}

/// Free-function form of [`NoiseModel::sample_path`].
pub fn sample_path(grid: &Grid, measure: &SpectralMeasure, horizon: f64, dt: f64, key: StreamKey) -> Result<NoisePath> {
    NoiseModel::new(grid, measure)?.sample_path(horizon, dt, key)
}

/// Shape of a spatial cutoff applied to the noise.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum MaskWindow {
    /// Indicator of the ball.
    Sharp,
    /// `exp(-|x|²/(2 w²))` inside the ball, zero outside.
    Gaussian { width: f64 },
}

/// Restricts noise to the ball `|x| ≤ radius`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NoiseMask {
    pub radius: f64,
    pub window: MaskWindow,
}

impl NoiseMask {
    pub fn sharp(radius: f64) -> Self {
        NoiseMask { radius, window: MaskWindow::Sharp }
    }

    pub fn gaussian(radius: f64, width: f64) -> Self {
        NoiseMask { radius, window: MaskWindow::Gaussian { width } }
    }

    pub fn weight(&self, x: &[f64]) -> f64 {
        let r2: f64 = x.iter().map(|v| v * v).sum();
        if r2 > self.radius * self.radius {
            return 0.0;
        }
        match self.window {
            MaskWindow::Sharp => 1.0,
            MaskWindow::Gaussian { width } => (-r2 / (2.0 * width * width)).exp(),
        }
    }

    /// The mask sampled on a grid.
    pub fn field(&self, grid: &Grid) -> LatticeField {
        grid.sample(|x| self.weight(x))
    }
}
