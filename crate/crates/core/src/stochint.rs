//! The stochastic convolution `v_{g,Z}(T) = ∫₀^T ∫ g(T-s, · - y) Z(s,y) M(ds,dy)` on the
//! lattice, its isometry functional and bound, and the approximation ladders obtained by
//! mollifying the kernel or truncating the integrand.
//!
//! Time is discretized by the left-endpoint rule: the slice of step `i` multiplies `Z` at
//! step `i`, so `v(t_n) = Σ_{i<n} g(t_n - t_i) * (Z_i W_i)`. In this model the isometry
//! `E‖v(t_n)‖² = I_{g,Z}` holds exactly with
//! `I_{g,Z} = Σ_i dt (2π)^{-d} q Σ_ξ |FZ_i(ξ)|² A_i(ξ)` and
//! `A_i(ξ) = Σ_η mass_η |g(t_n - t_i)(ξ - η)|²` (dual indices wrap cyclically).

use std::collections::HashMap;
use std::f64::consts::PI;
use std::fmt;
use std::num::NonZeroUsize;
use std::sync::{Mutex, OnceLock};

use gauss_quad::legendre::GaussLegendre;
use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::greens::{GreenMultiplier, SpectralKernel};
use crate::lattice::{l2_norm_sq, Grid, LatticeField};
use crate::noise::{NoiseModel, NoisePath};
use crate::quad;

/// Integrand `Z(s, ·)` on the time grid, with the number of noise slices each step may
/// depend on.
#[derive(Clone, Debug, PartialEq)]
pub struct IntegrandProcess {
    dt: f64,
    fields: Vec<LatticeField>,
    depends_on: Vec<usize>,
}

impl IntegrandProcess {
    pub fn new(dt: f64) -> Result<Self> {
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(Error::invalid(format!("time step must be positive, got {dt}")));
        }
        Ok(IntegrandProcess { dt, fields: Vec::new(), depends_on: Vec::new() })
    }

    /// A process independent of the noise.
    pub fn deterministic(dt: f64, fields: Vec<LatticeField>) -> Result<Self> {
        let mut z = IntegrandProcess::new(dt)?;
        for f in fields {
            z.push(f, 0)?;
        }
        Ok(z)
    }

    /// The same field at every one of `steps` steps.
    pub fn constant(dt: f64, field: LatticeField, steps: usize) -> Result<Self> {
        IntegrandProcess::deterministic(dt, vec![field; steps])
    }

    /// Appends the next step; `depends_on` counts the noise slices used to build it.
    pub fn push(&mut self, field: LatticeField, depends_on: usize) -> Result<()> {
        let step = self.fields.len();
        if depends_on > step {
            return Err(Error::NotAdapted { step, depends_on });
        }
        if let Some(first) = self.fields.first() {
            if first.grid() != field.grid() {
                return Err(Error::GridMismatch("integrand steps live on different grids".into()));
            }
        }
        self.fields.push(field);
        self.depends_on.push(depends_on);
        Ok(())
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn steps(&self) -> usize {
        self.fields.len()
    }

    pub fn horizon(&self) -> f64 {
        self.dt * self.fields.len() as f64
    }

    pub fn fields(&self) -> &[LatticeField] {
        &self.fields
    }

    pub fn field(&self, step: usize) -> &LatticeField {
        &self.fields[step]
    }

    pub fn grid(&self) -> Option<&Grid> {
        self.fields.first().map(LatticeField::grid)
    }

    fn check_adapted(&self) -> Result<()> {
        for (step, &d) in self.depends_on.iter().enumerate() {
            if d > step {
                return Err(Error::NotAdapted { step, depends_on: d });
            }
        }
        Ok(())
    }

    /// `|FZ_i(ξ)|²` for each step.
    pub fn power_spectra(&self) -> Vec<Vec<f64>> {
        self.fields.iter().map(|f| f.spectrum().power()).collect()
    }

    /// `Z_n(s,x) = Z(s,x) 1_{[-n,n]^d}(x)`.
    pub fn truncated(&self, half_width: f64) -> IntegrandProcess {
        let fields = self
            .fields
            .iter()
            .map(|f| f.masked(|x| if x.iter().all(|c| c.abs() <= half_width) { 1.0 } else { 0.0 }))
            .collect();
        IntegrandProcess { dt: self.dt, fields, depends_on: self.depends_on.clone() }
    }

    /// Step-wise difference `self - other`.
    pub fn difference(&self, other: &IntegrandProcess) -> Result<IntegrandProcess> {
        if self.steps() != other.steps() || self.dt != other.dt {
            return Err(Error::invalid("integrands differ in time grid"));
        }
        let fields = self
            .fields
            .iter()
            .zip(&other.fields)
            .map(|(a, b)| a.zip_with(b, |x, y| x - y))
            .collect::<Result<Vec<_>>>()?;
        let depends_on = self.depends_on.iter().zip(&other.depends_on).map(|(a, b)| *a.max(b)).collect();
        Ok(IntegrandProcess { dt: self.dt, fields, depends_on })
    }
}

/// Continuum admissibility check: a kernel with decay order `k` paired with a measure that
/// fails the admissibility condition has no finite isometry functional.
fn check_finite<K: SpectralKernel + ?Sized>(kernel: &K, noise: &NoiseModel) -> Result<()> {
    if let (Some(k), Some(m)) = (kernel.admissibility_order(), noise.measure()) {
        if !m.is_admissible(k) {
            return Err(Error::Divergent(format!("spectral measure fails the admissibility condition for k = {k}")));
        }
    }
    Ok(())
}

fn check_grids(z: &IntegrandProcess, noise: &NoiseModel) -> Result<()> {
    match z.grid() {
        Some(g) if g != noise.grid() => Err(Error::GridMismatch("integrand and noise use different grids".into())),
        _ => Ok(()),
    }
}

/// `|g(s)(η)|²` on the dual grid.
fn kernel_power<K: SpectralKernel + ?Sized>(kernel: &K, grid: &Grid, s: f64) -> Vec<f64> {
    (0..grid.len())
        .map(|j| {
            let v = kernel.multiplier(s, grid.frequency_norm(j));
            v * v
        })
        .collect()
}

/// `v(t_n) = Σ_{i<n} g(t_n - t_i) * (Z_i W_i)`.
pub fn stochastic_convolution<K: SpectralKernel + ?Sized>(
    kernel: &K,
    z: &IntegrandProcess,
    path: &NoisePath,
    t_index: usize,
) -> Result<LatticeField> {
    z.check_adapted()?;
    if t_index > z.steps() || t_index > path.len() {
        return Err(Error::invalid(format!(
            "time index {t_index} beyond the integrand ({}) or noise ({}) horizon",
            z.steps(),
            path.len()
        )));
    }
    let grid = match (z.grid(), path.slices().first()) {
        (Some(g), Some(s)) => {
            if g != s.grid() {
                return Err(Error::GridMismatch("integrand and noise use different grids".into()));
            }
            g.clone()
        }
        (Some(g), None) => return Ok(LatticeField::zeros(g)),
        (None, _) => return Err(Error::invalid("empty integrand")),
    };
    let dt = z.dt();
    let mut acc = vec![Complex64::new(0.0, 0.0); grid.len()];
    for i in 0..t_index {
        let w = path.slices()[i].field();
        let product = z.field(i).zip_with(&w, |a, b| a * b)?;
        let lag = (t_index - i) as f64 * dt;
        let spec = product.spectrum().data();
        for (j, a) in acc.iter_mut().enumerate() {
            *a += spec[j] * kernel.multiplier(lag, grid.frequency_norm(j));
        }
    }
    grid.inverse_in_place(&mut acc);
    LatticeField::from_values(grid, acc.into_iter().map(|c| c.re).collect())
}

/// `I_{g,Z}` by the direct double sum over `(ξ, η)`.
pub fn isometry_functional<K: SpectralKernel + ?Sized>(
    kernel: &K,
    z: &IntegrandProcess,
    noise: &NoiseModel,
) -> Result<f64> {
    isometry_from_moments(kernel, z.dt(), &z.power_spectra(), noise)
}

/// `I_{g,Z}` from second moments `E|FZ_i(ξ)|²` (exact or replica-averaged).
pub fn isometry_from_moments<K: SpectralKernel + ?Sized>(
    kernel: &K,
    dt: f64,
    power: &[Vec<f64>],
    noise: &NoiseModel,
) -> Result<f64> {
    check_finite(kernel, noise)?;
    let grid = noise.grid();
    let masses = noise.cell_masses();
    let n = power.len();
    let mut total = 0.0;
    for (i, pz) in power.iter().enumerate() {
        if pz.len() != grid.len() {
            return Err(Error::GridMismatch("moment array does not match the noise grid".into()));
        }
        let gp = kernel_power(kernel, grid, (n - i) as f64 * dt);
        // summed in index order so the value does not depend on the thread count
        let step: f64 = (0..grid.len())
            .into_par_iter()
            .filter(|&xi| pz[xi] != 0.0)
            .map(|xi| {
                let a: f64 = (0..grid.len()).map(|eta| masses[eta] * gp[grid.difference(xi, eta)]).sum();
                pz[xi] * a
            })
            .collect::<Vec<f64>>()
            .into_iter()
            .sum();
        total += dt * step;
    }
    Ok(total * grid.spectral_weight())
}

/// Discrete `J(s) = max_ξ Σ_η mass_η |g(s)(ξ - η)|²` over the dual grid.
pub fn lattice_j<K: SpectralKernel + ?Sized>(kernel: &K, noise: &NoiseModel, s: f64) -> f64 {
    let grid = noise.grid();
    let a = grid.dual_convolution(noise.cell_masses(), &kernel_power(kernel, grid, s));
    a.into_iter().fold(0.0, f64::max)
}

/// `Ĩ_{g,Z} = Σ_i dt ‖Z_i‖² J(t_n - t_i)`, with the lattice `J`.
pub fn isometry_bound<K: SpectralKernel + ?Sized>(kernel: &K, z: &IntegrandProcess, noise: &NoiseModel) -> Result<f64> {
    check_finite(kernel, noise)?;
    check_grids(z, noise)?;
    let n = z.steps();
    Ok((0..n).map(|i| z.dt() * l2_norm_sq(z.field(i)) * lattice_j(kernel, noise, (n - i) as f64 * z.dt())).sum())
}

/// `I_{g,Z}` in the form `Σ_i dt ∫ μ(dη) ‖g * (χ_η Z_i)‖²` with `χ_η(x) = e^{iη·x}`.
pub fn isometry_alternative<K: SpectralKernel + ?Sized>(
    kernel: &K,
    z: &IntegrandProcess,
    noise: &NoiseModel,
) -> Result<f64> {
    check_finite(kernel, noise)?;
    check_grids(z, noise)?;
    let grid = noise.grid();
    let masses = noise.cell_masses();
    let d = grid.dim();
    let n = z.steps();
    let h_d = grid.cell_volume();
    let mut total = 0.0;
    for i in 0..n {
        let multiplier: Vec<f64> =
            (0..grid.len()).map(|j| kernel.multiplier((n - i) as f64 * z.dt(), grid.frequency_norm(j))).collect();
        let values = z.field(i).values();
        // summed in index order so the value does not depend on the thread count
        let step: f64 = (0..grid.len())
            .into_par_iter()
            .filter(|&eta| masses[eta] != 0.0)
            .map(|eta| {
                let freq = grid.frequency(eta);
                let mut buf: Vec<Complex64> = values
                    .iter()
                    .enumerate()
                    .map(|(m, v)| {
                        let x = grid.point(m);
                        let phase: f64 = (0..d).map(|a| freq[a] * x[a]).sum();
                        Complex64::from_polar(*v, phase)
                    })
                    .collect();
                grid.forward_in_place(&mut buf);
                for (b, w) in buf.iter_mut().zip(&multiplier) {
                    *b *= w;
                }
                grid.inverse_in_place(&mut buf);
                masses[eta] * h_d * buf.iter().map(|c| c.norm_sqr()).sum::<f64>()
            })
            .collect::<Vec<f64>>()
            .into_iter()
            .sum();
        total += z.dt() * step;
    }
    Ok(total)
}

const BUMP_RULE_POINTS: usize = 32;

fn bump_rule() -> &'static GaussLegendre {
    static RULE: OnceLock<GaussLegendre> = OnceLock::new();
    RULE.get_or_init(|| GaussLegendre::new(NonZeroUsize::new(BUMP_RULE_POINTS).unwrap()))
}

/// Unnormalized bump profile `exp(-1/(1-r²))` on `r < 1`.
fn bump(r: f64) -> f64 {
    if r >= 1.0 {
        0.0
    } else {
        (-1.0 / (1.0 - r * r)).exp()
    }
}

/// `ψ_n(x) = n^d ψ(n x)` for the normalized bump `ψ = C_d exp(-1/(1-|x|²)) 1_{|x|<1}`.
///
/// The radial Fourier transform of `ψ` is computed by Gauss-Legendre quadrature and
/// memoized per radius.
pub struct Mollifier {
    dim: usize,
    scale: f64,
    normalization: f64,
    cache: Mutex<HashMap<u64, f64>>,
}

impl fmt::Debug for Mollifier {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Mollifier").field("dim", &self.dim).field("scale", &self.scale).finish()
    }
}

impl Clone for Mollifier {
    fn clone(&self) -> Self {
        Mollifier {
            dim: self.dim,
            scale: self.scale,
            normalization: self.normalization,
            cache: Mutex::new(self.cache.lock().unwrap().clone()),
        }
    }
}

impl Mollifier {
    /// `dim ∈ {1,2,3}`, `scale = n ≥ 1`.
    pub fn new(dim: usize, scale: f64) -> Result<Self> {
        if !(1..=3).contains(&dim) {
            return Err(Error::invalid(format!("mollifier dimension must be 1..=3, got {dim}")));
        }
        if !(scale >= 1.0 && scale.is_finite()) {
            return Err(Error::invalid(format!("mollifier scale must be at least 1, got {scale}")));
        }
        let radial_mass = quad::integrate_subdivided(|r| bump(r) * r.powi(dim as i32 - 1), 0.0, 1.0, 0.125);
        Ok(Mollifier {
            dim,
            scale,
            normalization: 1.0 / (quad::sphere_area(dim) * radial_mass),
            cache: Mutex::new(HashMap::new()),
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    /// `ψ_n(x)`.
    pub fn density(&self, x: &[f64]) -> f64 {
        let r = self.scale * x.iter().map(|v| v * v).sum::<f64>().sqrt();
        self.scale.powi(self.dim as i32) * self.normalization * bump(r)
    }

    /// `Fψ_n(ξ) = Fψ(ξ/n)` at `|ξ| = radius`.
    pub fn transform(&self, radius: f64) -> f64 {
        let key = radius.to_bits();
        if let Some(v) = self.cache.lock().unwrap().get(&key) {
            return *v;
        }
        let v = self.base_transform(radius / self.scale);
        self.cache.lock().unwrap().insert(key, v);
        v
    }

    /// `Fψ(κ)` for the unscaled bump.
    pub fn base_transform(&self, kappa: f64) -> f64 {
        let rule = bump_rule();
        let width = if kappa > 0.0 { (PI / kappa).min(0.125) } else { 0.125 };
        let radial = |f: &dyn Fn(f64) -> f64| {
            let pieces = (1.0 / width).ceil() as usize;
            (0..pieces)
                .map(|i| {
                    let lo = i as f64 / pieces as f64;
                    rule.integrate(lo, lo + 1.0 / pieces as f64, f)
                })
                .sum::<f64>()
        };
        let c = self.normalization;
        match self.dim {
            1 => 2.0 * c * radial(&|r| bump(r) * (kappa * r).cos()),
            2 => {
                // J0(z) = (1/π) ∫_0^π cos(z sin θ) dθ
                let bessel_j0 = |z: f64| {
                    let panels = (z / PI).ceil().max(1.0) as usize + 1;
                    quad::integrate_subdivided(|t| (z * t.sin()).cos(), 0.0, PI, PI / panels as f64) / PI
                };
                2.0 * PI * c * radial(&|r| bump(r) * bessel_j0(kappa * r) * r)
            }
            _ => {
                let sinc = |z: f64| if z.abs() < 1e-8 { 1.0 - z * z / 6.0 } else { z.sin() / z };
                4.0 * PI * c * radial(&|r| bump(r) * sinc(kappa * r) * r * r)
            }
        }
    }
}

/// `g · Fψ_n`, the multiplier of `g * ψ_n`.
#[derive(Clone, Debug)]
pub struct MollifiedKernel<K> {
    kernel: K,
    mollifier: Mollifier,
}

impl<K: SpectralKernel> SpectralKernel for MollifiedKernel<K> {
    fn multiplier(&self, s: f64, radius: f64) -> f64 {
        self.kernel.multiplier(s, radius) * self.mollifier.transform(radius)
    }

    fn admissibility_order(&self) -> Option<u32> {
        self.kernel.admissibility_order()
    }
}

/// `g · (1 - Fψ_n)`, the multiplier of `g - g * ψ_n`.
#[derive(Clone, Debug)]
pub struct ResidualKernel<K> {
    kernel: K,
    mollifier: Mollifier,
}

impl<K: SpectralKernel> SpectralKernel for ResidualKernel<K> {
    fn multiplier(&self, s: f64, radius: f64) -> f64 {
        self.kernel.multiplier(s, radius) * (1.0 - self.mollifier.transform(radius))
    }

    fn admissibility_order(&self) -> Option<u32> {
        self.kernel.admissibility_order()
    }
}

/// `G_n(s) = G(s) * ψ_n`.
pub fn mollify_green(g: &GreenMultiplier, dim: usize, n: u32) -> Result<MollifiedKernel<GreenMultiplier>> {
    Ok(MollifiedKernel { kernel: *g, mollifier: Mollifier::new(dim, n as f64)? })
}

/// `G - G_n`.
pub fn green_residual(g: &GreenMultiplier, dim: usize, n: u32) -> Result<ResidualKernel<GreenMultiplier>> {
    Ok(ResidualKernel { kernel: *g, mollifier: Mollifier::new(dim, n as f64)? })
}

/// `‖G - G * ψ_n‖_Z = I_{G - G_n, Z}^{1/2}`.
pub fn ladder_distance(g: &GreenMultiplier, n: u32, z: &IntegrandProcess, noise: &NoiseModel) -> Result<f64> {
    let residual = green_residual(g, noise.grid().dim(), n)?;
    Ok(isometry_functional(&residual, z, noise)?.sqrt())
}

/// `‖Z - Z_n‖_g = I_{g, Z - Z_n}^{1/2}` with `Z_n = Z 1_{[-n,n]^d}`.
pub fn truncation_distance<K: SpectralKernel + ?Sized>(
    kernel: &K,
    z: &IntegrandProcess,
    half_width: f64,
    noise: &NoiseModel,
) -> Result<f64> {
    let rest = z.difference(&z.truncated(half_width))?;
    Ok(isometry_functional(kernel, &rest, noise)?.sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::covariance::SpectralMeasure;
    use crate::greens::IdentityKernel;
    use crate::noise::StreamKey;

    fn setup(d: usize, n: usize) -> (Grid, NoiseModel) {
        let g = Grid::new(d, n, 6.0).unwrap();
        let m = NoiseModel::new(&g, &SpectralMeasure::riesz(d, 0.5).unwrap()).unwrap();
        (g, m)
    }

    #[test]
    fn zero_integrand_gives_zero() {
        let (g, noise) = setup(1, 32);
        let z = IntegrandProcess::constant(0.25, LatticeField::zeros(&g), 4).unwrap();
        let green = GreenMultiplier::new(1, 1.0).unwrap();
        assert_eq!(isometry_functional(&green, &z, &noise).unwrap(), 0.0);
        assert_eq!(isometry_bound(&green, &z, &noise).unwrap(), 0.0);
        assert_eq!(isometry_alternative(&green, &z, &noise).unwrap(), 0.0);
        let path = noise.sample_path(1.0, 0.25, StreamKey::new(1)).unwrap();
        let v = stochastic_convolution(&green, &z, &path, 4).unwrap();
        assert_eq!(v.max_abs(), 0.0);
    }

    #[test]
    fn unadapted_step_is_rejected() {
        let (g, _) = setup(1, 16);
        let mut z = IntegrandProcess::new(0.1).unwrap();
        z.push(LatticeField::zeros(&g), 0).unwrap();
        assert!(matches!(z.push(LatticeField::zeros(&g), 2), Err(Error::NotAdapted { step: 1, depends_on: 2 })));
    }

    #[test]
    fn identity_kernel_sums_products() {
        let (g, noise) = setup(1, 16);
        let zf = g.sample(|x| 1.0 + x[0].sin());
        let z = IntegrandProcess::constant(0.5, zf.clone(), 2).unwrap();
        let path = noise.sample_path(1.0, 0.5, StreamKey::new(2)).unwrap();
        let v = stochastic_convolution(&IdentityKernel, &z, &path, 2).unwrap();
        let w = path.fields();
        for i in 0..g.len() {
            let direct = zf.values()[i] * (w[0].values()[i] + w[1].values()[i]);
            assert!((v.values()[i] - direct).abs() < 1e-12 * (1.0 + direct.abs()));
        }
    }

    #[test]
    fn plane_wave_form_agrees() {
        let (g, noise) = setup(2, 16);
        let z = IntegrandProcess::deterministic(
            0.25,
            (0..3).map(|i| g.sample(|x| (-(x[0] - 0.3 * i as f64).powi(2) - x[1] * x[1]).exp())).collect(),
        )
        .unwrap();
        let green = GreenMultiplier::new(2, 1.0).unwrap();
        let a = isometry_functional(&green, &z, &noise).unwrap();
        let b = isometry_alternative(&green, &z, &noise).unwrap();
        assert!((a - b).abs() <= 1e-10 * a, "{a} vs {b}");
        assert!(a <= isometry_bound(&green, &z, &noise).unwrap());
    }

    #[test]
    fn bump_has_unit_mass_and_bounded_transform() {
        for d in 1..=3 {
            let m = Mollifier::new(d, 4.0).unwrap();
            assert!((m.transform(0.0) - 1.0).abs() < 1e-12, "d={d}");
            for r in [0.5, 3.0, 20.0, 90.0] {
                let v = m.transform(r);
                assert!(v.abs() <= 1.0 + 1e-12);
                assert!((1.0 - v).powi(2) <= 4.0);
            }
        }
    }

    #[test]
    fn bump_transform_matches_direct_sum_d1() {
        let m = Mollifier::new(1, 1.0).unwrap();
        let kappa = 2.7;
        let steps = 20_000;
        let h = 2.0 / steps as f64;
        let direct: f64 = (0..steps)
            .map(|i| {
                let x = -1.0 + (i as f64 + 0.5) * h;
                m.density(&[x]) * (kappa * x).cos() * h
            })
            .sum();
        assert!((direct - m.base_transform(kappa)).abs() < 1e-8);
    }

    #[test]
    fn inadmissible_pairing_is_divergent() {
        let g = Grid::new(2, 8, 2.0).unwrap();
        let noise = NoiseModel::new(&g, &SpectralMeasure::white(2).unwrap()).unwrap();
        let z = IntegrandProcess::constant(0.5, g.sample(|_| 1.0), 2).unwrap();
        let green = GreenMultiplier::new(1, 1.0).unwrap();
        assert!(matches!(isometry_functional(&green, &z, &noise), Err(Error::Divergent(_))));
        assert!(isometry_functional(&IdentityKernel, &z, &noise).is_ok());
    }
}
