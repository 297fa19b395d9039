//! Spatial covariance of the driving noise, described through its spectral measure.
//!
//! The Fourier transform is `Fφ(η) = ∫ e^{-iη·x} φ(x) dx` throughout the crate, with
//! the inverse carrying `(2π)^{-d}`. Under this convention a covariance `Γ` and its
//! spectral measure `μ` are related by `∫ Γ(dx) φ(x) = ∫ μ(dη) Fφ(η)`, so white noise
//! (`Γ = δ₀`) has the constant spectral density `(2π)^{-d}`.
//!
//! Only radial spectral measures are represented: the density is a function of `|η|`.

use std::f64::consts::PI;
use std::num::NonZeroUsize;
use std::path::Path;

use gauss_quad::legendre::GaussLegendre;

use crate::error::{Error, Result};
use crate::quad;

const RADIAL_REL_TOL: f64 = 1e-14;

/// Tabulated radial spectral density, interpolated linearly in `ln r`.
#[derive(Clone, Debug, PartialEq)]
pub struct RadialTable {
    radii: Vec<f64>,
    density: Vec<f64>,
    tail_exponent: Option<f64>,
}

impl RadialTable {
    /// `radii` must be positive and strictly increasing; `density` nonnegative.
    /// Beyond the last sample the density continues as `ρ_last (r / r_last)^tail_exponent`
    /// (constant when no exponent is declared); below the first it is held constant.
    pub fn new(radii: Vec<f64>, density: Vec<f64>, tail_exponent: Option<f64>) -> Result<Self> {
        if radii.len() < 2 || radii.len() != density.len() {
            return Err(Error::invalid("radial table needs at least two (radius, density) samples"));
        }
        if radii[0] <= 0.0 || radii.windows(2).any(|w| w[1].partial_cmp(&w[0]) != Some(std::cmp::Ordering::Greater)) {
            return Err(Error::invalid("radial table radii must be positive and strictly increasing"));
        }
        if density.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::invalid("radial table densities must be finite and nonnegative"));
        }
        if let Some(p) = tail_exponent {
            if !p.is_finite() {
                return Err(Error::invalid("tail exponent must be finite"));
            }
        }
        Ok(RadialTable { radii, density, tail_exponent })
    }

    /// Reads `radius,density` rows (an optional header line is skipped).
    pub fn from_csv(path: &Path, tail_exponent: Option<f64>) -> Result<Self> {
        let mut reader = csv::ReaderBuilder::new().has_headers(false).trim(csv::Trim::All).from_path(path)?;
        let mut radii = Vec::new();
        let mut density = Vec::new();
        for record in reader.records() {
            let record = record?;
            let parse = |i: usize| record.get(i).and_then(|s| s.parse::<f64>().ok());
            match (parse(0), parse(1)) {
                (Some(r), Some(v)) => {
                    radii.push(r);
                    density.push(v);
                }
                _ if radii.is_empty() => continue,
                _ => return Err(Error::invalid(format!("malformed radial table row in {}", path.display()))),
            }
        }
        RadialTable::new(radii, density, tail_exponent)
    }

    pub fn radii(&self) -> &[f64] {
        &self.radii
    }

    pub fn densities(&self) -> &[f64] {
        &self.density
    }

    pub fn tail_exponent(&self) -> Option<f64> {
        self.tail_exponent
    }

    pub fn eval(&self, r: f64) -> f64 {
        let n = self.radii.len();
        if r <= self.radii[0] {
            return self.density[0];
        }
        if r >= self.radii[n - 1] {
            let p = self.tail_exponent.unwrap_or(0.0);
            return self.density[n - 1] * (r / self.radii[n - 1]).powf(p);
        }
        let i = self.radii.partition_point(|x| *x <= r) - 1;
        let (r0, r1) = (self.radii[i], self.radii[i + 1]);
        let t = (r / r0).ln() / (r1 / r0).ln();
        self.density[i] + t * (self.density[i + 1] - self.density[i])
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum MeasureKind {
    /// `μ` a multiple of Lebesgue measure.
    White,
    /// Density proportional to `|η|^{α-d}`, the spectral side of `Γ(dx) = |x|^{-α} dx`.
    Riesz {
        alpha: f64,
    },
    RadialTable(RadialTable),
}

/// A radial spectral measure `μ` on `R^d`.
#[derive(Clone, Debug, PartialEq)]
pub struct SpectralMeasure {
    dim: usize,
    kind: MeasureKind,
    normalization: f64,
}

/// Result of evaluating `∫ μ(dξ) (1+|ξ|²)^{-k}`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AdmissibilityReport {
    pub order: u32,
    /// `None` when the integral diverges.
    pub value: Option<f64>,
    pub admissible: bool,
}

impl SpectralMeasure {
    /// Spatially white noise, `Γ = δ₀`.
    pub fn white(dim: usize) -> Result<Self> {
        check_dim(dim)?;
        Ok(SpectralMeasure { dim, kind: MeasureKind::White, normalization: (2.0 * PI).powi(-(dim as i32)) })
    }

    /// Riesz covariance `Γ(dx) = |x|^{-α} dx`, `0 < α < d`.
    ///
    /// The density constant is fixed numerically by matching both sides of
    /// `∫ Γ(dx) φ(x) = ∫ μ(dη) Fφ(η)` for the Gaussian `φ(x) = e^{-|x|²/2}`.
    pub fn riesz(dim: usize, alpha: f64) -> Result<Self> {
        check_dim(dim)?;
        if !(alpha > 0.0 && alpha < dim as f64) {
            return Err(Error::invalid(format!("riesz exponent must satisfy 0 < alpha < d = {dim}, got {alpha}")));
        }
        Ok(SpectralMeasure { dim, kind: MeasureKind::Riesz { alpha }, normalization: riesz_normalization(dim, alpha) })
    }

    pub fn radial_table(dim: usize, table: RadialTable) -> Result<Self> {
        check_dim(dim)?;
        let measure = SpectralMeasure { dim, kind: MeasureKind::RadialTable(table), normalization: 1.0 };
        measure.check_tempered()?;
        Ok(measure)
    }

    /// Multiplies the density by `factor > 0`.
    pub fn scaled(mut self, factor: f64) -> Result<Self> {
        if !(factor > 0.0 && factor.is_finite()) {
            return Err(Error::invalid("measure scale factor must be positive"));
        }
        self.normalization *= factor;
        Ok(self)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn kind(&self) -> &MeasureKind {
        &self.kind
    }

    pub fn normalization(&self) -> f64 {
        self.normalization
    }

    /// Power `p` with `density(r) ~ r^p` as `r → ∞`, when known.
    pub fn tail_exponent(&self) -> Option<f64> {
        match &self.kind {
            MeasureKind::White => Some(0.0),
            MeasureKind::Riesz { alpha } => Some(alpha - self.dim as f64),
            MeasureKind::RadialTable(t) => t.tail_exponent(),
        }
    }

    /// Density as a function of `r = |η|`.
    pub fn radial_density(&self, r: f64) -> Result<f64> {
        let r = r.abs();
        match &self.kind {
            MeasureKind::White => Ok(self.normalization),
            MeasureKind::Riesz { alpha } => {
                if r == 0.0 {
                    Err(Error::SingularPoint)
                } else {
                    Ok(self.normalization * r.powf(alpha - self.dim as f64))
                }
            }
            MeasureKind::RadialTable(t) => Ok(self.normalization * t.eval(r)),
        }
    }

    /// `dμ/dη` at the point `eta`.
    pub fn spectral_density(&self, eta: &[f64]) -> Result<f64> {
        if eta.len() != self.dim {
            return Err(Error::invalid(format!(
                "point has {} coordinates, measure lives in R^{}",
                eta.len(),
                self.dim
            )));
        }
        self.radial_density(eta.iter().map(|x| x * x).sum::<f64>().sqrt())
    }

    fn density_unchecked(&self, r: f64) -> f64 {
        match &self.kind {
            MeasureKind::Riesz { alpha } => self.normalization * r.powf(alpha - self.dim as f64),
            _ => self.radial_density(r).unwrap_or(0.0),
        }
    }

    fn breakpoints(&self) -> Vec<f64> {
        match &self.kind {
            MeasureKind::RadialTable(t) => t.radii().to_vec(),
            _ => Vec::new(),
        }
    }

    /// `∫ μ(dη) w(|η|)` for a radial weight with `w(r) ~ r^{weight_tail}` at infinity.
    ///
    /// Divergence is decided from the tail exponents, never from quadrature overflow.
    pub fn radial_integral<W: Fn(f64) -> f64>(&self, weight: W, weight_tail: f64) -> Result<f64> {
        let p = self.tail_exponent().ok_or(Error::TailExponentRequired)?;
        let d = self.dim as f64;
        let integrand_tail = p + d - 1.0 + weight_tail;
        if integrand_tail >= -1.0 {
            return Err(Error::Divergent(format!("radial integrand decays like r^{integrand_tail}")));
        }
        let area = quad::sphere_area(self.dim);
        let value = quad::integrate_half_line(
            |r| self.density_unchecked(r) * weight(r) * r.powi(self.dim as i32 - 1),
            &self.breakpoints(),
            integrand_tail,
            RADIAL_REL_TOL,
        );
        Ok(area * value)
    }

    /// Evaluates `∫ μ(dξ) (1+|ξ|²)^{-k}` and decides admissibility for operator order `k`.
    pub fn admissibility_integral(&self, order: u32) -> Result<AdmissibilityReport> {
        if order == 0 {
            return Err(Error::invalid("operator order k must be at least 1"));
        }
        let k = order as i32;
        match self.radial_integral(|r| (1.0 + r * r).powi(-k), -2.0 * k as f64) {
            Ok(v) => Ok(AdmissibilityReport { order, value: Some(v), admissible: true }),
            Err(Error::Divergent(_)) => Ok(AdmissibilityReport { order, value: None, admissible: false }),
            Err(e) => Err(e),
        }
    }

    pub fn is_admissible(&self, order: u32) -> bool {
        self.admissibility_integral(order).map(|r| r.admissible).unwrap_or(false)
    }

    /// `μ([-a, a]^d)`, the mass of the cube of half-width `a` centered at the origin.
    ///
    /// For the Riesz density the singular point is integrated exactly in the radial
    /// variable (cube-to-face coordinates); other kinds use the centre value.
    pub fn origin_cell_mass(&self, half_width: f64) -> Result<f64> {
        let volume = (2.0 * half_width).powi(self.dim as i32);
        match &self.kind {
            MeasureKind::Riesz { alpha } => {
                let d = self.dim;
                let p = alpha - d as f64;
                let face = match d {
                    1 => 1.0,
                    2 => gl(64).integrate(-1.0, 1.0, |v| (1.0 + v * v).powf(p / 2.0)),
                    3 => {
                        let rule = gl(64);
                        rule.integrate(-1.0, 1.0, |v| {
                            rule.integrate(-1.0, 1.0, |w| (1.0 + v * v + w * w).powf(p / 2.0))
                        })
                    }
                    _ => {
                        return Err(Error::invalid("origin cell mass supported for d <= 3"));
                    }
                };
                Ok(self.normalization * half_width.powf(*alpha) * 2.0 * d as f64 / alpha * face)
            }
            _ => Ok(self.radial_density(0.0)? * volume),
        }
    }

    fn check_tempered(&self) -> Result<()> {
        if let MeasureKind::RadialTable(t) = &self.kind {
            let d = self.dim as f64;
            // (1+r²)^{-s} with 2s beyond the declared growth makes the tail summable
            let growth = t.tail_exponent().unwrap_or(0.0).max(0.0);
            let s = (growth + d) / 2.0 + 1.0;
            let r_max = *t.radii().last().unwrap();
            let on_support = quad::sphere_area(self.dim)
                * t.radii()
                    .windows(2)
                    .map(|w| {
                        quad::integrate_smooth(|r| t.eval(r) * (1.0 + r * r).powf(-s) * r.powf(d - 1.0), w[0], w[1])
                    })
                    .sum::<f64>()
                + quad::sphere_area(self.dim) * t.densities()[0] * t.radii()[0].powf(d) / d;
            if !on_support.is_finite() || r_max <= 0.0 {
                return Err(Error::invalid("radial table is not a tempered measure"));
            }
        }
        Ok(())
    }
}

fn check_dim(dim: usize) -> Result<()> {
    if dim == 0 {
        Err(Error::invalid("dimension must be positive"))
    } else {
        Ok(())
    }
}

fn gl(n: usize) -> GaussLegendre {
    GaussLegendre::new(NonZeroUsize::new(n).unwrap())
}

/// Density constant `c` of the Riesz spectral measure `c |η|^{α-d}`.
///
/// Both sides of the Bochner-Schwartz pairing for `φ = e^{-|x|²/2}` are evaluated by
/// radial quadrature (the sphere area cancels):
/// `∫ r^{-α} e^{-r²/2} r^{d-1} dr = c (2π)^{d/2} ∫ r^{α-d} e^{-r²/2} r^{d-1} dr`.
pub fn riesz_normalization(dim: usize, alpha: f64) -> f64 {
    let d = dim as f64;
    let gauss_tail = -60.0;
    let real_side =
        quad::integrate_half_line(|r| r.powf(d - 1.0 - alpha) * (-r * r / 2.0).exp(), &[], gauss_tail, 1e-16);
    let spectral_side =
        quad::integrate_half_line(|r| r.powf(alpha - 1.0) * (-r * r / 2.0).exp(), &[], gauss_tail, 1e-16);
    real_side / ((2.0 * PI).powf(d / 2.0) * spectral_side)
}
