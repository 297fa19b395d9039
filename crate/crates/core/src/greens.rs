//! Fourier multipliers of the Green kernel of `∂²u/∂t² + (-1)^k Δ^k u = 0` and the kernel
//! functional `J(s) = sup_ξ ∫ μ(dη) |FG(s)(ξ-η)|²`.

use std::f64::consts::PI;

use crate::covariance::SpectralMeasure;
use crate::error::{Error, Result};
use crate::lattice::{DualFunction, Grid};
use crate::quad;

/// Below this value of `t|ξ|^k` the quotient `sin(t|ξ|^k)/|ξ|^k` is replaced by its series.
pub const SERIES_THRESHOLD: f64 = 1e-4;

/// Oscillations of `sin²(s r^k)` resolved explicitly before the averaged tail takes over.
const RESOLVED_OSCILLATIONS: f64 = 500.0;

/// A radial Fourier multiplier `m(s, |ξ|)` depending on a time lag.
pub trait SpectralKernel: Sync {
    fn multiplier(&self, s: f64, radius: f64) -> f64;

    /// `Some(k)` when `m(s, r)² ≤ C (1+r²)^{-k}` uniformly in `s`; used to decide whether
    /// pairing with a spectral measure converges in the continuum.
    fn admissibility_order(&self) -> Option<u32>;

    fn dual_function(&self, grid: &Grid, s: f64) -> DualFunction {
        grid.radial_dual(|r| self.multiplier(s, r))
    }
}

/// The constant multiplier 1, i.e. convolution with `δ₀`.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct IdentityKernel;

impl SpectralKernel for IdentityKernel {
    fn multiplier(&self, _s: f64, _radius: f64) -> f64 {
        1.0
    }

    fn admissibility_order(&self) -> Option<u32> {
        None
    }
}

/// `FG(t)(ξ) = sin(t|ξ|^k)/|ξ|^k` for operator order `k` on the horizon `[0, T]`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GreenMultiplier {
    order: u32,
    horizon: f64,
}

impl GreenMultiplier {
    pub fn new(order: u32, horizon: f64) -> Result<Self> {
        if order == 0 {
            return Err(Error::invalid("operator order k must be at least 1"));
        }
        if !(horizon > 0.0 && horizon.is_finite()) {
            return Err(Error::invalid("time horizon must be positive"));
        }
        Ok(GreenMultiplier { order, horizon })
    }

    pub fn order(&self) -> u32 {
        self.order
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    /// `|ξ|^k` for `r = |ξ|`.
    pub fn frequency_power(&self, r: f64) -> f64 {
        r.abs().powi(self.order as i32)
    }

    /// `sin(t|ξ|^k)/|ξ|^k`, equal to `t` at `ξ = 0`.
    pub fn value(&self, t: f64, r: f64) -> f64 {
        let w = self.frequency_power(r);
        let x = t * w;
        if x.abs() < SERIES_THRESHOLD {
            t * (1.0 - x * x / 6.0)
        } else {
            x.sin() / w
        }
    }

    /// Multiplier of `(d/dt) G(t)`, namely `cos(t|ξ|^k)`.
    pub fn dt_value(&self, t: f64, r: f64) -> f64 {
        (t * self.frequency_power(r)).cos()
    }

    /// `c(t) = (1 + t^{2/k})^{k/2}`, a bound for `sup_ξ (1+|ξ|²)^{k/2} |FG(t)(ξ)|`, so that
    /// `‖G(t) * f‖_{L²} ≤ c(t) ‖f‖_{H^{-k}}`.
    pub fn negative_sobolev_gain(&self, t: f64) -> f64 {
        let k = self.order as f64;
        (1.0 + t.abs().powf(2.0 / k)).powf(k / 2.0)
    }

    /// Radius of the support of `G(s)` in real space: `s` for the wave operator, none otherwise.
    pub fn support_radius(&self, s: f64) -> Option<f64> {
        (self.order == 1).then_some(s)
    }

    pub fn dt_dual_function(&self, grid: &Grid, t: f64) -> DualFunction {
        grid.radial_dual(|r| self.dt_value(t, r))
    }

    /// `∫ μ(dη) |FG(s)(ξ-η)|²` maximized over shifts `ξ` with `|ξ|` in `probe_radii`.
    ///
    /// The shift `ξ = 0` is always included. The value is a lower bound for the true
    /// supremum; [`GreenMultiplier::j_upper_bound`] gives a matching upper bound.
    pub fn j_functional(&self, m: &SpectralMeasure, s: f64, probe_radii: &[f64]) -> Result<f64> {
        let report = m.admissibility_integral(self.order)?;
        if !report.admissible {
            return Err(Error::NotAdmissible { order: self.order });
        }
        if s == 0.0 {
            return Ok(0.0);
        }
        let mut best = self.shifted_energy(m, s, 0.0);
        for &xi in probe_radii {
            if xi > 0.0 {
                best = best.max(self.shifted_energy(m, s, xi));
            }
        }
        Ok(best)
    }

    /// `sup_{x>0} sin²(s x^k)(1+x²)^k / x^{2k}` times the admissibility integral.
    pub fn j_upper_bound(&self, m: &SpectralMeasure, s: f64) -> Result<f64> {
        let report = m.admissibility_integral(self.order)?;
        let integral = report.value.ok_or(Error::NotAdmissible { order: self.order })?;
        Ok(self.pointwise_ratio_sup(s) * integral)
    }

    /// `sup_{x>0} |FG(s)(x)|² (1+x²)^k`, evaluated on a dense logarithmic grid.
    pub fn pointwise_ratio_sup(&self, s: f64) -> f64 {
        let k = self.order as i32;
        let ratio = |x: f64| {
            let g = self.value(s, x);
            g * g * (1.0 + x * x).powi(k)
        };
        // the ratio tends to s² at 0 and to sin²(s x^k)(1+x^{-2})^k at infinity
        let mut best = (s * s).max(1.0f64.min(ratio(1e6)));
        let samples = 200_000;
        let (lo, hi) = (-4.0f64, 4.0f64);
        let mut arg = 0.0;
        for i in 0..=samples {
            let x = 10f64.powf(lo + (hi - lo) * i as f64 / samples as f64);
            let v = ratio(x);
            if v > best {
                best = v;
                arg = x;
            }
        }
        if arg > 0.0 {
            // polish the sampled maximum with a golden-section search
            let step = 10f64.powf((hi - lo) / samples as f64);
            let (mut a, mut b) = (arg / step, arg * step);
            let g = (5f64.sqrt() - 1.0) / 2.0;
            for _ in 0..80 {
                let c = b - g * (b - a);
                let d = a + g * (b - a);
                if ratio(c) > ratio(d) {
                    b = d;
                } else {
                    a = c;
                }
            }
            best = best.max(ratio(0.5 * (a + b)));
        }
        best
    }

    /// `∫ μ(dη) |FG(s)(ξ - η)|²` for a shift of length `xi`, written in polar coordinates
    /// around the origin of `μ`, so the singular part of the density stays on the radial axis.
    fn shifted_energy(&self, m: &SpectralMeasure, s: f64, xi: f64) -> f64 {
        let d = m.dim();
        let k = self.order as f64;
        let density = |r: f64| density_for_quadrature(m, r);
        let g2 = |x: f64| {
            let g = self.value(s, x);
            g * g
        };
        let shell = |r: f64| sphere_integral(d, r, xi, g2, self.angular_panels(s, r, xi));
        let radial = |r: f64| density(r) * r.powi(d as i32 - 1) * shell(r);

        let r_max = (RESOLVED_OSCILLATIONS * PI / s).powf(1.0 / k) + 2.0 * xi;
        let period = |r: f64| PI / (s * k * r.max(1e-300).powf(k - 1.0));

        let mut cuts: Vec<f64> = match m.kind() {
            crate::covariance::MeasureKind::RadialTable(t) => t.radii().to_vec(),
            _ => Vec::new(),
        };
        let first = period(1.0).min(1.0).min(r_max);
        cuts.push(first);
        cuts.push(r_max);
        cuts.retain(|c| *c >= first && *c <= r_max);
        cuts.sort_by(f64::total_cmp);
        cuts.dedup();

        let mut total = quad::integrate_singular(radial, 0.0, first);
        let mut lo = first;
        for &cut in &cuts {
            while lo < cut {
                let hi = (lo + period(lo).min(0.5)).min(cut);
                total += quad::integrate_smooth(radial, lo, hi);
                lo = hi;
            }
        }

        // beyond r_max, sin² is replaced by its mean 1/2; r_max sits on a node of the
        // oscillation so the leading correction vanishes
        let averaged =
            |r: f64| density(r) * r.powi(d as i32 - 1) * sphere_integral(d, r, xi, |x| 0.5 * x.powf(-2.0 * k), 1);
        let tail_power = m.tail_exponent().unwrap_or(0.0) + d as f64 - 1.0 - 2.0 * k;
        total + quad::integrate_tail(averaged, r_max, tail_power, 1e-13)
    }

    fn angular_panels(&self, s: f64, r: f64, xi: f64) -> usize {
        if xi == 0.0 {
            return 1;
        }
        let k = self.order as i32;
        let spread = s * ((r + xi).powi(k) - (r - xi).abs().powi(k));
        (spread / PI).ceil() as usize + 1
    }
}

impl SpectralKernel for GreenMultiplier {
    fn multiplier(&self, s: f64, radius: f64) -> f64 {
        self.value(s, radius)
    }

    fn admissibility_order(&self) -> Option<u32> {
        Some(self.order)
    }
}

fn density_for_quadrature(m: &SpectralMeasure, r: f64) -> f64 {
    m.radial_density(r).unwrap_or(0.0)
}

/// `∫_{S^{d-1}} f(|ξ e - r θ|) dθ` for a unit vector `e`.
fn sphere_integral<F: Fn(f64) -> f64>(d: usize, r: f64, xi: f64, f: F, panels: usize) -> f64 {
    if xi == 0.0 {
        return quad::sphere_area(d) * f(r);
    }
    let dist = |c: f64| (xi * xi + r * r - 2.0 * xi * r * c).max(0.0).sqrt();
    match d {
        1 => f((xi - r).abs()) + f(xi + r),
        2 => 2.0 * quad::integrate_subdivided(|phi| f(dist(phi.cos())), 0.0, PI, PI / panels as f64),
        _ => {
            let w = quad::sphere_area(d - 1);
            let e = (d as f64 - 3.0) / 2.0;
            w * quad::integrate_subdivided(
                |u| f(dist(u)) * (1.0 - u * u).max(0.0).powf(e),
                -1.0,
                1.0,
                2.0 / panels as f64,
            )
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn multiplier_special_values() {
        let g = GreenMultiplier::new(3, 1.0).unwrap();
        assert_eq!(g.value(0.8, 0.0), 0.8);
        assert_eq!(g.value(0.0, 2.0), 0.0);
        let w = GreenMultiplier::new(1, 1.0).unwrap();
        assert!(w.value(1.0, PI).abs() < 1e-15);
        assert_eq!(w.dt_value(0.0, 5.0), 1.0);
        assert_eq!(w.dt_value(0.3, 0.0), 1.0);
        assert!(w.dt_value(1.0, PI / 2.0).abs() < 1e-15);
    }

    #[test]
    fn series_branch_is_continuous() {
        let g = GreenMultiplier::new(1, 1.0).unwrap();
        let t = 0.5;
        let r = 1.000_01 * SERIES_THRESHOLD / t;
        let x = t * r;
        let series = t * (1.0 - x * x / 6.0);
        assert!((g.value(t, r) - series).abs() < 1e-16 * t);
    }

    #[test]
    fn support_radius_by_order() {
        assert_eq!(GreenMultiplier::new(1, 3.0).unwrap().support_radius(2.5), Some(2.5));
        assert_eq!(GreenMultiplier::new(1, 3.0).unwrap().support_radius(0.0), Some(0.0));
        assert_eq!(GreenMultiplier::new(2, 3.0).unwrap().support_radius(1.0), None);
    }

    #[test]
    fn j_vanishes_at_zero_lag() {
        let g = GreenMultiplier::new(1, 1.0).unwrap();
        let m = SpectralMeasure::white(1).unwrap();
        assert_eq!(g.j_functional(&m, 0.0, &[0.0, 1.0]).unwrap(), 0.0);
    }

    #[test]
    fn j_rejects_inadmissible_measure() {
        let g = GreenMultiplier::new(1, 1.0).unwrap();
        let m = SpectralMeasure::white(2).unwrap();
        assert!(matches!(g.j_functional(&m, 0.5, &[]), Err(Error::NotAdmissible { order: 1 })));
    }

    #[test]
    fn white_d1_wave_j_closed_form() {
        // (2π)^{-1} ∫ sin²(s r)/r² dr = s/2
        let g = GreenMultiplier::new(1, 1.0).unwrap();
        let m = SpectralMeasure::white(1).unwrap();
        for s in [0.1, 0.5, 1.0] {
            let j = g.j_functional(&m, s, &[]).unwrap();
            assert!((j - s / 2.0).abs() < 1e-8 * s, "s={s}: {j}");
        }
    }

    #[test]
    fn white_j_is_shift_invariant() {
        let g = GreenMultiplier::new(1, 1.0).unwrap();
        let m = SpectralMeasure::white(1).unwrap();
        let at0 = g.shifted_energy(&m, 0.7, 0.0);
        for xi in [0.3, 2.0, 7.5] {
            let v = g.shifted_energy(&m, 0.7, xi);
            assert!((v - at0).abs() < 1e-7 * at0, "xi={xi}: {v} vs {at0}");
        }
    }

    #[test]
    fn j_respects_upper_bound() {
        for k in [1, 2] {
            let g = GreenMultiplier::new(k, 1.0).unwrap();
            let m = SpectralMeasure::riesz(2, 1.0).unwrap();
            for s in [0.25, 1.0] {
                let j = g.j_functional(&m, s, &[0.5, 1.0]).unwrap();
                let bound = g.j_upper_bound(&m, s).unwrap();
                assert!(j <= bound, "k={k} s={s}: {j} > {bound}");
                let cap = 2f64.powi(k as i32) * (1.0 + s * s) * m.admissibility_integral(k).unwrap().value.unwrap();
                assert!(bound <= cap);
            }
        }
    }
}
