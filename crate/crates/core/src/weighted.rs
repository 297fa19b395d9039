//! The weighted space `L²_θ` with `θ(x) = (1+|x|²)^{-K/2}`, its annulus decomposition, the
//! weighted isometry bound for the wave kernel and the weighted wave solver.

use crate::error::{Error, Result};
use crate::greens::GreenMultiplier;
use crate::lattice::{Grid, LatticeField};
use crate::noise::NoiseModel;
use crate::solver::{SolveConfig, Solver};
use crate::stochint::{lattice_j, IntegrandProcess};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Weight {
    dim: usize,
    exponent: f64,
    radius: f64,
}

impl Weight {
    /// `θ(x) = (1+|x|²)^{-K/2}` on `R^dim` with `K > dim`; annuli of width `radius`.
    pub fn new(dim: usize, exponent: f64, radius: f64) -> Result<Self> {
        if dim == 0 {
            return Err(Error::invalid("dimension must be positive"));
        }
        if !(exponent > dim as f64 && exponent.is_finite()) {
            return Err(Error::invalid(format!("weight exponent K must exceed d = {dim}, got {exponent}")));
        }
        if !(radius > 0.0 && radius.is_finite()) {
            return Err(Error::invalid("annulus width must be positive"));
        }
        Ok(Weight { dim, exponent, radius })
    }

    /// `K = d + 1`, `R = 1`.
    pub fn default_for(dim: usize) -> Self {
        Weight::new(dim, dim as f64 + 1.0, 1.0).expect("default weight is valid")
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn exponent(&self) -> f64 {
        self.exponent
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn theta_at_radius(&self, r: f64) -> f64 {
        (1.0 + r * r).powf(-self.exponent / 2.0)
    }

    pub fn theta(&self, x: &[f64]) -> f64 {
        self.theta_at_radius(x.iter().map(|v| v * v).sum::<f64>().sqrt())
    }

    /// `1 ∧ |x|^{-K}`.
    pub fn profile(&self, r: f64) -> f64 {
        if r <= 1.0 {
            1.0
        } else {
            r.powf(-self.exponent)
        }
    }

    /// Sandwich constants `(c, C) = (2^{-K/2}, 1)`.
    pub fn sandwich_constants(&self) -> (f64, f64) {
        (2f64.powf(-self.exponent / 2.0), 1.0)
    }

    /// `‖f‖²_{L²_θ} = h^d Σ f(x_m)² θ(x_m)`.
    pub fn norm_sq(&self, f: &LatticeField) -> f64 {
        let g = f.grid();
        g.cell_volume()
            * f.values().iter().enumerate().map(|(i, v)| v * v * self.theta_at_radius(g.point_norm(i))).sum::<f64>()
    }

    pub fn annulus_index(&self, r: f64) -> usize {
        (r / self.radius).floor() as usize
    }

    /// `max(n,1)^{-K}`, the annulus weight.
    pub fn annulus_weight(&self, n: usize) -> f64 {
        (n.max(1) as f64).powf(-self.exponent)
    }

    /// `‖f‖²_{L²(H_n)}` for `n = 0, 1, …` up to the outermost annulus touching the grid.
    pub fn annuli_norms(&self, f: &LatticeField) -> Vec<f64> {
        let g = f.grid();
        let count = self.annulus_count(g);
        let mut out = vec![0.0; count];
        for (i, v) in f.values().iter().enumerate() {
            out[self.annulus_index(g.point_norm(i))] += g.cell_volume() * v * v;
        }
        out
    }

    fn annulus_count(&self, g: &Grid) -> usize {
        (0..g.len()).map(|i| self.annulus_index(g.point_norm(i))).max().unwrap_or(0) + 1
    }

    /// `Σ_n max(n,1)^{-K} ‖f‖²_{L²(H_n)}`.
    pub fn annuli_sum(&self, f: &LatticeField) -> f64 {
        self.annuli_norms(f).iter().enumerate().map(|(n, a)| self.annulus_weight(n) * a).sum()
    }

    /// Best constants `(c, C)` with `c Σ ≤ ‖f‖²_θ ≤ C Σ` for every field on `grid`, from the
    /// extrema of `θ / max(n,1)^{-K}` over the lattice points of each annulus.
    pub fn discrete_equivalence_constants(&self, grid: &Grid) -> (f64, f64) {
        let mut lo = f64::INFINITY;
        let mut hi = 0.0f64;
        for i in 0..grid.len() {
            let r = grid.point_norm(i);
            let ratio = self.theta_at_radius(r) / self.annulus_weight(self.annulus_index(r));
            lo = lo.min(ratio);
            hi = hi.max(ratio);
        }
        (lo, hi)
    }

    /// `sup θ(x)/θ(y)` over `|x - y| ≤ reach`.
    pub fn cone_constant(&self, reach: f64) -> f64 {
        // the ratio ((1+(r+reach)²)/(1+r²))^{K/2} at |y| = r + reach, |x| = r; maximal at
        // r = (√(reach²+4) - reach)/2
        let r = ((reach * reach + 4.0).sqrt() - reach) / 2.0;
        ((1.0 + (r + reach).powi(2)) / (1.0 + r * r)).powf(self.exponent / 2.0)
    }

    /// `‖1‖²_θ` on the lattice.
    pub fn constant_mass(&self, grid: &Grid) -> f64 {
        self.norm_sq(&grid.sample(|_| 1.0))
    }
}

/// `‖f‖_{L²_θ}`.
pub fn weighted_norm(f: &LatticeField, w: &Weight) -> f64 {
    w.norm_sq(f).sqrt()
}

/// `I^θ_{G,Z} = Σ_i dt ‖Z_i‖²_θ J(t_n - t_i)` with the lattice `J`; only the wave kernel has
/// the finite propagation speed this bound relies on.
pub fn weighted_isometry_bound(
    g: &GreenMultiplier,
    z: &IntegrandProcess,
    noise: &NoiseModel,
    w: &Weight,
) -> Result<f64> {
    if g.order() != 1 {
        return Err(Error::CompactSupportRequired(g.order()));
    }
    if let Some(m) = noise.measure() {
        if !m.is_admissible(1) {
            return Err(Error::NotAdmissible { order: 1 });
        }
    }
    let n = z.steps();
    Ok((0..n).map(|i| z.dt() * w.norm_sq(z.field(i)) * lattice_j(g, noise, (n - i) as f64 * z.dt())).sum())
}

/// Solver for the wave equation in `L²_θ`; `α(0) ≠ 0` is allowed.
pub fn weighted_wave_solve(cfg: SolveConfig, weight: Weight) -> Result<Solver> {
    Solver::weighted(cfg, weight)
}

/// `(2 max_{s≤t} ‖u₀(s)‖²_θ + 2KC ‖1‖²_θ t) e^{2KCt}`, the Gronwall envelope of
/// `E‖u(t)‖²_θ ≤ 2‖u₀(t)‖²_θ + 2KC ∫₀^t (‖1‖²_θ + E‖u(s)‖²_θ) ds`.
pub fn affine_envelope(solver: &Solver) -> Result<Vec<f64>> {
    let weight = match solver.space() {
        crate::solver::NormSpace::Weighted(w) => *w,
        crate::solver::NormSpace::L2 => return Err(Error::invalid("affine envelope needs a weighted solver")),
    };
    let k = solver.config().nonlinearity.lipschitz();
    let c = solver.j_constant();
    let mass = weight.constant_mass(&solver.config().grid);
    let mut running = 0.0f64;
    Ok(solver
        .deterministic_norms_sq()?
        .into_iter()
        .zip(solver.times())
        .map(|(a, t)| {
            running = running.max(a);
            (2.0 * running + 2.0 * k * c * mass * t) * (2.0 * k * c * t).exp()
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exponent_must_exceed_dimension() {
        assert!(Weight::new(2, 2.0, 1.0).is_err());
        assert!(Weight::new(2, 2.5, 1.0).is_ok());
        assert_eq!(Weight::default_for(3).exponent(), 4.0);
    }

    #[test]
    fn sandwich_is_exact_on_grid() {
        let w = Weight::default_for(2);
        let (c, big_c) = w.sandwich_constants();
        let g = Grid::new(2, 32, 20.0).unwrap();
        for i in 0..g.len() {
            let r = g.point_norm(i);
            let t = w.theta_at_radius(r);
            assert!(c * w.profile(r) <= t && t <= big_c * w.profile(r), "r={r}");
        }
    }

    #[test]
    fn indicator_of_one_annulus() {
        let w = Weight::default_for(1);
        let g = Grid::new(1, 64, 16.0).unwrap();
        let f = g.sample(|x| if (2.0..3.0).contains(&x[0].abs()) { 1.0 } else { 0.0 });
        let a = w.annuli_norms(&f);
        for (n, v) in a.iter().enumerate() {
            assert_eq!(*v > 0.0, n == 2, "n={n}");
        }
    }

    #[test]
    fn cone_constant_matches_brute_force() {
        let w = Weight::new(1, 2.5, 1.0).unwrap();
        let reach = 1.5;
        let mut best = 0.0f64;
        for i in 0..20_000 {
            let y = i as f64 * 1e-3;
            best = best.max(w.theta_at_radius(y - reach) / w.theta_at_radius(y));
        }
        assert!((best - w.cone_constant(reach)).abs() < 1e-6 * best);
    }

    #[test]
    fn wave_only() {
        let g = Grid::new(1, 16, 4.0).unwrap();
        let noise = NoiseModel::new(&g, &crate::covariance::SpectralMeasure::white(1).unwrap()).unwrap();
        let z = IntegrandProcess::constant(0.25, g.sample(|_| 1.0), 2).unwrap();
        let beam = GreenMultiplier::new(2, 1.0).unwrap();
        let w = Weight::default_for(1);
        assert!(matches!(weighted_isometry_bound(&beam, &z, &noise, &w), Err(Error::CompactSupportRequired(2))));
    }
}
