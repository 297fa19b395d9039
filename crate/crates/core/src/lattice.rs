//! Periodic lattice standing in for `R^d`, its Fourier transform and the norms built on it.
//!
//! A [`Grid`] has `N` points per axis on a box of side `L` centred at the origin:
//! `x_m = -L/2 + m h`, `h = L/N`. Dual frequencies are `η_j = 2π j / L` with
//! `j ∈ {-N/2, …, N/2-1}`, stored in FFT order. The forward transform is the Riemann sum
//! `Fφ(η) = h^d Σ_m e^{-iη·x_m} φ(x_m)`; the inverse carries `(2π)^{-d}` and the dual cell
//! volume `q = (2π/L)^d`.

use std::f64::consts::PI;
use std::fmt;
use std::io::{Read, Write};
use std::sync::{Arc, OnceLock};

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};

pub const MAX_DIM: usize = 3;

/// Imaginary residue tolerated after an inverse transform that should be real.
const REALITY_TOLERANCE: f64 = 1e-10;

#[derive(Clone)]
pub struct Grid {
    dim: usize,
    n: usize,
    length: f64,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl fmt::Debug for Grid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Grid").field("dim", &self.dim).field("n", &self.n).field("length", &self.length).finish()
    }
}

impl PartialEq for Grid {
    fn eq(&self, other: &Self) -> bool {
        self.dim == other.dim && self.n == other.n && self.length == other.length
    }
}

impl Grid {
    /// `dim ∈ {1,2,3}`, `n` a power of two no smaller than 8, `length > 0`.
    pub fn new(dim: usize, n: usize, length: f64) -> Result<Self> {
        if !(1..=MAX_DIM).contains(&dim) {
            return Err(Error::invalid(format!("lattice dimension must be 1..=3, got {dim}")));
        }
        if n < 8 || !n.is_power_of_two() {
            return Err(Error::invalid(format!("points per axis must be a power of two >= 8, got {n}")));
        }
        if !(length > 0.0 && length.is_finite()) {
            return Err(Error::invalid("box length must be positive"));
        }
        let mut planner = FftPlanner::new();
        Ok(Grid { dim, n, length, forward: planner.plan_fft_forward(n), inverse: planner.plan_fft_inverse(n) })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn points_per_axis(&self) -> usize {
        self.n
    }

    pub fn length(&self) -> f64 {
        self.length
    }

    pub fn spacing(&self) -> f64 {
        self.length / self.n as f64
    }

    /// Total number of lattice points, `N^d`.
    pub fn len(&self) -> usize {
        self.n.pow(self.dim as u32)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// `h^d`.
    pub fn cell_volume(&self) -> f64 {
        self.spacing().powi(self.dim as i32)
    }

    /// `q = (2π/L)^d`.
    pub fn dual_cell_volume(&self) -> f64 {
        (2.0 * PI / self.length).powi(self.dim as i32)
    }

    /// `(2π)^{-d} q`, the weight turning a dual-grid sum into `(2π)^{-d} ∫ dξ`.
    pub fn spectral_weight(&self) -> f64 {
        self.dual_cell_volume() * (2.0 * PI).powi(-(self.dim as i32))
    }

    fn multi_index(&self, mut index: usize) -> [usize; MAX_DIM] {
        let mut out = [0; MAX_DIM];
        for axis in (0..self.dim).rev() {
            out[axis] = index % self.n;
            index /= self.n;
        }
        out
    }

    fn linear_index(&self, multi: &[usize; MAX_DIM]) -> usize {
        (0..self.dim).fold(0, |acc, a| acc * self.n + multi[a])
    }

    /// Signed frequency integer for an FFT-ordered index along one axis.
    fn signed(&self, j: usize) -> i64 {
        if j < self.n / 2 {
            j as i64
        } else {
            j as i64 - self.n as i64
        }
    }

    /// Position `x_m` (unused trailing coordinates are zero).
    pub fn point(&self, index: usize) -> [f64; MAX_DIM] {
        let h = self.spacing();
        let m = self.multi_index(index);
        let mut x = [0.0; MAX_DIM];
        for a in 0..self.dim {
            x[a] = -self.length / 2.0 + m[a] as f64 * h;
        }
        x
    }

    pub fn point_norm(&self, index: usize) -> f64 {
        self.point(index).iter().map(|x| x * x).sum::<f64>().sqrt()
    }

    /// Dual frequency `η_j` for an FFT-ordered index.
    pub fn frequency(&self, index: usize) -> [f64; MAX_DIM] {
        let dk = 2.0 * PI / self.length;
        let j = self.multi_index(index);
        let mut eta = [0.0; MAX_DIM];
        for a in 0..self.dim {
            eta[a] = self.signed(j[a]) as f64 * dk;
        }
        eta
    }

    pub fn frequency_norm(&self, index: usize) -> f64 {
        self.frequency(index).iter().map(|x| x * x).sum::<f64>().sqrt()
    }

    /// Index of `-η` for the dual point at `index` (Nyquist rows pair with themselves).
    pub fn partner(&self, index: usize) -> usize {
        let mut j = self.multi_index(index);
        for c in j.iter_mut().take(self.dim) {
            *c = (self.n - *c) % self.n;
        }
        self.linear_index(&j)
    }

    /// Index of `η_a - η_b` with cyclic wrap-around.
    pub fn difference(&self, a: usize, b: usize) -> usize {
        let ja = self.multi_index(a);
        let jb = self.multi_index(b);
        let mut out = [0; MAX_DIM];
        for axis in 0..self.dim {
            out[axis] = (ja[axis] + self.n - jb[axis]) % self.n;
        }
        self.linear_index(&out)
    }

    /// Evaluates a function of `|η|` on the dual grid.
    pub fn radial_dual<F: Fn(f64) -> f64>(&self, f: F) -> DualFunction {
        DualFunction((0..self.len()).map(|i| f(self.frequency_norm(i))).collect())
    }

    /// Evaluates a function of the position on the lattice.
    pub fn sample<F: Fn(&[f64]) -> f64>(&self, f: F) -> LatticeField {
        let values = (0..self.len()).map(|i| f(&self.point(i)[..self.dim])).collect();
        LatticeField::from_values(self.clone(), values).expect("length matches grid")
    }

    fn fft_axes(&self, data: &mut [Complex64], plan: &Arc<dyn Fft<f64>>) {
        let n = self.n;
        let mut scratch = vec![Complex64::new(0.0, 0.0); plan.get_inplace_scratch_len()];
        // last axis is contiguous
        for line in data.chunks_exact_mut(n) {
            plan.process_with_scratch(line, &mut scratch);
        }
        let mut buf = vec![Complex64::new(0.0, 0.0); n];
        for axis in 0..self.dim.saturating_sub(1) {
            let stride = n.pow((self.dim - 1 - axis) as u32);
            let outer = n.pow(axis as u32);
            for o in 0..outer {
                for inner in 0..stride {
                    let base = o * n * stride + inner;
                    for (k, b) in buf.iter_mut().enumerate() {
                        *b = data[base + k * stride];
                    }
                    plan.process_with_scratch(&mut buf, &mut scratch);
                    for (k, b) in buf.iter().enumerate() {
                        data[base + k * stride] = *b;
                    }
                }
            }
        }
    }

    fn centering_sign(&self, index: usize) -> f64 {
        let j = self.multi_index(index);
        if j[..self.dim].iter().sum::<usize>() % 2 == 0 {
            1.0
        } else {
            -1.0
        }
    }

    /// In-place forward transform of complex samples with the `h^d` Riemann-sum scaling.
    pub fn forward_in_place(&self, data: &mut [Complex64]) {
        assert_eq!(data.len(), self.len());
        self.fft_axes(data, &self.forward);
        let h_d = self.cell_volume();
        for (i, v) in data.iter_mut().enumerate() {
            *v *= h_d * self.centering_sign(i);
        }
    }

    /// In-place inverse transform, `f(x_m) = (2π)^{-d} q Σ_j F_j e^{iη_j·x_m}`.
    pub fn inverse_in_place(&self, data: &mut [Complex64]) {
        assert_eq!(data.len(), self.len());
        for (i, v) in data.iter_mut().enumerate() {
            *v *= self.centering_sign(i);
        }
        self.fft_axes(data, &self.inverse);
        let scale = self.length.powi(-(self.dim as i32));
        for v in data.iter_mut() {
            *v *= scale;
        }
    }

    /// Cyclic convolution over dual-grid indices: `c(ξ) = Σ_η a(η) b(ξ - η)`.
    pub fn dual_convolution(&self, a: &[f64], b: &[f64]) -> Vec<f64> {
        assert_eq!(a.len(), self.len());
        assert_eq!(b.len(), self.len());
        let mut fa: Vec<Complex64> = a.iter().map(|v| Complex64::new(*v, 0.0)).collect();
        let mut fb: Vec<Complex64> = b.iter().map(|v| Complex64::new(*v, 0.0)).collect();
        self.fft_axes(&mut fa, &self.forward);
        self.fft_axes(&mut fb, &self.forward);
        for (x, y) in fa.iter_mut().zip(&fb) {
            *x *= y;
        }
        self.fft_axes(&mut fa, &self.inverse);
        let scale = 1.0 / self.len() as f64;
        fa.iter().map(|v| v.re * scale).collect()
    }
}

/// A real function sampled on the dual grid (FFT order).
#[derive(Clone, Debug, PartialEq)]
pub struct DualFunction(pub Vec<f64>);

impl DualFunction {
    pub fn constant(grid: &Grid, value: f64) -> Self {
        DualFunction(vec![value; grid.len()])
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    /// Checks `m(η) = m(-η)` up to a relative tolerance.
    pub fn is_even(&self, grid: &Grid) -> bool {
        let scale = self.0.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(f64::MIN_POSITIVE);
        (0..grid.len()).all(|i| (self.0[i] - self.0[grid.partner(i)]).abs() <= 1e-12 * scale)
    }
}

/// Frequency-domain samples `Fφ(η_j)` of a lattice field.
#[derive(Clone, Debug, PartialEq)]
pub struct Spectrum {
    grid: Grid,
    data: Vec<Complex64>,
}

impl Spectrum {
    pub fn new(grid: Grid, data: Vec<Complex64>) -> Result<Self> {
        if data.len() != grid.len() {
            return Err(Error::GridMismatch(format!("spectrum has {} entries, grid has {}", data.len(), grid.len())));
        }
        Ok(Spectrum { grid, data })
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn data(&self) -> &[Complex64] {
        &self.data
    }

    /// `|Fφ(η_j)|²` for every dual point.
    pub fn power(&self) -> Vec<f64> {
        self.data.iter().map(|c| c.norm_sqr()).collect()
    }

    /// Largest violation of `F(-η) = conj F(η)`.
    pub fn hermitian_defect(&self) -> f64 {
        (0..self.data.len()).map(|i| (self.data[i] - self.data[self.grid.partner(i)].conj()).norm()).fold(0.0, f64::max)
    }

    /// Inverse transform, checking that the result is real.
    pub fn to_field(&self) -> Result<LatticeField> {
        let mut buf = self.data.clone();
        self.grid.inverse_in_place(&mut buf);
        real_part_checked(self.grid.clone(), buf)
    }
}

fn real_part_checked(grid: Grid, buf: Vec<Complex64>) -> Result<LatticeField> {
    let scale = buf.iter().fold(1.0f64, |m, c| m.max(c.re.abs()));
    let residue = buf.iter().fold(0.0f64, |m, c| m.max(c.im.abs()));
    if residue > REALITY_TOLERANCE * scale {
        return Err(Error::RealityViolated(format!("imaginary residue {residue:e} after inverse transform")));
    }
    LatticeField::from_values(grid, buf.into_iter().map(|c| c.re).collect())
}

/// A real scalar field on a [`Grid`], with a lazily computed spectrum.
#[derive(Clone, Debug)]
pub struct LatticeField {
    grid: Grid,
    values: Vec<f64>,
    spectrum: OnceLock<Spectrum>,
}

impl PartialEq for LatticeField {
    fn eq(&self, other: &Self) -> bool {
        self.grid == other.grid && self.values == other.values
    }
}

impl LatticeField {
    pub fn from_values(grid: Grid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::GridMismatch(format!("field has {} values, grid has {}", values.len(), grid.len())));
        }
        Ok(LatticeField { grid, values, spectrum: OnceLock::new() })
    }

    pub fn zeros(grid: &Grid) -> Self {
        LatticeField::from_values(grid.clone(), vec![0.0; grid.len()]).unwrap()
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    /// Forward transform, cached after the first call.
    pub fn spectrum(&self) -> &Spectrum {
        self.spectrum.get_or_init(|| forward_transform(self))
    }

    pub fn map<F: Fn(f64) -> f64>(&self, f: F) -> LatticeField {
        LatticeField::from_values(self.grid.clone(), self.values.iter().map(|v| f(*v)).collect()).unwrap()
    }

    /// Pointwise combination of two fields on the same grid.
    pub fn zip_with<F: Fn(f64, f64) -> f64>(&self, other: &LatticeField, f: F) -> Result<LatticeField> {
        if self.grid != other.grid {
            return Err(Error::GridMismatch("fields live on different grids".into()));
        }
        let values = self.values.iter().zip(&other.values).map(|(a, b)| f(*a, *b)).collect();
        LatticeField::from_values(self.grid.clone(), values)
    }

    pub fn scale(&self, a: f64) -> LatticeField {
        self.map(|v| a * v)
    }

    /// Pointwise product with a function of position.
    pub fn masked<F: Fn(&[f64]) -> f64>(&self, mask: F) -> LatticeField {
        let d = self.grid.dim;
        let values = self.values.iter().enumerate().map(|(i, v)| v * mask(&self.grid.point(i)[..d])).collect();
        LatticeField::from_values(self.grid.clone(), values).unwrap()
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}

/// `Fφ(η_j) = h^d Σ_m e^{-iη_j·x_m} φ(x_m)`.
pub fn forward_transform(f: &LatticeField) -> Spectrum {
    let mut buf: Vec<Complex64> = f.values.iter().map(|v| Complex64::new(*v, 0.0)).collect();
    f.grid.forward_in_place(&mut buf);
    Spectrum { grid: f.grid.clone(), data: buf }
}

/// `(h^d Σ f(x_m)²)^{1/2}`.
pub fn l2_norm(f: &LatticeField) -> f64 {
    l2_norm_sq(f).sqrt()
}

pub fn l2_norm_sq(f: &LatticeField) -> f64 {
    f.grid.cell_volume() * f.values.iter().map(|v| v * v).sum::<f64>()
}

/// `L²` norm computed on the frequency side, `((2π)^{-d} q Σ_j |F_j|²)^{1/2}`.
pub fn spectral_l2_norm(s: &Spectrum) -> f64 {
    (s.grid.spectral_weight() * s.data.iter().map(|c| c.norm_sqr()).sum::<f64>()).sqrt()
}

/// `(∫ dξ (1+|ξ|²)^{-k} |Fφ(ξ)|²)^{1/2}` with the `(2π)^{-d}` convention factor.
pub fn h_neg_k_norm(s: &Spectrum, k: u32) -> f64 {
    let g = &s.grid;
    let sum: f64 = s
        .data
        .iter()
        .enumerate()
        .map(|(i, c)| {
            let r = g.frequency_norm(i);
            (1.0 + r * r).powi(-(k as i32)) * c.norm_sqr()
        })
        .sum();
    (g.spectral_weight() * sum).sqrt()
}

/// Inverse transform of `m · Ff`. The multiplier must be even so the result stays real.
pub fn multiplier_apply(f: &LatticeField, m: &DualFunction) -> Result<LatticeField> {
    let grid = &f.grid;
    if m.0.len() != grid.len() {
        return Err(Error::GridMismatch("multiplier size differs from grid".into()));
    }
    if !m.is_even(grid) {
        return Err(Error::RealityViolated("multiplier is not even in η".into()));
    }
    let spec = f.spectrum();
    let mut buf: Vec<Complex64> = spec.data.iter().zip(&m.0).map(|(c, w)| c * w).collect();
    grid.inverse_in_place(&mut buf);
    real_part_checked(grid.clone(), buf)
}

const SNAPSHOT_MAX_DENOMINATOR: i64 = 1 << 20;

/// Writes a field as four little-endian `i64` header words `(d, N, L_num, L_den)` followed
/// by `N^d` little-endian `f64` values in row-major order (last axis fastest).
pub fn write_snapshot<W: Write>(mut w: W, field: &LatticeField) -> Result<()> {
    let g = &field.grid;
    let (num, den) = rational_length(g.length)?;
    for word in [g.dim as i64, g.n as i64, num, den] {
        w.write_all(&word.to_le_bytes())?;
    }
    for v in &field.values {
        w.write_all(&v.to_le_bytes())?;
    }
    Ok(())
}

pub fn read_snapshot<R: Read>(mut r: R) -> Result<LatticeField> {
    let mut word = [0u8; 8];
    let mut header = [0i64; 4];
    for h in header.iter_mut() {
        r.read_exact(&mut word)?;
        *h = i64::from_le_bytes(word);
    }
    let [d, n, num, den] = header;
    if d < 1 || n < 1 || num < 1 || den < 1 {
        return Err(Error::Snapshot(format!("bad header {header:?}")));
    }
    let grid = Grid::new(d as usize, n as usize, num as f64 / den as f64)?;
    let mut values = Vec::with_capacity(grid.len());
    for _ in 0..grid.len() {
        r.read_exact(&mut word)?;
        values.push(f64::from_le_bytes(word));
    }
    LatticeField::from_values(grid, values)
}

fn rational_length(length: f64) -> Result<(i64, i64)> {
    let mut den = 1i64;
    while den <= SNAPSHOT_MAX_DENOMINATOR {
        let num = (length * den as f64).round();
        if (num / den as f64 - length).abs() <= 1e-12 * length {
            return Ok((num as i64, den));
        }
        den *= 2;
    }
    // fall back to decimal denominators
    let mut den = 10i64;
    while den <= 1_000_000_000 {
        let num = (length * den as f64).round();
        if (num / den as f64 - length).abs() <= 1e-12 * length {
            return Ok((num as i64, den));
        }
        den *= 10;
    }
    Err(Error::Snapshot(format!("box length {length} has no short rational form")))
}
