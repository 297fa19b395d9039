//! One-dimensional quadrature on finite panels and on the half line.
//!
//! Radial integrals in this crate have at most an integrable power singularity at
//! the origin and power-law tails at infinity. Panels touching a singular endpoint are
//! refined geometrically toward it; every panel uses a fixed Gauss-Legendre rule. Tails
//! are summed over geometrically growing panels and closed with the geometric remainder
//! implied by the declared tail power.

use std::f64::consts::PI;
use std::num::NonZeroUsize;
use std::sync::OnceLock;

use gauss_quad::legendre::GaussLegendre;

const SINGULAR_REL_TOL: f64 = 1e-16;
const MAX_SINGULAR_PANELS: usize = 1100;
const MAX_TAIL_PANELS: usize = 400;

fn legendre() -> &'static GaussLegendre {
    static RULE: OnceLock<GaussLegendre> = OnceLock::new();
    RULE.get_or_init(|| GaussLegendre::new(NonZeroUsize::new(24).unwrap()))
}

/// Surface area of the unit sphere in `R^dim`.
pub fn sphere_area(dim: usize) -> f64 {
    assert!(dim >= 1);
    // omega_1 = 2, omega_2 = 2 pi, omega_{d+2} = 2 pi omega_d / d
    let (mut area, mut d) = if dim % 2 == 1 { (2.0, 1) } else { (2.0 * PI, 2) };
    while d < dim {
        area *= 2.0 * PI / d as f64;
        d += 2;
    }
    area
}

/// `∫_a^b f` for `f` with an integrable power singularity at `a`.
///
/// Panels `[a + w 2^{-i-1}, a + w 2^{-i}]` shrink geometrically toward `a`. Once three
/// consecutive panels fall below `SINGULAR_REL_TOL` of the running total, the remainder is
/// closed as a geometric series with the ratio observed between the last two panels.
pub fn integrate_singular<F: Fn(f64) -> f64>(f: F, a: f64, b: f64) -> f64 {
    if b <= a {
        return 0.0;
    }
    let width = b - a;
    let mut total = 0.0;
    let mut previous = 0.0;
    let mut last = 0.0;
    let mut small_run = 0;
    for i in 0..MAX_SINGULAR_PANELS {
        let hi = a + width * 0.5f64.powi(i as i32);
        let lo = a + width * 0.5f64.powi(i as i32 + 1);
        previous = last;
        last = integrate_smooth(&f, lo, hi);
        total += last;
        if last.abs() <= SINGULAR_REL_TOL * total.abs() {
            small_run += 1;
            if small_run >= 3 {
                break;
            }
        } else {
            small_run = 0;
        }
    }
    if previous != 0.0 {
        let ratio = last / previous;
        if ratio > 0.0 && ratio < 1.0 {
            total += last * ratio / (1.0 - ratio);
        }
    }
    total
}

/// Fixed 24-point Gauss-Legendre rule on `[a, b]`, for smooth integrands.
pub fn integrate_smooth<F: Fn(f64) -> f64>(f: F, a: f64, b: f64) -> f64 {
    if b <= a {
        return 0.0;
    }
    legendre().integrate(a, b, f)
}

/// Gauss-Legendre over `[a, b]` split into panels of width at most `max_width`.
pub fn integrate_subdivided<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, max_width: f64) -> f64 {
    if b <= a {
        return 0.0;
    }
    let pieces = ((b - a) / max_width).ceil().max(1.0) as usize;
    let width = (b - a) / pieces as f64;
    (0..pieces)
        .map(|i| {
            let lo = a + i as f64 * width;
            integrate_smooth(&f, lo, lo + width)
        })
        .sum()
}

/// `∫_start^∞ f` for an integrand behaving like `r^tail_power` at infinity.
///
/// Requires `tail_power < -1`. Panels `[start 2^i, start 2^{i+1}]` are summed until three
/// consecutive panels fall below `rel_tol` of the running total; the remainder is then
/// closed as a geometric series with ratio `2^{tail_power + 1}`.
pub fn integrate_tail<F: Fn(f64) -> f64>(f: F, start: f64, tail_power: f64, rel_tol: f64) -> f64 {
    assert!(tail_power < -1.0, "tail power {tail_power} does not give a convergent tail");
    assert!(start > 0.0);
    let ratio = 2f64.powf(tail_power + 1.0);
    let mut total = 0.0;
    let mut small_run = 0;
    let mut lo = start;
    let mut last = 0.0;
    for _ in 0..MAX_TAIL_PANELS {
        let hi = 2.0 * lo;
        // inner split keeps each Gauss-Legendre panel at a modest aspect ratio
        last = integrate_subdivided(&f, lo, hi, lo / 4.0);
        total += last;
        if last.abs() <= rel_tol * total.abs() {
            small_run += 1;
            if small_run >= 3 {
                break;
            }
        } else {
            small_run = 0;
        }
        lo = hi;
    }
    total + last * ratio / (1.0 - ratio)
}

/// `∫_0^∞ f` where `f` may carry an integrable power singularity at 0 and at any of the
/// listed `breakpoints`, and behaves like `r^tail_power` at infinity.
pub fn integrate_half_line<F: Fn(f64) -> f64>(f: F, breakpoints: &[f64], tail_power: f64, rel_tol: f64) -> f64 {
    let mut cuts: Vec<f64> = breakpoints.iter().copied().filter(|b| *b > 0.0).collect();
    cuts.push(1.0);
    cuts.sort_by(f64::total_cmp);
    cuts.dedup();
    let mut total = 0.0;
    let mut lo = 0.0;
    for (i, &b) in cuts.iter().enumerate() {
        total += if i == 0 {
            integrate_singular(&f, lo, b)
        } else {
            // breakpoints mark kinks or mild singularities from either side
            let mid = 0.5 * (lo + b);
            integrate_singular(&f, lo, mid) + integrate_singular(|x| f(lo + b - x), lo, mid)
        };
        lo = b;
    }
    total + integrate_tail(&f, lo, tail_power, rel_tol)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sphere_areas() {
        assert!((sphere_area(1) - 2.0).abs() < 1e-15);
        assert!((sphere_area(2) - 2.0 * PI).abs() < 1e-15);
        assert!((sphere_area(3) - 4.0 * PI).abs() < 1e-14);
        assert!((sphere_area(4) - 2.0 * PI * PI).abs() < 1e-13);
    }

    #[test]
    fn lorentzian_half_line() {
        let v = integrate_half_line(|r| 1.0 / (1.0 + r * r), &[], -2.0, 1e-14);
        assert!((v - PI / 2.0).abs() < 1e-12, "{v}");
    }

    #[test]
    fn singular_origin() {
        // ∫_0^∞ r^{-1/2} e^{-r} dr = sqrt(pi)
        let v = integrate_half_line(|r| r.powf(-0.5) * (-r).exp(), &[], -3.0, 1e-15);
        assert!((v - PI.sqrt()).abs() < 1e-11, "{v}");
    }

    #[test]
    fn slow_tail_is_closed_geometrically() {
        // ∫_1^∞ r^{-1.5} dr = 2
        let v = integrate_tail(|r| r.powf(-1.5), 1.0, -1.5, 1e-14);
        assert!((v - 2.0).abs() < 1e-10, "{v}");
    }
}
