use std::f64::consts::PI;

use num_complex::Complex64;

use crate::error::Result;
use crate::spectra::{Atom, DensityCurve};

/// Support edges (c₋, c₊) of the affine Marčenko–Pastur law.
pub fn mp_affine_edges(c: f64) -> (f64, f64) {
    let r = c.sqrt();
    (
        1.0 / 3.0 + 2.0 / 3.0 * (1.0 - r).powi(2),
        1.0 / 3.0 + 2.0 / 3.0 * (1.0 + r).powi(2),
    )
}

/// Absolutely continuous part of the independent-case law (2/3)·MP(c) + 1/3.
pub fn mp_affine_density(c: f64, x: f64) -> f64 {
    let (lo, hi) = mp_affine_edges(c);
    if x <= lo || x >= hi {
        return 0.0;
    }
    9.0 / (4.0 * PI * c * (3.0 * x - 1.0)) * ((hi - x) * (x - lo)).sqrt()
}

/// Point mass 1 − 1/c at 1/3 when c > 1.
pub fn mp_affine_atoms(c: f64) -> Vec<Atom> {
    if c > 1.0 {
        vec![Atom {
            location: 1.0 / 3.0,
            mass: 1.0 - 1.0 / c,
        }]
    } else {
        Vec::new()
    }
}

/// The affine-MP law as a curve on a Chebyshev-clustered grid over its
/// support (edges carry square-root behaviour, so nodes bunch there).
pub fn mp_affine_curve(c: f64, points: usize) -> Result<DensityCurve> {
    let (lo, hi) = mp_affine_edges(c);
    let m = points.max(3);
    let grid: Vec<f64> = (0..m)
        .map(|i| lo + (hi - lo) * 0.5 * (1.0 - (PI * i as f64 / (m - 1) as f64).cos()))
        .collect();
    let density = grid
        .iter()
        .map(|&x| {
            let d = mp_affine_density(c, x);
            if d.is_finite() {
                d
            } else {
                0.0
            }
        })
        .collect();
    DensityCurve::new(grid, density, mp_affine_atoms(c))
}

/// Standard Marčenko–Pastur density with ratio c on [(1−√c)², (1+√c)²].
pub fn mp_density(c: f64, x: f64) -> f64 {
    let r = c.sqrt();
    let (lo, hi) = ((1.0 - r).powi(2), (1.0 + r).powi(2));
    if x <= lo || x >= hi {
        return 0.0;
    }
    ((hi - x) * (x - lo)).sqrt() / (2.0 * PI * c * x)
}

/// Standard MP law as a curve, with its atom 1 − 1/c at 0 when c > 1.
pub fn mp_curve(c: f64, points: usize) -> Result<DensityCurve> {
    let r = c.sqrt();
    let (lo, hi) = ((1.0 - r).powi(2), (1.0 + r).powi(2));
    let m = points.max(3);
    let grid: Vec<f64> = (0..m)
        .map(|i| lo + (hi - lo) * 0.5 * (1.0 - (PI * i as f64 / (m - 1) as f64).cos()))
        .collect();
    let density = grid
        .iter()
        .map(|&x| {
            let d = mp_density(c, x);
            if d.is_finite() {
                d
            } else {
                0.0
            }
        })
        .collect();
    let atoms = if c > 1.0 {
        vec![Atom {
            location: 0.0,
            mass: 1.0 - 1.0 / c,
        }]
    } else {
        Vec::new()
    };
    DensityCurve::new(grid, density, atoms)
}

/// Explicit independent-case Stieltjes transform, on the branch analytic off
/// the support: √((z − c₋)(z − c₊)) is taken as √(z − c₋)·√(z − c₊), which
/// behaves like z at infinity and gives Im s > 0 on ℂ⁺.
pub fn identity_closed_form_s(c: f64, z: Complex64) -> Complex64 {
    let (lo, hi) = mp_affine_edges(c);
    let root = (z - lo).sqrt() * (z - hi).sqrt();
    (1.0 - 2.0 / 3.0 * c - z + root) / (4.0 / 3.0 * c * (z - 1.0 / 3.0))
}

/// |(2/3)c(z − 1/3)s² + (z − 1 + (2/3)c)s + 1|.
pub fn stieltjes_quadratic_check(c: f64, z: Complex64, s: Complex64) -> f64 {
    (2.0 / 3.0 * c * (z - 1.0 / 3.0) * s * s + (z - 1.0 + 2.0 / 3.0 * c) * s + 1.0).norm()
}
