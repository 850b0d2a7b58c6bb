//! Eigenvalues, empirical spectral distributions, and distances between a
//! spectrum and a limiting law.

use std::io::Write;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::models::CorrelationModel;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MatrixKind {
    Kendall,
    Wn,
    M1,
    Spearman,
    Pearson,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectrumSource {
    pub model: Option<CorrelationModel>,
    pub n: usize,
    pub p: usize,
    pub seed: u64,
    pub kind: MatrixKind,
}

/// Sorted eigenvalues together with where the matrix came from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmpiricalSpectrum {
    pub eigenvalues: Vec<f64>,
    pub source: SpectrumSource,
}

impl EmpiricalSpectrum {
    pub fn new(mut eigenvalues: Vec<f64>, source: SpectrumSource) -> Result<Self> {
        eigenvalues.sort_by(f64::total_cmp);
        if eigenvalues.len() != source.p {
            return Err(Error::Contract(format!(
                "{} eigenvalues for p = {}",
                eigenvalues.len(),
                source.p
            )));
        }
        if source.kind == MatrixKind::Kendall {
            let min = eigenvalues.first().copied().unwrap_or(0.0);
            let sum: f64 = eigenvalues.iter().sum();
            if min < -1e-10 || (sum - source.p as f64).abs() > 1e-8 {
                return Err(Error::Contract(format!(
                    "Kendall spectrum has min {min:e} and trace {sum}, expected >= 0 and {}",
                    source.p
                )));
            }
        }
        Ok(Self { eigenvalues, source })
    }

    /// Eigenvalues below the numerical-rank threshold p·ε·max|λ| are set to
    /// exactly zero, so the null space of a rank-deficient matrix lands on an
    /// atom at 0 instead of straddling it.
    pub fn from_matrix(m: &DMatrix<f64>, source: SpectrumSource) -> Result<Self> {
        let mut values = eigenvalues_sym(m)?;
        let scale = values.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        let tol = values.len() as f64 * f64::EPSILON * scale;
        for v in &mut values {
            if v.abs() <= tol {
                *v = 0.0;
            }
        }
        Self::new(values, source)
    }

    /// Spectrum with no provenance, e.g. for tests and hand-built inputs.
    pub fn bare(eigenvalues: Vec<f64>) -> Self {
        let p = eigenvalues.len();
        Self::new(
            eigenvalues,
            SpectrumSource {
                model: None,
                n: 0,
                p,
                seed: 0,
                kind: MatrixKind::Wn,
            },
        )
        .expect("bare spectra carry no invariants")
    }

    pub fn len(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn is_empty(&self) -> bool {
        self.eigenvalues.is_empty()
    }

    /// Fraction of eigenvalues within `tol` of `location`.
    pub fn mass_near(&self, location: f64, tol: f64) -> f64 {
        let lo = self.eigenvalues.partition_point(|&v| v < location - tol);
        let hi = self.eigenvalues.partition_point(|&v| v <= location + tol);
        (hi - lo) as f64 / self.len() as f64
    }
}

fn check_symmetric(m: &DMatrix<f64>) -> Result<()> {
    if !m.is_square() {
        return Err(Error::Contract(format!(
            "{}x{} matrix is not square",
            m.nrows(),
            m.ncols()
        )));
    }
    let asym = (m - m.transpose()).amax();
    if asym > 1e-10 {
        return Err(Error::Contract(format!("matrix asymmetric by {asym:e}")));
    }
    Ok(())
}

/// Ascending eigenvalues of a symmetric matrix.
pub fn eigenvalues_sym(m: &DMatrix<f64>) -> Result<Vec<f64>> {
    check_symmetric(m)?;
    let mut v: Vec<f64> = m.symmetric_eigenvalues().iter().copied().collect();
    v.sort_by(f64::total_cmp);
    Ok(v)
}

/// Ascending eigenvalues and the matching orthonormal eigenvectors (columns).
pub fn eigen_sym(m: &DMatrix<f64>) -> Result<(Vec<f64>, DMatrix<f64>)> {
    check_symmetric(m)?;
    let eig = m.clone().symmetric_eigen();
    let mut order: Vec<usize> = (0..m.nrows()).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let values = order.iter().map(|&k| eig.eigenvalues[k]).collect();
    let vectors = DMatrix::from_fn(m.nrows(), m.ncols(), |i, j| eig.eigenvectors[(i, order[j])]);
    Ok((values, vectors))
}

/// Right-continuous ESD: fraction of eigenvalues ≤ x.
pub fn esd_cdf(esd: &EmpiricalSpectrum, x: f64) -> f64 {
    esd.eigenvalues.partition_point(|&v| v <= x) as f64 / esd.len() as f64
}

fn esd_cdf_left(esd: &EmpiricalSpectrum, x: f64) -> f64 {
    esd.eigenvalues.partition_point(|&v| v < x) as f64 / esd.len() as f64
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Atom {
    pub location: f64,
    pub mass: f64,
}

/// A density sampled on a grid plus point masses.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DensityCurve {
    pub grid: Vec<f64>,
    pub density: Vec<f64>,
    pub atoms: Vec<Atom>,
    cumulative: Vec<f64>,
}

impl DensityCurve {
    pub fn new(grid: Vec<f64>, density: Vec<f64>, atoms: Vec<Atom>) -> Result<Self> {
        if grid.len() != density.len() || grid.len() < 2 {
            return Err(Error::Argument(format!(
                "curve needs matching grid/density of length >= 2, got {} and {}",
                grid.len(),
                density.len()
            )));
        }
        if grid.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::Argument("curve grid must be strictly increasing".into()));
        }
        if let Some(d) = density.iter().find(|d| !(**d >= 0.0)) {
            return Err(Error::Argument(format!("negative or NaN density {d}")));
        }
        let mut cumulative = Vec::with_capacity(grid.len());
        cumulative.push(0.0);
        for j in 1..grid.len() {
            let step = 0.5 * (density[j] + density[j - 1]) * (grid[j] - grid[j - 1]);
            cumulative.push(cumulative[j - 1] + step);
        }
        Ok(Self {
            grid,
            density,
            atoms,
            cumulative,
        })
    }

    pub fn continuous_mass(&self) -> f64 {
        *self.cumulative.last().unwrap()
    }

    pub fn atom_mass(&self) -> f64 {
        self.atoms.iter().map(|a| a.mass).sum()
    }

    pub fn total_mass(&self) -> f64 {
        self.continuous_mass() + self.atom_mass()
    }

    /// Cumulative trapezoid of the density at x, linear between grid points.
    fn continuous_cdf(&self, x: f64) -> f64 {
        let g = &self.grid;
        if x <= g[0] {
            return 0.0;
        }
        if x >= *g.last().unwrap() {
            return self.continuous_mass();
        }
        let j = g.partition_point(|&v| v <= x) - 1;
        let t = x - g[j];
        let h = g[j + 1] - g[j];
        let slope = (self.density[j + 1] - self.density[j]) / h;
        self.cumulative[j] + t * (self.density[j] + 0.5 * slope * t)
    }

    /// Right-continuous CDF.
    pub fn cdf(&self, x: f64) -> f64 {
        self.continuous_cdf(x)
            + self
                .atoms
                .iter()
                .filter(|a| a.location <= x)
                .map(|a| a.mass)
                .sum::<f64>()
    }

    fn cdf_left(&self, x: f64) -> f64 {
        self.continuous_cdf(x)
            + self
                .atoms
                .iter()
                .filter(|a| a.location < x)
                .map(|a| a.mass)
                .sum::<f64>()
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "x,density")?;
        for (x, d) in self.grid.iter().zip(&self.density) {
            writeln!(w, "{x:.12e},{d:.12e}")?;
        }
        Ok(())
    }

    pub fn write_atoms_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "location,mass")?;
        for a in &self.atoms {
            writeln!(w, "{:.12e},{:.12e}", a.location, a.mass)?;
        }
        Ok(())
    }
}

/// Kolmogorov–Smirnov distance between the ESD and the curve's CDF.
///
/// Exact for the piecewise-linear-in-mass CDF: both functions are monotone
/// between breakpoints, so the supremum is attained at an eigenvalue, an atom,
/// or a grid point, from the left or the right.
pub fn ks_distance(esd: &EmpiricalSpectrum, curve: &DensityCurve) -> Result<f64> {
    let mass = curve.total_mass();
    if !(0.97..=1.03).contains(&mass) {
        return Err(Error::NotNormalized { mass });
    }
    let points = esd
        .eigenvalues
        .iter()
        .chain(&curve.grid)
        .chain(curve.atoms.iter().map(|a| &a.location));
    let mut d: f64 = 0.0;
    for &x in points {
        d = d.max((esd_cdf(esd, x) - curve.cdf(x)).abs());
        d = d.max((esd_cdf_left(esd, x) - curve.cdf_left(x)).abs());
    }
    Ok(d)
}

/// 4096-point grid spanning both supports, padded by 5% on each side.
pub fn levy_grid(a: (f64, f64), b: (f64, f64)) -> Vec<f64> {
    let lo = a.0.min(b.0);
    let hi = a.1.max(b.1);
    let pad = 0.05 * (hi - lo).max(1e-3);
    let (lo, hi) = (lo - pad, hi + pad);
    let m = 4096;
    (0..m)
        .map(|i| lo + (hi - lo) * i as f64 / (m - 1) as f64)
        .collect()
}

/// Lévy distance between two CDFs, checked on `grid`: the smallest ε with
/// g(x−ε) − ε ≤ f(x) ≤ g(x+ε) + ε everywhere on the grid, to within 1e-6.
pub fn levy_distance(f: impl Fn(f64) -> f64, g: impl Fn(f64) -> f64, grid: &[f64]) -> f64 {
    let fx: Vec<f64> = grid.iter().map(|&x| f(x)).collect();
    let holds = |eps: f64| {
        grid.iter()
            .zip(&fx)
            .all(|(&x, &fv)| g(x - eps) - eps <= fv && fv <= g(x + eps) + eps)
    };
    if holds(0.0) {
        return 0.0;
    }
    let (mut lo, mut hi) = (0.0, 1.0);
    while hi - lo > 1e-6 {
        let mid = 0.5 * (lo + hi);
        if holds(mid) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    hi
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Bins {
    Count(usize),
    /// Freedman–Diaconis width, clamped to 20..=100 bins.
    Auto,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Histogram {
    pub edges: Vec<f64>,
    pub densities: Vec<f64>,
}

impl Histogram {
    pub fn integral(&self) -> f64 {
        self.densities
            .iter()
            .zip(self.edges.windows(2))
            .map(|(d, e)| d * (e[1] - e[0]))
            .sum()
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "bin_left,bin_right,density")?;
        for (d, e) in self.densities.iter().zip(self.edges.windows(2)) {
            writeln!(w, "{:.12e},{:.12e},{:.12e}", e[0], e[1], d)?;
        }
        Ok(())
    }
}

fn quantile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let i = pos.floor() as usize;
    let frac = pos - i as f64;
    if i + 1 < sorted.len() {
        sorted[i] + frac * (sorted[i + 1] - sorted[i])
    } else {
        sorted[i]
    }
}

/// Density-normalized histogram of the eigenvalues.
pub fn histogram(esd: &EmpiricalSpectrum, bins: Bins) -> Histogram {
    let v = &esd.eigenvalues;
    let n = v.len();
    assert!(n > 0, "histogram of an empty spectrum");
    let (lo, hi) = (v[0], v[n - 1]);
    if hi <= lo {
        return Histogram {
            edges: vec![lo - 0.5, lo + 0.5],
            densities: vec![1.0],
        };
    }
    let count = match bins {
        Bins::Count(k) => k.max(1),
        Bins::Auto => {
            let iqr = quantile(v, 0.75) - quantile(v, 0.25);
            let width = 2.0 * iqr / (n as f64).cbrt();
            if width > 0.0 {
                (((hi - lo) / width).ceil() as usize).clamp(20, 100)
            } else {
                20
            }
        }
    };
    let width = (hi - lo) / count as f64;
    let edges: Vec<f64> = (0..=count).map(|i| lo + width * i as f64).collect();
    let mut counts = vec![0usize; count];
    for &x in v {
        let k = (((x - lo) / width) as usize).min(count - 1);
        counts[k] += 1;
    }
    let densities = counts
        .iter()
        .zip(edges.windows(2))
        .map(|(&c, e)| c as f64 / (n as f64 * (e[1] - e[0])))
        .collect();
    Histogram { edges, densities }
}
