use nalgebra::DMatrix;
use num_complex::Complex64;

use super::{solve, SolveMode, StieltjesSolution, Subordination};
use crate::error::{Error, Result};
use crate::models::{ma1_eigen, SigmaTriple};

/// Plug-in mode: the trace over the model's own p×p matrices stands in for
/// the large-p limit.
#[derive(Debug, Clone)]
pub struct FinitePTrace {
    c: f64,
    repr: Repr,
}

#[derive(Debug, Clone)]
enum Repr {
    /// Σ₂ and Σ₃ commute: their joint eigenvalues, so each trace is O(p).
    Diagonal { d2: Vec<f64>, d3: Vec<f64> },
    /// General pair: one complex LU of Σ₃ + 2xΣ₂ − zI per evaluation.
    Dense {
        sigma2: DMatrix<Complex64>,
        sigma3: DMatrix<Complex64>,
    },
}

fn offdiag_max(m: &DMatrix<f64>) -> f64 {
    let mut worst: f64 = 0.0;
    for j in 0..m.ncols() {
        for i in 0..m.nrows() {
            if i != j {
                worst = worst.max(m[(i, j)].abs());
            }
        }
    }
    worst
}

/// (α, β) with Σ₃ = α·Σ₂ + β·I, when such a pair exists.
fn affine_relation(s2: &DMatrix<f64>, s3: &DMatrix<f64>) -> Option<(f64, f64)> {
    let p = s2.nrows();
    let (mut num, mut den) = (0.0, 0.0);
    for j in 0..p {
        for i in 0..p {
            if i != j {
                num += s3[(i, j)] * s2[(i, j)];
                den += s2[(i, j)] * s2[(i, j)];
            }
        }
    }
    let alpha = if den > 0.0 { num / den } else { 1.0 };
    let beta = (0..p).map(|i| s3[(i, i)] - alpha * s2[(i, i)]).sum::<f64>() / p as f64;
    let scale = s2.amax().max(s3.amax());
    for j in 0..p {
        for i in 0..p {
            let shift = if i == j { beta } else { 0.0 };
            if (s3[(i, j)] - alpha * s2[(i, j)] - shift).abs() > 1e-12 * scale {
                return None;
            }
        }
    }
    Some((alpha, beta))
}

/// Eigenvalues of a symmetric matrix, in closed form when it is tridiagonal
/// Toeplitz.
fn eigenvalues_of(m: &DMatrix<f64>) -> Vec<f64> {
    let p = m.nrows();
    let (d, o) = (m[(0, 0)], if p > 1 { m[(0, 1)] } else { 0.0 });
    let tridiagonal_toeplitz = (0..p).all(|j| {
        (0..p).all(|i| {
            let expected = match i.abs_diff(j) {
                0 => d,
                1 => o,
                _ => 0.0,
            };
            m[(i, j)] == expected
        })
    });
    if tridiagonal_toeplitz {
        ma1_eigen(p, d, o).values
    } else {
        m.symmetric_eigenvalues().iter().copied().collect()
    }
}

impl FinitePTrace {
    pub fn new(triple: &SigmaTriple, c: f64) -> Result<Self> {
        if !(c > 0.0) || !c.is_finite() {
            return Err(Error::Argument(format!("aspect ratio must be positive, got {c}")));
        }
        let s2 = &triple.sigma2;
        let s3 = &triple.sigma3;
        let p = triple.dim();
        if let Some((alpha, beta)) = affine_relation(s2, s3) {
            let d2 = eigenvalues_of(s2);
            let d3 = d2.iter().map(|v| alpha * v + beta).collect();
            return Ok(Self {
                c,
                repr: Repr::Diagonal { d2, d3 },
            });
        }
        let scale = s2.amax().max(s3.amax());
        let commutator = (s2 * s3 - s3 * s2).amax();
        if commutator <= 1e-12 * scale * scale * p as f64 {
            // a generic combination separates the joint eigenspaces
            let mix = s2 + s3 * 0.618_033_988_749_895;
            let v = mix.symmetric_eigen().eigenvectors;
            let d2m = v.transpose() * s2 * &v;
            let d3m = v.transpose() * s3 * &v;
            if offdiag_max(&d2m).max(offdiag_max(&d3m)) <= 1e-9 * scale {
                return Ok(Self {
                    c,
                    repr: Repr::Diagonal {
                        d2: d2m.diagonal().iter().copied().collect(),
                        d3: d3m.diagonal().iter().copied().collect(),
                    },
                });
            }
        }
        Ok(Self {
            c,
            repr: Repr::Dense {
                sigma2: s2.map(|v| Complex64::new(v, 0.0)),
                sigma3: s3.map(|v| Complex64::new(v, 0.0)),
            },
        })
    }

    /// Whether the O(p) joint-eigenvalue path is in use.
    pub fn is_diagonal(&self) -> bool {
        matches!(self.repr, Repr::Diagonal { .. })
    }

    fn resolvent_inverse(
        sigma2: &DMatrix<Complex64>,
        sigma3: &DMatrix<Complex64>,
        x: Complex64,
        z: Complex64,
    ) -> Result<DMatrix<Complex64>> {
        let p = sigma2.nrows();
        let mut a = sigma3 + sigma2 * (2.0 * x);
        for i in 0..p {
            a[(i, i)] -= z;
        }
        a.lu().try_inverse().ok_or(Error::Pole { denominator: 0.0 })
    }
}

impl Subordination for FinitePTrace {
    fn aspect_ratio(&self) -> f64 {
        self.c
    }

    fn mode(&self) -> SolveMode {
        SolveMode::FinitePTrace
    }

    fn trace(&self, x: Complex64, z: Complex64) -> Result<Complex64> {
        match &self.repr {
            Repr::Diagonal { d2, d3 } => {
                let sum: Complex64 = d2.iter().zip(d3).map(|(&a, &b)| a / (b + 2.0 * x * a - z)).sum();
                Ok(sum / d2.len() as f64)
            }
            Repr::Dense { sigma2, sigma3 } => {
                let inv = Self::resolvent_inverse(sigma2, sigma3, x, z)?;
                let p = sigma2.nrows();
                // tr(A⁻¹Σ₂) without forming the product
                let sum: Complex64 = inv
                    .iter()
                    .zip(sigma2.transpose().iter())
                    .map(|(a, b)| a * b)
                    .sum();
                Ok(sum / p as f64)
            }
        }
    }

    fn stieltjes(&self, x: Complex64, z: Complex64) -> Result<Complex64> {
        match &self.repr {
            Repr::Diagonal { d2, d3 } => {
                let sum: Complex64 = d2
                    .iter()
                    .zip(d3)
                    .map(|(&a, &b)| (b + 2.0 * x * a - z).inv())
                    .sum();
                Ok(sum / d2.len() as f64)
            }
            Repr::Dense { sigma2, sigma3 } => {
                let inv = Self::resolvent_inverse(sigma2, sigma3, x, z)?;
                Ok(inv.trace() / sigma2.nrows() as f64)
            }
        }
    }
}

pub fn solve_x_finite_p(
    triple: &SigmaTriple,
    c: f64,
    z: Complex64,
    x0: Complex64,
) -> Result<StieltjesSolution> {
    solve(&FinitePTrace::new(triple, c)?, z, x0)
}
