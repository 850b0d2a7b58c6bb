//! Reproducible Gaussian samples and monotone componentwise transforms.

use std::io::Write;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::models::{build_sigma, CorrelationModel};
use crate::{normal, rng};

/// Strictly increasing maps applied to every entry (column-wise for
/// `ProbitRank`).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Transform {
    Cube,
    Exp,
    /// Normal scores: each value is replaced by Φ⁻¹(rank / (n + 1)) within its
    /// column.
    ProbitRank,
    /// x ↦ scale·x + shift with scale > 0.
    Affine {
        scale: f64,
        shift: f64,
    },
}

/// Where the entries of a sample came from.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    Gaussian,
    Transformed(Transform),
}

/// n observations (rows) of a p-dimensional population.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleMatrix {
    pub data: DMatrix<f64>,
    pub model: CorrelationModel,
    pub seed: u64,
    pub stream: u64,
    pub provenance: Provenance,
    /// Set when Σ was not numerically positive definite and the eigenvalue
    /// square root replaced the Cholesky factor.
    pub factor_fallback: bool,
}

impl SampleMatrix {
    pub fn n(&self) -> usize {
        self.data.nrows()
    }

    pub fn p(&self) -> usize {
        self.data.ncols()
    }

    /// Wraps externally supplied data. Treated as Gaussian with the given
    /// model; callers vouch for that.
    pub fn from_data(data: DMatrix<f64>, model: CorrelationModel) -> Result<Self> {
        if data.nrows() < 2 || data.ncols() < 1 {
            return Err(Error::Argument(format!(
                "sample needs n >= 2 and p >= 1, got {}x{}",
                data.nrows(),
                data.ncols()
            )));
        }
        Ok(Self {
            data,
            model,
            seed: 0,
            stream: 0,
            provenance: Provenance::Gaussian,
            factor_fallback: false,
        })
    }

    /// Writes the data as CSV: a header of variable indices, then one row per
    /// observation.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        let header: Vec<String> = (0..self.p()).map(|j| j.to_string()).collect();
        writeln!(w, "{}", header.join(","))?;
        for i in 0..self.n() {
            let row: Vec<String> = (0..self.p())
                .map(|j| format!("{:.16e}", self.data[(i, j)]))
                .collect();
            writeln!(w, "{}", row.join(","))?;
        }
        Ok(())
    }
}

/// A model with its square-root factor cached, for drawing many replications.
#[derive(Debug, Clone)]
pub struct GaussianSampler {
    model: CorrelationModel,
    /// Lower factor `L` with `L·Lᵀ = Σ`.
    factor: DMatrix<f64>,
    fallback: bool,
}

impl GaussianSampler {
    pub fn new(model: &CorrelationModel) -> Result<Self> {
        let sigma = build_sigma(model)?;
        let (factor, fallback) = match sigma.clone().cholesky() {
            Some(ch) => (ch.l(), false),
            None => {
                let eig = sigma.symmetric_eigen();
                let roots = eig.eigenvalues.map(|v| v.max(0.0).sqrt());
                let mut f = eig.eigenvectors.clone();
                for (j, r) in roots.iter().enumerate() {
                    f.column_mut(j).scale_mut(*r);
                }
                (f, true)
            }
        };
        Ok(Self {
            model: model.clone(),
            factor,
            fallback,
        })
    }

    pub fn model(&self) -> &CorrelationModel {
        &self.model
    }

    /// One observation from an arbitrary generator.
    pub fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> DVector<f64> {
        let p = self.model.p;
        let z = DVector::from_fn(p, |_, _| StandardNormal.sample(rng));
        &self.factor * z
    }

    /// Draws n observations from stream `stream` of `seed`.
    pub fn sample(&self, n: usize, seed: u64, stream: u64) -> Result<SampleMatrix> {
        if n < 2 {
            return Err(Error::Argument(format!("need n >= 2 observations, got {n}")));
        }
        let p = self.model.p;
        let mut rng = rng::stream(seed, stream);
        let draws: Vec<f64> = (0..n * p).map(|_| StandardNormal.sample(&mut rng)).collect();
        let z = DMatrix::from_row_slice(n, p, &draws);
        Ok(SampleMatrix {
            data: z * self.factor.transpose(),
            model: self.model.clone(),
            seed,
            stream,
            provenance: Provenance::Gaussian,
            factor_fallback: self.fallback,
        })
    }
}

/// n i.i.d. draws from N(0, Σ(model)) using stream 0 of `seed`.
pub fn sample_mvn(model: &CorrelationModel, n: usize, seed: u64) -> Result<SampleMatrix> {
    GaussianSampler::new(model)?.sample(n, seed, 0)
}

/// Applies a strictly increasing transform to every column.
pub fn monotone_transform(x: &SampleMatrix, transform: Transform) -> SampleMatrix {
    let mut data = x.data.clone();
    match transform {
        Transform::Cube => data.apply(|v| *v = *v * *v * *v),
        Transform::Exp => data.apply(|v| *v = v.exp()),
        Transform::Affine { scale, shift } => {
            assert!(scale > 0.0, "affine transform needs a positive scale");
            data.apply(|v| *v = scale * *v + shift)
        }
        Transform::ProbitRank => {
            let n = data.nrows();
            for mut col in data.column_iter_mut() {
                let ranks = average_ranks(col.as_slice());
                for (v, r) in col.iter_mut().zip(ranks) {
                    *v = probit(r / (n as f64 + 1.0));
                }
            }
        }
    }
    SampleMatrix {
        data,
        provenance: Provenance::Transformed(transform),
        ..x.clone()
    }
}

/// 1-based ranks, ties receiving the average of their positions.
pub fn average_ranks(values: &[f64]) -> Vec<f64> {
    let n = values.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0.0; n];
    let mut i = 0;
    while i < n {
        let mut j = i;
        while j + 1 < n && values[order[j + 1]] == values[order[i]] {
            j += 1;
        }
        let r = (i + j) as f64 / 2.0 + 1.0;
        for &o in &order[i..=j] {
            ranks[o] = r;
        }
        i = j + 1;
    }
    ranks
}

/// Inverse standard normal CDF on (0, 1).
pub fn probit(u: f64) -> f64 {
    assert!(u > 0.0 && u < 1.0, "probit argument {u} outside (0, 1)");
    // bracket then Newton; Φ is smooth and monotone so this converges fast
    let mut x = if u < 0.5 {
        -(-2.0 * u.ln()).sqrt()
    } else {
        (-2.0 * (1.0 - u).ln()).sqrt()
    };
    for _ in 0..60 {
        let step = (normal::cdf(x) - u) / normal::pdf(x).max(1e-300);
        x -= step.clamp(-1.0, 1.0);
        if step.abs() < 1e-15 * (1.0 + x.abs()) {
            break;
        }
    }
    x
}
