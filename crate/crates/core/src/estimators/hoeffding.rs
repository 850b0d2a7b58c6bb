use nalgebra::DMatrix;
use rayon::prelude::*;

use super::kendall::kendall_matrix_fast;
use crate::error::{Error, Result};
use crate::models::SigmaTriple;
use crate::normal;
use crate::sampling::{Provenance, SampleMatrix};

/// Hoeffding decomposition `K_n = M₁ + M₂ + M₂ᵀ + M₃` with the projections
/// `A_i = E[sign(x_i − x) | x_i]` and `W_n = M₁ + Σ₃`.
#[derive(Debug, Clone)]
pub struct HoeffdingPieces {
    /// Row i is A_i.
    pub a_rows: DMatrix<f64>,
    pub m1: DMatrix<f64>,
    pub m2: DMatrix<f64>,
    pub m3: DMatrix<f64>,
    pub w_n: DMatrix<f64>,
}

fn check_gaussian(x: &SampleMatrix, triple: &SigmaTriple) -> Result<()> {
    if x.provenance != Provenance::Gaussian {
        return Err(Error::Contract(
            "A_i = 2Φ(x_i) − 1 holds only for Gaussian data with unit-variance marginals".into(),
        ));
    }
    if triple.dim() != x.p() {
        return Err(Error::Argument(format!(
            "triple dimension {} does not match sample dimension {}",
            triple.dim(),
            x.p()
        )));
    }
    Ok(())
}

/// `A_i = 2Φ(x_i) − 1` entrywise (the Gaussian closed form of the projection).
pub fn projection_rows(x: &SampleMatrix) -> DMatrix<f64> {
    x.data.map(|v| 2.0 * normal::cdf(v) - 1.0)
}

/// `M₁ = 2/(n−1) Σ_i (A_i − Ā)(A_i − Ā)ᵀ`.
fn m1_from(a: &DMatrix<f64>) -> DMatrix<f64> {
    let n = a.nrows();
    let mean = a.row_mean();
    let mut centered = a.clone();
    for mut row in centered.row_iter_mut() {
        row -= &mean;
    }
    centered.transpose() * &centered * (2.0 / (n as f64 - 1.0))
}

/// `W_n = M₁ + Σ₃`.
pub fn w_matrix(x: &SampleMatrix, triple: &SigmaTriple) -> Result<DMatrix<f64>> {
    check_gaussian(x, triple)?;
    Ok(m1_from(&projection_rows(x)) + &triple.sigma3)
}

/// Full decomposition, including the O(n²p²) error terms M₂ and M₃.
pub fn hoeffding_pieces(x: &SampleMatrix, triple: &SigmaTriple) -> Result<HoeffdingPieces> {
    check_gaussian(x, triple)?;
    let n = x.n();
    let p = x.p();
    let a = projection_rows(x);
    let m1 = m1_from(&a);

    // Fixed partition of the outer index so the reduction order (and hence
    // every bit of the result) is independent of the thread count.
    const CHUNKS: usize = 32;
    let bounds: Vec<(usize, usize)> = (0..CHUNKS)
        .map(|c| (c * n / CHUNKS, (c + 1) * n / CHUNKS))
        .filter(|(s, e)| s < e)
        .collect();
    let partials: Vec<(DMatrix<f64>, DMatrix<f64>)> = bounds
        .par_iter()
        .map(|&(start, end)| {
            let mut m2 = DMatrix::<f64>::zeros(p, p);
            let mut m3 = DMatrix::<f64>::zeros(p, p);
            for i in start..end {
                let rows = n - i - 1;
                if rows == 0 {
                    continue;
                }
                let mut d = DMatrix::<f64>::zeros(rows, p);
                let mut e = DMatrix::<f64>::zeros(rows, p);
                for (r, j) in (i + 1..n).enumerate() {
                    for k in 0..p {
                        let diff = a[(i, k)] - a[(j, k)];
                        let s = x.data[(i, k)] - x.data[(j, k)];
                        let sgn = if s > 0.0 {
                            1.0
                        } else if s < 0.0 {
                            -1.0
                        } else {
                            0.0
                        };
                        d[(r, k)] = diff;
                        e[(r, k)] = sgn - diff;
                    }
                }
                m2.gemm_tr(1.0, &d, &e, 1.0);
                m3.gemm_tr(1.0, &e, &e, 1.0);
            }
            (m2, m3)
        })
        .collect();
    let mut m2 = DMatrix::<f64>::zeros(p, p);
    let mut m3 = DMatrix::<f64>::zeros(p, p);
    for (a2, a3) in partials {
        m2 += a2;
        m3 += a3;
    }
    let norm = 2.0 / (n as f64 * (n as f64 - 1.0));
    m2 *= norm;
    m3 *= norm;
    let w_n = &m1 + &triple.sigma3;
    Ok(HoeffdingPieces {
        a_rows: a,
        m1,
        m2,
        m3,
        w_n,
    })
}

/// `(1/p)·‖K_n − W_n‖²_F`.
pub fn frobenius_gap(x: &SampleMatrix, triple: &SigmaTriple) -> Result<f64> {
    let w = w_matrix(x, triple)?;
    let k = kendall_matrix_fast(x)?.matrix;
    Ok((k - w).norm_squared() / x.p() as f64)
}
