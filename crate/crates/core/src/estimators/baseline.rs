use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::sampling::{average_ranks, SampleMatrix};

fn correlation_of_columns(cols: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let n = cols.nrows();
    if n < 2 {
        return Err(Error::Argument(format!("correlation needs n >= 2, got {n}")));
    }
    let p = cols.ncols();
    let mut centered = cols.clone();
    for (j, mut col) in centered.column_iter_mut().enumerate() {
        let mean = col.mean();
        col.add_scalar_mut(-mean);
        let ss = col.norm_squared();
        if ss == 0.0 {
            return Err(Error::ConstantColumn { column: j });
        }
        col /= ss.sqrt();
    }
    let mut r = centered.transpose() * &centered;
    for i in 0..p {
        r[(i, i)] = 1.0;
        for j in 0..i {
            let v = r[(i, j)].clamp(-1.0, 1.0);
            r[(i, j)] = v;
            r[(j, i)] = v;
        }
    }
    Ok(r)
}

/// Sample Pearson correlation matrix of the columns.
pub fn pearson_matrix(x: &SampleMatrix) -> Result<DMatrix<f64>> {
    correlation_of_columns(&x.data)
}

/// Spearman matrix: Pearson correlation of the within-column ranks.
pub fn spearman_matrix(x: &SampleMatrix) -> Result<DMatrix<f64>> {
    let mut ranks = x.data.clone();
    for mut col in ranks.column_iter_mut() {
        let r = average_ranks(col.as_slice());
        col.copy_from_slice(&r);
    }
    correlation_of_columns(&ranks)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::CorrelationModel;
    use crate::sampling::sample_mvn;

    fn two_columns(f: impl Fn(f64) -> f64) -> SampleMatrix {
        let xs = [0.3, -1.0, 2.2, 0.9, -0.1, 1.4];
        let data = DMatrix::from_fn(6, 2, |i, j| if j == 0 { xs[i] } else { f(xs[i]) });
        SampleMatrix::from_data(data, CorrelationModel::identity(2)).unwrap()
    }

    #[test]
    fn pearson_extremes() {
        assert!((pearson_matrix(&two_columns(|v| v)).unwrap()[(0, 1)] - 1.0).abs() < 1e-15);
        assert!((pearson_matrix(&two_columns(|v| -v)).unwrap()[(0, 1)] + 1.0).abs() < 1e-15);
    }

    #[test]
    fn spearman_extremes() {
        let r = spearman_matrix(&two_columns(|v| v.powi(3) + 2.0)).unwrap();
        assert!((r[(0, 1)] - 1.0).abs() < 1e-15);
        let r = spearman_matrix(&two_columns(|v| -v.exp())).unwrap();
        assert!((r[(0, 1)] + 1.0).abs() < 1e-15);
        assert_eq!(r[(0, 0)], 1.0);
    }

    #[test]
    fn constant_column_is_an_error() {
        let x = two_columns(|_| 4.0);
        assert!(matches!(
            pearson_matrix(&x),
            Err(Error::ConstantColumn { column: 1 })
        ));
        assert!(matches!(
            spearman_matrix(&x),
            Err(Error::ConstantColumn { column: 1 })
        ));
    }

    #[test]
    fn compound_symmetry_pearson_envelope() {
        let x = sample_mvn(&CorrelationModel::compound_symmetry(0.5, 4), 10_000, 3).unwrap();
        let r = pearson_matrix(&x).unwrap();
        for i in 0..4 {
            for j in 0..4 {
                if i != j {
                    assert!((r[(i, j)] - 0.5).abs() < 0.03);
                }
            }
        }
    }

    #[test]
    fn identity_spearman_mean_offdiagonal() {
        let p = 20;
        let x = sample_mvn(&CorrelationModel::identity(p), 2000, 6).unwrap();
        let r = spearman_matrix(&x).unwrap();
        let off: f64 = (0..p)
            .flat_map(|i| (0..p).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| r[(i, j)])
            .sum::<f64>()
            / (p * (p - 1)) as f64;
        // each entry has sd ≈ 1/√n; the mean of 190 distinct entries is tighter
        assert!(off.abs() < 3.0 / (2000f64).sqrt() / (190f64).sqrt() * 3.0);
    }
}
