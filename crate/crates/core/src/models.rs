//! Population correlation structures and their Gaussian-ensemble images.
//!
//! For a Gaussian population with correlation matrix Σ, the covariance of the
//! sign vectors `sign(x_i - x_j)` and of their projections `2Φ(x_i) - 1` are
//! entrywise arcsine images of Σ:
//!
//! ```text
//! Σ₁ = (2/π) arcsin(Σ)      Σ₂ = (2/π) arcsin(Σ/2)      Σ₃ = Σ₁ - 2Σ₂
//! ```
//!
//! The arcsine is applied to each entry separately; it is not a matrix
//! function.

use std::f64::consts::{FRAC_2_PI, PI};

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::rng;

/// Smallest eigenvalue accepted for a realized correlation matrix.
pub const PSD_TOLERANCE: f64 = -1e-10;

/// Scaling of the loading term in the factor model `I + ZᵀZ/scale`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FactorScale {
    /// `Σ₀ = I + ZᵀZ / p`
    OverP,
    /// `Σ₀ = I + ZᵀZ / √p`
    OverSqrtP,
}

/// Structured correlation families.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ModelKind {
    Identity,
    CompoundSymmetry {
        rho: f64,
    },
    /// Tridiagonal Toeplitz: ρ on both first off-diagonals.
    Ma1 {
        rho: f64,
    },
    /// Pentadiagonal Toeplitz with ρ₁ = ρ₂ = ρ.
    BandToeplitz2 {
        rho: f64,
    },
    /// Toeplitz with first-row correlations `rhos[k-1] = ρ_k`, zero beyond.
    GeneralToeplitz {
        rhos: Vec<f64>,
    },
    /// Correlation matrix of `I + ZᵀZ/scale` with `Z` a k×p standard normal
    /// loading matrix drawn from `loadings_seed`.
    Factor {
        #[serde(default = "default_factor_rank")]
        k: usize,
        scale: FactorScale,
        loadings_seed: u64,
    },
}

fn default_factor_rank() -> usize {
    3
}

/// A correlation family at a fixed dimension.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelationModel {
    #[serde(flatten)]
    pub kind: ModelKind,
    pub p: usize,
}

impl CorrelationModel {
    pub fn new(kind: ModelKind, p: usize) -> Self {
        Self { kind, p }
    }

    pub fn identity(p: usize) -> Self {
        Self::new(ModelKind::Identity, p)
    }

    pub fn compound_symmetry(rho: f64, p: usize) -> Self {
        Self::new(ModelKind::CompoundSymmetry { rho }, p)
    }

    pub fn ma1(rho: f64, p: usize) -> Self {
        Self::new(ModelKind::Ma1 { rho }, p)
    }

    pub fn band_toeplitz2(rho: f64, p: usize) -> Self {
        Self::new(ModelKind::BandToeplitz2 { rho }, p)
    }

    pub fn general_toeplitz(rhos: Vec<f64>, p: usize) -> Self {
        Self::new(ModelKind::GeneralToeplitz { rhos }, p)
    }

    pub fn factor(k: usize, scale: FactorScale, loadings_seed: u64, p: usize) -> Self {
        Self::new(
            ModelKind::Factor {
                k,
                scale,
                loadings_seed,
            },
            p,
        )
    }

    /// Short stable label used in file names and manifests.
    pub fn label(&self) -> String {
        match &self.kind {
            ModelKind::Identity => "identity".into(),
            ModelKind::CompoundSymmetry { rho } => format!("cs{rho}"),
            ModelKind::Ma1 { rho } => format!("ma1_{rho}"),
            ModelKind::BandToeplitz2 { rho } => format!("band2_{rho}"),
            ModelKind::GeneralToeplitz { rhos } => format!("toeplitz{}", rhos.len()),
            ModelKind::Factor { scale, .. } => match scale {
                FactorScale::OverP => "factor_p".into(),
                FactorScale::OverSqrtP => "factor_sqrtp".into(),
            },
        }
    }

    /// Correlation sequence `(ρ₁, ρ₂, …)` for the Toeplitz families
    /// (identity included, with an empty sequence).
    pub fn toeplitz_sequence(&self) -> Option<Vec<f64>> {
        match &self.kind {
            ModelKind::Identity => Some(Vec::new()),
            ModelKind::Ma1 { rho } => Some(vec![*rho]),
            ModelKind::BandToeplitz2 { rho } => Some(vec![*rho, *rho]),
            ModelKind::GeneralToeplitz { rhos } => Some(rhos.clone()),
            ModelKind::CompoundSymmetry { .. } | ModelKind::Factor { .. } => None,
        }
    }

    /// Validates the declared parameter ranges (not positive-definiteness).
    pub fn validate(&self) -> Result<()> {
        if self.p == 0 {
            return Err(domain("p", 0.0, "p >= 1"));
        }
        match &self.kind {
            ModelKind::Identity => Ok(()),
            ModelKind::CompoundSymmetry { rho } => check_open(*rho, "rho", -1.0, 1.0, "-1 < rho < 1"),
            ModelKind::Ma1 { rho } => check_closed(*rho, "rho", -0.5, 0.5, "-1/2 <= rho <= 1/2"),
            ModelKind::BandToeplitz2 { rho } => check_open(*rho, "rho", -1.0, 1.0, "-1 < rho < 1"),
            ModelKind::GeneralToeplitz { rhos } => {
                for &r in rhos {
                    if !r.is_finite() || r.abs() > 1.0 {
                        return Err(domain("rho_k", r, "|rho_k| <= 1"));
                    }
                }
                Ok(())
            }
            ModelKind::Factor { k, .. } => {
                if *k == 0 {
                    Err(domain("k", 0.0, "k >= 1"))
                } else {
                    Ok(())
                }
            }
        }
    }
}

fn check_closed(v: f64, name: &'static str, lo: f64, hi: f64, bound: &str) -> Result<()> {
    if v.is_finite() && v >= lo && v <= hi {
        Ok(())
    } else {
        Err(domain(name, v, bound))
    }
}

fn check_open(v: f64, name: &'static str, lo: f64, hi: f64, bound: &str) -> Result<()> {
    if v.is_finite() && v > lo && v < hi {
        Ok(())
    } else {
        Err(domain(name, v, bound))
    }
}

/// Realizes the population correlation matrix Σ of `model`.
pub fn build_sigma(model: &CorrelationModel) -> Result<DMatrix<f64>> {
    model.validate()?;
    let p = model.p;
    let sigma = match &model.kind {
        ModelKind::Identity => DMatrix::identity(p, p),
        ModelKind::CompoundSymmetry { rho } => DMatrix::from_fn(p, p, |i, j| if i == j { 1.0 } else { *rho }),
        ModelKind::Factor {
            k,
            scale,
            loadings_seed,
        } => factor_sigma(p, *k, *scale, *loadings_seed),
        _ => {
            let rhos = model.toeplitz_sequence().expect("toeplitz family");
            toeplitz(p, &rhos)
        }
    };

    if let ModelKind::Ma1 { rho } = model.kind {
        // closed-form spectrum; the range check already guarantees λ_min > 0
        let lmin = 1.0 - 2.0 * rho.abs() * (PI / (p as f64 + 1.0)).cos();
        if lmin < PSD_TOLERANCE {
            return Err(Error::NotPsd { min_eigenvalue: lmin });
        }
    } else if p > 1 && sigma.clone().cholesky().is_none() {
        // Cholesky success certifies definiteness; otherwise look at the spectrum.
        let lmin = sigma
            .clone()
            .symmetric_eigenvalues()
            .iter()
            .cloned()
            .fold(f64::INFINITY, f64::min);
        if lmin < PSD_TOLERANCE {
            return Err(Error::NotPsd { min_eigenvalue: lmin });
        }
    }
    Ok(sigma)
}

fn toeplitz(p: usize, rhos: &[f64]) -> DMatrix<f64> {
    DMatrix::from_fn(p, p, |i, j| {
        let lag = i.abs_diff(j);
        if lag == 0 {
            1.0
        } else {
            rhos.get(lag - 1).copied().unwrap_or(0.0)
        }
    })
}

/// Loading matrix `Z` (k×p, i.i.d. N(0,1)) of the factor model.
pub fn factor_loadings(p: usize, k: usize, seed: u64) -> DMatrix<f64> {
    let mut rng = rng::stream(seed, 0);
    let draws: Vec<f64> = (0..k * p).map(|_| StandardNormal.sample(&mut rng)).collect();
    DMatrix::from_row_slice(k, p, &draws)
}

/// The unnormalized loading term `ZᵀZ/scale` of the factor model.
pub fn factor_loading_term(p: usize, k: usize, scale: FactorScale, seed: u64) -> DMatrix<f64> {
    let z = factor_loadings(p, k, seed);
    let divisor = match scale {
        FactorScale::OverP => p as f64,
        FactorScale::OverSqrtP => (p as f64).sqrt(),
    };
    z.transpose() * &z / divisor
}

fn factor_sigma(p: usize, k: usize, scale: FactorScale, seed: u64) -> DMatrix<f64> {
    let mut s0 = factor_loading_term(p, k, scale, seed);
    for i in 0..p {
        s0[(i, i)] += 1.0;
    }
    let inv_sd: Vec<f64> = (0..p).map(|i| 1.0 / s0[(i, i)].sqrt()).collect();
    DMatrix::from_fn(p, p, |i, j| {
        let (a, b) = (i.min(j), i.max(j));
        if a == b {
            1.0
        } else {
            s0[(a, b)] * inv_sd[a] * inv_sd[b]
        }
    })
}

/// Entrywise `(2/π)·arcsin(σ)` (or of `σ/2` when `halved`).
pub fn arcsin_map(sigma: &DMatrix<f64>, halved: bool) -> Result<DMatrix<f64>> {
    let mut out = sigma.clone();
    for v in out.iter_mut() {
        if !v.is_finite() || v.abs() > 1.0 + 1e-12 {
            return Err(domain("sigma_ij", *v, "|sigma_ij| <= 1"));
        }
        let t = v.clamp(-1.0, 1.0);
        *v = FRAC_2_PI * if halved { (t / 2.0).asin() } else { t.asin() };
    }
    Ok(out)
}

/// The Gaussian-ensemble matrices Σ₁ = cov(A_ij), Σ₂ = cov(A_i) and
/// Σ₃ = cov(ε_ij) = Σ₁ − 2Σ₂.
#[derive(Debug, Clone, PartialEq)]
pub struct SigmaTriple {
    pub sigma1: DMatrix<f64>,
    pub sigma2: DMatrix<f64>,
    pub sigma3: DMatrix<f64>,
}

impl SigmaTriple {
    /// Builds the triple directly from a correlation matrix.
    pub fn from_sigma(sigma: &DMatrix<f64>) -> Result<Self> {
        let sigma1 = arcsin_map(sigma, false)?;
        let sigma2 = arcsin_map(sigma, true)?;
        let sigma3 = &sigma1 - &sigma2 * 2.0;
        Ok(Self {
            sigma1,
            sigma2,
            sigma3,
        })
    }

    pub fn dim(&self) -> usize {
        self.sigma1.nrows()
    }
}

pub fn sigma_triple(model: &CorrelationModel) -> Result<SigmaTriple> {
    SigmaTriple::from_sigma(&build_sigma(model)?)
}

/// `a = arcsin(ρ)/arcsin(ρ/2) − 2`, the proportionality constant in
/// `Σ₃ = a·Σ₂ + ((1−a)/3)·I` for the two-band Toeplitz model. Tends to 0 as
/// ρ → 0.
pub fn band2_shape(rho: f64) -> f64 {
    if rho.abs() < 1e-4 {
        // arcsin(ρ)/arcsin(ρ/2) = 2 + ρ²/4 + O(ρ⁴)
        return rho * rho / 4.0;
    }
    rho.asin() / (rho / 2.0).asin() - 2.0
}

/// Real even trigonometric polynomial `a0 + 2·Σ_k coeffs[k-1]·cos(kθ)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ToeplitzSymbol {
    pub a0: f64,
    pub coeffs: Vec<f64>,
}

impl ToeplitzSymbol {
    pub fn eval(&self, theta: f64) -> f64 {
        self.a0
            + 2.0
                * self
                    .coeffs
                    .iter()
                    .enumerate()
                    .map(|(k, c)| c * ((k + 1) as f64 * theta).cos())
                    .sum::<f64>()
    }

    /// Symbol of Σ₂: diagonal 1/3, lag-k coefficient (2/π)arcsin(ρ_k/2).
    pub fn sigma2(rhos: &[f64]) -> Self {
        Self {
            a0: 1.0 / 3.0,
            coeffs: rhos.iter().map(|r| FRAC_2_PI * (r / 2.0).asin()).collect(),
        }
    }

    /// Symbol of Σ₃: diagonal 1/3, lag-k coefficient
    /// (2/π)arcsin ρ_k − (4/π)arcsin(ρ_k/2).
    pub fn sigma3(rhos: &[f64]) -> Self {
        Self {
            a0: 1.0 / 3.0,
            coeffs: rhos
                .iter()
                .map(|r| FRAC_2_PI * r.asin() - 2.0 * FRAC_2_PI * (r / 2.0).asin())
                .collect(),
        }
    }

    /// Exact range of the symbol over [0, π], found by dense sampling.
    pub fn range(&self, samples: usize) -> (f64, f64) {
        (0..=samples)
            .map(|j| self.eval(PI * j as f64 / samples as f64))
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| {
                (lo.min(v), hi.max(v))
            })
    }
}

/// Complex symbol f₁(θ) = f₃(θ) + 2x·f₂(θ) − z, the Fourier symbol of
/// `Σ₃ + 2xΣ₂ − zI`.
#[derive(Debug, Clone, PartialEq)]
pub struct ResolventSymbol {
    pub a0: Complex64,
    pub coeffs: Vec<Complex64>,
}

impl ResolventSymbol {
    pub fn eval(&self, theta: f64) -> Complex64 {
        self.a0
            + self
                .coeffs
                .iter()
                .enumerate()
                .map(|(k, c)| c * (2.0 * ((k + 1) as f64 * theta).cos()))
                .sum::<Complex64>()
    }
}

/// Symbols (f₁, f₂) of a Toeplitz-family model at subordination value `x`
/// and spectral parameter `z`.
pub fn toeplitz_symbols(
    model: &CorrelationModel,
    x: Complex64,
    z: Complex64,
) -> Result<(ResolventSymbol, ToeplitzSymbol)> {
    model.validate()?;
    let rhos = model
        .toeplitz_sequence()
        .ok_or_else(|| Error::Argument(format!("{} is not a Toeplitz model", model.label())))?;
    if !(x.re.is_finite() && x.im.is_finite() && z.re.is_finite() && z.im.is_finite()) {
        return Err(Error::Argument("x and z must be finite".into()));
    }
    let f2 = ToeplitzSymbol::sigma2(&rhos);
    let f3 = ToeplitzSymbol::sigma3(&rhos);
    let f1 = ResolventSymbol {
        a0: Complex64::new(1.0 / 3.0, 0.0) + x * (2.0 / 3.0) - z,
        coeffs: f3
            .coeffs
            .iter()
            .zip(&f2.coeffs)
            .map(|(c3, c2)| *c3 + x * (2.0 * c2))
            .collect(),
    };
    Ok((f1, f2))
}

/// Spectrum of the p×p symmetric tridiagonal Toeplitz matrix with constant
/// diagonal and off-diagonal.
#[derive(Debug, Clone, PartialEq)]
pub struct TridiagonalEigen {
    pub p: usize,
    /// `values[k-1] = diag + 2·offdiag·cos(kπ/(p+1))`, k = 1..p.
    pub values: Vec<f64>,
}

impl TridiagonalEigen {
    /// Component j (0-based) of eigenvector k (1-based).
    pub fn vector_component(&self, k: usize, j: usize) -> f64 {
        let h = (self.p + 1) as f64;
        (2.0 / h).sqrt() * (((j + 1) * k) as f64 * PI / h).sin()
    }

    /// Eigenvector for eigenvalue `values[k-1]`.
    pub fn vector(&self, k: usize) -> DVector<f64> {
        DVector::from_fn(self.p, |j, _| self.vector_component(k, j))
    }

    /// Eigenvalues in ascending order.
    pub fn sorted(&self) -> Vec<f64> {
        let mut v = self.values.clone();
        v.sort_by(f64::total_cmp);
        v
    }
}

pub fn ma1_eigen(p: usize, diag: f64, offdiag: f64) -> TridiagonalEigen {
    let h = (p + 1) as f64;
    TridiagonalEigen {
        p,
        values: (1..=p)
            .map(|k| diag + 2.0 * offdiag * (k as f64 * PI / h).cos())
            .collect(),
    }
}

/// Spectral norm of a symmetric matrix.
pub fn spectral_norm(m: &DMatrix<f64>) -> f64 {
    m.clone()
        .symmetric_eigenvalues()
        .iter()
        .fold(0.0_f64, |acc, v| acc.max(v.abs()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn identity_sigma() {
        let s = build_sigma(&CorrelationModel::identity(4)).unwrap();
        assert_eq!(s, DMatrix::identity(4, 4));
    }

    #[test]
    fn ma1_sigma_is_tridiagonal() {
        let s = build_sigma(&CorrelationModel::ma1(0.5, 3)).unwrap();
        let expected = DMatrix::from_row_slice(3, 3, &[1.0, 0.5, 0.0, 0.5, 1.0, 0.5, 0.0, 0.5, 1.0]);
        assert_eq!(s, expected);
    }

    #[test]
    fn compound_symmetry_sigma() {
        let s = build_sigma(&CorrelationModel::compound_symmetry(0.3, 3)).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                assert_eq!(s[(i, j)], if i == j { 1.0 } else { 0.3 });
            }
        }
    }

    #[test]
    fn out_of_range_parameters() {
        let err = build_sigma(&CorrelationModel::ma1(0.51, 5)).unwrap_err();
        assert!(matches!(err, Error::Domain { name: "rho", .. }), "{err}");
        assert!(build_sigma(&CorrelationModel::compound_symmetry(1.0, 5)).is_err());
        assert!(build_sigma(&CorrelationModel::identity(0)).is_err());
        assert!(build_sigma(&CorrelationModel::factor(0, FactorScale::OverP, 1, 5)).is_err());
    }

    #[test]
    fn non_psd_reports_smallest_eigenvalue() {
        // ρ₁ = ρ₂ = 0.9 is far outside the positive-definite region
        let err = build_sigma(&CorrelationModel::band_toeplitz2(0.9, 40)).unwrap_err();
        match err {
            Error::NotPsd { min_eigenvalue } => assert!(min_eigenvalue < -0.1),
            other => panic!("unexpected {other}"),
        }
        // compound symmetry below -1/(p-1)
        assert!(matches!(
            build_sigma(&CorrelationModel::compound_symmetry(-0.5, 5)),
            Err(Error::NotPsd { .. })
        ));
    }

    #[test]
    fn factor_model_is_a_reproducible_correlation_matrix() {
        let m = CorrelationModel::factor(3, FactorScale::OverSqrtP, 42, 30);
        let a = build_sigma(&m).unwrap();
        let b = build_sigma(&m).unwrap();
        assert_eq!(a, b);
        for i in 0..30 {
            assert_eq!(a[(i, i)], 1.0);
            for j in 0..30 {
                assert_eq!(a[(i, j)], a[(j, i)]);
                assert!(a[(i, j)].abs() <= 1.0);
            }
        }
        let other = build_sigma(&CorrelationModel::factor(3, FactorScale::OverSqrtP, 43, 30));
        assert_ne!(a, other.unwrap());
    }

    #[test]
    fn arcsin_map_values() {
        let one = DMatrix::from_element(1, 1, 1.0);
        assert_eq!(arcsin_map(&one, false).unwrap()[(0, 0)], 1.0);
        assert!((arcsin_map(&one, true).unwrap()[(0, 0)] - 1.0 / 3.0).abs() < 1e-15);
        let half = DMatrix::from_element(1, 1, 0.5);
        assert!((arcsin_map(&half, false).unwrap()[(0, 0)] - 1.0 / 3.0).abs() < 1e-15);
        let bad = DMatrix::from_element(1, 1, 1.0 + 1e-9);
        assert!(arcsin_map(&bad, false).is_err());
    }

    #[test]
    fn identity_triple() {
        let t = sigma_triple(&CorrelationModel::identity(2)).unwrap();
        assert_eq!(t.sigma1, DMatrix::identity(2, 2));
        let third = DMatrix::identity(2, 2) / 3.0;
        assert!((&t.sigma2 - &third).amax() < 1e-15);
        assert!((&t.sigma3 - &third).amax() < 1e-15);
    }

    #[test]
    fn ma1_triple_offdiagonal() {
        let rho: f64 = 0.37;
        let t = sigma_triple(&CorrelationModel::ma1(rho, 6)).unwrap();
        let expected = FRAC_2_PI * rho.asin() - 2.0 * FRAC_2_PI * (rho / 2.0).asin();
        for i in 0..5 {
            assert!((t.sigma3[(i, i + 1)] - expected).abs() < 1e-15);
        }
        assert_eq!(t.sigma3[(0, 2)], 0.0);
    }

    #[test]
    fn band2_triple_is_affine_in_sigma2() {
        let rho = 0.25;
        let a = band2_shape(rho);
        let t = sigma_triple(&CorrelationModel::band_toeplitz2(rho, 12)).unwrap();
        let rebuilt = &t.sigma2 * a + DMatrix::identity(12, 12) * ((1.0 - a) / 3.0);
        assert!((&t.sigma3 - rebuilt).amax() < 1e-14);
    }

    #[test]
    fn band2_shape_limits() {
        // value used for the ρ = 0.25 experiments
        assert!((band2_shape(0.25) - 0.016_154_375).abs() < 1e-8);
        assert!(band2_shape(1e-6).abs() < 1e-11);
        let below = 1.2e-4_f64;
        let direct = below.asin() / (below / 2.0).asin() - 2.0;
        assert!((band2_shape(below) - direct).abs() < 1e-8);
    }

    #[test]
    fn zero_correlation_symbols_are_constant() {
        let m = CorrelationModel::general_toeplitz(vec![0.0, 0.0], 10);
        let x = Complex64::new(0.7, -0.2);
        let z = Complex64::new(1.1, 0.01);
        let (f1, f2) = toeplitz_symbols(&m, x, z).unwrap();
        for &th in &[0.0, 0.4, 2.0, 5.5] {
            assert!((f1.eval(th) - (1.0 / 3.0 + 2.0 * x / 3.0 - z)).norm() < 1e-15);
            assert!((f2.eval(th) - 1.0 / 3.0).abs() < 1e-15);
        }
    }

    #[test]
    fn band2_f2_symbol() {
        let m = CorrelationModel::band_toeplitz2(0.25, 10);
        let (_, f2) = toeplitz_symbols(&m, Complex64::new(1.0, 0.0), Complex64::i()).unwrap();
        for &th in &[0.0f64, 0.3, 1.7, 3.1] {
            let expected = 1.0 / 3.0 + 4.0 / PI * 0.125_f64.asin() * (th.cos() + (2.0 * th).cos());
            assert!((f2.eval(th) - expected).abs() < 1e-15);
        }
    }

    #[test]
    fn ma1_f1_coefficient() {
        let rho: f64 = 0.4;
        let x = Complex64::new(0.6, -0.3);
        let (f1, _) = toeplitz_symbols(&CorrelationModel::ma1(rho, 10), x, Complex64::new(0.5, 0.1)).unwrap();
        let expected = 2.0 / PI * rho.asin() + 4.0 * (x - 1.0) / PI * (rho / 2.0).asin();
        assert_eq!(f1.coeffs.len(), 1);
        assert!((f1.coeffs[0] - expected).norm() < 1e-15);
    }

    #[test]
    fn tridiagonal_spectrum() {
        assert_eq!(ma1_eigen(1, 2.5, 0.3).values, vec![2.5]);
        let e = ma1_eigen(3, 1.0, 0.5);
        // 1 + cos(π/4), 1 + cos(π/2), 1 + cos(3π/4)
        let expected = [1.707_106_781_186_547_5, 1.0, 0.292_893_218_813_452_5];
        for (v, w) in e.values.iter().zip(expected) {
            assert!((v - w).abs() < 1e-15);
        }
        let dense = build_sigma(&CorrelationModel::ma1(0.5 - 1e-12, 3)).unwrap();
        let mut dense_ev: Vec<f64> = dense.symmetric_eigenvalues().iter().cloned().collect();
        dense_ev.sort_by(f64::total_cmp);
        for (a, b) in dense_ev.iter().zip(e.sorted()) {
            assert!((a - b).abs() < 1e-10);
        }
    }

    #[test]
    fn tridiagonal_vectors_are_orthonormal() {
        let e = ma1_eigen(17, 1.0, 0.3);
        let u = DMatrix::from_fn(17, 17, |j, k| e.vector_component(k + 1, j));
        let gram = u.transpose() * &u;
        assert!((gram - DMatrix::<f64>::identity(17, 17)).amax() < 1e-12);
    }

    #[test]
    fn ma1_dense_matches_closed_form() {
        let m = CorrelationModel::ma1(0.45, 60);
        let s = build_sigma(&m).unwrap();
        let mut ev: Vec<f64> = s.symmetric_eigenvalues().iter().cloned().collect();
        ev.sort_by(f64::total_cmp);
        for (a, b) in ev.iter().zip(ma1_eigen(60, 1.0, 0.45).sorted()) {
            assert!((a - b).abs() < 1e-10);
        }
    }

    #[test]
    fn factor_frobenius_chain() {
        // (1/p)‖Σ₁ − I‖² ≤ (1/p)‖ZᵀZ/p‖² for the 1/p scaling
        let p = 80;
        let m = CorrelationModel::factor(3, FactorScale::OverP, 9, p);
        let t = sigma_triple(&m).unwrap();
        let lhs = (&t.sigma1 - DMatrix::<f64>::identity(p, p)).norm_squared() / p as f64;
        let rhs = factor_loading_term(p, 3, FactorScale::OverP, 9).norm_squared() / p as f64;
        assert!(lhs <= rhs, "{lhs} > {rhs}");
        let lhs2 = (&t.sigma2 - DMatrix::<f64>::identity(p, p) / 3.0).norm_squared() / p as f64;
        assert!(lhs2 <= rhs / 4.0);
    }

    #[test]
    fn model_json_round_trip() {
        let m = CorrelationModel::factor(3, FactorScale::OverP, 5, 100);
        let s = serde_json::to_string(&m).unwrap();
        assert!(s.contains("\"kind\":\"factor\""), "{s}");
        let back: CorrelationModel = serde_json::from_str(&s).unwrap();
        assert_eq!(back, m);
        let parsed: CorrelationModel = serde_json::from_str(r#"{"kind":"ma1","rho":0.5,"p":200}"#).unwrap();
        assert_eq!(parsed, CorrelationModel::ma1(0.5, 200));
    }

    fn model_strategy() -> impl Strategy<Value = CorrelationModel> {
        let p = 1usize..25;
        prop_oneof![
            p.clone().prop_map(CorrelationModel::identity),
            (0.0..0.95f64, p.clone()).prop_map(|(r, p)| CorrelationModel::compound_symmetry(r, p)),
            (-0.49..0.49f64, p.clone()).prop_map(|(r, p)| CorrelationModel::ma1(r, p)),
            (-0.24..0.3f64, p.clone()).prop_map(|(r, p)| CorrelationModel::band_toeplitz2(r, p)),
            (any::<u64>(), p.clone()).prop_map(|(s, p)| CorrelationModel::factor(
                3,
                FactorScale::OverSqrtP,
                s,
                p
            )),
        ]
    }

    proptest! {
        #[test]
        fn triple_invariants(model in model_strategy()) {
            let t = sigma_triple(&model).unwrap();
            let p = model.p;
            let residual = &t.sigma3 - (&t.sigma1 - &t.sigma2 * 2.0);
            prop_assert!(residual.amax() <= 1e-14);
            for i in 0..p {
                prop_assert!((t.sigma1[(i, i)] - 1.0).abs() < 1e-15);
                prop_assert!((t.sigma2[(i, i)] - 1.0 / 3.0).abs() < 1e-15);
                prop_assert!((t.sigma3[(i, i)] - 1.0 / 3.0).abs() < 1e-15);
                for j in 0..p {
                    prop_assert_eq!(t.sigma1[(i, j)], t.sigma1[(j, i)]);
                    prop_assert_eq!(t.sigma2[(i, j)], t.sigma2[(j, i)]);
                    prop_assert_eq!(t.sigma3[(i, j)], t.sigma3[(j, i)]);
                }
            }
        }

        #[test]
        fn arcsin_sandwich(x in 0.0..=1.0f64) {
            // 2x/π ≤ (2/π)arcsin(x) ≤ x on [0, 1]
            let m = arcsin_map(&DMatrix::from_element(1, 1, x), false).unwrap()[(0, 0)];
            prop_assert!(FRAC_2_PI * x <= m + 1e-16);
            prop_assert!(m <= x + 1e-16);
        }
    }
}
