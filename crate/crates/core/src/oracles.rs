//! Monte Carlo checks of the Gaussian sign identities and moment bounds that
//! the Kendall-matrix limit theory rests on.
//!
//! Every check is deterministic in `(params, seed)`: samples are split into a
//! fixed number of blocks, block `b` draws from stream `b` of the seed, and
//! results are reduced in block order.

use std::f64::consts::FRAC_2_PI;

use nalgebra::{DMatrix, DVector, Matrix4, Vector4};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::error::{domain, Error, Result};
use crate::estimators::hoeffding_pieces;
use crate::models::{build_sigma, sigma_triple, spectral_norm, CorrelationModel};
use crate::sampling::GaussianSampler;
use crate::{normal, rng};

const BLOCKS: u64 = 64;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MCEstimate {
    pub mean: f64,
    pub std_error: f64,
    pub n_samples: usize,
    pub seed: u64,
}

impl MCEstimate {
    /// Sample mean and its standard error.
    pub fn of_mean(samples: &[f64], seed: u64) -> Self {
        let n = samples.len();
        assert!(n >= 2, "an estimate needs at least two samples");
        let mean = samples.iter().sum::<f64>() / n as f64;
        let var = samples.iter().map(|y| (y - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        Self {
            mean,
            std_error: (var / n as f64).sqrt(),
            n_samples: n,
            seed,
        }
    }

    /// Unbiased sample variance, with the large-sample standard error
    /// sqrt((m₄ − s⁴)/n).
    pub fn of_variance(samples: &[f64], seed: u64) -> Self {
        let n = samples.len();
        assert!(n >= 2, "an estimate needs at least two samples");
        let mean = samples.iter().sum::<f64>() / n as f64;
        let var = samples.iter().map(|y| (y - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        let m4 = samples.iter().map(|y| (y - mean).powi(4)).sum::<f64>() / n as f64;
        Self {
            mean: var,
            std_error: ((m4 - var * var).max(0.0) / n as f64).sqrt(),
            n_samples: n,
            seed,
        }
    }
}

/// How `threshold` is read.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Criterion {
    /// |estimate − theory| ≤ threshold·se
    TwoSided,
    /// estimate − threshold·se ≤ theory
    Below,
    /// |estimate − theory| ≤ threshold, for deterministic checks
    Absolute,
}

/// JSON verdict record for one check.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Verdict {
    pub name: String,
    pub params: serde_json::Value,
    pub estimate: f64,
    pub se: f64,
    pub theory: f64,
    pub threshold: f64,
    pub criterion: Criterion,
    pub pass: bool,
    pub n_samples: usize,
    pub seed: u64,
}

impl Verdict {
    /// |estimate − theory| ≤ k·SE.
    fn two_sided(name: &str, params: serde_json::Value, mc: MCEstimate, theory: f64, k: f64) -> Self {
        Self {
            name: name.into(),
            params,
            estimate: mc.mean,
            se: mc.std_error,
            theory,
            threshold: k,
            criterion: Criterion::TwoSided,
            pass: (mc.mean - theory).abs() <= k * mc.std_error,
            n_samples: mc.n_samples,
            seed: mc.seed,
        }
    }

    /// estimate − k·SE ≤ bound.
    fn below(name: &str, params: serde_json::Value, mc: MCEstimate, bound: f64, k: f64) -> Self {
        Self {
            name: name.into(),
            params,
            estimate: mc.mean,
            se: mc.std_error,
            theory: bound,
            threshold: k,
            criterion: Criterion::Below,
            pass: mc.mean - k * mc.std_error <= bound,
            n_samples: mc.n_samples,
            seed: mc.seed,
        }
    }

    /// A deterministic comparison with an absolute tolerance.
    pub fn absolute(
        name: &str,
        params: serde_json::Value,
        estimate: f64,
        theory: f64,
        tolerance: f64,
    ) -> Self {
        Self {
            name: name.into(),
            params,
            estimate,
            se: 0.0,
            theory,
            threshold: tolerance,
            criterion: Criterion::Absolute,
            pass: (estimate - theory).abs() <= tolerance,
            n_samples: 0,
            seed: 0,
        }
    }

    pub fn line(&self) -> String {
        let status = if self.pass { "PASS" } else { "FAIL" };
        match self.criterion {
            Criterion::Absolute => format!(
                "{status} {} {}: {:.3e} vs {:.3e} (tol {:.1e})",
                self.name, self.params, self.estimate, self.theory, self.threshold
            ),
            _ => format!(
                "{status} {} {}: estimate {:.6} ± {:.2e} vs {:.6} (k = {})",
                self.name, self.params, self.estimate, self.se, self.theory, self.threshold
            ),
        }
    }
}

/// `n` draws of `f`, split into fixed seeded blocks and generated in parallel.
fn mc_samples<F>(n: usize, seed: u64, f: F) -> Vec<f64>
where
    F: Fn(&mut ChaCha8Rng) -> f64 + Sync,
{
    (0..BLOCKS)
        .into_par_iter()
        .map(|b| {
            let lo = (b as usize * n) / BLOCKS as usize;
            let hi = ((b as usize + 1) * n) / BLOCKS as usize;
            let mut r = rng::stream(seed, b);
            (lo..hi).map(|_| f(&mut r)).collect::<Vec<f64>>()
        })
        .collect::<Vec<_>>()
        .concat()
}

fn sign(v: f64) -> f64 {
    if v > 0.0 {
        1.0
    } else if v < 0.0 {
        -1.0
    } else {
        0.0
    }
}

fn check_samples(n: usize) -> Result<()> {
    if n < 2 {
        return Err(Error::Argument(format!("need at least 2 samples, got {n}")));
    }
    Ok(())
}

/// E[sign(z₁)sign(z₂)] = (2/π)arcsin ρ for a standard bivariate normal.
pub fn grothendieck_mc(rho: f64, n_samples: usize, seed: u64) -> Result<Verdict> {
    if !(-1.0..=1.0).contains(&rho) {
        return Err(domain("rho", rho, "-1 <= rho <= 1"));
    }
    check_samples(n_samples)?;
    let tail = (1.0 - rho * rho).sqrt();
    let samples = mc_samples(n_samples, seed, |r| {
        let g1: f64 = StandardNormal.sample(r);
        let g2: f64 = StandardNormal.sample(r);
        sign(g1) * sign(rho * g1 + tail * g2)
    });
    let mc = MCEstimate::of_mean(&samples, seed);
    Ok(Verdict::two_sided(
        "grothendieck",
        json!({ "rho": rho }),
        mc,
        FRAC_2_PI * rho.asin(),
        3.0,
    ))
}

/// Covariance with blocks B, ρB / ρB, B where B = [[1, 1/2], [1/2, 1]].
fn esscher_covariance(rho: f64) -> Matrix4<f64> {
    Matrix4::new(
        1.0,
        0.5,
        rho,
        rho / 2.0,
        0.5,
        1.0,
        rho / 2.0,
        rho,
        rho,
        rho / 2.0,
        1.0,
        0.5,
        rho / 2.0,
        rho,
        0.5,
        1.0,
    )
}

/// E[Π sign(z_j)] = ((2/π)arcsin ρ)² − ((2/π)arcsin(ρ/2))² + 1/9 for the
/// four-dimensional normal with the block covariance above.
pub fn esscher_mc(rho: f64, n_samples: usize, seed: u64) -> Result<Verdict> {
    check_samples(n_samples)?;
    let cov = esscher_covariance(rho);
    let eig = cov.symmetric_eigen();
    let min = eig.eigenvalues.min();
    if !rho.is_finite() || min < -1e-12 {
        return Err(Error::NotPsd { min_eigenvalue: min });
    }
    let root = eig.eigenvectors * Matrix4::from_diagonal(&eig.eigenvalues.map(|v| v.max(0.0).sqrt()));
    let samples = mc_samples(n_samples, seed, |r| {
        let g = Vector4::from_fn(|_, _| StandardNormal.sample(r));
        (root * g).iter().map(|&v| sign(v)).product()
    });
    let theory = (FRAC_2_PI * rho.asin()).powi(2) - (FRAC_2_PI * (rho / 2.0).asin()).powi(2) + 1.0 / 9.0;
    Ok(Verdict::two_sided(
        "esscher",
        json!({ "rho": rho }),
        MCEstimate::of_mean(&samples, seed),
        theory,
        3.0,
    ))
}

fn trace_of_square(m: &DMatrix<f64>) -> f64 {
    // tr(M²) = ‖M‖²_F for symmetric M
    m.norm_squared()
}

/// tr(Σ₁²) − tr(Σ₂²).
pub fn var_a12a13_theory(model: &CorrelationModel) -> Result<f64> {
    let t = sigma_triple(model)?;
    Ok(trace_of_square(&t.sigma1) - trace_of_square(&t.sigma2))
}

/// var(A₁₂ᵀA₁₃) = tr(Σ₁²) − tr(Σ₂²), checked at 4·SE.
pub fn var_a12a13_check(model: &CorrelationModel, n_samples: usize, seed: u64) -> Result<Verdict> {
    check_samples(n_samples)?;
    let sampler = GaussianSampler::new(model)?;
    let samples = mc_samples(n_samples, seed, |r| {
        let x1 = sampler.draw(r);
        let x2 = sampler.draw(r);
        let x3 = sampler.draw(r);
        (0..x1.len())
            .map(|j| sign(x1[j] - x2[j]) * sign(x1[j] - x3[j]))
            .sum()
    });
    Ok(Verdict::two_sided(
        "var_a12a13",
        json!({ "model": model }),
        MCEstimate::of_variance(&samples, seed),
        var_a12a13_theory(model)?,
        4.0,
    ))
}

/// The MC variance of A₁₂ᵀA₁₃ compared against two theory values: the true
/// one and one with every entry of Σ₂ scaled by `sigma2_scale`. Used to check
/// that the oracle can tell a perturbed Σ₂ apart.
pub fn var_a12a13_sensitivity(
    model: &CorrelationModel,
    sigma2_scale: f64,
    n_samples: usize,
    seed: u64,
) -> Result<(Verdict, Verdict)> {
    let exact = var_a12a13_check(model, n_samples, seed)?;
    let t = sigma_triple(model)?;
    let perturbed = trace_of_square(&t.sigma1) - trace_of_square(&(&t.sigma2 * sigma2_scale));
    let mc = MCEstimate {
        mean: exact.estimate,
        std_error: exact.se,
        n_samples,
        seed,
    };
    let wrong = Verdict::two_sided(
        "var_a12a13_perturbed_sigma2",
        json!({ "model": model, "sigma2_scale": sigma2_scale }),
        mc,
        perturbed,
        4.0,
    );
    Ok((exact, wrong))
}

/// Haar-distributed orthogonal matrix (QR of a Gaussian matrix with the sign
/// of R's diagonal folded into Q).
pub fn random_orthogonal(p: usize, seed: u64) -> DMatrix<f64> {
    let mut r = rng::stream(seed, 0);
    let g = DMatrix::from_fn(p, p, |_, _| StandardNormal.sample(&mut r));
    let qr = g.qr();
    let mut q = qr.q();
    let rr = qr.r();
    for j in 0..p {
        if rr[(j, j)] < 0.0 {
            q.column_mut(j).neg_mut();
        }
    }
    q
}

/// var(AᵀBA) ≤ 3‖Σ‖·tr(BΣ₂Bᵀ) with A = 2Φ(x) − 1.
pub fn poincare_bound_check(
    model: &CorrelationModel,
    b: &DMatrix<f64>,
    n_samples: usize,
    seed: u64,
) -> Result<Verdict> {
    check_samples(n_samples)?;
    let p = model.p;
    if b.nrows() != p || b.ncols() != p {
        return Err(Error::Argument(format!(
            "B is {}x{}, model has p = {p}",
            b.nrows(),
            b.ncols()
        )));
    }
    let sigma = build_sigma(model)?;
    let t = sigma_triple(model)?;
    let rhs = 3.0 * spectral_norm(&sigma) * (b * &t.sigma2 * b.transpose()).trace();
    let sampler = GaussianSampler::new(model)?;
    let samples = mc_samples(n_samples, seed, |r| {
        let a: DVector<f64> = sampler.draw(r).map(|v| 2.0 * normal::cdf(v) - 1.0);
        a.dot(&(b * &a))
    });
    Ok(Verdict::below(
        "poincare_bound",
        json!({ "model": model }),
        MCEstimate::of_variance(&samples, seed),
        rhs,
        3.0,
    ))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScanRow {
    pub model: String,
    pub p: usize,
    pub value: f64,
}

/// (tr Σ₁² − tr Σ₂²)/p² along a family of models; exact, no sampling.
pub fn assumption_a_scan(family: impl Fn(usize) -> CorrelationModel, ps: &[usize]) -> Result<Vec<ScanRow>> {
    ps.iter()
        .map(|&p| {
            let model = family(p);
            Ok(ScanRow {
                model: model.label(),
                p,
                value: var_a12a13_theory(&model)? / (p * p) as f64,
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorTermReport {
    pub m2: Verdict,
    pub m3: Verdict,
    /// Grand mean of the M₂ entries against 0.
    pub m2_zero_mean: Verdict,
    /// Fraction of individual M₂ entries whose replication mean is beyond
    /// 3·SE of zero (about 0.0027 expected under a zero mean).
    pub m2_entries_beyond_3se: f64,
}

impl ErrorTermReport {
    pub fn verdicts(&self) -> [&Verdict; 3] {
        [&self.m2, &self.m3, &self.m2_zero_mean]
    }
}

/// Replication means of (1/p)‖M₂‖²_F and (1/p)‖M₃ − Σ₃‖²_F against
///   4p²/(3np(n−1)) + (8/(np))·tr Σ₂²  and
///   2p²/(3np(n−1)) + (32/(np))·tr{Σ₁(Σ₁ + Σ₂)}.
pub fn error_term_bounds_check(
    model: &CorrelationModel,
    n: usize,
    replications: usize,
    seed: u64,
) -> Result<ErrorTermReport> {
    check_samples(replications)?;
    let p = model.p;
    let t = sigma_triple(model)?;
    let sampler = GaussianSampler::new(model)?;
    let per_rep = (0..replications as u64)
        .into_par_iter()
        .map(|r| {
            let x = sampler.sample(n, seed, r)?;
            let h = hoeffding_pieces(&x, &t)?;
            let m2 = h.m2.norm_squared() / p as f64;
            let m3 = (&h.m3 - &t.sigma3).norm_squared() / p as f64;
            Ok((m2, m3, h.m2))
        })
        .collect::<Result<Vec<_>>>()?;
    let (nf, pf) = (n as f64, p as f64);
    let bound2 = 4.0 * pf * pf / (3.0 * nf * pf * (nf - 1.0)) + 8.0 / (nf * pf) * trace_of_square(&t.sigma2);
    let bound3 = 2.0 * pf * pf / (3.0 * nf * pf * (nf - 1.0))
        + 32.0 / (nf * pf) * (&t.sigma1 * (&t.sigma1 + &t.sigma2)).trace();
    let params = json!({ "model": model, "n": n, "replications": replications });
    let m2s: Vec<f64> = per_rep.iter().map(|r| r.0).collect();
    let m3s: Vec<f64> = per_rep.iter().map(|r| r.1).collect();
    let grand: Vec<f64> = per_rep.iter().map(|r| r.2.mean()).collect();

    let reps = replications as f64;
    let mut beyond = 0usize;
    for i in 0..p {
        for j in 0..p {
            let vals: Vec<f64> = per_rep.iter().map(|r| r.2[(i, j)]).collect();
            let mean = vals.iter().sum::<f64>() / reps;
            let sd = (vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (reps - 1.0)).sqrt();
            if mean.abs() > 3.0 * sd / reps.sqrt() {
                beyond += 1;
            }
        }
    }
    Ok(ErrorTermReport {
        m2: Verdict::below(
            "error_term_m2",
            params.clone(),
            MCEstimate::of_mean(&m2s, seed),
            bound2,
            3.0,
        ),
        m3: Verdict::below(
            "error_term_m3",
            params.clone(),
            MCEstimate::of_mean(&m3s, seed),
            bound3,
            3.0,
        ),
        m2_zero_mean: Verdict::two_sided(
            "m2_zero_mean",
            params,
            MCEstimate::of_mean(&grand, seed),
            0.0,
            3.0,
        ),
        m2_entries_beyond_3se: beyond as f64 / (p * p) as f64,
    })
}
