use std::f64::consts::{FRAC_2_PI, PI};

use num_complex::Complex64;

use super::{solve, SolveMode, StieltjesSolution, Subordination, MIN_QUAD_POINTS};
use crate::error::{Error, Result};
use crate::models::{band2_shape, CorrelationModel, ToeplitzSymbol};

fn quad_nodes(points: usize) -> Result<Vec<f64>> {
    if points < MIN_QUAD_POINTS {
        return Err(Error::Argument(format!(
            "quadrature needs at least {MIN_QUAD_POINTS} points, got {points}"
        )));
    }
    Ok((0..points).map(|j| 2.0 * PI * j as f64 / points as f64).collect())
}

/// Limit of the trace functional for Toeplitz Σ: periodic-trapezoid means of
/// f₂/f₁ and 1/f₁ with f₁ = f₃ + 2x·f₂ − z.
#[derive(Debug, Clone)]
pub struct ToeplitzFourier {
    c: f64,
    theta: Vec<f64>,
    f2: Vec<f64>,
    f3: Vec<f64>,
}

impl ToeplitzFourier {
    /// `rhos[k-1]` is the lag-k correlation.
    pub fn new(rhos: &[f64], c: f64, quad_points: usize) -> Result<Self> {
        let theta = quad_nodes(quad_points)?;
        let s2 = ToeplitzSymbol::sigma2(rhos);
        let s3 = ToeplitzSymbol::sigma3(rhos);
        Ok(Self {
            c,
            f2: theta.iter().map(|&t| s2.eval(t)).collect(),
            f3: theta.iter().map(|&t| s3.eval(t)).collect(),
            theta,
        })
    }

    pub fn from_model(model: &CorrelationModel, c: f64, quad_points: usize) -> Result<Self> {
        model.validate()?;
        let rhos = model
            .toeplitz_sequence()
            .ok_or_else(|| Error::Argument(format!("{} has no Toeplitz symbol", model.label())))?;
        Self::new(&rhos, c, quad_points)
    }

    fn f1(&self, j: usize, x: Complex64, z: Complex64) -> Result<Complex64> {
        let f1 = self.f3[j] + 2.0 * x * self.f2[j] - z;
        if f1.norm() < 1e-12 {
            return Err(Error::SingularSymbol {
                modulus: f1.norm(),
                theta: self.theta[j],
            });
        }
        Ok(f1)
    }
}

impl Subordination for ToeplitzFourier {
    fn aspect_ratio(&self) -> f64 {
        self.c
    }

    fn mode(&self) -> SolveMode {
        SolveMode::ToeplitzFourier
    }

    fn trace(&self, x: Complex64, z: Complex64) -> Result<Complex64> {
        let mut sum = Complex64::new(0.0, 0.0);
        for j in 0..self.theta.len() {
            sum += self.f2[j] / self.f1(j, x, z)?;
        }
        Ok(sum / self.theta.len() as f64)
    }

    fn stieltjes(&self, x: Complex64, z: Complex64) -> Result<Complex64> {
        let mut sum = Complex64::new(0.0, 0.0);
        for j in 0..self.theta.len() {
            sum += self.f1(j, x, z)?.inv();
        }
        Ok(sum / self.theta.len() as f64)
    }
}

pub fn solve_x_toeplitz(
    model: &CorrelationModel,
    c: f64,
    z: Complex64,
    x0: Complex64,
    quad_points: usize,
) -> Result<StieltjesSolution> {
    solve(&ToeplitzFourier::from_model(model, c, quad_points)?, z, x0)
}

/// `(1/2π)∫ dθ / (a + 2b·cos θ)` for MA(1), with
/// a = 1/3 + 2x/3 − z and b = (2/π)arcsin ρ + (4(x−1)/π)arcsin(ρ/2).
///
/// Evaluated by residues: with w = e^{iθ} the integral picks up the single
/// root of b·w² + a·w + b inside the unit circle, which fixes the square-root
/// branch without any sign convention.
pub fn ma1_closed_form_s(rho: f64, x: Complex64, z: Complex64) -> Result<Complex64> {
    let a = 1.0 / 3.0 + 2.0 * x / 3.0 - z;
    let b = FRAC_2_PI * rho.asin() + 2.0 * FRAC_2_PI * (x - 1.0) * (rho / 2.0).asin();
    if b.norm() < 1e-14 * a.norm().max(1.0) {
        if a.norm() < 1e-12 {
            return Err(Error::SingularSymbol {
                modulus: a.norm(),
                theta: 0.0,
            });
        }
        return Ok(a.inv());
    }
    let root = (a * a - 4.0 * b * b).sqrt();
    let w1 = (-a + root) / (2.0 * b);
    let w2 = (-a - root) / (2.0 * b);
    let (inside, outside) = if w1.norm() < w2.norm() { (w1, w2) } else { (w2, w1) };
    if (inside.norm() - 1.0).abs() < 1e-12 {
        return Err(Error::SingularSymbol {
            modulus: 0.0,
            theta: inside.arg(),
        });
    }
    Ok((b * (inside - outside)).inv())
}

/// MA(1) closed form: T = c(x,ρ) + (1 − c(x,ρ)(1 + 2x − 3z))/3 · s with
/// c(x,ρ) = arcsin(ρ/2) / (arcsin ρ + 2(x−1)arcsin(ρ/2)), and c(x,0) = 0.
#[derive(Debug, Clone, Copy)]
pub struct Ma1ClosedForm {
    pub rho: f64,
    pub c: f64,
}

impl Ma1ClosedForm {
    pub fn new(rho: f64, c: f64) -> Result<Self> {
        CorrelationModel::ma1(rho, 1).validate()?;
        Ok(Self { rho, c })
    }

    fn c_x(&self, x: Complex64) -> Result<Complex64> {
        if self.rho == 0.0 {
            return Ok(Complex64::new(0.0, 0.0));
        }
        let half = (self.rho / 2.0).asin();
        let denom = self.rho.asin() + 2.0 * (x - 1.0) * half;
        if denom.norm() < 1e-12 {
            return Err(Error::Pole {
                denominator: denom.norm(),
            });
        }
        Ok(half / denom)
    }
}

impl Subordination for Ma1ClosedForm {
    fn aspect_ratio(&self) -> f64 {
        self.c
    }

    fn mode(&self) -> SolveMode {
        SolveMode::ClosedForm
    }

    fn trace(&self, x: Complex64, z: Complex64) -> Result<Complex64> {
        let cx = self.c_x(x)?;
        let s = ma1_closed_form_s(self.rho, x, z)?;
        Ok(cx + (1.0 - cx * (1.0 + 2.0 * x - 3.0 * z)) / 3.0 * s)
    }

    fn stieltjes(&self, x: Complex64, z: Complex64) -> Result<Complex64> {
        ma1_closed_form_s(self.rho, x, z)
    }
}

pub fn solve_x_ma1(rho: f64, c: f64, z: Complex64, x0: Complex64) -> Result<StieltjesSolution> {
    solve(&Ma1ClosedForm::new(rho, c)?, z, x0)
}

/// Band-2 Toeplitz, where Σ₃ = a·Σ₂ + (1−a)/3·I: T = mean of
/// f₂/((2x+a)f₂ − z₁) with z₁ = z − (1−a)/3, and the closed form
/// s = ((2x+a)(1−x) − 2cx)/(2c·z₁·x).
#[derive(Debug, Clone)]
pub struct Band2 {
    pub rho: f64,
    pub c: f64,
    pub a: f64,
    theta: Vec<f64>,
    f2: Vec<f64>,
}

impl Band2 {
    pub fn new(rho: f64, c: f64, quad_points: usize) -> Result<Self> {
        CorrelationModel::band_toeplitz2(rho, 1).validate()?;
        let theta = quad_nodes(quad_points)?;
        let s2 = ToeplitzSymbol::sigma2(&[rho, rho]);
        Ok(Self {
            rho,
            c,
            a: band2_shape(rho),
            f2: theta.iter().map(|&t| s2.eval(t)).collect(),
            theta,
        })
    }

    fn z1(&self, z: Complex64) -> Complex64 {
        z - (1.0 - self.a) / 3.0
    }
}

impl Subordination for Band2 {
    fn aspect_ratio(&self) -> f64 {
        self.c
    }

    fn mode(&self) -> SolveMode {
        SolveMode::ClosedForm
    }

    fn trace(&self, x: Complex64, z: Complex64) -> Result<Complex64> {
        let z1 = self.z1(z);
        let k = 2.0 * x + self.a;
        let mut sum = Complex64::new(0.0, 0.0);
        for (j, &f2) in self.f2.iter().enumerate() {
            let d = k * f2 - z1;
            if d.norm() < 1e-12 {
                return Err(Error::SingularSymbol {
                    modulus: d.norm(),
                    theta: self.theta[j],
                });
            }
            sum += f2 / d;
        }
        Ok(sum / self.f2.len() as f64)
    }

    fn stieltjes(&self, x: Complex64, z: Complex64) -> Result<Complex64> {
        if x.norm() < 1e-12 {
            return Err(Error::Degenerate { re: x.re, im: x.im });
        }
        let k = 2.0 * x + self.a;
        Ok((k * (1.0 - x) - 2.0 * self.c * x) / (2.0 * self.c * self.z1(z) * x))
    }
}

pub fn solve_x_band2(
    rho: f64,
    c: f64,
    z: Complex64,
    x0: Complex64,
    quad_points: usize,
) -> Result<StieltjesSolution> {
    solve(&Band2::new(rho, c, quad_points)?, z, x0)
}
