//! Subordinated fixed-point equations for the limiting spectral law of the
//! Kendall matrix, and their inversion into densities.
//!
//! Every formulation solves `1/x = 1 + 2c·T(x, z)` for the subordination value
//! `x(z) ∈ ℂ⁻` and then reads off the Stieltjes transform `s(z)`. They differ
//! only in how the trace functional `T` and `s` are evaluated, which is the
//! job of a [`Subordination`] implementation.

mod closed_form;
mod density;
mod finite_p;
mod toeplitz;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use closed_form::{
    identity_closed_form_s, mp_affine_atoms, mp_affine_curve, mp_affine_density, mp_affine_edges, mp_curve,
    mp_density, stieltjes_quadratic_check,
};
pub use density::{
    density_from_stieltjes, uniqueness_spread, DensityOptions, PointDiagnostic, StieltjesCurve,
};
pub use finite_p::{solve_x_finite_p, FinitePTrace};
pub use toeplitz::{
    ma1_closed_form_s, solve_x_band2, solve_x_ma1, solve_x_toeplitz, Band2, Ma1ClosedForm, ToeplitzFourier,
};

pub const DAMPING: f64 = 0.5;
pub const STEP_TOLERANCE: f64 = 1e-13;
/// Also required at convergence: |1/x − 1 − 2c·T| equals the step divided by
/// α|x|², so near small x the step rule alone stops too early.
pub const RESIDUAL_TOLERANCE: f64 = 1e-10;
pub const MAX_ITERATIONS: usize = 10_000;
pub const AITKEN_AFTER: usize = 50;
/// Positive imaginary parts of x up to this size are clamped to zero and
/// flagged; larger ones are a branch error.
pub const BRANCH_TOLERANCE: f64 = 1e-6;
pub const MIN_QUAD_POINTS: usize = 512;

/// Energies `E` at which `s(E + iη)` is evaluated.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectralGrid {
    pub energies: Vec<f64>,
    pub eta: f64,
}

impl SpectralGrid {
    pub fn new(energies: Vec<f64>, eta: f64) -> Result<Self> {
        if !(eta > 0.0) {
            return Err(Error::Argument(format!("eta must be positive, got {eta}")));
        }
        if energies.len() < 2 || energies.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::Argument("energies must be strictly increasing".into()));
        }
        Ok(Self { energies, eta })
    }

    pub fn uniform(lo: f64, hi: f64, points: usize, eta: f64) -> Result<Self> {
        let m = points.max(2);
        Self::new(
            (0..m)
                .map(|i| lo + (hi - lo) * i as f64 / (m - 1) as f64)
                .collect(),
            eta,
        )
    }

    /// Uniform grid on [lo, hi] merged with a denser uniform window, for laws
    /// with a narrow feature (such as the near-atom at 1/3 when c > 1).
    pub fn with_window(
        lo: f64,
        hi: f64,
        points: usize,
        window: (f64, f64),
        window_points: usize,
        eta: f64,
    ) -> Result<Self> {
        let base = Self::uniform(lo, hi, points, eta)?;
        let (a, b) = (window.0.max(lo), window.1.min(hi));
        let mut e = base.energies;
        if b > a {
            let m = window_points.max(2);
            e.extend((0..m).map(|i| a + (b - a) * i as f64 / (m - 1) as f64));
        }
        e.sort_by(f64::total_cmp);
        e.dedup_by(|x, y| (*x - *y).abs() < 1e-12);
        Self::new(e, eta)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolveMode {
    FinitePTrace,
    ToeplitzFourier,
    ClosedForm,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StieltjesSolution {
    pub z: Complex64,
    pub x: Complex64,
    pub s: Complex64,
    pub iterations: usize,
    pub residual: f64,
    pub mode: SolveMode,
    /// Im x was slightly positive (≤ 1e-6) and was set to zero.
    pub clamped: bool,
}

/// One formulation of the fixed-point system `1/x = 1 + 2c·T(x, z)`.
pub trait Subordination: Sync {
    /// Aspect ratio p/n.
    fn aspect_ratio(&self) -> f64;

    fn mode(&self) -> SolveMode;

    /// The trace functional T(x, z).
    fn trace(&self, x: Complex64, z: Complex64) -> Result<Complex64>;

    /// Stieltjes transform at a solved x.
    fn stieltjes(&self, x: Complex64, z: Complex64) -> Result<Complex64>;

    fn residual(&self, x: Complex64, z: Complex64) -> Result<f64> {
        let t = self.trace(x, z)?;
        Ok((x.inv() - 1.0 - 2.0 * self.aspect_ratio() * t).norm())
    }
}

fn check_inputs(c: f64, z: Complex64) -> Result<()> {
    if !(c > 0.0) || !c.is_finite() {
        return Err(Error::Argument(format!("aspect ratio must be positive, got {c}")));
    }
    if !(z.im > 0.0) {
        return Err(Error::Argument(format!(
            "z must lie in the upper half-plane, got {z}"
        )));
    }
    Ok(())
}

/// Damped Picard iteration `x ← (1−α)x + α/(1 + 2c·T(x, z))` with Aitken Δ²
/// extrapolation attempted every third step after the first 50. Stops once
/// the step is below 1e-13 and the residual below 1e-10.
pub fn solve<S: Subordination + ?Sized>(sys: &S, z: Complex64, x0: Complex64) -> Result<StieltjesSolution> {
    let c = sys.aspect_ratio();
    check_inputs(c, z)?;
    // one damped step, plus the residual at the point it started from
    let map = |x: Complex64| -> Result<(Complex64, f64)> {
        let rhs = 1.0 + 2.0 * c * sys.trace(x, z)?;
        Ok(((1.0 - DAMPING) * x + DAMPING * rhs.inv(), (x.inv() - rhs).norm()))
    };
    let mut x = x0;
    let mut history = [x0; 3];
    let mut iterations = 0;
    let mut converged = false;
    while iterations < MAX_ITERATIONS {
        let (next, start_residual) = map(x)?;
        iterations += 1;
        let step = (next - x).norm();
        x = next;
        if !x.re.is_finite() || !x.im.is_finite() {
            break;
        }
        if step < STEP_TOLERANCE && start_residual <= RESIDUAL_TOLERANCE {
            converged = true;
            break;
        }
        history = [history[1], history[2], x];
        if iterations > AITKEN_AFTER && iterations % 3 == 0 {
            let d1 = history[2] - history[1];
            let d0 = history[1] - history[0];
            let denom = d1 - d0;
            if denom.norm() > 1e-300 {
                let candidate = history[2] - d1 * d1 / denom;
                if candidate.im <= 0.0
                    && candidate.norm() > 1e-12
                    && sys
                        .residual(candidate, z)
                        .is_ok_and(|r| r < sys.residual(x, z).unwrap_or(f64::INFINITY))
                {
                    x = candidate;
                    history = [x; 3];
                }
            }
        }
    }
    let residual = sys.residual(x, z).unwrap_or(f64::NAN);
    if !converged {
        return Err(Error::NoConvergence {
            iterations,
            residual,
            z_re: z.re,
            z_im: z.im,
        });
    }
    let mut clamped = false;
    if x.im > 1e-12 {
        if x.im > BRANCH_TOLERANCE {
            return Err(Error::WrongBranch {
                im_x: x.im,
                z_re: z.re,
                z_im: z.im,
            });
        }
        x.im = 0.0;
        clamped = true;
    }
    let s = sys.stieltjes(x, z)?;
    Ok(StieltjesSolution {
        z,
        x,
        s,
        iterations,
        residual,
        mode: sys.mode(),
        clamped,
    })
}
