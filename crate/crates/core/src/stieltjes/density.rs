use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::{solve, SpectralGrid, StieltjesSolution, Subordination};
use crate::error::{Error, Result};
use crate::spectra::DensityCurve;

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct DensityOptions {
    /// Also solve at η/2 and extrapolate 2·ρ(η/2) − ρ(η).
    pub richardson: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PointDiagnostic {
    #[serde(rename = "E")]
    pub energy: f64,
    pub iterations: usize,
    pub residual: f64,
    pub im_x: f64,
    pub im_s: f64,
    pub clamped: bool,
}

/// A density curve together with the per-energy solver output.
#[derive(Debug, Clone)]
pub struct StieltjesCurve {
    pub curve: DensityCurve,
    pub solutions: Vec<StieltjesSolution>,
    pub diagnostics: Vec<PointDiagnostic>,
}

impl StieltjesCurve {
    pub fn diagnostics_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&self.diagnostics)?)
    }
}

fn solve_warm<S: Subordination + ?Sized>(
    sys: &S,
    z: Complex64,
    warm: Complex64,
) -> Result<StieltjesSolution> {
    match solve(sys, z, warm) {
        Ok(sol) => Ok(sol),
        // one cold restart from the large-|z| limit before giving up
        Err(_) if warm != Complex64::new(1.0, 0.0) => solve(sys, z, Complex64::new(1.0, 0.0)),
        Err(e) => Err(e),
    }
}

/// Inverts `s` along the grid: density(E) = Im s(E + iη)/π, sweeping left to
/// right and starting each solve from the previous x.
pub fn density_from_stieltjes<S: Subordination + ?Sized>(
    sys: &S,
    grid: &SpectralGrid,
    options: DensityOptions,
) -> Result<StieltjesCurve> {
    if !(1e-4..=1e-1).contains(&grid.eta) {
        return Err(Error::Argument(format!(
            "eta must lie in [1e-4, 1e-1], got {}",
            grid.eta
        )));
    }
    let mut warm = Complex64::new(1.0, 0.0);
    let mut density = Vec::with_capacity(grid.energies.len());
    let mut solutions = Vec::with_capacity(grid.energies.len());
    let mut diagnostics = Vec::with_capacity(grid.energies.len());
    for &e in &grid.energies {
        let at = |source: Error| Error::AtEnergy {
            energy: e,
            source: Box::new(source),
        };
        let sol = solve_warm(sys, Complex64::new(e, grid.eta), warm).map_err(at)?;
        let mut d = sol.s.im / PI;
        if options.richardson {
            let half = solve_warm(sys, Complex64::new(e, grid.eta / 2.0), sol.x).map_err(at)?;
            d = 2.0 * half.s.im / PI - d;
        }
        if d < -1e-6 {
            return Err(Error::NegativeDensity {
                energy: e,
                density: d,
            });
        }
        warm = sol.x;
        density.push(d.max(0.0));
        diagnostics.push(PointDiagnostic {
            energy: e,
            iterations: sol.iterations,
            residual: sol.residual,
            im_x: sol.x.im,
            im_s: sol.s.im,
            clamped: sol.clamped,
        });
        solutions.push(sol);
    }
    let curve = DensityCurve::new(grid.energies.clone(), density, Vec::new())?;
    Ok(StieltjesCurve {
        curve,
        solutions,
        diagnostics,
    })
}

/// Largest distance between the solutions reached from eight different
/// starting points in ℂ⁻.
pub fn uniqueness_spread<S: Subordination + ?Sized>(sys: &S, z: Complex64) -> Result<f64> {
    let starts = [
        Complex64::new(1.0, 0.0),
        Complex64::new(0.5, -0.5),
        Complex64::new(2.0, -0.1),
        Complex64::new(0.1, -0.1),
        Complex64::new(1.0, -2.0),
        Complex64::new(3.0, -3.0),
        Complex64::new(0.3, -1.0),
        Complex64::new(5.0, -0.01),
    ];
    let xs = starts
        .iter()
        .map(|&x0| solve(sys, z, x0).map(|s| s.x))
        .collect::<Result<Vec<_>>>()?;
    let mut spread: f64 = 0.0;
    for a in &xs {
        for b in &xs {
            spread = spread.max((a - b).norm());
        }
    }
    Ok(spread)
}
