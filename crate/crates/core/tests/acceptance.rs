//! Acceptance suite: one PASS/FAIL line per criterion.
//!
//! Runs without the libtest harness so the lines are printed even when every
//! criterion passes. The process fails if any criterion outside
//! `KNOWN_RED` fails. Criteria in `KNOWN_RED` are evaluated at full size
//! and tolerance and reported like the others.

use std::time::{Duration, Instant};

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::Rng;

use kspec::estimators::{hoeffding_pieces, kendall_matrix_fast, kendall_matrix_naive};
use kspec::experiments::{check_energies, fig1_rows, fit_shape, GridConfig, FIG45_SHAPES};
use kspec::models::{sigma_triple, CorrelationModel, FactorScale};
use kspec::oracles::{self, Verdict};
use kspec::rng;
use kspec::sampling::{monotone_transform, sample_mvn, GaussianSampler, SampleMatrix, Transform};
use kspec::spectra::{ks_distance, DensityCurve, EmpiricalSpectrum, MatrixKind, SpectrumSource};
use kspec::stieltjes::{
    identity_closed_form_s, mp_affine_curve, mp_curve, solve, stieltjes_quadratic_check, uniqueness_spread,
    FinitePTrace, Ma1ClosedForm, StieltjesSolution, Subordination, ToeplitzFourier,
};

/// The one seed every seeded criterion uses.
const SEED: u64 = 1;

/// The Kendall matrix's near-atoms at c > 1 are spread over about ±0.1 at
/// these n, which no tolerance on a point mass or a KS distance absorbs.
const KNOWN_RED: [usize; 3] = [6, 7, 8];

struct Outcome {
    pass: bool,
    detail: String,
}

#[derive(Default)]
struct Shared {
    solutions: Vec<StieltjesSolution>,
    curves: Vec<(String, DensityCurve)>,
    uniqueness: Vec<(String, Box<dyn Subordination>, Complex64)>,
}

fn kendall_spectrum(x: &SampleMatrix) -> EmpiricalSpectrum {
    EmpiricalSpectrum::from_matrix(
        &kendall_matrix_fast(x).unwrap().matrix,
        SpectrumSource {
            model: Some(x.model.clone()),
            n: x.n(),
            p: x.p(),
            seed: x.seed,
            kind: MatrixKind::Kendall,
        },
    )
    .unwrap()
}

fn criterion_1(_: &mut Shared) -> Outcome {
    let mut r = rng::stream(SEED, 1);
    let mut mismatches = 0;
    for i in 0..200u64 {
        let n = r.random_range(2..=30);
        let p = r.random_range(1..=10);
        let model = match i % 5 {
            0 => CorrelationModel::identity(p),
            1 => CorrelationModel::compound_symmetry(0.5, p),
            2 => CorrelationModel::ma1(0.4, p),
            3 => CorrelationModel::band_toeplitz2(0.2, p),
            _ => CorrelationModel::factor(p.min(3), FactorScale::OverP, i, p),
        };
        let mut x = sample_mvn(&model, n, SEED + i).unwrap();
        if i % 4 == 0 {
            // coarse rounding forces ties
            x.data.apply(|v| *v = (*v * 2.0).round() / 2.0);
        }
        if kendall_matrix_fast(&x).unwrap().matrix != kendall_matrix_naive(&x).unwrap().matrix {
            mismatches += 1;
        }
    }
    Outcome {
        pass: mismatches == 0,
        detail: format!("{mismatches} of 200 instances differ"),
    }
}

fn criterion_2(_: &mut Shared) -> Outcome {
    let mut worst: f64 = 0.0;
    for i in 0..20u64 {
        let (n, p) = [(20, 10), (60, 30), (120, 60), (200, 100)][(i % 4) as usize];
        let model = match i % 3 {
            0 => CorrelationModel::identity(p),
            1 => CorrelationModel::ma1(0.5, p),
            _ => CorrelationModel::compound_symmetry(0.4, p),
        };
        let x = sample_mvn(&model, n, SEED + i).unwrap();
        let h = hoeffding_pieces(&x, &sigma_triple(&model).unwrap()).unwrap();
        let k = kendall_matrix_fast(&x).unwrap().matrix;
        worst = worst.max((k - &h.m1 - &h.m2 - h.m2.transpose() - &h.m3).amax());
    }
    Outcome {
        pass: worst < 1e-12,
        detail: format!("max entry of K_n - M1 - M2 - M2^T - M3 = {worst:.2e} (tol 1e-12)"),
    }
}

fn criterion_3(_: &mut Shared) -> Outcome {
    let mut changed = 0;
    for i in 0..20u64 {
        let model = if i % 2 == 0 {
            CorrelationModel::ma1(0.3, 8)
        } else {
            CorrelationModel::compound_symmetry(0.6, 6)
        };
        let x = sample_mvn(&model, 25 + i as usize, SEED + i).unwrap();
        let k = kendall_matrix_fast(&x).unwrap().matrix;
        for t in [Transform::Cube, Transform::Exp] {
            if kendall_matrix_fast(&monotone_transform(&x, t)).unwrap().matrix != k {
                changed += 1;
            }
        }
    }
    Outcome {
        pass: changed == 0,
        detail: format!("{changed} of 40 transformed matrices differ"),
    }
}

fn criterion_4(shared: &mut Shared) -> Outcome {
    let one = Complex64::new(1.0, 0.0);
    let (mut quad, mut root): (f64, f64) = (0.0, 0.0);
    for c in [0.5, 1.0, 2.0] {
        let sys = FinitePTrace::new(&sigma_triple(&CorrelationModel::identity(1000)).unwrap(), c).unwrap();
        let hi = 1.0 / 3.0 + 2.0 / 3.0 * (1.0 + c.sqrt()).powi(2) + 0.3;
        for e in check_energies(50, 0.05, hi) {
            let z = Complex64::new(e, 1e-2);
            let sol = solve(&sys, z, one).unwrap();
            quad = quad.max(stieltjes_quadratic_check(c, z, sol.s));
            root = root.max((sol.s - identity_closed_form_s(c, z)).norm());
            shared.solutions.push(sol);
        }
    }
    Outcome {
        pass: quad < 1e-6 && root < 1e-3,
        detail: format!(
            "quadratic residual {quad:.2e} (tol 1e-6), distance to explicit root {root:.2e} (tol 1e-3)"
        ),
    }
}

fn criterion_5(shared: &mut Shared) -> Outcome {
    let one = Complex64::new(1.0, 0.0);
    let mut worst: f64 = 0.0;
    for rho in [0.2, 0.45] {
        let closed = Ma1ClosedForm::new(rho, 0.75).unwrap();
        let fourier = ToeplitzFourier::new(&[rho], 0.75, 1024).unwrap();
        for e in check_energies(50, 0.05, 3.0) {
            let z = Complex64::new(e, 1e-2);
            let a = solve(&closed, z, one).unwrap();
            let b = solve(&fourier, z, one).unwrap();
            worst = worst.max((a.s - b.s).norm());
            shared.solutions.extend([a, b]);
        }
    }
    Outcome {
        pass: worst < 1e-8,
        detail: format!("max |s_closed - s_fourier| = {worst:.2e} (tol 1e-8)"),
    }
}

fn criterion_6(shared: &mut Shared) -> Outcome {
    let sample = |p: usize, n: usize| {
        GaussianSampler::new(&CorrelationModel::identity(p))
            .unwrap()
            .sample(n, SEED, 0)
            .unwrap()
    };
    let esd = kendall_spectrum(&sample(100, 200));
    let curve = mp_affine_curve(0.5, 4000).unwrap();
    let ks = ks_distance(&esd, &curve).unwrap();
    shared.curves.push(("affine MP c=0.5".into(), curve));
    let wide = kendall_spectrum(&sample(200, 100));
    let atom = wide.mass_near(1.0 / 3.0, 1e-6);
    shared
        .curves
        .push(("affine MP c=2".into(), mp_affine_curve(2.0, 4000).unwrap()));
    shared
        .curves
        .push(("MP c=0.5".into(), mp_curve(0.5, 4000).unwrap()));
    shared
        .curves
        .push(("MP c=2".into(), mp_curve(2.0, 4000).unwrap()));
    Outcome {
        pass: ks < 0.05 && (atom - 0.5).abs() <= 0.03,
        detail: format!(
            "KS at (100,200) = {ks:.4} (tol 0.05); mass within 1e-6 of 1/3 at (200,100) = {atom:.3} \
             (target 0.5 +- 0.03; within 0.1: {:.3})",
            wide.mass_near(1.0 / 3.0, 0.1)
        ),
    }
}

fn figure_regime(shared: &mut Shared, model_at: fn(usize) -> CorrelationModel) -> Outcome {
    let grid = GridConfig::default();
    let mut parts = Vec::new();
    let mut pass = true;
    for (s, &shape) in FIG45_SHAPES.iter().enumerate() {
        let fit = fit_shape(model_at, shape, s as u64, SEED, 1, &grid).unwrap();
        pass &= fit.ks < 0.05;
        parts.push(format!("({},{}) {:.4}", shape.0, shape.1, fit.ks));
        let label = format!("{} ({},{})", model_at(shape.0).label(), shape.0, shape.1);
        shared.solutions.extend(fit.lsd.solutions.iter().copied());
        shared.curves.push((label, fit.lsd.curve));
    }
    Outcome {
        pass,
        detail: format!("KS per (p,n): {} (tol 0.05)", parts.join(", ")),
    }
}

fn criterion_7(shared: &mut Shared) -> Outcome {
    for (i, e) in [0.3, 0.34, 1.2, 2.5, 4.0].into_iter().enumerate() {
        let c = [0.5, 1.5][i % 2];
        shared.uniqueness.push((
            format!("MA1(0.5) c={c}"),
            Box::new(Ma1ClosedForm::new(0.5, c).unwrap()),
            Complex64::new(e, 1e-2),
        ));
    }
    figure_regime(shared, |p| CorrelationModel::ma1(0.5, p))
}

fn criterion_8(shared: &mut Shared) -> Outcome {
    for (i, e) in [0.3, 0.34, 1.0, 2.0, 3.5].into_iter().enumerate() {
        let c = [0.75, 2.0][i % 2];
        shared.uniqueness.push((
            format!("band2(0.25) c={c}"),
            Box::new(kspec::stieltjes::Band2::new(0.25, c, 1024).unwrap()),
            Complex64::new(e, 1e-2),
        ));
    }
    figure_regime(shared, |p| CorrelationModel::band_toeplitz2(0.25, p))
}

fn criterion_9(_: &mut Shared) -> Outcome {
    let rows = fig1_rows(200, 100, 100, SEED).unwrap();
    let increasing = rows.windows(2).all(|w| w[1].mean_gap > w[0].mean_gap);
    let ratio = rows[9].mean_gap / rows[0].mean_gap;
    Outcome {
        pass: increasing && ratio >= 10.0,
        detail: format!(
            "strictly increasing: {increasing}; mean gap {:.4} at rho 0, {:.4} at rho 0.9, ratio {ratio:.2} (need >= 10)",
            rows[0].mean_gap, rows[9].mean_gap
        ),
    }
}

fn criterion_10(_: &mut Shared) -> Outcome {
    let mut verdicts: Vec<Verdict> = Vec::new();
    for seed in [SEED, SEED + 1] {
        for rho in [0.0, 0.3, 0.5, 0.7] {
            verdicts.push(oracles::grothendieck_mc(rho, 1_000_000, seed).unwrap());
        }
        for rho in [0.0, 0.6] {
            verdicts.push(oracles::esscher_mc(rho, 1_000_000, seed).unwrap());
        }
        verdicts.push(oracles::var_a12a13_check(&CorrelationModel::identity(9), 200_000, seed).unwrap());
        verdicts.push(oracles::var_a12a13_check(&CorrelationModel::ma1(0.5, 10), 200_000, seed).unwrap());
        verdicts.push(
            oracles::poincare_bound_check(
                &CorrelationModel::identity(5),
                &DMatrix::identity(5, 5),
                100_000,
                seed,
            )
            .unwrap(),
        );
        verdicts.push(
            oracles::poincare_bound_check(
                &CorrelationModel::ma1(0.4, 20),
                &oracles::random_orthogonal(20, seed),
                100_000,
                seed,
            )
            .unwrap(),
        );
        let report =
            oracles::error_term_bounds_check(&CorrelationModel::identity(100), 100, 100, seed).unwrap();
        verdicts.extend(report.verdicts().into_iter().cloned());
    }
    let failed: Vec<String> = verdicts.iter().filter(|v| !v.pass).map(Verdict::line).collect();
    Outcome {
        pass: failed.is_empty(),
        detail: if failed.is_empty() {
            format!(
                "{} oracle verdicts over two seeds, all within threshold",
                verdicts.len()
            )
        } else {
            format!("failed: {}", failed.join("; "))
        },
    }
}

fn criterion_11(shared: &mut Shared) -> Outcome {
    let bad: Vec<&StieltjesSolution> = shared
        .solutions
        .iter()
        .filter(|s| {
            !(s.x.im <= 1e-12 && s.s.im >= -1e-12 && s.s.norm() <= 1.0 / s.z.im && s.residual <= 1e-10)
        })
        .collect();
    let mut spread: f64 = 0.0;
    for (_, sys, z) in &shared.uniqueness {
        spread = spread.max(uniqueness_spread(sys.as_ref(), *z).unwrap());
    }
    Outcome {
        pass: bad.is_empty() && spread < 1e-8 && shared.uniqueness.len() == 10,
        detail: format!(
            "{} of {} converged points violate a contract; 8-restart spread {spread:.2e} over {} z-points (tol 1e-8)",
            bad.len(),
            shared.solutions.len(),
            shared.uniqueness.len()
        ),
    }
}

fn criterion_12(shared: &mut Shared) -> Outcome {
    let off: Vec<String> = shared
        .curves
        .iter()
        .filter(|(_, c)| (c.total_mass() - 1.0).abs() > 1e-2)
        .map(|(l, c)| format!("{l}: {:.4}", c.total_mass()))
        .collect();
    let worst = shared
        .curves
        .iter()
        .map(|(_, c)| (c.total_mass() - 1.0).abs())
        .fold(0.0, f64::max);
    Outcome {
        pass: off.is_empty(),
        detail: format!(
            "{} curves, max |mass - 1| = {worst:.2e} (tol 1e-2){}",
            shared.curves.len(),
            if off.is_empty() {
                String::new()
            } else {
                format!("; off: {}", off.join(", "))
            }
        ),
    }
}

fn main() {
    type Check = fn(&mut Shared) -> Outcome;
    let criteria: [(&str, Check, u64); 12] = [
        (
            "fast and naive Kendall kernels agree bit-exactly",
            criterion_1,
            10,
        ),
        ("Hoeffding decomposition is exact", criterion_2, 30),
        ("monotone transforms leave K_n unchanged", criterion_3, 10),
        ("identity triple matches the closed form", criterion_4, 300),
        (
            "MA(1) closed form matches the Fourier formulation",
            criterion_5,
            60,
        ),
        ("identity ESD against the affine MP law", criterion_6, 60),
        ("MA(1) ESD against the solver law", criterion_7, 600),
        ("band-Toeplitz ESD against the solver law", criterion_8, 600),
        ("gap grows with compound-symmetry correlation", criterion_9, 600),
        ("Monte Carlo identity oracles", criterion_10, 300),
        ("solver contracts and uniqueness", criterion_11, 120),
        ("density curves are normalized", criterion_12, 60),
    ];
    let mut shared = Shared::default();
    let mut unexpected = Vec::new();
    for (i, (name, check, budget)) in criteria.iter().enumerate() {
        let k = i + 1;
        let start = Instant::now();
        let outcome = check(&mut shared);
        let elapsed = start.elapsed();
        let in_time = elapsed <= Duration::from_secs(*budget);
        let pass = outcome.pass && in_time;
        let note = if !pass && KNOWN_RED.contains(&k) {
            " [known red]"
        } else {
            ""
        };
        println!(
            "criterion {k:>2} {} {name}: {}; {:.1}s (budget {budget}s){note}",
            if pass { "PASS" } else { "FAIL" },
            outcome.detail,
            elapsed.as_secs_f64()
        );
        if !pass && !KNOWN_RED.contains(&k) {
            unexpected.push(k);
        }
    }
    if !unexpected.is_empty() {
        eprintln!("unexpected failures: {unexpected:?}");
        std::process::exit(1);
    }
}
