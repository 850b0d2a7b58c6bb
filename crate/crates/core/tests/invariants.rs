use num_complex::Complex64;
use proptest::prelude::*;

use kspec::estimators::{hoeffding_pieces, kendall_matrix_fast, pearson_matrix, spearman_matrix};
use kspec::models::{sigma_triple, CorrelationModel, FactorScale};
use kspec::sampling::{monotone_transform, sample_mvn, Transform};
use kspec::spectra::{
    histogram, ks_distance, Atom, Bins, DensityCurve, EmpiricalSpectrum, MatrixKind, SpectrumSource,
};
use kspec::stieltjes::{identity_closed_form_s, solve, FinitePTrace, Ma1ClosedForm};

fn model_strategy() -> impl Strategy<Value = CorrelationModel> {
    let p = 2usize..16;
    prop_oneof![
        p.clone().prop_map(CorrelationModel::identity),
        (0.0..0.9f64, p.clone()).prop_map(|(r, p)| CorrelationModel::compound_symmetry(r, p)),
        (-0.5..=0.5f64, p.clone()).prop_map(|(r, p)| CorrelationModel::ma1(r, p)),
        (-0.24..0.3f64, p.clone()).prop_map(|(r, p)| CorrelationModel::band_toeplitz2(r, p)),
        (any::<u64>(), p).prop_map(|(s, p)| CorrelationModel::factor(2, FactorScale::OverP, s, p)),
    ]
}

fn kendall_spectrum(model: &CorrelationModel, n: usize, seed: u64) -> EmpiricalSpectrum {
    let x = sample_mvn(model, n, seed).unwrap();
    EmpiricalSpectrum::from_matrix(
        &kendall_matrix_fast(&x).unwrap().matrix,
        SpectrumSource {
            model: Some(model.clone()),
            n,
            p: model.p,
            seed,
            kind: MatrixKind::Kendall,
        },
    )
    .unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn kendall_trace_is_p(model in model_strategy(), n in 2usize..40, seed in any::<u64>()) {
        let esd = kendall_spectrum(&model, n, seed);
        let sum: f64 = esd.eigenvalues.iter().sum();
        prop_assert!((sum - model.p as f64).abs() < 1e-8);
        prop_assert!(esd.eigenvalues[0] >= -1e-10);
    }

    #[test]
    fn ranks_only(
        model in model_strategy(),
        n in 2usize..30,
        seed in any::<u64>(),
        scale in 0.01..100.0f64,
        shift in -10.0..10.0f64,
    ) {
        let x = sample_mvn(&model, n, seed).unwrap();
        let k = kendall_matrix_fast(&x).unwrap().matrix;
        for t in [Transform::Cube, Transform::Exp, Transform::Affine { scale, shift }] {
            prop_assert_eq!(&kendall_matrix_fast(&monotone_transform(&x, t)).unwrap().matrix, &k);
        }
        // rank-based too, but not bit-identical to K_n
        let s = spearman_matrix(&x);
        let s2 = spearman_matrix(&monotone_transform(&x, Transform::Exp));
        if let (Ok(a), Ok(b)) = (s, s2) {
            prop_assert!((a - b).amax() < 1e-12);
        }
    }

    #[test]
    fn decomposition_exact(model in model_strategy(), n in 2usize..30, seed in any::<u64>()) {
        let x = sample_mvn(&model, n, seed).unwrap();
        let h = hoeffding_pieces(&x, &sigma_triple(&model).unwrap()).unwrap();
        let k = kendall_matrix_fast(&x).unwrap().matrix;
        prop_assert!((k - &h.m1 - &h.m2 - h.m2.transpose() - &h.m3).amax() < 1e-12);
    }

    #[test]
    fn correlation_baselines_are_correlations(model in model_strategy(), n in 3usize..30, seed in any::<u64>()) {
        let x = sample_mvn(&model, n, seed).unwrap();
        for m in [pearson_matrix(&x).unwrap(), spearman_matrix(&x).unwrap()] {
            for i in 0..model.p {
                prop_assert_eq!(m[(i, i)], 1.0);
            }
            prop_assert!(m.amax() <= 1.0);
            prop_assert_eq!(&m, &m.transpose());
        }
    }

    #[test]
    fn ks_ignores_zero_mass_atoms(
        model in model_strategy(),
        n in 5usize..30,
        seed in any::<u64>(),
        loc in -1.0..5.0f64,
    ) {
        let esd = kendall_spectrum(&model, n, seed);
        let grid: Vec<f64> = (0..=400).map(|i| i as f64 * 0.01).collect();
        let density = grid.iter().map(|x| if *x < 1.0 { 1.0 } else { 0.0 }).collect::<Vec<_>>();
        let plain = DensityCurve::new(grid.clone(), density.clone(), vec![]).unwrap();
        let padded = DensityCurve::new(grid, density, vec![Atom { location: loc, mass: 0.0 }]).unwrap();
        prop_assert_eq!(ks_distance(&esd, &plain).unwrap(), ks_distance(&esd, &padded).unwrap());
    }

    #[test]
    fn histograms_integrate_to_one(model in model_strategy(), n in 2usize..30, seed in any::<u64>(), bins in 1usize..60) {
        let esd = kendall_spectrum(&model, n, seed);
        prop_assert!((histogram(&esd, Bins::Count(bins)).integral() - 1.0).abs() < 1e-12);
        prop_assert!((histogram(&esd, Bins::Auto).integral() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn solver_stays_on_branch(
        rho in -0.5..=0.5f64,
        c in 0.1..4.0f64,
        e in -0.5..5.0f64,
        eta in 1e-3..1.0f64,
    ) {
        let z = Complex64::new(e, eta);
        let sol = solve(&Ma1ClosedForm::new(rho, c).unwrap(), z, Complex64::new(1.0, 0.0)).unwrap();
        prop_assert!(sol.x.im <= 1e-12);
        prop_assert!(sol.s.im >= -1e-12);
        prop_assert!(sol.s.norm() <= 1.0 / eta);
        prop_assert!(sol.residual <= 1e-10);
    }

    #[test]
    fn identity_plug_in_is_the_closed_form(c in 0.1..4.0f64, e in -0.5..5.0f64, eta in 1e-2..1.0f64) {
        let t = sigma_triple(&CorrelationModel::identity(3)).unwrap();
        let z = Complex64::new(e, eta);
        let sol = solve(&FinitePTrace::new(&t, c).unwrap(), z, Complex64::new(1.0, 0.0)).unwrap();
        prop_assert!((sol.s - identity_closed_form_s(c, z)).norm() < 1e-8);
    }
}
