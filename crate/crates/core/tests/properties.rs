//! Invariants checked on randomized inputs.

use proptest::prelude::*;

use sheq_core::experiments::{fit_rate, StudyConfig, StudyKind};
use sheq_core::grid::TimeGrid;
use sheq_core::noise::{CovarianceSpec, NoisePath};
use sheq_core::spectral::{
    euler_square_sum, euler_square_sum_limit, spectral_backward_euler, ModelParams, Nonlinearity,
    SpectralField,
};
use sheq_core::wavelet::{analyze, coarsen, is_tree, synthesize, WaveletCoeffs};

fn nodal(j: u32) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-10.0f64..10.0, (1usize << j) - 1)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn transform_round_trip((j, v) in (3u32..10).prop_flat_map(|j| (Just(j), nodal(j)))) {
        let back = synthesize(j, &analyze(j, &v).unwrap()).unwrap();
        for (a, b) in v.iter().zip(&back) {
            prop_assert!((a - b).abs() <= 1e-11 * (1.0 + a.abs()));
        }
    }

    #[test]
    fn transform_is_linear(
        (j, u, v) in (3u32..8).prop_flat_map(|j| (Just(j), nodal(j), nodal(j))),
        s in -3.0f64..3.0,
    ) {
        let w: Vec<f64> = u.iter().zip(&v).map(|(a, b)| a + s * b).collect();
        let (du, dv, dw) = (analyze(j, &u).unwrap(), analyze(j, &v).unwrap(), analyze(j, &w).unwrap());
        for i in 0..dw.len() {
            prop_assert!((dw[i] - du[i] - s * dv[i]).abs() <= 1e-9 * (1.0 + dw[i].abs()));
        }
    }

    #[test]
    fn coarsening_keeps_a_tree_within_tolerance(
        (j, v) in (3u32..8).prop_flat_map(|j| (Just(j), nodal(j))),
        frac in 0.0f64..1.0,
    ) {
        let d = analyze(j, &v).unwrap();
        let full = WaveletCoeffs::tree_from_dense(&d, 0.0);
        let tol = frac * full.l2_norm();
        let kept = coarsen(&full, tol);
        prop_assert!(is_tree(&kept.support()));
        let kd = kept.to_dense(d.len()).unwrap();
        let dropped: f64 = d.iter().zip(&kd).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
        prop_assert!(dropped <= tol * (1.0 + 1e-12) + 1e-12);
        prop_assert!(kept.len() <= full.len());
    }

    #[test]
    fn refined_paths_sum_to_coarse_increments(
        seed in any::<u64>(),
        steps in prop::sample::select(vec![2usize, 4, 8, 16]),
        factor in prop::sample::select(vec![2usize, 4, 16]),
    ) {
        let spec = CovarianceSpec::new(1.2, 16, 1.0).unwrap();
        let coarse = NoisePath::sample(&spec, &TimeGrid::new(1.0, steps).unwrap(), seed);
        let fine = coarse.refine(factor).unwrap();
        prop_assert_eq!(coarse.check_refines_to(&fine).unwrap(), factor);
        for n in 1..=steps {
            let want = coarse.increments(n);
            let mut got = vec![0.0; want.len()];
            for m in (n - 1) * factor + 1..=n * factor {
                for (g, x) in got.iter_mut().zip(fine.increments(m)) {
                    *g += x;
                }
            }
            for (a, b) in want.iter().zip(&got) {
                prop_assert!((a - b).abs() <= 1e-12 * (1.0 + a.abs()));
            }
        }
    }

    #[test]
    fn noise_free_linear_euler_contracts(
        coeffs in prop::collection::vec(-1.0f64..1.0, 16),
        steps in 1usize..40,
    ) {
        let params = ModelParams::new(16, Nonlinearity::Zero).unwrap();
        let grid = TimeGrid::new(1.0, steps).unwrap();
        let path = NoisePath::sample(&CovarianceSpec::zero(16), &grid, 0);
        let u0 = SpectralField::new(coeffs).unwrap();
        let traj = spectral_backward_euler(&params, &grid, &path, &u0).unwrap();
        for w in traj.states.windows(2) {
            prop_assert!(w[1].l2_norm() <= w[0].l2_norm() * (1.0 + 1e-14));
        }
    }

    #[test]
    fn euler_partial_sums_approach_limit_from_below(
        lambda in 0.5f64..200.0,
        tau in 0.001f64..0.2,
        terms in 1usize..2000,
    ) {
        let s = euler_square_sum(lambda, tau, terms);
        let limit = euler_square_sum_limit(lambda, tau);
        prop_assert!(s <= limit * (1.0 + 1e-12));
        prop_assert!(limit <= 0.5 / lambda);
        prop_assert!(euler_square_sum(lambda, tau, terms + 1) >= s);
    }

    #[test]
    fn geometric_errors_fit_exactly(rate in -1.0f64..3.0, scale in 1e-6f64..1e3, start in 0u32..6) {
        let levels: Vec<f64> = (start..start + 5).map(f64::from).collect();
        let errors: Vec<f64> = levels.iter().map(|l| scale * 2f64.powf(-rate * l)).collect();
        let fit = fit_rate(&errors, &levels).unwrap();
        prop_assert!((fit.slope - rate).abs() < 1e-9);
        prop_assert!(fit.ci_lo <= fit.slope + 1e-9 && fit.slope <= fit.ci_hi + 1e-9);
    }

    #[test]
    fn config_echo_parses_back(
        samples in 1usize..500,
        seed in any::<u64>(),
        beta in prop::sample::select(vec![0.5, 1.0, 2.0]),
        kind in prop::sample::select(vec![
            StudyKind::Time,
            StudyKind::Space,
            StudyKind::Tolerance,
            StudyKind::Gronwall,
            StudyKind::Full,
        ]),
    ) {
        let mut cfg = StudyConfig::defaults(kind);
        cfg.samples = samples;
        cfg.seed = seed;
        cfg.beta = beta;
        cfg.rho = sheq_core::experiments::default_rho(beta);
        let back = StudyConfig::parse(&cfg.echo(), None).unwrap();
        prop_assert_eq!(back.hash(), cfg.hash());
    }
}
