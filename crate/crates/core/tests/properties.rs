use bslq_core::linalg::{self, Matrix};
use bslq_core::oracle::{self, VerifyOptions};
use bslq_core::random::{random_spec, RandomShape};
use bslq_core::riccati::inversion_lemma_gap;
use bslq_core::solver::{Route, SolveOptions};
use bslq_core::tree::{cond_drift, expect_inner, AdaptedProcess};
use bslq_core::{solve, TreeProblem};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn shape() -> impl Strategy<Value = RandomShape> {
    (1usize..=4, 1usize..=4, 1usize..=3, any::<bool>()).prop_map(|(horizon, state_dim, control_dim, path_dependent)| {
        RandomShape {
            horizon,
            state_dim,
            control_dim,
            path_dependent,
        }
    })
}

fn problem(seed: u64, shape: RandomShape) -> TreeProblem {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    TreeProblem::new(&random_spec(&mut rng, shape)).unwrap()
}

fn level(dim: usize, atoms: usize, values: &[f64]) -> Matrix {
    Matrix::from_fn(dim, atoms, |i, j| values[(i * atoms + j) % values.len()])
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn tower_property(t in 1usize..6, values in prop::collection::vec(-10.0f64..10.0, 1..64)) {
        let next = level(2, 1 << t, &values);
        let drift = cond_drift(&next).unwrap();
        let ones_next = Matrix::from_element(1, 1 << t, 1.0);
        let ones = Matrix::from_element(1, 1 << (t - 1), 1.0);
        for i in 0..2 {
            let a = expect_inner(&next.rows(i, 1).into_owned(), &ones_next);
            let b = expect_inner(&drift.rows(i, 1).into_owned(), &ones);
            prop_assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn bsde_is_linear(seed in any::<u64>(), shape in shape(), scale in -3.0f64..3.0) {
        let p = problem(seed, shape);
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 1);
        let u = oracle::random_control(&p, &mut rng);
        let y = oracle::evaluate_bsde_with(&p, &p.xi, &u, &p.q).unwrap();
        let y2 = oracle::evaluate_bsde_with(&p, &(&p.xi * scale), &u.scaled(scale), &p.q.scaled(scale)).unwrap();
        prop_assert!(y2.max_abs_diff(&y.scaled(scale)).unwrap() <= 1e-12 * (1.0 + y.max_abs() * scale.abs()));
    }

    #[test]
    fn riccati_is_symmetric_psd(seed in any::<u64>(), shape in shape()) {
        let p = problem(seed, shape);
        let sol = solve(&p, SolveOptions::default()).unwrap();
        for route in [&sol.decoupled, &sol.transformed] {
            for s in &route.riccati.sigma {
                prop_assert!(linalg::asymmetry(s) <= 1e-12 * (1.0 + s.amax()));
                prop_assert!(linalg::min_eigenvalue(s) >= -1e-10 * (1.0 + s.amax()));
            }
            prop_assert!(route.riccati.max_gamma_asymmetry() <= 1e-10);
        }
    }

    #[test]
    fn inversion_lemma(values in prop::collection::vec(-2.0f64..2.0, 18)) {
        let a = Matrix::from_row_slice(3, 3, &values[..9]);
        let d = Matrix::from_row_slice(3, 3, &values[9..]);
        let sigma = &a * a.transpose();
        let w = &d * d.transpose();
        prop_assert!(inversion_lemma_gap(&sigma, &w).unwrap() < 1e-9);
    }

    #[test]
    fn random_specs_verify(seed in any::<u64>(), shape in shape()) {
        let p = problem(seed, shape);
        let sol = solve(&p, SolveOptions::default()).unwrap();
        let options = VerifyOptions { seed, homogeneous_samples: 20, expansion_samples: 4, ..VerifyOptions::default() };
        let report = oracle::verify(&p, &sol, &options).unwrap();
        let failed: Vec<_> = report.failed().map(|c| c.name).collect();
        prop_assert!(report.pass, "failed checks {:?}", failed);
    }

    #[test]
    fn routes_share_h_and_values(seed in any::<u64>(), shape in shape()) {
        let p = problem(seed, shape);
        let d = solve(&p, SolveOptions::default()).unwrap();
        let t = solve(&p, SolveOptions { route: Route::Transformed, ..SolveOptions::default() }).unwrap();
        prop_assert_eq!(&d.coefficients.h, &t.coefficients.h);
        prop_assert_eq!(d.values, t.values);
    }

    #[test]
    fn stacking_round_trips(dim in 1usize..4, len in 1usize..5, values in prop::collection::vec(-5.0f64..5.0, 1..32)) {
        let levels = (0..len).map(|t| level(dim, 1 << t, &values)).collect();
        let p = AdaptedProcess::new(dim, 0, levels).unwrap();
        let back = AdaptedProcess::unstack(dim, 0, len, &p.stacked()).unwrap();
        prop_assert_eq!(back, p);
    }
}
