use fdm_core::geodesics::{graph_geodesics, pairwise_euclidean};
use fdm_core::kernels::{FdmConfig, KernelFamily};
use fdm_core::manifolds::{ManifoldTag, PointCloud};
use fdm_core::ridge::{krr_fit, RidgePath};
use fdm_core::spectral::build_stack;
use fdm_core::validation::{align_and_rmse, power_law_fit};
use fdm_core::Execution;
use ndarray::{Array1, Array2};
use proptest::prelude::*;

fn cloud_strategy(max_n: usize) -> impl Strategy<Value = PointCloud> {
    (4..max_n).prop_flat_map(|n| {
        prop::collection::vec(-1.0f64..1.0, 2 * n).prop_map(move |v| {
            PointCloud::new(Array2::from_shape_vec((n, 2), v).unwrap(), None, ManifoldTag::External).unwrap()
        })
    })
}

fn spd_strategy(n: usize) -> impl Strategy<Value = Array2<f64>> {
    prop::collection::vec(-1.0f64..1.0, n * n).prop_map(move |v| {
        let b = Array2::from_shape_vec((n, n), v).unwrap();
        b.t().dot(&b) + Array2::<f64>::eye(n) * 0.1
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn graph_geodesics_are_a_metric_above_chords(cloud in cloud_strategy(14)) {
        let e = pairwise_euclidean(&cloud).unwrap();
        let g = graph_geodesics(&e, 3.0, Execution::Sequential).unwrap();
        let n = e.len();
        for i in 0..n {
            prop_assert_eq!(g.values[[i, i]], 0.0);
            for j in 0..n {
                prop_assert!(g.values[[i, j]] >= e.values[[i, j]] - 1e-12);
                prop_assert_eq!(g.values[[i, j]], g.values[[j, i]]);
                for k in 0..n {
                    prop_assert!(g.values[[i, j]] <= g.values[[i, k]] + g.values[[k, j]] + 1e-12);
                }
            }
        }
    }

    #[test]
    fn kernel_profiles_decrease(s in 0.0f64..10.0, ds in 1e-6f64..1.0, beta in 0.2f64..4.0) {
        let family = if beta >= 2.0 {
            KernelFamily::Local { alpha: beta / (beta - 1.0), dim: 1 }
        } else {
            KernelFamily::Nonlocal { dim: 1, beta }
        };
        prop_assert!(family.profile(s + ds) < family.profile(s));
        prop_assert!(family.profile(s) <= 1.0);
    }

    #[test]
    fn markov_matrix_is_row_stochastic(cloud in cloud_strategy(12), eps in 0.05f64..2.0) {
        let e = pairwise_euclidean(&cloud).unwrap();
        let config = FdmConfig::new(2.0, eps).with_dim(2).with_num_eigs(2);
        let stack = build_stack(&config, &e, None).unwrap();
        for row in stack.h.rows() {
            prop_assert!((row.sum() - 1.0).abs() < 1e-12);
            prop_assert!(row.iter().all(|v| *v > 0.0));
        }
        for i in 0..stack.len() {
            for j in 0..stack.len() {
                prop_assert!((stack.k_hat[[i, j]] - stack.k_hat[[j, i]]).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn krr_is_linear_in_targets(
        k in spd_strategy(5),
        y1 in prop::collection::vec(-1.0f64..1.0, 5),
        y2 in prop::collection::vec(-1.0f64..1.0, 5),
        a in -3.0f64..3.0,
        delta in 1e-4f64..1.0,
    ) {
        let (y1, y2) = (Array1::from(y1), Array1::from(y2));
        let combo = &y1 * a + &y2;
        let lhs = krr_fit(k.view(), combo.view(), delta).unwrap();
        let rhs = krr_fit(k.view(), y1.view(), delta).unwrap() * a + krr_fit(k.view(), y2.view(), delta).unwrap();
        for (p, q) in lhs.iter().zip(rhs.iter()) {
            prop_assert!((p - q).abs() < 1e-8 * (1.0 + q.abs()));
        }
    }

    #[test]
    fn ridge_path_shrinks_with_delta(
        k in spd_strategy(6),
        y in prop::collection::vec(-1.0f64..1.0, 6),
        d1 in 1e-3f64..1.0,
        factor in 1.5f64..100.0,
    ) {
        let y = Array1::from(y);
        let path = RidgePath::new(k.view(), y.view(), Execution::Sequential).unwrap();
        let small = path.solve(d1).unwrap();
        let large = path.solve(d1 * factor).unwrap();
        prop_assert!(large.dot(&large) <= small.dot(&small) * (1.0 + 1e-9));
    }

    #[test]
    fn alignment_ignores_recombination(
        truth in prop::collection::vec(-1.0f64..1.0, 20),
        mix in prop::collection::vec(-1.0f64..1.0, 4),
    ) {
        let truth = Array2::from_shape_vec((10, 2), truth).unwrap();
        let m = Array2::from_shape_vec((2, 2), mix).unwrap();
        let det = m[[0, 0]] * m[[1, 1]] - m[[0, 1]] * m[[1, 0]];
        let gram = truth.t().dot(&truth);
        let gdet = gram[[0, 0]] * gram[[1, 1]] - gram[[0, 1]] * gram[[1, 0]];
        prop_assume!(det.abs() > 0.1 && gdet > 1e-2);
        let est = truth.dot(&m);
        let (_, rmse) = align_and_rmse(est.view(), truth.view()).unwrap();
        prop_assert!(rmse.iter().all(|r| *r < 1e-8));
    }

    #[test]
    fn power_law_recovers_exponent(p in 0.3f64..3.0, scale in 0.1f64..10.0) {
        let lambdas: Vec<f64> = (0..12).map(|j| if j == 0 { 0.0 } else { scale * (j as f64).powf(p) }).collect();
        let fit = power_law_fit(&lambdas, 1, 11).unwrap();
        prop_assert!((fit.slope - p).abs() < 1e-10);
        prop_assert!((fit.r2 - 1.0).abs() < 1e-10);
    }
}
