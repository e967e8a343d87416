mod common;

use std::f64::consts::PI;

use common::{brute_force_shortest, charpoly_roots, edges_of, random_connected_graph, random_symmetric, simpson};
use fdm_core::geodesics::{all_pairs_shortest_paths, SparseGraph};
use fdm_core::kernels::EigenMethod;
use fdm_core::linalg::symmetric_top;
use fdm_core::manifolds::{
    circle_random, frac_laplacian_constant, interval_square_coefficient, regional_frac_laplacian_half,
    spectral_frac_laplacian_interval,
};
use fdm_core::rng::CounterRng;
use fdm_core::Execution;

/// Principal value of `int_0^1 (x^2 - y^2) / (x - y)^2 dy`: the symmetric part
/// around `x` is paired, the rest is a regular integral.
fn regional_pv(x: f64) -> f64 {
    let r = x.min(1.0 - x);
    let paired = |h: f64| {
        let f = |y: f64| (x + y) / (x - y);
        f(x - h) + f(x + h)
    };
    // the paired integrand is smooth at h = 0 but cancels badly there
    let h0 = 1e-4;
    let near = simpson(&paired, h0, r, 1e-12) + h0 * paired(h0);
    let far = |y: f64| (x + y) / (x - y);
    let rest = if x < 0.5 { simpson(&far, 2.0 * x, 1.0, 1e-12) } else { simpson(&far, 0.0, 2.0 * x - 1.0, 1e-12) };
    frac_laplacian_constant(1, 0.5) * (near + rest)
}

#[test]
fn regional_formula_matches_principal_value_quadrature() {
    for x in [0.1, 0.25, 0.5, 0.75, 0.9] {
        let exact = regional_frac_laplacian_half(x).unwrap();
        assert!((exact - regional_pv(x)).abs() < 1e-6, "x = {x}");
    }
    let c = frac_laplacian_constant(1, 0.5);
    assert!((regional_frac_laplacian_half(0.25).unwrap() - c * (-1.0 + 0.5 * (1.0f64 / 3.0).ln())).abs() < 1e-15);
    assert!((regional_frac_laplacian_half(0.5).unwrap() + c).abs() < 1e-15);
    assert!(regional_frac_laplacian_half(1.0 - 1e-12).unwrap() > 10.0);
}

#[test]
fn cosine_coefficient_matches_quadrature() {
    for k in 1..=4usize {
        let f = |x: f64| x * x * (PI * k as f64 * x).cos();
        let oracle = simpson(&f, 0.0, 1.0, 1e-13) / 0.5;
        assert!((interval_square_coefficient(k) - oracle).abs() < 1e-10, "k = {k}");
        // a constant is orthogonal to every cosine mode
        let c = |x: f64| (PI * k as f64 * x).cos();
        assert!(simpson(&c, 0.0, 1.0, 1e-13).abs() < 1e-10);
    }
}

#[test]
fn spectral_series_tail_obeys_abel_bound() {
    // For s = 1/2 the weights are 4 (-1)^k / (pi k); summation by parts bounds
    // the tail beyond M by 4 / (pi (M + 1) sin(pi (1 - x) / 2)) near x = 1 and
    // by 4 / (pi (M + 1) cos(pi (1 - x) / 2)) near x = 0.
    let x: Vec<f64> = (0..=180).map(|i| 0.05 + 0.9 * i as f64 / 180.0).collect();
    let a = spectral_frac_laplacian_interval(&x, 0.5, 500).unwrap();
    let b = spectral_frac_laplacian_interval(&x, 0.5, 2000).unwrap();
    for ((xi, p), q) in x.iter().zip(&a).zip(&b) {
        let half = PI * (1.0 - xi) / 2.0;
        let bound = 4.0 / (PI * 501.0 * half.sin().min(half.cos()));
        assert!((p - q).abs() <= bound, "x = {xi}");
    }
    // closed form of the s = 1/2 series: -(4/pi) log(2 cos(pi x / 2))
    for (xi, v) in x.iter().zip(&b) {
        let closed = -(4.0 / PI) * (2.0 * (PI * xi / 2.0).cos()).ln();
        let half = PI * (1.0 - xi) / 2.0;
        let bound = 8.0 / (PI * 2001.0 * half.sin().min(half.cos()));
        assert!((v - closed).abs() <= bound, "x = {xi}");
    }
}

#[test]
fn random_circle_is_balanced() {
    for seed in [1u64, 2, 3, 99] {
        let c = circle_random(500, seed).unwrap();
        let mean = c.ambient.mean_axis(ndarray::Axis(0)).unwrap();
        assert!(mean.dot(&mean).sqrt() < 0.2);
    }
}

#[test]
fn shortest_paths_match_enumeration() {
    let mut rng = CounterRng::new(2024);
    for trial in 0..20 {
        let n = 2 + trial % 7;
        let w = random_connected_graph(n, &mut rng);
        let g = SparseGraph::from_edges(n, &edges_of(&w)).unwrap();
        let d = all_pairs_shortest_paths(&g).unwrap();
        let oracle = brute_force_shortest(n, &w);
        for (x, y) in d.values.iter().zip(oracle.iter()) {
            assert!((x - y).abs() <= 1e-12 * y.max(1.0), "trial {trial}");
        }
    }
}

#[test]
fn eigenvalues_match_characteristic_polynomial() {
    let mut rng = CounterRng::new(77);
    for n in 2..=8 {
        let a = random_symmetric(n, &mut rng);
        let (vals, _) = symmetric_top(a.view(), n, EigenMethod::Dense, Execution::Sequential).unwrap();
        let oracle = charpoly_roots(&a);
        for (x, y) in vals.iter().zip(&oracle) {
            assert!((x - y).abs() < 1e-9, "n = {n}: {vals:?} vs {oracle:?}");
        }
    }
}
