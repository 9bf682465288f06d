use isumap_core::embedding::stress_gradient;
use isumap_core::evaluation::pair_sets_index;
use isumap_core::geodesics::dijkstra_all_pairs;
use isumap_core::local_metric::build_star_graphs;
use isumap_core::neighbors::knn;
use isumap_core::{DenseMetric, LocalMetricConfig, NeighborGraph, PointCloud, SigmaMode, SparseMetric, TConorm};
use isumap_testkit as tk;
use proptest::prelude::*;

fn cloud(n: usize, dim: usize, seed: u64) -> PointCloud {
    PointCloud::euclidean(tk::random_points(n, dim, 10.0, seed))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn knn_matches_full_sort(n in 3usize..80, dim in 1usize..5, seed in any::<u64>(), kf in 0.0f64..1.0) {
        let k = 1 + ((n - 2) as f64 * kf) as usize;
        let pc = cloud(n, dim, seed);
        let got = knn(&pc, k).unwrap();
        let (idx, dist) = tk::brute_force_knn(&tk::distance_matrix(pc.points.view()), k);
        prop_assert_eq!(got.indices, idx);
        prop_assert_eq!(got.distances, dist);
    }

    #[test]
    fn knn_is_permutation_invariant(n in 5usize..60, seed in any::<u64>()) {
        let k = 4;
        let pc = cloud(n, 3, seed);
        let mut order: Vec<usize> = (0..n).collect();
        order.reverse();
        order.rotate_left((seed % n as u64) as usize);
        let permuted = pc.select(&order);
        let base = knn(&pc, k).unwrap();
        let perm = knn(&permuted, k).unwrap();
        for (p, &orig) in order.iter().enumerate() {
            let mut a: Vec<usize> = base.indices.row(orig).to_vec();
            let mut b: Vec<usize> = perm.indices.row(p).iter().map(|&q| order[q]).collect();
            a.sort();
            b.sort();
            prop_assert_eq!(a, b);
        }
    }

    #[test]
    fn tconorm_axioms(a in 0.0f64..=1.0, b in 0.0f64..=1.0, c in 0.0f64..=1.0) {
        for t in TConorm::ALL {
            let f = |x: f64, y: f64| t.fuzzy(x, y).unwrap();
            prop_assert!((f(a, b) - f(b, a)).abs() <= 1e-12);
            prop_assert!((f(f(a, b), c) - f(a, f(b, c))).abs() <= 1e-12);
            prop_assert!((f(a, 0.0) - a).abs() <= 1e-12);
            let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
            prop_assert!(f(lo, c) <= f(hi, c) + 1e-12);
            prop_assert!((0.0..=1.0).contains(&f(a, b)));
        }
    }

    #[test]
    fn metric_form_identity_is_infinity(a in 0.0f64..50.0) {
        for t in TConorm::ALL {
            prop_assert_eq!(t.metric(a, f64::INFINITY).unwrap(), a);
            prop_assert_eq!(t.metric(f64::INFINITY, a).unwrap(), a);
            prop_assert!(t.metric(a, a).unwrap() <= a);
        }
    }

    #[test]
    fn kth_mode_is_scale_invariant(n in 10usize..60, seed in any::<u64>(), e in -8i32..8, c in 0.01f64..100.0) {
        let k = 6;
        let cfg = LocalMetricConfig::default();
        let pc = cloud(n, 3, seed);
        let base = build_star_graphs(&pc, k, &cfg).unwrap();
        // Powers of two scale every intermediate exactly.
        let exact = build_star_graphs(&PointCloud::euclidean(&pc.points * 2f64.powi(e)), k, &cfg).unwrap();
        prop_assert_eq!(&exact.local_dist, &base.local_dist);
        let scaled = build_star_graphs(&PointCloud::euclidean(&pc.points * c), k, &cfg).unwrap();
        prop_assert!(tk::max_abs_diff(&scaled.local_dist, &base.local_dist) <= 1e-12);
    }

    #[test]
    fn rho_pulls_nearest_neighbor_to_zero(n in 10usize..60, seed in any::<u64>()) {
        let g = build_star_graphs(&cloud(n, 2, seed), 5, &LocalMetricConfig::default()).unwrap();
        prop_assert!(g.local_dist.column(0).iter().all(|&d| d == 0.0));
        prop_assert!(g.local_dist.column(4).iter().all(|&d| d == 1.0));
    }

    #[test]
    fn geodesics_form_a_metric(n in 2usize..40, p in 0.05f64..0.6, seed in any::<u64>()) {
        let sm = tk::random_sparse_graph(n, p, 10.0, seed);
        let d = dijkstra_all_pairs(&sm, 1).unwrap().dist;
        let bf = tk::bellman_ford_all_pairs(n, &tk::edges(&sm));
        prop_assert_eq!(&d, &bf);
        for i in 0..n {
            prop_assert_eq!(d[[i, i]], 0.0);
            for j in 0..n {
                prop_assert_eq!(d[[i, j]], d[[j, i]]);
                for m in 0..n {
                    prop_assert!(d[[i, j]] <= d[[i, m]] + d[[m, j]] + 1e-9);
                }
            }
        }
        for (i, j, w) in sm.iter() {
            prop_assert!(d[[i, j]] <= w);
        }
    }

    #[test]
    fn stress_gradient_matches_central_differences(n in 3usize..20, m in 1usize..4, seed in any::<u64>()) {
        let target = tk::euclidean_metric(&tk::random_points(n, 3, 10.0, seed));
        let x = tk::random_points(n, m, 10.0, seed.wrapping_add(1));
        let (s, g) = stress_gradient(&target, x.view());
        prop_assert!((s - tk::stress(&target.dist, &x)).abs() <= 1e-9 * s.max(1.0));
        let fd = tk::finite_diff_gradient(|c| tk::stress(&target.dist, c), &x, 1e-5);
        let err = (&g - &fd).mapv(|v| v * v).sum().sqrt();
        let norm = fd.mapv(|v| v * v).sum().sqrt().max(1e-12);
        prop_assert!(err / norm <= 1e-5, "relative error {}", err / norm);
    }

    #[test]
    fn psi_symmetric_and_relabel_invariant(n in 20usize..200, ka in 1usize..6, kb in 1usize..6, seed in any::<u64>()) {
        let a = tk::random_labels(n, ka, seed);
        let b = tk::random_labels(n, kb, seed.wrapping_add(7));
        let ab = pair_sets_index(&a, &b).unwrap();
        prop_assert!((ab - pair_sets_index(&b, &a).unwrap()).abs() <= 1e-12);
        let renamed: Vec<i64> = a.iter().map(|&l| 100 - 3 * l).collect();
        prop_assert!((ab - pair_sets_index(&renamed, &b).unwrap()).abs() <= 1e-12);
    }

    #[test]
    fn sparse_metric_json_round_trip(n in 2usize..15, p in 0.0f64..1.0, seed in any::<u64>()) {
        let sm = tk::random_sparse_graph(n, p, 5.0, seed);
        let back: SparseMetric = serde_json::from_str(&serde_json::to_string(&sm).unwrap()).unwrap();
        prop_assert_eq!(back, sm);
    }
}

#[test]
fn knn_matches_full_sort_at_500_points() {
    for seed in 0..3 {
        let pc = cloud(500, 3, seed);
        let got = knn(&pc, 10).unwrap();
        let (idx, dist) = tk::brute_force_knn(&tk::distance_matrix(pc.points.view()), 10);
        assert_eq!(got.indices, idx);
        assert_eq!(got.distances, dist);
    }
}

#[test]
fn dense_types_round_trip_through_json() {
    let pc = cloud(30, 2, 9);
    let g = build_star_graphs(
        &pc,
        5,
        &LocalMetricConfig {
            sigma_mode: SigmaMode::BinarySearch,
            ..LocalMetricConfig::default()
        },
    )
    .unwrap();
    let back: NeighborGraph = serde_json::from_str(&serde_json::to_string(&g).unwrap()).unwrap();
    assert_eq!(back, g);

    let sm = tk::random_sparse_graph(12, 1.0, 3.0, 4);
    let dm = dijkstra_all_pairs(&sm, 1).unwrap();
    assert!(dm.is_finite());
    let back: DenseMetric = serde_json::from_str(&serde_json::to_string(&dm).unwrap()).unwrap();
    assert!(back.dist.iter().zip(&dm.dist).all(|(a, b)| a.to_bits() == b.to_bits()));
    assert_eq!(back, dm);
}
