use isumap_core::datasets::gaussian_blobs;
use isumap_core::embedding::classical_mds;
use isumap_core::evaluation::{
    geodesic_correlation, kmeans, nn_distance_uniformity, pair_sets_index, pair_sets_index_with, PsiNull,
};
use isumap_core::{Embedding, MdsMethod};
use isumap_testkit as tk;
use ndarray::Array2;
use rand::seq::SliceRandom;

fn same_partition(a: &[i64], b: &[i64]) -> bool {
    let mut map = std::collections::HashMap::new();
    a.iter().zip(b).all(|(x, y)| *map.entry(x).or_insert(y) == y)
        && map.values().collect::<std::collections::HashSet<_>>().len() == map.len()
}

#[test]
fn kmeans_recovers_two_blobs() {
    let pc = gaussian_blobs(400, 2, 2, 10.0, 2).unwrap();
    let km = kmeans(pc.points.view(), 2, 0, 100).unwrap();
    assert!(same_partition(&km.labels, pc.labels.as_ref().unwrap()));
    assert_eq!(pair_sets_index(&km.labels, pc.labels.as_ref().unwrap()).unwrap(), 1.0);
}

#[test]
fn kmeans_objective_never_rises() {
    for seed in 0..10 {
        let pts = tk::random_points(300, 3, 1.0, 40 + seed);
        let km = kmeans(pts.view(), 6, seed, 200).unwrap();
        assert!(km.inertia.windows(2).all(|w| w[1] <= w[0] + 1e-9), "{:?}", km.inertia);
    }
}

#[test]
fn psi_null_is_centered() {
    let truth = tk::balanced_labels(400, 4);
    let null = tk::monte_carlo_null(&truth, 4, 200, 77, |a, b| pair_sets_index(a, b).unwrap());
    assert!((-0.05..=0.05).contains(&null), "null mean {null}");
    let margins = tk::monte_carlo_null(&truth, 4, 200, 77, |a, b| pair_sets_index_with(a, b, PsiNull::Margins).unwrap());
    assert!(margins > null, "margins {margins} vs permutation {null}");
}

#[test]
fn psi_of_a_permuted_partition_is_one() {
    let a = tk::random_labels(300, 5, 3);
    let b: Vec<i64> = a.iter().map(|&l| (l + 2) % 5).collect();
    assert_eq!(pair_sets_index(&a, &b).unwrap(), 1.0);
}

fn embedding(coords: Array2<f64>) -> Embedding {
    Embedding {
        coords,
        stress: 0.0,
        method: MdsMethod::ClassicalMds,
        eigenvalues: Vec::new(),
    }
}

#[test]
fn geodesic_correlation_of_exact_reconstruction() {
    let dm = tk::euclidean_metric(&tk::random_points(80, 3, 5.0, 12));
    let emb = classical_mds(&dm, 3).unwrap();
    assert!(geodesic_correlation(&dm, &emb).unwrap() >= 1.0 - 1e-9);
    let doubled = embedding(&emb.coords * 2.0);
    assert!((geodesic_correlation(&dm, &doubled).unwrap() - 1.0).abs() <= 1e-9);
}

#[test]
fn shuffled_rows_have_no_geodesic_correlation() {
    let pts = tk::random_points(200, 2, 10.0, 13);
    let dm = tk::euclidean_metric(&pts);
    let mut r = tk::rng(14);
    let mut rows: Vec<usize> = (0..200).collect();
    let mut total = 0.0;
    for _ in 0..100 {
        rows.shuffle(&mut r);
        let shuffled = pts.select(ndarray::Axis(0), &rows);
        total += geodesic_correlation(&dm, &embedding(shuffled)).unwrap().abs();
    }
    assert!(total / 100.0 < 0.1, "mean |r| = {}", total / 100.0);
}

#[test]
fn uniformity_edge_cases() {
    let grid = Array2::from_shape_fn((50, 2), |(i, c)| if c == 0 { (i % 10) as f64 } else { (i / 10) as f64 });
    assert!(nn_distance_uniformity(grid.view()).unwrap().abs() <= 1e-12);
    let pair = ndarray::array![[0.0, 0.0], [3.0, 4.0]];
    assert_eq!(nn_distance_uniformity(pair.view()).unwrap(), 0.0);
    let mut line: Vec<f64> = (0..20).map(|i| i as f64).collect();
    line.extend((0..20).map(|i| 1000.0 + 10.0 * i as f64));
    let two_scale = Array2::from_shape_vec((40, 1), line).unwrap();
    assert!(nn_distance_uniformity(two_scale.view()).unwrap() > 0.5);
}
