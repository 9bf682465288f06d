//! Fixtures shared by the stage benchmarks: a swiss roll carried through the
//! pipeline up to each stage's input.

use isumap_core::datasets::swiss_roll;
use isumap_core::geodesics::dijkstra_all_pairs;
use isumap_core::local_metric::star_graphs_from_knn;
use isumap_core::merge::symmetrize;
use isumap_core::neighbors::{knn, KnnResult};
use isumap_core::{DenseMetric, LocalMetricConfig, NeighborGraph, PointCloud, SparseMetric, TConorm};

pub const SEED: u64 = 0;

/// Inputs of every stage for one dataset size.
pub struct StageInputs {
    pub cloud: PointCloud,
    pub neighbors: KnnResult,
    pub stars: NeighborGraph,
    pub merged: SparseMetric,
    pub geodesics: DenseMetric,
}

impl StageInputs {
    pub fn swiss_roll(n: usize, k: usize) -> Self {
        let cloud = swiss_roll(n, false, SEED).expect("valid size");
        let neighbors = knn(&cloud, k).expect("k < n");
        let stars = star_graphs_from_knn(neighbors.clone(), &LocalMetricConfig::default())
            .expect("default config")
            .graph;
        let merged = symmetrize(&stars, TConorm::Canonical);
        let geodesics = dijkstra_all_pairs(&merged, 0).expect("worker pool");
        StageInputs {
            cloud,
            neighbors,
            stars,
            merged,
            geodesics,
        }
    }
}
