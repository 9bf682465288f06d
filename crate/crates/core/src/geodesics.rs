//! Completion of the merged sparse metric by shortest paths.
//!
//! Restricted to the data points, the metric realization of the merged graph
//! is the shortest-path distance through its edges. It is computed by one
//! Dijkstra run per source vertex, parallel over sources.

use std::cmp::{Ordering, Reverse};
use std::collections::BinaryHeap;
use std::fmt;
use std::str::FromStr;

use ndarray::Array2;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::types::{DenseMetric, SparseMetric};

/// Largest graph accepted by [`quotient_metric_oracle`].
pub const ORACLE_MAX_POINTS: usize = 12;

/// Compressed adjacency lists of a [`SparseMetric`], both directions stored.
#[derive(Clone, Debug)]
pub struct Adjacency {
    offsets: Vec<usize>,
    targets: Vec<usize>,
    weights: Vec<f64>,
}

impl Adjacency {
    pub fn new(sm: &SparseMetric) -> Self {
        let n = sm.n_points();
        let mut degree = vec![0usize; n + 1];
        for (i, j, _) in sm.iter() {
            degree[i + 1] += 1;
            degree[j + 1] += 1;
        }
        for v in 0..n {
            degree[v + 1] += degree[v];
        }
        let offsets = degree;
        let mut fill = offsets.clone();
        let mut targets = vec![0; offsets[n]];
        let mut weights = vec![0.0; offsets[n]];
        for (i, j, w) in sm.iter() {
            targets[fill[i]] = j;
            weights[fill[i]] = w;
            fill[i] += 1;
            targets[fill[j]] = i;
            weights[fill[j]] = w;
            fill[j] += 1;
        }
        Self {
            offsets,
            targets,
            weights,
        }
    }

    pub fn n_vertices(&self) -> usize {
        self.offsets.len() - 1
    }

    pub fn neighbors(&self, v: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let range = self.offsets[v]..self.offsets[v + 1];
        self.targets[range.clone()]
            .iter()
            .copied()
            .zip(self.weights[range].iter().copied())
    }
}

#[derive(Clone, Copy, PartialEq)]
struct Dist(f64);

impl Eq for Dist {}

impl PartialOrd for Dist {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Dist {
    fn cmp(&self, other: &Self) -> Ordering {
        self.0.total_cmp(&other.0)
    }
}

/// Single-source shortest paths into `out` (length `N`, overwritten).
pub fn single_source(adj: &Adjacency, source: usize, out: &mut [f64]) {
    out.fill(f64::INFINITY);
    out[source] = 0.0;
    let mut heap = BinaryHeap::new();
    heap.push(Reverse((Dist(0.0), source)));
    while let Some(Reverse((Dist(d), v))) = heap.pop() {
        if d > out[v] {
            continue;
        }
        for (u, w) in adj.neighbors(v) {
            let candidate = d + w;
            if candidate < out[u] {
                out[u] = candidate;
                heap.push(Reverse((Dist(candidate), u)));
            }
        }
    }
}

/// Resolves a worker count, `0` meaning all available cores.
pub fn resolve_workers(workers: usize) -> usize {
    if workers == 0 {
        std::thread::available_parallelism().map_or(1, |n| n.get())
    } else {
        workers
    }
}

/// All-pairs shortest-path distances; unreachable pairs are `inf`.
///
/// Every row is produced by an independent run from its source, so the
/// output does not depend on `workers`. Path lengths are accumulated from the
/// lower-indexed endpoint (`dist[j][i]` is copied from `dist[i][j]` for
/// `i < j`), which makes the matrix exactly symmetric.
pub fn dijkstra_all_pairs(sm: &SparseMetric, workers: usize) -> Result<DenseMetric> {
    let n = sm.n_points();
    let adj = Adjacency::new(sm);
    let mut dist = vec![0.0; n * n];
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(resolve_workers(workers))
        .build()
        .map_err(|e| Error::numerical(format!("cannot start worker pool: {e}")))?;
    pool.install(|| {
        dist.par_chunks_mut(n.max(1))
            .enumerate()
            .for_each(|(source, row)| single_source(&adj, source, row));
    });
    let mut dist = Array2::from_shape_vec((n, n), dist).expect("n x n buffer");
    mirror_upper(&mut dist);
    Ok(DenseMetric::new(dist))
}

fn mirror_upper(dist: &mut Array2<f64>) {
    for i in 0..dist.nrows() {
        for j in 0..i {
            dist[[i, j]] = dist[[j, i]];
        }
    }
}

/// Gluing distance as the infimum over all finite edge sequences, evaluated by
/// extending sequences one edge at a time until nothing improves.
///
/// Test oracle only: refuses graphs with more than [`ORACLE_MAX_POINTS`] points.
pub fn quotient_metric_oracle(sm: &SparseMetric) -> Result<DenseMetric> {
    let n = sm.n_points();
    if n > ORACLE_MAX_POINTS {
        return Err(Error::param(format!(
            "quotient oracle supports at most {ORACLE_MAX_POINTS} points, got {n}"
        )));
    }
    let mut weight = vec![vec![f64::INFINITY; n]; n];
    for (i, j, w) in sm.iter() {
        weight[i][j] = w;
        weight[j][i] = w;
    }
    let mut best = Array2::from_elem((n, n), f64::INFINITY);
    for i in 0..n {
        best[[i, i]] = 0.0;
    }
    // Sequences of length L are extensions of sequences of length L - 1.
    for _ in 0..n {
        let mut changed = false;
        for start in 0..n {
            for mid in 0..n {
                let prefix = best[[start, mid]];
                if prefix == f64::INFINITY {
                    continue;
                }
                for end in 0..n {
                    let total = prefix + weight[mid][end];
                    if total < best[[start, end]] {
                        best[[start, end]] = total;
                        changed = true;
                    }
                }
            }
        }
        if !changed {
            break;
        }
    }
    mirror_upper(&mut best);
    Ok(DenseMetric::new(best))
}

/// Connected components of the merged graph.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ComponentPartition {
    /// Component id per point; ids are numbered by first appearance.
    pub component: Vec<usize>,
    /// Size of each component, indexed by id.
    pub sizes: Vec<usize>,
}

impl ComponentPartition {
    pub fn count(&self) -> usize {
        self.sizes.len()
    }

    /// Id of the largest component (the first one among equals).
    pub fn largest(&self) -> usize {
        let mut best = 0;
        for (c, &s) in self.sizes.iter().enumerate() {
            if s > self.sizes[best] {
                best = c;
            }
        }
        best
    }

    /// Points of component `id`, ascending.
    pub fn members(&self, id: usize) -> Vec<usize> {
        (0..self.component.len())
            .filter(|&i| self.component[i] == id)
            .collect()
    }
}

fn find(parent: &mut [usize], mut v: usize) -> usize {
    while parent[v] != v {
        parent[v] = parent[parent[v]];
        v = parent[v];
    }
    v
}

/// Union-find over the stored edges.
pub fn connectivity_report(sm: &SparseMetric) -> ComponentPartition {
    let n = sm.n_points();
    let mut parent: Vec<usize> = (0..n).collect();
    for (i, j, _) in sm.iter() {
        let (a, b) = (find(&mut parent, i), find(&mut parent, j));
        if a != b {
            parent[a.max(b)] = a.min(b);
        }
    }
    let mut id_of_root = vec![usize::MAX; n];
    let mut component = vec![0; n];
    let mut sizes = Vec::new();
    for v in 0..n {
        let root = find(&mut parent, v);
        if id_of_root[root] == usize::MAX {
            id_of_root[root] = sizes.len();
            sizes.push(0);
        }
        component[v] = id_of_root[root];
        sizes[component[v]] += 1;
    }
    ComponentPartition { component, sizes }
}

/// What to do when the merged graph has more than one component.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OnDisconnect {
    /// Fail with the component sizes.
    Error,
    /// Keep only the largest component.
    LargestComponent,
    /// Replace infinite distances by 1.5 times the largest finite one.
    Cap,
}

impl OnDisconnect {
    pub fn as_str(self) -> &'static str {
        match self {
            OnDisconnect::Error => "error",
            OnDisconnect::LargestComponent => "largest_component",
            OnDisconnect::Cap => "cap",
        }
    }
}

impl fmt::Display for OnDisconnect {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for OnDisconnect {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "error" => Ok(OnDisconnect::Error),
            "largest_component" => Ok(OnDisconnect::LargestComponent),
            "cap" => Ok(OnDisconnect::Cap),
            other => Err(Error::param(format!(
                "unknown on_disconnect `{other}` (expected error, largest_component or cap)"
            ))),
        }
    }
}

pub const CAP_FACTOR: f64 = 1.5;

/// Replaces every infinite entry by `CAP_FACTOR` times the largest finite entry.
/// Returns the cap value, or `None` if nothing was replaced.
pub fn cap_infinite(dm: &mut DenseMetric) -> Option<f64> {
    let max = dm.max_finite()?;
    let cap = CAP_FACTOR * max;
    let mut replaced = false;
    dm.dist.mapv_inplace(|v| {
        if v.is_finite() {
            v
        } else {
            replaced = true;
            cap
        }
    });
    replaced.then_some(cap)
}

/// Completed metric after applying the disconnect policy.
#[derive(Clone, Debug)]
pub struct Completion {
    pub metric: DenseMetric,
    pub components: ComponentPartition,
    /// Original indices of the points that remain, ascending.
    pub kept: Vec<usize>,
    /// Cap applied to infinite entries, if any.
    pub cap: Option<f64>,
}

/// Shortest-path completion followed by the disconnect policy.
pub fn complete(sm: &SparseMetric, workers: usize, policy: OnDisconnect) -> Result<Completion> {
    let components = connectivity_report(sm);
    let n = sm.n_points();
    if components.count() <= 1 {
        return Ok(Completion {
            metric: dijkstra_all_pairs(sm, workers)?,
            components,
            kept: (0..n).collect(),
            cap: None,
        });
    }
    match policy {
        OnDisconnect::Error => Err(Error::Disconnected {
            count: components.count(),
            sizes: components.sizes.clone(),
        }),
        OnDisconnect::LargestComponent => {
            let kept = components.members(components.largest());
            let mut position = vec![usize::MAX; n];
            for (p, &v) in kept.iter().enumerate() {
                position[v] = p;
            }
            let mut sub = SparseMetric::new(kept.len());
            for (i, j, w) in sm.iter() {
                if position[i] != usize::MAX && position[j] != usize::MAX {
                    sub.insert(position[i], position[j], w)?;
                }
            }
            Ok(Completion {
                metric: dijkstra_all_pairs(&sub, workers)?,
                components,
                kept,
                cap: None,
            })
        }
        OnDisconnect::Cap => {
            let mut metric = dijkstra_all_pairs(sm, workers)?;
            let cap = cap_infinite(&mut metric);
            if cap == Some(0.0) || cap.is_none() {
                return Err(Error::numerical(
                    "cannot cap infinite distances: no positive finite geodesic distance",
                ));
            }
            Ok(Completion {
                metric,
                components,
                kept: (0..n).collect(),
                cap,
            })
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn graph(n: usize, edges: &[(usize, usize, f64)]) -> SparseMetric {
        let mut sm = SparseMetric::new(n);
        for &(i, j, w) in edges {
            sm.insert(i, j, w).unwrap();
        }
        sm
    }

    #[test]
    fn path_graph() {
        let dm = dijkstra_all_pairs(&graph(3, &[(0, 1, 1.0), (1, 2, 2.0)]), 1).unwrap();
        assert_eq!(dm.dist[[0, 2]], 3.0);
        assert_eq!(dm.dist[[2, 0]], 3.0);
        assert_eq!(dm.dist[[1, 1]], 0.0);
    }

    #[test]
    fn triangle_violation_is_repaired() {
        let dm = dijkstra_all_pairs(&graph(3, &[(0, 1, 1.0), (1, 2, 1.0), (0, 2, 5.0)]), 2).unwrap();
        assert_eq!(dm.dist[[0, 2]], 2.0);
    }

    #[test]
    fn zero_weight_edges() {
        let dm = dijkstra_all_pairs(&graph(3, &[(0, 1, 0.0), (1, 2, 0.5)]), 1).unwrap();
        assert_eq!(dm.dist[[0, 1]], 0.0);
        assert_eq!(dm.dist[[0, 2]], 0.5);
    }

    #[test]
    fn disconnected_pairs_are_infinite() {
        let sm = graph(4, &[(0, 1, 1.0), (2, 3, 1.0)]);
        let dm = dijkstra_all_pairs(&sm, 0).unwrap();
        assert_eq!(dm.dist[[0, 3]], f64::INFINITY);
        let oracle = quotient_metric_oracle(&sm).unwrap();
        assert_eq!(oracle.dist[[0, 3]], f64::INFINITY);
    }

    #[test]
    fn oracle_single_edge_and_guard() {
        let oracle = quotient_metric_oracle(&graph(2, &[(0, 1, 0.75)])).unwrap();
        assert_eq!(oracle.dist[[0, 1]], 0.75);
        assert!(quotient_metric_oracle(&SparseMetric::new(13)).is_err());
    }

    #[test]
    fn merged_stars_match_oracle() {
        // Star of a = {b: 1.0, c: 2.5}, star of b = {c: 1.0}; merged by min.
        let sm = graph(3, &[(0, 1, 1.0), (0, 2, 2.5), (1, 2, 1.0)]);
        let oracle = quotient_metric_oracle(&sm).unwrap();
        let dm = dijkstra_all_pairs(&sm, 1).unwrap();
        assert_eq!(oracle, dm);
        assert_eq!(dm.dist[[0, 2]], 2.0);
    }

    #[test]
    fn components() {
        let full = graph(3, &[(0, 1, 1.0), (1, 2, 1.0), (0, 2, 1.0)]);
        assert_eq!(connectivity_report(&full).count(), 1);

        let cliques = graph(5, &[(0, 1, 1.0), (1, 2, 1.0), (0, 2, 1.0), (3, 4, 1.0)]);
        let p = connectivity_report(&cliques);
        assert_eq!(p.sizes, vec![3, 2]);
        assert_eq!(p.component, vec![0, 0, 0, 1, 1]);
        assert_eq!(p.largest(), 0);

        let empty = connectivity_report(&SparseMetric::new(5));
        assert_eq!(empty.sizes, vec![1; 5]);
    }

    #[test]
    fn disconnect_policies() {
        let sm = graph(5, &[(0, 1, 1.0), (3, 4, 2.0), (2, 3, 1.0)]);
        assert!(matches!(
            complete(&sm, 1, OnDisconnect::Error),
            Err(Error::Disconnected { count: 2, .. })
        ));

        let largest = complete(&sm, 1, OnDisconnect::LargestComponent).unwrap();
        assert_eq!(largest.kept, vec![2, 3, 4]);
        assert_eq!(largest.metric.dist[[0, 2]], 3.0);

        let capped = complete(&sm, 1, OnDisconnect::Cap).unwrap();
        assert_eq!(capped.cap, Some(4.5));
        assert_eq!(capped.metric.dist[[0, 4]], 4.5);
        assert!(capped.metric.is_finite());
    }

    #[test]
    fn parse_policy() {
        assert_eq!("cap".parse::<OnDisconnect>().unwrap(), OnDisconnect::Cap);
        assert!("drop".parse::<OnDisconnect>().is_err());
    }
}
