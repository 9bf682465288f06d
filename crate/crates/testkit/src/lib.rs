//! Slow, obviously-correct reference implementations used to certify the
//! algorithms in `isumap-core`, plus random instance generators.
//!
//! Nothing here calls into the code it checks: distances, neighbor searches,
//! shortest paths and alignments are recomputed from scratch.

use isumap_core::{DenseMetric, SparseMetric};
use nalgebra::DMatrix;
use ndarray::{Array1, Array2, ArrayView2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Largest graph accepted by the path-enumeration oracle.
pub const MAX_ORACLE_POINTS: usize = 12;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Euclidean distance, accumulating squared differences left to right.
pub fn euclid(a: &[f64], b: &[f64]) -> f64 {
    let mut s = 0.0;
    for t in 0..a.len() {
        let d = a[t] - b[t];
        s += d * d;
    }
    s.sqrt()
}

fn row_vec(points: ArrayView2<'_, f64>, i: usize) -> Vec<f64> {
    points.row(i).to_vec()
}

/// Full pairwise Euclidean distance matrix.
pub fn distance_matrix(points: ArrayView2<'_, f64>) -> Array2<f64> {
    let n = points.nrows();
    let rows: Vec<Vec<f64>> = (0..n).map(|i| row_vec(points, i)).collect();
    Array2::from_shape_fn((n, n), |(i, j)| euclid(&rows[i], &rows[j]))
}

/// k nearest neighbors by sorting every row of the full distance matrix by
/// (distance, index).
pub fn brute_force_knn(dist: &Array2<f64>, k: usize) -> (Array2<usize>, Array2<f64>) {
    let n = dist.nrows();
    assert!(k < n, "k must be below N");
    let mut idx = Array2::zeros((n, k));
    let mut d = Array2::zeros((n, k));
    for i in 0..n {
        let mut all: Vec<(f64, usize)> = (0..n).filter(|&j| j != i).map(|j| (dist[[i, j]], j)).collect();
        all.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap().then(a.1.cmp(&b.1)));
        for p in 0..k {
            d[[i, p]] = all[p].0;
            idx[[i, p]] = all[p].1;
        }
    }
    (idx, d)
}

/// Weighted undirected edge list of a sparse metric.
pub fn edges(sm: &SparseMetric) -> Vec<(usize, usize, f64)> {
    sm.iter().collect()
}

/// Minimum weight over all simple paths from `i` to `j` (path weights summed
/// from `i` outward); `inf` if no path exists.
pub fn brute_force_paths(sm: &SparseMetric, i: usize, j: usize) -> f64 {
    let n = sm.n_points();
    assert!(n <= MAX_ORACLE_POINTS, "path enumeration is limited to {MAX_ORACLE_POINTS} points");
    if i == j {
        return 0.0;
    }
    let mut adj = vec![Vec::new(); n];
    for (a, b, w) in edges(sm) {
        adj[a].push((b, w));
        adj[b].push((a, w));
    }
    let mut visited = vec![false; n];
    visited[i] = true;
    let mut best = f64::INFINITY;
    dfs(&adj, i, j, 0.0, &mut visited, &mut best);
    best
}

fn dfs(adj: &[Vec<(usize, f64)>], v: usize, target: usize, acc: f64, visited: &mut [bool], best: &mut f64) {
    if v == target {
        *best = best.min(acc);
        return;
    }
    for &(u, w) in &adj[v] {
        if !visited[u] {
            visited[u] = true;
            dfs(adj, u, target, acc + w, visited, best);
            visited[u] = false;
        }
    }
}

/// All-pairs matrix of [`brute_force_paths`], each pair measured from its
/// lower-indexed endpoint.
pub fn brute_force_all_pairs(sm: &SparseMetric) -> Array2<f64> {
    let n = sm.n_points();
    Array2::from_shape_fn((n, n), |(i, j)| brute_force_paths(sm, i.min(j), i.max(j)))
}

/// Single-source Bellman-Ford relaxation over an undirected edge list.
pub fn bellman_ford(n: usize, edges: &[(usize, usize, f64)], source: usize) -> Vec<f64> {
    let mut d = vec![f64::INFINITY; n];
    d[source] = 0.0;
    loop {
        let mut changed = false;
        for &(a, b, w) in edges {
            if d[a] + w < d[b] {
                d[b] = d[a] + w;
                changed = true;
            }
            if d[b] + w < d[a] {
                d[a] = d[b] + w;
                changed = true;
            }
        }
        if !changed {
            return d;
        }
    }
}

/// All-pairs Bellman-Ford, each pair measured from its lower-indexed endpoint.
pub fn bellman_ford_all_pairs(n: usize, edges: &[(usize, usize, f64)]) -> Array2<f64> {
    let mut out = Array2::zeros((n, n));
    for s in 0..n {
        for (t, v) in bellman_ford(n, edges, s).into_iter().enumerate().skip(s) {
            out[[s, t]] = v;
            out[[t, s]] = v;
        }
    }
    out
}

/// Classic Isomap geodesics: connect every point to its `k` nearest
/// neighbors (either direction) with Euclidean edge weights and take
/// shortest paths.
pub fn isomap_geodesics(points: ArrayView2<'_, f64>, k: usize) -> Array2<f64> {
    let n = points.nrows();
    let dist = distance_matrix(points);
    let (idx, _) = brute_force_knn(&dist, k);
    let mut adjacent = vec![vec![false; n]; n];
    for i in 0..n {
        for p in 0..k {
            let j = idx[[i, p]];
            adjacent[i][j] = true;
            adjacent[j][i] = true;
        }
    }
    let mut list = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            if adjacent[i][j] {
                list.push((i, j, dist[[i, j]]));
            }
        }
    }
    bellman_ford_all_pairs(n, &list)
}

/// Central-difference gradient of `f` at `x` with step `h`.
pub fn finite_diff_gradient(f: impl Fn(&Array2<f64>) -> f64, x: &Array2<f64>, h: f64) -> Array2<f64> {
    assert!(h > 0.0, "step must be positive");
    let mut g = Array2::zeros(x.dim());
    let mut probe = x.clone();
    for idx in 0..x.len() {
        let (r, c) = (idx / x.ncols(), idx % x.ncols());
        let orig = probe[[r, c]];
        probe[[r, c]] = orig + h;
        let up = f(&probe);
        probe[[r, c]] = orig - h;
        let down = f(&probe);
        probe[[r, c]] = orig;
        g[[r, c]] = (up - down) / (2.0 * h);
    }
    g
}

/// Raw stress written directly from its definition.
pub fn stress(target: &Array2<f64>, coords: &Array2<f64>) -> f64 {
    let n = coords.nrows();
    let mut s = 0.0;
    for i in 0..n {
        for j in i + 1..n {
            let d = euclid(&coords.row(i).to_vec(), &coords.row(j).to_vec());
            s += (target[[i, j]] - d).powi(2);
        }
    }
    s
}

/// Root-mean-square deviation after the best rotation/reflection and
/// translation of `a` onto `b`.
pub fn procrustes_rmsd(a: &Array2<f64>, b: &Array2<f64>) -> f64 {
    let aligned = procrustes_align(a, b);
    let n = a.nrows() as f64;
    ((&aligned - b).mapv(|v| v * v).sum() / n).sqrt()
}

/// `a` rigidly aligned onto `b`.
pub fn procrustes_align(a: &Array2<f64>, b: &Array2<f64>) -> Array2<f64> {
    assert_eq!(a.dim(), b.dim());
    let (n, m) = a.dim();
    let ma = DMatrix::from_fn(n, m, |i, j| a[[i, j]]);
    let mb = DMatrix::from_fn(n, m, |i, j| b[[i, j]]);
    let ca = ma.row_mean();
    let cb = mb.row_mean();
    let mut xa = ma.clone();
    let mut xb = mb.clone();
    for mut r in xa.row_iter_mut() {
        r -= &ca;
    }
    for mut r in xb.row_iter_mut() {
        r -= &cb;
    }
    let svd = (xa.transpose() * &xb).svd(true, true);
    let rot = svd.u.unwrap() * svd.v_t.unwrap();
    let mut out = xa * rot;
    for mut r in out.row_iter_mut() {
        r += &cb;
    }
    Array2::from_shape_fn((n, m), |(i, j)| out[(i, j)])
}

/// Random graph on `n` vertices: each pair is an edge with probability `p`,
/// weight uniform in `[0, max_weight)`; a fraction of weights is exactly 0.
pub fn random_sparse_graph(n: usize, p: f64, max_weight: f64, seed: u64) -> SparseMetric {
    let mut r = rng(seed);
    let mut sm = SparseMetric::new(n);
    for i in 0..n {
        for j in i + 1..n {
            if r.random::<f64>() < p {
                let w = if r.random::<f64>() < 0.05 { 0.0 } else { r.random::<f64>() * max_weight };
                sm.insert(i, j, w).expect("valid edge");
            }
        }
    }
    sm
}

/// `n` points with i.i.d. uniform coordinates in `[0, scale)`.
pub fn random_points(n: usize, dim: usize, scale: f64, seed: u64) -> Array2<f64> {
    let mut r = rng(seed);
    Array2::from_shape_simple_fn((n, dim), || r.random::<f64>() * scale)
}

/// Exact Euclidean distances of `points` as a dense metric.
pub fn euclidean_metric(points: &Array2<f64>) -> DenseMetric {
    DenseMetric::new(distance_matrix(points.view()))
}

/// `n` labels drawn uniformly from `0..k`.
pub fn random_labels(n: usize, k: usize, seed: u64) -> Vec<i64> {
    let mut r = rng(seed);
    (0..n).map(|_| r.random_range(0..k) as i64).collect()
}

/// `n` labels in `k` equally sized consecutive blocks.
pub fn balanced_labels(n: usize, k: usize) -> Vec<i64> {
    (0..n).map(|i| (i * k / n) as i64).collect()
}

/// Mean of `score(fixed, random_b)` over `runs` independent uniform labelings.
pub fn monte_carlo_null(fixed: &[i64], k: usize, runs: usize, seed: u64, score: impl Fn(&[i64], &[i64]) -> f64) -> f64 {
    let total: f64 = (0..runs)
        .map(|r| score(fixed, &random_labels(fixed.len(), k, seed.wrapping_add(r as u64))))
        .sum();
    total / runs as f64
}

/// Column means of a matrix.
pub fn column_means(x: &Array2<f64>) -> Array1<f64> {
    let n = x.nrows() as f64;
    Array1::from_shape_fn(x.ncols(), |c| x.column(c).sum() / n)
}

/// Largest absolute entrywise difference.
pub fn max_abs_diff(a: &Array2<f64>, b: &Array2<f64>) -> f64 {
    assert_eq!(a.dim(), b.dim());
    a.iter().zip(b).fold(0.0, |m, (x, y)| {
        if x == y {
            m
        } else {
            m.max((x - y).abs())
        }
    })
}

#[cfg(test)]
mod tests {
    use ndarray::array;

    use super::*;

    #[test]
    fn single_edge_and_parallel_routes() {
        let mut sm = SparseMetric::new(2);
        sm.insert(0, 1, 0.7).unwrap();
        assert_eq!(brute_force_paths(&sm, 0, 1), 0.7);

        let mut sm = SparseMetric::new(4);
        sm.insert(0, 1, 1.0).unwrap();
        sm.insert(1, 3, 2.0).unwrap();
        sm.insert(0, 2, 1.25).unwrap();
        sm.insert(2, 3, 1.25).unwrap();
        assert_eq!(brute_force_paths(&sm, 0, 3), 2.5);
        assert_eq!(brute_force_paths(&SparseMetric::new(3), 0, 2), f64::INFINITY);
    }

    #[test]
    fn finite_difference_of_squared_norm() {
        let f = |x: &Array2<f64>| x.mapv(|v| v * v).sum();
        let zero = Array2::zeros((2, 2));
        assert!(finite_diff_gradient(f, &zero, 1e-4).iter().all(|v| v.abs() < 1e-12));
        let x = array![[1.0, -2.0], [0.5, 3.0]];
        let g = finite_diff_gradient(f, &x, 1e-4);
        assert!(max_abs_diff(&g, &(&x * 2.0)) < 1e-8);
    }

    #[test]
    fn bellman_ford_matches_enumeration() {
        for seed in 0..10 {
            let sm = random_sparse_graph(7, 0.4, 3.0, seed);
            let bf = bellman_ford_all_pairs(7, &edges(&sm));
            assert_eq!(bf, brute_force_all_pairs(&sm));
        }
    }

    #[test]
    fn procrustes_recovers_rotation() {
        let a = array![[0.0, 0.0], [2.0, 0.0], [0.0, 1.0], [1.0, 3.0]];
        let b = a.map_axis(ndarray::Axis(1), |r| r.to_owned());
        let rotated = Array2::from_shape_fn((4, 2), |(i, j)| if j == 0 { b[i][1] + 4.0 } else { -b[i][0] });
        assert!(procrustes_rmsd(&a, &rotated) < 1e-12);
    }

    #[test]
    fn knn_oracle_orders_ties_by_index() {
        let pts = array![[0.0], [1.0], [-1.0], [3.0]];
        let (idx, d) = brute_force_knn(&distance_matrix(pts.view()), 2);
        assert_eq!(idx.row(0).to_vec(), vec![1, 2]);
        assert_eq!(d.row(0).to_vec(), vec![1.0, 1.0]);
    }
}
