//! Embedding quality scores: k-means, the Pair Sets Index, nearest-neighbor
//! distance uniformity and geodesic preservation.

use std::collections::BTreeMap;

use ndarray::{Array2, ArrayView2, Axis};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::embedding::pairwise_distances;
use crate::error::{Error, Result};
use crate::neighbors::knn;
use crate::types::{DenseMetric, Embedding, PointCloud};

#[derive(Clone, Debug, PartialEq)]
pub struct KMeans {
    pub labels: Vec<i64>,
    pub centroids: Array2<f64>,
    /// Within-cluster sum of squares after each assignment step.
    pub inertia: Vec<f64>,
    pub iterations: usize,
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn row(a: &Array2<f64>, i: usize) -> &[f64] {
    a.row(i).to_slice().expect("standard layout")
}

/// Lloyd's algorithm from k-means++ seeding.
///
/// A cluster that ends up empty has its centroid moved onto the point farthest
/// from its own centroid. Iteration stops when assignments no longer change or
/// after `max_iter` assignment steps.
pub fn kmeans(coords: ArrayView2<'_, f64>, k: usize, seed: u64, max_iter: usize) -> Result<KMeans> {
    let n = coords.nrows();
    if k == 0 || k > n {
        return Err(Error::param(format!("k-means needs 1 <= k <= N (k = {k}, N = {n})")));
    }
    if max_iter == 0 {
        return Err(Error::param("k-means max_iter must be at least 1"));
    }
    let x = coords.as_standard_layout().into_owned();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut centroids = plus_plus_seeds(&x, k, &mut rng);

    let mut labels = vec![usize::MAX; n];
    let mut inertia = Vec::new();
    let mut iterations = 0;
    loop {
        iterations += 1;
        let mut changed = false;
        let mut total = 0.0;
        for i in 0..n {
            let (best, d) = nearest(row(&x, i), &centroids);
            total += d;
            if labels[i] != best {
                labels[i] = best;
                changed = true;
            }
        }
        inertia.push(total);
        if !changed || iterations >= max_iter {
            break;
        }
        update_centroids(&x, &labels, &mut centroids);
    }

    Ok(KMeans {
        labels: labels.into_iter().map(|l| l as i64).collect(),
        centroids,
        inertia,
        iterations,
    })
}

fn nearest(p: &[f64], centroids: &Array2<f64>) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for c in 0..centroids.nrows() {
        let d = sq_dist(p, row(centroids, c));
        if d < best.1 {
            best = (c, d);
        }
    }
    best
}

fn plus_plus_seeds(x: &Array2<f64>, k: usize, rng: &mut ChaCha8Rng) -> Array2<f64> {
    let n = x.nrows();
    let mut centroids = Array2::zeros((k, x.ncols()));
    let first = rng.random_range(0..n);
    centroids.row_mut(0).assign(&x.row(first));
    let mut d2: Vec<f64> = (0..n).map(|i| sq_dist(row(x, i), row(x, first))).collect();
    for c in 1..k {
        let total: f64 = d2.iter().sum();
        let pick = if total > 0.0 {
            let mut target = rng.random::<f64>() * total;
            let mut pick = n - 1;
            for (i, &w) in d2.iter().enumerate() {
                if target < w {
                    pick = i;
                    break;
                }
                target -= w;
            }
            pick
        } else {
            // All remaining mass is zero: every point coincides with a centroid.
            rng.random_range(0..n)
        };
        centroids.row_mut(c).assign(&x.row(pick));
        for i in 0..n {
            d2[i] = d2[i].min(sq_dist(row(x, i), row(x, pick)));
        }
    }
    centroids
}

fn update_centroids(x: &Array2<f64>, labels: &[usize], centroids: &mut Array2<f64>) {
    let k = centroids.nrows();
    let mut sums = Array2::<f64>::zeros(centroids.dim());
    let mut counts = vec![0usize; k];
    for (i, &l) in labels.iter().enumerate() {
        sums.row_mut(l).scaled_add(1.0, &x.row(i));
        counts[l] += 1;
    }
    for c in 0..k {
        if counts[c] > 0 {
            let mean = &sums.row(c) / counts[c] as f64;
            centroids.row_mut(c).assign(&mean);
        }
    }
    for c in 0..k {
        if counts[c] == 0 {
            // Farthest point from its own (updated) centroid, smallest index on ties.
            let mut far = (0, -1.0);
            for (i, &l) in labels.iter().enumerate() {
                let d = sq_dist(row(x, i), row(centroids, l));
                if d > far.1 {
                    far = (i, d);
                }
            }
            centroids.row_mut(c).assign(&x.row(far.0));
        }
    }
}

/// How the chance term of the Pair Sets Index is obtained.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PsiNull {
    /// Monte Carlo mean of the matched similarity over random labelings with
    /// the same cluster sizes.
    Permutation { samples: usize, seed: u64 },
    /// Closed-form approximation from the sorted cluster sizes.
    Margins,
}

impl Default for PsiNull {
    fn default() -> Self {
        PsiNull::Permutation {
            samples: 1000,
            seed: 0x5051,
        }
    }
}

/// Pair Sets Index with the default permutation null.
pub fn pair_sets_index(labels_a: &[i64], labels_b: &[i64]) -> Result<f64> {
    pair_sets_index_with(labels_a, labels_b, PsiNull::default())
}

/// Pair Sets Index: clusters of the two partitions are matched one-to-one to
/// maximize the summed similarity `n_ij / max(|A_i|, |B_j|)`; the total `S` is
/// then adjusted for chance as `(S - E) / (max(K, K') - E)`.
pub fn pair_sets_index_with(labels_a: &[i64], labels_b: &[i64], null: PsiNull) -> Result<f64> {
    if labels_a.len() != labels_b.len() {
        return Err(Error::param(format!(
            "label vectors differ in length ({} vs {})",
            labels_a.len(),
            labels_b.len()
        )));
    }
    if labels_a.is_empty() {
        return Err(Error::param("label vectors are empty"));
    }
    let a = dense_ids(labels_a);
    let b = dense_ids(labels_b);
    let (ka, kb) = (count_ids(&a), count_ids(&b));
    let sizes_a = cluster_sizes(&a, ka);
    let sizes_b = cluster_sizes(&b, kb);
    let s = matched_similarity(&a, &b, &sizes_a, &sizes_b);
    let kmax = ka.max(kb) as f64;

    let e = match null {
        PsiNull::Margins => margin_expectation(&sizes_a, &sizes_b, labels_a.len()),
        PsiNull::Permutation { samples, seed } => {
            if samples == 0 {
                return Err(Error::param("PSI null needs at least one sample"));
            }
            permutation_expectation(&sizes_a, &sizes_b, samples, seed)
        }
    };
    if kmax - e <= f64::EPSILON * kmax {
        // Both partitions are a single cluster: the only possible outcome.
        return Ok(1.0);
    }
    Ok((s - e) / (kmax - e))
}

/// Relabels ids to `0..K` in order of first appearance.
fn dense_ids(labels: &[i64]) -> Vec<usize> {
    let mut map = BTreeMap::new();
    labels
        .iter()
        .map(|&l| {
            let next = map.len();
            *map.entry(l).or_insert(next)
        })
        .collect()
}

fn count_ids(ids: &[usize]) -> usize {
    ids.iter().max().map_or(0, |m| m + 1)
}

fn cluster_sizes(ids: &[usize], k: usize) -> Vec<usize> {
    let mut sizes = vec![0; k];
    for &i in ids {
        sizes[i] += 1;
    }
    sizes
}

fn matched_similarity(a: &[usize], b: &[usize], sizes_a: &[usize], sizes_b: &[usize]) -> f64 {
    let mut table = vec![vec![0usize; sizes_b.len()]; sizes_a.len()];
    for (&i, &j) in a.iter().zip(b) {
        table[i][j] += 1;
    }
    let sim: Vec<Vec<f64>> = table
        .iter()
        .enumerate()
        .map(|(i, r)| {
            r.iter()
                .enumerate()
                .map(|(j, &c)| c as f64 / sizes_a[i].max(sizes_b[j]) as f64)
                .collect()
        })
        .collect();
    let assignment = max_weight_matching(&sim);
    let mut pairs: Vec<f64> = assignment
        .iter()
        .enumerate()
        .filter_map(|(i, j)| j.map(|j| sim[i][j]))
        .collect();
    // Summing in sorted order makes the total independent of argument order.
    pairs.sort_by(f64::total_cmp);
    pairs.iter().sum()
}

fn margin_expectation(sizes_a: &[usize], sizes_b: &[usize], n: usize) -> f64 {
    let mut sa = sizes_a.to_vec();
    let mut sb = sizes_b.to_vec();
    sa.sort_unstable_by(|x, y| y.cmp(x));
    sb.sort_unstable_by(|x, y| y.cmp(x));
    sa.iter()
        .zip(&sb)
        .map(|(&p, &q)| (p * q) as f64 / n as f64 / p.max(q) as f64)
        .sum()
}

fn permutation_expectation(sizes_a: &[usize], sizes_b: &[usize], samples: usize, seed: u64) -> f64 {
    let mut sa = sizes_a.to_vec();
    let mut sb = sizes_b.to_vec();
    sa.sort_unstable_by(|x, y| y.cmp(x));
    sb.sort_unstable_by(|x, y| y.cmp(x));
    // Canonical order of the two margins keeps the estimate symmetric.
    if sb < sa {
        std::mem::swap(&mut sa, &mut sb);
    }
    let expand = |sizes: &[usize]| -> Vec<usize> {
        sizes
            .iter()
            .enumerate()
            .flat_map(|(c, &s)| std::iter::repeat_n(c, s))
            .collect()
    };
    let a = expand(&sa);
    let mut b = expand(&sb);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut total = 0.0;
    for _ in 0..samples {
        b.shuffle(&mut rng);
        total += matched_similarity(&a, &b, &sa, &sb);
    }
    total / samples as f64
}

/// Maximum-weight one-to-one assignment of rows to columns (Hungarian
/// algorithm on the padded square cost matrix). Entry `i` is the column
/// matched to row `i`, if any.
pub fn max_weight_matching(weights: &[Vec<f64>]) -> Vec<Option<usize>> {
    let rows = weights.len();
    let cols = weights.first().map_or(0, Vec::len);
    let n = rows.max(cols);
    if n == 0 {
        return Vec::new();
    }
    let cost = |i: usize, j: usize| -> f64 {
        if i < rows && j < cols {
            -weights[i][j]
        } else {
            0.0
        }
    };
    // Potentials and matching, 1-based with a virtual column 0.
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; n + 1];
    let mut p = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    for i in 1..=n {
        p[0] = i;
        let mut j0 = 0;
        let mut minv = vec![f64::INFINITY; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = p[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0;
            for j in 1..=n {
                if !used[j] {
                    let cur = cost(i0 - 1, j - 1) - u[i0] - v[j];
                    if cur < minv[j] {
                        minv[j] = cur;
                        way[j] = j0;
                    }
                    if minv[j] < delta {
                        delta = minv[j];
                        j1 = j;
                    }
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if p[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut assignment = vec![None; rows];
    for j in 1..=n {
        let i = p[j];
        if i >= 1 && i <= rows && j <= cols {
            assignment[i - 1] = Some(j - 1);
        }
    }
    assignment
}

/// Coefficient of variation (std / mean) of the nearest-neighbor distances.
pub fn nn_distance_uniformity(coords: ArrayView2<'_, f64>) -> Result<f64> {
    let n = coords.nrows();
    if n < 2 {
        return Err(Error::param("nearest-neighbor uniformity needs at least 2 points"));
    }
    let nn = knn(&PointCloud::euclidean(coords.to_owned()), 1)?;
    let d = nn.distances.column(0);
    let mean = d.sum() / n as f64;
    if mean == 0.0 {
        return Ok(0.0);
    }
    let var = d.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n as f64;
    Ok(var.sqrt() / mean)
}

/// Pearson correlation of two equally long samples.
pub fn pearson(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::param(format!("sample lengths differ ({} vs {})", x.len(), y.len())));
    }
    if x.len() < 2 {
        return Err(Error::param("correlation needs at least 2 samples"));
    }
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        let (da, db) = (a - mx, b - my);
        sxy += da * db;
        sxx += da * da;
        syy += db * db;
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(Error::data("correlation is undefined for a constant sample"));
    }
    Ok((sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0))
}

fn upper_triangle(dist: &Array2<f64>) -> Vec<f64> {
    let n = dist.nrows();
    let mut out = Vec::with_capacity(n * n.saturating_sub(1) / 2);
    for (i, r) in dist.axis_iter(Axis(0)).enumerate() {
        out.extend(r.iter().skip(i + 1));
    }
    out
}

/// Pearson correlation between the target distances and the embedded ones
/// over all unordered pairs.
pub fn geodesic_correlation(dm: &DenseMetric, emb: &Embedding) -> Result<f64> {
    if dm.n_points() != emb.n_points() {
        return Err(Error::param(format!(
            "metric has {} points, embedding {}",
            dm.n_points(),
            emb.n_points()
        )));
    }
    if !dm.is_finite() {
        return Err(Error::data("geodesic correlation needs a finite metric"));
    }
    let target = upper_triangle(&dm.dist);
    let embedded = upper_triangle(&pairwise_distances(emb.coords.view()).dist);
    pearson(&target, &embedded)
}

/// Scores computed on an embedding by the pipeline.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvaluationConfig {
    /// Clusters for k-means; 0 uses the number of distinct ground-truth labels.
    pub kmeans_k: usize,
    pub seed: u64,
    /// Independent k-means runs (seeds `seed`, `seed + 1`, ...); PSI is averaged.
    pub runs: usize,
}

impl Default for EvaluationConfig {
    fn default() -> Self {
        Self {
            kmeans_k: 0,
            seed: 0,
            runs: 1,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub nn_distance_cv: f64,
    pub geodesic_correlation: Option<f64>,
    pub kmeans_k: Option<usize>,
    pub psi_mean: Option<f64>,
    pub psi_runs: Vec<f64>,
}

const KMEANS_MAX_ITER: usize = 300;

/// Uniformity, geodesic correlation (when `dm` is finite) and, when labels are
/// present, the PSI of k-means clusterings against them.
pub fn evaluate(
    dm: Option<&DenseMetric>,
    emb: &Embedding,
    labels: Option<&[i64]>,
    cfg: &EvaluationConfig,
) -> Result<EvaluationReport> {
    let nn_distance_cv = nn_distance_uniformity(emb.coords.view())?;
    let geodesic_correlation = match dm {
        Some(dm) if dm.is_finite() => geodesic_correlation(dm, emb).ok(),
        _ => None,
    };
    let mut report = EvaluationReport {
        nn_distance_cv,
        geodesic_correlation,
        kmeans_k: None,
        psi_mean: None,
        psi_runs: Vec::new(),
    };
    if let Some(labels) = labels {
        let k = if cfg.kmeans_k == 0 {
            count_ids(&dense_ids(labels))
        } else {
            cfg.kmeans_k
        };
        let k = k.min(emb.n_points());
        for r in 0..cfg.runs.max(1) {
            let km = kmeans(emb.coords.view(), k, cfg.seed.wrapping_add(r as u64), KMEANS_MAX_ITER)?;
            report.psi_runs.push(pair_sets_index(&km.labels, labels)?);
        }
        report.kmeans_k = Some(k);
        report.psi_mean = Some(report.psi_runs.iter().sum::<f64>() / report.psi_runs.len() as f64);
    }
    Ok(report)
}
