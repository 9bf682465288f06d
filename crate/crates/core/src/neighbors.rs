//! Exact k-nearest-neighbor search.
//!
//! Euclidean clouds are searched with a kd-tree; precomputed matrices with a
//! per-row partial selection. Both order neighbors by `(distance, index)`, so
//! equidistant neighbors are broken by the smaller index.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use ndarray::{Array2, ArrayView2};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::types::{euclidean, MetricKind, PointCloud};

/// Output of [`knn`]: row `i` lists the `k` nearest neighbors of point `i`.
#[derive(Clone, Debug, PartialEq)]
pub struct KnnResult {
    pub indices: Array2<usize>,
    pub distances: Array2<f64>,
}

impl KnnResult {
    pub fn k(&self) -> usize {
        self.indices.ncols()
    }
}

#[derive(Clone, Copy, Debug)]
struct Candidate {
    dist: f64,
    idx: usize,
}

impl PartialEq for Candidate {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Candidate {}

impl PartialOrd for Candidate {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Candidate {
    fn cmp(&self, other: &Self) -> Ordering {
        self.dist
            .total_cmp(&other.dist)
            .then(self.idx.cmp(&other.idx))
    }
}

/// Finds the `k` nearest neighbors of every point, excluding the point itself.
pub fn knn(pc: &PointCloud, k: usize) -> Result<KnnResult> {
    let n = pc.len();
    if k == 0 || k >= n {
        return Err(Error::param(format!(
            "k must satisfy 1 <= k <= N-1 (k = {k}, N = {n})"
        )));
    }
    match pc.metric {
        MetricKind::Euclidean => {
            if let Some(((r, c), _)) = pc.points.indexed_iter().find(|(_, v)| v.is_nan()) {
                return Err(Error::data(format!("NaN coordinate at row {r}, column {c}")));
            }
            let tree = KdTree::build(pc.points.view());
            let rows: Vec<Vec<Candidate>> = (0..n)
                .into_par_iter()
                .map(|i| tree.query(i, k))
                .collect();
            Ok(assemble(rows, k))
        }
        MetricKind::Precomputed => {
            let m = pc
                .precomputed
                .as_ref()
                .ok_or_else(|| Error::data("precomputed metric without a distance matrix"))?;
            if let Some(((r, c), _)) = m.indexed_iter().find(|(_, v)| v.is_nan()) {
                return Err(Error::data(format!("NaN distance at ({r}, {c})")));
            }
            let rows: Vec<Vec<Candidate>> = (0..n)
                .into_par_iter()
                .map(|i| {
                    let mut row: Vec<Candidate> = (0..n)
                        .filter(|&j| j != i)
                        .map(|j| Candidate {
                            dist: m[[i, j]],
                            idx: j,
                        })
                        .collect();
                    row.select_nth_unstable(k - 1);
                    row.truncate(k);
                    row.sort_unstable();
                    row
                })
                .collect();
            Ok(assemble(rows, k))
        }
    }
}

fn assemble(rows: Vec<Vec<Candidate>>, k: usize) -> KnnResult {
    let n = rows.len();
    let mut indices = Array2::zeros((n, k));
    let mut distances = Array2::zeros((n, k));
    for (i, row) in rows.into_iter().enumerate() {
        for (j, c) in row.into_iter().enumerate() {
            indices[[i, j]] = c.idx;
            distances[[i, j]] = c.dist;
        }
    }
    KnnResult { indices, distances }
}

const LEAF_SIZE: usize = 16;
// Pruning slack covering rounding in the computed distances.
const PRUNE_SLACK: f64 = 1e-9;

enum Node {
    Leaf {
        start: usize,
        end: usize,
    },
    Split {
        dim: usize,
        value: f64,
        left: usize,
        right: usize,
    },
}

/// Static kd-tree over the rows of a point matrix.
pub struct KdTree<'a> {
    points: ArrayView2<'a, f64>,
    order: Vec<usize>,
    nodes: Vec<Node>,
}

impl<'a> KdTree<'a> {
    pub fn build(points: ArrayView2<'a, f64>) -> Self {
        let mut tree = KdTree {
            points,
            order: (0..points.nrows()).collect(),
            nodes: Vec::new(),
        };
        if points.nrows() > 0 {
            tree.build_node(0, points.nrows());
        }
        tree
    }

    fn build_node(&mut self, start: usize, end: usize) -> usize {
        let id = self.nodes.len();
        let dims = self.points.ncols();
        if end - start <= LEAF_SIZE || dims == 0 {
            self.nodes.push(Node::Leaf { start, end });
            return id;
        }
        let points = self.points;
        let slice = &mut self.order[start..end];
        let dim = (0..dims)
            .map(|d| {
                let (lo, hi) = slice.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &i| {
                    let v = points[[i, d]];
                    (lo.min(v), hi.max(v))
                });
                (d, hi - lo)
            })
            .max_by(|a, b| a.1.total_cmp(&b.1).then(b.0.cmp(&a.0)))
            .map(|(d, _)| d)
            .unwrap_or(0);
        let mid = slice.len() / 2;
        slice.select_nth_unstable_by(mid, |&a, &b| points[[a, dim]].total_cmp(&points[[b, dim]]));
        let value = points[[slice[mid], dim]];
        self.nodes.push(Node::Leaf { start, end });
        let left = self.build_node(start, start + mid);
        let right = self.build_node(start + mid, end);
        self.nodes[id] = Node::Split {
            dim,
            value,
            left,
            right,
        };
        id
    }

    fn row(&self, i: usize) -> &[f64] {
        self.points.row(i).to_slice().expect("standard layout")
    }

    /// The `k` nearest stored points to stored point `query`, excluding itself,
    /// sorted by `(distance, index)`.
    fn query(&self, query: usize, k: usize) -> Vec<Candidate> {
        let q = self.row(query);
        let mut heap = BinaryHeap::with_capacity(k + 1);
        self.search(0, q, query, k, &mut heap);
        heap.into_sorted_vec()
    }

    fn search(&self, node: usize, q: &[f64], exclude: usize, k: usize, heap: &mut BinaryHeap<Candidate>) {
        match self.nodes[node] {
            Node::Leaf { start, end } => {
                for &i in &self.order[start..end] {
                    if i == exclude {
                        continue;
                    }
                    let c = Candidate {
                        dist: euclidean(q, self.row(i)),
                        idx: i,
                    };
                    if heap.len() < k {
                        heap.push(c);
                    } else if c < *heap.peek().expect("k >= 1") {
                        heap.pop();
                        heap.push(c);
                    }
                }
            }
            Node::Split {
                dim,
                value,
                left,
                right,
            } => {
                let diff = q[dim] - value;
                let (near, far) = if diff < 0.0 { (left, right) } else { (right, left) };
                self.search(near, q, exclude, k, heap);
                let visit_far = heap.len() < k || {
                    let worst = heap.peek().expect("non-empty").dist;
                    diff.abs() <= worst * (1.0 + PRUNE_SLACK)
                };
                if visit_far {
                    self.search(far, q, exclude, k, heap);
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use ndarray::array;

    use super::*;

    fn line(xs: &[f64]) -> PointCloud {
        PointCloud::euclidean(Array2::from_shape_vec((xs.len(), 1), xs.to_vec()).unwrap())
    }

    #[test]
    fn one_dimensional_order_k1() {
        let r = knn(&line(&[0.0, 1.0, 3.0]), 1).unwrap();
        assert_eq!(r.indices, array![[1], [0], [1]]);
        assert_eq!(r.distances, array![[1.0], [1.0], [2.0]]);
    }

    #[test]
    fn one_dimensional_order_k2() {
        let r = knn(&line(&[0.0, 1.0, 3.0]), 2).unwrap();
        assert_eq!(r.indices.row(0).to_vec(), vec![1, 2]);
        assert_eq!(r.distances.row(0).to_vec(), vec![1.0, 3.0]);
    }

    #[test]
    fn ties_prefer_smaller_index() {
        // 0 and 2 are both at distance 1 from point 1.
        let r = knn(&line(&[0.0, 1.0, 2.0, 10.0]), 1).unwrap();
        assert_eq!(r.indices[[1, 0]], 0);
    }

    #[test]
    fn duplicates_are_legal_neighbors() {
        let r = knn(&line(&[5.0, 5.0, 6.0]), 1).unwrap();
        assert_eq!(r.indices[[0, 0]], 1);
        assert_eq!(r.distances[[0, 0]], 0.0);
        assert_eq!(r.indices[[1, 0]], 0);
    }

    #[test]
    fn precomputed_matches_coordinates() {
        let xs: [f64; 4] = [0.0, 1.0, 3.0, 7.0];
        let n = xs.len();
        let m = Array2::from_shape_fn((n, n), |(i, j)| (xs[i] - xs[j]).abs());
        let a = knn(&line(&xs), 2).unwrap();
        let b = knn(&PointCloud::precomputed(m), 2).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn parameter_errors() {
        let pc = line(&[0.0, 1.0, 3.0]);
        assert!(matches!(knn(&pc, 0), Err(Error::Parameter(_))));
        assert!(matches!(knn(&pc, 3), Err(Error::Parameter(_))));
    }

    #[test]
    fn nan_is_a_data_error() {
        let pc = line(&[0.0, f64::NAN, 3.0]);
        assert!(matches!(knn(&pc, 1), Err(Error::Data(_))));
        let m = array![[0.0, f64::NAN], [f64::NAN, 0.0]];
        assert!(matches!(knn(&PointCloud::precomputed(m), 1), Err(Error::Data(_))));
    }
}
