//! Data model shared by every pipeline stage.

use std::collections::BTreeMap;
use std::fmt;

use ndarray::{Array1, Array2, ArrayView1};
use serde::{Deserialize, Serialize};

use crate::embedding::MdsMethod;
use crate::error::{Error, Result};

/// Tolerance used when checking a precomputed matrix for symmetry.
pub const SYMMETRY_TOLERANCE: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MetricKind {
    Euclidean,
    Precomputed,
}

/// A dataset of `N` points, either as feature vectors under the Euclidean
/// metric or as a precomputed `N x N` distance matrix.
///
/// When the metric is precomputed `points` has shape `N x 0`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PointCloud {
    pub points: Array2<f64>,
    pub labels: Option<Vec<i64>>,
    pub metric: MetricKind,
    pub precomputed: Option<Array2<f64>>,
}

impl PointCloud {
    pub fn euclidean(points: Array2<f64>) -> Self {
        Self {
            points: points.as_standard_layout().into_owned(),
            labels: None,
            metric: MetricKind::Euclidean,
            precomputed: None,
        }
    }

    pub fn precomputed(matrix: Array2<f64>) -> Self {
        let n = matrix.nrows();
        Self {
            points: Array2::zeros((n, 0)),
            labels: None,
            metric: MetricKind::Precomputed,
            precomputed: Some(matrix.as_standard_layout().into_owned()),
        }
    }

    pub fn with_labels(mut self, labels: Vec<i64>) -> Self {
        self.labels = Some(labels);
        self
    }

    /// Number of points `N`.
    pub fn len(&self) -> usize {
        match (&self.metric, &self.precomputed) {
            (MetricKind::Precomputed, Some(m)) => m.nrows(),
            _ => self.points.nrows(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Ambient dimension `n` of the feature vectors (0 for precomputed data).
    pub fn dim(&self) -> usize {
        self.points.ncols()
    }

    /// The original distance `d(x_i, x_j)`.
    pub fn distance(&self, i: usize, j: usize) -> f64 {
        match (&self.metric, &self.precomputed) {
            (MetricKind::Precomputed, Some(m)) => m[[i, j]],
            _ => euclidean(
                self.points.row(i).as_slice().expect("standard layout"),
                self.points.row(j).as_slice().expect("standard layout"),
            ),
        }
    }

    /// Keeps only the rows listed in `keep` (in that order).
    pub fn select(&self, keep: &[usize]) -> PointCloud {
        let points = self.points.select(ndarray::Axis(0), keep);
        let precomputed = self
            .precomputed
            .as_ref()
            .map(|m| m.select(ndarray::Axis(0), keep).select(ndarray::Axis(1), keep));
        let labels = self
            .labels
            .as_ref()
            .map(|l| keep.iter().map(|&i| l[i]).collect());
        PointCloud {
            points,
            labels,
            metric: self.metric,
            precomputed,
        }
    }
}

#[inline]
pub fn euclidean(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

/// A single broken `PointCloud` invariant.
#[derive(Clone, Debug, PartialEq)]
pub enum Violation {
    Empty,
    NonFiniteCoordinate { row: usize, column: usize },
    LabelCount { expected: usize, found: usize },
    MissingMatrix,
    NotSquare { rows: usize, columns: usize },
    Asymmetric { i: usize, j: usize, delta: f64 },
    NonzeroDiagonal { i: usize, value: f64 },
    NegativeDistance { i: usize, j: usize, value: f64 },
    NonFiniteDistance { i: usize, j: usize },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::Empty => write!(f, "point cloud has no points"),
            Violation::NonFiniteCoordinate { row, column } => {
                write!(f, "non-finite coordinate at row {row}, column {column}")
            }
            Violation::LabelCount { expected, found } => {
                write!(f, "expected {expected} labels, found {found}")
            }
            Violation::MissingMatrix => write!(f, "precomputed metric without a distance matrix"),
            Violation::NotSquare { rows, columns } => {
                write!(f, "distance matrix is {rows}x{columns}, not square")
            }
            Violation::Asymmetric { i, j, delta } => {
                write!(f, "distance matrix is asymmetric at ({i}, {j}) by {delta:e}")
            }
            Violation::NonzeroDiagonal { i, value } => {
                write!(f, "diagonal entry ({i}, {i}) is {value}, expected 0")
            }
            Violation::NegativeDistance { i, j, value } => {
                write!(f, "negative distance {value} at ({i}, {j})")
            }
            Violation::NonFiniteDistance { i, j } => {
                write!(f, "non-finite distance at ({i}, {j})")
            }
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }

    /// Converts a non-empty report into a data error listing every violation.
    pub fn into_result(self) -> Result<()> {
        if self.is_valid() {
            return Ok(());
        }
        let msg = self
            .violations
            .iter()
            .map(ToString::to_string)
            .collect::<Vec<_>>()
            .join("; ");
        Err(Error::Data(msg))
    }
}

/// Lists every violated `PointCloud` invariant; an empty report means the cloud is valid.
pub fn validate_point_cloud(pc: &PointCloud) -> ValidationReport {
    let mut violations = Vec::new();
    let n = pc.len();
    if n == 0 {
        violations.push(Violation::Empty);
    }
    if let Some(labels) = &pc.labels {
        if labels.len() != n {
            violations.push(Violation::LabelCount {
                expected: n,
                found: labels.len(),
            });
        }
    }
    match pc.metric {
        MetricKind::Euclidean => {
            for ((row, column), v) in pc.points.indexed_iter() {
                if !v.is_finite() {
                    violations.push(Violation::NonFiniteCoordinate { row, column });
                }
            }
        }
        MetricKind::Precomputed => match &pc.precomputed {
            None => violations.push(Violation::MissingMatrix),
            Some(m) if m.nrows() != m.ncols() => violations.push(Violation::NotSquare {
                rows: m.nrows(),
                columns: m.ncols(),
            }),
            Some(m) => {
                for i in 0..n {
                    let d = m[[i, i]];
                    if d != 0.0 {
                        violations.push(Violation::NonzeroDiagonal { i, value: d });
                    }
                    for j in 0..n {
                        let v = m[[i, j]];
                        if !v.is_finite() {
                            violations.push(Violation::NonFiniteDistance { i, j });
                        } else if v < 0.0 {
                            violations.push(Violation::NegativeDistance { i, j, value: v });
                        }
                        if j > i {
                            let delta = (v - m[[j, i]]).abs();
                            if delta > SYMMETRY_TOLERANCE || delta.is_nan() {
                                violations.push(Violation::Asymmetric { i, j, delta });
                            }
                        }
                    }
                }
            }
        },
    }
    ValidationReport { violations }
}

/// Union of the star graphs: each point's `k` nearest neighbors with their raw
/// and locally distorted distances.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NeighborGraph {
    pub k: usize,
    /// Row `i` holds the neighbors of point `i` by nondecreasing raw distance.
    pub neighbor_idx: Array2<usize>,
    pub raw_dist: Array2<f64>,
    pub local_dist: Array2<f64>,
    pub rho: Array1<f64>,
    pub sigma: Array1<f64>,
}

impl NeighborGraph {
    pub fn n_points(&self) -> usize {
        self.neighbor_idx.nrows()
    }

    /// Local distance `d_i(x_i, x_j)` if `j` is in the star of `i`.
    pub fn local(&self, i: usize, j: usize) -> Option<f64> {
        self.neighbor_idx
            .row(i)
            .iter()
            .position(|&n| n == j)
            .map(|p| self.local_dist[[i, p]])
    }
}

/// Symmetric sparse metric; a missing pair means infinite distance.
///
/// Stored distances are finite and nonnegative. Zero is a legal stored value
/// (a pseudo-metric), distinct from absence.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(into = "SparseMetricRepr", try_from = "SparseMetricRepr")]
pub struct SparseMetric {
    n_points: usize,
    entries: BTreeMap<(usize, usize), f64>,
}

#[derive(Serialize, Deserialize)]
struct SparseMetricRepr {
    n_points: usize,
    entries: Vec<(usize, usize, f64)>,
}

impl From<SparseMetric> for SparseMetricRepr {
    fn from(sm: SparseMetric) -> Self {
        SparseMetricRepr {
            n_points: sm.n_points,
            entries: sm.entries.into_iter().map(|((i, j), w)| (i, j, w)).collect(),
        }
    }
}

impl TryFrom<SparseMetricRepr> for SparseMetric {
    type Error = Error;

    fn try_from(repr: SparseMetricRepr) -> Result<Self> {
        let mut sm = SparseMetric::new(repr.n_points);
        for (i, j, w) in repr.entries {
            sm.insert(i, j, w)?;
        }
        Ok(sm)
    }
}

#[inline]
fn pair_key(i: usize, j: usize) -> (usize, usize) {
    if i < j {
        (i, j)
    } else {
        (j, i)
    }
}

impl SparseMetric {
    pub fn new(n_points: usize) -> Self {
        Self {
            n_points,
            entries: BTreeMap::new(),
        }
    }

    pub fn n_points(&self) -> usize {
        self.n_points
    }

    /// Sets the distance of the unordered pair `{i, j}`, replacing any previous value.
    pub fn insert(&mut self, i: usize, j: usize, distance: f64) -> Result<()> {
        if i == j {
            return Err(Error::data(format!("self-loop at {i}")));
        }
        if i >= self.n_points || j >= self.n_points {
            return Err(Error::data(format!(
                "pair ({i}, {j}) out of range for {} points",
                self.n_points
            )));
        }
        if !(distance.is_finite() && distance >= 0.0) {
            return Err(Error::data(format!(
                "distance {distance} for pair ({i}, {j}) must be finite and nonnegative"
            )));
        }
        self.entries.insert(pair_key(i, j), distance);
        Ok(())
    }

    pub fn get(&self, i: usize, j: usize) -> Option<f64> {
        self.entries.get(&pair_key(i, j)).copied()
    }

    /// Number of stored unordered pairs.
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Stored pairs as `(i, j, distance)` with `i < j`, in lexicographic order.
    pub fn iter(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        self.entries.iter().map(|(&(i, j), &w)| (i, j, w))
    }
}

/// Completed `N x N` distance matrix; unreachable pairs hold `f64::INFINITY`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DenseMetric {
    pub dist: Array2<f64>,
}

impl DenseMetric {
    pub fn new(dist: Array2<f64>) -> Self {
        Self { dist }
    }

    pub fn n_points(&self) -> usize {
        self.dist.nrows()
    }

    pub fn row(&self, i: usize) -> ArrayView1<'_, f64> {
        self.dist.row(i)
    }

    pub fn is_finite(&self) -> bool {
        self.dist.iter().all(|v| v.is_finite())
    }

    /// Largest finite entry, or `None` if no entry is finite.
    pub fn max_finite(&self) -> Option<f64> {
        self.dist
            .iter()
            .copied()
            .filter(|v| v.is_finite())
            .fold(None, |acc, v| Some(acc.map_or(v, |a: f64| a.max(v))))
    }

    /// Restriction to the given points.
    pub fn select(&self, keep: &[usize]) -> DenseMetric {
        DenseMetric {
            dist: self
                .dist
                .select(ndarray::Axis(0), keep)
                .select(ndarray::Axis(1), keep),
        }
    }
}

/// Low-dimensional coordinates produced by MDS.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Embedding {
    /// `N x m` coordinates.
    pub coords: Array2<f64>,
    /// Raw stress of `coords` against the target metric.
    pub stress: f64,
    pub method: MdsMethod,
    /// Leading eigenvalues of the double-centered matrix, descending. Entries
    /// that are not positive correspond to zero-filled columns. Empty when no
    /// eigendecomposition was performed.
    pub eigenvalues: Vec<f64>,
}

impl Embedding {
    pub fn dim(&self) -> usize {
        self.coords.ncols()
    }

    pub fn n_points(&self) -> usize {
        self.coords.nrows()
    }
}

#[cfg(test)]
mod tests {
    use ndarray::array;

    use super::*;

    #[test]
    fn well_formed_cloud_is_valid() {
        let pc = PointCloud::euclidean(array![[0.0, 0.0], [1.0, 0.0], [0.0, 2.0]]);
        assert!(validate_point_cloud(&pc).is_valid());
    }

    #[test]
    fn asymmetric_matrix_is_reported() {
        let pc = PointCloud::precomputed(array![[0.0, 1.0], [2.0, 0.0]]);
        let report = validate_point_cloud(&pc);
        assert!(matches!(
            report.violations.as_slice(),
            [Violation::Asymmetric { i: 0, j: 1, .. }]
        ));
    }

    #[test]
    fn nonzero_diagonal_is_reported() {
        let pc = PointCloud::precomputed(array![[0.5, 1.0], [1.0, 0.0]]);
        let report = validate_point_cloud(&pc);
        assert_eq!(
            report.violations,
            vec![Violation::NonzeroDiagonal { i: 0, value: 0.5 }]
        );
    }

    #[test]
    fn label_count_mismatch() {
        let pc = PointCloud::euclidean(array![[0.0], [1.0]]).with_labels(vec![1]);
        assert!(!validate_point_cloud(&pc).is_valid());
    }

    #[test]
    fn empty_cloud_is_invalid() {
        let pc = PointCloud::euclidean(Array2::zeros((0, 3)));
        assert_eq!(validate_point_cloud(&pc).violations, vec![Violation::Empty]);
    }

    #[test]
    fn sparse_lookup_is_symmetric() {
        let mut sm = SparseMetric::new(4);
        sm.insert(3, 1, 0.25).unwrap();
        assert_eq!(sm.get(1, 3), Some(0.25));
        assert_eq!(sm.get(3, 1), Some(0.25));
        assert_eq!(sm.get(0, 1), None);
        assert!(sm.insert(2, 2, 1.0).is_err());
        assert!(sm.insert(0, 1, f64::INFINITY).is_err());
        assert!(sm.insert(0, 9, 1.0).is_err());
    }

    #[test]
    fn types_round_trip_through_json() {
        let pc = PointCloud::euclidean(array![[0.1, 1.0 / 3.0], [2.5e-300, -7.0]])
            .with_labels(vec![0, 4]);
        let back: PointCloud = serde_json::from_str(&serde_json::to_string(&pc).unwrap()).unwrap();
        assert_eq!(back, pc);

        let mut sm = SparseMetric::new(3);
        sm.insert(0, 2, 0.1 + 0.2).unwrap();
        sm.insert(1, 2, 0.0).unwrap();
        let back: SparseMetric =
            serde_json::from_str(&serde_json::to_string(&sm).unwrap()).unwrap();
        assert_eq!(back, sm);

        let emb = Embedding {
            coords: array![[std::f64::consts::PI, -1e-17], [0.0, 1.0]],
            stress: 0.125,
            method: MdsMethod::ClassicalMds,
            eigenvalues: vec![2.0, -0.5],
        };
        let back: Embedding = serde_json::from_str(&serde_json::to_string(&emb).unwrap()).unwrap();
        assert_eq!(back, emb);
    }
}
