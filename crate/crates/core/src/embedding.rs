//! Classical and metric multidimensional scaling.

use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;
use ndarray::parallel::prelude::*;
use ndarray::{Array1, Array2, ArrayView2, Axis};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::eigen::{normalize_signs, top_symmetric};
use crate::error::{Error, Result};
use crate::types::{DenseMetric, Embedding};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MdsMethod {
    ClassicalMds,
    MetricMds,
}

impl MdsMethod {
    pub fn as_str(self) -> &'static str {
        match self {
            MdsMethod::ClassicalMds => "classical_mds",
            MdsMethod::MetricMds => "metric_mds",
        }
    }
}

impl fmt::Display for MdsMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for MdsMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "classical_mds" | "classical" => Ok(MdsMethod::ClassicalMds),
            "metric_mds" | "metric" => Ok(MdsMethod::MetricMds),
            other => Err(Error::param(format!(
                "unknown MDS method `{other}` (expected classical_mds or metric_mds)"
            ))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MdsInit {
    ClassicalMds,
    Random,
}

impl MdsInit {
    pub fn as_str(self) -> &'static str {
        match self {
            MdsInit::ClassicalMds => "classical_mds",
            MdsInit::Random => "random",
        }
    }
}

impl FromStr for MdsInit {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "classical_mds" | "classical" => Ok(MdsInit::ClassicalMds),
            "random" => Ok(MdsInit::Random),
            other => Err(Error::param(format!(
                "unknown MDS init `{other}` (expected classical_mds or random)"
            ))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MdsConfig {
    pub method: MdsMethod,
    /// Target dimension `m`.
    pub dim: usize,
    pub max_iter: usize,
    pub learning_rate: f64,
    pub init: MdsInit,
    pub seed: u64,
    /// Stop once the relative stress change of an accepted step falls below this.
    pub convergence_tol: f64,
}

impl Default for MdsConfig {
    fn default() -> Self {
        Self {
            method: MdsMethod::ClassicalMds,
            dim: 2,
            max_iter: 500,
            learning_rate: 1e-2,
            init: MdsInit::ClassicalMds,
            seed: 0,
            convergence_tol: 1e-7,
        }
    }
}

impl MdsConfig {
    pub fn validate(&self, n_points: usize) -> Result<()> {
        if self.dim == 0 || self.dim >= n_points.max(1) {
            return Err(Error::param(format!(
                "dim must satisfy 1 <= dim <= N-1 (dim = {}, N = {n_points})",
                self.dim
            )));
        }
        if self.max_iter == 0 {
            return Err(Error::param("max_iter must be at least 1"));
        }
        if !(self.learning_rate > 0.0) {
            return Err(Error::param("lr must be positive"));
        }
        if !(self.convergence_tol > 0.0) {
            return Err(Error::param("tol must be positive"));
        }
        Ok(())
    }
}

fn check_finite(dm: &DenseMetric) -> Result<()> {
    if let Some(((i, j), v)) = dm.dist.indexed_iter().find(|(_, v)| !v.is_finite()) {
        return Err(Error::data(format!(
            "distance ({i}, {j}) is {v}; MDS needs a finite metric"
        )));
    }
    Ok(())
}

/// `-1/2 J D^2 J` with `J = I - 11^T / N`.
pub fn double_center(dm: &DenseMetric) -> Array2<f64> {
    let n = dm.n_points();
    let sq = dm.dist.mapv(|d| d * d);
    let row_mean: Array1<f64> = sq
        .axis_iter(Axis(0))
        .map(|r| r.sum() / n as f64)
        .collect();
    let grand = row_mean.sum() / n as f64;
    let mut b = sq;
    b.axis_iter_mut(Axis(0))
        .into_par_iter()
        .enumerate()
        .for_each(|(i, mut row)| {
            for (j, v) in row.iter_mut().enumerate() {
                *v = -0.5 * (*v - row_mean[i] - row_mean[j] + grand);
            }
        });
    b
}

/// Classical MDS: coordinates from the `m` leading eigenpairs of the
/// double-centered squared distances. Columns whose eigenvalue is not
/// positive are zero-filled; the eigenvalues are kept on the result.
pub fn classical_mds(dm: &DenseMetric, m: usize) -> Result<Embedding> {
    let n = dm.n_points();
    if m == 0 || m >= n {
        return Err(Error::param(format!(
            "dim must satisfy 1 <= dim <= N-1 (dim = {m}, N = {n})"
        )));
    }
    check_finite(dm)?;
    let b = double_center(dm);
    let mut eig = top_symmetric(b.view(), m)?;
    normalize_signs(&mut eig.vectors);
    let mut coords = eig.vectors;
    for (mut col, &lambda) in coords.columns_mut().into_iter().zip(eig.values.iter()) {
        let scale = lambda.max(0.0).sqrt();
        col.mapv_inplace(|v| v * scale);
    }
    let stress = raw_stress(dm, coords.view());
    Ok(Embedding {
        coords,
        stress,
        method: MdsMethod::ClassicalMds,
        eigenvalues: eig.values.to_vec(),
    })
}

/// `sum_{i<j} (D_ij - |y_i - y_j|)^2`, summed row by row in index order.
pub fn raw_stress(dm: &DenseMetric, coords: ArrayView2<'_, f64>) -> f64 {
    let n = dm.n_points();
    let coords = coords.as_standard_layout();
    let rows: Vec<f64> = (0..n)
        .into_par_iter()
        .map(|i| {
            let yi = coords.row(i);
            let mut s = 0.0;
            for j in i + 1..n {
                let d = distance(yi.as_slice(), coords.row(j).as_slice());
                let r = dm.dist[[i, j]] - d;
                s += r * r;
            }
            s
        })
        .collect();
    rows.iter().sum()
}

#[inline]
fn distance(a: Option<&[f64]>, b: Option<&[f64]>) -> f64 {
    let (a, b) = (a.expect("standard layout"), b.expect("standard layout"));
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

/// Raw stress and its gradient with respect to every coordinate.
///
/// Pairs at zero embedded distance contribute no gradient (the zero subgradient).
pub fn stress_gradient(dm: &DenseMetric, coords: ArrayView2<'_, f64>) -> (f64, Array2<f64>) {
    let n = dm.n_points();
    let m = coords.ncols();
    let coords = coords.as_standard_layout();
    let mut grad = Array2::zeros((n, m));
    let partial: Vec<f64> = grad
        .axis_iter_mut(Axis(0))
        .into_par_iter()
        .enumerate()
        .map(|(i, mut g)| {
            let yi = coords.row(i);
            let mut s = 0.0;
            for j in 0..n {
                if j == i {
                    continue;
                }
                let yj = coords.row(j);
                let d = distance(yi.as_slice(), yj.as_slice());
                let r = dm.dist[[i, j]] - d;
                if j > i {
                    s += r * r;
                }
                if d > 0.0 {
                    let c = -2.0 * r / d;
                    for a in 0..m {
                        g[a] += c * (yi[a] - yj[a]);
                    }
                }
            }
            s
        })
        .collect();
    (partial.iter().sum(), grad)
}

/// Accepted-step history of a metric MDS run.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct StressTrace {
    /// Stress of the initialization followed by the stress after each accepted step.
    pub accepted: Vec<f64>,
    pub rejected_steps: usize,
    pub iterations: usize,
}

const LR_GROWTH: f64 = 1.2;
const MAX_HALVINGS: usize = 60;

/// Metric MDS from the configured initialization.
pub fn metric_mds(dm: &DenseMetric, cfg: &MdsConfig) -> Result<Embedding> {
    Ok(metric_mds_traced(dm, cfg)?.0)
}

/// Metric MDS returning the stress trace as well.
pub fn metric_mds_traced(dm: &DenseMetric, cfg: &MdsConfig) -> Result<(Embedding, StressTrace)> {
    let n = dm.n_points();
    cfg.validate(n)?;
    check_finite(dm)?;
    let (init, eigenvalues) = match cfg.init {
        MdsInit::ClassicalMds => {
            let e = classical_mds(dm, cfg.dim)?;
            (e.coords, e.eigenvalues)
        }
        MdsInit::Random => (random_init(dm, cfg.dim, cfg.seed), Vec::new()),
    };
    let (mut emb, trace) = metric_mds_from(dm, init, cfg)?;
    emb.eigenvalues = eigenvalues;
    Ok((emb, trace))
}

fn random_init(dm: &DenseMetric, m: usize, seed: u64) -> Array2<f64> {
    let n = dm.n_points();
    let pairs = (n * (n - 1) / 2).max(1) as f64;
    let mean = dm.dist.sum() / (2.0 * pairs);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Array2::from_shape_simple_fn((n, m), || {
        let z: f64 = StandardNormal.sample(&mut rng);
        z * mean
    })
}

/// Full-batch gradient descent on raw stress from explicit initial
/// coordinates. A step that does not lower the stress is rejected and retried
/// with half the learning rate; accepted steps grow it by a factor of 1.2.
pub fn metric_mds_from(
    dm: &DenseMetric,
    init: Array2<f64>,
    cfg: &MdsConfig,
) -> Result<(Embedding, StressTrace)> {
    let n = dm.n_points();
    if init.nrows() != n || init.ncols() != cfg.dim {
        return Err(Error::param(format!(
            "initial coordinates are {}x{}, expected {n}x{}",
            init.nrows(),
            init.ncols(),
            cfg.dim
        )));
    }
    check_finite(dm)?;
    let mut coords = init.as_standard_layout().into_owned();
    let (mut stress, mut grad) = stress_gradient(dm, coords.view());
    if !stress.is_finite() {
        return Err(Error::numerical("initial stress is not finite"));
    }
    let mut trace = StressTrace {
        accepted: vec![stress],
        ..Default::default()
    };
    let mut lr = cfg.learning_rate;
    let mut halvings = 0;

    while trace.iterations < cfg.max_iter && stress > 0.0 {
        trace.iterations += 1;
        let candidate = &coords - &(&grad * lr);
        let (new_stress, new_grad) = stress_gradient(dm, candidate.view());
        if new_stress.is_finite() && new_stress < stress {
            let change = (stress - new_stress) / stress;
            coords = candidate;
            stress = new_stress;
            grad = new_grad;
            trace.accepted.push(stress);
            lr *= LR_GROWTH;
            halvings = 0;
            if change < cfg.convergence_tol {
                break;
            }
        } else {
            trace.rejected_steps += 1;
            lr *= 0.5;
            halvings += 1;
            if halvings > MAX_HALVINGS {
                if trace.accepted.len() == 1 && !new_stress.is_finite() {
                    return Err(Error::numerical(
                        "metric MDS diverged (stress is NaN); use a smaller lr",
                    ));
                }
                // No descent direction at any step size: a stationary point.
                break;
            }
        }
    }
    Ok((
        Embedding {
            coords,
            stress,
            method: MdsMethod::MetricMds,
            eigenvalues: Vec::new(),
        },
        trace,
    ))
}

/// Classical or metric MDS according to `cfg.method`.
pub fn embed(dm: &DenseMetric, cfg: &MdsConfig) -> Result<Embedding> {
    cfg.validate(dm.n_points())?;
    match cfg.method {
        MdsMethod::ClassicalMds => classical_mds(dm, cfg.dim),
        MdsMethod::MetricMds => metric_mds(dm, cfg),
    }
}

fn centered(a: ArrayView2<'_, f64>) -> (Array2<f64>, Array1<f64>) {
    let mean = a.mean_axis(Axis(0)).expect("non-empty");
    (&a - &mean, mean)
}

/// Rigidly aligns `a` onto `b` (orthogonal transform plus translation) in
/// the least-squares sense and returns the aligned copy of `a`.
pub fn procrustes_align(a: ArrayView2<'_, f64>, b: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
    if a.dim() != b.dim() {
        return Err(Error::param(format!(
            "shape mismatch: {:?} vs {:?}",
            a.dim(),
            b.dim()
        )));
    }
    if a.nrows() == 0 {
        return Err(Error::param("cannot align empty configurations"));
    }
    let m = a.ncols();
    let (ac, _) = centered(a);
    let (bc, b_mean) = centered(b);
    let cross = ac.t().dot(&bc);
    let cross = DMatrix::from_fn(m, m, |i, j| cross[[i, j]]);
    let svd = cross.svd(true, true);
    let (u, vt) = (
        svd.u.ok_or_else(|| Error::numerical("SVD failed"))?,
        svd.v_t.ok_or_else(|| Error::numerical("SVD failed"))?,
    );
    let r = u * vt;
    let rotation = Array2::from_shape_fn((m, m), |(i, j)| r[(i, j)]);
    Ok(ac.dot(&rotation) + &b_mean)
}

/// Root-mean-square point deviation between `a` and `b` after the best rigid alignment.
pub fn procrustes_distance(a: &Embedding, b: &Embedding) -> Result<f64> {
    procrustes_rmsd(a.coords.view(), b.coords.view())
}

pub fn procrustes_rmsd(a: ArrayView2<'_, f64>, b: ArrayView2<'_, f64>) -> Result<f64> {
    let aligned = procrustes_align(a, b)?;
    let sq: f64 = (&aligned - &b).mapv(|v| v * v).sum();
    Ok((sq / a.nrows() as f64).sqrt())
}

/// Pairwise Euclidean distances between the rows of `coords`.
pub fn pairwise_distances(coords: ArrayView2<'_, f64>) -> DenseMetric {
    let n = coords.nrows();
    let coords = coords.as_standard_layout();
    let mut dist = Array2::zeros((n, n));
    dist.axis_iter_mut(Axis(0))
        .into_par_iter()
        .enumerate()
        .for_each(|(i, mut row)| {
            for j in 0..n {
                row[j] = distance(coords.row(i).as_slice(), coords.row(j).as_slice());
            }
        });
    DenseMetric::new(dist)
}
