//! Locally distorted metrics `d_i` around each point.
//!
//! Each point `x_i` sees its `k` nearest neighbors at distance
//! `max((d(x_i, x_ij) - rho_i) / sigma_i, 0)`; every other pair is infinitely far
//! in `d_i`. The resulting weighted star graphs are stored in a [`NeighborGraph`].

use std::fmt;
use std::str::FromStr;

use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Zip};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::neighbors::{knn, KnnResult};
use crate::types::{NeighborGraph, PointCloud};

/// How the per-point scale `sigma_i` is chosen.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SigmaMode {
    /// `sigma_i` is the shifted distance to the `k`-th neighbor.
    KthNeighbor,
    /// `sigma_i` solves `sum_j exp(-(d_ij - rho_i) / sigma_i) = log2(k)`.
    BinarySearch,
    /// `sigma_i = 1`; with `apply_rho = false` this leaves the input metric undistorted.
    Unit,
}

impl SigmaMode {
    pub fn as_str(self) -> &'static str {
        match self {
            SigmaMode::KthNeighbor => "kth_neighbor",
            SigmaMode::BinarySearch => "binary_search",
            SigmaMode::Unit => "unit",
        }
    }
}

impl fmt::Display for SigmaMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for SigmaMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "kth_neighbor" | "kth" => Ok(SigmaMode::KthNeighbor),
            "binary_search" => Ok(SigmaMode::BinarySearch),
            "unit" => Ok(SigmaMode::Unit),
            other => Err(Error::param(format!(
                "unknown sigma mode `{other}` (expected kth_neighbor, binary_search or unit)"
            ))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LocalMetricConfig {
    pub sigma_mode: SigmaMode,
    pub apply_rho: bool,
    pub binary_search_tolerance: f64,
    pub binary_search_max_iter: usize,
    pub sigma_floor: f64,
}

impl Default for LocalMetricConfig {
    fn default() -> Self {
        Self {
            sigma_mode: SigmaMode::KthNeighbor,
            apply_rho: true,
            binary_search_tolerance: 1e-5,
            binary_search_max_iter: 100,
            sigma_floor: 1e-12,
        }
    }
}

impl LocalMetricConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.binary_search_tolerance > 0.0) {
            return Err(Error::param("bs_tol must be positive"));
        }
        if self.binary_search_max_iter == 0 {
            return Err(Error::param("bs_max_iter must be at least 1"));
        }
        if !(self.sigma_floor > 0.0) {
            return Err(Error::param("sigma_floor must be positive"));
        }
        Ok(())
    }
}

/// `rho_i` is the distance to the nearest neighbor, or 0 when the shift is disabled.
pub fn compute_rho(raw_dist: ArrayView2<'_, f64>, apply_rho: bool) -> Array1<f64> {
    if apply_rho && raw_dist.ncols() > 0 {
        raw_dist.column(0).to_owned()
    } else {
        Array1::zeros(raw_dist.nrows())
    }
}

/// `sigma_i = max(raw_dist[i][k-1] - rho_i, floor)`.
pub fn compute_sigma_kth(
    raw_dist: ArrayView2<'_, f64>,
    rho: ArrayView1<'_, f64>,
    sigma_floor: f64,
) -> Array1<f64> {
    let last = raw_dist.ncols() - 1;
    Array1::from_shape_fn(raw_dist.nrows(), |i| {
        (raw_dist[[i, last]] - rho[i]).max(sigma_floor)
    })
}

/// Result of the per-point `sigma` search.
#[derive(Clone, Debug, PartialEq)]
pub struct SigmaSearch {
    pub sigma: Array1<f64>,
    /// `|sum_j exp(-(d_ij - rho_i) / sigma_i) - log2(k)|` at the returned `sigma_i`.
    pub residual: Array1<f64>,
    /// Points whose equation has no root above the floor; their `sigma_i` is the floor.
    pub clamped: Vec<bool>,
}

fn membership_sum(shifted: &[f64], sigma: f64) -> f64 {
    shifted.iter().map(|d| (-d / sigma).exp()).sum()
}

fn solve_row(
    index: usize,
    shifted: &[f64],
    target: f64,
    cfg: &LocalMetricConfig,
) -> Result<(f64, f64, bool)> {
    let f = |s: f64| membership_sum(shifted, s) - target;
    let floor = cfg.sigma_floor;
    let max_shifted = shifted.iter().copied().fold(0.0, f64::max);
    // As sigma -> 0 the sum tends to the number of zero shifted distances; if
    // that already reaches the target there is no positive root.
    let zeros = shifted.iter().filter(|&&d| d == 0.0).count();
    if zeros as f64 >= target {
        return Ok((floor, f(floor).abs(), true));
    }

    let mut hi = 1e3 * max_shifted;
    let mut doublings = 0;
    while f(hi) < 0.0 {
        hi *= 2.0;
        doublings += 1;
        if doublings > cfg.binary_search_max_iter || !hi.is_finite() {
            return Err(Error::numerical(format!(
                "sigma bracket expansion failed for point {index} after {doublings} doublings"
            )));
        }
    }

    let mut lo = 1e-6 * max_shifted;
    while f(lo) > 0.0 {
        lo *= 0.5;
        if lo <= floor {
            let r = f(floor);
            if r >= 0.0 {
                return Ok((floor, r.abs(), true));
            }
            lo = floor;
            break;
        }
    }

    let mut best = (hi, f(hi).abs());
    for _ in 0..cfg.binary_search_max_iter {
        let mid = 0.5 * (lo + hi);
        let fm = f(mid);
        if fm.abs() < best.1 {
            best = (mid, fm.abs());
        }
        if fm.abs() <= cfg.binary_search_tolerance {
            break;
        }
        if fm > 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok((best.0.max(floor), best.1, false))
}

/// Solves `sum_j exp(-(raw_dist[i][j] - rho_i) / sigma_i) = log2(k)` for every
/// point by bracketed bisection. Shifted distances are clamped at 0.
pub fn compute_sigma_binary_search(
    raw_dist: ArrayView2<'_, f64>,
    rho: ArrayView1<'_, f64>,
    cfg: &LocalMetricConfig,
) -> Result<SigmaSearch> {
    cfg.validate()?;
    let k = raw_dist.ncols();
    if k < 2 {
        return Err(Error::param("binary-search sigma needs k >= 2"));
    }
    let target = (k as f64).log2();
    let rows: Vec<(f64, f64, bool)> = (0..raw_dist.nrows())
        .into_par_iter()
        .map(|i| {
            let shifted: Vec<f64> = raw_dist
                .row(i)
                .iter()
                .map(|d| (d - rho[i]).max(0.0))
                .collect();
            solve_row(i, &shifted, target, cfg)
        })
        .collect::<Result<_>>()?;
    Ok(SigmaSearch {
        sigma: rows.iter().map(|r| r.0).collect(),
        residual: rows.iter().map(|r| r.1).collect(),
        clamped: rows.iter().map(|r| r.2).collect(),
    })
}

/// `local[i][j] = max((raw[i][j] - rho_i) / sigma_i, 0)`.
pub fn local_distances(
    raw_dist: ArrayView2<'_, f64>,
    rho: ArrayView1<'_, f64>,
    sigma: ArrayView1<'_, f64>,
) -> Array2<f64> {
    let mut local = raw_dist.to_owned();
    Zip::from(local.rows_mut())
        .and(rho)
        .and(sigma)
        .for_each(|mut row, &r, &s| row.mapv_inplace(|d| ((d - r) / s).max(0.0)));
    local
}

/// Star graphs plus the diagnostics of the sigma solve.
#[derive(Clone, Debug)]
pub struct StarGraphs {
    pub graph: NeighborGraph,
    /// Per-point residuals and clamp flags; only set in binary-search mode.
    pub search: Option<SigmaSearch>,
}

/// Applies the local distortion to a precomputed neighbor table.
pub fn star_graphs_from_knn(knn: KnnResult, cfg: &LocalMetricConfig) -> Result<StarGraphs> {
    cfg.validate()?;
    let raw = knn.distances;
    let rho = compute_rho(raw.view(), cfg.apply_rho);
    let (sigma, search) = match cfg.sigma_mode {
        SigmaMode::KthNeighbor => (compute_sigma_kth(raw.view(), rho.view(), cfg.sigma_floor), None),
        SigmaMode::BinarySearch => {
            let s = compute_sigma_binary_search(raw.view(), rho.view(), cfg)?;
            (s.sigma.clone(), Some(s))
        }
        SigmaMode::Unit => (Array1::ones(raw.nrows()), None),
    };
    let local = local_distances(raw.view(), rho.view(), sigma.view());
    Ok(StarGraphs {
        graph: NeighborGraph {
            k: raw.ncols(),
            neighbor_idx: knn.indices,
            raw_dist: raw,
            local_dist: local,
            rho,
            sigma,
        },
        search,
    })
}

/// Finds the `k` nearest neighbors and builds the star graph of every point.
pub fn build_star_graphs(pc: &PointCloud, k: usize, cfg: &LocalMetricConfig) -> Result<NeighborGraph> {
    Ok(star_graphs_from_knn(knn(pc, k)?, cfg)?.graph)
}
