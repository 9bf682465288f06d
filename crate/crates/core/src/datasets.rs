//! Seeded generators for synthetic manifolds and CSV ingestion.

use std::f64::consts::PI;
use std::fmt;
use std::path::PathBuf;

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::types::PointCloud;

pub use crate::io::load_csv;

/// Number of bins used when a continuous parameter is quantized into labels.
pub const LABEL_BINS: usize = 10;

fn quantize(value: f64, lo: f64, hi: f64) -> i64 {
    let t = ((value - lo) / (hi - lo)).clamp(0.0, 1.0);
    ((t * LABEL_BINS as f64) as i64).min(LABEL_BINS as i64 - 1)
}

/// Parameter rectangle of the swiss roll `(u, v) -> (u cos u, v, u sin u)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SwissRollParams {
    pub u_range: (f64, f64),
    pub v_range: (f64, f64),
}

impl Default for SwissRollParams {
    fn default() -> Self {
        Self {
            u_range: (1.5 * PI, 4.5 * PI),
            v_range: (0.0, 21.0),
        }
    }
}

impl SwissRollParams {
    /// The excluded rectangle of the holed variant: the middle third of both ranges.
    pub fn hole(&self) -> ((f64, f64), (f64, f64)) {
        let third = |(lo, hi): (f64, f64)| {
            let w = (hi - lo) / 3.0;
            (lo + w, hi - w)
        };
        (third(self.u_range), third(self.v_range))
    }

    pub fn in_hole(&self, u: f64, v: f64) -> bool {
        let ((u0, u1), (v0, v1)) = self.hole();
        u > u0 && u < u1 && v > v0 && v < v1
    }
}

/// Arclength of the spiral `u -> (u cos u, u sin u)` from 0 to `u`.
pub fn spiral_arclength(u: f64) -> f64 {
    0.5 * (u * (1.0 + u * u).sqrt() + u.asinh())
}

/// A sampled swiss roll together with its intrinsic chart.
#[derive(Clone, Debug)]
pub struct SwissRoll {
    pub cloud: PointCloud,
    /// Generating parameters `(u, v)` of each point.
    pub params: Array2<f64>,
    /// Isometric chart `(arclength(u) - arclength(u_min), v)` of each point.
    pub chart: Array2<f64>,
}

pub fn swiss_roll(n: usize, hole: bool, seed: u64) -> Result<PointCloud> {
    Ok(swiss_roll_with(n, hole, seed, &SwissRollParams::default())?.cloud)
}

pub fn swiss_roll_with(n: usize, hole: bool, seed: u64, params: &SwissRollParams) -> Result<SwissRoll> {
    if n == 0 {
        return Err(Error::param("n must be at least 1"));
    }
    let (u0, u1) = params.u_range;
    let (v0, v1) = params.v_range;
    if !(u0 < u1 && v0 < v1) {
        return Err(Error::param("swiss roll ranges must be nonempty"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut points = Array2::zeros((n, 3));
    let mut uv = Array2::zeros((n, 2));
    let mut chart = Array2::zeros((n, 2));
    let mut labels = Vec::with_capacity(n);
    let s0 = spiral_arclength(u0);
    let mut i = 0;
    while i < n {
        let u = rng.random_range(u0..u1);
        let v = rng.random_range(v0..v1);
        if hole && params.in_hole(u, v) {
            continue;
        }
        points[[i, 0]] = u * u.cos();
        points[[i, 1]] = v;
        points[[i, 2]] = u * u.sin();
        uv[[i, 0]] = u;
        uv[[i, 1]] = v;
        chart[[i, 0]] = spiral_arclength(u) - s0;
        chart[[i, 1]] = v;
        labels.push(quantize(u, u0, u1));
        i += 1;
    }
    Ok(SwissRoll {
        cloud: PointCloud::euclidean(points).with_labels(labels),
        params: uv,
        chart,
    })
}

/// Range of the spiral parameter `t` of the rolled plane.
pub const ROLLED_PLANE_T: (f64, f64) = (1.0, 4.0);
/// Width of the rolled plane along its axis.
pub const ROLLED_PLANE_WIDTH: f64 = 10.0;

/// A plane rolled along the spiral `t -> (t cos(c t), t sin(c t))`; larger
/// `c` winds it more tightly. Labels quantize `t`.
pub fn rolled_plane(n: usize, c: u32, seed: u64) -> Result<PointCloud> {
    if n == 0 {
        return Err(Error::param("n must be at least 1"));
    }
    if !(4..=6).contains(&c) {
        return Err(Error::param(format!("rolled plane winding c must be 4, 5 or 6 (got {c})")));
    }
    let (t0, t1) = ROLLED_PLANE_T;
    let c = c as f64;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut points = Array2::zeros((n, 3));
    let mut labels = Vec::with_capacity(n);
    for i in 0..n {
        let t = rng.random_range(t0..t1);
        let v = rng.random_range(0.0..ROLLED_PLANE_WIDTH);
        points[[i, 0]] = t * (c * t).cos();
        points[[i, 1]] = v;
        points[[i, 2]] = t * (c * t).sin();
        labels.push(quantize(t, t0, t1));
    }
    Ok(PointCloud::euclidean(points).with_labels(labels))
}

/// Area-uniform sample of the torus with major radius `big_r` and minor
/// radius `small_r`. The tube angle is drawn by rejection against the
/// density proportional to `R + r cos(theta)`. Labels quantize the tube angle.
pub fn torus(n: usize, big_r: f64, small_r: f64, seed: u64) -> Result<PointCloud> {
    if n == 0 {
        return Err(Error::param("n must be at least 1"));
    }
    if !(big_r > small_r && small_r > 0.0) {
        return Err(Error::param(format!("torus needs R > r > 0 (R = {big_r}, r = {small_r})")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut points = Array2::zeros((n, 3));
    let mut labels = Vec::with_capacity(n);
    for i in 0..n {
        let theta = loop {
            let theta = rng.random_range(0.0..2.0 * PI);
            let accept = rng.random::<f64>() * (big_r + small_r);
            if accept < big_r + small_r * theta.cos() {
                break theta;
            }
        };
        let phi = rng.random_range(0.0..2.0 * PI);
        let ring = big_r + small_r * theta.cos();
        points[[i, 0]] = ring * phi.cos();
        points[[i, 1]] = ring * phi.sin();
        points[[i, 2]] = small_r * theta.sin();
        labels.push(quantize(theta, 0.0, 2.0 * PI));
    }
    Ok(PointCloud::euclidean(points).with_labels(labels))
}

/// Inverse CDF of the polar angle on `[0, pi/2]` with density proportional to
/// `exp(-concentration * theta)`.
pub fn hemisphere_polar_angle(uniform: f64, concentration: f64) -> f64 {
    let c = concentration;
    let mass = -(-c * PI / 2.0).exp_m1();
    -(-uniform * mass).ln_1p() / c
}

/// Unit upper hemisphere, denser towards the pole. Labels quantize the polar angle.
pub fn nonuniform_hemisphere(n: usize, concentration: f64, seed: u64) -> Result<PointCloud> {
    if n == 0 {
        return Err(Error::param("n must be at least 1"));
    }
    if !(concentration > 0.0 && concentration.is_finite()) {
        return Err(Error::param(format!("concentration must be positive (got {concentration})")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut points = Array2::zeros((n, 3));
    let mut labels = Vec::with_capacity(n);
    for i in 0..n {
        let theta = hemisphere_polar_angle(rng.random::<f64>(), concentration);
        let phi = rng.random_range(0.0..2.0 * PI);
        let (st, ct) = theta.sin_cos();
        points[[i, 0]] = st * phi.cos();
        points[[i, 1]] = st * phi.sin();
        points[[i, 2]] = ct;
        labels.push(quantize(theta, 0.0, PI / 2.0));
    }
    Ok(PointCloud::euclidean(points).with_labels(labels))
}

/// Isotropic unit-variance Gaussian blobs centered at `separation * e_c` for
/// `c < centers`. Point `i` belongs to blob `i mod centers`, which is also its label.
pub fn gaussian_blobs(n: usize, centers: usize, dim: usize, separation: f64, seed: u64) -> Result<PointCloud> {
    if n == 0 || centers == 0 {
        return Err(Error::param("blobs need n >= 1 and centers >= 1"));
    }
    if dim < centers {
        return Err(Error::param(format!("blob dimension {dim} is smaller than the number of centers {centers}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut labels = Vec::with_capacity(n);
    let mut points = Array2::zeros((n, dim));
    for i in 0..n {
        let c = i % centers;
        for d in 0..dim {
            let z: f64 = StandardNormal.sample(&mut rng);
            points[[i, d]] = z + if d == c { separation } else { 0.0 };
        }
        labels.push(c as i64);
    }
    Ok(PointCloud::euclidean(points).with_labels(labels))
}

/// A dataset source: one of the generators or a CSV file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DatasetSpec {
    SwissRoll { n: usize, hole: bool },
    RolledPlane { n: usize, c: u32 },
    Torus { n: usize, major: f64, minor: f64 },
    Hemisphere { n: usize, concentration: f64 },
    Blobs { n: usize, centers: usize, dim: usize, separation: f64 },
    Csv { path: PathBuf, has_labels: bool, precomputed: bool },
}

impl DatasetSpec {
    pub fn name(&self) -> &'static str {
        match self {
            DatasetSpec::SwissRoll { .. } => "swiss_roll",
            DatasetSpec::RolledPlane { .. } => "rolled_plane",
            DatasetSpec::Torus { .. } => "torus",
            DatasetSpec::Hemisphere { .. } => "hemisphere",
            DatasetSpec::Blobs { .. } => "blobs",
            DatasetSpec::Csv { .. } => "csv",
        }
    }

    /// Generates (or loads) the dataset; `seed` is ignored for CSV input.
    pub fn load(&self, seed: u64) -> Result<PointCloud> {
        match self {
            DatasetSpec::SwissRoll { n, hole } => swiss_roll(*n, *hole, seed),
            DatasetSpec::RolledPlane { n, c } => rolled_plane(*n, *c, seed),
            DatasetSpec::Torus { n, major, minor } => torus(*n, *major, *minor, seed),
            DatasetSpec::Hemisphere { n, concentration } => nonuniform_hemisphere(*n, *concentration, seed),
            DatasetSpec::Blobs {
                n,
                centers,
                dim,
                separation,
            } => gaussian_blobs(*n, *centers, *dim, *separation, seed),
            DatasetSpec::Csv {
                path,
                has_labels,
                precomputed,
            } => load_csv(path, *has_labels, *precomputed),
        }
    }
}

impl Default for DatasetSpec {
    fn default() -> Self {
        DatasetSpec::SwissRoll { n: 3000, hole: false }
    }
}

impl fmt::Display for DatasetSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}
