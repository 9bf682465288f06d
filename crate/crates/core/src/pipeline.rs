//! End-to-end orchestration: dataset, neighbors, local metrics, merge,
//! geodesic completion, embedding and evaluation.
//!
//! Configuration is a flat set of `key=value` pairs. [`PipelineConfig::to_pairs`]
//! materializes every effective parameter, so the echo stored in the report
//! replays the run exactly.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::datasets::{swiss_roll_with, DatasetSpec, SwissRollParams};
use crate::embedding::{embed, MdsConfig, MdsInit, MdsMethod};
use crate::error::{Error, Result};
use crate::evaluation::{evaluate, EvaluationConfig, EvaluationReport};
use crate::geodesics::{complete, resolve_workers, Completion, OnDisconnect};
use crate::io::{write_coords_csv, write_text};
use crate::local_metric::{star_graphs_from_knn, LocalMetricConfig, SigmaMode};
use crate::merge::{symmetrize, zero_weight_pairs, TConorm};
use crate::neighbors::knn;
use crate::plot::emit_scatter_svg;
use crate::types::{validate_point_cloud, Embedding, NeighborGraph, PointCloud, SparseMetric};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PipelineConfig {
    pub dataset: DatasetSpec,
    pub swiss_roll: SwissRollParams,
    /// Seeds the generators and the metric-MDS random initialization.
    pub seed: u64,
    pub k: usize,
    pub local: LocalMetricConfig,
    pub tconorm: TConorm,
    /// Worker threads; 0 uses every available core.
    pub workers: usize,
    pub on_disconnect: OnDisconnect,
    pub mds: MdsConfig,
    pub evaluate: bool,
    pub eval: EvaluationConfig,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            dataset: DatasetSpec::default(),
            swiss_roll: SwissRollParams::default(),
            seed: 0,
            k: 15,
            local: LocalMetricConfig::default(),
            tconorm: TConorm::Canonical,
            workers: 0,
            on_disconnect: OnDisconnect::Error,
            mds: MdsConfig::default(),
            evaluate: true,
            eval: EvaluationConfig::default(),
        }
    }
}

fn parse<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::param(format!("invalid value `{value}` for `{key}`")))
}

fn parse_bool(key: &str, value: &str) -> Result<bool> {
    match value {
        "true" | "yes" | "1" => Ok(true),
        "false" | "no" | "0" => Ok(false),
        _ => Err(Error::param(format!("invalid value `{value}` for `{key}` (expected true or false)"))),
    }
}

fn default_dataset(name: &str) -> Result<DatasetSpec> {
    Ok(match name {
        "swiss_roll" => DatasetSpec::SwissRoll { n: 3000, hole: false },
        "rolled_plane" => DatasetSpec::RolledPlane { n: 3000, c: 4 },
        "torus" => DatasetSpec::Torus {
            n: 3000,
            major: 3.0,
            minor: 1.0,
        },
        "hemisphere" => DatasetSpec::Hemisphere {
            n: 3000,
            concentration: 2.0,
        },
        "blobs" => DatasetSpec::Blobs {
            n: 800,
            centers: 4,
            dim: 4,
            separation: 10.0,
        },
        "csv" => DatasetSpec::Csv {
            path: PathBuf::new(),
            has_labels: false,
            precomputed: false,
        },
        other => {
            return Err(Error::param(format!(
                "unknown dataset `{other}` (expected swiss_roll, rolled_plane, torus, hemisphere, blobs or csv)"
            )))
        }
    })
}

impl PipelineConfig {
    /// Builds a configuration from `key=value` pairs on top of the defaults.
    /// `dataset` is applied first so that dataset keys may appear in any order.
    pub fn from_pairs(pairs: &BTreeMap<String, String>) -> Result<Self> {
        let mut cfg = PipelineConfig::default();
        if let Some(name) = pairs.get("dataset") {
            cfg.dataset = default_dataset(name)?;
        }
        for (key, value) in pairs.iter().filter(|(k, _)| k.as_str() != "dataset") {
            cfg.set(key, value)?;
        }
        Ok(cfg)
    }

    /// Sets a single key.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let value = value.trim();
        match key {
            "dataset" => self.dataset = default_dataset(value)?,
            "seed" => self.seed = parse(key, value)?,
            "k" => self.k = parse(key, value)?,
            "sigma_mode" => self.local.sigma_mode = value.parse()?,
            "apply_rho" => self.local.apply_rho = parse_bool(key, value)?,
            "bs_tol" => self.local.binary_search_tolerance = parse(key, value)?,
            "bs_max_iter" => self.local.binary_search_max_iter = parse(key, value)?,
            "sigma_floor" => self.local.sigma_floor = parse(key, value)?,
            "tconorm" => self.tconorm = value.parse()?,
            "workers" => self.workers = parse(key, value)?,
            "on_disconnect" => self.on_disconnect = value.parse()?,
            "method" => self.mds.method = value.parse()?,
            "dim" => self.mds.dim = parse(key, value)?,
            "max_iter" => self.mds.max_iter = parse(key, value)?,
            "lr" => self.mds.learning_rate = parse(key, value)?,
            "init" => self.mds.init = value.parse()?,
            "tol" => self.mds.convergence_tol = parse(key, value)?,
            "evaluate" => self.evaluate = parse_bool(key, value)?,
            "eval.kmeans_k" => self.eval.kmeans_k = parse(key, value)?,
            "eval.seed" => self.eval.seed = parse(key, value)?,
            "eval.runs" => self.eval.runs = parse(key, value)?,
            _ => return self.set_dataset_key(key, value),
        }
        Ok(())
    }

    fn set_dataset_key(&mut self, key: &str, value: &str) -> Result<()> {
        let name = self.dataset.name();
        let unknown = || Error::param(format!("unknown key `{key}` for dataset {name}"));
        match (&mut self.dataset, key) {
            (DatasetSpec::SwissRoll { n, .. }, "n")
            | (DatasetSpec::RolledPlane { n, .. }, "n")
            | (DatasetSpec::Torus { n, .. }, "n")
            | (DatasetSpec::Hemisphere { n, .. }, "n")
            | (DatasetSpec::Blobs { n, .. }, "n") => *n = parse(key, value)?,
            (DatasetSpec::SwissRoll { hole, .. }, "hole") => *hole = parse_bool(key, value)?,
            (DatasetSpec::SwissRoll { .. }, "u_min") => self.swiss_roll.u_range.0 = parse(key, value)?,
            (DatasetSpec::SwissRoll { .. }, "u_max") => self.swiss_roll.u_range.1 = parse(key, value)?,
            (DatasetSpec::SwissRoll { .. }, "v_min") => self.swiss_roll.v_range.0 = parse(key, value)?,
            (DatasetSpec::SwissRoll { .. }, "v_max") => self.swiss_roll.v_range.1 = parse(key, value)?,
            (DatasetSpec::RolledPlane { c, .. }, "c") => *c = parse(key, value)?,
            (DatasetSpec::Torus { major, .. }, "R") => *major = parse(key, value)?,
            (DatasetSpec::Torus { minor, .. }, "r") => *minor = parse(key, value)?,
            (DatasetSpec::Hemisphere { concentration, .. }, "concentration") => *concentration = parse(key, value)?,
            (DatasetSpec::Blobs { centers, .. }, "centers") => *centers = parse(key, value)?,
            (DatasetSpec::Blobs { dim, .. }, "blob_dim") => *dim = parse(key, value)?,
            (DatasetSpec::Blobs { separation, .. }, "separation") => *separation = parse(key, value)?,
            (DatasetSpec::Csv { path, .. }, "input") => *path = PathBuf::from(value),
            (DatasetSpec::Csv { has_labels, .. }, "has_labels") => *has_labels = parse_bool(key, value)?,
            (DatasetSpec::Csv { precomputed, .. }, "precomputed") => *precomputed = parse_bool(key, value)?,
            _ => return Err(unknown()),
        }
        Ok(())
    }

    /// Every effective parameter as `key=value` pairs (sorted by key).
    pub fn to_pairs(&self) -> BTreeMap<String, String> {
        let mut m = BTreeMap::new();
        let mut put = |k: &str, v: String| {
            m.insert(k.to_owned(), v);
        };
        put("dataset", self.dataset.name().into());
        match &self.dataset {
            DatasetSpec::SwissRoll { n, hole } => {
                put("n", n.to_string());
                put("hole", hole.to_string());
                put("u_min", self.swiss_roll.u_range.0.to_string());
                put("u_max", self.swiss_roll.u_range.1.to_string());
                put("v_min", self.swiss_roll.v_range.0.to_string());
                put("v_max", self.swiss_roll.v_range.1.to_string());
            }
            DatasetSpec::RolledPlane { n, c } => {
                put("n", n.to_string());
                put("c", c.to_string());
            }
            DatasetSpec::Torus { n, major, minor } => {
                put("n", n.to_string());
                put("R", major.to_string());
                put("r", minor.to_string());
            }
            DatasetSpec::Hemisphere { n, concentration } => {
                put("n", n.to_string());
                put("concentration", concentration.to_string());
            }
            DatasetSpec::Blobs {
                n,
                centers,
                dim,
                separation,
            } => {
                put("n", n.to_string());
                put("centers", centers.to_string());
                put("blob_dim", dim.to_string());
                put("separation", separation.to_string());
            }
            DatasetSpec::Csv {
                path,
                has_labels,
                precomputed,
            } => {
                put("input", path.display().to_string());
                put("has_labels", has_labels.to_string());
                put("precomputed", precomputed.to_string());
            }
        }
        put("seed", self.seed.to_string());
        put("k", self.k.to_string());
        put("sigma_mode", self.local.sigma_mode.to_string());
        put("apply_rho", self.local.apply_rho.to_string());
        put("bs_tol", self.local.binary_search_tolerance.to_string());
        put("bs_max_iter", self.local.binary_search_max_iter.to_string());
        put("sigma_floor", self.local.sigma_floor.to_string());
        put("tconorm", self.tconorm.to_string());
        put("workers", self.workers.to_string());
        put("on_disconnect", self.on_disconnect.to_string());
        put("method", self.mds.method.to_string());
        put("dim", self.mds.dim.to_string());
        put("max_iter", self.mds.max_iter.to_string());
        put("lr", self.mds.learning_rate.to_string());
        put("init", self.mds.init.as_str().into());
        put("tol", self.mds.convergence_tol.to_string());
        put("evaluate", self.evaluate.to_string());
        put("eval.kmeans_k", self.eval.kmeans_k.to_string());
        put("eval.seed", self.eval.seed.to_string());
        put("eval.runs", self.eval.runs.to_string());
        m
    }

    /// The configuration in the `key=value` file format.
    pub fn to_config_text(&self) -> String {
        let mut s = String::new();
        for (k, v) in self.to_pairs() {
            writeln!(s, "{k}={v}").unwrap();
        }
        s
    }

    /// Checks everything that can be checked without the data.
    pub fn validate(&self) -> Result<()> {
        if self.k == 0 {
            return Err(Error::param("k must be at least 1"));
        }
        self.local.validate()?;
        if self.mds.dim == 0 {
            return Err(Error::param("dim must be at least 1"));
        }
        if self.mds.max_iter == 0 {
            return Err(Error::param("max_iter must be at least 1"));
        }
        if !(self.mds.learning_rate > 0.0) {
            return Err(Error::param("lr must be positive"));
        }
        if !(self.mds.convergence_tol > 0.0) {
            return Err(Error::param("tol must be positive"));
        }
        if self.eval.runs == 0 {
            return Err(Error::param("eval.runs must be at least 1"));
        }
        match &self.dataset {
            DatasetSpec::SwissRoll { n, .. }
            | DatasetSpec::RolledPlane { n, .. }
            | DatasetSpec::Torus { n, .. }
            | DatasetSpec::Hemisphere { n, .. }
            | DatasetSpec::Blobs { n, .. }
                if *n <= self.k =>
            {
                Err(Error::param(format!("k = {} needs at least k + 1 points (n = {n})", self.k)))
            }
            DatasetSpec::Csv { path, .. } if path.as_os_str().is_empty() => {
                Err(Error::param("dataset csv needs an input path"))
            }
            _ => Ok(()),
        }
    }

    /// Generates or loads the configured dataset.
    pub fn load_dataset(&self) -> Result<PointCloud> {
        match self.dataset {
            DatasetSpec::SwissRoll { n, hole } => Ok(swiss_roll_with(n, hole, self.seed, &self.swiss_roll)?.cloud),
            ref other => other.load(self.seed),
        }
    }
}

/// Parses a `key=value` file: one pair per line, `#` starts a comment.
pub fn parse_config_text(text: &str) -> Result<BTreeMap<String, String>> {
    let mut pairs = BTreeMap::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = parse_assignment(line)
            .ok_or_else(|| Error::param(format!("config line {}: expected key=value, got `{line}`", lineno + 1)))?;
        pairs.insert(k, v);
    }
    Ok(pairs)
}

/// Splits `key=value`.
pub fn parse_assignment(s: &str) -> Option<(String, String)> {
    let (k, v) = s.split_once('=')?;
    let k = k.trim();
    (!k.is_empty()).then(|| (k.to_owned(), v.trim().to_owned()))
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct StageTimings {
    pub dataset: f64,
    pub knn: f64,
    pub local_metric: f64,
    pub merge: f64,
    pub geodesics: f64,
    pub embedding: f64,
    pub evaluation: f64,
}

impl StageTimings {
    pub fn total(&self) -> f64 {
        self.dataset + self.knn + self.local_metric + self.merge + self.geodesics + self.embedding + self.evaluation
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub min: f64,
    pub max: f64,
    pub mean: f64,
}

impl Summary {
    fn of<'a>(values: impl IntoIterator<Item = &'a f64>) -> Self {
        let (mut min, mut max, mut sum, mut n) = (f64::INFINITY, f64::NEG_INFINITY, 0.0, 0usize);
        for &v in values {
            min = min.min(v);
            max = max.max(v);
            sum += v;
            n += 1;
        }
        Summary {
            min,
            max,
            mean: sum / n.max(1) as f64,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SigmaSearchSummary {
    pub max_residual: f64,
    pub clamped: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ComponentSummary {
    pub count: usize,
    pub sizes: Vec<usize>,
    pub kept_points: usize,
    pub cap: Option<f64>,
}

/// Run report, serialized with a fixed key order.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub dataset: String,
    pub n_points: usize,
    pub ambient_dim: usize,
    pub k: usize,
    pub tconorm: TConorm,
    pub sigma_mode: SigmaMode,
    pub apply_rho: bool,
    pub mds_method: MdsMethod,
    pub dim: usize,
    pub workers: usize,
    pub rho: Summary,
    pub sigma: Summary,
    pub sigma_search: Option<SigmaSearchSummary>,
    pub merged_pairs: usize,
    pub zero_weight_pairs: usize,
    pub components: ComponentSummary,
    pub eigenvalues: Vec<f64>,
    pub zero_filled_dimensions: usize,
    pub stress: f64,
    pub evaluation: Option<EvaluationReport>,
    pub notes: Vec<String>,
    pub timings_seconds: StageTimings,
    pub config: BTreeMap<String, String>,
}

impl Report {
    pub fn to_json(&self) -> Result<String> {
        let mut s = serde_json::to_string_pretty(self)?;
        s.push('\n');
        Ok(s)
    }
}

/// Everything produced by a pipeline run.
#[derive(Clone, Debug)]
pub struct PipelineOutput {
    pub cloud: PointCloud,
    pub graph: NeighborGraph,
    pub merged: SparseMetric,
    pub completion: Completion,
    pub embedding: Embedding,
    /// Labels of the embedded (kept) points.
    pub labels: Option<Vec<i64>>,
    pub report: Report,
}

fn stage<T>(name: &'static str, timer: &mut f64, f: impl FnOnce() -> Result<T>) -> Result<T> {
    let start = Instant::now();
    let out = f().map_err(|e| Error::Stage {
        stage: name,
        source: Box::new(e),
    });
    *timer = start.elapsed().as_secs_f64();
    out
}

/// Runs the whole pipeline on the configured dataset.
pub fn run_pipeline(cfg: &PipelineConfig) -> Result<PipelineOutput> {
    cfg.validate().map_err(|e| Error::Stage {
        stage: "config",
        source: Box::new(e),
    })?;
    let mut timings = StageTimings::default();
    let cloud = stage("dataset", &mut timings.dataset, || cfg.load_dataset())?;
    run_on_cloud(cfg, cloud, timings)
}

/// Runs the pipeline on an already loaded point cloud.
pub fn run_pipeline_on(cfg: &PipelineConfig, cloud: PointCloud) -> Result<PipelineOutput> {
    run_on_cloud(cfg, cloud, StageTimings::default())
}

fn run_on_cloud(cfg: &PipelineConfig, cloud: PointCloud, mut timings: StageTimings) -> Result<PipelineOutput> {
    let workers = resolve_workers(cfg.workers);
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::param(format!("cannot start {workers} worker threads: {e}")))?;
    pool.install(|| run_stages(cfg, cloud, &mut timings, workers))
}

fn run_stages(cfg: &PipelineConfig, cloud: PointCloud, timings: &mut StageTimings, workers: usize) -> Result<PipelineOutput> {
    stage("dataset", &mut 0.0, || validate_point_cloud(&cloud).into_result())?;
    let neighbors = stage("knn", &mut timings.knn, || knn(&cloud, cfg.k))?;
    let stars = stage("local_metric", &mut timings.local_metric, || star_graphs_from_knn(neighbors, &cfg.local))?;
    let merged = stage("merge", &mut timings.merge, || Ok(symmetrize(&stars.graph, cfg.tconorm)))?;
    let completion = stage("geodesics", &mut timings.geodesics, || complete(&merged, workers, cfg.on_disconnect))?;

    let kept_n = completion.kept.len();
    let embedding = stage("embedding", &mut timings.embedding, || {
        if cfg.mds.dim >= kept_n {
            return Err(Error::param(format!(
                "dim must satisfy 1 <= dim <= N-1 (dim = {}, N = {kept_n})",
                cfg.mds.dim
            )));
        }
        let mds = MdsConfig {
            seed: cfg.seed,
            ..cfg.mds.clone()
        };
        embed(&completion.metric, &mds)
    })?;

    let labels: Option<Vec<i64>> = cloud
        .labels
        .as_ref()
        .map(|l| completion.kept.iter().map(|&i| l[i]).collect());
    let evaluation = if cfg.evaluate {
        Some(stage("evaluation", &mut timings.evaluation, || {
            evaluate(Some(&completion.metric), &embedding, labels.as_deref(), &cfg.eval)
        })?)
    } else {
        None
    };

    let zero_pairs = zero_weight_pairs(&merged);
    let mut notes = Vec::new();
    if zero_pairs > 0 {
        let reason = if cfg.tconorm == TConorm::DrasticSum {
            "drastic_sum maps every pair present in both stars to distance 0"
        } else {
            "local distances at the nearest neighbor are 0 after the rho shift"
        };
        notes.push(format!("{zero_pairs} of {} merged pairs have weight 0 ({reason})", merged.len()));
    }
    if completion.components.count() > 1 {
        notes.push(format!(
            "merged graph has {} components; policy {}",
            completion.components.count(),
            cfg.on_disconnect
        ));
    }
    let zero_filled = embedding.eigenvalues.iter().filter(|&&l| l <= 0.0).count();
    if zero_filled > 0 {
        notes.push(format!("{zero_filled} embedding dimension(s) zero-filled (non-positive eigenvalue)"));
    }
    if let (MdsMethod::MetricMds, MdsInit::Random) = (cfg.mds.method, cfg.mds.init) {
        notes.push("metric MDS started from a random configuration".into());
    }

    let report = Report {
        dataset: cfg.dataset.name().into(),
        n_points: cloud.len(),
        ambient_dim: cloud.dim(),
        k: cfg.k,
        tconorm: cfg.tconorm,
        sigma_mode: cfg.local.sigma_mode,
        apply_rho: cfg.local.apply_rho,
        mds_method: cfg.mds.method,
        dim: cfg.mds.dim,
        workers,
        rho: Summary::of(stars.graph.rho.iter()),
        sigma: Summary::of(stars.graph.sigma.iter()),
        sigma_search: stars.search.as_ref().map(|s| SigmaSearchSummary {
            max_residual: s
                .residual
                .iter()
                .zip(&s.clamped)
                .filter(|(_, &c)| !c)
                .fold(0.0, |m, (&r, _)| m.max(r)),
            clamped: s.clamped.iter().filter(|&&c| c).count(),
        }),
        merged_pairs: merged.len(),
        zero_weight_pairs: zero_pairs,
        components: ComponentSummary {
            count: completion.components.count(),
            sizes: completion.components.sizes.clone(),
            kept_points: kept_n,
            cap: completion.cap,
        },
        eigenvalues: embedding.eigenvalues.clone(),
        zero_filled_dimensions: zero_filled,
        stress: embedding.stress,
        evaluation,
        notes,
        timings_seconds: timings.clone(),
        config: cfg.to_pairs(),
    };

    Ok(PipelineOutput {
        cloud,
        graph: stars.graph,
        merged,
        completion,
        embedding,
        labels,
        report,
    })
}

/// Paths written by [`write_outputs`].
#[derive(Clone, Debug)]
pub struct OutputFiles {
    pub embedding: PathBuf,
    pub report: PathBuf,
    pub plot: Option<PathBuf>,
}

/// Writes `embedding.csv`, `report.json` and, if requested, `embedding.svg`.
pub fn write_outputs(output: &PipelineOutput, dir: impl AsRef<Path>, plot: bool) -> Result<OutputFiles> {
    let dir = dir.as_ref();
    std::fs::create_dir_all(dir)?;
    let embedding = dir.join("embedding.csv");
    write_coords_csv(&embedding, output.embedding.coords.view(), output.labels.as_deref())?;
    let report = write_text(dir.join("report.json"), &output.report.to_json()?)?;
    let plot = if plot {
        let path = dir.join("embedding.svg");
        emit_scatter_svg(output.embedding.coords.view(), output.labels.as_deref(), &path)?;
        Some(path)
    } else {
        None
    };
    Ok(OutputFiles { embedding, report, plot })
}
