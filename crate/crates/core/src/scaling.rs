//! Wall-clock scaling of the pipeline stages with the number of points.

use serde::{Deserialize, Serialize};

use crate::datasets::DatasetSpec;
use crate::error::{Error, Result};
use crate::pipeline::{run_pipeline, PipelineConfig, StageTimings};

/// Largest accepted growth of the geodesic stage when `N` doubles.
pub const DOUBLING_RATIO_BOUND: f64 = 5.5;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScalingRow {
    pub n: usize,
    /// Fastest time of each stage over the repeats.
    pub timings: StageTimings,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScalingTable {
    pub rows: Vec<ScalingRow>,
    /// Geodesic-stage time ratio between consecutive sizes.
    pub geodesic_ratios: Vec<f64>,
}

impl ScalingTable {
    /// Ratios between consecutive sizes where `N` exactly doubles.
    pub fn doubling_ratios(&self) -> Vec<(usize, usize, f64)> {
        self.rows
            .windows(2)
            .zip(&self.geodesic_ratios)
            .filter(|(w, _)| w[1].n == 2 * w[0].n)
            .map(|(w, &r)| (w[0].n, w[1].n, r))
            .collect()
    }

    /// Fails when a doubling ratio exceeds [`DOUBLING_RATIO_BOUND`].
    pub fn check(&self) -> Result<()> {
        for (a, b, r) in self.doubling_ratios() {
            if r > DOUBLING_RATIO_BOUND {
                return Err(Error::numerical(format!(
                    "geodesic stage grew {r:.2}x from N = {a} to N = {b} (bound {DOUBLING_RATIO_BOUND})"
                )));
            }
        }
        Ok(())
    }

    /// Plain-text table, one row per size.
    pub fn to_text(&self) -> String {
        let mut s = String::from("n\tknn\tlocal_metric\tmerge\tgeodesics\tembedding\tratio\n");
        for (i, row) in self.rows.iter().enumerate() {
            let t = &row.timings;
            let ratio = match i {
                0 => "-".to_owned(),
                _ => format!("{:.2}", self.geodesic_ratios[i - 1]),
            };
            s.push_str(&format!(
                "{}\t{:.4}\t{:.4}\t{:.4}\t{:.4}\t{:.4}\t{ratio}\n",
                row.n, t.knn, t.local_metric, t.merge, t.geodesics, t.embedding
            ));
        }
        s
    }
}

fn with_size(dataset: &DatasetSpec, size: usize) -> Result<DatasetSpec> {
    let mut d = dataset.clone();
    match &mut d {
        DatasetSpec::SwissRoll { n, .. }
        | DatasetSpec::RolledPlane { n, .. }
        | DatasetSpec::Torus { n, .. }
        | DatasetSpec::Hemisphere { n, .. }
        | DatasetSpec::Blobs { n, .. } => *n = size,
        DatasetSpec::Csv { .. } => return Err(Error::param("scaling runs need a generated dataset")),
    }
    Ok(d)
}

fn fastest(a: &StageTimings, b: &StageTimings) -> StageTimings {
    StageTimings {
        dataset: a.dataset.min(b.dataset),
        knn: a.knn.min(b.knn),
        local_metric: a.local_metric.min(b.local_metric),
        merge: a.merge.min(b.merge),
        geodesics: a.geodesics.min(b.geodesics),
        embedding: a.embedding.min(b.embedding),
        evaluation: a.evaluation.min(b.evaluation),
    }
}

/// Runs the pipeline (without evaluation) once per size and repeat, keeping
/// the fastest time of every stage.
pub fn benchmark_scaling(sizes: &[usize], config: &PipelineConfig, repeats: usize) -> Result<ScalingTable> {
    if sizes.is_empty() {
        return Err(Error::param("no sizes given"));
    }
    if sizes.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::param("sizes must be strictly ascending"));
    }
    let mut rows = Vec::with_capacity(sizes.len());
    for &n in sizes {
        let mut cfg = config.clone();
        cfg.dataset = with_size(&config.dataset, n)?;
        cfg.evaluate = false;
        let mut best: Option<StageTimings> = None;
        for _ in 0..repeats.max(1) {
            let t = run_pipeline(&cfg)?.report.timings_seconds;
            best = Some(match best {
                Some(b) => fastest(&b, &t),
                None => t,
            });
        }
        rows.push(ScalingRow {
            n,
            timings: best.expect("at least one repeat"),
        });
    }
    let geodesic_ratios = rows
        .windows(2)
        .map(|w| w[1].timings.geodesics / w[0].timings.geodesics.max(f64::MIN_POSITIVE))
        .collect();
    Ok(ScalingTable { rows, geodesic_ratios })
}
