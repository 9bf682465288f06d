//! IsUMap manifold learning.
//!
//! The pipeline distorts the input metric around every point (a star graph per
//! point), merges the star graphs with a t-conorm, completes the merged sparse
//! metric with all-pairs shortest paths and embeds the completed metric with
//! classical or metric multidimensional scaling.
//!
//! ```no_run
//! use isumap_core::{datasets, pipeline::PipelineConfig, pipeline::run_pipeline};
//!
//! let mut config = PipelineConfig::default();
//! config.dataset = datasets::DatasetSpec::SwissRoll { n: 1000, hole: false };
//! config.k = 15;
//! let output = run_pipeline(&config).unwrap();
//! println!("stress = {}", output.embedding.stress);
//! ```

pub mod datasets;
pub mod eigen;
pub mod embedding;
pub mod error;
pub mod evaluation;
pub mod geodesics;
pub mod io;
pub mod local_metric;
pub mod merge;
pub mod neighbors;
pub mod pipeline;
pub mod plot;
pub mod scaling;
pub mod types;

pub use embedding::{MdsConfig, MdsInit, MdsMethod};
pub use error::{Error, Result};
pub use geodesics::OnDisconnect;
pub use local_metric::{LocalMetricConfig, SigmaMode};
pub use merge::TConorm;
pub use types::{
    DenseMetric, Embedding, MetricKind, NeighborGraph, PointCloud, SparseMetric, ValidationReport,
    Violation,
};
