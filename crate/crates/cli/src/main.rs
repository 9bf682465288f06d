//! `isumap` command-line driver.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use isumap_core::evaluation::{evaluate, EvaluationConfig};
use isumap_core::io::{load_csv, write_matrix_csv, write_point_cloud_csv, write_text};
use isumap_core::pipeline::{parse_assignment, parse_config_text, run_pipeline, write_outputs, PipelineConfig};
use isumap_core::plot::emit_scatter_svg;
use isumap_core::scaling::benchmark_scaling;
use isumap_core::{DenseMetric, Embedding, Error, MdsMethod};

#[derive(Parser)]
#[command(name = "isumap", version, about = "Manifold learning by merging locally distorted metrics")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic dataset and write it as `points.csv`.
    Generate {
        #[command(flatten)]
        pipeline: PipelineArgs,
        #[arg(long, default_value = ".")]
        output_dir: PathBuf,
    },
    /// Run the full pipeline and write `embedding.csv` and `report.json`.
    Reduce {
        #[command(flatten)]
        pipeline: PipelineArgs,
        #[arg(long, default_value = "isumap-out")]
        output_dir: PathBuf,
        /// Also write `embedding.svg` (2 or 3 dimensions only).
        #[arg(long)]
        plot: bool,
        /// Also write the completed geodesic matrix as `geodesics.csv`.
        #[arg(long)]
        save_geodesics: bool,
    },
    /// Score an existing embedding CSV.
    Evaluate {
        /// Embedding CSV; a trailing `label` column enables PSI.
        #[arg(long)]
        input: PathBuf,
        /// Completed geodesic matrix for the geodesic correlation.
        #[arg(long)]
        geodesics: Option<PathBuf>,
        /// Clusters for k-means; 0 uses the number of distinct labels.
        #[arg(long, default_value_t = 0)]
        kmeans_k: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 1)]
        runs: usize,
        /// Write `evaluation.json` here instead of printing it.
        #[arg(long)]
        output_dir: Option<PathBuf>,
    },
    /// Time the pipeline stages over increasing dataset sizes.
    Bench {
        #[command(flatten)]
        pipeline: PipelineArgs,
        #[arg(long, value_delimiter = ',', default_value = "1000,2000,4000")]
        sizes: Vec<usize>,
        #[arg(long, default_value_t = 3)]
        repeats: usize,
        /// Write `scaling.txt` here as well as printing it.
        #[arg(long)]
        output_dir: Option<PathBuf>,
    },
    /// Render an embedding CSV as an SVG scatter plot.
    Plot {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        output: PathBuf,
    },
}

/// Options shared by every command that builds a pipeline configuration.
/// Precedence: defaults, then `--config`, then the named flags, then `--set`.
#[derive(Args)]
struct PipelineArgs {
    /// `key=value` configuration file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// swiss_roll, rolled_plane, torus, hemisphere, blobs or csv.
    #[arg(long)]
    dataset: Option<String>,
    /// Input CSV (implies `dataset=csv`).
    #[arg(long)]
    input: Option<PathBuf>,
    #[arg(long)]
    k: Option<String>,
    #[arg(long)]
    dim: Option<String>,
    #[arg(long)]
    tconorm: Option<String>,
    #[arg(long)]
    sigma_mode: Option<String>,
    #[arg(long)]
    apply_rho: Option<String>,
    /// classical_mds or metric_mds.
    #[arg(long)]
    mds: Option<String>,
    #[arg(long)]
    seed: Option<String>,
    /// Worker threads; 0 uses every core.
    #[arg(long, env = "ISUMAP_WORKERS")]
    workers: Option<String>,
    /// error, largest_component or cap.
    #[arg(long)]
    on_disconnect: Option<String>,
    /// Any configuration key, e.g. `--set n=1000`. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

impl PipelineArgs {
    fn pairs(&self) -> Result<BTreeMap<String, String>, Error> {
        let mut pairs = match &self.config {
            Some(path) => parse_config_text(&std::fs::read_to_string(path)?)?,
            None => BTreeMap::new(),
        };
        let mut put = |key: &str, value: Option<&String>| {
            if let Some(v) = value {
                pairs.insert(key.to_owned(), v.clone());
            }
        };
        put("dataset", self.dataset.as_ref());
        put("k", self.k.as_ref());
        put("dim", self.dim.as_ref());
        put("tconorm", self.tconorm.as_ref());
        put("sigma_mode", self.sigma_mode.as_ref());
        put("apply_rho", self.apply_rho.as_ref());
        put("method", self.mds.as_ref());
        put("seed", self.seed.as_ref());
        put("workers", self.workers.as_ref());
        put("on_disconnect", self.on_disconnect.as_ref());
        if let Some(input) = &self.input {
            pairs.insert("dataset".into(), "csv".into());
            pairs.insert("input".into(), input.display().to_string());
        }
        for s in &self.overrides {
            let (k, v) = parse_assignment(s)
                .ok_or_else(|| Error::Parameter(format!("--set expects KEY=VALUE, got `{s}`")))?;
            pairs.insert(k, v);
        }
        Ok(pairs)
    }

    fn build(&self) -> Result<PipelineConfig, Failure> {
        let pairs = self.pairs().map_err(Failure::bare)?;
        PipelineConfig::from_pairs(&pairs).map_err(|e| Failure {
            error: e,
            echo: Some(pairs.iter().map(|(k, v)| format!("{k}={v}\n")).collect()),
        })
    }
}

/// An error plus, when a configuration was involved, its echo.
struct Failure {
    error: Error,
    echo: Option<String>,
}

impl Failure {
    fn bare(error: Error) -> Self {
        Failure { error, echo: None }
    }

    fn with(cfg: &PipelineConfig) -> impl FnOnce(Error) -> Failure + '_ {
        move |error| Failure {
            error,
            echo: Some(cfg.to_config_text()),
        }
    }

    fn exit_code(&self) -> u8 {
        match self.error.root() {
            Error::Parameter(_) => 2,
            Error::Numerical(_) => 4,
            _ => 3,
        }
    }
}

impl From<Error> for Failure {
    fn from(error: Error) -> Self {
        Failure::bare(error)
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.error);
            if let Some(echo) = &f.echo {
                eprintln!("config:");
                eprint!("{echo}");
            }
            ExitCode::from(f.exit_code())
        }
    }
}

fn run(command: Command) -> Result<(), Failure> {
    match command {
        Command::Generate { pipeline, output_dir } => {
            let cfg = pipeline.build()?;
            let cloud = cfg.validate().and_then(|_| cfg.load_dataset()).map_err(Failure::with(&cfg))?;
            let path = output_dir.join("points.csv");
            write_point_cloud_csv(&path, &cloud)?;
            println!("{}", path.display());
        }
        Command::Reduce {
            pipeline,
            output_dir,
            plot,
            save_geodesics,
        } => {
            let cfg = pipeline.build()?;
            let output = run_pipeline(&cfg).map_err(Failure::with(&cfg))?;
            let files = write_outputs(&output, &output_dir, plot)?;
            println!("{}", files.embedding.display());
            println!("{}", files.report.display());
            if let Some(p) = files.plot {
                println!("{}", p.display());
            }
            if save_geodesics {
                let path = output_dir.join("geodesics.csv");
                write_matrix_csv(&path, output.completion.metric.dist.view())?;
                println!("{}", path.display());
            }
        }
        Command::Evaluate {
            input,
            geodesics,
            kmeans_k,
            seed,
            runs,
            output_dir,
        } => {
            let json = evaluate_file(&input, geodesics.as_deref(), &EvaluationConfig { kmeans_k, seed, runs })?;
            match output_dir {
                Some(dir) => println!("{}", write_text(dir.join("evaluation.json"), &json)?.display()),
                None => print!("{json}"),
            }
        }
        Command::Bench {
            pipeline,
            sizes,
            repeats,
            output_dir,
        } => {
            let cfg = pipeline.build()?;
            let table = benchmark_scaling(&sizes, &cfg, repeats).map_err(Failure::with(&cfg))?;
            let text = table.to_text();
            print!("{text}");
            if let Some(dir) = output_dir {
                write_text(dir.join("scaling.txt"), &text)?;
            }
            table.check().map_err(Failure::with(&cfg))?;
        }
        Command::Plot { input, output } => {
            let cloud = load_csv(&input, false, false)?;
            emit_scatter_svg(cloud.points.view(), cloud.labels.as_deref(), &output)?;
            println!("{}", output.display());
        }
    }
    Ok(())
}

fn evaluate_file(input: &Path, geodesics: Option<&Path>, cfg: &EvaluationConfig) -> Result<String, Error> {
    if cfg.runs == 0 {
        return Err(Error::Parameter("runs must be at least 1".into()));
    }
    let cloud = load_csv(input, false, false)?;
    let metric = match geodesics {
        Some(path) => {
            let m = load_csv(path, false, true)?.precomputed.expect("precomputed load yields a matrix");
            if m.nrows() != cloud.len() {
                return Err(Error::Data(format!(
                    "geodesic matrix has {} rows but the embedding has {} points",
                    m.nrows(),
                    cloud.len()
                )));
            }
            Some(DenseMetric::new(m))
        }
        None => None,
    };
    let emb = Embedding {
        coords: cloud.points,
        stress: f64::NAN,
        method: MdsMethod::ClassicalMds,
        eigenvalues: Vec::new(),
    };
    let report = evaluate(metric.as_ref(), &emb, cloud.labels.as_deref(), cfg)?;
    let mut json = serde_json::to_string_pretty(&report).map_err(Error::from)?;
    json.push('\n');
    Ok(json)
}
