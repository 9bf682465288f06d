//! CSV input and output.
//!
//! Point files hold one point per row with an optional trailing integer label
//! column. A first row containing any non-numeric cell is a header; a header
//! whose last cell is `label` marks the label column. Precomputed metrics are
//! square `N x N` files without labels.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use ndarray::{Array2, ArrayView2};

use crate::error::{Error, Result};
use crate::types::{validate_point_cloud, PointCloud, Violation};

struct Table {
    header: Option<Vec<String>>,
    /// Data rows with their 1-based line numbers.
    rows: Vec<(usize, Vec<String>)>,
}

fn parse_error(path: &Path, row: usize, column: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        path: path.to_path_buf(),
        row,
        column,
        message: message.into(),
    }
}

fn read_table(path: &Path) -> Result<Table> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_path(path)?;
    let mut header = None;
    let mut rows = Vec::new();
    for (idx, record) in reader.records().enumerate() {
        let record = record?;
        let cells: Vec<String> = record.iter().map(str::to_owned).collect();
        if cells.len() == 1 && cells[0].is_empty() {
            continue;
        }
        if idx == 0 && cells.iter().any(|c| c.parse::<f64>().is_err()) {
            header = Some(cells);
            continue;
        }
        rows.push((idx + 1, cells));
    }
    if rows.is_empty() {
        return Err(parse_error(path, 1, 1, "no data rows"));
    }
    Ok(Table { header, rows })
}

fn parse_cell(path: &Path, line: usize, column: usize, cell: &str) -> Result<f64> {
    let v: f64 = cell
        .parse()
        .map_err(|_| parse_error(path, line, column + 1, format!("`{cell}` is not a number")))?;
    if v.is_nan() {
        return Err(parse_error(path, line, column + 1, "NaN is not allowed"));
    }
    Ok(v)
}

/// Reads a point cloud. With `precomputed` the file must be a symmetric
/// square distance matrix; otherwise rows are feature vectors, followed by an
/// integer label when `has_labels` is set or the header names a `label` column.
pub fn load_csv(path: impl AsRef<Path>, has_labels: bool, precomputed: bool) -> Result<PointCloud> {
    let path = path.as_ref();
    let table = read_table(path)?;
    let width = table.rows[0].1.len();
    for (line, cells) in &table.rows {
        if cells.len() != width {
            return Err(parse_error(
                path,
                *line,
                cells.len().min(width) + 1,
                format!("ragged row: expected {width} cells, found {}", cells.len()),
            ));
        }
    }
    if let Some(h) = &table.header {
        if h.len() != width {
            return Err(parse_error(path, 1, 1, format!("header has {} cells, rows have {width}", h.len())));
        }
    }
    if precomputed {
        load_precomputed(path, &table, width)
    } else {
        let header_label = table.header.as_ref().is_some_and(|h| h.last().is_some_and(|c| c == "label"));
        load_points(path, &table, width, has_labels || header_label)
    }
}

fn load_points(path: &Path, table: &Table, width: usize, labelled: bool) -> Result<PointCloud> {
    let dim = if labelled { width - 1 } else { width };
    if dim == 0 {
        return Err(parse_error(path, table.rows[0].0, 1, "rows hold no feature columns"));
    }
    let n = table.rows.len();
    let mut points = Array2::zeros((n, dim));
    let mut labels = Vec::with_capacity(n);
    for (i, (line, cells)) in table.rows.iter().enumerate() {
        for j in 0..dim {
            let v = parse_cell(path, *line, j, &cells[j])?;
            if !v.is_finite() {
                return Err(parse_error(path, *line, j + 1, "coordinates must be finite"));
            }
            points[[i, j]] = v;
        }
        if labelled {
            let cell = &cells[dim];
            let label = cell
                .parse::<i64>()
                .map_err(|_| parse_error(path, *line, dim + 1, format!("label `{cell}` is not an integer")))?;
            labels.push(label);
        }
    }
    let pc = PointCloud::euclidean(points);
    Ok(if labelled { pc.with_labels(labels) } else { pc })
}

fn load_precomputed(path: &Path, table: &Table, width: usize) -> Result<PointCloud> {
    let n = table.rows.len();
    if width != n {
        return Err(parse_error(
            path,
            table.rows[0].0,
            1,
            format!("precomputed matrix must be square: {n} rows, {width} columns"),
        ));
    }
    let mut m = Array2::zeros((n, n));
    for (i, (line, cells)) in table.rows.iter().enumerate() {
        for (j, cell) in cells.iter().enumerate() {
            m[[i, j]] = parse_cell(path, *line, j, cell)?;
        }
    }
    let pc = PointCloud::precomputed(m);
    let report = validate_point_cloud(&pc);
    if let Some(v) = report.violations.first() {
        let (i, j) = match *v {
            Violation::Asymmetric { i, j, .. }
            | Violation::NegativeDistance { i, j, .. }
            | Violation::NonFiniteDistance { i, j } => (i, j),
            Violation::NonzeroDiagonal { i, .. } => (i, i),
            _ => (0, 0),
        };
        return Err(parse_error(path, table.rows[i].0, j + 1, v.to_string()));
    }
    Ok(pc)
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)?;
    }
    Ok(BufWriter::new(File::create(path)?))
}

/// Writes coordinates with header `x1..xm` and an optional `label` column.
/// Values use the shortest representation that reads back exactly.
pub fn write_coords_csv(path: impl AsRef<Path>, coords: ArrayView2<'_, f64>, labels: Option<&[i64]>) -> Result<()> {
    let path = path.as_ref();
    if let Some(l) = labels {
        if l.len() != coords.nrows() {
            return Err(Error::param(format!("{} labels for {} rows", l.len(), coords.nrows())));
        }
    }
    let mut out = create(path)?;
    let mut header: Vec<String> = (1..=coords.ncols()).map(|c| format!("x{c}")).collect();
    if labels.is_some() {
        header.push("label".into());
    }
    writeln!(out, "{}", header.join(","))?;
    for (i, row) in coords.rows().into_iter().enumerate() {
        let mut line: Vec<String> = row.iter().map(|v| format!("{v}")).collect();
        if let Some(l) = labels {
            line.push(l[i].to_string());
        }
        writeln!(out, "{}", line.join(","))?;
    }
    out.flush()?;
    Ok(())
}

/// Writes a point cloud in the format read by [`load_csv`].
pub fn write_point_cloud_csv(path: impl AsRef<Path>, pc: &PointCloud) -> Result<()> {
    match &pc.precomputed {
        Some(m) => write_matrix_csv(path, m.view()),
        None => write_coords_csv(path, pc.points.view(), pc.labels.as_deref()),
    }
}

/// Writes a square matrix without header; infinite entries are written as `inf`.
pub fn write_matrix_csv(path: impl AsRef<Path>, m: ArrayView2<'_, f64>) -> Result<()> {
    let mut out = create(path.as_ref())?;
    for row in m.rows() {
        let line: Vec<String> = row.iter().map(|v| format!("{v}")).collect();
        writeln!(out, "{}", line.join(","))?;
    }
    out.flush()?;
    Ok(())
}

pub fn write_text(path: impl AsRef<Path>, text: &str) -> Result<PathBuf> {
    let path = path.as_ref();
    let mut out = create(path)?;
    out.write_all(text.as_bytes())?;
    out.flush()?;
    Ok(path.to_path_buf())
}
