//! Static SVG scatter plots of 2-D and 3-D embeddings.
//!
//! 3-D embeddings are drawn as two orthographic projections side by side
//! (`x1/x2` and `x1/x3`). Points are colored by label through a fixed
//! ten-color palette; unlabelled plots use its first color.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::path::Path;

use ndarray::ArrayView2;

use crate::error::{Error, Result};
use crate::io::write_text;

pub const PALETTE: [&str; 10] = [
    "#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22",
    "#17becf",
];

const PANEL: f64 = 480.0;
const MARGIN: f64 = 20.0;
const RADIUS: f64 = 2.0;

/// Renders the scatter plot as an SVG document.
pub fn render_scatter_svg(coords: ArrayView2<'_, f64>, labels: Option<&[i64]>) -> Result<String> {
    let m = coords.ncols();
    let panels: &[(usize, usize)] = match m {
        2 => &[(0, 1)],
        3 => &[(0, 1), (0, 2)],
        _ => {
            return Err(Error::param(format!("scatter plots support 2 or 3 dimensions, got {m}")));
        }
    };
    if let Some(l) = labels {
        if l.len() != coords.nrows() {
            return Err(Error::param(format!("{} labels for {} points", l.len(), coords.nrows())));
        }
    }
    if coords.iter().any(|v| !v.is_finite()) {
        return Err(Error::data("cannot plot non-finite coordinates"));
    }

    // Labels map to palette slots in sorted order.
    let distinct: BTreeSet<i64> = labels.unwrap_or(&[]).iter().copied().collect();
    let slot: BTreeMap<i64, usize> = distinct.into_iter().enumerate().map(|(s, l)| (l, s)).collect();

    let width = PANEL * panels.len() as f64;
    let mut svg = String::new();
    writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{PANEL}" viewBox="0 0 {width} {PANEL}">"#
    )
    .unwrap();
    writeln!(svg, r#"<rect width="{width}" height="{PANEL}" fill="white"/>"#).unwrap();
    for (p, &(a, b)) in panels.iter().enumerate() {
        let (xs, ys) = (coords.column(a), coords.column(b));
        let (x0, x1) = range(xs.iter());
        let (y0, y1) = range(ys.iter());
        let span = (x1 - x0).max(y1 - y0).max(f64::MIN_POSITIVE);
        let scale = (PANEL - 2.0 * MARGIN) / span;
        let offset = PANEL * p as f64;
        writeln!(
            svg,
            r#"<g class="projection" data-axes="x{}/x{}">"#,
            a + 1,
            b + 1
        )
        .unwrap();
        for i in 0..coords.nrows() {
            let cx = offset + MARGIN + (xs[i] - x0) * scale;
            let cy = PANEL - MARGIN - (ys[i] - y0) * scale;
            let color = match labels {
                Some(l) => PALETTE[slot[&l[i]] % PALETTE.len()],
                None => PALETTE[0],
            };
            writeln!(svg, r#"<circle cx="{cx:.2}" cy="{cy:.2}" r="{RADIUS}" fill="{color}"/>"#).unwrap();
        }
        svg.push_str("</g>\n");
    }
    svg.push_str("</svg>\n");
    Ok(svg)
}

fn range<'a>(values: impl Iterator<Item = &'a f64>) -> (f64, f64) {
    values.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)))
}

/// Writes the scatter plot to `path`.
pub fn emit_scatter_svg(coords: ArrayView2<'_, f64>, labels: Option<&[i64]>, path: impl AsRef<Path>) -> Result<()> {
    let svg = render_scatter_svg(coords, labels)?;
    write_text(path, &svg)?;
    Ok(())
}
