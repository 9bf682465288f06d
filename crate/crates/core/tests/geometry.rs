use std::f64::consts::PI;

use isumap_core::datasets::{
    hemisphere_polar_angle, nonuniform_hemisphere, rolled_plane, swiss_roll, swiss_roll_with, torus, SwissRollParams,
};
use isumap_core::eigen::full_symmetric;
use isumap_core::embedding::{classical_mds, double_center, metric_mds_traced};
use isumap_core::geodesics::dijkstra_all_pairs;
use isumap_core::pipeline::{run_pipeline_on, PipelineConfig};
use isumap_core::{MdsConfig, MdsMethod, SparseMetric};
use isumap_testkit as tk;
use ndarray::Array2;

#[test]
fn flat_rectangle_spectrum_is_two_dimensional() {
    let grid = Array2::from_shape_fn((200, 2), |(i, c)| if c == 0 { (i % 20) as f64 } else { (i / 20) as f64 });
    let geodesic = tk::euclidean_metric(&grid);
    let values = full_symmetric(double_center(&geodesic).view()).values;
    let total: f64 = values.iter().map(|l| l.abs()).sum();
    let ratio = (values[0] + values[1]) / total;
    assert!(ratio >= 0.99, "ratio {ratio}");
}

#[test]
fn geodesic_completion_is_a_fixpoint() {
    for seed in 0..5 {
        let sm = tk::random_sparse_graph(25, 0.2, 4.0, 300 + seed);
        let d = dijkstra_all_pairs(&sm, 2).unwrap();
        let mut complete = SparseMetric::new(25);
        for i in 0..25 {
            for j in i + 1..25 {
                if d.dist[[i, j]].is_finite() {
                    complete.insert(i, j, d.dist[[i, j]]).unwrap();
                }
            }
        }
        let again = dijkstra_all_pairs(&complete, 1).unwrap();
        for (a, b) in again.dist.iter().zip(&d.dist) {
            assert!(a == b || (a - b).abs() <= 1e-9, "{a} vs {b}");
        }
    }
}

#[test]
fn metric_mds_improves_on_classical_for_a_swiss_roll() {
    let mut cfg = PipelineConfig::default();
    cfg.k = 15;
    cfg.evaluate = false;
    let out = run_pipeline_on(&cfg, swiss_roll(500, false, 3).unwrap()).unwrap();
    let dm = &out.completion.metric;
    let classical = classical_mds(dm, 2).unwrap();
    let mds = MdsConfig {
        method: MdsMethod::MetricMds,
        ..MdsConfig::default()
    };
    let (metric, trace) = metric_mds_traced(dm, &mds).unwrap();
    assert!(metric.stress <= classical.stress);
    assert_eq!(trace.accepted[0], classical.stress);
    assert!(trace.accepted.windows(2).all(|w| w[1] <= w[0]));
}

#[test]
fn swiss_roll_hole_and_chart() {
    let params = SwissRollParams::default();
    let roll = swiss_roll_with(2000, true, 8, &params).unwrap();
    assert_eq!(roll.cloud.len(), 2000);
    for (i, p) in roll.params.rows().into_iter().enumerate() {
        assert!(!params.in_hole(p[0], p[1]));
        let x = roll.cloud.points.row(i);
        assert_eq!(x[0], p[0] * p[0].cos());
        assert_eq!(x[1], p[1]);
        assert_eq!(x[2], p[0] * p[0].sin());
    }
    // The chart's first coordinate is the arclength along the spiral, so it grows with u.
    let mut order: Vec<usize> = (0..2000).collect();
    order.sort_by(|&a, &b| roll.params[[a, 0]].total_cmp(&roll.params[[b, 0]]));
    assert!(order.windows(2).all(|w| roll.chart[[w[0], 0]] <= roll.chart[[w[1], 0]]));
}

#[test]
fn torus_angle_marginal_matches_density() {
    let (big_r, small_r) = (3.0, 1.0);
    let n = 100_000;
    let pc = torus(n, big_r, small_r, 17).unwrap();
    const BINS: usize = 24;
    let mut counts = [0usize; BINS];
    for p in pc.points.rows() {
        let ring = (p[0] * p[0] + p[1] * p[1]).sqrt();
        assert!(((ring - big_r).powi(2) + p[2] * p[2] - small_r * small_r).abs() <= 1e-12);
        let theta = p[2].atan2(ring - big_r).rem_euclid(2.0 * PI);
        counts[((theta / (2.0 * PI) * BINS as f64) as usize).min(BINS - 1)] += 1;
    }
    // Bin probability: integral of (R + r cos t) / (2 pi R) over the bin.
    let width = 2.0 * PI / BINS as f64;
    let chi2: f64 = (0..BINS)
        .map(|b| {
            let (a, c) = (b as f64 * width, (b + 1) as f64 * width);
            let p = (big_r * width + small_r * (c.sin() - a.sin())) / (2.0 * PI * big_r);
            let expected = p * n as f64;
            (counts[b] as f64 - expected).powi(2) / expected
        })
        .sum();
    // 23 degrees of freedom, 0.1% critical value.
    assert!(chi2 < 49.73, "chi2 = {chi2}");
}

/// Total turning of the rolled curve, measured on the generated points.
fn turning_angle(c: u32) -> f64 {
    let pc = rolled_plane(3000, c, 5).unwrap();
    let mut pts: Vec<(f64, f64, f64)> = pc
        .points
        .rows()
        .into_iter()
        .map(|p| ((p[0] * p[0] + p[2] * p[2]).sqrt(), p[0], p[2]))
        .collect();
    pts.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut total = 0.0;
    let mut prev: Option<f64> = None;
    for w in pts.windows(2) {
        let (dx, dz) = (w[1].1 - w[0].1, w[1].2 - w[0].2);
        if dx == 0.0 && dz == 0.0 {
            continue;
        }
        let heading = dz.atan2(dx);
        if let Some(h) = prev {
            let mut turn = heading - h;
            turn -= 2.0 * PI * (turn / (2.0 * PI)).round();
            total += turn.abs();
        }
        prev = Some(heading);
    }
    total
}

#[test]
fn rolled_plane_winds_tighter_with_c() {
    let angles: Vec<f64> = (4..=6).map(turning_angle).collect();
    assert!(angles[0] < angles[1] && angles[1] < angles[2], "{angles:?}");
    // The curve (t cos ct, t sin ct) turns by about c * (t1 - t0) plus a small correction.
    for (c, a) in (4..=6).zip(&angles) {
        assert!((a / (3.0 * c as f64) - 1.0).abs() < 0.1, "c = {c}: {a}");
    }
}

#[test]
fn hemisphere_is_denser_at_the_pole() {
    let n = 10_000;
    let pc = nonuniform_hemisphere(n, 2.0, 21).unwrap();
    assert_eq!(pc.len(), n);
    let mut polar = Vec::with_capacity(n);
    for p in pc.points.rows() {
        let norm = (p[0] * p[0] + p[1] * p[1] + p[2] * p[2]).sqrt();
        assert!((norm - 1.0).abs() <= 1e-12 && p[2] >= 0.0);
        polar.push(p[2].clamp(-1.0, 1.0).acos());
    }
    let cap = polar.iter().filter(|&&t| t < PI / 6.0).count() as f64 / n as f64;
    assert!(cap > 1.0 - (PI / 6.0).cos(), "cap fraction {cap}");

    // Kolmogorov-Smirnov distance to the target law, at the 0.1% level.
    let c: f64 = 2.0;
    let cdf = |t: f64| (1.0 - (-c * t).exp()) / (1.0 - (-c * PI / 2.0).exp());
    polar.sort_by(f64::total_cmp);
    let ks = polar
        .iter()
        .enumerate()
        .map(|(i, &t)| (cdf(t) - i as f64 / n as f64).abs().max((cdf(t) - (i + 1) as f64 / n as f64).abs()))
        .fold(0.0, f64::max);
    assert!(ks < 1.95 / (n as f64).sqrt(), "KS = {ks}");
    assert!((cdf(hemisphere_polar_angle(0.3, c)) - 0.3).abs() < 1e-12);
}
