//! Merging the star graphs into one symmetric sparse metric with t-conorms.
//!
//! A t-conorm combines fuzzy strengths in `[0, 1]`. Metric weights are mapped
//! to strengths by `phi(W) = exp(-W)` and back by `psi(w) = -ln(w)`, so a
//! t-conorm `T` acts on metric weights as `psi(T(phi(A), phi(B)))`. The
//! canonical (maximum) t-conorm becomes `min(A, B)` and is evaluated directly.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::types::{NeighborGraph, SparseMetric};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TConorm {
    /// `max(a, b)`.
    Canonical,
    /// `a + b - ab`, also known as the probabilistic sum.
    AlgebraicSum,
    /// `min(1, a + b)` (Lukasiewicz).
    BoundedSum,
    /// `a` if `b = 0`, `b` if `a = 0`, otherwise 1.
    DrasticSum,
}

impl TConorm {
    pub const ALL: [TConorm; 4] = [
        TConorm::Canonical,
        TConorm::AlgebraicSum,
        TConorm::BoundedSum,
        TConorm::DrasticSum,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            TConorm::Canonical => "canonical",
            TConorm::AlgebraicSum => "algebraic_sum",
            TConorm::BoundedSum => "bounded_sum",
            TConorm::DrasticSum => "drastic_sum",
        }
    }

    /// Applies the t-conorm to strengths in `[0, 1]`.
    pub fn fuzzy(self, a: f64, b: f64) -> Result<f64> {
        for v in [a, b] {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::Domain(format!(
                    "{} expects strengths in [0, 1], got {v}",
                    self.as_str()
                )));
            }
        }
        Ok(self.fuzzy_unchecked(a, b))
    }

    fn fuzzy_unchecked(self, a: f64, b: f64) -> f64 {
        match self {
            TConorm::Canonical => a.max(b),
            TConorm::AlgebraicSum => a + b - a * b,
            TConorm::BoundedSum => (a + b).min(1.0),
            TConorm::DrasticSum => {
                if b == 0.0 {
                    a
                } else if a == 0.0 {
                    b
                } else {
                    1.0
                }
            }
        }
    }

    /// Applies the metric counterpart to weights in `[0, inf]`; `inf` is the identity.
    pub fn metric(self, a: f64, b: f64) -> Result<f64> {
        for v in [a, b] {
            if v.is_nan() || v < 0.0 {
                return Err(Error::Domain(format!(
                    "{} expects metric weights in [0, inf], got {v}",
                    self.as_str()
                )));
            }
        }
        Ok(self.metric_unchecked(a, b))
    }

    fn metric_unchecked(self, a: f64, b: f64) -> f64 {
        match self {
            TConorm::Canonical => a.min(b),
            // The identity holds exactly; psi(phi(a)) can be off by an ulp.
            _ if b == f64::INFINITY => a,
            _ if a == f64::INFINITY => b,
            _ => psi(self.fuzzy_unchecked(phi(a), phi(b))),
        }
    }
}

impl fmt::Display for TConorm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for TConorm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "canonical" | "max" => Ok(TConorm::Canonical),
            "algebraic_sum" | "probabilistic_sum" => Ok(TConorm::AlgebraicSum),
            "bounded_sum" => Ok(TConorm::BoundedSum),
            "drastic_sum" => Ok(TConorm::DrasticSum),
            other => Err(Error::param(format!(
                "unknown t-conorm `{other}` (expected canonical, algebraic_sum, bounded_sum or drastic_sum)"
            ))),
        }
    }
}

/// Metric weight to fuzzy strength: `exp(-w)`, with `phi(inf) = 0`.
#[inline]
pub fn phi(weight: f64) -> f64 {
    (-weight).exp()
}

/// Fuzzy strength to metric weight: `-ln(s)`, with `psi(0) = inf`.
#[inline]
pub fn psi(strength: f64) -> f64 {
    // -ln(1) is -0.0
    (-strength.ln()).max(0.0)
}

pub fn fuzzy_tconorm(t: TConorm, a: f64, b: f64) -> Result<f64> {
    t.fuzzy(a, b)
}

pub fn metric_tconorm(t: TConorm, a: f64, b: f64) -> Result<f64> {
    t.metric(a, b)
}

/// Merges the star graphs: each unordered pair `{i, j}` touched by a star
/// receives `T(d_i(x_i, x_j), d_j(x_j, x_i))`, a missing direction counting as
/// infinity. Pairs in no star stay absent.
pub fn symmetrize(graph: &NeighborGraph, t: TConorm) -> SparseMetric {
    let n = graph.n_points();
    let rows: Vec<Vec<(usize, usize, f64)>> = (0..n)
        .into_par_iter()
        .map(|i| {
            let mut out = Vec::with_capacity(graph.k);
            for (p, &j) in graph.neighbor_idx.row(i).iter().enumerate() {
                let forward = graph.local_dist[[i, p]];
                let backward = graph.local(j, i);
                // Each unordered pair is emitted once: by the smaller index, or by
                // the only endpoint whose star contains it.
                if backward.is_some() && j < i {
                    continue;
                }
                let backward = backward.unwrap_or(f64::INFINITY);
                let (lo, hi) = if i < j { (forward, backward) } else { (backward, forward) };
                out.push((i, j, t.metric_unchecked(lo, hi)));
            }
            out
        })
        .collect();

    let mut sm = SparseMetric::new(n);
    for (i, j, w) in rows.into_iter().flatten() {
        sm.insert(i, j, w)
            .expect("merged weight of finite local distances is finite");
    }
    sm
}

/// Number of stored pairs with zero weight.
pub fn zero_weight_pairs(sm: &SparseMetric) -> usize {
    sm.iter().filter(|&(_, _, w)| w == 0.0).count()
}

#[cfg(test)]
mod tests {
    use ndarray::{array, Array1};

    use super::*;

    #[test]
    fn fuzzy_examples() {
        assert_eq!(TConorm::Canonical.fuzzy(0.3, 0.7).unwrap(), 0.7);
        assert_eq!(TConorm::AlgebraicSum.fuzzy(0.5, 0.5).unwrap(), 0.75);
        assert_eq!(TConorm::BoundedSum.fuzzy(0.5, 0.75).unwrap(), 1.0);
        assert_eq!(TConorm::DrasticSum.fuzzy(0.2, 0.3).unwrap(), 1.0);
        for t in TConorm::ALL {
            assert_eq!(t.fuzzy(0.42, 0.0).unwrap(), 0.42);
            assert_eq!(t.fuzzy(0.0, 0.42).unwrap(), 0.42);
        }
    }

    #[test]
    fn fuzzy_domain_errors() {
        assert!(matches!(TConorm::Canonical.fuzzy(1.5, 0.0), Err(Error::Domain(_))));
        assert!(matches!(TConorm::BoundedSum.fuzzy(0.5, -0.1), Err(Error::Domain(_))));
        assert!(matches!(TConorm::DrasticSum.metric(-1.0, 0.0), Err(Error::Domain(_))));
    }

    #[test]
    fn metric_examples() {
        assert_eq!(TConorm::Canonical.metric(3.0, 5.0).unwrap(), 3.0);
        for t in TConorm::ALL {
            assert_eq!(t.metric(0.6, f64::INFINITY).unwrap(), 0.6);
            assert_eq!(t.metric(f64::INFINITY, f64::INFINITY).unwrap(), f64::INFINITY);
        }
        // -ln(2 e^{-1/2} - e^{-1}) evaluated at 50 digits with mpmath.
        let expected = 0.168_203_434_248_813_77;
        let got = TConorm::AlgebraicSum.metric(0.5, 0.5).unwrap();
        assert!((got - expected).abs() < 1e-15, "{got}");
        assert_eq!(TConorm::DrasticSum.metric(0.3, 2.0).unwrap(), 0.0);
    }

    #[test]
    fn psi_inverts_phi() {
        for i in 0..=1000 {
            let w = i as f64 * 0.05;
            assert!((psi(phi(w)) - w).abs() <= 1e-12, "{w}");
        }
        assert_eq!(psi(phi(0.0)), 0.0);
        assert!(psi(phi(0.0)).is_sign_positive());
        assert_eq!(phi(f64::INFINITY), 0.0);
        assert_eq!(psi(0.0), f64::INFINITY);
    }

    fn graph() -> NeighborGraph {
        // 0 -> 1 (0.6), 1 -> 0 (0.4), 2 -> 0 (0.6); the star of 0 does not contain 2.
        NeighborGraph {
            k: 1,
            neighbor_idx: array![[1], [0], [0]],
            raw_dist: array![[1.0], [1.0], [2.0]],
            local_dist: array![[0.6], [0.4], [0.6]],
            rho: Array1::zeros(3),
            sigma: Array1::ones(3),
        }
    }

    #[test]
    fn symmetrize_canonical_takes_minimum() {
        let sm = symmetrize(&graph(), TConorm::Canonical);
        assert_eq!(sm.len(), 2);
        assert_eq!(sm.get(0, 1), Some(0.4));
        assert_eq!(sm.get(0, 2), Some(0.6));
        assert_eq!(sm.get(1, 2), None);
    }

    #[test]
    fn symmetrize_one_sided_edge_is_identity_for_all_kinds() {
        for t in TConorm::ALL {
            let sm = symmetrize(&graph(), t);
            assert_eq!(sm.get(2, 0), Some(0.6), "{t}");
        }
    }

    #[test]
    fn zero_weights_are_stored() {
        let mut g = graph();
        g.local_dist = array![[0.0], [0.0], [0.0]];
        let sm = symmetrize(&g, TConorm::Canonical);
        assert_eq!(sm.get(0, 1), Some(0.0));
        assert_eq!(zero_weight_pairs(&sm), 2);
    }

    #[test]
    fn parse_names() {
        for t in TConorm::ALL {
            assert_eq!(t.as_str().parse::<TConorm>().unwrap(), t);
        }
        assert_eq!("probabilistic_sum".parse::<TConorm>().unwrap(), TConorm::AlgebraicSum);
    }
}
