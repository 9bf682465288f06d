//! Leading eigenpairs of dense symmetric matrices.
//!
//! Small matrices go through a full dense decomposition. Larger ones use
//! Lanczos iteration with full reorthogonalization, which only needs
//! matrix-vector products and stops once the `m` largest Ritz pairs converge.

use nalgebra::DMatrix;
use ndarray::parallel::prelude::*;
use ndarray::{Array1, Array2, ArrayView2, Axis};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// Matrices up to this size are decomposed densely.
pub const DENSE_LIMIT: usize = 400;

const LANCZOS_TOL: f64 = 1e-11;
const LANCZOS_SEED: u64 = 0x1503_2024;

/// Eigenvalues (descending) and matching unit eigenvectors as columns.
#[derive(Clone, Debug)]
pub struct Eigenpairs {
    pub values: Array1<f64>,
    pub vectors: Array2<f64>,
}

/// Every eigenpair of a symmetric matrix, eigenvalues descending.
pub fn full_symmetric(matrix: ArrayView2<'_, f64>) -> Eigenpairs {
    let n = matrix.nrows();
    let dm = DMatrix::from_fn(n, n, |i, j| matrix[[i, j]]);
    let eig = dm.symmetric_eigen();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]).then(a.cmp(&b)));
    let values = order.iter().map(|&c| eig.eigenvalues[c]).collect();
    let vectors = Array2::from_shape_fn((n, n), |(i, r)| eig.eigenvectors[(i, order[r])]);
    Eigenpairs { values, vectors }
}

/// The `m` algebraically largest eigenpairs of a symmetric matrix.
pub fn top_symmetric(matrix: ArrayView2<'_, f64>, m: usize) -> Result<Eigenpairs> {
    let n = matrix.nrows();
    if m == 0 || m > n {
        return Err(Error::param(format!("cannot take {m} eigenpairs of a {n}x{n} matrix")));
    }
    if n <= DENSE_LIMIT {
        let full = full_symmetric(matrix);
        return Ok(Eigenpairs {
            values: full.values.slice(ndarray::s![..m]).to_owned(),
            vectors: full.vectors.slice(ndarray::s![.., ..m]).to_owned(),
        });
    }
    lanczos(matrix, m)
}

fn matvec(matrix: ArrayView2<'_, f64>, x: &[f64], out: &mut [f64]) {
    out.par_iter_mut()
        .zip(matrix.axis_iter(Axis(0)).into_par_iter())
        .for_each(|(o, row)| {
            *o = row.iter().zip(x).map(|(a, b)| a * b).sum();
        });
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Removes the components of `v` along the (orthonormal) basis vectors.
fn orthogonalize(v: &mut [f64], basis: &[Vec<f64>]) {
    for _ in 0..2 {
        for q in basis {
            let c = dot(v, q);
            v.iter_mut().zip(q).for_each(|(x, y)| *x -= c * y);
        }
    }
}

fn random_unit(rng: &mut ChaCha8Rng, n: usize, basis: &[Vec<f64>]) -> Option<Vec<f64>> {
    for _ in 0..8 {
        let mut v: Vec<f64> = (0..n).map(|_| rng.random::<f64>() - 0.5).collect();
        orthogonalize(&mut v, basis);
        let nv = norm(&v);
        if nv > 1e-8 {
            v.iter_mut().for_each(|x| *x /= nv);
            return Some(v);
        }
    }
    None
}

fn lanczos(matrix: ArrayView2<'_, f64>, m: usize) -> Result<Eigenpairs> {
    let n = matrix.nrows();
    let max_steps = n.min(1000.max(20 * m));
    let mut rng = ChaCha8Rng::seed_from_u64(LANCZOS_SEED);
    let mut basis: Vec<Vec<f64>> = Vec::new();
    let mut alpha: Vec<f64> = Vec::new();
    // beta[j] couples basis vectors j and j+1 (zero after a restart).
    let mut beta: Vec<f64> = Vec::new();
    let mut w = vec![0.0; n];
    let mut q = random_unit(&mut rng, n, &basis).expect("n > 0");

    loop {
        matvec(matrix, &q, &mut w);
        let a = dot(&w, &q);
        basis.push(q);
        alpha.push(a);
        orthogonalize(&mut w, &basis);
        let b = norm(&w);
        let steps = basis.len();

        let check = steps >= m && (steps % 10 == 0 || steps == max_steps || b < 1e-10 * a.abs().max(1.0));
        if check {
            let (values, ritz, residual) = tridiagonal_ritz(&alpha, &beta, b, m);
            let scale = values.iter().fold(0.0f64, |s, v| s.max(v.abs())).max(f64::MIN_POSITIVE);
            let converged = residual.iter().all(|r| *r <= LANCZOS_TOL * scale);
            if converged || steps == max_steps {
                if !converged {
                    return Err(Error::numerical(format!(
                        "Lanczos did not converge in {steps} steps (residuals {residual:?})"
                    )));
                }
                let mut vectors = Array2::zeros((n, m));
                for r in 0..m {
                    for (j, qj) in basis.iter().enumerate() {
                        let c = ritz[(j, r)];
                        vectors.column_mut(r).iter_mut().zip(qj).for_each(|(x, y): (&mut f64, &f64)| *x += c * y);
                    }
                    let nr = vectors.column(r).dot(&vectors.column(r)).sqrt();
                    vectors.column_mut(r).mapv_inplace(|x| x / nr);
                }
                return Ok(Eigenpairs {
                    values: Array1::from(values),
                    vectors,
                });
            }
        }

        if b < 1e-10 * a.abs().max(1.0) {
            // Invariant subspace: continue from a fresh direction.
            match random_unit(&mut rng, n, &basis) {
                Some(v) => {
                    beta.push(0.0);
                    q = v;
                }
                None => return Err(Error::numerical("Lanczos restart failed")),
            }
        } else {
            beta.push(b);
            q = w.iter().map(|x| x / b).collect();
        }
    }
}

/// Top `m` eigenpairs of the tridiagonal matrix plus the Lanczos residual
/// bound `|b * s_last|` of each Ritz pair.
fn tridiagonal_ritz(alpha: &[f64], beta: &[f64], next_beta: f64, m: usize) -> (Vec<f64>, DMatrix<f64>, Vec<f64>) {
    let k = alpha.len();
    let mut t = DMatrix::zeros(k, k);
    for j in 0..k {
        t[(j, j)] = alpha[j];
        if j + 1 < k {
            t[(j, j + 1)] = beta[j];
            t[(j + 1, j)] = beta[j];
        }
    }
    let eig = t.symmetric_eigen();
    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]).then(a.cmp(&b)));
    let values: Vec<f64> = order[..m].iter().map(|&c| eig.eigenvalues[c]).collect();
    let ritz = DMatrix::from_fn(k, m, |i, r| eig.eigenvectors[(i, order[r])]);
    let residual = (0..m).map(|r| (next_beta * ritz[(k - 1, r)]).abs()).collect();
    (values, ritz, residual)
}

/// Flips each column so that its largest-magnitude entry (the first one among
/// ties) is positive.
pub fn normalize_signs(vectors: &mut Array2<f64>) {
    for mut col in vectors.columns_mut() {
        let mut best = 0;
        for (i, v) in col.iter().enumerate() {
            if v.abs() > col[best].abs() {
                best = i;
            }
        }
        if !col.is_empty() && col[best] < 0.0 {
            col.mapv_inplace(|x| -x);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn random_symmetric(n: usize, seed: u64) -> Array2<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a = Array2::from_shape_fn((n, n), |_| rng.random::<f64>() - 0.5);
        &a + &a.t()
    }

    #[test]
    fn lanczos_matches_dense_decomposition() {
        let a = random_symmetric(450, 3);
        let dense = full_symmetric(a.view());
        let top = top_symmetric(a.view(), 3).unwrap();
        for r in 0..3 {
            assert!((dense.values[r] - top.values[r]).abs() < 1e-8 * dense.values[0].abs());
            let overlap = dense.vectors.column(r).dot(&top.vectors.column(r)).abs();
            assert!((overlap - 1.0).abs() < 1e-6, "overlap {overlap}");
        }
    }

    #[test]
    fn lanczos_handles_low_rank() {
        // Rank-2 PSD matrix: Krylov space becomes invariant after two steps.
        let n = 500;
        let u = Array1::from_shape_fn(n, |i| (i as f64 * 0.01).sin());
        let v = Array1::from_shape_fn(n, |i| (i as f64 * 0.03).cos());
        let a = Array2::from_shape_fn((n, n), |(i, j)| 3.0 * u[i] * u[j] + v[i] * v[j]);
        let top = lanczos(a.view(), 3).unwrap();
        let dense = full_symmetric(a.view());
        for r in 0..3 {
            assert!((top.values[r] - dense.values[r]).abs() < 1e-8, "{r}: {} {}", top.values[r], dense.values[r]);
        }
    }

    #[test]
    fn sign_convention() {
        let mut v = ndarray::array![[0.1, 0.5], [-0.9, -0.2]];
        normalize_signs(&mut v);
        assert_eq!(v, ndarray::array![[-0.1, 0.5], [0.9, -0.2]]);
    }
}
