//! Test-only oracles written against plain `Vec` storage so they share no
//! code with the library kernels.

#![allow(dead_code)]

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use riemannlora::linalg::DenseMatrix;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn rel(a: &DenseMatrix, b: &DenseMatrix) -> f64 {
    (a - b).frobenius_norm() / b.frobenius_norm().max(1e-300)
}

/// Row-major copy as nested vectors.
pub fn rows_of(m: &DenseMatrix) -> Vec<Vec<f64>> {
    (0..m.rows()).map(|i| (0..m.cols()).map(|j| m.get(i, j)).collect()).collect()
}

pub fn from_rows(rows: &[Vec<f64>]) -> DenseMatrix {
    let c = rows.first().map_or(0, Vec::len);
    DenseMatrix::from_fn(rows.len(), c, |i, j| rows[i][j])
}

/// Naive triple-loop product.
pub fn naive_mul(a: &DenseMatrix, b: &DenseMatrix) -> DenseMatrix {
    assert_eq!(a.cols(), b.rows());
    DenseMatrix::from_fn(a.rows(), b.cols(), |i, j| {
        (0..a.cols()).map(|k| a.get(i, k) * b.get(k, j)).sum()
    })
}

/// Full SVD by one-sided Jacobi rotations. Returns `(U, sigma, V)` with all
/// `min(m, n)` singular values sorted descending; U is `m × p`, V is `n × p`.
pub fn jacobi_svd(m: &DenseMatrix) -> (DenseMatrix, Vec<f64>, DenseMatrix) {
    let transposed = m.rows() < m.cols();
    let src = if transposed { m.transpose() } else { m.clone() };
    let (rows, cols) = src.shape();
    // Work on columns.
    let mut a: Vec<Vec<f64>> = (0..cols).map(|j| (0..rows).map(|i| src.get(i, j)).collect()).collect();
    let mut v: Vec<Vec<f64>> = (0..cols)
        .map(|j| (0..cols).map(|i| if i == j { 1.0 } else { 0.0 }).collect())
        .collect();
    for _sweep in 0..80 {
        let mut off = 0.0f64;
        for p in 0..cols {
            for q in p + 1..cols {
                let alpha: f64 = a[p].iter().map(|x| x * x).sum();
                let beta: f64 = a[q].iter().map(|x| x * x).sum();
                let gamma: f64 = a[p].iter().zip(&a[q]).map(|(x, y)| x * y).sum();
                if gamma == 0.0 {
                    continue;
                }
                off = off.max(gamma.abs() / (alpha * beta).sqrt());
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let t = if zeta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                for i in 0..rows {
                    let (x, y) = (a[p][i], a[q][i]);
                    a[p][i] = c * x - s * y;
                    a[q][i] = s * x + c * y;
                }
                for i in 0..cols {
                    let (x, y) = (v[p][i], v[q][i]);
                    v[p][i] = c * x - s * y;
                    v[q][i] = s * x + c * y;
                }
            }
        }
        if off < 1e-15 {
            break;
        }
    }
    let mut order: Vec<usize> = (0..cols).collect();
    let norms: Vec<f64> = a.iter().map(|c| c.iter().map(|x| x * x).sum::<f64>().sqrt()).collect();
    order.sort_by(|&i, &j| norms[j].partial_cmp(&norms[i]).unwrap());
    let sigma: Vec<f64> = order.iter().map(|&j| norms[j]).collect();
    let u = DenseMatrix::from_fn(rows, cols, |i, k| {
        let j = order[k];
        if norms[j] > 0.0 {
            a[j][i] / norms[j]
        } else {
            0.0
        }
    });
    let vv = DenseMatrix::from_fn(cols, cols, |i, k| v[order[k]][i]);
    if transposed {
        (vv, sigma, u)
    } else {
        (u, sigma, vv)
    }
}

pub fn singular_values(m: &DenseMatrix) -> Vec<f64> {
    jacobi_svd(m).1
}

/// Best rank-`k` approximation from the Jacobi oracle.
pub fn dense_trunc(m: &DenseMatrix, k: usize) -> DenseMatrix {
    let (u, s, v) = jacobi_svd(m);
    DenseMatrix::from_fn(m.rows(), m.cols(), |i, j| (0..k).map(|l| u.get(i, l) * s[l] * v.get(j, l)).sum())
}

/// Orthonormal basis by modified Gram-Schmidt (test-only).
pub fn gram_schmidt(m: &DenseMatrix) -> DenseMatrix {
    let mut cols: Vec<Vec<f64>> = (0..m.cols()).map(|j| (0..m.rows()).map(|i| m.get(i, j)).collect()).collect();
    for j in 0..cols.len() {
        for _ in 0..2 {
            for k in 0..j {
                let d: f64 = cols[j].iter().zip(&cols[k]).map(|(x, y)| x * y).sum();
                let ck = cols[k].clone();
                for (x, y) in cols[j].iter_mut().zip(&ck) {
                    *x -= d * y;
                }
            }
        }
        let nrm: f64 = cols[j].iter().map(|x| x * x).sum::<f64>().sqrt();
        for x in cols[j].iter_mut() {
            *x /= nrm;
        }
    }
    DenseMatrix::from_fn(m.rows(), m.cols(), |i, j| cols[j][i])
}

/// `I − U U^T` for orthonormal `U`.
pub fn complement_projector(u: &DenseMatrix) -> DenseMatrix {
    let p = naive_mul(u, &u.transpose());
    DenseMatrix::from_fn(u.rows(), u.rows(), |i, j| if i == j { 1.0 } else { 0.0 } - p.get(i, j))
}

/// Dense tangent projection `Z − (I − UU^T) Z (I − VV^T)` from orthonormal
/// bases of the column and row spaces.
pub fn dense_tangent_projection(z: &DenseMatrix, u: &DenseMatrix, v: &DenseMatrix) -> DenseMatrix {
    let pl = complement_projector(u);
    let pr = complement_projector(v);
    z - &naive_mul(&naive_mul(&pl, z), &pr)
}

/// Largest principal angle between the column spans of two orthonormal bases.
pub fn max_principal_angle(a: &DenseMatrix, b: &DenseMatrix) -> f64 {
    let s = singular_values(&naive_mul(&a.transpose(), b));
    let smallest = s.iter().cloned().fold(f64::INFINITY, f64::min).min(1.0);
    smallest.acos()
}

/// Matrix with prescribed singular values and random singular vectors.
pub fn with_spectrum(m: usize, n: usize, sigma: &[f64], seed: u64) -> DenseMatrix {
    let mut g = rng(seed);
    let u = gram_schmidt(&DenseMatrix::random_normal(m, sigma.len(), &mut g));
    let v = gram_schmidt(&DenseMatrix::random_normal(n, sigma.len(), &mut g));
    naive_mul(&u.scale_columns(sigma), &v.transpose())
}

/// Inverse of a small square matrix by Gauss-Jordan with partial pivoting.
pub fn inverse(m: &DenseMatrix) -> DenseMatrix {
    let n = m.rows();
    let mut a = rows_of(m);
    let mut inv: Vec<Vec<f64>> = (0..n).map(|i| (0..n).map(|j| if i == j { 1.0 } else { 0.0 }).collect()).collect();
    for c in 0..n {
        let p = (c..n).max_by(|&i, &j| a[i][c].abs().partial_cmp(&a[j][c].abs()).unwrap()).unwrap();
        a.swap(c, p);
        inv.swap(c, p);
        let d = a[c][c];
        for j in 0..n {
            a[c][j] /= d;
            inv[c][j] /= d;
        }
        for i in 0..n {
            if i != c {
                let f = a[i][c];
                for j in 0..n {
                    a[i][j] -= f * a[c][j];
                    inv[i][j] -= f * inv[c][j];
                }
            }
        }
    }
    from_rows(&inv)
}

/// Random matrix with condition number kept moderate.
pub fn random_invertible(r: usize, seed: u64) -> DenseMatrix {
    let mut g = rng(seed);
    loop {
        let s = DenseMatrix::random_normal(r, r, &mut g);
        let sv = singular_values(&s);
        if sv[r - 1] > 0.2 * sv[0] {
            return s;
        }
    }
}
