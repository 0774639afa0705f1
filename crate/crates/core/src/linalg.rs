//! Dense kernels: the matrix type, thin QR, truncated SVD and the skeleton SVD
//! of a product `P Q^T` computed without forming it.
//!
//! Storage is a column-major [`nalgebra::DMatrix`]; the logical order exposed
//! by [`DenseMatrix::from_row_major`] and [`DenseMatrix::to_row_major`] is
//! row-major.
//!
//! Every SVD returned from this module follows one sign convention: in each
//! column of `U` the entry of largest magnitude is positive (ties go to the
//! lowest row index) and the matching column of `V` is flipped with it. That
//! makes [`svd_trunc`] and [`skeleton_svd`] deterministic functions of their
//! input.

use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{check_shape, Error, Result};

/// Relative threshold on the diagonal of `R` below which [`qr_thin`] reports
/// rank deficiency.
pub const RANK_DEFICIENCY_RTOL: f64 = 1e-14;

/// Dense real matrix.
#[derive(Clone, PartialEq)]
pub struct DenseMatrix(DMatrix<f64>);

impl DenseMatrix {
    /// Builds a matrix from row-major entries, rejecting wrong counts and
    /// non-finite values.
    pub fn from_row_major(rows: usize, cols: usize, entries: Vec<f64>) -> Result<Self> {
        if entries.len() != rows * cols {
            return Err(Error::EntryCount {
                rows,
                cols,
                found: entries.len(),
            });
        }
        if let Some(idx) = entries.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                row: idx / cols.max(1),
                col: idx % cols.max(1),
            });
        }
        Ok(Self::wrap(DMatrix::from_row_slice(rows, cols, &entries)))
    }

    /// Wraps an nalgebra matrix after checking every entry is finite.
    pub fn from_nalgebra(m: DMatrix<f64>) -> Result<Self> {
        for j in 0..m.ncols() {
            for i in 0..m.nrows() {
                if !m[(i, j)].is_finite() {
                    return Err(Error::NonFinite { row: i, col: j });
                }
            }
        }
        Ok(Self::wrap(m))
    }

    pub(crate) fn wrap(m: DMatrix<f64>) -> Self {
        probe::note(m.nrows(), m.ncols());
        DenseMatrix(m)
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self::wrap(DMatrix::zeros(rows, cols))
    }

    /// Rectangular identity: ones on the main diagonal.
    pub fn identity(rows: usize, cols: usize) -> Self {
        Self::wrap(DMatrix::identity(rows, cols))
    }

    pub fn from_fn(rows: usize, cols: usize, f: impl FnMut(usize, usize) -> f64) -> Self {
        Self::wrap(DMatrix::from_fn(rows, cols, f))
    }

    pub fn from_diagonal(rows: usize, cols: usize, diag: &[f64]) -> Self {
        Self::from_fn(rows, cols, |i, j| if i == j && i < diag.len() { diag[i] } else { 0.0 })
    }

    /// Matrix whose columns are the given vectors.
    pub fn from_columns(rows: usize, columns: &[Vec<f64>]) -> Result<Self> {
        for c in columns {
            if c.len() != rows {
                return Err(Error::EntryCount {
                    rows,
                    cols: columns.len(),
                    found: c.len(),
                });
            }
        }
        Ok(Self::from_fn(rows, columns.len(), |i, j| columns[j][i]))
    }

    /// Entries drawn i.i.d. from N(0, 1).
    pub fn random_normal<R: Rng + ?Sized>(rows: usize, cols: usize, rng: &mut R) -> Self {
        // Row-major fill so the stream maps to entries in the documented order.
        let mut m = DMatrix::zeros(rows, cols);
        for i in 0..rows {
            for j in 0..cols {
                m[(i, j)] = rng.sample(StandardNormal);
            }
        }
        Self::wrap(m)
    }

    /// A matrix with orthonormal columns drawn from the Haar measure.
    pub fn random_orthonormal<R: Rng + ?Sized>(rows: usize, cols: usize, rng: &mut R) -> Self {
        assert!(cols <= rows, "random_orthonormal needs cols <= rows");
        householder_qr(&Self::random_normal(rows, cols, rng)).0
    }

    pub fn rows(&self) -> usize {
        self.0.nrows()
    }

    pub fn cols(&self) -> usize {
        self.0.ncols()
    }

    pub fn shape(&self) -> (usize, usize) {
        self.0.shape()
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.0[(row, col)]
    }

    pub fn set(&mut self, row: usize, col: usize, value: f64) {
        self.0[(row, col)] = value;
    }

    pub fn as_nalgebra(&self) -> &DMatrix<f64> {
        &self.0
    }

    pub fn into_nalgebra(self) -> DMatrix<f64> {
        self.0
    }

    pub fn to_row_major(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.rows() * self.cols());
        for i in 0..self.rows() {
            for j in 0..self.cols() {
                out.push(self.0[(i, j)]);
            }
        }
        out
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|v| v.is_finite())
    }

    pub fn transpose(&self) -> Self {
        Self::wrap(self.0.transpose())
    }

    /// `self * rhs`.
    pub fn matmul(&self, rhs: &DenseMatrix) -> Result<Self> {
        check_shape("matmul", (self.cols(), rhs.cols()), (rhs.rows(), rhs.cols()))?;
        Ok(Self::wrap(&self.0 * &rhs.0))
    }

    /// `self^T * rhs` without materializing the transpose.
    pub fn t_matmul(&self, rhs: &DenseMatrix) -> Result<Self> {
        check_shape("t_matmul", (self.rows(), rhs.cols()), (rhs.rows(), rhs.cols()))?;
        Ok(Self::wrap(self.0.tr_mul(&rhs.0)))
    }

    /// `self * rhs^T`.
    pub fn matmul_t(&self, rhs: &DenseMatrix) -> Result<Self> {
        check_shape("matmul_t", (rhs.rows(), self.cols()), (rhs.rows(), rhs.cols()))?;
        Ok(Self::wrap(&self.0 * rhs.0.transpose()))
    }

    pub fn try_add(&self, rhs: &DenseMatrix) -> Result<Self> {
        check_shape("add", self.shape(), rhs.shape())?;
        Ok(Self::wrap(&self.0 + &rhs.0))
    }

    pub fn try_sub(&self, rhs: &DenseMatrix) -> Result<Self> {
        check_shape("sub", self.shape(), rhs.shape())?;
        Ok(Self::wrap(&self.0 - &rhs.0))
    }

    /// `alpha * self + beta * rhs`.
    pub fn lincomb(&self, alpha: f64, rhs: &DenseMatrix, beta: f64) -> Result<Self> {
        check_shape("lincomb", self.shape(), rhs.shape())?;
        Ok(Self::wrap(&self.0 * alpha + &rhs.0 * beta))
    }

    pub fn scale(&self, alpha: f64) -> Self {
        Self::wrap(&self.0 * alpha)
    }

    pub fn map(&self, f: impl FnMut(f64) -> f64) -> Self {
        Self::wrap(self.0.map(f))
    }

    pub fn hadamard(&self, rhs: &DenseMatrix) -> Result<Self> {
        check_shape("hadamard", self.shape(), rhs.shape())?;
        Ok(Self::wrap(self.0.component_mul(&rhs.0)))
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.0.norm()
    }

    pub fn frobenius_norm_sq(&self) -> f64 {
        self.0.norm_squared()
    }

    /// Frobenius inner product `tr(self^T rhs)`.
    pub fn frobenius_dot(&self, rhs: &DenseMatrix) -> Result<f64> {
        check_shape("frobenius_dot", self.shape(), rhs.shape())?;
        Ok(self.0.dot(&rhs.0))
    }

    pub fn max_abs(&self) -> f64 {
        self.0.iter().fold(0.0_f64, |acc, v| acc.max(v.abs()))
    }

    /// Columns `start..end` as a new matrix.
    pub fn column_range(&self, start: usize, end: usize) -> Self {
        Self::wrap(self.0.columns(start, end - start).into_owned())
    }

    /// Rows at the given indices, in order.
    pub fn select_rows(&self, indices: &[usize]) -> Self {
        Self::from_fn(indices.len(), self.cols(), |i, j| self.0[(indices[i], j)])
    }

    /// Horizontal concatenation `[self, rhs]`.
    pub fn hcat(&self, rhs: &DenseMatrix) -> Result<Self> {
        check_shape("hcat", (self.rows(), rhs.cols()), rhs.shape())?;
        let left = self.cols();
        Ok(Self::from_fn(self.rows(), left + rhs.cols(), |i, j| {
            if j < left {
                self.0[(i, j)]
            } else {
                rhs.0[(i, j - left)]
            }
        }))
    }

    /// Scales column `j` by `factors[j]`.
    pub fn scale_columns(&self, factors: &[f64]) -> Self {
        let mut m = self.0.clone();
        for (j, f) in factors.iter().enumerate() {
            m.column_mut(j).scale_mut(*f);
        }
        Self::wrap(m)
    }

    /// `‖self^T self − I‖_F`.
    pub fn orthonormality_defect(&self) -> f64 {
        let g = self.0.tr_mul(&self.0);
        (g - DMatrix::identity(self.cols(), self.cols())).norm()
    }
}

impl fmt::Debug for DenseMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "DenseMatrix {}x{} {:?}", self.rows(), self.cols(), self.to_row_major())
    }
}

impl Add for &DenseMatrix {
    type Output = DenseMatrix;
    fn add(self, rhs: &DenseMatrix) -> DenseMatrix {
        self.try_add(rhs).expect("shape mismatch in +")
    }
}

impl Sub for &DenseMatrix {
    type Output = DenseMatrix;
    fn sub(self, rhs: &DenseMatrix) -> DenseMatrix {
        self.try_sub(rhs).expect("shape mismatch in -")
    }
}

impl Mul for &DenseMatrix {
    type Output = DenseMatrix;
    fn mul(self, rhs: &DenseMatrix) -> DenseMatrix {
        self.matmul(rhs).expect("shape mismatch in *")
    }
}

impl Mul<f64> for &DenseMatrix {
    type Output = DenseMatrix;
    fn mul(self, rhs: f64) -> DenseMatrix {
        self.scale(rhs)
    }
}

impl Neg for &DenseMatrix {
    type Output = DenseMatrix;
    fn neg(self) -> DenseMatrix {
        self.scale(-1.0)
    }
}

/// Truncated singular value decomposition `U diag(sigma) V^T`.
#[derive(Clone, Debug, PartialEq)]
pub struct SvdTriple {
    pub u: DenseMatrix,
    pub sigma: Vec<f64>,
    pub v: DenseMatrix,
}

impl SvdTriple {
    pub fn rank(&self) -> usize {
        self.sigma.len()
    }

    /// Keeps the leading `k` triplets.
    pub fn truncate(&self, k: usize) -> SvdTriple {
        let k = k.min(self.rank());
        SvdTriple {
            u: self.u.column_range(0, k),
            sigma: self.sigma[..k].to_vec(),
            v: self.v.column_range(0, k),
        }
    }

    /// Triplets `start..end` (zero-based, end exclusive).
    pub fn block(&self, start: usize, end: usize) -> SvdTriple {
        SvdTriple {
            u: self.u.column_range(start, end),
            sigma: self.sigma[start..end].to_vec(),
            v: self.v.column_range(start, end),
        }
    }

    pub fn to_dense(&self) -> DenseMatrix {
        self.u
            .scale_columns(&self.sigma)
            .matmul_t(&self.v)
            .expect("svd factors are consistent")
    }
}

/// Householder QR with `diag(R) ≥ 0`. No rank check; `Q` is orthonormal even
/// when `M` is rank deficient. Shapes: `Q` is `m × min(m,k)`, `R` is `min(m,k) × k`.
pub(crate) fn householder_qr(m: &DenseMatrix) -> (DenseMatrix, DenseMatrix) {
    let qr = m.0.clone().qr();
    let mut q = qr.q();
    let mut r = qr.r();
    for j in 0..r.nrows().min(r.ncols()) {
        if r[(j, j)] < 0.0 {
            q.column_mut(j).neg_mut();
            r.row_mut(j).neg_mut();
        }
    }
    (DenseMatrix::wrap(q), DenseMatrix::wrap(r))
}

/// Thin QR factorization of a tall matrix (`rows ≥ cols`).
///
/// `R` has a non-negative diagonal, so the factorization is unique for full
/// column rank input. Fails with [`Error::RankDeficient`] when a diagonal
/// entry of `R` is at most `1e-14·‖M‖_F`.
pub fn qr_thin(m: &DenseMatrix) -> Result<(DenseMatrix, DenseMatrix)> {
    if m.rows() < m.cols() {
        return Err(Error::InvalidArgument(format!(
            "qr_thin needs rows >= cols, got {}x{}",
            m.rows(),
            m.cols()
        )));
    }
    let (q, r) = householder_qr(m);
    let threshold = RANK_DEFICIENCY_RTOL * m.frobenius_norm();
    for j in 0..r.cols() {
        let diag = r.get(j, j).abs();
        if diag <= threshold {
            return Err(Error::RankDeficient {
                column: j,
                diag,
                threshold,
            });
        }
    }
    Ok((q, r))
}

/// Flips column pairs so that the largest-magnitude entry of each `U` column
/// is positive.
fn apply_sign_convention(u: &mut DMatrix<f64>, v: &mut DMatrix<f64>) {
    for j in 0..u.ncols() {
        let mut best = 0usize;
        let mut best_abs = -1.0_f64;
        for i in 0..u.nrows() {
            let a = u[(i, j)].abs();
            if a > best_abs {
                best_abs = a;
                best = i;
            }
        }
        if u[(best, j)] < 0.0 {
            u.column_mut(j).neg_mut();
            v.column_mut(j).neg_mut();
        }
    }
}

/// Re-applies the sign convention to a triple whose `U` was changed, e.g. by
/// lifting through an orthonormal basis.
pub(crate) fn with_sign_convention(svd: SvdTriple) -> SvdTriple {
    let mut u = svd.u.into_nalgebra();
    let mut v = svd.v.into_nalgebra();
    apply_sign_convention(&mut u, &mut v);
    SvdTriple {
        u: DenseMatrix::wrap(u),
        sigma: svd.sigma,
        v: DenseMatrix::wrap(v),
    }
}

/// Full thin SVD with singular values sorted non-increasingly.
///
/// Delegates to faer: nalgebra's bidiagonal SVD loses accuracy on rectangular
/// inputs of deficient rank, which is the common case for the gradients and
/// sketches handled here.
fn sorted_svd(m: &DMatrix<f64>) -> Result<(DMatrix<f64>, Vec<f64>, DMatrix<f64>)> {
    let (rows, cols) = m.shape();
    if let Some(idx) = m.iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFinite {
            row: idx % rows,
            col: idx / rows,
        });
    }
    let k = rows.min(cols);
    let f = faer::Mat::<f64>::from_fn(rows, cols, |i, j| m[(i, j)]);
    let svd = f
        .thin_svd()
        .map_err(|e| Error::InvalidArgument(format!("SVD did not converge: {e:?}")))?;
    let (fu, fs, fv) = (svd.U(), svd.S().column_vector(), svd.V());
    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|&a, &b| fs[b].total_cmp(&fs[a]).then(a.cmp(&b)));
    let u = DMatrix::from_fn(rows, k, |i, j| fu[(i, order[j])]);
    let v = DMatrix::from_fn(cols, k, |i, j| fv[(i, order[j])]);
    let s = order.iter().map(|&i| fs[i].max(0.0)).collect();
    Ok((u, s, v))
}

/// Best rank-`k` approximation of `m` in the Frobenius norm.
pub fn svd_trunc(m: &DenseMatrix, k: usize) -> Result<SvdTriple> {
    let limit = m.rows().min(m.cols());
    if k == 0 || k > limit {
        return Err(Error::InvalidArgument(format!(
            "truncation rank {k} must lie in 1..={limit}"
        )));
    }
    let (u, s, v) = sorted_svd(&m.0)?;
    let mut u = u.columns(0, k).into_owned();
    let mut v = v.columns(0, k).into_owned();
    apply_sign_convention(&mut u, &mut v);
    Ok(SvdTriple {
        u: DenseMatrix::wrap(u),
        sigma: s[..k].to_vec(),
        v: DenseMatrix::wrap(v),
    })
}

/// Rank-`r` truncated SVD of `P Q^T` from the factors alone, in
/// `O((m+n)k² + k³)`.
///
/// Zero factors give zero singular values with an arbitrary orthonormal `U`, `V`.
pub fn skeleton_svd(p: &DenseMatrix, q: &DenseMatrix, r: usize) -> Result<SvdTriple> {
    skeleton_svd_impl(p, q, r, false)
}

/// Like [`skeleton_svd`] but reports [`Error::RankDeficient`] when the
/// product is exactly zero.
pub fn skeleton_svd_strict(p: &DenseMatrix, q: &DenseMatrix, r: usize) -> Result<SvdTriple> {
    skeleton_svd_impl(p, q, r, true)
}

fn skeleton_svd_impl(p: &DenseMatrix, q: &DenseMatrix, r: usize, strict: bool) -> Result<SvdTriple> {
    check_shape("skeleton_svd", (q.rows(), p.cols()), q.shape())?;
    let k = p.cols();
    let limit = p.rows().min(q.rows()).min(k);
    if r == 0 || r > limit {
        return Err(Error::InvalidArgument(format!(
            "skeleton rank {r} must lie in 1..={limit}"
        )));
    }
    let (qp, rp) = householder_qr(p);
    let (qq, rq) = householder_qr(q);
    let core = &rp.0 * rq.0.transpose();
    if strict && core.iter().all(|v| *v == 0.0) {
        return Err(Error::RankDeficient {
            column: 0,
            diag: 0.0,
            threshold: 0.0,
        });
    }
    let (cu, s, cv) = sorted_svd(&core)?;
    let mut u = &qp.0 * cu.columns(0, r);
    let mut v = &qq.0 * cv.columns(0, r);
    apply_sign_convention(&mut u, &mut v);
    Ok(SvdTriple {
        u: DenseMatrix::wrap(u),
        sigma: s[..r].to_vec(),
        v: DenseMatrix::wrap(v),
    })
}

/// Allocation probe for tests: counts [`DenseMatrix`] constructions of one
/// watched shape on the current thread.
pub mod probe {
    use std::cell::Cell;

    thread_local! {
        static WATCH: Cell<Option<(usize, usize)>> = const { Cell::new(None) };
        static HITS: Cell<usize> = const { Cell::new(0) };
    }

    pub(crate) fn note(rows: usize, cols: usize) {
        WATCH.with(|w| {
            if w.get() == Some((rows, cols)) {
                HITS.with(|h| h.set(h.get() + 1));
            }
        });
    }

    /// Runs `f` while counting constructions of `rows × cols` matrices.
    pub fn count_allocations<T>(rows: usize, cols: usize, f: impl FnOnce() -> T) -> (T, usize) {
        let prev = WATCH.with(|w| w.replace(Some((rows, cols))));
        let before = HITS.with(|h| h.get());
        let out = f();
        let hits = HITS.with(|h| h.get()) - before;
        WATCH.with(|w| w.set(prev));
        (out, hits)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn rng(seed: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(seed)
    }

    #[test]
    fn construction_rejects_bad_input() {
        assert!(matches!(
            DenseMatrix::from_row_major(2, 2, vec![1.0; 3]),
            Err(Error::EntryCount { .. })
        ));
        assert_eq!(
            DenseMatrix::from_row_major(2, 2, vec![1.0, 2.0, f64::NAN, 0.0]).unwrap_err(),
            Error::NonFinite { row: 1, col: 0 }
        );
    }

    #[test]
    fn qr_identity_slice() {
        let m = DenseMatrix::identity(3, 2);
        let (q, r) = qr_thin(&m).unwrap();
        assert_eq!(q, m);
        assert_eq!(r, DenseMatrix::identity(2, 2));
    }

    #[test]
    fn qr_single_column() {
        let m = DenseMatrix::from_row_major(2, 1, vec![3.0, 4.0]).unwrap();
        let (q, r) = qr_thin(&m).unwrap();
        assert!((q.get(0, 0) - 0.6).abs() < 1e-15);
        assert!((q.get(1, 0) - 0.8).abs() < 1e-15);
        assert!((r.get(0, 0) - 5.0).abs() < 1e-14);
    }

    #[test]
    fn qr_random_reconstructs() {
        let mut g = rng(1);
        for _ in 0..100 {
            let m = DenseMatrix::random_normal(5, 3, &mut g);
            let (q, r) = qr_thin(&m).unwrap();
            assert!(q.orthonormality_defect() < 1e-12);
            assert!((&(&q * &r) - &m).frobenius_norm() <= 1e-12 * m.frobenius_norm());
            for i in 0..3 {
                for j in 0..i {
                    assert_eq!(r.get(i, j), 0.0);
                }
            }
        }
    }

    #[test]
    fn qr_flags_rank_deficiency() {
        let m = DenseMatrix::from_row_major(3, 2, vec![1.0, 2.0, 2.0, 4.0, 3.0, 6.0]).unwrap();
        assert!(matches!(qr_thin(&m), Err(Error::RankDeficient { column: 1, .. })));
        assert!(matches!(
            qr_thin(&DenseMatrix::zeros(4, 2)),
            Err(Error::RankDeficient { column: 0, .. })
        ));
    }

    #[test]
    fn svd_of_diagonal() {
        let m = DenseMatrix::from_diagonal(4, 4, &[4.0, 3.0, 2.0, 1.0]);
        let s = svd_trunc(&m, 2).unwrap();
        assert_eq!(s.sigma.len(), 2);
        assert!((s.sigma[0] - 4.0).abs() < 1e-14 && (s.sigma[1] - 3.0).abs() < 1e-14);
        let e12 = DenseMatrix::identity(4, 2);
        assert!((&s.u - &e12).max_abs() < 1e-14);
        assert!((&s.v - &e12).max_abs() < 1e-14);
    }

    #[test]
    fn svd_of_rank_one() {
        let mut g = rng(2);
        let u = DenseMatrix::random_orthonormal(5, 1, &mut g);
        let v = DenseMatrix::random_orthonormal(3, 1, &mut g);
        let s = svd_trunc(&u.matmul_t(&v).unwrap(), 1).unwrap();
        assert!((s.sigma[0] - 1.0).abs() < 1e-14);
    }

    #[test]
    fn svd_sign_convention_and_determinism() {
        let mut g = rng(3);
        let m = DenseMatrix::random_normal(7, 5, &mut g);
        let a = svd_trunc(&m, 4).unwrap();
        let b = svd_trunc(&m, 4).unwrap();
        assert_eq!(a, b);
        for j in 0..4 {
            let col: Vec<f64> = (0..7).map(|i| a.u.get(i, j)).collect();
            let top = col.iter().cloned().fold(0.0_f64, |m, v| if v.abs() > m.abs() { v } else { m });
            assert!(top > 0.0);
        }
        assert!(a.sigma.windows(2).all(|w| w[0] >= w[1]));
    }

    #[test]
    fn skeleton_diagonal_and_zero() {
        let p = DenseMatrix::identity(3, 2);
        let q = DenseMatrix::from_diagonal(3, 2, &[4.0, 3.0]);
        let s = skeleton_svd(&p, &q, 2).unwrap();
        assert!((s.sigma[0] - 4.0).abs() < 1e-14 && (s.sigma[1] - 3.0).abs() < 1e-14);

        let z = skeleton_svd(&p, &DenseMatrix::zeros(3, 2), 2).unwrap();
        assert_eq!(z.sigma, vec![0.0, 0.0]);
        assert!(z.u.orthonormality_defect() < 1e-12);
        assert!(z.v.orthonormality_defect() < 1e-12);
        assert!(skeleton_svd_strict(&p, &DenseMatrix::zeros(3, 2), 2).is_err());
    }

    #[test]
    fn probe_counts_watched_shape() {
        let (_, hits) = probe::count_allocations(3, 4, || {
            let a = DenseMatrix::zeros(3, 4);
            let _b = DenseMatrix::zeros(4, 3);
            a.scale(2.0)
        });
        assert_eq!(hits, 2);
    }
}
