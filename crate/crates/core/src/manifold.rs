//! The manifold of `m × n` matrices of fixed rank `r`.
//!
//! A point `X` is stored as `A_L B^T` with orthonormal `A_L`. Tangent vectors
//! at `X` are pairs `(Ȧ, Ḃ)` with `A_L^T Ȧ = 0`, embedded as
//! `Ȧ B_R^T + A_L Ḃ^T`, where `B_R` is an orthonormal basis of `range(B)`.
//! Both frames are bundled in a [`TangentFrame`] that every tangent vector
//! carries, so mixing vectors from different base points is an error instead
//! of a silent reprojection.
//!
//! Nothing here forms an `m × n` matrix except the explicit
//! [`Embed::to_dense`] conversions used by tests and oracles.

use std::sync::Arc;

use rand::Rng;

use crate::error::{check_shape, Error, Result};
use crate::linalg::{qr_thin, skeleton_svd, svd_trunc, DenseMatrix};

/// Tolerance on `‖A_L^T A_L − I‖_F / √r` for a valid point.
pub const ORTHONORMALITY_TOL: f64 = 1e-10;
/// A point is genuinely rank `r` when `σ_min(B) > 1e-12 σ_max(B)`.
pub const RANK_RTOL: f64 = 1e-12;
/// Retraction fails when `σ_r ≤ 1e-12 σ_1` of the retracted matrix.
pub const COLLAPSE_RTOL: f64 = 1e-12;

/// A rank-`r` matrix `A_L B^T` with orthonormal `A_L`.
#[derive(Clone, Debug, PartialEq)]
pub struct FixedRankPoint {
    a_l: DenseMatrix,
    b: DenseMatrix,
}

impl FixedRankPoint {
    /// Validates orthonormality of `a_l` and full column rank of `b`.
    pub fn new(a_l: DenseMatrix, b: DenseMatrix) -> Result<Self> {
        check_shape("FixedRankPoint", (b.rows(), a_l.cols()), b.shape())?;
        let r = a_l.cols();
        if r == 0 || r > a_l.rows() || r > b.rows() {
            return Err(Error::InvalidArgument(format!(
                "rank {r} incompatible with {}x{}",
                a_l.rows(),
                b.rows()
            )));
        }
        let defect = a_l.orthonormality_defect();
        if defect > ORTHONORMALITY_TOL * (r as f64).sqrt() {
            return Err(Error::NotOnManifold(format!(
                "A_L is not orthonormal (defect {defect:e})"
            )));
        }
        let sv = svd_trunc(&b, r)?.sigma;
        let (hi, lo) = (sv[0], sv[r - 1]);
        if !(lo > RANK_RTOL * hi) {
            return Err(Error::NotOnManifold(format!(
                "B is rank deficient (sigma_min {lo:e}, sigma_max {hi:e})"
            )));
        }
        Ok(Self { a_l, b })
    }

    pub(crate) fn from_parts(a_l: DenseMatrix, b: DenseMatrix) -> Self {
        Self { a_l, b }
    }

    pub fn a_l(&self) -> &DenseMatrix {
        &self.a_l
    }

    pub fn b(&self) -> &DenseMatrix {
        &self.b
    }

    pub fn rank(&self) -> usize {
        self.a_l.cols()
    }

    /// `(m, n)` of the embedding space.
    pub fn dims(&self) -> (usize, usize) {
        (self.a_l.rows(), self.b.rows())
    }

    /// Attaches the orthonormal right frame `B_R := qr(B).Q`.
    pub fn framed(&self) -> Result<FramedPoint> {
        let (b_r, _) = qr_thin(&self.b)?;
        Ok(FramedPoint {
            point: self.clone(),
            frame: Arc::new(TangentFrame {
                a_l: self.a_l.clone(),
                b_r,
            }),
        })
    }
}

/// Orthonormal frames `(A_L, B_R)` of one base point.
#[derive(Clone, Debug, PartialEq)]
pub struct TangentFrame {
    pub a_l: DenseMatrix,
    pub b_r: DenseMatrix,
}

impl TangentFrame {
    pub fn rank(&self) -> usize {
        self.a_l.cols()
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.a_l.rows(), self.b_r.rows())
    }
}

fn same_frame(x: &Arc<TangentFrame>, y: &Arc<TangentFrame>) -> bool {
    Arc::ptr_eq(x, y) || **x == **y
}

/// A point together with its tangent frame.
#[derive(Clone, Debug)]
pub struct FramedPoint {
    pub point: FixedRankPoint,
    pub frame: Arc<TangentFrame>,
}

impl FramedPoint {
    pub fn b_r(&self) -> &DenseMatrix {
        &self.frame.b_r
    }

    pub fn project(&self, z: &DenseMatrix) -> Result<TangentVector> {
        project_to_tangent(z, self)
    }

    pub fn retract(&self, xi: &TangentVector, eta: f64) -> Result<FixedRankPoint> {
        retract(self, xi, eta)
    }

    pub fn zero_tangent(&self) -> TangentVector {
        let (m, n) = self.frame.dims();
        let r = self.frame.rank();
        TangentVector {
            frame: Arc::clone(&self.frame),
            adot: DenseMatrix::zeros(m, r),
            bdot: DenseMatrix::zeros(n, r),
        }
    }
}

/// Tangent vector `Ȧ B_R^T + A_L Ḃ^T` at the base point of its frame.
#[derive(Clone, Debug)]
pub struct TangentVector {
    frame: Arc<TangentFrame>,
    adot: DenseMatrix,
    bdot: DenseMatrix,
}

impl TangentVector {
    /// Builds a tangent vector, checking shapes and horizontality
    /// `‖A_L^T Ȧ‖_F ≤ 1e-10 ‖Ȧ‖_F`.
    pub fn new(frame: Arc<TangentFrame>, adot: DenseMatrix, bdot: DenseMatrix) -> Result<Self> {
        check_shape("TangentVector::adot", frame.a_l.shape(), adot.shape())?;
        check_shape("TangentVector::bdot", frame.b_r.shape(), bdot.shape())?;
        let leak = frame.a_l.t_matmul(&adot)?.frobenius_norm();
        if leak > 1e-10 * adot.frobenius_norm() {
            return Err(Error::InvalidArgument(format!(
                "Adot is not horizontal (|A_L^T Adot| = {leak:e})"
            )));
        }
        Ok(Self { frame, adot, bdot })
    }

    /// Projects `adot` onto the horizontal space before building the vector.
    pub fn horizontal(frame: Arc<TangentFrame>, adot: DenseMatrix, bdot: DenseMatrix) -> Result<Self> {
        check_shape("TangentVector::adot", frame.a_l.shape(), adot.shape())?;
        check_shape("TangentVector::bdot", frame.b_r.shape(), bdot.shape())?;
        let adot = remove_left_component(&frame.a_l, &adot);
        Ok(Self { frame, adot, bdot })
    }

    pub(crate) fn from_parts(frame: Arc<TangentFrame>, adot: DenseMatrix, bdot: DenseMatrix) -> Self {
        Self { frame, adot, bdot }
    }

    pub fn frame(&self) -> &Arc<TangentFrame> {
        &self.frame
    }

    pub fn adot(&self) -> &DenseMatrix {
        &self.adot
    }

    pub fn bdot(&self) -> &DenseMatrix {
        &self.bdot
    }

    pub fn scale(&self, alpha: f64) -> TangentVector {
        TangentVector {
            frame: Arc::clone(&self.frame),
            adot: self.adot.scale(alpha),
            bdot: self.bdot.scale(alpha),
        }
    }

    /// `alpha·self + beta·other`, both at the same base.
    pub fn lincomb(&self, alpha: f64, other: &TangentVector, beta: f64) -> Result<TangentVector> {
        if !same_frame(&self.frame, &other.frame) {
            return Err(Error::BaseMismatch);
        }
        Ok(TangentVector {
            frame: Arc::clone(&self.frame),
            adot: self.adot.lincomb(alpha, &other.adot, beta)?,
            bdot: self.bdot.lincomb(alpha, &other.bdot, beta)?,
        })
    }

    pub fn norm(&self) -> f64 {
        tangent_inner(self, self).map(|v| v.max(0.0).sqrt()).unwrap_or(f64::NAN)
    }

    /// `‖A_L^T Ȧ‖_F`, zero for an exactly horizontal vector.
    pub fn horizontality_defect(&self) -> f64 {
        self.frame
            .a_l
            .t_matmul(&self.adot)
            .map(|m| m.frobenius_norm())
            .unwrap_or(f64::NAN)
    }

    /// Width-`2r` skeleton `[Ȧ, A_L] [B_R, Ḃ]^T` of the embedded vector.
    pub fn to_skeleton(&self) -> SkeletonPair {
        SkeletonPair {
            p: self.adot.hcat(&self.frame.a_l).expect("frame shapes"),
            q: self.frame.b_r.hcat(&self.bdot).expect("frame shapes"),
        }
    }
}

/// A matrix `P Q^T` kept in factored form.
#[derive(Clone, Debug, PartialEq)]
pub struct SkeletonPair {
    pub p: DenseMatrix,
    pub q: DenseMatrix,
}

impl SkeletonPair {
    pub fn new(p: DenseMatrix, q: DenseMatrix) -> Result<Self> {
        check_shape("SkeletonPair", (q.rows(), p.cols()), q.shape())?;
        Ok(Self { p, q })
    }

    pub fn width(&self) -> usize {
        self.p.cols()
    }
}

/// Conversion to the embedded `m × n` matrix. Allocates `m × n`; meant for
/// oracles and tests.
pub trait Embed {
    fn to_dense(&self) -> DenseMatrix;
}

impl Embed for FixedRankPoint {
    fn to_dense(&self) -> DenseMatrix {
        self.a_l.matmul_t(&self.b).expect("point shapes")
    }
}

impl Embed for SkeletonPair {
    fn to_dense(&self) -> DenseMatrix {
        self.p.matmul_t(&self.q).expect("skeleton shapes")
    }
}

impl Embed for TangentVector {
    fn to_dense(&self) -> DenseMatrix {
        let a = self.adot.matmul_t(&self.frame.b_r).expect("tangent shapes");
        let b = self.frame.a_l.matmul_t(&self.bdot).expect("tangent shapes");
        &a + &b
    }
}

/// `(I − A A^T) M`, applied twice so the result stays orthogonal to `A` to
/// working precision even after heavy cancellation.
pub(crate) fn remove_left_component(a: &DenseMatrix, m: &DenseMatrix) -> DenseMatrix {
    let once = m - &(a * &a.t_matmul(m).expect("frame shapes"));
    &once - &(a * &a.t_matmul(&once).expect("frame shapes"))
}

/// Orthonormalizes `A` and moves its triangular factor into `B`, so that
/// `A_L B'^T = A B^T`. Any reparameterization `(A S, B S^{-T})` maps to the
/// same dense matrix.
pub fn canonicalize(a: &DenseMatrix, b: &DenseMatrix) -> Result<FramedPoint> {
    check_shape("canonicalize", (b.rows(), a.cols()), b.shape())?;
    let (a_l, r) = qr_thin(a)?;
    let b_new = b.matmul_t(&r)?;
    let (b_r, _) = qr_thin(&b_new)?;
    let point = FixedRankPoint::from_parts(a_l.clone(), b_new);
    Ok(FramedPoint {
        point,
        frame: Arc::new(TangentFrame { a_l, b_r }),
    })
}

/// Orthogonal projection of `z` onto the tangent space at `at`:
/// `Ȧ = (I − A_L A_L^T) Z B_R`, `Ḃ = Z^T A_L`.
pub fn project_to_tangent(z: &DenseMatrix, at: &FramedPoint) -> Result<TangentVector> {
    check_shape("project_to_tangent", at.frame.dims(), z.shape())?;
    let frame = &at.frame;
    let zb = z.matmul(&frame.b_r)?;
    let adot = remove_left_component(&frame.a_l, &zb);
    let bdot = z.t_matmul(&frame.a_l)?;
    Ok(TangentVector::from_parts(Arc::clone(frame), adot, bdot))
}

/// Frobenius inner product of the embedded vectors in `O((m+n)r²)`.
pub fn tangent_inner(x: &TangentVector, y: &TangentVector) -> Result<f64> {
    if !same_frame(&x.frame, &y.frame) {
        return Err(Error::BaseMismatch);
    }
    let a_l = &x.frame.a_l;
    let b_r = &x.frame.b_r;
    let aa = x.adot.frobenius_dot(&y.adot)?;
    let bb = x.bdot.frobenius_dot(&y.bdot)?;
    // <Ȧx B_R^T, A_L Ḃy^T> = <A_L^T Ȧx, Ḃy^T B_R>; zero for horizontal inputs.
    let cross_xy = a_l.t_matmul(&x.adot)?.frobenius_dot(&y.bdot.t_matmul(b_r)?)?;
    let cross_yx = a_l.t_matmul(&y.adot)?.frobenius_dot(&x.bdot.t_matmul(b_r)?)?;
    Ok(aa + bb + cross_xy + cross_yx)
}

/// Projection-type retraction: rank-`r` truncated SVD of `X − η ξ`, computed
/// on the width-`2r` skeleton `[−η Ȧ, A_L] [B_R, B − η Ḃ]^T`.
///
/// The new point is `A_L := U`, `B := V Σ`.
pub fn retract(at: &FramedPoint, xi: &TangentVector, eta: f64) -> Result<FixedRankPoint> {
    let (p, q) = retraction_skeleton(at, xi, eta)?;
    let r = at.point.rank();
    let svd = skeleton_svd(&p, &q, r)?;
    let sigma_1 = svd.sigma[0];
    let sigma_r = svd.sigma[r - 1];
    if !(sigma_r > COLLAPSE_RTOL * sigma_1) {
        return Err(Error::RankCollapse { sigma_r, sigma_1 });
    }
    let b = svd.v.scale_columns(&svd.sigma);
    Ok(FixedRankPoint::from_parts(svd.u, b))
}

/// [`retract`], but on rank collapse adds `1e-10·σ_1` Gaussian noise to `B`
/// and re-canonicalizes instead of failing.
pub fn retract_with_jitter<R: Rng + ?Sized>(
    at: &FramedPoint,
    xi: &TangentVector,
    eta: f64,
    rng: &mut R,
) -> Result<FixedRankPoint> {
    match retract(at, xi, eta) {
        Err(Error::RankCollapse { sigma_1, .. }) => {
            let (p, q) = retraction_skeleton(at, xi, eta)?;
            let r = at.point.rank();
            let svd = skeleton_svd(&p, &q, r)?;
            let scale = if sigma_1 > 0.0 { 1e-10 * sigma_1 } else { 1e-10 };
            let noise = DenseMatrix::random_normal(svd.v.rows(), r, rng).scale(scale);
            let b = &svd.v.scale_columns(&svd.sigma) + &noise;
            Ok(canonicalize(&svd.u, &b)?.point)
        }
        other => other,
    }
}

fn retraction_skeleton(
    at: &FramedPoint,
    xi: &TangentVector,
    eta: f64,
) -> Result<(DenseMatrix, DenseMatrix)> {
    if !same_frame(&at.frame, &xi.frame) {
        return Err(Error::BaseMismatch);
    }
    let p = xi.adot.scale(-eta).hcat(&at.frame.a_l)?;
    let q = at.frame.b_r.hcat(&at.point.b.lincomb(1.0, &xi.bdot, -eta)?)?;
    Ok((p, q))
}

/// Reprojects a skeleton-stored vector onto the tangent space of `to`:
/// `Ȧ = (P − A_L(A_L^T P))(Q^T B_R)`, `Ḃ = Q (P^T A_L)`.
pub fn vector_transport(prev: &SkeletonPair, to: &TangentFrame) -> Result<TangentVector> {
    check_shape("vector_transport::P", (to.a_l.rows(), prev.width()), prev.p.shape())?;
    check_shape("vector_transport::Q", (to.b_r.rows(), prev.width()), prev.q.shape())?;
    let p_perp = remove_left_component(&to.a_l, &prev.p);
    let adot = p_perp.matmul(&prev.q.t_matmul(&to.b_r)?)?;
    let bdot = prev.q.matmul(&prev.p.t_matmul(&to.a_l)?)?;
    Ok(TangentVector::from_parts(Arc::new(to.clone()), adot, bdot))
}

/// [`vector_transport`] into the frame of a framed point, sharing its frame.
pub fn transport_to(prev: &SkeletonPair, to: &FramedPoint) -> Result<TangentVector> {
    let v = vector_transport(prev, &to.frame)?;
    Ok(TangentVector::from_parts(Arc::clone(&to.frame), v.adot, v.bdot))
}

/// Random point with i.i.d. Gaussian factors, canonicalized.
pub fn random_point<R: Rng + ?Sized>(m: usize, n: usize, r: usize, rng: &mut R) -> Result<FramedPoint> {
    let a = DenseMatrix::random_normal(m, r, rng);
    let b = DenseMatrix::random_normal(n, r, rng);
    canonicalize(&a, &b)
}

/// Random horizontal tangent vector at `at` with Gaussian components.
pub fn random_tangent<R: Rng + ?Sized>(at: &FramedPoint, rng: &mut R) -> TangentVector {
    let (m, n) = at.frame.dims();
    let r = at.frame.rank();
    let adot = remove_left_component(&at.frame.a_l, &DenseMatrix::random_normal(m, r, rng));
    let bdot = DenseMatrix::random_normal(n, r, rng);
    TangentVector::from_parts(Arc::clone(&at.frame), adot, bdot)
}

/// Dense projector `Z − (I − A_L A_L^T) Z (I − B_R B_R^T)`; the reference
/// formula for checking [`project_to_tangent`].
pub fn dense_projection(z: &DenseMatrix, frame: &TangentFrame) -> Result<DenseMatrix> {
    check_shape("dense_projection", frame.dims(), z.shape())?;
    let left = remove_left_component(&frame.a_l, z);
    let right = remove_left_component(&frame.b_r, &left.transpose()).transpose();
    z.try_sub(&right)
}
