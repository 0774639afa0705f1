//! Randomized SVD of the loss gradient driven by gradient products, the
//! locally optimal adapter initialization built on it, and the plain
//! initializations used by baselines.
//!
//! # Locally optimal initialization
//!
//! Among all rank-`r` adapters `ΔW`, the one whose tangent space captures the
//! most of the gradient `G = ∇_W L(W)` maximizes `‖P_{T_ΔW} G‖_F²`. With the
//! SVD `G = Σ σ_i u_i v_i^T`, the choice
//!
//! ```text
//! ΔW₀ = α · U[:, 0..r] · V[:, r..2r]^T
//! ```
//!
//! attains the upper bound `σ_1² + … + σ_{2r}²` for every nonzero `α`. The
//! base is shifted to `W′ = W − ΔW₀` so the loss is unchanged at the start.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::linalg::{
    householder_qr, svd_trunc, with_sign_convention, DenseMatrix, SvdTriple, RANK_DEFICIENCY_RTOL,
};
use crate::manifold::FixedRankPoint;
use crate::oracle::{GradientOracle, WeightsView};

/// Relative spectral gap below which the initialization is not unique.
pub const SPECTRAL_GAP_RTOL: f64 = 1e-10;
/// Scale of the Gaussian fill used by [`InitKind::ZeroBEps`].
pub const ZERO_B_EPS: f64 = 1e-4;

/// Sketch parameters: oversampling `p`, power iterations `q`, and the seed of
/// the Gaussian test matrix.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct RsvdConfig {
    pub oversampling: usize,
    pub power_iters: usize,
    pub seed: u64,
}

impl RsvdConfig {
    pub fn new(oversampling: usize, power_iters: usize, seed: u64) -> Self {
        Self {
            oversampling,
            power_iters,
            seed,
        }
    }

    /// Sketch width `k = r + p`, capped at `min(m, n)`.
    pub fn sketch_width(&self, r: usize, shape: (usize, usize)) -> usize {
        (r + self.oversampling).min(shape.0.min(shape.1))
    }
}

/// Orthonormal basis of `range(Y)`; columns of `Y` that are numerically
/// dependent on earlier ones are replaced by fresh Gaussian directions.
fn orthonormalize_padded<R: Rng + ?Sized>(y: &DenseMatrix, rng: &mut R) -> DenseMatrix {
    let mut y = y.clone();
    let scale = y.frobenius_norm();
    for _ in 0..4 {
        let (q, r) = householder_qr(&y);
        let threshold = RANK_DEFICIENCY_RTOL * scale.max(f64::MIN_POSITIVE);
        let weak: Vec<usize> = (0..r.cols()).filter(|&j| r.get(j, j).abs() <= threshold).collect();
        if weak.is_empty() {
            return q;
        }
        for j in weak {
            for i in 0..y.rows() {
                let v: f64 = rng.sample(rand_distr::StandardNormal);
                y.set(i, j, v * scale.max(1.0));
            }
        }
    }
    householder_qr(&y).0
}

/// Randomized SVD of `∇L(Y)` using only gradient products.
///
/// Runs the range finder with `k = r + p` Gaussian probes and `q`
/// QR-stabilized power rounds, then takes the small SVD of `Q^T ∇L`. Makes
/// exactly `2(q + 1)` gradient-product calls. Returns the leading `r`
/// triplets with the [`crate::linalg`] sign convention.
pub fn backprop_rsvd<O: GradientOracle + ?Sized>(
    oracle: &O,
    y: WeightsView<'_>,
    r: usize,
    cfg: &RsvdConfig,
) -> Result<SvdTriple> {
    Ok(backprop_rsvd_full(oracle, y, r, cfg)?.truncate(r))
}

/// [`backprop_rsvd`] without the final truncation: all `k` triplets.
pub fn backprop_rsvd_full<O: GradientOracle + ?Sized>(
    oracle: &O,
    y: WeightsView<'_>,
    r: usize,
    cfg: &RsvdConfig,
) -> Result<SvdTriple> {
    let (m, n) = oracle.shape();
    if r == 0 || r > m.min(n) {
        return Err(Error::InvalidArgument(format!(
            "rank {r} must lie in 1..={}",
            m.min(n)
        )));
    }
    let k = cfg.sketch_width(r, (m, n));
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);

    let omega = DenseMatrix::random_normal(n, k, &mut rng);
    let mut basis = orthonormalize_padded(&oracle.gvp_right(y, &omega)?, &mut rng);
    for _ in 0..cfg.power_iters {
        let back = orthonormalize_padded(&oracle.gvp_left(y, &basis)?, &mut rng);
        basis = orthonormalize_padded(&oracle.gvp_right(y, &back)?, &mut rng);
    }
    // (Q^T G)^T = G^T Q, shape n × k.
    let projected = oracle.gvp_left(y, &basis)?.transpose();
    let small = svd_trunc(&projected, k)?;
    let u = basis.matmul(&small.u)?;
    Ok(with_sign_convention(SvdTriple {
        u,
        sigma: small.sigma,
        v: small.v,
    }))
}

/// Split `W = W′ + ΔW₀` with the adapter point.
#[derive(Clone, Debug, PartialEq)]
pub struct LoiResult {
    pub w_prime: DenseMatrix,
    pub point: FixedRankPoint,
    pub alpha: f64,
}

/// Locally optimal split of `w` from the randomized top-`2r` gradient SVD.
pub fn loi_split<O: GradientOracle + ?Sized>(
    w: &DenseMatrix,
    oracle: &O,
    r: usize,
    alpha: f64,
    cfg: &RsvdConfig,
) -> Result<LoiResult> {
    let (m, n) = oracle.shape();
    if 2 * r > m.min(n) {
        return Err(Error::InvalidArgument(format!(
            "locally optimal init needs 2r <= min(m, n), got r = {r} for {m}x{n}"
        )));
    }
    let spectrum = backprop_rsvd_full(oracle, WeightsView::dense(w), 2 * r, cfg)?;
    loi_from_svd(w, &spectrum, r, alpha)
}

/// Builds the split from a gradient SVD holding at least `2r` triplets.
///
/// When a `(2r+1)`-th singular value is available, the gap `σ_2r − σ_2r+1`
/// must exceed `1e-10 σ_1` unless both sit at the numerical zero level (the
/// gradient has rank at most `2r`, every choice of the trailing directions is
/// optimal, and the construction stays valid).
pub fn loi_from_svd(w: &DenseMatrix, spectrum: &SvdTriple, r: usize, alpha: f64) -> Result<LoiResult> {
    if alpha == 0.0 || !alpha.is_finite() {
        return Err(Error::InvalidArgument("alpha must be a nonzero finite scale".into()));
    }
    if spectrum.rank() < 2 * r {
        return Err(Error::InvalidArgument(format!(
            "need {} singular triplets, got {}",
            2 * r,
            spectrum.rank()
        )));
    }
    if spectrum.rank() > 2 * r {
        let sigma_1 = spectrum.sigma[0];
        let upper = spectrum.sigma[2 * r - 1];
        let lower = spectrum.sigma[2 * r];
        let tol = SPECTRAL_GAP_RTOL * sigma_1;
        if upper - lower <= tol && upper > tol {
            return Err(Error::DegenerateSpectrum { upper, lower });
        }
    }
    let a_l = spectrum.u.column_range(0, r);
    let b = spectrum.v.column_range(r, 2 * r).scale(alpha);
    let w_prime = w.try_sub(&a_l.matmul_t(&b)?)?;
    Ok(LoiResult {
        w_prime,
        point: FixedRankPoint::new(a_l, b)?,
        alpha,
    })
}

/// Initialization schemes.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum InitKind {
    /// Random orthonormal `A`, `B = 0`. Not a manifold point; Euclidean only.
    OrthoA,
    /// Random orthonormal `A`, `B ~ N(0, ε²)` with `ε = 1e-4`.
    ZeroBEps,
    /// Locally optimal split.
    Loi { alpha: f64, rsvd: RsvdConfig },
}

/// Adapter factors plus the (possibly shifted) frozen base.
#[derive(Clone, Debug, PartialEq)]
pub struct InitResult {
    pub w_prime: DenseMatrix,
    pub a: DenseMatrix,
    pub b: DenseMatrix,
}

impl InitResult {
    /// The factors as a manifold point; fails for `B = 0`.
    pub fn to_point(&self) -> Result<FixedRankPoint> {
        FixedRankPoint::new(self.a.clone(), self.b.clone())
    }
}

/// Builds the starting adapter of kind `kind` for weights `w`.
pub fn baseline_init<O: GradientOracle + ?Sized>(
    kind: InitKind,
    w: &DenseMatrix,
    r: usize,
    seed: u64,
    oracle: &O,
) -> Result<InitResult> {
    let (m, n) = w.shape();
    if r == 0 || r > m.min(n) {
        return Err(Error::InvalidArgument(format!("rank {r} out of range for {m}x{n}")));
    }
    match kind {
        InitKind::OrthoA | InitKind::ZeroBEps => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let a = DenseMatrix::random_orthonormal(m, r, &mut rng);
            let b = if kind == InitKind::OrthoA {
                DenseMatrix::zeros(n, r)
            } else {
                DenseMatrix::random_normal(n, r, &mut rng).scale(ZERO_B_EPS)
            };
            Ok(InitResult {
                w_prime: w.clone(),
                a,
                b,
            })
        }
        InitKind::Loi { alpha, rsvd } => {
            let rsvd = RsvdConfig { seed, ..rsvd };
            let res = loi_split(w, oracle, r, alpha, &rsvd)?;
            Ok(InitResult {
                w_prime: res.w_prime,
                a: res.point.a_l().clone(),
                b: res.point.b().clone(),
            })
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle::{make_quadratic_oracle, CountingOracle};

    #[test]
    fn zero_gradient_gives_zero_sigma() {
        let mut g = ChaCha8Rng::seed_from_u64(1);
        let w = DenseMatrix::random_normal(6, 5, &mut g);
        let o = make_quadratic_oracle(w.clone()).unwrap();
        let svd = backprop_rsvd(&o, WeightsView::dense(&w), 2, &RsvdConfig::new(2, 1, 3)).unwrap();
        assert!(svd.sigma.iter().all(|s| *s == 0.0));
        assert!(svd.u.orthonormality_defect() < 1e-12);
        assert!(svd.v.orthonormality_defect() < 1e-12);
    }

    #[test]
    fn call_count_is_two_q_plus_two() {
        let mut g = ChaCha8Rng::seed_from_u64(2);
        let w = DenseMatrix::random_normal(9, 7, &mut g);
        let t = DenseMatrix::random_normal(9, 7, &mut g);
        for q in 0..4 {
            let o = CountingOracle::new(make_quadratic_oracle(t.clone()).unwrap());
            backprop_rsvd(&o, WeightsView::dense(&w), 2, &RsvdConfig::new(2, q, 0)).unwrap();
            assert_eq!(o.total_calls(), 2 * (q + 1));
        }
    }

    #[test]
    fn loi_rejects_bad_arguments() {
        let w = DenseMatrix::zeros(4, 4);
        let o = make_quadratic_oracle(DenseMatrix::from_diagonal(4, 4, &[4.0, 3.0, 2.0, 1.0])).unwrap();
        assert!(loi_split(&w, &o, 3, 1.0, &RsvdConfig::new(0, 1, 0)).is_err());
        assert!(loi_split(&w, &o, 1, 0.0, &RsvdConfig::new(1, 1, 0)).is_err());
    }

    #[test]
    fn loi_detects_tied_spectrum() {
        let w = DenseMatrix::zeros(5, 5);
        let o = make_quadratic_oracle(DenseMatrix::from_diagonal(5, 5, &[4.0, 2.0, 2.0, 1.0, 0.5])).unwrap();
        let err = loi_split(&w, &o, 1, 1.0, &RsvdConfig::new(3, 2, 0)).unwrap_err();
        assert!(matches!(err, Error::DegenerateSpectrum { .. }));
    }

    #[test]
    fn ortho_and_eps_inits() {
        let w = DenseMatrix::zeros(6, 5);
        let o = make_quadratic_oracle(w.clone()).unwrap();
        let a = baseline_init(InitKind::OrthoA, &w, 2, 7, &o).unwrap();
        assert!(a.a.orthonormality_defect() < 1e-12);
        assert_eq!(a.b.max_abs(), 0.0);
        assert!(a.to_point().is_err());

        let e = baseline_init(InitKind::ZeroBEps, &w, 2, 7, &o).unwrap();
        assert!(e.b.frobenius_norm() <= 10.0 * ZERO_B_EPS * ((5 * 2) as f64).sqrt());
        assert!(e.to_point().is_ok());
    }
}
