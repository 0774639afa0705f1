//! Riemannian heavy-ball descent on the fixed-rank manifold, with optional
//! norm-based Adam-like scaling, plus Euclidean LoRA baselines and the linear
//! warmup schedule.
//!
//! One [`riemann_step`] does:
//!
//! 1. `B_R := qr(B).Q`
//! 2. `Ȧ := ∇L·B_R`, `Ḃ := ∇L^T·A_L` (one product each)
//! 3. transport the stored momentum skeleton to the current tangent space
//! 4. `d := β·momentum + (1−β)·((I − A_L A_L^T)Ȧ, Ḃ)`
//! 5. optionally rescale `Ȧ`, `Ḃ` by smoothed Frobenius norms `S_A`, `S_B`
//! 6. retract along `−η·d`
//! 7. store `d` as `[Ȧ, A_L] [B_R, Ḃ]^T` and repackage `A_L := U`, `B := VΣ`

use crate::error::{check_shape, Error, Result};
use crate::linalg::{skeleton_svd, DenseMatrix};
use crate::manifold::{transport_to, FixedRankPoint, SkeletonPair, TangentVector};
use crate::oracle::{riemannian_grad, EffectiveWeights, GradientOracle, WeightsView};

/// Which coefficient multiplies the new norm in the `S_A`, `S_B` update.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum EmaConvention {
    /// `S ← γ‖Ȧ‖ + (1 − γ) S`.
    #[default]
    GammaOnNew,
    /// `S ← (1 − γ)‖Ȧ‖ + γ S`.
    GammaOnOld,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RiemannHyper {
    pub eta: f64,
    pub beta: f64,
    pub gamma: f64,
    pub simulate_adam: bool,
    pub max_iters: usize,
    pub eps_denominator: f64,
    pub ema: EmaConvention,
}

impl Default for RiemannHyper {
    fn default() -> Self {
        Self {
            eta: 0.1,
            beta: 0.0,
            gamma: 0.9,
            simulate_adam: false,
            max_iters: 100,
            eps_denominator: 1e-8,
            ema: EmaConvention::GammaOnNew,
        }
    }
}

impl RiemannHyper {
    pub fn validate(&self) -> Result<()> {
        if !(self.eta > 0.0 && self.eta.is_finite()) {
            return Err(Error::InvalidArgument(format!("eta must be > 0, got {}", self.eta)));
        }
        if !(0.0..1.0).contains(&self.beta) {
            return Err(Error::InvalidArgument(format!("beta must lie in [0, 1), got {}", self.beta)));
        }
        if !(self.gamma > 0.0 && self.gamma < 1.0) {
            return Err(Error::InvalidArgument(format!("gamma must lie in (0, 1), got {}", self.gamma)));
        }
        if !(self.eps_denominator >= 0.0) {
            return Err(Error::InvalidArgument("eps_denominator must be >= 0".into()));
        }
        Ok(())
    }
}

/// Momentum skeleton and smoothed norms carried between steps.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct OptimizerState {
    pub momentum: Option<SkeletonPair>,
    pub s_a: f64,
    pub s_b: f64,
    pub step_index: usize,
}

/// What a step computed, for logging and tests.
#[derive(Clone, Debug)]
pub struct StepReport {
    /// Riemannian gradient at the point the step started from.
    pub grad: TangentVector,
    /// Direction `d` (after optional scaling); the step moved along `−η d`.
    pub direction: TangentVector,
}

/// One Riemannian heavy-ball step. On error `weights` and `state` are left
/// untouched.
pub fn riemann_step<O: GradientOracle + ?Sized>(
    weights: &mut EffectiveWeights,
    state: &mut OptimizerState,
    oracle: &O,
    hyper: &RiemannHyper,
) -> Result<StepReport> {
    riemann_step_with_eta(weights, state, oracle, hyper, hyper.eta)
}

/// [`riemann_step`] with an explicit step size, e.g. from [`lr_schedule`].
pub fn riemann_step_with_eta<O: GradientOracle + ?Sized>(
    weights: &mut EffectiveWeights,
    state: &mut OptimizerState,
    oracle: &O,
    hyper: &RiemannHyper,
    eta: f64,
) -> Result<StepReport> {
    let at = weights.point.framed()?;
    let grad = riemannian_grad(oracle, &weights.base, &at)?;

    let mut direction = match &state.momentum {
        Some(skel) => {
            let prev = transport_to(skel, &at)?;
            prev.lincomb(hyper.beta, &grad, 1.0 - hyper.beta)?
        }
        None => grad.scale(1.0 - hyper.beta),
    };

    let (mut s_a, mut s_b) = (state.s_a, state.s_b);
    if hyper.simulate_adam {
        let na = direction.adot().frobenius_norm();
        let nb = direction.bdot().frobenius_norm();
        let (w_new, w_old) = match hyper.ema {
            EmaConvention::GammaOnNew => (hyper.gamma, 1.0 - hyper.gamma),
            EmaConvention::GammaOnOld => (1.0 - hyper.gamma, hyper.gamma),
        };
        s_a = w_new * na + w_old * s_a;
        s_b = w_new * nb + w_old * s_b;
        direction = TangentVector::from_parts(
            std::sync::Arc::clone(direction.frame()),
            direction.adot().scale(1.0 / (s_a + hyper.eps_denominator)),
            direction.bdot().scale(1.0 / (s_b + hyper.eps_denominator)),
        );
    }

    let new_point = at.retract(&direction, eta)?;

    state.momentum = Some(direction.to_skeleton());
    state.s_a = s_a;
    state.s_b = s_b;
    state.step_index += 1;
    weights.point = new_point;
    Ok(StepReport { grad, direction })
}

/// Runs `hyper.max_iters` steps and returns the per-step reports.
pub fn riemann_run<O: GradientOracle + ?Sized>(
    weights: &mut EffectiveWeights,
    state: &mut OptimizerState,
    oracle: &mut O,
    hyper: &RiemannHyper,
) -> Result<Vec<StepReport>> {
    hyper.validate()?;
    let mut out = Vec::with_capacity(hyper.max_iters);
    for _ in 0..hyper.max_iters {
        out.push(riemann_step(weights, state, &*oracle, hyper)?);
        oracle.next_batch();
    }
    Ok(out)
}

/// Low-rank factors `A` (`m × r`) and `B` (`n × r`) of a Euclidean adapter
/// `A B^T`.
#[derive(Clone, Debug, PartialEq)]
pub struct LoraFactors {
    pub a: DenseMatrix,
    pub b: DenseMatrix,
}

impl LoraFactors {
    pub fn new(a: DenseMatrix, b: DenseMatrix) -> Result<Self> {
        check_shape("LoraFactors", (b.rows(), a.cols()), b.shape())?;
        Ok(Self { a, b })
    }

    pub fn view<'a>(&'a self, base: &'a DenseMatrix) -> WeightsView<'a> {
        WeightsView::factored(base, &self.a, &self.b)
    }

    /// `(∂L/∂A, ∂L/∂B) = (∇L·B, ∇L^T·A)`.
    pub fn gradients<O: GradientOracle + ?Sized>(
        &self,
        base: &DenseMatrix,
        oracle: &O,
    ) -> Result<(DenseMatrix, DenseMatrix)> {
        check_shape("LoraFactors", base.shape(), (self.a.rows(), self.b.rows()))?;
        let y = self.view(base);
        Ok((oracle.gvp_right(y, &self.b)?, oracle.gvp_left(y, &self.a)?))
    }

    /// The adapter as a manifold point, when `B` has full column rank.
    pub fn to_point(&self) -> Result<FixedRankPoint> {
        crate::manifold::canonicalize(&self.a, &self.b).map(|f| f.point)
    }
}

/// Heavy-ball velocity for the Euclidean baseline.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct FactorVelocity {
    pub va: Option<DenseMatrix>,
    pub vb: Option<DenseMatrix>,
}

/// Classical heavy-ball SGD on the factors: `v ← βv + g`, `θ ← θ − ηv`.
pub fn euclid_lora_sgd_step<O: GradientOracle + ?Sized>(
    factors: &mut LoraFactors,
    velocity: &mut FactorVelocity,
    base: &DenseMatrix,
    oracle: &O,
    eta: f64,
    beta: f64,
) -> Result<()> {
    let (ga, gb) = factors.gradients(base, oracle)?;
    let va = match &velocity.va {
        Some(v) => v.lincomb(beta, &ga, 1.0)?,
        None => ga,
    };
    let vb = match &velocity.vb {
        Some(v) => v.lincomb(beta, &gb, 1.0)?,
        None => gb,
    };
    factors.a = factors.a.lincomb(1.0, &va, -eta)?;
    factors.b = factors.b.lincomb(1.0, &vb, -eta)?;
    velocity.va = Some(va);
    velocity.vb = Some(vb);
    Ok(())
}

/// First and second moments of Adam for both factors.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct AdamMoments {
    pub m_a: Option<DenseMatrix>,
    pub v_a: Option<DenseMatrix>,
    pub m_b: Option<DenseMatrix>,
    pub v_b: Option<DenseMatrix>,
    pub t: u32,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AdamHyper {
    pub eta: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamHyper {
    fn default() -> Self {
        Self {
            eta: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

fn adam_update(
    param: &DenseMatrix,
    grad: &DenseMatrix,
    m: &mut Option<DenseMatrix>,
    v: &mut Option<DenseMatrix>,
    t: u32,
    h: &AdamHyper,
) -> Result<DenseMatrix> {
    let zeros = || DenseMatrix::zeros(grad.rows(), grad.cols());
    let m_new = m.take().unwrap_or_else(zeros).lincomb(h.beta1, grad, 1.0 - h.beta1)?;
    let g2 = grad.hadamard(grad)?;
    let v_new = v.take().unwrap_or_else(zeros).lincomb(h.beta2, &g2, 1.0 - h.beta2)?;
    let bc1 = 1.0 - h.beta1.powi(t as i32);
    let bc2 = 1.0 - h.beta2.powi(t as i32);
    let step = DenseMatrix::from_fn(grad.rows(), grad.cols(), |i, j| {
        let mh = m_new.get(i, j) / bc1;
        let vh = v_new.get(i, j) / bc2;
        h.eta * mh / (vh.sqrt() + h.eps)
    });
    *m = Some(m_new);
    *v = Some(v_new);
    param.try_sub(&step)
}

/// Elementwise Adam with bias correction on both factors.
pub fn euclid_lora_adam_step<O: GradientOracle + ?Sized>(
    factors: &mut LoraFactors,
    moments: &mut AdamMoments,
    base: &DenseMatrix,
    oracle: &O,
    hyper: &AdamHyper,
) -> Result<()> {
    let (ga, gb) = factors.gradients(base, oracle)?;
    let t = moments.t + 1;
    let a = adam_update(&factors.a, &ga, &mut moments.m_a, &mut moments.v_a, t, hyper)?;
    let b = adam_update(&factors.b, &gb, &mut moments.m_b, &mut moments.v_b, t, hyper)?;
    factors.a = a;
    factors.b = b;
    moments.t = t;
    Ok(())
}

/// Linear warmup from 0 over `warmup_ratio·total_steps`, then linear decay to
/// 0 at `total_steps`.
pub fn lr_schedule(base_eta: f64, step: usize, total_steps: usize, warmup_ratio: f64) -> f64 {
    if total_steps == 0 || step >= total_steps {
        return 0.0;
    }
    let total = total_steps as f64;
    let warmup = (warmup_ratio.clamp(0.0, 1.0) * total).round();
    let s = step as f64;
    if s < warmup {
        base_eta * s / warmup
    } else {
        base_eta * (total - s) / (total - warmup)
    }
}

/// Riemannian gradient norm at a point, computed from one product pair.
/// Used for logging outside the optimizer loop.
pub fn grad_norm_at<O: GradientOracle + ?Sized>(weights: &EffectiveWeights, oracle: &O) -> Result<f64> {
    let at = weights.point.framed()?;
    Ok(riemannian_grad(oracle, &weights.base, &at)?.norm())
}

/// Smallest relative singular value `σ_r / σ_1` of the adapter, computed on
/// its factors. Near [`crate::manifold::COLLAPSE_RTOL`] the iterate is about to leave the
/// manifold.
pub fn conditioning(point: &FixedRankPoint) -> Result<f64> {
    let svd = skeleton_svd(point.a_l(), point.b(), point.rank())?;
    let top = svd.sigma[0];
    Ok(if top > 0.0 {
        svd.sigma[point.rank() - 1] / top
    } else {
        0.0
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn schedule_endpoints() {
        assert_eq!(lr_schedule(0.1, 0, 100, 0.1), 0.0);
        assert!((lr_schedule(0.1, 10, 100, 0.1) - 0.1).abs() < 1e-15);
        assert!((lr_schedule(0.1, 5, 100, 0.1) - 0.05).abs() < 1e-15);
        assert_eq!(lr_schedule(0.1, 100, 100, 0.1), 0.0);
        assert!((lr_schedule(0.1, 55, 100, 0.1) - 0.05).abs() < 1e-15);
        assert_eq!(lr_schedule(0.1, 0, 100, 0.0), 0.1);
    }

    #[test]
    fn hyper_validation() {
        assert!(RiemannHyper::default().validate().is_ok());
        assert!(RiemannHyper { eta: 0.0, ..Default::default() }.validate().is_err());
        assert!(RiemannHyper { beta: 1.0, ..Default::default() }.validate().is_err());
        assert!(RiemannHyper { gamma: 0.0, ..Default::default() }.validate().is_err());
    }
}
