//! Riemannian optimization of low-rank adapters on the manifold of fixed-rank
//! matrices.
//!
//! The adapter `ΔW` in `Y = W′ + ΔW` is treated as a point on the manifold of
//! rank-`r` matrices rather than as a pair of factors, which removes the
//! `(A S, B S^{-T})` ambiguity of factorized parameterizations. The crate
//! provides:
//!
//! - [`linalg`]: the dense matrix type, thin QR, truncated and skeleton SVD
//! - [`manifold`]: points, tangent vectors, projection, retraction, transport
//! - [`oracle`]: losses exposing only gradient-times-thin-matrix products
//! - [`init`]: randomized SVD from gradient products and the locally optimal
//!   initialization
//! - [`optimizers`]: the Riemannian heavy-ball loop and Euclidean baselines
//! - [`fixture`]: the plain-text matrix format
//!
//! ```
//! use rand::SeedableRng;
//! use riemannlora::prelude::*;
//!
//! let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(0);
//! let w = DenseMatrix::random_normal(12, 10, &mut rng);
//! let target = &w + &DenseMatrix::random_normal(12, 10, &mut rng).scale(0.1);
//! let oracle = make_quadratic_oracle(target)?;
//!
//! let init = loi_split(&w, &oracle, 2, 1.0, &RsvdConfig::new(2, 3, 7))?;
//! let mut weights = EffectiveWeights::new(init.w_prime, init.point)?;
//! let mut state = OptimizerState::default();
//! let hyper = RiemannHyper { eta: 0.5, beta: 0.5, ..Default::default() };
//!
//! let before = oracle.loss(weights.view())?;
//! for _ in 0..20 {
//!     riemann_step(&mut weights, &mut state, &oracle, &hyper)?;
//! }
//! assert!(oracle.loss(weights.view())? < before);
//! # Ok::<(), riemannlora::Error>(())
//! ```

pub mod error;
pub mod fixture;
pub mod init;
pub mod linalg;
pub mod manifold;
pub mod optimizers;
pub mod oracle;

pub use error::{Error, Result};

pub mod prelude {
    pub use crate::error::{Error, Result};
    pub use crate::init::{
        backprop_rsvd, baseline_init, loi_from_svd, loi_split, InitKind, InitResult, LoiResult,
        RsvdConfig,
    };
    pub use crate::linalg::{qr_thin, skeleton_svd, svd_trunc, DenseMatrix, SvdTriple};
    pub use crate::manifold::{
        canonicalize, project_to_tangent, retract, tangent_inner, vector_transport, Embed,
        FixedRankPoint, FramedPoint, SkeletonPair, TangentFrame, TangentVector,
    };
    pub use crate::optimizers::{
        euclid_lora_adam_step, euclid_lora_sgd_step, lr_schedule, riemann_step, AdamHyper,
        AdamMoments, EmaConvention, FactorVelocity, LoraFactors, OptimizerState, RiemannHyper,
    };
    pub use crate::oracle::{
        make_linreg_oracle, make_mlp_oracle, make_quadratic_oracle, riemannian_grad,
        EffectiveWeights, GradientOracle, LabeledBatch, MlpArch, WeightsView,
    };
}

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../README.md")]
    mod readme {}
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/manifold.md")]
    mod manifold {}
    #[doc = include_str!("../../../book/src/gradients.md")]
    mod gradients {}
    #[doc = include_str!("../../../book/src/initialization.md")]
    mod initialization {}
    #[doc = include_str!("../../../book/src/optimizer.md")]
    mod optimizer {}
}
