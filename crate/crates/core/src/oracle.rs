//! Matrix-free access to the Euclidean loss gradient.
//!
//! An oracle never hands out `∇_Y L(Y)` in production paths. It answers the
//! two products `∇_Y L(Y)·M` and `∇_Y L(Y)^T·N` for thin `M`, `N`, which is
//! what differentiating `L(W + Z_1 B_R^T + A_L Z_2^T)` at `(0, B)` gives in a
//! single forward/backward pass. [`GradientOracle::dense_grad`] exists for
//! tests only.
//!
//! Three concrete losses are provided: a quadratic distance to a target, a
//! least-squares regression, and a small classifier whose first layer is the
//! adapted matrix.

use std::cell::Cell;
use std::sync::Arc;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{check_shape, Error, Result};
use crate::linalg::DenseMatrix;
use crate::manifold::{remove_left_component, FixedRankPoint, FramedPoint, TangentVector};

/// Evaluation target `Y = base + L R^T`, with the low-rank part optional.
#[derive(Clone, Copy, Debug)]
pub struct WeightsView<'a> {
    pub base: &'a DenseMatrix,
    pub factors: Option<(&'a DenseMatrix, &'a DenseMatrix)>,
}

impl<'a> WeightsView<'a> {
    pub fn dense(base: &'a DenseMatrix) -> Self {
        Self {
            base,
            factors: None,
        }
    }

    pub fn factored(base: &'a DenseMatrix, left: &'a DenseMatrix, right: &'a DenseMatrix) -> Self {
        Self {
            base,
            factors: Some((left, right)),
        }
    }

    pub fn shape(&self) -> (usize, usize) {
        self.base.shape()
    }

    fn check(&self) -> Result<()> {
        if let Some((l, r)) = self.factors {
            check_shape("WeightsView::left", (self.base.rows(), l.cols()), l.shape())?;
            check_shape("WeightsView::right", (self.base.cols(), l.cols()), r.shape())?;
        }
        Ok(())
    }

    /// `Y M`.
    pub fn mul_right(&self, m: &DenseMatrix) -> Result<DenseMatrix> {
        self.check()?;
        let mut out = self.base.matmul(m)?;
        if let Some((l, r)) = self.factors {
            out = &out + &l.matmul(&r.t_matmul(m)?)?;
        }
        Ok(out)
    }

    /// `Y^T N`.
    pub fn tr_mul(&self, n: &DenseMatrix) -> Result<DenseMatrix> {
        self.check()?;
        let mut out = self.base.t_matmul(n)?;
        if let Some((l, r)) = self.factors {
            out = &out + &r.matmul(&l.t_matmul(n)?)?;
        }
        Ok(out)
    }

    /// `X Y` for a row batch `X`.
    pub fn left_apply(&self, x: &DenseMatrix) -> Result<DenseMatrix> {
        self.check()?;
        let mut out = x.matmul(self.base)?;
        if let Some((l, r)) = self.factors {
            out = &out + &x.matmul(l)?.matmul_t(r)?;
        }
        Ok(out)
    }

    /// Entry `Y_ij` without forming `Y`.
    pub fn entry(&self, i: usize, j: usize) -> f64 {
        let mut v = self.base.get(i, j);
        if let Some((l, r)) = self.factors {
            for k in 0..l.cols() {
                v += l.get(i, k) * r.get(j, k);
            }
        }
        v
    }

    /// `Y` as a dense matrix (oracle/test path).
    pub fn to_dense(&self) -> Result<DenseMatrix> {
        self.check()?;
        match self.factors {
            None => Ok(self.base.clone()),
            Some((l, r)) => self.base.try_add(&l.matmul_t(r)?),
        }
    }
}

/// Frozen base plus adapter: evaluation target `Y = W′ + A_L B^T`.
#[derive(Clone, Debug, PartialEq)]
pub struct EffectiveWeights {
    pub base: DenseMatrix,
    pub point: FixedRankPoint,
}

impl EffectiveWeights {
    pub fn new(base: DenseMatrix, point: FixedRankPoint) -> Result<Self> {
        check_shape("EffectiveWeights", base.shape(), point.dims())?;
        Ok(Self { base, point })
    }

    pub fn view(&self) -> WeightsView<'_> {
        WeightsView::factored(&self.base, self.point.a_l(), self.point.b())
    }
}

/// Loss with matrix-free gradient products.
pub trait GradientOracle {
    /// `(m, n)` of the adapted matrix.
    fn shape(&self) -> (usize, usize);

    fn loss(&self, y: WeightsView<'_>) -> Result<f64>;

    /// `∇_Y L(Y) · M` for `M` of shape `n × k`.
    fn gvp_right(&self, y: WeightsView<'_>, m: &DenseMatrix) -> Result<DenseMatrix>;

    /// `∇_Y L(Y)^T · N` for `N` of shape `m × k`.
    fn gvp_left(&self, y: WeightsView<'_>, n: &DenseMatrix) -> Result<DenseMatrix>;

    /// Full gradient. Test oracle only.
    fn dense_grad(&self, y: WeightsView<'_>) -> Result<DenseMatrix>;

    /// Advances a stochastic batch cursor. No-op for full-batch losses.
    fn next_batch(&mut self) {}
}

impl<T: GradientOracle + ?Sized> GradientOracle for &mut T {
    fn shape(&self) -> (usize, usize) {
        (**self).shape()
    }
    fn loss(&self, y: WeightsView<'_>) -> Result<f64> {
        (**self).loss(y)
    }
    fn gvp_right(&self, y: WeightsView<'_>, m: &DenseMatrix) -> Result<DenseMatrix> {
        (**self).gvp_right(y, m)
    }
    fn gvp_left(&self, y: WeightsView<'_>, n: &DenseMatrix) -> Result<DenseMatrix> {
        (**self).gvp_left(y, n)
    }
    fn dense_grad(&self, y: WeightsView<'_>) -> Result<DenseMatrix> {
        (**self).dense_grad(y)
    }
    fn next_batch(&mut self) {
        (**self).next_batch()
    }
}

impl<T: GradientOracle + ?Sized> GradientOracle for Box<T> {
    fn shape(&self) -> (usize, usize) {
        (**self).shape()
    }
    fn loss(&self, y: WeightsView<'_>) -> Result<f64> {
        (**self).loss(y)
    }
    fn gvp_right(&self, y: WeightsView<'_>, m: &DenseMatrix) -> Result<DenseMatrix> {
        (**self).gvp_right(y, m)
    }
    fn gvp_left(&self, y: WeightsView<'_>, n: &DenseMatrix) -> Result<DenseMatrix> {
        (**self).gvp_left(y, n)
    }
    fn dense_grad(&self, y: WeightsView<'_>) -> Result<DenseMatrix> {
        (**self).dense_grad(y)
    }
    fn next_batch(&mut self) {
        (**self).next_batch()
    }
}

fn check_view(op: &'static str, oracle_shape: (usize, usize), y: &WeightsView<'_>) -> Result<()> {
    check_shape(op, oracle_shape, y.shape())
}

fn finite(loss: f64) -> Result<f64> {
    if loss.is_finite() {
        Ok(loss)
    } else {
        Err(Error::InvalidArgument("loss evaluated to a non-finite value".into()))
    }
}

/// `L(Y) = ½‖Y − T‖_F²`.
#[derive(Clone, Debug)]
pub struct QuadraticOracle {
    target: DenseMatrix,
}

pub fn make_quadratic_oracle(target: DenseMatrix) -> Result<QuadraticOracle> {
    if !target.is_finite() {
        return Err(Error::InvalidArgument("target must be finite".into()));
    }
    Ok(QuadraticOracle { target })
}

impl QuadraticOracle {
    pub fn target(&self) -> &DenseMatrix {
        &self.target
    }
}

impl GradientOracle for QuadraticOracle {
    fn shape(&self) -> (usize, usize) {
        self.target.shape()
    }

    fn loss(&self, y: WeightsView<'_>) -> Result<f64> {
        check_view("quadratic loss", self.shape(), &y)?;
        y.check()?;
        let (m, n) = self.shape();
        let mut acc = 0.0;
        for j in 0..n {
            for i in 0..m {
                let d = y.entry(i, j) - self.target.get(i, j);
                acc += d * d;
            }
        }
        finite(0.5 * acc)
    }

    fn gvp_right(&self, y: WeightsView<'_>, m: &DenseMatrix) -> Result<DenseMatrix> {
        check_view("quadratic gvp_right", self.shape(), &y)?;
        y.mul_right(m)?.try_sub(&self.target.matmul(m)?)
    }

    fn gvp_left(&self, y: WeightsView<'_>, n: &DenseMatrix) -> Result<DenseMatrix> {
        check_view("quadratic gvp_left", self.shape(), &y)?;
        y.tr_mul(n)?.try_sub(&self.target.t_matmul(n)?)
    }

    fn dense_grad(&self, y: WeightsView<'_>) -> Result<DenseMatrix> {
        check_view("quadratic dense_grad", self.shape(), &y)?;
        y.to_dense()?.try_sub(&self.target)
    }
}

/// Seeded epoch-wise shuffling of sample indices into fixed-size batches.
///
/// Epoch `e` uses the permutation drawn from `ChaCha8(seed)` on stream `e`;
/// batches are consecutive slices of that permutation, and the last batch of
/// an epoch may be shorter.
#[derive(Clone, Debug)]
pub struct BatchCursor {
    samples: usize,
    batch_size: usize,
    seed: u64,
    epoch: u64,
    offset: usize,
    order: Vec<usize>,
}

impl BatchCursor {
    pub fn new(samples: usize, batch_size: usize, seed: u64) -> Result<Self> {
        if samples == 0 || batch_size == 0 {
            return Err(Error::InvalidArgument("empty batch".into()));
        }
        let mut cursor = Self {
            samples,
            batch_size: batch_size.min(samples),
            seed,
            epoch: 0,
            offset: 0,
            order: Vec::new(),
        };
        cursor.shuffle();
        Ok(cursor)
    }

    fn shuffle(&mut self) {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(self.epoch);
        self.order = (0..self.samples).collect();
        self.order.shuffle(&mut rng);
    }

    pub fn current(&self) -> &[usize] {
        let end = (self.offset + self.batch_size).min(self.samples);
        &self.order[self.offset..end]
    }

    pub fn advance(&mut self) {
        self.offset += self.batch_size;
        if self.offset >= self.samples {
            self.epoch += 1;
            self.offset = 0;
            self.shuffle();
        }
    }

    pub fn epoch(&self) -> u64 {
        self.epoch
    }
}

/// `L(Y) = ‖D Y − O‖_F² / (2b)` over the current batch of `b` rows.
#[derive(Clone, Debug)]
pub struct LinRegOracle {
    inputs: DenseMatrix,
    targets: DenseMatrix,
    cursor: Option<BatchCursor>,
}

pub fn make_linreg_oracle(inputs: DenseMatrix, targets: DenseMatrix) -> Result<LinRegOracle> {
    if inputs.rows() == 0 {
        return Err(Error::InvalidArgument("empty batch".into()));
    }
    check_shape("make_linreg_oracle", (inputs.rows(), targets.cols()), targets.shape())?;
    Ok(LinRegOracle {
        inputs,
        targets,
        cursor: None,
    })
}

impl LinRegOracle {
    pub fn inputs(&self) -> &DenseMatrix {
        &self.inputs
    }

    pub fn targets(&self) -> &DenseMatrix {
        &self.targets
    }

    /// Switches to mini-batches of `batch_size` rows.
    pub fn with_batches(mut self, batch_size: usize, seed: u64) -> Result<Self> {
        self.cursor = Some(BatchCursor::new(self.inputs.rows(), batch_size, seed)?);
        Ok(self)
    }

    fn batch(&self) -> (std::borrow::Cow<'_, DenseMatrix>, std::borrow::Cow<'_, DenseMatrix>) {
        use std::borrow::Cow;
        match &self.cursor {
            None => (Cow::Borrowed(&self.inputs), Cow::Borrowed(&self.targets)),
            Some(c) => (
                Cow::Owned(self.inputs.select_rows(c.current())),
                Cow::Owned(self.targets.select_rows(c.current())),
            ),
        }
    }

    fn residual(&self, y: &WeightsView<'_>, d: &DenseMatrix, o: &DenseMatrix) -> Result<DenseMatrix> {
        y.left_apply(d)?.try_sub(o)
    }
}

impl GradientOracle for LinRegOracle {
    fn shape(&self) -> (usize, usize) {
        (self.inputs.cols(), self.targets.cols())
    }

    fn loss(&self, y: WeightsView<'_>) -> Result<f64> {
        check_view("linreg loss", self.shape(), &y)?;
        let (d, o) = self.batch();
        let res = self.residual(&y, &d, &o)?;
        finite(res.frobenius_norm_sq() / (2.0 * d.rows() as f64))
    }

    fn gvp_right(&self, y: WeightsView<'_>, m: &DenseMatrix) -> Result<DenseMatrix> {
        check_view("linreg gvp_right", self.shape(), &y)?;
        let (d, o) = self.batch();
        // D^T (D Y M − O M) / b
        let inner = d.matmul(&y.mul_right(m)?)?.try_sub(&o.matmul(m)?)?;
        Ok(d.t_matmul(&inner)?.scale(1.0 / d.rows() as f64))
    }

    fn gvp_left(&self, y: WeightsView<'_>, n: &DenseMatrix) -> Result<DenseMatrix> {
        check_view("linreg gvp_left", self.shape(), &y)?;
        let (d, o) = self.batch();
        let dn = d.matmul(n)?;
        let res = self.residual(&y, &d, &o)?;
        Ok(res.t_matmul(&dn)?.scale(1.0 / d.rows() as f64))
    }

    fn dense_grad(&self, y: WeightsView<'_>) -> Result<DenseMatrix> {
        check_view("linreg dense_grad", self.shape(), &y)?;
        let (d, o) = self.batch();
        let res = self.residual(&y, &d, &o)?;
        Ok(d.t_matmul(&res)?.scale(1.0 / d.rows() as f64))
    }

    fn next_batch(&mut self) {
        if let Some(c) = &mut self.cursor {
            c.advance();
        }
    }
}

/// Architecture of the toy classifier around the adapted `m × n` matrix.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct MlpArch {
    pub hidden: usize,
    pub classes: usize,
}

/// Labeled batch: `inputs` is `b × m`, one label per row.
#[derive(Clone, Debug)]
pub struct LabeledBatch {
    pub inputs: DenseMatrix,
    pub labels: Vec<usize>,
}

/// Classifier `x ↦ softmax(tanh(tanh(x Y) H) C)` with cross-entropy loss,
/// where only `Y` (`m × n`) is trained; `H` (`n × h`) and `C` (`h × c`) are
/// frozen. Since `Y` enters linearly, `∇_Y L = X^T Δ` with `Δ` the `b × n`
/// upstream delta, so both gradient products stay thin.
#[derive(Clone, Debug)]
pub struct MlpOracle {
    data: LabeledBatch,
    hidden_weights: DenseMatrix,
    head: DenseMatrix,
    n: usize,
}

/// Builds the classifier oracle with frozen layers drawn from `seed`
/// (`N(0, 1/fan_in)` entries).
pub fn make_mlp_oracle(n: usize, arch: MlpArch, data: LabeledBatch, seed: u64) -> Result<MlpOracle> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let hidden_weights =
        DenseMatrix::random_normal(n, arch.hidden, &mut rng).scale(1.0 / (n as f64).sqrt());
    let head = DenseMatrix::random_normal(arch.hidden, arch.classes, &mut rng)
        .scale(1.0 / (arch.hidden as f64).sqrt());
    MlpOracle::with_layers(data, hidden_weights, head)
}

impl MlpOracle {
    /// Uses explicit frozen layers `H` (`n × h`) and `C` (`h × c`).
    pub fn with_layers(data: LabeledBatch, hidden_weights: DenseMatrix, head: DenseMatrix) -> Result<Self> {
        if data.inputs.rows() == 0 {
            return Err(Error::InvalidArgument("empty batch".into()));
        }
        if data.labels.len() != data.inputs.rows() {
            return Err(Error::InvalidArgument(format!(
                "{} labels for {} samples",
                data.labels.len(),
                data.inputs.rows()
            )));
        }
        check_shape("mlp head", (hidden_weights.cols(), head.cols()), head.shape())?;
        if let Some(bad) = data.labels.iter().find(|&&l| l >= head.cols()) {
            return Err(Error::InvalidArgument(format!(
                "label {bad} out of range for {} classes",
                head.cols()
            )));
        }
        let n = hidden_weights.rows();
        Ok(Self {
            data,
            hidden_weights,
            head,
            n,
        })
    }

    pub fn data(&self) -> &LabeledBatch {
        &self.data
    }

    pub fn hidden_weights(&self) -> &DenseMatrix {
        &self.hidden_weights
    }

    pub fn head(&self) -> &DenseMatrix {
        &self.head
    }

    /// Predicted class per sample.
    pub fn predict(&self, y: WeightsView<'_>) -> Result<Vec<usize>> {
        let fwd = self.forward(&y)?;
        Ok((0..fwd.logits.rows())
            .map(|i| {
                (0..fwd.logits.cols())
                    .max_by(|&a, &b| fwd.logits.get(i, a).total_cmp(&fwd.logits.get(i, b)))
                    .unwrap_or(0)
            })
            .collect())
    }

    fn forward(&self, y: &WeightsView<'_>) -> Result<Forward> {
        check_view("mlp forward", self.shape(), y)?;
        let a1 = y.left_apply(&self.data.inputs)?.map(f64::tanh);
        let a2 = a1.matmul(&self.hidden_weights)?.map(f64::tanh);
        let logits = a2.matmul(&self.head)?;
        Ok(Forward { a1, a2, logits })
    }

    fn cross_entropy(&self, logits: &DenseMatrix) -> f64 {
        let b = logits.rows();
        let mut total = 0.0;
        for i in 0..b {
            let row: Vec<f64> = (0..logits.cols()).map(|j| logits.get(i, j)).collect();
            let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let lse = max + row.iter().map(|v| (v - max).exp()).sum::<f64>().ln();
            total += lse - row[self.data.labels[i]];
        }
        total / b as f64
    }

    /// Upstream delta `∂L/∂(X Y)`, shape `b × n`.
    fn delta(&self, y: &WeightsView<'_>) -> Result<DenseMatrix> {
        let fwd = self.forward(y)?;
        let b = fwd.logits.rows();
        let c = fwd.logits.cols();
        let mut dlogits = DenseMatrix::zeros(b, c);
        for i in 0..b {
            let max = (0..c).map(|j| fwd.logits.get(i, j)).fold(f64::NEG_INFINITY, f64::max);
            let denom: f64 = (0..c).map(|j| (fwd.logits.get(i, j) - max).exp()).sum();
            for j in 0..c {
                let p = (fwd.logits.get(i, j) - max).exp() / denom;
                let onehot = if j == self.data.labels[i] { 1.0 } else { 0.0 };
                dlogits.set(i, j, (p - onehot) / b as f64);
            }
        }
        let da2 = dlogits.matmul_t(&self.head)?;
        let dz2 = da2.hadamard(&fwd.a2.map(|v| 1.0 - v * v))?;
        let da1 = dz2.matmul_t(&self.hidden_weights)?;
        da1.hadamard(&fwd.a1.map(|v| 1.0 - v * v))
    }
}

struct Forward {
    a1: DenseMatrix,
    a2: DenseMatrix,
    logits: DenseMatrix,
}

impl GradientOracle for MlpOracle {
    fn shape(&self) -> (usize, usize) {
        (self.data.inputs.cols(), self.n)
    }

    fn loss(&self, y: WeightsView<'_>) -> Result<f64> {
        let fwd = self.forward(&y)?;
        finite(self.cross_entropy(&fwd.logits))
    }

    fn gvp_right(&self, y: WeightsView<'_>, m: &DenseMatrix) -> Result<DenseMatrix> {
        let delta = self.delta(&y)?;
        self.data.inputs.t_matmul(&delta.matmul(m)?)
    }

    fn gvp_left(&self, y: WeightsView<'_>, n: &DenseMatrix) -> Result<DenseMatrix> {
        let delta = self.delta(&y)?;
        delta.t_matmul(&self.data.inputs.matmul(n)?)
    }

    fn dense_grad(&self, y: WeightsView<'_>) -> Result<DenseMatrix> {
        let delta = self.delta(&y)?;
        self.data.inputs.t_matmul(&delta)
    }
}

/// Wraps an oracle and counts its gradient-product calls.
#[derive(Debug)]
pub struct CountingOracle<O> {
    inner: O,
    right_calls: Cell<usize>,
    left_calls: Cell<usize>,
}

impl<O> CountingOracle<O> {
    pub fn new(inner: O) -> Self {
        Self {
            inner,
            right_calls: Cell::new(0),
            left_calls: Cell::new(0),
        }
    }

    pub fn right_calls(&self) -> usize {
        self.right_calls.get()
    }

    pub fn left_calls(&self) -> usize {
        self.left_calls.get()
    }

    pub fn total_calls(&self) -> usize {
        self.right_calls() + self.left_calls()
    }

    pub fn reset(&self) {
        self.right_calls.set(0);
        self.left_calls.set(0);
    }

    pub fn inner(&self) -> &O {
        &self.inner
    }
}

impl<O: GradientOracle> GradientOracle for CountingOracle<O> {
    fn shape(&self) -> (usize, usize) {
        self.inner.shape()
    }
    fn loss(&self, y: WeightsView<'_>) -> Result<f64> {
        self.inner.loss(y)
    }
    fn gvp_right(&self, y: WeightsView<'_>, m: &DenseMatrix) -> Result<DenseMatrix> {
        self.right_calls.set(self.right_calls.get() + 1);
        self.inner.gvp_right(y, m)
    }
    fn gvp_left(&self, y: WeightsView<'_>, n: &DenseMatrix) -> Result<DenseMatrix> {
        self.left_calls.set(self.left_calls.get() + 1);
        self.inner.gvp_left(y, n)
    }
    fn dense_grad(&self, y: WeightsView<'_>) -> Result<DenseMatrix> {
        self.inner.dense_grad(y)
    }
    fn next_batch(&mut self) {
        self.inner.next_batch()
    }
}

/// Riemannian gradient `P_T ∇_Y L(Y)` at the adapter point, from exactly one
/// `gvp_right(B_R)` and one `gvp_left(A_L)` call.
pub fn riemannian_grad<O: GradientOracle + ?Sized>(
    oracle: &O,
    base: &DenseMatrix,
    at: &FramedPoint,
) -> Result<TangentVector> {
    let y = WeightsView::factored(base, at.point.a_l(), at.point.b());
    let g_br = oracle.gvp_right(y, at.b_r())?;
    let gt_al = oracle.gvp_left(y, at.point.a_l())?;
    let adot = remove_left_component(at.point.a_l(), &g_br);
    Ok(TangentVector::from_parts(Arc::clone(&at.frame), adot, gt_al))
}

/// Random labeled batch with labels from a random linear teacher.
pub fn random_labeled_batch<R: Rng + ?Sized>(
    samples: usize,
    features: usize,
    classes: usize,
    rng: &mut R,
) -> LabeledBatch {
    let inputs = DenseMatrix::random_normal(samples, features, rng);
    let labels = (0..samples).map(|_| rng.random_range(0..classes)).collect();
    LabeledBatch { inputs, labels }
}
