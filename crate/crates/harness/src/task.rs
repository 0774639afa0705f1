//! Seeded synthetic tasks.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use riemannlora::fixture::write_matrix;
use riemannlora::linalg::DenseMatrix;
use riemannlora::oracle::{
    make_linreg_oracle, make_mlp_oracle, make_quadratic_oracle, GradientOracle, LabeledBatch, LinRegOracle,
    MlpArch, MlpOracle, QuadraticOracle, WeightsView,
};

use crate::config::{ExperimentConfig, TaskKind};
use crate::error::Result;

/// Independent sub-seeds derived from the run seed.
#[derive(Clone, Copy, Debug)]
pub enum Stream {
    Task = 1,
    Init = 2,
    Batches = 3,
    Layers = 4,
}

/// SplitMix64 finalizer over `(seed, stream)`.
pub fn sub_seed(seed: u64, stream: Stream) -> u64 {
    let mut z = seed ^ (stream as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[derive(Clone, Debug)]
pub enum TaskOracle {
    Quadratic(QuadraticOracle),
    Linreg(LinRegOracle),
    Mlp(MlpOracle),
}

impl TaskOracle {
    fn inner(&self) -> &dyn GradientOracle {
        match self {
            TaskOracle::Quadratic(o) => o,
            TaskOracle::Linreg(o) => o,
            TaskOracle::Mlp(o) => o,
        }
    }
}

impl GradientOracle for TaskOracle {
    fn shape(&self) -> (usize, usize) {
        self.inner().shape()
    }
    fn loss(&self, y: WeightsView<'_>) -> riemannlora::Result<f64> {
        self.inner().loss(y)
    }
    fn gvp_right(&self, y: WeightsView<'_>, m: &DenseMatrix) -> riemannlora::Result<DenseMatrix> {
        self.inner().gvp_right(y, m)
    }
    fn gvp_left(&self, y: WeightsView<'_>, n: &DenseMatrix) -> riemannlora::Result<DenseMatrix> {
        self.inner().gvp_left(y, n)
    }
    fn dense_grad(&self, y: WeightsView<'_>) -> riemannlora::Result<DenseMatrix> {
        self.inner().dense_grad(y)
    }
    fn next_batch(&mut self) {
        match self {
            TaskOracle::Quadratic(o) => o.next_batch(),
            TaskOracle::Linreg(o) => o.next_batch(),
            TaskOracle::Mlp(o) => o.next_batch(),
        }
    }
}

/// Frozen weights, loss, and the planted low-rank update `L`; the ideal
/// adapted matrix is `base + planted`.
#[derive(Clone, Debug)]
pub struct Task {
    pub kind: TaskKind,
    pub base: DenseMatrix,
    pub planted: DenseMatrix,
    pub oracle: TaskOracle,
}

impl Task {
    /// Serialized task: kind line followed by matrix fixtures.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = format!("task {}\n", self.kind).into_bytes();
        let mut put = |m: &DenseMatrix| write_matrix(&mut out, m).expect("writing to a Vec cannot fail");
        put(&self.base);
        put(&self.planted);
        match &self.oracle {
            TaskOracle::Quadratic(o) => put(o.target()),
            TaskOracle::Linreg(o) => {
                put(o.inputs());
                put(o.targets());
            }
            TaskOracle::Mlp(o) => {
                put(&o.data().inputs);
                put(o.hidden_weights());
                put(o.head());
                let labels: Vec<String> = o.data().labels.iter().map(usize::to_string).collect();
                out.extend_from_slice(format!("labels {}\n", labels.join(" ")).as_bytes());
            }
        }
        out
    }
}

/// Rank-`k` matrix `P Q^T` with Gaussian factors, entries of order `scale`.
fn planted_update(m: usize, n: usize, k: usize, scale: f64, rng: &mut ChaCha8Rng) -> Result<DenseMatrix> {
    let p = DenseMatrix::random_normal(m, k, rng);
    let q = DenseMatrix::random_normal(n, k, rng);
    Ok(p.matmul_t(&q)?.scale(scale / (k as f64).sqrt()))
}

pub fn gen_task(cfg: &ExperimentConfig) -> Result<Task> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(sub_seed(cfg.seed, Stream::Task));
    let (m, n, k) = (cfg.m, cfg.n, cfg.true_rank);
    match cfg.task {
        TaskKind::LowrankRecovery => {
            let base = DenseMatrix::random_normal(m, n, &mut rng).scale(1.0 / (n as f64).sqrt());
            let planted = planted_update(m, n, k, 1.0 / (n as f64).sqrt(), &mut rng)?;
            let oracle = make_quadratic_oracle(base.try_add(&planted)?)?;
            Ok(Task {
                kind: cfg.task,
                base,
                planted,
                oracle: TaskOracle::Quadratic(oracle),
            })
        }
        TaskKind::Linreg => {
            let base = DenseMatrix::random_normal(m, n, &mut rng).scale(1.0 / (m as f64).sqrt());
            let planted = planted_update(m, n, k, 1.0 / (m as f64).sqrt(), &mut rng)?;
            let inputs = DenseMatrix::random_normal(cfg.samples, m, &mut rng);
            let targets = inputs.matmul(&base.try_add(&planted)?)?;
            let mut oracle = make_linreg_oracle(inputs, targets)?;
            if cfg.batch_size > 0 {
                oracle = oracle.with_batches(cfg.batch_size, sub_seed(cfg.seed, Stream::Batches))?;
            }
            Ok(Task {
                kind: cfg.task,
                base,
                planted,
                oracle: TaskOracle::Linreg(oracle),
            })
        }
        TaskKind::ToyMlp => {
            let base = DenseMatrix::random_normal(m, n, &mut rng).scale(1.0 / (m as f64).sqrt());
            let planted = planted_update(m, n, k, 2.0 / (m as f64).sqrt(), &mut rng)?;
            let inputs = DenseMatrix::random_normal(cfg.samples, m, &mut rng);
            let arch = MlpArch {
                hidden: cfg.hidden,
                classes: cfg.classes,
            };
            let layers_seed = sub_seed(cfg.seed, Stream::Layers);
            let unlabeled = LabeledBatch {
                inputs: inputs.clone(),
                labels: vec![0; cfg.samples],
            };
            let teacher = make_mlp_oracle(n, arch, unlabeled, layers_seed)?;
            let ideal = base.try_add(&planted)?;
            let labels = teacher.predict(WeightsView::dense(&ideal))?;
            let oracle = make_mlp_oracle(n, arch, LabeledBatch { inputs, labels }, layers_seed)?;
            Ok(Task {
                kind: cfg.task,
                base,
                planted,
                oracle: TaskOracle::Mlp(oracle),
            })
        }
    }
}
