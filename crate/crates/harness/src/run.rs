//! Single experiment runs and the metrics CSV.

use std::io::Write;
use std::path::Path;
use std::time::Instant;

use riemannlora::init::{baseline_init, InitKind, RsvdConfig};
use riemannlora::optimizers::{
    euclid_lora_adam_step, euclid_lora_sgd_step, grad_norm_at, lr_schedule, riemann_step_with_eta, AdamHyper,
    AdamMoments, EmaConvention, FactorVelocity, LoraFactors, OptimizerState, RiemannHyper,
};
use riemannlora::oracle::{EffectiveWeights, GradientOracle};

use crate::config::{Ema, ExperimentConfig, InitChoice, OptimizerKind, Schedule};
use crate::error::{HarnessError, Result};
use crate::task::{gen_task, sub_seed, Stream, Task};

pub const CSV_HEADER: &str = "step,loss,riem_grad_norm,wall_nanos";

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StepRecord {
    pub step: usize,
    pub loss: f64,
    pub riem_grad_norm: f64,
    pub wall_nanos: u64,
}

enum Method {
    Riemann {
        weights: EffectiveWeights,
        state: OptimizerState,
        hyper: RiemannHyper,
    },
    EuclidSgd {
        base: riemannlora::linalg::DenseMatrix,
        factors: LoraFactors,
        velocity: FactorVelocity,
    },
    EuclidAdam {
        base: riemannlora::linalg::DenseMatrix,
        factors: LoraFactors,
        moments: AdamMoments,
        hyper: AdamHyper,
    },
}

/// A prepared run: task generated, adapter initialized, no steps taken.
pub struct Session {
    cfg: ExperimentConfig,
    task: Task,
    method: Method,
    step: usize,
    started: Instant,
}

pub fn init_kind(cfg: &ExperimentConfig) -> InitKind {
    match cfg.init {
        InitChoice::OrthoA => InitKind::OrthoA,
        InitChoice::ZeroBEps => InitKind::ZeroBEps,
        InitChoice::Loi => InitKind::Loi {
            alpha: cfg.alpha,
            rsvd: RsvdConfig::new(cfg.rsvd_oversampling(), cfg.rsvd_q, sub_seed(cfg.seed, Stream::Init)),
        },
    }
}

pub fn riemann_hyper(cfg: &ExperimentConfig) -> RiemannHyper {
    RiemannHyper {
        eta: cfg.eta,
        beta: if cfg.optimizer == OptimizerKind::RiemannSgd { 0.0 } else { cfg.beta },
        gamma: cfg.gamma,
        simulate_adam: cfg.optimizer == OptimizerKind::RiemannAdamSim,
        max_iters: cfg.max_iters,
        eps_denominator: 1e-8,
        ema: match cfg.ema_convention {
            Ema::GammaOnNew => EmaConvention::GammaOnNew,
            Ema::GammaOnOld => EmaConvention::GammaOnOld,
        },
    }
}

impl Session {
    pub fn new(cfg: &ExperimentConfig) -> Result<Self> {
        let started = Instant::now();
        cfg.validate()?;
        let task = gen_task(cfg)?;
        let init = baseline_init(
            init_kind(cfg),
            &task.base,
            cfg.r,
            sub_seed(cfg.seed, Stream::Init),
            &task.oracle,
        )?;
        let method = match cfg.optimizer {
            OptimizerKind::RiemannSgd | OptimizerKind::RiemannHb | OptimizerKind::RiemannAdamSim => {
                let point = init.to_point()?;
                Method::Riemann {
                    weights: EffectiveWeights::new(init.w_prime, point)?,
                    state: OptimizerState::default(),
                    hyper: riemann_hyper(cfg),
                }
            }
            OptimizerKind::EuclidSgd => Method::EuclidSgd {
                factors: LoraFactors::new(init.a, init.b)?,
                base: init.w_prime,
                velocity: FactorVelocity::default(),
            },
            OptimizerKind::EuclidAdam => Method::EuclidAdam {
                factors: LoraFactors::new(init.a, init.b)?,
                base: init.w_prime,
                moments: AdamMoments::default(),
                hyper: AdamHyper {
                    eta: cfg.eta,
                    beta1: cfg.beta,
                    beta2: cfg.beta2,
                    eps: 1e-8,
                },
            },
        };
        Ok(Self {
            cfg: cfg.clone(),
            task,
            method,
            step: 0,
            started,
        })
    }

    pub fn task(&self) -> &Task {
        &self.task
    }

    pub fn step_index(&self) -> usize {
        self.step
    }

    pub fn elapsed_nanos(&self) -> u64 {
        self.started.elapsed().as_nanos().min(u64::MAX as u128) as u64
    }

    pub fn loss(&self) -> Result<f64> {
        let o = &self.task.oracle;
        Ok(match &self.method {
            Method::Riemann { weights, .. } => o.loss(weights.view())?,
            Method::EuclidSgd { base, factors, .. } | Method::EuclidAdam { base, factors, .. } => {
                o.loss(factors.view(base))?
            }
        })
    }

    /// Gradient norm at the current iterate: the Riemannian gradient for
    /// manifold methods, `(‖G B‖² + ‖G^T A‖²)^½` for factor methods.
    pub fn grad_norm(&self) -> Result<f64> {
        let o = &self.task.oracle;
        Ok(match &self.method {
            Method::Riemann { weights, .. } => grad_norm_at(weights, o)?,
            Method::EuclidSgd { base, factors, .. } | Method::EuclidAdam { base, factors, .. } => {
                let (ga, gb) = factors.gradients(base, o)?;
                (ga.frobenius_norm_sq() + gb.frobenius_norm_sq()).sqrt()
            }
        })
    }

    fn eta(&self) -> f64 {
        match self.cfg.lr_schedule {
            Schedule::Constant => self.cfg.eta,
            Schedule::Linear => lr_schedule(self.cfg.eta, self.step, self.cfg.max_iters, self.cfg.warmup_ratio),
        }
    }

    /// Takes one optimizer step and returns the gradient norm at the iterate
    /// the step started from.
    pub fn advance(&mut self) -> Result<f64> {
        let eta = self.eta();
        let norm = match &mut self.method {
            Method::Riemann { weights, state, hyper } => {
                riemann_step_with_eta(weights, state, &self.task.oracle, hyper, eta)?.grad.norm()
            }
            Method::EuclidSgd { base, factors, velocity } => {
                let (ga, gb) = factors.gradients(base, &self.task.oracle)?;
                euclid_lora_sgd_step(factors, velocity, base, &self.task.oracle, eta, self.cfg.beta)?;
                (ga.frobenius_norm_sq() + gb.frobenius_norm_sq()).sqrt()
            }
            Method::EuclidAdam { base, factors, moments, hyper } => {
                let (ga, gb) = factors.gradients(base, &self.task.oracle)?;
                let h = AdamHyper { eta, ..*hyper };
                euclid_lora_adam_step(factors, moments, base, &self.task.oracle, &h)?;
                (ga.frobenius_norm_sq() + gb.frobenius_norm_sq()).sqrt()
            }
        };
        self.task.oracle.next_batch();
        self.step += 1;
        Ok(norm)
    }

    /// Dense adapted matrix `W′ + ΔW`. Test and reporting use only.
    pub fn effective_dense(&self) -> Result<riemannlora::linalg::DenseMatrix> {
        Ok(match &self.method {
            Method::Riemann { weights, .. } => weights.view().to_dense()?,
            Method::EuclidSgd { base, factors, .. } | Method::EuclidAdam { base, factors, .. } => {
                factors.view(base).to_dense()?
            }
        })
    }
}

/// Records of a run, possibly cut short by `error`.
#[derive(Debug)]
pub struct RunOutcome {
    pub records: Vec<StepRecord>,
    pub error: Option<HarnessError>,
}

impl RunOutcome {
    pub fn final_record(&self) -> Option<&StepRecord> {
        self.records.last()
    }

    pub fn into_result(self) -> Result<Vec<StepRecord>> {
        match self.error {
            Some(e) => Err(e),
            None => Ok(self.records),
        }
    }
}

/// Runs init plus `max_iters` steps. Config and setup errors are returned
/// directly; failures during the loop keep the rows recorded so far.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<RunOutcome> {
    let mut session = Session::new(cfg)?;
    let mut records = Vec::with_capacity(cfg.max_iters + 1);
    let mut loss = session.loss()?;
    for step in 0..cfg.max_iters {
        let norm = match session.advance() {
            Ok(norm) => norm,
            Err(e) => {
                records.push(StepRecord {
                    step,
                    loss,
                    riem_grad_norm: f64::NAN,
                    wall_nanos: session.elapsed_nanos(),
                });
                return Ok(RunOutcome {
                    records,
                    error: Some(e),
                });
            }
        };
        records.push(StepRecord {
            step,
            loss,
            riem_grad_norm: norm,
            wall_nanos: session.elapsed_nanos(),
        });
        loss = match session.loss() {
            Ok(l) => l,
            Err(e) => {
                return Ok(RunOutcome {
                    records,
                    error: Some(e),
                })
            }
        };
    }
    let outcome = session.grad_norm();
    let (norm, error) = match outcome {
        Ok(n) => (n, None),
        Err(e) => (f64::NAN, Some(e)),
    };
    records.push(StepRecord {
        step: cfg.max_iters,
        loss,
        riem_grad_norm: norm,
        wall_nanos: session.elapsed_nanos(),
    });
    Ok(RunOutcome { records, error })
}

/// Writes the metrics CSV; a failed run ends with a `# error:` comment line.
pub fn write_csv<W: Write>(mut out: W, records: &[StepRecord], error: Option<&HarnessError>) -> std::io::Result<()> {
    writeln!(out, "{CSV_HEADER}")?;
    for r in records {
        writeln!(out, "{},{:?},{:?},{}", r.step, r.loss, r.riem_grad_norm, r.wall_nanos)?;
    }
    if let Some(e) = error {
        writeln!(out, "# error: {}", e.to_string().replace('\n', " "))?;
    }
    Ok(())
}

pub fn write_csv_file(path: &Path, records: &[StepRecord], error: Option<&HarnessError>) -> Result<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent).map_err(|e| HarnessError::io(parent, e))?;
    }
    let file = std::fs::File::create(path).map_err(|e| HarnessError::io(path, e))?;
    let mut out = std::io::BufWriter::new(file);
    write_csv(&mut out, records, error).map_err(|e| HarnessError::io(path, e))?;
    out.flush().map_err(|e| HarnessError::io(path, e))
}
