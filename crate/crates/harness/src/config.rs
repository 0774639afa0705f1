//! `key = value` experiment configuration.
//!
//! One key per line, `#` starts a comment, blank lines are ignored. Every key
//! is optional and falls back to the default below; unknown or repeated keys
//! are errors.
//!
//! | key | values | default |
//! |-----|--------|---------|
//! | `name` | free text | file stem |
//! | `task` | `lowrank_recovery`, `linreg`, `toy_mlp` | `lowrank_recovery` |
//! | `m`, `n` | adapted matrix shape | `32`, `32` |
//! | `r` | adapter rank | `4` |
//! | `true_rank` | rank of the planted update | `4` |
//! | `optimizer` | `riemann_sgd`, `riemann_hb`, `riemann_adam_sim`, `euclid_sgd`, `euclid_adam` | `riemann_hb` |
//! | `init` | `ortho_a`, `zero_b_eps`, `loi` | `loi` |
//! | `eta` | step size | `0.5` |
//! | `beta` | momentum (first moment for `euclid_adam`) | `0.7` |
//! | `beta2` | second moment of `euclid_adam` | `0.999` |
//! | `gamma` | norm smoothing of `riemann_adam_sim` | `0.9` |
//! | `ema_convention` | `gamma_on_new`, `gamma_on_old` | `gamma_on_new` |
//! | `alpha` | scale of the locally optimal init | `1` |
//! | `rsvd_p`, `rsvd_q` | oversampling, power rounds | `r`, `3` |
//! | `max_iters` | optimizer steps | `100` |
//! | `samples` | dataset rows for `linreg`/`toy_mlp` | `128` |
//! | `batch_size` | `linreg` rows per step, `0` for full batch | `0` |
//! | `hidden`, `classes` | `toy_mlp` widths | `16`, `4` |
//! | `lr_schedule` | `constant`, `linear` | `constant` |
//! | `warmup_ratio` | warmup share for `linear` | `0` |
//! | `seed` | 64-bit seed | `0` |
//! | `output_path` | metrics CSV path | stdout |

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::error::{HarnessError, Result};

macro_rules! keyword_enum {
    ($name:ident { $($variant:ident => $text:literal),+ $(,)? }) => {
        #[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
        pub enum $name {
            $($variant),+
        }

        impl $name {
            pub const ALL: &'static [$name] = &[$($name::$variant),+];

            pub fn as_str(self) -> &'static str {
                match self {
                    $($name::$variant => $text),+
                }
            }
        }

        impl FromStr for $name {
            type Err = String;

            fn from_str(s: &str) -> std::result::Result<Self, String> {
                match s {
                    $($text => Ok($name::$variant),)+
                    _ => Err(format!(
                        "expected one of {}, got {s:?}",
                        [$($text),+].join(", ")
                    )),
                }
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(self.as_str())
            }
        }
    };
}

keyword_enum!(TaskKind {
    LowrankRecovery => "lowrank_recovery",
    Linreg => "linreg",
    ToyMlp => "toy_mlp",
});

keyword_enum!(OptimizerKind {
    RiemannSgd => "riemann_sgd",
    RiemannHb => "riemann_hb",
    RiemannAdamSim => "riemann_adam_sim",
    EuclidSgd => "euclid_sgd",
    EuclidAdam => "euclid_adam",
});

keyword_enum!(InitChoice {
    OrthoA => "ortho_a",
    ZeroBEps => "zero_b_eps",
    Loi => "loi",
});

keyword_enum!(Schedule {
    Constant => "constant",
    Linear => "linear",
});

keyword_enum!(Ema {
    GammaOnNew => "gamma_on_new",
    GammaOnOld => "gamma_on_old",
});

impl OptimizerKind {
    pub fn is_riemannian(self) -> bool {
        matches!(
            self,
            OptimizerKind::RiemannSgd | OptimizerKind::RiemannHb | OptimizerKind::RiemannAdamSim
        )
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentConfig {
    pub name: String,
    pub task: TaskKind,
    pub m: usize,
    pub n: usize,
    pub r: usize,
    pub true_rank: usize,
    pub optimizer: OptimizerKind,
    pub init: InitChoice,
    pub eta: f64,
    pub beta: f64,
    pub beta2: f64,
    pub gamma: f64,
    pub ema_convention: Ema,
    pub alpha: f64,
    pub rsvd_p: Option<usize>,
    pub rsvd_q: usize,
    pub max_iters: usize,
    pub samples: usize,
    pub batch_size: usize,
    pub hidden: usize,
    pub classes: usize,
    pub lr_schedule: Schedule,
    pub warmup_ratio: f64,
    pub seed: u64,
    pub output_path: Option<PathBuf>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            name: "experiment".into(),
            task: TaskKind::LowrankRecovery,
            m: 32,
            n: 32,
            r: 4,
            true_rank: 4,
            optimizer: OptimizerKind::RiemannHb,
            init: InitChoice::Loi,
            eta: 0.5,
            beta: 0.7,
            beta2: 0.999,
            gamma: 0.9,
            ema_convention: Ema::GammaOnNew,
            alpha: 1.0,
            rsvd_p: None,
            rsvd_q: 3,
            max_iters: 100,
            samples: 128,
            batch_size: 0,
            hidden: 16,
            classes: 4,
            lr_schedule: Schedule::Constant,
            warmup_ratio: 0.0,
            seed: 0,
            output_path: None,
        }
    }
}

const KEYS: &[&str] = &[
    "name",
    "task",
    "m",
    "n",
    "r",
    "true_rank",
    "optimizer",
    "init",
    "eta",
    "beta",
    "beta2",
    "gamma",
    "ema_convention",
    "alpha",
    "rsvd_p",
    "rsvd_q",
    "max_iters",
    "samples",
    "batch_size",
    "hidden",
    "classes",
    "lr_schedule",
    "warmup_ratio",
    "seed",
    "output_path",
];

fn parse_value<T: FromStr>(value: &str) -> std::result::Result<T, String>
where
    T::Err: fmt::Display,
{
    value.parse::<T>().map_err(|e| format!("cannot parse {value:?}: {e}"))
}

impl ExperimentConfig {
    /// Parses and validates config text. `origin` names the source in errors.
    pub fn parse(text: &str, origin: &str) -> Result<Self> {
        Self::parse_tracked(text, origin).map(|(cfg, _)| cfg)
    }

    /// Parses and also reports whether `name` was given explicitly.
    fn parse_tracked(text: &str, origin: &str) -> Result<(Self, bool)> {
        let mut cfg = ExperimentConfig::default();
        let mut seen: Vec<&str> = Vec::new();
        for (idx, raw) in text.lines().enumerate() {
            let line_err = |message: String| HarnessError::ConfigLine {
                path: origin.to_string(),
                line: idx + 1,
                message,
            };
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| line_err("expected `key = value`".into()))?;
            let (key, value) = (key.trim(), value.trim());
            let known = KEYS
                .iter()
                .find(|k| **k == key)
                .ok_or_else(|| line_err(format!("unknown key {key:?}")))?;
            if seen.contains(known) {
                return Err(line_err(format!("key {key:?} given twice")));
            }
            seen.push(known);
            cfg.set(key, value).map_err(line_err)?;
        }
        cfg.validate()?;
        Ok((cfg, seen.contains(&"name")))
    }

    /// Reads a config file; `name` defaults to the file stem.
    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| HarnessError::Config(format!("{}: {e}", path.display())))?;
        let (mut cfg, named) = Self::parse_tracked(&text, &path.display().to_string())?;
        if !named {
            if let Some(stem) = path.file_stem() {
                cfg.name = stem.to_string_lossy().into_owned();
            }
        }
        Ok(cfg)
    }

    fn set(&mut self, key: &str, value: &str) -> std::result::Result<(), String> {
        match key {
            "name" => self.name = value.to_string(),
            "task" => self.task = parse_value(value)?,
            "m" => self.m = parse_value(value)?,
            "n" => self.n = parse_value(value)?,
            "r" => self.r = parse_value(value)?,
            "true_rank" => self.true_rank = parse_value(value)?,
            "optimizer" => self.optimizer = parse_value(value)?,
            "init" => self.init = parse_value(value)?,
            "eta" => self.eta = parse_value(value)?,
            "beta" => self.beta = parse_value(value)?,
            "beta2" => self.beta2 = parse_value(value)?,
            "gamma" => self.gamma = parse_value(value)?,
            "ema_convention" => self.ema_convention = parse_value(value)?,
            "alpha" => self.alpha = parse_value(value)?,
            "rsvd_p" => self.rsvd_p = Some(parse_value(value)?),
            "rsvd_q" => self.rsvd_q = parse_value(value)?,
            "max_iters" => self.max_iters = parse_value(value)?,
            "samples" => self.samples = parse_value(value)?,
            "batch_size" => self.batch_size = parse_value(value)?,
            "hidden" => self.hidden = parse_value(value)?,
            "classes" => self.classes = parse_value(value)?,
            "lr_schedule" => self.lr_schedule = parse_value(value)?,
            "warmup_ratio" => self.warmup_ratio = parse_value(value)?,
            "seed" => self.seed = parse_value(value)?,
            "output_path" => self.output_path = Some(PathBuf::from(value)),
            _ => unreachable!("key list and setter out of sync: {key}"),
        }
        Ok(())
    }

    pub fn rsvd_oversampling(&self) -> usize {
        self.rsvd_p.unwrap_or(self.r)
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(HarnessError::Config(msg));
        if self.m == 0 || self.n == 0 {
            return fail(format!("dimensions must be positive, got {}x{}", self.m, self.n));
        }
        let small = self.m.min(self.n);
        if self.r == 0 || self.r > small {
            return fail(format!("r must lie in 1..={small}, got {}", self.r));
        }
        if self.init == InitChoice::Loi && 2 * self.r > small {
            return fail(format!("init = loi needs 2r <= min(m, n) = {small}, got r = {}", self.r));
        }
        if self.true_rank == 0 || self.true_rank > small {
            return fail(format!("true_rank must lie in 1..={small}, got {}", self.true_rank));
        }
        if self.optimizer.is_riemannian() && self.init == InitChoice::OrthoA {
            return fail(format!(
                "optimizer {} needs a rank-r start; use init = zero_b_eps or loi instead of ortho_a",
                self.optimizer
            ));
        }
        if !(self.eta > 0.0 && self.eta.is_finite()) {
            return fail(format!("eta must be positive, got {}", self.eta));
        }
        if !(0.0..1.0).contains(&self.beta) {
            return fail(format!("beta must lie in [0, 1), got {}", self.beta));
        }
        if !(0.0..1.0).contains(&self.beta2) {
            return fail(format!("beta2 must lie in [0, 1), got {}", self.beta2));
        }
        if !(self.gamma > 0.0 && self.gamma < 1.0) {
            return fail(format!("gamma must lie in (0, 1), got {}", self.gamma));
        }
        if self.alpha == 0.0 || !self.alpha.is_finite() {
            return fail("alpha must be a nonzero finite number".into());
        }
        if !(0.0..1.0).contains(&self.warmup_ratio) {
            return fail(format!("warmup_ratio must lie in [0, 1), got {}", self.warmup_ratio));
        }
        if matches!(self.task, TaskKind::Linreg | TaskKind::ToyMlp) {
            if self.samples == 0 {
                return fail("samples must be positive".into());
            }
            if self.batch_size > self.samples {
                return fail(format!(
                    "batch_size {} exceeds samples {}",
                    self.batch_size, self.samples
                ));
            }
        }
        if self.task == TaskKind::ToyMlp && self.batch_size != 0 {
            return fail("toy_mlp runs full batch; set batch_size = 0".into());
        }
        if self.task == TaskKind::ToyMlp && (self.hidden == 0 || self.classes < 2) {
            return fail("toy_mlp needs hidden >= 1 and classes >= 2".into());
        }
        Ok(())
    }
}

impl fmt::Display for ExperimentConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "name = {}", self.name)?;
        writeln!(f, "task = {}", self.task)?;
        writeln!(f, "m = {}", self.m)?;
        writeln!(f, "n = {}", self.n)?;
        writeln!(f, "r = {}", self.r)?;
        writeln!(f, "true_rank = {}", self.true_rank)?;
        writeln!(f, "optimizer = {}", self.optimizer)?;
        writeln!(f, "init = {}", self.init)?;
        writeln!(f, "eta = {:?}", self.eta)?;
        writeln!(f, "beta = {:?}", self.beta)?;
        writeln!(f, "beta2 = {:?}", self.beta2)?;
        writeln!(f, "gamma = {:?}", self.gamma)?;
        writeln!(f, "ema_convention = {}", self.ema_convention)?;
        writeln!(f, "alpha = {:?}", self.alpha)?;
        if let Some(p) = self.rsvd_p {
            writeln!(f, "rsvd_p = {p}")?;
        }
        writeln!(f, "rsvd_q = {}", self.rsvd_q)?;
        writeln!(f, "max_iters = {}", self.max_iters)?;
        writeln!(f, "samples = {}", self.samples)?;
        writeln!(f, "batch_size = {}", self.batch_size)?;
        writeln!(f, "hidden = {}", self.hidden)?;
        writeln!(f, "classes = {}", self.classes)?;
        writeln!(f, "lr_schedule = {}", self.lr_schedule)?;
        writeln!(f, "warmup_ratio = {:?}", self.warmup_ratio)?;
        writeln!(f, "seed = {}", self.seed)?;
        if let Some(p) = &self.output_path {
            writeln!(f, "output_path = {}", p.display())?;
        }
        Ok(())
    }
}
