//! Experiment harness for `riemannlora`: synthetic tasks, `key = value`
//! configs, deterministic runs with CSV metrics, multi-seed comparisons and
//! the invariant suite behind the `riemannlora` binary.

pub mod check;
pub mod compare;
pub mod config;
pub mod error;
pub mod run;
pub mod task;

pub use config::ExperimentConfig;
pub use error::{HarnessError, Result};

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/harness.md")]
    mod harness {}
}
