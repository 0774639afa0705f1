//! Cross product of configs and seeds, summarized per config.

use std::io::Write;
use std::path::Path;

use rayon::prelude::*;

use crate::config::ExperimentConfig;
use crate::error::{HarnessError, Result};
use crate::run::{run_experiment, StepRecord};

pub const SUMMARY_HEADER: &str = "config,optimizer,init,runs,failed,final_loss_median,final_loss_mean,\
final_loss_std,step10_loss_median,steps_to_threshold_median,reached_threshold";

/// Loss at step 10, or the last recorded loss for shorter runs.
pub const PROBE_STEP: usize = 10;

#[derive(Clone, Debug, PartialEq)]
pub struct SummaryRow {
    pub config: String,
    pub optimizer: String,
    pub init: String,
    pub runs: usize,
    pub failed: usize,
    pub final_loss_median: f64,
    pub final_loss_mean: f64,
    pub final_loss_std: f64,
    pub step10_loss_median: f64,
    pub steps_to_threshold_median: f64,
    pub reached_threshold: usize,
}

/// Outcome of one `(config, seed)` cell.
#[derive(Debug)]
pub struct Cell {
    pub config_index: usize,
    pub seed: u64,
    pub result: Result<Vec<StepRecord>>,
}

pub fn median(values: &[f64]) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let mid = v.len() / 2;
    if v.len() % 2 == 1 {
        v[mid]
    } else {
        0.5 * (v[mid - 1] + v[mid])
    }
}

fn mean_std(values: &[f64]) -> (f64, f64) {
    if values.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() == 1 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

/// First step whose loss is at most `threshold` times the initial loss.
pub fn steps_to_threshold(records: &[StepRecord], threshold: f64) -> Option<usize> {
    let first = records.first()?.loss;
    records.iter().find(|r| r.loss <= threshold * first).map(|r| r.step)
}

pub fn loss_at(records: &[StepRecord], step: usize) -> Option<f64> {
    records.iter().find(|r| r.step == step).or(records.last()).map(|r| r.loss)
}

/// Runs every cell in parallel. Each cell's randomness depends on its seed
/// only, so two configs given the same seed see the same task.
pub fn run_cells(configs: &[ExperimentConfig], seeds: &[u64]) -> Vec<Cell> {
    let jobs: Vec<(usize, u64)> = (0..configs.len())
        .flat_map(|i| seeds.iter().map(move |&s| (i, s)))
        .collect();
    jobs.into_par_iter()
        .map(|(config_index, seed)| {
            let cfg = ExperimentConfig {
                seed,
                output_path: None,
                ..configs[config_index].clone()
            };
            let result = run_experiment(&cfg).and_then(|o| o.into_result());
            Cell {
                config_index,
                seed,
                result,
            }
        })
        .collect()
}

pub fn summarize(configs: &[ExperimentConfig], cells: &[Cell], threshold: f64) -> Vec<SummaryRow> {
    let mut rows: Vec<SummaryRow> = configs
        .iter()
        .enumerate()
        .map(|(i, cfg)| {
            let mine: Vec<&Cell> = cells.iter().filter(|c| c.config_index == i).collect();
            let ok: Vec<&Vec<StepRecord>> = mine.iter().filter_map(|c| c.result.as_ref().ok()).collect();
            let finals: Vec<f64> = ok.iter().filter_map(|r| r.last().map(|x| x.loss)).collect();
            let probes: Vec<f64> = ok.iter().filter_map(|r| loss_at(r, PROBE_STEP)).collect();
            let reached: Vec<f64> = ok
                .iter()
                .filter_map(|r| steps_to_threshold(r, threshold).map(|s| s as f64))
                .collect();
            let (mean, std) = mean_std(&finals);
            SummaryRow {
                config: cfg.name.clone(),
                optimizer: cfg.optimizer.to_string(),
                init: cfg.init.to_string(),
                runs: mine.len(),
                failed: mine.len() - ok.len(),
                final_loss_median: median(&finals),
                final_loss_mean: mean,
                final_loss_std: std,
                step10_loss_median: median(&probes),
                steps_to_threshold_median: median(&reached),
                reached_threshold: reached.len(),
            }
        })
        .collect();
    rows.sort_by(|a, b| a.config.cmp(&b.config));
    rows
}

pub fn compare(configs: &[ExperimentConfig], seeds: &[u64], threshold: f64) -> Result<(Vec<SummaryRow>, Vec<Cell>)> {
    if configs.is_empty() {
        return Err(HarnessError::Config("no configs to compare".into()));
    }
    if seeds.is_empty() {
        return Err(HarnessError::Config("no seeds given".into()));
    }
    let cells = run_cells(configs, seeds);
    Ok((summarize(configs, &cells, threshold), cells))
}

pub fn write_summary<W: Write>(mut out: W, rows: &[SummaryRow]) -> std::io::Result<()> {
    writeln!(out, "{SUMMARY_HEADER}")?;
    for r in rows {
        writeln!(
            out,
            "{},{},{},{},{},{:?},{:?},{:?},{:?},{:?},{}",
            r.config,
            r.optimizer,
            r.init,
            r.runs,
            r.failed,
            r.final_loss_median,
            r.final_loss_mean,
            r.final_loss_std,
            r.step10_loss_median,
            r.steps_to_threshold_median,
            r.reached_threshold
        )?;
    }
    Ok(())
}

/// Loads every `*.conf` file of `dir`, in file-name order.
pub fn load_config_dir(dir: &Path) -> Result<Vec<ExperimentConfig>> {
    let entries = std::fs::read_dir(dir).map_err(|e| HarnessError::Config(format!("{}: {e}", dir.display())))?;
    let mut paths: Vec<_> = entries
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.is_file() && p.extension().is_some_and(|x| x == "conf"))
        .collect();
    paths.sort();
    if paths.is_empty() {
        return Err(HarnessError::Config(format!("no *.conf files in {}", dir.display())));
    }
    paths.iter().map(|p| ExperimentConfig::from_path(p)).collect()
}

pub fn parse_seeds(text: &str) -> Result<Vec<u64>> {
    text.split(',')
        .map(|s| {
            s.trim()
                .parse::<u64>()
                .map_err(|e| HarnessError::Config(format!("bad seed {s:?}: {e}")))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rec(step: usize, loss: f64) -> StepRecord {
        StepRecord { step, loss, riem_grad_norm: 0.0, wall_nanos: 0 }
    }

    #[test]
    fn statistics() {
        assert_eq!(median(&[3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(&[4.0, 1.0, 2.0, 3.0]), 2.5);
        assert!(median(&[]).is_nan());
        let (m, s) = mean_std(&[1.0, 3.0]);
        assert_eq!((m, s), (2.0, 2f64.sqrt()));
        assert_eq!(mean_std(&[5.0]), (5.0, 0.0));
    }

    #[test]
    fn threshold_and_probe() {
        let r: Vec<StepRecord> = (0..5).map(|i| rec(i, 1.0 / (1 << (3 * i)) as f64)).collect();
        assert_eq!(steps_to_threshold(&r, 1e-2), Some(3));
        assert_eq!(steps_to_threshold(&r, 1e-9), None);
        assert_eq!(loss_at(&r, 10), Some(r[4].loss));
        assert_eq!(loss_at(&r, 1), Some(0.125));
    }

    #[test]
    fn seeds_parse() {
        assert_eq!(parse_seeds("1, 2,3").unwrap(), vec![1, 2, 3]);
        assert_eq!(parse_seeds("1,x").unwrap_err().exit_code(), 2);
    }
}
