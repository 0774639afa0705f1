use riemannlora_harness::check::{check_invariants, write_report, CheckOptions, Profile};
use riemannlora_harness::compare::{compare, loss_at, median, summarize, write_summary, Cell};
use riemannlora_harness::config::{InitChoice, OptimizerKind};
use riemannlora_harness::run::run_experiment;
use riemannlora_harness::{ExperimentConfig, HarnessError};

fn cfg(name: &str) -> ExperimentConfig {
    ExperimentConfig {
        name: name.into(),
        m: 12,
        n: 10,
        r: 2,
        true_rank: 2,
        max_iters: 15,
        ..Default::default()
    }
}

#[test]
fn single_cell_summary_is_that_run() {
    let c = cfg("solo");
    let (rows, cells) = compare(std::slice::from_ref(&c), &[7], 1e-3).unwrap();
    assert_eq!(rows.len(), 1);
    assert_eq!(cells.len(), 1);
    let records = run_experiment(&ExperimentConfig { seed: 7, ..c }).unwrap().into_result().unwrap();
    let last = records.last().unwrap().loss;
    let row = &rows[0];
    assert_eq!((row.runs, row.failed), (1, 0));
    assert_eq!(row.final_loss_median, last);
    assert_eq!(row.final_loss_mean, last);
    assert_eq!(row.final_loss_std, 0.0);
    assert_eq!(row.step10_loss_median, records[10].loss);
}

#[test]
fn rows_are_ordered_by_config_name() {
    let configs = [
        ExperimentConfig { optimizer: OptimizerKind::RiemannSgd, ..cfg("zeta") },
        ExperimentConfig { optimizer: OptimizerKind::RiemannHb, ..cfg("alpha") },
        ExperimentConfig {
            optimizer: OptimizerKind::EuclidSgd,
            init: InitChoice::OrthoA,
            eta: 0.05,
            ..cfg("mid")
        },
    ];
    let (rows, _) = compare(&configs, &[1, 2], 1e-3).unwrap();
    let names: Vec<&str> = rows.iter().map(|r| r.config.as_str()).collect();
    assert_eq!(names, ["alpha", "mid", "zeta"]);
    assert_eq!(rows[0].optimizer, "riemann_hb");
    assert_eq!(rows[2].optimizer, "riemann_sgd");

    let text = |rows: &[riemannlora_harness::compare::SummaryRow]| {
        let mut buf = Vec::new();
        write_summary(&mut buf, rows).unwrap();
        buf
    };
    let (again, _) = compare(&configs, &[1, 2], 1e-3).unwrap();
    assert_eq!(text(&rows), text(&again));
}

#[test]
fn failed_cells_are_counted_not_fatal() {
    let configs = [cfg("fine"), ExperimentConfig { eta: 1e200, ..cfg("diverges") }];
    let (rows, cells) = compare(&configs, &[1, 2, 3], 1e-3).unwrap();
    let bad = rows.iter().find(|r| r.config == "diverges").unwrap();
    assert_eq!((bad.runs, bad.failed), (3, 3));
    assert!(bad.final_loss_median.is_nan());
    let good = rows.iter().find(|r| r.config == "fine").unwrap();
    assert_eq!((good.runs, good.failed), (3, 0));
    let numerical = cells
        .iter()
        .filter(|c| matches!(c.result, Err(HarnessError::Numerical(_))))
        .count();
    assert_eq!(numerical, 3);
}

#[test]
fn statistics_over_seeds() {
    let c = cfg("stats");
    let seeds = [3, 4, 5, 6];
    let (rows, _) = compare(std::slice::from_ref(&c), &seeds, 1e-2).unwrap();
    let finals: Vec<f64> = seeds
        .iter()
        .map(|&s| {
            let r = run_experiment(&ExperimentConfig { seed: s, ..c.clone() }).unwrap().records;
            r.last().unwrap().loss
        })
        .collect();
    let mean = finals.iter().sum::<f64>() / 4.0;
    let var = finals.iter().map(|f| (f - mean).powi(2)).sum::<f64>() / 3.0;
    assert_eq!(rows[0].final_loss_median, median(&finals));
    assert!((rows[0].final_loss_mean - mean).abs() <= 1e-15 * mean.abs().max(1e-300));
    assert!((rows[0].final_loss_std - var.sqrt()).abs() <= 1e-12 * var.sqrt().max(1e-300));
}

#[test]
fn summary_text_round_trips_floats() {
    let c = cfg("fmt");
    let cells: Vec<Cell> = [1u64, 2]
        .iter()
        .map(|&seed| Cell {
            config_index: 0,
            seed,
            result: run_experiment(&ExperimentConfig { seed, ..c.clone() }).and_then(|o| o.into_result()),
        })
        .collect();
    let rows = summarize(std::slice::from_ref(&c), &cells, 1e-3);
    let mut buf = Vec::new();
    write_summary(&mut buf, &rows).unwrap();
    let text = String::from_utf8(buf).unwrap();
    let fields: Vec<&str> = text.lines().nth(1).unwrap().split(',').collect();
    assert_eq!(fields[5].parse::<f64>().unwrap(), rows[0].final_loss_median);
    let probe = loss_at(cells[0].result.as_ref().unwrap(), 10).unwrap();
    assert!(probe.is_finite());
}

fn report(profile: Profile, seed: u64, corrupt: bool) -> String {
    let results = check_invariants(profile, seed, CheckOptions { corrupt_frame: corrupt }).unwrap();
    let mut buf = Vec::new();
    write_report(&mut buf, &results).unwrap();
    String::from_utf8(buf).unwrap()
}

#[test]
fn quick_profile_passes_on_several_seeds() {
    for seed in 0..4 {
        let results = check_invariants(Profile::Quick, seed, CheckOptions::default()).unwrap();
        let failed: Vec<_> = results.iter().filter(|r| !r.pass()).collect();
        assert!(failed.is_empty(), "seed {seed}: {failed:?}");
    }
}

#[test]
fn full_profile_passes() {
    let results = check_invariants(Profile::Full, 11, CheckOptions::default()).unwrap();
    let failed: Vec<_> = results.iter().filter(|r| !r.pass()).collect();
    assert!(failed.is_empty(), "{failed:?}");
}

#[test]
fn report_is_stable_for_a_seed() {
    assert_eq!(report(Profile::Quick, 3, false), report(Profile::Quick, 3, false));
    assert_ne!(report(Profile::Quick, 3, false), report(Profile::Quick, 4, false));
}

#[test]
fn corrupted_frame_is_flagged() {
    let results = check_invariants(Profile::Quick, 2, CheckOptions { corrupt_frame: true }).unwrap();
    let failed: Vec<&str> = results.iter().filter(|r| !r.pass()).map(|r| r.name).collect();
    assert!(!failed.is_empty());
    assert!(failed.iter().all(|n| n.contains("orthonormal")), "{failed:?}");
}
