use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use riemannlora::init::{backprop_rsvd, RsvdConfig};
use riemannlora::oracle::WeightsView;
use riemannlora_harness::check::{check_invariants, write_report, CheckOptions, Profile};
use riemannlora_harness::compare::{compare, load_config_dir, parse_seeds, write_summary};
use riemannlora_harness::error::{HarnessError, Result};
use riemannlora_harness::run::{run_experiment, write_csv, write_csv_file};
use riemannlora_harness::task::{gen_task, sub_seed, Stream};
use riemannlora_harness::ExperimentConfig;

#[derive(Parser)]
#[command(name = "riemannlora", version, about = "Fixed-rank adapter experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one experiment and write its metrics CSV.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Overrides `output_path`; without either the CSV goes to stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run every `*.conf` in a directory over several seeds and summarize.
    Compare {
        #[arg(long)]
        configs: PathBuf,
        /// Comma-separated seeds, e.g. `1,2,3`.
        #[arg(long)]
        seeds: String,
        #[arg(long)]
        out: PathBuf,
        /// Relative loss level for the steps-to-threshold column.
        #[arg(long, default_value_t = 1e-3)]
        threshold: f64,
    },
    /// Run the invariant suite.
    Check {
        #[arg(long, default_value = "quick")]
        profile: Profile,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Write the report here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Negative control: corrupt the orthonormal factor before checking it.
        #[arg(long, hide = true)]
        inject_fault: bool,
    },
    /// Randomized SVD of the task's initial gradient; prints the singular values.
    Rsvd {
        #[arg(long)]
        config: PathBuf,
    },
}

fn cmd_run(config: PathBuf, out: Option<PathBuf>) -> Result<()> {
    let cfg = ExperimentConfig::from_path(&config)?;
    let outcome = run_experiment(&cfg)?;
    match out.or_else(|| cfg.output_path.clone()) {
        Some(path) => write_csv_file(&path, &outcome.records, outcome.error.as_ref())?,
        None => write_csv(std::io::stdout().lock(), &outcome.records, outcome.error.as_ref())
            .map_err(|e| HarnessError::io("<stdout>", e))?,
    }
    match outcome.error {
        Some(e) => Err(e),
        None => Ok(()),
    }
}

fn cmd_compare(configs: PathBuf, seeds: String, out: PathBuf, threshold: f64) -> Result<()> {
    let cfgs = load_config_dir(&configs)?;
    let seeds = parse_seeds(&seeds)?;
    let (rows, cells) = compare(&cfgs, &seeds, threshold)?;
    for cell in &cells {
        if let Err(e) = &cell.result {
            eprintln!("{} seed {}: {e}", cfgs[cell.config_index].name, cell.seed);
        }
    }
    if let Some(parent) = out.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent).map_err(|e| HarnessError::io(parent, e))?;
    }
    let file = std::fs::File::create(&out).map_err(|e| HarnessError::io(&out, e))?;
    let mut w = std::io::BufWriter::new(file);
    write_summary(&mut w, &rows).map_err(|e| HarnessError::io(&out, e))?;
    w.flush().map_err(|e| HarnessError::io(&out, e))
}

fn cmd_check(profile: Profile, seed: u64, out: Option<PathBuf>, inject_fault: bool) -> Result<()> {
    let results = check_invariants(profile, seed, CheckOptions { corrupt_frame: inject_fault })?;
    match &out {
        Some(path) => {
            let file = std::fs::File::create(path).map_err(|e| HarnessError::io(path, e))?;
            write_report(std::io::BufWriter::new(file), &results).map_err(|e| HarnessError::io(path, e))?;
        }
        None => write_report(std::io::stdout().lock(), &results).map_err(|e| HarnessError::io("<stdout>", e))?,
    }
    let failed = results.iter().filter(|r| !r.pass()).count();
    if failed > 0 {
        return Err(HarnessError::InvariantFailures(failed));
    }
    Ok(())
}

fn cmd_rsvd(config: PathBuf) -> Result<()> {
    let cfg = ExperimentConfig::from_path(&config)?;
    let task = gen_task(&cfg)?;
    let rsvd = RsvdConfig::new(cfg.rsvd_oversampling(), cfg.rsvd_q, sub_seed(cfg.seed, Stream::Init));
    let svd = backprop_rsvd(&task.oracle, WeightsView::dense(&task.base), cfg.r, &rsvd)?;
    let mut out = std::io::stdout().lock();
    let io = |e| HarnessError::io("<stdout>", e);
    writeln!(out, "index,sigma").map_err(io)?;
    for (i, s) in svd.sigma.iter().enumerate() {
        writeln!(out, "{i},{s:?}").map_err(io)?;
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run { config, out } => cmd_run(config, out),
        Command::Compare {
            configs,
            seeds,
            out,
            threshold,
        } => cmd_compare(configs, seeds, out, threshold),
        Command::Check {
            profile,
            seed,
            out,
            inject_fault,
        } => cmd_check(profile, seed, out, inject_fault),
        Command::Rsvd { config } => cmd_rsvd(config),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
