use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use ibc_lab_core::config::{Experiment, ExperimentConfig};
use ibc_lab_core::report::{verify, Report};
use ibc_lab_core::{runner, Error};

const THREADS_VAR: &str = "IBC_LAB_THREADS";

#[derive(Parser)]
#[command(name = "ibc-lab", version, about = "Numerical experiments for interior-boundary-condition Hamiltonians")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the configured experiments and write report.json plus CSV files.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Output directory, overrides `output_dir`.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        /// constants, probe_g, probe_r, sector1, bounds or all.
        #[arg(long)]
        experiment: Option<String>,
    },
    /// Compare a report against a baseline report.
    Verify { report: PathBuf, baseline: PathBuf },
}

fn init_pool() -> Result<(), Error> {
    let Ok(v) = std::env::var(THREADS_VAR) else {
        return Ok(());
    };
    let n: usize = v
        .trim()
        .parse()
        .ok()
        .filter(|n| *n > 0)
        .ok_or_else(|| Error::Config(format!("{THREADS_VAR} must be a positive integer, got '{v}'")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| Error::Config(format!("cannot build a pool of {n} threads: {e}")))
}

fn run(config: PathBuf, out: Option<PathBuf>, seed: Option<u64>, experiment: Option<String>) -> Result<bool, Error> {
    let mut cfg = ExperimentConfig::from_file(&config)?;
    if let Some(dir) = out {
        cfg.output_dir = dir;
    }
    if let Some(s) = seed {
        cfg = cfg.with_seed(s);
    }
    if let Some(tag) = experiment {
        cfg.experiment = tag.parse::<Experiment>()?;
    }
    cfg.validate()?;
    let report = runner::run(&cfg)?;
    for c in report.checks() {
        println!("{}", c.line());
    }
    println!(
        "{} -> {}",
        if report.passed { "all checks passed" } else { "some checks failed" },
        cfg.output_dir.join("report.json").display()
    );
    Ok(report.passed)
}

fn verify_files(report: PathBuf, baseline: PathBuf) -> Result<bool, Error> {
    let current = Report::load(&report)?;
    let base = Report::load(&baseline)?;
    let diff = verify(&current, &base);
    for line in diff.lines() {
        println!("{line}");
    }
    println!(
        "compared {} fields: {} regressions, {} failing checks",
        diff.compared,
        diff.regressions.len(),
        diff.failed_checks.len()
    );
    Ok(diff.is_clean())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = init_pool().and_then(|()| match cli.command {
        Command::Run {
            config,
            out,
            seed,
            experiment,
        } => run(config, out, seed, experiment),
        Command::Verify { report, baseline } => verify_files(report, baseline),
    });
    match outcome {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
