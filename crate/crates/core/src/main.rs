use std::fs::File;
use std::io::{self, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;

use tksd::harness::{run_experiment, Experiment, ExperimentConfig};
use tksd::TksdError;

/// Run a seeded estimation experiment and write its results.
#[derive(Debug, Parser)]
#[command(name = "tksd", version)]
struct Cli {
    /// estimate, dim-bench, polygon-bench, consistency, mixture, regression,
    /// boundary-dist, retention or epsilon-table
    experiment: String,

    /// Flat JSON settings file.
    #[arg(long)]
    config: Option<PathBuf>,

    #[arg(long)]
    seeds: Option<usize>,

    #[arg(long)]
    base_seed: Option<u64>,

    /// Output path; standard output when absent.
    #[arg(long)]
    out: Option<PathBuf>,

    /// Emit a JSON array instead of CSV.
    #[arg(long)]
    json: bool,

    /// Worker threads for the seed loop.
    #[arg(long)]
    threads: Option<usize>,

    /// Write zero wall times so reruns are byte-identical.
    #[arg(long)]
    no_timing: bool,
}

fn build_config(cli: &Cli) -> Result<ExperimentConfig, TksdError> {
    let experiment: Experiment = cli.experiment.parse()?;
    let mut cfg = match &cli.config {
        Some(path) => ExperimentConfig::load(path)?,
        None => ExperimentConfig::default(),
    };
    if let Some(e) = cfg.experiment {
        if e != experiment {
            return Err(TksdError::Config(format!(
                "config is for '{e}' but '{experiment}' was requested"
            )));
        }
    }
    cfg.experiment = Some(experiment);
    if let Some(s) = cli.seeds {
        cfg.seeds = s;
    }
    if let Some(s) = cli.base_seed {
        cfg.base_seed = s;
    }
    if let Some(t) = cli.threads {
        cfg.threads = Some(t);
    }
    if cli.out.is_some() {
        cfg.out = cli.out.clone();
    }
    if cli.no_timing {
        cfg.record_timing = false;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn run(cli: &Cli) -> Result<(), TksdError> {
    let cfg = build_config(cli)?;
    let output = run_experiment(&cfg)?;
    let mut sink: Box<dyn Write> = match &cfg.out {
        Some(path) => Box::new(File::create(path)?),
        None => Box::new(io::stdout().lock()),
    };
    if cli.json {
        writeln!(sink, "{}", output.to_json())?;
    } else {
        output.write_csv(&mut sink)?;
    }
    sink.flush()?;
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            if e.is_config_error() {
                ExitCode::from(1)
            } else {
                ExitCode::from(2)
            }
        }
    }
}
