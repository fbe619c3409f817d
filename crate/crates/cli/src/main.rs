use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand};
use purity_cli::experiments::run_experiment;
use purity_cli::validate::validate;
use purity_cli::{Experiment, ExperimentSpec, Format};
use purity_core::{GatePolicy, NumericMode, Protocol};

#[derive(Parser)]
#[command(name = "purity", version, about = "Average purity dynamics of random unitary circuits")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Compute an experiment and write its tables.
    Run(SpecArgs),
    /// Check a configuration without computing anything.
    Validate(SpecArgs),
    /// List the experiment ids.
    ListExperiments,
}

#[derive(Args)]
struct SpecArgs {
    /// Experiment id; may instead come from --config.
    experiment: Option<Experiment>,
    /// JSON config file; flags override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    d: Option<u32>,
    #[arg(long)]
    n: Option<usize>,
    /// staircase | brickwall
    #[arg(long)]
    protocol: Option<Protocol>,
    /// iid | single
    #[arg(long)]
    gate_policy: Option<GatePolicy>,
    #[arg(long)]
    t_max: Option<usize>,
    #[arg(long, value_delimiter = ',')]
    cuts: Option<Vec<usize>>,
    #[arg(long)]
    realizations: Option<usize>,
    #[arg(long, value_delimiter = ',')]
    epsilon: Option<Vec<f64>>,
    #[arg(long)]
    trials: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// float | rational
    #[arg(long)]
    mode: Option<NumericMode>,
    /// Output file; defaults to `$PURITY_OUT_DIR/<experiment>.<ext>`.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum)]
    format: Option<Format>,
    #[arg(long, env = "PURITY_OUT_DIR", default_value = ".")]
    out_dir: PathBuf,
}

impl SpecArgs {
    fn spec(&self) -> anyhow::Result<ExperimentSpec> {
        let base = match &self.config {
            Some(p) => ExperimentSpec::from_file(p)?,
            None => ExperimentSpec::default(),
        };
        let flags = ExperimentSpec {
            experiment: self.experiment,
            d: self.d,
            n: self.n,
            protocol: self.protocol,
            gate_policy: self.gate_policy,
            t_max: self.t_max,
            seed: self.seed,
            cuts: self.cuts.clone(),
            realizations: self.realizations,
            epsilon: self.epsilon.clone(),
            trials: self.trials,
            mode: self.mode,
            out: self.out.clone(),
            format: self.format,
        };
        Ok(base.merged(flags))
    }
}

fn run(args: &SpecArgs) -> anyhow::Result<ExitCode> {
    let spec = args.spec()?;
    let check = validate(&spec)?;
    if !check.ok() {
        for p in check.problems() {
            eprintln!("refused: {p}");
        }
        return Ok(ExitCode::from(2));
    }
    let format = spec.format();
    let out = spec
        .out
        .clone()
        .unwrap_or_else(|| args.out_dir.join(format!("{}.{}", spec.experiment().unwrap(), format.extension())));
    let report = run_experiment(&spec)?;
    for note in &report.notes {
        eprintln!("note: {note}");
    }
    for p in report.write(&out, format).context("writing results")? {
        println!("{}", p.display());
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> anyhow::Result<ExitCode> {
    match Cli::parse().command {
        Command::Run(args) => run(&args),
        Command::Validate(args) => {
            let report = validate(&args.spec()?)?;
            println!("{}", serde_json::to_string_pretty(&report)?);
            Ok(if report.ok() { ExitCode::SUCCESS } else { ExitCode::from(2) })
        }
        Command::ListExperiments => {
            for e in Experiment::ALL {
                println!("{:<14} {}", e.id(), e.description());
            }
            Ok(ExitCode::SUCCESS)
        }
    }
}
