use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use gcflow::harness::{parse_config, run_experiment, ExperimentConfig, ExperimentKind};

#[derive(Parser, Debug)]
#[command(name = "gcflow", version, about = "Level-set flows by curvature functions: experiments and audits")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run a flow experiment (shrinking shapes, ordered pairs, relabelling).
    Evolve(Common),
    /// Solve for the arrival time on a domain.
    Arrival(Common),
    /// Track the non-collapsing ratios along a flow.
    Andrews(Common),
    /// Probe flow snapshots against the viscosity inequalities.
    Probe(Common),
    /// Run every randomized property suite.
    Verify(Common),
}

#[derive(clap::Args, Debug)]
struct Common {
    /// key=value configuration file (optional for `verify`).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory, overriding `out_dir`.
    #[arg(long)]
    out_dir: Option<PathBuf>,
    /// Seed for randomized suites, overriding `seed`.
    #[arg(long)]
    seed: Option<u64>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("gcflow: {e}");
            ExitCode::from(2)
        }
    }
}

fn allowed(command: &Command) -> &'static [ExperimentKind] {
    use ExperimentKind::*;
    match command {
        Command::Evolve(_) => {
            &[ShrinkCircle, ShrinkBall, ShrinkEllipse, ComparisonPair, ContractionPair, RelabelCheck]
        }
        Command::Arrival(_) => &[ArrivalBall],
        Command::Andrews(_) => &[AndrewsTrack, ShrinkEllipse],
        Command::Probe(_) => &[ProbeRun],
        Command::Verify(_) => &[EnvelopeAudit],
    }
}

fn run(command: Command) -> Result<bool, String> {
    let ok = allowed(&command);
    let verify = matches!(command, Command::Verify(_));
    let common = match command {
        Command::Evolve(c) | Command::Arrival(c) | Command::Andrews(c) | Command::Probe(c) | Command::Verify(c) => c,
    };
    let mut config = match &common.config {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
            parse_config(&text).map_err(|e| e.to_string())?
        }
        None if verify => ExperimentConfig::defaults(ExperimentKind::EnvelopeAudit),
        None => return Err("--config FILE is required".into()),
    };
    if !ok.contains(&config.experiment) {
        let names: Vec<&str> = ok.iter().map(|k| k.name()).collect();
        return Err(format!(
            "experiment `{}` does not belong to this subcommand (expected one of {})",
            config.experiment.name(),
            names.join(", ")
        ));
    }
    if let Some(dir) = common.out_dir {
        config.out_dir = dir;
    }
    if let Some(seed) = common.seed {
        config.seed = seed;
    }
    let start = std::time::Instant::now();
    let summary = run_experiment(&config).map_err(|e| e.to_string())?;
    for check in &summary.checks {
        println!("{check}");
    }
    eprintln!(
        "{} finished in {:.1} s; outputs in {}",
        config.experiment.name(),
        start.elapsed().as_secs_f64(),
        config.out_dir.display()
    );
    Ok(summary.all_pass())
}
