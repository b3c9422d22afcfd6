use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use rlbeam_cli::config::{Baseline, Overrides, Reward};

/// Runs a cognitive MIMO radar scenario with the adaptive beamformer and the
/// omnidirectional baseline, and writes CSV artifacts.
#[derive(Debug, Parser)]
#[command(name = "rlbeam", version)]
struct Args {
    /// Built-in scenario (`case1`, `case2`) or path to a TOML file.
    #[arg(long, default_value = "case1")]
    scenario: String,
    /// Monte Carlo runs.
    #[arg(long)]
    runs: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Mode whose per-step traces are written.
    #[arg(long, value_enum)]
    baseline: Option<Baseline>,
    #[arg(long, value_enum)]
    reward: Option<Reward>,
    /// Output directory.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Number of time steps.
    #[arg(long)]
    k: Option<usize>,
}

fn main() -> ExitCode {
    let args = Args::parse();
    let overrides = Overrides {
        runs: args.runs,
        seed: args.seed,
        steps: args.k,
        baseline: args.baseline,
        reward: args.reward,
    };
    match rlbeam_cli::run(&args.scenario, &overrides, &args.out) {
        Ok(outcome) => {
            let s = &outcome.scenario;
            eprintln!(
                "{} runs x {} steps, seed {}: wrote {}",
                s.n_runs,
                s.n_steps,
                s.seed,
                args.out.display()
            );
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
