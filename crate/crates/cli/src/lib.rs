//! Batch runner: resolves a scenario, runs the adaptive and omnidirectional
//! Monte Carlo studies and writes the CSV artifacts.

pub mod config;
pub mod output;

use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use rlbeam::sim_engine::{monte_carlo, BaselineMode, MonteCarloReport, Scenario};

use crate::config::{ConfigError, Overrides, ScenarioFile};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("cannot write {path}: {reason}")]
    Output { path: PathBuf, reason: String },
    #[error("simulation failed: {0}")]
    Simulation(#[from] rlbeam::Error),
}

impl CliError {
    /// Process exit status; 2 is left to argument parsing.
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(ConfigError::Read { .. }) => 3,
            CliError::Config(_) => 4,
            CliError::Output { .. } => 5,
            CliError::Simulation(_) => 6,
        }
    }
}

/// A built-in name (`case1`, `case2`) or the path of a TOML file.
pub fn load_scenario_file(source: &str) -> Result<ScenarioFile, ConfigError> {
    match ScenarioFile::builtin(source) {
        Some(file) => Ok(file),
        None => ScenarioFile::load(Path::new(source)),
    }
}

pub struct Outcome {
    pub scenario: Scenario,
    pub rl: MonteCarloReport,
    pub omni: MonteCarloReport,
}

impl Outcome {
    /// Report of the mode selected by the scenario's baseline.
    pub fn primary(&self) -> &MonteCarloReport {
        match self.scenario.baseline_mode {
            BaselineMode::Rl => &self.rl,
            BaselineMode::Omni => &self.omni,
        }
    }
}

/// Runs both modes; `scenario.baseline_mode` only decides which one feeds
/// the per-step artifacts.
pub fn simulate(scenario: &Scenario) -> Result<Outcome, rlbeam::Error> {
    let with_mode = |mode| Scenario {
        baseline_mode: mode,
        ..scenario.clone()
    };
    let rl = monte_carlo(&with_mode(BaselineMode::Rl))?;
    let omni = monte_carlo(&with_mode(BaselineMode::Omni))?;
    Ok(Outcome {
        scenario: scenario.clone(),
        rl,
        omni,
    })
}

fn output_error(path: &Path, e: impl std::fmt::Display) -> CliError {
    CliError::Output {
        path: path.to_path_buf(),
        reason: e.to_string(),
    }
}

fn write_file(dir: &Path, name: &str, f: impl FnOnce(BufWriter<File>) -> csv::Result<()>) -> Result<(), CliError> {
    let path = dir.join(name);
    let file = File::create(&path).map_err(|e| output_error(&path, e))?;
    f(BufWriter::new(file)).map_err(|e| output_error(&path, e))
}

/// Resolves, simulates and writes all artifacts into `out`. Nothing is
/// written before every run has finished.
pub fn run(source: &str, overrides: &Overrides, out: &Path) -> Result<Outcome, CliError> {
    let mut file = load_scenario_file(source)?;
    file.apply(overrides);
    let resolved = file.explicit()?;
    let scenario = resolved.resolve()?;
    let echo = toml::to_string(&resolved).map_err(|e| output_error(&out.join(output::CONFIG_RESOLVED), e))?;

    std::fs::create_dir_all(out).map_err(|e| output_error(out, e))?;

    let outcome = simulate(&scenario)?;
    let primary = outcome.primary();
    write_file(out, output::BEAMPATTERN, |w| output::write_beampattern(w, primary))?;
    write_file(out, output::CONVERGENCE, |w| output::write_convergence(w, primary))?;
    write_file(out, output::PD_SUMMARY, |w| {
        output::write_pd_summary(w, &outcome.scenario, &outcome.rl, &outcome.omni)
    })?;
    write_file(out, output::TRACE, |w| output::write_trace(w, primary))?;
    let path = out.join(output::CONFIG_RESOLVED);
    std::fs::write(&path, echo).map_err(|e| output_error(&path, e))?;
    Ok(outcome)
}
