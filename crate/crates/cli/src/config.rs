//! TOML scenario files.
//!
//! Every field is optional and defaults to study case 1. Unknown keys are
//! rejected. A target is placed either by `bin` (zero-based grid index) or
//! by `angle_deg` (snapped to the nearest bin); an omitted `to` means "until
//! the last step".
//!
//! `agent.epsilon` is the probability of taking the greedy action, not of
//! exploring.

use std::path::{Path, PathBuf};

use clap::ValueEnum;
use rlbeam::array_signal::{AngleGrid, ArrayConfig};
use rlbeam::detector::{NoiseModel, ThresholdConfig};
use rlbeam::rl_agent::{AgentConfig, RewardKind, UpdateRule};
use rlbeam::sim_engine::{study_case_2, BaselineMode, Scenario, TargetSpec};
use serde::{Deserialize, Serialize};

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Read { path: PathBuf, source: std::io::Error },
    #[error("cannot parse {path}: {source}")]
    Parse {
        path: PathBuf,
        source: Box<toml::de::Error>,
    },
    #[error("invalid `{field}`: {reason}")]
    Range { field: String, reason: String },
}

fn range_error(field: impl Into<String>, reason: impl Into<String>) -> ConfigError {
    ConfigError::Range {
        field: field.into(),
        reason: reason.into(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum, Default)]
#[serde(rename_all = "snake_case")]
pub enum Baseline {
    #[default]
    Rl,
    Omni,
}

impl From<Baseline> for BaselineMode {
    fn from(b: Baseline) -> Self {
        match b {
            Baseline::Rl => BaselineMode::Rl,
            Baseline::Omni => BaselineMode::Omni,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum, Default)]
#[serde(rename_all = "snake_case")]
pub enum Reward {
    #[default]
    #[value(name = "pd_tail")]
    PdTail,
    #[value(name = "pdf_literal")]
    PdfLiteral,
}

impl From<Reward> for RewardKind {
    fn from(r: Reward) -> Self {
        match r {
            Reward::PdTail => RewardKind::PdTail,
            Reward::PdfLiteral => RewardKind::PdfLiteral,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Update {
    #[default]
    Rescaled,
    Textbook,
}

impl From<Update> for UpdateRule {
    fn from(u: Update) -> Self {
        match u {
            Update::Rescaled => UpdateRule::Rescaled,
            Update::Textbook => UpdateRule::Textbook,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ArraySection {
    pub n_tx: usize,
    pub n_rx: usize,
}

impl Default for ArraySection {
    fn default() -> Self {
        Self { n_tx: 16, n_rx: 16 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridSection {
    pub min_deg: f64,
    pub max_deg: f64,
    pub bins: usize,
}

impl Default for GridSection {
    fn default() -> Self {
        Self {
            min_deg: -45.0,
            max_deg: 45.0,
            bins: 22,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NoiseSection {
    pub sigma2: f64,
    /// Use `sigma2` directly instead of estimating it from each scan.
    pub known: bool,
}

impl Default for NoiseSection {
    fn default() -> Self {
        Self {
            sigma2: 1.0,
            known: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DetectorSection {
    pub p_fa: f64,
}

impl Default for DetectorSection {
    fn default() -> Self {
        Self { p_fa: 1e-5 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AgentSection {
    pub beta: f64,
    pub gamma: f64,
    pub epsilon: f64,
    pub t_max: usize,
    pub reward: Reward,
    pub update_rule: Update,
}

impl Default for AgentSection {
    fn default() -> Self {
        Self {
            beta: 0.8,
            gamma: 0.1,
            epsilon: 0.5,
            t_max: 10,
            reward: Reward::PdTail,
            update_rule: Update::Rescaled,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TargetEntry {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bin: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub angle_deg: Option<f64>,
    #[serde(default = "default_range_cell")]
    pub range_cell: usize,
    pub snr_db: f64,
    #[serde(default = "default_from")]
    pub from: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub to: Option<usize>,
}

fn default_range_cell() -> usize {
    50
}

fn default_from() -> usize {
    1
}

fn default_runs() -> usize {
    1000
}

fn default_steps() -> usize {
    300
}

fn default_ranges() -> usize {
    100
}

fn default_targets() -> Vec<TargetEntry> {
    [(-30.0, -10.0), (14.0, -8.0), (-6.0, -6.0), (30.0, -4.0)]
        .into_iter()
        .map(|(deg, snr_db)| TargetEntry {
            bin: None,
            angle_deg: Some(deg),
            range_cell: default_range_cell(),
            snr_db,
            from: 1,
            to: None,
        })
        .collect()
}

/// On-disk scenario description.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_runs")]
    pub runs: usize,
    #[serde(default = "default_steps")]
    pub steps: usize,
    #[serde(default = "default_ranges")]
    pub ranges: usize,
    /// Total transmit power; defaults to `array.n_tx`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p_t: Option<f64>,
    #[serde(default)]
    pub baseline: Baseline,
    #[serde(default)]
    pub array: ArraySection,
    #[serde(default)]
    pub grid: GridSection,
    #[serde(default)]
    pub noise: NoiseSection,
    #[serde(default)]
    pub detector: DetectorSection,
    #[serde(default)]
    pub agent: AgentSection,
    #[serde(default = "default_targets")]
    pub targets: Vec<TargetEntry>,
}

impl Default for ScenarioFile {
    fn default() -> Self {
        Self {
            seed: 0,
            runs: default_runs(),
            steps: default_steps(),
            ranges: default_ranges(),
            p_t: None,
            baseline: Baseline::Rl,
            array: ArraySection::default(),
            grid: GridSection::default(),
            noise: NoiseSection::default(),
            detector: DetectorSection::default(),
            agent: AgentSection::default(),
            targets: default_targets(),
        }
    }
}

/// Command-line values that replace file values when present.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Overrides {
    pub runs: Option<usize>,
    pub seed: Option<u64>,
    pub steps: Option<usize>,
    pub baseline: Option<Baseline>,
    pub reward: Option<Reward>,
}

impl ScenarioFile {
    /// Built-in scenario by name.
    pub fn builtin(name: &str) -> Option<Self> {
        match name {
            "case1" => Some(Self::default()),
            "case2" => {
                let s = study_case_2();
                Some(Self {
                    steps: s.n_steps,
                    targets: target_entries(&s.targets),
                    ..Self::default()
                })
            }
            _ => None,
        }
    }

    pub fn parse(text: &str, path: &Path) -> Result<Self, ConfigError> {
        toml::from_str(text).map_err(|e| ConfigError::Parse {
            path: path.to_path_buf(),
            source: Box::new(e),
        })
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|e| ConfigError::Read {
            path: path.to_path_buf(),
            source: e,
        })?;
        Self::parse(&text, path)
    }

    pub fn apply(&mut self, o: &Overrides) {
        if let Some(v) = o.runs {
            self.runs = v;
        }
        if let Some(v) = o.seed {
            self.seed = v;
        }
        if let Some(v) = o.steps {
            self.steps = v;
        }
        if let Some(v) = o.baseline {
            self.baseline = v;
        }
        if let Some(v) = o.reward {
            self.agent.reward = v;
        }
    }

    /// The same scenario with every default spelled out: targets by bin with
    /// closed windows, power explicit. Reparsing it yields an identical
    /// scenario.
    pub fn explicit(&self) -> Result<Self, ConfigError> {
        let scenario = self.resolve()?;
        Ok(Self {
            p_t: Some(scenario.p_t),
            targets: target_entries(&scenario.targets),
            ..self.clone()
        })
    }

    /// Checks every field and builds the scenario.
    pub fn resolve(&self) -> Result<Scenario, ConfigError> {
        positive_count("runs", self.runs)?;
        positive_count("steps", self.steps)?;
        positive_count("ranges", self.ranges)?;
        positive_count("array.n_tx", self.array.n_tx)?;
        positive_count("array.n_rx", self.array.n_rx)?;
        if self.grid.bins < 2 {
            return Err(range_error(
                "grid.bins",
                format!("must be at least 2, got {}", self.grid.bins),
            ));
        }
        for (field, v) in [("grid.min_deg", self.grid.min_deg), ("grid.max_deg", self.grid.max_deg)] {
            if !(v.is_finite() && v.abs() < 90.0) {
                return Err(range_error(field, format!("must lie in (-90, 90), got {v}")));
            }
        }
        if self.grid.min_deg >= self.grid.max_deg {
            return Err(range_error("grid.max_deg", "must exceed grid.min_deg"));
        }
        if !(self.noise.sigma2.is_finite() && self.noise.sigma2 > 0.0) {
            return Err(range_error(
                "noise.sigma2",
                format!("must be positive, got {}", self.noise.sigma2),
            ));
        }
        let p_fa = self.detector.p_fa;
        if !(p_fa > 0.0 && p_fa < 1.0) {
            return Err(range_error("detector.p_fa", format!("must lie in (0, 1), got {p_fa}")));
        }
        let a = &self.agent;
        if !(a.beta > 0.0 && a.beta < 1.0) {
            return Err(range_error("agent.beta", format!("must lie in (0, 1), got {}", a.beta)));
        }
        if !(a.gamma > 0.0 && a.gamma <= 1.0) {
            return Err(range_error(
                "agent.gamma",
                format!("must lie in (0, 1], got {}", a.gamma),
            ));
        }
        if !(0.0..=1.0).contains(&a.epsilon) {
            return Err(range_error(
                "agent.epsilon",
                format!("must lie in [0, 1], got {}", a.epsilon),
            ));
        }
        let widest = self.grid.bins.min(self.array.n_tx);
        if a.t_max == 0 || a.t_max > widest {
            return Err(range_error(
                "agent.t_max",
                format!(
                    "must lie in 1..={widest} (grid bins and transmit elements), got {}",
                    a.t_max
                ),
            ));
        }
        let p_t = self.p_t.unwrap_or(self.array.n_tx as f64);
        if !(p_t.is_finite() && p_t > 0.0) {
            return Err(range_error("p_t", format!("must be positive, got {p_t}")));
        }

        let grid = AngleGrid::from_degrees(self.grid.min_deg, self.grid.max_deg, self.grid.bins)
            .map_err(|e| range_error("grid", e.to_string()))?;
        let targets = self
            .targets
            .iter()
            .enumerate()
            .map(|(i, t)| self.resolve_target(i, t, &grid))
            .collect::<Result<Vec<_>, _>>()?;

        let scenario = Scenario {
            array: ArrayConfig::new(self.array.n_tx, self.array.n_rx)
                .map_err(|e| range_error("array", e.to_string()))?,
            grid,
            n_ranges: self.ranges,
            targets,
            n_steps: self.steps,
            noise: NoiseModel::new(self.noise.sigma2, self.noise.known)
                .map_err(|e| range_error("noise.sigma2", e.to_string()))?,
            threshold: ThresholdConfig::from_pfa(p_fa).map_err(|e| range_error("detector.p_fa", e.to_string()))?,
            agent: AgentConfig {
                beta: a.beta,
                gamma: a.gamma,
                epsilon: a.epsilon,
                t_max: a.t_max,
                reward_kind: a.reward.into(),
                update_rule: a.update_rule.into(),
            },
            p_t,
            baseline_mode: self.baseline.into(),
            n_runs: self.runs,
            seed: self.seed,
        };
        scenario.validate().map_err(|e| range_error("targets", e.to_string()))?;
        Ok(scenario)
    }

    fn resolve_target(&self, i: usize, t: &TargetEntry, grid: &AngleGrid) -> Result<TargetSpec, ConfigError> {
        let field = |name: &str| format!("targets[{i}].{name}");
        let angle_bin = match (t.bin, t.angle_deg) {
            (Some(b), None) if b < grid.n_bins() => b,
            (Some(b), None) => {
                return Err(range_error(
                    field("bin"),
                    format!("must lie in 0..{}, got {b}", grid.n_bins()),
                ));
            }
            (None, Some(deg)) if deg.is_finite() && deg.abs() < 90.0 => grid.nearest_bin(deg.to_radians()),
            (None, Some(deg)) => {
                return Err(range_error(
                    field("angle_deg"),
                    format!("must lie in (-90, 90), got {deg}"),
                ));
            }
            _ => return Err(range_error(field("bin"), "give exactly one of `bin` and `angle_deg`")),
        };
        if t.range_cell == 0 || t.range_cell > self.ranges {
            return Err(range_error(
                field("range_cell"),
                format!("must lie in 1..={}, got {}", self.ranges, t.range_cell),
            ));
        }
        if !t.snr_db.is_finite() {
            return Err(range_error(field("snr_db"), "must be finite"));
        }
        let to = t.to.unwrap_or(self.steps);
        if t.from == 0 || t.from > to {
            return Err(range_error(
                field("from"),
                format!("window {}..={to} is empty or starts before step 1", t.from),
            ));
        }
        Ok(TargetSpec {
            angle_bin,
            range_cell: t.range_cell,
            snr_db: t.snr_db,
            active_from: t.from,
            active_to: to,
        })
    }
}

fn target_entries(targets: &[TargetSpec]) -> Vec<TargetEntry> {
    targets
        .iter()
        .map(|t| TargetEntry {
            bin: Some(t.angle_bin),
            angle_deg: None,
            range_cell: t.range_cell,
            snr_db: t.snr_db,
            from: t.active_from,
            to: Some(t.active_to),
        })
        .collect()
}

fn positive_count(field: &str, v: usize) -> Result<(), ConfigError> {
    if v == 0 {
        return Err(range_error(field, "must be at least 1"));
    }
    Ok(())
}
