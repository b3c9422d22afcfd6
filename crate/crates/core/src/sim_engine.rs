//! Scenarios, the closed sense-detect-learn-beamform loop, and Monte Carlo
//! aggregation.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::array_signal::{
    normalized_beampattern_db, synthesize_scan_into, AngleGrid, ArrayConfig, ScanSnapshots, SceneTarget,
};
use crate::beamformer::{omni_weights, BeamDesigner};
use crate::detector::{scan, NoiseModel, ThresholdConfig};
use crate::rl_agent::{
    compute_state, convergence_index, reward, sarsa_update, select_action, AgentConfig, QTable, RewardKind, Transition,
    UpdateRule,
};
use crate::{Error, Result};

/// Steps excluded from the post-burn-in detection averages.
pub const BURN_IN_STEPS: usize = 50;

/// How the transmit weights evolve over an episode.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum BaselineMode {
    /// Weights follow the agent's actions.
    #[default]
    Rl,
    /// Weights stay omnidirectional; the agent still learns but never acts.
    Omni,
}

impl BaselineMode {
    pub fn as_str(&self) -> &'static str {
        match self {
            BaselineMode::Rl => "rl",
            BaselineMode::Omni => "omni",
        }
    }
}

impl std::str::FromStr for BaselineMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "rl" => Ok(BaselineMode::Rl),
            "omni" => Ok(BaselineMode::Omni),
            other => Err(Error::invalid("baseline_mode", format!("unknown mode `{other}`"))),
        }
    }
}

/// A target occupying one angle-range cell over an inclusive step window.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TargetSpec {
    /// Zero-based angle bin.
    pub angle_bin: usize,
    /// One-based range cell.
    pub range_cell: usize,
    pub snr_db: f64,
    /// First active step (one-based, inclusive).
    pub active_from: usize,
    /// Last active step (inclusive).
    pub active_to: usize,
}

impl TargetSpec {
    pub fn is_active(&self, step: usize) -> bool {
        (self.active_from..=self.active_to).contains(&step)
    }

    pub fn snr_linear(&self) -> f64 {
        10f64.powf(self.snr_db / 10.0)
    }

    fn scene(&self) -> SceneTarget {
        SceneTarget {
            bin: self.angle_bin,
            range: self.range_cell - 1,
            snr: self.snr_linear(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub array: ArrayConfig,
    pub grid: AngleGrid,
    pub n_ranges: usize,
    pub targets: Vec<TargetSpec>,
    pub n_steps: usize,
    pub noise: NoiseModel,
    pub threshold: ThresholdConfig,
    pub agent: AgentConfig,
    pub p_t: f64,
    pub baseline_mode: BaselineMode,
    pub n_runs: usize,
    pub seed: u64,
}

impl Scenario {
    pub fn validate(&self) -> Result<()> {
        if self.n_steps == 0 {
            return Err(Error::invalid("n_steps", "must be at least 1"));
        }
        if self.n_ranges == 0 {
            return Err(Error::invalid("n_ranges", "must be at least 1"));
        }
        if self.n_runs == 0 {
            return Err(Error::invalid("n_runs", "must be at least 1"));
        }
        if !(self.p_t.is_finite() && self.p_t > 0.0) {
            return Err(Error::invalid("p_t", format!("must be positive, got {}", self.p_t)));
        }
        self.agent.validate()?;
        let widest = self.grid.n_bins().min(self.array.n_tx);
        if self.agent.t_max > widest {
            return Err(Error::invalid(
                "t_max",
                format!("must not exceed min(n_bins, n_tx) = {widest}, got {}", self.agent.t_max),
            ));
        }
        for (i, t) in self.targets.iter().enumerate() {
            if t.angle_bin >= self.grid.n_bins() {
                return Err(Error::invalid(
                    "targets",
                    format!("target {i}: angle bin {} off the grid", t.angle_bin),
                ));
            }
            if t.range_cell == 0 || t.range_cell > self.n_ranges {
                return Err(Error::invalid(
                    "targets",
                    format!("target {i}: range cell {} outside 1..={}", t.range_cell, self.n_ranges),
                ));
            }
            if t.active_from == 0 || t.active_from > t.active_to {
                return Err(Error::invalid(
                    "targets",
                    format!(
                        "target {i}: empty or invalid window {}..={}",
                        t.active_from, t.active_to
                    ),
                ));
            }
            if !t.snr_db.is_finite() {
                return Err(Error::invalid("targets", format!("target {i}: snr must be finite")));
            }
            for (j, o) in self.targets[..i].iter().enumerate() {
                let same_cell = o.angle_bin == t.angle_bin && o.range_cell == t.range_cell;
                let overlap = o.active_from <= t.active_to && t.active_from <= o.active_to;
                if same_cell && overlap {
                    return Err(Error::invalid(
                        "targets",
                        format!("targets {j} and {i} share a cell while both active"),
                    ));
                }
            }
        }
        Ok(())
    }

    /// Indices into `targets` of the specs active at `step`.
    pub fn active_targets(&self, step: usize) -> Vec<usize> {
        (0..self.targets.len())
            .filter(|&i| self.targets[i].is_active(step))
            .collect()
    }

    /// Distinct angle bins occupied at `step`, ascending.
    pub fn active_bins(&self, step: usize) -> Vec<usize> {
        let mut bins: Vec<usize> = self
            .targets
            .iter()
            .filter(|t| t.is_active(step))
            .map(|t| t.angle_bin)
            .collect();
        bins.sort_unstable();
        bins.dedup();
        bins
    }

    /// Steps at which the active target set differs from the previous step.
    pub fn change_points(&self) -> Vec<usize> {
        (2..=self.n_steps)
            .filter(|&k| self.active_bins(k) != self.active_bins(k - 1))
            .collect()
    }

    /// Generator of Monte Carlo run `run`.
    pub fn run_rng(&self, run: usize) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(run as u64);
        rng
    }
}

const CASE_GRID_DEG: (f64, f64) = (-45.0, 45.0);
const CASE_BINS: usize = 22;
const CASE_RANGES: usize = 100;
const CASE_RANGE_CELL: usize = 50;
const CASE_ELEMENTS: usize = 16;
const CASE_PFA: f64 = 1e-5;
const CASE_1_STEPS: usize = 300;
const CASE_2_STEPS: usize = 600;

fn case_base(n_steps: usize) -> Scenario {
    let array = ArrayConfig::new(CASE_ELEMENTS, CASE_ELEMENTS).expect("valid array");
    Scenario {
        array,
        grid: AngleGrid::from_degrees(CASE_GRID_DEG.0, CASE_GRID_DEG.1, CASE_BINS).expect("valid grid"),
        n_ranges: CASE_RANGES,
        targets: Vec::new(),
        n_steps,
        noise: NoiseModel::known(1.0).expect("positive noise"),
        threshold: ThresholdConfig::from_pfa(CASE_PFA).expect("valid pfa"),
        agent: AgentConfig {
            beta: 0.8,
            gamma: 0.1,
            epsilon: 0.5,
            t_max: 10,
            reward_kind: RewardKind::PdTail,
            update_rule: UpdateRule::Rescaled,
        },
        p_t: CASE_ELEMENTS as f64,
        baseline_mode: BaselineMode::Rl,
        n_runs: 1000,
        seed: 0,
    }
}

/// Four static targets: (-30 deg, -10 dB), (14 deg, -8 dB), (-6 deg, -6 dB),
/// (30 deg, -4 dB), each snapped to the nearest bin of a 22-bin grid over
/// [-45, 45] deg.
pub fn study_case_1() -> Scenario {
    let mut s = case_base(CASE_1_STEPS);
    let k = s.n_steps;
    s.targets = [(-30.0, -10.0), (14.0, -8.0), (-6.0, -6.0), (30.0, -4.0)]
        .iter()
        .map(|&(deg, snr_db): &(f64, f64)| TargetSpec {
            angle_bin: s.grid.nearest_bin(deg.to_radians()),
            range_cell: CASE_RANGE_CELL,
            snr_db,
            active_from: 1,
            active_to: k,
        })
        .collect();
    s
}

/// Five-phase schedule over 600 steps, every target at -8 dB.
pub fn study_case_2() -> Scenario {
    let mut s = case_base(CASE_2_STEPS);
    let phases: [(usize, usize, &[f64]); 5] = [
        (1, 100, &[-30.0, 14.0]),
        (101, 200, &[]),
        (201, 350, &[-30.0, -6.0, 4.0]),
        (351, 450, &[-30.0, 4.0]),
        (451, 600, &[-30.0, -6.0, 14.0, 29.0]),
    ];
    let grid = s.grid.clone();
    s.targets = phases
        .iter()
        .flat_map(|&(from, to, angles)| {
            let grid = &grid;
            angles.iter().map(move |deg| TargetSpec {
                angle_bin: grid.nearest_bin(deg.to_radians()),
                range_cell: CASE_RANGE_CELL,
                snr_db: -8.0,
                active_from: from,
                active_to: to,
            })
        })
        .collect();
    s
}

/// Per-step traces of one episode. Entry `k - 1` of every trace belongs to
/// step `k`: the beampattern of the weights transmitted at `k`, and the
/// state, reward and action derived from the scan of step `k` (that action
/// shapes the beam of step `k + 1`).
#[derive(Debug, Clone, PartialEq)]
pub struct RunMetrics {
    pub states: Vec<usize>,
    pub actions: Vec<usize>,
    pub rewards: Vec<f64>,
    pub xi: Vec<f64>,
    /// Normalized beampattern `D(theta)` in dB over the grid.
    pub beampattern_db: Vec<Vec<f64>>,
    /// `detections[k - 1][t]`: whether target `t` crossed the threshold in
    /// its own cell at step `k`; `None` while it is inactive.
    pub detections: Vec<Vec<Option<bool>>>,
    /// Action drawn before the first step.
    pub initial_action: usize,
}

impl RunMetrics {
    fn with_capacity(k: usize, initial_action: usize) -> Self {
        Self {
            states: Vec::with_capacity(k),
            actions: Vec::with_capacity(k),
            rewards: Vec::with_capacity(k),
            xi: Vec::with_capacity(k),
            beampattern_db: Vec::with_capacity(k),
            detections: Vec::with_capacity(k),
            initial_action,
        }
    }

    pub fn n_steps(&self) -> usize {
        self.states.len()
    }

    /// `(hits, active steps)` of target `t` over steps `k > after`.
    pub fn detection_count(&self, target: usize, after: usize) -> (usize, usize) {
        self.detections
            .iter()
            .skip(after)
            .filter_map(|row| row[target])
            .fold((0, 0), |(h, n), d| (h + d as usize, n + 1))
    }
}

/// Runs one closed-loop episode. Step order: transmit `C_k`, synthesise and
/// scan, derive `s_{k+1}` and `r_{k+1}`, draw `a_{k+1}`, update Q with
/// `(s_k, a_k, r_{k+1}, s_{k+1}, a_{k+1})`, then design `C_{k+1}` from
/// `a_{k+1}` (rl mode) or keep the omni weights.
pub fn run_episode<R: Rng + ?Sized>(scenario: &Scenario, rng: &mut R) -> Result<RunMetrics> {
    scenario.validate()?;
    let Scenario {
        array,
        grid,
        agent,
        threshold,
        noise,
        ..
    } = scenario;
    let lambda_bar = threshold.lambda_bar;
    let omni = omni_weights(array, scenario.p_t)?;
    let mut weights = omni.clone();
    let mut designer = BeamDesigner::new(*array, scenario.p_t);
    let mut q = QTable::zeros(agent.t_max);
    let mut state = 0;
    let mut action = rng.random_range(1..=agent.t_max);
    let mut buffer = ScanSnapshots::new(grid.n_bins(), scenario.n_ranges, array.snapshot_len(), 0);
    let mut metrics = RunMetrics::with_capacity(scenario.n_steps, action);

    for k in 1..=scenario.n_steps {
        let at_step = |e: Error| Error::AtStep {
            step: k,
            source: Box::new(e),
        };
        let mut step = || -> Result<()> {
            metrics
                .beampattern_db
                .push(normalized_beampattern_db(&weights.covariance()?, grid)?);
            let scene: Vec<SceneTarget> = scenario
                .targets
                .iter()
                .filter(|t| t.is_active(k))
                .map(TargetSpec::scene)
                .collect();
            synthesize_scan_into(&mut buffer, k, &scene, &weights, array, grid, noise.sigma2, rng)?;
            let map = scan(&buffer, &weights, noise, grid, array)?;
            metrics.detections.push(
                scenario
                    .targets
                    .iter()
                    .map(|t| {
                        t.is_active(k)
                            .then(|| map.get(t.angle_bin, t.range_cell - 1) > lambda_bar)
                    })
                    .collect(),
            );

            let next_state = compute_state(&map, lambda_bar, agent.t_max);
            let r = reward(&map, lambda_bar, agent.reward_kind)?;
            let next_action = select_action(&q, next_state, agent.epsilon, rng);
            let previous = q.clone();
            sarsa_update(
                &mut q,
                &Transition {
                    state,
                    action,
                    reward: r,
                    next_state,
                    next_action,
                },
                agent,
            );
            metrics.xi.push(convergence_index(&previous, &q)?);
            metrics.states.push(next_state);
            metrics.actions.push(next_action);
            metrics.rewards.push(r);

            weights = match scenario.baseline_mode {
                BaselineMode::Rl => designer.plan(&map, next_action, grid.angles())?.weights,
                BaselineMode::Omni => omni.clone(),
            };
            state = next_state;
            action = next_action;
            Ok(())
        };
        step().map_err(at_step)?;
    }
    Ok(metrics)
}

/// Detection probability of one target.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TargetPd {
    pub hits: usize,
    pub trials: usize,
    /// Hits and trials over steps after [`BURN_IN_STEPS`].
    pub hits_after_burn_in: usize,
    pub trials_after_burn_in: usize,
}

impl TargetPd {
    pub fn pd(&self) -> f64 {
        ratio(self.hits, self.trials)
    }

    pub fn pd_after_burn_in(&self) -> f64 {
        ratio(self.hits_after_burn_in, self.trials_after_burn_in)
    }
}

fn ratio(a: usize, b: usize) -> f64 {
    if b == 0 {
        f64::NAN
    } else {
        a as f64 / b as f64
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MonteCarloReport {
    /// One entry per `TargetSpec`, in scenario order.
    pub targets: Vec<TargetPd>,
    /// `mean_beampattern_db[k - 1][l]`: run-average of `D(theta_l)` at step `k`.
    pub mean_beampattern_db: Vec<Vec<f64>>,
    pub mean_xi: Vec<f64>,
    pub runs: Vec<RunMetrics>,
}

/// Runs `scenario.n_runs` independent episodes, run `m` seeded by
/// [`Scenario::run_rng`], and averages them.
pub fn monte_carlo(scenario: &Scenario) -> Result<MonteCarloReport> {
    scenario.validate()?;
    let runs: Vec<RunMetrics> = (0..scenario.n_runs)
        .into_par_iter()
        .map(|m| {
            run_episode(scenario, &mut scenario.run_rng(m)).map_err(|e| Error::AtRun {
                run: m,
                source: Box::new(e),
            })
        })
        .collect::<Result<_>>()?;
    Ok(aggregate(&runs, scenario.targets.len()))
}

/// Reduction of per-run metrics into averages.
pub fn aggregate(runs: &[RunMetrics], n_targets: usize) -> MonteCarloReport {
    let n = runs.len() as f64;
    let k = runs.first().map_or(0, RunMetrics::n_steps);
    let n_bins = runs.first().and_then(|r| r.beampattern_db.first()).map_or(0, Vec::len);
    let mut mean_bp = vec![vec![0.0; n_bins]; k];
    let mut mean_xi = vec![0.0; k];
    for run in runs {
        for (acc, row) in mean_bp.iter_mut().zip(&run.beampattern_db) {
            for (a, v) in acc.iter_mut().zip(row) {
                *a += v / n;
            }
        }
        for (acc, x) in mean_xi.iter_mut().zip(&run.xi) {
            *acc += x / n;
        }
    }
    let targets = (0..n_targets)
        .map(|t| {
            let mut pd = TargetPd {
                hits: 0,
                trials: 0,
                hits_after_burn_in: 0,
                trials_after_burn_in: 0,
            };
            for run in runs {
                let (h, c) = run.detection_count(t, 0);
                let (hb, cb) = run.detection_count(t, BURN_IN_STEPS);
                pd.hits += h;
                pd.trials += c;
                pd.hits_after_burn_in += hb;
                pd.trials_after_burn_in += cb;
            }
            pd
        })
        .collect();
    MonteCarloReport {
        targets,
        mean_beampattern_db: mean_bp,
        mean_xi,
        runs: runs.to_vec(),
    }
}
