//! The agent side of the loop: state and reward extracted from a detection
//! map, epsilon-greedy action choice and the SARSA table update.
//!
//! States are the number of angle bins with at least one threshold crossing,
//! `0..=T_max`; action `i` in `1..=T_max` means "focus on the `i` strongest
//! bins".
//!
//! Note the epsilon convention: `epsilon` is the probability of taking the
//! greedy action, the opposite of the usual reading.

use rand::Rng;

use crate::detector::{noncentral_chi2_2_pdf, noncentral_chi2_2_tail, DetectionMap};
use crate::{Error, Result};

/// Per-cell reward shaping.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum RewardKind {
    /// Estimated detection probability `Pr{chi2_2(delta_hat) > lambda_bar}`.
    #[default]
    PdTail,
    /// Density of `chi2_2(delta_hat)` evaluated at `delta_hat`.
    PdfLiteral,
}

impl RewardKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            RewardKind::PdTail => "pd_tail",
            RewardKind::PdfLiteral => "pdf_literal",
        }
    }
}

impl std::str::FromStr for RewardKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "pd_tail" => Ok(RewardKind::PdTail),
            "pdf_literal" => Ok(RewardKind::PdfLiteral),
            other => Err(Error::invalid("reward_kind", format!("unknown kind `{other}`"))),
        }
    }
}

/// Which temporal-difference rule updates the table.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum UpdateRule {
    /// `Q <- beta Q + (1 - beta) [r + gamma Q' - Q]`.
    #[default]
    Rescaled,
    /// `Q <- Q + (1 - beta) [r + gamma Q' - Q]`.
    Textbook,
}

impl UpdateRule {
    pub fn as_str(&self) -> &'static str {
        match self {
            UpdateRule::Rescaled => "rescaled",
            UpdateRule::Textbook => "textbook",
        }
    }
}

impl std::str::FromStr for UpdateRule {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "rescaled" => Ok(UpdateRule::Rescaled),
            "textbook" => Ok(UpdateRule::Textbook),
            other => Err(Error::invalid("update_rule", format!("unknown rule `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AgentConfig {
    /// Convergence-speed weight, in `(0, 1)`.
    pub beta: f64,
    /// Discount, in `(0, 1]`.
    pub gamma: f64,
    /// Probability of the greedy action, in `[0, 1]`.
    pub epsilon: f64,
    pub t_max: usize,
    pub reward_kind: RewardKind,
    pub update_rule: UpdateRule,
}

impl AgentConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.beta > 0.0 && self.beta < 1.0) {
            return Err(Error::invalid("beta", format!("must lie in (0, 1), got {}", self.beta)));
        }
        if !(self.gamma > 0.0 && self.gamma <= 1.0) {
            return Err(Error::invalid(
                "gamma",
                format!("must lie in (0, 1], got {}", self.gamma),
            ));
        }
        if !(0.0..=1.0).contains(&self.epsilon) {
            return Err(Error::invalid(
                "epsilon",
                format!("must lie in [0, 1], got {}", self.epsilon),
            ));
        }
        if self.t_max == 0 {
            return Err(Error::invalid("t_max", "must be at least 1"));
        }
        Ok(())
    }
}

/// State-action values, rows `s = 0..=T_max`, columns `a = 1..=T_max`.
#[derive(Debug, Clone, PartialEq)]
pub struct QTable {
    t_max: usize,
    values: Vec<f64>,
}

impl QTable {
    pub fn zeros(t_max: usize) -> Self {
        Self {
            t_max,
            values: vec![0.0; (t_max + 1) * t_max],
        }
    }

    pub fn t_max(&self) -> usize {
        self.t_max
    }

    pub fn n_states(&self) -> usize {
        self.t_max + 1
    }

    pub fn n_actions(&self) -> usize {
        self.t_max
    }

    fn index(&self, state: usize, action: usize) -> usize {
        assert!(state <= self.t_max, "state {state} out of range");
        assert!((1..=self.t_max).contains(&action), "action {action} out of range");
        state * self.t_max + (action - 1)
    }

    pub fn get(&self, state: usize, action: usize) -> f64 {
        self.values[self.index(state, action)]
    }

    pub fn set(&mut self, state: usize, action: usize, value: f64) {
        let i = self.index(state, action);
        self.values[i] = value;
    }

    pub fn row(&self, state: usize) -> &[f64] {
        &self.values[state * self.t_max..(state + 1) * self.t_max]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Greedy action for `state`, ties to the smallest action index.
    pub fn greedy_action(&self, state: usize) -> usize {
        let row = self.row(state);
        let mut best = 0;
        for (a, v) in row.iter().enumerate() {
            if *v > row[best] {
                best = a;
            }
        }
        best + 1
    }
}

/// One SARSA quintuple.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Transition {
    pub state: usize,
    pub action: usize,
    pub reward: f64,
    pub next_state: usize,
    pub next_action: usize,
}

/// Number of bins with a threshold crossing in at least one range cell,
/// clamped to `t_max`.
pub fn compute_state(map: &DetectionMap, lambda_bar: f64, t_max: usize) -> usize {
    let occupied = (0..map.n_bins())
        .filter(|&l| map.row(l).iter().any(|&v| v > lambda_bar))
        .count();
    occupied.min(t_max)
}

/// Sum over cells with `delta_hat > lambda_bar` of the per-cell reward. The
/// map entries are the GLR statistics, which equal `delta_hat = 2|alpha_hat|^2
/// / sigma^2` exactly.
pub fn reward(map: &DetectionMap, lambda_bar: f64, kind: RewardKind) -> Result<f64> {
    let mut total = 0.0;
    for &delta in map.values().iter().filter(|&&v| v > lambda_bar) {
        total += match kind {
            RewardKind::PdTail => noncentral_chi2_2_tail(lambda_bar, delta)?,
            RewardKind::PdfLiteral => noncentral_chi2_2_pdf(delta, delta)?,
        };
    }
    Ok(total)
}

/// Epsilon-greedy draw: the greedy action with probability `epsilon`,
/// otherwise a uniform pick among the remaining actions.
pub fn select_action<R: Rng + ?Sized>(q: &QTable, state: usize, epsilon: f64, rng: &mut R) -> usize {
    let greedy = q.greedy_action(state);
    let n = q.n_actions();
    if n == 1 || rng.random::<f64>() < epsilon {
        return greedy;
    }
    let pick = rng.random_range(1..n);
    if pick >= greedy {
        pick + 1
    } else {
        pick
    }
}

/// Applies one update to `q` and returns the absolute change of the touched
/// entry.
pub fn sarsa_update(q: &mut QTable, t: &Transition, cfg: &AgentConfig) -> f64 {
    let current = q.get(t.state, t.action);
    let next = q.get(t.next_state, t.next_action);
    let td = t.reward + cfg.gamma * next - current;
    let updated = match cfg.update_rule {
        UpdateRule::Rescaled => cfg.beta * current + (1.0 - cfg.beta) * td,
        UpdateRule::Textbook => current + (1.0 - cfg.beta) * td,
    };
    q.set(t.state, t.action, updated);
    (updated - current).abs()
}

/// `xi = max |Q_curr - Q_prev|` over all entries.
pub fn convergence_index(prev: &QTable, curr: &QTable) -> Result<f64> {
    if prev.t_max != curr.t_max {
        return Err(Error::DimensionMismatch {
            expected: prev.values.len(),
            actual: curr.values.len(),
        });
    }
    Ok(prev
        .values
        .iter()
        .zip(&curr.values)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::detector::threshold_from_pfa;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn default_cfg() -> AgentConfig {
        AgentConfig {
            beta: 0.8,
            gamma: 0.1,
            epsilon: 0.5,
            t_max: 10,
            reward_kind: RewardKind::PdTail,
            update_rule: UpdateRule::Rescaled,
        }
    }

    fn map_with(n_bins: usize, n_ranges: usize, cells: &[(usize, usize, f64)]) -> DetectionMap {
        let mut v = vec![0.0; n_bins * n_ranges];
        for &(l, g, x) in cells {
            v[l * n_ranges + g] = x;
        }
        DetectionMap::new(n_bins, n_ranges, 1, v).unwrap()
    }

    #[test]
    fn state_examples() {
        let lam = 23.0;
        assert_eq!(compute_state(&map_with(22, 100, &[]), lam, 10), 0);
        let m = map_with(22, 100, &[(3, 10, lam + 1.0), (7, 99, lam + 1.0)]);
        assert_eq!(compute_state(&m, lam, 10), 2);
        // two crossings in one bin count once
        let m = map_with(22, 100, &[(3, 10, lam + 1.0), (3, 11, lam + 5.0)]);
        assert_eq!(compute_state(&m, lam, 10), 1);
    }

    #[test]
    fn state_clamps_to_t_max() {
        let cells: Vec<_> = (0..15).map(|l| (l, 0, 100.0)).collect();
        assert_eq!(compute_state(&map_with(22, 3, &cells), 10.0, 10), 10);
    }

    #[test]
    fn state_monotone_in_threshold() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let v: Vec<f64> = (0..22 * 50).map(|_| rng.random::<f64>() * 40.0).collect();
        let m = DetectionMap::new(22, 50, 1, v).unwrap();
        let mut prev = usize::MAX;
        for lam in [0.0, 10.0, 20.0, 30.0, 39.0, 39.99, 41.0] {
            let s = compute_state(&m, lam, 30);
            assert!(s <= prev);
            prev = s;
        }
    }

    #[test]
    fn reward_examples() {
        let lam = threshold_from_pfa(1e-5).unwrap();
        let below = map_with(4, 5, &[(1, 1, lam * 0.99), (2, 2, lam)]);
        assert_eq!(reward(&below, lam, RewardKind::PdTail).unwrap(), 0.0);
        assert_eq!(reward(&below, lam, RewardKind::PdfLiteral).unwrap(), 0.0);

        let one = map_with(4, 5, &[(1, 1, lam + 1e-9)]);
        let r = reward(&one, lam, RewardKind::PdTail).unwrap();
        let expect = noncentral_chi2_2_tail(lam, lam).unwrap();
        assert!((r - expect).abs() < 1e-9);

        let far = map_with(4, 5, &[(0, 0, 1e5), (1, 3, 2e5), (3, 4, 5e4)]);
        let r = reward(&far, lam, RewardKind::PdTail).unwrap();
        assert!((r - 3.0).abs() < 1e-9);
    }

    #[test]
    fn literal_reward_uses_density_at_estimate() {
        let lam = 10.0;
        let m = map_with(2, 2, &[(0, 1, 12.0)]);
        let r = reward(&m, lam, RewardKind::PdfLiteral).unwrap();
        assert!((r - noncentral_chi2_2_pdf(12.0, 12.0).unwrap()).abs() < 1e-15);
    }

    #[test]
    fn greedy_extremes() {
        let mut q = QTable::zeros(10);
        q.set(4, 7, 1.0);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..1000 {
            assert_eq!(select_action(&q, 4, 1.0, &mut rng), 7);
        }
        let n = 100_000;
        let mut counts = [0usize; 11];
        for _ in 0..n {
            counts[select_action(&q, 4, 0.0, &mut rng)] += 1;
        }
        assert_eq!(counts[7], 0);
        let p = 1.0 / 9.0;
        let sd = (n as f64 * p * (1.0 - p)).sqrt();
        for a in (1..=10).filter(|&a| a != 7) {
            assert!(
                (counts[a] as f64 - n as f64 * p).abs() < 3.0 * sd,
                "action {a}: {}",
                counts[a]
            );
        }
    }

    #[test]
    fn epsilon_half_frequencies() {
        let mut q = QTable::zeros(10);
        q.set(2, 3, 0.5);
        q.set(2, 9, 0.2);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let n = 100_000;
        let mut counts = [0usize; 11];
        for _ in 0..n {
            counts[select_action(&q, 2, 0.5, &mut rng)] += 1;
        }
        let check = |count: usize, p: f64| {
            let sd = (n as f64 * p * (1.0 - p)).sqrt();
            assert!((count as f64 - n as f64 * p).abs() < 3.0 * sd, "{count} vs {p}");
        };
        check(counts[3], 0.5);
        for a in (1..=10).filter(|&a| a != 3) {
            check(counts[a], 0.5 / 9.0);
        }
    }

    #[test]
    fn greedy_ties_go_low() {
        let mut q = QTable::zeros(5);
        q.set(1, 2, 3.0);
        q.set(1, 4, 3.0);
        assert_eq!(q.greedy_action(1), 2);
        assert_eq!(QTable::zeros(5).greedy_action(0), 1);
    }

    #[test]
    fn select_action_is_reproducible() {
        let q = QTable::zeros(10);
        let draw = |seed| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            (0..50).map(|_| select_action(&q, 0, 0.5, &mut rng)).collect::<Vec<_>>()
        };
        assert_eq!(draw(42), draw(42));
    }

    #[test]
    fn single_action_table() {
        let q = QTable::zeros(1);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert_eq!(select_action(&q, 0, 0.0, &mut rng), 1);
    }

    #[test]
    fn sarsa_examples() {
        let cfg = default_cfg();
        let mut q = QTable::zeros(10);
        let t = Transition {
            state: 0,
            action: 1,
            reward: 1.0,
            next_state: 0,
            next_action: 2,
        };
        let before = q.clone();
        let change = sarsa_update(&mut q, &t, &cfg);
        assert!((q.get(0, 1) - 0.2).abs() < 1e-15);
        assert!((change - 0.2).abs() < 1e-15);
        for (i, (a, b)) in before.values().iter().zip(q.values()).enumerate() {
            if i != 0 {
                assert_eq!(a, b);
            }
        }

        let mut q = QTable::zeros(10);
        q.set(3, 4, 2.0);
        q.set(5, 6, 1.0);
        let t = Transition {
            state: 3,
            action: 4,
            reward: 0.0,
            next_state: 5,
            next_action: 6,
        };
        sarsa_update(&mut q, &t, &cfg);
        assert!((q.get(3, 4) - 1.22).abs() < 1e-12);
    }

    #[test]
    fn sarsa_fixed_point() {
        // iterate the scalar map x -> beta x + (1 - beta)(r + gamma x - x) to
        // its fixed point independently of the table code
        let cfg = default_cfg();
        let r = 1.7;
        let mut x = 0.0f64;
        loop {
            let nx = cfg.beta * x + (1.0 - cfg.beta) * (r + cfg.gamma * x - x);
            if (nx - x).abs() < 1e-14 {
                x = nx;
                break;
            }
            x = nx;
        }
        let mut q = QTable::zeros(10);
        let t = Transition {
            state: 2,
            action: 2,
            reward: r,
            next_state: 2,
            next_action: 2,
        };
        for _ in 0..500 {
            sarsa_update(&mut q, &t, &cfg);
        }
        assert!((q.get(2, 2) - x).abs() < 1e-10);
    }

    #[test]
    fn textbook_rule() {
        let cfg = AgentConfig {
            update_rule: UpdateRule::Textbook,
            ..default_cfg()
        };
        let mut q = QTable::zeros(3);
        q.set(1, 1, 2.0);
        q.set(2, 2, 1.0);
        let t = Transition {
            state: 1,
            action: 1,
            reward: 0.5,
            next_state: 2,
            next_action: 2,
        };
        sarsa_update(&mut q, &t, &cfg);
        assert!((q.get(1, 1) - (2.0 + 0.2 * (0.5 + 0.1 - 2.0))).abs() < 1e-15);
    }

    #[test]
    fn convergence_index_examples() {
        let a = QTable::zeros(4);
        assert_eq!(convergence_index(&a, &a).unwrap(), 0.0);
        let mut b = a.clone();
        b.set(2, 3, 0.2);
        assert!((convergence_index(&a, &b).unwrap() - 0.2).abs() < 1e-15);
        assert!(convergence_index(&a, &QTable::zeros(5)).is_err());

        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let mut x = QTable::zeros(6);
        let mut y = QTable::zeros(6);
        let mut expect = 0.0f64;
        for s in 0..=6 {
            for act in 1..=6 {
                let (p, c) = (rng.random::<f64>(), rng.random::<f64>());
                x.set(s, act, p);
                y.set(s, act, c);
                expect = expect.max((p - c).abs());
            }
        }
        assert_eq!(convergence_index(&x, &y).unwrap(), expect);
    }

    #[test]
    fn config_validation() {
        assert!(default_cfg().validate().is_ok());
        for bad in [
            AgentConfig {
                beta: 1.0,
                ..default_cfg()
            },
            AgentConfig {
                gamma: 0.0,
                ..default_cfg()
            },
            AgentConfig {
                epsilon: 1.5,
                ..default_cfg()
            },
            AgentConfig {
                t_max: 0,
                ..default_cfg()
            },
        ] {
            assert!(bad.validate().is_err());
        }
    }

    mod props {
        use super::*;
        use proptest::prelude::*;
        use rand::Rng;

        proptest! {
            #[test]
            fn pd_reward_monotone(seed in any::<u64>(), cell in 0usize..60, bump in 0.0f64..50.0) {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                let v: Vec<f64> = (0..60).map(|_| rng.random::<f64>() * 60.0).collect();
                let lam = 23.0;
                let m = DetectionMap::new(6, 10, 1, v.clone()).unwrap();
                let base = reward(&m, lam, RewardKind::PdTail).unwrap();
                let over = v.iter().filter(|&&x| x > lam).count() as f64;
                prop_assert!(base >= 0.0 && base <= over + 1e-12);
                let mut w = v;
                w[cell] += bump;
                let bumped = reward(&DetectionMap::new(6, 10, 1, w).unwrap(), lam, RewardKind::PdTail).unwrap();
                prop_assert!(bumped >= base - 1e-12);
            }

            #[test]
            fn update_touches_one_entry(s in 0usize..=5, a in 1usize..=5, s2 in 0usize..=5, a2 in 1usize..=5, r in -3.0f64..3.0) {
                let mut rng = ChaCha8Rng::seed_from_u64(9);
                let mut q = QTable::zeros(5);
                for st in 0..=5 {
                    for ac in 1..=5 {
                        q.set(st, ac, rng.random::<f64>());
                    }
                }
                let before = q.clone();
                let t = Transition { state: s, action: a, reward: r, next_state: s2, next_action: a2 };
                let change = sarsa_update(&mut q, &t, &default_cfg());
                for st in 0..=5 {
                    for ac in 1..=5 {
                        if (st, ac) != (s, a) {
                            prop_assert_eq!(before.get(st, ac), q.get(st, ac));
                        }
                    }
                }
                prop_assert!((convergence_index(&before, &q).unwrap() - change).abs() < 1e-15);
            }
        }
    }
}
