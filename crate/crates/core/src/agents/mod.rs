//! Tabular Q-learning solvers.
//!
//! * [`train_sarl`]: one agent over the whole joint action space.
//! * [`train_marl`]: one agent per AP; the exploit branch takes the argmax of
//!   the summed per-agent rows and every agent learns from the shared reward.
//! * [`train_sarl_marl`]: the joint action space split into `N` contiguous
//!   blocks, one independent learner per block, with a central register that
//!   keeps the best action observed in each state.
//!
//! Every trainer draws its randomness from streams derived from the run
//! seed, so a fixed seed reproduces the tables bit for bit.

mod distributed;
mod marl;
mod sarl;

pub use distributed::{central_update, partition_actions, train_sarl_marl, CentralRegister, SarlMarlOutcome};
pub use marl::{marl_joint_action, marl_update, train_marl, MarlOutcome};
pub use sarl::{train_sarl, SarlOutcome};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::actionspace::{Action, Environment};
use crate::error::{Error, FieldError, Result};

/// A trained policy queried at the environment's current state.
pub trait Policy {
    fn act(&self, env: &Environment) -> Action;
}

fn check_setup(env: &Environment, cfg: &LearningConfig, opts: TrainOptions) -> Result<()> {
    let mut errs = Vec::new();
    cfg.validate("learning", &mut errs);
    if !errs.is_empty() {
        return Err(Error::Validation(errs));
    }
    if opts.track_greedy && !env.is_frozen() {
        return Err(Error::Config("greedy tracking needs frozen fading".into()));
    }
    Ok(())
}

/// First episode whose trailing `window`-episode mean of `greedy` reaches
/// `target`. Episodes before the first full window use the mean so far.
pub fn episodes_to_threshold(greedy: &[f64], target: f64, window: usize) -> Option<usize> {
    let window = window.max(1);
    let mut sum = 0.0;
    for (e, &g) in greedy.iter().enumerate() {
        sum += g;
        if e >= window {
            sum -= greedy[e - window];
        }
        let n = (e + 1).min(window);
        if sum / n as f64 >= target {
            return Some(e + 1);
        }
    }
    None
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LearningConfig {
    /// Discount factor in [0, 1).
    pub discount: f64,
    pub alpha_start: f64,
    pub alpha_end: f64,
    pub epsilon_start: f64,
    pub epsilon_end: f64,
    pub episodes: usize,
    /// Learner count for the partitioned solver; must divide the action count.
    pub agents: usize,
}

impl Default for LearningConfig {
    fn default() -> Self {
        Self {
            discount: 0.8,
            alpha_start: 1.0,
            alpha_end: 0.01,
            epsilon_start: 1.0,
            epsilon_end: 0.01,
            episodes: 100_000,
            agents: 4,
        }
    }
}

impl LearningConfig {
    pub fn validate(&self, prefix: &str, errs: &mut Vec<FieldError>) {
        let f = |n: &str| format!("{prefix}.{n}");
        if !(0.0..1.0).contains(&self.discount) {
            errs.push(FieldError::new(f("discount"), "must be in [0, 1)"));
        }
        for (name, v) in [
            ("alpha_start", self.alpha_start),
            ("alpha_end", self.alpha_end),
            ("epsilon_start", self.epsilon_start),
            ("epsilon_end", self.epsilon_end),
        ] {
            if !(0.0..=1.0).contains(&v) {
                errs.push(FieldError::new(f(name), "must be in [0, 1]"));
            }
        }
        if self.alpha_start < self.alpha_end {
            errs.push(FieldError::new(f("alpha_end"), "must not exceed alpha_start"));
        }
        if self.epsilon_start < self.epsilon_end {
            errs.push(FieldError::new(f("epsilon_end"), "must not exceed epsilon_start"));
        }
        if self.episodes == 0 {
            errs.push(FieldError::new(f("episodes"), "must be >= 1"));
        }
        if self.agents == 0 {
            errs.push(FieldError::new(f("agents"), "must be >= 1"));
        }
    }

    pub fn epsilon(&self, episode: usize) -> f64 {
        linear_schedule(episode, self.episodes, self.epsilon_start, self.epsilon_end)
    }

    pub fn alpha(&self, episode: usize) -> f64 {
        linear_schedule(episode, self.episodes, self.alpha_start, self.alpha_end)
    }
}

/// Linear interpolation from `start` at episode 0 to `end` at the last episode.
pub fn linear_schedule(episode: usize, total: usize, start: f64, end: f64) -> f64 {
    if total <= 1 {
        return start;
    }
    start + (end - start) * episode as f64 / (total - 1) as f64
}

/// One Q-learning backup: `(1 - alpha) q + alpha (r + discount * max_next)`.
#[inline]
pub fn q_update(q: f64, reward: f64, max_next: f64, alpha: f64, discount: f64) -> f64 {
    (1.0 - alpha) * q + alpha * (reward + discount * max_next)
}

/// Index of the largest entry, lowest index on ties.
pub fn argmax(row: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in row.iter().enumerate().skip(1) {
        if v > row[best] {
            best = i;
        }
    }
    best
}

/// Uniform random index with probability `epsilon`, otherwise the argmax.
pub fn epsilon_greedy<R: Rng + ?Sized>(row: &[f64], epsilon: f64, rng: &mut R) -> usize {
    if rng.random::<f64>() < epsilon {
        rng.random_range(0..row.len())
    } else {
        argmax(row)
    }
}

/// Dense state-by-action value table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QTable {
    pub states: usize,
    pub actions: usize,
    pub values: Vec<f64>,
}

impl QTable {
    /// Entries drawn uniformly from [0, 1).
    pub fn random<R: Rng + ?Sized>(states: usize, actions: usize, rng: &mut R) -> Self {
        Self {
            states,
            actions,
            values: (0..states * actions).map(|_| rng.random::<f64>()).collect(),
        }
    }

    #[inline]
    pub fn row(&self, state: usize) -> &[f64] {
        &self.values[state * self.actions..(state + 1) * self.actions]
    }

    #[inline]
    pub fn get(&self, state: usize, action: usize) -> f64 {
        self.values[state * self.actions + action]
    }

    #[inline]
    pub fn set(&mut self, state: usize, action: usize, v: f64) {
        self.values[state * self.actions + action] = v;
    }

    pub fn max(&self, state: usize) -> f64 {
        self.row(state).iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn argmax(&self, state: usize) -> usize {
        argmax(self.row(state))
    }
}

/// One value backup, enough to replay it in closed form.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UpdateRecord {
    pub episode: usize,
    pub step: usize,
    pub agent: usize,
    pub state: usize,
    /// Raw joint action index.
    pub action: usize,
    pub reward: f64,
    pub epsilon: f64,
    pub alpha: f64,
    pub q_old: f64,
    pub max_next: f64,
    pub q_new: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct TrainOptions {
    /// Keep every backup in [`TrainingLog::updates`].
    pub record_updates: bool,
    /// Track the greedy policy's full-traversal reward after every episode
    /// (frozen fading only).
    pub track_greedy: bool,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct TrainingLog {
    pub updates: Vec<UpdateRecord>,
    /// Sum of step rewards of each training episode.
    pub episode_rewards: Vec<f64>,
    /// Greedy-policy reward summed over every state, one entry per episode.
    pub greedy_rewards: Vec<f64>,
}

/// Keeps the frozen-channel reward of the current greedy action per state so
/// the greedy policy can be scored after every episode cheaply.
pub(crate) struct GreedyTracker {
    action: Vec<Action>,
    reward: Vec<f64>,
}

impl GreedyTracker {
    pub(crate) fn new(env: &Environment, policy: impl Fn(usize) -> Action) -> Self {
        let action: Vec<Action> = (0..env.state_count()).map(policy).collect();
        let reward = action
            .iter()
            .enumerate()
            .map(|(b, &a)| env.score_at(b, a).reward)
            .collect();
        Self { action, reward }
    }

    pub(crate) fn update(&mut self, env: &Environment, bin: usize, action: Action) {
        if self.action[bin] != action {
            self.action[bin] = action;
            self.reward[bin] = env.score_at(bin, action).reward;
        }
    }

    pub(crate) fn total(&self) -> f64 {
        self.reward.iter().sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn q_update_examples() {
        assert_eq!(q_update(10.0, 4.0, 5.0, 0.5, 0.8), 9.0);
        assert_eq!(q_update(3.25, 100.0, 7.0, 0.0, 0.8), 3.25);
        assert_eq!(q_update(3.25, 4.5, 7.0, 1.0, 0.0), 4.5);
    }

    #[test]
    fn greedy_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert_eq!(epsilon_greedy(&[1.0, 5.0, 3.0], 0.0, &mut rng), 1);
        assert_eq!(epsilon_greedy(&[7.0, 7.0], 0.0, &mut rng), 0);
    }

    #[test]
    fn full_exploration_is_uniform() {
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        let n = 100_000;
        let mut counts = [0usize; 3];
        for _ in 0..n {
            counts[epsilon_greedy(&[0.0, 10.0, 0.0], 1.0, &mut rng)] += 1;
        }
        for c in counts {
            assert!((c as f64 / n as f64 - 1.0 / 3.0).abs() < 0.01, "{counts:?}");
        }
    }

    #[test]
    fn threshold_examples() {
        assert_eq!(episodes_to_threshold(&[0.0, 0.0, 4.0, 4.0, 4.0], 3.9, 2), Some(4));
        assert_eq!(episodes_to_threshold(&[5.0], 3.9, 100), Some(1));
        assert_eq!(episodes_to_threshold(&[1.0, 2.0], 3.9, 2), None);
    }

    #[test]
    fn schedule_examples() {
        assert_eq!(linear_schedule(0, 100, 1.0, 0.01), 1.0);
        assert!((linear_schedule(99, 100, 1.0, 0.01) - 0.01).abs() < 1e-15);
        assert!((linear_schedule(50, 101, 1.0, 0.01) - 0.505).abs() < 1e-12);
        assert_eq!(linear_schedule(0, 1, 0.7, 0.01), 0.7);
    }

    #[test]
    fn config_validation_lists_fields() {
        let cfg = LearningConfig {
            discount: 1.0,
            epsilon_end: 2.0,
            episodes: 0,
            ..LearningConfig::default()
        };
        let mut errs = Vec::new();
        cfg.validate("learning", &mut errs);
        let names: Vec<_> = errs.iter().map(|e| e.field.as_str()).collect();
        assert!(names.contains(&"learning.discount"));
        assert!(names.contains(&"learning.epsilon_end"));
        assert!(names.contains(&"learning.episodes"));
    }

    proptest! {
        #[test]
        fn register_reward_never_drops(rewards in proptest::collection::vec(0.0f64..50.0, 1..60)) {
            let mut reg = CentralRegister { action: vec![Action(0)], reward: vec![None] };
            let mut last = f64::NEG_INFINITY;
            for (k, r) in rewards.into_iter().enumerate() {
                central_update(&mut reg, 0, Action(k), r);
                let now = reg.reward[0].unwrap();
                prop_assert!(now >= last);
                prop_assert!(now >= r);
                last = now;
            }
        }

        #[test]
        fn partition_is_disjoint_and_covering(size in 1usize..40, agents in 1usize..8) {
            let count = size * agents;
            let blocks = partition_actions(count, agents).unwrap();
            let mut seen = vec![0u8; count];
            for b in &blocks {
                prop_assert_eq!(b.len(), size);
                for i in b.clone() {
                    seen[i] += 1;
                }
            }
            prop_assert!(seen.iter().all(|&c| c == 1));
        }

        #[test]
        fn argmax_ignores_constant_shift(row in proptest::collection::vec(-100.0f64..100.0, 1..40), c in 0.0f64..1e3) {
            let shifted: Vec<f64> = row.iter().map(|v| v + c).collect();
            // shifting can merge values that differ by less than an ulp; only
            // compare when the winner is strictly separated
            let best = argmax(&row);
            let gap = row.iter().enumerate().filter(|&(i, _)| i != best).map(|(_, v)| row[best] - v).fold(f64::INFINITY, f64::min);
            prop_assume!(gap > 1e-9 * (1.0 + c));
            prop_assert_eq!(argmax(&shifted), best);
        }
    }
}
