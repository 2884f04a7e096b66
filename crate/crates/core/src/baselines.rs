//! Comparison anchors: the exhaustive genie search and two fixed power rules.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::actionspace::{Action, Environment, LinkState};
use crate::agents::Policy;
use crate::error::{Error, Result};
use crate::par::{self, Parallelism};
use crate::phy::PowerAllocation;
use crate::seed::{self, Stream};
use crate::units::dbm_to_mw;

/// Level multiset of the random-power rule.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum RandomLevels {
    /// {5, 5, 15} dBm: 5 dBm with probability 2/3.
    #[default]
    Verbatim,
    /// {5, 10, 15} dBm.
    Corrected,
}

impl RandomLevels {
    pub fn dbm(self) -> [f64; 3] {
        match self {
            RandomLevels::Verbatim => [5.0, 5.0, 15.0],
            RandomLevels::Corrected => [5.0, 10.0, 15.0],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BaselineConfig {
    pub random_levels: RandomLevels,
    /// Monte Carlo draws per state for the genie under stochastic fading.
    pub genie_samples: usize,
}

impl Default for BaselineConfig {
    fn default() -> Self {
        Self {
            random_levels: RandomLevels::Verbatim,
            genie_samples: 32,
        }
    }
}

/// Best feasible action on one link, lowest index on ties.
pub fn genie_on_link(env: &Environment, link: &LinkState, mode: Parallelism) -> Result<(Action, f64)> {
    let set = env.actions();
    let (col, r) = par::argmax_range(set.len(), mode, |c| env.score_on_link(link, set.action(c)).reward)
        .ok_or_else(|| Error::Config("empty feasible action set".into()))?;
    Ok((set.action(col), r))
}

/// Genie optimum at `bin`. Frozen fading maximizes the exact reward;
/// stochastic fading maximizes the mean over `samples` channel draws.
pub fn genie_optimal(env: &Environment, bin: usize, samples: usize, mode: Parallelism) -> Result<(Action, f64)> {
    if env.is_frozen() {
        return genie_on_link(env, env.link_at(bin), mode);
    }
    if samples == 0 {
        return Err(Error::Config("genie needs at least one channel sample".into()));
    }
    let links = env.sampled_links(bin, samples)?;
    let set = env.actions();
    let (col, r) = par::argmax_range(set.len(), mode, |c| {
        let a = set.action(c);
        links.iter().map(|l| env.score_on_link(l, a).reward).sum::<f64>() / samples as f64
    })
    .ok_or_else(|| Error::Config("empty feasible action set".into()))?;
    Ok((set.action(col), r))
}

/// Per-state outcome of a fixed policy over one traversal.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PolicyResult {
    /// Grid action per state; `None` when the powers are off the grid.
    pub actions: Vec<Option<Action>>,
    pub rewards: Vec<f64>,
    pub avg_per_vu_reward: f64,
}

impl PolicyResult {
    fn new(actions: Vec<Option<Action>>, rewards: Vec<f64>, vu_count: usize) -> Self {
        let avg = rewards.iter().sum::<f64>() / (rewards.len() * vu_count) as f64;
        Self {
            actions,
            rewards,
            avg_per_vu_reward: avg,
        }
    }
}

/// Genie optimum of every state.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GenieTable {
    pub actions: Vec<Action>,
    pub rewards: Vec<f64>,
}

impl GenieTable {
    pub fn build(env: &Environment, samples: usize, mode: Parallelism) -> Result<Self> {
        let best = (0..env.state_count())
            .map(|b| genie_optimal(env, b, samples, mode))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            actions: best.iter().map(|b| b.0).collect(),
            rewards: best.iter().map(|b| b.1).collect(),
        })
    }

    pub fn total(&self) -> f64 {
        self.rewards.iter().sum()
    }

    pub fn result(&self, vu_count: usize) -> PolicyResult {
        PolicyResult::new(
            self.actions.iter().map(|&a| Some(a)).collect(),
            self.rewards.clone(),
            vu_count,
        )
    }
}

impl Policy for GenieTable {
    fn act(&self, env: &Environment) -> Action {
        self.actions[env.state().bin]
    }
}

/// A rule that picks transmit powers directly, possibly off the action grid.
pub trait PowerPolicy {
    fn powers(&mut self, env: &Environment) -> PowerAllocation;
}

/// Each AP independently draws one level from the configured multiset and
/// sends it to every covered vehicle.
#[derive(Debug, Clone)]
pub struct RandomPower {
    levels_mw: [f64; 3],
    rng: ChaCha8Rng,
}

impl RandomPower {
    pub fn new(levels: RandomLevels, seed: u64) -> Self {
        Self {
            levels_mw: levels.dbm().map(dbm_to_mw),
            rng: seed::rng(seed, Stream::Baseline, &[]),
        }
    }
}

impl PowerPolicy for RandomPower {
    fn powers(&mut self, env: &Environment) -> PowerAllocation {
        let per_ap: Vec<f64> = (0..env.actions().ap_count())
            .map(|_| self.levels_mw[self.rng.random_range(0..3)])
            .collect();
        PowerAllocation::per_ap(&per_ap, env.vu_count())
    }
}

/// Every AP splits its budget evenly (in mW) across all vehicles.
#[derive(Debug, Clone, Copy, Default)]
pub struct EqualPower;

impl PowerPolicy for EqualPower {
    fn powers(&mut self, env: &Environment) -> PowerAllocation {
        let u = env.vu_count();
        let per_ap: Vec<f64> = env.params().p_max_mw.iter().map(|p| p / u as f64).collect();
        PowerAllocation::per_ap(&per_ap, u)
    }
}

/// Any grid policy can drive the power interface.
pub struct GridPolicy<'a, P: Policy + ?Sized>(pub &'a P);

impl<P: Policy + ?Sized> PowerPolicy for GridPolicy<'_, P> {
    fn powers(&mut self, env: &Environment) -> PowerAllocation {
        env.actions()
            .powers(self.0.act(env))
            .expect("policy returns an in-range action")
    }
}

/// Runs one episode of `policy` from a reset and records the explicit-route
/// reward of every state.
pub fn traverse(env: &mut Environment, policy: &mut dyn PowerPolicy) -> Result<PolicyResult> {
    env.reset();
    let mut actions = Vec::new();
    let mut rewards = Vec::new();
    loop {
        let p = policy.powers(env);
        actions.push(env.actions().find(&p));
        let step = env.step_powers(&p)?;
        rewards.push(step.reward());
        if step.done {
            break;
        }
    }
    Ok(PolicyResult::new(actions, rewards, env.vu_count()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::actionspace::Granularity;
    use crate::channel::FadingMode;
    use crate::harness::ExperimentConfig;
    use crate::phy::check_feasible;
    use crate::units::mw_to_dbm;
    use rand::seq::SliceRandom;

    fn env_of(cfg: &ExperimentConfig, seed: u64) -> Environment {
        Environment::new(&cfg.scenario, &cfg.channel, &cfg.phy, seed).unwrap()
    }

    #[test]
    fn lone_vehicle_gets_full_power_from_both_aps() {
        let mut cfg = ExperimentConfig::small();
        cfg.scenario.vu_count = 1;
        cfg.scenario.actions.power_levels_dbm = vec![5.0, 20.0];
        cfg.phy.gamma_min_db = crate::phy::PerItem::Uniform(-30.0);
        cfg.scenario.aps.coverage_radius = 1_000.0;
        let env = env_of(&cfg, 2);
        let top = env.actions().encode(&[Some(1), Some(1)]).unwrap();
        for b in 0..env.state_count() {
            assert_eq!(genie_optimal(&env, b, 1, Parallelism::Sequential).unwrap().0, top);
        }
    }

    #[test]
    fn genie_dominates_every_action() {
        let env = env_of(&ExperimentConfig::small(), 4);
        for b in 0..env.state_count() {
            let (_, best) = genie_optimal(&env, b, 1, Parallelism::Sequential).unwrap();
            for c in 0..env.actions().len() {
                assert!(env.score_at(b, env.actions().action(c)).reward <= best);
            }
        }
    }

    #[test]
    fn genie_ignores_enumeration_order_at_full_scale() {
        let mut cfg = ExperimentConfig::default();
        cfg.scenario.actions.granularity = Granularity::PerPair;
        let env = env_of(&cfg, 1);
        assert_eq!(env.actions().len(), 262_144);
        let bin = 40;
        let (action, best) = genie_optimal(&env, bin, 1, Parallelism::Parallel).unwrap();
        let mut order: Vec<usize> = (0..env.actions().len()).collect();
        order.shuffle(&mut seed::rng(11, Stream::Baseline, &[]));
        let mut top = (usize::MAX, f64::NEG_INFINITY);
        for c in order {
            let r = env.score_at(bin, env.actions().action(c)).reward;
            if r > top.1 || (r == top.1 && c < top.0) {
                top = (c, r);
            }
        }
        assert_eq!(best, top.1);
        assert_eq!(action, env.actions().action(top.0));
    }

    #[test]
    fn sequential_and_parallel_genie_agree() {
        let env = env_of(&ExperimentConfig::default(), 9);
        let a = GenieTable::build(&env, 1, Parallelism::Sequential).unwrap();
        let b = GenieTable::build(&env, 1, Parallelism::Parallel).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn stochastic_genie_maximizes_the_sample_mean() {
        let mut cfg = ExperimentConfig::small();
        cfg.channel.fading_mode = FadingMode::Stochastic;
        let env = env_of(&cfg, 6);
        let links = env.sampled_links(3, 8).unwrap();
        let mean = |c: usize| {
            links.iter().map(|l| env.score_on_link(l, env.actions().action(c)).reward).sum::<f64>() / 8.0
        };
        let (action, best) = genie_optimal(&env, 3, 8, Parallelism::Sequential).unwrap();
        assert_eq!(best, mean(env.actions().column(action).unwrap()));
        assert!((0..env.actions().len()).all(|c| mean(c) <= best));
        assert!(genie_optimal(&env, 3, 0, Parallelism::Sequential).is_err());
    }

    #[test]
    fn verbatim_random_levels_follow_the_multiset() {
        let env = env_of(&ExperimentConfig::default(), 1);
        let mut p = RandomPower::new(RandomLevels::Verbatim, 3);
        let n = 100_000 / 3 + 1;
        let (mut five, mut fifteen, mut total) = (0usize, 0usize, 0usize);
        for _ in 0..n {
            let alloc = p.powers(&env);
            for j in 0..alloc.ap_count {
                let dbm = mw_to_dbm(alloc.get(j, 0));
                assert!((0..alloc.vu_count).all(|i| alloc.get(j, i) == alloc.get(j, 0)));
                total += 1;
                if (dbm - 5.0).abs() < 1e-9 {
                    five += 1;
                } else if (dbm - 15.0).abs() < 1e-9 {
                    fifteen += 1;
                }
            }
        }
        assert_eq!(five + fifteen, total);
        assert!((five as f64 / total as f64 - 2.0 / 3.0).abs() < 0.01);
        assert!((fifteen as f64 / total as f64 - 1.0 / 3.0).abs() < 0.01);
    }

    #[test]
    fn corrected_random_levels_include_ten() {
        let env = env_of(&ExperimentConfig::default(), 1);
        let mut p = RandomPower::new(RandomLevels::Corrected, 3);
        let seen_ten = (0..300).any(|_| {
            let a = p.powers(&env);
            (0..a.ap_count).any(|j| (mw_to_dbm(a.get(j, 0)) - 10.0).abs() < 1e-9)
        });
        assert!(seen_ten);
    }

    #[test]
    fn random_policy_repeats_under_a_seed() {
        let env = env_of(&ExperimentConfig::default(), 1);
        let draw = |s| {
            let mut p = RandomPower::new(RandomLevels::Verbatim, s);
            (0..50).map(|_| p.powers(&env).mw).collect::<Vec<_>>()
        };
        assert_eq!(draw(7), draw(7));
        assert_ne!(draw(7), draw(8));
    }

    #[test]
    fn equal_power_splits_the_budget_linearly() {
        let env = env_of(&ExperimentConfig::default(), 1);
        let alloc = EqualPower.powers(&env);
        assert!((alloc.get(0, 0) - 105.41).abs() < 0.01);
        assert!((mw_to_dbm(alloc.get(2, 1)) - 20.23).abs() < 0.005);
        for j in 0..3 {
            assert!((alloc.ap_total(j) - env.params().p_max_mw[j]).abs() < 1e-9);
        }
        for b in 0..env.state_count() {
            assert!(check_feasible(&alloc.masked(&env.link_at(b).coverage), env.params(), &env.link_at(b).coverage));
        }

        let mut cfg = ExperimentConfig::default();
        cfg.scenario.vu_count = 1;
        let env = env_of(&cfg, 1);
        assert_eq!(EqualPower.powers(&env).get(1, 0), env.params().p_max_mw[1]);
    }

    #[test]
    fn traverse_visits_every_state_once() {
        let mut env = env_of(&ExperimentConfig::default(), 2);
        let res = traverse(&mut env, &mut EqualPower).unwrap();
        assert_eq!(res.rewards.len(), env.state_count());
        assert!(res.actions.iter().all(Option::is_none));
        let table = GenieTable::build(&env, 1, Parallelism::Parallel).unwrap();
        let genie = traverse(&mut env, &mut GridPolicy(&table)).unwrap();
        assert_eq!(genie.actions, table.actions.iter().map(|&a| Some(a)).collect::<Vec<_>>());
        for (g, t) in genie.rewards.iter().zip(&table.rewards) {
            assert!((g - t).abs() <= 1e-9 * t.max(1.0));
        }
        // equal power sits just above the top grid level, so only the
        // aggregate is ordered
        assert!(genie.avg_per_vu_reward >= res.avg_per_vu_reward);
    }
}
