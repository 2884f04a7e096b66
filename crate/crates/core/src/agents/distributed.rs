use std::ops::Range;

use rand::Rng;

use super::{epsilon_greedy, q_update, GreedyTracker, LearningConfig, Policy, QTable, TrainOptions, TrainingLog, UpdateRecord};
use crate::actionspace::{Action, Environment};
use crate::error::{Error, Result};
use crate::seed::{self, Stream};

/// Splits `count` Q-table columns into `agents` equal contiguous blocks.
pub fn partition_actions(count: usize, agents: usize) -> Result<Vec<Range<usize>>> {
    if agents == 0 || !count.is_multiple_of(agents) {
        return Err(Error::Config(format!(
            "{count} actions cannot be split evenly across {agents} agents"
        )));
    }
    let size = count / agents;
    Ok((0..agents).map(|n| n * size..(n + 1) * size).collect())
}

/// Best action seen so far in each state, with the reward it earned.
#[derive(Debug, Clone, PartialEq)]
pub struct CentralRegister {
    pub action: Vec<Action>,
    pub reward: Vec<Option<f64>>,
}

impl CentralRegister {
    /// Starts every state at a uniformly drawn column with no reward on record.
    pub fn random<R: Rng + ?Sized>(env: &Environment, rng: &mut R) -> Self {
        let n = env.actions().len();
        let action = (0..env.state_count())
            .map(|_| env.actions().action(rng.random_range(0..n)))
            .collect();
        Self {
            action,
            reward: vec![None; env.state_count()],
        }
    }
}

/// Replaces the stored action of `state` when `reward` strictly beats the
/// stored reward. Returns whether it did.
pub fn central_update(register: &mut CentralRegister, state: usize, action: Action, reward: f64) -> bool {
    match register.reward[state] {
        Some(best) if reward <= best => false,
        _ => {
            register.action[state] = action;
            register.reward[state] = Some(reward);
            true
        }
    }
}

/// Block-partitioned learners and the central register.
#[derive(Debug, Clone)]
pub struct SarlMarlOutcome {
    pub blocks: Vec<Range<usize>>,
    /// Table `n` has one column per entry of `blocks[n]`.
    pub tables: Vec<QTable>,
    pub register: CentralRegister,
    pub log: TrainingLog,
}

impl SarlMarlOutcome {
    /// Greedy proposal of each agent at `state`.
    pub fn proposals(&self, env: &Environment, state: usize) -> Vec<Action> {
        self.tables
            .iter()
            .zip(&self.blocks)
            .map(|(t, b)| env.actions().action(b.start + t.argmax(state)))
            .collect()
    }
}

impl Policy for SarlMarlOutcome {
    /// The proposal that scores best on the current link, lowest agent on ties.
    fn act(&self, env: &Environment) -> Action {
        best_proposal(&self.proposals(env, env.state().bin), |a| env.score(a).reward)
    }
}

fn best_proposal(proposals: &[Action], score: impl Fn(Action) -> f64) -> Action {
    let mut best = proposals[0];
    let mut best_r = score(best);
    for &a in &proposals[1..] {
        let r = score(a);
        if r > best_r {
            best = a;
            best_r = r;
        }
    }
    best
}

pub fn train_sarl_marl(env: &mut Environment, cfg: &LearningConfig, opts: TrainOptions) -> Result<SarlMarlOutcome> {
    super::check_setup(env, cfg, opts)?;
    let blocks = partition_actions(env.actions().len(), cfg.agents)?;
    let mut rng = seed::rng(env.seed(), Stream::Agents, &[]);
    let mut tables: Vec<QTable> = blocks
        .iter()
        .map(|b| QTable::random(env.state_count(), b.len(), &mut rng))
        .collect();
    let mut register = CentralRegister::random(env, &mut seed::rng(env.seed(), Stream::Register, &[]));

    let greedy_action = |tables: &[QTable], env: &Environment, b: usize| {
        let proposals: Vec<Action> = tables
            .iter()
            .zip(&blocks)
            .map(|(t, r)| env.actions().action(r.start + t.argmax(b)))
            .collect();
        best_proposal(&proposals, |a| env.score_at(b, a).reward)
    };
    let mut log = TrainingLog::default();
    let mut tracker = opts
        .track_greedy
        .then(|| GreedyTracker::new(env, |b| greedy_action(&tables, env, b)));
    let mut picks = vec![0usize; tables.len()];
    let mut rewards = vec![0.0f64; tables.len()];

    for episode in 0..cfg.episodes {
        let epsilon = cfg.epsilon(episode);
        let alpha = cfg.alpha(episode);
        let mut state = env.reset();
        let mut total = 0.0;
        let mut step = 0;
        loop {
            let s = state.bin;
            if register.reward[s].is_none() {
                register.reward[s] = Some(env.score(register.action[s]).reward);
            }
            for (n, t) in tables.iter().enumerate() {
                let local = epsilon_greedy(t.row(s), epsilon, &mut rng);
                let action = env.actions().action(blocks[n].start + local);
                picks[n] = local;
                rewards[n] = env.score(action).reward;
                central_update(&mut register, s, action, rewards[n]);
            }
            let out = env.step_fast(register.action[s])?;
            total += out.score.reward;
            for (n, t) in tables.iter_mut().enumerate() {
                let max_next = if out.done { 0.0 } else { t.max(out.next.bin) };
                let q_old = t.get(s, picks[n]);
                let q_new = q_update(q_old, rewards[n], max_next, alpha, cfg.discount);
                t.set(s, picks[n], q_new);
                if opts.record_updates {
                    log.updates.push(UpdateRecord {
                        episode,
                        step,
                        agent: n,
                        state: s,
                        action: env.actions().action(blocks[n].start + picks[n]).0,
                        reward: rewards[n],
                        epsilon,
                        alpha,
                        q_old,
                        max_next,
                        q_new,
                    });
                }
            }
            if let Some(t) = tracker.as_mut() {
                t.update(env, s, greedy_action(&tables, env, s));
            }
            step += 1;
            if out.done {
                break;
            }
            state = out.next;
        }
        log.episode_rewards.push(total);
        if let Some(t) = &tracker {
            log.greedy_rewards.push(t.total());
        }
    }
    Ok(SarlMarlOutcome {
        blocks,
        tables,
        register,
        log,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn partition_examples() {
        assert_eq!(partition_actions(64, 4).unwrap(), vec![0..16, 16..32, 32..48, 48..64]);
        assert_eq!(partition_actions(5, 1).unwrap(), vec![0..5]);
        assert!(matches!(partition_actions(64, 3), Err(Error::Config(_))));
        assert!(matches!(partition_actions(64, 0), Err(Error::Config(_))));
    }

    #[test]
    fn register_keeps_strict_improvements() {
        let mut reg = CentralRegister {
            action: vec![Action(3)],
            reward: vec![None],
        };
        assert!(central_update(&mut reg, 0, Action(5), 0.0));
        assert!(!central_update(&mut reg, 0, Action(7), 0.0));
        assert!(central_update(&mut reg, 0, Action(9), 2.5));
        assert!(!central_update(&mut reg, 0, Action(1), 1.0));
        assert_eq!(reg.action[0], Action(9));
        assert_eq!(reg.reward[0], Some(2.5));
    }
}
