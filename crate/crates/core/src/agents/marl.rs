use rand::Rng;

use super::{argmax, q_update, GreedyTracker, LearningConfig, Policy, QTable, TrainOptions, TrainingLog, UpdateRecord};
use crate::actionspace::{Action, Environment};
use crate::error::{Error, Result};
use crate::seed::{self, Stream};

/// One Q-table per AP over that AP's sub-actions.
#[derive(Debug, Clone)]
pub struct MarlOutcome {
    pub tables: Vec<QTable>,
    pub log: TrainingLog,
}

impl MarlOutcome {
    /// Sub-action index shared by every agent under the greedy policy.
    pub fn greedy_index(&self, state: usize) -> usize {
        argmax(&summed_row(&self.tables, state))
    }
}

impl Policy for MarlOutcome {
    fn act(&self, env: &Environment) -> Action {
        let k = self.greedy_index(env.state().bin);
        env.actions()
            .compose(&vec![k; self.tables.len()])
            .expect("sub-action index within range")
    }
}

fn summed_row(tables: &[QTable], state: usize) -> Vec<f64> {
    let mut sum = vec![0.0; tables[0].actions];
    for t in tables {
        for (acc, v) in sum.iter_mut().zip(t.row(state)) {
            *acc += v;
        }
    }
    sum
}

/// Per-AP sub-actions for one step. Each agent explores independently with
/// probability `epsilon`; otherwise it takes the argmax of the summed rows.
pub fn marl_joint_action<R: Rng + ?Sized>(
    tables: &[QTable],
    state: usize,
    epsilon: f64,
    rng: &mut R,
) -> Result<Vec<usize>> {
    if tables.is_empty() || tables.iter().any(|t| t.actions != tables[0].actions) {
        return Err(Error::Domain("agent rows must be nonempty and of equal length".into()));
    }
    let greedy = argmax(&summed_row(tables, state));
    Ok(tables
        .iter()
        .map(|t| {
            if rng.random::<f64>() < epsilon {
                rng.random_range(0..t.actions)
            } else {
                greedy
            }
        })
        .collect())
}

/// Backs up each agent's own entry with the shared reward. Returns
/// `(q_old, max_next, q_new)` per agent.
pub fn marl_update(
    tables: &mut [QTable],
    state: usize,
    sub_actions: &[usize],
    reward: f64,
    next: Option<usize>,
    alpha: f64,
    discount: f64,
) -> Vec<(f64, f64, f64)> {
    tables
        .iter_mut()
        .zip(sub_actions)
        .map(|(t, &k)| {
            let max_next = next.map_or(0.0, |n| t.max(n));
            let q_old = t.get(state, k);
            let q_new = q_update(q_old, reward, max_next, alpha, discount);
            t.set(state, k, q_new);
            (q_old, max_next, q_new)
        })
        .collect()
}

pub fn train_marl(env: &mut Environment, cfg: &LearningConfig, opts: TrainOptions) -> Result<MarlOutcome> {
    super::check_setup(env, cfg, opts)?;
    let mut rng = seed::rng(env.seed(), Stream::Agents, &[]);
    let k = env.actions().agent_action_count();
    let agents = env.actions().ap_count();
    let mut tables: Vec<QTable> = (0..agents)
        .map(|_| QTable::random(env.state_count(), k, &mut rng))
        .collect();
    let greedy_action = |tables: &[QTable], env: &Environment, b: usize| {
        let g = argmax(&summed_row(tables, b));
        env.actions().compose(&vec![g; agents]).expect("sub-action index within range")
    };
    let mut log = TrainingLog::default();
    let mut tracker = opts
        .track_greedy
        .then(|| GreedyTracker::new(env, |b| greedy_action(&tables, env, b)));

    for episode in 0..cfg.episodes {
        let epsilon = cfg.epsilon(episode);
        let alpha = cfg.alpha(episode);
        let mut state = env.reset();
        let mut total = 0.0;
        let mut step = 0;
        loop {
            let s = state.bin;
            let subs = marl_joint_action(&tables, s, epsilon, &mut rng)?;
            let action = env.actions().compose(&subs)?;
            let out = env.step_fast(action)?;
            let r = out.score.reward;
            total += r;
            let next = (!out.done).then_some(out.next.bin);
            let backups = marl_update(&mut tables, s, &subs, r, next, alpha, cfg.discount);
            if let Some(t) = tracker.as_mut() {
                t.update(env, s, greedy_action(&tables, env, s));
            }
            if opts.record_updates {
                for (agent, (q_old, max_next, q_new)) in backups.into_iter().enumerate() {
                    log.updates.push(UpdateRecord {
                        episode,
                        step,
                        agent,
                        state: s,
                        action: action.0,
                        reward: r,
                        epsilon,
                        alpha,
                        q_old,
                        max_next,
                        q_new,
                    });
                }
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
    Ok(MarlOutcome { tables, log })
}
