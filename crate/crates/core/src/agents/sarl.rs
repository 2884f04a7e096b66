use super::{epsilon_greedy, q_update, GreedyTracker, LearningConfig, Policy, QTable, TrainOptions, TrainingLog, UpdateRecord};
use crate::actionspace::{Action, Environment};
use crate::error::Result;
use crate::seed::{self, Stream};

/// Single agent over the masked joint action space.
#[derive(Debug, Clone)]
pub struct SarlOutcome {
    /// Columns index [`crate::actionspace::ActionSet::action`].
    pub q: QTable,
    pub log: TrainingLog,
}

impl Policy for SarlOutcome {
    fn act(&self, env: &Environment) -> Action {
        env.actions().action(self.q.argmax(env.state().bin))
    }
}

pub fn train_sarl(env: &mut Environment, cfg: &LearningConfig, opts: TrainOptions) -> Result<SarlOutcome> {
    super::check_setup(env, cfg, opts)?;
    let mut rng = seed::rng(env.seed(), Stream::Agents, &[]);
    let mut q = QTable::random(env.state_count(), env.actions().len(), &mut rng);
    let mut log = TrainingLog::default();
    let mut tracker = opts
        .track_greedy
        .then(|| GreedyTracker::new(env, |b| env.actions().action(q.argmax(b))));

    for episode in 0..cfg.episodes {
        let epsilon = cfg.epsilon(episode);
        let alpha = cfg.alpha(episode);
        let mut state = env.reset();
        let mut total = 0.0;
        let mut step = 0;
        loop {
            let s = state.bin;
            let col = epsilon_greedy(q.row(s), epsilon, &mut rng);
            let out = env.step_fast(env.actions().action(col))?;
            let r = out.score.reward;
            total += r;
            let max_next = if out.done { 0.0 } else { q.max(out.next.bin) };
            let q_old = q.get(s, col);
            let q_new = q_update(q_old, r, max_next, alpha, cfg.discount);
            q.set(s, col, q_new);
            if let Some(t) = tracker.as_mut() {
                t.update(env, s, env.actions().action(q.argmax(s)));
            }
            if opts.record_updates {
                log.updates.push(UpdateRecord {
                    episode,
                    step,
                    agent: 0,
                    state: s,
                    action: env.actions().action(col).0,
                    reward: r,
                    epsilon,
                    alpha,
                    q_old,
                    max_next,
                    q_new,
                });
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
    Ok(SarlOutcome { q, log })
}
