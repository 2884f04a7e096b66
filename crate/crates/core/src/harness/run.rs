use serde::Serialize;

use super::config::{ExperimentConfig, Solver};
use crate::actionspace::{ActionSpaceDescriptor, Environment};
use crate::agents::{
    episodes_to_threshold, train_marl, train_sarl, train_sarl_marl, QTable, TrainOptions, TrainingLog,
};
use crate::baselines::{EqualPower, GenieTable, GridPolicy, PowerPolicy, RandomPower};
use crate::error::{Error, Result};
use crate::par::{self, Parallelism};
use crate::units::linear_to_db;

/// Trailing window of the episodes-to-threshold metric.
pub const THRESHOLD_WINDOW: usize = 100;
/// Fraction of the genie reward the greedy policy must reach.
pub const THRESHOLD_FRACTION: f64 = 0.95;

/// One evaluated step.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EpisodeRow {
    pub episode: usize,
    pub step: usize,
    pub state: usize,
    /// Raw grid action; `None` for off-grid powers.
    pub action: Option<usize>,
    pub reward: f64,
    /// Set when the step earned nothing: infeasible, or some SINR below its floor.
    pub violation: bool,
    pub sinr_db: Vec<f64>,
    pub rate: Vec<f64>,
    pub serving_aps: Vec<usize>,
    pub backhaul: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct EpisodeLog {
    pub vu_count: usize,
    pub rows: Vec<EpisodeRow>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SummaryMetrics {
    pub steps: usize,
    pub avg_per_vu_reward: f64,
    /// Mean reward per step, i.e. the weighted sum rate.
    pub wsr: f64,
    pub per_vu_rate_mean: Vec<f64>,
    pub success_probability: f64,
    pub episodes_to_threshold: Option<usize>,
}

impl SummaryMetrics {
    /// Everything except `episodes_to_threshold` comes from the log rows.
    pub fn from_log(log: &EpisodeLog) -> Result<Self> {
        Self::from_logs([log])
    }

    pub fn from_logs<'a>(logs: impl IntoIterator<Item = &'a EpisodeLog>) -> Result<Self> {
        let logs: Vec<&EpisodeLog> = logs.into_iter().collect();
        let u = logs.first().map_or(0, |l| l.vu_count);
        let rows: Vec<&EpisodeRow> = logs.iter().flat_map(|l| &l.rows).collect();
        if rows.is_empty() || u == 0 {
            return Err(Error::EmptyLog("no steps to summarize".into()));
        }
        let n = rows.len() as f64;
        let total: f64 = rows.iter().map(|r| r.reward).sum();
        let per_vu_rate_mean = (0..u).map(|i| rows.iter().map(|r| r.rate[i]).sum::<f64>() / n).collect();
        let successes = rows.iter().filter(|r| !r.violation).count();
        Ok(Self {
            steps: rows.len(),
            avg_per_vu_reward: total / (n * u as f64),
            wsr: total / n,
            per_vu_rate_mean,
            success_probability: successes as f64 / n,
            episodes_to_threshold: None,
        })
    }
}

/// Learned tables of a trained solver.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum LearnedTables {
    Sarl(QTable),
    Marl(Vec<QTable>),
    SarlMarl(Vec<QTable>),
}

#[derive(Debug, Clone)]
pub struct Training {
    pub log: TrainingLog,
    pub tables: LearnedTables,
    /// Genie reward summed over all states, the reference of the threshold metric.
    pub genie_total: Option<f64>,
}

/// Everything produced by one (config, seed) run.
#[derive(Debug, Clone)]
pub struct RunOutput {
    pub solver: Solver,
    pub seed: u64,
    pub config_hash: String,
    pub descriptor: ActionSpaceDescriptor,
    pub log: EpisodeLog,
    pub summary: SummaryMetrics,
    pub training: Option<Training>,
}

/// Plays `episodes` greedy episodes and logs every step through the explicit
/// beam route.
pub fn evaluate_policy(env: &mut Environment, policy: &mut dyn PowerPolicy, episodes: usize) -> Result<EpisodeLog> {
    let mut log = EpisodeLog {
        vu_count: env.vu_count(),
        rows: Vec::new(),
    };
    for episode in 0..episodes {
        env.reset();
        let mut step = 0;
        loop {
            let powers = policy.powers(env);
            let action = env.actions().find(&powers).map(|a| a.0);
            let out = env.step_powers(&powers)?;
            let m = &out.evaluation.metrics;
            log.rows.push(EpisodeRow {
                episode,
                step,
                state: out.state.bin,
                action,
                reward: out.reward(),
                violation: !out.evaluation.success,
                sinr_db: m.sinr.iter().map(|&s| linear_to_db(s)).collect(),
                rate: m.rate.clone(),
                serving_aps: m.serving_aps.clone(),
                backhaul: m.backhaul.clone(),
            });
            step += 1;
            if out.done {
                break;
            }
        }
    }
    Ok(log)
}

/// Trains `solver` when it learns, then evaluates it greedily.
pub fn run_seed(cfg: &ExperimentConfig, solver: Solver, seed: u64) -> Result<RunOutput> {
    cfg.validate()?;
    let mut env = Environment::new(&cfg.scenario, &cfg.channel, &cfg.phy, seed)?;
    let track = env.is_frozen();
    let opts = TrainOptions {
        record_updates: false,
        track_greedy: track,
    };
    let genie_total = |env: &Environment| -> Result<Option<f64>> {
        if !track {
            return Ok(None);
        }
        Ok(Some(GenieTable::build(env, cfg.baselines.genie_samples, Parallelism::Parallel)?.total()))
    };

    let (log, training) = match solver {
        Solver::Sarl => {
            let out = train_sarl(&mut env, &cfg.learning, opts)?;
            let log = evaluate_policy(&mut env, &mut GridPolicy(&out), cfg.test_episodes)?;
            let t = Training {
                genie_total: genie_total(&env)?,
                log: out.log,
                tables: LearnedTables::Sarl(out.q),
            };
            (log, Some(t))
        }
        Solver::Marl => {
            let out = train_marl(&mut env, &cfg.learning, opts)?;
            let log = evaluate_policy(&mut env, &mut GridPolicy(&out), cfg.test_episodes)?;
            let t = Training {
                genie_total: genie_total(&env)?,
                log: out.log,
                tables: LearnedTables::Marl(out.tables),
            };
            (log, Some(t))
        }
        Solver::SarlMarl => {
            let out = train_sarl_marl(&mut env, &cfg.learning, opts)?;
            let log = evaluate_policy(&mut env, &mut GridPolicy(&out), cfg.test_episodes)?;
            let t = Training {
                genie_total: genie_total(&env)?,
                log: out.log,
                tables: LearnedTables::SarlMarl(out.tables),
            };
            (log, Some(t))
        }
        Solver::Genie => {
            let table = GenieTable::build(&env, cfg.baselines.genie_samples, Parallelism::Parallel)?;
            (evaluate_policy(&mut env, &mut GridPolicy(&table), cfg.test_episodes)?, None)
        }
        Solver::Random => {
            let mut p = RandomPower::new(cfg.baselines.random_levels, seed);
            (evaluate_policy(&mut env, &mut p, cfg.test_episodes)?, None)
        }
        Solver::Equal => (evaluate_policy(&mut env, &mut EqualPower, cfg.test_episodes)?, None),
    };

    let mut summary = SummaryMetrics::from_log(&log)?;
    if let Some(t) = &training {
        if let Some(g) = t.genie_total {
            summary.episodes_to_threshold =
                episodes_to_threshold(&t.log.greedy_rewards, THRESHOLD_FRACTION * g, THRESHOLD_WINDOW);
        }
    }
    Ok(RunOutput {
        solver,
        seed,
        config_hash: cfg.hash(),
        descriptor: env.actions().descriptor(),
        log,
        summary,
        training,
    })
}

/// Runs every configured seed, fanned out over the worker pool. Outputs come
/// back in seed-list order.
pub fn run(cfg: &ExperimentConfig, solver: Solver, mode: Parallelism) -> Result<Vec<RunOutput>> {
    cfg.validate()?;
    par::map_slice(&cfg.seeds, mode, |&s| run_seed(cfg, solver, s))
        .into_iter()
        .collect()
}

/// Pools the logs of several runs into one summary. The pooled
/// `episodes_to_threshold` is the slowest seed's, and `None` unless every
/// seed reached the threshold.
pub fn aggregate(runs: &[RunOutput]) -> Result<SummaryMetrics> {
    let mut pooled = SummaryMetrics::from_logs(runs.iter().map(|r| &r.log))?;
    pooled.episodes_to_threshold = runs
        .iter()
        .map(|r| r.summary.episodes_to_threshold)
        .collect::<Option<Vec<_>>>()
        .and_then(|v| v.into_iter().max());
    Ok(pooled)
}
