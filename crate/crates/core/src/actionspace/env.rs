use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::{build_action_space, state_index, Action, ActionSet, StateIndex};
use crate::channel::{
    draw_channel, draw_channel_fresh, draw_channel_sample, ChannelConfig, ChannelRealization, Coverage,
    FadingMode,
};
use crate::error::{Error, FieldError, Result};
use crate::mobility::{advance, spawn_scenario, Advance, ApLayout, ConvoyStart, DropMode, ScenarioConfig, VehicleState};
use crate::par::{self, Parallelism};
use crate::phy::{
    check_feasible, link_metrics, reward, BeamAssignment, LinkGains, LinkMetrics, PhyConfig, PhyParams,
    PowerAllocation, Score,
};
use crate::seed::{self, Stream};

/// Geometry and radio state of one position bin.
#[derive(Debug, Clone)]
pub struct LinkState {
    pub positions: Vec<[f64; 2]>,
    pub coverage: Coverage,
    pub channel: ChannelRealization,
    pub gains: LinkGains,
}

impl LinkState {
    fn new(positions: Vec<[f64; 2]>, coverage: Coverage, channel: ChannelRealization) -> Self {
        let gains = LinkGains::from_channel(&channel);
        Self {
            positions,
            coverage,
            channel,
            gains,
        }
    }
}

/// Full evaluation of one power allocation through explicit beams.
#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation {
    pub metrics: LinkMetrics,
    pub feasible: bool,
    pub success: bool,
    pub reward: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Step {
    pub state: StateIndex,
    pub evaluation: Evaluation,
    pub next: StateIndex,
    pub done: bool,
}

impl Step {
    pub fn reward(&self) -> f64 {
        self.evaluation.reward
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FastStep {
    pub score: Score,
    pub next: StateIndex,
    pub done: bool,
}

/// The convoy environment: mobility, channel, and phy behind a
/// state/action interface.
///
/// In frozen mode every bin's channel is drawn once at construction and the
/// reward of (state, action) never changes. In stochastic mode every visit
/// to a bin draws a fresh channel.
#[derive(Debug, Clone)]
pub struct Environment {
    scenario: ScenarioConfig,
    channel_config: ChannelConfig,
    params: PhyParams,
    aps: ApLayout,
    lanes: Vec<usize>,
    actions: ActionSet,
    seed: u64,
    bins: Vec<LinkState>,
    vehicles: VehicleState,
    state: StateIndex,
    fresh: Option<LinkState>,
    draws: u64,
    episode_rng: ChaCha8Rng,
}

impl Environment {
    pub fn new(scenario: &ScenarioConfig, channel: &ChannelConfig, phy: &PhyConfig, seed: u64) -> Result<Self> {
        let mut errs = Vec::new();
        scenario.validate("scenario", &mut errs);
        channel.validate("channel", &mut errs);
        phy.validate("phy", scenario.aps.count, scenario.vu_count, &mut errs);
        if !errs.is_empty() {
            return Err(Error::Validation(errs));
        }
        if scenario.drop_mode != DropMode::CommonX {
            return Err(Error::Config(
                "the tabular environment needs the common-x drop mode".into(),
            ));
        }
        let (vehicles, aps) = spawn_scenario(scenario, seed)?;
        let params = phy.params(aps.len(), vehicles.len())?;
        let actions = build_action_space(&scenario.actions, aps.len(), vehicles.len(), &params)?;
        let road = &scenario.road;
        let lanes = vehicles.lane.clone();

        let bins = par::map_range(road.bin_count(), Parallelism::Parallel, |b| {
            let convoy = VehicleState::convoy(lanes.clone(), b as f64 * road.displacement());
            let positions = convoy.positions(road);
            let coverage = Coverage::compute(&positions, &aps);
            draw_channel(&positions, &aps, b as u64, seed, channel)
                .map(|ch| LinkState::new(positions, coverage, ch))
        })
        .into_iter()
        .collect::<Result<Vec<_>>>()?;

        let mut env = Self {
            scenario: scenario.clone(),
            channel_config: channel.clone(),
            params,
            aps,
            lanes,
            actions,
            seed,
            bins,
            state: StateIndex::active(0),
            vehicles,
            fresh: None,
            draws: 0,
            episode_rng: seed::rng(seed, Stream::Episodes, &[]),
        };
        env.reset();
        Ok(env)
    }

    pub fn scenario(&self) -> &ScenarioConfig {
        &self.scenario
    }

    pub fn channel_config(&self) -> &ChannelConfig {
        &self.channel_config
    }

    pub fn params(&self) -> &PhyParams {
        &self.params
    }

    pub fn aps(&self) -> &ApLayout {
        &self.aps
    }

    pub fn actions(&self) -> &ActionSet {
        &self.actions
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn noise(&self) -> f64 {
        self.channel_config.noise_variance
    }

    pub fn vu_count(&self) -> usize {
        self.lanes.len()
    }

    pub fn state_count(&self) -> usize {
        self.bins.len()
    }

    pub fn is_frozen(&self) -> bool {
        self.channel_config.fading_mode == FadingMode::Frozen
    }

    pub fn vehicles(&self) -> &VehicleState {
        &self.vehicles
    }

    pub fn state(&self) -> StateIndex {
        self.state
    }

    /// Link state of a bin with its frozen channel.
    pub fn link_at(&self, bin: usize) -> &LinkState {
        &self.bins[bin]
    }

    /// Link state the current step is evaluated against.
    pub fn link(&self) -> &LinkState {
        self.fresh.as_ref().unwrap_or(&self.bins[self.state.bin])
    }

    /// Starts a new episode and returns its first state.
    pub fn reset(&mut self) -> StateIndex {
        let road = &self.scenario.road;
        let bin = match self.scenario.convoy_start {
            ConvoyStart::Entry => 0,
            ConvoyStart::UniformBin => self.episode_rng.random_range(0..road.bin_count()),
        };
        self.vehicles = VehicleState::convoy(self.lanes.clone(), bin as f64 * road.displacement());
        self.enter(StateIndex::active(bin));
        self.state
    }

    fn enter(&mut self, state: StateIndex) {
        self.state = state;
        self.fresh = None;
        if !state.terminal && !self.is_frozen() {
            let base = &self.bins[state.bin];
            let draw = self.draws;
            self.draws += 1;
            // geometry is valid, so a fresh draw cannot fail
            let channel = draw_channel_fresh(&base.positions, &self.aps, draw, self.seed, &self.channel_config)
                .expect("channel draw on validated geometry");
            self.fresh = Some(LinkState::new(base.positions.clone(), base.coverage.clone(), channel));
        }
    }

    fn score_on(&self, link: &LinkState, action: Action) -> Score {
        let (a, u) = (self.actions.ap_count(), self.actions.vu_count());
        let mut buf = [0.0f64; 64];
        let mut heap;
        let mw: &mut [f64] = if a * u <= buf.len() {
            &mut buf[..a * u]
        } else {
            heap = vec![0.0; a * u];
            &mut heap
        };
        self.actions.write_powers(action.0, &link.coverage, mw);
        link.gains.score(mw, &self.params, self.noise(), &link.coverage)
    }

    /// Scores `action` on the current link without building beams.
    pub fn score(&self, action: Action) -> Score {
        self.score_on(self.link(), action)
    }

    /// Scores `action` on the frozen channel of `bin`.
    pub fn score_at(&self, bin: usize, action: Action) -> Score {
        self.score_on(&self.bins[bin], action)
    }

    /// Independent channel draws at `bin` for Monte Carlo scoring.
    pub fn sampled_links(&self, bin: usize, samples: usize) -> Result<Vec<LinkState>> {
        let base = &self.bins[bin];
        (0..samples)
            .map(|k| {
                draw_channel_sample(&base.positions, &self.aps, bin as u64, k as u64, self.seed, &self.channel_config)
                    .map(|ch| LinkState::new(base.positions.clone(), base.coverage.clone(), ch))
            })
            .collect()
    }

    pub fn score_on_link(&self, link: &LinkState, action: Action) -> Score {
        self.score_on(link, action)
    }

    /// Evaluates an arbitrary power allocation on the current link through
    /// explicit beams.
    pub fn evaluate(&self, powers: &PowerAllocation) -> Result<Evaluation> {
        let link = self.link();
        let masked = powers.masked(&link.coverage);
        let beams = BeamAssignment::from_powers(&link.channel, &masked, &link.coverage)?;
        let metrics = link_metrics(&link.channel, &beams, &self.params, self.noise());
        let feasible = check_feasible(&masked, &self.params, &link.coverage);
        let r = if feasible { reward(&metrics, &self.params) } else { 0.0 };
        let success = feasible && crate::phy::meets_thresholds(&metrics.sinr, &self.params);
        Ok(Evaluation {
            metrics,
            feasible,
            success,
            reward: r,
        })
    }

    fn advance_state(&mut self) -> (StateIndex, bool) {
        match advance(&self.vehicles, &self.scenario.road) {
            Advance::Moved(v) => {
                self.vehicles = v;
                let next = state_index(&self.vehicles, &self.scenario.road)
                    .expect("convoy keeps a common x position");
                self.enter(next);
                (next, false)
            }
            Advance::Terminated => {
                let next = StateIndex::terminal(self.state.bin);
                self.enter(next);
                (next, true)
            }
        }
    }

    fn ensure_active(&self) -> Result<()> {
        if self.state.terminal {
            return Err(Error::Domain("episode already terminated; call reset".into()));
        }
        Ok(())
    }

    /// Applies `action`, records the link metrics, and advances the convoy.
    pub fn step(&mut self, action: Action) -> Result<Step> {
        self.actions.check(action)?;
        let powers = self.actions.powers(action)?;
        self.step_powers(&powers)
    }

    /// Like [`Environment::step`] for an allocation that need not lie on the grid.
    pub fn step_powers(&mut self, powers: &PowerAllocation) -> Result<Step> {
        self.ensure_active()?;
        let state = self.state;
        let evaluation = self.evaluate(powers)?;
        let (next, done) = self.advance_state();
        Ok(Step {
            state,
            evaluation,
            next,
            done,
        })
    }

    /// Reward-only step used inside training loops.
    pub fn step_fast(&mut self, action: Action) -> Result<FastStep> {
        self.actions.check(action)?;
        self.ensure_active()?;
        let score = self.score(action);
        let (next, done) = self.advance_state();
        Ok(FastStep { score, next, done })
    }

    pub fn validate_for_tabular(scenario: &ScenarioConfig, errs: &mut Vec<FieldError>) {
        if scenario.drop_mode != DropMode::CommonX {
            errs.push(FieldError::new(
                "scenario.drop_mode",
                "tabular solvers need common_x",
            ));
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::actionspace::Granularity;
    use crate::phy::PerItem;

    fn env(fading: FadingMode) -> Environment {
        let channel = ChannelConfig {
            fading_mode: fading,
            ..ChannelConfig::default()
        };
        Environment::new(&ScenarioConfig::default(), &channel, &PhyConfig::default(), 3).unwrap()
    }

    #[test]
    fn episode_runs_to_termination() {
        let mut e = env(FadingMode::Frozen);
        assert_eq!(e.state_count(), 129);
        let mut seen = Vec::new();
        loop {
            seen.push(e.state().bin);
            let s = e.step(Action(0)).unwrap();
            if s.done {
                assert!(s.next.terminal);
                break;
            }
        }
        assert_eq!(seen, (0..129).collect::<Vec<_>>());
        assert!(matches!(e.step(Action(0)), Err(Error::Domain(_))));
    }

    #[test]
    fn out_of_range_action_is_rejected() {
        let mut e = env(FadingMode::Frozen);
        assert!(matches!(e.step(Action(64)), Err(Error::Domain(_))));
    }

    #[test]
    fn frozen_rewards_repeat() {
        let mut e = env(FadingMode::Frozen);
        let a: Vec<f64> = (0..10).map(|_| e.step(Action(63)).unwrap().reward()).collect();
        e.reset();
        let b: Vec<f64> = (0..10).map(|_| e.step(Action(63)).unwrap().reward()).collect();
        assert_eq!(a, b);
    }

    #[test]
    fn stochastic_mode_redraws_per_visit() {
        let mut e = env(FadingMode::Stochastic);
        let first = e.link().channel.clone();
        e.step(Action(0)).unwrap();
        e.reset();
        assert_ne!(first, e.link().channel);
        assert_eq!(first.pair(0, 0).large_scale, e.link().channel.pair(0, 0).large_scale);
    }

    #[test]
    fn fast_and_explicit_paths_agree_on_every_action() {
        let e = env(FadingMode::Frozen);
        for bin in [0, 40, 64, 100, 128] {
            for col in 0..e.actions().len() {
                let a = e.actions().action(col);
                let fast = e.score_at(bin, a);
                let mut probe = e.clone();
                probe.vehicles = VehicleState::convoy(probe.lanes.clone(), 0.0);
                probe.enter(StateIndex::active(bin));
                let slow = probe.evaluate(&e.actions().powers(a).unwrap()).unwrap();
                assert_eq!(fast.feasible, slow.feasible);
                assert_eq!(fast.success, slow.success);
                assert!((fast.reward - slow.reward).abs() <= 1e-9 * slow.reward.max(1.0));
            }
        }
    }

    #[test]
    fn infeasible_step_reports_zero_reward() {
        let scenario = ScenarioConfig {
            actions: crate::actionspace::ActionConfig {
                granularity: Granularity::PerPair,
                ..Default::default()
            },
            ..ScenarioConfig::default()
        };
        let mut phy = PhyConfig::default();
        phy.p_max_dbm = PerItem::Uniform(20.0);
        let mut e = Environment::new(&scenario, &ChannelConfig::default(), &phy, 1).unwrap();
        // 3 x 100 mW from every AP exceeds a 100 mW budget
        let over = PowerAllocation::per_ap(&[100.0; 3], 3);
        let s = e.step_powers(&over).unwrap();
        assert!(!s.evaluation.feasible);
        assert_eq!(s.reward(), 0.0);
    }
}
