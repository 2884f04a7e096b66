use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::actionspace::{ActionConfig, Environment, Granularity};
use crate::agents::LearningConfig;
use crate::baselines::BaselineConfig;
use crate::channel::ChannelConfig;
use crate::error::{Error, FieldError, Result};
use crate::mobility::ScenarioConfig;
use crate::phy::PhyConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Solver {
    #[default]
    Sarl,
    Marl,
    SarlMarl,
    Genie,
    Random,
    Equal,
}

impl Solver {
    pub const ALL: [Solver; 6] = [
        Solver::Sarl,
        Solver::Marl,
        Solver::SarlMarl,
        Solver::Genie,
        Solver::Random,
        Solver::Equal,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Solver::Sarl => "sarl",
            Solver::Marl => "marl",
            Solver::SarlMarl => "sarl_marl",
            Solver::Genie => "genie",
            Solver::Random => "random",
            Solver::Equal => "equal",
        }
    }

    pub fn is_learning(self) -> bool {
        matches!(self, Solver::Sarl | Solver::Marl | Solver::SarlMarl)
    }
}

impl std::fmt::Display for Solver {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Solver {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Solver::ALL
            .into_iter()
            .find(|v| v.name() == s.replace('-', "_"))
            .ok_or_else(|| Error::Config(format!("unknown solver '{s}'")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub scenario: ScenarioConfig,
    pub channel: ChannelConfig,
    pub phy: PhyConfig,
    pub learning: LearningConfig,
    pub baselines: BaselineConfig,
    pub solver: Solver,
    pub seeds: Vec<u64>,
    pub test_episodes: usize,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            scenario: ScenarioConfig::default(),
            channel: ChannelConfig::default(),
            phy: PhyConfig::default(),
            learning: LearningConfig::default(),
            baselines: BaselineConfig::default(),
            solver: Solver::Sarl,
            seeds: vec![1],
            test_episodes: 250,
        }
    }
}

impl ExperimentConfig {
    /// A small instance that exhaustive checks can sweep quickly: two APs,
    /// two vehicles, two power levels per (AP, vehicle) pair (16 actions),
    /// and 13 position bins.
    pub fn small() -> Self {
        let mut cfg = Self::default();
        cfg.scenario.vu_count = 2;
        cfg.scenario.road.lane_count = 2;
        cfg.scenario.road.timestep = 1.0;
        cfg.scenario.aps.count = 2;
        cfg.scenario.aps.spacing = 200.0;
        cfg.scenario.actions = ActionConfig {
            power_levels_dbm: vec![10.0, 20.0],
            granularity: Granularity::PerPair,
            association_search: false,
        };
        cfg.learning.episodes = 5_000;
        cfg.learning.agents = 4;
        cfg.test_episodes = 1;
        cfg
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_toml_str(&std::fs::read_to_string(path)?)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config serializes to TOML")
    }

    /// Collects every offending field instead of stopping at the first.
    pub fn validate(&self) -> Result<()> {
        let mut errs = Vec::new();
        self.scenario.validate("scenario", &mut errs);
        Environment::validate_for_tabular(&self.scenario, &mut errs);
        self.channel.validate("channel", &mut errs);
        self.phy
            .validate("phy", self.scenario.aps.count, self.scenario.vu_count, &mut errs);
        self.learning.validate("learning", &mut errs);
        if self.seeds.is_empty() {
            errs.push(FieldError::new("seeds", "must not be empty"));
        }
        if self.test_episodes == 0 {
            errs.push(FieldError::new("test_episodes", "must be >= 1"));
        }
        if self.baselines.genie_samples == 0 {
            errs.push(FieldError::new("baselines.genie_samples", "must be >= 1"));
        }
        if errs.is_empty() {
            Ok(())
        } else {
            Err(Error::Validation(errs))
        }
    }

    /// SHA-256 of the canonical JSON form, hex encoded.
    pub fn hash(&self) -> String {
        let bytes = serde_json::to_vec(self).expect("config serializes to JSON");
        hex::encode(Sha256::digest(&bytes))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_round_trip_through_toml() {
        let cfg = ExperimentConfig::default();
        let back = ExperimentConfig::from_toml_str(&cfg.to_toml_string()).unwrap();
        assert_eq!(back, cfg);
        assert_eq!(back.hash(), cfg.hash());
    }

    #[test]
    fn partial_file_fills_defaults() {
        let cfg = ExperimentConfig::from_toml_str("solver = \"genie\"\nseeds = [4, 5]\n[phy]\ngamma_min_db = 12.0\n").unwrap();
        assert_eq!(cfg.solver, Solver::Genie);
        assert_eq!(cfg.seeds, vec![4, 5]);
        assert_eq!(cfg.test_episodes, 250);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(matches!(
            ExperimentConfig::from_toml_str("solvr = \"genie\"\n"),
            Err(Error::Toml(_))
        ));
    }

    #[test]
    fn validation_lists_every_field() {
        let err = ExperimentConfig::from_toml_str("seeds = []\ntest_episodes = 0\n[learning]\ndiscount = 1.5\n")
            .unwrap_err();
        let Error::Validation(fields) = err else { panic!("{err}") };
        let names: Vec<_> = fields.iter().map(|f| f.field.as_str()).collect();
        assert!(names.contains(&"seeds"));
        assert!(names.contains(&"test_episodes"));
        assert!(names.contains(&"learning.discount"));
    }

    #[test]
    fn hash_tracks_content() {
        let a = ExperimentConfig::default();
        let mut b = a.clone();
        b.seeds = vec![2];
        assert_ne!(a.hash(), b.hash());
        assert_eq!(a.hash().len(), 64);
    }

    #[test]
    fn solver_names_parse() {
        for s in Solver::ALL {
            assert_eq!(s.name().parse::<Solver>().unwrap(), s);
        }
        assert_eq!("sarl-marl".parse::<Solver>().unwrap(), Solver::SarlMarl);
        assert!("dqn".parse::<Solver>().is_err());
    }
}
