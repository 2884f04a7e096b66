//! Freeway scenario: vehicle drops, fixed access-point placement, and the
//! per-step linear displacement of every vehicle.
//!
//! Vehicles never change lane or speed. An episode ends the first time any
//! vehicle's advanced position leaves the region of interest.

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::actionspace::ActionConfig;
use crate::error::{Error, FieldError, Result};
use crate::seed::{self, Stream};
use crate::units::kmh_to_ms;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RoadConfig {
    /// Length of the region of interest along the road, meters.
    pub roi_length: f64,
    pub lane_count: usize,
    /// Lane width, meters. Lane `m` is centered at `(m + 0.5) * lane_width`.
    pub lane_width: f64,
    /// Vehicle speed, km/h.
    pub vu_speed: f64,
    /// Mobility update interval, seconds.
    pub timestep: f64,
}

impl Default for RoadConfig {
    fn default() -> Self {
        Self {
            roi_length: 500.0,
            lane_count: 3,
            lane_width: 4.0,
            vu_speed: 140.0,
            timestep: 0.1,
        }
    }
}

impl RoadConfig {
    /// Distance covered by every vehicle in one step, meters.
    pub fn displacement(&self) -> f64 {
        kmh_to_ms(self.vu_speed) * self.timestep
    }

    pub fn lane_center(&self, lane: usize) -> f64 {
        (lane as f64 + 0.5) * self.lane_width
    }

    /// Number of position bins a convoy entering at x = 0 passes through.
    pub fn bin_count(&self) -> usize {
        (self.roi_length / self.displacement()).ceil() as usize
    }

    pub fn validate(&self, prefix: &str, errs: &mut Vec<FieldError>) {
        let f = |n: &str| format!("{prefix}.{n}");
        if !(self.roi_length > 0.0) {
            errs.push(FieldError::new(f("roi_length"), "must be > 0"));
        }
        if self.lane_count == 0 {
            errs.push(FieldError::new(f("lane_count"), "must be >= 1"));
        }
        if !(self.lane_width > 0.0) {
            errs.push(FieldError::new(f("lane_width"), "must be > 0"));
        }
        if !(self.vu_speed > 0.0) {
            errs.push(FieldError::new(f("vu_speed"), "must be > 0"));
        }
        if !(self.timestep > 0.0) {
            errs.push(FieldError::new(f("timestep"), "must be > 0"));
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum DropMode {
    /// All vehicles share one longitudinal position, one per lane.
    #[default]
    CommonX,
    /// Vehicles dropped uniformly per lane with a minimum time headway.
    Headway,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum ConvoyStart {
    /// The convoy enters at x = 0 every episode.
    #[default]
    Entry,
    /// The convoy starts at a uniformly drawn position bin.
    UniformBin,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ApConfig {
    pub count: usize,
    /// Spacing between neighbouring APs, meters. Ignored when `x_positions` is set.
    pub spacing: f64,
    /// Lateral coordinate of the AP row, meters.
    pub y_offset: f64,
    /// Explicit AP x coordinates; defaults to a row centered in the ROI.
    pub x_positions: Option<Vec<f64>>,
    pub coverage_radius: f64,
    pub antennas_per_ap: usize,
}

impl Default for ApConfig {
    fn default() -> Self {
        Self {
            count: 3,
            spacing: 150.0,
            y_offset: 0.0,
            x_positions: None,
            coverage_radius: 250.0,
            antennas_per_ap: 8,
        }
    }
}

impl ApConfig {
    pub fn validate(&self, prefix: &str, errs: &mut Vec<FieldError>) {
        let f = |n: &str| format!("{prefix}.{n}");
        if self.count == 0 {
            errs.push(FieldError::new(f("count"), "must be >= 1"));
        }
        if let Some(xs) = &self.x_positions {
            if xs.len() != self.count {
                errs.push(FieldError::new(
                    f("x_positions"),
                    format!("has {} entries but count is {}", xs.len(), self.count),
                ));
            }
        } else if self.count > 1 && !(self.spacing > 0.0) {
            errs.push(FieldError::new(f("spacing"), "must be > 0"));
        }
        if !(self.coverage_radius > 0.0) {
            errs.push(FieldError::new(f("coverage_radius"), "must be > 0"));
        }
        if self.antennas_per_ap == 0 {
            errs.push(FieldError::new(f("antennas_per_ap"), "must be >= 1"));
        }
    }
}

/// Immutable description of road, nodes, and the discrete action grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioConfig {
    pub road: RoadConfig,
    pub vu_count: usize,
    pub drop_mode: DropMode,
    /// Minimum same-lane time headway for [`DropMode::Headway`], seconds.
    pub headway_s: f64,
    pub convoy_start: ConvoyStart,
    pub aps: ApConfig,
    pub actions: ActionConfig,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            road: RoadConfig::default(),
            vu_count: 3,
            drop_mode: DropMode::CommonX,
            headway_s: 2.5,
            convoy_start: ConvoyStart::Entry,
            aps: ApConfig::default(),
            actions: ActionConfig::default(),
        }
    }
}

impl ScenarioConfig {
    pub fn validate(&self, prefix: &str, errs: &mut Vec<FieldError>) {
        self.road.validate(&format!("{prefix}.road"), errs);
        self.aps.validate(&format!("{prefix}.aps"), errs);
        self.actions.validate(&format!("{prefix}.actions"), errs);
        if self.vu_count == 0 {
            errs.push(FieldError::new(format!("{prefix}.vu_count"), "must be >= 1"));
        }
        if self.drop_mode == DropMode::Headway && !(self.headway_s >= 0.0) {
            errs.push(FieldError::new(format!("{prefix}.headway_s"), "must be >= 0"));
        }
    }

    /// Minimum same-lane gap in headway mode, meters.
    pub fn safety_distance(&self) -> f64 {
        self.headway_s * kmh_to_ms(self.road.vu_speed)
    }

    pub fn ap_layout(&self) -> ApLayout {
        let a = &self.aps;
        let xs = a.x_positions.clone().unwrap_or_else(|| {
            let center = self.road.roi_length / 2.0;
            let mid = (a.count as f64 - 1.0) / 2.0;
            (0..a.count)
                .map(|j| center + (j as f64 - mid) * a.spacing)
                .collect()
        });
        ApLayout {
            positions: xs.into_iter().map(|x| [x, a.y_offset]).collect(),
            coverage_radius: a.coverage_radius,
            antennas_per_ap: a.antennas_per_ap,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct VehicleState {
    /// Longitudinal position per vehicle, meters.
    pub x: Vec<f64>,
    /// Lane index per vehicle.
    pub lane: Vec<usize>,
}

impl VehicleState {
    pub fn convoy(lanes: Vec<usize>, x: f64) -> Self {
        Self {
            x: vec![x; lanes.len()],
            lane: lanes,
        }
    }

    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }

    pub fn positions(&self, road: &RoadConfig) -> Vec<[f64; 2]> {
        self.x
            .iter()
            .zip(&self.lane)
            .map(|(&x, &m)| [x, road.lane_center(m)])
            .collect()
    }

    /// The shared x position if every vehicle has the same one.
    pub fn common_x(&self) -> Option<f64> {
        let first = *self.x.first()?;
        self.x.iter().all(|&x| x == first).then_some(first)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ApLayout {
    pub positions: Vec<[f64; 2]>,
    pub coverage_radius: f64,
    pub antennas_per_ap: usize,
}

impl ApLayout {
    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    /// Total antenna count across all APs.
    pub fn total_antennas(&self) -> usize {
        self.antennas_per_ap * self.positions.len()
    }
}

/// Drops the vehicles and places the APs. Deterministic in `seed`.
pub fn spawn_scenario(config: &ScenarioConfig, seed: u64) -> Result<(VehicleState, ApLayout)> {
    let mut errs = Vec::new();
    config.validate("scenario", &mut errs);
    if !errs.is_empty() {
        return Err(Error::Validation(errs));
    }
    let road = &config.road;
    let mut rng = seed::rng(seed, Stream::Scenario, &[]);

    let vehicles = match config.drop_mode {
        DropMode::CommonX => {
            if config.vu_count > road.lane_count {
                return Err(Error::Config(format!(
                    "common-x drop needs one lane per vehicle: {} vehicles, {} lanes",
                    config.vu_count, road.lane_count
                )));
            }
            let mut lanes: Vec<usize> = (0..road.lane_count).collect();
            lanes.shuffle(&mut rng);
            lanes.truncate(config.vu_count);
            let x = match config.convoy_start {
                ConvoyStart::Entry => 0.0,
                ConvoyStart::UniformBin => {
                    rng.random_range(0..road.bin_count()) as f64 * road.displacement()
                }
            };
            VehicleState::convoy(lanes, x)
        }
        DropMode::Headway => {
            let gap = config.safety_distance();
            let lane: Vec<usize> = (0..config.vu_count)
                .map(|_| rng.random_range(0..road.lane_count))
                .collect();
            let mut x = vec![0.0; config.vu_count];
            for m in 0..road.lane_count {
                let members: Vec<usize> = (0..config.vu_count).filter(|&i| lane[i] == m).collect();
                if members.is_empty() {
                    continue;
                }
                let span = road.roi_length - (members.len() - 1) as f64 * gap;
                if span <= 0.0 {
                    return Err(Error::Config(format!(
                        "lane {m} cannot hold {} vehicles with a {gap:.2} m safety distance",
                        members.len()
                    )));
                }
                let mut u: Vec<f64> = members.iter().map(|_| rng.random::<f64>() * span).collect();
                u.sort_by(f64::total_cmp);
                for (k, (&i, base)) in members.iter().zip(u).enumerate() {
                    x[i] = base + k as f64 * gap;
                }
            }
            VehicleState { x, lane }
        }
    };
    Ok((vehicles, config.ap_layout()))
}

#[derive(Debug, Clone, PartialEq)]
pub enum Advance {
    Moved(VehicleState),
    Terminated,
}

/// Moves every vehicle forward by `speed * timestep`.
pub fn advance(vehicles: &VehicleState, road: &RoadConfig) -> Advance {
    let d = road.displacement();
    let x: Vec<f64> = vehicles.x.iter().map(|&x| x + d).collect();
    if x.iter().any(|&x| x >= road.roi_length) {
        Advance::Terminated
    } else {
        Advance::Moved(VehicleState {
            x,
            lane: vehicles.lane.clone(),
        })
    }
}
