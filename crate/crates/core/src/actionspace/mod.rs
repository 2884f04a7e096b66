//! Finite state and action formulation.
//!
//! An action assigns a discrete power level (or OFF, when association search
//! is enabled) to every "slot". With [`Granularity::PerPair`] each
//! (AP, vehicle) pair is a slot; with [`Granularity::PerAp`] each AP is a slot
//! and its level applies to all its vehicles. Actions are integer encoded in
//! little-endian mixed radix, slot 0 least significant, so every AP's slots
//! form a contiguous digit block.
//!
//! Pairs outside coverage are forced to zero power at evaluation time, which
//! keeps one fixed column space for every state.

mod env;

pub use env::{Environment, Evaluation, FastStep, LinkState, Step};

use serde::{Deserialize, Serialize};

use crate::channel::Coverage;
use crate::error::{Error, FieldError, Result};
use crate::mobility::{RoadConfig, VehicleState};
use crate::phy::{check_feasible, PhyParams, PowerAllocation};
use crate::units::dbm_to_mw;

/// Raw action spaces above this size are refused.
pub const MAX_RAW_ACTIONS: usize = 1 << 28;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Granularity {
    /// One level per (AP, vehicle) pair.
    PerPair,
    /// One level per AP, applied to all of its vehicles.
    #[default]
    PerAp,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ActionConfig {
    pub power_levels_dbm: Vec<f64>,
    pub granularity: Granularity,
    /// Adds an OFF level to every slot so associations are searched too.
    pub association_search: bool,
}

impl Default for ActionConfig {
    fn default() -> Self {
        Self {
            power_levels_dbm: vec![5.0, 10.0, 15.0, 20.0],
            granularity: Granularity::PerAp,
            association_search: false,
        }
    }
}

impl ActionConfig {
    pub fn validate(&self, prefix: &str, errs: &mut Vec<FieldError>) {
        if self.power_levels_dbm.is_empty() {
            errs.push(FieldError::new(format!("{prefix}.power_levels_dbm"), "must not be empty"));
        } else if self.power_levels_dbm.iter().any(|p| !p.is_finite()) {
            errs.push(FieldError::new(format!("{prefix}.power_levels_dbm"), "levels must be finite"));
        }
    }
}

/// Integer-encoded joint action.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Action(pub usize);

/// Size and layout of an action space, emitted into output headers.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ActionSpaceDescriptor {
    pub ap_count: usize,
    pub vu_count: usize,
    pub granularity: Granularity,
    pub association_search: bool,
    pub power_levels_dbm: Vec<f64>,
    pub raw_count: usize,
    pub feasible_count: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ActionSet {
    ap_count: usize,
    vu_count: usize,
    config: ActionConfig,
    levels_mw: Vec<f64>,
    base: usize,
    slots: usize,
    raw_count: usize,
    /// Raw indices that pass the feasibility mask, ascending. Column `c` of
    /// every Q-table refers to `feasible[c]`.
    feasible: Vec<usize>,
}

/// Enumerates the joint action space and masks actions that violate the
/// association or power constraints with every pair covered.
pub fn build_action_space(
    config: &ActionConfig,
    ap_count: usize,
    vu_count: usize,
    params: &PhyParams,
) -> Result<ActionSet> {
    let mut errs = Vec::new();
    config.validate("actions", &mut errs);
    if !errs.is_empty() {
        return Err(Error::Validation(errs));
    }
    let base = config.power_levels_dbm.len() + usize::from(config.association_search);
    let slots = match config.granularity {
        Granularity::PerPair => ap_count * vu_count,
        Granularity::PerAp => ap_count,
    };
    let raw_count = u32::try_from(slots)
        .ok()
        .and_then(|s| base.checked_pow(s))
        .filter(|&n| n <= MAX_RAW_ACTIONS)
        .ok_or_else(|| Error::Config(format!("action space {base}^{slots} is too large")))?;

    let mut set = ActionSet {
        ap_count,
        vu_count,
        levels_mw: config.power_levels_dbm.iter().map(|&p| dbm_to_mw(p)).collect(),
        config: config.clone(),
        base,
        slots,
        raw_count,
        feasible: Vec::new(),
    };
    let full = Coverage::full(vu_count, ap_count);
    let mut powers = PowerAllocation::zeros(ap_count, vu_count);
    set.feasible = (0..raw_count)
        .filter(|&raw| {
            set.write_powers(raw, &full, &mut powers.mw);
            check_feasible(&powers, params, &full)
        })
        .collect();
    if set.feasible.is_empty() {
        return Err(Error::Config(
            "no feasible action: every combination violates the power or association constraints".into(),
        ));
    }
    Ok(set)
}

impl ActionSet {
    pub fn ap_count(&self) -> usize {
        self.ap_count
    }

    pub fn vu_count(&self) -> usize {
        self.vu_count
    }

    pub fn config(&self) -> &ActionConfig {
        &self.config
    }

    /// Number of combinations before masking.
    pub fn raw_count(&self) -> usize {
        self.raw_count
    }

    /// Number of feasible actions (Q-table columns).
    pub fn len(&self) -> usize {
        self.feasible.len()
    }

    pub fn is_empty(&self) -> bool {
        self.feasible.is_empty()
    }

    /// Raw action behind Q-table column `col`.
    #[inline]
    pub fn action(&self, col: usize) -> Action {
        Action(self.feasible[col])
    }

    /// Q-table column of a raw action, if it survived masking.
    pub fn column(&self, action: Action) -> Option<usize> {
        self.feasible.binary_search(&action.0).ok()
    }

    pub fn check(&self, action: Action) -> Result<()> {
        if action.0 >= self.raw_count {
            return Err(Error::Domain(format!(
                "action {} out of range (size {})",
                action.0, self.raw_count
            )));
        }
        Ok(())
    }

    /// Level index per slot; `None` is OFF.
    pub fn decode(&self, action: Action) -> Result<Vec<Option<usize>>> {
        self.check(action)?;
        let mut rest = action.0;
        let levels = self.levels_mw.len();
        Ok((0..self.slots)
            .map(|_| {
                let d = rest % self.base;
                rest /= self.base;
                (d < levels).then_some(d)
            })
            .collect())
    }

    pub fn encode(&self, digits: &[Option<usize>]) -> Result<Action> {
        if digits.len() != self.slots {
            return Err(Error::Domain(format!(
                "expected {} slots, got {}",
                self.slots,
                digits.len()
            )));
        }
        let levels = self.levels_mw.len();
        let mut raw = 0usize;
        for d in digits.iter().rev() {
            let digit = match *d {
                Some(l) if l < levels => l,
                None if self.config.association_search => levels,
                _ => return Err(Error::Domain(format!("invalid slot value {d:?}"))),
            };
            raw = raw * self.base + digit;
        }
        Ok(Action(raw))
    }

    /// Writes coverage-masked powers (mW, `j * U + i`) for `raw` into `out`.
    #[inline]
    pub fn write_powers(&self, raw: usize, coverage: &Coverage, out: &mut [f64]) {
        let (a, u) = (self.ap_count, self.vu_count);
        let levels = self.levels_mw.len();
        let mut rest = raw;
        let level = |rest: &mut usize| {
            let d = *rest % self.base;
            *rest /= self.base;
            if d < levels {
                self.levels_mw[d]
            } else {
                0.0
            }
        };
        match self.config.granularity {
            Granularity::PerPair => {
                for j in 0..a {
                    for i in 0..u {
                        let p = level(&mut rest);
                        out[j * u + i] = if coverage.is_covered(i, j) { p } else { 0.0 };
                    }
                }
            }
            Granularity::PerAp => {
                for j in 0..a {
                    let p = level(&mut rest);
                    for i in 0..u {
                        out[j * u + i] = if coverage.is_covered(i, j) { p } else { 0.0 };
                    }
                }
            }
        }
    }

    /// Decoded powers before coverage forcing.
    pub fn powers(&self, action: Action) -> Result<PowerAllocation> {
        self.check(action)?;
        let mut p = PowerAllocation::zeros(self.ap_count, self.vu_count);
        self.write_powers(action.0, &Coverage::full(self.vu_count, self.ap_count), &mut p.mw);
        Ok(p)
    }

    /// Sub-action count of one AP when the space is factored per AP.
    pub fn agent_action_count(&self) -> usize {
        match self.config.granularity {
            Granularity::PerPair => self.base.pow(self.vu_count as u32),
            Granularity::PerAp => self.base,
        }
    }

    /// Joins per-AP sub-actions into one raw action.
    pub fn compose(&self, per_ap: &[usize]) -> Result<Action> {
        let k = self.agent_action_count();
        if per_ap.len() != self.ap_count || per_ap.iter().any(|&x| x >= k) {
            return Err(Error::Domain(format!("bad per-AP sub-actions {per_ap:?}")));
        }
        Ok(Action(per_ap.iter().rev().fold(0, |acc, &x| acc * k + x)))
    }

    /// Splits a raw action into per-AP sub-actions.
    pub fn split(&self, action: Action) -> Result<Vec<usize>> {
        self.check(action)?;
        let k = self.agent_action_count();
        let mut rest = action.0;
        Ok((0..self.ap_count)
            .map(|_| {
                let x = rest % k;
                rest /= k;
                x
            })
            .collect())
    }

    /// Raw action for a power assignment if it lies on the grid.
    pub fn find(&self, powers: &PowerAllocation) -> Option<Action> {
        let level_of = |mw: f64| -> Option<Option<usize>> {
            if mw == 0.0 && self.config.association_search {
                return Some(None);
            }
            self.levels_mw
                .iter()
                .position(|&l| (l - mw).abs() <= 1e-9 * l)
                .map(Some)
        };
        let digits: Option<Vec<Option<usize>>> = match self.config.granularity {
            Granularity::PerPair => (0..self.ap_count)
                .flat_map(|j| (0..self.vu_count).map(move |i| (j, i)))
                .map(|(j, i)| level_of(powers.get(j, i)))
                .collect(),
            Granularity::PerAp => (0..self.ap_count)
                .map(|j| {
                    let p = powers.get(j, 0);
                    if (0..self.vu_count).all(|i| powers.get(j, i) == p) {
                        level_of(p)
                    } else {
                        None
                    }
                })
                .collect(),
        };
        self.encode(&digits?).ok()
    }

    pub fn descriptor(&self) -> ActionSpaceDescriptor {
        ActionSpaceDescriptor {
            ap_count: self.ap_count,
            vu_count: self.vu_count,
            granularity: self.config.granularity,
            association_search: self.config.association_search,
            power_levels_dbm: self.config.power_levels_dbm.clone(),
            raw_count: self.raw_count,
            feasible_count: self.feasible.len(),
        }
    }
}

/// Binary association matrix, `a[i * ap_count + j]` set when AP `j` serves
/// vehicle `i`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Association {
    pub vu_count: usize,
    pub ap_count: usize,
    a: Vec<bool>,
}

impl Association {
    pub fn is_associated(&self, vu: usize, ap: usize) -> bool {
        self.a[vu * self.ap_count + ap]
    }

    /// APs serving vehicle `vu` (its virtual cell).
    pub fn serving_aps(&self, vu: usize) -> Vec<usize> {
        (0..self.ap_count).filter(|&j| self.is_associated(vu, j)).collect()
    }

    /// Vehicles served by AP `ap`.
    pub fn served_vus(&self, ap: usize) -> Vec<usize> {
        (0..self.vu_count).filter(|&i| self.is_associated(i, ap)).collect()
    }

    /// The AP-side indicator view, `u[j * vu_count + i]`.
    pub fn ap_view(&self) -> Vec<bool> {
        (0..self.ap_count)
            .flat_map(|j| (0..self.vu_count).map(move |i| (i, j)))
            .map(|(i, j)| self.is_associated(i, j))
            .collect()
    }
}

pub fn association_of(set: &ActionSet, action: Action, coverage: &Coverage) -> Result<Association> {
    set.check(action)?;
    let (a, u) = (set.ap_count, set.vu_count);
    let mut mw = vec![0.0; a * u];
    set.write_powers(action.0, coverage, &mut mw);
    let assoc = (0..u)
        .flat_map(|i| (0..a).map(move |j| (i, j)))
        .map(|(i, j)| mw[j * u + i] > 0.0)
        .collect();
    Ok(Association {
        vu_count: u,
        ap_count: a,
        a: assoc,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub struct StateIndex {
    pub bin: usize,
    pub terminal: bool,
}

impl StateIndex {
    pub fn active(bin: usize) -> Self {
        Self { bin, terminal: false }
    }

    pub fn terminal(bin: usize) -> Self {
        Self { bin, terminal: true }
    }
}

/// Slack when flooring positions built by repeated addition.
const BIN_EPS: f64 = 1e-9;

/// Quantizes the convoy position to a bin of one step's displacement.
pub fn state_index(vehicles: &VehicleState, road: &RoadConfig) -> Result<StateIndex> {
    let x = vehicles.common_x().ok_or_else(|| {
        Error::Config("tabular state needs all vehicles at a common x position".into())
    })?;
    let bin = (x / road.displacement() + BIN_EPS).floor() as usize;
    Ok(StateIndex::active(bin.min(road.bin_count() - 1)))
}
