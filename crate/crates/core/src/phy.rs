//! Beamforming, SINR, rate, backhaul consumption, constraint feasibility, and
//! the thresholded weighted-sum-rate reward.
//!
//! Two evaluation routes exist. The explicit route builds every beam vector
//! and takes stacked inner products; it is what episode logs are produced
//! from. [`LinkGains`] precomputes the complex gain of every beam direction
//! at every receiver so candidate actions can be scored with a handful of
//! multiply-adds; the genie search and the trainers use it. Tests pin the
//! two routes to each other.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::channel::{ChannelRealization, Coverage};
use crate::error::{Error, FieldError, Result};
use crate::units::{db_to_linear, dbm_to_mw};

/// Relative slack on the per-AP power budget so that a budget split into
/// equal shares and summed back is not rejected by rounding.
const POWER_BUDGET_RTOL: f64 = 1e-12;

/// A scalar applied to every item, or one value per item.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum PerItem {
    Uniform(f64),
    Each(Vec<f64>),
}

impl PerItem {
    pub fn get(&self, i: usize) -> f64 {
        match self {
            PerItem::Uniform(v) => *v,
            PerItem::Each(v) => v[i],
        }
    }

    pub fn resolve(&self, n: usize) -> Vec<f64> {
        (0..n).map(|i| self.get(i)).collect()
    }

    fn check(&self, n: usize, field: String, errs: &mut Vec<FieldError>, ok: impl Fn(f64) -> bool, what: &str) {
        match self {
            PerItem::Each(v) if v.len() != n => {
                errs.push(FieldError::new(field, format!("expected {n} entries, got {}", v.len())))
            }
            _ => {
                let n = match self {
                    PerItem::Uniform(_) => 1,
                    PerItem::Each(v) => v.len(),
                };
                if (0..n).any(|i| !ok(self.get(i))) {
                    errs.push(FieldError::new(field, what.to_string()));
                }
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PhyConfig {
    /// Spectral-efficiency loss from signaling, in [0, 1).
    pub kappa: f64,
    /// Minimum SINR per vehicle, dB.
    pub gamma_min_db: PerItem,
    /// Transmit power budget per AP, dBm.
    pub p_max_dbm: PerItem,
    /// Rate weight per vehicle.
    pub zeta: PerItem,
}

impl Default for PhyConfig {
    fn default() -> Self {
        Self {
            kappa: 0.1,
            gamma_min_db: PerItem::Uniform(10.0),
            p_max_dbm: PerItem::Uniform(25.0),
            zeta: PerItem::Uniform(1.0),
        }
    }
}

impl PhyConfig {
    pub fn validate(&self, prefix: &str, ap_count: usize, vu_count: usize, errs: &mut Vec<FieldError>) {
        let f = |n: &str| format!("{prefix}.{n}");
        if !(0.0..1.0).contains(&self.kappa) {
            errs.push(FieldError::new(f("kappa"), "must be in [0, 1)"));
        }
        self.gamma_min_db
            .check(vu_count, f("gamma_min_db"), errs, |v| !v.is_nan(), "must not be NaN");
        self.p_max_dbm
            .check(ap_count, f("p_max_dbm"), errs, |v| !v.is_nan(), "must not be NaN");
        self.zeta.check(vu_count, f("zeta"), errs, |v| v >= 0.0, "must be >= 0");
    }

    /// Converts to linear units for a network of the given size.
    pub fn params(&self, ap_count: usize, vu_count: usize) -> Result<PhyParams> {
        let mut errs = Vec::new();
        self.validate("phy", ap_count, vu_count, &mut errs);
        if !errs.is_empty() {
            return Err(Error::Validation(errs));
        }
        Ok(PhyParams {
            kappa: self.kappa,
            gamma_min: self.gamma_min_db.resolve(vu_count).into_iter().map(db_to_linear).collect(),
            p_max_mw: self.p_max_dbm.resolve(ap_count).into_iter().map(dbm_to_mw).collect(),
            zeta: self.zeta.resolve(vu_count),
        })
    }
}

/// [`PhyConfig`] resolved to linear per-item vectors.
#[derive(Debug, Clone, PartialEq)]
pub struct PhyParams {
    pub kappa: f64,
    /// Linear SINR floor per vehicle.
    pub gamma_min: Vec<f64>,
    /// Power budget per AP, mW.
    pub p_max_mw: Vec<f64>,
    pub zeta: Vec<f64>,
}

impl PhyParams {
    /// Smallest rate a vehicle can have in a step with nonzero reward.
    pub fn rate_floor(&self, vu: usize) -> f64 {
        rate(self.gamma_min[vu], self.kappa)
    }
}

/// Transmit power per (AP, vehicle) pair in mW, stored at `j * vu_count + i`.
#[derive(Debug, Clone, PartialEq)]
pub struct PowerAllocation {
    pub ap_count: usize,
    pub vu_count: usize,
    pub mw: Vec<f64>,
}

impl PowerAllocation {
    pub fn zeros(ap_count: usize, vu_count: usize) -> Self {
        Self {
            ap_count,
            vu_count,
            mw: vec![0.0; ap_count * vu_count],
        }
    }

    /// Every AP sends `per_ap[j]` mW to each of its vehicles.
    pub fn per_ap(per_ap: &[f64], vu_count: usize) -> Self {
        Self {
            ap_count: per_ap.len(),
            vu_count,
            mw: per_ap.iter().flat_map(|&p| std::iter::repeat_n(p, vu_count)).collect(),
        }
    }

    #[inline]
    pub fn get(&self, ap: usize, vu: usize) -> f64 {
        self.mw[ap * self.vu_count + vu]
    }

    pub fn set(&mut self, ap: usize, vu: usize, mw: f64) {
        self.mw[ap * self.vu_count + vu] = mw;
    }

    /// Zeroes every pair outside coverage.
    pub fn masked(&self, coverage: &Coverage) -> Self {
        let mut out = self.clone();
        for j in 0..self.ap_count {
            for i in 0..self.vu_count {
                if !coverage.is_covered(i, j) {
                    out.set(j, i, 0.0);
                }
            }
        }
        out
    }

    pub fn ap_total(&self, ap: usize) -> f64 {
        self.mw[ap * self.vu_count..(ap + 1) * self.vu_count].iter().sum()
    }
}

/// Channel-matched beam scaled to `power`: `w = h / |h| * sqrt(power)`.
pub fn beam_vector(h: &[Complex64], power: f64) -> Result<Vec<Complex64>> {
    if !(power >= 0.0) {
        return Err(Error::Domain(format!("power must be >= 0, got {power}")));
    }
    if power == 0.0 {
        return Ok(vec![Complex64::new(0.0, 0.0); h.len()]);
    }
    let norm = h.iter().map(Complex64::norm_sqr).sum::<f64>().sqrt();
    if norm == 0.0 {
        return Err(Error::DegenerateChannel);
    }
    let scale = power.sqrt() / norm;
    Ok(h.iter().map(|x| x * scale).collect())
}

/// `a^H b`.
#[inline]
pub fn inner(a: &[Complex64], b: &[Complex64]) -> Complex64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

/// Beam per (AP, vehicle) pair, stored at `j * vu_count + i`.
#[derive(Debug, Clone, PartialEq)]
pub struct BeamAssignment {
    pub ap_count: usize,
    pub vu_count: usize,
    pub beams: Vec<Vec<Complex64>>,
}

impl BeamAssignment {
    /// Builds every beam from `powers`; pairs outside coverage get the zero beam.
    pub fn from_powers(
        channels: &ChannelRealization,
        powers: &PowerAllocation,
        coverage: &Coverage,
    ) -> Result<Self> {
        let (a, u) = (channels.ap_count, channels.vu_count);
        let mut beams = Vec::with_capacity(a * u);
        for j in 0..a {
            for i in 0..u {
                let p = if coverage.is_covered(i, j) {
                    powers.get(j, i)
                } else {
                    0.0
                };
                beams.push(beam_vector(&channels.pair(i, j).h, p)?);
            }
        }
        Ok(Self {
            ap_count: a,
            vu_count: u,
            beams,
        })
    }

    pub fn beam(&self, ap: usize, vu: usize) -> &[Complex64] {
        &self.beams[ap * self.vu_count + vu]
    }

    /// Stacked beam for vehicle `vu` across all APs.
    pub fn stacked(&self, vu: usize) -> Vec<Complex64> {
        (0..self.ap_count)
            .flat_map(|j| self.beam(j, vu).iter().copied())
            .collect()
    }

    pub fn serving_count(&self, vu: usize) -> usize {
        (0..self.ap_count)
            .filter(|&j| self.beam(j, vu).iter().any(|w| w.norm_sqr() > 0.0))
            .count()
    }

    pub fn ap_power(&self, ap: usize) -> f64 {
        (0..self.vu_count)
            .map(|i| self.beam(ap, i).iter().map(Complex64::norm_sqr).sum::<f64>())
            .sum()
    }
}

/// SINR of vehicle `vu` with every other vehicle's stacked beam as interference.
pub fn sinr(vu: usize, channels: &ChannelRealization, beams: &BeamAssignment, noise: f64) -> f64 {
    let h = channels.stacked(vu);
    let desired = inner(&h, &beams.stacked(vu)).norm_sqr();
    let interference: f64 = (0..beams.vu_count)
        .filter(|&k| k != vu)
        .map(|k| inner(&h, &beams.stacked(k)).norm_sqr())
        .sum();
    desired / (noise + interference)
}

/// Achievable rate in bits/s/Hz.
#[inline]
pub fn rate(sinr: f64, kappa: f64) -> f64 {
    (1.0 - kappa) * sinr.log2_1p()
}

trait Log2_1p {
    fn log2_1p(self) -> f64;
}

impl Log2_1p for f64 {
    #[inline]
    fn log2_1p(self) -> f64 {
        self.ln_1p() / std::f64::consts::LN_2
    }
}

/// Backhaul consumption: serving-AP count times the rate.
pub fn backhaul_consumption(beams: &BeamAssignment, vu: usize, rate: f64) -> f64 {
    beams.serving_count(vu) as f64 * rate
}

/// Every vehicle has at least one covered AP with nonzero power, and no AP
/// exceeds its budget. The SINR floor is enforced by [`reward`].
pub fn check_feasible(powers: &PowerAllocation, params: &PhyParams, coverage: &Coverage) -> bool {
    feasible_mw(&powers.mw, powers.ap_count, powers.vu_count, params, coverage)
}

fn feasible_mw(mw: &[f64], a: usize, u: usize, params: &PhyParams, coverage: &Coverage) -> bool {
    let served = |i: usize| (0..a).any(|j| coverage.is_covered(i, j) && mw[j * u + i] > 0.0);
    if !(0..u).all(served) {
        return false;
    }
    (0..a).all(|j| {
        let total: f64 = (0..u)
            .filter(|&i| coverage.is_covered(i, j))
            .map(|i| mw[j * u + i])
            .sum();
        total <= params.p_max_mw[j] * (1.0 + POWER_BUDGET_RTOL)
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LinkMetrics {
    /// Linear SINR per vehicle.
    pub sinr: Vec<f64>,
    /// Rate per vehicle, bits/s/Hz.
    pub rate: Vec<f64>,
    pub serving_aps: Vec<usize>,
    /// Backhaul consumption per vehicle, bits/s/Hz.
    pub backhaul: Vec<f64>,
}

pub fn link_metrics(
    channels: &ChannelRealization,
    beams: &BeamAssignment,
    params: &PhyParams,
    noise: f64,
) -> LinkMetrics {
    let u = channels.vu_count;
    let sinr: Vec<f64> = (0..u).map(|i| sinr(i, channels, beams, noise)).collect();
    let rate: Vec<f64> = sinr.iter().map(|&g| rate(g, params.kappa)).collect();
    let serving_aps: Vec<usize> = (0..u).map(|i| beams.serving_count(i)).collect();
    let backhaul = (0..u).map(|i| serving_aps[i] as f64 * rate[i]).collect();
    LinkMetrics {
        sinr,
        rate,
        serving_aps,
        backhaul,
    }
}

/// Whether every vehicle meets its SINR floor (boundary inclusive).
pub fn meets_thresholds(sinr: &[f64], params: &PhyParams) -> bool {
    sinr.iter().zip(&params.gamma_min).all(|(g, m)| g >= m)
}

/// Weighted sum of backhaul consumption if every vehicle meets its SINR
/// floor, zero otherwise.
pub fn reward(metrics: &LinkMetrics, params: &PhyParams) -> f64 {
    if !meets_thresholds(&metrics.sinr, params) {
        return 0.0;
    }
    metrics.backhaul.iter().zip(&params.zeta).map(|(c, z)| z * c).sum()
}

/// Outcome of scoring one power allocation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Score {
    pub reward: f64,
    pub feasible: bool,
    /// Feasible and every vehicle at or above its SINR floor.
    pub success: bool,
}

/// Precomputed receive gains of every beam direction at every vehicle.
///
/// `cross[(i * U + k) * A + j]` is `h_{j,i}^H h_{j,k} / |h_{j,k}|`: the
/// amplitude vehicle `i` picks up from AP `j`'s unit-power beam aimed at `k`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinkGains {
    pub ap_count: usize,
    pub vu_count: usize,
    cross: Vec<Complex64>,
}

impl LinkGains {
    pub fn from_channel(channels: &ChannelRealization) -> Self {
        let (a, u) = (channels.ap_count, channels.vu_count);
        let norms: Vec<f64> = channels.pairs.iter().map(|p| p.norm()).collect();
        let mut cross = vec![Complex64::new(0.0, 0.0); u * u * a];
        for i in 0..u {
            for k in 0..u {
                for j in 0..a {
                    let nk = norms[k * a + j];
                    cross[(i * u + k) * a + j] = if i == k {
                        Complex64::new(nk, 0.0)
                    } else if nk > 0.0 {
                        inner(&channels.pair(i, j).h, &channels.pair(k, j).h) / nk
                    } else {
                        Complex64::new(0.0, 0.0)
                    };
                }
            }
        }
        Self {
            ap_count: a,
            vu_count: u,
            cross,
        }
    }

    /// Per-vehicle SINR for coverage-masked powers (mW, `j * U + i`).
    pub fn sinr_into(&self, mw: &[f64], noise: f64, out: &mut [f64]) {
        let (a, u) = (self.ap_count, self.vu_count);
        for i in 0..u {
            let mut desired = 0.0;
            let mut interference = 0.0;
            for k in 0..u {
                let mut acc = Complex64::new(0.0, 0.0);
                for j in 0..a {
                    let p = mw[j * u + k];
                    if p > 0.0 {
                        acc += self.cross[(i * u + k) * a + j] * p.sqrt();
                    }
                }
                if k == i {
                    desired = acc.norm_sqr();
                } else {
                    interference += acc.norm_sqr();
                }
            }
            out[i] = desired / (noise + interference);
        }
    }

    /// Scores coverage-masked powers (mW, `j * U + i`) without building beams.
    pub fn score(&self, mw: &[f64], params: &PhyParams, noise: f64, coverage: &Coverage) -> Score {
        let u = self.vu_count;
        if !feasible_mw(mw, self.ap_count, u, params, coverage) {
            return Score {
                reward: 0.0,
                feasible: false,
                success: false,
            };
        }
        let mut sinr = [0.0f64; 16];
        let mut heap;
        let sinr: &mut [f64] = if u <= sinr.len() {
            &mut sinr[..u]
        } else {
            heap = vec![0.0; u];
            &mut heap
        };
        self.sinr_into(mw, noise, sinr);
        if !meets_thresholds(sinr, params) {
            return Score {
                reward: 0.0,
                feasible: true,
                success: false,
            };
        }
        let mut total = 0.0;
        for (i, &g) in sinr.iter().enumerate() {
            let serving = (0..self.ap_count).filter(|&j| mw[j * u + i] > 0.0).count();
            total += params.zeta[i] * serving as f64 * rate(g, params.kappa);
        }
        Score {
            reward: total,
            feasible: true,
            success: true,
        }
    }
}
