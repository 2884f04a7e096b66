//! Per-(vehicle, AP) channel vectors built from three factors: distance
//! pathloss, log-normal shadowing, and i.i.d. Rayleigh fast fading across
//! the AP antennas. The composition is done in amplitude:
//! `h = sqrt(D) * sqrt(rho) * tau`.

use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, FieldError, Result};
use crate::mobility::ApLayout;
use crate::seed::{self, Stream};
use crate::units::db_to_linear;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum FadingMode {
    /// The channel is a pure function of (state, pair, seed).
    #[default]
    Frozen,
    /// A fresh draw on every visit to a state.
    Stochastic,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ChannelConfig {
    /// Pathloss at 1 km, dB.
    pub pathloss_intercept_db: f64,
    /// Pathloss slope, dB per decade of distance.
    pub pathloss_slope_db: f64,
    /// Distances below this are clamped up to it, meters.
    pub reference_distance: f64,
    pub shadowing_std_db: f64,
    /// Receiver noise power, mW.
    pub noise_variance: f64,
    pub fading_mode: FadingMode,
}

/// Thermal noise over 10 MHz with a 9 dB noise figure: -174 + 70 + 9 = -95 dBm.
pub const DEFAULT_NOISE_DBM: f64 = -95.0;

impl Default for ChannelConfig {
    fn default() -> Self {
        Self {
            pathloss_intercept_db: 128.1,
            pathloss_slope_db: 37.6,
            reference_distance: 35.0,
            shadowing_std_db: 8.0,
            noise_variance: db_to_linear(DEFAULT_NOISE_DBM),
            fading_mode: FadingMode::Frozen,
        }
    }
}

impl ChannelConfig {
    pub fn validate(&self, prefix: &str, errs: &mut Vec<FieldError>) {
        let f = |n: &str| format!("{prefix}.{n}");
        if !(self.shadowing_std_db >= 0.0) {
            errs.push(FieldError::new(f("shadowing_std_db"), "must be >= 0"));
        }
        if !(self.noise_variance > 0.0) {
            errs.push(FieldError::new(f("noise_variance"), "must be > 0"));
        }
        if !(self.reference_distance > 0.0) {
            errs.push(FieldError::new(f("reference_distance"), "must be > 0"));
        }
        if !self.pathloss_intercept_db.is_finite() || !self.pathloss_slope_db.is_finite() {
            errs.push(FieldError::new(f("pathloss_slope_db"), "pathloss parameters must be finite"));
        }
    }
}

/// Pathloss in dB at `distance` meters (after the reference clamp).
pub fn pathloss_db(distance: f64, config: &ChannelConfig) -> Result<f64> {
    if !(distance > 0.0) {
        return Err(Error::Domain(format!("distance must be > 0, got {distance}")));
    }
    let d = distance.max(config.reference_distance);
    Ok(config.pathloss_intercept_db + config.pathloss_slope_db * (d / 1000.0).log10())
}

/// Linear large-scale power gain at `distance` meters.
pub fn pathloss_gain(distance: f64, config: &ChannelConfig) -> Result<f64> {
    Ok(db_to_linear(-pathloss_db(distance, config)?))
}

#[derive(Debug, Clone, PartialEq)]
pub struct PairChannel {
    /// Large-scale power gain `D`.
    pub large_scale: f64,
    /// Linear shadowing factor `rho`.
    pub shadowing: f64,
    /// Unit-variance fast-fading vector, one entry per antenna.
    pub fast: Vec<Complex64>,
    /// Composite channel vector.
    pub h: Vec<Complex64>,
}

impl PairChannel {
    pub fn compose(large_scale: f64, shadowing: f64, fast: Vec<Complex64>) -> Self {
        let amp = (large_scale * shadowing).sqrt();
        let h = fast.iter().map(|t| t * amp).collect();
        Self {
            large_scale,
            shadowing,
            fast,
            h,
        }
    }

    pub fn norm(&self) -> f64 {
        self.h.iter().map(Complex64::norm_sqr).sum::<f64>().sqrt()
    }
}

/// Draws one circularly-symmetric complex Gaussian sample with unit variance.
pub fn cn01<R: Rng + ?Sized>(rng: &mut R) -> Complex64 {
    let re: f64 = StandardNormal.sample(rng);
    let im: f64 = StandardNormal.sample(rng);
    Complex64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
}

pub fn draw_pair<R: Rng + ?Sized>(
    distance: f64,
    antennas: usize,
    config: &ChannelConfig,
    rng: &mut R,
) -> Result<PairChannel> {
    let d = pathloss_gain(distance, config)?;
    let x: f64 = StandardNormal.sample(rng);
    let rho = db_to_linear(x * config.shadowing_std_db);
    let fast = (0..antennas).map(|_| cn01(rng)).collect();
    Ok(PairChannel::compose(d, rho, fast))
}

/// All (vehicle, AP) channels at one instant. Pair `(i, j)` is stored at
/// `i * ap_count + j`.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelRealization {
    pub vu_count: usize,
    pub ap_count: usize,
    pub pairs: Vec<PairChannel>,
}

impl ChannelRealization {
    pub fn pair(&self, vu: usize, ap: usize) -> &PairChannel {
        &self.pairs[vu * self.ap_count + ap]
    }

    /// Stacked channel of vehicle `vu` across all APs.
    pub fn stacked(&self, vu: usize) -> Vec<Complex64> {
        (0..self.ap_count)
            .flat_map(|j| self.pair(vu, j).h.iter().copied())
            .collect()
    }
}

fn distance(a: [f64; 2], b: [f64; 2]) -> f64 {
    (a[0] - b[0]).hypot(a[1] - b[1])
}

fn draw_keyed(
    vu_positions: &[[f64; 2]],
    aps: &ApLayout,
    config: &ChannelConfig,
    stream: Stream,
    seed: u64,
    key: u64,
) -> Result<ChannelRealization> {
    let ap_count = aps.len();
    let mut pairs = Vec::with_capacity(vu_positions.len() * ap_count);
    for (i, &vu) in vu_positions.iter().enumerate() {
        for (j, &ap) in aps.positions.iter().enumerate() {
            let mut rng = seed::rng(seed, stream, &[key, (i * ap_count + j) as u64]);
            pairs.push(draw_pair(distance(vu, ap), aps.antennas_per_ap, config, &mut rng)?);
        }
    }
    Ok(ChannelRealization {
        vu_count: vu_positions.len(),
        ap_count,
        pairs,
    })
}

/// Frozen draw: a pure function of (geometry, `state_id`, pair index, `seed`).
pub fn draw_channel(
    vu_positions: &[[f64; 2]],
    aps: &ApLayout,
    state_id: u64,
    seed: u64,
    config: &ChannelConfig,
) -> Result<ChannelRealization> {
    draw_keyed(vu_positions, aps, config, Stream::FrozenChannel, seed, state_id)
}

/// Fresh draw for the `draw`-th visit in stochastic mode.
pub fn draw_channel_fresh(
    vu_positions: &[[f64; 2]],
    aps: &ApLayout,
    draw: u64,
    seed: u64,
    config: &ChannelConfig,
) -> Result<ChannelRealization> {
    draw_keyed(vu_positions, aps, config, Stream::StochasticChannel, seed, draw)
}

/// Independent Monte Carlo draws used by the stochastic-mode genie.
pub fn draw_channel_sample(
    vu_positions: &[[f64; 2]],
    aps: &ApLayout,
    state_id: u64,
    sample: u64,
    seed: u64,
    config: &ChannelConfig,
) -> Result<ChannelRealization> {
    let key = seed::derive(state_id, Stream::GenieDraws, &[sample]);
    draw_keyed(vu_positions, aps, config, Stream::GenieDraws, seed, key)
}

/// Closed-ball coverage test.
pub fn in_coverage(vu_position: [f64; 2], ap_position: [f64; 2], radius: f64) -> bool {
    distance(vu_position, ap_position) <= radius
}

/// Coverage predicate per (vehicle, AP) pair, stored at `i * ap_count + j`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Coverage {
    pub vu_count: usize,
    pub ap_count: usize,
    pub covered: Vec<bool>,
}

impl Coverage {
    pub fn compute(vu_positions: &[[f64; 2]], aps: &ApLayout) -> Self {
        let covered = vu_positions
            .iter()
            .flat_map(|&vu| {
                aps.positions
                    .iter()
                    .map(move |&ap| in_coverage(vu, ap, aps.coverage_radius))
            })
            .collect();
        Self {
            vu_count: vu_positions.len(),
            ap_count: aps.len(),
            covered,
        }
    }

    pub fn full(vu_count: usize, ap_count: usize) -> Self {
        Self {
            vu_count,
            ap_count,
            covered: vec![true; vu_count * ap_count],
        }
    }

    #[inline]
    pub fn is_covered(&self, vu: usize, ap: usize) -> bool {
        self.covered[vu * self.ap_count + ap]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn layout() -> ApLayout {
        ApLayout {
            positions: vec![[100.0, 0.0], [250.0, 0.0], [400.0, 0.0]],
            coverage_radius: 250.0,
            antennas_per_ap: 8,
        }
    }

    #[test]
    fn pathloss_examples() {
        let c = ChannelConfig::default();
        assert!((pathloss_db(1000.0, &c).unwrap() - 128.1).abs() < 1e-12);
        assert!((pathloss_db(100.0, &c).unwrap() - 90.5).abs() < 1e-12);
        assert_eq!(pathloss_gain(10.0, &c).unwrap(), pathloss_gain(35.0, &c).unwrap());
        assert!((pathloss_gain(1000.0, &c).unwrap() - 10f64.powf(-12.81)).abs() < 1e-25);
    }

    #[test]
    fn nonpositive_distance_is_a_domain_error() {
        let c = ChannelConfig::default();
        assert!(matches!(pathloss_gain(0.0, &c), Err(Error::Domain(_))));
        assert!(matches!(pathloss_gain(-3.0, &c), Err(Error::Domain(_))));
    }

    #[test]
    fn unit_factors_pass_fast_fading_through() {
        let v = vec![Complex64::new(0.3, -1.2), Complex64::new(2.0, 0.5)];
        let p = PairChannel::compose(1.0, 1.0, v.clone());
        assert_eq!(p.h, v);
    }

    #[test]
    fn frozen_draw_reproduces_per_state() {
        let c = ChannelConfig::default();
        let pos = [[50.0, 2.0], [50.0, 6.0]];
        let a = draw_channel(&pos, &layout(), 7, 99, &c).unwrap();
        let b = draw_channel(&pos, &layout(), 7, 99, &c).unwrap();
        assert_eq!(a, b);
        let other = draw_channel(&pos, &layout(), 8, 99, &c).unwrap();
        assert_ne!(a.pair(0, 0).fast, other.pair(0, 0).fast);
        assert_eq!(a.stacked(1).len(), 24);
    }

    #[test]
    fn fast_fading_has_unit_second_moment() {
        let mut rng = ChaCha8Rng::seed_from_u64(2024);
        let n = 100_000;
        let m = (0..n).map(|_| cn01(&mut rng).norm_sqr()).sum::<f64>() / n as f64;
        assert!((m - 1.0).abs() < 0.02, "mean |tau|^2 = {m}");
    }

    #[test]
    fn composite_power_averages_to_large_scale_times_shadowing() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let (d, rho) = (3.0e-9, 2.5);
        let n = 20_000;
        let mut acc = 0.0;
        for _ in 0..n {
            let p = PairChannel::compose(d, rho, vec![cn01(&mut rng)]);
            acc += p.h[0].norm_sqr();
        }
        let ratio = acc / n as f64 / (d * rho);
        assert!((ratio - 1.0).abs() < 0.03, "ratio {ratio}");
    }

    #[test]
    fn shadowing_off_gives_pure_pathloss() {
        let c = ChannelConfig {
            shadowing_std_db: 0.0,
            ..ChannelConfig::default()
        };
        let ch = draw_channel(&[[100.0, 10.0]], &layout(), 0, 1, &c).unwrap();
        assert_eq!(ch.pair(0, 0).shadowing, 1.0);
        assert_eq!(ch.pair(0, 0).large_scale, pathloss_gain(35.0, &c).unwrap());
    }

    #[test]
    fn coverage_boundary_is_inclusive() {
        assert!(in_coverage([100.0, 0.0], [0.0, 0.0], 250.0));
        assert!(in_coverage([250.0, 0.0], [0.0, 0.0], 250.0));
        assert!(!in_coverage([300.0, 0.0], [0.0, 0.0], 250.0));
        let cov = Coverage::compute(&[[0.0, 2.0]], &layout());
        assert_eq!(cov.covered, vec![true, false, false]);
    }

    proptest! {
        #[test]
        fn pathloss_gain_is_monotone(a in 35.0f64..5000.0, b in 35.0f64..5000.0) {
            let c = ChannelConfig::default();
            let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
            prop_assert!(pathloss_gain(lo, &c).unwrap() >= pathloss_gain(hi, &c).unwrap());
        }
    }
}
