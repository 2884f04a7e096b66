//! Software-defined vehicular downlink simulator.
//!
//! Several multi-antenna access points jointly serve vehicle users through
//! user-centric virtual cells. The crate models the freeway scenario, the
//! radio channel, the beamforming/SINR/rate chain, and the finite
//! state/action formulation used by tabular Q-learning solvers
//! (single-agent, cooperative multi-agent, and a partitioned distributed
//! variant with a central best-action register). An exhaustive genie
//! search and two non-learning power policies serve as comparison anchors.


pub mod actionspace;
pub mod agents;
pub mod baselines;
pub mod channel;
pub mod error;
pub mod harness;
pub mod mobility;
pub mod par;
pub mod phy;
pub mod seed;
pub mod units;

pub use error::{Error, Result};
