//! Joint trajectory and transceiver beamforming planner for a UAV base
//! station with integrated sensing.
//!
//! A full-duplex UAV carrying a uniform planar array serves `K` ground users
//! over a slotted mission while transmitting a jamming stream toward a
//! passive eavesdropper and sensing it through the echo of its own downlink
//! signal. The planner maximizes the sum secrecy rate of the users subject
//! to transmit power, kinematic, and sensing-SINR constraints by block
//! coordinate descent over three blocks:
//!
//! - the UAV trajectory, via a successive-convex-approximation step
//!   ([`trajopt`]),
//! - the receive filter, via a closed-form max-SINR solution ([`rxbf`]),
//! - the transmit beamformers, via per-slot semidefinite relaxation with
//!   rank-1 extraction ([`txbf`]),
//!
//! orchestrated by [`bcd`]. Channel and rate models live in [`channel`] and
//! [`metrics`]; both convex subproblems are expressed through the
//! solver-neutral [`conic`] layer.

pub mod bcd;
pub mod channel;
pub mod conic;
pub mod metrics;
pub mod rng;
pub mod rxbf;
pub mod scenario;
pub mod trajopt;
pub mod txbf;

pub use channel::{ChannelState, SlotChannel, SteeringVector};
pub use metrics::BeamformerSet;
pub use scenario::{straight_line_trajectory, ScenarioConfig, ScenarioError, Trajectory};
