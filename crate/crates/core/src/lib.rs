//! Performance modelling of unslotted IEEE 802.15.4 CSMA/CA over composite
//! lognormal / Nakagami fading channels.
//!
//! Two engines share one [`scenario::Scenario`]: the analytic engine
//! ([`macmodel`], [`metrics`], [`multihop`]) solves the coupled MAC and
//! physical-layer fixed point, and [`sim`] runs a discrete-event Monte Carlo
//! simulation of the same network.

// `!(x > 0.0)` is how NaN gets rejected along with the out-of-range values
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod channel;
pub mod error;
pub mod macmodel;
pub mod metrics;
pub mod multihop;
pub mod scenario;
pub mod sim;
pub mod topology;

pub use error::{Error, Result};
