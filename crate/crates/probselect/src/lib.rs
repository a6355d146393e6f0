//! Deadline-aware probabilistic client selection for GPU fleets.
//!
//! Federated rounds on heterogeneous GPU devices routinely miss their
//! deadline: the coordinator ships work to everyone, the slow devices blow
//! the budget, and their updates are thrown away along with the energy that
//! produced them. This crate models the round analytically (network
//! transfers, PCIe staging, compute at some FLOP utilization), inverts the
//! model into a per-device minimum utilization for a given deadline, and
//! selects a device only when the probability of clearing that bar is high
//! enough.
//!
//! The pieces:
//!
//! - [`model`]: the latency model and its inverse (utilization from a
//!   measured training time).
//! - [`selection`]: the probabilistic selector and the take-everyone
//!   baseline it is benchmarked against.
//! - [`fleet`]: built-in GPU/workload catalogs and synthetic fleet
//!   generation.
//! - [`engine`]: a reproducible round simulator that runs both policies on
//!   identical environments and reports deadline-compliance and waste.
//! - [`cli`]: the `probselect` binary.
//!
//! Determinism: every random quantity derives from `(seed, lane, round)`,
//! so experiments are byte-for-byte reproducible and rounds parallelize
//! without changing results.

// `!(x > 0.0)` guards are deliberate: they also reject NaN
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod engine;
mod erf;
pub mod error;
pub mod fleet;
pub mod model;
pub mod selection;
mod stream;

pub use error::{Error, Result};
