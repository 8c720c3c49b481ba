//! Dynamic VM type selection for autoscaled application servers.
//!
//! The crate learns an application's users-to-resources relationship online
//! (per-VM HTM anomaly detection feeding an anomaly-adaptive neural
//! regression), estimates the effective capacity of every VM type from
//! in-VM measurements, and picks the type with the lowest cost per servable
//! user whenever the fleet has to grow. [`simenv`] provides a deterministic
//! simulated cloud to exercise the whole loop against static baselines.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod ann;
pub mod autoscaler;
pub mod capacity;
mod error;
pub mod htm;
pub mod metrics;
pub mod par;
pub mod selector;
pub mod simenv;

pub use error::{Error, Result};

/// Bytes in one gibibyte. Memory sizes quoted as "GB" are treated as GiB.
pub const GIB: u64 = 1 << 30;
/// Bytes in one mebibyte.
pub const MIB: u64 = 1 << 20;

/// Converts a (possibly fractional) GiB amount into bytes, rounding to the
/// nearest byte.
pub fn gib(amount: f64) -> u64 {
    (amount * GIB as f64).round() as u64
}
