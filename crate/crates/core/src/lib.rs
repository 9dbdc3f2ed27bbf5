//! Photon-statistics toolkit for triggered single-photon sources.
//!
//! The crate is split along the measurement chain:
//!
//! - [`model`]: closed-form photocount laws (saturation, dead-time clipped
//!   coherent light, SPS-plus-background decomposition, blinking Mandel law).
//! - [`simulator`]: Monte Carlo generation of two-channel timetag streams.
//! - [`statistics`]: per-pulse count tables, P(n), V_W traces, Q(T) curves and
//!   start-stop histograms.
//! - [`fitting`]: saturation and Q(T) parameter recovery.
//! - [`io`]: timetag files, flat configs, CSV curves and reports.

// `!(x > 0.0)` checks double as NaN rejection
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod fitting;
pub mod io;
pub mod model;
pub mod simulator;
pub mod statistics;

pub use error::{Error, Result};

/// Toolkit version recorded in run manifests.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Picoseconds per second.
pub const PS_PER_S: f64 = 1e12;

/// Converts seconds to integer picoseconds, rounding to nearest.
pub fn seconds_to_ps(seconds: f64) -> u64 {
    (seconds * PS_PER_S).round() as u64
}
