//! Measurement side of the toolkit.
//!
//! Timetags are first synchronized on the excitation timebase
//! ([`bin_to_pulses`]); every estimator then works on the resulting
//! per-pulse count table. Late photons are rejected before any statistic is
//! formed.

mod binning;
mod histogram;
mod photocount;
mod qcurve;
mod variance;

pub use binning::{bin_to_pulses, PulseBinning, PulseCountSeries};
pub use histogram::{startstop_histogram, StartStopHistogram};
pub use photocount::{estimate_pn, PhotocountStats};
pub use qcurve::{default_k_grid, mandel_q_curve, mandel_q_curve_with, QCurve, QCurveOptions, QPoint};
pub use variance::{sliding_variance, VarianceEntry, VarianceTrace};

/// Normalized variance `Var/Mean` from integer moments of `count` samples.
///
/// All estimators share this so that equal data give bit-identical results.
/// Returns `None` when the mean is zero.
pub(crate) fn dispersion(count: u64, sum: u128, sum_sq: u128) -> Option<f64> {
    if sum == 0 || count == 0 {
        return None;
    }
    let n = count as u128;
    // population variance: (n·Σx² − (Σx)²) / n², mean Σx / n
    let numer = n * sum_sq - sum * sum;
    Some(numer as f64 / (n * sum) as f64)
}
