use super::{dispersion, PulseCountSeries};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VarianceEntry {
    /// First pulse of the window.
    pub start: usize,
    pub mean: f64,
    pub v_w: f64,
}

/// Time trace of the normalized variance over windows of `window` pulses.
#[derive(Debug, Clone, PartialEq)]
pub struct VarianceTrace {
    pub window: usize,
    pub entries: Vec<VarianceEntry>,
}

/// Slides a `window`-pulse sample one pulse at a time and reports
/// population variance over mean. Windows without counts report 1.
pub fn sliding_variance(series: &PulseCountSeries, window: usize) -> Result<VarianceTrace> {
    if window == 0 {
        return Err(Error::param("window", "must be >= 1"));
    }
    if window > series.len() {
        return Err(Error::param(
            "window",
            format!("exceeds series length {}", series.len()),
        ));
    }
    let counts = &series.counts;
    let (mut sum, mut sum_sq) = (0u128, 0u128);
    for &c in &counts[..window] {
        sum += c as u128;
        sum_sq += (c as u128) * (c as u128);
    }
    let mut entries = Vec::with_capacity(series.len() - window + 1);
    for start in 0..=(series.len() - window) {
        if start > 0 {
            let out = counts[start - 1] as u128;
            let inc = counts[start + window - 1] as u128;
            sum = sum + inc - out;
            sum_sq = sum_sq + inc * inc - out * out;
        }
        entries.push(VarianceEntry {
            start,
            mean: sum as f64 / window as f64,
            v_w: dispersion(window as u64, sum, sum_sq).unwrap_or(1.0),
        });
    }
    Ok(VarianceTrace { window, entries })
}
