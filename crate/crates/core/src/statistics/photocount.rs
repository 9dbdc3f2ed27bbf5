use super::{dispersion, PulseCountSeries};
use crate::error::{Error, Result};

/// Photocount distribution and its normalized variance over a whole series.
#[derive(Debug, Clone, PartialEq)]
pub struct PhotocountStats {
    pub n_pulses: u64,
    /// `probabilities[n]` is the fraction of pulses with `n` counts.
    pub probabilities: Vec<f64>,
    pub mean: f64,
    /// `None` when no count was recorded.
    pub variance_norm: Option<f64>,
    pub mandel_q: Option<f64>,
}

impl PhotocountStats {
    pub fn p(&self, n: usize) -> f64 {
        self.probabilities.get(n).copied().unwrap_or(0.0)
    }
}

pub fn estimate_pn(series: &PulseCountSeries) -> Result<PhotocountStats> {
    if series.is_empty() {
        return Err(Error::param("series", "must contain at least one pulse"));
    }
    let mut histogram: Vec<u64> = vec![0; 3];
    let (mut sum, mut sum_sq) = (0u128, 0u128);
    for &c in &series.counts {
        let c = c as usize;
        if c >= histogram.len() {
            histogram.resize(c + 1, 0);
        }
        histogram[c] += 1;
        sum += c as u128;
        sum_sq += (c * c) as u128;
    }
    let n = series.len() as u64;
    let variance_norm = dispersion(n, sum, sum_sq);
    Ok(PhotocountStats {
        n_pulses: n,
        probabilities: histogram.iter().map(|&h| h as f64 / n as f64).collect(),
        mean: sum as f64 / n as f64,
        variance_norm,
        mandel_q: variance_norm.map(|v| v - 1.0),
    })
}
