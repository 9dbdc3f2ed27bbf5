use crate::error::{Error, Result};
use crate::simulator::{Channel, Timetag};

/// Start–stop delay histogram between the two arms.
///
/// Positive delays come from A starts stopped by the next B click; negative
/// delays from B starts stopped by the next strictly later A click, so a
/// coincident pair is counted once, at zero.
#[derive(Debug, Clone, PartialEq)]
pub struct StartStopHistogram {
    pub bin_width_ps: u64,
    pub span_ps: u64,
    pub counts: Vec<u64>,
    /// Number of start–stop pairs with |delay| ≤ span.
    pub pairs: u64,
}

impl StartStopHistogram {
    /// Center of bin `i` in picoseconds.
    pub fn bin_center(&self, i: usize) -> f64 {
        -(self.span_ps as f64) + (i as f64 + 0.5) * self.bin_width_ps as f64
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    /// Counts in bins whose center lies in `(center - half, center + half]`.
    pub fn area(&self, center_ps: f64, half_width_ps: f64) -> u64 {
        self.counts
            .iter()
            .enumerate()
            .filter(|(i, _)| {
                let c = self.bin_center(*i);
                c > center_ps - half_width_ps && c <= center_ps + half_width_ps
            })
            .map(|(_, &n)| n)
            .sum()
    }

    /// Zero-delay peak area over ±τ_rep/2.
    pub fn central_area(&self, rep_period_ps: u64) -> u64 {
        self.area(0.0, rep_period_ps as f64 / 2.0)
    }

    /// Mean area of the peaks at ±`order`·τ_rep.
    pub fn side_area(&self, rep_period_ps: u64, order: u32) -> f64 {
        let c = (order as u64 * rep_period_ps) as f64;
        let h = rep_period_ps as f64 / 2.0;
        (self.area(c, h) + self.area(-c, h)) as f64 / 2.0
    }
}

pub fn startstop_histogram(tags: &[Timetag], bin_width_ps: u64, span_ps: u64) -> Result<StartStopHistogram> {
    if bin_width_ps == 0 {
        return Err(Error::param("bin_width", "must be > 0"));
    }
    if span_ps == 0 {
        return Err(Error::param("span", "must be > 0"));
    }
    let a: Vec<u64> = tags
        .iter()
        .filter(|t| t.channel == Channel::A)
        .map(|t| t.time_ps)
        .collect();
    let b: Vec<u64> = tags
        .iter()
        .filter(|t| t.channel == Channel::B)
        .map(|t| t.time_ps)
        .collect();
    if a.is_empty() || b.is_empty() {
        return Err(Error::param("tags", "start-stop needs clicks on both channels"));
    }
    if a.windows(2).any(|w| w[1] < w[0]) || b.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::param("tags", "must be sorted by time"));
    }

    let n_bins = (2 * span_ps).div_ceil(bin_width_ps) as usize;
    let mut hist = StartStopHistogram {
        bin_width_ps,
        span_ps,
        counts: vec![0; n_bins],
        pairs: 0,
    };
    let mut record = |delay: i64| {
        if delay.unsigned_abs() <= span_ps {
            let idx = ((delay + span_ps as i64) as u64 / bin_width_ps) as usize;
            hist.counts[idx.min(n_bins - 1)] += 1;
            hist.pairs += 1;
        }
    };

    let mut j = 0;
    for &start in &a {
        while j < b.len() && b[j] < start {
            j += 1;
        }
        if let Some(&stop) = b.get(j) {
            record((stop - start) as i64);
        }
    }
    let mut j = 0;
    for &start in &b {
        while j < a.len() && a[j] <= start {
            j += 1;
        }
        if let Some(&stop) = a.get(j) {
            record(-((stop - start) as i64));
        }
    }
    Ok(hist)
}
