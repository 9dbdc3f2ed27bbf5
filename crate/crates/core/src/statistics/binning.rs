use crate::error::{Error, Result};
use crate::model::ExcitationConfig;
use crate::seconds_to_ps;
use crate::simulator::Timetag;

/// Per-pulse photocount table `n_i`.
#[derive(Debug, Clone, PartialEq)]
pub struct PulseCountSeries {
    pub counts: Vec<u32>,
    /// Repetition period in seconds.
    pub rep_period: f64,
    /// Clicks dropped as late photons or outside the run.
    pub rejected_count: u64,
}

impl PulseCountSeries {
    pub fn new(counts: Vec<u32>, rep_period: f64) -> Self {
        PulseCountSeries {
            counts,
            rep_period,
            rejected_count: 0,
        }
    }

    pub fn len(&self) -> usize {
        self.counts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.counts.is_empty()
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().map(|&c| c as u64).sum()
    }

    pub(crate) fn prefix_sums(&self) -> Vec<u64> {
        let mut prefix = Vec::with_capacity(self.counts.len() + 1);
        let mut acc = 0u64;
        prefix.push(0);
        for &c in &self.counts {
            acc += c as u64;
            prefix.push(acc);
        }
        prefix
    }
}

/// Timebase used to assign clicks to excitation pulses.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PulseBinning {
    pub rep_period_ps: u64,
    /// Clicks later than this after their pulse are rejected.
    pub reject_window_ps: u64,
    pub n_pulses: u64,
}

impl PulseBinning {
    pub fn new(excitation: &ExcitationConfig, reject_window_mult: f64, n_pulses: u64) -> Self {
        PulseBinning {
            rep_period_ps: seconds_to_ps(excitation.rep_period),
            reject_window_ps: seconds_to_ps(reject_window_mult * excitation.rad_lifetime),
            n_pulses,
        }
    }
}

/// Builds the count table: pulse `floor(t/τ_rep)`, dropping clicks whose
/// delay exceeds the reject window.
pub fn bin_to_pulses(tags: &[Timetag], binning: &PulseBinning) -> Result<PulseCountSeries> {
    if binning.rep_period_ps == 0 {
        return Err(Error::param("rep_period", "must be > 0"));
    }
    let mut counts = vec![0u32; binning.n_pulses as usize];
    let mut rejected = 0u64;
    let mut prev = 0u64;
    for (index, tag) in tags.iter().enumerate() {
        if tag.time_ps < prev {
            return Err(Error::OutOfOrder { index });
        }
        prev = tag.time_ps;
        let pulse = tag.time_ps / binning.rep_period_ps;
        let delay = tag.time_ps % binning.rep_period_ps;
        if delay > binning.reject_window_ps || pulse >= binning.n_pulses {
            rejected += 1;
            continue;
        }
        counts[pulse as usize] += 1;
    }
    Ok(PulseCountSeries {
        counts,
        rep_period: binning.rep_period_ps as f64 / crate::PS_PER_S,
        rejected_count: rejected,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::simulator::Channel;

    fn binning(n: u64) -> PulseBinning {
        PulseBinning::new(&ExcitationConfig::reference(), 10.0, n)
    }

    fn tag(time_ps: u64) -> Timetag {
        Timetag {
            time_ps,
            channel: Channel::A,
        }
    }

    #[test]
    fn empty_stream() {
        let s = bin_to_pulses(&[], &binning(100)).unwrap();
        assert_eq!(s.counts, vec![0; 100]);
        assert_eq!(s.rejected_count, 0);
        assert_eq!(s.rep_period, 0.5e-6);
    }

    #[test]
    fn tag_inside_window() {
        // 5 τ_rad = 14 ns after pulse 7
        let s = bin_to_pulses(&[tag(7 * 500_000 + 14_000)], &binning(100)).unwrap();
        assert_eq!(s.counts[7], 1);
        assert_eq!(s.total(), 1);
    }

    #[test]
    fn late_tag_rejected() {
        // 11 τ_rad = 30.8 ns, cutoff is 28 ns
        let s = bin_to_pulses(&[tag(7 * 500_000 + 30_800)], &binning(100)).unwrap();
        assert_eq!(s.total(), 0);
        assert_eq!(s.rejected_count, 1);
        // exactly on the cutoff is kept
        let s = bin_to_pulses(&[tag(3 * 500_000 + 28_000)], &binning(100)).unwrap();
        assert_eq!(s.counts[3], 1);
    }

    #[test]
    fn beyond_run_rejected() {
        let s = bin_to_pulses(&[tag(100 * 500_000)], &binning(100)).unwrap();
        assert_eq!(s.rejected_count, 1);
    }

    #[test]
    fn unsorted_is_format_error() {
        let err = bin_to_pulses(&[tag(10), tag(5)], &binning(10)).unwrap_err();
        assert!(matches!(err, Error::OutOfOrder { index: 1 }));
    }
}
