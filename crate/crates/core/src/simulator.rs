//! Monte Carlo generation of two-channel detection timetags.
//!
//! The chain per excitation pulse is: ON/OFF blinking, single-photon emission
//! with an exponential delay, pulse-synchronous Poissonian background, a
//! beamsplitter, and per-channel dark counts and non-paralyzable dead time.
//! Runs are sequential; independent seeds may run in parallel.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp, Poisson};

use crate::error::{Error, Result};
use crate::model::{excited_state_population, EmitterModel, ExcitationConfig};
use crate::seconds_to_ps;

/// Detector arm behind the beamsplitter.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Channel {
    A,
    B,
}

impl Channel {
    pub fn index(self) -> u8 {
        match self {
            Channel::A => 0,
            Channel::B => 1,
        }
    }

    pub fn from_index(i: u8) -> Option<Self> {
        match i {
            0 => Some(Channel::A),
            1 => Some(Channel::B),
            _ => None,
        }
    }
}

/// One detection event, in integer picoseconds since the first pulse.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Timetag {
    pub time_ps: u64,
    pub channel: Channel,
}

/// Detector chain parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DetectionConfig {
    /// Per-channel dead time in seconds.
    pub dead_time: f64,
    /// Dark counts per second per channel.
    pub dark_rate: f64,
    /// Probability that a photon is routed to channel A.
    pub split_ratio: f64,
    /// Late-photon cutoff in units of the radiative lifetime.
    pub reject_window_mult: f64,
    /// Probability that an emitted source photon yields a click.
    pub efficiency: f64,
    /// Mean background clicks per pulse.
    pub background_mean: f64,
}

impl Default for DetectionConfig {
    fn default() -> Self {
        DetectionConfig {
            dead_time: 250e-9,
            dark_rate: 100.0,
            split_ratio: 0.5,
            reject_window_mult: 10.0,
            efficiency: 1.0,
            background_mean: 0.0,
        }
    }
}

impl DetectionConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.dead_time >= 0.0 && self.dead_time.is_finite()) {
            return Err(Error::param("dead_time", "must be finite and >= 0"));
        }
        if !(self.dark_rate >= 0.0 && self.dark_rate.is_finite()) {
            return Err(Error::param("dark_rate", "must be finite and >= 0"));
        }
        if !(0.0..=1.0).contains(&self.split_ratio) {
            return Err(Error::param("split_ratio", "must lie in [0, 1]"));
        }
        if !(self.reject_window_mult > 1.0 && self.reject_window_mult.is_finite()) {
            return Err(Error::param("reject_window_mult", "must be > 1"));
        }
        if !(0.0..=1.0).contains(&self.efficiency) {
            return Err(Error::param("efficiency", "must lie in [0, 1]"));
        }
        if !(self.background_mean >= 0.0 && self.background_mean.is_finite()) {
            return Err(Error::param("background_mean", "must be finite and >= 0"));
        }
        Ok(())
    }
}

/// Everything needed to reproduce one simulated acquisition.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RunConfig {
    pub excitation: ExcitationConfig,
    pub emitter: EmitterModel,
    pub detection: DetectionConfig,
    pub n_pulses: u64,
    pub seed: u64,
}

/// Overall detection efficiency of the reference preset, including the
/// emission probability and the ON fraction.
pub const REFERENCE_OVERALL_EFFICIENCY: f64 = 0.0445;
/// Background clicks per pulse of the reference preset.
pub const REFERENCE_BACKGROUND_MEAN: f64 = 2.2e-3;
/// Number of pulses the reference molecule survived.
pub const REFERENCE_PULSES: u64 = 319_769;

impl RunConfig {
    /// Single molecule at 2 MHz with 250 ns dead time.
    ///
    /// The detector efficiency is chosen so that emission probability × ON
    /// fraction × efficiency equals [`REFERENCE_OVERALL_EFFICIENCY`].
    pub fn reference(seed: u64) -> Self {
        let excitation = ExcitationConfig::reference();
        let sigma = excited_state_population(&excitation).expect("preset is valid");
        let emitter = EmitterModel {
            isc_prob: 2e-4,
            triplet_lifetime: 250e-6,
            bleach_prob: 0.0,
            emission_prob: sigma,
        };
        let on = stationary_on_fraction(&emitter, excitation.rep_period);
        let detection = DetectionConfig {
            efficiency: REFERENCE_OVERALL_EFFICIENCY / (sigma * on),
            background_mean: REFERENCE_BACKGROUND_MEAN,
            ..DetectionConfig::default()
        };
        RunConfig {
            excitation,
            emitter,
            detection,
            n_pulses: REFERENCE_PULSES,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.excitation.validate()?;
        self.emitter.validate(self.excitation.rep_period)?;
        self.detection.validate()?;
        if self.n_pulses == 0 {
            return Err(Error::param("n_pulses", "must be >= 1"));
        }
        Ok(())
    }

    pub fn rep_period_ps(&self) -> u64 {
        seconds_to_ps(self.excitation.rep_period)
    }

    pub fn reject_window_ps(&self) -> u64 {
        seconds_to_ps(self.detection.reject_window_mult * self.excitation.rad_lifetime)
    }
}

/// Stationary ON probability of the per-pulse chain actually simulated.
pub fn stationary_on_fraction(emitter: &EmitterModel, rep_period: f64) -> f64 {
    let r = emitter.recovery_prob(rep_period);
    if emitter.isc_prob + r == 0.0 {
        return 1.0;
    }
    r / (emitter.isc_prob + r)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EmitterState {
    On,
    Off,
    Bleached,
}

impl EmitterState {
    pub fn as_str(self) -> &'static str {
        match self {
            EmitterState::On => "on",
            EmitterState::Off => "off",
            EmitterState::Bleached => "bleached",
        }
    }
}

/// Maximal run of pulses spent in one state; `end` is exclusive.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StateSegment {
    pub start: u64,
    pub end: u64,
    pub state: EmitterState,
}

/// What the emitter really did, kept apart from the timetags.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct GroundTruth {
    pub n_pulses: u64,
    pub segments: Vec<StateSegment>,
    /// Pulse indices on which a photon was emitted (at most one per pulse).
    pub emissions: Vec<u64>,
}

impl GroundTruth {
    /// Fraction of pulses spent ON.
    pub fn on_fraction(&self) -> f64 {
        let on: u64 = self
            .segments
            .iter()
            .filter(|s| s.state == EmitterState::On)
            .map(|s| s.end - s.start)
            .sum();
        on as f64 / self.n_pulses as f64
    }

    /// Dense per-pulse emitted-photon counts.
    pub fn emitted_counts(&self) -> Vec<u32> {
        let mut counts = vec![0u32; self.n_pulses as usize];
        for &i in &self.emissions {
            counts[i as usize] += 1;
        }
        counts
    }

    fn push_state(&mut self, pulse: u64, state: EmitterState) {
        match self.segments.last_mut() {
            Some(last) if last.state == state && last.end == pulse => last.end = pulse + 1,
            _ => self.segments.push(StateSegment {
                start: pulse,
                end: pulse + 1,
                state,
            }),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimulationOutput {
    /// All accepted clicks sorted by time, then channel.
    pub tags: Vec<Timetag>,
    pub truth: GroundTruth,
}

struct ClickSink {
    raw: [Vec<u64>; 2],
    split_ratio: f64,
}

impl ClickSink {
    fn new(split_ratio: f64) -> Self {
        ClickSink {
            raw: [Vec::new(), Vec::new()],
            split_ratio,
        }
    }

    fn route<R: Rng>(&mut self, rng: &mut R, time_ps: u64) {
        let ch = if rng.random::<f64>() < self.split_ratio { 0 } else { 1 };
        self.raw[ch].push(time_ps);
    }

    fn add_dark_counts<R: Rng>(&mut self, rng: &mut R, rate: f64, duration_ps: u64) {
        if rate <= 0.0 {
            return;
        }
        let gap = Exp::new(rate / crate::PS_PER_S).expect("rate checked positive");
        for ch in 0..2 {
            let mut t = 0.0;
            loop {
                t += gap.sample(rng);
                let ps = t.round();
                if ps >= duration_ps as f64 {
                    break;
                }
                self.raw[ch].push(ps as u64);
            }
        }
    }

    fn finish(self, dead_time_ps: u64) -> Vec<Timetag> {
        let mut tags = Vec::new();
        for (ch, mut times) in self.raw.into_iter().enumerate() {
            times.sort_unstable();
            let channel = Channel::from_index(ch as u8).unwrap();
            let mut last: Option<u64> = None;
            for t in times {
                // non-paralyzable: blocked clicks do not extend the window
                if last.is_some_and(|l| t - l < dead_time_ps) {
                    continue;
                }
                last = Some(t);
                tags.push(Timetag { time_ps: t, channel });
            }
        }
        tags.sort_unstable();
        tags
    }
}

/// Simulates a full single-emitter acquisition.
///
/// The molecule starts ON. On every pulse while ON it emits with probability
/// `emission_prob` and independently crosses to the triplet with probability
/// `isc_prob`; while OFF it recovers with probability `1 - exp(-τ_rep/τ_T)`
/// per period.
pub fn simulate_run(cfg: &RunConfig) -> Result<SimulationOutput> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let emitter = &cfg.emitter;
    let det = &cfg.detection;
    let rep_ps = cfg.rep_period_ps();
    let window_ps = cfg.reject_window_ps() as f64;
    let delay = Exp::new(1.0 / (cfg.excitation.rad_lifetime * crate::PS_PER_S))
        .map_err(|e| Error::param("rad_lifetime", e.to_string()))?;
    let background = poisson(det.background_mean)?;
    let recovery = emitter.recovery_prob(cfg.excitation.rep_period);

    let mut sink = ClickSink::new(det.split_ratio);
    let mut truth = GroundTruth {
        n_pulses: cfg.n_pulses,
        ..GroundTruth::default()
    };
    let mut state = EmitterState::On;

    for pulse in 0..cfg.n_pulses {
        let t0 = pulse * rep_ps;
        truth.push_state(pulse, state);
        match state {
            EmitterState::On => {
                if rng.random::<f64>() < emitter.emission_prob {
                    truth.emissions.push(pulse);
                    if rng.random::<f64>() < det.efficiency {
                        let d = delay.sample(&mut rng).round() as u64;
                        sink.route(&mut rng, t0 + d);
                    }
                }
                if emitter.bleach_prob > 0.0 && rng.random::<f64>() < emitter.bleach_prob {
                    state = EmitterState::Bleached;
                } else if rng.random::<f64>() < emitter.isc_prob {
                    state = EmitterState::Off;
                }
            }
            EmitterState::Off => {
                if rng.random::<f64>() < recovery {
                    state = EmitterState::On;
                }
            }
            EmitterState::Bleached => {}
        }
        if let Some(bg) = &background {
            let n = bg.sample(&mut rng) as u64;
            for _ in 0..n {
                let d = (rng.random::<f64>() * window_ps).round() as u64;
                sink.route(&mut rng, t0 + d);
            }
        }
    }

    sink.add_dark_counts(&mut rng, det.dark_rate, cfg.n_pulses * rep_ps);
    Ok(SimulationOutput {
        tags: sink.finish(seconds_to_ps(det.dead_time)),
        truth,
    })
}

/// Simulates attenuated laser pulses: Poisson(`alpha`) photons arriving at
/// the pulse time, split, dark counts and dead time as for [`simulate_run`].
/// The efficiency and background fields of `detection` are not used.
pub fn simulate_coherent_run(
    alpha: f64,
    rep_period: f64,
    detection: &DetectionConfig,
    n_pulses: u64,
    seed: u64,
) -> Result<Vec<Timetag>> {
    if !(alpha >= 0.0 && alpha.is_finite()) {
        return Err(Error::param("alpha", "must be finite and >= 0"));
    }
    if !(rep_period > 0.0) {
        return Err(Error::param("rep_period", "must be > 0"));
    }
    detection.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let rep_ps = seconds_to_ps(rep_period);
    let photons = poisson(alpha)?;
    let mut sink = ClickSink::new(detection.split_ratio);
    if let Some(photons) = &photons {
        for pulse in 0..n_pulses {
            let n = photons.sample(&mut rng) as u64;
            for _ in 0..n {
                sink.route(&mut rng, pulse * rep_ps);
            }
        }
    }
    sink.add_dark_counts(&mut rng, detection.dark_rate, n_pulses * rep_ps);
    Ok(sink.finish(seconds_to_ps(detection.dead_time)))
}

fn poisson(mean: f64) -> Result<Option<Poisson<f64>>> {
    if mean == 0.0 {
        return Ok(None);
    }
    Poisson::new(mean)
        .map(Some)
        .map_err(|e| Error::param("background_mean", e.to_string()))
}

/// One point of a simulated excitation ramp.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RampPoint {
    pub pulse_energy: f64,
    pub rate: f64,
    pub integration_time: f64,
}

/// Simulates the counting rate recorded while ramping the pulse energy.
///
/// Each energy is held for `integration_time`; the ON/OFF chain runs
/// continuously across points, so triplet excursions show up as dips below
/// the saturation law. The rate scale is `excitation.max_rate`.
pub fn simulate_saturation_ramp(
    excitation: &ExcitationConfig,
    emitter: &EmitterModel,
    energies: &[f64],
    integration_time: f64,
    seed: u64,
) -> Result<Vec<RampPoint>> {
    excitation.validate()?;
    emitter.validate(excitation.rep_period)?;
    if !(integration_time > 0.0) {
        return Err(Error::param("integration_time", "must be > 0"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let pulses_per_point = (integration_time / excitation.rep_period).round().max(1.0) as u64;
    let recovery = emitter.recovery_prob(excitation.rep_period);
    let mut on = true;
    let mut out = Vec::with_capacity(energies.len());
    for &energy in energies {
        let cfg = ExcitationConfig {
            pulse_energy: energy,
            ..*excitation
        };
        let sigma = excited_state_population(&cfg)?;
        let mut on_pulses = 0u64;
        for _ in 0..pulses_per_point {
            if on {
                on_pulses += 1;
                if rng.random::<f64>() < emitter.isc_prob {
                    on = false;
                }
            } else if rng.random::<f64>() < recovery {
                on = true;
            }
        }
        let mean_counts = excitation.max_rate * sigma * integration_time * on_pulses as f64 / pulses_per_point as f64;
        let counts = if mean_counts > 0.0 {
            Poisson::new(mean_counts)
                .map_err(|e| Error::param("max_rate", e.to_string()))?
                .sample(&mut rng)
        } else {
            0.0
        };
        out.push(RampPoint {
            pulse_energy: energy,
            rate: counts / integration_time,
            integration_time,
        });
    }
    Ok(out)
}
