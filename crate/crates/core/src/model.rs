//! Closed-form photocount physics.
//!
//! Everything here is a pure function of immutable parameter values.

use crate::error::{Error, Result};

/// Pulsed excitation of a single emitter.
///
/// Energies are in picojoules, times in seconds, `max_rate` in counts/s.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExcitationConfig {
    pub pulse_energy: f64,
    pub sat_energy: f64,
    pub pulse_duration: f64,
    pub rad_lifetime: f64,
    pub rep_period: f64,
    pub max_rate: f64,
}

impl ExcitationConfig {
    /// Room-temperature cyanine molecule under 2 MHz, 100 fs pumping.
    pub fn reference() -> Self {
        ExcitationConfig {
            pulse_energy: 5.6,
            sat_energy: 5.6e-5,
            pulse_duration: 100e-15,
            rad_lifetime: 2.8e-9,
            rep_period: 0.5e-6,
            max_rate: 160e3,
        }
    }

    /// Pulse energy may be zero (no excitation); every other field must be
    /// strictly positive and `pulse_duration < rad_lifetime < rep_period`.
    pub fn validate(&self) -> Result<()> {
        if !(self.pulse_energy >= 0.0 && self.pulse_energy.is_finite()) {
            return Err(Error::param("pulse_energy", "must be finite and >= 0"));
        }
        for (name, v) in [
            ("sat_energy", self.sat_energy),
            ("pulse_duration", self.pulse_duration),
            ("rad_lifetime", self.rad_lifetime),
            ("rep_period", self.rep_period),
            ("max_rate", self.max_rate),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::param(name, format!("must be finite and > 0, got {v}")));
            }
        }
        if self.pulse_duration >= self.rad_lifetime {
            return Err(Error::param("pulse_duration", "must be shorter than rad_lifetime"));
        }
        if self.rad_lifetime >= self.rep_period {
            return Err(Error::param("rad_lifetime", "must be shorter than rep_period"));
        }
        Ok(())
    }

    pub fn duration_ratio(&self) -> f64 {
        self.pulse_duration / self.rad_lifetime
    }
}

/// Saturation law of a two-level emitter after a short pulse.
///
/// `duration_ratio` is τ_p/τ_rad. No validation; see
/// [`excited_state_population`] for the checked entry point.
pub fn saturation_law(pulse_energy: f64, sat_energy: f64, duration_ratio: f64) -> f64 {
    let s = pulse_energy / sat_energy;
    let pumped = -(-duration_ratio * (1.0 + s)).exp_m1();
    s / (1.0 + s) * pumped
}

/// Excited-state population reached at the end of the excitation pulse.
pub fn excited_state_population(cfg: &ExcitationConfig) -> Result<f64> {
    cfg.validate()?;
    Ok(saturation_law(cfg.pulse_energy, cfg.sat_energy, cfg.duration_ratio()).clamp(0.0, 1.0))
}

/// ON/OFF intermittency and emission behaviour of the molecule.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EmitterModel {
    /// Intersystem-crossing probability per excitation while ON.
    pub isc_prob: f64,
    /// Triplet lifetime in seconds.
    pub triplet_lifetime: f64,
    /// Per-excitation photobleaching probability. Zero disables bleaching.
    pub bleach_prob: f64,
    /// Emission probability per pulse while ON.
    pub emission_prob: f64,
}

impl EmitterModel {
    pub fn validate(&self, rep_period: f64) -> Result<()> {
        if !(0.0..1.0).contains(&self.isc_prob) {
            return Err(Error::param("isc_prob", "must lie in [0, 1)"));
        }
        if !(self.triplet_lifetime > rep_period && self.triplet_lifetime.is_finite()) {
            return Err(Error::param("triplet_lifetime", "must exceed rep_period"));
        }
        if !(0.0..1.0).contains(&self.bleach_prob) {
            return Err(Error::param("bleach_prob", "must lie in [0, 1)"));
        }
        if !(0.0..=1.0).contains(&self.emission_prob) {
            return Err(Error::param("emission_prob", "must lie in [0, 1]"));
        }
        Ok(())
    }

    /// Probability of leaving the triplet state within one period.
    pub fn recovery_prob(&self, rep_period: f64) -> f64 {
        -(-rep_period / self.triplet_lifetime).exp_m1()
    }

    /// Long-run ON fraction q/(p+q) of the rate picture.
    pub fn on_fraction(&self, rep_period: f64) -> f64 {
        let q = rep_period / self.triplet_lifetime;
        q / (self.isc_prob + q)
    }

    pub fn blinking(&self, rep_period: f64) -> Result<BlinkingModel> {
        BlinkingModel::new(self.isc_prob, self.triplet_lifetime, rep_period)
    }
}

/// Overall efficiency of an attenuated ideal SPS plus Poissonian background.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BackgroundDecomposition {
    pub efficiency: f64,
    pub background_mean: f64,
}

impl BackgroundDecomposition {
    pub fn new(efficiency: f64, background_mean: f64) -> Result<Self> {
        let d = BackgroundDecomposition {
            efficiency,
            background_mean,
        };
        d.validate()?;
        Ok(d)
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.efficiency) {
            return Err(Error::param("efficiency", "must lie in [0, 1]"));
        }
        if !(self.background_mean >= 0.0 && self.background_mean.is_finite()) {
            return Err(Error::param("background_mean", "must be finite and >= 0"));
        }
        if self.efficiency + self.background_mean > 2.0 {
            return Err(Error::param(
                "background_mean",
                "efficiency + background exceeds 2 counts/pulse",
            ));
        }
        Ok(())
    }

    /// Predicted `(P(1), P(2))` behind a 50/50 splitter with one click per arm.
    ///
    /// Background photon numbers above two are dropped.
    pub fn forward(&self) -> (f64, f64) {
        forward_counts(self.efficiency, self.background_mean)
    }
}

fn forward_counts(eta: f64, gamma: f64) -> (f64, f64) {
    let e = (-gamma).exp();
    let background = [e, gamma * e, 0.5 * gamma * gamma * e];
    let mut photons = [0.0; 4];
    for (b, pb) in background.iter().enumerate() {
        photons[b] += (1.0 - eta) * pb;
        photons[b + 1] += eta * pb;
    }
    let mut p1 = photons[1];
    let mut p2 = 0.0;
    for (m, pm) in photons.iter().enumerate().skip(2) {
        // all m photons in the same arm
        let same_arm = 0.5f64.powi(m as i32 - 1);
        p1 += pm * same_arm;
        p2 += pm * (1.0 - same_arm);
    }
    (p1, p2)
}

/// Recovers `(η, γ)` from the measured one- and two-count probabilities.
pub fn invert_background(p1: f64, p2: f64) -> Result<BackgroundDecomposition> {
    if !(p1 > 0.0 && p1 < 1.0) {
        return Err(Error::param("p1", "must lie in (0, 1)"));
    }
    if !(p2 >= 0.0 && p2.is_finite()) {
        return Err(Error::param("p2", "must be finite and >= 0"));
    }
    if p2 >= p1 {
        return Err(Error::Inversion(format!("P(2) = {p2} is not below P(1) = {p1}")));
    }

    // leading order: p2 ≈ ηγ/2, p1 ≈ η + γ
    let mut gamma = 2.0 * p2 / p1;
    let mut eta = p1 - gamma;
    const H: f64 = 1e-7;
    for _ in 0..100 {
        let (f1, f2) = forward_counts(eta, gamma);
        let (r1, r2) = (f1 - p1, f2 - p2);
        if r1.abs() < 1e-15 && r2.abs() < 1e-15 {
            break;
        }
        let he = H * eta.abs().max(1e-3);
        let hg = H * gamma.abs().max(1e-3);
        let (a1, a2) = forward_counts(eta + he, gamma);
        let (b1, b2) = forward_counts(eta - he, gamma);
        let (c1, c2) = forward_counts(eta, gamma + hg);
        let (d1, d2) = forward_counts(eta, gamma - hg);
        let j11 = (a1 - b1) / (2.0 * he);
        let j21 = (a2 - b2) / (2.0 * he);
        let j12 = (c1 - d1) / (2.0 * hg);
        let j22 = (c2 - d2) / (2.0 * hg);
        let det = j11 * j22 - j12 * j21;
        if det.abs() < 1e-300 || !det.is_finite() {
            return Err(Error::Inversion("singular Jacobian".into()));
        }
        eta -= (j22 * r1 - j12 * r2) / det;
        gamma -= (j11 * r2 - j21 * r1) / det;
        if !(eta.is_finite() && gamma.is_finite()) {
            return Err(Error::Inversion("iteration diverged".into()));
        }
    }
    // Round-off can leave γ a hair below zero when p2 == 0.
    if gamma < 0.0 && gamma > -1e-14 {
        gamma = 0.0;
    }
    let (f1, f2) = forward_counts(eta, gamma);
    if (f1 - p1).abs() > 1e-9 || (f2 - p2).abs() > 1e-9 {
        return Err(Error::Inversion(format!("no solution reproduces ({p1}, {p2})")));
    }
    if eta < 0.0 || gamma < 0.0 || eta > 1.0 || eta + gamma > 2.0 {
        return Err(Error::Inversion(format!(
            "no non-negative solution: eta = {eta:.6e}, gamma = {gamma:.6e}"
        )));
    }
    Ok(BackgroundDecomposition {
        efficiency: eta,
        background_mean: gamma,
    })
}

/// Per-pulse count law of a coherent pulse behind two dead-time-limited arms.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CoherentLaw {
    pub alpha: f64,
    pub p0: f64,
    pub p1: f64,
    pub p2: f64,
    pub mean: f64,
}

impl CoherentLaw {
    /// Mandel parameter of the clipped counts, exactly `-mean / 2`.
    pub fn mandel_q(&self) -> f64 {
        -0.5 * self.mean
    }
}

/// Each arm sees Poisson(α/2) photons and clicks at most once per pulse.
pub fn coherent_deadtime_pn(alpha: f64) -> Result<CoherentLaw> {
    if !(alpha >= 0.0 && alpha.is_finite()) {
        return Err(Error::param("alpha", "must be finite and >= 0"));
    }
    let arm_dark = (-0.5 * alpha).exp();
    let arm_click = -(-0.5 * alpha).exp_m1();
    Ok(CoherentLaw {
        alpha,
        p0: arm_dark * arm_dark,
        p1: 2.0 * arm_dark * arm_click,
        p2: arm_click * arm_click,
        mean: 2.0 * arm_click,
    })
}

/// Mean photon number α giving a clipped mean of `mean` counts per pulse.
pub fn alpha_for_mean(mean: f64) -> Result<f64> {
    if !(0.0..2.0).contains(&mean) {
        return Err(Error::param("mean", "must lie in [0, 2)"));
    }
    Ok(-2.0 * (-0.5 * mean).ln_1p())
}

/// Two-state blinking parameters in units of the repetition period.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BlinkingModel {
    isc_prob: f64,
    beta: f64,
    rep_period: f64,
}

impl BlinkingModel {
    pub fn new(isc_prob: f64, triplet_lifetime: f64, rep_period: f64) -> Result<Self> {
        if !(rep_period > 0.0 && rep_period.is_finite()) {
            return Err(Error::param("rep_period", "must be finite and > 0"));
        }
        if !(triplet_lifetime > 0.0 && triplet_lifetime.is_finite()) {
            return Err(Error::param("triplet_lifetime", "must be finite and > 0"));
        }
        Self::from_beta(isc_prob, isc_prob + rep_period / triplet_lifetime, rep_period)
    }

    pub fn from_beta(isc_prob: f64, beta: f64, rep_period: f64) -> Result<Self> {
        if !(isc_prob >= 0.0 && isc_prob.is_finite()) {
            return Err(Error::param("isc_prob", "must be finite and >= 0"));
        }
        if !(beta > 0.0 && beta < 1.0) {
            return Err(Error::param("beta", format!("must lie in (0, 1), got {beta}")));
        }
        if isc_prob > beta {
            return Err(Error::param("isc_prob", "must not exceed beta"));
        }
        Ok(BlinkingModel {
            isc_prob,
            beta,
            rep_period,
        })
    }

    pub fn isc_prob(&self) -> f64 {
        self.isc_prob
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn rep_period(&self) -> f64 {
        self.rep_period
    }

    /// Triplet lifetime implied by `beta - isc_prob`.
    pub fn triplet_lifetime(&self) -> f64 {
        self.rep_period / (self.beta - self.isc_prob)
    }

    /// True when both transition probabilities per period are below 1%.
    /// The closed-form law is a small-β expansion; outside this regime it
    /// is still evaluated but should be reported as approximate.
    pub fn in_limiting_regime(&self) -> bool {
        self.isc_prob < 0.01 && (self.beta - self.isc_prob) < 0.01
    }

    /// Long-window limit of the source Mandel parameter.
    pub fn qs_limit(&self) -> f64 {
        2.0 * self.isc_prob / (self.beta * self.beta) - 1.0
    }
}

/// Mandel parameter of photons emitted by a blinking source over `k` periods.
pub fn qs_model(k: u64, model: &BlinkingModel) -> Result<f64> {
    if k == 0 {
        return Err(Error::param("k", "must be >= 1"));
    }
    if k == 1 {
        // the bracket vanishes identically
        return Ok(-1.0);
    }
    let beta = model.beta;
    let kf = k as f64;
    // 1 - (1-β)^k without underflow or cancellation
    let decayed = -(kf * (-beta).ln_1p()).exp_m1();
    let bracket = 1.0 - decayed / (kf * beta);
    Ok(2.0 * model.isc_prob / (beta * beta) * bracket - 1.0)
}

/// Mandel parameter after losses: detection keeps Q proportional to η.
pub fn detected_q_from_source(qs: f64, efficiency: f64) -> f64 {
    efficiency * qs
}
