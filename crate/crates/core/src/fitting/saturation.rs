use super::lm::{minimize, LmOptions, LmOutcome};
use super::{FitParameter, FitResult};
use crate::error::{Error, Result};
use crate::model::saturation_law;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SaturationPoint {
    /// Pulse energy in pJ.
    pub pulse_energy: f64,
    /// Counting rate in counts/s.
    pub rate: f64,
    /// Integration time in s.
    pub integration_time: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct SaturationCurve {
    pub points: Vec<SaturationPoint>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SaturationFitOptions {
    /// τ_p/τ_rad, held fixed.
    pub duration_ratio: f64,
    /// Shot-noise multiple below the first fit that marks a triplet dip.
    pub rejection_sigmas: f64,
    /// Minimum dip depth as a fraction of the first fit.
    pub rejection_fraction: f64,
}

impl Default for SaturationFitOptions {
    fn default() -> Self {
        SaturationFitOptions {
            duration_ratio: 100e-15 / 2.8e-9,
            rejection_sigmas: 2.0,
            rejection_fraction: 0.05,
        }
    }
}

/// Fits `R = R_0·σ(E_p)` in two passes: fit everything, drop the points that
/// sit clearly below the fit (triplet excursions), refit the rest.
///
/// Parameters are reported as `max_rate` (counts/s) and `sat_energy` (pJ).
pub fn fit_saturation(curve: &SaturationCurve, opts: &SaturationFitOptions) -> Result<FitResult> {
    validate(curve, opts)?;
    let pts = &curve.points;
    let all: Vec<usize> = (0..pts.len()).collect();
    let x0 = initial_guess(pts, opts.duration_ratio);

    let first = run(pts, &all, &x0, opts.duration_ratio)?;
    let (r0, esat) = (first.params[0].exp(), first.params[1].exp());
    let (kept, rejected): (Vec<usize>, Vec<usize>) = all.iter().partition(|&&i| {
        let p = &pts[i];
        let model = r0 * saturation_law(p.pulse_energy, esat, opts.duration_ratio);
        let shot = (model * p.integration_time).sqrt() / p.integration_time;
        let threshold = (opts.rejection_sigmas * shot).max(opts.rejection_fraction * model);
        p.rate >= model - threshold
    });
    if kept.len() < 2 {
        return Err(Error::DegenerateInput(format!(
            "{} of {} points rejected as triplet dips",
            rejected.len(),
            pts.len()
        )));
    }

    let second = run(pts, &kept, &first.params, opts.duration_ratio)?;
    let dof = kept.len().saturating_sub(2);
    let scale = if dof > 0 { second.cost() / dof as f64 } else { 0.0 };
    let sd = |j: usize| {
        second
            .inverse_normal
            .as_ref()
            .map(|c| (c[(j, j)] * scale).max(0.0).sqrt())
            .unwrap_or(f64::NAN)
    };
    let (r0, esat) = (second.params[0].exp(), second.params[1].exp());
    Ok(FitResult {
        parameters: vec![
            FitParameter::new("max_rate", r0, r0 * sd(0)),
            FitParameter::new("sat_energy", esat, esat * sd(1)),
        ],
        residual_norm: second.cost().sqrt(),
        n_points_used: kept.len(),
        n_points_rejected: rejected.len(),
        rejected,
        iterations: first.iterations + second.iterations,
        converged: true,
        limiting_regime: None,
    })
}

fn validate(curve: &SaturationCurve, opts: &SaturationFitOptions) -> Result<()> {
    let pts = &curve.points;
    if pts.len() < 5 {
        return Err(Error::param(
            "curve",
            format!("needs at least 5 points, got {}", pts.len()),
        ));
    }
    for p in pts {
        if !(p.pulse_energy >= 0.0 && p.pulse_energy.is_finite()) {
            return Err(Error::param("pulse_energy", "must be finite and >= 0"));
        }
        if !(p.rate >= 0.0 && p.rate.is_finite()) {
            return Err(Error::param("rate", "must be finite and >= 0"));
        }
        if !(p.integration_time > 0.0) {
            return Err(Error::param("integration_time", "must be > 0"));
        }
    }
    let positive = pts.iter().map(|p| p.pulse_energy).filter(|&e| e > 0.0);
    let lo = positive.clone().fold(f64::INFINITY, f64::min);
    let hi = positive.fold(0.0, f64::max);
    if !(hi >= 10.0 * lo) {
        return Err(Error::param("curve", "energies must span at least one decade"));
    }
    if !(opts.duration_ratio > 0.0 && opts.duration_ratio < 1.0) {
        return Err(Error::param("duration_ratio", "must lie in (0, 1)"));
    }
    Ok(())
}

/// `R_0` from the highest rate; `E_sat` from the energy where the rate
/// first reaches half of it, mapped through the law at fixed τ_p/τ_rad.
fn initial_guess(pts: &[SaturationPoint], duration_ratio: f64) -> [f64; 2] {
    let r_max = pts.iter().map(|p| p.rate).fold(0.0, f64::max).max(f64::MIN_POSITIVE);
    let mut sorted: Vec<&SaturationPoint> = pts.iter().filter(|p| p.pulse_energy > 0.0).collect();
    sorted.sort_by(|a, b| a.pulse_energy.total_cmp(&b.pulse_energy));
    let half = 0.5 * r_max;
    let e_half = sorted
        .windows(2)
        .find(|w| w[0].rate < half && w[1].rate >= half)
        .map(|w| {
            let (l0, l1) = (w[0].pulse_energy.ln(), w[1].pulse_energy.ln());
            let f = (half - w[0].rate) / (w[1].rate - w[0].rate);
            (l0 + f * (l1 - l0)).exp()
        })
        .unwrap_or_else(|| sorted[sorted.len() / 2].pulse_energy);

    // For a short pulse σ(E_half) = 1/2 is reached only once the exponent is
    // of order one, far above E_sat; solve for that E_sat by bisection in log.
    let (mut lo, mut hi) = ((e_half * 1e-12).ln(), e_half.ln() + 10.0);
    let sigma_at = |log_esat: f64| saturation_law(e_half, log_esat.exp(), duration_ratio);
    let e_sat = if sigma_at(lo) > 0.5 && sigma_at(hi) < 0.5 {
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if sigma_at(mid) > 0.5 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        (0.5 * (lo + hi)).exp()
    } else {
        e_half
    };
    [r_max.ln(), e_sat.ln()]
}

fn run(pts: &[SaturationPoint], idx: &[usize], x0: &[f64], duration_ratio: f64) -> Result<LmOutcome> {
    let residuals = |p: &[f64]| {
        let (r0, esat) = (p[0].exp(), p[1].exp());
        if !(r0.is_finite() && esat.is_finite() && esat > 0.0) {
            return None;
        }
        Some(
            idx.iter()
                .map(|&i| pts[i].rate - r0 * saturation_law(pts[i].pulse_energy, esat, duration_ratio))
                .collect(),
        )
    };
    let out = minimize(residuals, x0, &LmOptions::default()).ok_or_else(|| Error::Fit {
        message: "model not evaluable at the starting point".into(),
        diagnostics: format!("start = {x0:?}"),
    })?;
    if !out.converged {
        return Err(Error::Fit {
            message: "saturation fit did not converge".into(),
            diagnostics: format!(
                "iterations = {}, residual norm = {:.6e}, ln params = {:?}",
                out.iterations,
                out.cost().sqrt(),
                out.params
            ),
        });
    }
    Ok(out)
}
