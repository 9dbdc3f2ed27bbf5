use super::lm::{minimize, LmOptions};
use super::{FitParameter, FitResult};
use crate::error::{Error, Result};
use crate::model::{qs_model, BlinkingModel};
use crate::statistics::QCurve;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QCurveFitOptions {
    /// Starting ISC probability per pulse.
    pub initial_isc_prob: f64,
    /// Starting recovery probability per pulse, τ_rep/τ_T.
    pub initial_recovery: f64,
    /// Consecutive points kept for the fit differ in k by at least this factor.
    pub min_k_ratio: f64,
    /// Minimum k span required (largest k in the curve).
    pub min_k_span: u64,
}

impl Default for QCurveFitOptions {
    fn default() -> Self {
        QCurveFitOptions {
            initial_isc_prob: 1e-4,
            initial_recovery: 2.5e-3,
            min_k_ratio: 1.5,
            min_k_span: 10_000,
        }
    }
}

/// Weighted fit of measured Q(kτ_rep) to `η·Q_s(k)` with η held fixed.
///
/// Returns `isc_prob` (p·τ_rep) and `triplet_lifetime` (s). Points without
/// signal or with a non-finite standard error are skipped; if any kept point
/// has zero standard error the fit falls back to unit weights.
pub fn fit_qcurve(curve: &QCurve, efficiency: f64, opts: &QCurveFitOptions) -> Result<FitResult> {
    if !(efficiency > 0.0 && efficiency <= 1.0) {
        return Err(Error::param("efficiency", "must lie in (0, 1]"));
    }
    let rep = curve.rep_period;
    if !(rep > 0.0) {
        return Err(Error::param("rep_period", "must be > 0"));
    }
    let min_k = curve.points.iter().map(|p| p.k).min().unwrap_or(0);
    let max_k = curve.points.iter().map(|p| p.k).max().unwrap_or(0);
    if min_k != 1 || max_k < opts.min_k_span {
        return Err(Error::param(
            "qcurve",
            format!("must span k = 1 to >= {}, got {min_k}..={max_k}", opts.min_k_span),
        ));
    }

    let mut selected: Vec<(u64, f64, f64)> = Vec::new();
    for p in &curve.points {
        let Some(q) = p.q else { continue };
        if !p.stderr.is_finite() {
            continue;
        }
        if selected
            .last()
            .is_some_and(|&(k, _, _)| (p.k as f64) < opts.min_k_ratio * k as f64)
        {
            continue;
        }
        selected.push((p.k, q, p.stderr));
    }
    let n_input = curve.points.len();
    if selected.len() < 3 {
        return Err(Error::DegenerateInput(format!(
            "only {} usable Q(T) points",
            selected.len()
        )));
    }
    let weighted = selected.iter().all(|&(_, _, s)| s > 0.0);

    let residuals = |x: &[f64]| {
        let (isc, tt) = (x[0].exp(), x[1].exp());
        let model = BlinkingModel::new(isc, tt, rep).ok()?;
        selected
            .iter()
            .map(|&(k, q, s)| {
                let w = if weighted { 1.0 / s } else { 1.0 };
                qs_model(k, &model).ok().map(|qs| (q - efficiency * qs) * w)
            })
            .collect()
    };
    let x0 = [opts.initial_isc_prob.ln(), (rep / opts.initial_recovery).ln()];
    let out = minimize(residuals, &x0, &LmOptions::default()).ok_or_else(|| Error::Fit {
        message: "blinking model not evaluable at the starting point".into(),
        diagnostics: format!(
            "start isc_prob = {}, recovery = {}",
            opts.initial_isc_prob, opts.initial_recovery
        ),
    })?;
    let diagnostics = format!(
        "iterations = {}, residual norm = {:.6e}, condition = {:.3e}, ln params = {:?}",
        out.iterations,
        out.cost().sqrt(),
        out.condition,
        out.params
    );
    if !out.converged {
        return Err(Error::Fit {
            message: "Q(T) fit did not converge".into(),
            diagnostics,
        });
    }
    let Some(cov) = out.inverse_normal.as_ref().filter(|_| out.condition < 1e14) else {
        return Err(Error::Fit {
            message: "parameters not identifiable from this curve".into(),
            diagnostics,
        });
    };
    let dof = selected.len() - 2;
    // unit weights carry no noise scale; borrow it from the residuals
    let scale = if weighted { 1.0 } else { out.cost() / dof as f64 };
    let sd = |j: usize| (cov[(j, j)] * scale).max(0.0).sqrt();
    let (isc, tt) = (out.params[0].exp(), out.params[1].exp());
    if sd(0) > 10.0 || sd(1) > 10.0 {
        return Err(Error::Fit {
            message: "parameters not identifiable from this curve".into(),
            diagnostics,
        });
    }
    let model = BlinkingModel::new(isc, tt, rep)?;
    Ok(FitResult {
        parameters: vec![
            FitParameter::new("isc_prob", isc, isc * sd(0)),
            FitParameter::new("triplet_lifetime", tt, tt * sd(1)),
        ],
        residual_norm: out.cost().sqrt(),
        n_points_used: selected.len(),
        n_points_rejected: n_input - selected.len(),
        rejected: Vec::new(),
        iterations: out.iterations,
        converged: true,
        limiting_regime: Some(model.in_limiting_regime()),
    })
}
