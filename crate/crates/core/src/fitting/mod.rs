//! Parameter recovery from saturation ramps and Q(T) curves.

mod lm;
mod qcurve;
mod saturation;

pub use qcurve::{fit_qcurve, QCurveFitOptions};
pub use saturation::{fit_saturation, SaturationCurve, SaturationFitOptions, SaturationPoint};

#[derive(Debug, Clone, PartialEq)]
pub struct FitParameter {
    pub name: &'static str,
    pub value: f64,
    /// One standard deviation.
    pub uncertainty: f64,
}

impl FitParameter {
    fn new(name: &'static str, value: f64, uncertainty: f64) -> Self {
        FitParameter {
            name,
            value,
            uncertainty,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitResult {
    pub parameters: Vec<FitParameter>,
    pub residual_norm: f64,
    pub n_points_used: usize,
    pub n_points_rejected: usize,
    /// Input indices removed before the final fit.
    pub rejected: Vec<usize>,
    pub iterations: usize,
    pub converged: bool,
    /// Whether the fitted blinking rates sit in the small-β regime, for
    /// Q(T) fits.
    pub limiting_regime: Option<bool>,
}

impl FitResult {
    pub fn value(&self, name: &str) -> Option<f64> {
        self.parameters.iter().find(|p| p.name == name).map(|p| p.value)
    }

    pub fn uncertainty(&self, name: &str) -> Option<f64> {
        self.parameters.iter().find(|p| p.name == name).map(|p| p.uncertainty)
    }
}
