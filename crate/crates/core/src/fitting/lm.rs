//! Damped least squares (Levenberg–Marquardt) with a central-difference
//! Jacobian. Parameters are expected in log scale, so an absolute step
//! tolerance acts as a relative tolerance on the physical values.

use nalgebra::{DMatrix, DVector};

#[derive(Debug, Clone, Copy)]
pub(crate) struct LmOptions {
    pub max_iterations: usize,
    pub step_tolerance: f64,
}

impl Default for LmOptions {
    fn default() -> Self {
        LmOptions {
            max_iterations: 200,
            step_tolerance: 1e-9,
        }
    }
}

#[derive(Debug, Clone)]
pub(crate) struct LmOutcome {
    pub params: Vec<f64>,
    pub residuals: Vec<f64>,
    /// `(JᵀJ)⁻¹` at the solution, if invertible.
    pub inverse_normal: Option<DMatrix<f64>>,
    /// Ratio of largest to smallest eigenvalue of `JᵀJ`.
    pub condition: f64,
    pub iterations: usize,
    pub converged: bool,
}

impl LmOutcome {
    pub fn cost(&self) -> f64 {
        self.residuals.iter().map(|r| r * r).sum()
    }
}

fn cost_of(r: &[f64]) -> f64 {
    r.iter().map(|x| x * x).sum()
}

fn jacobian<F>(f: &F, x: &[f64], m: usize) -> Option<DMatrix<f64>>
where
    F: Fn(&[f64]) -> Option<Vec<f64>>,
{
    let n = x.len();
    let mut jac = DMatrix::zeros(m, n);
    let mut probe = x.to_vec();
    for j in 0..n {
        let h = 1e-6 * x[j].abs().max(1.0);
        probe[j] = x[j] + h;
        let up = f(&probe)?;
        probe[j] = x[j] - h;
        let down = f(&probe)?;
        probe[j] = x[j];
        for i in 0..m {
            jac[(i, j)] = (up[i] - down[i]) / (2.0 * h);
        }
    }
    Some(jac)
}

/// Minimizes `Σ r_i(x)²`. `residuals` returns `None` for infeasible `x`.
pub(crate) fn minimize<F>(residuals: F, x0: &[f64], opts: &LmOptions) -> Option<LmOutcome>
where
    F: Fn(&[f64]) -> Option<Vec<f64>>,
{
    let n = x0.len();
    let mut x = x0.to_vec();
    let mut r = residuals(&x)?;
    let m = r.len();
    let mut cost = cost_of(&r);
    let mut damping = 1e-3;
    let mut converged = false;
    let mut iterations = 0;

    while iterations < opts.max_iterations {
        iterations += 1;
        if cost == 0.0 {
            converged = true;
            break;
        }
        let jac = jacobian(&residuals, &x, m)?;
        let normal = jac.transpose() * &jac;
        let gradient = jac.transpose() * DVector::from_column_slice(&r);
        let diag_floor = 1e-12 * normal.diagonal().max().max(f64::MIN_POSITIVE);

        let mut accepted = false;
        let mut tiny_step = false;
        while damping < 1e16 {
            let mut lhs = normal.clone();
            for j in 0..n {
                lhs[(j, j)] += damping * normal[(j, j)].max(diag_floor);
            }
            let Some(step) = lhs.cholesky().map(|c| c.solve(&(-&gradient))) else {
                damping *= 4.0;
                continue;
            };
            let trial: Vec<f64> = x.iter().zip(step.iter()).map(|(a, d)| a + d).collect();
            tiny_step = step.iter().all(|d| d.abs() <= opts.step_tolerance);
            match residuals(&trial) {
                Some(tr) if cost_of(&tr) <= cost => {
                    x = trial;
                    cost = cost_of(&tr);
                    r = tr;
                    damping = (damping / 3.0).max(1e-12);
                    accepted = true;
                    break;
                }
                _ => {
                    if tiny_step {
                        break;
                    }
                    damping *= 4.0;
                }
            }
        }
        if tiny_step || (!accepted && damping >= 1e16) {
            // no further progress possible at this resolution
            converged = tiny_step || gradient.amax() <= 1e-12 * cost.sqrt().max(1e-300);
            break;
        }
    }

    let jac = jacobian(&residuals, &x, m)?;
    let normal = jac.transpose() * &jac;
    let eig = normal.clone().symmetric_eigen().eigenvalues;
    let (lo, hi) = (eig.min(), eig.max());
    let condition = if lo > 0.0 { hi / lo } else { f64::INFINITY };
    Some(LmOutcome {
        params: x,
        residuals: r,
        inverse_normal: normal.try_inverse(),
        condition,
        iterations,
        converged,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exponential_decay_recovered() {
        let ts: Vec<f64> = (0..20).map(|i| i as f64 * 0.25).collect();
        let data: Vec<f64> = ts.iter().map(|t| 3.0 * (-t / 1.7f64).exp()).collect();
        let f = |p: &[f64]| {
            let (a, tau) = (p[0].exp(), p[1].exp());
            Some(ts.iter().zip(&data).map(|(t, y)| y - a * (-t / tau).exp()).collect())
        };
        let out = minimize(f, &[0.0, 0.0], &LmOptions::default()).unwrap();
        assert!(out.converged);
        assert!((out.params[0].exp() - 3.0).abs() < 1e-9);
        assert!((out.params[1].exp() - 1.7).abs() < 1e-9);
        assert!(out.inverse_normal.is_some());
    }

    #[test]
    fn infeasible_start_is_none() {
        assert!(minimize(|_: &[f64]| None, &[1.0], &LmOptions::default()).is_none());
    }
}
