use nalgebra::DMatrix;
use serde::Serialize;

use super::{MeasureError, Result};
use crate::dynamics::{step, MapSystem, Point, Realization};

#[derive(Debug, Clone, Serialize)]
pub struct LyapunovReport {
    /// Finite-time exponents in the order produced by the QR factors (not sorted).
    pub exponents: Vec<f64>,
    /// `(1/n) Σ log|det Df(x_j)|`, which the exponents must sum to.
    pub mean_log_det: f64,
}

/// Finite-time Lyapunov exponents of the derivative cocycle along a random orbit, by QR
/// re-orthonormalization at every step.
pub fn lyapunov_spectrum(map: &dyn MapSystem, realization: &Realization, x0: &Point, n: usize) -> Result<LyapunovReport> {
    if n == 0 {
        return Err(MeasureError::Degenerate("zero-length orbit".into()));
    }
    let d = map.dim();
    let mut q = DMatrix::<f64>::identity(d, d);
    let mut sums = vec![0.0; d];
    let mut log_det = 0.0;
    let mut x = *x0;
    for j in 0..n {
        if map.critical_distance(&x.coords) == 0.0 {
            return Err(MeasureError::Degenerate(format!("orbit hits the critical set at step {j}")));
        }
        let jac = map.jacobian(&x.coords);
        log_det += jac.det().abs().ln();
        let qr = (jac.to_dmatrix() * &q).qr();
        let r = qr.r();
        let mut qn = qr.q();
        for i in 0..d {
            let rii = r[(i, i)];
            if rii == 0.0 {
                return Err(MeasureError::Degenerate(format!("singular Jacobian at step {j}")));
            }
            sums[i] += rii.abs().ln();
            // Keep the diagonal of R positive so Q evolves continuously.
            if rii < 0.0 {
                for k in 0..d {
                    qn[(k, i)] = -qn[(k, i)];
                }
            }
        }
        q = qn;
        x = step(map, realization.get(j as i64)?, &x)?;
    }
    Ok(LyapunovReport { exponents: sums.iter().map(|s| s / n as f64).collect(), mean_log_det: log_det / n as f64 })
}
