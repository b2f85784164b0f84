//! Truncated distances, Pliss times, hyperbolic times (direct and constructive), expansion and
//! recurrence times, tail sets and decay fits.

mod pliss;
mod resolve;
mod tails;
mod times;

pub use pliss::{pliss_times, pliss_times_unchecked};
pub use resolve::{resolve_constants, ResolveConfig, ResolvedConstants};
pub use tails::{
    expansion_recurrence_times, fit_decay, frequency, tail_curve, uniform_point, DecayFit, DecayModel, TailCurve,
    TailParams, TimeEstimate,
};
pub use times::{
    hyperbolic_times_direct, hyperbolic_times_pliss, hyperbolic_times_pliss_unchecked, is_hyperbolic_time, HypTracker,
    HypothesisFailure, PlissExtraction, LOG_TOL,
};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dynamics::DynamicsError;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum HypError {
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error("need at least 4 strictly positive points, got {0}")]
    InsufficientData(usize),
    #[error(transparent)]
    Dynamics(#[from] DynamicsError),
}

pub type Result<T> = std::result::Result<T, HypError>;

/// Constants of `(λ, δ)`-hyperbolic times and of their constructive extraction.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HypParams {
    pub lambda: f64,
    pub delta: f64,
    /// Recurrence exponent, `2b < min{1, 1/β}`.
    pub b: f64,
    pub a0: f64,
    pub b0: f64,
    /// Cut-off above which `−log‖Df⁻¹‖` is discarded in the first Pliss pass.
    pub q: f64,
    pub rho: f64,
}

impl HypParams {
    /// Parameters for a map without critical set: `λ = e^{−a0/4}`, `Q` the sup of `−log‖Df⁻¹‖`.
    pub fn expanding(a0: f64, q: f64) -> HypParams {
        HypParams { lambda: (-a0 / 4.0).exp(), delta: 1.0, b: 0.25, a0, b0: a0 / 32.0, q, rho: 0.0 }
    }
}

/// `dist_δ(x, 𝒞)`: `1` at distance `≥ δ`, the distance itself below.
#[inline]
pub fn truncated_distance(dist: f64, delta: f64) -> f64 {
    if dist >= delta {
        1.0
    } else {
        dist
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn truncation() {
        assert_eq!(truncated_distance(0.5, 0.1), 1.0);
        assert_eq!(truncated_distance(0.05, 0.1), 0.05);
        assert_eq!(truncated_distance(f64::INFINITY, 1e-300), 1.0);
        assert_eq!(truncated_distance(0.0, 0.1), 0.0);
    }
}
