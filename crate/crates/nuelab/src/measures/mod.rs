//! Densities on grids: Ulam fixed points, Birkhoff histograms, transfer operators, tower
//! projection of induced densities, Lyapunov spectra and the stochastic-stability sweep.

mod empirical;
mod grid;
mod lyapunov;
mod sweep;
mod tower;
mod transfer;
mod ulam;

pub use empirical::empirical_density;
pub use grid::{l1_distance, Grid, GridDensity};
pub use lyapunov::{lyapunov_spectrum, LyapunovReport};
pub use sweep::{stability_sweep, DensityMethod, EmpiricalConfig, SweepConfig, SweepReport, SweepRow};
pub use tower::{induced_ulam, tower_project, tower_project_samples, InducedUlam, TowerProjection, TowerSample};
pub use transfer::{inverse_branches, transfer_apply, TransferResult};
pub use ulam::{stationary_density, stationary_density_from, ulam_matrix, Stationary, UlamMatrix};

use thiserror::Error;

use crate::dynamics::DynamicsError;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MeasureError {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("grid mismatch: {0}")]
    GridMismatch(String),
    #[error("power iteration did not converge in {iterations} iterations (residual {residual:.3e})")]
    NotConverged { iterations: usize, residual: f64 },
    #[error("degenerate input: {0}")]
    Degenerate(String),
    #[error("inverse-branch enumeration failed: {0}")]
    Branch(String),
    #[error("unsupported: {0}")]
    Unsupported(String),
    #[error("malformed density dump: {0}")]
    Format(String),
    #[error(transparent)]
    Dynamics(#[from] DynamicsError),
    #[error("induced map: {0}")]
    Inducing(String),
}

pub type Result<T> = std::result::Result<T, MeasureError>;
