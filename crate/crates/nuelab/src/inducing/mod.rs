//! Induced Gibbs–Markov maps of circle maps: base points, hyperbolic pre-balls, the inductive
//! partition with rings and wait functions, and numerical checks of the induced map.

mod base;
mod constants;
mod interval;
mod partition;
mod window;

pub use base::{base_point_order, find_base_point, hyperbolic_preball, preball_contraction_excess, BasePoint, PreBall};
pub use constants::{derive_constants, ConstantsConfig, InducingConstants};
pub use interval::IntervalSet;
pub use partition::{
    build_partition, query_points, return_time_tail, uniformity_probe, verify_gibbs_markov, GibbsMarkovReport,
    InducedMap, PartitionConfig, PartitionElement, QuerySample, ReturnTail, UniformityReport, WorstCase,
};
pub use window::{wrap_signed, Geometry, Oracle, Outcome, QueryResult, Return, DITHER};

use thiserror::Error;

use crate::dynamics::{DynamicsError, MapSystem, ScalarMap};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum InducingError {
    #[error("{0} is not a circle map with computable inverse branches")]
    NotCircleMap(String),
    #[error("no base point with δ/3-dense preimages (δ = {delta}) up to order {n_max}")]
    BasePointNotFound { delta: f64, n_max: usize },
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error("inverse branch crosses a discontinuity or the critical set at step {step}")]
    BranchCrossing { step: usize },
    #[error("constraint violated: {0}")]
    ConstraintViolation(String),
    #[error(transparent)]
    Dynamics(#[from] DynamicsError),
}

pub type Result<T> = std::result::Result<T, InducingError>;

pub(crate) fn scalar_of(map: &dyn MapSystem) -> Result<&dyn ScalarMap> {
    match (map.chart(), map.scalar()) {
        (crate::dynamics::Chart::Circle, Some(s)) if s.lift(0.25).is_some() => Ok(s),
        _ => Err(InducingError::NotCircleMap(map.name().to_string())),
    }
}
