//! Phase spaces, the map catalog, additive noise kernels, realizations and random orbits.
//!
//! A random map is `f_t = f + t` with `t` drawn from the uniform measure on the ball of radius
//! `ε`; the Jacobian of `f_t` is the Jacobian of `f`, so [`MapSystem::jacobian`] never sees the
//! noise.

mod catalog;
mod noise;
mod orbit;
mod probe;

pub use catalog::{Doubling, Factor, Intermittent, Logistic, MapSpec, Product, Viana};
pub use noise::{sample_realization, NoiseKernel, Realization};
pub use orbit::{random_orbit, OrbitLog};
pub use probe::{nondegeneracy_probe, ProbeReport};
pub(crate) use probe::linear_fit;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Largest phase-space dimension supported by the fixed-size point representation.
pub const MAX_DIM: usize = 4;

/// Chart coordinates (and noise vectors); entries beyond the chart dimension are zero.
pub type Vector = [f64; MAX_DIM];

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DynamicsError {
    #[error("point ({coord:.6}) left the invariant region [{lo:.6}, {hi:.6}] of axis {axis}")]
    DomainEscape { axis: usize, coord: f64, lo: f64, hi: f64 },
    #[error("point lies on the critical set")]
    OnCriticalSet,
    #[error("realization window holds {have} entries but {need} are required")]
    ShortRealization { have: usize, need: usize },
    #[error("{0} has no critical set")]
    NoCriticalSet(String),
    #[error("invalid map parameters: {0}")]
    InvalidParameters(String),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },
}

pub type Result<T> = std::result::Result<T, DynamicsError>;

/// Coordinate chart of a phase space.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Chart {
    /// `S¹ = ℝ/ℤ`, coordinates in `[0, 1)`.
    Circle,
    /// `T^d`, every coordinate in `[0, 1)`.
    Torus(usize),
    /// `S¹ × I` with `I = [lo, hi]`.
    Cylinder { lo: f64, hi: f64 },
    /// A closed interval; only used by check maps outside the catalog.
    Interval { lo: f64, hi: f64 },
}

impl Chart {
    pub fn dim(&self) -> usize {
        match *self {
            Chart::Circle | Chart::Interval { .. } => 1,
            Chart::Torus(d) => d,
            Chart::Cylinder { .. } => 2,
        }
    }

    pub fn is_periodic(&self, axis: usize) -> bool {
        match *self {
            Chart::Circle | Chart::Torus(_) => true,
            Chart::Cylinder { .. } => axis == 0,
            Chart::Interval { .. } => false,
        }
    }

    /// Coordinate range `[lo, hi]` of `axis` (periodic axes use `[0, 1]`).
    pub fn extent(&self, axis: usize) -> (f64, f64) {
        match *self {
            Chart::Cylinder { lo, hi } if axis == 1 => (lo, hi),
            Chart::Interval { lo, hi } => (lo, hi),
            _ => (0.0, 1.0),
        }
    }

    /// Lebesgue volume of the whole chart.
    pub fn volume(&self) -> f64 {
        (0..self.dim()).map(|a| {
            let (lo, hi) = self.extent(a);
            hi - lo
        }).product()
    }

    /// Reduces raw coordinates into the chart: wraps periodic axes, rejects escapes elsewhere.
    pub fn reduce(&self, mut v: Vector) -> Result<Vector> {
        for axis in 0..self.dim() {
            if self.is_periodic(axis) {
                v[axis] = wrap(v[axis]);
            } else {
                let (lo, hi) = self.extent(axis);
                if !(v[axis] >= lo && v[axis] <= hi) {
                    return Err(DynamicsError::DomainEscape { axis, coord: v[axis], lo, hi });
                }
            }
        }
        Ok(v)
    }

    /// Chart distance: periodic axes use the circle metric, the rest Euclidean.
    pub fn distance(&self, a: &Vector, b: &Vector) -> f64 {
        (0..self.dim())
            .map(|axis| {
                let d = if self.is_periodic(axis) { circle_dist(a[axis], b[axis]) } else { a[axis] - b[axis] };
                d * d
            })
            .sum::<f64>()
            .sqrt()
    }

    /// Maps unit-cube coordinates `u ∈ [0,1)^d` onto the chart (used for uniform sampling).
    pub fn from_unit(&self, u: &[f64]) -> Vector {
        let mut v = [0.0; MAX_DIM];
        for axis in 0..self.dim() {
            let (lo, hi) = self.extent(axis);
            v[axis] = lo + (hi - lo) * u[axis];
        }
        v
    }
}

/// Reduces a real number into `[0, 1)`.
#[inline]
pub fn wrap(x: f64) -> f64 {
    let r = x - x.floor();
    // `x - floor(x)` rounds to 1.0 for tiny negative x.
    if r >= 1.0 {
        0.0
    } else {
        r
    }
}

/// Distance on `ℝ/ℤ`.
#[inline]
pub fn circle_dist(a: f64, b: f64) -> f64 {
    let d = wrap(a - b);
    d.min(1.0 - d)
}

/// A point of a phase space in chart coordinates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Point {
    pub coords: Vector,
    pub chart: Chart,
}

impl Point {
    /// Builds a point, reducing coordinates into the chart.
    pub fn new(chart: Chart, coords: &[f64]) -> Result<Point> {
        if coords.len() != chart.dim() {
            return Err(DynamicsError::Dimension { expected: chart.dim(), got: coords.len() });
        }
        let mut v = [0.0; MAX_DIM];
        v[..coords.len()].copy_from_slice(coords);
        Ok(Point { coords: chart.reduce(v)?, chart })
    }

    pub fn dim(&self) -> usize {
        self.chart.dim()
    }

    pub fn coords(&self) -> &[f64] {
        &self.coords[..self.dim()]
    }

    pub fn distance(&self, other: &Point) -> f64 {
        self.chart.distance(&self.coords, &other.coords)
    }
}

/// Jacobian matrix in chart coordinates (row-major, `dim × dim`).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Jacobian {
    pub dim: usize,
    pub m: [[f64; MAX_DIM]; MAX_DIM],
}

impl Jacobian {
    pub fn scalar(a: f64) -> Jacobian {
        let mut m = [[0.0; MAX_DIM]; MAX_DIM];
        m[0][0] = a;
        Jacobian { dim: 1, m }
    }

    pub fn diagonal(d: &[f64]) -> Jacobian {
        let mut m = [[0.0; MAX_DIM]; MAX_DIM];
        for (i, &v) in d.iter().enumerate() {
            m[i][i] = v;
        }
        Jacobian { dim: d.len(), m }
    }

    pub fn to_dmatrix(&self) -> nalgebra::DMatrix<f64> {
        nalgebra::DMatrix::from_fn(self.dim, self.dim, |i, j| self.m[i][j])
    }

    fn is_diagonal(&self) -> bool {
        (0..self.dim).all(|i| (0..self.dim).all(|j| i == j || self.m[i][j] == 0.0))
    }

    pub fn det(&self) -> f64 {
        match self.dim {
            1 => self.m[0][0],
            2 => self.m[0][0] * self.m[1][1] - self.m[0][1] * self.m[1][0],
            _ if self.is_diagonal() => (0..self.dim).map(|i| self.m[i][i]).product(),
            _ => self.to_dmatrix().determinant(),
        }
    }

    /// Operator norm of the inverse, `1/σ_min`; `+∞` for a singular matrix.
    pub fn inv_norm(&self) -> f64 {
        let smin = match self.dim {
            1 => self.m[0][0].abs(),
            2 => {
                let [a, b] = [self.m[0][0], self.m[0][1]];
                let [c, d] = [self.m[1][0], self.m[1][1]];
                let fro = a * a + b * b + c * c + d * d;
                let det = (a * d - b * c).abs();
                let disc = (fro * fro - 4.0 * det * det).max(0.0).sqrt();
                let smax = ((fro + disc) / 2.0).sqrt();
                if smax == 0.0 {
                    0.0
                } else {
                    det / smax
                }
            }
            _ if self.is_diagonal() => (0..self.dim).map(|i| self.m[i][i].abs()).fold(f64::INFINITY, f64::min),
            _ => self.to_dmatrix().singular_values().min(),
        };
        1.0 / smin
    }

    /// Largest singular value.
    pub fn norm(&self) -> f64 {
        match self.dim {
            1 => self.m[0][0].abs(),
            _ if self.is_diagonal() => (0..self.dim).map(|i| self.m[i][i].abs()).fold(0.0, f64::max),
            _ => self.to_dmatrix().singular_values().max(),
        }
    }
}

/// Scalar (one-dimensional) structure: derivative, inverse branches and, for circle maps, a
/// monotone lift.
pub trait ScalarMap: Sync {
    /// Derivative `f'(x)` of the unperturbed map.
    fn derivative(&self, x: f64) -> f64;

    /// All preimages of `y` under the unperturbed map, in increasing order.
    fn preimages(&self, y: f64) -> Vec<f64>;

    /// Monotone increasing lift `F: ℝ → ℝ` with `F(x + 1) = F(x) + degree`; `None` for maps
    /// that are not circle coverings.
    fn lift(&self, _x: f64) -> Option<f64> {
        None
    }

    /// `F(c + v) − F(c)` computed without cancellation where possible.
    fn lift_delta(&self, c: f64, v: f64) -> f64 {
        match (self.lift(c + v), self.lift(c)) {
            (Some(a), Some(b)) => a - b,
            _ => f64::NAN,
        }
    }

    /// [`ScalarMap::lift_delta`] applied to every offset in place.
    fn lift_delta_slice(&self, c: f64, v: &mut [f64]) {
        for x in v.iter_mut() {
            *x = self.lift_delta(c, *x);
        }
    }

    /// Solves `F(c + u) − F(c) = v` for `u` (inverse of [`ScalarMap::lift_delta`] along the
    /// branch through `c`). Relies on the lift being increasing.
    fn lift_delta_inverse(&self, c: f64, v: f64) -> f64 {
        if v == 0.0 {
            return 0.0;
        }
        let d = self.derivative(wrap(c)).abs().max(1e-300);
        // Bracket the root by doubling from the linear guess.
        let mut lo = 0.0f64;
        let mut hi = v / d;
        let sgn = v.signum();
        let mut guard = 0;
        while (self.lift_delta(c, hi) - v) * sgn < 0.0 && guard < 200 {
            lo = hi;
            hi *= 2.0;
            guard += 1;
        }
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid == lo || mid == hi {
                break;
            }
            if (self.lift_delta(c, mid) - v) * sgn < 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    }
}

/// A concrete dynamical system.
pub trait MapSystem: Send + Sync + std::fmt::Debug {
    fn name(&self) -> &str;

    fn chart(&self) -> Chart;

    fn dim(&self) -> usize {
        self.chart().dim()
    }

    /// Unperturbed image before chart reduction.
    fn raw(&self, x: &Vector) -> Vector;

    /// Jacobian of `f` (and of every `f_t`).
    fn jacobian(&self, x: &Vector) -> Jacobian;

    /// Distance to the critical set; `+∞` when the critical set is empty.
    fn critical_distance(&self, _x: &Vector) -> f64 {
        f64::INFINITY
    }

    /// Nearest point of the critical set, if there is one.
    fn nearest_critical(&self, _x: &Vector) -> Option<Vector> {
        None
    }

    fn has_critical_set(&self) -> bool {
        false
    }

    /// Map-specific parameters, for manifests.
    fn params(&self) -> Vec<(String, f64)>;

    fn scalar(&self) -> Option<&dyn ScalarMap> {
        None
    }
}

/// `f_t(x) = f(x) + t`, reduced into the chart.
pub fn step(map: &dyn MapSystem, t: &Vector, x: &Point) -> Result<Point> {
    let mut v = map.raw(&x.coords);
    for axis in 0..map.dim() {
        v[axis] += t[axis];
    }
    Ok(Point { coords: map.chart().reduce(v)?, chart: x.chart })
}

/// Per-point derivative bookkeeping.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LocalData {
    pub log_inv_norm: f64,
    pub log_det: f64,
    pub crit_dist: f64,
}

/// `(log‖Df(x)⁻¹‖, log|det Df(x)|, dist(x, 𝒞))`.
pub fn local_data(map: &dyn MapSystem, x: &Point) -> Result<LocalData> {
    let crit_dist = map.critical_distance(&x.coords);
    if crit_dist == 0.0 {
        return Err(DynamicsError::OnCriticalSet);
    }
    let j = map.jacobian(&x.coords);
    Ok(LocalData { log_inv_norm: j.inv_norm().ln(), log_det: j.det().abs().ln(), crit_dist })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn wrap_stays_in_unit_interval() {
        assert_eq!(wrap(-1e-18), 0.0);
        assert_eq!(wrap(1.0), 0.0);
        assert_eq!(wrap(2.25), 0.25);
        assert!((wrap(-0.25) - 0.75).abs() < 1e-15);
    }

    #[test]
    fn inverse_norm_of_triangular_matrix() {
        let mut m = [[0.0; MAX_DIM]; MAX_DIM];
        m[0][0] = 16.0;
        m[1][0] = 0.3;
        m[1][1] = -0.02;
        let j = Jacobian { dim: 2, m };
        let svd = j.to_dmatrix().singular_values();
        assert!((j.inv_norm() - 1.0 / svd.min()).abs() / j.inv_norm() < 1e-12);
        assert!((j.det() - 16.0 * -0.02).abs() < 1e-15);
    }

    #[test]
    fn cylinder_escape_is_reported() {
        let chart = Chart::Cylinder { lo: -1.0, hi: 1.0 };
        assert!(chart.reduce([0.5, 1.5, 0.0, 0.0]).is_err());
        assert_eq!(chart.reduce([1.5, 0.5, 0.0, 0.0]).unwrap()[0], 0.5);
    }
}
