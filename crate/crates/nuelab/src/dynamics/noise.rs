use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::{DynamicsError, Result, Vector, MAX_DIM};
use crate::rng;

/// `θ_ε`: the uniform measure on the closed ball of radius `ε` in `ℝ^d`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseKernel {
    pub epsilon: f64,
    pub dim: usize,
}

impl NoiseKernel {
    pub fn new(epsilon: f64, dim: usize) -> Result<NoiseKernel> {
        if !(epsilon >= 0.0 && epsilon.is_finite()) || dim == 0 || dim > MAX_DIM {
            return Err(DynamicsError::InvalidParameters(format!("noise kernel: epsilon={epsilon}, dim={dim}")));
        }
        Ok(NoiseKernel { epsilon, dim })
    }

    pub fn dirac(dim: usize) -> NoiseKernel {
        NoiseKernel { epsilon: 0.0, dim }
    }

    pub fn is_dirac(&self) -> bool {
        self.epsilon == 0.0
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Vector {
        let mut t = [0.0; MAX_DIM];
        if self.is_dirac() {
            return t;
        }
        if self.dim == 1 {
            t[0] = self.epsilon * (2.0 * rng.random::<f64>() - 1.0);
            return t;
        }
        // Isotropic direction times a radius with density ∝ r^{d−1}.
        let mut norm2 = 0.0;
        while norm2 == 0.0 {
            for v in t.iter_mut().take(self.dim) {
                *v = StandardNormal.sample(rng);
                norm2 += *v * *v;
            }
        }
        let radius = self.epsilon * rng.random::<f64>().powf(1.0 / self.dim as f64) / norm2.sqrt();
        for v in t.iter_mut().take(self.dim) {
            *v *= radius;
        }
        t
    }

    /// Maps a point of the unit cube `[0,1)^d` onto the ball; used for stratified quadrature.
    /// In 1D this is the affine map onto `[−ε, ε]`; in 2D it is the area-preserving polar map.
    pub fn from_unit(&self, u: &[f64]) -> Vector {
        let mut t = [0.0; MAX_DIM];
        match self.dim {
            1 => t[0] = self.epsilon * (2.0 * u[0] - 1.0),
            2 => {
                let r = self.epsilon * u[0].sqrt();
                let a = 2.0 * std::f64::consts::PI * u[1];
                t[0] = r * a.cos();
                t[1] = r * a.sin();
            }
            _ => {
                // Radial squash of the cube into the ball. Not measure preserving; quadrature
                // callers draw i.i.d. samples instead when d > 2.
                let mut n2 = 0.0;
                for i in 0..self.dim {
                    t[i] = 2.0 * u[i] - 1.0;
                    n2 += t[i] * t[i];
                }
                let s = if n2 > 0.0 { self.epsilon * n2.sqrt().min(1.0) / n2.sqrt() } else { 0.0 };
                for v in t.iter_mut().take(self.dim) {
                    *v *= s;
                }
            }
        }
        t
    }
}

/// A finite window of a realization `ω`. Entries are pure functions of `(seed, absolute index)`,
/// so windows can be extended or shifted without disturbing existing draws.
#[derive(Debug, Clone, PartialEq)]
pub struct Realization {
    pub kernel: NoiseKernel,
    pub seed: u64,
    /// Absolute index of `ω₀` in the underlying two-sided sequence (`σ^j` adds `j`).
    pub shift: i64,
    /// Index (in the shifted frame) of the first window entry; may be negative.
    pub origin_index: i64,
    pub window: Vec<Vector>,
}

impl Realization {
    /// Absolute draw `index` of the underlying two-sided sequence.
    pub fn draw(kernel: &NoiseKernel, seed: u64, index: i64) -> Vector {
        if kernel.is_dirac() {
            return [0.0; MAX_DIM];
        }
        let mut r = rng::stream(seed, rng::domain::NOISE, index as u64);
        kernel.sample(&mut r)
    }

    pub fn len(&self) -> usize {
        self.window.len()
    }

    pub fn is_empty(&self) -> bool {
        self.window.is_empty()
    }

    /// One past the last covered index.
    pub fn end(&self) -> i64 {
        self.origin_index + self.window.len() as i64
    }

    pub fn covers(&self, first: i64, count: usize) -> bool {
        first >= self.origin_index && first + count as i64 <= self.end()
    }

    /// `ω_i`.
    pub fn get(&self, i: i64) -> Result<&Vector> {
        if i < self.origin_index || i >= self.end() {
            return Err(DynamicsError::ShortRealization {
                have: self.window.len(),
                need: (i - self.origin_index + 1).unsigned_abs() as usize,
            });
        }
        Ok(&self.window[(i - self.origin_index) as usize])
    }

    /// Extends the window forward so that it covers indices below `end`.
    pub fn extend_to(&mut self, end: i64) {
        while self.end() < end {
            let abs = self.shift + self.end();
            self.window.push(Realization::draw(&self.kernel, self.seed, abs));
        }
    }

    /// Extends the window backward so that it covers `first`.
    pub fn extend_back_to(&mut self, first: i64) {
        if first >= self.origin_index {
            return;
        }
        let mut head: Vec<Vector> =
            (first..self.origin_index).map(|i| Realization::draw(&self.kernel, self.seed, self.shift + i)).collect();
        head.append(&mut self.window);
        self.window = head;
        self.origin_index = first;
    }

    /// `σ^j(ω)`: the realization whose `i`-th entry is `ω_{i+j}`; `j` may be negative.
    pub fn shifted(&self, j: i64) -> Realization {
        Realization {
            kernel: self.kernel,
            seed: self.seed,
            shift: self.shift + j,
            origin_index: self.origin_index - j,
            window: self.window.clone(),
        }
    }
}

/// Materializes `count` draws `ω_first, …, ω_{first+count−1}`.
pub fn sample_realization(kernel: NoiseKernel, seed: u64, first: i64, count: usize) -> Realization {
    let window = (0..count as i64).map(|k| Realization::draw(&kernel, seed, first + k)).collect();
    Realization { kernel, seed, shift: 0, origin_index: first, window }
}
