//! Numerical resolution of the constants the constructive argument only asserts to exist:
//! `a0`, `ρ`, `α₁`, `r₁`, `Q`, `ζ₁`, `α₂`, `r₂`, `b`, `b0`.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::tails::uniform_point;
use super::{truncated_distance, HypError, HypParams, Result};
use crate::dynamics::{nondegeneracy_probe, random_orbit, sample_realization, MapSystem, NoiseKernel, OrbitLog};
use crate::rng;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ResolveConfig {
    /// Fixed `a0`; estimated from the sampled orbits when absent.
    pub a0: Option<f64>,
    /// Fixed non-degeneracy exponent; probed when absent.
    pub beta: Option<f64>,
    pub orbits: usize,
    pub horizon: usize,
    /// Sample points per axis of the grid used for `ρ` and `Q`.
    pub grid: usize,
    /// Fraction of sampled orbits on which the finite-horizon recurrence bounds must hold.
    pub coverage: f64,
    pub seed: u64,
}

impl Default for ResolveConfig {
    fn default() -> Self {
        ResolveConfig { a0: None, beta: None, orbits: 200, horizon: 2000, grid: 512, coverage: 0.95, seed: 0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ResolvedConstants {
    pub a0: f64,
    pub beta: f64,
    pub b: f64,
    pub rho: f64,
    pub alpha1: f64,
    pub r1: f64,
    pub q: f64,
    pub zeta1: f64,
    pub alpha2: f64,
    pub r2: f64,
    pub b0: f64,
    pub delta: f64,
    pub lambda: f64,
    /// Lower `coverage`-quantile of the finite-time averages `−(1/N)Σ log‖Df⁻¹‖`.
    pub expansion_quantile: f64,
}

impl ResolvedConstants {
    pub fn hyp_params(&self) -> HypParams {
        HypParams { lambda: self.lambda, delta: self.delta, b: self.b, a0: self.a0, b0: self.b0, q: self.q, rho: self.rho }
    }
}

fn grid_points(map: &dyn MapSystem, per_axis: usize, seed: u64) -> Vec<crate::dynamics::Vector> {
    let chart = map.chart();
    let dim = chart.dim();
    let total = per_axis.pow(dim as u32);
    let mut r = rng::stream(seed, rng::domain::PROBE, 1);
    (0..total)
        .map(|mut idx| {
            let mut u = vec![0.0; dim];
            for v in u.iter_mut() {
                // Jittered grid: one uniform point per cell.
                *v = ((idx % per_axis) as f64 + r.random::<f64>()) / per_axis as f64;
                idx /= per_axis;
            }
            chart.from_unit(&u)
        })
        .collect()
}

fn quantile(mut v: Vec<f64>, q: f64) -> f64 {
    v.sort_by(f64::total_cmp);
    let idx = ((q * v.len() as f64).floor() as usize).min(v.len() - 1);
    v[idx]
}

/// Largest radius `r` on the geometric scan `0.5·2^{−k/2}` such that
/// `Σ log dist_r ≥ −alpha·N` on at least `coverage` of the orbits.
fn recurrence_radius(orbits: &[OrbitLog], alpha: f64, coverage: f64) -> Option<f64> {
    for k in 0..120 {
        let r = 0.5 * 2f64.powf(-(k as f64) / 2.0);
        let ok = orbits
            .iter()
            .filter(|o| {
                let s: f64 = o.crit_dist.iter().map(|&d| truncated_distance(d, r).ln()).sum();
                s >= -alpha * o.len() as f64
            })
            .count();
        if ok as f64 >= coverage * orbits.len() as f64 {
            return Some(r);
        }
    }
    None
}

pub fn resolve_constants(map: &dyn MapSystem, kernel: NoiseKernel, cfg: &ResolveConfig) -> Result<ResolvedConstants> {
    let orbits: Vec<OrbitLog> = (0..cfg.orbits)
        .into_par_iter()
        .map(|i| {
            let real = sample_realization(kernel, rng::derive_seed(cfg.seed, i as u64), 0, cfg.horizon);
            let x0 = uniform_point(map, cfg.seed, i as u64);
            random_orbit(map, &real, &x0, cfg.horizon).map_err(HypError::from)
        })
        .collect::<Result<_>>()?;

    let averages: Vec<f64> =
        orbits.iter().map(|o| -o.log_inv_norm.iter().sum::<f64>() / o.len().max(1) as f64).collect();
    let expansion_quantile = quantile(averages, 1.0 - cfg.coverage);
    let a0 = match cfg.a0 {
        Some(a) => a,
        None if expansion_quantile > 0.0 => 0.5 * expansion_quantile,
        None => {
            return Err(HypError::Precondition(format!(
                "sampled finite-time expansion {expansion_quantile:.4} is not positive"
            )))
        }
    };
    let lambda = (-a0 / 4.0).exp();
    let grid = grid_points(map, cfg.grid, cfg.seed);

    if !map.has_critical_set() {
        let q = grid.iter().map(|x| -map.jacobian(x).inv_norm().ln()).fold(f64::NEG_INFINITY, f64::max);
        let b = 0.25;
        return Ok(ResolvedConstants {
            a0,
            beta: 0.0,
            b,
            rho: 0.0,
            alpha1: 0.0,
            r1: 1.0,
            q,
            zeta1: a0 / (4.0 * q),
            alpha2: 0.0,
            r2: 1.0,
            b0: b * a0 / 8.0,
            delta: 1.0,
            lambda,
            expansion_quantile,
        });
    }

    let beta = match cfg.beta {
        Some(b) => b,
        None => nondegeneracy_probe(map, 2000, cfg.seed)?.beta_hat,
    };
    let b = 1f64.min(1.0 / beta) / 4.0;

    // (27) is a statement near 𝒞; sample where |log dist| is bounded away from zero.
    let rho = grid
        .iter()
        .filter_map(|x| {
            let d = map.critical_distance(x);
            (d > 0.0 && d < 0.5).then(|| map.jacobian(x).inv_norm().ln().abs() / d.ln().abs())
        })
        .fold(1.0f64, f64::max);
    let alpha1 = a0 / (2.0 * rho);
    let r1 = recurrence_radius(&orbits, alpha1, cfg.coverage)
        .ok_or_else(|| HypError::Precondition("no admissible r1: orbits recur too fast".into()))?;
    let q_outside = grid
        .iter()
        .filter(|x| map.critical_distance(x) >= r1)
        .map(|x| -map.jacobian(x).inv_norm().ln())
        .fold(f64::NEG_INFINITY, f64::max);
    let q = (rho * r1.ln().abs()).max(q_outside);
    let zeta1 = a0 / (4.0 * q);
    let alpha2 = zeta1 * b * a0 / 8.0;
    let r2 = recurrence_radius(&orbits, alpha2, cfg.coverage)
        .ok_or_else(|| HypError::Precondition("no admissible r2: orbits recur too fast".into()))?;
    Ok(ResolvedConstants {
        a0,
        beta,
        b,
        rho,
        alpha1,
        r1,
        q,
        zeta1,
        alpha2,
        r2,
        b0: b * a0 / 8.0,
        delta: r2,
        lambda,
        expansion_quantile,
    })
}
