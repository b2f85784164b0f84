use rand::Rng;
use serde::Serialize;

use super::{DynamicsError, MapSystem, Result, Vector, MAX_DIM};
use crate::rng;

/// Empirical non-degeneracy constants of a critical set.
#[derive(Debug, Clone, Serialize)]
pub struct ProbeReport {
    /// Power-law exponent fitted from `log‖Df⁻¹‖` against `log dist(x, 𝒞)` close to `𝒞`.
    pub beta_hat: f64,
    /// Smallest `B` satisfying every sampled inequality at `β = beta_hat`.
    pub b_hat: f64,
    /// Worst-case ratios `B` required by each condition separately.
    pub c1_ratio: f64,
    pub c2_ratio: f64,
    pub c3_ratio: f64,
    pub fit_r2: f64,
    pub points: usize,
    pub pairs_used: usize,
    /// Pairs violating `dist(x, y) < dist(x, 𝒞)/2`, excluded from the Lipschitz checks.
    pub pairs_excluded: usize,
}

/// Samples points approaching `𝒞` log-uniformly in distance, fits `β̂`, then computes the
/// smallest `B̂` compatible with the power-law bounds and both local-Lipschitz bounds.
pub fn nondegeneracy_probe(map: &dyn MapSystem, samples: usize, seed: u64) -> Result<ProbeReport> {
    if !map.has_critical_set() {
        return Err(DynamicsError::NoCriticalSet(map.name().to_string()));
    }
    let chart = map.chart();
    let dim = chart.dim();
    let mut rng = rng::stream(seed, rng::domain::PROBE, 0);

    // Points near 𝒞 along the normal direction at distances 10^-6 … 10^-1.
    let mut points: Vec<Vector> = Vec::with_capacity(samples);
    while points.len() < samples {
        let u: Vec<f64> = (0..dim).map(|_| rng.random::<f64>()).collect();
        let x = chart.from_unit(&u);
        let Some(c) = map.nearest_critical(&x) else { continue };
        let mut dir = [0.0; MAX_DIM];
        let mut n2 = 0.0;
        for a in 0..dim {
            dir[a] = x[a] - c[a];
            n2 += dir[a] * dir[a];
        }
        if n2 == 0.0 {
            continue;
        }
        let r = 10f64.powf(-6.0 + 5.0 * rng.random::<f64>());
        let mut y = c;
        for a in 0..dim {
            y[a] += r * dir[a] / n2.sqrt();
        }
        if let Ok(y) = chart.reduce(y) {
            if map.critical_distance(&y) > 0.0 {
                points.push(y);
            }
        }
    }

    // β̂: least-squares slope of log‖Df⁻¹‖ on −log dist.
    let xs: Vec<f64> = points.iter().map(|p| -map.critical_distance(p).ln()).collect();
    let ys: Vec<f64> = points.iter().map(|p| map.jacobian(p).inv_norm().ln()).collect();
    let (slope, _, r2) = linear_fit(&xs, &ys);
    let beta = slope.max(0.0);

    let mut c1 = 0.0f64;
    for p in &points {
        let d = map.critical_distance(p);
        let j = map.jacobian(p);
        // (1/B) d^β ≤ σ_min and σ_max ≤ B d^{−β}.
        c1 = c1.max(d.powf(beta) * j.inv_norm()).max(j.norm() * d.powf(beta));
    }

    let (mut c2, mut c3) = (0.0f64, 0.0f64);
    let (mut used, mut excluded) = (0usize, 0usize);
    for p in &points {
        let d = map.critical_distance(p);
        // Half the partners are drawn beyond the admissible radius to exercise the exclusion.
        for _ in 0..4 {
            let scale = if rng.random::<bool>() { 0.49 } else { 1.5 };
            let mut q = *p;
            for a in 0..dim {
                q[a] += scale * d * (2.0 * rng.random::<f64>() - 1.0) / (dim as f64).sqrt();
            }
            let Ok(q) = chart.reduce(q) else { continue };
            let dxy = chart.distance(p, &q);
            if dxy == 0.0 || map.critical_distance(&q) == 0.0 {
                continue;
            }
            if dxy >= d / 2.0 {
                excluded += 1;
                continue;
            }
            used += 1;
            let (jp, jq) = (map.jacobian(p), map.jacobian(&q));
            let w = d.powf(beta) / dxy;
            c2 = c2.max((jp.inv_norm().ln() - jq.inv_norm().ln()).abs() * w);
            c3 = c3.max((jp.det().abs().ln() - jq.det().abs().ln()).abs() * w);
        }
    }

    Ok(ProbeReport {
        beta_hat: beta,
        b_hat: c1.max(c2).max(c3).max(1.0),
        c1_ratio: c1,
        c2_ratio: c2,
        c3_ratio: c3,
        fit_r2: r2,
        points: points.len(),
        pairs_used: used,
        pairs_excluded: excluded,
    })
}

/// Ordinary least squares `y ≈ slope·x + intercept`; returns `(slope, intercept, R²)`.
pub(crate) fn linear_fit(x: &[f64], y: &[f64]) -> (f64, f64, f64) {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|v| (v - mx) * (v - mx)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let syy: f64 = y.iter().map(|v| (v - my) * (v - my)).sum();
    let slope = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    let intercept = my - slope * mx;
    let ss_res: f64 = x.iter().zip(y).map(|(a, b)| (b - slope * a - intercept).powi(2)).sum();
    let r2 = if syy > 0.0 { 1.0 - ss_res / syy } else { 1.0 };
    (slope, intercept, r2)
}
