use serde::{Deserialize, Serialize};

use super::{scalar_of, InducingError, Result};
use crate::dynamics::{wrap, MapSystem, Realization, ScalarMap};
use crate::hyperbolic::{HypParams, HypTracker};

/// Candidate base points: the first terms of the golden-ratio sequence, which avoid rational
/// points (periodic orbits of the catalog maps) and spread over the circle.
fn candidates() -> impl Iterator<Item = f64> {
    (1..=64).map(|k| (k as f64 * 0.618_033_988_749_894_8).fract())
}

/// Preimage sets `f^{−j}{p}` are enumerated only while they stay below this size.
const MAX_PREIMAGES: usize = 1 << 21;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BasePoint {
    pub p: f64,
    pub n0: usize,
}

/// Largest gap of a finite subset of the circle.
fn max_gap(points: &mut [f64]) -> f64 {
    points.sort_by(f64::total_cmp);
    let mut gap = points[0] + 1.0 - points[points.len() - 1];
    for w in points.windows(2) {
        gap = gap.max(w[1] - w[0]);
    }
    gap
}

/// Smallest `N ≤ n_max` such that `⋃_{j≤N} f^{−j}{p}` is `δ/3`-dense (every point of the circle
/// within `δ/3`) and avoids the critical set.
pub fn base_point_order(map: &dyn MapSystem, p: f64, delta: f64, n_max: usize) -> Result<Option<usize>> {
    let scalar = scalar_of(map)?;
    let mut all = vec![wrap(p)];
    let mut level = vec![wrap(p)];
    for n in 0..=n_max {
        if n > 0 {
            let next: Vec<f64> = level.iter().flat_map(|&y| scalar.preimages(y)).collect();
            if next.len() + all.len() > MAX_PREIMAGES {
                return Ok(None);
            }
            level = next;
            all.extend_from_slice(&level);
        }
        if level.iter().any(|&q| map.critical_distance(&[q, 0.0, 0.0, 0.0]) == 0.0) {
            return Ok(None);
        }
        let mut pts = all.clone();
        if max_gap(&mut pts) <= 2.0 * delta / 3.0 {
            return Ok(Some(n));
        }
    }
    Ok(None)
}

/// A base point with the smallest density order among the candidates.
pub fn find_base_point(map: &dyn MapSystem, delta: f64, n_max: usize) -> Result<BasePoint> {
    let mut best: Option<BasePoint> = None;
    for p in candidates() {
        let cap = best.map_or(n_max, |b| b.n0.saturating_sub(1));
        if best.is_some_and(|b| b.n0 == 0) {
            break;
        }
        if let Some(n0) = base_point_order(map, p, delta, cap)? {
            best = Some(BasePoint { p, n0 });
        }
    }
    best.ok_or(InducingError::BasePointNotFound { delta, n_max })
}

/// A hyperbolic pre-ball `V^n(x)`, as offsets from `x`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PreBall {
    pub x: f64,
    pub n: usize,
    pub lo: f64,
    pub hi: f64,
    pub image_center: f64,
    pub radius: f64,
    /// Orbit `x, f_ω(x), …, f_ω^n(x)`.
    #[serde(skip)]
    pub orbit: Vec<f64>,
}

impl PreBall {
    /// Images at time `k` of the offsets `u` (from `x`) of points of the pre-ball.
    pub fn forward(&self, scalar: &dyn ScalarMap, u: f64, k: usize) -> f64 {
        self.orbit[..k].iter().fold(u, |w, &c| scalar.lift_delta(c, w))
    }
}

/// Orbit of `x` under `f_{ω_{n−1}} ∘ ⋯ ∘ f_{ω_0}`.
pub(crate) fn circle_orbit(map: &dyn MapSystem, realization: &Realization, x: f64, n: usize) -> Result<Vec<f64>> {
    let mut c = Vec::with_capacity(n + 1);
    c.push(wrap(x));
    for j in 0..n {
        let t = realization.get(j as i64)?[0];
        c.push(wrap(map.raw(&[c[j], 0.0, 0.0, 0.0])[0] + t));
    }
    Ok(c)
}

/// Pulls `B(f_ω^n(x), radius)` back along the orbit of `x`. Requires `n` to be a hyperbolic
/// time of `(ω, x)`.
pub fn hyperbolic_preball(
    map: &dyn MapSystem,
    realization: &Realization,
    x: f64,
    n: usize,
    radius: f64,
    params: &HypParams,
) -> Result<PreBall> {
    let scalar = scalar_of(map)?;
    let orbit = circle_orbit(map, realization, x, n)?;
    let mut tracker = HypTracker::new(params);
    let mut hyp = n == 0;
    for &c in &orbit[..n] {
        hyp = tracker.push(-scalar.derivative(c).abs().ln(), map.critical_distance(&[c, 0.0, 0.0, 0.0]));
    }
    if !hyp {
        return Err(InducingError::Precondition(format!("{n} is not a hyperbolic time of x = {x}")));
    }
    let (mut lo, mut hi) = (-radius, radius);
    for j in (0..n).rev() {
        lo = scalar.lift_delta_inverse(orbit[j], lo);
        hi = scalar.lift_delta_inverse(orbit[j], hi);
        if !(lo < 0.0 && 0.0 < hi) || hi - lo >= 1.0 {
            return Err(InducingError::BranchCrossing { step: j });
        }
        let crossing = (0..=16).any(|i| {
            let u = lo + (hi - lo) * i as f64 / 16.0;
            map.critical_distance(&[wrap(orbit[j] + u), 0.0, 0.0, 0.0]) == 0.0
        });
        if crossing {
            return Err(InducingError::BranchCrossing { step: j });
        }
    }
    Ok(PreBall { x, n, lo, hi, image_center: orbit[n], radius, orbit })
}

/// Worst backward-contraction excess over sampled pairs of the pre-ball:
/// `max log(dist(f^{n−k}y, f^{n−k}z) / (λ^{k/2} dist(f^n y, f^n z)))`, which is `≤ 0` when
/// the contraction property holds.
pub fn preball_contraction_excess(scalar: &dyn ScalarMap, ball: &PreBall, lambda: f64, samples: usize) -> f64 {
    let n = ball.n;
    let pts: Vec<f64> = (0..samples.max(2))
        .map(|i| ball.lo + (ball.hi - ball.lo) * (i as f64 + 0.5) / samples.max(2) as f64)
        .collect();
    // Offsets of all sample points at every time.
    let traj: Vec<Vec<f64>> = pts
        .iter()
        .map(|&u| {
            let mut t = vec![u];
            for &c in &ball.orbit[..n] {
                let w = scalar.lift_delta(c, *t.last().unwrap());
                t.push(w);
            }
            t
        })
        .collect();
    let mut worst = f64::NEG_INFINITY;
    for a in 0..traj.len() {
        for b in a + 1..traj.len() {
            let end = (traj[a][n] - traj[b][n]).abs();
            for k in 1..=n {
                let d = (traj[a][n - k] - traj[b][n - k]).abs();
                worst = worst.max((d / end).ln() - 0.5 * k as f64 * lambda.ln());
            }
        }
    }
    worst
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::Doubling;

    #[test]
    fn gaps_wrap_around() {
        assert!((max_gap(&mut [0.1, 0.2, 0.9]) - 0.7).abs() < 1e-15);
        assert!((max_gap(&mut [0.05, 0.95]) - 0.9).abs() < 1e-15);
    }

    #[test]
    fn doubling_orders() {
        let m = Doubling::new(2).unwrap();
        // Level-N preimages are spaced 2^{−N}; δ/3-density needs 2^{−N} ≤ 2δ/3.
        assert_eq!(base_point_order(&m, 0.3, 0.1, 20).unwrap(), Some(4));
        assert_eq!(base_point_order(&m, 0.3, 0.45, 20).unwrap(), Some(2));
        assert_eq!(base_point_order(&m, 0.3, 0.1, 3).unwrap(), None);
    }
}
