use serde::{Deserialize, Serialize};

use super::base::{circle_orbit, find_base_point, hyperbolic_preball, BasePoint};
use super::{scalar_of, InducingError, Result};
use crate::dynamics::{sample_realization, wrap, MapSystem, NoiseKernel, ScalarMap};
use crate::hyperbolic::{HypParams, HypTracker};
use crate::rng;

/// Constants of the partition construction, resolved numerically for a given map and
/// hyperbolic-time parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InducingConstants {
    pub lambda: f64,
    pub delta: f64,
    pub b: f64,
    pub delta1: f64,
    pub p: f64,
    pub n0: usize,
    pub k0: f64,
    pub d0: f64,
    /// `sup |(log|f'|)'|`.
    pub c0_prime: f64,
    pub c0: f64,
    pub delta0: f64,
    pub alpha: f64,
    pub n_alpha: usize,
    pub zeta: f64,
    pub r0: u32,
}

impl InducingConstants {
    /// Bound `K₀λ^{(R₀−N₀)/2}` on `‖DF⁻¹‖`.
    pub fn kappa_bound(&self) -> f64 {
        self.k0 * self.lambda.powf((self.r0 as f64 - self.n0 as f64) / 2.0)
    }

    /// Bound `D₀ + C₀K₀` on the distortion of the induced branches.
    pub fn distortion_bound(&self) -> f64 {
        self.d0 + self.c0 * self.k0
    }

    /// `K₀⁻¹λ^{N₀/2}δ₀(λ^{−1/2} − 1)`, the strict upper bound on `α`.
    pub fn alpha_limit(&self) -> f64 {
        self.lambda.powf(self.n0 as f64 / 2.0) * self.delta0 * (self.lambda.powf(-0.5) - 1.0) / self.k0
    }

    pub fn hyp_params(&self, base: &HypParams) -> HypParams {
        HypParams { lambda: self.lambda, delta: self.delta, b: self.b, ..*base }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConstantsConfig {
    /// Fixed base point; searched when absent.
    pub p: Option<f64>,
    pub n0_max: usize,
    /// Sample points per unit length for the derivative scans.
    pub grid: usize,
    /// Orbits sampled for `N_α` and `ζ`.
    pub orbits: usize,
    pub horizon: usize,
    pub seed: u64,
}

impl Default for ConstantsConfig {
    fn default() -> Self {
        ConstantsConfig { p: None, n0_max: 24, grid: 4096, orbits: 64, horizon: 200, seed: 0 }
    }
}

/// Whether `‖Df(y)⁻¹‖ ≤ λ^{−1/2}‖Df(x)⁻¹‖` for sampled `y ∈ B(x, δ₁λ^{1/2})`.
fn lemma_ball_holds(map: &dyn MapSystem, scalar: &dyn ScalarMap, lambda: f64, delta: f64, delta1: f64, grid: usize) -> bool {
    if map.has_critical_set() && 2.0 * delta1 >= delta {
        return false;
    }
    let r = delta1 * lambda.sqrt();
    let bound = lambda.powf(-0.5) * (1.0 + 1e-12);
    (0..grid).all(|i| {
        let x = (i as f64 + 0.5) / grid as f64;
        let dx = scalar.derivative(x).abs();
        (-16..=16).all(|k| {
            let y = wrap(x + r * k as f64 / 16.0);
            dx / scalar.derivative(y).abs() <= bound
        })
    })
}

/// Components of `f^{−j}B(p, r)`, `1 ≤ j ≤ n0`, sampled at `samples` points each: returns for
/// every component and sample the pair (image offset from `p`, `log|Df^j|` at the preimage).
fn preimage_components(scalar: &dyn ScalarMap, p: f64, r: f64, n0: usize, samples: usize) -> Vec<Vec<(f64, f64)>> {
    let offsets: Vec<f64> = (0..samples).map(|i| -r + 2.0 * r * i as f64 / (samples - 1) as f64).collect();
    let mut out = Vec::new();
    // Each branch: (preimage point, offsets of the samples at that point, log|Df^j| so far).
    let mut level: Vec<(f64, Vec<f64>, Vec<f64>)> = vec![(p, offsets.clone(), vec![0.0; samples])];
    for _ in 1..=n0 {
        let mut next = Vec::new();
        for (q, w, logd) in &level {
            for q1 in scalar.preimages(*q) {
                let w1: Vec<f64> = w.iter().map(|&v| scalar.lift_delta_inverse(q1, v)).collect();
                let l1: Vec<f64> =
                    w1.iter().zip(logd).map(|(&u, &l)| l + scalar.derivative(wrap(q1 + u)).abs().ln()).collect();
                next.push((q1, w1, l1));
            }
        }
        for (_, _, l) in &next {
            out.push(offsets.iter().copied().zip(l.iter().copied()).collect());
        }
        level = next;
    }
    out
}

/// `(K₀, D₀)` on the preimage components of `B(p, 2√δ₀)` up to order `N₀`.
fn k0_d0(scalar: &dyn ScalarMap, p: f64, delta0: f64, n0: usize) -> (f64, f64) {
    let comps = preimage_components(scalar, p, 2.0 * delta0.sqrt(), n0, 33);
    let mut k0 = 1.0f64;
    let mut d0 = 0.0f64;
    for c in &comps {
        for &(_, l) in c {
            k0 = k0.max(l.abs().exp());
        }
        for w in c.windows(2) {
            d0 = d0.max((w[1].1 - w[0].1).abs() / (w[1].0 - w[0].0));
        }
    }
    (k0, d0)
}

/// Resolves `δ₁, p, N₀, K₀, D₀, C₀, δ₀, α, N_α, ζ, R₀` for a circle map.
pub fn derive_constants(
    map: &dyn MapSystem,
    kernel: NoiseKernel,
    hyp: &HypParams,
    cfg: &ConstantsConfig,
) -> Result<InducingConstants> {
    let scalar = scalar_of(map)?;
    let lambda = hyp.lambda;
    let delta1 = (0..60)
        .map(|k| 0.45 * 2f64.powf(-(k as f64) / 2.0))
        .find(|&d1| lemma_ball_holds(map, scalar, lambda, hyp.delta, d1, cfg.grid))
        .ok_or_else(|| InducingError::Precondition("no admissible δ₁ on the scan".into()))?;

    let BasePoint { p, n0 } = match cfg.p {
        Some(p) => {
            let n0 = super::base::base_point_order(map, p, delta1, cfg.n0_max)?
                .ok_or(InducingError::BasePointNotFound { delta: delta1, n_max: cfg.n0_max })?;
            BasePoint { p, n0 }
        }
        None => find_base_point(map, delta1, cfg.n0_max)?,
    };

    // δ₀ and K₀ depend on each other; K₀ can only decrease as δ₀ shrinks.
    let cap = (delta1 / 8.0).powi(2);
    let (mut k0, mut d0) = k0_d0(scalar, p, cap, n0);
    let mut delta0 = cap;
    for _ in 0..50 {
        let next = (0.9 * delta1 / (20.0 * k0.powi(n0 as i32))).min(cap);
        let (k, d) = k0_d0(scalar, p, next, n0);
        let done = (next - delta0).abs() <= 1e-12 * delta0;
        delta0 = next;
        k0 = k;
        d0 = d;
        if done {
            break;
        }
    }
    if 5.0 * delta0 * k0.powi(n0 as i32) >= delta1 / 4.0 {
        return Err(InducingError::Precondition("5δ₀K₀^N₀ < δ₁/4 cannot be met".into()));
    }

    let h = 1e-6;
    let c0_prime = (0..cfg.grid)
        .map(|i| {
            let x = (i as f64 + 0.5) / cfg.grid as f64;
            let a = scalar.derivative(wrap(x - h)).abs().ln();
            let b = scalar.derivative(wrap(x + h)).abs().ln();
            ((b - a) / (2.0 * h)).abs()
        })
        .fold(0.0, f64::max);
    let sl = lambda.sqrt();
    let c0 = c0_prime * sl / (1.0 - sl);

    let alpha = 0.9 * lambda.powf(n0 as f64 / 2.0) * delta0 * (lambda.powf(-0.5) - 1.0) / k0;

    // N_α and ζ from sampled orbits.
    let hyp_params = HypParams { lambda, ..*hyp };
    let mut n_alpha = 0usize;
    let mut zeta = f64::INFINITY;
    for i in 0..cfg.orbits {
        let real = sample_realization(kernel, rng::derive_seed(cfg.seed, i as u64), 0, cfg.horizon);
        let x = (i as f64 + 0.5) / cfg.orbits as f64;
        let orbit = circle_orbit(map, &real, x, cfg.horizon)?;
        let mut tracker = HypTracker::new(&hyp_params);
        let mut count = 0usize;
        let mut first = None;
        for (n, &c) in orbit[..cfg.horizon].iter().enumerate() {
            let is_hyp = tracker.push(-scalar.derivative(c).abs().ln(), map.critical_distance(&[c, 0.0, 0.0, 0.0]));
            if !is_hyp {
                continue;
            }
            count += 1;
            if first.is_none() {
                let ball = hyperbolic_preball(map, &real, x, n + 1, delta1, &hyp_params)?;
                if (-ball.lo).max(ball.hi) <= alpha {
                    first = Some(n + 1);
                }
            }
        }
        let fa = first.ok_or_else(|| {
            InducingError::Precondition(format!("no hyperbolic pre-ball of radius ≤ α within {} steps", cfg.horizon))
        })?;
        n_alpha = n_alpha.max(fa);
        zeta = zeta.min(count as f64 / cfg.horizon as f64);
    }
    if !(zeta > 0.0) {
        return Err(InducingError::Precondition("no hyperbolic times on a sampled orbit".into()));
    }
    let n = (n0 + n_alpha) as f64;
    let r0 = (2.0 * (n + 1.0)).max(12.0 / zeta).ceil() as u32 + 1;

    Ok(InducingConstants {
        lambda,
        delta: hyp.delta,
        b: hyp.b,
        delta1,
        p,
        n0,
        k0,
        d0,
        c0_prime,
        c0,
        delta0,
        alpha,
        n_alpha,
        zeta,
        r0,
    })
}
