use serde::Serialize;

use super::pliss::{check_hypotheses, pliss_times_unchecked};
use super::{truncated_distance, HypError, HypParams};
use crate::dynamics::OrbitLog;

/// Absolute slack on log-sums when deciding hyperbolicity; exact affine products such as
/// `(1/2)^k ≤ (1/2)^k` must not be lost to rounding.
pub const LOG_TOL: f64 = 1e-9;

fn log_dist(orbit: &OrbitLog, m: usize, delta: f64) -> f64 {
    truncated_distance(orbit.crit_dist[m], delta).ln()
}

/// All `(λ, δ)`-hyperbolic times `n ∈ {1, …, N}` of an orbit, in `O(N)`.
///
/// With `P(m) = Σ_{j<m} log‖Df(x_j)⁻¹‖`, the product condition for every `k` is
/// `P(n) − n·log λ ≤ min_{m<n} (P(m) − m·log λ)`; the recurrence condition is
/// `min_{m<n} (log dist_δ(x_m) + b·m·log λ) ≥ b·n·log λ`.
pub fn hyperbolic_times_direct(orbit: &OrbitLog, params: &HypParams) -> Vec<usize> {
    let ll = params.lambda.ln();
    let check_crit = !orbit.crit_dist.iter().all(|d| d.is_infinite());
    let mut out = Vec::new();
    let mut p = 0.0f64;
    let mut min_m = f64::INFINITY;
    let mut min_d = f64::INFINITY;
    for n in 1..=orbit.len() {
        let m = n - 1;
        min_m = min_m.min(p - m as f64 * ll);
        if check_crit {
            min_d = min_d.min(log_dist(orbit, m, params.delta) + params.b * m as f64 * ll);
        }
        p += orbit.log_inv_norm[m];
        let mn = p - n as f64 * ll;
        let expands = mn <= min_m + LOG_TOL;
        let recurs = !check_crit || min_d >= params.b * n as f64 * ll - LOG_TOL;
        if expands && recurs {
            out.push(n);
        }
    }
    out
}

/// Incremental form of [`hyperbolic_times_direct`]: feed the orbit one point at a time.
#[derive(Debug, Clone)]
pub struct HypTracker {
    ll: f64,
    b: f64,
    delta: f64,
    n: usize,
    p: f64,
    min_m: f64,
    min_d: f64,
}

impl HypTracker {
    pub fn new(params: &HypParams) -> HypTracker {
        HypTracker {
            ll: params.lambda.ln(),
            b: params.b,
            delta: params.delta,
            n: 0,
            p: 0.0,
            min_m: f64::INFINITY,
            min_d: f64::INFINITY,
        }
    }

    /// Consumes `log‖Df(x_m)⁻¹‖` and `dist(x_m, 𝒞)` for the next orbit point `x_m` and reports
    /// whether `m + 1` is a hyperbolic time.
    pub fn push(&mut self, log_inv_norm: f64, crit_dist: f64) -> bool {
        let m = self.n as f64;
        self.min_m = self.min_m.min(self.p - m * self.ll);
        let d = truncated_distance(crit_dist, self.delta).ln();
        self.min_d = self.min_d.min(d + self.b * m * self.ll);
        self.p += log_inv_norm;
        self.n += 1;
        let n = self.n as f64;
        self.p - n * self.ll <= self.min_m + LOG_TOL && self.min_d >= self.b * n * self.ll - LOG_TOL
    }

    /// Number of points consumed so far.
    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }
}

/// Literal transcription of the definition for a single `n`: checks every `1 ≤ k ≤ n`.
pub fn is_hyperbolic_time(orbit: &OrbitLog, n: usize, params: &HypParams) -> bool {
    if n == 0 || n > orbit.len() {
        return false;
    }
    let ll = params.lambda.ln();
    let mut sum = 0.0;
    for k in 1..=n {
        sum += orbit.log_inv_norm[n - k];
        if sum > k as f64 * ll + LOG_TOL {
            return false;
        }
        let d = orbit.crit_dist[n - k];
        if d.is_finite() && log_dist(orbit, n - k, params.delta) < params.b * k as f64 * ll - LOG_TOL {
            return false;
        }
    }
    true
}

/// Output of the constructive (two-pass Pliss) extraction.
#[derive(Debug, Clone, Serialize)]
pub struct PlissExtraction {
    pub times: Vec<usize>,
    /// Rate at which every returned time is hyperbolic: `e^{−a0/4}`, or `e^{−a0/2}` when `𝒞 = ∅`.
    pub lambda: f64,
    pub zeta1: f64,
    pub zeta2: f64,
    /// Guaranteed frequency `ζ₁ + ζ₂ − 1` (or `ζ₁` with a single pass).
    pub zeta: f64,
    pub alpha2: f64,
    pub first_pass: Vec<usize>,
    pub second_pass: Vec<usize>,
}

/// Premises of the constructive extraction that failed on a finite orbit.
#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct HypothesisFailure {
    pub expansion_sum: f64,
    pub expansion_needed: f64,
    pub recurrence_sum: f64,
    pub recurrence_needed: f64,
    pub detail: String,
}

fn single_pass(orbit: &OrbitLog, a0: f64) -> (Vec<f64>, f64, f64) {
    let c = a0 / 2.0;
    let a: Vec<f64> = orbit.log_inv_norm.iter().map(|l| -l - c).collect();
    let big_a = a.iter().copied().fold(c, f64::max);
    (a, c, big_a)
}

fn two_pass(orbit: &OrbitLog, params: &HypParams) -> (Vec<f64>, Vec<f64>, f64, f64, f64) {
    let quarter = params.a0 / 4.0;
    let first: Vec<f64> = orbit
        .log_inv_norm
        .iter()
        .map(|l| {
            let bj = if -l > params.q { 0.0 } else { -l };
            bj - quarter
        })
        .collect();
    let zeta1 = quarter / params.q;
    let alpha2 = zeta1 * params.b * params.a0 / 8.0;
    let top = params.b * quarter;
    let second: Vec<f64> = (0..orbit.len()).map(|m| log_dist(orbit, m, params.delta) + top).collect();
    (first, second, zeta1, alpha2, top)
}

fn intersect(a: &[usize], b: &[usize]) -> Vec<usize> {
    let (mut i, mut j, mut out) = (0, 0, Vec::new());
    while i < a.len() && j < b.len() {
        match a[i].cmp(&b[j]) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                out.push(a[i]);
                i += 1;
                j += 1;
            }
        }
    }
    out
}

/// The constructive extraction without checking its premises. Every returned index is still a
/// hyperbolic time at the reported rate, because the maximal Pliss sets certify the needed
/// partial sums directly; only the frequency guarantee depends on the premises.
pub fn hyperbolic_times_pliss_unchecked(orbit: &OrbitLog, params: &HypParams, has_critical_set: bool) -> PlissExtraction {
    if !has_critical_set {
        let (a, c, big_a) = single_pass(orbit, params.a0);
        let times = pliss_times_unchecked(&a);
        let zeta = c / big_a;
        return PlissExtraction {
            first_pass: times.clone(),
            second_pass: Vec::new(),
            times,
            lambda: (-params.a0 / 2.0).exp(),
            zeta1: zeta,
            zeta2: 1.0,
            zeta,
            alpha2: 0.0,
        };
    }
    let (first, second, zeta1, alpha2, top) = two_pass(orbit, params);
    let p1 = pliss_times_unchecked(&first);
    let p2 = pliss_times_unchecked(&second);
    let zeta2 = (top - alpha2) / top;
    PlissExtraction {
        times: intersect(&p1, &p2),
        lambda: (-params.a0 / 4.0).exp(),
        zeta1,
        zeta2,
        zeta: zeta1 + zeta2 - 1.0,
        alpha2,
        first_pass: p1,
        second_pass: p2,
    }
}

/// The constructive extraction, refusing orbits whose finite sums do not meet its premises:
/// `Σ b_j ≥ (a0/2)N` after the cut-off at `Q`, and `Σ log dist_δ ≥ −α₂N`.
pub fn hyperbolic_times_pliss(
    orbit: &OrbitLog,
    params: &HypParams,
    has_critical_set: bool,
) -> std::result::Result<PlissExtraction, HypothesisFailure> {
    let n = orbit.len() as f64;
    let fail = |e_sum: f64, e_need: f64, r_sum: f64, r_need: f64, detail: String| HypothesisFailure {
        expansion_sum: e_sum,
        expansion_needed: e_need,
        recurrence_sum: r_sum,
        recurrence_needed: r_need,
        detail,
    };
    if orbit.is_empty() {
        return Err(fail(0.0, 0.0, 0.0, 0.0, "empty orbit".into()));
    }
    if !has_critical_set {
        let (a, c, big_a) = single_pass(orbit, params.a0);
        let s: f64 = orbit.log_inv_norm.iter().map(|l| -l).sum();
        if let Err(HypError::Precondition(d)) = check_hypotheses(&a, c, big_a) {
            return Err(fail(s, params.a0 * n, 0.0, 0.0, d));
        }
        return Ok(hyperbolic_times_pliss_unchecked(orbit, params, false));
    }
    let (first, second, zeta1, alpha2, top) = two_pass(orbit, params);
    let e_sum: f64 = first.iter().sum::<f64>() + n * params.a0 / 4.0;
    let r_sum: f64 = second.iter().sum::<f64>() - n * top;
    if !(top - alpha2 > 0.0 && zeta1 <= 1.0) {
        return Err(fail(e_sum, params.a0 / 2.0 * n, r_sum, -alpha2 * n, format!("degenerate constants: Q={}", params.q)));
    }
    let e = check_hypotheses(&first, params.a0 / 4.0, params.q);
    let r = check_hypotheses(&second, top - alpha2, top);
    match (e, r) {
        (Ok(()), Ok(())) => Ok(hyperbolic_times_pliss_unchecked(orbit, params, true)),
        (e, r) => {
            let mut d = Vec::new();
            if let Err(HypError::Precondition(s)) = e {
                d.push(format!("expansion pass: {s}"));
            }
            if let Err(HypError::Precondition(s)) = r {
                d.push(format!("recurrence pass: {s}"));
            }
            Err(fail(e_sum, params.a0 / 2.0 * n, r_sum, -alpha2 * n, d.join("; ")))
        }
    }
}
