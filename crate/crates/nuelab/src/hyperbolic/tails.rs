use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{truncated_distance, HypError, Result, LOG_TOL};
use crate::dynamics::{random_orbit, sample_realization, MapSystem, NoiseKernel, OrbitLog, Point};
use crate::rng;

/// An expansion or recurrence time on a finite orbit. `censored` means the defining condition
/// still fails at the horizon, so the true time exceeds it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct TimeEstimate {
    pub value: usize,
    pub censored: bool,
}

impl TimeEstimate {
    /// The time as seen by tail counting: censored times are infinite.
    pub fn effective(&self) -> usize {
        if self.censored {
            usize::MAX
        } else {
            self.value
        }
    }
}

/// Smallest `N ≥ 1` such that `(1/n)·Σ_{j<n} v_j ≤ bound` for every `N ≤ n ≤ L`, up to
/// [`LOG_TOL`] on the sums.
fn last_failure_time(values: impl Iterator<Item = f64>, bound: f64, len: usize) -> TimeEstimate {
    let mut sum = 0.0;
    let mut last_fail = 0;
    for (i, v) in values.enumerate() {
        sum += v;
        let n = i + 1;
        if !(sum <= bound * n as f64 + LOG_TOL) {
            last_fail = n;
        }
    }
    TimeEstimate { value: last_fail + 1, censored: len > 0 && last_fail == len }
}

/// Expansion time `E` (averages of `log‖Df⁻¹‖` stay `≤ −a0`) and recurrence time `R` (averages of
/// `−log dist_δ` stay `≤ b0`) on the simulated horizon.
pub fn expansion_recurrence_times(orbit: &OrbitLog, a0: f64, b0: f64, delta: f64) -> (TimeEstimate, TimeEstimate) {
    let len = orbit.len();
    let e = last_failure_time(orbit.log_inv_norm.iter().copied(), -a0, len);
    let r = if orbit.crit_dist.iter().all(|d| d.is_infinite()) {
        TimeEstimate { value: 1, censored: false }
    } else {
        last_failure_time(orbit.crit_dist.iter().map(|&d| -truncated_distance(d, delta).ln()), b0, len)
    };
    (e, r)
}

/// Parameters of the tail-set estimator.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TailParams {
    pub a0: f64,
    pub b0: f64,
    pub delta: f64,
}

/// Empirical tail curve `n ↦ m(Γ_ω^n)`, summarized over sampled realizations.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TailCurve {
    pub n_values: Vec<usize>,
    pub gamma_mean: Vec<f64>,
    pub gamma_max: Vec<f64>,
    pub gamma_p95: Vec<f64>,
    /// Per-realization fractions, `per_omega[w][i]` at `n_values[i]`.
    pub per_omega: Vec<Vec<f64>>,
    pub sample_count: usize,
    pub censored_fraction: f64,
}

impl TailCurve {
    /// Builds the summary from per-point effective times (`usize::MAX` for censored points).
    pub fn from_times(times: &[Vec<usize>], censored: usize, n_values: Vec<usize>) -> TailCurve {
        let per_omega: Vec<Vec<f64>> = times
            .iter()
            .map(|ts| {
                n_values
                    .iter()
                    .map(|&n| ts.iter().filter(|&&t| t > n).count() as f64 / ts.len().max(1) as f64)
                    .collect()
            })
            .collect();
        let k = per_omega.len();
        let mut gamma_mean = Vec::with_capacity(n_values.len());
        let mut gamma_max = Vec::with_capacity(n_values.len());
        let mut gamma_p95 = Vec::with_capacity(n_values.len());
        for i in 0..n_values.len() {
            let mut col: Vec<f64> = per_omega.iter().map(|row| row[i]).collect();
            col.sort_by(f64::total_cmp);
            gamma_mean.push(if k > 0 { col.iter().sum::<f64>() / k as f64 } else { 0.0 });
            gamma_max.push(col.last().copied().unwrap_or(0.0));
            // Nearest-rank percentile.
            let rank = ((0.95 * k as f64).ceil() as usize).clamp(1, k.max(1)) - 1;
            gamma_p95.push(col.get(rank).copied().unwrap_or(0.0));
        }
        let sample_count: usize = times.iter().map(Vec::len).sum();
        TailCurve {
            n_values,
            gamma_mean,
            gamma_max,
            gamma_p95,
            per_omega,
            sample_count,
            censored_fraction: if sample_count > 0 { censored as f64 / sample_count as f64 } else { 0.0 },
        }
    }
}

/// Lebesgue-uniform initial point number `index` of a sampling run keyed by `seed`.
pub fn uniform_point(map: &dyn MapSystem, seed: u64, index: u64) -> Point {
    let chart = map.chart();
    let mut r = rng::stream(seed, rng::domain::INITIAL, index);
    let u: Vec<f64> = (0..chart.dim()).map(|_| r.random::<f64>()).collect();
    Point { coords: chart.reduce(chart.from_unit(&u)).expect("unit-cube points lie in the chart"), chart }
}

/// Estimates `m(Γ_ω^n) = m{E_ω > n or R_ω > n}` on `n_grid` from `x_samples` uniform points under
/// each of `omega_samples` realizations of length `horizon`. Censored points count as tail
/// members at every `n`.
#[allow(clippy::too_many_arguments)]
pub fn tail_curve(
    map: &dyn MapSystem,
    kernel: NoiseKernel,
    params: TailParams,
    x_samples: usize,
    omega_samples: usize,
    horizon: usize,
    n_grid: &[usize],
    seed: u64,
) -> Result<TailCurve> {
    if n_grid.iter().any(|&n| n > horizon) {
        return Err(HypError::Precondition(format!("horizon {horizon} is below max(n_grid)")));
    }
    let per_omega: Vec<(Vec<usize>, usize)> = (0..omega_samples)
        .map(|w| {
            let omega_seed = rng::derive_seed(seed, w as u64);
            let real = sample_realization(kernel, omega_seed, 0, horizon);
            let res: Vec<Result<(usize, bool)>> = (0..x_samples)
                .into_par_iter()
                .map(|i| {
                    let x0 = uniform_point(map, seed, (w * x_samples + i) as u64);
                    let orbit = random_orbit(map, &real, &x0, horizon)?;
                    let (e, r) = expansion_recurrence_times(&orbit, params.a0, params.b0, params.delta);
                    Ok((e.effective().max(r.effective()), e.censored || r.censored))
                })
                .collect();
            let mut times = Vec::with_capacity(x_samples);
            let mut cens = 0;
            for r in res {
                let (t, c) = r?;
                times.push(t);
                cens += c as usize;
            }
            Ok((times, cens))
        })
        .collect::<Result<_>>()?;
    let censored = per_omega.iter().map(|(_, c)| c).sum();
    let times: Vec<Vec<usize>> = per_omega.into_iter().map(|(t, _)| t).collect();
    Ok(TailCurve::from_times(&times, censored, n_grid.to_vec()))
}

/// `|H ∩ {1, …, n}| / n`.
pub fn frequency(h: &[usize], n: usize) -> Result<f64> {
    if n == 0 {
        return Err(HypError::Precondition("frequency over an empty window".into()));
    }
    Ok(h.iter().filter(|&&i| i >= 1 && i <= n).count() as f64 / n as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DecayModel {
    /// `γ ≈ C τ^n`.
    Exponential,
    /// `γ ≈ C n^{−p}`.
    Polynomial,
    /// `γ ≈ C e^{−ζ√n}`.
    StretchedExponential,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DecayFit {
    pub model: DecayModel,
    /// `τ`, `p` or `ζ` depending on the model.
    pub rate: f64,
    /// `log C`.
    pub log_c: f64,
    pub r2: f64,
    pub points: usize,
}

/// Least-squares fit of `log γ` against `n`, `log n` or `√n`, over the strictly positive entries.
pub fn fit_decay(n_values: &[usize], gamma: &[f64], model: DecayModel) -> Result<DecayFit> {
    let (xs, ys): (Vec<f64>, Vec<f64>) = n_values
        .iter()
        .zip(gamma)
        .filter(|(&n, &g)| g > 0.0 && n > 0)
        .map(|(&n, &g)| {
            let n = n as f64;
            let x = match model {
                DecayModel::Exponential => n,
                DecayModel::Polynomial => n.ln(),
                DecayModel::StretchedExponential => n.sqrt(),
            };
            (x, g.ln())
        })
        .unzip();
    if xs.len() < 4 {
        return Err(HypError::InsufficientData(xs.len()));
    }
    let (slope, intercept, r2) = crate::dynamics::linear_fit(&xs, &ys);
    let rate = match model {
        DecayModel::Exponential => slope.exp(),
        DecayModel::Polynomial | DecayModel::StretchedExponential => -slope,
    };
    Ok(DecayFit { model, rate, log_c: intercept, r2, points: xs.len() })
}
