use serde::Serialize;

use super::{stationary_density, Grid, GridDensity, MeasureError, Result, UlamMatrix};
use crate::dynamics::{Chart, MapSystem};
use crate::hyperbolic::{fit_decay, DecayModel};
use crate::inducing::{return_time_tail, wrap_signed, InducedMap};

/// Ulam discretization of an induced map on a grid of `Δ₀` (in offsets from `p`).
#[derive(Debug, Clone, Serialize)]
pub struct InducedUlam {
    pub matrix: UlamMatrix,
    /// Invariant density with respect to Lebesgue measure on `Δ₀` (integral 1).
    pub density: GridDensity,
    pub residual: f64,
    pub iterations: usize,
    /// `max(max ρ̄, 1/min ρ̄)` where `ρ̄` is the density against normalized Lebesgue on `Δ₀`.
    pub k1: f64,
    /// Returned query points used as transitions.
    pub transitions: usize,
}

fn base_chart(induced: &InducedMap) -> Chart {
    let d0 = induced.config.constants.delta0;
    Chart::Interval { lo: -d0, hi: d0 }
}

fn offset(induced: &InducedMap, x: f64) -> f64 {
    let d0 = induced.config.constants.delta0;
    wrap_signed(x - induced.config.constants.p).clamp(-d0, d0 * (1.0 - f64::EPSILON))
}

/// Transition counts `x ↦ F(x)` of the returned queries, row-normalized, and the fixed point
/// of the resulting row-stochastic matrix.
pub fn induced_ulam(induced: &InducedMap, cells: usize, tol: f64, max_iters: usize) -> Result<InducedUlam> {
    let grid = Grid::square(base_chart(induced), cells)?;
    let n = grid.n_cells();
    let mut counts = vec![vec![0u64; n]; n];
    let mut transitions = 0;
    for s in &induced.samples {
        if let Some(y) = s.image {
            let i = grid.cell_of(&[offset(induced, s.x), 0.0, 0.0, 0.0]);
            let j = grid.cell_of(&[offset(induced, y), 0.0, 0.0, 0.0]);
            counts[i][j] += 1;
            transitions += 1;
        }
    }
    let mut row_ptr = vec![0usize];
    let mut cols = Vec::new();
    let mut vals = Vec::new();
    for (i, row) in counts.iter().enumerate() {
        let total: u64 = row.iter().sum();
        if total == 0 {
            return Err(MeasureError::Degenerate(format!("no returned query starts in cell {i}")));
        }
        for (j, &c) in row.iter().enumerate() {
            if c > 0 {
                cols.push(j as u32);
                vals.push(c as f64 / total as f64);
            }
        }
        row_ptr.push(cols.len());
    }
    let matrix = UlamMatrix { grid, row_ptr, cols, vals, noise_samples: 1, points_per_cell: 0 };
    let s = stationary_density(&matrix, tol, max_iters)?;
    let m = 2.0 * induced.config.constants.delta0;
    let (lo, hi) = s
        .density
        .values
        .iter()
        .fold((f64::INFINITY, 0.0f64), |(lo, hi), &v| (lo.min(v * m), hi.max(v * m)));
    let k1 = if lo > 0.0 { hi.max(1.0 / lo) } else { f64::INFINITY };
    Ok(InducedUlam { matrix, density: s.density, residual: s.residual, iterations: s.iterations, k1, transitions })
}

/// One starting point of the tower: its weight and its orbit up to (excluding) the return.
#[derive(Debug, Clone, Copy)]
pub struct TowerSample<'a> {
    pub mass: f64,
    pub orbit: &'a [f64],
}

#[derive(Debug, Clone, Serialize)]
pub struct TowerProjection {
    /// Normalized projected density on the phase space.
    pub density: GridDensity,
    /// `μ̃(M)` before normalization.
    pub total_mass: f64,
    /// `K₁ Σ_j m{R > j}` (with `m` normalized on `Δ₀`).
    pub mass_bound: f64,
    /// Estimated `K₁ Σ_{j > n_max} m{R > j}`, from an exponential fit of the return tail.
    pub truncation_bound: f64,
}

/// `Σ_j (f^j)_*(ν|{R > j})` binned on `grid` from weighted orbit samples.
pub fn tower_project_samples<'a>(grid: &Grid, samples: impl IntoIterator<Item = TowerSample<'a>>) -> Result<GridDensity> {
    let mut masses = vec![0.0; grid.n_cells()];
    for s in samples {
        for &c in s.orbit {
            masses[grid.cell_of(&[c, 0.0, 0.0, 0.0])] += s.mass;
        }
    }
    Ok(GridDensity::from_masses(grid.clone(), &masses))
}

/// Projects the induced density `rho` (on `Δ₀`) to the phase space along the orbits of the
/// query points of `induced`, each carrying `ρ(x)·m(Δ₀)/Q` until its return.
pub fn tower_project(rho: &GridDensity, induced: &InducedMap, map: &dyn MapSystem, cells: usize) -> Result<TowerProjection> {
    if rho.grid.chart != base_chart(induced) {
        return Err(MeasureError::GridMismatch("rho must live on the Δ₀ chart of the induced map".into()));
    }
    let grid = Grid::square(map.chart(), cells)?;
    let m = induced.base_measure();
    let q = induced.config.queries as f64;
    let n_max = induced.config.n_max as usize;
    let mut masses = vec![0.0; grid.n_cells()];
    let mut k1 = 0.0f64;
    for s in &induced.samples {
        let r = s.return_time.map_or(n_max, |r| r as usize);
        let orbit = induced.orbit(map, s, r).map_err(|e| MeasureError::Inducing(e.to_string()))?;
        let w = rho.values[rho.grid.cell_of(&[offset(induced, s.x), 0.0, 0.0, 0.0])] * m / q;
        k1 = k1.max(w * q).max(1.0 / (w * q));
        for &c in &orbit[..r] {
            masses[grid.cell_of(&[c, 0.0, 0.0, 0.0])] += w;
        }
    }
    let mut density = GridDensity::from_masses(grid, &masses);
    let total_mass = density.integral();
    density.normalize()?;

    let tail = return_time_tail(induced);
    let r0 = induced.config.constants.r0;
    let sum: f64 = tail.mass_gt_n.iter().map(|v| v / m).sum();
    let (ns, ms): (Vec<usize>, Vec<f64>) =
        tail.n.iter().zip(&tail.mass_gt_n).filter(|(n, _)| **n > r0).map(|(&n, &v)| (n as usize, v / m)).unzip();
    let last = ms.last().copied().unwrap_or(0.0);
    let truncation_bound = match fit_decay(&ns, &ms, DecayModel::Exponential) {
        Ok(fit) if fit.rate < 1.0 && last > 0.0 => k1 * last * fit.rate / (1.0 - fit.rate),
        _ if last == 0.0 => 0.0,
        _ => f64::INFINITY,
    };
    Ok(TowerProjection { density, total_mass, mass_bound: k1 * sum, truncation_bound })
}
