use serde::{Deserialize, Serialize};

use super::{empirical_density, l1_distance, stationary_density, ulam_matrix, Grid, GridDensity, MeasureError, Result};
use crate::dynamics::{MapSystem, NoiseKernel};
use crate::rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DensityMethod {
    Ulam,
    Empirical,
    Both,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EmpiricalConfig {
    pub x0_samples: usize,
    pub orbit_len: usize,
    pub burn_in: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepConfig {
    /// Cells per axis.
    pub cells: usize,
    pub noise_samples: usize,
    pub points_per_cell: usize,
    pub tol: f64,
    pub max_iters: usize,
    pub empirical: EmpiricalConfig,
    /// Whether to measure the discretization floor `‖h_0^{(N)} − h_0^{(2N)}‖₁`.
    pub floor: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub eps: f64,
    pub l1_ulam: Option<f64>,
    pub l1_empirical: Option<f64>,
    /// Power-iteration residual of the Ulam estimate at this `ε`.
    pub residual: Option<f64>,
    pub iterations: Option<usize>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepReport {
    pub rows: Vec<SweepRow>,
    pub floor: Option<f64>,
    pub baseline_residual: f64,
    #[serde(skip)]
    pub baseline: GridDensity,
}

fn ulam_density(map: &dyn MapSystem, kernel: NoiseKernel, grid: &Grid, cfg: &SweepConfig, seed: u64) -> Result<(GridDensity, f64, usize)> {
    let p = ulam_matrix(map, kernel, grid, cfg.noise_samples, cfg.points_per_cell, seed)?;
    let s = stationary_density(&p, cfg.tol, cfg.max_iters)?;
    Ok((s.density, s.residual, s.iterations))
}

/// Distances `‖h_ε − h_0‖₁` for a descending list of noise levels, where `h_0` is the Ulam fixed
/// point at `ε = 0` on the same grid. Per-`ε` failures are recorded and do not abort the sweep.
pub fn stability_sweep(
    map: &dyn MapSystem,
    eps_list: &[f64],
    method: DensityMethod,
    cfg: &SweepConfig,
    seed: u64,
) -> Result<SweepReport> {
    if eps_list.windows(2).any(|w| w[0] < w[1]) {
        return Err(MeasureError::InvalidGrid("eps_list must be sorted in descending order".into()));
    }
    let grid = Grid::square(map.chart(), cfg.cells)?;
    let dirac = NoiseKernel::dirac(map.dim());
    let (h0, baseline_residual, _) = ulam_density(map, dirac, &grid, cfg, rng::derive_seed(seed, 0))?;
    let floor = if cfg.floor {
        let fine = Grid::square(map.chart(), 2 * cfg.cells)?;
        let (h0_fine, _, _) = ulam_density(map, dirac, &fine, cfg, rng::derive_seed(seed, 1))?;
        Some(l1_distance(&h0, &h0_fine.coarsen(&grid)?)?)
    } else {
        None
    };
    let rows = eps_list
        .iter()
        .enumerate()
        .map(|(k, &eps)| {
            let mut row = SweepRow { eps, l1_ulam: None, l1_empirical: None, residual: None, iterations: None, error: None };
            let mut run = || -> Result<()> {
                let kernel = NoiseKernel::new(eps, map.dim())?;
                let sub = rng::derive_seed(seed, 16 + k as u64);
                if method != DensityMethod::Empirical {
                    let (h, res, it) = ulam_density(map, kernel, &grid, cfg, sub)?;
                    row.l1_ulam = Some(l1_distance(&h, &h0)?);
                    row.residual = Some(res);
                    row.iterations = Some(it);
                }
                if method != DensityMethod::Ulam {
                    let e = &cfg.empirical;
                    let h = empirical_density(map, kernel, e.x0_samples, e.orbit_len, e.burn_in, &grid, sub)?;
                    row.l1_empirical = Some(l1_distance(&h, &h0)?);
                }
                Ok(())
            };
            if let Err(e) = run() {
                row.error = Some(e.to_string());
            }
            row
        })
        .collect();
    Ok(SweepReport { rows, floor, baseline_residual, baseline: h0 })
}
