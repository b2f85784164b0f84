use rayon::prelude::*;

use super::{Grid, GridDensity, MeasureError, Result};
use crate::dynamics::{step, MapSystem, NoiseKernel, Realization};
use crate::hyperbolic::uniform_point;
use crate::rng;

/// Birkhoff histogram: orbit points `x_burn_in, …, x_{orbit_len−1}` of `x0_samples`
/// Lebesgue-uniform starts, each under its own realization, pooled and normalized.
pub fn empirical_density(
    map: &dyn MapSystem,
    kernel: NoiseKernel,
    x0_samples: usize,
    orbit_len: usize,
    burn_in: usize,
    grid: &Grid,
    seed: u64,
) -> Result<GridDensity> {
    if orbit_len <= burn_in {
        return Err(MeasureError::InvalidGrid(format!("orbit_len {orbit_len} must exceed burn_in {burn_in}")));
    }
    const CHUNK: usize = 256;
    let chunks = x0_samples.div_ceil(CHUNK);
    let partial: Vec<Vec<u64>> = (0..chunks)
        .into_par_iter()
        .map(|c| -> Result<Vec<u64>> {
            let mut counts = vec![0u64; grid.n_cells()];
            for s in c * CHUNK..((c + 1) * CHUNK).min(x0_samples) {
                let omega_seed = rng::derive_seed(seed, s as u64);
                let mut x = uniform_point(map, seed, s as u64);
                for j in 0..orbit_len {
                    if j >= burn_in {
                        counts[grid.cell_of(&x.coords)] += 1;
                    }
                    if j + 1 < orbit_len {
                        let t = Realization::draw(&kernel, omega_seed, j as i64);
                        x = step(map, &t, &x)?;
                    }
                }
            }
            Ok(counts)
        })
        .collect::<Result<_>>()?;
    let mut counts = vec![0u64; grid.n_cells()];
    for p in partial {
        for (a, b) in counts.iter_mut().zip(p) {
            *a += b;
        }
    }
    let masses: Vec<f64> = counts.iter().map(|&c| c as f64).collect();
    let mut h = GridDensity::from_masses(grid.clone(), &masses);
    h.normalize()?;
    Ok(h)
}
