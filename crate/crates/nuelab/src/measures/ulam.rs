use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

use super::{Grid, GridDensity, MeasureError, Result};
use crate::dynamics::{step, MapSystem, NoiseKernel, Point, Vector, MAX_DIM};
use crate::rng;

/// Sparse row-stochastic matrix in CSR form.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct UlamMatrix {
    pub grid: Grid,
    pub row_ptr: Vec<usize>,
    pub cols: Vec<u32>,
    pub vals: Vec<f64>,
    pub noise_samples: usize,
    pub points_per_cell: usize,
}

/// Golden-ratio increment for the angular coordinate of the disc quadrature.
const GOLDEN: f64 = 0.618_033_988_749_894_9;

/// Stratified noise quadrature node `q` of `k` with jitter `v`.
pub(crate) fn noise_node(kernel: &NoiseKernel, q: usize, k: usize, v: [f64; 2]) -> Vector {
    if kernel.is_dirac() {
        return [0.0; MAX_DIM];
    }
    let u0 = (q as f64 + v[0]) / k as f64;
    match kernel.dim {
        1 => kernel.from_unit(&[u0]),
        2 => {
            let u1 = (q as f64 * GOLDEN + v[1]).fract();
            kernel.from_unit(&[u0, u1])
        }
        _ => [0.0; MAX_DIM],
    }
}

impl UlamMatrix {
    pub fn n(&self) -> usize {
        self.row_ptr.len() - 1
    }

    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let r = self.row_ptr[i]..self.row_ptr[i + 1];
        self.cols[r.clone()].iter().map(|&c| c as usize).zip(self.vals[r].iter().copied())
    }

    pub fn nnz(&self) -> usize {
        self.vals.len()
    }

    /// Largest `|Σ_j P[i][j] − 1|`.
    pub fn max_row_defect(&self) -> f64 {
        (0..self.n()).map(|i| (self.row(i).map(|(_, v)| v).sum::<f64>() - 1.0).abs()).fold(0.0, f64::max)
    }

    /// `μ ↦ μP` on cell masses.
    pub fn push_masses(&self, masses: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.n()];
        for (i, &m) in masses.iter().enumerate() {
            if m != 0.0 {
                for (j, p) in self.row(i) {
                    out[j] += m * p;
                }
            }
        }
        out
    }

    /// The transposed matrix, so that `μP` becomes a row-parallel gather.
    fn transpose(&self) -> (Vec<usize>, Vec<u32>, Vec<f64>) {
        let n = self.n();
        let mut counts = vec![0usize; n + 1];
        for &c in &self.cols {
            counts[c as usize + 1] += 1;
        }
        for i in 0..n {
            counts[i + 1] += counts[i];
        }
        let mut fill = counts.clone();
        let mut cols = vec![0u32; self.nnz()];
        let mut vals = vec![0.0; self.nnz()];
        for i in 0..n {
            for (j, p) in self.row(i) {
                cols[fill[j]] = i as u32;
                vals[fill[j]] = p;
                fill[j] += 1;
            }
        }
        (counts, cols, vals)
    }
}

/// Monte Carlo Ulam matrix of the noise-averaged transfer operator: from every cell, push a
/// jittered stratified set of points under `f_t` for a stratified set of noise values and bin
/// the images.
pub fn ulam_matrix(
    map: &dyn MapSystem,
    kernel: NoiseKernel,
    grid: &Grid,
    noise_samples: usize,
    points_per_cell: usize,
    seed: u64,
) -> Result<UlamMatrix> {
    if grid.chart != map.chart() {
        return Err(MeasureError::GridMismatch("grid chart differs from the map's chart".into()));
    }
    let k = if kernel.is_dirac() { 1 } else { noise_samples.max(1) };
    let dim = grid.dim();
    let side = if dim == 1 { points_per_cell } else { (points_per_cell as f64).sqrt().round().max(1.0) as usize };
    let ppc = side.pow(dim as u32);
    let total = (ppc * k) as f64;

    let rows: Vec<Vec<(u32, f64)>> = (0..grid.n_cells())
        .into_par_iter()
        .map(|i| -> Result<Vec<(u32, f64)>> {
            let mut r = rng::stream(seed, rng::domain::ULAM, i as u64);
            let mut hits: Vec<u32> = Vec::with_capacity(ppc * k);
            for p in 0..ppc {
                let mut u = [0.0; MAX_DIM];
                let mut t = p;
                for v in u.iter_mut().take(dim) {
                    *v = ((t % side) as f64 + r.random::<f64>()) / side as f64;
                    t /= side;
                }
                let x = Point { coords: grid.point_in_cell(i, &u), chart: grid.chart };
                for q in 0..k {
                    let t = noise_node(&kernel, q, k, [r.random(), r.random()]);
                    let y = step(map, &t, &x)?;
                    hits.push(grid.cell_of(&y.coords) as u32);
                }
            }
            hits.sort_unstable();
            let mut row: Vec<(u32, f64)> = Vec::new();
            let mut idx = 0;
            while idx < hits.len() {
                let c = hits[idx];
                let mut n = 0;
                while idx < hits.len() && hits[idx] == c {
                    n += 1;
                    idx += 1;
                }
                row.push((c, n as f64 / total));
            }
            Ok(row)
        })
        .collect::<Result<_>>()?;

    let mut row_ptr = Vec::with_capacity(rows.len() + 1);
    row_ptr.push(0);
    let mut cols = Vec::new();
    let mut vals = Vec::new();
    for row in rows {
        for (c, v) in row {
            cols.push(c);
            vals.push(v);
        }
        row_ptr.push(cols.len());
    }
    Ok(UlamMatrix { grid: grid.clone(), row_ptr, cols, vals, noise_samples: k, points_per_cell: ppc })
}

#[derive(Debug, Clone, Serialize)]
pub struct Stationary {
    pub density: GridDensity,
    /// Final `‖h_{k+1} − h_k‖₁`.
    pub residual: f64,
    pub iterations: usize,
}

/// Power iteration `h ↦ hP` from the uniform density until successive iterates differ by at
/// most `tol` in `L¹`.
pub fn stationary_density(p: &UlamMatrix, tol: f64, max_iters: usize) -> Result<Stationary> {
    stationary_density_from(p, &vec![1.0 / p.n() as f64; p.n()], tol, max_iters)
}

/// [`stationary_density`] from given initial cell masses.
pub fn stationary_density_from(p: &UlamMatrix, start: &[f64], tol: f64, max_iters: usize) -> Result<Stationary> {
    let (ptr, cols, vals) = p.transpose();
    let n = p.n();
    let mut mass = start.to_vec();
    let total: f64 = mass.iter().sum();
    mass.iter_mut().for_each(|m| *m /= total);
    let mut next = vec![0.0; n];
    let mut residual = f64::INFINITY;
    for it in 1..=max_iters {
        next.par_iter_mut().enumerate().with_min_len(1024).for_each(|(j, out)| {
            *out = (ptr[j]..ptr[j + 1]).map(|e| mass[cols[e] as usize] * vals[e]).sum();
        });
        residual = mass.iter().zip(&next).map(|(a, b)| (a - b).abs()).sum();
        std::mem::swap(&mut mass, &mut next);
        if residual <= tol {
            let s: f64 = mass.iter().sum();
            mass.iter_mut().for_each(|m| *m /= s);
            return Ok(Stationary { density: GridDensity::from_masses(p.grid.clone(), &mass), residual, iterations: it });
        }
    }
    Err(MeasureError::NotConverged { iterations: max_iters, residual })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::Doubling;

    #[test]
    fn dyadic_cells_split_in_half() {
        let m = Doubling::new(2).unwrap();
        let g = Grid::square(m.chart(), 16).unwrap();
        let p = ulam_matrix(&m, NoiseKernel::dirac(1), &g, 1, 8, 0).unwrap();
        for i in 0..16 {
            let row: Vec<(usize, f64)> = p.row(i).collect();
            assert_eq!(row, vec![((2 * i) % 16, 0.5), ((2 * i + 1) % 16, 0.5)]);
        }
        let h = stationary_density(&p, 1e-10, 100_000).unwrap();
        assert!(h.density.values.iter().all(|v| (v - 1.0).abs() < 1e-12));
    }
}
