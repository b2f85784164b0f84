use serde::{Deserialize, Serialize};

use super::{MeasureError, Result};
use crate::dynamics::{Chart, Vector, MAX_DIM};

/// Uniform product partition of a 1D or 2D chart; cells are numbered with axis 0 fastest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    pub chart: Chart,
    pub sizes: Vec<usize>,
}

impl Grid {
    pub fn new(chart: Chart, sizes: &[usize]) -> Result<Grid> {
        if sizes.len() != chart.dim() || !(1..=2).contains(&sizes.len()) || sizes.iter().any(|&s| s < 2) {
            return Err(MeasureError::InvalidGrid(format!("{sizes:?} on a {}-dimensional chart", chart.dim())));
        }
        Ok(Grid { chart, sizes: sizes.to_vec() })
    }

    /// The same number of cells along every axis.
    pub fn square(chart: Chart, per_axis: usize) -> Result<Grid> {
        Grid::new(chart, &vec![per_axis; chart.dim()])
    }

    pub fn dim(&self) -> usize {
        self.sizes.len()
    }

    pub fn n_cells(&self) -> usize {
        self.sizes.iter().product()
    }

    fn width(&self, axis: usize) -> f64 {
        let (lo, hi) = self.chart.extent(axis);
        (hi - lo) / self.sizes[axis] as f64
    }

    pub fn cell_volume(&self) -> f64 {
        (0..self.dim()).map(|a| self.width(a)).product()
    }

    /// Index of the cell containing `x` (upper boundaries of closed axes belong to the last cell).
    pub fn cell_of(&self, x: &Vector) -> usize {
        let mut idx = 0;
        let mut stride = 1;
        for axis in 0..self.dim() {
            let (lo, hi) = self.chart.extent(axis);
            let n = self.sizes[axis];
            let k = (((x[axis] - lo) / (hi - lo)) * n as f64).floor();
            let k = (k.max(0.0) as usize).min(n - 1);
            idx += k * stride;
            stride *= n;
        }
        idx
    }

    pub fn multi_index(&self, mut i: usize) -> [usize; MAX_DIM] {
        let mut m = [0; MAX_DIM];
        for axis in 0..self.dim() {
            m[axis] = i % self.sizes[axis];
            i /= self.sizes[axis];
        }
        m
    }

    /// Point of cell `i` at relative position `u ∈ [0,1)^d` inside the cell.
    pub fn point_in_cell(&self, i: usize, u: &[f64]) -> Vector {
        let m = self.multi_index(i);
        let mut x = [0.0; MAX_DIM];
        for axis in 0..self.dim() {
            let (lo, _) = self.chart.extent(axis);
            x[axis] = lo + (m[axis] as f64 + u[axis]) * self.width(axis);
        }
        x
    }

    pub fn center(&self, i: usize) -> Vector {
        self.point_in_cell(i, &[0.5; MAX_DIM])
    }

    /// Whether `fine` refines `self` by an integer factor along every axis.
    pub fn refinement_factor(&self, fine: &Grid) -> Option<Vec<usize>> {
        if self.chart != fine.chart || self.dim() != fine.dim() {
            return None;
        }
        self.sizes
            .iter()
            .zip(&fine.sizes)
            .map(|(&c, &f)| (f % c == 0).then_some(f / c))
            .collect()
    }
}

/// A piecewise-constant density on a [`Grid`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridDensity {
    pub grid: Grid,
    pub values: Vec<f64>,
}

const MAGIC: &[u8; 5] = b"NUED1";

impl GridDensity {
    pub fn zeros(grid: Grid) -> GridDensity {
        let n = grid.n_cells();
        GridDensity { grid, values: vec![0.0; n] }
    }

    /// The normalized Lebesgue density `1/m(M)`.
    pub fn uniform(grid: Grid) -> GridDensity {
        let v = 1.0 / grid.chart.volume();
        let n = grid.n_cells();
        GridDensity { grid, values: vec![v; n] }
    }

    /// Density from per-cell masses.
    pub fn from_masses(grid: Grid, masses: &[f64]) -> GridDensity {
        let vol = grid.cell_volume();
        GridDensity { values: masses.iter().map(|m| m / vol).collect(), grid }
    }

    /// Cell-averaged samples of a function.
    pub fn from_fn(grid: Grid, sub: usize, f: impl Fn(&Vector) -> f64) -> GridDensity {
        let dim = grid.dim();
        let per_cell = sub.pow(dim as u32);
        let values = (0..grid.n_cells())
            .map(|i| {
                let mut acc = 0.0;
                for s in 0..per_cell {
                    let mut u = [0.0; MAX_DIM];
                    let mut t = s;
                    for v in u.iter_mut().take(dim) {
                        *v = ((t % sub) as f64 + 0.5) / sub as f64;
                        t /= sub;
                    }
                    acc += f(&grid.point_in_cell(i, &u));
                }
                acc / per_cell as f64
            })
            .collect();
        GridDensity { grid, values }
    }

    pub fn masses(&self) -> Vec<f64> {
        let vol = self.grid.cell_volume();
        self.values.iter().map(|v| v * vol).collect()
    }

    pub fn integral(&self) -> f64 {
        self.values.iter().sum::<f64>() * self.grid.cell_volume()
    }

    pub fn l1_norm(&self) -> f64 {
        self.values.iter().map(|v| v.abs()).sum::<f64>() * self.grid.cell_volume()
    }

    /// Rescales to unit integral; fails on a zero or non-finite total.
    pub fn normalize(&mut self) -> Result<()> {
        let total = self.integral();
        if !(total.is_finite() && total > 0.0) {
            return Err(MeasureError::Degenerate(format!("cannot normalize a density of total mass {total}")));
        }
        for v in &mut self.values {
            *v /= total;
        }
        Ok(())
    }

    /// Averages blocks of a finer density down to `coarse`.
    pub fn coarsen(&self, coarse: &Grid) -> Result<GridDensity> {
        let f = coarse
            .refinement_factor(&self.grid)
            .ok_or_else(|| MeasureError::GridMismatch(format!("{:?} does not refine {:?}", self.grid.sizes, coarse.sizes)))?;
        let mut out = GridDensity::zeros(coarse.clone());
        let block: usize = f.iter().product();
        for i in 0..self.grid.n_cells() {
            let m = self.grid.multi_index(i);
            let mut idx = 0;
            let mut stride = 1;
            for axis in 0..coarse.dim() {
                idx += (m[axis] / f[axis]) * stride;
                stride *= coarse.sizes[axis];
            }
            out.values[idx] += self.values[i] / block as f64;
        }
        Ok(out)
    }

    /// Compact little-endian dump: magic `NUED1`, `u32` dimension count, `u32` sizes, `f64` values.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(5 + 4 * (1 + self.grid.dim()) + 8 * self.values.len());
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&(self.grid.dim() as u32).to_le_bytes());
        for &s in &self.grid.sizes {
            out.extend_from_slice(&(s as u32).to_le_bytes());
        }
        for v in &self.values {
            out.extend_from_slice(&v.to_le_bytes());
        }
        out
    }

    /// Inverse of [`GridDensity::to_bytes`]; the chart is not stored and must be supplied.
    pub fn from_bytes(chart: Chart, bytes: &[u8]) -> Result<GridDensity> {
        let bad = |m: &str| MeasureError::Format(m.to_string());
        let rest = bytes.strip_prefix(MAGIC.as_slice()).ok_or_else(|| bad("missing NUED1 magic"))?;
        let u32_at = |b: &[u8], i: usize| -> Result<u32> {
            b.get(4 * i..4 * i + 4).map(|s| u32::from_le_bytes(s.try_into().unwrap())).ok_or_else(|| bad("truncated header"))
        };
        let dims = u32_at(rest, 0)? as usize;
        let sizes: Vec<usize> = (0..dims).map(|i| u32_at(rest, 1 + i).map(|v| v as usize)).collect::<Result<_>>()?;
        let grid = Grid::new(chart, &sizes)?;
        let body = &rest[4 * (1 + dims)..];
        if body.len() != 8 * grid.n_cells() {
            return Err(bad("value block has the wrong length"));
        }
        let values = body.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect();
        Ok(GridDensity { grid, values })
    }
}

/// `Σ |h₁ − h₂|·cell_volume` on identical grids.
pub fn l1_distance(h1: &GridDensity, h2: &GridDensity) -> Result<f64> {
    if h1.grid != h2.grid {
        return Err(MeasureError::GridMismatch(format!("{:?} vs {:?}", h1.grid.sizes, h2.grid.sizes)));
    }
    Ok(h1.values.iter().zip(&h2.values).map(|(a, b)| (a - b).abs()).sum::<f64>() * h1.grid.cell_volume())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn half_and_half_is_at_distance_one() {
        let g = Grid::square(Chart::Circle, 8).unwrap();
        let h1 = GridDensity { grid: g.clone(), values: (0..8).map(|i| if i < 4 { 2.0 } else { 0.0 }).collect() };
        let h2 = GridDensity::uniform(g);
        assert!((l1_distance(&h1, &h2).unwrap() - 1.0).abs() < 1e-15);
        assert_eq!(l1_distance(&h1, &h1).unwrap(), 0.0);
    }

    #[test]
    fn binary_round_trip() {
        let chart = Chart::Cylinder { lo: -1.0, hi: 2.0 };
        let g = Grid::new(chart, &[4, 3]).unwrap();
        let h = GridDensity { grid: g, values: (0..12).map(|i| i as f64 * 0.25).collect() };
        let b = h.to_bytes();
        assert_eq!(&b[..5], b"NUED1");
        assert_eq!(GridDensity::from_bytes(chart, &b).unwrap(), h);
        assert!(GridDensity::from_bytes(chart, &b[..b.len() - 1]).is_err());
    }

    #[test]
    fn cells_and_coarsening() {
        let chart = Chart::Cylinder { lo: -1.0, hi: 1.0 };
        let g = Grid::new(chart, &[4, 4]).unwrap();
        assert_eq!(g.cell_of(&[0.99, 1.0, 0.0, 0.0]), 15);
        assert_eq!(g.cell_of(&g.center(6)), 6);
        let fine = Grid::new(chart, &[8, 8]).unwrap();
        let h = GridDensity::from_fn(fine, 2, |x| 1.0 + x[1]);
        let mut c = h.coarsen(&g).unwrap();
        assert!((c.integral() - h.integral()).abs() < 1e-12);
        c.normalize().unwrap();
        assert!((c.integral() - 1.0).abs() < 1e-12);
    }
}
