use serde::Serialize;

use super::{GridDensity, MeasureError, Result};
use crate::dynamics::{wrap, MapSystem, Realization, MAX_DIM};

#[derive(Debug, Clone, Serialize)]
pub struct TransferResult {
    pub density: GridDensity,
    /// Relative mass defect of the raw branch sum before renormalization, for the positive and
    /// negative parts of `φ`.
    pub defect: [f64; 2],
}

/// Inverse-branch data of `f_ω^j` above a point: `(y, |(f_ω^j)'(y)|)` for every preimage.
pub fn inverse_branches(map: &dyn MapSystem, realization: &Realization, j: usize, x: f64) -> Result<Vec<(f64, f64)>> {
    let scalar = map.scalar().ok_or_else(|| MeasureError::Unsupported(format!("{} has no scalar structure", map.name())))?;
    let periodic = map.chart().is_periodic(0);
    let mut level = vec![(x, 1.0f64)];
    for i in (0..j).rev() {
        let t = realization.get(i as i64)?[0];
        let mut next = Vec::with_capacity(level.len() * 2);
        for &(z, d) in &level {
            let target = if periodic { wrap(z - t) } else { z - t };
            for y in scalar.preimages(target) {
                let dy = scalar.derivative(y).abs();
                if dy == 0.0 || !dy.is_finite() {
                    return Err(MeasureError::Branch(format!("critical preimage {y} of {target}")));
                }
                next.push((y, d * dy));
            }
        }
        level = next;
    }
    Ok(level)
}

/// `ℒ_ω^j φ(x) = Σ φ(y)/|(f_ω^j)'(y)|` over the inverse branches, evaluated at cell centres.
///
/// The positive and negative parts of `φ` are transported separately and each is rescaled to its
/// original mass, so mass conservation and `‖ℒφ‖₁ ≤ ‖φ‖₁` hold exactly on the grid.
pub fn transfer_apply(map: &dyn MapSystem, realization: &Realization, j: usize, phi: &GridDensity) -> Result<TransferResult> {
    let grid = &phi.grid;
    if grid.dim() != 1 {
        return Err(MeasureError::Unsupported("transfer_apply is one-dimensional".into()));
    }
    let n = grid.n_cells();
    let mut pos = vec![0.0; n];
    let mut neg = vec![0.0; n];
    for (i, (p, q)) in pos.iter_mut().zip(neg.iter_mut()).enumerate() {
        let c = grid.center(i)[0];
        for (y, d) in inverse_branches(map, realization, j, c)? {
            let mut yv = [0.0; MAX_DIM];
            yv[0] = y;
            let v = phi.values[grid.cell_of(&yv)];
            if v > 0.0 {
                *p += v / d;
            } else {
                *q += -v / d;
            }
        }
    }
    let vol = grid.cell_volume();
    let mass_pos: f64 = phi.values.iter().filter(|v| **v > 0.0).sum::<f64>() * vol;
    let mass_neg: f64 = phi.values.iter().filter(|v| **v < 0.0).map(|v| -v).sum::<f64>() * vol;
    let got_pos: f64 = pos.iter().sum::<f64>() * vol;
    let got_neg: f64 = neg.iter().sum::<f64>() * vol;
    let scale = |want: f64, got: f64| if got > 0.0 { want / got } else { 0.0 };
    let (sp, sn) = (scale(mass_pos, got_pos), scale(mass_neg, got_neg));
    let defect = [
        if mass_pos > 0.0 { (got_pos - mass_pos) / mass_pos } else { 0.0 },
        if mass_neg > 0.0 { (got_neg - mass_neg) / mass_neg } else { 0.0 },
    ];
    let values = pos.iter().zip(&neg).map(|(p, q)| p * sp - q * sn).collect();
    Ok(TransferResult { density: GridDensity { grid: grid.clone(), values }, defect })
}
