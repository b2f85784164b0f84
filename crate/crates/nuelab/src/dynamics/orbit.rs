use super::{local_data, step, DynamicsError, MapSystem, Point, Realization, Result};

/// A simulated random orbit `x, f_ω(x), …, f_ω^n(x)` with derivative data at `x_0, …, x_{n−1}`.
#[derive(Debug, Clone, PartialEq)]
pub struct OrbitLog {
    pub points: Vec<Point>,
    pub log_inv_norm: Vec<f64>,
    pub log_det: Vec<f64>,
    pub crit_dist: Vec<f64>,
    /// Steps `j < n` with `x_j ∈ 𝒞`; their log entries are `+∞` / `−∞`.
    pub critical_hits: Vec<usize>,
}

impl OrbitLog {
    /// Number of steps `n`.
    pub fn len(&self) -> usize {
        self.log_inv_norm.len()
    }

    pub fn is_empty(&self) -> bool {
        self.log_inv_norm.is_empty()
    }

    /// The orbit of `f_ω^j(x)` under `σ^j(ω)`: the last `n − j` steps.
    pub fn suffix(&self, j: usize) -> OrbitLog {
        OrbitLog {
            points: self.points[j..].to_vec(),
            log_inv_norm: self.log_inv_norm[j..].to_vec(),
            log_det: self.log_det[j..].to_vec(),
            crit_dist: self.crit_dist[j..].to_vec(),
            critical_hits: self.critical_hits.iter().filter(|&&h| h >= j).map(|h| h - j).collect(),
        }
    }

    /// The first `n` steps.
    pub fn prefix(&self, n: usize) -> OrbitLog {
        OrbitLog {
            points: self.points[..=n].to_vec(),
            log_inv_norm: self.log_inv_norm[..n].to_vec(),
            log_det: self.log_det[..n].to_vec(),
            crit_dist: self.crit_dist[..n].to_vec(),
            critical_hits: self.critical_hits.iter().copied().filter(|&h| h < n).collect(),
        }
    }
}

/// Iterates `x0` under `ω_0, …, ω_{n−1}`.
pub fn random_orbit(map: &dyn MapSystem, realization: &Realization, x0: &Point, n: usize) -> Result<OrbitLog> {
    if !realization.covers(0, n) {
        return Err(DynamicsError::ShortRealization { have: realization.end().max(0) as usize, need: n });
    }
    let mut log = OrbitLog {
        points: Vec::with_capacity(n + 1),
        log_inv_norm: Vec::with_capacity(n),
        log_det: Vec::with_capacity(n),
        crit_dist: Vec::with_capacity(n),
        critical_hits: Vec::new(),
    };
    let mut x = *x0;
    log.points.push(x);
    for j in 0..n {
        match local_data(map, &x) {
            Ok(d) => {
                log.log_inv_norm.push(d.log_inv_norm);
                log.log_det.push(d.log_det);
                log.crit_dist.push(d.crit_dist);
            }
            Err(DynamicsError::OnCriticalSet) => {
                log.log_inv_norm.push(f64::INFINITY);
                log.log_det.push(f64::NEG_INFINITY);
                log.crit_dist.push(0.0);
                log.critical_hits.push(j);
            }
            Err(e) => return Err(e),
        }
        x = step(map, realization.get(j as i64)?, &x)?;
        log.points.push(x);
    }
    Ok(log)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::{sample_realization, Doubling, NoiseKernel};

    #[test]
    fn empty_orbit_holds_only_the_start() {
        let m = Doubling::new(2).unwrap();
        let r = sample_realization(NoiseKernel::dirac(1), 0, 0, 0);
        let x0 = Point::new(m.chart(), &[0.3]).unwrap();
        let log = random_orbit(&m, &r, &x0, 0).unwrap();
        assert_eq!(log.points, vec![x0]);
        assert!(log.is_empty());
    }

    #[test]
    fn short_realization_is_rejected() {
        let m = Doubling::new(2).unwrap();
        let r = sample_realization(NoiseKernel::dirac(1), 0, 0, 3);
        let x0 = Point::new(m.chart(), &[0.3]).unwrap();
        assert!(matches!(random_orbit(&m, &r, &x0, 4), Err(DynamicsError::ShortRealization { .. })));
    }
}
