use super::{HypError, Result};

/// Relative slack used when checking the Pliss hypotheses on floating-point input.
const REL_TOL: f64 = 1e-12;

/// The maximal Pliss set of `a_1, …, a_N`: every `n_i` (1-based) such that
/// `Σ_{j=n}^{n_i} a_j ≥ 0` for all `1 ≤ n ≤ n_i`.
///
/// With prefix sums `S(k)`, the condition reads `S(n_i) ≥ max_{m < n_i} S(m)`, so a single pass
/// with a running maximum suffices.
pub fn pliss_times_unchecked(a: &[f64]) -> Vec<usize> {
    let mut out = Vec::new();
    let mut s = 0.0f64;
    let mut running_max = 0.0f64;
    for (i, &v) in a.iter().enumerate() {
        s += v;
        if s >= running_max {
            out.push(i + 1);
        }
        running_max = running_max.max(s);
    }
    out
}

/// [`pliss_times_unchecked`] after verifying `0 < c ≤ A`, `a_j ≤ A` and `Σ a_j ≥ cN`, so that the
/// result is guaranteed to contain at least `(c/A)·N` indices.
pub fn pliss_times(a: &[f64], c: f64, big_a: f64) -> Result<Vec<usize>> {
    check_hypotheses(a, c, big_a)?;
    Ok(pliss_times_unchecked(a))
}

pub(crate) fn check_hypotheses(a: &[f64], c: f64, big_a: f64) -> Result<()> {
    if !(c > 0.0 && c <= big_a * (1.0 + REL_TOL)) {
        return Err(HypError::Precondition(format!("need 0 < c <= A, got c={c}, A={big_a}")));
    }
    if let Some((j, &v)) = a.iter().enumerate().find(|(_, &v)| !(v <= big_a + REL_TOL * big_a.abs().max(1.0))) {
        return Err(HypError::Precondition(format!("a_{} = {v} exceeds A = {big_a}", j + 1)));
    }
    let sum: f64 = a.iter().sum();
    let scale: f64 = a.iter().map(|v| v.abs()).sum::<f64>().max(1.0);
    let need = c * a.len() as f64;
    if sum < need - REL_TOL * scale {
        return Err(HypError::Precondition(format!("sum {sum} is below cN = {need}")));
    }
    Ok(())
}
