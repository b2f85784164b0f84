//! Flat, whitespace-separated data files ready for log-scale plotting (gnuplot reads them as is;
//! the `#` header names the columns). Rows whose logarithm is undefined are dropped.

fn table(columns: &[&str], rows: impl IntoIterator<Item = Vec<f64>>) -> String {
    let mut s = format!("# {}\n", columns.join(" "));
    for r in rows {
        let line: Vec<String> = r.iter().map(|v| v.to_string()).collect();
        s.push_str(&line.join(" "));
        s.push('\n');
    }
    s
}

/// Columns `n log10_gamma_mean`.
pub fn tail_curve(n: &[usize], gamma_mean: &[f64]) -> String {
    table(
        &["n", "log10_gamma_mean"],
        n.iter().zip(gamma_mean).filter(|(_, g)| **g > 0.0).map(|(&n, &g)| vec![n as f64, g.log10()]),
    )
}

/// Columns `n log10_mass_gt_n`.
pub fn return_tail(n: &[u32], mass: &[f64]) -> String {
    table(
        &["n", "log10_mass_gt_n"],
        n.iter().zip(mass).filter(|(_, m)| **m > 0.0).map(|(&n, &m)| vec![n as f64, m.log10()]),
    )
}

/// Columns `log10_eps l1 floor`; the floor column repeats the measured discretization floor
/// (NaN when not measured).
pub fn sweep(eps: &[f64], l1: &[Option<f64>], floor: Option<f64>) -> String {
    let f = floor.unwrap_or(f64::NAN);
    table(
        &["log10_eps", "l1", "floor"],
        eps.iter().zip(l1).filter_map(|(&e, l)| match l {
            Some(l) if e > 0.0 => Some(vec![e.log10(), *l, f]),
            _ => None,
        }),
    )
}
