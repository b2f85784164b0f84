use nuelab::dynamics::{random_orbit, sample_realization, MapSpec, MapSystem, NoiseKernel, Point, Viana};
use nuelab::hyperbolic::{
    fit_decay, hyperbolic_times_direct, hyperbolic_times_pliss, resolve_constants, tail_curve, uniform_point, DecayModel,
    ResolveConfig, ResolvedConstants, TailParams,
};
use nuelab::inducing::{
    build_partition, derive_constants, return_time_tail, verify_gibbs_markov, ConstantsConfig, PartitionConfig,
};
use nuelab::measures::{
    empirical_density, induced_ulam, l1_distance, lyapunov_spectrum, stability_sweep,
    stationary_density, tower_project, ulam_matrix, DensityMethod, EmpiricalConfig, Grid, GridDensity, SweepConfig,
};
use nuelab::rng;
use rayon::prelude::*;

use crate::config::*;
use crate::output::{fmt_opt, Csv, RunOutput};
use crate::{plot, CliError};

/// Outcome of a pipeline that ran to completion.
pub enum Verdict {
    Pass,
    Fail(String),
}

type Res = Result<Verdict, CliError>;

fn pipeline<E: std::fmt::Display>(e: E) -> CliError {
    CliError::Pipeline(e.to_string())
}

/// Constants every experiment of a kind records in its manifest.
pub fn registry(kind: &str) -> &'static [&'static str] {
    const RESOLVED: &[&str] = &["epsilon", "a0", "b0", "delta", "lambda", "b", "q", "rho", "zeta"];
    match kind {
        "orbit" | "lyapunov" | "verify-map" => &["epsilon"],
        "pliss" | "hyp" | "tails" => RESOLVED,
        "density" => &["epsilon", "noise_samples", "points_per_cell"],
        "stability" => &["epsilon", "a0", "b0", "delta", "lambda", "b", "q", "rho", "zeta", "noise_samples", "points_per_cell"],
        "induce" => &[
            "epsilon", "a0", "b0", "delta", "lambda", "b", "q", "rho", "delta1", "p", "n0", "k0", "d0", "c0_prime", "c0",
            "delta0", "alpha", "n_alpha", "zeta", "r0", "n_max", "eps_geom", "kappa_hat", "kappa_bound",
            "distortion_hat", "distortion_bound", "residual_mass",
        ],
        _ => &[],
    }
}

fn kernel(cfg: &ExperimentConfig, map: &dyn MapSystem) -> Result<NoiseKernel, CliError> {
    NoiseKernel::new(cfg.kernel.eps, map.dim()).map_err(|e| CliError::Config { path: "kernel.eps".into(), message: e.to_string() })
}

fn resolve(
    out: &mut RunOutput,
    map: &dyn MapSystem,
    kernel: NoiseKernel,
    a0: Option<f64>,
    orbits: usize,
    horizon: usize,
    seed: u64,
) -> Result<ResolvedConstants, CliError> {
    let rc = ResolveConfig { a0, orbits, horizon, seed: rng::derive_seed(seed, 0x7265), ..Default::default() };
    let c = resolve_constants(map, kernel, &rc).map_err(pipeline)?;
    for (k, v) in [
        ("a0", c.a0),
        ("b0", c.b0),
        ("delta", c.delta),
        ("lambda", c.lambda),
        ("b", c.b),
        ("q", c.q),
        ("rho", c.rho),
        ("beta", c.beta),
        ("alpha1", c.alpha1),
        ("r1", c.r1),
        ("alpha2", c.alpha2),
        ("r2", c.r2),
        ("zeta", c.zeta1),
    ] {
        out.constant(k, v);
    }
    Ok(c)
}

fn coords_header(prefix: &str, dim: usize) -> Vec<String> {
    (0..dim).map(|i| format!("{prefix}{i}")).collect()
}

pub fn dispatch(cfg: &ExperimentConfig, map: &dyn MapSystem, out: &mut RunOutput) -> Res {
    out.constant("epsilon", cfg.kernel.eps);
    match cfg.experiment.as_ref().expect("validated") {
        Experiment::Orbit(p) => orbit(cfg, p, map, out),
        Experiment::Pliss(p) => pliss(cfg, p, map, out),
        Experiment::Hyp(p) => hyp(cfg, p, map, out),
        Experiment::Tails(p) => tails(cfg, p, map, out),
        Experiment::Induce(p) => induce(cfg, p, map, out),
        Experiment::Density(p) => density(cfg, p, map, out),
        Experiment::Stability(p) => stability(cfg, p, map, out),
        Experiment::Lyapunov(p) => lyapunov(cfg, p, map, out),
        Experiment::VerifyMap(p) => verify_map(cfg, p, map, out),
    }
}

fn orbit(cfg: &ExperimentConfig, p: &OrbitParams, map: &dyn MapSystem, out: &mut RunOutput) -> Res {
    let k = kernel(cfg, map)?;
    let x0 = match &p.x0 {
        Some(x) => Point::new(map.chart(), x).map_err(|e| CliError::Config { path: "experiment.x0".into(), message: e.to_string() })?,
        None => uniform_point(map, cfg.seed, 0),
    };
    let real = sample_realization(k, cfg.seed, 0, p.n);
    let log = random_orbit(map, &real, &x0, p.n).map_err(pipeline)?;
    let dim = map.dim();
    let mut header = vec!["j".to_string()];
    header.extend(coords_header("x", dim));
    header.extend(["log_inv_norm", "log_det", "crit_dist"].map(String::from));
    let mut csv = Csv::new(&header.iter().map(String::as_str).collect::<Vec<_>>());
    for (j, pt) in log.points.iter().enumerate() {
        let mut row = vec![j.to_string()];
        row.extend(pt.coords().iter().map(|v| v.to_string()));
        let at = |v: &[f64]| v.get(j).map(|x| x.to_string()).unwrap_or_default();
        row.extend([at(&log.log_inv_norm), at(&log.log_det), at(&log.crit_dist)]);
        csv.row(row);
    }
    out.write_csv("orbit.csv", csv)?;
    out.note("steps", log.len());
    out.note("critical_hits", &log.critical_hits);
    Ok(Verdict::Pass)
}

fn sample_orbits(
    cfg: &ExperimentConfig,
    map: &dyn MapSystem,
    k: NoiseKernel,
    count: usize,
    n: usize,
) -> Result<Vec<nuelab::dynamics::OrbitLog>, CliError> {
    (0..count)
        .into_par_iter()
        .map(|i| {
            let real = sample_realization(k, rng::derive_seed(cfg.seed, 1000 + i as u64), 0, n);
            random_orbit(map, &real, &uniform_point(map, cfg.seed, 1000 + i as u64), n).map_err(pipeline)
        })
        .collect()
}

fn pliss(cfg: &ExperimentConfig, p: &TimesParams, map: &dyn MapSystem, out: &mut RunOutput) -> Res {
    let k = kernel(cfg, map)?;
    let c = resolve(out, map, k, p.a0, p.resolve_orbits, p.resolve_horizon, cfg.seed)?;
    let hp = c.hyp_params();
    let orbits = sample_orbits(cfg, map, k, p.orbits, p.n)?;
    let mut summary = Csv::new(&["orbit", "hypotheses_ok", "times", "frequency", "zeta_guaranteed", "detail"]);
    let mut times = Csv::new(&["orbit", "n"]);
    let mut ok = 0usize;
    let mut below = 0usize;
    for (i, o) in orbits.iter().enumerate() {
        match hyperbolic_times_pliss(o, &hp, map.has_critical_set()) {
            Ok(x) => {
                ok += 1;
                let freq = x.times.len() as f64 / p.n as f64;
                if freq + 1e-12 < x.zeta {
                    below += 1;
                }
                summary.row([i.to_string(), "true".into(), x.times.len().to_string(), freq.to_string(), x.zeta.to_string(), String::new()]);
                for t in &x.times {
                    times.row([i.to_string(), t.to_string()]);
                }
            }
            Err(f) => summary.row([i.to_string(), "false".into(), String::new(), String::new(), String::new(), f.detail]),
        }
    }
    out.write_csv("pliss.csv", summary)?;
    out.write_csv("pliss_times.csv", times)?;
    out.note("orbits_meeting_hypotheses", ok);
    out.note("orbits_below_guaranteed_frequency", below);
    Ok(if below == 0 { Verdict::Pass } else { Verdict::Fail(format!("{below} orbits fall short of the guaranteed frequency")) })
}

fn hyp(cfg: &ExperimentConfig, p: &TimesParams, map: &dyn MapSystem, out: &mut RunOutput) -> Res {
    let k = kernel(cfg, map)?;
    let c = resolve(out, map, k, p.a0, p.resolve_orbits, p.resolve_horizon, cfg.seed)?;
    let hp = c.hyp_params();
    let orbits = sample_orbits(cfg, map, k, p.orbits, p.n)?;
    let mut csv = Csv::new(&["orbit", "direct", "pliss", "violations", "frequency_direct"]);
    let mut violations = 0usize;
    for (i, o) in orbits.iter().enumerate() {
        let direct = hyperbolic_times_direct(o, &hp);
        let pl = hyperbolic_times_pliss(o, &hp, map.has_critical_set()).map(|x| x.times).ok();
        let v = pl.as_ref().map_or(0, |t| t.iter().filter(|n| direct.binary_search(n).is_err()).count());
        violations += v;
        csv.row([
            i.to_string(),
            direct.len().to_string(),
            pl.as_ref().map(|t| t.len().to_string()).unwrap_or_default(),
            v.to_string(),
            (direct.len() as f64 / p.n as f64).to_string(),
        ]);
    }
    out.write_csv("hyp.csv", csv)?;
    out.note("violations", violations);
    Ok(if violations == 0 { Verdict::Pass } else { Verdict::Fail(format!("{violations} constructive times are not hyperbolic")) })
}

fn tails(cfg: &ExperimentConfig, p: &TailsParams, map: &dyn MapSystem, out: &mut RunOutput) -> Res {
    let k = kernel(cfg, map)?;
    let c = resolve(out, map, k, p.a0, p.resolve_orbits, p.resolve_horizon, cfg.seed)?;
    let params = TailParams { a0: c.a0, b0: c.b0, delta: c.delta };
    let grid: Vec<usize> = (p.n_step..=p.n_max).step_by(p.n_step).collect();
    let curve = tail_curve(map, k, params, p.x_samples, p.omega_samples, p.n_max, &grid, cfg.seed).map_err(pipeline)?;
    let mut csv = Csv::new(&["n", "gamma_mean", "gamma_max", "gamma_p95"]);
    for i in 0..grid.len() {
        csv.row([grid[i].to_string(), curve.gamma_mean[i].to_string(), curve.gamma_max[i].to_string(), curve.gamma_p95[i].to_string()]);
    }
    out.write_csv("tails.csv", csv)?;
    let mut fits = Csv::new(&["model", "rate", "log_c", "r2", "points"]);
    let mut best: Option<(f64, &str)> = None;
    for (name, model) in [
        ("exponential", DecayModel::Exponential),
        ("polynomial", DecayModel::Polynomial),
        ("stretched_exponential", DecayModel::StretchedExponential),
    ] {
        match fit_decay(&grid, &curve.gamma_mean, model) {
            Ok(f) => {
                fits.row([name.to_string(), f.rate.to_string(), f.log_c.to_string(), f.r2.to_string(), f.points.to_string()]);
                if best.is_none_or(|(r2, _)| f.r2 > r2) {
                    best = Some((f.r2, name));
                }
            }
            Err(_) => fits.row([name.to_string(), String::new(), String::new(), String::new(), "0".into()]),
        }
    }
    out.write_csv("tail_fits.csv", fits)?;
    out.write("tails_plot.dat", plot::tail_curve(&grid, &curve.gamma_mean).as_bytes())?;
    out.note("best_model", best.map(|b| b.1));
    out.note("censored_fraction", curve.censored_fraction);
    Ok(Verdict::Pass)
}

fn induce(cfg: &ExperimentConfig, p: &InduceParams, map: &dyn MapSystem, out: &mut RunOutput) -> Res {
    let k = kernel(cfg, map)?;
    let rc = resolve(out, map, k, None, p.resolve_orbits, p.resolve_horizon, cfg.seed)?;
    let hp = rc.hyp_params();
    let cc = ConstantsConfig { p: p.p, seed: cfg.seed, ..Default::default() };
    let c = derive_constants(map, k, &hp, &cc).map_err(pipeline)?;
    for (name, v) in [
        ("delta1", c.delta1),
        ("p", c.p),
        ("n0", c.n0 as f64),
        ("k0", c.k0),
        ("d0", c.d0),
        ("c0_prime", c.c0_prime),
        ("c0", c.c0),
        ("delta0", c.delta0),
        ("alpha", c.alpha),
        ("n_alpha", c.n_alpha as f64),
        ("zeta", c.zeta),
        ("r0", c.r0 as f64),
        ("kappa_bound", c.kappa_bound()),
        ("distortion_bound", c.distortion_bound()),
    ] {
        out.constant(name, v);
    }
    let pc = PartitionConfig::new(c, c.r0 + p.extra_steps, p.queries, cfg.seed);
    out.constant("n_max", pc.n_max as f64);
    out.constant("eps_geom", pc.eps_geom);
    let real = sample_realization(k, rng::derive_seed(cfg.seed, 0x696e), 0, pc.n_max as usize);
    let im = build_partition(map, &real, &pc).map_err(pipeline)?;
    let report = verify_gibbs_markov(&im);
    out.constant("kappa_hat", report.kappa_hat);
    out.constant("distortion_hat", report.distortion_hat);
    out.constant("residual_mass", im.residual_mass);

    let mut csv = Csv::new(&["core_lo", "core_hi", "collar1_lo", "collar1_hi", "return_time", "hits", "markov_error", "kappa", "distortion"]);
    for e in &im.elements {
        csv.row([
            e.core.0.to_string(),
            e.core.1.to_string(),
            fmt_opt(e.collar1.map(|c| c.0)),
            fmt_opt(e.collar1.map(|c| c.1)),
            e.return_time.to_string(),
            e.hits.to_string(),
            e.markov_error.to_string(),
            e.kappa.to_string(),
            e.distortion.to_string(),
        ]);
    }
    out.write_csv("elements.csv", csv)?;
    let tail = return_time_tail(&im);
    out.write("return_tail.csv", tail.to_csv().as_bytes())?;
    out.write("return_tail_plot.dat", plot::return_tail(&tail.n, &tail.mass_gt_n).as_bytes())?;
    out.write_json("gibbs_markov.json", &report)?;
    out.note("returned", im.returned);
    out.note("open", im.open);
    out.note("unresolved", im.unresolved);
    out.note("elements", im.elements.len());
    out.note("collar_violations", im.collar_violations);
    out.note("gibbs_markov_passed", report.passed());

    if p.induced_cells > 0 {
        let iu = induced_ulam(&im, p.induced_cells, 1e-12, 100_000).map_err(pipeline)?;
        out.constant("k1", iu.k1);
        write_density(out, "induced_density.csv", &iu.density)?;
        if p.tower_cells > 0 {
            let t = tower_project(&iu.density, &im, map, p.tower_cells).map_err(pipeline)?;
            out.constant("tower_mass", t.total_mass);
            out.constant("tower_mass_bound", t.mass_bound);
            write_density(out, "tower_density.csv", &t.density)?;
        }
    }
    Ok(if report.passed() { Verdict::Pass } else { Verdict::Fail("Gibbs-Markov verification failed".into()) })
}

fn write_density(out: &mut RunOutput, name: &str, h: &GridDensity) -> Result<(), CliError> {
    write_densities(out, name, &h.grid, &[("density", Some(h))])
}

fn write_densities(out: &mut RunOutput, name: &str, grid: &Grid, cols: &[(&str, Option<&GridDensity>)]) -> Result<(), CliError> {
    let dim = grid.dim();
    let mut header = vec!["cell".to_string()];
    header.extend(coords_header("center", dim));
    header.extend(cols.iter().map(|(n, _)| n.to_string()));
    let mut csv = Csv::new(&header.iter().map(String::as_str).collect::<Vec<_>>());
    for i in 0..grid.n_cells() {
        let c = grid.center(i);
        let mut row = vec![i.to_string()];
        row.extend(c[..dim].iter().map(|v| v.to_string()));
        row.extend(cols.iter().map(|(_, h)| h.map(|h| h.values[i].to_string()).unwrap_or_default()));
        csv.row(row);
    }
    out.write_csv(name, csv)
}

fn density(cfg: &ExperimentConfig, p: &DensityParams, map: &dyn MapSystem, out: &mut RunOutput) -> Res {
    let k = kernel(cfg, map)?;
    out.constant("noise_samples", p.noise_samples as f64);
    out.constant("points_per_cell", p.points_per_cell as f64);
    let grid = Grid::square(map.chart(), p.cells).map_err(pipeline)?;
    let uniform = GridDensity::uniform(grid.clone());
    let ulam = if p.method != DensityMethod::Empirical {
        let m = ulam_matrix(map, k, &grid, p.noise_samples, p.points_per_cell, cfg.seed).map_err(pipeline)?;
        let s = stationary_density(&m, p.tol, p.max_iters).map_err(pipeline)?;
        out.note("ulam_residual", s.residual);
        out.note("ulam_iterations", s.iterations);
        out.note("ulam_l1_to_uniform", l1_distance(&s.density, &uniform).map_err(pipeline)?);
        Some(s.density)
    } else {
        None
    };
    let emp = if p.method != DensityMethod::Ulam {
        let h = empirical_density(map, k, p.x0_samples, p.orbit_len, p.burn_in, &grid, rng::derive_seed(cfg.seed, 1))
            .map_err(pipeline)?;
        out.note("empirical_l1_to_uniform", l1_distance(&h, &uniform).map_err(pipeline)?);
        Some(h)
    } else {
        None
    };
    if let (Some(a), Some(b)) = (&ulam, &emp) {
        out.note("l1_between_methods", l1_distance(a, b).map_err(pipeline)?);
    }
    write_densities(out, "density.csv", &grid, &[("ulam", ulam.as_ref()), ("empirical", emp.as_ref())])?;
    Ok(Verdict::Pass)
}

fn stability(cfg: &ExperimentConfig, p: &StabilityParams, map: &dyn MapSystem, out: &mut RunOutput) -> Res {
    let k = kernel(cfg, map)?;
    resolve(out, map, k, None, p.resolve_orbits, p.resolve_horizon, cfg.seed)?;
    let d = &p.density;
    out.constant("noise_samples", d.noise_samples as f64);
    out.constant("points_per_cell", d.points_per_cell as f64);
    let eps: Vec<f64> = match &cfg.kernel.eps_list {
        Some(l) => l.clone(),
        None => {
            let margin = p.margin.or(cfg.map.noise_margin()).unwrap_or(0.1);
            out.constant("margin", margin);
            (1..=p.decades).map(|j| margin * 10f64.powi(-(j as i32))).collect()
        }
    };
    let sc = SweepConfig {
        cells: d.cells,
        noise_samples: d.noise_samples,
        points_per_cell: d.points_per_cell,
        tol: d.tol,
        max_iters: d.max_iters,
        empirical: EmpiricalConfig { x0_samples: d.x0_samples, orbit_len: d.orbit_len, burn_in: d.burn_in },
        floor: p.floor,
    };
    let rep = stability_sweep(map, &eps, d.method, &sc, cfg.seed).map_err(pipeline)?;
    let mut csv = Csv::new(&["eps", "l1_ulam", "l1_empirical", "residual", "iterations", "error"]);
    for r in &rep.rows {
        csv.row([
            r.eps.to_string(),
            fmt_opt(r.l1_ulam),
            fmt_opt(r.l1_empirical),
            fmt_opt(r.residual),
            r.iterations.map(|i| i.to_string()).unwrap_or_default(),
            r.error.clone().unwrap_or_default(),
        ]);
    }
    out.write_csv("sweep.csv", csv)?;
    let l1: Vec<Option<f64>> = rep.rows.iter().map(|r| r.l1_ulam.or(r.l1_empirical)).collect();
    out.write("sweep_plot.dat", plot::sweep(&eps, &l1, rep.floor).as_bytes())?;
    if let Some(f) = rep.floor {
        out.constant("floor", f);
    }
    out.note("failed_levels", rep.rows.iter().filter(|r| r.error.is_some()).count());
    Ok(Verdict::Pass)
}

fn lyapunov(cfg: &ExperimentConfig, p: &LyapunovParams, map: &dyn MapSystem, out: &mut RunOutput) -> Res {
    let k = kernel(cfg, map)?;
    let reports: Vec<_> = (0..p.points)
        .into_par_iter()
        .map(|i| {
            let x0 = uniform_point(map, cfg.seed, i as u64);
            let real = sample_realization(k, rng::derive_seed(cfg.seed, i as u64), 0, p.n);
            (x0, lyapunov_spectrum(map, &real, &x0, p.n))
        })
        .collect();
    let dim = map.dim();
    let mut header = vec!["point".to_string()];
    header.extend(coords_header("x", dim));
    header.extend(coords_header("lambda", dim));
    header.extend(["mean_log_det".to_string(), "error".to_string()]);
    let mut csv = Csv::new(&header.iter().map(String::as_str).collect::<Vec<_>>());
    let mut positive = 0usize;
    for (i, (x0, r)) in reports.iter().enumerate() {
        let mut row = vec![i.to_string()];
        row.extend(x0.coords().iter().map(|v| v.to_string()));
        match r {
            Ok(r) => {
                positive += r.exponents.iter().all(|&l| l > 0.0) as usize;
                row.extend(r.exponents.iter().map(|v| v.to_string()));
                row.extend([r.mean_log_det.to_string(), String::new()]);
            }
            Err(e) => {
                row.extend(std::iter::repeat_n(String::new(), dim + 1));
                row.push(e.to_string());
            }
        }
        csv.row(row);
    }
    out.write_csv("lyapunov.csv", csv)?;
    out.note("fraction_all_positive", positive as f64 / p.points as f64);
    Ok(Verdict::Pass)
}

fn verify_map(cfg: &ExperimentConfig, p: &VerifyMapParams, map: &dyn MapSystem, out: &mut RunOutput) -> Res {
    let k = kernel(cfg, map)?;
    let mut csv = Csv::new(&["check", "value", "tolerance", "passed"]);
    let mut failed = Vec::new();
    let mut check = |csv: &mut Csv, name: &str, value: f64, tol: f64| {
        let ok = value <= tol;
        if !ok {
            failed.push(name.to_string());
        }
        csv.row([name.to_string(), value.to_string(), tol.to_string(), ok.to_string()]);
    };

    let grid = Grid::square(map.chart(), p.cells).map_err(pipeline)?;
    let m = ulam_matrix(map, k, &grid, 4, 4, cfg.seed).map_err(pipeline)?;
    check(&mut csv, "ulam_row_sum_defect", m.max_row_defect(), 1e-12);

    let det_gap = (0..p.lyapunov_points)
        .into_par_iter()
        .map(|i| {
            let x0 = uniform_point(map, cfg.seed, i as u64);
            let real = sample_realization(k, rng::derive_seed(cfg.seed, i as u64), 0, p.lyapunov_n);
            lyapunov_spectrum(map, &real, &x0, p.lyapunov_n).map(|r| (r.exponents.iter().sum::<f64>() - r.mean_log_det).abs())
        })
        .collect::<Result<Vec<f64>, _>>()
        .map_err(pipeline)?
        .into_iter()
        .fold(0.0, f64::max);
    check(&mut csv, "lyapunov_determinant_identity", det_gap, 1e-8);

    if map.has_critical_set() {
        let probe = nuelab::dynamics::nondegeneracy_probe(map, p.probe_samples, cfg.seed).map_err(pipeline)?;
        out.constant("beta_hat", probe.beta_hat);
        out.constant("b_hat", probe.b_hat);
        out.note("nondegeneracy", &probe);
        check(&mut csv, "nondegeneracy_b_hat_finite", if probe.b_hat.is_finite() { 0.0 } else { 1.0 }, 0.0);
    }
    if let MapSpec::Viana { d, alpha, margin } = &cfg.map {
        let v = Viana::new(*d, *alpha, *margin).map_err(pipeline)?;
        let ok = v.verify_invariance(cfg.kernel.eps.max(*margin)).is_ok();
        check(&mut csv, "viana_invariant_strip", if ok { 0.0 } else { 1.0 }, 0.0);
    }
    out.write_csv("checks.csv", csv)?;
    out.note("failed_checks", &failed);
    Ok(if failed.is_empty() { Verdict::Pass } else { Verdict::Fail(format!("failed checks: {}", failed.join(", "))) })
}
