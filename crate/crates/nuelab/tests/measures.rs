use nuelab::dynamics::{
    sample_realization, step, Chart, Doubling, Intermittent, Jacobian, Logistic, MapSpec, MapSystem, NoiseKernel, Point, Product,
    Vector, Viana,
};
use nuelab::measures::{
    empirical_density, l1_distance, lyapunov_spectrum, stability_sweep, stationary_density, transfer_apply, ulam_matrix,
    DensityMethod, EmpiricalConfig, Grid, GridDensity, MeasureError, SweepConfig, induced_ulam, tower_project, tower_project_samples, TowerSample,
};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[derive(Debug)]
struct Identity;

impl MapSystem for Identity {
    fn name(&self) -> &str {
        "identity"
    }
    fn chart(&self) -> Chart {
        Chart::Circle
    }
    fn raw(&self, x: &Vector) -> Vector {
        *x
    }
    fn jacobian(&self, _x: &Vector) -> Jacobian {
        Jacobian::scalar(1.0)
    }
    fn params(&self) -> Vec<(String, f64)> {
        Vec::new()
    }
}

fn ones_distance(h: &GridDensity) -> f64 {
    l1_distance(h, &GridDensity::uniform(h.grid.clone())).unwrap()
}

#[test]
fn identity_map_gives_the_identity_matrix() {
    let grid = Grid::square(Chart::Circle, 64).unwrap();
    let p = ulam_matrix(&Identity, NoiseKernel::dirac(1), &grid, 1, 8, 3).unwrap();
    for i in 0..p.n() {
        let row: Vec<_> = p.row(i).collect();
        assert_eq!(row, vec![(i, 1.0)]);
    }
}

#[test]
fn rows_are_stochastic_for_every_catalog_map() {
    for spec in MapSpec::catalog() {
        let map = spec.build().unwrap();
        let cells = if map.dim() == 1 { 256 } else { 32 };
        let grid = Grid::square(map.chart(), cells).unwrap();
        let eps = spec.noise_margin().map_or(0.01, |m| 0.5 * m);
        let kernel = NoiseKernel::new(eps, map.dim()).unwrap();
        let p = ulam_matrix(map.as_ref(), kernel, &grid, 4, 4, 11).unwrap();
        assert!(p.max_row_defect() <= 1e-12, "{}: {}", map.name(), p.max_row_defect());
        assert!(p.vals.iter().all(|v| *v >= 0.0));
    }
}

#[test]
fn doubling_stationary_density_is_lebesgue() {
    let map = Doubling::new(2).unwrap();
    let grid = Grid::square(Chart::Circle, 1024).unwrap();
    let p = ulam_matrix(&map, NoiseKernel::dirac(1), &grid, 1, 16, 0).unwrap();
    let s = stationary_density(&p, 1e-10, 100_000).unwrap();
    assert!(ones_distance(&s.density) < 1e-12);
    for eps in [0.01, 0.05] {
        let p = ulam_matrix(&map, NoiseKernel::new(eps, 1).unwrap(), &grid, 16, 64, 1).unwrap();
        let s = stationary_density(&p, 1e-10, 100_000).unwrap();
        // Monte Carlo jitter only, the averaged operator preserves Lebesgue: budget
        // (cells / samples)^{1/2} with 16·64 samples per cell.
        let budget = (1.0f64 / (16.0 * 64.0)).sqrt();
        assert!(ones_distance(&s.density) < budget, "eps {eps}: {}", ones_distance(&s.density));
        assert!((s.density.integral() - 1.0).abs() < 1e-12);
    }
}

#[test]
fn fixed_point_residual_is_within_twice_the_tolerance() {
    let map = Intermittent::new(0.5).unwrap();
    let grid = Grid::square(Chart::Circle, 512).unwrap();
    let p = ulam_matrix(&map, NoiseKernel::new(0.01, 1).unwrap(), &grid, 8, 8, 5).unwrap();
    let tol = 1e-10;
    let s = stationary_density(&p, tol, 100_000).unwrap();
    let pushed = p.push_masses(&s.density.masses());
    let res: f64 = pushed.iter().zip(s.density.masses()).map(|(a, b)| (a - b).abs()).sum();
    assert!(res <= 2.0 * tol, "residual {res}");
}

#[test]
fn non_convergence_is_reported() {
    let map = Intermittent::new(0.5).unwrap();
    let grid = Grid::square(Chart::Circle, 512).unwrap();
    let p = ulam_matrix(&map, NoiseKernel::dirac(1), &grid, 1, 8, 5).unwrap();
    match stationary_density(&p, 1e-15, 3) {
        Err(MeasureError::NotConverged { iterations: 3, residual }) => assert!(residual > 0.0),
        other => panic!("expected non-convergence, got {other:?}"),
    }
}

/// Cell averages of the arcsine density `1/(π√(x(1−x)))`, via its distribution function.
fn arcsine_cells(grid: &Grid) -> GridDensity {
    let cdf = |x: f64| 2.0 / std::f64::consts::PI * x.clamp(0.0, 1.0).sqrt().asin();
    let n = grid.n_cells();
    let masses: Vec<f64> = (0..n).map(|i| cdf((i + 1) as f64 / n as f64) - cdf(i as f64 / n as f64)).collect();
    GridDensity::from_masses(grid.clone(), &masses)
}

#[test]
fn logistic_density_approaches_the_arcsine_law() {
    let mut errors = Vec::new();
    for cells in [128, 512, 2048] {
        let grid = Grid::new(Logistic.chart(), &[cells]).unwrap();
        let p = ulam_matrix(&Logistic, NoiseKernel::dirac(1), &grid, 1, 64, 2).unwrap();
        let s = stationary_density(&p, 1e-10, 100_000).unwrap();
        errors.push(l1_distance(&s.density, &arcsine_cells(&grid)).unwrap());
    }
    assert!(errors[2] < errors[0], "{errors:?}");
    assert!(errors[2] < 0.05, "{errors:?}");
}

#[test]
fn empirical_density_of_doubling_is_flat() {
    let map = Doubling::new(2).unwrap();
    let grid = Grid::square(Chart::Circle, 64).unwrap();
    for eps in [0.0, 0.02] {
        let kernel = NoiseKernel::new(eps, 1).unwrap();
        let h = empirical_density(&map, kernel, 20_000, 20, 10, &grid, 9).unwrap();
        // 64 bins, 2·10⁵ points: fluctuations ~ (bins/samples)^{1/2} ≈ 0.018.
        assert!(ones_distance(&h) < 0.05, "eps {eps}: {}", ones_distance(&h));
    }
    let h = empirical_density(&map, NoiseKernel::new(0.02, 1).unwrap(), 1000, 5, 4, &grid, 9).unwrap();
    assert!((h.integral() - 1.0).abs() < 1e-12);
    assert!(empirical_density(&map, NoiseKernel::dirac(1), 10, 5, 5, &grid, 9).is_err());
}

#[test]
fn estimators_agree_on_the_intermittent_map() {
    let map = Intermittent::new(0.5).unwrap();
    let kernel = NoiseKernel::new(0.02, 1).unwrap();
    let grid = Grid::square(Chart::Circle, 64).unwrap();
    let p = ulam_matrix(&map, kernel, &grid, 16, 64, 4).unwrap();
    let u = stationary_density(&p, 1e-10, 100_000).unwrap().density;
    let e = empirical_density(&map, kernel, 4000, 600, 100, &grid, 4).unwrap();
    let d = l1_distance(&u, &e).unwrap();
    assert!(d < 0.08, "ulam vs empirical {d}");
}

#[test]
fn transfer_of_constant_under_doubling_is_constant() {
    let map = Doubling::new(2).unwrap();
    let grid = Grid::square(Chart::Circle, 256).unwrap();
    let r = sample_realization(NoiseKernel::new(0.05, 1).unwrap(), 1, 0, 4);
    let one = GridDensity::uniform(grid);
    for j in 1..=3 {
        let out = transfer_apply(&map, &r, j, &one).unwrap();
        assert!(ones_distance(&out.density) < 1e-12);
        assert!(out.defect[0].abs() < 1e-12);
    }
}

fn random_signed(grid: &Grid, rng: &mut ChaCha8Rng) -> GridDensity {
    let values = (0..grid.n_cells()).map(|_| rng.random::<f64>() * 2.0 - 1.0).collect();
    GridDensity { grid: grid.clone(), values }
}

fn one_dimensional_maps() -> Vec<Box<dyn MapSystem>> {
    vec![Box::new(Doubling::new(2).unwrap()), Box::new(Intermittent::new(0.5).unwrap()), Box::new(Logistic)]
}

#[test]
fn transfer_conserves_mass_and_does_not_expand() {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    for map in one_dimensional_maps() {
        let grid = Grid::square(map.chart(), 128).unwrap();
        // The logistic map has no room for noise on [0, 1].
        let eps = if matches!(map.chart(), Chart::Circle) { 0.01 } else { 0.0 };
        let r = sample_realization(NoiseKernel::new(eps, 1).unwrap(), 5, 0, 3);
        for k in 0..100 {
            let phi = random_signed(&grid, &mut rng);
            let out = transfer_apply(map.as_ref(), &r, 1 + k % 3, &phi).unwrap().density;
            assert!((out.integral() - phi.integral()).abs() < 1e-12, "{}", map.name());
            assert!(out.l1_norm() <= phi.l1_norm() * (1.0 + 1e-12), "{}", map.name());
        }
    }
}

#[test]
fn two_dimensional_transfer_is_unsupported() {
    let map = Viana::new(16, 0.01, 0.05).unwrap();
    let grid = Grid::square(map.chart(), 8).unwrap();
    let r = sample_realization(NoiseKernel::dirac(2), 0, 0, 1);
    assert!(matches!(transfer_apply(&map, &r, 1, &GridDensity::uniform(grid)), Err(MeasureError::Unsupported(_))));
}

#[test]
fn transfer_is_dual_to_composition() {
    // ∫(ℒφ)ψ dm = ∫φ·(ψ∘f^j) dm for ψ the indicator of a cell.
    let map = Intermittent::new(0.5).unwrap();
    let grid = Grid::square(Chart::Circle, 512).unwrap();
    let r = sample_realization(NoiseKernel::new(0.02, 1).unwrap(), 8, 0, 2);
    let phi = GridDensity::from_fn(grid.clone(), 4, |x| 1.0 + 0.5 * (2.0 * std::f64::consts::PI * x[0]).sin());
    let j = 2;
    let lphi = transfer_apply(&map, &r, j, &phi).unwrap().density;
    let fine = 1 << 20;
    let mut landed = vec![0.0; grid.n_cells()];
    for s in 0..fine {
        let y = (s as f64 + 0.5) / fine as f64;
        let mut x = Point::new(Chart::Circle, &[y]).unwrap();
        for i in 0..j {
            x = step(&map, r.get(i as i64).unwrap(), &x).unwrap();
        }
        landed[grid.cell_of(&x.coords)] += phi.values[grid.cell_of(&[y, 0.0, 0.0, 0.0])] / fine as f64;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for _ in 0..20 {
        let k = rng.random_range(0..grid.n_cells());
        let lhs = lphi.values[k] * grid.cell_volume();
        let rhs = landed[k];
        assert!((lhs - rhs).abs() <= 0.05 * rhs.max(1e-3), "cell {k}: {lhs} vs {rhs}");
    }
}

#[test]
fn lyapunov_of_diagonal_product_is_exact() {
    let map = Product::standard(&[2, 3], 0.5).unwrap();
    // Two expanding factors and one intermittent: restrict to the expanding ones.
    let map2 = Product::new(map.factors()[..2].to_vec()).unwrap();
    let r = sample_realization(NoiseKernel::new(0.01, 2).unwrap(), 4, 0, 500);
    let x0 = Point::new(map2.chart(), &[0.1, 0.7]).unwrap();
    let rep = lyapunov_spectrum(&map2, &r, &x0, 500).unwrap();
    let mut e = rep.exponents.clone();
    e.sort_by(f64::total_cmp);
    assert!((e[0] - 2f64.ln()).abs() < 1e-12 && (e[1] - 3f64.ln()).abs() < 1e-12, "{e:?}");
    assert!((rep.exponents.iter().sum::<f64>() - rep.mean_log_det).abs() < 1e-8);
}

#[test]
fn viana_exponents_are_positive_for_most_starts() {
    let map = Viana::new(16, 0.01, 0.05).unwrap();
    let kernel = NoiseKernel::new(0.01, 2).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let mut positive = 0;
    let trials = 100;
    for k in 0..trials {
        let x0 = Point::new(map.chart(), &[rng.random::<f64>(), rng.random_range(-1.0..1.5)]).unwrap();
        let r = sample_realization(kernel, k, 0, 2000);
        let rep = lyapunov_spectrum(&map, &r, &x0, 2000).unwrap();
        assert!((rep.exponents.iter().sum::<f64>() - rep.mean_log_det).abs() < 1e-8);
        if rep.exponents.iter().all(|e| *e > 0.0) {
            positive += 1;
        }
    }
    assert!(positive >= 90, "{positive}/{trials}");
}

#[test]
fn sweep_on_doubling_stays_at_zero() {
    let map = Doubling::new(2).unwrap();
    let cfg = SweepConfig {
        cells: 256,
        noise_samples: 16,
        points_per_cell: 64,
        tol: 1e-10,
        max_iters: 100_000,
        empirical: EmpiricalConfig { x0_samples: 20_000, orbit_len: 20, burn_in: 10 },
        floor: true,
    };
    let rep = stability_sweep(&map, &[0.1, 0.01, 0.001], DensityMethod::Both, &cfg, 1).unwrap();
    assert_eq!(rep.floor, Some(0.0));
    for row in &rep.rows {
        assert!(row.error.is_none());
        assert!(row.l1_ulam.unwrap() < 0.03, "{row:?}");
        assert!(row.l1_empirical.unwrap() < 0.1, "{row:?}");
    }
    assert!(stability_sweep(&map, &[0.01, 0.1], DensityMethod::Ulam, &cfg, 1).is_err());
}

#[test]
fn sweep_records_failures_without_aborting() {
    // Noise above the invariance margin pushes Viana orbits off the cylinder.
    let map = Viana::new(16, 0.01, 0.05).unwrap();
    let cfg = SweepConfig {
        cells: 16,
        noise_samples: 4,
        points_per_cell: 4,
        tol: 1e-9,
        max_iters: 100_000,
        empirical: EmpiricalConfig { x0_samples: 10, orbit_len: 5, burn_in: 1 },
        floor: false,
    };
    let rep = stability_sweep(&map, &[2.0, 0.01], DensityMethod::Ulam, &cfg, 1).unwrap();
    assert!(rep.rows[0].error.is_some());
    assert!(rep.rows[1].error.is_none() && rep.rows[1].l1_ulam.is_some());
}

#[test]
fn l1_examples() {
    let grid = Grid::square(Chart::Circle, 8).unwrap();
    let half = GridDensity::from_fn(grid.clone(), 1, |x| if x[0] < 0.5 { 2.0 } else { 0.0 });
    let one = GridDensity::uniform(grid.clone());
    assert_eq!(l1_distance(&one, &one).unwrap(), 0.0);
    assert!((l1_distance(&half, &one).unwrap() - 1.0).abs() < 1e-15);
    let other = GridDensity::uniform(Grid::square(Chart::Circle, 16).unwrap());
    assert!(matches!(l1_distance(&one, &other), Err(MeasureError::GridMismatch(_))));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn l1_triangle_inequality(seed in any::<u64>(), cells in 1usize..64) {
        let grid = Grid::square(Chart::Circle, cells.max(2)).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut pick = || {
            let mut h = GridDensity { grid: grid.clone(), values: (0..grid.n_cells()).map(|_| rng.random::<f64>()).collect() };
            h.normalize().unwrap();
            h
        };
        let (a, b, c) = (pick(), pick(), pick());
        let ab = l1_distance(&a, &b).unwrap();
        let bc = l1_distance(&b, &c).unwrap();
        let ac = l1_distance(&a, &c).unwrap();
        prop_assert!(ac <= ab + bc + 1e-12);
        prop_assert!((l1_distance(&a, &b).unwrap() - l1_distance(&b, &a).unwrap()).abs() == 0.0);
    }

    #[test]
    fn normalize_gives_unit_mass(seed in any::<u64>(), cells in 2usize..40) {
        let grid = Grid::square(Chart::Torus(2), cells).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut h = GridDensity { grid: grid.clone(), values: (0..grid.n_cells()).map(|_| rng.random::<f64>() * 5.0).collect() };
        h.normalize().unwrap();
        prop_assert!((h.integral() - 1.0).abs() <= 1e-12);
        prop_assert!(h.values.iter().all(|v| *v >= 0.0));
    }

    #[test]
    fn ulam_rows_sum_to_one(eps in 0.0f64..0.2, seed in any::<u64>(), ppc in 1usize..12, k in 1usize..6) {
        let map = Intermittent::new(0.5).unwrap();
        let grid = Grid::square(Chart::Circle, 64).unwrap();
        let p = ulam_matrix(&map, NoiseKernel::new(eps, 1).unwrap(), &grid, k, ppc, seed).unwrap();
        prop_assert!(p.max_row_defect() <= 1e-12);
    }
}

// ---------- tower projection ----------

#[test]
fn tower_of_return_time_one_is_the_base_distribution() {
    let grid = Grid::square(Chart::Circle, 16).unwrap();
    let xs: Vec<[f64; 1]> = (0..1600).map(|i| [(i as f64 + 0.5) / 1600.0]).collect();
    let h = tower_project_samples(&grid, xs.iter().map(|x| TowerSample { mass: 1.0 / 1600.0, orbit: x })).unwrap();
    assert!((h.integral() - 1.0).abs() < 1e-12);
    assert!(l1_distance(&h, &GridDensity::uniform(grid.clone())).unwrap() < 1e-12);
}

proptest! {
    #[test]
    fn tower_mass_counts_every_level(orbits in prop::collection::vec((prop::collection::vec(0.0..1.0f64, 1..12), 0.0..2.0f64), 1..20)) {
        let grid = Grid::square(Chart::Circle, 8).unwrap();
        let h = tower_project_samples(&grid, orbits.iter().map(|(o, m)| TowerSample { mass: *m, orbit: o })).unwrap();
        let total: f64 = orbits.iter().map(|(o, m)| m * o.len() as f64).sum();
        prop_assert!((h.integral() - total).abs() <= 1e-9 * total.max(1.0));
        prop_assert!(h.values.iter().all(|&v| v >= 0.0));
    }
}

#[test]
fn doubling_tower_recovers_lebesgue() {
    use nuelab::hyperbolic::HypParams;
    use nuelab::inducing::{build_partition, derive_constants, ConstantsConfig, PartitionConfig};
    let m = Doubling::new(2).unwrap();
    let hyp = HypParams::expanding(std::f64::consts::LN_2 / 2.0, std::f64::consts::LN_2);
    let c = derive_constants(&m, NoiseKernel::dirac(1), &hyp, &ConstantsConfig::default()).unwrap();
    let real = sample_realization(NoiseKernel::dirac(1), 2, 0, 0);
    let im = build_partition(&m, &real, &PartitionConfig::new(c, c.r0 + 1500, 8192, 6)).unwrap();
    let rho = induced_ulam(&im, 4, 1e-12, 10_000).unwrap();
    assert!((rho.density.integral() - 1.0).abs() < 1e-9);
    assert!(rho.k1 < 1.2, "K₁ = {}", rho.k1);
    let t = tower_project(&rho.density, &im, &m, 16).unwrap();
    assert!(t.total_mass <= t.mass_bound * (1.0 + 1e-12));
    assert!(t.truncation_bound.is_finite());
    let err = l1_distance(&t.density, &GridDensity::uniform(t.density.grid.clone())).unwrap();
    assert!(err < 0.05, "L1 = {err}");
}
