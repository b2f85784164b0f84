use nuelab::dynamics::{
    local_data, random_orbit, sample_realization, step, Chart, Doubling, Intermittent, MapSpec, MapSystem, NoiseKernel,
    Point, Product, Viana, MAX_DIM,
};
use proptest::prelude::*;

fn pt(map: &dyn MapSystem, c: &[f64]) -> Point {
    Point::new(map.chart(), c).unwrap()
}

fn noise(t: f64) -> [f64; MAX_DIM] {
    [t, 0.0, 0.0, 0.0]
}

#[test]
fn step_examples() {
    let d = Doubling::new(2).unwrap();
    assert_eq!(step(&d, &noise(0.0), &pt(&d, &[0.3])).unwrap().coords[0], 0.6);
    let y = step(&d, &noise(0.05), &pt(&d, &[0.6])).unwrap().coords[0];
    assert!((y - 0.25).abs() < 1e-15);

    let v = Viana::new(16, 0.01, 0.05).unwrap();
    let y = step(&v, &[0.0; MAX_DIM], &pt(&v, &[0.0, 0.5])).unwrap();
    assert_eq!(y.coords[0], 0.0);
    assert!((y.coords[1] - (v.p0 - 0.25)).abs() < 1e-15);
}

#[test]
fn viana_noise_beyond_margin_escapes() {
    let v = Viana::new(16, 0.01, 0.05).unwrap();
    // Top of the image range plus a kick larger than the margin.
    let x = pt(&v, &[0.25, 0.0]);
    let t = [0.0, 0.06, 0.0, 0.0];
    assert!(step(&v, &t, &x).is_err());
}

#[test]
fn rational_orbit_of_one_seventh() {
    // Exact arithmetic: numerators of 2^j/7 mod 1.
    let mut num = 1u64;
    let mut expected = Vec::new();
    for _ in 0..4 {
        expected.push(num);
        num = (2 * num) % 7;
    }
    assert_eq!(expected, vec![1, 2, 4, 1]);

    let d = Doubling::new(2).unwrap();
    let r = sample_realization(NoiseKernel::dirac(1), 0, 0, 3);
    let log = random_orbit(&d, &r, &pt(&d, &[1.0 / 7.0]), 3).unwrap();
    assert_eq!(log.points.len(), 4);
    for (p, &k) in log.points.iter().zip(&expected) {
        assert!((p.coords[0] - k as f64 / 7.0).abs() < 1e-15);
    }
    assert!(log.log_inv_norm.iter().all(|&l| l == -(2f64.ln())));
    assert!(log.crit_dist.iter().all(|d| d.is_infinite()));
}

#[test]
fn local_data_examples() {
    let d = Doubling::new(2).unwrap();
    let ld = local_data(&d, &pt(&d, &[0.123])).unwrap();
    assert_eq!((ld.log_inv_norm, ld.log_det), (-(2f64.ln()), 2f64.ln()));
    assert_eq!(ld.crit_dist, f64::INFINITY);

    // det [[d, 0], [2πα cos 2πs, −2x]] = −2dx.
    let v = Viana::new(16, 0.01, 0.05).unwrap();
    for &(s, x) in &[(0.1, 0.3), (0.77, -1.0), (0.5, 1e-4)] {
        let ld = local_data(&v, &pt(&v, &[s, x])).unwrap();
        assert!((ld.log_det - (32.0 * f64::abs(x)).ln()).abs() < 1e-12);
        assert_eq!(ld.crit_dist, f64::abs(x));
    }
    assert!(local_data(&v, &pt(&v, &[0.3, 0.0])).is_err());

    let m = Intermittent::new(0.5).unwrap();
    let ld = local_data(&m, &pt(&m, &[0.5])).unwrap();
    let phi_prime = 1.0 + 1.5 * 0.5f64.sqrt();
    assert!((ld.log_inv_norm + phi_prime.ln()).abs() < 1e-15);
}

#[test]
fn viana_orbit_near_the_critical_circle() {
    let v = Viana::new(16, 0.01, 0.05).unwrap();
    let r = sample_realization(NoiseKernel::dirac(2), 0, 0, 3);
    let log = random_orbit(&v, &r, &pt(&v, &[0.2, 1e-9]), 3).unwrap();
    assert!(log.crit_dist[0] < 1e-8);
    assert!(log.log_inv_norm[0] > 19.0);
    assert!(log.critical_hits.is_empty());

    let log = random_orbit(&v, &r, &pt(&v, &[0.2, 0.0]), 2).unwrap();
    assert_eq!(log.critical_hits, vec![0]);
}

#[test]
fn product_map_satisfies_the_local_diffeomorphism_conditions() {
    // V = {y < r or y > 1 − r} around the neutral circle of the last factor.
    let m = Product::standard(&[4], 0.5).unwrap();
    let r = 0.05;
    let n = 400;
    let (mut lambda0, mut lambda1, mut on_v) = (0.0f64, f64::INFINITY, 0.0f64);
    for i in 0..n {
        for j in 0..n {
            let x = [(i as f64 + 0.5) / n as f64, j as f64 / n as f64, 0.0, 0.0];
            let jac = m.jacobian(&x);
            let inv = jac.inv_norm();
            lambda1 = lambda1.min(jac.det().abs());
            if x[1] < r || x[1] > 1.0 - r {
                on_v = on_v.max(inv);
            } else {
                lambda0 = lambda0.max(inv);
            }
        }
    }
    assert!(lambda0 < 1.0, "expanding outside V: {lambda0}");
    assert!(lambda1 > 1.0, "volume expanding: {lambda1}");
    assert!(on_v <= 1.0 + 1e-12, "not too contracting on V: {on_v}");
}

#[test]
fn catalog_builds() {
    for spec in MapSpec::catalog() {
        let m = spec.build().unwrap();
        assert!(m.dim() >= 1);
        assert!(!m.params().is_empty());
    }
}

fn catalog_maps() -> Vec<std::sync::Arc<dyn MapSystem>> {
    MapSpec::catalog().iter().map(|s| s.build().unwrap()).collect()
}

proptest! {
    #[test]
    fn chart_closure(which in 0usize..3, seed in any::<u64>(), x in 0.0f64..1.0, y in 0.0f64..1.0, eps in 0.0f64..0.2) {
        let maps = catalog_maps();
        let m = &maps[which];
        let kernel = NoiseKernel::new(eps, m.dim()).unwrap();
        let r = sample_realization(kernel, seed, 0, 60);
        let coords = [x, y];
        let log = random_orbit(m.as_ref(), &r, &pt(m.as_ref(), &coords[..m.dim()]), 60).unwrap();
        for p in &log.points {
            for &c in p.coords() {
                prop_assert!((0.0..1.0).contains(&c));
            }
        }
    }

    #[test]
    fn viana_stays_in_its_cylinder(seed in any::<u64>(), s in 0.0f64..1.0, u in 0.0f64..1.0) {
        let v = Viana::new(16, 0.01, 0.05).unwrap();
        let Chart::Cylinder { lo, hi } = v.chart() else { unreachable!() };
        let r = sample_realization(NoiseKernel::new(0.05, 2).unwrap(), seed, 0, 100);
        let log = random_orbit(&v, &r, &pt(&v, &[s, lo + (hi - lo) * u]), 100).unwrap();
        for p in &log.points {
            prop_assert!((0.0..1.0).contains(&p.coords[0]));
            prop_assert!(p.coords[1] >= lo && p.coords[1] <= hi);
        }
    }

    #[test]
    fn noise_is_additive(which in 0usize..3, x in 0.0f64..1.0, y in 0.0f64..1.0, t0 in -0.1f64..0.1, t1 in -0.1f64..0.1) {
        let maps = catalog_maps();
        let m = &maps[which];
        let p = pt(m.as_ref(), &[x, y][..m.dim()]);
        let t = [t0, t1, 0.0, 0.0];
        let a = step(m.as_ref(), &t, &p).unwrap();
        let b = step(m.as_ref(), &[0.0; MAX_DIM], &p).unwrap();
        for axis in 0..m.dim() {
            let d = a.coords[axis] - b.coords[axis] - t[axis];
            prop_assert!((d - d.round()).abs() < 1e-14);
        }
    }

    #[test]
    fn jacobian_ignores_noise(which in 0usize..4, seed_a in any::<u64>(), seed_b in any::<u64>(), x in 0.0f64..1.0, y in 0.1f64..0.9) {
        // The first step of two orbits from the same point under different noise sees the
        // same point, hence bitwise identical derivative data.
        let maps = catalog_maps();
        let m = &maps[which];
        let coords = if m.name() == "viana" { vec![x, y] } else { vec![x, y][..m.dim()].to_vec() };
        let p = pt(m.as_ref(), &coords);
        let k = NoiseKernel::new(0.05, m.dim()).unwrap();
        let a = random_orbit(m.as_ref(), &sample_realization(k, seed_a, 0, 1), &p, 1).unwrap();
        let b = random_orbit(m.as_ref(), &sample_realization(k, seed_b, 0, 1), &p, 1).unwrap();
        prop_assert_eq!(a.log_inv_norm[0].to_bits(), b.log_inv_norm[0].to_bits());
        prop_assert_eq!(a.log_det[0].to_bits(), b.log_det[0].to_bits());
    }

    #[test]
    fn orbits_are_deterministic(which in 0usize..4, seed in any::<u64>(), x in 0.0f64..1.0) {
        let maps = catalog_maps();
        let m = &maps[which];
        let coords = [x, 0.3];
        let p = pt(m.as_ref(), &coords[..m.dim()]);
        let k = NoiseKernel::new(0.01, m.dim()).unwrap();
        let a = random_orbit(m.as_ref(), &sample_realization(k, seed, 0, 50), &p, 50).unwrap();
        let b = random_orbit(m.as_ref(), &sample_realization(k, seed, 0, 50), &p, 50).unwrap();
        prop_assert_eq!(a, b);
    }

    #[test]
    fn noise_norm_is_bounded(seed in any::<u64>(), eps in 0.0f64..0.5, dim in 1usize..4) {
        let k = NoiseKernel::new(eps, dim).unwrap();
        let r = sample_realization(k, seed, -5, 20);
        for t in &r.window {
            let n = t.iter().map(|v| v * v).sum::<f64>().sqrt();
            prop_assert!(n <= eps * (1.0 + 1e-12));
        }
    }
}
