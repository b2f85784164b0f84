use nuelab::dynamics::{
    random_orbit, sample_realization, Doubling, MapSpec, MapSystem, NoiseKernel, OrbitLog, Point, Product,
};
use nuelab::hyperbolic::{
    expansion_recurrence_times, fit_decay, frequency, hyperbolic_times_direct, hyperbolic_times_pliss,
    hyperbolic_times_pliss_unchecked, is_hyperbolic_time, pliss_times, pliss_times_unchecked, resolve_constants,
    tail_curve, DecayModel, HypParams, ResolveConfig, TailCurve, TailParams,
};
use proptest::prelude::*;

/// Brute force over all `(n, n_i)` pairs, sums recomputed from scratch.
fn pliss_oracle(a: &[f64]) -> Vec<usize> {
    (1..=a.len()).filter(|&ni| (1..=ni).all(|n| a[n - 1..ni].iter().sum::<f64>() >= 0.0)).collect()
}

fn doubling_orbit(n: usize, eps: f64, seed: u64, x: f64) -> OrbitLog {
    let m = Doubling::new(2).unwrap();
    let r = sample_realization(NoiseKernel::new(eps, 1).unwrap(), seed, 0, n);
    random_orbit(&m, &r, &Point::new(m.chart(), &[x]).unwrap(), n).unwrap()
}

#[test]
fn pliss_examples() {
    let a = [2.0, -1.0, 2.0, -1.0];
    assert_eq!(pliss_times(&a, 0.5, 2.0).unwrap(), pliss_oracle(&a));
    let ones = [1.0; 4];
    let t = pliss_times(&ones, 1.0, 1.0).unwrap();
    assert_eq!(t, vec![1, 2, 3, 4]);
}

#[test]
fn pliss_exhaustive_up_to_length_fourteen() {
    for n in 1..=14usize {
        for bits in 0u32..(1 << n) {
            let a: Vec<f64> = (0..n).map(|i| if bits >> i & 1 == 1 { 1.0 } else { -1.0 }).collect();
            assert_eq!(pliss_times_unchecked(&a), pliss_oracle(&a), "{a:?}");
        }
    }
}

#[test]
fn doubling_hyperbolic_times() {
    let orbit = doubling_orbit(200, 0.0, 0, 0.1234);
    let mut p = HypParams::expanding(2f64.ln(), 2f64.ln());
    p.lambda = 0.5;
    assert_eq!(hyperbolic_times_direct(&orbit, &p), (1..=200).collect::<Vec<_>>());
    p.lambda = 0.49;
    assert!(hyperbolic_times_direct(&orbit, &p).is_empty());
}

#[test]
fn constant_sequence_without_critical_set_is_all_pliss() {
    let orbit = doubling_orbit(100, 0.01, 1, 0.3);
    let p = HypParams::expanding(2f64.ln(), 2f64.ln());
    let ex = hyperbolic_times_pliss(&orbit, &p, false).unwrap();
    assert_eq!(ex.times, (1..=100).collect::<Vec<_>>());
    // Frequency at a0 = ½ log 2 against the constructive lower bound.
    let half = HypParams::expanding(0.5 * 2f64.ln(), 2f64.ln());
    let direct = hyperbolic_times_direct(&orbit, &half);
    let ex = hyperbolic_times_pliss(&orbit, &half, false).unwrap();
    assert!(frequency(&direct, 100).unwrap() >= ex.zeta);
    assert_eq!(frequency(&direct, 100).unwrap(), 1.0);
}

#[test]
fn expansion_times_on_the_doubling_map() {
    let orbit = doubling_orbit(300, 0.02, 5, 0.77);
    let (e, r) = expansion_recurrence_times(&orbit, 2f64.ln(), 0.1, 0.1);
    assert_eq!((e.value, e.censored), (1, false));
    assert_eq!((r.value, r.censored), (1, false));
    let (e, _) = expansion_recurrence_times(&orbit, 2f64.ln() + 1e-6, 0.1, 0.1);
    assert!(e.censored);
    let (e, _) = expansion_recurrence_times(&orbit.prefix(17), 0.8, 0.1, 0.1);
    assert!(e.censored && e.value == 18);
}

#[test]
fn orbit_trapped_near_the_neutral_circle_has_late_expansion_time() {
    let m = Product::standard(&[4], 0.5).unwrap();
    let r = sample_realization(NoiseKernel::dirac(2), 0, 0, 400);
    let orbit = random_orbit(&m, &r, &Point::new(m.chart(), &[0.3, 1e-4]).unwrap(), 400).unwrap();
    let a0 = 0.1;
    // Oracle: last n whose running average of log‖Df⁻¹‖ exceeds −a0.
    let mut s = 0.0;
    let mut last = 0;
    for (i, l) in orbit.log_inv_norm.iter().enumerate() {
        s += l;
        if s / (i + 1) as f64 > -a0 {
            last = i + 1;
        }
    }
    let (e, _) = expansion_recurrence_times(&orbit, a0, 1.0, 0.1);
    assert!(e.value > 50);
    assert_eq!(e.value, last + 1);
    assert!(!e.censored);
}

#[test]
fn tail_curve_for_the_doubling_map_vanishes() {
    let m = Doubling::new(2).unwrap();
    let k = NoiseKernel::new(0.01, 1).unwrap();
    let p = TailParams { a0: 0.5 * 2f64.ln(), b0: 0.01, delta: 0.1 };
    let grid: Vec<usize> = (1..=20).collect();
    let c = tail_curve(&m, k, p, 200, 3, 50, &grid, 4).unwrap();
    assert!(c.gamma_max.iter().all(|&g| g == 0.0));
    assert_eq!(c.censored_fraction, 0.0);
    assert_eq!(c.sample_count, 600);
}

#[test]
fn resolved_constants_respect_the_constraints() {
    let cfg = ResolveConfig { orbits: 64, horizon: 1000, grid: 128, ..Default::default() };
    let v = MapSpec::Viana { d: 16, alpha: 0.01, margin: 0.05 }.build().unwrap();
    let c = resolve_constants(v.as_ref(), NoiseKernel::new(0.01, 2).unwrap(), &cfg).unwrap();
    assert!(2.0 * c.b < 1f64.min(1.0 / c.beta));
    assert!((c.lambda - (-c.a0 / 4.0).exp()).abs() < 1e-15);
    assert!(c.alpha2 < c.zeta1 * c.b * c.a0 / 4.0);
    assert!(c.rho * c.alpha1 <= c.a0 / 2.0 + 1e-15);
    assert!(c.q >= c.rho * c.r1.ln().abs());
}

#[test]
fn fits_on_synthetic_curves() {
    let n: Vec<usize> = (1..=50).collect();
    let g: Vec<f64> = n.iter().map(|&k| 0.8f64.powi(k as i32)).collect();
    let f = fit_decay(&n, &g, DecayModel::Exponential).unwrap();
    assert!((f.rate - 0.8).abs() < 1e-12 && f.r2 > 0.999_999);
}

fn catalog() -> Vec<std::sync::Arc<dyn MapSystem>> {
    MapSpec::catalog().iter().map(|s| s.build().unwrap()).collect()
}

fn params_for(m: &dyn MapSystem) -> HypParams {
    if m.has_critical_set() {
        // Values of the order produced by the constant resolver for the default Viana map.
        HypParams { lambda: (-0.17f64 / 4.0).exp(), delta: 5e-5, b: 0.25, a0: 0.17, b0: 0.005, q: 3.2, rho: 1.0 }
    } else {
        let q = (0..1000)
            .map(|i| {
                let x = [(i as f64 + 0.5) / 1000.0, 0.37, 0.0, 0.0];
                -m.jacobian(&x).inv_norm().ln()
            })
            .fold(0.0, f64::max);
        HypParams::expanding(0.25, q)
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn pliss_is_sound_complete_and_dense(a in prop::collection::vec(-3.0f64..2.0, 1..60), c in 0.05f64..1.0) {
        let big_a = a.iter().copied().fold(c, f64::max);
        let got = pliss_times_unchecked(&a);
        prop_assert_eq!(&got, &pliss_oracle(&a));
        if let Ok(t) = pliss_times(&a, c, big_a) {
            prop_assert!(t.len() as f64 >= c / big_a * a.len() as f64 - 1.0);
        }
    }

    #[test]
    fn direct_times_match_the_definition(which in 0usize..4, seed in any::<u64>(), x in 0.0f64..1.0, eps in 0.0f64..0.02) {
        let maps = catalog();
        let m = maps[which].as_ref();
        let coords = [x, 0.3];
        let x0 = Point::new(m.chart(), &coords[..m.dim()]).unwrap();
        let r = sample_realization(NoiseKernel::new(eps, m.dim()).unwrap(), seed, 0, 150);
        let orbit = random_orbit(m, &r, &x0, 150).unwrap();
        let p = params_for(m);
        let direct = hyperbolic_times_direct(&orbit, &p);
        let literal: Vec<usize> = (1..=150).filter(|&n| is_hyperbolic_time(&orbit, n, &p)).collect();
        prop_assert_eq!(&direct, &literal);

        // Constructive ⊆ direct, and the shift property.
        let ex = hyperbolic_times_pliss_unchecked(&orbit, &p, m.has_critical_set());
        for n in &ex.times {
            prop_assert!(direct.binary_search(n).is_ok());
        }
        for &n in &direct {
            for j in 1..n {
                prop_assert!(is_hyperbolic_time(&orbit.suffix(j), n - j, &p));
            }
        }
    }

    #[test]
    fn tail_curves_are_monotone_and_grow_with_the_horizon(seed in any::<u64>(), a0 in 0.2f64..0.6) {
        let m = Product::standard(&[4], 0.5).unwrap();
        let k = NoiseKernel::new(1e-3, 2).unwrap();
        let p = TailParams { a0, b0: 0.01, delta: 0.1 };
        let grid: Vec<usize> = (1..=40).collect();
        let short = tail_curve(&m, k, p, 40, 2, 40, &grid, seed).unwrap();
        let long = tail_curve(&m, k, p, 40, 2, 120, &grid, seed).unwrap();
        for c in [&short, &long] {
            for w in c.gamma_mean.windows(2) {
                prop_assert!(w[1] <= w[0]);
            }
            prop_assert!(c.gamma_max.iter().all(|&g| (0.0..=1.0).contains(&g)));
        }
        // A longer horizon can only reveal later failures on the common grid.
        for (s, l) in short.per_omega.iter().flatten().zip(long.per_omega.iter().flatten()) {
            prop_assert!(l >= s);
        }
    }

    #[test]
    fn tail_summary_is_order_independent(times in prop::collection::vec(prop::collection::vec(1usize..50, 1..30), 1..6)) {
        let grid: Vec<usize> = (1..=50).collect();
        let a = TailCurve::from_times(&times, 0, grid.clone());
        let mut rev = times.clone();
        rev.reverse();
        for t in rev.iter_mut() {
            t.reverse();
        }
        let b = TailCurve::from_times(&rev, 0, grid);
        prop_assert_eq!(a.gamma_max, b.gamma_max);
        prop_assert_eq!(a.gamma_p95, b.gamma_p95);
        for (x, y) in a.gamma_mean.iter().zip(&b.gamma_mean) {
            prop_assert!((x - y).abs() < 1e-15);
        }
    }
}
