use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::constants::InducingConstants;
use super::window::{Geometry, Oracle, Outcome, QueryResult};
use super::{scalar_of, IntervalSet, InducingError, Result};
use crate::dynamics::{wrap, MapSystem, NoiseKernel, Realization};
use crate::hyperbolic::HypParams;
use crate::rng;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PartitionConfig {
    pub constants: InducingConstants,
    pub n_max: u32,
    pub eps_geom: f64,
    /// Stratified query points in `Δ₀`.
    pub queries: usize,
    pub seed: u64,
}

impl PartitionConfig {
    pub fn new(constants: InducingConstants, n_max: u32, queries: usize, seed: u64) -> PartitionConfig {
        PartitionConfig { constants, n_max, eps_geom: 1e-9, queries, seed }
    }

    /// Checks the constraints the construction relies on.
    pub fn validate(&self) -> Result<()> {
        let c = &self.constants;
        let fail = |m: String| Err(InducingError::ConstraintViolation(m));
        if !(c.delta0 > 0.0 && c.delta1 > 0.0 && c.alpha > 0.0 && c.lambda > 0.0 && c.lambda < 1.0) {
            return fail("δ₀, δ₁, α must be positive and 0 < λ < 1".into());
        }
        if 2.0 * c.delta0.sqrt() > c.delta1 / 4.0 {
            return fail(format!("2√δ₀ = {:.3e} exceeds δ₁/4 = {:.3e}", 2.0 * c.delta0.sqrt(), c.delta1 / 4.0));
        }
        if c.alpha >= c.delta0 {
            return fail(format!("α = {:.3e} is not below δ₀ = {:.3e}", c.alpha, c.delta0));
        }
        if c.alpha >= c.alpha_limit() {
            return fail(format!("α = {:.3e} violates α < K₀⁻¹λ^(N₀/2)δ₀(λ^(−1/2)−1) = {:.3e}", c.alpha, c.alpha_limit()));
        }
        if 5.0 * c.delta0 * c.k0.powi(c.n0 as i32) >= c.delta1 / 4.0 {
            return fail("5δ₀K₀^N₀ < δ₁/4 fails".into());
        }
        let n = (c.n0 + c.n_alpha) as f64;
        if (c.r0 as f64) <= (2.0 * (n + 1.0)).max(12.0 / c.zeta) {
            return fail(format!("R₀ = {} is not above max(2(N+1), 12/ζ)", c.r0));
        }
        if self.n_max <= c.r0 {
            return fail(format!("n_max = {} must exceed R₀ = {}", self.n_max, c.r0));
        }
        if self.queries == 0 || !(self.eps_geom > 0.0) {
            return fail("queries and ε_geom must be positive".into());
        }
        Ok(())
    }

    fn geometry(&self) -> Geometry {
        let c = &self.constants;
        Geometry {
            p: c.p,
            delta0: c.delta0,
            delta1: c.delta1,
            alpha: c.alpha,
            lambda: c.lambda,
            r0: c.r0,
            eps_geom: self.eps_geom,
        }
    }
}

/// An element of the induced partition, as arcs `(a, b)` of the circle with `a ∈ [0, 1)` and
/// `b = a + length`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PartitionElement {
    pub core: (f64, f64),
    pub collar1: Option<(f64, f64)>,
    pub collar2: Option<(f64, f64)>,
    pub return_time: u32,
    /// Query points found in the core.
    pub hits: u32,
    pub markov_error: f64,
    pub monotone: bool,
    pub kappa: f64,
    pub distortion: f64,
}

/// Per-query summary, kept for induced transfer operators and tower projection.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuerySample {
    pub index: u64,
    pub x: f64,
    pub return_time: Option<u32>,
    pub image: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct InducedMap {
    pub config: PartitionConfig,
    pub map: String,
    pub epsilon: f64,
    pub realization_seed: u64,
    pub realization_shift: i64,
    /// `Δ₀ = B(p, δ₀)` as an arc.
    pub base: (f64, f64),
    pub elements: Vec<PartitionElement>,
    pub returned: usize,
    pub open: usize,
    pub unresolved: usize,
    /// Estimated `m(Λ^{n_max})` (non-returned fraction of the stratified queries times `m(Δ₀)`).
    pub residual_mass: f64,
    /// `#{queries with R = n}` for `n = 0..=n_max`.
    pub return_histogram: Vec<u64>,
    pub collar_violations: u64,
    pub carvings: u64,
    /// Rings on each side of a core, and the merged sliver width (image frame).
    pub rings: usize,
    pub sliver: f64,
    pub max_segments: usize,
    /// Elements whose pullback underflowed (too short to represent).
    pub underflowed: usize,
    #[serde(skip)]
    pub samples: Vec<QuerySample>,
    /// First noise coordinate `ω_0, …, ω_{n_max−1}`.
    #[serde(skip)]
    pub noise: Vec<f64>,
}

impl InducedMap {
    pub fn base_measure(&self) -> f64 {
        2.0 * self.config.constants.delta0
    }

    /// Total length of the distinct cores found.
    pub fn core_mass(&self) -> f64 {
        self.elements.iter().map(|e| e.core.1 - e.core.0).sum()
    }

    /// Cores as one interval set (with tolerance 0, so disjointness is exact).
    pub fn cores(&self) -> IntervalSet {
        let mut set = IntervalSet::empty(0.0, true);
        for e in &self.elements {
            set = set.union(&IntervalSet::interval(e.core.0, e.core.1, 0.0, true));
        }
        set
    }

    /// Reference orbit `c_0 … c_len` of a query.
    pub fn orbit(&self, map: &dyn MapSystem, sample: &QuerySample, len: usize) -> Result<Vec<f64>> {
        let oracle = self.oracle(map)?;
        Ok(oracle.reference_orbit(sample.x, sample.index, len.min(self.noise.len())))
    }

    fn oracle<'a>(&'a self, map: &'a dyn MapSystem) -> Result<Oracle<'a>> {
        let scalar = scalar_of(map)?;
        let c = &self.config.constants;
        let hyp = HypParams { lambda: c.lambda, delta: c.delta, b: c.b, a0: 0.0, b0: 0.0, q: 0.0, rho: 0.0 };
        Ok(Oracle::new(
            map,
            scalar,
            hyp,
            self.config.geometry(),
            &self.noise,
            self.config.n_max,
            dither_seed(self.config.seed),
        ))
    }
}

fn dither_seed(seed: u64) -> u64 {
    rng::derive_seed(seed, 0xd1)
}

/// Stratified query points `x_i = p − δ₀ + 2δ₀(i + U_i)/Q`.
pub fn query_points(p: f64, delta0: f64, count: usize, seed: u64) -> Vec<f64> {
    (0..count)
        .map(|i| {
            let u: f64 = rng::stream(seed, rng::domain::QUERY, i as u64).random();
            wrap(p - delta0 + 2.0 * delta0 * (i as f64 + u) / count as f64)
        })
        .collect()
}

fn noise_of(realization: &Realization, n: usize) -> Vec<f64> {
    let mut r = realization.clone();
    r.extend_to(n as i64);
    (0..n as i64).map(|j| r.get(j).expect("extended window")[0]).collect()
}

fn run_queries(oracle: &Oracle<'_>, xs: &[f64]) -> Vec<QueryResult> {
    xs.par_iter().enumerate().map(|(i, &x)| oracle.query(x, i as u64)).collect()
}

/// Runs the inductive partition algorithm up to `n_max` on a stratified sample of `Δ₀` and
/// collects the distinct elements met by the queries.
pub fn build_partition(map: &dyn MapSystem, realization: &Realization, cfg: &PartitionConfig) -> Result<InducedMap> {
    cfg.validate()?;
    let scalar = scalar_of(map)?;
    let c = &cfg.constants;
    let noise = noise_of(realization, cfg.n_max as usize);
    let hyp = HypParams { lambda: c.lambda, delta: c.delta, b: c.b, a0: 0.0, b0: 0.0, q: 0.0, rho: 0.0 };
    let geom = cfg.geometry();
    let oracle = Oracle::new(map, scalar, hyp, geom, &noise, cfg.n_max, dither_seed(cfg.seed));
    let xs = query_points(c.p, c.delta0, cfg.queries, cfg.seed);
    let results = run_queries(&oracle, &xs);
    let (rings, sliver) = geom.rings();

    let mut hist = vec![0u64; cfg.n_max as usize + 1];
    let mut raw = Vec::new();
    let mut samples = Vec::with_capacity(results.len());
    let (mut open, mut unresolved, mut underflowed) = (0, 0, 0);
    let (mut violations, mut carvings, mut max_segments) = (0u64, 0u64, 0usize);
    for (i, q) in results.iter().enumerate() {
        violations += q.collar_violations as u64;
        carvings += q.carvings as u64;
        max_segments = max_segments.max(q.max_segments);
        let mut sample = QuerySample { index: i as u64, x: q.x, return_time: None, image: None };
        match &q.outcome {
            Outcome::Returned(r) => {
                hist[r.time as usize] += 1;
                sample.return_time = Some(r.time);
                sample.image = Some(r.image);
                let abs = |o: Option<(f64, f64)>| o.map(|(lo, hi)| (wrap(q.x + lo), wrap(q.x + lo) + (hi - lo)));
                match abs(r.core) {
                    Some(core) => raw.push(PartitionElement {
                        core,
                        collar1: abs(r.collar1),
                        collar2: abs(r.collar2),
                        return_time: r.time,
                        hits: 1,
                        markov_error: r.markov_error,
                        monotone: r.monotone,
                        kappa: r.kappa,
                        distortion: r.distortion,
                    }),
                    None => underflowed += 1,
                }
            }
            Outcome::Open => open += 1,
            Outcome::Unresolved(_) => unresolved += 1,
        }
        samples.push(sample);
    }
    // Queries in the same element share its core (up to rounding of x + offset).
    raw.sort_by(|a, b| a.core.0.total_cmp(&b.core.0));
    let mut elements: Vec<PartitionElement> = Vec::new();
    for e in raw {
        if let Some(last) = elements.last_mut() {
            let mid = 0.5 * (e.core.0 + e.core.1);
            if last.return_time == e.return_time && mid < last.core.1 && mid > last.core.0 {
                last.hits += 1;
                last.markov_error = last.markov_error.max(e.markov_error);
                last.monotone &= e.monotone;
                last.kappa = last.kappa.max(e.kappa);
                last.distortion = last.distortion.max(e.distortion);
                continue;
            }
        }
        elements.push(e);
    }
    let returned = results.len() - open - unresolved;
    let m = 2.0 * c.delta0;
    Ok(InducedMap {
        config: *cfg,
        map: map.name().to_string(),
        epsilon: realization.kernel.epsilon,
        realization_seed: realization.seed,
        realization_shift: realization.shift,
        base: (wrap(c.p - c.delta0), wrap(c.p - c.delta0) + m),
        elements,
        returned,
        open,
        unresolved,
        residual_mass: m * (open + unresolved) as f64 / cfg.queries as f64,
        return_histogram: hist,
        collar_violations: violations,
        carvings,
        rings: rings.len() - 1,
        sliver,
        max_segments,
        underflowed,
        samples,
        noise,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorstCase {
    pub return_time: u32,
    pub core: (f64, f64),
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GibbsMarkovReport {
    pub elements: usize,
    pub markov_ok: bool,
    /// Largest endpoint error of `F(∂U⁰)` against `∂Δ₀`.
    pub markov_error: f64,
    pub kappa_hat: f64,
    pub kappa_bound: f64,
    pub distortion_hat: f64,
    pub distortion_bound: f64,
    pub disjoint: bool,
    pub worst_markov: Option<WorstCase>,
    pub worst_kappa: Option<WorstCase>,
    pub worst_distortion: Option<WorstCase>,
    /// Elements failing some check.
    pub offending: Vec<WorstCase>,
}

impl GibbsMarkovReport {
    pub fn passed(&self) -> bool {
        self.markov_ok && self.disjoint && self.kappa_hat <= self.kappa_bound && self.kappa_bound < 1.0
            && self.distortion_hat <= self.distortion_bound
    }
}

/// Checks the Markov, expansion and distortion properties of every element found.
pub fn verify_gibbs_markov(induced: &InducedMap) -> GibbsMarkovReport {
    let c = &induced.config.constants;
    let tol = induced.config.eps_geom;
    let worst = |f: &dyn Fn(&PartitionElement) -> f64| {
        induced
            .elements
            .iter()
            .map(|e| WorstCase { return_time: e.return_time, core: e.core, value: f(e) })
            .max_by(|a, b| a.value.total_cmp(&b.value))
    };
    let worst_markov = worst(&|e| e.markov_error);
    let worst_kappa = worst(&|e| e.kappa);
    let worst_distortion = worst(&|e| e.distortion);
    let kappa_bound = c.kappa_bound();
    let distortion_bound = c.distortion_bound();
    let offending: Vec<WorstCase> = induced
        .elements
        .iter()
        .filter(|e| {
            e.markov_error > tol || !e.monotone || e.kappa > kappa_bound || e.distortion > distortion_bound
        })
        .map(|e| WorstCase { return_time: e.return_time, core: e.core, value: e.markov_error })
        .collect();
    let cores = induced.cores();
    let total: f64 = induced.core_mass();
    GibbsMarkovReport {
        elements: induced.elements.len(),
        markov_ok: induced.elements.iter().all(|e| e.markov_error <= tol && e.monotone),
        markov_error: worst_markov.as_ref().map_or(0.0, |w| w.value),
        kappa_hat: worst_kappa.as_ref().map_or(0.0, |w| w.value),
        kappa_bound,
        distortion_hat: worst_distortion.as_ref().map_or(0.0, |w| w.value),
        distortion_bound,
        disjoint: (cores.measure() - total).abs() <= 1e-12 * total.max(1e-300) + f64::EPSILON * total,
        worst_markov,
        worst_kappa,
        worst_distortion,
        offending,
    }
}

/// Tail of the return time: `m{R > n}` for `n = 0..=n_max`, where non-returned queries count in
/// every term.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReturnTail {
    pub n: Vec<u32>,
    pub mass_gt_n: Vec<f64>,
}

impl ReturnTail {
    pub fn to_csv(&self) -> String {
        let mut s = String::from("n,mass_gt_n\n");
        for (n, m) in self.n.iter().zip(&self.mass_gt_n) {
            s.push_str(&format!("{n},{m:e}\n"));
        }
        s
    }
}

pub fn return_time_tail(induced: &InducedMap) -> ReturnTail {
    let m = induced.base_measure();
    let q = induced.config.queries as f64;
    let mut left = induced.config.queries as u64;
    let mut n = Vec::new();
    let mut mass = Vec::new();
    for (k, &h) in induced.return_histogram.iter().enumerate() {
        left -= h;
        n.push(k as u32);
        mass.push(m * left as f64 / q);
    }
    ReturnTail { n, mass_gt_n: mass }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UniformityReport {
    /// `max_{ω,τ} m({R_{σ^{−j}ω} = j} Δ {R_{σ^{−j}τ} = j})` for each `j`.
    pub per_j: Vec<(u32, f64)>,
    pub max: f64,
}

/// Symmetric differences of the sets `{R_{σ^{−j}ω} = j}` over sampled realizations, estimated
/// on common stratified query points (each mismatch weighs `m(Δ₀)/Q`).
pub fn uniformity_probe(
    map: &dyn MapSystem,
    kernel: NoiseKernel,
    cfg: &PartitionConfig,
    n: u32,
    realizations: usize,
    seed: u64,
) -> Result<UniformityReport> {
    let scalar = scalar_of(map)?;
    let c = &cfg.constants;
    let hyp = HypParams { lambda: c.lambda, delta: c.delta, b: c.b, a0: 0.0, b0: 0.0, q: 0.0, rho: 0.0 };
    let xs = query_points(c.p, c.delta0, cfg.queries, cfg.seed);
    let m = 2.0 * c.delta0;
    let mut per_j = Vec::new();
    for j in (c.r0 + 1)..=n {
        // Returns at time j of every sampled σ^{−j}ω.
        let sets: Vec<Vec<bool>> = (0..realizations)
            .map(|k| {
                let omega_seed = rng::derive_seed(seed, k as u64);
                let noise: Vec<f64> =
                    (0..j as i64).map(|i| Realization::draw(&kernel, omega_seed, i - j as i64)[0]).collect();
                let oracle = Oracle::new(map, scalar, hyp, cfg.geometry(), &noise, j, dither_seed(cfg.seed));
                run_queries(&oracle, &xs)
                    .into_iter()
                    .map(|q| matches!(q.outcome, Outcome::Returned(ref r) if r.time == j))
                    .collect()
            })
            .collect();
        let mut worst = 0.0f64;
        for a in 0..sets.len() {
            for b in a + 1..sets.len() {
                let mismatches = sets[a].iter().zip(&sets[b]).filter(|(x, y)| x != y).count();
                worst = worst.max(m * mismatches as f64 / cfg.queries as f64);
            }
        }
        per_j.push((j, worst));
    }
    let max = per_j.iter().map(|&(_, v)| v).fold(0.0, f64::max);
    Ok(UniformityReport { per_j, max })
}
