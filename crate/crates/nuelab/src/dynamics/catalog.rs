//! The map catalog: doubling-type maps, the intermittent circle map, products of the two, the
//! Viana skew product, and the logistic check map used as a closed-form density oracle.

use std::f64::consts::PI;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::{wrap, Chart, DynamicsError, Jacobian, MapSystem, Result, ScalarMap, Vector, MAX_DIM};

/// `x ↦ kx mod 1`.
#[derive(Debug, Clone)]
pub struct Doubling {
    pub k: u32,
}

impl Doubling {
    pub fn new(k: u32) -> Result<Doubling> {
        if k < 2 {
            return Err(DynamicsError::InvalidParameters(format!("doubling-type map needs k >= 2, got {k}")));
        }
        Ok(Doubling { k })
    }
}

impl MapSystem for Doubling {
    fn name(&self) -> &str {
        "doubling"
    }
    fn chart(&self) -> Chart {
        Chart::Circle
    }
    fn raw(&self, x: &Vector) -> Vector {
        let mut v = [0.0; MAX_DIM];
        v[0] = self.k as f64 * x[0];
        v
    }
    fn jacobian(&self, _x: &Vector) -> Jacobian {
        Jacobian::scalar(self.k as f64)
    }
    fn params(&self) -> Vec<(String, f64)> {
        vec![("k".into(), self.k as f64)]
    }
    fn scalar(&self) -> Option<&dyn ScalarMap> {
        Some(self)
    }
}

impl ScalarMap for Doubling {
    fn derivative(&self, _x: f64) -> f64 {
        self.k as f64
    }
    fn preimages(&self, y: f64) -> Vec<f64> {
        let k = self.k as f64;
        let y = wrap(y);
        (0..self.k).map(|i| (y + i as f64) / k).collect()
    }
    fn lift(&self, x: f64) -> Option<f64> {
        Some(self.k as f64 * x)
    }
    fn lift_delta(&self, _c: f64, v: f64) -> f64 {
        self.k as f64 * v
    }
    fn lift_delta_inverse(&self, _c: f64, v: f64) -> f64 {
        v / self.k as f64
    }
    fn lift_delta_slice(&self, _c: f64, v: &mut [f64]) {
        let k = self.k as f64;
        for x in v.iter_mut() {
            *x *= k;
        }
    }
}

/// Manneville–Pomeau globalisation of the intermittent map: `x ↦ x + x^{1+α} mod 1`, a degree-2
/// circle map with a neutral fixed point at 0 and `φ' > 1` elsewhere.
#[derive(Debug, Clone)]
pub struct Intermittent {
    pub alpha: f64,
}

impl Intermittent {
    pub fn new(alpha: f64) -> Result<Intermittent> {
        if !(alpha > 0.0 && alpha < 1.0) {
            return Err(DynamicsError::InvalidParameters(format!("intermittent map needs 0 < alpha < 1, got {alpha}")));
        }
        Ok(Intermittent { alpha })
    }

    /// `g(u) = u + u^{1+α}` on `[0, 1]`.
    #[inline]
    pub fn g(&self, u: f64) -> f64 {
        u + u.powf(1.0 + self.alpha)
    }

    #[inline]
    pub fn g_prime(&self, u: f64) -> f64 {
        1.0 + (1.0 + self.alpha) * u.powf(self.alpha)
    }

    /// Solves `g(u) = z` for `z ∈ [0, 2]`.
    fn g_inverse(&self, z: f64) -> f64 {
        let (mut lo, mut hi) = (0.0f64, 1.0f64);
        // Start from the linear-regime guess and polish with safeguarded Newton.
        let mut u = (z / 2.0).clamp(0.0, 1.0);
        for _ in 0..100 {
            let r = self.g(u) - z;
            if r == 0.0 {
                return u;
            }
            if r > 0.0 {
                hi = u;
            } else {
                lo = u;
            }
            let mut next = u - r / self.g_prime(u);
            if !(next > lo && next < hi) {
                next = 0.5 * (lo + hi);
            }
            if (next - u).abs() <= 1e-17 * u.max(1e-300) || hi - lo < 1e-17 {
                return next;
            }
            u = next;
        }
        u
    }
}

impl MapSystem for Intermittent {
    fn name(&self) -> &str {
        "intermittent"
    }
    fn chart(&self) -> Chart {
        Chart::Circle
    }
    fn raw(&self, x: &Vector) -> Vector {
        let mut v = [0.0; MAX_DIM];
        v[0] = self.g(x[0]);
        v
    }
    fn jacobian(&self, x: &Vector) -> Jacobian {
        Jacobian::scalar(self.g_prime(x[0]))
    }
    fn params(&self) -> Vec<(String, f64)> {
        vec![("alpha".into(), self.alpha)]
    }
    fn scalar(&self) -> Option<&dyn ScalarMap> {
        Some(self)
    }
}

impl ScalarMap for Intermittent {
    fn derivative(&self, x: f64) -> f64 {
        self.g_prime(wrap(x))
    }
    fn preimages(&self, y: f64) -> Vec<f64> {
        let y = wrap(y);
        vec![self.g_inverse(y), self.g_inverse(y + 1.0)]
    }
    fn lift(&self, x: f64) -> Option<f64> {
        let n = x.floor();
        Some(2.0 * n + self.g(x - n))
    }
    fn lift_delta(&self, c: f64, v: f64) -> f64 {
        let n = c.floor();
        let u = c - n;
        let w = u + v;
        if (0.0..1.0).contains(&w) {
            // w^{1+α} − u^{1+α} without cancellation.
            let a = 1.0 + self.alpha;
            let pow_diff = if u > 0.0 { u.powf(a) * (a * (v / u).ln_1p()).exp_m1() } else { w.powf(a) };
            v + pow_diff
        } else {
            self.lift(c + v).unwrap() - self.lift(c).unwrap()
        }
    }
}

/// One factor of a product map.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Factor {
    Expanding(u32),
    Intermittent(f64),
}

/// `φ₁ × ⋯ × φ_d` on `T^d`: uniformly expanding factors followed by one intermittent factor.
#[derive(Debug, Clone)]
pub struct Product {
    factors: Vec<Factor>,
    intermittent: Vec<Option<Intermittent>>,
}

impl Product {
    pub fn new(factors: Vec<Factor>) -> Result<Product> {
        if factors.is_empty() || factors.len() > MAX_DIM {
            return Err(DynamicsError::InvalidParameters(format!("product needs 1..={MAX_DIM} factors")));
        }
        let mut intermittent = Vec::with_capacity(factors.len());
        for f in &factors {
            match *f {
                Factor::Expanding(k) => {
                    Doubling::new(k)?;
                    intermittent.push(None);
                }
                Factor::Intermittent(a) => intermittent.push(Some(Intermittent::new(a)?)),
            }
        }
        Ok(Product { factors, intermittent })
    }

    /// Expanding factors of the given degrees and an intermittent last factor.
    pub fn standard(expanding: &[u32], alpha: f64) -> Result<Product> {
        let mut f: Vec<Factor> = expanding.iter().map(|&k| Factor::Expanding(k)).collect();
        f.push(Factor::Intermittent(alpha));
        Product::new(f)
    }

    pub fn factors(&self) -> &[Factor] {
        &self.factors
    }

    fn factor_derivative(&self, i: usize, x: f64) -> f64 {
        match (&self.factors[i], &self.intermittent[i]) {
            (Factor::Expanding(k), _) => *k as f64,
            (_, Some(m)) => m.g_prime(x),
            _ => unreachable!(),
        }
    }
}

impl MapSystem for Product {
    fn name(&self) -> &str {
        "product"
    }
    fn chart(&self) -> Chart {
        Chart::Torus(self.factors.len())
    }
    fn raw(&self, x: &Vector) -> Vector {
        let mut v = [0.0; MAX_DIM];
        for (i, f) in self.factors.iter().enumerate() {
            v[i] = match (f, &self.intermittent[i]) {
                (Factor::Expanding(k), _) => *k as f64 * x[i],
                (_, Some(m)) => m.g(x[i]),
                _ => unreachable!(),
            };
        }
        v
    }
    fn jacobian(&self, x: &Vector) -> Jacobian {
        let d: Vec<f64> = (0..self.factors.len()).map(|i| self.factor_derivative(i, x[i])).collect();
        Jacobian::diagonal(&d)
    }
    fn params(&self) -> Vec<(String, f64)> {
        self.factors
            .iter()
            .enumerate()
            .map(|(i, f)| match f {
                Factor::Expanding(k) => (format!("factor{i}.k"), *k as f64),
                Factor::Intermittent(a) => (format!("factor{i}.alpha"), *a),
            })
            .collect()
    }
}

/// Misiurewicz parameter of `Q(x) = p − x²`: the critical value lands on the orientation
/// reversing fixed point after two steps, i.e. `Q²(0) + x*(p) = 0`.
pub fn misiurewicz_parameter() -> f64 {
    let g = |p: f64| {
        let fixed = (-1.0 + (1.0 + 4.0 * p).sqrt()) / 2.0;
        (p - p * p) + fixed
    };
    let (mut lo, mut hi) = (1.0f64, 2.0f64);
    debug_assert!(g(lo) > 0.0 && g(hi) < 0.0);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid == lo || mid == hi {
            break;
        }
        if g(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Viana skew product `(s, x) ↦ (ds mod 1, p₀ + α sin(2πs) − x²)` on `S¹ × I`.
#[derive(Debug, Clone)]
pub struct Viana {
    pub d: u32,
    pub alpha: f64,
    pub p0: f64,
    /// Width of the margin around the image range; admissible noise levels are `ε ≤ margin`.
    pub margin: f64,
    pub lo: f64,
    pub hi: f64,
}

impl Viana {
    pub fn new(d: u32, alpha: f64, margin: f64) -> Result<Viana> {
        if d < 2 || !(alpha >= 0.0) || !(margin > 0.0) {
            return Err(DynamicsError::InvalidParameters(format!("viana: d={d}, alpha={alpha}, margin={margin}")));
        }
        let p0 = misiurewicz_parameter();
        let hi = p0 + alpha + margin;
        let lo = (p0 - alpha) - hi * hi - margin;
        let v = Viana { d, alpha, p0, margin, lo, hi };
        v.verify_invariance(margin)?;
        Ok(v)
    }

    /// Checks that `I = [lo, hi]` is forward invariant under every `f_t` with `‖t‖ ≤ eps0`:
    /// analytically via the range of `q̂`, then on a dense sample grid.
    pub fn verify_invariance(&self, eps0: f64) -> Result<()> {
        let xmax = self.lo.abs().max(self.hi.abs());
        let top = self.p0 + self.alpha + eps0;
        let bottom = self.p0 - self.alpha - xmax * xmax - eps0;
        if top > self.hi || bottom < self.lo || self.lo <= -2.0 || self.hi >= 2.0 {
            return Err(DynamicsError::InvalidParameters(format!(
                "interval [{:.6}, {:.6}] is not invariant for eps0 = {eps0}",
                self.lo, self.hi
            )));
        }
        let n = 257;
        for i in 0..n {
            let s = i as f64 / (n - 1) as f64;
            for j in 0..n {
                let x = self.lo + (self.hi - self.lo) * j as f64 / (n - 1) as f64;
                let q = self.q(s, x);
                if q + eps0 > self.hi || q - eps0 < self.lo {
                    return Err(DynamicsError::DomainEscape { axis: 1, coord: q, lo: self.lo, hi: self.hi });
                }
            }
        }
        Ok(())
    }

    #[inline]
    pub fn q(&self, s: f64, x: f64) -> f64 {
        self.p0 + self.alpha * (2.0 * PI * s).sin() - x * x
    }
}

impl MapSystem for Viana {
    fn name(&self) -> &str {
        "viana"
    }
    fn chart(&self) -> Chart {
        Chart::Cylinder { lo: self.lo, hi: self.hi }
    }
    fn raw(&self, x: &Vector) -> Vector {
        let mut v = [0.0; MAX_DIM];
        v[0] = self.d as f64 * x[0];
        v[1] = self.q(x[0], x[1]);
        v
    }
    fn jacobian(&self, x: &Vector) -> Jacobian {
        let mut m = [[0.0; MAX_DIM]; MAX_DIM];
        m[0][0] = self.d as f64;
        m[1][0] = 2.0 * PI * self.alpha * (2.0 * PI * x[0]).cos();
        m[1][1] = -2.0 * x[1];
        Jacobian { dim: 2, m }
    }
    fn critical_distance(&self, x: &Vector) -> f64 {
        x[1].abs()
    }
    fn nearest_critical(&self, x: &Vector) -> Option<Vector> {
        Some([x[0], 0.0, 0.0, 0.0])
    }
    fn has_critical_set(&self) -> bool {
        true
    }
    fn params(&self) -> Vec<(String, f64)> {
        vec![
            ("d".into(), self.d as f64),
            ("alpha".into(), self.alpha),
            ("p0".into(), self.p0),
            ("margin".into(), self.margin),
            ("interval.lo".into(), self.lo),
            ("interval.hi".into(), self.hi),
        ]
    }
}

/// `x ↦ 4x(1 − x)` on `[0, 1]`, whose invariant density `1/(π√(x(1−x)))` is known in closed form.
#[derive(Debug, Clone, Default)]
pub struct Logistic;

impl MapSystem for Logistic {
    fn name(&self) -> &str {
        "logistic"
    }
    fn chart(&self) -> Chart {
        Chart::Interval { lo: 0.0, hi: 1.0 }
    }
    fn raw(&self, x: &Vector) -> Vector {
        let mut v = [0.0; MAX_DIM];
        v[0] = (4.0 * x[0] * (1.0 - x[0])).clamp(0.0, 1.0);
        v
    }
    fn jacobian(&self, x: &Vector) -> Jacobian {
        Jacobian::scalar(4.0 - 8.0 * x[0])
    }
    fn critical_distance(&self, x: &Vector) -> f64 {
        (x[0] - 0.5).abs()
    }
    fn nearest_critical(&self, _x: &Vector) -> Option<Vector> {
        Some([0.5, 0.0, 0.0, 0.0])
    }
    fn has_critical_set(&self) -> bool {
        true
    }
    fn params(&self) -> Vec<(String, f64)> {
        Vec::new()
    }
    fn scalar(&self) -> Option<&dyn ScalarMap> {
        Some(self)
    }
}

impl ScalarMap for Logistic {
    fn derivative(&self, x: f64) -> f64 {
        4.0 - 8.0 * x
    }
    fn preimages(&self, y: f64) -> Vec<f64> {
        if !(0.0..=1.0).contains(&y) {
            return Vec::new();
        }
        let r = (1.0 - y).sqrt();
        vec![(1.0 - r) / 2.0, (1.0 + r) / 2.0]
    }
}

fn default_k() -> u32 {
    2
}
fn default_intermittent_alpha() -> f64 {
    0.5
}
fn default_expanding() -> Vec<u32> {
    vec![4]
}
fn default_viana_d() -> u32 {
    16
}
fn default_viana_alpha() -> f64 {
    0.01
}
fn default_viana_margin() -> f64 {
    0.05
}

/// Serializable description of a catalog map.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "kebab-case", deny_unknown_fields)]
pub enum MapSpec {
    Doubling {
        #[serde(default = "default_k")]
        k: u32,
    },
    Intermittent {
        #[serde(default = "default_intermittent_alpha")]
        alpha: f64,
    },
    Product {
        #[serde(default = "default_expanding")]
        expanding: Vec<u32>,
        #[serde(default = "default_intermittent_alpha")]
        alpha: f64,
    },
    Viana {
        #[serde(default = "default_viana_d")]
        d: u32,
        #[serde(default = "default_viana_alpha")]
        alpha: f64,
        #[serde(default = "default_viana_margin")]
        margin: f64,
    },
    Logistic,
}

impl MapSpec {
    pub fn build(&self) -> Result<Arc<dyn MapSystem>> {
        Ok(match self {
            MapSpec::Doubling { k } => Arc::new(Doubling::new(*k)?),
            MapSpec::Intermittent { alpha } => Arc::new(Intermittent::new(*alpha)?),
            MapSpec::Product { expanding, alpha } => Arc::new(Product::standard(expanding, *alpha)?),
            MapSpec::Viana { d, alpha, margin } => Arc::new(Viana::new(*d, *alpha, *margin)?),
            MapSpec::Logistic => Arc::new(Logistic),
        })
    }

    /// The four catalog maps at their default parameters.
    pub fn catalog() -> Vec<MapSpec> {
        vec![
            MapSpec::Doubling { k: 2 },
            MapSpec::Intermittent { alpha: 0.5 },
            MapSpec::Product { expanding: vec![4], alpha: 0.5 },
            MapSpec::Viana { d: 16, alpha: 0.01, margin: 0.05 },
        ]
    }

    /// Largest admissible noise level, if the map imposes one.
    pub fn noise_margin(&self) -> Option<f64> {
        match self {
            MapSpec::Viana { margin, .. } => Some(*margin),
            _ => None,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn misiurewicz_parameter_solves_the_cubic() {
        // Eliminating the square root from Q²(0) = −x* leaves p(p³ − 2p² + 2p − 2) = 0;
        // the cubic has a single real root, found here by Newton from p = 1.5.
        let mut p = 1.5f64;
        for _ in 0..50 {
            p -= (p * p * p - 2.0 * p * p + 2.0 * p - 2.0) / (3.0 * p * p - 4.0 * p + 2.0);
        }
        assert!((misiurewicz_parameter() - p).abs() < 1e-14);
        assert!((p - 1.543_689_012_692_076).abs() < 1e-12);
    }

    #[test]
    fn intermittent_preimages_invert_the_map() {
        let m = Intermittent::new(0.5).unwrap();
        for &y in &[0.0, 1e-9, 0.3, 0.999] {
            for x in m.preimages(y) {
                let img = wrap(m.g(x));
                assert!(crate::dynamics::circle_dist(img, y) < 1e-14, "y={y} x={x}");
            }
        }
    }

    #[test]
    fn intermittent_lift_delta_matches_lift() {
        let m = Intermittent::new(0.5).unwrap();
        for &(c, v) in &[(0.3, 1e-6), (0.0, 1e-3), (0.9, 0.2), (0.2, -0.3), (1e-12, 1e-14)] {
            let exact = m.lift(c + v).unwrap() - m.lift(c).unwrap();
            assert!((m.lift_delta(c, v) - exact).abs() <= 1e-12 * (1.0 + exact.abs()));
            assert!((m.lift_delta_inverse(c, m.lift_delta(c, v)) - v).abs() <= 1e-12 * (1.0 + v.abs()));
        }
    }

    #[test]
    fn logistic_preimages() {
        let m = Logistic;
        for x in m.preimages(0.36) {
            assert!((4.0 * x * (1.0 - x) - 0.36).abs() < 1e-15);
        }
    }

    #[test]
    fn viana_interval_is_invariant_and_inside_minus_two_two() {
        let v = Viana::new(16, 0.01, 0.05).unwrap();
        assert!(v.lo > -2.0 && v.hi < 2.0);
        assert!(v.verify_invariance(0.05).is_ok());
        assert!(v.verify_invariance(0.2).is_err());
    }

    #[test]
    fn spec_round_trip() {
        let s: MapSpec = serde_json::from_str(r#"{"name":"product","expanding":[4],"alpha":0.5}"#).unwrap();
        assert_eq!(s, MapSpec::Product { expanding: vec![4], alpha: 0.5 });
        let v: MapSpec = serde_json::from_str(r#"{"name":"viana"}"#).unwrap();
        assert_eq!(v, MapSpec::Viana { d: 16, alpha: 0.01, margin: 0.05 });
    }
}
