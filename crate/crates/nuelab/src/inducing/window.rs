//! Pointwise evaluation of the inductive partition.
//!
//! The partition algorithm is run in a window of lifted offsets around the forward orbit of a
//! single query point `x ∈ Δ₀`. Offsets `v` stand for the points `c_n + v`, where `c_n` is the
//! reference orbit of `x`; they are transported by `v ↦ F(c_n + v) − F(c_n)`, in which the
//! additive noise cancels. The window is cropped to the hyperbolic-ball radius and shrunk after
//! each carving step by the reach of the carving rule, so every label left inside it is exactly
//! the label the global construction would assign. Elements at large return times are far
//! shorter than any geometric tolerance, which is why the construction is evaluated per query
//! instead of materializing the partition.

use rand::Rng;

use crate::dynamics::{wrap, MapSystem, ScalarMap};
use crate::hyperbolic::{HypParams, HypTracker};
use crate::rng;

/// Dither amplitude of the reference orbit: keeps finite-precision orbits of expanding maps from
/// collapsing onto a periodic orbit of the floating-point grid.
pub const DITHER: f64 = 1.0 / (1u64 << 50) as f64;

/// Reduction into `[−1/2, 1/2)`.
#[inline]
pub fn wrap_signed(x: f64) -> f64 {
    let r = x - x.round();
    if r >= 0.5 {
        r - 1.0
    } else {
        r
    }
}

/// Geometry of the construction, all lengths in chart units.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Geometry {
    pub p: f64,
    pub delta0: f64,
    pub delta1: f64,
    pub alpha: f64,
    pub lambda: f64,
    pub r0: u32,
    pub eps_geom: f64,
}

impl Geometry {
    pub fn r3(&self) -> f64 {
        2.0 * self.delta0.sqrt()
    }

    /// Ring radii `d_s = δ₀(1 + λ^{s/2})`, `s = 0..=s_max`, with `d_0 = 2δ₀` and `d_{s_max}`
    /// replaced by `δ₀` (the sliver below the geometric tolerance is merged into the last ring).
    pub fn rings(&self) -> (Vec<f64>, f64) {
        let d0 = self.delta0;
        let mut radii = vec![2.0 * d0];
        let mut s = 1;
        loop {
            let d = d0 * (1.0 + self.lambda.powf(s as f64 / 2.0));
            let next = d0 * (1.0 + self.lambda.powf((s + 1) as f64 / 2.0));
            if d - next < self.eps_geom || s > 100_000 {
                radii.push(d0);
                return (radii, d - d0);
            }
            radii.push(d);
            s += 1;
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Label {
    /// Not in `Λ`: outside `Δ₀` at time 0, or already returned.
    Out,
    /// In `Λ` with wait function `t^n = e − n` while `n < e`, and `t^n = 0` (the set `A`) after.
    Wait(u32),
}

impl Label {
    #[inline]
    fn at(self, n: u32) -> Label {
        match self {
            Label::Wait(e) if e <= n => Label::Wait(0),
            l => l,
        }
    }
}

/// Labelled partition of `[cuts[0], cuts[last]]` into `labels.len()` consecutive segments.
#[derive(Debug, Clone)]
struct Window {
    cuts: Vec<f64>,
    labels: Vec<Label>,
}

impl Window {
    fn lo(&self) -> f64 {
        self.cuts[0]
    }

    fn hi(&self) -> f64 {
        *self.cuts.last().unwrap()
    }

    fn crop(&mut self, lo: f64, hi: f64) {
        let start = self.cuts.partition_point(|&c| c <= lo).saturating_sub(1);
        let end = self.cuts.partition_point(|&c| c < hi).max(start + 1).min(self.cuts.len() - 1);
        self.cuts.truncate(end + 1);
        self.labels.truncate(end);
        self.cuts.drain(..start);
        self.labels.drain(..start);
        let n = self.cuts.len();
        self.cuts[0] = self.cuts[0].max(lo);
        self.cuts[n - 1] = self.cuts[n - 1].min(hi);
    }

    /// Normalizes expired waits to `A` and merges equal neighbours, in place.
    fn merge(&mut self, n: u32) {
        let len = self.labels.len();
        let mut k = 0;
        for i in 0..len {
            let l = self.labels[i].at(n);
            let b = self.cuts[i + 1];
            if b <= self.cuts[k] {
                continue;
            }
            if k > 0 && self.labels[k - 1] == l {
                self.cuts[k] = b;
            } else {
                self.labels[k] = l;
                k += 1;
                self.cuts[k] = b;
            }
        }
        if k == 0 {
            self.labels[0] = Label::Out;
            self.cuts[1] = self.cuts[0];
            k = 1;
        }
        self.labels.truncate(k);
        self.cuts.truncate(k + 1);
    }

    /// Indices of the segments meeting `[a, b]`.
    fn span(&self, a: f64, b: f64) -> std::ops::Range<usize> {
        let first = self.cuts.partition_point(|&c| c <= a).saturating_sub(1);
        let last = self.cuts.partition_point(|&c| c < b).min(self.labels.len());
        first..last.max(first)
    }

    /// Replaces `[a, b]` by the given consecutive segments (boundaries `new_cuts`, one more than
    /// `new_labels`, spanning exactly `[a, b]`).
    fn splice(&mut self, new_cuts: &[f64], new_labels: &[Label]) {
        let (a, b) = (new_cuts[0], *new_cuts.last().unwrap());
        let r = self.span(a, b);
        let keep_left = self.cuts[r.start] < a;
        let keep_right = self.cuts[r.end] > b;
        let (left, right) = (self.labels[r.start], self.labels[r.end - 1]);
        let labels = keep_left.then_some(left).into_iter().chain(new_labels.iter().copied()).chain(keep_right.then_some(right));
        self.labels.splice(r.start..r.end, labels);
        let inner = &new_cuts[1..new_cuts.len() - 1];
        let cuts = keep_left.then_some(a).into_iter().chain(inner.iter().copied()).chain(keep_right.then_some(b));
        self.cuts.splice(r.start + 1..r.end, cuts);
    }
}

/// A query point that returned to `Δ₀`.
#[derive(Debug, Clone, PartialEq)]
pub struct Return {
    pub time: u32,
    /// `F(x) = f_ω^R(x)`.
    pub image: f64,
    /// Offset of `p` from `F(x)`, i.e. the centre of `Δ₀` in the image frame.
    pub p_offset: f64,
    /// Core `U⁰` and collars `U¹`, `U²` as offsets from `x`; `None` when the pullback underflows.
    pub core: Option<(f64, f64)>,
    pub collar1: Option<(f64, f64)>,
    pub collar2: Option<(f64, f64)>,
    /// Largest error of the core endpoints pushed forward again, against `∂Δ₀`.
    pub markov_error: f64,
    /// Whether the pulled-back endpoints are ordered like their images (monotone branch).
    pub monotone: bool,
    /// `max ‖DF⁻¹‖` over the sampled core points.
    pub kappa: f64,
    /// `max |log|DF(y)| − log|DF(z)|| / |F(y) − F(z)|` over sampled core pairs.
    pub distortion: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Outcome {
    Returned(Return),
    /// No return up to the horizon.
    Open,
    /// The window shrank below the reach of the carving rule at this step.
    Unresolved(u32),
}

#[derive(Debug, Clone, PartialEq)]
pub struct QueryResult {
    pub x: f64,
    pub outcome: Outcome,
    /// Accepted carvings whose first collar met `{t^{n−1} > 1}`.
    pub collar_violations: u32,
    pub carvings: u32,
    pub max_segments: usize,
}

/// Inputs shared by every query of one partition.
pub struct Oracle<'a> {
    pub map: &'a dyn MapSystem,
    pub scalar: &'a dyn ScalarMap,
    pub hyp: HypParams,
    pub geom: Geometry,
    /// First coordinate of `ω_0, ω_1, …` (at least `n_max` entries).
    pub noise: &'a [f64],
    pub n_max: u32,
    /// Seed of the dither streams (indexed by query).
    pub dither_seed: u64,
    pub distortion_samples: usize,
    radii: Vec<f64>,
}

impl<'a> Oracle<'a> {
    pub fn new(
        map: &'a dyn MapSystem,
        scalar: &'a dyn ScalarMap,
        hyp: HypParams,
        geom: Geometry,
        noise: &'a [f64],
        n_max: u32,
        dither_seed: u64,
    ) -> Oracle<'a> {
        let (radii, _) = geom.rings();
        Oracle { map, scalar, hyp, geom, noise, n_max, dither_seed, distortion_samples: 5, radii }
    }

    /// Number of rings on each side of a core.
    pub fn ring_count(&self) -> usize {
        self.radii.len() - 1
    }

    /// Dithered reference orbit `c_0 = x, …, c_len` of query `index`.
    pub fn reference_orbit(&self, x: f64, index: u64, len: usize) -> Vec<f64> {
        let mut r = rng::stream(self.dither_seed, rng::domain::DITHER, index);
        let mut c = Vec::with_capacity(len + 1);
        c.push(x);
        for j in 0..len {
            let d: f64 = r.random_range(-DITHER..DITHER);
            let prev = c[j];
            c.push(wrap(self.map.raw(&[prev, 0.0, 0.0, 0.0])[0] + self.noise[j] + d));
        }
        c
    }

    pub fn query(&self, x: f64, index: u64) -> QueryResult {
        let g = &self.geom;
        let n_max = self.n_max.min(self.noise.len() as u32);
        let orbit = self.reference_orbit(x, index, n_max as usize);
        let r_star = g.delta1;
        let r3 = g.r3();
        let reach = 2.0 * r3 + g.alpha;
        let shrink = g.alpha + 2.0 * r3;

        let vp = wrap_signed(g.p - x);
        let mut w = Window { cuts: vec![-r_star, r_star], labels: vec![Label::Out] };
        w.splice(&[vp - g.delta0, vp + g.delta0], &[Label::Wait(0)]);
        w.merge(0);

        let mut tracker = HypTracker::new(&self.hyp);
        let mut result = QueryResult { x, outcome: Outcome::Open, collar_violations: 0, carvings: 0, max_segments: 0 };
        for n in 1..=n_max {
            let prev = orbit[n as usize - 1];
            self.scalar.lift_delta_slice(prev, &mut w.cuts);
            w.crop(-r_star, r_star);
            let dx = self.scalar.derivative(prev).abs();
            let hyp = tracker.push(-dx.ln(), self.map.critical_distance(&[prev, 0.0, 0.0, 0.0]));
            if n > g.r0 && hyp {
                let c = orbit[n as usize];
                let v0 = wrap_signed(g.p - c);
                let mut carved = false;
                for k in [-1.0, 0.0, 1.0] {
                    let v = v0 + k;
                    if v + r3 < w.lo() || v - r3 > w.hi() {
                        continue;
                    }
                    if !(w.lo() <= v - r3 - g.alpha && v + r3 + g.alpha <= w.hi()) {
                        continue;
                    }
                    if !self.accepts(&w, v, n) {
                        continue;
                    }
                    carved = true;
                    result.carvings += 1;
                    let collar = w.span(v - 2.0 * g.delta0, v + 2.0 * g.delta0);
                    if w.labels[collar].iter().any(|l| matches!(l, Label::Wait(e) if *e > n)) {
                        result.collar_violations += 1;
                    }
                    self.carve(&mut w, v, n);
                    if v - g.delta0 <= 0.0 && 0.0 < v + g.delta0 {
                        result.outcome = Outcome::Returned(self.finish(&orbit, n, v));
                        result.max_segments = result.max_segments.max(w.labels.len());
                        return result;
                    }
                }
                if carved {
                    let (lo, hi) = (w.lo() + shrink, w.hi() - shrink);
                    if !(lo <= -reach && reach <= hi) {
                        result.outcome = Outcome::Unresolved(n);
                        return result;
                    }
                    w.crop(lo, hi);
                }
            }
            if n % 4 == 0 {
                w.merge(n);
            }
            result.max_segments = result.max_segments.max(w.labels.len());
        }
        result
    }

    /// Whether the copy `[v − 2√δ₀, v + 2√δ₀]` of `Δ₀³` lies in `A^{n−1,α}`: inside `Λ^{n−1}` and
    /// within `α` of `A^{n−1} = {t^{n−1} = 0}`.
    fn accepts(&self, w: &Window, v: f64, n: u32) -> bool {
        let r3 = self.geom.r3();
        let alpha = self.geom.alpha;
        let (a, b) = (v - r3, v + r3);
        let inner = w.span(a, b);
        if w.labels[inner].iter().any(|l| *l == Label::Out) {
            return false;
        }
        let mut covered = a;
        for i in w.span(a - alpha, b + alpha) {
            let in_a = matches!(w.labels[i].at(n - 1), Label::Wait(0));
            if !in_a {
                continue;
            }
            let (s, e) = (w.cuts[i] - alpha, w.cuts[i + 1] + alpha);
            if s > covered {
                return false;
            }
            covered = covered.max(e);
            if covered >= b {
                return true;
            }
        }
        covered >= b
    }

    fn carve(&self, w: &mut Window, v: f64, n: u32) {
        let radii = &self.radii;
        let s_max = radii.len() - 1;
        let (lo, hi) = (w.lo(), w.hi());
        let mut cuts = Vec::with_capacity(4 * s_max + 3);
        let mut labels = Vec::with_capacity(4 * s_max + 2);
        for s in 0..=s_max {
            cuts.push(v - radii[s]);
            if s < s_max {
                labels.push(Label::Wait(n + s as u32 + 1));
            }
        }
        labels.push(Label::Out);
        cuts.push(v + radii[s_max]);
        for s in (0..s_max).rev() {
            cuts.push(v + radii[s]);
            labels.push(Label::Wait(n + s as u32 + 1));
        }
        // Clip to the window.
        let first = cuts.partition_point(|&c| c <= lo).saturating_sub(1);
        let last = cuts.partition_point(|&c| c < hi).min(labels.len());
        let mut cuts = cuts[first..=last].to_vec();
        let labels = labels[first..last].to_vec();
        cuts[0] = cuts[0].max(lo);
        let m = cuts.len() - 1;
        cuts[m] = cuts[m].min(hi);
        w.splice(&cuts, &labels);
    }

    fn pull_back(&self, orbit: &[f64], r: usize, w: f64) -> Option<f64> {
        let mut u = w;
        for j in (0..r).rev() {
            u = self.scalar.lift_delta_inverse(orbit[j], u);
            if u != 0.0 && u.abs() < 1e-290 || !u.is_finite() {
                return None;
            }
        }
        Some(u)
    }

    fn push_forward(&self, orbit: &[f64], r: usize, u: f64) -> f64 {
        let mut w = u;
        for &c in &orbit[..r] {
            w = self.scalar.lift_delta(c, w);
        }
        w
    }

    /// `Σ_{j<R} log|f'(c_j + u_j)|` along the pullback of the image offset `w`.
    fn log_derivative(&self, orbit: &[f64], r: usize, w: f64) -> Option<f64> {
        let mut u = w;
        let mut sum = 0.0;
        for j in (0..r).rev() {
            u = self.scalar.lift_delta_inverse(orbit[j], u);
            if !u.is_finite() {
                return None;
            }
            sum += self.scalar.derivative(wrap(orbit[j] + u)).abs().ln();
        }
        Some(sum)
    }

    fn finish(&self, orbit: &[f64], n: u32, v: f64) -> Return {
        let g = &self.geom;
        let r = n as usize;
        let pair = |rad: f64| -> Option<(f64, f64)> {
            let lo = self.pull_back(orbit, r, v - rad)?;
            let hi = self.pull_back(orbit, r, v + rad)?;
            Some((lo, hi))
        };
        let core = pair(g.delta0);
        let (markov_error, monotone) = match core {
            Some((lo, hi)) => {
                let e = (self.push_forward(orbit, r, lo) - (v - g.delta0))
                    .abs()
                    .max((self.push_forward(orbit, r, hi) - (v + g.delta0)).abs());
                (e, lo < hi)
            }
            None => (0.0, true),
        };
        let k = self.distortion_samples.max(2);
        let samples: Vec<(f64, f64)> = (0..k)
            .filter_map(|i| {
                let w = v - g.delta0 + 2.0 * g.delta0 * i as f64 / (k - 1) as f64;
                self.log_derivative(orbit, r, w).map(|s| (w, s))
            })
            .collect();
        let kappa = samples.iter().map(|&(_, s)| (-s).exp()).fold(0.0, f64::max);
        let mut distortion = 0.0f64;
        for i in 0..samples.len() {
            for j in i + 1..samples.len() {
                let (wi, si) = samples[i];
                let (wj, sj) = samples[j];
                distortion = distortion.max((si - sj).abs() / (wi - wj).abs());
            }
        }
        Return {
            time: n,
            image: orbit[r],
            p_offset: v,
            core,
            collar1: pair(2.0 * g.delta0),
            collar2: pair(g.delta0.sqrt()),
            markov_error,
            monotone,
            kappa,
            distortion,
        }
    }
}
