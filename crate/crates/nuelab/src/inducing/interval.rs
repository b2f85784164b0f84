use serde::{Deserialize, Serialize};

/// Finite union of half-open intervals, either on the line or on the circle `ℝ/ℤ`.
///
/// Stored pieces are sorted, disjoint and separated by gaps larger than `tol`; on the circle
/// every piece lies in `[0, 1)` and an arc through `0` is kept as two pieces. Pieces (or, on
/// the circle, wrap-around components) shorter than `tol` are dropped.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntervalSet {
    pieces: Vec<(f64, f64)>,
    tol: f64,
    circular: bool,
}

impl IntervalSet {
    pub fn empty(tol: f64, circular: bool) -> IntervalSet {
        IntervalSet { pieces: Vec::new(), tol, circular }
    }

    /// The whole circle (circular sets only).
    pub fn full_circle(tol: f64) -> IntervalSet {
        IntervalSet { pieces: vec![(0.0, 1.0)], tol, circular: true }
    }

    /// `[a, b)` on the line, or the counter-clockwise arc from `a` to `b` on the circle
    /// (length `b − a`; lengths `≥ 1` give the whole circle).
    pub fn interval(a: f64, b: f64, tol: f64, circular: bool) -> IntervalSet {
        IntervalSet::from_intervals(&[(a, b)], tol, circular)
    }

    pub fn from_intervals(list: &[(f64, f64)], tol: f64, circular: bool) -> IntervalSet {
        let mut raw = Vec::with_capacity(list.len() + 1);
        for &(a, b) in list {
            if !(b > a) {
                continue;
            }
            if circular {
                if b - a >= 1.0 {
                    raw.push((0.0, 1.0));
                    continue;
                }
                let s = a.rem_euclid(1.0);
                let e = s + (b - a);
                if e <= 1.0 {
                    raw.push((s, e));
                } else {
                    raw.push((s, 1.0));
                    raw.push((0.0, e - 1.0));
                }
            } else {
                raw.push((a, b));
            }
        }
        let mut set = IntervalSet { pieces: raw, tol, circular };
        set.normalize();
        set
    }

    fn normalize(&mut self) {
        self.pieces.sort_by(|x, y| x.0.total_cmp(&y.0));
        let mut merged: Vec<(f64, f64)> = Vec::with_capacity(self.pieces.len());
        for &(a, b) in &self.pieces {
            match merged.last_mut() {
                Some(last) if a <= last.1 + self.tol => last.1 = last.1.max(b),
                _ => merged.push((a, b)),
            }
        }
        if self.circular {
            if let Some(first) = merged.first_mut() {
                if first.0 <= self.tol {
                    first.0 = 0.0;
                }
            }
            if let Some(last) = merged.last_mut() {
                if last.1 >= 1.0 - self.tol {
                    last.1 = 1.0;
                }
            }
            let wraps = merged.len() > 1 && merged[0].0 == 0.0 && merged[merged.len() - 1].1 == 1.0;
            let n = merged.len();
            let keep: Vec<bool> = (0..n)
                .map(|i| {
                    let len = merged[i].1 - merged[i].0;
                    let joined = if wraps && (i == 0 || i == n - 1) {
                        (merged[0].1 - merged[0].0) + (merged[n - 1].1 - merged[n - 1].0)
                    } else {
                        len
                    };
                    joined >= self.tol
                })
                .collect();
            self.pieces = merged.into_iter().zip(keep).filter_map(|(p, k)| k.then_some(p)).collect();
        } else {
            merged.retain(|(a, b)| b - a >= self.tol);
            self.pieces = merged;
        }
    }

    pub fn tol(&self) -> f64 {
        self.tol
    }

    pub fn is_circular(&self) -> bool {
        self.circular
    }

    pub fn is_empty(&self) -> bool {
        self.pieces.is_empty()
    }

    /// Stored pieces (an arc through `0` appears as two pieces).
    pub fn pieces(&self) -> &[(f64, f64)] {
        &self.pieces
    }

    /// Connected components; on the circle an arc through `0` is reported once as `(a, b)` with
    /// `b > 1`.
    pub fn components(&self) -> Vec<(f64, f64)> {
        let mut out = self.pieces.clone();
        if self.circular && out.len() > 1 && out[0].0 == 0.0 && out[out.len() - 1].1 == 1.0 {
            let first = out.remove(0);
            let last = out.last_mut().unwrap();
            last.1 = 1.0 + first.1;
        }
        out
    }

    pub fn measure(&self) -> f64 {
        self.pieces.iter().map(|(a, b)| b - a).sum()
    }

    pub fn contains(&self, x: f64) -> bool {
        let x = if self.circular { x.rem_euclid(1.0) } else { x };
        let i = self.pieces.partition_point(|p| p.0 <= x);
        i > 0 && x < self.pieces[i - 1].1
    }

    /// Whether every point of `[a, b)` (an arc on the circle) lies in the set.
    pub fn covers(&self, a: f64, b: f64) -> bool {
        let probe = IntervalSet::interval(a, b, 0.0, self.circular);
        probe.pieces.iter().all(|&(s, e)| {
            let i = self.pieces.partition_point(|p| p.0 <= s);
            i > 0 && self.pieces[i - 1].1 >= e
        })
    }

    fn check(&self, other: &IntervalSet) {
        assert_eq!(self.circular, other.circular, "mixing circular and linear interval sets");
    }

    pub fn union(&self, other: &IntervalSet) -> IntervalSet {
        self.check(other);
        let mut pieces = self.pieces.clone();
        pieces.extend_from_slice(&other.pieces);
        let mut set = IntervalSet { pieces, tol: self.tol.max(other.tol), circular: self.circular };
        set.normalize();
        set
    }

    pub fn intersection(&self, other: &IntervalSet) -> IntervalSet {
        self.check(other);
        let (mut i, mut j) = (0, 0);
        let mut pieces = Vec::new();
        while i < self.pieces.len() && j < other.pieces.len() {
            let (a1, b1) = self.pieces[i];
            let (a2, b2) = other.pieces[j];
            let (a, b) = (a1.max(a2), b1.min(b2));
            if b > a {
                pieces.push((a, b));
            }
            if b1 < b2 {
                i += 1;
            } else {
                j += 1;
            }
        }
        let mut set = IntervalSet { pieces, tol: self.tol.max(other.tol), circular: self.circular };
        set.normalize();
        set
    }

    pub fn difference(&self, other: &IntervalSet) -> IntervalSet {
        self.check(other);
        let mut pieces = Vec::new();
        let mut j = 0;
        for &(a, b) in &self.pieces {
            let mut cur = a;
            while j < other.pieces.len() && other.pieces[j].1 <= cur {
                j += 1;
            }
            let mut k = j;
            while k < other.pieces.len() && other.pieces[k].0 < b {
                let (c, d) = other.pieces[k];
                if c > cur {
                    pieces.push((cur, c));
                }
                cur = cur.max(d);
                if cur >= b {
                    break;
                }
                k += 1;
            }
            if cur < b {
                pieces.push((cur, b));
            }
        }
        let mut set = IntervalSet { pieces, tol: self.tol.max(other.tol), circular: self.circular };
        set.normalize();
        set
    }

    pub fn symmetric_difference(&self, other: &IntervalSet) -> IntervalSet {
        self.difference(other).union(&other.difference(self))
    }

    /// The closed `r`-neighbourhood (as a half-open union).
    pub fn fatten(&self, r: f64) -> IntervalSet {
        let list: Vec<(f64, f64)> = self.components().iter().map(|&(a, b)| (a - r, b + r)).collect();
        IntervalSet::from_intervals(&list, self.tol, self.circular)
    }
}
