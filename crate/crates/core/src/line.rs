//! BL¹ distance between measures on the real line.
//!
//! On a line the pair constraints reduce to neighbouring points, so for a
//! fixed split `s = λ`, `ℓ = 1 − λ` the inner maximization is a chain
//! problem solved by a slope-trick sweep over concave piecewise-linear value
//! functions. The outer value `V(λ)` is concave and is maximized by golden
//! section search.

use std::cmp::{Ordering, Reverse};
use std::collections::BinaryHeap;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy)]
struct Knot {
    pos: f64,
    dslope: f64,
}

impl PartialEq for Knot {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl Eq for Knot {}
impl PartialOrd for Knot {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Knot {
    fn cmp(&self, other: &Self) -> Ordering {
        self.pos.total_cmp(&other.pos)
    }
}

/// Concave piecewise-linear function on `[-λ, λ]`. Knots left of the
/// current segment live in `left` (shifted by `off_l`), knots right of it in
/// `right` (shifted by `off_r`). `slope` is the slope of the current segment
/// and `value` its value at the segment's left end.
struct Chain {
    lo: f64,
    hi: f64,
    left: BinaryHeap<Knot>,
    right: BinaryHeap<Reverse<Knot>>,
    off_l: f64,
    off_r: f64,
    slope: f64,
    value: f64,
}

impl Chain {
    fn new(lambda: f64) -> Self {
        Self {
            lo: -lambda,
            hi: lambda,
            left: BinaryHeap::new(),
            right: BinaryHeap::new(),
            off_l: 0.0,
            off_r: 0.0,
            slope: 0.0,
            value: 0.0,
        }
    }

    fn left_top(&mut self) -> Option<Knot> {
        let top = self.left.peek().map(|k| Knot { pos: k.pos + self.off_l, dslope: k.dslope })?;
        if top.pos <= self.lo {
            self.left.clear();
            return None;
        }
        Some(top)
    }

    fn right_top(&mut self) -> Option<Knot> {
        let top = self.right.peek().map(|Reverse(k)| Knot { pos: k.pos + self.off_r, dslope: k.dslope })?;
        if top.pos >= self.hi {
            self.right.clear();
            return None;
        }
        Some(top)
    }

    fn left_end(&mut self) -> f64 {
        self.left_top().map_or(self.lo, |k| k.pos)
    }

    fn push_left(&mut self, pos: f64, dslope: f64) {
        if pos > self.lo && dslope > 0.0 {
            self.left.push(Knot { pos: pos - self.off_l, dslope });
        }
    }

    fn push_right(&mut self, pos: f64, dslope: f64) {
        if pos < self.hi && dslope > 0.0 {
            self.right.push(Reverse(Knot { pos: pos - self.off_r, dslope }));
        }
    }

    fn add_linear(&mut self, w: f64) {
        let a = self.left_end();
        self.value += w * a;
        self.slope += w;
    }

    /// Moves the current segment so that its left end is a maximizer.
    /// Returns `true` when the maximum sits at the right end `hi` instead.
    fn normalize(&mut self) -> bool {
        while self.slope > 0.0 {
            let Some(b) = self.right_top() else {
                return true;
            };
            let a = self.left_end();
            self.value += self.slope * (b.pos - a);
            self.right.pop();
            self.push_left(b.pos, b.dslope);
            self.slope -= b.dslope;
        }
        while self.slope < 0.0 {
            let Some(a) = self.left_top() else {
                break;
            };
            if self.slope + a.dslope >= 0.0 {
                break;
            }
            self.left.pop();
            self.push_right(a.pos, a.dslope);
            let a_next = self.left_end();
            self.slope += a.dslope;
            self.value -= self.slope * (a.pos - a_next);
        }
        false
    }

    fn maximum(&mut self) -> f64 {
        if self.normalize() {
            let a = self.left_end();
            self.value + self.slope * (self.hi - a)
        } else {
            self.value
        }
    }

    /// Replaces `h` by `y ↦ max{h(x) : |x − y| ≤ δ}` on `[-λ, λ]`.
    fn window(&mut self, delta: f64) {
        if delta <= 0.0 {
            return;
        }
        let at_hi = self.normalize();
        let a = self.left_end();
        let top = if at_hi { None } else { self.left_top() };
        let max = if at_hi { self.value + self.slope * (self.hi - a) } else { self.value };
        if at_hi {
            self.off_l -= delta;
            let edge = self.hi - delta;
            self.push_left(edge, self.slope);
        } else {
            if let Some(k) = top {
                self.left.pop();
                self.off_l -= delta;
                self.push_left(k.pos - delta, self.slope + k.dslope);
            } else {
                self.off_l -= delta;
            }
            self.off_r += delta;
            self.push_right(a + delta, -self.slope);
        }
        self.slope = 0.0;
        self.value = max;
    }
}

/// `max Σ w_i f_i` over `|f_i| ≤ λ` and `|f_{i+1} − f_i| ≤ (1 − λ)(x_{i+1} − x_i)`.
pub fn split_value(xs: &[f64], w: &[f64], lambda: f64) -> f64 {
    if lambda <= 0.0 {
        return 0.0;
    }
    let lip = 1.0 - lambda;
    let mut chain = Chain::new(lambda);
    for (k, &wk) in w.iter().enumerate() {
        if k > 0 {
            chain.window(lip * (xs[k] - xs[k - 1]));
        }
        chain.add_linear(wk);
    }
    chain.maximum()
}

/// BL¹ distance between `Σ w_i⁺ δ_{x_i}` and `Σ w_i⁻ δ_{x_i}` for strictly
/// increasing positions `xs`.
pub fn line_bl_signed(xs: &[f64], w: &[f64]) -> Result<f64> {
    if xs.len() != w.len() {
        return Err(Error::DimensionMismatch { expected: xs.len(), got: w.len() });
    }
    if xs.is_empty() {
        return Ok(0.0);
    }
    if xs.windows(2).any(|p| !(p[1] > p[0])) || xs.iter().chain(w).any(|v| !v.is_finite()) {
        return Err(Error::InvalidMetric("positions must be finite and strictly increasing".into()));
    }
    const INV_PHI: f64 = 0.618_033_988_749_894_9;
    let (mut a, mut b) = (0.0_f64, 1.0_f64);
    let mut c = b - INV_PHI * (b - a);
    let mut d = a + INV_PHI * (b - a);
    let mut fc = split_value(xs, w, c);
    let mut fd = split_value(xs, w, d);
    let mut best = split_value(xs, w, 1.0).max(fc).max(fd);
    while b - a > 1e-13 {
        if fc >= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - INV_PHI * (b - a);
            fc = split_value(xs, w, c);
            best = best.max(fc);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + INV_PHI * (b - a);
            fd = split_value(xs, w, d);
            best = best.max(fd);
        }
    }
    Ok(best.max(0.0))
}

/// BL¹ distance between two atomic measures on the line given as
/// `(position, mass)` lists. Atoms at the same position are merged.
pub fn line_bl_distance(mu: &[(f64, f64)], nu: &[(f64, f64)]) -> Result<f64> {
    let mut atoms: Vec<(f64, f64)> = mu
        .iter()
        .copied()
        .chain(nu.iter().map(|&(x, m)| (x, -m)))
        .collect();
    if atoms.iter().any(|&(x, m)| !x.is_finite() || !m.is_finite()) {
        return Err(Error::InvalidMeasure("atoms must be finite".into()));
    }
    if mu.iter().chain(nu).any(|&(_, m)| m < 0.0) {
        return Err(Error::InvalidMeasure("masses must be nonnegative".into()));
    }
    atoms.sort_by(|p, q| p.0.total_cmp(&q.0));
    let mut xs: Vec<f64> = Vec::with_capacity(atoms.len());
    let mut w: Vec<f64> = Vec::with_capacity(atoms.len());
    for (x, m) in atoms {
        if xs.last() == Some(&x) {
            *w.last_mut().unwrap() += m;
        } else {
            xs.push(x);
            w.push(m);
        }
    }
    line_bl_signed(&xs, &w)
}
