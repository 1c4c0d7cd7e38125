//! Real trees coded by nonnegative piecewise-linear excursions.
//!
//! For an excursion `f` the pseudometric is
//! `d̄(s, t) = f(s) + f(t) − 2 inf_{[s,t]} f`; the tree is `[0, σ_f]` modulo
//! its zero set, with the pushforward of Lebesgue measure. Because `f` is
//! linear between grid points, every infimum is attained at a grid point or
//! an endpoint, so all quantities below are exact up to rounding.

use rand::Rng;
use serde::Serialize;

use crate::error::{ensure_range, Error, Result};
use crate::metric::{ghp_embedded_distance, EmbeddedPair, FiniteMetricSpace};

/// Grid points closer than this in `d̄` are identified.
pub const QUOTIENT_TOL: f64 = 1e-12;

/// A continuous piecewise-linear `f ≥ 0` with `f(t_0) = f(t_N) = 0`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CodedExcursion {
    ts: Vec<f64>,
    fs: Vec<f64>,
}

impl CodedExcursion {
    pub fn new(ts: Vec<f64>, fs: Vec<f64>) -> Result<Self> {
        if ts.len() != fs.len() {
            return Err(Error::DimensionMismatch { expected: ts.len(), got: fs.len() });
        }
        if ts.len() < 2 {
            return Err(Error::InvalidExcursion("need at least two grid points".into()));
        }
        if ts[0] != 0.0 {
            return Err(Error::InvalidExcursion("grid must start at 0".into()));
        }
        if ts.windows(2).any(|w| !(w[1] > w[0])) || ts.iter().chain(&fs).any(|v| !v.is_finite()) {
            return Err(Error::InvalidExcursion("grid must be finite and strictly increasing".into()));
        }
        if fs.iter().any(|&v| v < 0.0) {
            return Err(Error::InvalidExcursion("values must be nonnegative".into()));
        }
        if fs[0] != 0.0 || *fs.last().unwrap() != 0.0 {
            return Err(Error::InvalidExcursion("excursion must start and end at 0".into()));
        }
        Ok(Self { ts, fs })
    }

    /// Parses `t,f` lines; blank lines, `#` comments and a non-numeric
    /// header line are skipped.
    pub fn from_csv(text: &str) -> Result<Self> {
        let mut ts = Vec::new();
        let mut fs = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let mut cols = line.split(',').map(str::trim);
            let (Some(a), Some(b), None) = (cols.next(), cols.next(), cols.next()) else {
                return Err(Error::Parse(format!("line {}: expected two columns", lineno + 1)));
            };
            match (a.parse::<f64>(), b.parse::<f64>()) {
                (Ok(t), Ok(v)) => {
                    ts.push(t);
                    fs.push(v);
                }
                _ if ts.is_empty() && lineno == 0 => continue,
                _ => return Err(Error::Parse(format!("line {}: not a number", lineno + 1))),
            }
        }
        Self::new(ts, fs)
    }

    pub fn times(&self) -> &[f64] {
        &self.ts
    }

    pub fn values(&self) -> &[f64] {
        &self.fs
    }

    /// `σ_f = sup{t : f(t) > 0}`, zero for the null excursion.
    pub fn sigma(&self) -> f64 {
        self.fs.iter().rposition(|&v| v > 0.0).map_or(0.0, |k| self.ts[k + 1])
    }

    /// `f(t)`, extended by zero beyond the grid.
    pub fn eval(&self, t: f64) -> f64 {
        if t <= 0.0 || t >= *self.ts.last().unwrap() {
            return 0.0;
        }
        let k = self.ts.partition_point(|&s| s <= t) - 1;
        let (t0, t1) = (self.ts[k], self.ts[k + 1]);
        let (f0, f1) = (self.fs[k], self.fs[k + 1]);
        f0 + (f1 - f0) * (t - t0) / (t1 - t0)
    }

    /// `inf_{[s,t]} f`.
    pub fn inf_on(&self, s: f64, t: f64) -> f64 {
        let (a, b) = if s <= t { (s, t) } else { (t, s) };
        let lo = self.ts.partition_point(|&u| u <= a);
        let hi = self.ts.partition_point(|&u| u < b);
        let inner = self.fs[lo.min(hi)..hi].iter().copied().fold(f64::INFINITY, f64::min);
        inner.min(self.eval(a)).min(self.eval(b))
    }

    /// The same function on a finer grid `ts` (which must contain the
    /// original breakpoints inside its range).
    fn resampled(&self, ts: &[f64]) -> Vec<f64> {
        ts.iter().map(|&t| self.eval(t)).collect()
    }

    /// Sup-norm of `f − g` over `[0, σ_f ∧ σ_g]`, exact on the union grid.
    pub fn sup_distance(&self, other: &Self) -> f64 {
        let cap = self.sigma().min(other.sigma());
        let grid = union_grid(&[self, other], cap);
        grid.iter().map(|&t| (self.eval(t) - other.eval(t)).abs()).fold(0.0, f64::max)
    }

    /// Exact modulus of continuity `ω(h) = sup{|f(s) − f(t)| : |s − t| ≤ h}`
    /// over `[0, σ_f]`.
    pub fn modulus(&self, h: f64) -> f64 {
        let sigma = self.sigma();
        if h <= 0.0 || sigma == 0.0 {
            return 0.0;
        }
        let k_end = self.ts.partition_point(|&t| t <= sigma);
        let (ts, fs) = (&self.ts[..k_end], &self.fs[..k_end]);
        let mut best: f64 = 0.0;
        // the optimum of a linear function over the constraint cells sits at
        // a pair of breakpoints or a breakpoint paired with its h-shift
        for i in 0..ts.len() {
            for j in (i + 1)..ts.len() {
                if ts[j] - ts[i] > h {
                    break;
                }
                best = best.max((fs[j] - fs[i]).abs());
            }
            for shifted in [ts[i] + h, ts[i] - h] {
                if (0.0..=sigma).contains(&shifted) {
                    best = best.max((self.eval(shifted) - fs[i]).abs());
                }
            }
        }
        best
    }

    /// `ω^{-1}(r) = sup{h > 0 : ω(h) < r}`, returned as a lower bracket end
    /// (so `ω` at the returned value is `< r`). Infinite when `ω < r`
    /// everywhere.
    pub fn modulus_inverse(&self, r: f64) -> f64 {
        let sigma = self.sigma();
        if self.modulus(sigma) < r {
            return f64::INFINITY;
        }
        let (mut lo, mut hi) = (0.0_f64, sigma);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if self.modulus(mid) < r {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        lo
    }
}

/// `d̄^f(s, t)`.
pub fn tree_pseudometric(f: &CodedExcursion, s: f64, t: f64) -> f64 {
    (f.eval(s) + f.eval(t) - 2.0 * f.inf_on(s, t)).max(0.0)
}

/// Sorted union of the grids of several excursions, cut at `cap` (which is
/// itself included).
fn union_grid(fs: &[&CodedExcursion], cap: f64) -> Vec<f64> {
    let mut grid: Vec<f64> = fs.iter().flat_map(|f| f.ts.iter().copied()).filter(|&t| t <= cap).collect();
    grid.push(cap);
    grid.sort_by(f64::total_cmp);
    grid.dedup();
    grid
}

/// `d̄` between all pairs of grid points, via running minima.
fn grid_pseudometric(values: &[f64]) -> Vec<f64> {
    let n = values.len();
    let mut d = vec![0.0; n * n];
    for i in 0..n {
        let mut low = values[i];
        for j in (i + 1)..n {
            low = low.min(values[j]);
            let v = (values[i] + values[j] - 2.0 * low).max(0.0);
            d[i * n + j] = v;
            d[j * n + i] = v;
        }
    }
    d
}

/// Half-cell masses of grid points inside `[0, σ]`.
fn grid_masses(ts: &[f64], sigma: f64) -> Vec<f64> {
    let n = ts.len();
    (0..n)
        .map(|k| {
            if ts[k] > sigma {
                return 0.0;
            }
            let left = if k > 0 { ts[k] - ts[k - 1] } else { 0.0 };
            let right = if k + 1 < n && ts[k + 1] <= sigma { ts[k + 1] - ts[k] } else { 0.0 };
            0.5 * (left + right)
        })
        .collect()
}

fn find(parent: &mut [usize], mut x: usize) -> usize {
    while parent[x] != x {
        parent[x] = parent[parent[x]];
        x = parent[x];
    }
    x
}

/// The quotient of a grid by `d̄ ≤ 1e-12`.
#[derive(Debug, Clone, PartialEq)]
pub struct CodedTree {
    /// Grid times.
    pub times: Vec<f64>,
    /// Representative index of each grid time.
    pub class_of: Vec<usize>,
    /// Grid index chosen as representative of each class.
    pub representatives: Vec<usize>,
    pub space: FiniteMetricSpace,
    pub mass: Vec<f64>,
    /// Class of `p^f(0)`.
    pub root: usize,
}

impl CodedTree {
    pub fn len(&self) -> usize {
        self.representatives.len()
    }

    pub fn is_empty(&self) -> bool {
        self.representatives.is_empty()
    }

    pub fn total_mass(&self) -> f64 {
        self.mass.iter().sum()
    }

    /// Largest violation of the four-point condition over all quadruples.
    pub fn four_point_defect(&self) -> f64 {
        four_point_defect(&self.space)
    }
}

/// Largest `d(a,b) + d(c,d) − max(d(a,c) + d(b,d), d(a,d) + d(b,c))`.
pub fn four_point_defect(space: &FiniteMetricSpace) -> f64 {
    let n = space.len();
    let mut worst = f64::NEG_INFINITY;
    for a in 0..n {
        for b in a..n {
            for c in 0..n {
                for e in c..n {
                    let lhs = space.d(a, b) + space.d(c, e);
                    let rhs = (space.d(a, c) + space.d(b, e)).max(space.d(a, e) + space.d(b, c));
                    worst = worst.max(lhs - rhs);
                }
            }
        }
    }
    worst
}

fn quotient(times: Vec<f64>, values: &[f64], sigma: f64) -> Result<CodedTree> {
    let n = times.len();
    let d = grid_pseudometric(values);
    let mut parent: Vec<usize> = (0..n).collect();
    for i in 0..n {
        for j in (i + 1)..n {
            if d[i * n + j] <= QUOTIENT_TOL {
                let (a, b) = (find(&mut parent, i), find(&mut parent, j));
                if a != b {
                    parent[a.max(b)] = a.min(b);
                }
            }
        }
    }
    let mut representatives = Vec::new();
    let mut class_of = vec![0; n];
    let mut slot = vec![usize::MAX; n];
    for i in 0..n {
        let root = find(&mut parent, i);
        if slot[root] == usize::MAX {
            slot[root] = representatives.len();
            representatives.push(i);
        }
        class_of[i] = slot[root];
    }
    let k = representatives.len();
    let mut dist = vec![0.0; k * k];
    for a in 0..k {
        for b in (a + 1)..k {
            let v = d[representatives[a] * n + representatives[b]];
            dist[a * k + b] = v;
            dist[b * k + a] = v;
        }
    }
    let masses = grid_masses(&times, sigma);
    let mut mass = vec![0.0; k];
    for (i, m) in masses.iter().enumerate() {
        mass[class_of[i]] += m;
    }
    let space = FiniteMetricSpace::from_trusted(k, dist)?;
    Ok(CodedTree { root: class_of[0], times, class_of, representatives, space, mass })
}

/// The tree on the grid of `f` restricted to `[0, σ_f]`.
pub fn build_coded_tree(f: &CodedExcursion) -> Result<CodedTree> {
    let sigma = f.sigma();
    let times = union_grid(&[f], sigma);
    let values = f.resampled(&times);
    quotient(times, &values, sigma)
}

/// `2‖f−g‖ + 2^κ (σ_f ∧ σ_g) ‖f−g‖^κ + |σ_f − σ_g|`, the norm taken over
/// `[0, σ_f ∧ σ_g]`.
pub fn ghp_bound(f: &CodedExcursion, g: &CodedExcursion, kappa: f64) -> Result<f64> {
    ensure_range("kappa", kappa > 0.0 && kappa <= 1.0, || format!("{kappa} not in (0, 1]"))?;
    let norm = f.sup_distance(g);
    let (sf, sg) = (f.sigma(), g.sigma());
    Ok(2.0 * norm + 2f64.powf(kappa) * sf.min(sg) * norm.powf(kappa) + (sf - sg).abs())
}

/// Result of the time-matched correspondence embedding.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Embedding {
    /// GHP-type distance of the two trees inside the glued space.
    pub achieved: f64,
    /// Distortion of the correspondence on the common grid.
    pub distortion: f64,
    /// Hausdorff part of `achieved`.
    pub hausdorff: f64,
    pub sup_distance: f64,
}

/// Glues `T^f` and `T^g` along the correspondence `{(p^f(t), p^g(t))}` over
/// the common grid, with cross distances
/// `inf_t d^f(x, p^f(t)) + ½ dis + d^g(p^g(t), y) + ε`, and evaluates the
/// embedded GHP-type distance there.
pub fn correspondence_embedding(f: &CodedExcursion, g: &CodedExcursion, epsilon: f64, kappa: f64) -> Result<Embedding> {
    correspondence_embedding_with(f, g, epsilon, kappa, false)
}

pub fn correspondence_embedding_with(
    f: &CodedExcursion,
    g: &CodedExcursion,
    epsilon: f64,
    kappa: f64,
    rooted: bool,
) -> Result<Embedding> {
    ensure_range("epsilon", epsilon > 0.0 && epsilon.is_finite(), || format!("{epsilon} must be positive"))?;
    ensure_range("kappa", kappa > 0.0 && kappa <= 1.0, || format!("{kappa} not in (0, 1]"))?;
    let (sf, sg) = (f.sigma(), g.sigma());
    let span = sf.max(sg);
    let times = union_grid(&[f, g], span);
    let vf = f.resampled(&times);
    let vg = g.resampled(&times);
    let m = times.len();
    let df = grid_pseudometric(&vf);
    let dg = grid_pseudometric(&vg);
    let distortion = df.iter().zip(&dg).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);

    let tf = quotient(times.clone(), &vf, sf)?;
    let tg = quotient(times, &vg, sg)?;
    let (nf, ng) = (tf.len(), tg.len());
    let gap = 0.5 * distortion + epsilon;
    // a[x][k] = d^f(x, p^f(t_k)), b[y][k] = d^g(y, p^g(t_k))
    let to_grid = |tree: &CodedTree, d: &[f64]| -> Vec<Vec<f64>> {
        tree.representatives.iter().map(|&r| (0..m).map(|k| d[r * m + k]).collect()).collect()
    };
    let a = to_grid(&tf, &df);
    let b = to_grid(&tg, &dg);
    let total = nf + ng;
    let mut dist = vec![0.0; total * total];
    for x in 0..nf {
        for y in 0..nf {
            dist[x * total + y] = tf.space.d(x, y);
        }
    }
    for x in 0..ng {
        for y in 0..ng {
            dist[(nf + x) * total + nf + y] = tg.space.d(x, y);
        }
    }
    for x in 0..nf {
        for y in 0..ng {
            let best = (0..m).map(|k| a[x][k] + b[y][k]).fold(f64::INFINITY, f64::min);
            let v = best + gap;
            dist[x * total + nf + y] = v;
            dist[(nf + y) * total + x] = v;
        }
    }
    let ambient = FiniteMetricSpace::from_trusted(total, dist)?;
    let pair = EmbeddedPair::new(ambient, (0..nf).collect(), (nf..total).collect())?
        .with_masses(tf.mass.clone(), tg.mass.clone())?
        .with_roots(tf.root, nf + tg.root)?;
    let hausdorff = crate::metric::hausdorff_distance(&pair)?;
    let achieved = ghp_embedded_distance(&pair, kappa, rooted)?;
    Ok(Embedding { achieved, distortion, hausdorff, sup_distance: f.sup_distance(g) })
}

/// `(ω^{-1}(r/2) ∧ σ_f/2, m^f(B(p^f(t), r)), Leb(I(t, r) ∩ {|f − f(t)| < r}))`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BallVolume {
    pub lower: f64,
    pub measured: f64,
    pub upper: f64,
}

/// Length of `{s ∈ [s0, s1] : lo < f(s) < hi}` for `f` linear between
/// `(s0, f0)` and `(s1, f1)`.
fn band_length(s0: f64, s1: f64, f0: f64, f1: f64, lo: f64, hi: f64) -> f64 {
    if !(hi > lo) {
        return 0.0;
    }
    let w = s1 - s0;
    if f0 == f1 {
        return if f0 > lo && f0 < hi { w } else { 0.0 };
    }
    let (a, b) = if f0 < f1 { (f0, f1) } else { (f1, f0) };
    let overlap = (b.min(hi) - a.max(lo)).max(0.0);
    w * overlap / (b - a)
}

/// Volume of the open ball `B(p^f(t), r)` and the two bounds on it.
pub fn ball_volume_bounds(f: &CodedExcursion, t: f64, r: f64) -> Result<BallVolume> {
    let sigma = f.sigma();
    ensure_range("t", (0.0..=sigma).contains(&t), || format!("{t} not in [0, {sigma}]"))?;
    ensure_range("r", r > 0.0 && r.is_finite(), || format!("{r} must be positive"))?;
    let lower = f.modulus_inverse(r / 2.0).min(sigma / 2.0);

    let mut times = union_grid(&[f], sigma);
    if let Err(pos) = times.binary_search_by(|s| s.total_cmp(&t)) {
        times.insert(pos, t);
    }
    let vals = f.resampled(&times);
    let k0 = times.iter().position(|&s| s == t).expect("inserted");
    let ft = vals[k0];

    // Walking away from t, the running minimum M over [s, t] is fixed on each
    // cell apart from f itself, and d̄(s, t) < r iff f(s) lies in
    // (f(t) − r, 2M + r − f(t)). The walk stops where f drops to f(t) − r,
    // which is also where I(t, r) ends; a cell crossing that level counts
    // only its part above it, through the lower end of both bands. Both
    // sums are accumulated cell by cell in the same order, so the inclusion
    // of the ball in I(t, r) ∩ {|f − f(t)| < r} survives rounding.
    let floor = ft - r;
    let mut measured = 0.0;
    let mut upper = 0.0;
    let mut cell = |k: usize, low: f64| {
        let (s0, s1, a, b) = (times[k], times[k + 1], vals[k], vals[k + 1]);
        measured += band_length(s0, s1, a, b, floor, (2.0 * low + r - ft).min(ft + r));
        upper += band_length(s0, s1, a, b, floor, ft + r);
    };
    let mut low = ft;
    for k in (0..k0).rev() {
        low = low.min(vals[k + 1]);
        if vals[k + 1] <= floor {
            break;
        }
        cell(k, low);
    }
    let mut low = ft;
    for k in k0..times.len() - 1 {
        low = low.min(vals[k]);
        if vals[k] <= floor {
            break;
        }
        cell(k, low);
    }
    Ok(BallVolume { lower, measured, upper })
}

/// A uniformly random strictly positive excursion with `2m + 2` unit steps,
/// rescaled to time `[0, 1]` and height `/√(2m + 2)`. The Dyck path inside
/// comes from the cycle lemma applied to a uniform arrangement of `m` up
/// and `m + 1` down steps.
pub fn random_excursion<R: Rng + ?Sized>(m: usize, rng: &mut R) -> CodedExcursion {
    let mut steps: Vec<i32> = std::iter::repeat_n(1, m).chain(std::iter::repeat_n(-1, m + 1)).collect();
    for i in (1..steps.len()).rev() {
        let j = rng.random_range(0..=i);
        steps.swap(i, j);
    }
    // rotate to start just after the first minimum of the partial sums
    let mut level = 0;
    let mut min_level = 0;
    let mut arg = 0;
    for (i, s) in steps.iter().enumerate() {
        level += s;
        if level < min_level {
            min_level = level;
            arg = i + 1;
        }
    }
    let len_steps = steps.len();
    steps.rotate_left(arg % len_steps);
    let dyck = &steps[..steps.len() - 1];
    let len = 2 * m + 2;
    let scale = (len as f64).sqrt();
    let mut fs = Vec::with_capacity(len + 1);
    fs.push(0.0);
    let mut h = 1;
    fs.push(h as f64 / scale);
    for s in dyck {
        h += s;
        fs.push(h as f64 / scale);
    }
    fs.push(0.0);
    let ts: Vec<f64> = (0..=len).map(|k| k as f64 / len as f64).collect();
    CodedExcursion::new(ts, fs).expect("positive path by construction")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tent() -> CodedExcursion {
        CodedExcursion::new(vec![0.0, 1.0, 2.0], vec![0.0, 1.0, 0.0]).unwrap()
    }

    fn double_tent() -> CodedExcursion {
        CodedExcursion::new(vec![0.0, 1.0, 2.0, 3.0, 4.0], vec![0.0, 1.0, 0.25, 0.75, 0.0]).unwrap()
    }

    #[test]
    fn tent_codes_a_segment() {
        let f = tent();
        assert_eq!(tree_pseudometric(&f, 0.5, 1.5), 0.0);
        assert_eq!(tree_pseudometric(&f, 0.5, 1.0), 0.5);
        assert_eq!(tree_pseudometric(&f, 0.7, 0.7), 0.0);
    }

    #[test]
    fn double_tent_branch_distance() {
        let f = double_tent();
        // teeth at heights 1 and 0.75 with valley 0.25 between
        assert!((tree_pseudometric(&f, 1.0, 3.0) - (1.0 + 0.75 - 0.5)).abs() < 1e-15);
        let tree = build_coded_tree(&f).unwrap();
        assert_eq!(tree.len(), 4);
        assert!((tree.total_mass() - 4.0).abs() < 1e-15);
        assert!(tree.four_point_defect() <= 1e-12);
    }

    #[test]
    fn sigma_ignores_trailing_zeros() {
        let f = CodedExcursion::new(vec![0.0, 1.0, 2.0, 5.0], vec![0.0, 2.0, 0.0, 0.0]).unwrap();
        assert_eq!(f.sigma(), 2.0);
        assert!((build_coded_tree(&f).unwrap().total_mass() - 2.0).abs() < 1e-15);
    }

    #[test]
    fn modulus_of_tent() {
        let f = tent();
        assert!((f.modulus(0.25) - 0.25).abs() < 1e-15);
        assert!((f.modulus(5.0) - 1.0).abs() < 1e-15);
        assert!((f.modulus_inverse(0.5) - 0.5).abs() < 1e-12);
        assert!(f.modulus_inverse(2.0).is_infinite());
    }

    #[test]
    fn identical_excursions() {
        let f = double_tent();
        assert_eq!(ghp_bound(&f, &f, 1.0).unwrap(), 0.0);
        let e = correspondence_embedding(&f, &f, 1e-9, 1.0).unwrap();
        assert_eq!(e.distortion, 0.0);
        // the two copies of the measure sit ε apart
        assert!(e.achieved <= 4.0 * 1e-9 + 1e-15);
        assert!(e.hausdorff <= 1e-9 + 1e-15);
    }

    #[test]
    fn extended_support_adds_length() {
        let f = tent();
        let g = CodedExcursion::new(vec![0.0, 1.0, 2.0, 2.5, 3.0], vec![0.0, 1.0, 0.1, 0.05, 0.0]).unwrap();
        let b = ghp_bound(&f, &g, 1.0).unwrap();
        let norm = f.sup_distance(&g);
        assert!((b - (2.0 * norm + 2.0 * 2.0 * norm + 1.0)).abs() < 1e-12);
    }

    #[test]
    fn ball_bounds_on_tent() {
        let f = tent();
        let v = ball_volume_bounds(&f, 1.0, 0.5).unwrap();
        // ball of radius 1/2 around the top covers (0.5, 1.5)
        assert!((v.measured - 1.0).abs() < 1e-12);
        assert!(v.lower <= v.measured && v.measured <= v.upper);
    }

    #[test]
    fn random_excursion_is_positive() {
        let mut rng = crate::rng::seeded(5);
        for m in [0, 1, 7, 30] {
            let f = random_excursion(m, &mut rng);
            let v = f.values();
            assert!(v[1..v.len() - 1].iter().all(|&x| x > 0.0));
            assert_eq!(f.sigma(), 1.0);
        }
    }
}
