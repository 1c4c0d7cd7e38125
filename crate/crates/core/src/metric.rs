//! Finite measured metric spaces and the distances between measures and
//! subsets living in a common ambient space.

use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use crate::error::{ensure_range, Error, Result};
use crate::lp::Simplex;

/// A finite metric space given by its full distance matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct FiniteMetricSpace {
    labels: Vec<String>,
    n: usize,
    dist: Vec<f64>,
}

impl FiniteMetricSpace {
    /// Validates symmetry, zero diagonal, positivity and the triangle
    /// inequality (relative tolerance 1e-10).
    pub fn new(labels: Vec<String>, dist: Vec<Vec<f64>>) -> Result<Self> {
        let s = Self::from_rows(labels, dist)?;
        s.check_triangle(1e-10)?;
        Ok(s)
    }

    /// Like [`Self::new`] with labels `"0"`, `"1"`, ….
    pub fn from_matrix(dist: Vec<Vec<f64>>) -> Result<Self> {
        let labels = (0..dist.len()).map(|i| i.to_string()).collect();
        Self::new(labels, dist)
    }

    /// Row-major `n × n` matrix that is a metric by construction (resistance
    /// or tree metrics). Symmetry, diagonal and positivity are still checked;
    /// the cubic triangle check is skipped.
    pub fn from_trusted(n: usize, dist: Vec<f64>) -> Result<Self> {
        if n == 0 {
            return Err(Error::Empty("metric space"));
        }
        if dist.len() != n * n {
            return Err(Error::DimensionMismatch { expected: n * n, got: dist.len() });
        }
        let s = Self { labels: (0..n).map(|i| i.to_string()).collect(), n, dist };
        s.check_basic()?;
        Ok(s)
    }

    fn from_rows(labels: Vec<String>, rows: Vec<Vec<f64>>) -> Result<Self> {
        let n = rows.len();
        if n == 0 {
            return Err(Error::Empty("metric space"));
        }
        if labels.len() != n {
            return Err(Error::DimensionMismatch { expected: n, got: labels.len() });
        }
        let mut dist = Vec::with_capacity(n * n);
        for row in rows {
            if row.len() != n {
                return Err(Error::DimensionMismatch { expected: n, got: row.len() });
            }
            dist.extend(row);
        }
        let s = Self { labels, n, dist };
        s.check_basic()?;
        Ok(s)
    }

    fn check_basic(&self) -> Result<()> {
        let n = self.n;
        for i in 0..n {
            if self.d(i, i) != 0.0 {
                return Err(Error::InvalidMetric(format!("nonzero diagonal at {i}")));
            }
            for j in (i + 1)..n {
                let (a, b) = (self.d(i, j), self.d(j, i));
                if a != b {
                    return Err(Error::InvalidMetric(format!("asymmetric at ({i}, {j})")));
                }
                if !(a > 0.0) || !a.is_finite() {
                    return Err(Error::InvalidMetric(format!("d({i}, {j}) = {a} must be positive and finite")));
                }
            }
        }
        Ok(())
    }

    fn check_triangle(&self, rel_tol: f64) -> Result<()> {
        let tol = rel_tol * (1.0 + self.diameter());
        let n = self.n;
        for i in 0..n {
            for j in 0..n {
                let dij = self.d(i, j);
                for k in 0..n {
                    if self.d(i, k) > dij + self.d(j, k) + tol {
                        return Err(Error::InvalidMetric(format!(
                            "triangle inequality fails for ({i}, {j}, {k})"
                        )));
                    }
                }
            }
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn with_labels(mut self, labels: Vec<String>) -> Result<Self> {
        if labels.len() != self.n {
            return Err(Error::DimensionMismatch { expected: self.n, got: labels.len() });
        }
        self.labels = labels;
        Ok(self)
    }

    #[inline]
    pub fn d(&self, i: usize, j: usize) -> f64 {
        self.dist[i * self.n + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.dist[i * self.n..(i + 1) * self.n]
    }

    pub fn diameter(&self) -> f64 {
        self.dist.iter().copied().fold(0.0, f64::max)
    }

    /// Subspace on the given indices, in the given order.
    pub fn restrict(&self, idx: &[usize]) -> Result<Self> {
        if idx.is_empty() {
            return Err(Error::Empty("index set"));
        }
        self.check_indices(idx)?;
        let m = idx.len();
        let mut dist = Vec::with_capacity(m * m);
        for &i in idx {
            dist.extend(idx.iter().map(|&j| self.d(i, j)));
        }
        let labels = idx.iter().map(|&i| self.labels[i].clone()).collect();
        let s = Self { labels, n: m, dist };
        s.check_basic()?;
        Ok(s)
    }

    pub(crate) fn check_indices(&self, idx: &[usize]) -> Result<()> {
        match idx.iter().find(|&&i| i >= self.n) {
            Some(&i) => Err(Error::IndexOutOfRange { index: i, len: self.n }),
            None => Ok(()),
        }
    }

    /// Indices in the open ball `B(x, r) = {y : d(x, y) < r}`.
    pub fn open_ball(&self, x: usize, r: f64) -> Vec<usize> {
        (0..self.n).filter(|&y| self.d(x, y) < r).collect()
    }

    /// Indices in the closed ball `D(x, r) = {y : d(x, y) ≤ r}`.
    pub fn closed_ball(&self, x: usize, r: f64) -> Vec<usize> {
        (0..self.n).filter(|&y| self.d(x, y) <= r).collect()
    }
}

/// A finite metric space carrying a nonnegative weight per point.
#[derive(Debug, Clone, PartialEq)]
pub struct MeasuredSpace {
    pub space: FiniteMetricSpace,
    pub mass: Vec<f64>,
    pub root: Option<usize>,
}

impl MeasuredSpace {
    pub fn new(space: FiniteMetricSpace, mass: Vec<f64>) -> Result<Self> {
        check_mass(space.len(), &mass)?;
        Ok(Self { space, mass, root: None })
    }

    pub fn with_root(mut self, root: usize) -> Result<Self> {
        self.space.check_indices(&[root])?;
        self.root = Some(root);
        Ok(self)
    }

    pub fn total_mass(&self) -> f64 {
        self.mass.iter().sum()
    }

    pub fn has_full_support(&self) -> bool {
        self.mass.iter().all(|&m| m > 0.0)
    }

    /// Mass of the open ball `B(x, r)`.
    pub fn open_ball_mass(&self, x: usize, r: f64) -> f64 {
        self.space.open_ball(x, r).iter().map(|&y| self.mass[y]).sum()
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let doc: SpaceDocument = serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
        doc.try_into()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&SpaceDocument::from(self)).expect("plain data serializes")
    }
}

pub(crate) fn check_mass(n: usize, mass: &[f64]) -> Result<()> {
    if mass.len() != n {
        return Err(Error::DimensionMismatch { expected: n, got: mass.len() });
    }
    if let Some((i, m)) = mass.iter().enumerate().find(|(_, m)| !(**m >= 0.0) || !m.is_finite()) {
        return Err(Error::InvalidMeasure(format!("mass[{i}] = {m} must be finite and ≥ 0")));
    }
    Ok(())
}

/// On-disk form: `{"points": [...], "dist": [[...]], "mass": [...], "root": idx}`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpaceDocument {
    pub points: Vec<serde_json::Value>,
    pub dist: Vec<Vec<f64>>,
    pub mass: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub root: Option<usize>,
}

impl TryFrom<SpaceDocument> for MeasuredSpace {
    type Error = Error;

    fn try_from(doc: SpaceDocument) -> Result<Self> {
        let labels = doc
            .points
            .iter()
            .map(|p| match p {
                serde_json::Value::String(s) => s.clone(),
                other => other.to_string(),
            })
            .collect();
        let space = FiniteMetricSpace::new(labels, doc.dist)?;
        let ms = MeasuredSpace::new(space, doc.mass)?;
        match doc.root {
            Some(r) => ms.with_root(r),
            None => Ok(ms),
        }
    }
}

impl From<&MeasuredSpace> for SpaceDocument {
    fn from(ms: &MeasuredSpace) -> Self {
        let n = ms.space.len();
        Self {
            points: ms.space.labels().iter().map(|l| serde_json::Value::String(l.clone())).collect(),
            dist: (0..n).map(|i| ms.space.row(i).to_vec()).collect(),
            mass: ms.mass.clone(),
            root: ms.root,
        }
    }
}

/// A real function on a subset of a finite metric space.
#[derive(Debug, Clone, PartialEq)]
pub struct PartialFunction {
    pub domain: Vec<usize>,
    pub values: Vec<f64>,
}

impl PartialFunction {
    pub fn new(domain: Vec<usize>, values: Vec<f64>) -> Result<Self> {
        if domain.is_empty() {
            return Err(Error::Empty("function domain"));
        }
        if domain.len() != values.len() {
            return Err(Error::DimensionMismatch { expected: domain.len(), got: values.len() });
        }
        Ok(Self { domain, values })
    }

    /// A function defined on every point.
    pub fn total(values: Vec<f64>) -> Result<Self> {
        Self::new((0..values.len()).collect(), values)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BlNorm {
    pub sup_norm: f64,
    pub holder_const: f64,
    pub bl_norm: f64,
}

fn check_kappa(kappa: f64) -> Result<()> {
    ensure_range("kappa", kappa > 0.0 && kappa <= 1.0, || format!("{kappa} not in (0, 1]"))
}

/// Sup norm, κ-Hölder constant and their sum for `f` on its domain.
pub fn bl_norm(space: &FiniteMetricSpace, f: &PartialFunction, kappa: f64) -> Result<BlNorm> {
    check_kappa(kappa)?;
    if f.domain.is_empty() {
        return Err(Error::Empty("function domain"));
    }
    space.check_indices(&f.domain)?;
    let sup_norm = f.values.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    let mut holder_const = 0.0_f64;
    for (a, (&i, &fi)) in f.domain.iter().zip(&f.values).enumerate() {
        for (&j, &fj) in f.domain.iter().zip(&f.values).skip(a + 1) {
            if i == j {
                continue;
            }
            holder_const = holder_const.max((fi - fj).abs() / space.d(i, j).powf(kappa));
        }
    }
    Ok(BlNorm { sup_norm, holder_const, bl_norm: sup_norm + holder_const })
}

/// Extends `f` from its domain to the whole space without increasing its sup
/// norm or its κ-Hölder constant.
pub fn mcshane_extend(space: &FiniteMetricSpace, f: &PartialFunction, kappa: f64) -> Result<Vec<f64>> {
    let norm = bl_norm(space, f, kappa)?;
    let lip = norm.holder_const;
    let lo = f.values.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = f.values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut out: Vec<f64> = (0..space.len())
        .map(|x| {
            f.domain
                .iter()
                .zip(&f.values)
                .map(|(&a, &fa)| fa - lip * space.d(x, a).powf(kappa))
                .fold(f64::NEG_INFINITY, f64::max)
                .clamp(lo, hi)
        })
        .collect();
    for (&a, &fa) in f.domain.iter().zip(&f.values) {
        out[a] = fa;
    }
    Ok(out)
}

/// Optimal value and an optimal test function for the BL^κ distance.
#[derive(Debug, Clone, PartialEq)]
pub struct BlSolution {
    pub value: f64,
    /// Optimal test function on every point of the space.
    pub f: Vec<f64>,
    pub sup_bound: f64,
    pub holder_bound: f64,
}

/// BL^κ distance between two weight vectors on the same space.
pub fn bl_distance(space: &FiniteMetricSpace, mu: &[f64], nu: &[f64], kappa: f64) -> Result<f64> {
    Ok(bl_solve(space, mu, nu, kappa)?.value)
}

/// Solves `max Σ f_i (μ_i − ν_i)` over `|f| ≤ s`, `|f_i − f_j| ≤ ℓ d_ij^κ`,
/// `s + ℓ ≤ 1`.
///
/// Points where the two weights agree drop out: any test function on the
/// remaining points extends to the whole space with the same norm. The pair
/// constraints are generated lazily, starting from nearest neighbours.
pub fn bl_solve(space: &FiniteMetricSpace, mu: &[f64], nu: &[f64], kappa: f64) -> Result<BlSolution> {
    check_kappa(kappa)?;
    let n = space.len();
    check_mass(n, mu)?;
    check_mass(n, nu)?;
    let active: Vec<usize> = (0..n).filter(|&i| mu[i] != nu[i]).collect();
    if active.is_empty() {
        return Ok(BlSolution { value: 0.0, f: vec![0.0; n], sup_bound: 0.0, holder_bound: 0.0 });
    }
    let w: Vec<f64> = active.iter().map(|&i| mu[i] - nu[i]).collect();
    let sub = space.restrict(&active)?;
    let (value, f_active, s, ell) = solve_bl_lp(&sub, &w, kappa)?;
    let pf = PartialFunction::new(active, f_active)?;
    let f = mcshane_extend(space, &pf, kappa)?;
    Ok(BlSolution { value, f, sup_bound: s, holder_bound: ell })
}

const VIOLATION_TOL: f64 = 1e-11;

fn solve_bl_lp(space: &FiniteMetricSpace, w: &[f64], kappa: f64) -> Result<(f64, Vec<f64>, f64, f64)> {
    let n = space.len();
    let total: f64 = w.iter().sum();
    if n == 1 {
        let sign = if w[0] >= 0.0 { 1.0 } else { -1.0 };
        return Ok((w[0].abs(), vec![sign], 1.0, 0.0));
    }
    let dk = |i: usize, j: usize| space.d(i, j).powf(kappa);
    // g_i = f_i + s ∈ [0, 2s]; variables g_0..g_{n-1}, s, ℓ.
    let s_var = n;
    let l_var = n + 1;
    let mut c = w.to_vec();
    c.push(-total);
    c.push(0.0);
    let mut rows = Vec::with_capacity(n + 1);
    let mut rhs = Vec::with_capacity(n + 1);
    for i in 0..n {
        let mut row = vec![0.0; n + 2];
        row[i] = 1.0;
        row[s_var] = -2.0;
        rows.push(row);
        rhs.push(0.0);
    }
    let mut row = vec![0.0; n + 2];
    row[s_var] = 1.0;
    row[l_var] = 1.0;
    rows.push(row);
    rhs.push(1.0);
    let mut lp = Simplex::new(&c, &rows, &rhs)?;

    let mut added: HashSet<(usize, usize)> = HashSet::new();
    let add_pair = |lp: &mut Simplex, added: &mut HashSet<(usize, usize)>, i: usize, j: usize| -> Result<()> {
        if added.insert((i, j)) {
            lp.add_row(&[(i, 1.0), (j, -1.0), (l_var, -dk(i, j))], 0.0)?;
        }
        Ok(())
    };
    if n <= 30 {
        for i in 0..n {
            for j in 0..n {
                if i != j {
                    add_pair(&mut lp, &mut added, i, j)?;
                }
            }
        }
    } else {
        let k = 6.min(n - 1);
        for i in 0..n {
            let mut order: Vec<usize> = (0..n).filter(|&j| j != i).collect();
            order.select_nth_unstable_by(k - 1, |&a, &b| space.d(i, a).total_cmp(&space.d(i, b)));
            for &j in &order[..k] {
                add_pair(&mut lp, &mut added, i, j)?;
                add_pair(&mut lp, &mut added, j, i)?;
            }
        }
    }
    lp.solve_primal()?;
    loop {
        let x = lp.primal_solution();
        let ell = x[l_var];
        let mut violated: Vec<(f64, usize, usize)> = Vec::new();
        for i in 0..n {
            for j in 0..n {
                if i != j {
                    let excess = x[i] - x[j] - ell * dk(i, j);
                    if excess > VIOLATION_TOL {
                        violated.push((excess, i, j));
                    }
                }
            }
        }
        let s = x[s_var];
        if violated.is_empty() {
            let f = x[..n].iter().map(|g| g - s).collect();
            return Ok((lp.value().max(0.0), f, s, ell));
        }
        let cap = 4 * n;
        if violated.len() > cap {
            violated.select_nth_unstable_by(cap - 1, |a, b| b.0.total_cmp(&a.0));
            violated.truncate(cap);
        }
        let before = added.len();
        for &(_, i, j) in &violated {
            add_pair(&mut lp, &mut added, i, j)?;
        }
        if added.len() == before {
            // Every violated pair is already a row: the residue is tableau
            // roundoff, typical when some distances are tiny. Repair the
            // test function instead of iterating.
            let f = repair(space, &x[..n], s, ell, kappa);
            let value = f.iter().zip(w).map(|(a, b)| a * b).sum::<f64>().max(0.0);
            return Ok((value, f, s, ell));
        }
        lp.reoptimize()?;
    }
}

/// The largest function below `g − s` that is `ℓ`-Hölder and bounded by
/// `s`, i.e. the inf-convolution `min_j (f_j + ℓ d_ij^κ)` of the clamped
/// values.
fn repair(space: &FiniteMetricSpace, g: &[f64], s: f64, ell: f64, kappa: f64) -> Vec<f64> {
    let f: Vec<f64> = g.iter().map(|v| (v - s).clamp(-s, s)).collect();
    (0..f.len())
        .map(|i| (0..f.len()).map(|j| f[j] + ell * space.d(i, j).powf(kappa)).fold(f[i], f64::min))
        .collect()
}

/// Two index sets (optionally weighted and rooted) inside one ambient space.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddedPair {
    pub ambient: FiniteMetricSpace,
    pub index_a: Vec<usize>,
    pub index_b: Vec<usize>,
    pub mass_a: Option<Vec<f64>>,
    pub mass_b: Option<Vec<f64>>,
    pub root_a: Option<usize>,
    pub root_b: Option<usize>,
}

impl EmbeddedPair {
    pub fn new(ambient: FiniteMetricSpace, index_a: Vec<usize>, index_b: Vec<usize>) -> Result<Self> {
        if index_a.is_empty() || index_b.is_empty() {
            return Err(Error::Empty("index set"));
        }
        ambient.check_indices(&index_a)?;
        ambient.check_indices(&index_b)?;
        Ok(Self { ambient, index_a, index_b, mass_a: None, mass_b: None, root_a: None, root_b: None })
    }

    pub fn with_masses(mut self, mass_a: Vec<f64>, mass_b: Vec<f64>) -> Result<Self> {
        check_mass(self.index_a.len(), &mass_a)?;
        check_mass(self.index_b.len(), &mass_b)?;
        self.mass_a = Some(mass_a);
        self.mass_b = Some(mass_b);
        Ok(self)
    }

    pub fn with_roots(mut self, root_a: usize, root_b: usize) -> Result<Self> {
        if !self.index_a.contains(&root_a) || !self.index_b.contains(&root_b) {
            return Err(Error::OutOfRange { name: "root", reason: "roots must lie in their index sets".into() });
        }
        self.root_a = Some(root_a);
        self.root_b = Some(root_b);
        Ok(self)
    }

    /// The two measures pushed onto the ambient space.
    pub fn ambient_masses(&self) -> Result<(Vec<f64>, Vec<f64>)> {
        let (Some(ma), Some(mb)) = (&self.mass_a, &self.mass_b) else {
            return Err(Error::InvalidMeasure("embedded pair carries no masses".into()));
        };
        let n = self.ambient.len();
        let mut mu = vec![0.0; n];
        let mut nu = vec![0.0; n];
        for (&i, &m) in self.index_a.iter().zip(ma) {
            mu[i] += m;
        }
        for (&i, &m) in self.index_b.iter().zip(mb) {
            nu[i] += m;
        }
        Ok((mu, nu))
    }

    /// Root used to cut balls in the rooted distances. Root-preserving
    /// embeddings identify both roots; when they differ the first one is used.
    fn ambient_root(&self) -> Result<usize> {
        self.root_a.ok_or(Error::OutOfRange { name: "root", reason: "rooted distance needs roots".into() })
    }
}

fn one_sided(space: &FiniteMetricSpace, from: &[usize], to: &[usize]) -> f64 {
    from.iter()
        .map(|&a| to.iter().map(|&b| space.d(a, b)).fold(f64::INFINITY, f64::min))
        .fold(0.0, f64::max)
}

fn hausdorff_sets(space: &FiniteMetricSpace, a: &[usize], b: &[usize]) -> f64 {
    one_sided(space, a, b).max(one_sided(space, b, a))
}

pub fn hausdorff_distance(pair: &EmbeddedPair) -> Result<f64> {
    if pair.index_a.is_empty() || pair.index_b.is_empty() {
        return Err(Error::Empty("index set"));
    }
    Ok(hausdorff_sets(&pair.ambient, &pair.index_a, &pair.index_b))
}

/// Integrates `e^{-r} (1 ∧ value(r))` over `r ≥ 0` for an integrand that only
/// changes at the root distances `cuts` (sorted, distinct); `value(r_k)` is
/// evaluated once per cut.
fn step_integral(cuts: &[f64], mut value: impl FnMut(f64) -> Result<f64>) -> Result<f64> {
    let mut total = 0.0;
    for (k, &r) in cuts.iter().enumerate() {
        let v = value(r)?.min(1.0);
        let weight = match cuts.get(k + 1) {
            Some(&next) => (-r).exp() - (-next).exp(),
            None => (-r).exp(),
        };
        total += weight * v;
    }
    Ok(total)
}

fn root_cuts(space: &FiniteMetricSpace, root: usize, idx: impl Iterator<Item = usize>) -> Vec<f64> {
    let mut cuts: Vec<f64> = idx.map(|i| space.d(root, i)).collect();
    cuts.sort_by(f64::total_cmp);
    cuts.dedup();
    cuts
}

/// `∫₀^∞ e^{-r} (1 ∧ d_BL^κ(μ^{(r)}, ν^{(r)})) dr` with measures cut to the
/// closed ball `D(root, r)`.
pub fn rooted_bl_distance(pair: &EmbeddedPair, kappa: f64) -> Result<f64> {
    check_kappa(kappa)?;
    let root = pair.ambient_root()?;
    let (mu, nu) = pair.ambient_masses()?;
    let space = &pair.ambient;
    let support: Vec<usize> = (0..space.len()).filter(|&i| mu[i] > 0.0 || nu[i] > 0.0).collect();
    let cuts = root_cuts(space, root, support.iter().copied());
    step_integral(&cuts, |r| {
        let inside: Vec<usize> = support.iter().copied().filter(|&i| space.d(root, i) <= r).collect();
        let sub = space.restrict(&inside)?;
        let m: Vec<f64> = inside.iter().map(|&i| mu[i]).collect();
        let v: Vec<f64> = inside.iter().map(|&i| nu[i]).collect();
        bl_distance(&sub, &m, &v, kappa)
    })
}

/// Local Hausdorff distance: `∫₀^∞ e^{-r} (1 ∧ d_H(A^{(r)}, B^{(r)})) dr`.
/// One empty cut counts as distance 1, two empty cuts as 0.
pub fn local_hausdorff_distance(pair: &EmbeddedPair) -> Result<f64> {
    let root = pair.ambient_root()?;
    let space = &pair.ambient;
    let cuts = root_cuts(space, root, pair.index_a.iter().chain(&pair.index_b).copied());
    step_integral(&cuts, |r| {
        let a: Vec<usize> = pair.index_a.iter().copied().filter(|&i| space.d(root, i) <= r).collect();
        let b: Vec<usize> = pair.index_b.iter().copied().filter(|&i| space.d(root, i) <= r).collect();
        Ok(match (a.is_empty(), b.is_empty()) {
            (true, true) => 0.0,
            (true, false) | (false, true) => 1.0,
            (false, false) => hausdorff_sets(space, &a, &b),
        })
    })
}

/// Upper bound on the GHP-type distance realized by this particular
/// embedding: Hausdorff ∨ BL^κ, and also ∨ d(root_a, root_b) when rooted.
pub fn ghp_embedded_distance(pair: &EmbeddedPair, kappa: f64, rooted: bool) -> Result<f64> {
    let (mu, nu) = pair.ambient_masses()?;
    let mut out = hausdorff_distance(pair)?.max(bl_distance(&pair.ambient, &mu, &nu, kappa)?);
    if rooted {
        let (Some(ra), Some(rb)) = (pair.root_a, pair.root_b) else {
            return Err(Error::OutOfRange { name: "root", reason: "rooted distance needs roots".into() });
        };
        out = out.max(pair.ambient.d(ra, rb));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_points(d: f64) -> FiniteMetricSpace {
        FiniteMetricSpace::from_matrix(vec![vec![0.0, d], vec![d, 0.0]]).unwrap()
    }

    #[test]
    fn rejects_bad_matrices() {
        assert!(FiniteMetricSpace::from_matrix(vec![vec![0.0, 1.0], vec![2.0, 0.0]]).is_err());
        assert!(FiniteMetricSpace::from_matrix(vec![vec![0.0, 0.0], vec![0.0, 0.0]]).is_err());
        let bad = vec![vec![0.0, 1.0, 5.0], vec![1.0, 0.0, 1.0], vec![5.0, 1.0, 0.0]];
        assert!(FiniteMetricSpace::from_matrix(bad).is_err());
    }

    #[test]
    fn bl_norm_two_points() {
        let s = two_points(1.0);
        let n = bl_norm(&s, &PartialFunction::total(vec![0.0, 1.0]).unwrap(), 1.0).unwrap();
        assert_eq!((n.sup_norm, n.holder_const, n.bl_norm), (1.0, 1.0, 2.0));
        let c = bl_norm(&s, &PartialFunction::total(vec![-2.5, -2.5]).unwrap(), 0.5).unwrap();
        assert_eq!((c.sup_norm, c.holder_const, c.bl_norm), (2.5, 0.0, 2.5));
    }

    #[test]
    fn singleton_extension_is_constant() {
        let s = FiniteMetricSpace::from_matrix(vec![
            vec![0.0, 1.0, 2.0],
            vec![1.0, 0.0, 1.5],
            vec![2.0, 1.5, 0.0],
        ])
        .unwrap();
        let f = PartialFunction::new(vec![1], vec![3.0]).unwrap();
        assert_eq!(mcshane_extend(&s, &f, 0.7).unwrap(), vec![3.0; 3]);
    }

    #[test]
    fn dirac_pair_is_two_thirds() {
        let s = two_points(1.0);
        let sol = bl_solve(&s, &[1.0, 0.0], &[0.0, 1.0], 1.0).unwrap();
        assert!((sol.value - 2.0 / 3.0).abs() < 1e-12);
        assert!((sol.sup_bound - 1.0 / 3.0).abs() < 1e-12);
        assert!((sol.holder_bound - 2.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn near_duplicate_points_terminate_feasibly() {
        // pairs of points 1e-9 apart make the pair rows badly scaled
        let base = [0.0, 0.13, 0.4, 0.41, 0.9, 1.3, 1.31, 2.0, 2.2, 2.7, 3.1, 3.5, 3.55];
        let pts: Vec<f64> = base.iter().flat_map(|&x| [x, x + 1e-9]).collect();
        let dist = pts.iter().map(|a| pts.iter().map(|b| (a - b).abs()).collect()).collect();
        let space = FiniteMetricSpace::from_matrix(dist).unwrap();
        let n = pts.len();
        let mu: Vec<f64> = (0..n).map(|i| if i % 2 == 0 { 0.1 + 0.01 * i as f64 } else { 0.0 }).collect();
        let nu: Vec<f64> = (0..n).map(|i| if i % 2 == 1 { 0.35 - 0.01 * i as f64 } else { 0.0 }).collect();
        let sol = bl_solve(&space, &mu, &nu, 1.0).unwrap();
        let norm = bl_norm(&space, &PartialFunction::total(sol.f.clone()).unwrap(), 1.0).unwrap();
        // one ulp of f over a 1e-9 gap is already ~1e-7 of Hölder ratio
        assert!(norm.bl_norm <= 1.0 + 1e-6, "{norm:?}");
        let achieved: f64 = sol.f.iter().zip(mu.iter().zip(&nu)).map(|(f, (a, b))| f * (a - b)).sum();
        assert!((achieved - sol.value).abs() < 1e-9);
    }

    #[test]
    fn mass_against_zero_measure() {
        let s = two_points(0.3);
        let d = bl_distance(&s, &[0.0, 2.5], &[0.0, 0.0], 1.0).unwrap();
        assert!((d - 2.5).abs() < 1e-12);
    }

    #[test]
    fn rooted_single_point() {
        let s = two_points(0.8);
        let pair = EmbeddedPair::new(s, vec![0, 1], vec![0])
            .unwrap()
            .with_masses(vec![0.0, 0.6], vec![0.0])
            .unwrap()
            .with_roots(0, 0)
            .unwrap();
        let got = rooted_bl_distance(&pair, 1.0).unwrap();
        assert!((got - 0.6 * (-0.8f64).exp()).abs() < 1e-12);
    }

    #[test]
    fn json_round_trip() {
        let s = two_points(1.25).with_labels(vec!["p".into(), "q".into()]).unwrap();
        let ms = MeasuredSpace::new(s, vec![0.5, 1.0]).unwrap().with_root(1).unwrap();
        let back = MeasuredSpace::from_json(&ms.to_json()).unwrap();
        assert_eq!(back, ms);
        let numeric = r#"{"points": [0, 1], "dist": [[0, 2], [2, 0]], "mass": [1, 1]}"#;
        let parsed = MeasuredSpace::from_json(numeric).unwrap();
        assert_eq!(parsed.space.labels(), ["0", "1"]);
        assert!(MeasuredSpace::from_json(r#"{"points": [], "dist": [], "mass": [], "extra": 1}"#).is_err());
    }
}
