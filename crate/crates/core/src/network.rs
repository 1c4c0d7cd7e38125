//! Finite resistance networks: effective and fused resistance, killed Green
//! functions, resolvents, spectral heat kernels and hitting times.
//!
//! Energy convention: `ℰ(f, f) = Σ_{edges {x,y}} c_xy (f(x) − f(y))²`, so a
//! single edge of conductance `c` has resistance `1/c`. The generator is
//! `Δf(x) = (1/μ_x) Σ_y c_xy (f(y) − f(x))`.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{ensure_range, Error, Result};
use crate::linalg::{cholesky, spd_solve, symmetric_eigen};
use crate::metric::{bl_norm, FiniteMetricSpace, PartialFunction};

/// Connected weighted graph with an eagerly computed pairwise resistance
/// matrix.
#[derive(Debug, Clone)]
pub struct ResistanceNetwork {
    n: usize,
    edges: Vec<(usize, usize, f64)>,
    adj: Vec<Vec<(usize, f64)>>,
    resistance: Vec<f64>,
}

impl ResistanceNetwork {
    /// Builds a network from `(i, j, c)` triples. Repeated pairs add up as
    /// parallel conductors; zero conductances are dropped.
    pub fn new(n: usize, edges: &[(usize, usize, f64)]) -> Result<Self> {
        if n == 0 {
            return Err(Error::Empty("network"));
        }
        let mut merged: BTreeMap<(usize, usize), f64> = BTreeMap::new();
        for &(i, j, c) in edges {
            if i >= n || j >= n {
                return Err(Error::IndexOutOfRange { index: i.max(j), len: n });
            }
            if i == j {
                return Err(Error::InvalidNetwork(format!("self-loop at vertex {i}")));
            }
            if !(c >= 0.0) || !c.is_finite() {
                return Err(Error::InvalidNetwork(format!("conductance {c} on ({i}, {j})")));
            }
            if c > 0.0 {
                *merged.entry((i.min(j), i.max(j))).or_insert(0.0) += c;
            }
        }
        let edges: Vec<(usize, usize, f64)> = merged.into_iter().map(|((i, j), c)| (i, j, c)).collect();
        let mut adj = vec![Vec::new(); n];
        for &(i, j, c) in &edges {
            adj[i].push((j, c));
            adj[j].push((i, c));
        }
        let mut seen = vec![false; n];
        let mut stack = vec![0];
        seen[0] = true;
        while let Some(v) = stack.pop() {
            for &(u, _) in &adj[v] {
                if !seen[u] {
                    seen[u] = true;
                    stack.push(u);
                }
            }
        }
        if seen.iter().any(|s| !s) {
            return Err(Error::Disconnected);
        }
        let mut net = Self { n, edges, adj, resistance: Vec::new() };
        net.resistance = net.compute_resistance()?;
        Ok(net)
    }

    fn compute_resistance(&self) -> Result<Vec<f64>> {
        let n = self.n;
        let mut r = vec![0.0; n * n];
        if n == 1 {
            return Ok(r);
        }
        // Ground vertex 0; the inverse of the reduced Laplacian is a
        // generalized inverse of L with zero row and column 0.
        let grounded: Vec<usize> = (1..n).collect();
        let g = cholesky(self.laplacian_on(&grounded))?.inverse();
        let at = |x: usize, y: usize| if x == 0 || y == 0 { 0.0 } else { g[(x - 1, y - 1)] };
        for x in 0..n {
            for y in (x + 1)..n {
                let v = at(x, x) + at(y, y) - 2.0 * at(x, y);
                r[x * n + y] = v;
                r[y * n + x] = v;
            }
        }
        Ok(r)
    }

    pub fn n_vertices(&self) -> usize {
        self.n
    }

    /// Merged edge list, `i < j`.
    pub fn edges(&self) -> &[(usize, usize, f64)] {
        &self.edges
    }

    pub fn neighbors(&self, x: usize) -> &[(usize, f64)] {
        &self.adj[x]
    }

    pub fn conductance(&self, x: usize, y: usize) -> f64 {
        self.adj[x].iter().filter(|(u, _)| *u == y).map(|(_, c)| c).sum()
    }

    /// Dense graph Laplacian `L = D − C`.
    pub fn laplacian(&self) -> DMatrix<f64> {
        let all: Vec<usize> = (0..self.n).collect();
        self.laplacian_on(&all)
    }

    /// Principal submatrix of the Laplacian on `idx` (rows and columns in
    /// that order).
    pub fn laplacian_on(&self, idx: &[usize]) -> DMatrix<f64> {
        let mut pos = vec![usize::MAX; self.n];
        for (k, &v) in idx.iter().enumerate() {
            pos[v] = k;
        }
        let m = idx.len();
        let mut l = DMatrix::zeros(m, m);
        for (k, &v) in idx.iter().enumerate() {
            for &(u, c) in &self.adj[v] {
                l[(k, k)] += c;
                if pos[u] != usize::MAX {
                    l[(k, pos[u])] -= c;
                }
            }
        }
        l
    }

    /// `ℰ(f, f)`.
    pub fn energy(&self, f: &[f64]) -> f64 {
        self.edges.iter().map(|&(i, j, c)| c * (f[i] - f[j]).powi(2)).sum()
    }

    /// `Δf`.
    pub fn generator_apply(&self, mu: &NetworkMeasure, f: &[f64]) -> Vec<f64> {
        (0..self.n)
            .map(|x| self.adj[x].iter().map(|&(y, c)| c * (f[y] - f[x])).sum::<f64>() / mu.mass[x])
            .collect()
    }

    fn check_vertex(&self, x: usize) -> Result<()> {
        if x < self.n {
            Ok(())
        } else {
            Err(Error::IndexOutOfRange { index: x, len: self.n })
        }
    }

    pub fn effective_resistance(&self, x: usize, y: usize) -> Result<f64> {
        self.check_vertex(x)?;
        self.check_vertex(y)?;
        Ok(self.resistance[x * self.n + y])
    }

    /// Row-major pairwise resistance matrix.
    pub fn resistance_matrix(&self) -> &[f64] {
        &self.resistance
    }

    /// The resistance metric as a [`FiniteMetricSpace`].
    pub fn resistance_space(&self) -> Result<FiniteMetricSpace> {
        FiniteMetricSpace::from_trusted(self.n, self.resistance.clone())
    }

    pub fn resistance_diameter(&self) -> f64 {
        self.resistance.iter().copied().fold(0.0, f64::max)
    }

    /// `R(x, A)`: resistance between `x` and the set `A` held at potential 0.
    pub fn resistance_to_set(&self, x: usize, set: &[usize]) -> Result<f64> {
        self.check_vertex(x)?;
        if set.is_empty() {
            return Err(Error::Empty("vertex set"));
        }
        for &a in set {
            self.check_vertex(a)?;
        }
        if set.contains(&x) {
            return Ok(0.0);
        }
        let free: Vec<usize> = (0..self.n).filter(|v| !set.contains(v)).collect();
        let k = free.iter().position(|&v| v == x).expect("x is free");
        let mut e = DVector::zeros(free.len());
        e[k] = 1.0;
        let u = spd_solve(self.laplacian_on(&free), &e)?;
        Ok(u[k])
    }

    /// Network with `set` identified to a single vertex. Returns the new
    /// network and the image of every old vertex.
    pub fn contract(&self, set: &[usize]) -> Result<(ResistanceNetwork, Vec<usize>)> {
        if set.is_empty() {
            return Err(Error::Empty("vertex set"));
        }
        for &a in set {
            self.check_vertex(a)?;
        }
        let mut image = vec![usize::MAX; self.n];
        let mut next = 0;
        for v in 0..self.n {
            if !set.contains(&v) {
                image[v] = next;
                next += 1;
            }
        }
        let fused = next;
        for &a in set {
            image[a] = fused;
        }
        let edges: Vec<(usize, usize, f64)> = self
            .edges
            .iter()
            .map(|&(i, j, c)| (image[i], image[j], c))
            .filter(|&(i, j, _)| i != j)
            .collect();
        Ok((ResistanceNetwork::new(fused + 1, &edges)?, image))
    }

    /// `R_A(y, z)`: effective resistance after fusing `A` into one vertex.
    pub fn fused_resistance(&self, y: usize, z: usize, set: &[usize]) -> Result<f64> {
        self.check_vertex(y)?;
        self.check_vertex(z)?;
        let (net, image) = self.contract(set)?;
        net.effective_resistance(image[y], image[z])
    }

    /// `g_x(y, z) = (R(x,y) + R(x,z) − R(y,z)) / 2`.
    pub fn point_green(&self, x: usize, y: usize, z: usize) -> Result<f64> {
        let r = |a, b| self.effective_resistance(a, b);
        Ok(0.5 * (r(x, y)? + r(x, z)? - r(y, z)?))
    }

    /// `E_x[σ_y]`, from `(−Δ)u = 1` off `y` with `u(y) = 0`.
    pub fn expected_hitting_time(&self, mu: &NetworkMeasure, x: usize, y: usize) -> Result<f64> {
        self.check_vertex(x)?;
        self.check_vertex(y)?;
        mu.check_len(self.n)?;
        if x == y {
            return Ok(0.0);
        }
        let free: Vec<usize> = (0..self.n).filter(|&v| v != y).collect();
        let rhs = DVector::from_iterator(free.len(), free.iter().map(|&v| mu.mass[v]));
        let u = spd_solve(self.laplacian_on(&free), &rhs)?;
        let k = free.iter().position(|&v| v == x).expect("x is free");
        Ok(u[k])
    }

    /// `P_x(σ_A ≤ t) ≤ 2[1 − ((R−δ)/(R+δ)) exp(−2t / (μ(B(x,δ))(R−δ)))]`
    /// with `R = R(x, A)` and `B(x, δ)` the open resistance ball.
    pub fn exit_bound_eval(&self, mu: &NetworkMeasure, x: usize, set: &[usize], delta: f64, t: f64) -> Result<f64> {
        mu.check_len(self.n)?;
        let r = self.resistance_to_set(x, set)?;
        ensure_range("delta", delta > 0.0 && delta < r, || format!("{delta} not in (0, R(x, A) = {r})"))?;
        ensure_range("t", t >= 0.0 && t.is_finite(), || format!("{t} must be ≥ 0"))?;
        let ball: f64 = (0..self.n)
            .filter(|&y| self.resistance[x * self.n + y] < delta)
            .map(|y| mu.mass[y])
            .sum();
        Ok(2.0 * (1.0 - (r - delta) / (r + delta) * (-2.0 * t / (ball * (r - delta))).exp()))
    }

    pub fn from_json(text: &str) -> Result<(Self, NetworkMeasure)> {
        let doc: NetworkDocument = serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
        let net = Self::new(doc.n, &doc.edges)?;
        let mu = NetworkMeasure::new(doc.mass)?;
        mu.check_len(net.n)?;
        Ok((net, mu))
    }

    pub fn to_json(&self, mu: &NetworkMeasure) -> String {
        let doc = NetworkDocument { n: self.n, edges: self.edges.clone(), mass: mu.mass.clone() };
        serde_json::to_string_pretty(&doc).expect("plain data serializes")
    }
}

/// On-disk form: `{"n": 3, "edges": [[0, 1, 1.0], ...], "mass": [...]}`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetworkDocument {
    pub n: usize,
    pub edges: Vec<(usize, usize, f64)>,
    pub mass: Vec<f64>,
}

/// Strictly positive vertex masses.
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkMeasure {
    pub mass: Vec<f64>,
}

impl NetworkMeasure {
    pub fn new(mass: Vec<f64>) -> Result<Self> {
        if mass.is_empty() {
            return Err(Error::Empty("measure"));
        }
        if let Some((i, m)) = mass.iter().enumerate().find(|(_, m)| !(**m > 0.0) || !m.is_finite()) {
            return Err(Error::InvalidMeasure(format!("mass[{i}] = {m} must be finite and > 0")));
        }
        Ok(Self { mass })
    }

    pub fn uniform(n: usize, each: f64) -> Result<Self> {
        Self::new(vec![each; n])
    }

    pub fn total(&self) -> f64 {
        self.mass.iter().sum()
    }

    fn check_len(&self, n: usize) -> Result<()> {
        if self.mass.len() == n {
            Ok(())
        } else {
            Err(Error::DimensionMismatch { expected: n, got: self.mass.len() })
        }
    }
}

/// A connected network on `2..=max_vertices` vertices: a random recursive
/// tree plus extra edges with probability 1/4, conductances uniform on
/// `[0.1, 10]`, masses uniform on `[0.1, 2]`.
pub fn random_network<R: Rng + ?Sized>(rng: &mut R, max_vertices: usize) -> Result<(ResistanceNetwork, NetworkMeasure)> {
    ensure_range("max_vertices", max_vertices >= 2, || format!("{max_vertices} must be ≥ 2"))?;
    let n = rng.random_range(2..=max_vertices);
    let mut edges = Vec::new();
    for v in 1..n {
        let u = rng.random_range(0..v);
        edges.push((u, v, rng.random_range(0.1..=10.0)));
    }
    for u in 0..n {
        for v in (u + 1)..n {
            if rng.random_bool(0.25) && !edges.iter().any(|&(a, b, _)| (a, b) == (u, v)) {
                edges.push((u, v, rng.random_range(0.1..=10.0)));
            }
        }
    }
    let mass = (0..n).map(|_| rng.random_range(0.1..=2.0)).collect();
    Ok((ResistanceNetwork::new(n, &edges)?, NetworkMeasure::new(mass)?))
}

/// Eigenpairs of `−Δ` on `L²(μ)`: `values` ascending, `phi` columns
/// μ-orthonormal.
#[derive(Debug, Clone)]
pub struct SpectralDecomposition {
    pub values: Vec<f64>,
    pub phi: DMatrix<f64>,
    pub mass: Vec<f64>,
}

/// Relative size below which a negative eigenvalue is treated as zero.
const EIGEN_FLOOR: f64 = 1e-12;

fn symmetrized_spectrum(l: DMatrix<f64>, mass: &[f64]) -> Result<SpectralDecomposition> {
    let m = mass.len();
    let inv_sqrt: Vec<f64> = mass.iter().map(|x| 1.0 / x.sqrt()).collect();
    let mut s = l;
    for i in 0..m {
        for j in 0..m {
            s[(i, j)] *= inv_sqrt[i] * inv_sqrt[j];
        }
    }
    let scale = s.iter().fold(1.0_f64, |a, v| a.max(v.abs()));
    let (mut values, vecs) = symmetric_eigen(s);
    for v in &mut values {
        if *v < 0.0 {
            if *v < -EIGEN_FLOOR * scale {
                return Err(Error::Numerical(format!("negative eigenvalue {v}")));
            }
            *v = 0.0;
        }
    }
    let mut phi = vecs;
    for i in 0..m {
        for k in 0..m {
            phi[(i, k)] *= inv_sqrt[i];
        }
    }
    Ok(SpectralDecomposition { values, phi, mass: mass.to_vec() })
}

pub fn spectral(net: &ResistanceNetwork, mu: &NetworkMeasure) -> Result<SpectralDecomposition> {
    mu.check_len(net.n)?;
    symmetrized_spectrum(net.laplacian(), &mu.mass)
}

impl SpectralDecomposition {
    pub fn len(&self) -> usize {
        self.mass.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mass.is_empty()
    }

    fn check_time(t: f64) -> Result<()> {
        ensure_range("t", t >= 0.0 && t.is_finite(), || format!("{t} must be finite and ≥ 0"))
    }

    /// `p(t, x, y)`, a density with respect to `μ`.
    pub fn heat_kernel(&self, t: f64, x: usize, y: usize) -> Result<f64> {
        ensure_range("t", t > 0.0 && t.is_finite(), || format!("{t} must be finite and > 0"))?;
        Ok((0..self.len())
            .map(|k| (-self.values[k] * t).exp() * self.phi[(x, k)] * self.phi[(y, k)])
            .sum())
    }

    /// `p(t, x, ·)`.
    pub fn heat_kernel_row(&self, t: f64, x: usize) -> Result<Vec<f64>> {
        ensure_range("t", t > 0.0 && t.is_finite(), || format!("{t} must be finite and > 0"))?;
        let n = self.len();
        let coef: Vec<f64> = (0..n).map(|k| (-self.values[k] * t).exp() * self.phi[(x, k)]).collect();
        Ok((0..n).map(|y| (0..n).map(|k| coef[k] * self.phi[(y, k)]).sum()).collect())
    }

    fn expand(&self, f: &[f64], weight: impl Fn(f64) -> f64) -> Vec<f64> {
        let n = self.len();
        let coef: Vec<f64> = (0..n)
            .map(|k| {
                let inner: f64 = (0..n).map(|z| self.phi[(z, k)] * f[z] * self.mass[z]).sum();
                weight(self.values[k]) * inner
            })
            .collect();
        (0..n).map(|y| (0..n).map(|k| coef[k] * self.phi[(y, k)]).sum()).collect()
    }

    /// `P_t f`.
    pub fn semigroup_apply(&self, t: f64, f: &[f64]) -> Result<Vec<f64>> {
        Self::check_time(t)?;
        if f.len() != self.len() {
            return Err(Error::DimensionMismatch { expected: self.len(), got: f.len() });
        }
        Ok(self.expand(f, |lambda| (-lambda * t).exp()))
    }

    /// `∫₀^∞ e^{−αt} P_t f dt`.
    pub fn resolvent_apply(&self, alpha: f64, f: &[f64]) -> Result<Vec<f64>> {
        ensure_range("alpha", alpha > 0.0 && alpha.is_finite(), || format!("{alpha} must be > 0"))?;
        if f.len() != self.len() {
            return Err(Error::DimensionMismatch { expected: self.len(), got: f.len() });
        }
        Ok(self.expand(f, |lambda| 1.0 / (alpha + lambda)))
    }

    /// `g^α(x, y) = Σ φ_k(x) φ_k(y) / (α + λ_k)`.
    pub fn potential_density(&self, alpha: f64, x: usize, y: usize) -> Result<f64> {
        ensure_range("alpha", alpha > 0.0 && alpha.is_finite(), || format!("{alpha} must be > 0"))?;
        Ok((0..self.len())
            .map(|k| self.phi[(x, k)] * self.phi[(y, k)] / (alpha + self.values[k]))
            .sum())
    }

    /// CSV with one row per eigenpair: `eigenvalue,phi_0,…,phi_{n−1}`.
    pub fn to_csv(&self) -> String {
        let n = self.len();
        let mut out = String::from("eigenvalue");
        for i in 0..n {
            let _ = write!(out, ",phi_{i}");
        }
        out.push('\n');
        for k in 0..n {
            let _ = write!(out, "{:.16e}", self.values[k]);
            for i in 0..n {
                let _ = write!(out, ",{:.16e}", self.phi[(i, k)]);
            }
            out.push('\n');
        }
        out
    }
}

/// Returns `(2 sup_{y∈A} R(x,y) / t + √2 / μ(A), p(t, x, x))`; the second
/// never exceeds the first.
pub fn hk_diag_bound_check(
    spec: &SpectralDecomposition,
    net: &ResistanceNetwork,
    mu: &NetworkMeasure,
    x: usize,
    t: f64,
    set: &[usize],
) -> Result<(f64, f64)> {
    if set.is_empty() {
        return Err(Error::Empty("vertex set"));
    }
    let mut sup_r = 0.0_f64;
    let mut mass = 0.0;
    for &y in set {
        sup_r = sup_r.max(net.effective_resistance(x, y)?);
        mass += mu.mass[y];
    }
    let bound = 2.0 * sup_r / t + std::f64::consts::SQRT_2 / mass;
    Ok((bound, spec.heat_kernel(t, x, x)?))
}

/// BL^κ norm of `p(t, x, ·)` in the given metric.
pub fn holder_norm_of_kernel(
    spec: &SpectralDecomposition,
    t: f64,
    x: usize,
    kappa: f64,
    metric: &FiniteMetricSpace,
) -> Result<f64> {
    let row = spec.heat_kernel_row(t, x)?;
    Ok(bl_norm(metric, &PartialFunction::total(row)?, kappa)?.bl_norm)
}

/// The process killed on hitting a nonempty proper vertex subset `A`.
#[derive(Debug, Clone)]
pub struct KilledSystem<'a> {
    net: &'a ResistanceNetwork,
    mu: &'a NetworkMeasure,
    set: Vec<usize>,
    in_set: Vec<bool>,
    free: Vec<usize>,
    fused: ResistanceNetwork,
    image: Vec<usize>,
}

impl<'a> KilledSystem<'a> {
    pub fn new(net: &'a ResistanceNetwork, mu: &'a NetworkMeasure, set: &[usize]) -> Result<Self> {
        mu.check_len(net.n)?;
        if set.is_empty() {
            return Err(Error::Empty("killing set"));
        }
        let mut in_set = vec![false; net.n];
        for &a in set {
            net.check_vertex(a)?;
            in_set[a] = true;
        }
        let free: Vec<usize> = (0..net.n).filter(|&v| !in_set[v]).collect();
        if free.is_empty() {
            return Err(Error::OutOfRange { name: "A", reason: "killing set must be a proper subset".into() });
        }
        let mut set: Vec<usize> = set.to_vec();
        set.sort_unstable();
        set.dedup();
        let (fused, image) = net.contract(&set)?;
        Ok(Self { net, mu, set, in_set, free, fused, image })
    }

    pub fn network(&self) -> &ResistanceNetwork {
        self.net
    }

    pub fn measure(&self) -> &NetworkMeasure {
        self.mu
    }

    pub fn killing_set(&self) -> &[usize] {
        &self.set
    }

    /// Vertices outside `A`, ascending.
    pub fn free_vertices(&self) -> &[usize] {
        &self.free
    }

    pub fn contains(&self, x: usize) -> bool {
        self.in_set[x]
    }

    /// `R(y, A)`, read off the fused network.
    pub fn resistance_to_set(&self, y: usize) -> Result<f64> {
        self.net.check_vertex(y)?;
        let hub = self.fused.n_vertices() - 1;
        self.fused.effective_resistance(self.image[y], hub)
    }

    /// `R_A(y, z)`.
    pub fn fused_resistance(&self, y: usize, z: usize) -> Result<f64> {
        self.net.check_vertex(y)?;
        self.net.check_vertex(z)?;
        self.fused.effective_resistance(self.image[y], self.image[z])
    }

    /// `g_A(y, z) = (R(y, A) + R(z, A) − R_A(y, z)) / 2`, zero when `y` or
    /// `z` lies in `A`.
    pub fn green_function(&self, y: usize, z: usize) -> Result<f64> {
        self.net.check_vertex(y)?;
        self.net.check_vertex(z)?;
        if self.in_set[y] || self.in_set[z] {
            return Ok(0.0);
        }
        Ok(0.5 * (self.resistance_to_set(y)? + self.resistance_to_set(z)? - self.fused_resistance(y, z)?))
    }

    /// `(G_A f)(y) = Σ_z g_A(y, z) f(z) μ_z`.
    pub fn killed_green_apply(&self, f: &[f64]) -> Result<Vec<f64>> {
        let n = self.net.n;
        if f.len() != n {
            return Err(Error::DimensionMismatch { expected: n, got: f.len() });
        }
        let r_set: Vec<f64> = (0..n).map(|y| self.resistance_to_set(y)).collect::<Result<_>>()?;
        let mut out = vec![0.0; n];
        for &y in &self.free {
            out[y] = self
                .free
                .iter()
                .map(|&z| {
                    let g = 0.5 * (r_set[y] + r_set[z] - self.fused.resistance[self.image[y] * self.fused.n + self.image[z]]);
                    g * f[z] * self.mu.mass[z]
                })
                .sum();
        }
        Ok(out)
    }

    /// Solves `(α − Δ_U) u = f` on `U = V ∖ A`, `u = 0` on `A`.
    pub fn resolvent_direct(&self, alpha: f64, f: &[f64]) -> Result<Vec<f64>> {
        ensure_range("alpha", alpha >= 0.0 && alpha.is_finite(), || format!("{alpha} must be ≥ 0"))?;
        let n = self.net.n;
        if f.len() != n {
            return Err(Error::DimensionMismatch { expected: n, got: f.len() });
        }
        let mut a = self.net.laplacian_on(&self.free);
        for (k, &v) in self.free.iter().enumerate() {
            a[(k, k)] += alpha * self.mu.mass[v];
        }
        let rhs = DVector::from_iterator(self.free.len(), self.free.iter().map(|&v| self.mu.mass[v] * f[v]));
        let u = spd_solve(a, &rhs)?;
        let mut out = vec![0.0; n];
        for (k, &v) in self.free.iter().enumerate() {
            out[v] = u[k];
        }
        Ok(out)
    }

    /// Killed α-potential densities `g_A^α(x, z)` as an `n × n` matrix,
    /// zero on rows and columns of `A`.
    pub fn potential_density_matrix(&self, alpha: f64) -> Result<DMatrix<f64>> {
        ensure_range("alpha", alpha >= 0.0 && alpha.is_finite(), || format!("{alpha} must be ≥ 0"))?;
        let mut a = self.net.laplacian_on(&self.free);
        for (k, &v) in self.free.iter().enumerate() {
            a[(k, k)] += alpha * self.mu.mass[v];
        }
        let inv = cholesky(a)?.inverse();
        let n = self.net.n;
        let mut out = DMatrix::zeros(n, n);
        for (i, &x) in self.free.iter().enumerate() {
            for (j, &z) in self.free.iter().enumerate() {
                out[(x, z)] = inv[(i, j)];
            }
        }
        Ok(out)
    }

    /// Spectral decomposition of the generator restricted to `U`.
    pub fn spectral(&self) -> Result<KilledSpectral> {
        let mass: Vec<f64> = self.free.iter().map(|&v| self.mu.mass[v]).collect();
        let inner = symmetrized_spectrum(self.net.laplacian_on(&self.free), &mass)?;
        let mut pos = vec![None; self.net.n];
        for (k, &v) in self.free.iter().enumerate() {
            pos[v] = Some(k);
        }
        Ok(KilledSpectral { inner, pos })
    }
}

/// Eigen-expansion of the killed semigroup, indexed by original vertices.
#[derive(Debug, Clone)]
pub struct KilledSpectral {
    pub inner: SpectralDecomposition,
    pos: Vec<Option<usize>>,
}

impl KilledSpectral {
    /// `p_A(t, x, z)`, zero if either point lies in `A`.
    pub fn heat_kernel(&self, t: f64, x: usize, z: usize) -> Result<f64> {
        match (self.pos[x], self.pos[z]) {
            (Some(i), Some(j)) => self.inner.heat_kernel(t, i, j),
            _ => Ok(0.0),
        }
    }

    /// `P_x(σ_A ≤ t) = 1 − Σ_z p_A(t, x, z) μ_z`.
    pub fn hitting_probability(&self, x: usize, t: f64) -> Result<f64> {
        let Some(i) = self.pos[x] else {
            return Ok(1.0);
        };
        ensure_range("t", t >= 0.0 && t.is_finite(), || format!("{t} must be ≥ 0"))?;
        let sp = &self.inner;
        let n = sp.len();
        let survive: f64 = (0..n)
            .map(|k| {
                let inner: f64 = (0..n).map(|z| sp.phi[(z, k)] * sp.mass[z]).sum();
                (-sp.values[k] * t).exp() * sp.phi[(i, k)] * inner
            })
            .sum();
        Ok((1.0 - survive).clamp(0.0, 1.0))
    }
}

/// `G_x^α f = Σ_{i≥1} (−α)^{i−1} G_x^{∘i} f`, summed until a term's sup norm
/// drops below `tol`. Requires `0 < α < 1 / (diam_R · μ(F))`.
pub fn resolvent_series(
    net: &ResistanceNetwork,
    mu: &NetworkMeasure,
    x: usize,
    alpha: f64,
    f: &[f64],
    tol: f64,
) -> Result<Vec<f64>> {
    let limit = 1.0 / (net.resistance_diameter() * mu.total());
    ensure_range("alpha", alpha > 0.0 && alpha < limit, || {
        format!("{alpha} outside the convergence window (0, {limit})")
    })?;
    ensure_range("tol", tol > 0.0, || format!("{tol} must be > 0"))?;
    let sys = KilledSystem::new(net, mu, &[x])?;
    let mut term = sys.killed_green_apply(f)?;
    let mut sum = term.clone();
    let mut factor = 1.0;
    for _ in 0..100_000 {
        factor *= -alpha;
        term = sys.killed_green_apply(&term)?;
        let size = term.iter().fold(0.0_f64, |m, v| m.max(v.abs())) * factor.abs();
        for (s, t) in sum.iter_mut().zip(&term) {
            *s += factor * t;
        }
        if size < tol {
            return Ok(sum);
        }
    }
    Err(Error::IterationLimit("resolvent series"))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn path3() -> ResistanceNetwork {
        ResistanceNetwork::new(3, &[(0, 1, 1.0), (1, 2, 1.0)]).unwrap()
    }

    #[test]
    fn series_and_parallel() {
        let edge = ResistanceNetwork::new(2, &[(0, 1, 4.0)]).unwrap();
        assert!((edge.effective_resistance(0, 1).unwrap() - 0.25).abs() < 1e-14);
        assert!((path3().effective_resistance(0, 2).unwrap() - 2.0).abs() < 1e-14);
        let tri = ResistanceNetwork::new(3, &[(0, 1, 1.0), (1, 2, 1.0), (0, 2, 1.0)]).unwrap();
        assert!((tri.effective_resistance(1, 2).unwrap() - 2.0 / 3.0).abs() < 1e-14);
    }

    #[test]
    fn resistance_to_sets() {
        let p = path3();
        assert!((p.resistance_to_set(0, &[2]).unwrap() - 2.0).abs() < 1e-14);
        assert!((p.resistance_to_set(1, &[0, 2]).unwrap() - 0.5).abs() < 1e-14);
        assert_eq!(p.resistance_to_set(2, &[2]).unwrap(), 0.0);
    }

    #[test]
    fn rejects_disconnected_and_loops() {
        assert_eq!(ResistanceNetwork::new(3, &[(0, 1, 1.0)]).unwrap_err(), Error::Disconnected);
        assert!(ResistanceNetwork::new(2, &[(0, 0, 1.0), (0, 1, 1.0)]).is_err());
        assert!(ResistanceNetwork::new(2, &[(0, 1, -1.0)]).is_err());
    }

    #[test]
    fn green_diagonal_is_resistance_to_set() {
        let p = path3();
        let mu = NetworkMeasure::uniform(3, 1.0).unwrap();
        let sys = KilledSystem::new(&p, &mu, &[0]).unwrap();
        for y in 0..3 {
            let g = sys.green_function(y, y).unwrap();
            assert!((g - p.resistance_to_set(y, &[0]).unwrap()).abs() < 1e-13);
        }
        assert_eq!(sys.green_function(0, 2).unwrap(), 0.0);
    }

    #[test]
    fn two_vertex_heat_kernel() {
        let (c, m1, m2) = (1.5, 0.4, 1.1);
        let net = ResistanceNetwork::new(2, &[(0, 1, c)]).unwrap();
        let mu = NetworkMeasure::new(vec![m1, m2]).unwrap();
        let sp = spectral(&net, &mu).unwrap();
        let lambda = c * (1.0 / m1 + 1.0 / m2);
        let total = m1 + m2;
        for t in [0.05, 0.7, 3.0] {
            let want = 1.0 / total + (total - m1) / (m1 * total) * (-lambda * t).exp();
            assert!((sp.heat_kernel(t, 0, 0).unwrap() - want).abs() < 1e-13);
        }
    }

    #[test]
    fn json_round_trip() {
        let p = path3();
        let mu = NetworkMeasure::new(vec![1.0, 2.0, 0.5]).unwrap();
        let (q, nu) = ResistanceNetwork::from_json(&p.to_json(&mu)).unwrap();
        assert_eq!(q.edges(), p.edges());
        assert_eq!(nu, mu);
    }
}
