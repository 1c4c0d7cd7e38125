//! Shared random-graph corpus and dense oracles for the integration tests.

#![allow(dead_code)]

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use reslab::network::{NetworkMeasure, ResistanceNetwork};

pub struct Case {
    pub n: usize,
    pub edges: Vec<(usize, usize, f64)>,
    pub net: ResistanceNetwork,
    pub mu: NetworkMeasure,
}

/// Connected graph on at most 12 vertices: a random recursive tree plus extra
/// edges, conductances uniform on [0.1, 10], masses uniform on [0.1, 2].
pub fn random_case(rng: &mut ChaCha8Rng) -> Case {
    let n = rng.random_range(2..=12);
    let mut edges = Vec::new();
    for v in 1..n {
        let u = rng.random_range(0..v);
        edges.push((u, v, rng.random_range(0.1..=10.0)));
    }
    for u in 0..n {
        for v in (u + 2)..n {
            if rng.random_bool(0.25) && !edges.iter().any(|&(a, b, _)| (a, b) == (u, v)) {
                edges.push((u, v, rng.random_range(0.1..=10.0)));
            }
        }
    }
    let mass = (0..n).map(|_| rng.random_range(0.1..=2.0)).collect();
    let net = ResistanceNetwork::new(n, &edges).unwrap();
    let mu = NetworkMeasure::new(mass).unwrap();
    Case { n, edges, net, mu }
}

/// The fixed 50-graph corpus.
pub fn corpus() -> Vec<Case> {
    let mut rng = ChaCha8Rng::seed_from_u64(20_240_611);
    (0..50).map(|_| random_case(&mut rng)).collect()
}

pub fn laplacian(n: usize, edges: &[(usize, usize, f64)]) -> DMatrix<f64> {
    let mut l = DMatrix::zeros(n, n);
    for &(u, v, c) in edges {
        l[(u, u)] += c;
        l[(v, v)] += c;
        l[(u, v)] -= c;
        l[(v, u)] -= c;
    }
    l
}

/// Effective resistances from `(L + J/n)^{-1}`.
pub fn oracle_resistance(n: usize, edges: &[(usize, usize, f64)]) -> DMatrix<f64> {
    let shift = DMatrix::from_element(n, n, 1.0 / n as f64);
    let g = (laplacian(n, edges) + shift).try_inverse().unwrap();
    DMatrix::from_fn(n, n, |x, y| g[(x, x)] + g[(y, y)] - 2.0 * g[(x, y)])
}

/// `(L_U + α M_U)^{-1}` as an `n × n` kernel, zero off `U`.
pub fn oracle_killed_kernel(case: &Case, set: &[usize], alpha: f64) -> DMatrix<f64> {
    let free: Vec<usize> = (0..case.n).filter(|v| !set.contains(v)).collect();
    let l = laplacian(case.n, &case.edges);
    let mut sub = DMatrix::from_fn(free.len(), free.len(), |i, j| l[(free[i], free[j])]);
    for (i, &v) in free.iter().enumerate() {
        sub[(i, i)] += alpha * case.mu.mass[v];
    }
    let inv = sub.try_inverse().unwrap();
    let mut out = DMatrix::zeros(case.n, case.n);
    for (i, &x) in free.iter().enumerate() {
        for (j, &z) in free.iter().enumerate() {
            out[(x, z)] = inv[(i, j)];
        }
    }
    out
}

/// A random nonempty proper vertex subset.
pub fn random_subset(rng: &mut ChaCha8Rng, n: usize) -> Vec<usize> {
    loop {
        let set: Vec<usize> = (0..n).filter(|_| rng.random_bool(0.35)).collect();
        if !set.is_empty() && set.len() < n {
            return set;
        }
    }
}
