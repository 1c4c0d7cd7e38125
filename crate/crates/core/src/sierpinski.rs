//! Level-`n` approximations of the Sierpinski gasket and the rate
//! experiments built on them.
//!
//! Vertices carry exact affine coordinates `(a, b)` over the denominator
//! `2^n`: the point is `a·e₁ + b·e₂` with `e₁ = (1, 0)` and
//! `e₂ = (1/2, √3/2)` scaled by `2^{-n}`. The three outer corners are always
//! vertices `0`, `1`, `2`.

use std::collections::HashMap;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{ensure_range, Error, Result};
use crate::exponents::{log53, sierpinski_exponents};
use crate::metric::{bl_distance, FiniteMetricSpace};
use crate::network::{spectral, NetworkMeasure, ResistanceNetwork, SpectralDecomposition};
use crate::stats::{linear_fit, LinearFit};

pub const MAX_LEVEL: usize = 8;

#[derive(Debug, Clone)]
pub struct SGLevel {
    pub n: usize,
    /// Affine integer coordinates over `2^n`.
    pub coords: Vec<(i64, i64)>,
    pub edges: Vec<(usize, usize)>,
    /// Corner vertices of every cell, one entry per word in `{1,2,3}^n`.
    pub cells: Vec<[usize; 3]>,
    pub conductance: f64,
    pub mass: Vec<f64>,
}

pub fn build_sg_level(n: usize) -> Result<SGLevel> {
    ensure_range("n", n <= MAX_LEVEL, || format!("level {n} exceeds the cap {MAX_LEVEL}"))?;
    let side = 1_i64 << n;
    let mut index: HashMap<(i64, i64), usize> = HashMap::new();
    let mut coords = Vec::new();
    let mut vertex = |p: (i64, i64)| -> usize {
        *index.entry(p).or_insert_with(|| {
            coords.push(p);
            coords.len() - 1
        })
    };
    for p in [(0, 0), (side, 0), (0, side)] {
        vertex(p);
    }
    let mut cells = Vec::with_capacity(3usize.pow(n as u32));
    let mut stack = vec![((0_i64, 0_i64), side)];
    // Depth-first in word order: push children in reverse.
    let mut order = Vec::new();
    while let Some((o, s)) = stack.pop() {
        if s == 1 {
            order.push(o);
            continue;
        }
        let h = s / 2;
        stack.push(((o.0, o.1 + h), h));
        stack.push(((o.0 + h, o.1), h));
        stack.push((o, h));
    }
    let mut edges = Vec::with_capacity(3 * order.len());
    for o in order {
        let a = vertex(o);
        let b = vertex((o.0 + 1, o.1));
        let c = vertex((o.0, o.1 + 1));
        cells.push([a, b, c]);
        edges.extend([(a, b), (b, c), (a, c)]);
    }
    let total = 3.0_f64.powi(n as i32 + 1);
    let mut mass = vec![0.0; coords.len()];
    for cell in &cells {
        for &v in cell {
            mass[v] += 1.0 / total;
        }
    }
    Ok(SGLevel { n, coords, edges, cells, conductance: (5.0_f64 / 3.0).powi(n as i32), mass })
}

impl SGLevel {
    pub fn n_vertices(&self) -> usize {
        self.coords.len()
    }

    /// Euclidean position in the unit-side triangle.
    pub fn euclid(&self, v: usize) -> (f64, f64) {
        let scale = 1.0 / (1_i64 << self.n) as f64;
        let (a, b) = self.coords[v];
        ((a as f64 + 0.5 * b as f64) * scale, b as f64 * scale * 3.0_f64.sqrt() / 2.0)
    }

    pub fn euclid_distance(&self, u: usize, v: usize) -> f64 {
        let (x0, y0) = self.euclid(u);
        let (x1, y1) = self.euclid(v);
        (x0 - x1).hypot(y0 - y1)
    }

    pub fn network(&self) -> Result<ResistanceNetwork> {
        let edges: Vec<(usize, usize, f64)> = self.edges.iter().map(|&(a, b)| (a, b, self.conductance)).collect();
        ResistanceNetwork::new(self.n_vertices(), &edges)
    }

    pub fn measure(&self) -> Result<NetworkMeasure> {
        NetworkMeasure::new(self.mass.clone())
    }

    /// Index in `finer` of every vertex of `self`.
    pub fn embed_into(&self, finer: &SGLevel) -> Result<Vec<usize>> {
        ensure_range("finer", finer.n >= self.n, || format!("level {} is coarser than {}", finer.n, self.n))?;
        let shift = finer.n - self.n;
        let index: HashMap<(i64, i64), usize> = finer.coords.iter().enumerate().map(|(i, &p)| (p, i)).collect();
        self.coords
            .iter()
            .map(|&(a, b)| {
                index
                    .get(&(a << shift, b << shift))
                    .copied()
                    .ok_or_else(|| Error::Numerical("coarse vertex missing from finer level".into()))
            })
            .collect()
    }
}

/// Full pairwise effective resistance, row-major.
pub fn sg_resistance_matrix(lvl: &SGLevel) -> Result<Vec<f64>> {
    Ok(lvl.network()?.resistance_matrix().to_vec())
}

/// `max |R_{n+1}(x, y) − R_n(x, y)|` over `x, y ∈ V_n`.
pub fn decimation_check(n: usize) -> Result<f64> {
    let coarse = build_sg_level(n)?;
    let fine = build_sg_level(n + 1)?;
    let rc = coarse.network()?;
    let rf = fine.network()?;
    let map = coarse.embed_into(&fine)?;
    let mut worst = 0.0_f64;
    for x in 0..coarse.n_vertices() {
        for y in 0..coarse.n_vertices() {
            let a = rc.effective_resistance(x, y)?;
            let b = rf.effective_resistance(map[x], map[y])?;
            worst = worst.max((a - b).abs());
        }
    }
    Ok(worst)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DecayRow {
    pub n: usize,
    /// Distance from level `n` to the finest level.
    pub to_finest: f64,
    /// Distance from level `n` to level `n + 1`.
    pub consecutive: f64,
    /// `consecutive[n] / consecutive[n − 1]`.
    pub ratio: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DecayTable {
    pub rows: Vec<DecayRow>,
    /// Geometric decay rate per level fitted to the consecutive column.
    pub fitted_ratio: f64,
}

fn decay_table(values: Vec<(usize, f64, f64)>) -> Result<DecayTable> {
    let mut rows: Vec<DecayRow> = Vec::with_capacity(values.len());
    for (k, &(n, to_finest, consecutive)) in values.iter().enumerate() {
        let ratio = (k > 0).then(|| consecutive / values[k - 1].2);
        rows.push(DecayRow { n, to_finest, consecutive, ratio });
    }
    let xs: Vec<f64> = rows.iter().map(|r| r.n as f64).collect();
    let ys: Vec<f64> = rows.iter().map(|r| r.consecutive.ln()).collect();
    let fitted_ratio = if rows.len() >= 2 { linear_fit(&xs, &ys)?.slope.exp() } else { f64::NAN };
    Ok(DecayTable { rows, fitted_ratio })
}

struct Hierarchy {
    levels: Vec<SGLevel>,
    finest: ResistanceNetwork,
    /// `maps[n]` embeds level `n` into the finest level.
    maps: Vec<Vec<usize>>,
}

fn hierarchy(n_max: usize) -> Result<Hierarchy> {
    ensure_range("n_max", n_max >= 1, || "need at least two levels".into())?;
    let levels: Vec<SGLevel> = (0..=n_max).map(build_sg_level).collect::<Result<_>>()?;
    let finest = levels[n_max].network()?;
    let maps = levels.iter().map(|l| l.embed_into(&levels[n_max])).collect::<Result<_>>()?;
    Ok(Hierarchy { levels, finest, maps })
}

/// Hausdorff distances between vertex sets in the resistance metric of level
/// `n_max`, for `n = 0 … n_max − 1`.
pub fn sg_hausdorff_decay(n_max: usize) -> Result<DecayTable> {
    let h = hierarchy(n_max)?;
    let space = h.finest.resistance_space()?;
    let dh = |a: &[usize], b: &[usize]| {
        let one = |from: &[usize], to: &[usize]| {
            from.iter()
                .map(|&x| to.iter().map(|&y| space.d(x, y)).fold(f64::INFINITY, f64::min))
                .fold(0.0, f64::max)
        };
        one(a, b).max(one(b, a))
    };
    let values = (0..n_max)
        .map(|n| (n, dh(&h.maps[n], &h.maps[n_max]), dh(&h.maps[n], &h.maps[n + 1])))
        .collect();
    decay_table(values)
}

/// BL^κ distances between level measures in the resistance metric. The
/// consecutive column compares `μ_n` and `μ_{n+1}` on `V_{n+1}`; the
/// `to_finest` column compares `μ_n` with `μ_{n_max}` and is only filled in
/// when `with_finest` is set, since it solves linear programs on the finest
/// level.
pub fn sg_measure_decay(n_max: usize, kappa: f64, with_finest: bool) -> Result<DecayTable> {
    let h = hierarchy(n_max)?;
    let full = h.finest.resistance_space()?;
    let pushed = |n: usize| -> Vec<f64> {
        let mut m = vec![0.0; full.len()];
        for (v, &x) in h.maps[n].iter().enumerate() {
            m[x] = h.levels[n].mass[v];
        }
        m
    };
    let values: Vec<(usize, f64, f64)> = (0..n_max)
        .into_par_iter()
        .map(|n| {
            let support = &h.maps[n + 1];
            let sub = full.restrict(support)?;
            let (a, b) = (pushed(n), pushed(n + 1));
            let ma: Vec<f64> = support.iter().map(|&x| a[x]).collect();
            let mb: Vec<f64> = support.iter().map(|&x| b[x]).collect();
            let consecutive = bl_distance(&sub, &ma, &mb, kappa)?;
            let to_finest = if with_finest {
                bl_distance(&full, &a, &pushed(n_max), kappa)?
            } else {
                f64::NAN
            };
            Ok((n, to_finest, consecutive))
        })
        .collect::<Result<_>>()?;
    decay_table(values)
}

/// Least-squares slope of `log R` against `log d_E` over all vertex pairs.
pub fn euclid_resistance_fit(lvl: &SGLevel) -> Result<LinearFit> {
    let net = lvl.network()?;
    let n = lvl.n_vertices();
    let mut xs = Vec::with_capacity(n * (n - 1) / 2);
    let mut ys = Vec::with_capacity(n * (n - 1) / 2);
    for u in 0..n {
        for v in (u + 1)..n {
            xs.push(lvl.euclid_distance(u, v).ln());
            ys.push(net.effective_resistance(u, v)?.ln());
        }
    }
    linear_fit(&xs, &ys)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AhlforsFit {
    pub lower_c: f64,
    pub upper_c: f64,
    pub exponent: f64,
}

/// Fits `μ_n(B(x, r)) ≈ c r^s` in the resistance metric over every vertex
/// and radii `diam · (3/5)^k`, `k = 1 … n`. `lower_c` and `upper_c` bracket
/// `μ_n(B(x, r)) / r^s` with the fitted `s`.
pub fn ahlfors_fit(lvl: &SGLevel) -> Result<AhlforsFit> {
    ensure_range("n", lvl.n >= 2, || "need level ≥ 2 for several scales".into())?;
    let net = lvl.network()?;
    let space = net.resistance_space()?;
    let diam = space.diameter();
    let mut samples = Vec::new();
    for x in 0..lvl.n_vertices() {
        for k in 1..=lvl.n {
            let r = diam * 0.6_f64.powi(k as i32);
            let m: f64 = space.open_ball(x, r).iter().map(|&y| lvl.mass[y]).sum();
            samples.push((r, m));
        }
    }
    let xs: Vec<f64> = samples.iter().map(|s| s.0.ln()).collect();
    let ys: Vec<f64> = samples.iter().map(|s| s.1.ln()).collect();
    let fit = linear_fit(&xs, &ys)?;
    let s = fit.slope;
    let ratios = samples.iter().map(|&(r, m)| m / r.powf(s));
    let (lower_c, upper_c) = ratios.fold((f64::INFINITY, 0.0_f64), |(lo, hi), v| (lo.min(v), hi.max(v)));
    Ok(AhlforsFit { lower_c, upper_c, exponent: s })
}

/// `log_{5/3} 3`, the volume exponent in the resistance metric.
pub fn volume_exponent() -> f64 {
    log53(3.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ErrorRow {
    pub n: usize,
    pub err: f64,
    /// `(3/5)^{n E1} n^{E2}` without constant.
    pub bound: f64,
    /// `err / bound`.
    pub ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ErrorTable {
    pub rows: Vec<ErrorRow>,
    pub e1: f64,
    pub e2: f64,
    /// Fitted `b` in `err ≈ a (3/5)^{b n}`.
    pub fitted_exponent: f64,
}

fn level_spectra(n_lo: usize, n_hi: usize) -> Result<Vec<(SGLevel, SpectralDecomposition)>> {
    ensure_range("levels", n_lo >= 1 && n_lo < n_hi, || format!("need 1 ≤ n_lo < n_hi, got {n_lo}..{n_hi}"))?;
    (n_lo..=n_hi)
        .into_par_iter()
        .map(|n| {
            let lvl = build_sg_level(n)?;
            let sp = spectral(&lvl.network()?, &lvl.measure()?)?;
            Ok((lvl, sp))
        })
        .collect()
}

fn error_table(errs: Vec<(usize, f64)>, e1: f64, e2: f64) -> Result<ErrorTable> {
    let rows: Vec<ErrorRow> = errs
        .iter()
        .map(|&(n, err)| {
            let bound = 0.6_f64.powf(n as f64 * e1) * (n as f64).powf(e2);
            ErrorRow { n, err, bound, ratio: err / bound }
        })
        .collect();
    let xs: Vec<f64> = rows.iter().map(|r| r.n as f64 * 0.6_f64.ln()).collect();
    let ys: Vec<f64> = rows.iter().map(|r| r.err.ln()).collect();
    let fitted_exponent = if rows.len() >= 2 && rows.iter().all(|r| r.err > 0.0) {
        linear_fit(&xs, &ys)?.slope
    } else {
        f64::NAN
    };
    Ok(ErrorTable { rows, e1, e2, fitted_exponent })
}

/// `|P_t^n f(p) − P_t^{n+1} f(p)|` at the corner `p = (0, 0)` for
/// `n ∈ [n_lo, n_hi)`, with `f` a function of the Euclidean position.
pub fn sg_semigroup_error(
    n_lo: usize,
    n_hi: usize,
    t: f64,
    kappa: f64,
    f: &(dyn Fn(f64, f64) -> f64 + Sync),
) -> Result<ErrorTable> {
    let ex = sierpinski_exponents(kappa)?;
    ensure_range("t", t > 0.0 && t.is_finite(), || format!("{t} must be > 0"))?;
    let spectra = level_spectra(n_lo, n_hi)?;
    let values: Vec<f64> = spectra
        .iter()
        .map(|(lvl, sp)| {
            let fv: Vec<f64> = (0..lvl.n_vertices()).map(|v| {
                let (x, y) = lvl.euclid(v);
                f(x, y)
            }).collect();
            Ok(sp.semigroup_apply(t, &fv)?[0])
        })
        .collect::<Result<_>>()?;
    let errs = (0..values.len() - 1).map(|k| (n_lo + k, (values[k] - values[k + 1]).abs())).collect();
    error_table(errs, ex.e_sg1, ex.e_sg2)
}

/// `|p_n(t, p, q) − p_{n+1}(t, p, q)|` for the corners `p = (0, 0)` and
/// `q = (1, 0)`.
pub fn sg_heat_kernel_error(n_lo: usize, n_hi: usize, t: f64, kappa: f64) -> Result<ErrorTable> {
    let ex = sierpinski_exponents(kappa)?;
    ensure_range("t", t > 0.0 && t.is_finite(), || format!("{t} must be > 0"))?;
    let spectra = level_spectra(n_lo, n_hi)?;
    let values: Vec<f64> = spectra.iter().map(|(_, sp)| sp.heat_kernel(t, 0, 1)).collect::<Result<_>>()?;
    let errs = (0..values.len() - 1).map(|k| (n_lo + k, (values[k] - values[k + 1]).abs())).collect();
    error_table(errs, ex.e_hk1, ex.e_hk2)
}

/// Resistance metric of a level as a metric space.
pub fn sg_resistance_space(lvl: &SGLevel) -> Result<FiniteMetricSpace> {
    lvl.network()?.resistance_space()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_levels() {
        for (n, nv, ne) in [(0, 3, 3), (1, 6, 9), (2, 15, 27)] {
            let l = build_sg_level(n).unwrap();
            assert_eq!((l.n_vertices(), l.edges.len()), (nv, ne));
            assert!((l.mass.iter().sum::<f64>() - 1.0).abs() < 1e-14);
        }
        assert!(build_sg_level(9).is_err());
    }

    #[test]
    fn corners_first() {
        let l = build_sg_level(3).unwrap();
        assert_eq!(&l.coords[..3], &[(0, 0), (8, 0), (0, 8)]);
        let net = l.network().unwrap();
        assert!((net.effective_resistance(0, 1).unwrap() - 2.0 / 3.0).abs() < 1e-12);
    }
}
