//! One-dimensional Bouchaud trap model on `n⁻¹ℤ`.
//!
//! The chain on sites `i ∈ {−m, …, m}` (position `i/n`) has vertex masses
//! `τ_i/n` and nearest-neighbour conductances `n/2` (or `n` in the
//! unit-resistance convention), with a reflecting boundary at the window
//! edge. Heat kernels are computed through the symmetrized generator
//! `B = M^{-1/2} L M^{-1/2}`, which is tridiagonal, by a Chebyshev expansion
//! of `exp(−tB)`.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;

use crate::error::{ensure_range, Error, Result};
use crate::linalg::SymTridiagonal;
use crate::line::line_bl_distance;
use crate::metric::{bl_distance, FiniteMetricSpace};
use crate::rng::{mix_seed, SiteUniforms};
use crate::stats::{rate_fit, RateFit};

/// How the generator is normalized.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Convention {
    /// Conductance `n/2`, jump rate `n²/(2τ_x)` to each neighbour.
    #[default]
    PaperGenerator,
    /// Conductance `n`, so the resistance metric is Euclidean distance.
    UnitResistance,
}

impl Convention {
    pub fn conductance(self, n: usize) -> f64 {
        match self {
            Convention::PaperGenerator => n as f64 / 2.0,
            Convention::UnitResistance => n as f64,
        }
    }

    /// Variance per unit time of the homogenized Brownian motion.
    pub fn diffusivity(self, mean_tau: f64) -> f64 {
        match self {
            Convention::PaperGenerator => 1.0 / mean_tau,
            Convention::UnitResistance => 2.0 / mean_tau,
        }
    }
}

impl fmt::Display for Convention {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Convention::PaperGenerator => "paper_generator",
            Convention::UnitResistance => "unit_resistance",
        })
    }
}

impl FromStr for Convention {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "paper_generator" | "paper" => Ok(Convention::PaperGenerator),
            "unit_resistance" | "unit" => Ok(Convention::UnitResistance),
            other => Err(Error::Parse(format!("unknown convention `{other}`"))),
        }
    }
}

/// `E[τ] = α/(α − 1)`; equal to 1 for `α = ∞`.
pub fn mean_trap_depth(alpha: f64) -> Result<f64> {
    ensure_range("alpha", alpha > 1.0, || format!("{alpha} must be > 1"))?;
    Ok(if alpha.is_infinite() { 1.0 } else { alpha / (alpha - 1.0) })
}

/// Trap depths `τ_i` on sites `−window ..= window`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrapEnvironment {
    pub alpha: f64,
    pub window: usize,
    pub seed: u64,
    traps: Vec<f64>,
}

impl TrapEnvironment {
    /// Draws `τ = U^{-1/α}` with `U` uniform on (0, 1), keyed by site, so
    /// `P(τ > u) = u^{-α}` for `u ≥ 1`. `α = ∞` gives `τ ≡ 1`.
    pub fn sample(alpha: f64, window: usize, seed: u64) -> Result<Self> {
        ensure_range("alpha", alpha > 1.0, || format!("{alpha} must be > 1"))?;
        let w = window as i64;
        let traps = if alpha.is_infinite() {
            vec![1.0; 2 * window + 1]
        } else {
            let mut u = SiteUniforms::new(seed);
            (-w..=w).map(|i| u.at(i).powf(-1.0 / alpha)).collect()
        };
        Ok(Self { alpha, window, seed, traps })
    }

    /// The deterministic environment `τ ≡ 1` (simple random walk).
    pub fn constant(window: usize) -> Self {
        Self { alpha: f64::INFINITY, window, seed: 0, traps: vec![1.0; 2 * window + 1] }
    }

    pub fn trap(&self, site: i64) -> Result<f64> {
        let idx = site + self.window as i64;
        if idx < 0 || idx as usize >= self.traps.len() {
            return Err(Error::IndexOutOfRange { index: site.unsigned_abs() as usize, len: self.window + 1 });
        }
        Ok(self.traps[idx as usize])
    }

    pub fn traps(&self) -> &[f64] {
        &self.traps
    }

    pub fn mean_depth(&self) -> f64 {
        mean_trap_depth(self.alpha).unwrap_or(1.0)
    }
}

/// Same as [`TrapEnvironment::sample`].
pub fn sample_environment(alpha: f64, window: usize, seed: u64) -> Result<TrapEnvironment> {
    TrapEnvironment::sample(alpha, window, seed)
}

/// The trap-model chain on a finite reflecting window.
#[derive(Debug, Clone)]
pub struct BtmChain {
    pub n: usize,
    pub radius: f64,
    pub convention: Convention,
    /// Sites `−half ..= half`.
    pub half: usize,
    pub conductance: f64,
    pub mass: Vec<f64>,
    sqrt_mass: Vec<f64>,
    op: SymTridiagonal,
}

/// Builds the chain on sites `|i| ≤ ⌊n r⌋`.
pub fn build_chain(env: &TrapEnvironment, n: usize, r: f64, convention: Convention) -> Result<BtmChain> {
    ensure_range("n", n >= 1, || "scale must be positive".into())?;
    ensure_range("r", r > 0.0 && r.is_finite(), || format!("{r} must be positive"))?;
    let half = (n as f64 * r).floor() as usize;
    ensure_range("r", half >= 1, || "window holds a single site".into())?;
    if half > env.window {
        return Err(Error::OutOfRange {
            name: "window",
            reason: format!("environment has {} sites per side, chain needs {half}", env.window),
        });
    }
    let c = convention.conductance(n);
    let mass: Vec<f64> = (-(half as i64)..=half as i64)
        .map(|i| env.trap(i).map(|t| t / n as f64))
        .collect::<Result<_>>()?;
    let len = mass.len();
    let sqrt_mass: Vec<f64> = mass.iter().map(|m| m.sqrt()).collect();
    let diag: Vec<f64> = (0..len)
        .map(|k| {
            let degree = if k == 0 || k + 1 == len { 1.0 } else { 2.0 };
            degree * c / mass[k]
        })
        .collect();
    let off: Vec<f64> = (0..len - 1).map(|k| -c / (sqrt_mass[k] * sqrt_mass[k + 1])).collect();
    Ok(BtmChain { n, radius: r, convention, half, conductance: c, mass, sqrt_mass, op: SymTridiagonal::new(diag, off)? })
}

impl BtmChain {
    pub fn len(&self) -> usize {
        self.mass.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mass.is_empty()
    }

    /// Array index of site `i`.
    pub fn index(&self, site: i64) -> Result<usize> {
        let k = site + self.half as i64;
        if k < 0 || k as usize >= self.len() {
            return Err(Error::IndexOutOfRange { index: site.unsigned_abs() as usize, len: self.half + 1 });
        }
        Ok(k as usize)
    }

    pub fn site(&self, index: usize) -> i64 {
        index as i64 - self.half as i64
    }

    pub fn position(&self, index: usize) -> f64 {
        self.site(index) as f64 / self.n as f64
    }

    /// Jump rate from array index `k` to `k ± 1` (zero off the window).
    pub fn rate(&self, from: usize, to: usize) -> f64 {
        if to < self.len() && from.abs_diff(to) == 1 {
            self.conductance / self.mass[from]
        } else {
            0.0
        }
    }

    /// `(Lf)(k) = Σ_j rate(k, j)(f(j) − f(k))`.
    pub fn generator_apply(&self, f: &[f64]) -> Result<Vec<f64>> {
        if f.len() != self.len() {
            return Err(Error::DimensionMismatch { expected: self.len(), got: f.len() });
        }
        Ok((0..self.len())
            .map(|k| {
                let mut acc = 0.0;
                if k > 0 {
                    acc += self.rate(k, k - 1) * (f[k - 1] - f[k]);
                }
                if k + 1 < self.len() {
                    acc += self.rate(k, k + 1) * (f[k + 1] - f[k]);
                }
                acc
            })
            .collect())
    }

    /// `p_n(t, x, ·)` as a density with respect to the masses.
    pub fn heat_kernel_row(&self, t: f64, x: usize) -> Result<Vec<f64>> {
        self.index_ok(x)?;
        let mut e = vec![0.0; self.len()];
        e[x] = 1.0;
        let v = self.op.exp_neg_apply(t, &e)?;
        Ok(v.iter().zip(&self.sqrt_mass).map(|(vy, sy)| vy / (self.sqrt_mass[x] * sy)).collect())
    }

    pub fn heat_kernel(&self, t: f64, x: usize, y: usize) -> Result<f64> {
        self.index_ok(y)?;
        Ok(self.heat_kernel_row(t, x)?[y])
    }

    /// `P_t f` at every site.
    pub fn semigroup_apply(&self, t: f64, f: &[f64]) -> Result<Vec<f64>> {
        if f.len() != self.len() {
            return Err(Error::DimensionMismatch { expected: self.len(), got: f.len() });
        }
        let v: Vec<f64> = f.iter().zip(&self.sqrt_mass).map(|(fi, si)| fi * si).collect();
        let w = self.op.exp_neg_apply(t, &v)?;
        Ok(w.iter().zip(&self.sqrt_mass).map(|(wi, si)| wi / si).collect())
    }

    /// `P_x(X_t ∈ ·)` as point masses.
    pub fn transition_row(&self, t: f64, x: usize) -> Result<Vec<f64>> {
        let p = self.heat_kernel_row(t, x)?;
        Ok(p.iter().zip(&self.mass).map(|(p, m)| p * m).collect())
    }

    /// The same chain as a general network, for cross-checks on small windows.
    pub fn to_network(&self) -> Result<(crate::network::ResistanceNetwork, crate::network::NetworkMeasure)> {
        let edges: Vec<(usize, usize, f64)> = (0..self.len() - 1).map(|k| (k, k + 1, self.conductance)).collect();
        Ok((
            crate::network::ResistanceNetwork::new(self.len(), &edges)?,
            crate::network::NetworkMeasure::new(self.mass.clone())?,
        ))
    }

    fn index_ok(&self, k: usize) -> Result<()> {
        if k >= self.len() {
            return Err(Error::IndexOutOfRange { index: k, len: self.len() });
        }
        Ok(())
    }
}

/// Brownian motion with variance `σ²` per unit time, viewed as a process
/// with speed measure `E[τ]·dx`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LimitDiffusion {
    pub mean_tau: f64,
    pub sigma2: f64,
}

impl LimitDiffusion {
    pub fn new(mean_tau: f64, convention: Convention) -> Self {
        Self { mean_tau, sigma2: convention.diffusivity(mean_tau) }
    }

    /// Density of `X_t` started at `x`, with respect to `E[τ]·dx`.
    pub fn heat_kernel(&self, t: f64, x: f64, y: f64) -> f64 {
        let v = self.sigma2 * t;
        (-(x - y).powi(2) / (2.0 * v)).exp() / ((2.0 * std::f64::consts::PI * v).sqrt() * self.mean_tau)
    }

    /// `P_x(X_t ≤ y)`.
    pub fn cdf(&self, t: f64, x: f64, y: f64) -> f64 {
        0.5 * erfc(-(y - x) / (2.0 * self.sigma2 * t).sqrt())
    }

    /// `E_x[cos X_t] = cos(x) e^{−σ²t/2}`.
    pub fn cos_semigroup(&self, t: f64, x: f64) -> f64 {
        x.cos() * (-0.5 * self.sigma2 * t).exp()
    }
}

/// Limit kernel under the default generator convention
/// `(1/E[τ]) (2πσ²t)^{-1/2} exp(−(x−y)²/(2σ²t))`, `σ² = 1/E[τ]`.
pub fn limit_heat_kernel(mean_tau: f64, t: f64, x: f64, y: f64) -> f64 {
    LimitDiffusion::new(mean_tau, Convention::PaperGenerator).heat_kernel(t, x, y)
}

/// Window radius making the sub-Gaussian escape bound `4e^{−r²/(8t)}`
/// smaller than `tol`.
pub fn window_radius(t: f64, tol: f64) -> f64 {
    (8.0 * t * (4.0 / tol).ln()).sqrt()
}

/// Escape tolerance used by the experiments.
pub const ESCAPE_TOL: f64 = 1e-9;

const CDF_GRID: usize = 4001;

/// `sup_x |P_0(X_t ≤ x) − P_0^n(X^n_t ≤ x)|` over 4001 points spanning
/// `±6σ√t`. The discrete distribution function is right-continuous.
pub fn quenched_cdf_error(env: &TrapEnvironment, n: usize, t: f64, r: f64, convention: Convention) -> Result<f64> {
    let chain = build_chain(env, n, r, convention)?;
    cdf_error(&chain, t, &LimitDiffusion::new(env.mean_depth(), convention))
}

fn cdf_error(chain: &BtmChain, t: f64, limit: &LimitDiffusion) -> Result<f64> {
    let row = chain.transition_row(t, chain.index(0)?)?;
    let mut cum = Vec::with_capacity(row.len());
    let mut acc = 0.0;
    for p in &row {
        acc += p;
        cum.push(acc);
    }
    let span = 6.0 * (limit.sigma2 * t).sqrt();
    let mut worst: f64 = 0.0;
    for g in 0..CDF_GRID {
        let x = -span + 2.0 * span * g as f64 / (CDF_GRID - 1) as f64;
        let site = (x * chain.n as f64).floor() as i64;
        let discrete = if site < -(chain.half as i64) {
            0.0
        } else if site >= chain.half as i64 {
            1.0
        } else {
            cum[chain.index(site)?]
        };
        worst = worst.max((limit.cdf(t, 0.0, x) - discrete).abs());
    }
    Ok(worst)
}

/// `d_BL^κ(E[τ]·Leb|_{[−r,r]}, μ_n|_{[−r,r]})`, the Lebesgue part replaced by
/// point masses at the midpoints of cells of width `1/(8n)`.
pub fn quenched_bl_error(env: &TrapEnvironment, n: usize, r: f64, kappa: f64) -> Result<f64> {
    ensure_range("kappa", kappa > 0.0 && kappa <= 1.0, || format!("{kappa} not in (0, 1]"))?;
    let half = (n as f64 * r).floor() as i64;
    let nf = n as f64;
    let atoms: Vec<(f64, f64)> = (-half..=half).map(|i| Ok((i as f64 / nf, env.trap(i)? / nf))).collect::<Result<_>>()?;
    let cells = (16.0 * nf * r).round() as usize;
    let h = 2.0 * r / cells as f64;
    let mean = env.mean_depth();
    let leb: Vec<(f64, f64)> = (0..cells).map(|k| (-r + (k as f64 + 0.5) * h, mean * h)).collect();
    if kappa == 1.0 {
        return line_bl_distance(&leb, &atoms);
    }
    let mut pts: Vec<f64> = leb.iter().chain(&atoms).map(|a| a.0).collect();
    pts.sort_by(f64::total_cmp);
    pts.dedup();
    let idx = |x: f64| pts.partition_point(|&p| p < x);
    let mut mu = vec![0.0; pts.len()];
    let mut nu = vec![0.0; pts.len()];
    for &(x, m) in &leb {
        mu[idx(x)] += m;
    }
    for &(x, m) in &atoms {
        nu[idx(x)] += m;
    }
    let k = pts.len();
    let dist: Vec<f64> = (0..k * k).map(|q| (pts[q / k] - pts[q % k]).abs()).collect();
    let space = FiniteMetricSpace::from_trusted(k, dist)?;
    bl_distance(&space, &mu, &nu, kappa)
}

/// `sup_{|x| ≤ reach} |E_x f(X^n_t) − E_x f(X_t)|` for `f = ½ cos`, a
/// function with BL norm 1.
pub fn semigroup_error(chain: &BtmChain, t: f64, limit: &LimitDiffusion, reach: f64) -> Result<f64> {
    let f: Vec<f64> = (0..chain.len()).map(|k| 0.5 * chain.position(k).cos()).collect();
    let pf = chain.semigroup_apply(t, &f)?;
    let mut worst: f64 = 0.0;
    for (k, v) in pf.iter().enumerate() {
        let x = chain.position(k);
        if x.abs() <= reach {
            worst = worst.max((v - 0.5 * limit.cos_semigroup(t, x)).abs());
        }
    }
    Ok(worst)
}

/// `sup_{|y| ≤ reach} |p_n(t, 0, y) − p(t, 0, y)|`.
pub fn heat_kernel_error(chain: &BtmChain, t: f64, limit: &LimitDiffusion, reach: f64) -> Result<f64> {
    let row = chain.heat_kernel_row(t, chain.index(0)?)?;
    let mut worst: f64 = 0.0;
    for (k, p) in row.iter().enumerate() {
        let y = chain.position(k);
        if y.abs() <= reach {
            worst = worst.max((p - limit.heat_kernel(t, 0.0, y)).abs());
        }
    }
    Ok(worst)
}

/// `(P_x(σ_{B(x,r)^c} ≤ t), 4e^{−r²/(8t)})` for the chain started at array
/// index `x`, computed from the chain killed on leaving the open ball.
pub fn exit_probability_bound_check(chain: &BtmChain, t: f64, r: f64, x: usize) -> Result<(f64, f64)> {
    chain.index_ok(x)?;
    ensure_range("t", t > 0.0 && t.is_finite(), || format!("{t} must be positive"))?;
    ensure_range("r", r > 0.0 && r <= 4.0 * chain.n as f64 * t, || format!("{r} must lie in (0, 4nt]"))?;
    let nf = chain.n as f64;
    let inside: Vec<usize> = (0..chain.len())
        .filter(|&k| ((k as f64 - x as f64).abs() / nf) < r)
        .collect();
    let (lo, hi) = (inside[0], *inside.last().expect("ball contains its centre"));
    if lo == 0 || hi + 1 == chain.len() {
        return Err(Error::OutOfRange { name: "r", reason: "ball reaches the reflecting boundary".into() });
    }
    let diag = chain.op.diag[lo..=hi].to_vec();
    let off = chain.op.off[lo..hi].to_vec();
    let killed = SymTridiagonal::new(diag, off)?;
    let mut e = vec![0.0; inside.len()];
    e[x - lo] = 1.0;
    let v = killed.exp_neg_apply(t, &e)?;
    let survival: f64 = v.iter().zip(&chain.sqrt_mass[lo..=hi]).map(|(vy, sy)| vy * sy).sum::<f64>() / chain.sqrt_mass[x];
    Ok((1.0 - survival, 4.0 * (-r * r / (8.0 * t)).exp()))
}

/// Errors for one environment at one scale.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct QuenchedRow {
    pub n: usize,
    pub seed: u64,
    pub cdf_err: f64,
    pub bl_err: f64,
    pub hk_err: f64,
    pub sg_err: f64,
}

/// Settings shared by the quenched and annealed experiments.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BtmSettings {
    pub alpha: f64,
    pub kappa: f64,
    pub t: f64,
    pub ns: Vec<usize>,
    pub convention: Convention,
    /// Radius of the test window for the BL, semigroup and heat-kernel errors.
    pub reach: f64,
    /// Skip the BL error (it dominates the cost when `κ < 1`).
    pub with_bl: bool,
}

impl BtmSettings {
    pub fn new(alpha: f64, t: f64, ns: Vec<usize>) -> Self {
        Self { alpha, kappa: 1.0, t, ns, convention: Convention::PaperGenerator, reach: 1.0, with_bl: true }
    }

    fn validate(&self) -> Result<()> {
        ensure_range("alpha", self.alpha > 1.0, || format!("{} must be > 1", self.alpha))?;
        ensure_range("t", self.t > 0.0 && self.t.is_finite(), || format!("{} must be positive", self.t))?;
        ensure_range("n", !self.ns.is_empty() && self.ns.iter().all(|&n| n >= 1), || "need positive scales".into())?;
        ensure_range("reach", self.reach > 0.0, || "reach must be positive".into())?;
        Ok(())
    }

    fn chain_radius(&self) -> f64 {
        window_radius(self.t, ESCAPE_TOL).max(self.reach + 1.0)
    }
}

/// All errors for one environment over the scales in `settings`.
pub fn quenched_run(settings: &BtmSettings, seed: u64) -> Result<Vec<QuenchedRow>> {
    settings.validate()?;
    let r = settings.chain_radius();
    let n_max = *settings.ns.iter().max().expect("validated");
    let window = (n_max as f64 * r).ceil() as usize + 2;
    let env = TrapEnvironment::sample(settings.alpha, window, seed)?;
    run_on(&env, settings, r)
}

/// As [`quenched_run`] on a given environment.
pub fn run_on(env: &TrapEnvironment, settings: &BtmSettings, r: f64) -> Result<Vec<QuenchedRow>> {
    let limit = LimitDiffusion::new(env.mean_depth(), settings.convention);
    settings
        .ns
        .iter()
        .map(|&n| {
            let chain = build_chain(env, n, r, settings.convention)?;
            let cdf_err = cdf_error(&chain, settings.t, &limit)?;
            let hk_err = heat_kernel_error(&chain, settings.t, &limit, settings.reach)?;
            let sg_err = semigroup_error(&chain, settings.t, &limit, settings.reach)?;
            let bl_err = if settings.with_bl {
                quenched_bl_error(env, n, settings.reach, settings.kappa)?
            } else {
                f64::NAN
            };
            Ok(QuenchedRow { n, seed: env.seed, cdf_err, bl_err, hk_err, sg_err })
        })
        .collect()
}

/// Per-seed quenched runs with the fitted CDF decay exponent of each seed.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct QuenchedTable {
    pub rows: Vec<QuenchedRow>,
    pub cdf_fits: Vec<(u64, RateFit)>,
}

pub fn quenched_experiment(settings: &BtmSettings, seeds: &[u64]) -> Result<QuenchedTable> {
    settings.validate()?;
    let per_seed: Vec<Vec<QuenchedRow>> = seeds.par_iter().map(|&s| quenched_run(settings, s)).collect::<Result<_>>()?;
    let ns: Vec<f64> = settings.ns.iter().map(|&n| n as f64).collect();
    let mut cdf_fits = Vec::with_capacity(seeds.len());
    for rows in &per_seed {
        let errs: Vec<f64> = rows.iter().map(|r| r.cdf_err).collect();
        cdf_fits.push((rows[0].seed, rate_fit(&ns, &errs)?));
    }
    Ok(QuenchedTable { rows: per_seed.into_iter().flatten().collect(), cdf_fits })
}

/// Trial-averaged errors at one scale.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AnnealedRow {
    pub n: usize,
    pub cdf_err: f64,
    pub bl_err: f64,
    pub hk_err: f64,
    pub sg_err: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AnnealedTable {
    pub trials: usize,
    pub base_seed: u64,
    pub rows: Vec<AnnealedRow>,
    pub sg_fit: RateFit,
    pub hk_fit: RateFit,
}

/// Averages quenched errors over `trials` environments with seeds
/// `mix_seed(base_seed, i)`.
pub fn annealed_experiment(settings: &BtmSettings, trials: usize, base_seed: u64) -> Result<AnnealedTable> {
    settings.validate()?;
    ensure_range("trials", trials >= 1, || "need at least one trial".into())?;
    let runs: Vec<Vec<QuenchedRow>> = (0..trials as u64)
        .into_par_iter()
        .map(|i| quenched_run(settings, mix_seed(base_seed, i)))
        .collect::<Result<_>>()?;
    let m = trials as f64;
    let rows: Vec<AnnealedRow> = settings
        .ns
        .iter()
        .enumerate()
        .map(|(j, &n)| {
            let mean = |f: fn(&QuenchedRow) -> f64| runs.iter().map(|r| f(&r[j])).sum::<f64>() / m;
            AnnealedRow {
                n,
                cdf_err: mean(|r| r.cdf_err),
                bl_err: mean(|r| r.bl_err),
                hk_err: mean(|r| r.hk_err),
                sg_err: mean(|r| r.sg_err),
            }
        })
        .collect();
    let ns: Vec<f64> = rows.iter().map(|r| r.n as f64).collect();
    let sg: Vec<f64> = rows.iter().map(|r| r.sg_err).collect();
    let hk: Vec<f64> = rows.iter().map(|r| r.hk_err).collect();
    Ok(AnnealedTable { trials, base_seed, rows, sg_fit: rate_fit(&ns, &sg)?, hk_fit: rate_fit(&ns, &hk)? })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn srw_chain_matches_network_kernel() {
        let env = TrapEnvironment::sample(2.5, 10, 4).unwrap();
        let chain = build_chain(&env, 4, 2.0, Convention::PaperGenerator).unwrap();
        let (net, mu) = chain.to_network().unwrap();
        let spec = crate::network::spectral(&net, &mu).unwrap();
        for x in [0, 3, 8] {
            let row = chain.heat_kernel_row(0.3, x).unwrap();
            for (y, &p) in row.iter().enumerate() {
                let want = spec.heat_kernel(0.3, x, y).unwrap();
                assert!((p - want).abs() < 1e-9 * want.abs().max(1.0), "{x} {y}: {p} vs {want}");
            }
        }
    }

    #[test]
    fn generator_rows_and_detailed_balance() {
        let env = TrapEnvironment::sample(3.0, 20, 1).unwrap();
        let chain = build_chain(&env, 5, 3.0, Convention::UnitResistance).unwrap();
        let ones = vec![1.0; chain.len()];
        assert!(chain.generator_apply(&ones).unwrap().iter().all(|v| v.abs() < 1e-12));
        for k in 0..chain.len() - 1 {
            let lhs = chain.mass[k] * chain.rate(k, k + 1);
            let rhs = chain.mass[k + 1] * chain.rate(k + 1, k);
            assert!((lhs - rhs).abs() <= 1e-12 * lhs);
        }
    }

    #[test]
    fn paper_generator_rate_for_unit_traps() {
        let env = TrapEnvironment::constant(50);
        let chain = build_chain(&env, 10, 2.0, Convention::PaperGenerator).unwrap();
        let k = chain.index(0).unwrap();
        assert!((chain.rate(k, k + 1) - 50.0).abs() < 1e-12);
    }

    #[test]
    fn limit_kernel_normalized() {
        let mean = mean_trap_depth(3.0).unwrap();
        let h = 1e-3;
        let total: f64 = (-20_000..=20_000).map(|k| limit_heat_kernel(mean, 0.7, 0.1, k as f64 * h) * mean * h).sum();
        assert!((total - 1.0).abs() < 1e-9);
    }

    #[test]
    fn window_check() {
        let env = TrapEnvironment::constant(10);
        assert!(build_chain(&env, 10, 2.0, Convention::PaperGenerator).is_err());
    }
}
