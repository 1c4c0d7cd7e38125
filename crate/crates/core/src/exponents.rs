//! Closed-form convergence-rate exponents and regularity constants.
//!
//! Every calculator validates its inputs and returns a named error instead of
//! a NaN.

use serde::Serialize;

use crate::error::{ensure_range, Error, Result};

fn positive(name: &'static str, v: f64) -> Result<()> {
    ensure_range(name, v > 0.0 && v.is_finite(), || format!("{v} must be finite and > 0"))
}

fn kappa_in(kappa: f64, lo: f64, hi: f64, hi_open: bool) -> Result<()> {
    let ok = kappa >= lo && if hi_open { kappa < hi } else { kappa <= hi };
    let close = if hi_open { ")" } else { "]" };
    ensure_range("kappa", ok && kappa.is_finite(), || format!("{kappa} not in [{lo}, {hi}{close}"))
}

/// `log_{5/3} x`.
pub fn log53(x: f64) -> f64 {
    x.ln() / (5.0_f64 / 3.0).ln()
}

fn a3_gap(s0: f64, s1: f64) -> Result<f64> {
    positive("s0", s0)?;
    positive("s1", s1)?;
    let gap = 1.0 - (s0 - s1) * (2.0 + s0);
    ensure_range("s0", gap > 0.0, || format!("(s0 − s1)(2 + s0) = {} must be < 1", 1.0 - gap))?;
    Ok(gap)
}

/// `Θ = (1 + s0 − s1) / (1 − (s0 − s1)(2 + s0))`.
pub fn theta_cap(s0: f64, s1: f64) -> Result<f64> {
    let gap = a3_gap(s0, s1)?;
    Ok((1.0 + s0 - s1) / gap)
}

/// `β = (1 − (2 + s0)(s0 − s1)) / (s1 + 2(2 + s0)(s0 − s1))`.
pub fn beta(s0: f64, s1: f64) -> Result<f64> {
    let gap = a3_gap(s0, s1)?;
    let den = s1 + 2.0 * (2.0 + s0) * (s0 - s1);
    ensure_range("s1", den > 0.0, || format!("s1 + 2(2 + s0)(s0 − s1) = {den} must be > 0"))?;
    Ok(gap / den)
}

/// Semigroup exponent under volume and resistance regularity:
/// `κ / (κ + (1 + s0)(2 + κ)(κ + θ))`.
pub fn sg_exponent_a2(s0: f64, theta: f64, kappa: f64) -> Result<f64> {
    positive("s0", s0)?;
    positive("theta", theta)?;
    kappa_in(kappa, 0.5, 1.0, false)?;
    Ok(kappa / (kappa + (1.0 + s0) * (2.0 + kappa) * (kappa + theta)))
}

/// `(E1, E2)` for the uniformly perfect case, with `Θ` from [`theta_cap`].
pub fn sg_exponents_a3(s0: f64, s1: f64, kappa: f64) -> Result<(f64, f64)> {
    kappa_in(kappa, 0.5, 1.0, false)?;
    let big = (1.0 + s0) * theta_cap(s0, s1)?;
    let den = kappa + (2.0 + kappa) * big;
    Ok((kappa / den, kappa * (2.0 + kappa) * (big - 1.0) / den))
}

/// Heat-kernel exponent under two-sided volume bounds, `κ ∈ [1/2, 2/3)`,
/// `s0 < s1 + 1`.
pub fn hk_exponent_a1(s0: f64, s1: f64, kappa: f64) -> Result<f64> {
    positive("s0", s0)?;
    positive("s1", s1)?;
    ensure_range("s0", s0 < s1 + 1.0, || format!("s0 = {s0} must be < s1 + 1"))?;
    kappa_in(kappa, 0.5, 2.0 / 3.0, true)?;
    let num = 2.0 * (s1 - s0 + 1.0);
    Ok(num / (((2.0 * kappa + 5.0) * s0 + 2.0 * kappa + 4.0) * (s1 + 2.0) + num))
}

/// Heat-kernel exponent with a lower resistance estimate. The formula does
/// not involve `θ`; it is accepted for a uniform call shape and checked to be
/// positive.
pub fn hk_exponent_a2(s0: f64, s1: f64, theta: f64, kappa: f64) -> Result<f64> {
    positive("s0", s0)?;
    positive("s1", s1)?;
    positive("theta", theta)?;
    ensure_range("s0", s0 < s1 + 1.0, || format!("s0 = {s0} must be < s1 + 1"))?;
    kappa_in(kappa, 0.5, 1.0, false)?;
    let num = s1 - s0 + 1.0;
    Ok(num / ((kappa + 2.0) * (1.0 + s0) * (s1 + 2.0) + 0.5 * s0 + num))
}

/// `(E1, E2)` for the heat kernel in the uniformly perfect case; the rate is
/// `h^{E1} log(1/h)^{E2}`.
pub fn hk_exponents_a3(s0: f64, s1: f64, kappa: f64) -> Result<(f64, f64)> {
    kappa_in(kappa, 0.5, 1.0, false)?;
    ensure_range("s0", s0 < s1 + 1.0, || format!("s0 = {s0} must be < s1 + 1"))?;
    let theta = theta_cap(s0, s1)?;
    let num = s1 - s0 + 1.0;
    let e1 = num / ((2.0 + kappa) * (1.0 + s0) * theta + 0.5 * s0 + num);
    let gap = 1.0 - (2.0 + s0) * (s0 - s1);
    let e2 = (2.0 + kappa) * (s1 + 2.0 * (2.0 + s0) * (s0 - s1)) / gap;
    Ok((e1, e2))
}

/// Exponents of the Sierpinski gasket rates: semigroup error
/// `(3/5)^{n E_sg1} n^{E_sg2}` and heat-kernel error `(3/5)^{n E_hk1} n^{E_hk2}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SierpinskiExponents {
    pub e_sg1: f64,
    pub e_sg2: f64,
    pub e_hk1: f64,
    pub e_hk2: f64,
}

pub fn sierpinski_exponents(kappa: f64) -> Result<SierpinskiExponents> {
    kappa_in(kappa, 0.5, 1.0, false)?;
    let l5 = log53(5.0);
    let l3 = log53(3.0);
    let den = kappa + (2.0 + kappa) * l5;
    Ok(SierpinskiExponents {
        e_sg1: kappa * kappa / den,
        e_sg2: kappa * (2.0 + kappa) * l3 / den,
        e_hk1: kappa / ((2.0 + kappa) * l5 + 0.5 * l3 + 1.0),
        e_hk2: (2.0 + kappa) * l5,
    })
}

fn tail_factor(alpha: f64) -> Result<f64> {
    ensure_range("alpha", alpha > 1.0 && alpha.is_finite(), || format!("{alpha} must be > 1"))?;
    Ok((1.0 - 1.0 / alpha).min(0.5))
}

/// Suprema of admissible quenched exponents for the trap model:
/// `(2/11)[(1 − 1/α) ∧ 1/2]` for the distribution function and
/// `κ/(3κ + 4)[(1 − 1/α) ∧ 1/2]` for the semigroup.
pub fn btm_quenched_exponents(alpha: f64, kappa: f64) -> Result<(f64, f64)> {
    kappa_in(kappa, 0.5, 1.0, false)?;
    let q = tail_factor(alpha)?;
    Ok((2.0 / 11.0 * q, kappa / (3.0 * kappa + 4.0) * q))
}

/// Smallest tail exponent for which the annealed rates hold:
/// `κ/(3κ + 4) + 5κ + 7/2`.
pub fn btm_annealed_threshold(kappa: f64) -> Result<f64> {
    kappa_in(kappa, 0.5, 1.0, false)?;
    Ok(kappa / (3.0 * kappa + 4.0) + 5.0 * kappa + 3.5)
}

/// Suprema of admissible annealed exponents: `κ/(2(3κ + 4))` for the
/// semigroup and `κ/(2(3κ + 4)(κ + 2))` for the heat kernel. Requires `α`
/// above [`btm_annealed_threshold`].
pub fn btm_annealed_exponents(alpha: f64, kappa: f64) -> Result<(f64, f64)> {
    let threshold = btm_annealed_threshold(kappa)?;
    ensure_range("alpha", alpha > threshold, || format!("{alpha} must exceed {threshold}"))?;
    let sg = kappa / (2.0 * (3.0 * kappa + 4.0));
    Ok((sg, sg / (kappa + 2.0)))
}

/// Volume, resistance and uniform-perfectness data of a compact resistance
/// space.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RegularityParams {
    pub s0: f64,
    pub s1: f64,
    pub theta: f64,
    pub kappa: f64,
    pub c_l: f64,
    pub c_u: f64,
    pub c_lr: f64,
    pub c_up: f64,
    /// Resistance diameter of the space.
    pub diam: f64,
}

impl RegularityParams {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("s0", self.s0),
            ("s1", self.s1),
            ("theta", self.theta),
            ("c_l", self.c_l),
            ("c_u", self.c_u),
            ("c_LR", self.c_lr),
            ("c_UP", self.c_up),
            ("diam", self.diam),
        ] {
            positive(name, v)?;
        }
        kappa_in(self.kappa, 0.5, 1.0, false)
    }

    /// `(1 + s0)θ > 1 ∨ s1`.
    pub fn satisfies_a2(&self) -> bool {
        (1.0 + self.s0) * self.theta > self.s1.max(1.0)
    }

    /// `(s0 − s1)(2 + s0) < 1`.
    pub fn satisfies_a3(&self) -> bool {
        (self.s0 - self.s1) * (2.0 + self.s0) < 1.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RegularityConstants {
    pub c_a1: f64,
    /// Lower resistance constant implied by uniform perfectness.
    pub c_lr_derived: f64,
    pub c_exit: f64,
    pub d_f: f64,
    pub c_a2: f64,
    /// `None` when the uniform-perfectness exponent condition fails.
    pub c_a3: Option<f64>,
    pub c_summ: Option<f64>,
}

pub fn regularity_constants(p: &RegularityParams) -> Result<RegularityConstants> {
    p.validate()?;
    let (s0, s1) = (p.s0, p.s1);
    let c_a1 = 1.0 + 1.0 / p.c_l;
    let c_lr_derived = 1.0
        / (4.0 * p.c_u * (0.25 * p.c_up + 1.0).powf(s1) / (p.c_l * (p.c_up / 16.0).powf(s0) * p.c_up));
    let c_exit = 4.0_f64.powf(2.0 + s0) / (3.0 * p.c_l * p.c_lr.powf(1.0 + s0));
    let d_f = (0.5 * p.diam).min((2.0 * p.diam / p.c_lr).powf(1.0 / p.theta));
    let c_a2 = 0.01 / (p.c_u * (5.0 * c_exit).powf(s1 / ((1.0 + s0) * p.theta)));
    let (c_a3, c_summ) = if p.satisfies_a3() {
        let b = beta(s0, s1)?;
        let c_ur = 1.0 + 1.0 / p.c_up;
        let core = p.c_l * (p.c_lr / 4.0).powf(1.0 + s0);
        let c = core / (4.0 * p.c_u * c_ur) * (core * core / (256.0 * p.c_u * c_ur)).powf(b);
        let c_a3 = 1.0 / (4.0 * p.c_u) * (4.0_f64.ln() / (2.0_f64.powf(b) * c)).powf(b * s1 / (1.0 + b));
        (Some(c_a3), Some(c))
    } else {
        (None, None)
    };
    Ok(RegularityConstants { c_a1, c_lr_derived, c_exit, d_f, c_a2, c_a3, c_summ })
}

/// Exponent `E = κ / (κ + (1 + s)(2 + κ)(κ + θ))` of the non-compact rate.
pub fn noncompact_exponent(s: f64, theta: f64, kappa: f64) -> Result<f64> {
    sg_exponent_a2(s, theta, kappa)
}

/// Polynomial prefactor `C_n(r)` of the non-compact rate.
///
/// Inputs are the masses and diameters of the truncated spaces `F^{(r)}` and
/// `F_n^{(r)}` and the diameter of their union `K_n^{(r)}`.
#[allow(clippy::too_many_arguments)]
pub fn noncompact_constant(
    mu_n_r: f64,
    mu_r: f64,
    diam_union: f64,
    diam_r: f64,
    diam_n_r: f64,
    s: f64,
    theta: f64,
    kappa: f64,
) -> Result<f64> {
    for (name, v) in [("mu_n_r", mu_n_r), ("mu_r", mu_r), ("diam_union", diam_union), ("diam_r", diam_r), ("diam_n_r", diam_n_r)] {
        ensure_range(name, v >= 0.0 && v.is_finite(), || format!("{v} must be finite and ≥ 0"))?;
    }
    positive("s", s)?;
    positive("theta", theta)?;
    kappa_in(kappa, 0.5, 1.0, false)?;
    if diam_union < diam_r.max(diam_n_r) {
        return Err(Error::OutOfRange {
            name: "diam_union",
            reason: "the union cannot be smaller than its parts".into(),
        });
    }
    let d = (mu_r * diam_r).max(mu_n_r * diam_n_r);
    let power = 4.0 + 2.0 * (1.0 + s / (2.0 * (1.0 + s) * theta)) * (2.0 * kappa - 1.0);
    let bracket = (diam_union + mu_n_r)
        * diam_union
        * mu_n_r
        * mu_r.powf(1.5)
        * diam_r
        * (mu_r.sqrt() + mu_n_r);
    Ok(d.powf(power) * bracket)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn theta_and_beta_arithmetic() {
        assert!((theta_cap(1.0, 0.9).unwrap() - 11.0 / 7.0).abs() < 1e-14);
        assert!((beta(1.0, 0.9).unwrap() - 7.0 / 15.0).abs() < 1e-14);
        assert_eq!(theta_cap(2.0, 2.0).unwrap(), 1.0);
        assert!((beta(2.0, 2.0).unwrap() - 0.5).abs() < 1e-15);
        assert!(theta_cap(1.0, 0.5).is_err());
    }

    #[test]
    fn gen_a2_example() {
        assert!((sg_exponent_a2(1.0, 1.0, 1.0).unwrap() - 1.0 / 13.0).abs() < 1e-15);
        assert!(sg_exponent_a2(1.0, 1.0, 0.3).is_err());
    }

    #[test]
    fn quenched_examples() {
        let (d, s) = btm_quenched_exponents(2.0, 1.0).unwrap();
        assert!((d - 1.0 / 11.0).abs() < 1e-15 && (s - 1.0 / 14.0).abs() < 1e-15);
        let (d, _) = btm_quenched_exponents(4.0 / 3.0, 1.0).unwrap();
        assert!((d - 1.0 / 22.0).abs() < 1e-15);
        assert!(btm_quenched_exponents(1.0, 1.0).is_err());
    }

    #[test]
    fn annealed_boundary() {
        assert!((btm_annealed_threshold(1.0).unwrap() - 121.0 / 14.0).abs() < 1e-14);
        assert!(btm_annealed_exponents(121.0 / 14.0, 1.0).is_err());
        let (sg, hk) = btm_annealed_exponents(9.0, 1.0).unwrap();
        assert!((sg - 1.0 / 14.0).abs() < 1e-15 && (hk - 1.0 / 42.0).abs() < 1e-15);
        let (sg, hk) = btm_annealed_exponents(20.0, 0.5).unwrap();
        assert!((sg - 1.0 / 22.0).abs() < 1e-15 && (hk - 1.0 / 55.0).abs() < 1e-15);
    }

    #[test]
    fn noncompact_degenerate_mass_is_zero() {
        assert_eq!(noncompact_constant(0.0, 1.0, 2.0, 1.0, 1.0, 1.0, 1.0, 1.0).unwrap(), 0.0);
        assert!(noncompact_constant(1.0, 1.0, 0.5, 1.0, 1.0, 1.0, 1.0, 1.0).is_err());
    }
}
