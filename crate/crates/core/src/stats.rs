//! Least-squares fits used to turn error tables into rates.

use serde::Serialize;
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LinearFit {
    pub slope: f64,
    pub intercept: f64,
    /// Standard error of the slope; `NaN` with fewer than three points.
    pub slope_stderr: f64,
    pub n: usize,
}

impl LinearFit {
    /// Two-sided confidence interval for the slope at level `level`
    /// (e.g. 0.95). Infinite with fewer than three points.
    pub fn slope_interval(&self, level: f64) -> (f64, f64) {
        if self.n < 3 || !self.slope_stderr.is_finite() {
            return (f64::NEG_INFINITY, f64::INFINITY);
        }
        let dist = StudentsT::new(0.0, 1.0, (self.n - 2) as f64).expect("positive degrees of freedom");
        let q = dist.inverse_cdf(0.5 + 0.5 * level);
        (self.slope - q * self.slope_stderr, self.slope + q * self.slope_stderr)
    }
}

/// Ordinary least squares `y ≈ intercept + slope · x`.
pub fn linear_fit(xs: &[f64], ys: &[f64]) -> Result<LinearFit> {
    if xs.len() != ys.len() {
        return Err(Error::DimensionMismatch { expected: xs.len(), got: ys.len() });
    }
    let n = xs.len();
    if n < 2 {
        return Err(Error::Empty("fit needs at least two points"));
    }
    if xs.iter().chain(ys).any(|v| !v.is_finite()) {
        return Err(Error::Numerical("non-finite value in fit".into()));
    }
    let mx = xs.iter().sum::<f64>() / n as f64;
    let my = ys.iter().sum::<f64>() / n as f64;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::Numerical("all abscissae coincide".into()));
    }
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let slope_stderr = if n > 2 {
        let rss: f64 = xs.iter().zip(ys).map(|(x, y)| (y - intercept - slope * x).powi(2)).sum();
        (rss / (n - 2) as f64 / sxx).sqrt()
    } else {
        f64::NAN
    };
    Ok(LinearFit { slope, intercept, slope_stderr, n })
}

/// Decay exponent `E` in `err ≈ c n^{-E}` with a 95% band.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RateFit {
    pub exponent: f64,
    pub lower: f64,
    pub upper: f64,
}

/// Log–log fit of errors against scales.
pub fn rate_fit(ns: &[f64], errs: &[f64]) -> Result<RateFit> {
    if errs.iter().any(|&e| !(e > 0.0)) {
        return Err(Error::Numerical("rate fit needs positive errors".into()));
    }
    let xs: Vec<f64> = ns.iter().map(|n| n.ln()).collect();
    let ys: Vec<f64> = errs.iter().map(|e| e.ln()).collect();
    let fit = linear_fit(&xs, &ys)?;
    let (lo, hi) = fit.slope_interval(0.95);
    Ok(RateFit { exponent: -fit.slope, lower: -hi, upper: -lo })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_power_law() {
        let ns = [100.0, 200.0, 400.0, 800.0];
        let errs: Vec<f64> = ns.iter().map(|n: &f64| 3.0 * n.powf(-0.4)).collect();
        let r = rate_fit(&ns, &errs).unwrap();
        assert!((r.exponent - 0.4).abs() < 1e-12);
        assert!((r.upper - r.lower).abs() < 1e-9);
    }

    #[test]
    fn interval_matches_t_quantile() {
        let xs = [0.0, 1.0, 2.0, 3.0, 4.0];
        let ys = [0.1, 0.9, 2.2, 2.8, 4.1];
        let fit = linear_fit(&xs, &ys).unwrap();
        let (lo, hi) = fit.slope_interval(0.95);
        // t_{0.975, 3} = 3.182446305284263
        assert!(((hi - fit.slope) / fit.slope_stderr - 3.182446305284263).abs() < 1e-9);
        assert!((fit.slope - lo - (hi - fit.slope)).abs() < 1e-12);
    }
}
