//! Dense and tridiagonal kernels shared by the network and trap-model code.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Cholesky factorization of a symmetric positive-definite matrix.
pub fn cholesky(m: DMatrix<f64>) -> Result<nalgebra::Cholesky<f64, nalgebra::Dyn>> {
    m.cholesky()
        .ok_or_else(|| Error::Numerical("matrix is not positive definite".into()))
}

pub fn spd_inverse(m: DMatrix<f64>) -> Result<DMatrix<f64>> {
    Ok(cholesky(m)?.inverse())
}

pub fn spd_solve(m: DMatrix<f64>, b: &DVector<f64>) -> Result<DVector<f64>> {
    Ok(cholesky(m)?.solve(b))
}

/// Eigen-decomposition of a symmetric matrix, eigenvalues ascending and
/// eigenvectors as the matching columns.
pub fn symmetric_eigen(m: DMatrix<f64>) -> (Vec<f64>, DMatrix<f64>) {
    let n = m.nrows();
    let eig = nalgebra::SymmetricEigen::new(m);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let mut vectors = DMatrix::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        vectors.set_column(dst, &eig.eigenvectors.column(src));
    }
    (values, vectors)
}

/// Symmetric tridiagonal matrix: `diag[i]` on the diagonal and `off[i]`
/// coupling entries `i` and `i + 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct SymTridiagonal {
    pub diag: Vec<f64>,
    pub off: Vec<f64>,
}

impl SymTridiagonal {
    pub fn new(diag: Vec<f64>, off: Vec<f64>) -> Result<Self> {
        if diag.is_empty() {
            return Err(Error::Empty("tridiagonal matrix"));
        }
        if off.len() + 1 != diag.len() {
            return Err(Error::DimensionMismatch { expected: diag.len() - 1, got: off.len() });
        }
        Ok(Self { diag, off })
    }

    pub fn len(&self) -> usize {
        self.diag.len()
    }

    pub fn is_empty(&self) -> bool {
        self.diag.is_empty()
    }

    pub fn matvec(&self, x: &[f64], y: &mut [f64]) {
        let n = self.diag.len();
        for i in 0..n {
            let mut acc = self.diag[i] * x[i];
            if i > 0 {
                acc += self.off[i - 1] * x[i - 1];
            }
            if i + 1 < n {
                acc += self.off[i] * x[i + 1];
            }
            y[i] = acc;
        }
    }

    /// Gershgorin upper bound on the spectrum.
    pub fn gershgorin_bound(&self) -> f64 {
        let n = self.diag.len();
        (0..n)
            .map(|i| {
                let left = if i > 0 { self.off[i - 1].abs() } else { 0.0 };
                let right = if i + 1 < n { self.off[i].abs() } else { 0.0 };
                self.diag[i] + left + right
            })
            .fold(0.0, f64::max)
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let n = self.diag.len();
        let mut m = DMatrix::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = self.diag[i];
            if i + 1 < n {
                m[(i, i + 1)] = self.off[i];
                m[(i + 1, i)] = self.off[i];
            }
        }
        m
    }

    /// `exp(-t B) v` for positive semidefinite `B`, by Chebyshev expansion on
    /// the Gershgorin interval. Accurate to roughly machine precision
    /// relative to `|v|`.
    pub fn exp_neg_apply(&self, t: f64, v: &[f64]) -> Result<Vec<f64>> {
        let n = self.len();
        if v.len() != n {
            return Err(Error::DimensionMismatch { expected: n, got: v.len() });
        }
        if !(t >= 0.0) || !t.is_finite() {
            return Err(Error::OutOfRange { name: "t", reason: format!("{t} must be finite and ≥ 0") });
        }
        let rho = self.gershgorin_bound();
        if t == 0.0 || rho == 0.0 {
            return Ok(v.to_vec());
        }
        let c = 0.5 * t * rho;
        let coeffs = scaled_bessel_i(c);
        // u = (2/ρ) B − I maps the spectrum into [−1, 1].
        let scale = 2.0 / rho;
        let mut prev = v.to_vec();
        let mut cur = vec![0.0; n];
        self.matvec(&prev, &mut cur);
        for (ci, pi) in cur.iter_mut().zip(&prev) {
            *ci = scale * *ci - pi;
        }
        let mut out: Vec<f64> = prev.iter().map(|x| coeffs[0] * x).collect();
        if coeffs.len() > 1 {
            for (o, x) in out.iter_mut().zip(&cur) {
                *o -= 2.0 * coeffs[1] * x;
            }
        }
        let mut tmp = vec![0.0; n];
        for (k, &ck) in coeffs.iter().enumerate().skip(2) {
            self.matvec(&cur, &mut tmp);
            for i in 0..n {
                let next = 2.0 * (scale * tmp[i] - cur[i]) - prev[i];
                prev[i] = cur[i];
                cur[i] = next;
            }
            let a = if k % 2 == 0 { 2.0 * ck } else { -2.0 * ck };
            for (o, x) in out.iter_mut().zip(&cur) {
                *o += a * x;
            }
        }
        Ok(out)
    }
}

/// `e^{-c} I_k(c)` for `k = 0, 1, …` up to the point where the terms fall
/// below 1e-18 of the largest, via Miller's backward recurrence normalized by
/// `I_0 + 2 Σ I_k = e^c`.
pub fn scaled_bessel_i(c: f64) -> Vec<f64> {
    assert!(c >= 0.0 && c.is_finite());
    if c == 0.0 {
        return vec![1.0];
    }
    let start = ((140.0 * c).sqrt() + 2.0 * c.min(40.0) + 40.0).ceil() as usize;
    let mut vals = vec![0.0; start + 2];
    vals[start] = 1e-300;
    for k in (1..=start).rev() {
        vals[k - 1] = (2.0 * k as f64 / c) * vals[k] + vals[k + 1];
        if vals[k - 1] > 1e250 {
            for v in &mut vals[k - 1..] {
                *v *= 1e-250;
            }
        }
    }
    let norm = vals[0] + 2.0 * vals[1..].iter().sum::<f64>();
    for v in &mut vals {
        *v /= norm;
    }
    let peak = vals[0];
    let keep = vals
        .iter()
        .rposition(|&v| v > 1e-18 * peak)
        .map_or(1, |p| p + 1);
    vals.truncate(keep);
    vals
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bessel_small_argument_matches_series() {
        // I_k(c) = Σ_m (c/2)^{2m+k} / (m! (m+k)!)
        let c: f64 = 0.7;
        let vals = scaled_bessel_i(c);
        for (k, &v) in vals.iter().enumerate().take(6) {
            let mut sum = 0.0;
            let mut fact_m = 1.0;
            for m in 0..30 {
                if m > 0 {
                    fact_m *= m as f64;
                }
                let fact_mk: f64 = (1..=(m + k)).map(|x| x as f64).product();
                sum += (c / 2.0).powi((2 * m + k) as i32) / (fact_m * fact_mk);
            }
            assert!((v - (-c).exp() * sum).abs() < 1e-15, "k={k}");
        }
    }

    #[test]
    fn bessel_large_argument_is_normalized() {
        let vals = scaled_bessel_i(5.0e4);
        let total = vals[0] + 2.0 * vals[1..].iter().sum::<f64>();
        assert!((total - 1.0).abs() < 1e-12);
        // Asymptotic e^{-c} I_0(c) ≈ 1/√(2πc) (1 + 1/(8c))
        let approx = 1.0 / (2.0 * std::f64::consts::PI * 5.0e4).sqrt() * (1.0 + 1.0 / 4.0e5);
        assert!((vals[0] - approx).abs() / approx < 1e-8);
    }

    #[test]
    fn chebyshev_exp_matches_dense_eigen() {
        let diag = vec![2.0, 3.5, 1.2, 4.0, 2.2];
        let off = vec![-0.9, -1.1, -0.4, -1.7];
        let m = SymTridiagonal::new(diag, off).unwrap();
        let (vals, vecs) = symmetric_eigen(m.to_dense());
        let v = [0.3, -1.0, 0.5, 2.0, 0.1];
        for &t in &[0.01, 0.5, 3.0] {
            let got = m.exp_neg_apply(t, &v).unwrap();
            let vv = DVector::from_column_slice(&v);
            let mut want = DVector::zeros(5);
            for k in 0..5 {
                let col = vecs.column(k);
                want += col * ((-vals[k] * t).exp() * col.dot(&vv));
            }
            for i in 0..5 {
                assert!((got[i] - want[i]).abs() < 1e-13, "t={t} i={i}");
            }
        }
    }
}
