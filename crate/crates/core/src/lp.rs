//! Dense simplex solver in condensed (Tucker) tableau form.
//!
//! Solves `maximize c·x  subject to  A x ≤ b, x ≥ 0`. The tableau keeps one
//! row per constraint and one column per structural variable, so the width
//! never grows when constraints are appended. That makes row generation cheap:
//! new rows are expressed in the current nonbasic variables and the basis is
//! repaired with the dual simplex method.
//!
//! The initial right-hand side must be nonnegative (the slack basis is then
//! feasible). Rows appended later may have any right-hand side.

use crate::error::{Error, Result};

const COST_EPS: f64 = 1e-11;
const PIVOT_EPS: f64 = 1e-9;
const FEAS_EPS: f64 = 1e-11;
/// Consecutive degenerate pivots tolerated before switching to Bland's rule.
const STALL_LIMIT: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq)]
enum Loc {
    Row(usize),
    Col(usize),
}

/// A dense simplex tableau. Variables `0..n` are structural; slacks are
/// numbered `n..`.
#[derive(Debug, Clone)]
pub struct Simplex {
    width: usize,
    tab: Vec<f64>,
    rhs: Vec<f64>,
    obj: Vec<f64>,
    value: f64,
    row_var: Vec<usize>,
    col_var: Vec<usize>,
    loc: Vec<Loc>,
    pivots: usize,
}

impl Simplex {
    /// Builds the tableau for `max c·x, A x ≤ b, x ≥ 0`. Rows of `a` are dense.
    pub fn new(c: &[f64], a: &[Vec<f64>], b: &[f64]) -> Result<Self> {
        let n = c.len();
        if n == 0 {
            return Err(Error::Empty("objective"));
        }
        if a.len() != b.len() {
            return Err(Error::DimensionMismatch { expected: a.len(), got: b.len() });
        }
        let mut s = Self {
            width: n,
            tab: Vec::with_capacity(a.len() * n),
            rhs: Vec::with_capacity(a.len()),
            obj: c.to_vec(),
            value: 0.0,
            row_var: Vec::with_capacity(a.len()),
            col_var: (0..n).collect(),
            loc: (0..n).map(Loc::Col).collect(),
            pivots: 0,
        };
        for (row, &bi) in a.iter().zip(b) {
            if row.len() != n {
                return Err(Error::DimensionMismatch { expected: n, got: row.len() });
            }
            if bi < 0.0 || !bi.is_finite() {
                return Err(Error::OutOfRange {
                    name: "b",
                    reason: "initial right-hand side must be finite and nonnegative".into(),
                });
            }
            let id = n + s.row_var.len();
            s.tab.extend_from_slice(row);
            s.rhs.push(bi);
            s.row_var.push(id);
        }
        Ok(s)
    }

    pub fn n_rows(&self) -> usize {
        self.rhs.len()
    }

    pub fn n_vars(&self) -> usize {
        self.width
    }

    /// Total pivots performed so far.
    pub fn pivots(&self) -> usize {
        self.pivots
    }

    /// Current objective value.
    pub fn value(&self) -> f64 {
        self.value
    }

    /// Value of structural variable `v` in the current basic solution.
    pub fn primal(&self, v: usize) -> f64 {
        match self.loc[v] {
            Loc::Row(r) => self.rhs[r],
            Loc::Col(_) => 0.0,
        }
    }

    pub fn primal_solution(&self) -> Vec<f64> {
        (0..self.width).map(|v| self.primal(v)).collect()
    }

    /// Appends the constraint `Σ a_v x_v ≤ b` given as sparse `(v, a_v)` pairs.
    pub fn add_row(&mut self, a: &[(usize, f64)], b: f64) -> Result<()> {
        let w = self.width;
        let mut row = vec![0.0; w];
        let mut rhs = b;
        for &(v, av) in a {
            if v >= w {
                return Err(Error::IndexOutOfRange { index: v, len: w });
            }
            match self.loc[v] {
                Loc::Col(l) => row[l] += av,
                Loc::Row(i) => {
                    rhs -= av * self.rhs[i];
                    let src = &self.tab[i * w..(i + 1) * w];
                    for (dst, &t) in row.iter_mut().zip(src) {
                        *dst -= av * t;
                    }
                }
            }
        }
        let id = w + self.row_var.len();
        self.tab.extend_from_slice(&row);
        self.rhs.push(rhs);
        self.row_var.push(id);
        Ok(())
    }

    fn pivot(&mut self, r: usize, j: usize) {
        let w = self.width;
        let p = self.tab[r * w + j];
        let inv = 1.0 / p;
        {
            let prow = &mut self.tab[r * w..(r + 1) * w];
            for (l, t) in prow.iter_mut().enumerate() {
                if l != j {
                    *t *= inv;
                }
            }
            prow[j] = inv;
        }
        self.rhs[r] *= inv;
        let prow: Vec<f64> = self.tab[r * w..(r + 1) * w].to_vec();
        let prhs = self.rhs[r];
        for i in 0..self.rhs.len() {
            if i == r {
                continue;
            }
            let row = &mut self.tab[i * w..(i + 1) * w];
            let f = row[j];
            if f == 0.0 {
                continue;
            }
            for (l, (t, &pr)) in row.iter_mut().zip(&prow).enumerate() {
                if l != j {
                    *t -= f * pr;
                }
            }
            row[j] = -f * inv;
            self.rhs[i] -= f * prhs;
        }
        let f = self.obj[j];
        if f != 0.0 {
            for (l, (d, &pr)) in self.obj.iter_mut().zip(&prow).enumerate() {
                if l != j {
                    *d -= f * pr;
                }
            }
            self.obj[j] = -f * inv;
            self.value += f * prhs;
        }

        let entering = self.col_var[j];
        let leaving = self.row_var[r];
        self.row_var[r] = entering;
        self.col_var[j] = leaving;
        if entering < w {
            self.loc[entering] = Loc::Row(r);
        }
        if leaving < w {
            self.loc[leaving] = Loc::Col(j);
        }
        self.pivots += 1;
    }

    fn iteration_cap(&self) -> usize {
        200 * (self.rhs.len() + self.width) + 10_000
    }

    /// Harris two-pass ratio test. `entries` yields `(index, pivot, ratio
    /// numerator)` for admissible pivots; the bound is relaxed by `tol`, and
    /// among the near-ties the largest pivot wins (or, in Bland mode, the
    /// smallest variable id among pivots of reasonable size).
    fn harris(entries: &[(usize, f64, f64)], tol: f64, id: impl Fn(usize) -> usize, bland: bool) -> Option<(usize, f64)> {
        let bound = entries
            .iter()
            .map(|&(_, t, num)| (num.max(0.0) + tol) / t)
            .fold(f64::INFINITY, f64::min);
        if !bound.is_finite() {
            return None;
        }
        let near: Vec<(usize, f64, f64)> = entries
            .iter()
            .filter(|&&(_, t, num)| num.max(0.0) / t <= bound)
            .copied()
            .collect();
        let tmax = near.iter().map(|e| e.1).fold(0.0, f64::max);
        let pick = if bland {
            near.iter().filter(|e| e.1 >= 1e-3 * tmax).min_by_key(|e| id(e.0))
        } else {
            near.iter().max_by(|x, y| x.1.total_cmp(&y.1))
        };
        pick.map(|&(i, t, num)| (i, num.max(0.0) / t))
    }

    /// Runs the primal simplex method from the current (feasible) basis.
    pub fn solve_primal(&mut self) -> Result<f64> {
        let w = self.width;
        let mut stalled = 0usize;
        for _ in 0..self.iteration_cap() {
            let bland = stalled > STALL_LIMIT;
            let improving = (0..w).filter(|&l| self.obj[l] > COST_EPS);
            let entering = if bland {
                improving.min_by_key(|&l| self.col_var[l])
            } else {
                improving.max_by(|&a, &b| self.obj[a].total_cmp(&self.obj[b]))
            };
            let Some(j) = entering else {
                return Ok(self.value);
            };
            let entries: Vec<(usize, f64, f64)> = (0..self.rhs.len())
                .filter_map(|i| {
                    let t = self.tab[i * w + j];
                    (t > PIVOT_EPS).then_some((i, t, self.rhs[i]))
                })
                .collect();
            let Some((r, ratio)) = Self::harris(&entries, FEAS_EPS, |i| self.row_var[i], bland) else {
                return Err(Error::Unbounded);
            };
            if ratio <= FEAS_EPS {
                stalled += 1;
            } else {
                stalled = 0;
            }
            self.pivot(r, j);
        }
        Err(Error::IterationLimit("primal simplex"))
    }

    /// Runs the dual simplex method; requires a dual-feasible basis
    /// (all reduced costs ≤ 0), which holds after [`Self::solve_primal`].
    pub fn solve_dual(&mut self) -> Result<f64> {
        let w = self.width;
        let mut stalled = 0usize;
        for _ in 0..self.iteration_cap() {
            let bland = stalled > STALL_LIMIT;
            let infeasible = (0..self.rhs.len()).filter(|&i| self.rhs[i] < -FEAS_EPS);
            let leaving = if bland {
                infeasible.min_by_key(|&i| self.row_var[i])
            } else {
                infeasible.min_by(|&a, &b| self.rhs[a].total_cmp(&self.rhs[b]))
            };
            let Some(r) = leaving else {
                return Ok(self.value);
            };
            let entries: Vec<(usize, f64, f64)> = (0..w)
                .filter_map(|l| {
                    let t = self.tab[r * w + l];
                    (t < -PIVOT_EPS).then_some((l, -t, -self.obj[l]))
                })
                .collect();
            let Some((j, ratio)) = Self::harris(&entries, COST_EPS, |l| self.col_var[l], bland) else {
                return Err(Error::Infeasible);
            };
            if ratio <= COST_EPS {
                stalled += 1;
            } else {
                stalled = 0;
            }
            self.pivot(r, j);
        }
        Err(Error::IterationLimit("dual simplex"))
    }

    /// Restores optimality after rows were appended.
    pub fn reoptimize(&mut self) -> Result<f64> {
        self.solve_dual()?;
        self.solve_primal()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn textbook_problem() {
        // max 3x + 5y, x ≤ 4, 2y ≤ 12, 3x + 2y ≤ 18 → 36 at (2, 6)
        let mut s = Simplex::new(
            &[3.0, 5.0],
            &[vec![1.0, 0.0], vec![0.0, 2.0], vec![3.0, 2.0]],
            &[4.0, 12.0, 18.0],
        )
        .unwrap();
        let v = s.solve_primal().unwrap();
        assert!((v - 36.0).abs() < 1e-12);
        let x = s.primal_solution();
        assert!((x[0] - 2.0).abs() < 1e-12 && (x[1] - 6.0).abs() < 1e-12);
    }

    #[test]
    fn unbounded_is_reported() {
        let mut s = Simplex::new(&[1.0, 1.0], &[vec![1.0, -1.0]], &[1.0]).unwrap();
        assert_eq!(s.solve_primal(), Err(Error::Unbounded));
    }

    #[test]
    fn row_generation_with_dual_repair() {
        // Start with x ≤ 4, y ≤ 6, then add x + y ≤ 5 and x - y ≤ -1.
        let mut s = Simplex::new(&[1.0, 2.0], &[vec![1.0, 0.0], vec![0.0, 1.0]], &[4.0, 6.0]).unwrap();
        assert!((s.solve_primal().unwrap() - 16.0).abs() < 1e-12);
        s.add_row(&[(0, 1.0), (1, 1.0)], 5.0).unwrap();
        assert!((s.reoptimize().unwrap() - 10.0).abs() < 1e-12);
        s.add_row(&[(0, 1.0), (1, -1.0)], -1.0).unwrap();
        let v = s.reoptimize().unwrap();
        assert!((v - 10.0).abs() < 1e-12, "{v}");
        let x = s.primal_solution();
        assert!(x[0] - x[1] <= -1.0 + 1e-12);
    }

    #[test]
    fn infeasible_after_row() {
        let mut s = Simplex::new(&[1.0], &[vec![1.0]], &[3.0]).unwrap();
        s.solve_primal().unwrap();
        s.add_row(&[(0, -1.0)], -5.0).unwrap();
        assert_eq!(s.reoptimize(), Err(Error::Infeasible));
    }

    #[test]
    fn negative_initial_rhs_rejected() {
        assert!(Simplex::new(&[1.0], &[vec![1.0]], &[-1.0]).is_err());
    }

    /// Degenerate problems shaped like the BL program: every pair row has a
    /// zero right-hand side. Checks feasibility of the reported vertex and
    /// that lazily added rows reach the same optimum as the full system.
    #[test]
    fn degenerate_pair_rows() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        for case in 0..300 {
            let n = 30;
            let pts: Vec<(f64, f64)> = (0..n).map(|_| (rng.random_range(0.0..1.0), rng.random_range(0.0..1.0))).collect();
            let d = |i: usize, j: usize| (pts[i].0 - pts[j].0).hypot(pts[i].1 - pts[j].1);
            let w: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
            let total: f64 = w.iter().sum();
            let mut c = w.clone();
            c.extend([-total, 0.0]);
            let mut rows = Vec::new();
            for i in 0..n {
                let mut r = vec![0.0; n + 2];
                r[i] = 1.0;
                r[n] = -2.0;
                rows.push(r);
            }
            let mut r = vec![0.0; n + 2];
            r[n] = 1.0;
            r[n + 1] = 1.0;
            rows.push(r);
            let mut rhs = vec![0.0; n];
            rhs.push(1.0);
            let pairs: Vec<(usize, usize)> = (0..n).flat_map(|i| (0..n).map(move |j| (i, j))).filter(|(i, j)| i != j).collect();

            let mut full = Simplex::new(&c, &rows, &rhs).unwrap();
            for &(i, j) in &pairs {
                full.add_row(&[(i, 1.0), (j, -1.0), (n + 1, -d(i, j))], 0.0).unwrap();
            }
            let v_full = full.solve_primal().unwrap();
            let x = full.primal_solution();
            let bad = pairs.iter().filter(|&&(i, j)| x[i] - x[j] - x[n + 1] * d(i, j) > 1e-9).count();
            assert_eq!(bad, 0, "case {case}");
            assert!((0..n).all(|i| x[i] <= 2.0 * x[n] + 1e-9), "case {case}");

            let mut lazy = Simplex::new(&c, &rows, &rhs).unwrap();
            lazy.solve_primal().unwrap();
            loop {
                let x = lazy.primal_solution();
                let viol: Vec<&(usize, usize)> = pairs.iter().filter(|&&(i, j)| x[i] - x[j] - x[n + 1] * d(i, j) > 1e-10).take(20).collect();
                if viol.is_empty() {
                    break;
                }
                for &&(i, j) in &viol {
                    lazy.add_row(&[(i, 1.0), (j, -1.0), (n + 1, -d(i, j))], 0.0).unwrap();
                }
                lazy.reoptimize().unwrap();
            }
            assert!((lazy.value() - v_full).abs() < 1e-9, "case {case}: {} vs {v_full}", lazy.value());
        }
    }
}
