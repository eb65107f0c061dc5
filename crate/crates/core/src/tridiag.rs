//! Tridiagonal linear solves.
//!
//! `lower[i]` couples row `i` to column `i − 1` (entry 0 unused), `upper[i]`
//! couples row `i` to column `i + 1` (last entry unused).

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Tridiagonal {
    pub lower: Vec<f64>,
    pub diag: Vec<f64>,
    pub upper: Vec<f64>,
}

impl Tridiagonal {
    pub fn zeros(n: usize) -> Self {
        Tridiagonal {
            lower: vec![0.0; n],
            diag: vec![0.0; n],
            upper: vec![0.0; n],
        }
    }

    pub fn len(&self) -> usize {
        self.diag.len()
    }

    pub fn is_empty(&self) -> bool {
        self.diag.is_empty()
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        let n = self.len();
        (0..n)
            .map(|i| {
                let mut s = self.diag[i] * x[i];
                if i > 0 {
                    s += self.lower[i] * x[i - 1];
                }
                if i + 1 < n {
                    s += self.upper[i] * x[i + 1];
                }
                s
            })
            .collect()
    }

    /// Thomas algorithm without pivoting. Intended for diagonally dominant
    /// systems; a zero or non-finite pivot is reported with its row.
    pub fn solve(&self, rhs: &[f64]) -> Result<Vec<f64>> {
        let n = self.len();
        if rhs.len() != n {
            return Err(Error::Dimension {
                expected: n,
                actual: rhs.len(),
            });
        }
        let mut c = vec![0.0; n];
        let mut d = vec![0.0; n];
        let mut pivot = self.diag[0];
        check_pivot(pivot, 0)?;
        c[0] = self.upper[0] / pivot;
        d[0] = rhs[0] / pivot;
        for i in 1..n {
            pivot = self.diag[i] - self.lower[i] * c[i - 1];
            check_pivot(pivot, i)?;
            c[i] = if i + 1 < n { self.upper[i] / pivot } else { 0.0 };
            d[i] = (rhs[i] - self.lower[i] * d[i - 1]) / pivot;
        }
        let mut x = d;
        for i in (0..n - 1).rev() {
            x[i] -= c[i] * x[i + 1];
        }
        Ok(x)
    }

    /// Gaussian elimination with partial pivoting (LAPACK `gtsv` scheme),
    /// for indefinite systems such as Newton corrections at saddle points.
    pub fn solve_pivoting(&self, rhs: &[f64]) -> Result<Vec<f64>> {
        let n = self.len();
        if rhs.len() != n {
            return Err(Error::Dimension {
                expected: n,
                actual: rhs.len(),
            });
        }
        let mut dl: Vec<f64> = self.lower.iter().skip(1).copied().collect();
        let mut d = self.diag.clone();
        let mut du: Vec<f64> = self.upper[..n.saturating_sub(1)].to_vec();
        let mut du2 = vec![0.0; n.saturating_sub(2)];
        let mut b = rhs.to_vec();

        for i in 0..n.saturating_sub(1) {
            if d[i].abs() >= dl[i].abs() {
                check_pivot(d[i], i)?;
                let fact = dl[i] / d[i];
                d[i + 1] -= fact * du[i];
                b[i + 1] -= fact * b[i];
                dl[i] = 0.0;
            } else {
                let fact = d[i] / dl[i];
                d[i] = dl[i];
                let tmp = d[i + 1];
                d[i + 1] = du[i] - fact * tmp;
                if i + 2 < n {
                    dl[i] = du[i + 1];
                    du[i + 1] = -fact * dl[i];
                }
                du[i] = tmp;
                b.swap(i, i + 1);
                b[i + 1] -= fact * b[i];
                if i + 2 < n {
                    du2[i] = dl[i];
                }
                dl[i] = 0.0;
            }
        }
        check_pivot(d[n - 1], n - 1)?;

        let mut x = b;
        x[n - 1] /= d[n - 1];
        if n > 1 {
            x[n - 2] = (x[n - 2] - du[n - 2] * x[n - 1]) / d[n - 2];
        }
        for i in (0..n.saturating_sub(2)).rev() {
            x[i] = (x[i] - du[i] * x[i + 1] - du2[i] * x[i + 2]) / d[i];
        }
        if let Some(i) = x.iter().position(|v| !v.is_finite()) {
            return Err(Error::Numerical {
                row: i,
                detail: "non-finite solution entry".into(),
            });
        }
        Ok(x)
    }
}

fn check_pivot(p: f64, row: usize) -> Result<()> {
    if p == 0.0 || !p.is_finite() {
        return Err(Error::Numerical {
            row,
            detail: format!("pivot {p}"),
        });
    }
    Ok(())
}
