//! Partial-pivoting LU factorization with a condition-number guard.

use crate::error::{Error, Result};
use crate::matrix::Matrix;

/// Factors whose 1-norm condition estimate exceeds this are rejected.
pub const MAX_CONDITION: f64 = 1e12;

/// LU factorization `PA = LU` of a square matrix.
#[derive(Debug, Clone)]
pub struct Lu {
    n: usize,
    lu: Vec<f64>,
    perm: Vec<usize>,
}

impl Lu {
    /// Factors `a`; `factor` names the matrix in any error.
    pub fn new(a: &Matrix, factor: &'static str) -> Result<Self> {
        let (n, c) = a.shape();
        if n != c {
            return Err(Error::Dimension {
                op: "lu",
                left: a.shape(),
                right: (c, n),
            });
        }
        let mut lu = a.as_slice().to_vec();
        let mut perm: Vec<usize> = (0..n).collect();
        let scale = a.as_slice().iter().fold(0.0f64, |m, v| m.max(v.abs()));
        for k in 0..n {
            let (p, pivot) = (k..n)
                .map(|i| (i, lu[i * n + k].abs()))
                .fold((k, -1.0), |best, cur| if cur.1 > best.1 { cur } else { best });
            if pivot <= scale * f64::EPSILON * n as f64 || pivot == 0.0 {
                return Err(Error::Singular {
                    factor,
                    condition: f64::INFINITY,
                });
            }
            if p != k {
                for j in 0..n {
                    lu.swap(k * n + j, p * n + j);
                }
                perm.swap(k, p);
            }
            let d = lu[k * n + k];
            for i in k + 1..n {
                let l = lu[i * n + k] / d;
                lu[i * n + k] = l;
                for j in k + 1..n {
                    lu[i * n + j] -= l * lu[k * n + j];
                }
            }
        }
        Ok(Self { n, lu, perm })
    }

    fn solve_in_place(&self, b: &mut [f64]) {
        let n = self.n;
        let mut x: Vec<f64> = self.perm.iter().map(|&p| b[p]).collect();
        for i in 0..n {
            let s: f64 = (0..i).map(|j| self.lu[i * n + j] * x[j]).sum();
            x[i] -= s;
        }
        for i in (0..n).rev() {
            let s: f64 = (i + 1..n).map(|j| self.lu[i * n + j] * x[j]).sum();
            x[i] = (x[i] - s) / self.lu[i * n + i];
        }
        b.copy_from_slice(&x);
    }

    /// Solves `A Z = B` column by column.
    pub fn solve(&self, b: &Matrix) -> Result<Matrix> {
        if b.rows() != self.n {
            return Err(Error::Dimension {
                op: "lu_solve",
                left: (self.n, self.n),
                right: b.shape(),
            });
        }
        let mut cols = Vec::with_capacity(b.cols());
        for j in 0..b.cols() {
            let mut col = b.col(j);
            self.solve_in_place(&mut col);
            cols.push(col);
        }
        Matrix::from_cols(&cols)
    }

    pub fn inverse(&self) -> Result<Matrix> {
        self.solve(&Matrix::identity(self.n)?)
    }
}

fn norm_1(a: &Matrix) -> f64 {
    (0..a.cols())
        .map(|j| (0..a.rows()).map(|i| a.get(i, j).abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// Inverse of `a` together with its 1-norm condition number. Fails with a
/// singularity error naming `factor` when the condition number exceeds
/// [`MAX_CONDITION`].
pub fn guarded_inverse(a: &Matrix, factor: &'static str) -> Result<(Matrix, f64)> {
    let inv = Lu::new(a, factor)?.inverse().map_err(|e| match e {
        Error::NonFinite { .. } => Error::Singular {
            factor,
            condition: f64::INFINITY,
        },
        other => other,
    })?;
    let condition = norm_1(a) * norm_1(&inv);
    if !condition.is_finite() || condition > MAX_CONDITION {
        return Err(Error::Singular { factor, condition });
    }
    Ok((inv, condition))
}
