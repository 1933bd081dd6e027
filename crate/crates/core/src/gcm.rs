//! Growth curve model `Y ~ N(X Theta A, Sigma (x) I_N)` with known `X` and
//! `A`: closed-form maximum likelihood estimates, plus the non-negative
//! alternatives obtained by iterating the multiplicative `Theta` update with
//! `X` held fixed.

use crate::error::{Error, Result};
use crate::linalg::guarded_inverse;
use crate::matrix::Matrix;
use crate::nmf::{initial_factors, relative_change, Loss, Optimizer};

/// Closed-form estimates.
#[derive(Debug, Clone, PartialEq)]
pub struct GcmEstimate {
    pub theta_hat: Matrix,
    pub sigma_hat: Matrix,
    /// Residual scatter `Y (I - A'(AA')^-1 A) Y' / (N - R)`.
    pub s: Matrix,
}

fn symmetrize(m: &Matrix) -> Matrix {
    Matrix::from_parts(
        m.rows(),
        m.cols(),
        (0..m.rows())
            .flat_map(|i| (0..m.cols()).map(move |j| 0.5 * (m.get(i, j) + m.get(j, i))))
            .collect(),
    )
}

/// Maximum likelihood `Theta` and `Sigma`:
///
/// ```text
/// Theta = (X' S^-1 X)^-1 X' S^-1 Y A' (AA')^-1
/// Sigma = (Y - X Theta A)(Y - X Theta A)' / N
/// ```
///
/// Every inversion goes through a pivoted LU with a condition-number guard.
pub fn gcm_mle(y: &Matrix, x: &Matrix, a: &Matrix) -> Result<GcmEstimate> {
    let (p, n) = y.shape();
    let r = a.rows();
    if x.rows() != p {
        return Err(Error::Dimension {
            op: "gcm_mle",
            left: y.shape(),
            right: x.shape(),
        });
    }
    if a.cols() != n {
        return Err(Error::Dimension {
            op: "gcm_mle",
            left: y.shape(),
            right: a.shape(),
        });
    }
    if n <= r {
        return Err(Error::InsufficientData { n, r });
    }
    let at = a.transpose();
    let (aat_inv, _) = guarded_inverse(&a.matmul(&at)?, "AA'")?;
    // Y (I - H) Y' = E E' with E = Y - Y A'(AA')^-1 A, since I - H is a
    // symmetric projection.
    let y_at = y.matmul(&at)?;
    let coef = y_at.matmul(&aat_inv)?;
    let e = y.sub(&coef.matmul(a)?)?;
    let s = symmetrize(&e.matmul(&e.transpose())?.scale(1.0 / (n - r) as f64));
    let (s_inv, _) = guarded_inverse(&s, "S")?;
    let xt_sinv = x.transpose().matmul(&s_inv)?;
    let (m_inv, _) = guarded_inverse(&xt_sinv.matmul(x)?, "X'S^-1X")?;
    let theta_hat = m_inv.matmul(&xt_sinv)?.matmul(&coef)?;
    let resid = y.sub(&x.matmul(&theta_hat)?.matmul(a)?)?;
    let sigma_hat = symmetrize(&resid.matmul(&resid.transpose())?.scale(1.0 / n as f64));
    Ok(GcmEstimate {
        theta_hat,
        sigma_hat,
        s,
    })
}

/// Stopping rule for the iterative estimators.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UpdateOptions {
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for UpdateOptions {
    fn default() -> Self {
        Self {
            tol: 1e-14,
            max_iter: 200_000,
        }
    }
}

/// Non-negative `Theta` for fixed `X` and `A` by iterating
/// `Theta <- Theta * (X'YA') / (X'Yhat A')`, `Yhat <- X Theta A`, with
/// `gamma = 0`.
pub fn gcm_theta_by_nmf_updates(y: &Matrix, x: &Matrix, a: &Matrix, seed: u64) -> Result<Matrix> {
    gcm_theta_by_nmf_updates_with(y, x, a, seed, &UpdateOptions::default())
}

pub fn gcm_theta_by_nmf_updates_with(
    y: &Matrix,
    x: &Matrix,
    a: &Matrix,
    seed: u64,
    opts: &UpdateOptions,
) -> Result<Matrix> {
    x.check_nonnegative()?;
    let (_, theta0) = initial_factors(1, x.cols(), a.rows(), seed, 0)?;
    let mut opt = Optimizer::new(y, a, Loss::Euclidean, 0.0, x.clone(), theta0)?;
    let mut prev = opt.objective();
    for _ in 0..opts.max_iter {
        let obj = opt.step_theta()?;
        if relative_change(prev, obj) < opts.tol || obj == 0.0 {
            break;
        }
        prev = obj;
    }
    Ok(opt.theta().clone())
}

/// Non-negative regression `y ~ A' theta` (one observed variable, scalar
/// basis) by iterating `theta <- theta * (A y) / (A yhat)`, `yhat <- A' theta`.
pub fn nonneg_regression(y: &[f64], a: &Matrix, seed: u64) -> Result<Vec<f64>> {
    nonneg_regression_with(y, a, seed, &UpdateOptions::default())
}

pub fn nonneg_regression_with(y: &[f64], a: &Matrix, seed: u64, opts: &UpdateOptions) -> Result<Vec<f64>> {
    if let Some(row) = a.row_sums().iter().position(|&s| !(s > 0.0)) {
        return Err(Error::DegenerateInput(format!("covariate row {row} is all zero")));
    }
    let y = Matrix::new(1, y.len(), y.to_vec())?;
    let theta = gcm_theta_by_nmf_updates_with(&y, &Matrix::new(1, 1, vec![1.0])?, a, seed, opts)?;
    Ok(theta.into_vec())
}
