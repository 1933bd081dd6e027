//! Objectives and multiplicative updates for `Y ~ X Theta A`.
//!
//! Every update has the form `M <- M * numerator / denominator` with
//! non-negative terms, so non-negative inputs stay non-negative and zero
//! entries stay zero. Denominators are floored at [`DIVISION_FLOOR`].

use crate::error::{Error, Result};
use crate::matrix::{Matrix, DIVISION_FLOOR};

#[cfg(test)]
thread_local! {
    static UPDATE_CALLS: std::cell::Cell<usize> = const { std::cell::Cell::new(0) };
}

#[inline]
fn count_call() {
    #[cfg(test)]
    UPDATE_CALLS.with(|c| c.set(c.get() + 1));
}

/// Number of update-kernel invocations on the current thread.
#[cfg(test)]
pub(crate) fn update_calls() -> usize {
    UPDATE_CALLS.with(|c| c.get())
}

fn check_same(op: &'static str, a: &Matrix, b: &Matrix) -> Result<()> {
    if a.shape() != b.shape() {
        return Err(Error::Dimension {
            op,
            left: a.shape(),
            right: b.shape(),
        });
    }
    Ok(())
}

/// `|Y - Yhat|_F^2 + gamma |Theta|_F^2`.
pub fn objective_euclidean(y: &Matrix, yhat: &Matrix, theta: &Matrix, gamma: f64) -> Result<f64> {
    check_same("objective_euclidean", y, yhat)?;
    let residual: f64 = y
        .as_slice()
        .iter()
        .zip(yhat.as_slice())
        .map(|(a, b)| (a - b) * (a - b))
        .sum();
    Ok(residual + gamma * theta.frobenius_sq())
}

/// `sum(y log(y / yhat) - y + yhat) + gamma |Theta|_F^2`, with `0 log 0 = 0`
/// and `yhat` floored inside the logarithm.
pub fn objective_kl(y: &Matrix, yhat: &Matrix, theta: &Matrix, gamma: f64) -> Result<f64> {
    check_same("objective_kl", y, yhat)?;
    let divergence: f64 = y
        .as_slice()
        .iter()
        .zip(yhat.as_slice())
        .map(|(&o, &f)| {
            if o > 0.0 {
                o * (o / f.max(DIVISION_FLOOR)).ln() - o + f
            } else {
                f
            }
        })
        .sum();
    Ok(divergence + gamma * theta.frobenius_sq())
}

/// `X <- X * (Y B') / (Yhat B')`.
pub fn update_basis_euclidean(x: &Matrix, y: &Matrix, yhat: &Matrix, b: &Matrix) -> Result<Matrix> {
    count_call();
    check_same("update_basis_euclidean", y, yhat)?;
    let bt = b.transpose();
    let num = y.matmul(&bt)?;
    let den = yhat.matmul(&bt)?;
    x.hadamard_product(&num.hadamard_division(&den, DIVISION_FLOOR)?)
}

/// `Theta <- Theta * (X' Y A') / (X' Yhat A' + gamma Theta)`.
pub fn update_theta_euclidean(
    theta: &Matrix,
    x: &Matrix,
    y: &Matrix,
    yhat: &Matrix,
    a: &Matrix,
    gamma: f64,
) -> Result<Matrix> {
    check_same("update_theta_euclidean", y, yhat)?;
    let at = a.transpose();
    theta_euclidean_step(theta, x, &y.matmul(&at)?, yhat, &at, gamma)
}

/// Euclidean Theta step with `Y A'` and `A'` precomputed.
pub(crate) fn theta_euclidean_step(
    theta: &Matrix,
    x: &Matrix,
    y_at: &Matrix,
    yhat: &Matrix,
    at: &Matrix,
    gamma: f64,
) -> Result<Matrix> {
    count_call();
    let xt = x.transpose();
    let num = xt.matmul(y_at)?;
    let den = xt.matmul(yhat)?.matmul(at)?.add(&theta.scale(gamma))?;
    theta.hadamard_product(&num.hadamard_division(&den, DIVISION_FLOOR)?)
}

/// `X <- X * ((Y / Yhat) B') / (1_P s_r(B)')`.
pub fn update_basis_kl(x: &Matrix, y: &Matrix, yhat: &Matrix, b: &Matrix) -> Result<Matrix> {
    count_call();
    check_same("update_basis_kl", y, yhat)?;
    let ratio = y.hadamard_division(yhat, DIVISION_FLOOR)?;
    let num = ratio.matmul(&b.transpose())?;
    let den = Matrix::outer(&vec![1.0; x.rows()], &b.row_sums())?;
    x.hadamard_product(&num.hadamard_division(&den, DIVISION_FLOOR)?)
}

/// `Theta <- Theta * (X' (Y / Yhat) A') / (s_c(X)' s_r(A)' + 2 gamma Theta)`.
///
/// The denominator entry `(q, r)` is `sum_{p,n} x_{pq} a_{rn} + 2 gamma theta_{qr}`.
pub fn update_theta_kl(
    theta: &Matrix,
    x: &Matrix,
    y: &Matrix,
    yhat: &Matrix,
    a: &Matrix,
    gamma: f64,
) -> Result<Matrix> {
    check_same("update_theta_kl", y, yhat)?;
    theta_kl_step(theta, x, y, yhat, &a.transpose(), &a.row_sums(), gamma)
}

pub(crate) fn theta_kl_step(
    theta: &Matrix,
    x: &Matrix,
    y: &Matrix,
    yhat: &Matrix,
    at: &Matrix,
    a_row_sums: &[f64],
    gamma: f64,
) -> Result<Matrix> {
    count_call();
    let ratio = y.hadamard_division(yhat, DIVISION_FLOOR)?;
    let num = x.transpose().matmul(&ratio)?.matmul(at)?;
    let den = Matrix::outer(&x.col_sums(), a_row_sums)?.add(&theta.scale(2.0 * gamma))?;
    theta.hadamard_product(&num.hadamard_division(&den, DIVISION_FLOOR)?)
}

/// Divides each column of `X` by its sum. `iteration` is reported in the
/// error when a column sums to zero.
pub fn normalize_basis(x: &Matrix, iteration: usize) -> Result<Matrix> {
    let sums = x.col_sums();
    if let Some(column) = sums.iter().position(|&s| !(s > 0.0)) {
        return Err(Error::DegenerateBasis { column, iteration });
    }
    Matrix::from_fn(x.rows(), x.cols(), |i, j| x.get(i, j) / sums[j])
}
