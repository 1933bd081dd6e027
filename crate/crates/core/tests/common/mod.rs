#![allow(dead_code)]

use std::path::PathBuf;

use nalgebra::DMatrix;
use nmfcov::io::{read_csv, LabeledMatrix, Orientation};
use nmfcov::kernel::FeatureMatrix;
use nmfcov::matrix::DIVISION_FLOOR;
use nmfcov::nmf::{
    initial_factors, normalize_basis, objective_euclidean, objective_kl, relative_change, update_basis_euclidean,
    update_basis_kl, Loss,
};
use nmfcov::Matrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn uniform(rng: &mut ChaCha8Rng, rows: usize, cols: usize, lo: f64, hi: f64) -> Matrix {
    Matrix::from_fn(rows, cols, |_, _| rng.random_range(lo..hi)).unwrap()
}

pub fn fixture_path(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name)
}

pub fn orthodont() -> LabeledMatrix {
    read_csv(&fixture_path("orthodont.csv"), Orientation::IndividualsInColumns).unwrap()
}

/// Intercept row plus a male indicator (ids starting with `M`).
pub fn male_dummy(ids: &[String]) -> Matrix {
    Matrix::from_rows(&[
        vec![1.0; ids.len()],
        ids.iter().map(|id| if id.starts_with('M') { 1.0 } else { 0.0 }).collect(),
    ])
    .unwrap()
}

pub fn to_na(m: &Matrix) -> DMatrix<f64> {
    DMatrix::from_row_slice(m.rows(), m.cols(), m.as_slice())
}

/// Growth curve model estimate by explicit inversion.
pub fn gls_oracle(y: &Matrix, x: &Matrix, a: &Matrix) -> DMatrix<f64> {
    let (y, x, a) = (to_na(y), to_na(x), to_na(a));
    let n = y.ncols();
    let r = a.nrows();
    let aat_inv = (&a * a.transpose()).try_inverse().unwrap();
    let h = DMatrix::<f64>::identity(n, n) - a.transpose() * &aat_inv * &a;
    let s = &y * h * y.transpose() / (n - r) as f64;
    let s_inv = s.try_inverse().unwrap();
    let m = (x.transpose() * &s_inv * &x).try_inverse().unwrap();
    m * x.transpose() * s_inv * y * a.transpose() * aat_inv
}

/// Exact non-negative least squares `min |y - A' theta|^2, theta >= 0` by
/// enumerating active sets. Returns the minimum squared error.
pub fn nnls_oracle(y: &[f64], a: &Matrix) -> f64 {
    let r = a.rows();
    let at = to_na(&a.transpose());
    let yv = nalgebra::DVector::from_column_slice(y);
    let mut best = yv.norm_squared();
    for mask in 1u32..(1 << r) {
        let cols: Vec<usize> = (0..r).filter(|k| mask & (1 << k) != 0).collect();
        let sub = at.select_columns(&cols);
        let Some(inv) = (sub.transpose() * &sub).try_inverse() else {
            continue;
        };
        let coef = inv * sub.transpose() * &yv;
        if coef.iter().all(|&c| c >= 0.0) {
            best = best.min((&yv - &sub * coef).norm_squared());
        }
    }
    best
}

/// `|Y|^2 - sigma_1^2`, with `sigma_1^2` the top eigenvalue of `Y'Y` from
/// power iteration.
pub fn rank1_svd_residual(y: &Matrix) -> f64 {
    let yn = to_na(y);
    let g = yn.transpose() * &yn;
    let mut v = nalgebra::DVector::from_element(g.ncols(), 1.0).normalize();
    let mut lambda = 0.0;
    for _ in 0..1_000_000 {
        let w = &g * &v;
        let next = v.dot(&w);
        v = w.normalize();
        if (next - lambda).abs() <= 1e-12 * next {
            lambda = next;
            break;
        }
        lambda = next;
    }
    yn.norm_squared() - lambda
}

/// Smooth positive curves of a 1-dim feature plus Gaussian-ish noise.
pub fn smooth_dataset(n: usize, seed: u64) -> (Matrix, FeatureMatrix) {
    let mut rng = rng(seed);
    let u: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..1.0)).collect();
    let mut noise = || (0..4).map(|_| rng.random_range(-0.1..0.1)).sum::<f64>();
    let curves: [fn(f64) -> f64; 3] = [
        |t| 2.0 + (2.0 * std::f64::consts::PI * t).sin(),
        |t| 2.0 + (2.0 * std::f64::consts::PI * t).cos(),
        |t| 1.0 + 3.0 * (t - 0.5) * (t - 0.5),
    ];
    let y = Matrix::from_fn(3, n, |p, k| (curves[p](u[k]) + noise()).max(0.0)).unwrap();
    (y, FeatureMatrix::new(Matrix::new(1, n, u).unwrap()))
}

fn objective(loss: Loss, y: &Matrix, yhat: &Matrix, b: &Matrix, gamma: f64) -> f64 {
    match loss {
        Loss::Euclidean => objective_euclidean(y, yhat, b, gamma),
        Loss::Kl => objective_kl(y, yhat, b, gamma),
    }
    .unwrap()
}

/// Halving line search from `from` towards `candidate`, accepting the first
/// point whose objective is within 1e-12 relative of `current`.
fn backtrack(
    from: &Matrix,
    candidate: Matrix,
    current: f64,
    eval: impl Fn(&Matrix) -> (Matrix, f64),
) -> Option<(Matrix, Matrix)> {
    let accept = current + 1e-12 * current.abs();
    let (yhat, obj) = eval(&candidate);
    if obj <= accept {
        return Some((candidate, yhat));
    }
    let delta = candidate.sub(from).unwrap();
    let mut t = 0.5;
    for _ in 0..40 {
        let point = from.add(&delta.scale(t)).unwrap().map(|v| v.max(0.0));
        let (yhat, obj) = eval(&point);
        if obj <= accept {
            return Some((point, yhat));
        }
        t *= 0.5;
    }
    None
}

/// Covariate-free NMF that updates `B` directly, seeded like restart 0 of
/// `fit` with `A = I`. Returns the objective trace.
pub fn reference_free_nmf(y: &Matrix, q: usize, loss: Loss, gamma: f64, seed: u64, tol: f64, max_iter: usize) -> Vec<f64> {
    let (p, n) = y.shape();
    let (mut x, mut b) = initial_factors(p, q, n, seed, 0).unwrap();
    let mut yhat = x.matmul(&b).unwrap();
    let mut trace = vec![objective(loss, y, &yhat, &b, gamma)];
    for it in 0..max_iter {
        let current = objective(loss, y, &yhat, &b, gamma);
        let updated = match loss {
            Loss::Euclidean => update_basis_euclidean(&x, y, &yhat, &b),
            Loss::Kl => update_basis_kl(&x, y, &yhat, &b),
        }
        .unwrap();
        let candidate = normalize_basis(&updated, it + 1).unwrap();
        let eval = |xc: &Matrix| {
            let yh = xc.matmul(&b).unwrap();
            let obj = objective(loss, y, &yh, &b, gamma);
            (yh, obj)
        };
        if let Some((nx, nyhat)) = backtrack(&x, candidate, current, eval) {
            x = nx;
            yhat = nyhat;
        }

        let current = objective(loss, y, &yhat, &b, gamma);
        let xt = x.transpose();
        let candidate = match loss {
            Loss::Euclidean => {
                let num = xt.matmul(y).unwrap();
                let den = xt.matmul(&yhat).unwrap().add(&b.scale(gamma)).unwrap();
                b.hadamard_product(&num.hadamard_division(&den, DIVISION_FLOOR).unwrap()).unwrap()
            }
            Loss::Kl => {
                let ratio = y.hadamard_division(&yhat, DIVISION_FLOOR).unwrap();
                let num = xt.matmul(&ratio).unwrap();
                let den = Matrix::outer(&x.col_sums(), &vec![1.0; n])
                    .unwrap()
                    .add(&b.scale(2.0 * gamma))
                    .unwrap();
                b.hadamard_product(&num.hadamard_division(&den, DIVISION_FLOOR).unwrap()).unwrap()
            }
        };
        let eval = |bc: &Matrix| {
            let yh = x.matmul(bc).unwrap();
            let obj = objective(loss, y, &yh, bc, gamma);
            (yh, obj)
        };
        if let Some((nb, nyhat)) = backtrack(&b, candidate, current, eval) {
            b = nb;
            yhat = nyhat;
        }

        let obj = objective(loss, y, &yhat, &b, gamma);
        let prev = *trace.last().unwrap();
        trace.push(obj);
        if relative_change(prev, obj) < tol {
            break;
        }
    }
    trace
}

/// Objective after initialization and after every half-step.
pub fn half_step_trace(opt: &mut nmfcov::nmf::Optimizer<'_>, iterations: usize) -> Vec<f64> {
    let mut trace = vec![opt.objective()];
    for _ in 0..iterations {
        trace.push(opt.step_basis().unwrap());
        trace.push(opt.step_theta().unwrap());
    }
    trace
}

/// Largest relative increase between consecutive trace entries.
pub fn worst_increase(trace: &[f64]) -> f64 {
    trace
        .windows(2)
        .map(|w| (w[1] - w[0]) / w[0].abs().max(1e-300))
        .fold(f64::NEG_INFINITY, f64::max)
}
