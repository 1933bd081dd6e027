//! Starting points for the multiplicative updates.

use std::fmt;
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{normalize_basis, relative_change, FitConfig, Optimizer};
use crate::error::{Error, Result};
use crate::gcm::{nonneg_regression_with, UpdateOptions};
use crate::matrix::Matrix;

/// How restart 0 is initialized. Later restarts are always seeded uniform.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Init {
    /// `X`, `Theta` uniform on `(0.1, 1.1)`.
    #[default]
    Random,
    /// `X` from k-means centroids of the columns of `Y`, `Theta = 1`. With
    /// covariates, `Theta` is warm-started from a covariate-free fit.
    KMeans,
}

impl FromStr for Init {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "random" => Ok(Init::Random),
            "kmeans" => Ok(Init::KMeans),
            other => Err(Error::InvalidConfig(format!("unknown init '{other}'"))),
        }
    }
}

impl fmt::Display for Init {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Init::Random => "random",
            Init::KMeans => "kmeans",
        })
    }
}

const KMEANS_STARTS: usize = 25;
const KMEANS_MAX_ITER: usize = 100;

fn sq_dist(y: &Matrix, n: usize, centers: &Matrix, k: usize) -> f64 {
    (0..y.rows()).map(|p| (y.get(p, n) - centers.get(p, k)).powi(2)).sum()
}

/// Best-of-several Lloyd runs clustering the columns of `y` into `k`
/// groups. Returns the `P x k` centroid matrix.
pub fn kmeans_columns(y: &Matrix, k: usize, seed: u64) -> Result<Matrix> {
    let (p, n) = y.shape();
    if k < 1 || k > n {
        return Err(Error::InvalidConfig(format!("k-means needs 1 <= k <= {n}, got {k}")));
    }
    let mut best: Option<(f64, Matrix)> = None;
    for start in 0..KMEANS_STARTS {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(start as u64);
        let picks = rand::seq::index::sample(&mut rng, n, k).into_vec();
        let mut centers = y.select_cols(&picks)?;
        let mut labels = vec![usize::MAX; n];
        for _ in 0..KMEANS_MAX_ITER {
            let mut changed = false;
            for (j, label) in labels.iter_mut().enumerate() {
                let nearest = (0..k)
                    .map(|c| (c, sq_dist(y, j, &centers, c)))
                    .fold((0, f64::INFINITY), |b, cur| if cur.1 < b.1 { cur } else { b })
                    .0;
                if *label != nearest {
                    *label = nearest;
                    changed = true;
                }
            }
            if !changed {
                break;
            }
            let mut sums = vec![0.0; p * k];
            let mut counts = vec![0usize; k];
            for (j, &c) in labels.iter().enumerate() {
                counts[c] += 1;
                for i in 0..p {
                    sums[i * k + c] += y.get(i, j);
                }
            }
            centers = Matrix::from_fn(p, k, |i, c| {
                if counts[c] == 0 {
                    centers.get(i, c)
                } else {
                    sums[i * k + c] / counts[c] as f64
                }
            })?;
        }
        let sse: f64 = labels.iter().enumerate().map(|(j, &c)| sq_dist(y, j, &centers, c)).sum();
        if best.as_ref().is_none_or(|(b, _)| sse < *b) {
            best = Some((sse, centers));
        }
    }
    Ok(best.expect("at least one start").1)
}

fn is_identity(a: &Matrix) -> bool {
    a.rows() == a.cols()
        && (0..a.rows()).all(|i| (0..a.cols()).all(|j| a.get(i, j) == if i == j { 1.0 } else { 0.0 }))
}

fn run_to_convergence(opt: &mut Optimizer<'_>, config: &FitConfig) -> Result<()> {
    let mut prev = opt.objective();
    for _ in 0..config.max_iter {
        let obj = opt.step()?;
        if relative_change(prev, obj) < config.tol {
            break;
        }
        prev = obj;
    }
    Ok(())
}

/// Deterministic start: centroid basis, unit parameters. When `a` is not
/// the identity, a covariate-free fit is run first and each row of its
/// coefficient matrix is regressed non-negatively on `a` to give `Theta`.
pub fn kmeans_start(y: &Matrix, a: &Matrix, config: &FitConfig) -> Result<(Matrix, Matrix)> {
    let floor = 1e-6 * y.max();
    let centers = kmeans_columns(y, config.rank, config.seed)?.map(|v| v.max(floor));
    let x0 = normalize_basis(&centers, 0)?;
    let free_theta = Matrix::filled(config.rank, y.cols(), 1.0)?;
    if is_identity(a) {
        return Ok((x0, free_theta));
    }
    let identity = Matrix::identity(y.cols())?;
    let mut free = Optimizer::new(y, &identity, config.loss, config.gamma, x0, free_theta)?;
    run_to_convergence(&mut free, config)?;
    let b = free.theta().clone();
    let opts = UpdateOptions {
        tol: 1e-10,
        max_iter: 20_000,
    };
    let rows = (0..b.rows())
        .map(|q| nonneg_regression_with(b.row(q), a, config.seed, &opts))
        .collect::<Result<Vec<_>>>()?;
    let theta0 = Matrix::from_rows(&rows)?.map(|v| v.max(1e-12));
    Ok((free.basis().clone(), theta0))
}
