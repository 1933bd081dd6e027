//! NMF with covariates: `Y (P x N) ~ X (P x Q) Theta (Q x R) A (R x N)`.
//!
//! `X` and `Theta` are fitted by alternating multiplicative updates under
//! either the squared Euclidean or the KL-type objective, both with an
//! L2 penalty `gamma` on `Theta`. Columns of `X` are renormalized to sum to
//! one after every basis update. Passing `A = I_N` gives plain NMF with
//! `B = Theta`.

mod init;
mod updates;

pub use init::{kmeans_columns, Init};
#[cfg(test)]
pub(crate) use updates::update_calls;
pub use updates::{
    normalize_basis, objective_euclidean, objective_kl, update_basis_euclidean, update_basis_kl,
    update_theta_euclidean, update_theta_kl,
};

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::Matrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Loss {
    Euclidean,
    Kl,
}

impl FromStr for Loss {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "euclidean" | "eu" => Ok(Loss::Euclidean),
            "kl" => Ok(Loss::Kl),
            other => Err(Error::InvalidConfig(format!("unknown loss '{other}'"))),
        }
    }
}

impl fmt::Display for Loss {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Loss::Euclidean => "euclidean",
            Loss::Kl => "kl",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitConfig {
    pub rank: usize,
    pub loss: Loss,
    pub gamma: f64,
    pub tol: f64,
    pub max_iter: usize,
    pub seed: u64,
    pub restarts: usize,
    #[serde(default)]
    pub init: Init,
}

impl Default for FitConfig {
    fn default() -> Self {
        Self {
            rank: 2,
            loss: Loss::Euclidean,
            gamma: 0.0,
            tol: 1e-8,
            max_iter: 5000,
            seed: 1,
            restarts: 5,
            init: Init::Random,
        }
    }
}

impl FitConfig {
    pub fn with_rank(rank: usize) -> Self {
        Self {
            rank,
            ..Self::default()
        }
    }

    /// Checks the configuration against a `P x N` data matrix.
    pub fn validate(&self, p: usize, n: usize) -> Result<()> {
        if self.rank < 1 || self.rank > p.min(n) {
            return Err(Error::InvalidConfig(format!(
                "rank must satisfy 1 <= Q <= min(P, N) = {}, got {}",
                p.min(n),
                self.rank
            )));
        }
        if !(self.gamma >= 0.0 && self.gamma.is_finite()) {
            return Err(Error::InvalidConfig(format!("gamma must be >= 0, got {}", self.gamma)));
        }
        if !(self.tol > 0.0) {
            return Err(Error::InvalidConfig(format!("tol must be > 0, got {}", self.tol)));
        }
        if self.max_iter < 1 {
            return Err(Error::InvalidConfig("max_iter must be >= 1".into()));
        }
        if self.restarts < 1 {
            return Err(Error::InvalidConfig("restarts must be >= 1".into()));
        }
        Ok(())
    }
}

/// Fitted factors. `B` and `Yhat` are always recomputed from the factors.
#[derive(Debug, Clone, PartialEq)]
pub struct FactorModel {
    pub x: Matrix,
    pub theta: Matrix,
    pub a: Matrix,
}

impl FactorModel {
    pub fn new(x: Matrix, theta: Matrix, a: Matrix) -> Result<Self> {
        if x.cols() != theta.rows() || theta.cols() != a.rows() {
            return Err(Error::Dimension {
                op: "factor_model",
                left: x.shape(),
                right: theta.shape(),
            });
        }
        Ok(Self { x, theta, a })
    }

    pub fn rank(&self) -> usize {
        self.x.cols()
    }

    /// `B = Theta A`.
    pub fn coefficients(&self) -> Matrix {
        self.theta.matmul(&self.a).expect("shapes checked at construction")
    }

    /// `Yhat = X B`.
    pub fn fitted(&self) -> Matrix {
        self.x.matmul(&self.coefficients()).expect("shapes checked at construction")
    }

    pub fn objective(&self, y: &Matrix, loss: Loss, gamma: f64) -> Result<f64> {
        let yhat = self.fitted();
        match loss {
            Loss::Euclidean => objective_euclidean(y, &yhat, &self.theta, gamma),
            Loss::Kl => objective_kl(y, &yhat, &self.theta, gamma),
        }
    }
}

/// Outcome of [`fit`].
#[derive(Debug, Clone)]
pub struct FitResult {
    pub model: FactorModel,
    /// Objective after initialization followed by one value per iteration.
    pub objective_trace: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
    pub r_squared: f64,
    pub restart_index: usize,
}

impl FitResult {
    pub fn objective(&self) -> f64 {
        *self.objective_trace.last().expect("trace holds the initial objective")
    }
}

/// Seeded starting point for restart `restart`: entries of `X` (`p x q`)
/// then `Theta` (`q x r`) drawn uniformly on `(0.1, 1.1)`, with `X`
/// column-normalized.
pub fn initial_factors(p: usize, q: usize, r: usize, seed: u64, restart: usize) -> Result<(Matrix, Matrix)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(restart as u64);
    let mut draw = |rows, cols| Matrix::from_fn(rows, cols, |_, _| rng.random_range(0.1..1.1));
    let x = draw(p, q)?;
    let theta = draw(q, r)?;
    Ok((normalize_basis(&x, 0)?, theta))
}

/// Relative slack within which an update is accepted without backtracking.
const ACCEPT_SLACK: f64 = 1e-12;
const MAX_BACKTRACK: usize = 40;

/// Returns `candidate` if it scores at most `accept`, else the first
/// halving point `from + t (candidate - from)` that does, or `None`.
fn backtrack<T>(
    from: &Matrix,
    candidate: Matrix,
    accept: f64,
    eval: impl Fn(&Matrix) -> Result<(T, f64)>,
) -> Result<Option<(Matrix, T, f64)>> {
    let (extra, obj) = eval(&candidate)?;
    if obj <= accept {
        return Ok(Some((candidate, extra, obj)));
    }
    let delta = candidate.sub(from)?;
    let mut t = 0.5;
    for _ in 0..MAX_BACKTRACK {
        let point = from.add(&delta.scale(t))?.map(|v| v.max(0.0));
        let (extra, obj) = eval(&point)?;
        if obj <= accept {
            return Ok(Some((point, extra, obj)));
        }
        t *= 0.5;
    }
    Ok(None)
}

/// Alternating multiplicative-update state for one starting point.
///
/// Each half-step refreshes `B` and `Yhat`, so the objective reported after
/// it is exact for the current factors.
#[derive(Debug, Clone)]
pub struct Optimizer<'a> {
    y: &'a Matrix,
    a: &'a Matrix,
    at: Matrix,
    y_at: Matrix,
    a_row_sums: Vec<f64>,
    loss: Loss,
    gamma: f64,
    x: Matrix,
    theta: Matrix,
    b: Matrix,
    yhat: Matrix,
    iteration: usize,
}

impl<'a> Optimizer<'a> {
    pub fn new(y: &'a Matrix, a: &'a Matrix, loss: Loss, gamma: f64, x: Matrix, theta: Matrix) -> Result<Self> {
        check_inputs(y, a)?;
        if x.rows() != y.rows() || x.cols() != theta.rows() || theta.cols() != a.rows() {
            return Err(Error::Dimension {
                op: "optimizer",
                left: x.shape(),
                right: theta.shape(),
            });
        }
        let at = a.transpose();
        let y_at = y.matmul(&at)?;
        let b = theta.matmul(a)?;
        let yhat = x.matmul(&b)?;
        Ok(Self {
            y,
            a,
            y_at,
            a_row_sums: a.row_sums(),
            at,
            loss,
            gamma,
            x,
            theta,
            b,
            yhat,
            iteration: 0,
        })
    }

    pub fn objective(&self) -> f64 {
        match self.loss {
            Loss::Euclidean => objective_euclidean(self.y, &self.yhat, &self.theta, self.gamma),
            Loss::Kl => objective_kl(self.y, &self.yhat, &self.theta, self.gamma),
        }
        .expect("shapes fixed at construction")
    }

    fn objective_with(&self, yhat: &Matrix, theta: &Matrix) -> f64 {
        match self.loss {
            Loss::Euclidean => objective_euclidean(self.y, yhat, theta, self.gamma),
            Loss::Kl => objective_kl(self.y, yhat, theta, self.gamma),
        }
        .expect("shapes fixed at construction")
    }

    fn accept_level(&self) -> f64 {
        let current = self.objective();
        current + ACCEPT_SLACK * current.abs()
    }

    /// Basis update followed by column normalization. Returns the objective.
    ///
    /// Normalization can raise the objective. When it does, the step backs
    /// off along the segment from the current basis to the normalized
    /// update; both ends are column-stochastic and the objective is convex
    /// in `X` for fixed `B`, so the worst case is keeping the current basis.
    pub fn step_basis(&mut self) -> Result<f64> {
        let accept = self.accept_level();
        let updated = match self.loss {
            Loss::Euclidean => update_basis_euclidean(&self.x, self.y, &self.yhat, &self.b)?,
            Loss::Kl => update_basis_kl(&self.x, self.y, &self.yhat, &self.b)?,
        };
        let candidate = normalize_basis(&updated, self.iteration + 1)?;
        let found = backtrack(&self.x, candidate, accept, |x| {
            let yhat = x.matmul(&self.b)?;
            let obj = self.objective_with(&yhat, &self.theta);
            Ok((yhat, obj))
        })?;
        if let Some((x, yhat, _)) = found {
            self.x = x;
            self.yhat = yhat;
        }
        Ok(self.objective())
    }

    /// Parameter update. Returns the objective.
    ///
    /// Under the penalized divergence the update is not guaranteed to
    /// descend, so it is safeguarded the same way as the basis step.
    pub fn step_theta(&mut self) -> Result<f64> {
        let accept = self.accept_level();
        let candidate = match self.loss {
            Loss::Euclidean => {
                updates::theta_euclidean_step(&self.theta, &self.x, &self.y_at, &self.yhat, &self.at, self.gamma)?
            }
            Loss::Kl => updates::theta_kl_step(
                &self.theta,
                &self.x,
                self.y,
                &self.yhat,
                &self.at,
                &self.a_row_sums,
                self.gamma,
            )?,
        };
        let found = backtrack(&self.theta, candidate, accept, |theta| {
            let b = theta.matmul(self.a)?;
            let yhat = self.x.matmul(&b)?;
            let obj = self.objective_with(&yhat, theta);
            Ok(((b, yhat), obj))
        })?;
        if let Some((theta, (b, yhat), _)) = found {
            self.theta = theta;
            self.b = b;
            self.yhat = yhat;
        }
        self.iteration += 1;
        Ok(self.objective())
    }

    /// One full iteration: basis half-step, then parameter half-step.
    pub fn step(&mut self) -> Result<f64> {
        self.step_basis()?;
        self.step_theta()
    }

    pub fn basis(&self) -> &Matrix {
        &self.x
    }

    pub fn theta(&self) -> &Matrix {
        &self.theta
    }

    pub fn fitted(&self) -> &Matrix {
        &self.yhat
    }

    pub fn into_model(self) -> FactorModel {
        FactorModel {
            x: self.x,
            theta: self.theta,
            a: self.a.clone(),
        }
    }
}

fn check_inputs(y: &Matrix, a: &Matrix) -> Result<()> {
    if a.cols() != y.cols() {
        return Err(Error::Dimension {
            op: "fit",
            left: y.shape(),
            right: a.shape(),
        });
    }
    y.check_nonnegative()?;
    a.check_nonnegative()?;
    if y.max() <= 0.0 {
        return Err(Error::DegenerateInput("observation matrix is all zero".into()));
    }
    Ok(())
}

/// Relative objective change used as the stopping rule.
pub fn relative_change(previous: f64, current: f64) -> f64 {
    (current - previous).abs() / previous.max(1e-30)
}

struct Run {
    model: FactorModel,
    trace: Vec<f64>,
    iterations: usize,
    converged: bool,
}

fn run_once(y: &Matrix, a: &Matrix, config: &FitConfig, restart: usize) -> Result<Run> {
    let (x0, theta0) = match (config.init, restart) {
        (Init::KMeans, 0) => init::kmeans_start(y, a, config)?,
        _ => initial_factors(y.rows(), config.rank, a.rows(), config.seed, restart)?,
    };
    let mut opt = Optimizer::new(y, a, config.loss, config.gamma, x0, theta0)?;
    let mut trace = vec![opt.objective()];
    let mut converged = false;
    let mut iterations = 0;
    while iterations < config.max_iter {
        let obj = opt.step()?;
        iterations += 1;
        let prev = *trace.last().unwrap();
        trace.push(obj);
        if relative_change(prev, obj) < config.tol {
            converged = true;
            break;
        }
    }
    Ok(Run {
        model: opt.into_model(),
        trace,
        iterations,
        converged,
    })
}

/// Reorders bases by decreasing row sums of `B`.
pub fn canonical_order(model: &FactorModel) -> Result<FactorModel> {
    let sums = model.coefficients().row_sums();
    let mut order: Vec<usize> = (0..sums.len()).collect();
    order.sort_by(|&i, &j| sums[j].total_cmp(&sums[i]));
    FactorModel::new(
        model.x.select_cols(&order)?,
        model.theta.select_rows(&order)?,
        model.a.clone(),
    )
}

/// Fits `X` and `Theta` to `Y ~ X Theta A`.
///
/// Runs `config.restarts` seeded starts (in parallel) and keeps the lowest
/// final objective, ties going to the lowest restart index. An error in any
/// start is returned as-is.
pub fn fit(y: &Matrix, a: &Matrix, config: &FitConfig) -> Result<FitResult> {
    check_inputs(y, a)?;
    config.validate(y.rows(), y.cols())?;
    let runs: Vec<Result<Run>> = (0..config.restarts)
        .into_par_iter()
        .map(|k| run_once(y, a, config, k))
        .collect();
    let mut best: Option<(usize, Run)> = None;
    for (k, run) in runs.into_iter().enumerate() {
        let run = run?;
        let better = match &best {
            None => true,
            Some((_, b)) => run.trace.last() < b.trace.last(),
        };
        if better {
            best = Some((k, run));
        }
    }
    let (restart_index, run) = best.expect("restarts >= 1");
    let model = canonical_order(&run.model)?;
    let r_squared = r_squared(y, &model.fitted())?;
    Ok(FitResult {
        model,
        objective_trace: run.trace,
        iterations: run.iterations,
        converged: run.converged,
        r_squared,
        restart_index,
    })
}

/// `yhat = X Theta a_new`.
pub fn predict(model: &FactorModel, a_new: &[f64]) -> Result<Vec<f64>> {
    if a_new.len() != model.theta.cols() {
        return Err(Error::Dimension {
            op: "predict",
            left: model.theta.shape(),
            right: (a_new.len(), 1),
        });
    }
    if let Some(k) = a_new.iter().position(|&v| !(v >= 0.0) || !v.is_finite()) {
        return Err(Error::Negative {
            row: k,
            col: 0,
            value: a_new[k],
        });
    }
    model.x.mul_vec(&model.theta.mul_vec(a_new)?)
}

/// Column-wise shares `b_qn / sum_q b_qn` (soft-cluster memberships).
pub fn membership_probabilities(b: &Matrix) -> Result<Matrix> {
    b.check_nonnegative()?;
    let sums = b.col_sums();
    if let Some(column) = sums.iter().position(|&s| !(s > 0.0)) {
        return Err(Error::DegenerateCoefficient { column });
    }
    Matrix::from_fn(b.rows(), b.cols(), |q, n| b.get(q, n) / sums[n])
}

/// `1 - SSE / SST` with SST about the grand mean of all entries.
pub fn r_squared(y: &Matrix, yhat: &Matrix) -> Result<f64> {
    if y.shape() != yhat.shape() {
        return Err(Error::Dimension {
            op: "r_squared",
            left: y.shape(),
            right: yhat.shape(),
        });
    }
    let n = y.as_slice().len() as f64;
    let mean = y.sum() / n;
    let sst: f64 = y.as_slice().iter().map(|v| (v - mean) * (v - mean)).sum();
    if !(sst > 0.0) {
        return Err(Error::UndefinedVariance);
    }
    let sse: f64 = y
        .as_slice()
        .iter()
        .zip(yhat.as_slice())
        .map(|(a, b)| (a - b) * (a - b))
        .sum();
    Ok(1.0 - sse / sst)
}
