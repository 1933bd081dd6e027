//! K-fold cross-validation of kernel bandwidth, rank and penalty.
//!
//! Folds split individuals (columns). For every configuration and fold the
//! model is refit on the training columns with the training points as
//! kernel anchors, then scored on the held-out columns by squared
//! prediction error.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernel::{kernel_matrix, scale_features, FeatureMatrix};
use crate::matrix::Matrix;
use crate::nmf::{fit, FitConfig};

/// Seeded fold labels for `n` individuals. Fold sizes differ by at most one.
pub fn make_folds(n: usize, folds: usize, seed: u64) -> Result<Vec<usize>> {
    if folds < 2 {
        return Err(Error::InvalidConfig(format!("folds must be >= 2, got {folds}")));
    }
    if folds > n {
        return Err(Error::InvalidConfig(format!("folds ({folds}) exceeds individuals ({n})")));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut labels = vec![0; n];
    for (pos, &individual) in order.iter().enumerate() {
        labels[individual] = pos % folds;
    }
    Ok(labels)
}

#[derive(Debug, Clone, PartialEq)]
pub struct CvPlan {
    pub folds: usize,
    pub fold_assignment: Vec<usize>,
    pub beta_grid: Vec<f64>,
    pub q_grid: Vec<usize>,
    pub gamma_grid: Vec<f64>,
    pub seed: u64,
    /// Rescale features to `[0, 1]` using each training fold's ranges.
    pub scale_features: bool,
}

impl CvPlan {
    pub fn new(
        n: usize,
        folds: usize,
        seed: u64,
        beta_grid: Vec<f64>,
        q_grid: Vec<usize>,
        gamma_grid: Vec<f64>,
    ) -> Result<Self> {
        let plan = Self {
            folds,
            fold_assignment: make_folds(n, folds, seed)?,
            beta_grid,
            q_grid,
            gamma_grid,
            seed,
            scale_features: false,
        };
        plan.validate(n)?;
        Ok(plan)
    }

    pub fn validate(&self, n: usize) -> Result<()> {
        if self.fold_assignment.len() != n {
            return Err(Error::InvalidConfig(format!(
                "fold assignment covers {} individuals, data has {n}",
                self.fold_assignment.len()
            )));
        }
        let mut sizes = vec![0usize; self.folds];
        for &f in &self.fold_assignment {
            if f >= self.folds {
                return Err(Error::InvalidConfig(format!("fold label {f} out of range")));
            }
            sizes[f] += 1;
        }
        if let Some(f) = sizes.iter().position(|&s| s == 0) {
            return Err(Error::InvalidConfig(format!("fold {f} is empty")));
        }
        if self.beta_grid.is_empty() || self.q_grid.is_empty() || self.gamma_grid.is_empty() {
            return Err(Error::InvalidConfig("grids must be non-empty".into()));
        }
        if let Some(b) = self.beta_grid.iter().find(|b| !(**b > 0.0 && b.is_finite())) {
            return Err(Error::InvalidConfig(format!("beta must be positive, got {b}")));
        }
        if self.q_grid.contains(&0) {
            return Err(Error::InvalidConfig("rank must be >= 1".into()));
        }
        if let Some(g) = self.gamma_grid.iter().find(|g| !(**g >= 0.0 && g.is_finite())) {
            return Err(Error::InvalidConfig(format!("gamma must be >= 0, got {g}")));
        }
        Ok(())
    }

    /// Grid in evaluation order: beta outermost, then rank, then gamma.
    pub fn configs(&self) -> Vec<CvConfig> {
        let mut out = Vec::new();
        for &beta in &self.beta_grid {
            for &rank in &self.q_grid {
                for &gamma in &self.gamma_grid {
                    out.push(CvConfig { beta, rank, gamma });
                }
            }
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CvConfig {
    pub beta: f64,
    pub rank: usize,
    pub gamma: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvRow {
    pub config: CvConfig,
    pub mean_error: f64,
    pub fold_errors: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvResult {
    pub rows: Vec<CvRow>,
    /// Index into `rows` of the selected configuration.
    pub best: usize,
}

impl CvResult {
    pub fn best_row(&self) -> &CvRow {
        &self.rows[self.best]
    }
}

struct Split {
    train: Vec<usize>,
    test: Vec<usize>,
}

fn splits(plan: &CvPlan) -> Vec<Split> {
    (0..plan.folds)
        .map(|f| {
            let (test, train): (Vec<usize>, Vec<usize>) =
                (0..plan.fold_assignment.len()).partition(|&n| plan.fold_assignment[n] == f);
            Split { train, test }
        })
        .collect()
}

/// Held-out squared error of one configuration on one fold.
fn score_cell(y: &Matrix, u: &FeatureMatrix, split: &Split, config: &CvConfig, base: &FitConfig, scale: bool) -> Result<f64> {
    let mut u_train = u.select(&split.train)?;
    let mut u_test = u.select(&split.test)?;
    if scale {
        let (scaled, ranges) = scale_features(&u_train)?;
        u_test = ranges.apply(&u_test)?;
        u_train = scaled;
    }
    let y_train = y.select_cols(&split.train)?;
    let y_test = y.select_cols(&split.test)?;
    let a_train = kernel_matrix(&u_train, &u_train, config.beta)?;
    let cfg = FitConfig {
        rank: config.rank,
        gamma: config.gamma,
        ..base.clone()
    };
    let model = fit(&y_train, &a_train, &cfg)?.model;
    let a_test = kernel_matrix(&u_train, &u_test, config.beta)?;
    let pred = model.x.matmul(&model.theta)?.matmul(&a_test)?;
    Ok(y_test.sub(&pred)?.frobenius_sq())
}

/// Minimum mean error; ties go to the smallest beta, then rank, then gamma.
fn select_best(rows: &[CvRow]) -> usize {
    let key = |r: &CvRow| (r.config.beta, r.config.rank, r.config.gamma);
    (0..rows.len())
        .min_by(|&i, &j| {
            rows[i]
                .mean_error
                .total_cmp(&rows[j].mean_error)
                .then_with(|| key(&rows[i]).partial_cmp(&key(&rows[j])).expect("grid values are finite"))
        })
        .expect("grid is non-empty")
}

/// Scores every grid configuration on every fold.
///
/// Cells run in parallel; results are assembled and averaged in fixed index
/// order, so the output does not depend on scheduling. The first failing
/// cell (in that order) is returned, annotated with its configuration and
/// fold.
pub fn cross_validate(y: &Matrix, u: &FeatureMatrix, plan: &CvPlan, fit_cfg: &FitConfig) -> Result<CvResult> {
    if u.len() != y.cols() {
        return Err(Error::Dimension {
            op: "cross_validate",
            left: y.shape(),
            right: u.values().shape(),
        });
    }
    plan.validate(y.cols())?;
    let configs = plan.configs();
    let folds = splits(plan);
    let cells: Vec<(usize, usize)> = (0..configs.len())
        .flat_map(|c| (0..folds.len()).map(move |f| (c, f)))
        .collect();
    let scores: Vec<Result<f64>> = cells
        .par_iter()
        .map(|&(c, f)| {
            score_cell(y, u, &folds[f], &configs[c], fit_cfg, plan.scale_features).map_err(|e| Error::CvCell {
                beta: configs[c].beta,
                rank: configs[c].rank,
                gamma: configs[c].gamma,
                fold: f,
                source: Box::new(e),
            })
        })
        .collect();
    let mut scores = scores.into_iter();
    let mut rows = Vec::with_capacity(configs.len());
    for config in configs {
        let fold_errors = scores.by_ref().take(folds.len()).collect::<Result<Vec<f64>>>()?;
        let mean_error = fold_errors.iter().sum::<f64>() / fold_errors.len() as f64;
        rows.push(CvRow {
            config,
            mean_error,
            fold_errors,
        });
    }
    let best = select_best(&rows);
    Ok(CvResult { rows, best })
}
