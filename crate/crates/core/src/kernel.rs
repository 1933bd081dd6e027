//! Gaussian-kernel covariates.
//!
//! Each individual carries a feature vector `u_n`. The covariate matrix has
//! one row per anchor point and one column per evaluated point, with entry
//! `exp(-beta * |anchor - point|^2)`. Using the training points as both
//! anchors and points gives a symmetric `N x N` design with unit diagonal.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::Matrix;

/// Feature vectors stored column-wise: `dim x n`, one column per individual.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    values: Matrix,
}

impl FeatureMatrix {
    pub fn new(values: Matrix) -> Self {
        Self { values }
    }

    pub fn from_points(points: &[Vec<f64>]) -> Result<Self> {
        Ok(Self::new(Matrix::from_cols(points)?))
    }

    pub fn dim(&self) -> usize {
        self.values.rows()
    }

    pub fn len(&self) -> usize {
        self.values.cols()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn point(&self, n: usize) -> Vec<f64> {
        self.values.col(n)
    }

    pub fn values(&self) -> &Matrix {
        &self.values
    }

    pub fn select(&self, idx: &[usize]) -> Result<Self> {
        Ok(Self::new(self.values.select_cols(idx)?))
    }
}

/// Per-feature `(min, max)` recorded by [`scale_features`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureRanges {
    pub min: Vec<f64>,
    pub max: Vec<f64>,
}

impl FeatureRanges {
    /// Maps points with the stored affine transform. Points outside the
    /// recorded range land outside `[0, 1]`.
    pub fn apply(&self, u: &FeatureMatrix) -> Result<FeatureMatrix> {
        if u.dim() != self.min.len() {
            return Err(Error::Dimension {
                op: "apply_ranges",
                left: (self.min.len(), 1),
                right: (u.dim(), u.len()),
            });
        }
        let v = u.values();
        let scaled = Matrix::from_fn(v.rows(), v.cols(), |d, n| {
            (v.get(d, n) - self.min[d]) / (self.max[d] - self.min[d])
        })?;
        Ok(FeatureMatrix::new(scaled))
    }
}

/// Affinely maps every feature onto `[0, 1]`.
pub fn scale_features(u: &FeatureMatrix) -> Result<(FeatureMatrix, FeatureRanges)> {
    let v = u.values();
    let mut ranges = FeatureRanges {
        min: Vec::with_capacity(u.dim()),
        max: Vec::with_capacity(u.dim()),
    };
    for (d, row) in (0..v.rows()).map(|d| (d, v.row(d))) {
        let lo = row.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if !(hi > lo) {
            return Err(Error::DegenerateFeature { feature: d, value: lo });
        }
        ranges.min.push(lo);
        ranges.max.push(hi);
    }
    let scaled = ranges.apply(u)?;
    Ok((scaled, ranges))
}

fn squared_distance(u: &[f64], v: &[f64]) -> f64 {
    u.iter().zip(v).map(|(a, b)| (a - b) * (a - b)).sum()
}

fn check_beta(beta: f64) -> Result<()> {
    if beta > 0.0 && beta.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidConfig(format!("kernel bandwidth must be positive, got {beta}")))
    }
}

/// `exp(-beta * |u - v|^2)`.
pub fn gaussian_kernel(u: &[f64], v: &[f64], beta: f64) -> Result<f64> {
    check_beta(beta)?;
    if u.len() != v.len() {
        return Err(Error::Dimension {
            op: "gaussian_kernel",
            left: (u.len(), 1),
            right: (v.len(), 1),
        });
    }
    Ok((-beta * squared_distance(u, v)).exp())
}

/// Kernel covariates: entry `(r, m)` is `K(anchor_r, point_m)`.
///
/// Columns are computed independently, so the parallel evaluation is
/// bit-identical to a sequential one.
pub fn kernel_matrix(anchors: &FeatureMatrix, points: &FeatureMatrix, beta: f64) -> Result<Matrix> {
    check_beta(beta)?;
    if anchors.dim() != points.dim() {
        return Err(Error::Dimension {
            op: "kernel_matrix",
            left: anchors.values().shape(),
            right: points.values().shape(),
        });
    }
    let anchor_pts: Vec<Vec<f64>> = (0..anchors.len()).map(|r| anchors.point(r)).collect();
    let cols: Vec<Vec<f64>> = (0..points.len())
        .into_par_iter()
        .map(|m| {
            let p = points.point(m);
            anchor_pts
                .iter()
                .map(|a| (-beta * squared_distance(a, &p)).exp())
                .collect()
        })
        .collect();
    Matrix::from_cols(&cols)
}

/// Bandwidth plus anchor points defining the rows of a kernel design.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelConfig {
    pub beta: f64,
    pub anchors: FeatureMatrix,
}

impl KernelConfig {
    pub fn new(beta: f64, anchors: FeatureMatrix) -> Result<Self> {
        check_beta(beta)?;
        Ok(Self { beta, anchors })
    }

    pub fn covariates(&self, points: &FeatureMatrix) -> Result<Matrix> {
        kernel_matrix(&self.anchors, points, self.beta)
    }
}

/// Stacks several kernel blocks (each with its own bandwidth and anchors)
/// into one covariate matrix, e.g. a kernel on age above a kernel on
/// age-times-indicator.
pub fn stacked_covariates(blocks: &[(KernelConfig, FeatureMatrix)]) -> Result<Matrix> {
    let mats = blocks
        .iter()
        .map(|(cfg, pts)| cfg.covariates(pts))
        .collect::<Result<Vec<_>>>()?;
    Matrix::vstack(&mats)
}
