//! The squared-Euclidean Bregman kernel and the min-over-centroids loss.
//!
//! `sq_euclidean` is the single divergence seam: every loss, gradient and
//! spawn test in the crate goes through it.

use crate::domain::{CentroidSet, DataMatrix};
use crate::error::{Error, Result};

/// `||x - y||^2`.
pub fn sq_euclidean(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::DimensionMismatch {
            expected: x.len(),
            actual: y.len(),
        });
    }
    Ok(sq_dist(x, y))
}

/// Unchecked kernel used on hot paths after dimensions were validated.
#[inline]
pub(crate) fn sq_dist(x: &[f64], y: &[f64]) -> f64 {
    debug_assert_eq!(x.len(), y.len());
    x.iter()
        .zip(y)
        .map(|(a, b)| {
            let d = a - b;
            d * d
        })
        .sum()
}

/// Loss of one point together with the centroid that attains it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PointLoss {
    pub loss: f64,
    /// Zero-based index of the nearest centroid; ties go to the lowest index.
    pub nearest: usize,
}

/// Minimum divergence from `x` to any centroid.
pub fn point_loss(x: &[f64], centroids: &CentroidSet) -> Result<PointLoss> {
    if centroids.is_empty() {
        return Err(crate::error::contract("point_loss needs at least one centroid"));
    }
    if x.len() != centroids.dim() {
        return Err(Error::DimensionMismatch {
            expected: centroids.dim(),
            actual: x.len(),
        });
    }
    Ok(nearest(x, centroids))
}

#[inline]
pub(crate) fn nearest(x: &[f64], centroids: &CentroidSet) -> PointLoss {
    let mut best = PointLoss {
        loss: f64::INFINITY,
        nearest: 0,
    };
    for (j, c) in centroids.iter().enumerate() {
        let d = sq_dist(x, c);
        if d < best.loss {
            best = PointLoss { loss: d, nearest: j };
        }
    }
    best
}

pub(crate) fn check_dims(data: &DataMatrix, centroids: &CentroidSet) -> Result<()> {
    if data.cols() != centroids.dim() {
        return Err(Error::DimensionMismatch {
            expected: data.cols(),
            actual: centroids.dim(),
        });
    }
    Ok(())
}

/// Mean point loss over all rows of `data`.
pub fn empirical_objective(data: &DataMatrix, centroids: &CentroidSet) -> Result<f64> {
    check_dims(data, centroids)?;
    let total: f64 = data.iter_rows().map(|x| nearest(x, centroids).loss).sum();
    Ok(total / data.rows() as f64)
}

/// Sum of point losses, the classic k-means objective.
pub fn within_cluster_ss(data: &DataMatrix, centroids: &CentroidSet) -> Result<f64> {
    Ok(empirical_objective(data, centroids)? * data.rows() as f64)
}

/// Smallest non-zero and largest squared distance over all pairs of rows.
///
/// Pairs of identical rows are skipped for the minimum. Returns
/// `DegenerateData` when fewer than two rows exist or all rows coincide.
pub fn pairwise_sq_extremes(data: &DataMatrix) -> Result<(f64, f64)> {
    let n = data.rows();
    if n < 2 {
        return Err(Error::DegenerateData(
            "need at least two observations for pairwise distances".into(),
        ));
    }
    let mut lo = f64::INFINITY;
    let mut hi = 0.0f64;
    for i in 0..n {
        let xi = data.row(i);
        for j in (i + 1)..n {
            let d = sq_dist(xi, data.row(j));
            if d > 0.0 && d < lo {
                lo = d;
            }
            if d > hi {
                hi = d;
            }
        }
    }
    if hi == 0.0 {
        return Err(Error::DegenerateData("all observations are identical".into()));
    }
    Ok((lo, hi))
}
