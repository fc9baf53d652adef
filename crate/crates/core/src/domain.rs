//! Shared value types: the observation matrix, centroid sets and label vectors.
//!
//! All of these are immutable after construction apart from the explicit
//! builder-style methods, so they can be shared freely across worker threads.

use serde::{Deserialize, Serialize};

use crate::error::{contract, Error, Result};

/// An `n x p` matrix of finite observations stored row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DataMatrix {
    rows: usize,
    cols: usize,
    values: Vec<f64>,
}

impl DataMatrix {
    /// Builds a matrix from row-major values.
    pub fn new(rows: usize, cols: usize, values: Vec<f64>) -> Result<Self> {
        if rows == 0 {
            return Err(Error::EmptyData("data matrix has no rows".into()));
        }
        if cols == 0 {
            return Err(contract("data matrix must have at least one column"));
        }
        if values.len() != rows * cols {
            return Err(contract(format!(
                "expected {} values for a {rows}x{cols} matrix, got {}",
                rows * cols,
                values.len()
            )));
        }
        if let Some(pos) = values.iter().position(|v| !v.is_finite()) {
            return Err(contract(format!(
                "non-finite entry at row {}, column {}",
                pos / cols,
                pos % cols
            )));
        }
        Ok(Self { rows, cols, values })
    }

    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        let first = rows
            .first()
            .ok_or_else(|| Error::EmptyData("data matrix has no rows".into()))?;
        let cols = first.as_ref().len();
        let mut values = Vec::with_capacity(rows.len() * cols);
        for (i, row) in rows.iter().enumerate() {
            let row = row.as_ref();
            if row.len() != cols {
                return Err(contract(format!(
                    "row {i} has {} columns, expected {cols}",
                    row.len()
                )));
            }
            values.extend_from_slice(row);
        }
        Self::new(rows.len(), cols, values)
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.cols..(i + 1) * self.cols]
    }

    pub fn iter_rows(&self) -> impl ExactSizeIterator<Item = &[f64]> + '_ {
        self.values.chunks_exact(self.cols)
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Column-wise mean of all rows.
    pub fn mean(&self) -> Vec<f64> {
        let mut mean = vec![0.0; self.cols];
        for row in self.iter_rows() {
            for (m, v) in mean.iter_mut().zip(row) {
                *m += v;
            }
        }
        let n = self.rows as f64;
        mean.iter_mut().for_each(|m| *m /= n);
        mean
    }

    /// Per-column `(min, max)`.
    pub fn column_bounds(&self) -> Vec<(f64, f64)> {
        let mut bounds = vec![(f64::INFINITY, f64::NEG_INFINITY); self.cols];
        for row in self.iter_rows() {
            for (b, &v) in bounds.iter_mut().zip(row) {
                b.0 = b.0.min(v);
                b.1 = b.1.max(v);
            }
        }
        bounds
    }

    /// Keeps only the rows at `indices`, in the given order.
    pub fn select_rows(&self, indices: &[usize]) -> Result<Self> {
        let mut values = Vec::with_capacity(indices.len() * self.cols);
        for &i in indices {
            if i >= self.rows {
                return Err(contract(format!("row index {i} out of range")));
            }
            values.extend_from_slice(self.row(i));
        }
        Self::new(indices.len(), self.cols, values)
    }

    /// Keeps only the listed columns.
    pub fn select_cols(&self, cols: &[usize]) -> Result<Self> {
        if let Some(&c) = cols.iter().find(|&&c| c >= self.cols) {
            return Err(contract(format!("column index {c} out of range")));
        }
        let values = self
            .iter_rows()
            .flat_map(|row| cols.iter().map(move |&c| row[c]))
            .collect();
        Self::new(self.rows, cols.len(), values)
    }

    /// Appends the rows of `other` below this matrix.
    pub fn vstack(&self, other: &DataMatrix) -> Result<Self> {
        if other.cols != self.cols {
            return Err(Error::DimensionMismatch {
                expected: self.cols,
                actual: other.cols,
            });
        }
        let mut values = self.values.clone();
        values.extend_from_slice(&other.values);
        Self::new(self.rows + other.rows, self.cols, values)
    }
}

/// An ordered, non-empty list of centroids sharing one dimension.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CentroidSet {
    dim: usize,
    centroids: Vec<Vec<f64>>,
}

impl CentroidSet {
    pub fn new(centroids: Vec<Vec<f64>>) -> Result<Self> {
        let dim = centroids
            .first()
            .map(Vec::len)
            .ok_or_else(|| contract("centroid set must contain at least one centroid"))?;
        if dim == 0 {
            return Err(contract("centroids must have at least one coordinate"));
        }
        for c in &centroids {
            if c.len() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    actual: c.len(),
                });
            }
            if c.iter().any(|v| !v.is_finite()) {
                return Err(contract("centroid has a non-finite coordinate"));
            }
        }
        Ok(Self { dim, centroids })
    }

    pub fn single(centroid: Vec<f64>) -> Result<Self> {
        Self::new(vec![centroid])
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.centroids.len()
    }

    /// Always false for a constructed set; provided for API symmetry.
    #[inline]
    pub fn is_empty(&self) -> bool {
        self.centroids.is_empty()
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn get(&self, j: usize) -> &[f64] {
        &self.centroids[j]
    }

    pub fn iter(&self) -> impl ExactSizeIterator<Item = &[f64]> + '_ {
        self.centroids.iter().map(Vec::as_slice)
    }

    pub fn as_slice(&self) -> &[Vec<f64>] {
        &self.centroids
    }

    pub(crate) fn push(&mut self, centroid: &[f64]) {
        debug_assert_eq!(centroid.len(), self.dim);
        self.centroids.push(centroid.to_vec());
    }

    pub(crate) fn get_mut(&mut self, j: usize) -> &mut [f64] {
        &mut self.centroids[j]
    }

    pub fn into_inner(self) -> Vec<Vec<f64>> {
        self.centroids
    }
}

/// Cluster labels, one per observation, as zero-based centroid indices.
///
/// Ground-truth labelings may carry [`Assignment::OUTLIER`] for injected
/// contamination rows; those rows are left out of agreement scores.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Assignment {
    labels: Vec<usize>,
}

impl Assignment {
    /// Sentinel marking an injected outlier row.
    pub const OUTLIER: usize = usize::MAX;

    pub fn new(labels: Vec<usize>) -> Self {
        Self { labels }
    }

    pub fn constant(n: usize, label: usize) -> Self {
        Self {
            labels: vec![label; n],
        }
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    #[inline]
    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    #[inline]
    pub fn is_outlier(&self, i: usize) -> bool {
        self.labels[i] == Self::OUTLIER
    }

    /// Number of distinct non-outlier labels.
    pub fn num_clusters(&self) -> usize {
        let mut seen: Vec<usize> = self
            .labels
            .iter()
            .copied()
            .filter(|&l| l != Self::OUTLIER)
            .collect();
        seen.sort_unstable();
        seen.dedup();
        seen.len()
    }

    /// Member count per label, for labels `0..k`.
    pub fn cluster_sizes(&self, k: usize) -> Vec<usize> {
        let mut sizes = vec![0; k];
        for &l in &self.labels {
            if l < k {
                sizes[l] += 1;
            }
        }
        sizes
    }

    /// Checks every label is either an outlier sentinel or below `k`.
    pub fn validate(&self, k: usize) -> Result<()> {
        match self
            .labels
            .iter()
            .position(|&l| l != Self::OUTLIER && l >= k)
        {
            Some(i) => Err(contract(format!(
                "label {} at row {i} refers to a missing centroid (k={k})",
                self.labels[i]
            ))),
            None => Ok(()),
        }
    }

    /// Indices of rows that are not outlier sentinels.
    pub fn inlier_indices(&self) -> Vec<usize> {
        (0..self.labels.len())
            .filter(|&i| !self.is_outlier(i))
            .collect()
    }

    /// Restricts the labeling to the given rows.
    pub fn select(&self, indices: &[usize]) -> Self {
        Self {
            labels: indices.iter().map(|&i| self.labels[i]).collect(),
        }
    }

    pub(crate) fn set(&mut self, i: usize, label: usize) {
        self.labels[i] = label;
    }

    pub fn into_inner(self) -> Vec<usize> {
        self.labels
    }
}

impl From<Vec<usize>> for Assignment {
    fn from(labels: Vec<usize>) -> Self {
        Self::new(labels)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_non_finite_entries() {
        let err = DataMatrix::new(1, 2, vec![0.0, f64::NAN]).unwrap_err();
        assert!(matches!(err, Error::Contract(_)));
        assert!(DataMatrix::new(1, 1, vec![f64::INFINITY]).is_err());
    }

    #[test]
    fn rejects_empty_and_ragged() {
        assert!(matches!(
            DataMatrix::new(0, 2, vec![]),
            Err(Error::EmptyData(_))
        ));
        assert!(DataMatrix::from_rows(&[vec![1.0, 2.0], vec![1.0]]).is_err());
        assert!(CentroidSet::new(vec![]).is_err());
        assert!(CentroidSet::new(vec![vec![0.0], vec![0.0, 1.0]]).is_err());
    }

    #[test]
    fn mean_and_bounds() {
        let m = DataMatrix::from_rows(&[[0.0, 2.0], [2.0, -2.0]]).unwrap();
        assert_eq!(m.mean(), vec![1.0, 0.0]);
        assert_eq!(m.column_bounds(), vec![(0.0, 2.0), (-2.0, 2.0)]);
    }

    #[test]
    fn assignment_helpers() {
        let a = Assignment::new(vec![0, 1, Assignment::OUTLIER, 1]);
        assert_eq!(a.num_clusters(), 2);
        assert_eq!(a.cluster_sizes(2), vec![1, 2]);
        assert_eq!(a.inlier_indices(), vec![0, 1, 3]);
        assert!(a.validate(2).is_ok());
        assert!(a.validate(1).is_err());
    }
}
