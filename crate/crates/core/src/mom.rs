//! Median-of-means estimation.
//!
//! A [`BucketPartition`] splits the row indices into `L` near-equal blocks.
//! The penalised objective takes the per-block mean loss, picks the
//! lower-middle block (so that a concrete block is always named), and adds
//! `lambda * k`.

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::domain::{CentroidSet, DataMatrix};
use crate::error::{contract, Error, Result};
use crate::objective::{check_dims, nearest};
use crate::rng::SeededRng;

/// `L` disjoint index blocks covering `0..n`, sizes differing by at most one.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BucketPartition {
    n: usize,
    blocks: Vec<Vec<usize>>,
}

impl BucketPartition {
    /// Validates and wraps explicit blocks.
    pub fn from_blocks(n: usize, blocks: Vec<Vec<usize>>) -> Result<Self> {
        if blocks.is_empty() {
            return Err(contract("a partition needs at least one block"));
        }
        let mut seen = vec![false; n];
        let mut covered = 0;
        for block in &blocks {
            if block.is_empty() {
                return Err(contract("partition contains an empty block"));
            }
            for &i in block {
                if i >= n {
                    return Err(contract(format!("index {i} out of range for n={n}")));
                }
                if std::mem::replace(&mut seen[i], true) {
                    return Err(contract(format!("index {i} appears in two blocks")));
                }
                covered += 1;
            }
        }
        if covered != n {
            return Err(contract(format!(
                "blocks cover {covered} of {n} indices"
            )));
        }
        let min = blocks.iter().map(Vec::len).min().unwrap_or(0);
        let max = blocks.iter().map(Vec::len).max().unwrap_or(0);
        if max - min > 1 {
            return Err(contract(format!(
                "block sizes range from {min} to {max}; must differ by at most one"
            )));
        }
        Ok(Self { n, blocks })
    }

    /// Cuts an ordering of `0..n` into `num_blocks` consecutive runs, the
    /// first `n mod L` of which receive one extra element.
    pub fn from_order(order: Vec<usize>, num_blocks: usize) -> Result<Self> {
        let n = order.len();
        let sizes = block_sizes(n, num_blocks)?;
        let mut blocks = Vec::with_capacity(num_blocks);
        let mut rest = order.as_slice();
        for size in sizes {
            let (head, tail) = rest.split_at(size);
            blocks.push(head.to_vec());
            rest = tail;
        }
        Self::from_blocks(n, blocks)
    }

    /// Every row in a single block.
    pub fn whole(n: usize) -> Result<Self> {
        Self::from_order((0..n).collect(), 1)
    }

    pub fn num_blocks(&self) -> usize {
        self.blocks.len()
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Nominal block size `floor(n / L)`.
    pub fn nominal_size(&self) -> usize {
        self.n / self.blocks.len()
    }

    pub fn block(&self, l: usize) -> &[usize] {
        &self.blocks[l]
    }

    pub fn blocks(&self) -> &[Vec<usize>] {
        &self.blocks
    }
}

/// Near-equal block sizes for `n` items in `num_blocks` blocks.
pub fn block_sizes(n: usize, num_blocks: usize) -> Result<Vec<usize>> {
    if num_blocks == 0 {
        return Err(contract("number of blocks must be positive"));
    }
    if num_blocks > n {
        return Err(contract(format!(
            "cannot split {n} items into {num_blocks} non-empty blocks"
        )));
    }
    let base = n / num_blocks;
    let extra = n % num_blocks;
    Ok((0..num_blocks)
        .map(|l| base + usize::from(l < extra))
        .collect())
}

/// Median-of-means of a scalar sample over a fresh random partition.
pub fn mom_estimate(values: &[f64], num_blocks: usize, rng: &mut SeededRng) -> Result<f64> {
    if values.is_empty() {
        return Err(Error::EmptyData("mom_estimate needs at least one value".into()));
    }
    let mut order: Vec<usize> = (0..values.len()).collect();
    block_sizes(values.len(), num_blocks)?;
    order.shuffle(rng);
    let part = BucketPartition::from_order(order, num_blocks)?;
    mom_estimate_with(values, &part)
}

/// Median-of-means of a scalar sample over a given partition.
pub fn mom_estimate_with(values: &[f64], part: &BucketPartition) -> Result<f64> {
    if part.n() != values.len() {
        return Err(contract(format!(
            "partition covers {} values, sample has {}",
            part.n(),
            values.len()
        )));
    }
    let means: Vec<f64> = part
        .blocks()
        .iter()
        .map(|b| b.iter().map(|&i| values[i]).sum::<f64>() / b.len() as f64)
        .collect();
    let l = select_median_bucket(&means)?;
    Ok(means[l])
}

/// Mean point loss within each block.
pub fn bucket_objective_means(
    data: &DataMatrix,
    part: &BucketPartition,
    centroids: &CentroidSet,
) -> Result<Vec<f64>> {
    check_dims(data, centroids)?;
    if part.n() != data.rows() {
        return Err(contract(format!(
            "partition covers {} rows, data has {}",
            part.n(),
            data.rows()
        )));
    }
    Ok(block_means_unchecked(data, part, centroids))
}

pub(crate) fn block_means_unchecked(
    data: &DataMatrix,
    part: &BucketPartition,
    centroids: &CentroidSet,
) -> Vec<f64> {
    part.blocks()
        .iter()
        .map(|b| {
            let total: f64 = b.iter().map(|&i| nearest(data.row(i), centroids).loss).sum();
            total / b.len() as f64
        })
        .collect()
}

/// Index of the lower-middle order statistic of `means`.
///
/// For odd `L` this is the median. When several blocks share the selected
/// value the lowest index is returned.
pub fn select_median_bucket(means: &[f64]) -> Result<usize> {
    if means.is_empty() {
        return Err(contract("cannot take the median of no buckets"));
    }
    let mut order: Vec<usize> = (0..means.len()).collect();
    order.sort_by(|&a, &b| means[a].total_cmp(&means[b]).then(a.cmp(&b)));
    let value = means[order[(means.len() - 1) / 2]];
    Ok(means
        .iter()
        .position(|&m| m.total_cmp(&value).is_eq())
        .expect("selected value is present"))
}

/// `median_l(bucket mean) + lambda * k`.
pub fn mom_objective(
    data: &DataMatrix,
    part: &BucketPartition,
    centroids: &CentroidSet,
    lambda: f64,
) -> Result<f64> {
    if !(lambda >= 0.0) || !lambda.is_finite() {
        return Err(contract(format!("lambda must be finite and >= 0, got {lambda}")));
    }
    let means = bucket_objective_means(data, part, centroids)?;
    let l = select_median_bucket(&means)?;
    Ok(means[l] + lambda * centroids.len() as f64)
}
