//! Bucket construction for the median-of-means objective.

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::domain::DataMatrix;
use crate::error::{contract, Result};
use crate::mom::{block_sizes, BucketPartition};
use crate::objective::sq_dist;
use crate::rng::SeededRng;

/// How the bucket partition is drawn.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BucketScheme {
    /// A uniform permutation cut into consecutive blocks.
    Random,
    /// Each bucket is filled by D^2 sampling among the points left over from
    /// earlier buckets, so every bucket spreads across the clusters.
    #[default]
    KmeansPlusPlus,
}

impl BucketScheme {
    pub fn build(self, data: &DataMatrix, num_blocks: usize, rng: &mut SeededRng) -> Result<BucketPartition> {
        match self {
            BucketScheme::Random => random_buckets(data.rows(), num_blocks, rng),
            BucketScheme::KmeansPlusPlus => kmeanspp_buckets(data, num_blocks, rng),
        }
    }
}

fn check_range(n: usize, num_blocks: usize) -> Result<()> {
    if num_blocks <= 2 || num_blocks > n {
        return Err(contract(format!(
            "bucket count must satisfy 2 < L <= n (L={num_blocks}, n={n})"
        )));
    }
    Ok(())
}

/// Uniform random permutation of `0..n` cut into `num_blocks` near-equal blocks.
pub fn random_buckets(n: usize, num_blocks: usize, rng: &mut SeededRng) -> Result<BucketPartition> {
    check_range(n, num_blocks)?;
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(rng);
    BucketPartition::from_order(order, num_blocks)
}

/// Draws an index with probability proportional to `weights`; falls back to
/// a uniform draw when the weights sum to zero.
pub(crate) fn sample_weighted(weights: &[f64], rng: &mut SeededRng) -> usize {
    debug_assert!(!weights.is_empty());
    let total: f64 = weights.iter().sum();
    if !(total > 0.0) || !total.is_finite() {
        return rng.random_range(0..weights.len());
    }
    let target = rng.random::<f64>() * total;
    let mut acc = 0.0;
    for (i, &w) in weights.iter().enumerate() {
        acc += w;
        if target < acc {
            return i;
        }
    }
    // Rounding can leave `target` just past the final partial sum.
    weights.iter().rposition(|&w| w > 0.0).unwrap_or(weights.len() - 1)
}

/// Fills buckets one after another. Within a bucket the first member is
/// uniform over the remaining pool and each later member is drawn with
/// probability proportional to its squared distance from the nearest member
/// already placed in that bucket.
pub fn kmeanspp_buckets(data: &DataMatrix, num_blocks: usize, rng: &mut SeededRng) -> Result<BucketPartition> {
    let n = data.rows();
    check_range(n, num_blocks)?;
    let sizes = block_sizes(n, num_blocks)?;
    let mut pool: Vec<usize> = (0..n).collect();
    let mut dist = vec![0.0f64; n];
    let mut blocks = Vec::with_capacity(num_blocks);

    for size in sizes {
        let mut block = Vec::with_capacity(size);
        let first = rng.random_range(0..pool.len());
        let mut pick = pool.swap_remove(first);
        block.push(pick);
        dist.truncate(pool.len());
        for (d, &i) in dist.iter_mut().zip(&pool) {
            *d = sq_dist(data.row(i), data.row(pick));
        }
        while block.len() < size {
            let at = sample_weighted(&dist, rng);
            pick = pool.swap_remove(at);
            dist.swap_remove(at);
            block.push(pick);
            let centre = data.row(pick);
            for (d, &i) in dist.iter_mut().zip(&pool) {
                let cand = sq_dist(data.row(i), centre);
                if cand < *d {
                    *d = cand;
                }
            }
        }
        blocks.push(block);
    }
    BucketPartition::from_blocks(n, blocks)
}
