//! DP-MoM: Dirichlet-process style cluster spawning with centroids fitted by
//! AdaGrad on the median-of-means objective.
//!
//! Each iteration
//! 1. sweeps the rows in order, spawning a new centroid at any row whose
//!    loss exceeds `lambda` and otherwise labelling it with its nearest
//!    centroid,
//! 2. finds the bucket whose mean loss is the (lower-middle) median,
//! 3. takes the gradient of that bucket's mean loss at the current labels,
//! 4. applies one AdaGrad step per centroid.
//!
//! The loop stops after `t_max` iterations or once the penalised objective
//! changes by a relative amount of at most `delta` across one step.

use serde::{Deserialize, Serialize};

use crate::domain::{Assignment, CentroidSet, DataMatrix};
use crate::error::{contract, Error, Result};
use crate::mom::{block_means_unchecked, select_median_bucket, BucketPartition};
use crate::objective::{check_dims, nearest, pairwise_sq_extremes};
use crate::partition::BucketScheme;
use crate::result::{AlgorithmConfig, ClusteringResult};
use crate::rng::SeededRng;

pub const DEFAULT_EPSILON: f64 = 1.0;
pub const DEFAULT_DELTA: f64 = 1e-4;
pub const DEFAULT_T_MAX: usize = 200;
/// Clusters smaller than this are folded into their neighbours when counting.
pub const DEFAULT_MIN_CLUSTER_SIZE: usize = 3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DpMomConfig {
    /// Per-cluster penalty.
    pub lambda: f64,
    /// AdaGrad learning rate.
    pub eta: f64,
    /// AdaGrad stabiliser added under the square root.
    pub epsilon: f64,
    /// Relative-change tolerance for the stopping rule.
    pub delta: f64,
    pub t_max: usize,
    pub num_buckets: usize,
    /// Upper bound on spawned clusters; `None` means `n`.
    pub max_clusters: Option<usize>,
    pub seed: u64,
    pub buckets: BucketScheme,
}

impl DpMomConfig {
    pub fn new(lambda: f64, eta: f64, num_buckets: usize, seed: u64) -> Self {
        Self {
            lambda,
            eta,
            epsilon: DEFAULT_EPSILON,
            delta: DEFAULT_DELTA,
            t_max: DEFAULT_T_MAX,
            num_buckets,
            max_clusters: None,
            seed,
            buckets: BucketScheme::default(),
        }
    }

    pub fn validate(&self, n: usize) -> Result<()> {
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return Err(contract(format!("lambda must be finite and >= 0, got {}", self.lambda)));
        }
        if !(self.eta > 0.0 && self.eta.is_finite()) {
            return Err(contract(format!("eta must be positive, got {}", self.eta)));
        }
        if !(self.epsilon > 0.0 && self.epsilon.is_finite()) {
            return Err(contract(format!("epsilon must be positive, got {}", self.epsilon)));
        }
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return Err(contract(format!("delta must lie in (0, 1), got {}", self.delta)));
        }
        if self.t_max == 0 {
            return Err(contract("t_max must be at least 1"));
        }
        if self.num_buckets <= 2 || self.num_buckets > n {
            return Err(contract(format!(
                "bucket count must satisfy 2 < L <= n (L={}, n={n})",
                self.num_buckets
            )));
        }
        if let Some(k) = self.max_clusters {
            if k == 0 || k > n {
                return Err(contract(format!("max_clusters must lie in 1..={n}, got {k}")));
            }
        }
        Ok(())
    }
}

/// AdaGrad accumulators, one per centroid.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct OptimizerState {
    /// Running sum of squared gradient norms.
    pub grad_sq_accum: Vec<f64>,
    pub iteration: usize,
}

impl OptimizerState {
    pub fn new(k: usize) -> Self {
        Self {
            grad_sq_accum: vec![0.0; k],
            iteration: 0,
        }
    }

    /// Gives any newly spawned centroids a fresh zero accumulator.
    pub fn grow_to(&mut self, k: usize) {
        if self.grad_sq_accum.len() < k {
            self.grad_sq_accum.resize(k, 0.0);
        }
    }
}

/// Row-order sweep that labels every observation, spawning a centroid at any
/// row whose loss against the current (growing) set exceeds `lambda`.
pub fn assign_and_spawn(
    data: &DataMatrix,
    centroids: &CentroidSet,
    lambda: f64,
    max_clusters: usize,
) -> Result<(Assignment, CentroidSet)> {
    check_dims(data, centroids)?;
    if !(lambda >= 0.0) {
        return Err(contract(format!("lambda must be >= 0, got {lambda}")));
    }
    let mut centroids = centroids.clone();
    let mut labels = Assignment::constant(data.rows(), 0);
    spawn_sweep(data, &mut centroids, &mut labels, lambda, max_clusters)?;
    Ok((labels, centroids))
}

pub(crate) fn spawn_sweep(
    data: &DataMatrix,
    centroids: &mut CentroidSet,
    labels: &mut Assignment,
    lambda: f64,
    max_clusters: usize,
) -> Result<usize> {
    let mut spawned = 0;
    for (i, x) in data.iter_rows().enumerate() {
        let best = nearest(x, centroids);
        if best.loss > lambda {
            if centroids.len() >= max_clusters {
                return Err(Error::SpawnOverflow { max_clusters, lambda });
            }
            centroids.push(x);
            labels.set(i, centroids.len() - 1);
            spawned += 1;
        } else {
            labels.set(i, best.nearest);
        }
    }
    Ok(spawned)
}

/// Labels every row with its nearest centroid, without spawning.
pub fn assign_nearest(data: &DataMatrix, centroids: &CentroidSet) -> Result<Assignment> {
    check_dims(data, centroids)?;
    Ok(Assignment::new(
        data.iter_rows().map(|x| nearest(x, centroids).nearest).collect(),
    ))
}

/// Gradient of one block's mean loss with the labels held fixed:
/// `g_j = (1/|B|) * sum_{i in B, label_i = j} 2 (theta_j - x_i)`.
pub fn gradient(
    data: &DataMatrix,
    block: &[usize],
    centroids: &CentroidSet,
    assignment: &Assignment,
) -> Result<Vec<Vec<f64>>> {
    check_dims(data, centroids)?;
    if block.is_empty() {
        return Err(contract("gradient needs a non-empty block"));
    }
    if assignment.len() != data.rows() {
        return Err(contract(format!(
            "assignment has {} labels for {} rows",
            assignment.len(),
            data.rows()
        )));
    }
    assignment.validate(centroids.len())?;
    if let Some(&i) = block.iter().find(|&&i| i >= data.rows()) {
        return Err(contract(format!("block index {i} out of range")));
    }
    Ok(gradient_unchecked(data, block, centroids, assignment))
}

fn gradient_unchecked(
    data: &DataMatrix,
    block: &[usize],
    centroids: &CentroidSet,
    assignment: &Assignment,
) -> Vec<Vec<f64>> {
    let p = centroids.dim();
    let mut grads = vec![vec![0.0; p]; centroids.len()];
    let scale = 2.0 / block.len() as f64;
    for &i in block {
        let j = assignment.labels()[i];
        let theta = centroids.get(j);
        for ((g, t), x) in grads[j].iter_mut().zip(theta).zip(data.row(i)) {
            *g += scale * (t - x);
        }
    }
    grads
}

/// One AdaGrad update. The accumulator includes this step's gradient before
/// the step size is computed.
pub fn adagrad_step(
    centroids: &CentroidSet,
    state: &OptimizerState,
    grads: &[Vec<f64>],
    eta: f64,
    epsilon: f64,
) -> Result<(CentroidSet, OptimizerState)> {
    if grads.len() != centroids.len() || state.grad_sq_accum.len() != centroids.len() {
        return Err(contract(format!(
            "{} centroids, {} gradients, {} accumulators",
            centroids.len(),
            grads.len(),
            state.grad_sq_accum.len()
        )));
    }
    let mut centroids = centroids.clone();
    let mut state = state.clone();
    adagrad_in_place(&mut centroids, &mut state, grads, eta, epsilon)?;
    Ok((centroids, state))
}

fn adagrad_in_place(
    centroids: &mut CentroidSet,
    state: &mut OptimizerState,
    grads: &[Vec<f64>],
    eta: f64,
    epsilon: f64,
) -> Result<()> {
    for (j, g) in grads.iter().enumerate() {
        if g.len() != centroids.dim() {
            return Err(Error::DimensionMismatch {
                expected: centroids.dim(),
                actual: g.len(),
            });
        }
        let norm_sq: f64 = g.iter().map(|v| v * v).sum();
        if !norm_sq.is_finite() {
            return Err(Error::NumericFault(format!("non-finite gradient for centroid {j}")));
        }
        if norm_sq == 0.0 {
            continue;
        }
        state.grad_sq_accum[j] += norm_sq;
        let rate = eta / (epsilon + state.grad_sq_accum[j]).sqrt();
        for (t, gv) in centroids.get_mut(j).iter_mut().zip(g) {
            *t -= rate * gv;
        }
    }
    state.iteration += 1;
    Ok(())
}

/// Outcome of one [`Solver::iterate`] call.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Iteration {
    /// Objective before the centroid update (after spawning).
    pub objective_before: f64,
    /// Objective after the centroid update.
    pub objective_after: f64,
    pub median_bucket: usize,
    pub spawned: usize,
    pub converged: bool,
}

/// Stepwise DP-MoM optimiser; [`fit`] drives it to completion.
#[derive(Debug, Clone)]
pub struct Solver<'a> {
    data: &'a DataMatrix,
    config: DpMomConfig,
    partition: BucketPartition,
    centroids: CentroidSet,
    labels: Assignment,
    state: OptimizerState,
    max_clusters: usize,
}

impl<'a> Solver<'a> {
    /// Starts from a single centroid at the grand mean with every row in it.
    pub fn new(data: &'a DataMatrix, config: DpMomConfig) -> Result<Self> {
        config.validate(data.rows())?;
        let mut rng = SeededRng::new(config.seed);
        let partition = config.buckets.build(data, config.num_buckets, &mut rng)?;
        Self::with_partition(data, config, partition)
    }

    pub fn with_partition(data: &'a DataMatrix, config: DpMomConfig, partition: BucketPartition) -> Result<Self> {
        config.validate(data.rows())?;
        if partition.n() != data.rows() {
            return Err(contract("partition does not match the data"));
        }
        let centroids = CentroidSet::single(data.mean())?;
        Ok(Self {
            data,
            max_clusters: config.max_clusters.unwrap_or(data.rows()),
            config,
            partition,
            centroids,
            labels: Assignment::constant(data.rows(), 0),
            state: OptimizerState::new(1),
        })
    }

    pub fn centroids(&self) -> &CentroidSet {
        &self.centroids
    }

    pub fn labels(&self) -> &Assignment {
        &self.labels
    }

    pub fn partition(&self) -> &BucketPartition {
        &self.partition
    }

    pub fn state(&self) -> &OptimizerState {
        &self.state
    }

    fn penalised(&self, means: &[f64]) -> (usize, f64) {
        let l = select_median_bucket(means).expect("partition has blocks");
        (l, means[l] + self.config.lambda * self.centroids.len() as f64)
    }

    pub fn iterate(&mut self) -> Result<Iteration> {
        let spawned = spawn_sweep(
            self.data,
            &mut self.centroids,
            &mut self.labels,
            self.config.lambda,
            self.max_clusters,
        )?;
        self.state.grow_to(self.centroids.len());

        let means = block_means_unchecked(self.data, &self.partition, &self.centroids);
        let (median_bucket, before) = self.penalised(&means);
        let grads = gradient_unchecked(
            self.data,
            self.partition.block(median_bucket),
            &self.centroids,
            &self.labels,
        );
        adagrad_in_place(
            &mut self.centroids,
            &mut self.state,
            &grads,
            self.config.eta,
            self.config.epsilon,
        )?;

        let means = block_means_unchecked(self.data, &self.partition, &self.centroids);
        let (_, after) = self.penalised(&means);
        let converged = before == 0.0 || (after / before - 1.0).abs() <= self.config.delta;
        Ok(Iteration {
            objective_before: before,
            objective_after: after,
            median_bucket,
            spawned,
            converged,
        })
    }

    /// Runs until convergence or `t_max`, then labels every row by a final
    /// nearest-centroid pass.
    pub fn run(mut self) -> Result<ClusteringResult> {
        let mut trace = Vec::with_capacity(self.config.t_max);
        let mut converged = false;
        while trace.len() < self.config.t_max {
            let it = self.iterate()?;
            trace.push(it.objective_after);
            if it.converged {
                converged = true;
                break;
            }
        }
        let labels = assign_nearest(self.data, &self.centroids)?;
        let data = self.data;
        let result = ClusteringResult {
            labels,
            k: self.centroids.len(),
            centroids: self.centroids,
            iterations: trace.len(),
            objective_trace: trace,
            converged,
            seed: Some(self.config.seed),
            config: AlgorithmConfig::DpMom(self.config),
        };
        // Centroids that end up with no members are not reported.
        merge_small_clusters(&result, data, 1)
    }
}

/// Fits DP-MoM to `data`.
pub fn fit(data: &DataMatrix, config: &DpMomConfig) -> Result<ClusteringResult> {
    Solver::new(data, config.clone())?.run()
}

/// Folds clusters with fewer than `min_size` members into the nearest
/// cluster that has at least `min_size` members.
///
/// Each affected row moves to whichever surviving centroid is nearest to it.
/// Surviving centroids keep their positions and relative order.
pub fn merge_small_clusters(
    result: &ClusteringResult,
    data: &DataMatrix,
    min_size: usize,
) -> Result<ClusteringResult> {
    if result.labels.len() != data.rows() {
        return Err(contract("result labels do not match the data"));
    }
    check_dims(data, &result.centroids)?;
    let sizes = result.labels.cluster_sizes(result.k);
    let keep: Vec<usize> = (0..result.k).filter(|&j| sizes[j] >= min_size).collect();
    if keep.is_empty() {
        return Err(Error::MergeImpossible { min_size });
    }
    if keep.len() == result.k {
        return Ok(result.clone());
    }
    let mut remap = vec![usize::MAX; result.k];
    for (new, &old) in keep.iter().enumerate() {
        remap[old] = new;
    }
    let survivors = CentroidSet::new(keep.iter().map(|&j| result.centroids.get(j).to_vec()).collect())?;
    let labels = result
        .labels
        .labels()
        .iter()
        .enumerate()
        .map(|(i, &l)| match remap.get(l) {
            Some(&new) if new != usize::MAX => new,
            _ => nearest(data.row(i), &survivors).nearest,
        })
        .collect();
    Ok(ClusteringResult {
        labels: Assignment::new(labels),
        k: survivors.len(),
        centroids: survivors,
        ..result.clone()
    })
}

/// The two candidate learning rates `10^(ceil(2 log10 D) / 2)` and one
/// tenth of that, where `D` is the largest pairwise distance (not squared).
///
/// A first AdaGrad step moves a centroid by roughly `eta`, so `eta` has to
/// be on the scale of a distance.
pub fn default_learning_rate(data: &DataMatrix) -> Result<(f64, f64)> {
    let (_, d) = pairwise_sq_extremes(data)?;
    Ok(learning_rate_from_spread(d.sqrt()))
}

pub fn learning_rate_from_spread(spread: f64) -> (f64, f64) {
    let exponent = (2.0 * spread.log10()).ceil() / 2.0;
    let hi = 10f64.powf(exponent);
    (hi, hi / 10.0)
}
