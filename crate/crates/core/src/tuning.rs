//! Grid-search tuning of the penalty `lambda` and bucket count `L`.
//!
//! Protocol per repeat:
//! 1. Stage 1 evaluates 11 evenly spaced `lambda` values between the
//!    smallest and largest pairwise squared distance, for every admissible
//!    `L` (`2 < L < n/3`) and every learning-rate candidate.
//! 2. The winning `lambda`'s neighbourhood (its two grid neighbours, or the
//!    first/last grid interval at an endpoint) is split into 20 divisions and
//!    re-searched with the stage-1 learning rate frozen.
//! 3. Step 2 is repeated once more on the stage-2 winner.
//!
//! Cells are scored by ARI against known labels, or in the unsupervised
//! proxy mode by the penalised median-of-means objective evaluated at one
//! reference penalty shared by every cell (see [`proxy_penalty`]). Within one
//! repeat every cell with the same `L` shares one bucket partition. Each
//! cell's seed depends only on the base seed and the cell coordinates, so
//! cells may run in any order.

use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::domain::{Assignment, DataMatrix};
use crate::dpmom::{self, merge_small_clusters, DpMomConfig, DEFAULT_MIN_CLUSTER_SIZE};
use crate::error::{contract, Error, Result};
use crate::metrics::ari_inliers;
use crate::mom::mom_objective;
use crate::objective::pairwise_sq_extremes;
use crate::partition::BucketScheme;
use crate::result::ClusteringResult;
use crate::rng::{derive_seed, SeededRng};

pub const STAGE_ONE_POINTS: usize = 11;
pub const REFINE_POINTS: usize = 21;
pub const DEFAULT_REPEATS: usize = 35;
/// Above this many rows the `L` sweep is thinned to log-spaced values.
pub const FULL_SWEEP_MAX_N: usize = 300;
pub const THINNED_L_COUNT: usize = 30;

/// Smallest non-zero and largest pairwise squared distance.
pub fn lambda_bounds(data: &DataMatrix) -> Result<(f64, f64)> {
    pairwise_sq_extremes(data)
}

/// `points` evenly spaced values from `lo` to `hi` inclusive.
pub fn grid_stage(bounds: (f64, f64), points: usize) -> Result<Vec<f64>> {
    let (lo, hi) = bounds;
    if points < 2 {
        return Err(contract("a grid stage needs at least two points"));
    }
    if !(lo <= hi) {
        return Err(contract(format!("grid bounds out of order: {lo} > {hi}")));
    }
    let step = (hi - lo) / (points - 1) as f64;
    Ok((0..points)
        .map(|i| if i + 1 == points { hi } else { lo + step * i as f64 })
        .collect())
}

/// Interval to refine around grid index `best`.
pub fn refine_bounds(grid: &[f64], best: usize) -> (f64, f64) {
    let last = grid.len() - 1;
    match best {
        0 => (grid[0], grid[1]),
        b if b == last => (grid[last - 1], grid[last]),
        b => (grid[b - 1], grid[b + 1]),
    }
}

/// Bucket counts with `2 < L < n / 3`.
pub fn admissible_bucket_counts(n: usize) -> Vec<usize> {
    (3..).take_while(|l| 3 * l < n).collect()
}

/// Which bucket counts to sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BucketSweep {
    /// Every admissible count for small `n`, about 30 log-spaced counts otherwise.
    Auto,
    /// Every admissible count regardless of `n`.
    Full,
    /// Exactly these counts.
    Explicit(Vec<usize>),
}

impl BucketSweep {
    pub fn values(&self, n: usize) -> Result<Vec<usize>> {
        let all = admissible_bucket_counts(n);
        let values = match self {
            BucketSweep::Full => all,
            BucketSweep::Auto if n <= FULL_SWEEP_MAX_N => all,
            BucketSweep::Auto => log_spaced(&all, THINNED_L_COUNT),
            BucketSweep::Explicit(v) => {
                if let Some(&l) = v.iter().find(|&&l| l <= 2 || l > n) {
                    return Err(contract(format!("bucket count {l} outside 2 < L <= {n}")));
                }
                let mut v = v.clone();
                v.sort_unstable();
                v.dedup();
                v
            }
        };
        if values.is_empty() {
            return Err(Error::DegenerateData(format!(
                "no bucket count satisfies 2 < L < n/3 for n={n}"
            )));
        }
        Ok(values)
    }
}

fn log_spaced(all: &[usize], count: usize) -> Vec<usize> {
    if all.len() <= count {
        return all.to_vec();
    }
    let (lo, hi) = (all[0] as f64, *all.last().unwrap() as f64);
    let mut out: Vec<usize> = (0..count)
        .map(|i| (lo * (hi / lo).powf(i as f64 / (count - 1) as f64)).round() as usize)
        .collect();
    out.dedup();
    out
}

/// Learning-rate candidates tried in stage 1.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EtaRule {
    /// The two candidates from [`dpmom::default_learning_rate`].
    Default,
    Fixed(Vec<f64>),
}

impl EtaRule {
    pub fn candidates(&self, data: &DataMatrix) -> Result<Vec<f64>> {
        match self {
            EtaRule::Default => {
                let (a, b) = dpmom::default_learning_rate(data)?;
                Ok(vec![a, b])
            }
            EtaRule::Fixed(v) if v.is_empty() => Err(contract("no learning-rate candidates")),
            EtaRule::Fixed(v) => Ok(v.clone()),
        }
    }
}

/// Settings for [`search`] and [`unsupervised_proxy_search`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProtocolConfig {
    pub repeats: usize,
    pub seed: u64,
    pub buckets: BucketSweep,
    pub eta: EtaRule,
    pub bucket_scheme: BucketScheme,
    pub epsilon: f64,
    pub delta: f64,
    pub t_max: usize,
    /// Clusters below this size are merged before a cell is scored.
    pub min_cluster_size: usize,
    /// Points in stage 1 and in each refinement stage.
    pub stage_points: Vec<usize>,
}

impl Default for ProtocolConfig {
    fn default() -> Self {
        Self {
            repeats: DEFAULT_REPEATS,
            seed: 0,
            buckets: BucketSweep::Auto,
            eta: EtaRule::Default,
            bucket_scheme: BucketScheme::KmeansPlusPlus,
            epsilon: dpmom::DEFAULT_EPSILON,
            delta: dpmom::DEFAULT_DELTA,
            t_max: dpmom::DEFAULT_T_MAX,
            min_cluster_size: DEFAULT_MIN_CLUSTER_SIZE,
            stage_points: vec![STAGE_ONE_POINTS, REFINE_POINTS, REFINE_POINTS],
        }
    }
}

impl ProtocolConfig {
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_repeats(mut self, repeats: usize) -> Self {
        self.repeats = repeats;
        self
    }

    fn validate(&self) -> Result<()> {
        if self.repeats == 0 {
            return Err(contract("at least one repeat is required"));
        }
        if self.stage_points.is_empty() || self.stage_points.iter().any(|&p| p < 3) {
            return Err(contract("every stage needs at least three grid points"));
        }
        Ok(())
    }

    /// Fit seed for repeat `repeat` and bucket count `num_buckets`.
    pub fn cell_seed(&self, repeat: usize, num_buckets: usize) -> u64 {
        derive_seed(self.seed, &[repeat as u64, num_buckets as u64])
    }

    pub fn dpmom_config(&self, lambda: f64, eta: f64, num_buckets: usize, seed: u64) -> DpMomConfig {
        DpMomConfig {
            lambda,
            eta,
            epsilon: self.epsilon,
            delta: self.delta,
            t_max: self.t_max,
            num_buckets,
            max_clusters: None,
            seed,
            buckets: self.bucket_scheme,
        }
    }
}

/// One evaluated grid cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub stage: usize,
    pub repeat: usize,
    pub seed: u64,
    pub lambda: f64,
    pub num_buckets: usize,
    pub eta: f64,
    /// ARI, or the negated penalised objective in proxy mode; `-inf` when
    /// the fit overflowed its cluster guard.
    pub score: f64,
    /// Cluster count after small clusters are merged.
    pub k: usize,
}

/// Best cell of one repeat.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RepeatOptimum {
    pub repeat: usize,
    pub lambda: f64,
    pub num_buckets: usize,
    pub eta: f64,
    pub score: f64,
    pub k: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Criterion {
    /// ARI against ground-truth labels.
    Ari,
    /// Penalised median-of-means objective; an unsupervised stand-in.
    ObjectiveProxy,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TuningResult {
    pub criterion: Criterion,
    pub lambda_opt: f64,
    pub num_buckets_opt: usize,
    pub eta_opt: f64,
    pub k_opt: usize,
    pub lambda_range: (f64, f64),
    pub num_buckets_range: (usize, usize),
    /// Median over repeats of each repeat's best ARI (ARI criterion), or of
    /// the best negated objective (proxy criterion).
    pub median_score: f64,
    /// Penalty at which the proxy objective was evaluated.
    pub proxy_penalty: Option<f64>,
    pub per_repeat: Vec<RepeatOptimum>,
    pub trials: Vec<TrialRecord>,
}

impl TuningResult {
    /// Median best ARI; `None` in proxy mode.
    pub fn median_ari(&self) -> Option<f64> {
        (self.criterion == Criterion::Ari).then_some(self.median_score)
    }
}

/// Tuning output plus per-trial wall-clock times, aligned with `trials`.
#[derive(Debug, Clone)]
pub struct TuningRun {
    pub result: TuningResult,
    pub runtimes_ms: Vec<f64>,
}

/// Median of `values`; the mean of the two middle values for even counts.
pub fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let m = v.len() / 2;
    if v.len() % 2 == 1 {
        v[m]
    } else {
        0.5 * (v[m - 1] + v[m])
    }
}

struct Cell {
    lambda_index: usize,
    lambda: f64,
    num_buckets: usize,
    eta_index: usize,
    eta: f64,
}

struct Evaluated {
    record: TrialRecord,
    lambda_index: usize,
    eta_index: usize,
    runtime_ms: f64,
}

fn merged(result: &ClusteringResult, data: &DataMatrix, min_size: usize) -> Result<ClusteringResult> {
    match merge_small_clusters(result, data, min_size) {
        Ok(r) => Ok(r),
        Err(Error::MergeImpossible { .. }) => Ok(result.clone()),
        Err(e) => Err(e),
    }
}

/// Reference penalty for the proxy criterion: one stage-1 grid step above
/// `lambda_min`.
///
/// Scoring each cell at its own `lambda` is useless for choosing `lambda`:
/// the optimal penalised objective shrinks towards zero with `lambda`, so
/// the search would always pick the smallest grid value and nearly one
/// cluster per point.
pub fn proxy_penalty(bounds: (f64, f64)) -> f64 {
    bounds.0 + (bounds.1 - bounds.0) / (STAGE_ONE_POINTS - 1) as f64
}

enum Scorer<'a> {
    Ari(&'a Assignment),
    Objective(f64),
}

/// Scores one fitted solution; higher is better.
fn score_cell(
    data: &DataMatrix,
    scorer: &Scorer,
    config: &DpMomConfig,
    protocol: &ProtocolConfig,
) -> Result<(f64, usize)> {
    let solver = dpmom::Solver::new(data, config.clone())?;
    let partition = solver.partition().clone();
    let fitted = match solver.run() {
        Ok(r) => Some((r, partition)),
        Err(Error::SpawnOverflow { .. }) => None,
        Err(e) => return Err(e),
    };
    let Some((result, partition)) = fitted else {
        return Ok((f64::NEG_INFINITY, 0));
    };
    let result = merged(&result, data, protocol.min_cluster_size)?;
    let score = match scorer {
        Scorer::Ari(truth) => ari_inliers(&result.labels, truth)?,
        Scorer::Objective(penalty) => -mom_objective(data, &partition, &result.centroids, *penalty)?,
    };
    Ok((score, result.k))
}

/// Orders cells: higher score first, then smaller lambda, smaller `L`, earlier eta candidate.
fn better(a: &Evaluated, b: &Evaluated) -> bool {
    let (x, y) = (&a.record, &b.record);
    match x.score.total_cmp(&y.score) {
        std::cmp::Ordering::Greater => true,
        std::cmp::Ordering::Less => false,
        std::cmp::Ordering::Equal => {
            (x.lambda, x.num_buckets, a.eta_index) < (y.lambda, y.num_buckets, b.eta_index)
        }
    }
}

fn run_protocol(
    data: &DataMatrix,
    labels: Option<&Assignment>,
    protocol: &ProtocolConfig,
    criterion: Criterion,
) -> Result<TuningRun> {
    protocol.validate()?;
    if let Some(truth) = labels {
        if truth.len() != data.rows() {
            return Err(contract(format!(
                "{} labels for {} rows",
                truth.len(),
                data.rows()
            )));
        }
    }
    let bounds = lambda_bounds(data)?;
    let scorer = match labels {
        Some(truth) => Scorer::Ari(truth),
        None => Scorer::Objective(proxy_penalty(bounds)),
    };
    let bucket_counts = protocol.buckets.values(data.rows())?;
    let etas = protocol.eta.candidates(data)?;

    let mut trials = Vec::new();
    let mut runtimes = Vec::new();
    let mut per_repeat = Vec::with_capacity(protocol.repeats);

    for repeat in 0..protocol.repeats {
        let mut stage_bounds = bounds;
        let mut stage_etas: Vec<(usize, f64)> = etas.iter().copied().enumerate().collect();
        let mut best: Option<Evaluated> = None;

        for (stage, &points) in protocol.stage_points.iter().enumerate() {
            let grid = grid_stage(stage_bounds, points)?;
            let cells: Vec<Cell> = grid
                .iter()
                .enumerate()
                .flat_map(|(li, &lambda)| {
                    let etas = &stage_etas;
                    bucket_counts.iter().flat_map(move |&num_buckets| {
                        etas.iter().map(move |&(eta_index, eta)| Cell {
                            lambda_index: li,
                            lambda,
                            num_buckets,
                            eta_index,
                            eta,
                        })
                    })
                })
                .collect();

            let evaluated = cells
                .par_iter()
                .map(|cell| {
                    let seed = protocol.cell_seed(repeat, cell.num_buckets);
                    let config = protocol.dpmom_config(cell.lambda, cell.eta, cell.num_buckets, seed);
                    let start = Instant::now();
                    let (score, k) = score_cell(data, &scorer, &config, protocol)?;
                    Ok(Evaluated {
                        record: TrialRecord {
                            stage: stage + 1,
                            repeat,
                            seed,
                            lambda: cell.lambda,
                            num_buckets: cell.num_buckets,
                            eta: cell.eta,
                            score,
                            k,
                        },
                        lambda_index: cell.lambda_index,
                        eta_index: cell.eta_index,
                        runtime_ms: start.elapsed().as_secs_f64() * 1e3,
                    })
                })
                .collect::<Result<Vec<Evaluated>>>()?;

            let stage_best = evaluated
                .iter()
                .fold(None::<&Evaluated>, |acc, e| match acc {
                    Some(b) if !better(e, b) => Some(b),
                    _ => Some(e),
                })
                .expect("stage has cells");
            stage_bounds = refine_bounds(&grid, stage_best.lambda_index);
            if stage == 0 {
                stage_etas = vec![(stage_best.eta_index, stage_best.record.eta)];
            }
            let stage_best = Evaluated {
                record: stage_best.record.clone(),
                lambda_index: stage_best.lambda_index,
                eta_index: stage_best.eta_index,
                runtime_ms: 0.0,
            };
            best = match best {
                Some(b) if !better(&stage_best, &b) => Some(b),
                _ => Some(stage_best),
            };
            for e in evaluated {
                runtimes.push(e.runtime_ms);
                trials.push(e.record);
            }
        }

        let b = best.expect("at least one stage").record;
        per_repeat.push(RepeatOptimum {
            repeat,
            lambda: b.lambda,
            num_buckets: b.num_buckets,
            eta: b.eta,
            score: b.score,
            k: b.k,
        });
    }

    let scores: Vec<f64> = per_repeat.iter().map(|r| r.score).collect();
    let median_score = median(&scores);
    // The representative optimum is the repeat holding the lower-middle score.
    let mut order: Vec<usize> = (0..per_repeat.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]).then(a.cmp(&b)));
    let rep = &per_repeat[order[(order.len() - 1) / 2]];
    let lambdas = per_repeat.iter().map(|r| r.lambda);
    let lambda_range = (
        lambdas.clone().fold(f64::INFINITY, f64::min),
        lambdas.fold(f64::NEG_INFINITY, f64::max),
    );
    let ls = per_repeat.iter().map(|r| r.num_buckets);
    let num_buckets_range = (ls.clone().min().unwrap_or(0), ls.max().unwrap_or(0));

    Ok(TuningRun {
        result: TuningResult {
            criterion,
            lambda_opt: rep.lambda,
            num_buckets_opt: rep.num_buckets,
            eta_opt: rep.eta,
            k_opt: rep.k,
            lambda_range,
            num_buckets_range,
            median_score,
            proxy_penalty: match scorer {
                Scorer::Objective(p) => Some(p),
                Scorer::Ari(_) => None,
            },
            per_repeat,
            trials,
        },
        runtimes_ms: runtimes,
    })
}

/// Supervised tuning against ground-truth labels (outlier rows excluded).
pub fn search(data: &DataMatrix, labels: &Assignment, protocol: &ProtocolConfig) -> Result<TuningResult> {
    search_timed(data, labels, protocol).map(|r| r.result)
}

pub fn search_timed(data: &DataMatrix, labels: &Assignment, protocol: &ProtocolConfig) -> Result<TuningRun> {
    run_protocol(data, Some(labels), protocol, Criterion::Ari)
}

/// Label-free tuning that minimises the penalised median-of-means objective.
pub fn unsupervised_proxy_search(data: &DataMatrix, protocol: &ProtocolConfig) -> Result<TuningResult> {
    unsupervised_proxy_search_timed(data, protocol).map(|r| r.result)
}

pub fn unsupervised_proxy_search_timed(data: &DataMatrix, protocol: &ProtocolConfig) -> Result<TuningRun> {
    if data.rows() < 10 {
        return Err(contract("proxy tuning needs at least 10 rows"));
    }
    run_protocol(data, None, protocol, Criterion::ObjectiveProxy)
}

/// Fits DP-MoM once per seed at fixed parameters and returns each run's ARI.
pub fn evaluate_fixed(
    data: &DataMatrix,
    labels: &Assignment,
    config: &DpMomConfig,
    seeds: &[u64],
    min_cluster_size: usize,
) -> Result<Vec<f64>> {
    seeds
        .par_iter()
        .map(|&seed| {
            let mut c = config.clone();
            c.seed = seed;
            match dpmom::fit(data, &c) {
                Ok(r) => ari_inliers(&merged(&r, data, min_cluster_size)?.labels, labels),
                Err(Error::SpawnOverflow { .. }) => Ok(f64::NEG_INFINITY),
                Err(e) => Err(e),
            }
        })
        .collect()
}

/// Best DP-means penalty by ARI, searched with the same three-stage
/// `lambda` refinement. DP-means is deterministic, so there are no repeats.
/// Returns `(lambda, ari)`.
pub fn tune_dp_means(
    data: &DataMatrix,
    labels: &Assignment,
    protocol: &ProtocolConfig,
) -> Result<(f64, f64)> {
    protocol.validate()?;
    let mut bounds = lambda_bounds(data)?;
    let mut best = (f64::NAN, f64::NEG_INFINITY);
    for &points in &protocol.stage_points {
        let grid = grid_stage(bounds, points)?;
        let scores = grid
            .par_iter()
            .map(|&lambda| {
                let r = crate::baselines::dp_means(data, lambda, protocol.t_max, protocol.delta)?;
                ari_inliers(&merged(&r, data, protocol.min_cluster_size)?.labels, labels)
            })
            .collect::<Result<Vec<f64>>>()?;
        let mut idx = 0;
        for (i, &s) in scores.iter().enumerate() {
            if s > scores[idx] {
                idx = i;
            }
        }
        if scores[idx] > best.1 || (scores[idx] == best.1 && grid[idx] < best.0) {
            best = (grid[idx], scores[idx]);
        }
        bounds = refine_bounds(&grid, idx);
    }
    Ok(best)
}

/// Seed list derived from one base seed.
pub fn run_seeds(base: u64, count: usize) -> Vec<u64> {
    let rng = SeededRng::new(base);
    (0..count).map(|i| rng.derive(&[i as u64]).seed()).collect()
}

/// Writes the trial trace as CSV. `runtimes_ms`, when given, adds a
/// `runtime_ms` column aligned with `result.trials`.
pub fn write_trace<W: std::io::Write>(
    writer: W,
    result: &TuningResult,
    runtimes_ms: Option<&[f64]>,
) -> Result<()> {
    if result.trials.is_empty() {
        return Err(contract("empty tuning trace"));
    }
    if let Some(r) = runtimes_ms {
        if r.len() != result.trials.len() {
            return Err(contract("runtimes do not align with trials"));
        }
    }
    let score_name = match result.criterion {
        Criterion::Ari => "ari",
        Criterion::ObjectiveProxy => "neg_objective",
    };
    let io = |e: csv::Error| Error::Io { path: "<trace>".into(), message: e.to_string() };
    let mut w = csv::Writer::from_writer(writer);
    let mut header = vec!["stage", "repeat", "seed", "lambda", "L", "eta", score_name, "k"];
    if runtimes_ms.is_some() {
        header.push("runtime_ms");
    }
    w.write_record(&header).map_err(io)?;
    for (i, t) in result.trials.iter().enumerate() {
        let mut rec = vec![
            t.stage.to_string(),
            t.repeat.to_string(),
            t.seed.to_string(),
            t.lambda.to_string(),
            t.num_buckets.to_string(),
            t.eta.to_string(),
            t.score.to_string(),
            t.k.to_string(),
        ];
        if let Some(r) = runtimes_ms {
            rec.push(format!("{:.3}", r[i]));
        }
        w.write_record(&rec).map_err(io)?;
    }
    w.flush().map_err(|e| Error::Io { path: "<trace>".into(), message: e.to_string() })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::baselines::kmeans;
    use crate::data::gen_gaussian_mixture;
    use crate::mom::BucketPartition;
    use crate::objective::sq_euclidean;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn rows(r: &[[f64; 2]]) -> DataMatrix {
        DataMatrix::from_rows(r).unwrap()
    }

    fn quick(repeats: usize) -> ProtocolConfig {
        ProtocolConfig::default().with_repeats(repeats).with_seed(11)
    }

    #[test]
    fn bounds_examples() {
        assert_eq!(lambda_bounds(&rows(&[[0.0, 0.0], [3.0, 4.0]])).unwrap(), (25.0, 25.0));
        assert_eq!(lambda_bounds(&rows(&[[0.0, 0.0], [1.0, 0.0], [0.0, 2.0]])).unwrap(), (1.0, 5.0));
        let dup = rows(&[[0.0, 0.0], [0.0, 0.0], [1.0, 0.0], [0.0, 2.0]]);
        assert_eq!(lambda_bounds(&dup).unwrap(), (1.0, 5.0));
        assert!(matches!(lambda_bounds(&rows(&[[1.0, 1.0]; 3])), Err(Error::DegenerateData(_))));
    }

    #[test]
    fn grid_examples() {
        assert_eq!(grid_stage((0.0, 10.0), 11).unwrap(), (0..=10).map(f64::from).collect::<Vec<_>>());
        assert_eq!(grid_stage((1.0, 5.0), 2).unwrap(), vec![1.0, 5.0]);
        let g = grid_stage((2.0, 4.0), 21).unwrap();
        for w in g.windows(2) {
            assert_relative_eq!(w[1] - w[0], 0.1, epsilon = 1e-12);
        }
        assert!(grid_stage((1.0, 0.0), 3).is_err());
        let g: Vec<f64> = (0..11).map(f64::from).collect();
        assert_eq!(refine_bounds(&g, 0), (0.0, 1.0));
        assert_eq!(refine_bounds(&g, 10), (9.0, 10.0));
        assert_eq!(refine_bounds(&g, 4), (3.0, 5.0));
    }

    #[test]
    fn bucket_sweeps() {
        assert_eq!(admissible_bucket_counts(12), vec![3]);
        assert!(admissible_bucket_counts(9).is_empty());
        assert_eq!(admissible_bucket_counts(150).len(), 47);
        assert_eq!(BucketSweep::Auto.values(150).unwrap().len(), 47);
        let thin = BucketSweep::Auto.values(3000).unwrap();
        assert!(thin.len() <= THINNED_L_COUNT && thin.len() > 20);
        assert_eq!((thin[0], *thin.last().unwrap()), (3, 999));
        assert!(thin.windows(2).all(|w| w[0] < w[1]));
        assert_eq!(BucketSweep::Full.values(3000).unwrap().len(), 997);
        assert!(BucketSweep::Auto.values(9).is_err());
        assert!(BucketSweep::Explicit(vec![2]).values(10).is_err());
    }

    #[test]
    fn median_matches_sort() {
        assert_eq!(median(&[3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(&[4.0, 1.0, 2.0, 3.0]), 2.5);
    }

    fn two_blobs(seed: u64) -> (DataMatrix, Assignment) {
        gen_gaussian_mixture(&[vec![0.0, 0.0], vec![20.0, 0.0]], 0.5, 20, &mut SeededRng::new(seed)).unwrap()
    }

    fn between_blob_min(data: &DataMatrix, truth: &Assignment) -> f64 {
        let mut best = f64::INFINITY;
        for i in 0..data.rows() {
            for j in 0..data.rows() {
                if truth.labels()[i] != truth.labels()[j] {
                    best = best.min(sq_euclidean(data.row(i), data.row(j)).unwrap());
                }
            }
        }
        best
    }

    #[test]
    fn separated_blobs_are_recovered() {
        let (data, truth) = two_blobs(3);
        let r = search(&data, &truth, &quick(3)).unwrap();
        assert_eq!(r.median_ari(), Some(1.0));
        assert_eq!(r.k_opt, 2);
        let (lo, hi) = r.lambda_range;
        assert!(lo <= r.lambda_opt && r.lambda_opt <= hi);
        assert!(hi < between_blob_min(&data, &truth));
        let (l_lo, l_hi) = r.num_buckets_range;
        assert!(l_lo <= r.num_buckets_opt && r.num_buckets_opt <= l_hi);

        let bounds = lambda_bounds(&data).unwrap();
        assert!(r.trials.iter().all(|t| t.lambda >= bounds.0 && t.lambda <= bounds.1));
        assert!(r.trials.iter().all(|t| 3 * t.num_buckets < data.rows()));
        // Refinement stages only use the stage-1 winner's learning rate.
        for o in &r.per_repeat {
            let etas: Vec<f64> = r.trials.iter().filter(|t| t.repeat == o.repeat && t.stage > 1).map(|t| t.eta).collect();
            assert!(etas.iter().all(|&e| e == o.eta));
        }
    }

    #[test]
    fn median_is_over_repeat_optima() {
        let (data, truth) = gen_gaussian_mixture(
            &[vec![0.0, 0.0], vec![2.5, 0.0], vec![0.0, 2.5]],
            1.0,
            12,
            &mut SeededRng::new(4),
        )
        .unwrap();
        let mut p = quick(5);
        p.stage_points = vec![5, 5];
        let r = search(&data, &truth, &p).unwrap();
        let mut best: Vec<f64> = (0..5)
            .map(|rep| {
                r.trials.iter().filter(|t| t.repeat == rep).map(|t| t.score).fold(f64::NEG_INFINITY, f64::max)
            })
            .collect();
        best.sort_by(f64::total_cmp);
        assert_eq!(r.median_score, best[2]);
        let per: Vec<f64> = r.per_repeat.iter().map(|o| o.score).collect();
        assert_eq!(median(&per), best[2]);
    }

    #[test]
    fn single_repeat_is_deterministic() {
        let (data, truth) = two_blobs(5);
        let mut p = quick(1);
        p.stage_points = vec![5, 5];
        assert_eq!(search(&data, &truth, &p).unwrap(), search(&data, &truth, &p).unwrap());
        assert_eq!(
            unsupervised_proxy_search(&data, &p).unwrap(),
            unsupervised_proxy_search(&data, &p).unwrap()
        );
    }

    /// Penalised objective of the best k-means solution for each k at the
    /// proxy penalty; returns the k with the lowest value.
    fn brute_force_k(data: &DataMatrix, num_buckets: usize, seed: u64) -> usize {
        let penalty = proxy_penalty(lambda_bounds(data).unwrap());
        let part = BucketScheme::KmeansPlusPlus
            .build(data, num_buckets, &mut SeededRng::new(seed))
            .unwrap();
        (1..=3)
            .map(|k| {
                let fit = kmeans(data, k, 100, 0.0, 1).unwrap();
                (k, mom_objective(data, &part, &fit.centroids, penalty).unwrap())
            })
            .min_by(|a, b| a.1.total_cmp(&b.1))
            .unwrap()
            .0
    }

    #[test]
    fn proxy_picks_cluster_count() {
        let p = quick(3);
        let (two, _) = two_blobs(6);
        let r = unsupervised_proxy_search(&two, &p).unwrap();
        assert_eq!(r.median_ari(), None);
        assert_eq!(r.k_opt, 2);
        assert_eq!(brute_force_k(&two, r.num_buckets_opt, p.cell_seed(0, r.num_buckets_opt)), 2);

        let (one, _) = gen_gaussian_mixture(&[vec![0.0, 0.0]], 1.0, 40, &mut SeededRng::new(7)).unwrap();
        let r = unsupervised_proxy_search(&one, &p).unwrap();
        assert_eq!(r.k_opt, 1);
        assert_eq!(brute_force_k(&one, r.num_buckets_opt, p.cell_seed(0, r.num_buckets_opt)), 1);
        // Large lambda fits that did not overflow are single clusters.
        let half = lambda_bounds(&one).unwrap().1 / 2.0;
        let big: Vec<&TrialRecord> =
            r.trials.iter().filter(|t| t.lambda >= half && t.score.is_finite()).collect();
        assert!(!big.is_empty() && big.iter().all(|t| t.k == 1));
        assert!(unsupervised_proxy_search(&rows(&[[0.0, 0.0], [1.0, 1.0]]), &p).is_err());
    }

    #[test]
    fn trace_csv_shape() {
        let (data, truth) = two_blobs(8);
        let mut p = quick(1);
        p.stage_points = vec![3];
        let run = search_timed(&data, &truth, &p).unwrap();
        let mut out = Vec::new();
        write_trace(&mut out, &run.result, Some(&run.runtimes_ms)).unwrap();
        let text = String::from_utf8(out).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next().unwrap(), "stage,repeat,seed,lambda,L,eta,ari,k,runtime_ms");
        assert_eq!(lines.count(), run.result.trials.len());
        let mut empty = run.result.clone();
        empty.trials.clear();
        assert!(write_trace(Vec::new(), &empty, None).is_err());
    }

    #[test]
    fn partition_is_shared_within_a_repeat() {
        let p = quick(2);
        assert_eq!(p.cell_seed(0, 5), p.cell_seed(0, 5));
        assert_ne!(p.cell_seed(0, 5), p.cell_seed(1, 5));
        assert_ne!(p.cell_seed(0, 5), p.cell_seed(0, 6));
        let _ = BucketPartition::whole(3).unwrap();
    }

    proptest! {
        #[test]
        fn refined_grids_stay_inside(lo in -5.0f64..5.0, width in 0.0f64..50.0, picks in proptest::collection::vec(0usize..21, 3)) {
            let bounds = (lo, lo + width);
            let mut b = bounds;
            for (stage, pick) in picks.into_iter().enumerate() {
                let points = if stage == 0 { STAGE_ONE_POINTS } else { REFINE_POINTS };
                let g = grid_stage(b, points).unwrap();
                prop_assert!(g.iter().all(|&x| x >= bounds.0 && x <= bounds.1));
                prop_assert_eq!(g[0], b.0);
                prop_assert_eq!(*g.last().unwrap(), b.1);
                b = refine_bounds(&g, pick % points);
            }
        }
    }
}
