//! Empirical probes of the robustness and rate results.
//!
//! [`contamination_sweep`] adds growing numbers of uniform outliers to a
//! generated dataset and measures how far DP-MoM's centroids and ARI move
//! relative to the clean fit. [`rate_trend`] measures the excess risk of the
//! fitted centroids over the generating means as the sample size grows.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::baselines::dp_means;
use crate::data::{gen_gaussian_mixture, gen_quadrant, inject_outliers};
use crate::domain::{Assignment, CentroidSet, DataMatrix};
use crate::dpmom::{self, merge_small_clusters, DpMomConfig, DEFAULT_MIN_CLUSTER_SIZE};
use crate::error::{contract, Error, Result};
use crate::metrics::ari_inliers;
use crate::objective::{empirical_objective, sq_dist};
use crate::result::ClusteringResult;
use crate::rng::SeededRng;
use crate::tuning::{median, search, tune_dp_means, ProtocolConfig, TuningResult};

/// Bucket count must exceed this multiple of the outlier count.
pub const OUTLIER_BUCKET_FACTOR: f64 = 2.5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum GeneratorSpec {
    Quadrant { per_quadrant: usize },
    Gaussian { means: Vec<Vec<f64>>, sd: f64, per_cluster: usize },
}

impl GeneratorSpec {
    pub fn generate(&self, rng: &mut SeededRng) -> Result<(DataMatrix, Assignment)> {
        match self {
            GeneratorSpec::Quadrant { per_quadrant } => gen_quadrant(*per_quadrant, rng),
            GeneratorSpec::Gaussian { means, sd, per_cluster } => gen_gaussian_mixture(means, *sd, *per_cluster, rng),
        }
    }

    /// Box outliers are drawn from; `None` means the data's own range.
    pub fn outlier_bounds(&self) -> Option<Vec<(f64, f64)>> {
        match self {
            GeneratorSpec::Quadrant { .. } => Some(crate::data::QUADRANT_OUTLIER_BOUNDS.to_vec()),
            GeneratorSpec::Gaussian { .. } => None,
        }
    }

    /// The same generator with `per` points per cluster.
    pub fn with_per_cluster(&self, per: usize) -> Self {
        match self {
            GeneratorSpec::Quadrant { .. } => GeneratorSpec::Quadrant { per_quadrant: per },
            GeneratorSpec::Gaussian { means, sd, .. } => {
                GeneratorSpec::Gaussian { means: means.clone(), sd: *sd, per_cluster: per }
            }
        }
    }

    fn num_clusters(&self) -> usize {
        match self {
            GeneratorSpec::Quadrant { .. } => 4,
            GeneratorSpec::Gaussian { means, .. } => means.len(),
        }
    }
}

/// How the bucket count is chosen at each contamination level.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "kebab-case")]
pub enum BucketRule {
    /// Always this many buckets; rejected for levels where it is too small.
    Fixed { buckets: usize },
    /// The smallest admissible count above `2.5 |O|`, but at least `min`.
    AtLeast { min: usize },
    /// This many buckets at every level, explicitly waiving the outlier bound.
    Override { buckets: usize },
}

impl BucketRule {
    pub fn buckets(&self, n: usize, outliers: usize) -> Result<usize> {
        let needed = (OUTLIER_BUCKET_FACTOR * outliers as f64).floor() as usize + 1;
        let l = match *self {
            BucketRule::Fixed { buckets } => {
                if outliers > 0 && buckets < needed {
                    return Err(contract(format!(
                        "{buckets} buckets do not exceed 2.5 x {outliers} outliers"
                    )));
                }
                buckets
            }
            BucketRule::AtLeast { min } => min.max(needed),
            BucketRule::Override { buckets } => buckets,
        };
        if l <= 2 || l > n {
            return Err(contract(format!("bucket count {l} outside 2 < L <= {n}")));
        }
        Ok(l)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContaminationConfig {
    pub generator: GeneratorSpec,
    /// Cumulative outlier counts; levels are nested, each adds to the previous.
    pub outlier_counts: Vec<usize>,
    pub buckets: BucketRule,
    pub lambda: f64,
    pub eta: f64,
    /// Penalty for the DP-means comparison; skipped when `None`.
    pub dp_means_lambda: Option<f64>,
    pub seeds: Vec<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContaminationLevel {
    pub outliers: usize,
    pub n: usize,
    pub buckets: usize,
    pub median_displacement: f64,
    pub median_ari: f64,
    pub aris: Vec<f64>,
    pub dp_means_median_ari: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContaminationReport {
    pub levels: Vec<ContaminationLevel>,
}

/// Mean distance from each reference centroid to its nearest centroid in `other`.
pub fn centroid_displacement(reference: &CentroidSet, other: &CentroidSet) -> f64 {
    let total: f64 = reference
        .iter()
        .map(|c| other.iter().map(|o| sq_dist(c, o)).fold(f64::INFINITY, f64::min).sqrt())
        .sum();
    total / reference.len() as f64
}

fn merged(r: ClusteringResult, data: &DataMatrix) -> Result<ClusteringResult> {
    match merge_small_clusters(&r, data, DEFAULT_MIN_CLUSTER_SIZE) {
        Err(Error::MergeImpossible { .. }) => Ok(r),
        other => other,
    }
}

struct SeedOutcome {
    displacement: Vec<f64>,
    ari: Vec<f64>,
    dp_ari: Vec<f64>,
}

fn contamination_seed(config: &ContaminationConfig, seed: u64, buckets: &[usize]) -> Result<SeedOutcome> {
    let base = SeededRng::new(seed);
    let (clean, truth) = config.generator.generate(&mut base.derive(&[0]))?;
    let bounds = config.generator.outlier_bounds();
    let mut outlier_rng = base.derive(&[1]);
    let (mut data, mut labels) = (clean.clone(), truth.clone());
    let mut added = 0;
    let mut out = SeedOutcome { displacement: vec![], ari: vec![], dp_ari: vec![] };
    let mut reference: Option<CentroidSet> = None;
    for (level, (&count, &l)) in config.outlier_counts.iter().zip(buckets).enumerate() {
        (data, labels) = inject_outliers(&data, &labels, count - added, bounds.as_deref(), &mut outlier_rng)?;
        added = count;
        let fit_seed = base.derive(&[2, level as u64]).seed();
        let cfg = DpMomConfig::new(config.lambda, config.eta, l, fit_seed);
        let (ari, centroids) = match dpmom::fit(&data, &cfg) {
            Ok(r) => {
                let r = merged(r, &data)?;
                (ari_inliers(&r.labels, &labels)?, Some(r.centroids))
            }
            Err(Error::SpawnOverflow { .. }) => (f64::NEG_INFINITY, None),
            Err(e) => return Err(e),
        };
        let displacement = match (&reference, &centroids) {
            (None, Some(c)) => {
                reference = Some(c.clone());
                0.0
            }
            (Some(r), Some(c)) => centroid_displacement(r, c),
            _ => f64::INFINITY,
        };
        out.ari.push(ari);
        out.displacement.push(displacement);
        if let Some(dl) = config.dp_means_lambda {
            let r = merged(dp_means(&data, dl, dpmom::DEFAULT_T_MAX, dpmom::DEFAULT_DELTA)?, &data)?;
            out.dp_ari.push(ari_inliers(&r.labels, &labels)?);
        }
    }
    Ok(out)
}

/// Fits DP-MoM at each contamination level for every seed.
///
/// The first level is the displacement baseline; with zero outliers its
/// displacement is 0 by construction.
pub fn contamination_sweep(config: &ContaminationConfig) -> Result<ContaminationReport> {
    if config.seeds.is_empty() || config.outlier_counts.is_empty() {
        return Err(contract("need at least one seed and one contamination level"));
    }
    if config.outlier_counts.windows(2).any(|w| w[0] > w[1]) {
        return Err(contract("outlier counts must be non-decreasing"));
    }
    let clean_n = config.generator.generate(&mut SeededRng::new(0))?.0.rows();
    let buckets = config
        .outlier_counts
        .iter()
        .map(|&o| config.buckets.buckets(clean_n + o, o))
        .collect::<Result<Vec<_>>>()?;
    let per_seed = config
        .seeds
        .par_iter()
        .map(|&s| contamination_seed(config, s, &buckets))
        .collect::<Result<Vec<_>>>()?;
    let levels = (0..config.outlier_counts.len())
        .map(|i| {
            let aris: Vec<f64> = per_seed.iter().map(|s| s.ari[i]).collect();
            let disp: Vec<f64> = per_seed.iter().map(|s| s.displacement[i]).collect();
            ContaminationLevel {
                outliers: config.outlier_counts[i],
                n: clean_n + config.outlier_counts[i],
                buckets: buckets[i],
                median_displacement: median(&disp),
                median_ari: median(&aris),
                dp_means_median_ari: config
                    .dp_means_lambda
                    .map(|_| median(&per_seed.iter().map(|s| s.dp_ari[i]).collect::<Vec<_>>())),
                aris,
            }
        })
        .collect();
    Ok(ContaminationReport { levels })
}

/// One contamination stage scored with per-stage supervised tuning.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TunedLevel {
    pub outliers: usize,
    pub n: usize,
    pub dpmom: TuningResult,
    pub dp_means_lambda: f64,
    pub dp_means_ari: f64,
}

/// Generates one dataset, adds outliers in nested stages, and tunes DP-MoM
/// and DP-means against the inlier labels at every stage.
pub fn tuned_contamination(
    generator: &GeneratorSpec,
    outlier_counts: &[usize],
    protocol: &ProtocolConfig,
    data_seed: u64,
) -> Result<Vec<TunedLevel>> {
    let base = SeededRng::new(data_seed);
    let (data, labels) = generator.generate(&mut base.derive(&[0]))?;
    let bounds = generator.outlier_bounds();
    tuned_contamination_on(&data, &labels, bounds.as_deref(), outlier_counts, protocol, &mut base.derive(&[1]))
}

/// Nested contamination stages: stage `i` holds the data plus the first
/// `outlier_counts[i]` outliers. `bounds` defaults to the data's own range.
pub fn contamination_stages(
    data: &DataMatrix,
    labels: &Assignment,
    bounds: Option<&[(f64, f64)]>,
    outlier_counts: &[usize],
    rng: &mut SeededRng,
) -> Result<Vec<(DataMatrix, Assignment)>> {
    if outlier_counts.windows(2).any(|w| w[0] > w[1]) {
        return Err(contract("outlier counts must be non-decreasing"));
    }
    let own = data.column_bounds();
    let bounds = bounds.unwrap_or(&own);
    let (mut data, mut labels) = (data.clone(), labels.clone());
    let mut added = 0;
    let mut stages = Vec::with_capacity(outlier_counts.len());
    for &count in outlier_counts {
        (data, labels) = inject_outliers(&data, &labels, count - added, Some(bounds), rng)?;
        added = count;
        stages.push((data.clone(), labels.clone()));
    }
    Ok(stages)
}

/// [`tuned_contamination`] on a given dataset. `bounds` defaults to the
/// data's own range.
pub fn tuned_contamination_on(
    data: &DataMatrix,
    labels: &Assignment,
    bounds: Option<&[(f64, f64)]>,
    outlier_counts: &[usize],
    protocol: &ProtocolConfig,
    rng: &mut SeededRng,
) -> Result<Vec<TunedLevel>> {
    let stages = contamination_stages(data, labels, bounds, outlier_counts, rng)?;
    stages
        .iter()
        .zip(outlier_counts)
        .map(|((data, labels), &count)| tune_stage(data, labels, count, protocol))
        .collect()
}

/// Tunes DP-MoM and DP-means on one stage.
pub fn tune_stage(data: &DataMatrix, labels: &Assignment, outliers: usize, protocol: &ProtocolConfig) -> Result<TunedLevel> {
    let dpmom = search(data, labels, protocol)?;
    let (dp_means_lambda, dp_means_ari) = tune_dp_means(data, labels, protocol)?;
    Ok(TunedLevel { outliers, n: data.rows(), dpmom, dp_means_lambda, dp_means_ari })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateConfig {
    /// Gaussian generator; `per_cluster` is replaced by `n / k` at each level.
    pub generator: GeneratorSpec,
    /// Total sample sizes, increasing, at least three.
    pub n_values: Vec<usize>,
    pub lambda: f64,
    pub eta: f64,
    pub buckets: usize,
    pub seeds: Vec<u64>,
    /// Size of the held-out sample used to estimate population risk.
    pub test_size: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateLevel {
    pub n: usize,
    pub median_gap: f64,
    /// First and third quartiles of the gap.
    pub iqr: (f64, f64),
    pub gaps: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateReport {
    pub levels: Vec<RateLevel>,
    /// Least-squares slope of log(median gap) against log(n).
    pub slope: f64,
    /// Penalised risk of the generating means on the held-out sample.
    pub oracle_risk: f64,
}

/// Linear-interpolation quantile of `values`, `q` in `[0, 1]`.
pub fn quantile(values: &[f64], q: f64) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let pos = q * (v.len() - 1) as f64;
    let (lo, hi) = (pos.floor() as usize, pos.ceil() as usize);
    v[lo] + (v[hi] - v[lo]) * (pos - lo as f64)
}

/// Least-squares slope of `y` on `x`.
pub fn ols_slope(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    sxy / sxx
}

/// Excess penalised risk of fitted centroids over the generating means:
/// `R(fit) + lambda k_fit - (R(means) + lambda k_true)`, with `R` the mean
/// squared distance to the nearest centroid.
///
/// Both risks are estimated on one shared held-out sample, so the
/// comparison uses common random numbers.
pub fn rate_trend(config: &RateConfig) -> Result<RateReport> {
    let GeneratorSpec::Gaussian { means, .. } = &config.generator else {
        return Err(contract("rate trend needs a Gaussian generator with known means"));
    };
    if config.n_values.len() < 3 || config.n_values.windows(2).any(|w| w[0] >= w[1]) {
        return Err(contract("need at least three increasing sample sizes"));
    }
    if config.seeds.is_empty() || config.test_size == 0 {
        return Err(contract("need seeds and a non-empty test sample"));
    }
    let k = config.generator.num_clusters();
    let oracle = CentroidSet::new(means.clone())?;
    let test_gen = config.generator.with_per_cluster(config.test_size.div_ceil(k));
    let (test, _) = test_gen.generate(&mut SeededRng::new(u64::MAX))?;
    let oracle_risk = empirical_objective(&test, &oracle)? + config.lambda * k as f64;

    let levels = config
        .n_values
        .iter()
        .enumerate()
        .map(|(level, &n)| {
            let gen = config.generator.with_per_cluster(n / k);
            let gaps = config
                .seeds
                .par_iter()
                .map(|&seed| {
                    let base = SeededRng::new(seed).derive(&[level as u64]);
                    let (data, _) = gen.generate(&mut base.derive(&[0]))?;
                    let cfg = DpMomConfig::new(config.lambda, config.eta, config.buckets, base.derive(&[1]).seed());
                    let fit = dpmom::fit(&data, &cfg)?;
                    Ok(empirical_objective(&test, &fit.centroids)? + config.lambda * fit.k as f64 - oracle_risk)
                })
                .collect::<Result<Vec<f64>>>()?;
            Ok(RateLevel {
                n: gen_size(&gen),
                median_gap: median(&gaps),
                iqr: (quantile(&gaps, 0.25), quantile(&gaps, 0.75)),
                gaps,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    if let Some(l) = levels.iter().find(|l| l.median_gap <= 0.0) {
        return Err(Error::DegenerateData(format!(
            "median gap {} at n={} is not positive; no log-log slope",
            l.median_gap, l.n
        )));
    }
    let x: Vec<f64> = levels.iter().map(|l| (l.n as f64).ln()).collect();
    let y: Vec<f64> = levels.iter().map(|l| l.median_gap.ln()).collect();
    Ok(RateReport { slope: ols_slope(&x, &y), levels, oracle_risk })
}

fn gen_size(gen: &GeneratorSpec) -> usize {
    match gen {
        GeneratorSpec::Quadrant { per_quadrant } => 4 * per_quadrant,
        GeneratorSpec::Gaussian { means, per_cluster, .. } => means.len() * per_cluster,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn quadrant_sweep(buckets: BucketRule, counts: Vec<usize>) -> ContaminationConfig {
        ContaminationConfig {
            generator: GeneratorSpec::Quadrant { per_quadrant: 30 },
            outlier_counts: counts,
            buckets,
            lambda: 1.0,
            eta: 0.316,
            dp_means_lambda: Some(1.0),
            seeds: (0..20).collect(),
        }
    }

    #[test]
    fn bucket_rule_is_enforced() {
        assert_eq!(BucketRule::AtLeast { min: 3 }.buckets(170, 50).unwrap(), 126);
        assert_eq!(BucketRule::AtLeast { min: 3 }.buckets(120, 0).unwrap(), 3);
        assert_eq!(BucketRule::Fixed { buckets: 38 }.buckets(135, 15).unwrap(), 38);
        assert!(BucketRule::Fixed { buckets: 37 }.buckets(135, 15).is_err());
        assert!(BucketRule::AtLeast { min: 3 }.buckets(100, 50).is_err());
        assert_eq!(BucketRule::Override { buckets: 5 }.buckets(170, 50).unwrap(), 5);
        let cfg = quadrant_sweep(BucketRule::Fixed { buckets: 10 }, vec![0, 15]);
        assert!(contamination_sweep(&cfg).is_err());
    }

    #[test]
    fn clean_level_has_zero_displacement() {
        let mut cfg = quadrant_sweep(BucketRule::AtLeast { min: 3 }, vec![0, 15]);
        cfg.seeds.truncate(5);
        let r = contamination_sweep(&cfg).unwrap();
        assert_eq!(r.levels[0].median_displacement, 0.0);
        assert_eq!(r.levels[1].n, 135);
        assert_eq!(r.levels[1].buckets, 38);
        assert_eq!(r, contamination_sweep(&cfg).unwrap());
    }

    #[test]
    fn ari_holds_under_outlier_bucket_rule() {
        let r = contamination_sweep(&quadrant_sweep(BucketRule::AtLeast { min: 3 }, vec![0, 15, 30, 50])).unwrap();
        let clean = r.levels[0].median_ari;
        for level in &r.levels[1..] {
            assert!((level.median_ari - clean).abs() <= 0.1, "{} vs {clean}", level.median_ari);
        }
    }

    // Uniform outliers inside the data's own box barely hurt DP-means, which
    // often scores higher with them than without.
    #[test]
    #[ignore = "not attained: DP-means does not degrade more than DP-MoM on this generator"]
    fn dp_means_degrades_more() {
        let r = contamination_sweep(&quadrant_sweep(BucketRule::AtLeast { min: 3 }, vec![0, 15, 30, 50])).unwrap();
        let (first, last) = (&r.levels[0], r.levels.last().unwrap());
        let dpmom_drop = first.median_ari - last.median_ari;
        let dp_drop = first.dp_means_median_ari.unwrap() - last.dp_means_median_ari.unwrap();
        assert!(dp_drop > dpmom_drop, "dp-means drop {dp_drop}, dp-mom drop {dpmom_drop}");
    }

    #[test]
    fn displacement_of_identical_sets_is_zero() {
        let a = CentroidSet::new(vec![vec![0.0, 0.0], vec![3.0, 4.0]]).unwrap();
        assert_eq!(centroid_displacement(&a, &a), 0.0);
        let b = CentroidSet::new(vec![vec![0.0, 0.0], vec![3.0, 4.0], vec![9.0, 9.0]]).unwrap();
        assert_eq!(centroid_displacement(&a, &b), 0.0);
        assert_eq!(centroid_displacement(&b, &a), (36.0f64 + 25.0).sqrt() / 3.0);
    }

    #[test]
    fn quantiles_and_slope() {
        let v = [1.0, 2.0, 3.0, 4.0];
        assert_eq!(quantile(&v, 0.0), 1.0);
        assert_eq!(quantile(&v, 0.5), 2.5);
        assert_eq!(quantile(&v, 0.25), 1.75);
        let x = [1.0, 2.0, 3.0];
        assert!((ols_slope(&x, &[2.0, 0.0, -2.0]) + 2.0).abs() < 1e-12);
    }

    pub(crate) fn rate_config(seeds: usize) -> RateConfig {
        RateConfig {
            generator: GeneratorSpec::Gaussian {
                means: vec![vec![0.0, 0.0], vec![20.0, 0.0]],
                sd: 1.0,
                per_cluster: 0,
            },
            n_values: vec![100, 400, 1600],
            lambda: 50.0,
            eta: 10f64.sqrt(),
            buckets: 5,
            seeds: (0..seeds as u64).collect(),
            test_size: 20_000,
        }
    }

    #[test]
    fn rate_gap_shrinks() {
        let r = rate_trend(&rate_config(20)).unwrap();
        let m: Vec<f64> = r.levels.iter().map(|l| l.median_gap).collect();
        assert!(m[0] > m[1] && m[1] > m[2], "{m:?}");
        for l in &r.levels {
            assert!(l.iqr.0 <= l.median_gap && l.median_gap <= l.iqr.1);
            assert_eq!(l.gaps.len(), 20);
        }
        assert!(r.slope <= -0.25);
        assert_eq!(r.levels.iter().map(|l| l.n).collect::<Vec<_>>(), vec![100, 400, 1600]);
    }

    #[test]
    fn rate_trend_rejects_bad_configs() {
        let mut c = rate_config(2);
        c.n_values = vec![100, 400];
        assert!(rate_trend(&c).is_err());
        let mut c = rate_config(2);
        c.n_values = vec![100, 400, 300];
        assert!(rate_trend(&c).is_err());
        let mut c = rate_config(2);
        c.generator = GeneratorSpec::Quadrant { per_quadrant: 10 };
        assert!(rate_trend(&c).is_err());
    }
}
