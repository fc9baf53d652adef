use std::path::PathBuf;
use std::time::Instant;

use anyhow::{Context, Result};
use clap::{Args, ValueEnum};
use dpmom_core::baselines::{dp_means, kmeans};
use dpmom_core::dpmom::{self, merge_small_clusters, DEFAULT_MIN_CLUSTER_SIZE};
use dpmom_core::metrics::ari_inliers;
use dpmom_core::partition::BucketScheme;
use dpmom_core::{ClusteringResult, DpMomConfig, Error};
use serde::{Deserialize, Serialize};

use crate::io::{timing_path, write_json, InputArgs};
use crate::usage;

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
pub enum Algo {
    Dpmom,
    Dpmeans,
    Kmeans,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
pub enum Buckets {
    Kmeanspp,
    Random,
}

impl From<Buckets> for BucketScheme {
    fn from(b: Buckets) -> Self {
        match b {
            Buckets::Kmeanspp => BucketScheme::KmeansPlusPlus,
            Buckets::Random => BucketScheme::Random,
        }
    }
}

#[derive(Args, Debug)]
pub struct ClusterArgs {
    #[arg(long, value_enum, default_value = "dpmom")]
    pub algo: Algo,
    /// Cluster penalty (dpmom, dpmeans).
    #[arg(long)]
    pub lambda: Option<f64>,
    /// AdaGrad learning rate (dpmom); defaults to the larger data-derived candidate.
    #[arg(long)]
    pub eta: Option<f64>,
    #[arg(long)]
    pub epsilon: Option<f64>,
    #[arg(long)]
    pub delta: Option<f64>,
    #[arg(long)]
    pub tmax: Option<usize>,
    /// Number of buckets (dpmom).
    #[arg(long = "L", alias = "buckets")]
    pub num_buckets: Option<usize>,
    /// Bucket construction (dpmom).
    #[arg(long, value_enum)]
    pub scheme: Option<Buckets>,
    /// Number of clusters (kmeans).
    #[arg(long)]
    pub k: Option<usize>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Clusters smaller than this are folded into the nearest larger one.
    #[arg(long, default_value_t = DEFAULT_MIN_CLUSTER_SIZE)]
    pub min_size: usize,
    #[command(flatten)]
    pub input: InputArgs,
    #[arg(long)]
    pub out: PathBuf,
}

/// JSON written by `cluster`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterOutput {
    pub input: String,
    pub n: usize,
    pub p: usize,
    /// Clusters before small ones are merged.
    pub k_raw: usize,
    /// Clusters after merging; the estimated number of clusters.
    pub k: usize,
    pub labels: Vec<usize>,
    pub centroids: Vec<Vec<f64>>,
    /// ARI against `--label-col`, outlier rows excluded.
    pub ari: Option<f64>,
    pub raw: ClusteringResult,
}

fn check_flags(a: &ClusterArgs) -> Result<()> {
    let dpmom_only = [
        ("--eta", a.eta.is_some()),
        ("--epsilon", a.epsilon.is_some()),
        ("--L", a.num_buckets.is_some()),
        ("--scheme", a.scheme.is_some()),
    ];
    match a.algo {
        Algo::Dpmom | Algo::Dpmeans => {
            if a.k.is_some() {
                return Err(usage("--k applies only to --algo kmeans"));
            }
            if a.lambda.is_none() {
                return Err(usage("--lambda is required for dpmom and dpmeans"));
            }
            if a.algo == Algo::Dpmom && a.num_buckets.is_none() {
                return Err(usage("--L is required for dpmom"));
            }
        }
        Algo::Kmeans => {
            if a.lambda.is_some() {
                return Err(usage("--lambda does not apply to kmeans"));
            }
            if a.k.is_none() {
                return Err(usage("--k is required for kmeans"));
            }
        }
    }
    if a.algo != Algo::Dpmom {
        if let Some((flag, _)) = dpmom_only.iter().find(|(_, set)| *set) {
            return Err(usage(format!("{flag} applies only to --algo dpmom")));
        }
    }
    Ok(())
}

pub fn run(a: &ClusterArgs) -> Result<()> {
    check_flags(a)?;
    let ds = a.input.load()?;
    let data = &ds.data;
    let t_max = a.tmax.unwrap_or(dpmom::DEFAULT_T_MAX);
    let delta = a.delta.unwrap_or(dpmom::DEFAULT_DELTA);
    let start = Instant::now();
    let raw = match a.algo {
        Algo::Dpmom => {
            let eta = match a.eta {
                Some(e) => e,
                None => dpmom::default_learning_rate(data)?.0,
            };
            let mut config = DpMomConfig::new(a.lambda.unwrap(), eta, a.num_buckets.unwrap(), a.seed);
            config.t_max = t_max;
            config.delta = delta;
            if let Some(e) = a.epsilon {
                config.epsilon = e;
            }
            if let Some(s) = a.scheme {
                config.buckets = s.into();
            }
            dpmom::fit(data, &config)?
        }
        Algo::Dpmeans => dp_means(data, a.lambda.unwrap(), t_max, delta)?,
        Algo::Kmeans => kmeans(data, a.k.unwrap(), t_max, delta, a.seed)?,
    };
    let elapsed = start.elapsed();
    let merged = match merge_small_clusters(&raw, data, a.min_size) {
        Ok(m) => m,
        Err(Error::MergeImpossible { min_size }) => {
            log::warn!("no cluster has {min_size} members; reporting unmerged clusters");
            raw.clone()
        }
        Err(e) => return Err(e.into()),
    };
    let ari = ds.labels.as_ref().map(|t| ari_inliers(&merged.labels, t)).transpose()?;
    let out = ClusterOutput {
        input: a.input.input.display().to_string(),
        n: data.rows(),
        p: data.cols(),
        k_raw: raw.k,
        k: merged.k,
        labels: merged.labels.labels().to_vec(),
        centroids: merged.centroids.as_slice().to_vec(),
        ari,
        raw,
    };
    write_json(&a.out, &out).with_context(|| format!("writing {}", a.out.display()))?;
    write_json(
        &timing_path(&a.out),
        &serde_json::json!({ "wall_time_ms": elapsed.as_secs_f64() * 1e3 }),
    )?;
    Ok(())
}
