use std::fs::File;
use std::io::BufWriter;
use std::path::PathBuf;

use anyhow::{Context, Result};
use clap::Args;
use dpmom_core::tuning::{
    search_timed, unsupervised_proxy_search_timed, write_trace, BucketSweep, Criterion, EtaRule,
    ProtocolConfig, RepeatOptimum, TuningResult, DEFAULT_REPEATS,
};
use serde::{Deserialize, Serialize};

use crate::commands::cluster::Buckets;
use crate::io::{ensure_dir, write_json, InputArgs};
use crate::usage;

#[derive(Args, Debug)]
pub struct TuneArgs {
    #[command(flatten)]
    pub input: InputArgs,
    #[arg(long, default_value_t = DEFAULT_REPEATS)]
    pub repeats: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out_dir: PathBuf,
    /// Tune without labels by minimising the penalised objective.
    #[arg(long)]
    pub proxy: bool,
    /// Sweep every admissible bucket count even for large n.
    #[arg(long)]
    pub full_sweep: bool,
    /// Bucket counts to try instead of the automatic sweep, e.g. "5,10,20".
    #[arg(long, value_delimiter = ',', conflicts_with = "full_sweep")]
    pub buckets: Option<Vec<usize>>,
    /// Learning-rate candidates instead of the data-derived pair.
    #[arg(long, value_delimiter = ',')]
    pub eta: Option<Vec<f64>>,
    #[arg(long, value_enum, default_value = "kmeanspp")]
    pub scheme: Buckets,
}

/// `summary.json` written by `tune`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TuneSummary {
    pub input: String,
    pub n: usize,
    pub p: usize,
    pub criterion: Criterion,
    /// Set in proxy mode: the selection is not validated against labels.
    pub proxy_note: Option<String>,
    pub repeats: usize,
    pub lambda_opt: f64,
    pub lambda_range: (f64, f64),
    #[serde(rename = "L_opt")]
    pub num_buckets_opt: usize,
    #[serde(rename = "L_range")]
    pub num_buckets_range: (usize, usize),
    pub eta_opt: f64,
    pub k_opt: usize,
    pub median_ari: Option<f64>,
    /// Median best score: ARI, or the negated penalised objective in proxy mode.
    pub median_score: f64,
    pub proxy_penalty: Option<f64>,
    pub per_repeat: Vec<RepeatOptimum>,
}

impl TuneSummary {
    pub fn new(input: String, n: usize, p: usize, r: &TuningResult) -> Self {
        Self {
            input,
            n,
            p,
            criterion: r.criterion,
            proxy_note: (r.criterion == Criterion::ObjectiveProxy).then(|| {
                "proxy selection by penalised median-of-means objective; no labels used".to_string()
            }),
            repeats: r.per_repeat.len(),
            lambda_opt: r.lambda_opt,
            lambda_range: r.lambda_range,
            num_buckets_opt: r.num_buckets_opt,
            num_buckets_range: r.num_buckets_range,
            eta_opt: r.eta_opt,
            k_opt: r.k_opt,
            median_ari: r.median_ari(),
            median_score: r.median_score,
            proxy_penalty: r.proxy_penalty,
            per_repeat: r.per_repeat.clone(),
        }
    }
}

pub fn protocol(a: &TuneArgs) -> ProtocolConfig {
    let mut p = ProtocolConfig::default().with_repeats(a.repeats).with_seed(a.seed);
    p.buckets = match (&a.buckets, a.full_sweep) {
        (Some(b), _) => BucketSweep::Explicit(b.clone()),
        (None, true) => BucketSweep::Full,
        (None, false) => BucketSweep::Auto,
    };
    if let Some(e) = &a.eta {
        p.eta = EtaRule::Fixed(e.clone());
    }
    p.bucket_scheme = a.scheme.into();
    p
}

pub fn run(a: &TuneArgs) -> Result<()> {
    if a.repeats == 0 {
        return Err(usage("--repeats must be at least 1"));
    }
    let ds = a.input.load()?;
    let p = protocol(a);
    let run = match (&ds.labels, a.proxy) {
        (_, true) => unsupervised_proxy_search_timed(&ds.data, &p)?,
        (Some(labels), false) => search_timed(&ds.data, labels, &p)?,
        (None, false) => {
            return Err(usage(
                "tuning needs ground-truth labels (--label-col); pass --proxy to tune without \
                 labels using the unsupervised objective proxy",
            ))
        }
    };
    ensure_dir(&a.out_dir)?;
    let trace_path = a.out_dir.join("trace.csv");
    let f = File::create(&trace_path).with_context(|| format!("writing {}", trace_path.display()))?;
    write_trace(BufWriter::new(f), &run.result, None)?;
    let timing_path = a.out_dir.join("timing.csv");
    let f = File::create(&timing_path).with_context(|| format!("writing {}", timing_path.display()))?;
    write_trace(BufWriter::new(f), &run.result, Some(&run.runtimes_ms))?;
    let summary = TuneSummary::new(a.input.input.display().to_string(), ds.data.rows(), ds.data.cols(), &run.result);
    write_json(&a.out_dir.join("summary.json"), &summary)
}
