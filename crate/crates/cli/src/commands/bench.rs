use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{bail, Context, Result};
use clap::{Args, ValueEnum};
use dpmom_core::baselines::kmeans;
use dpmom_core::data::{Manifest, DEFAULT_POINTS_PER_QUADRANT};
use dpmom_core::metrics::{ari_inliers, published_table, AriTable};
use dpmom_core::theoryprobe::{contamination_stages, tune_stage, GeneratorSpec};
use dpmom_core::tuning::{median, run_seeds, search, tune_dp_means, ProtocolConfig};
use dpmom_core::{Assignment, DataMatrix, SeededRng};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::commands::datasets::DEFAULT_MANIFEST;
use crate::commands::stats::{self, StatsReport};
use crate::io::{ensure_dir, write_atomic, write_json};
use crate::usage;

pub const TARGET: &str = "DP-MoM";
pub const DP_MEANS: &str = "DPM";
pub const KMEANS_PP: &str = "KM++";
/// Cumulative outlier counts for the quadrant suite.
pub const QUADRANT_STAGES: [usize; 4] = [0, 15, 30, 50];
/// Cumulative outlier counts for the Jain suite.
pub const JAIN_STAGES: [usize; 5] = [0, 20, 40, 60, 80];
pub const JAIN_NAME: &str = "jain";

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
pub enum Suite {
    Quadrant,
    JainOutliers,
    Uci,
}

impl Suite {
    fn name(self) -> &'static str {
        match self {
            Suite::Quadrant => "quadrant",
            Suite::JainOutliers => "jain-outliers",
            Suite::Uci => "uci",
        }
    }
}

#[derive(Args, Debug)]
pub struct BenchArgs {
    #[arg(long, value_enum)]
    pub suite: Suite,
    /// Tuning repeats for DP-MoM and seeded runs for k-means++.
    #[arg(long, default_value_t = 30)]
    pub runs: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out_dir: PathBuf,
    #[arg(long, default_value = DEFAULT_MANIFEST)]
    pub manifest: PathBuf,
}

/// `report.json` written by `bench`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchReport {
    pub suite: String,
    pub runs: usize,
    pub seed: u64,
    /// Table the statistics were computed on.
    pub table: AriTable,
    /// `None` when the table is too small for the tests.
    pub stats: Option<StatsReport>,
}

#[derive(Serialize)]
struct Timing {
    suite: String,
    elapsed_ms: f64,
}

/// Median inlier ARI of k-means++ with the true class count.
pub fn kmeans_pp_median(data: &DataMatrix, labels: &Assignment, runs: usize, seed: u64) -> Result<f64> {
    let p = ProtocolConfig::default();
    let k = labels.num_clusters().clamp(1, data.rows());
    let scores = run_seeds(seed, runs)
        .par_iter()
        .map(|&s| Ok(ari_inliers(&kmeans(data, k, p.t_max, p.delta, s)?.labels, labels)?))
        .collect::<Result<Vec<f64>>>()?;
    Ok(median(&scores))
}

/// DP-MoM, DP-means and k-means++ on every contamination stage. Datasets are
/// named `name+outliers`.
fn stage_table(
    name: &str,
    stages: &[(DataMatrix, Assignment)],
    counts: &[usize],
    protocol: &ProtocolConfig,
    runs: usize,
    rng: &SeededRng,
) -> Result<(AriTable, Vec<usize>)> {
    let mut rows = vec![Vec::new(), Vec::new(), Vec::new()];
    let mut sizes = Vec::new();
    for (i, ((data, labels), &count)) in stages.iter().zip(counts).enumerate() {
        log::info!("{name}: stage {count} outliers, n = {}", data.rows());
        let level = tune_stage(data, labels, count, protocol)?;
        rows[0].push(level.dpmom.median_score);
        rows[1].push(level.dp_means_ari);
        rows[2].push(kmeans_pp_median(data, labels, runs, rng.derive(&[i as u64]).seed())?);
        sizes.push(data.rows());
    }
    let datasets = counts.iter().map(|c| format!("{name}+{c}")).collect();
    let table = AriTable::new(vec![TARGET.into(), DP_MEANS.into(), KMEANS_PP.into()], datasets, rows)?;
    Ok((table, sizes))
}

/// `stages.csv`: one row per stage with `n` and each algorithm's ARI.
fn stages_csv(table: &AriTable, sizes: &[usize]) -> String {
    let mut s = format!("n,{}\n", table.algorithms.join(","));
    for (d, n) in sizes.iter().enumerate() {
        let cells: Vec<String> = table.values.iter().map(|row| row[d].to_string()).collect();
        s += &format!("{n},{}\n", cells.join(","));
    }
    s
}

fn quadrant(a: &BenchArgs, protocol: &ProtocolConfig) -> Result<(AriTable, Option<String>)> {
    let generator = GeneratorSpec::Quadrant { per_quadrant: DEFAULT_POINTS_PER_QUADRANT };
    let base = SeededRng::new(a.seed);
    let (data, labels) = generator.generate(&mut base.derive(&[0]))?;
    let bounds = generator.outlier_bounds();
    let stages = contamination_stages(&data, &labels, bounds.as_deref(), &QUADRANT_STAGES, &mut base.derive(&[1]))?;
    let (table, sizes) = stage_table("quadrant", &stages, &QUADRANT_STAGES, protocol, a.runs, &base.derive(&[2]))?;
    let csv = stages_csv(&table, &sizes);
    Ok((table, Some(csv)))
}

fn jain(a: &BenchArgs, protocol: &ProtocolConfig) -> Result<(AriTable, Option<String>)> {
    let m = Manifest::load(&a.manifest).with_context(|| format!("reading {}", a.manifest.display()))?;
    let Some(entry) = m.get(JAIN_NAME).filter(|e| m.file_path(e).exists()) else {
        log::warn!("no {JAIN_NAME:?} dataset in {}; add it to the manifest", a.manifest.display());
        bail!(dpmom_core::Error::EmptyData(format!("{JAIN_NAME} dataset is not available")));
    };
    let ds = m.load_entry(entry)?;
    let Some(labels) = ds.labels else {
        bail!(dpmom_core::Error::EmptyData(format!("{JAIN_NAME} has no label column")));
    };
    let base = SeededRng::new(a.seed);
    let stages = contamination_stages(&ds.data, &labels, None, &JAIN_STAGES, &mut base.derive(&[1]))?;
    let (table, sizes) = stage_table(JAIN_NAME, &stages, &JAIN_STAGES, protocol, a.runs, &base.derive(&[2]))?;
    let csv = stages_csv(&table, &sizes);
    Ok((table, Some(csv)))
}

/// Scores every available manifest dataset and merges the computed rows into
/// the published table, restricted to the datasets both share.
fn uci(a: &BenchArgs, protocol: &ProtocolConfig) -> Result<(AriTable, Option<String>)> {
    let m = Manifest::load(&a.manifest).with_context(|| format!("reading {}", a.manifest.display()))?;
    let published = published_table();
    let base = SeededRng::new(a.seed);
    let mut names = Vec::new();
    let mut rows = vec![Vec::new(), Vec::new(), Vec::new()];
    for (i, e) in m.entries.iter().enumerate() {
        if e.name.eq_ignore_ascii_case(JAIN_NAME) {
            continue;
        }
        if !m.file_path(e).exists() {
            log::warn!("skipping {}: file missing (try `dpmom datasets fetch {}`)", e.name, e.name);
            continue;
        }
        let ds = m.load_entry(e)?;
        let Some(labels) = ds.labels else {
            log::warn!("skipping {}: no label column", e.name);
            continue;
        };
        log::info!("uci: {}", e.name);
        let column = published
            .datasets
            .iter()
            .find(|d| d.eq_ignore_ascii_case(&e.name))
            .cloned()
            .unwrap_or_else(|| e.name.clone());
        rows[0].push(search(&ds.data, &labels, protocol)?.median_score);
        rows[1].push(tune_dp_means(&ds.data, &labels, protocol)?.1);
        rows[2].push(kmeans_pp_median(&ds.data, &labels, a.runs, base.derive(&[i as u64]).seed())?);
        names.push(column);
    }
    if names.is_empty() {
        bail!(dpmom_core::Error::EmptyData(format!("no datasets available in {}", a.manifest.display())));
    }
    let computed = AriTable::new(vec![TARGET.into(), DP_MEANS.into(), KMEANS_PP.into()], names.clone(), rows)?;
    write_atomic(&a.out_dir.join("computed.csv"), computed.to_csv_string().as_bytes())?;
    let shared: Vec<String> = names.iter().filter(|n| published.datasets.contains(n)).cloned().collect();
    if shared.is_empty() {
        return Ok((computed, None));
    }
    let mut table = published.select_datasets(&shared)?;
    let own = computed.select_datasets(&shared)?;
    for (alg, row) in own.algorithms.iter().zip(own.values) {
        table.upsert(alg, row)?;
    }
    Ok((table, None))
}

pub fn run(a: &BenchArgs) -> Result<()> {
    if a.runs == 0 {
        return Err(usage("--runs must be at least 1"));
    }
    ensure_dir(&a.out_dir)?;
    let protocol = ProtocolConfig::default().with_repeats(a.runs).with_seed(a.seed);
    let start = Instant::now();
    let (table, stages) = match a.suite {
        Suite::Quadrant => quadrant(a, &protocol)?,
        Suite::JainOutliers => jain(a, &protocol)?,
        Suite::Uci => uci(a, &protocol)?,
    };
    let elapsed_ms = start.elapsed().as_secs_f64() * 1e3;
    if let Some(csv) = stages {
        write_atomic(&a.out_dir.join("stages.csv"), csv.as_bytes())?;
    }
    write_atomic(&a.out_dir.join("ari_table.csv"), table.to_csv_string().as_bytes())?;
    let stats = match stats::report(&table, TARGET, &[]) {
        Ok(r) => Some(r),
        Err(e) => {
            log::warn!("statistics skipped: {e}");
            None
        }
    };
    if let Some(r) = &stats {
        print!("{}", stats::render(r));
    }
    let report = BenchReport { suite: a.suite.name().into(), runs: a.runs, seed: a.seed, table, stats };
    write_json(&a.out_dir.join("report.json"), &report)?;
    write_timing(&a.out_dir, a.suite, elapsed_ms)
}

fn write_timing(dir: &Path, suite: Suite, elapsed_ms: f64) -> Result<()> {
    write_json(&dir.join("report.timing.json"), &Timing { suite: suite.name().into(), elapsed_ms })
}
