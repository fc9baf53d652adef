use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::{Args, Subcommand};
use dpmom_core::data::load_csv;
use dpmom_core::Assignment;

use crate::commands::cluster::ClusterOutput;
use crate::io::write_atomic;
use crate::{svg, usage};

#[derive(Args, Debug)]
pub struct PlotArgs {
    #[command(subcommand)]
    pub kind: PlotKind,
}

#[derive(Subcommand, Debug)]
pub enum PlotKind {
    /// Points coloured by cluster from a `cluster` result.
    Scatter {
        /// Result JSON written by `cluster`.
        #[arg(long = "in")]
        input: PathBuf,
        /// The data file the result was fitted on.
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        no_header: bool,
        /// 1-based label column to drop from the features; rows labelled
        /// "outlier" are drawn as crosses.
        #[arg(long = "label-col")]
        label_col: Option<usize>,
        /// Two 1-based feature columns to plot, e.g. "1,2".
        #[arg(long, value_delimiter = ',')]
        dims: Option<Vec<usize>>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Line chart from a CSV whose first column is x and the rest are series.
    Lines {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long, default_value = "")]
        title: String,
        #[arg(long)]
        out: PathBuf,
    },
}

pub fn run(a: &PlotArgs) -> Result<()> {
    match &a.kind {
        PlotKind::Scatter { input, data, no_header, label_col, dims, out } => {
            let text = std::fs::read_to_string(input).with_context(|| format!("reading {}", input.display()))?;
            let result: ClusterOutput =
                serde_json::from_str(&text).with_context(|| format!("parsing {}", input.display()))?;
            let label = label_col.map(|c| c.checked_sub(1).ok_or_else(|| usage("--label-col is 1-based"))).transpose()?;
            let ds = load_csv(data, !no_header, label).with_context(|| format!("reading {}", data.display()))?;
            if ds.data.rows() != result.labels.len() {
                bail!(dpmom_core::Error::DimensionMismatch { expected: result.labels.len(), actual: ds.data.rows() });
            }
            let (i, j) = match dims.as_deref() {
                Some([i, j]) if *i >= 1 && *j >= 1 && *i <= ds.data.cols() && *j <= ds.data.cols() => (i - 1, j - 1),
                Some(_) => return Err(usage(format!("--dims needs two columns between 1 and {}", ds.data.cols()))),
                None if ds.data.cols() == 2 => (0, 1),
                None => {
                    return Err(usage(format!(
                        "scatter needs 2-D data but there are {} features; choose two with --dims 1,2",
                        ds.data.cols()
                    )))
                }
            };
            let points: Vec<(f64, f64)> = ds.data.iter_rows().map(|r| (r[i], r[j])).collect();
            let truth = ds.labels.unwrap_or_else(|| Assignment::constant(points.len(), 0));
            let labels: Vec<Option<usize>> = result
                .labels
                .iter()
                .enumerate()
                .map(|(r, &c)| (!truth.is_outlier(r)).then_some(c))
                .collect();
            let title = format!("{} clusters", result.k);
            let svg = svg::scatter(&points, &labels, &title, (&format!("x{}", i + 1), &format!("x{}", j + 1)));
            write_atomic(out, svg.as_bytes())
        }
        PlotKind::Lines { input, title, out } => {
            let mut r = csv::Reader::from_path(input).with_context(|| format!("reading {}", input.display()))?;
            let headers = r.headers()?.clone();
            if headers.len() < 2 {
                bail!(dpmom_core::Error::EmptyData(format!("{} needs an x column and a series", input.display())));
            }
            let mut x = Vec::new();
            let mut series: Vec<(String, Vec<f64>)> = headers.iter().skip(1).map(|h| (h.to_string(), vec![])).collect();
            for (line, rec) in r.records().enumerate() {
                let rec = rec?;
                let parse = |s: &str| -> Result<f64> {
                    s.trim().parse().map_err(|_| {
                        dpmom_core::Error::Parse { line: line + 2, message: format!("{s:?} is not a number") }.into()
                    })
                };
                x.push(parse(&rec[0])?);
                for (k, (_, v)) in series.iter_mut().enumerate() {
                    v.push(parse(rec.get(k + 1).unwrap_or(""))?);
                }
            }
            if x.is_empty() {
                bail!(dpmom_core::Error::EmptyData(format!("{} has no rows", input.display())));
            }
            let svg = svg::lines(&x, &series, title, (&headers[0], "ARI"));
            write_atomic(out, svg.as_bytes())
        }
    }
}
