use std::path::PathBuf;

use anyhow::{Context, Result};
use clap::Args;
use dpmom_core::metrics::{pairwise_report, published_table, AriTable, PairwiseComparison};
use serde::{Deserialize, Serialize};

use crate::io::write_json;

#[derive(Args, Debug)]
pub struct StatsArgs {
    /// ARI table CSV (algorithm rows, dataset columns); defaults to the
    /// bundled published table.
    #[arg(long)]
    pub table: Option<PathBuf>,
    /// Algorithm compared against every other row.
    #[arg(long, default_value = "DP-MoM")]
    pub target: String,
    /// Algorithms removed one after another for follow-up Friedman tests.
    #[arg(long)]
    pub drop: Vec<String>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FriedmanStage {
    pub removed: Vec<String>,
    pub algorithms: usize,
    pub statistic: Option<f64>,
    pub p_value: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StatsReport {
    pub target: String,
    pub datasets: Vec<String>,
    pub friedman: Vec<FriedmanStage>,
    pub pairwise: Vec<PairwiseComparison>,
}

pub fn report(table: &AriTable, target: &str, drop: &[String]) -> Result<StatsReport> {
    let mut friedman = Vec::new();
    for i in 0..=drop.len() {
        let removed: Vec<&str> = drop[..i].iter().map(String::as_str).collect();
        let t = table.without(&removed)?;
        let outcome = t.friedman().ok();
        friedman.push(FriedmanStage {
            removed: drop[..i].to_vec(),
            algorithms: t.algorithms.len(),
            statistic: outcome.map(|o| o.statistic),
            p_value: outcome.map(|o| o.p_value),
        });
    }
    Ok(StatsReport {
        target: target.to_string(),
        datasets: table.datasets.clone(),
        friedman,
        pairwise: pairwise_report(table, target)?,
    })
}

pub fn render(r: &StatsReport) -> String {
    let mut s = format!("{} datasets\n", r.datasets.len());
    for f in &r.friedman {
        let label = if f.removed.is_empty() { "all".to_string() } else { format!("without {}", f.removed.join(", ")) };
        match f.p_value {
            Some(p) => s += &format!("friedman ({label}, {} algorithms): p = {p:.4e}\n", f.algorithms),
            None => s += &format!("friedman ({label}): not enough data\n"),
        }
    }
    s += &format!("{:<10} {:>6} {:>12} {:>8} {:>12}\n", "vs", "wins", "sign p", "W", "wilcoxon p");
    for c in &r.pairwise {
        let (w, p) = c.wilcoxon.map_or(("-".into(), "-".into()), |o| (format!("{}", o.statistic), format!("{:.4e}", o.p_value)));
        s += &format!("{:<10} {:>3}/{:<2} {:>12.4e} {:>8} {:>12}\n", c.other, c.wins, c.trials, c.sign.p_value, w, p);
    }
    s
}

pub fn run(a: &StatsArgs) -> Result<()> {
    let table = match &a.table {
        Some(p) => {
            let f = std::fs::File::open(p).with_context(|| format!("reading {}", p.display()))?;
            AriTable::from_csv_reader(f).with_context(|| format!("parsing {}", p.display()))?
        }
        None => published_table(),
    };
    let r = report(&table, &a.target, &a.drop)?;
    print!("{}", render(&r));
    if let Some(out) = &a.out {
        write_json(out, &r)?;
    }
    Ok(())
}
