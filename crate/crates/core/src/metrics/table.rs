use std::io::Read;

use serde::{Deserialize, Serialize};

use super::hypothesis::{friedman_test, sign_test, wilcoxon_signed_rank, TestOutcome};
use crate::error::{contract, Error, Result};

/// Published median ARI values for ten algorithms on sixteen datasets.
/// These are reference numbers shipped as a fixture, not recomputed here.
pub const PUBLISHED_ARI_CSV: &str = include_str!("../../fixtures/published_ari_v1.csv");

/// Algorithm-by-dataset score table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AriTable {
    pub algorithms: Vec<String>,
    pub datasets: Vec<String>,
    /// `values[a][d]`: score of algorithm `a` on dataset `d`.
    pub values: Vec<Vec<f64>>,
}

impl AriTable {
    pub fn new(algorithms: Vec<String>, datasets: Vec<String>, values: Vec<Vec<f64>>) -> Result<Self> {
        if values.len() != algorithms.len() {
            return Err(contract(format!(
                "{} algorithm names for {} rows",
                algorithms.len(),
                values.len()
            )));
        }
        for (name, row) in algorithms.iter().zip(&values) {
            if row.len() != datasets.len() {
                return Err(contract(format!(
                    "row {name} has {} cells, expected {}",
                    row.len(),
                    datasets.len()
                )));
            }
            if let Some(v) = row.iter().find(|v| !(-1.0..=1.0).contains(*v)) {
                return Err(contract(format!("ARI value {v} for {name} is outside [-1, 1]")));
            }
        }
        Ok(Self { algorithms, datasets, values })
    }

    /// Reads CSV with a header of dataset names (the first header cell labels
    /// the algorithm column) and one row per algorithm. Lines starting with
    /// `#` are comments.
    pub fn from_csv_reader<R: Read>(reader: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new()
            .comment(Some(b'#'))
            .trim(csv::Trim::All)
            .from_reader(reader);
        let header = rdr.headers().map_err(csv_err)?.clone();
        if header.len() < 2 {
            return Err(Error::Parse { line: 1, message: "header needs at least one dataset column".into() });
        }
        let datasets: Vec<String> = header.iter().skip(1).map(str::to_owned).collect();
        let mut algorithms = Vec::new();
        let mut values = Vec::new();
        for record in rdr.records() {
            let record = record.map_err(csv_err)?;
            let line = record.position().map_or(0, |p| p.line() as usize);
            if record.len() != header.len() {
                return Err(Error::Parse {
                    line,
                    message: format!("expected {} cells, found {}", header.len(), record.len()),
                });
            }
            algorithms.push(record[0].to_owned());
            let row = record
                .iter()
                .skip(1)
                .map(|cell| {
                    cell.parse::<f64>().map_err(|_| Error::Parse {
                        line,
                        message: format!("non-numeric ARI cell {cell:?}"),
                    })
                })
                .collect::<Result<Vec<f64>>>()?;
            values.push(row);
        }
        if algorithms.is_empty() {
            return Err(Error::EmptyData("ARI table has no algorithm rows".into()));
        }
        Self::new(algorithms, datasets, values)
    }

    pub fn from_csv_str(s: &str) -> Result<Self> {
        Self::from_csv_reader(s.as_bytes())
    }

    pub fn to_csv_string(&self) -> String {
        let mut out = String::from("algorithm");
        for d in &self.datasets {
            out.push(',');
            out.push_str(d);
        }
        out.push('\n');
        for (a, row) in self.algorithms.iter().zip(&self.values) {
            out.push_str(a);
            for v in row {
                out.push_str(&format!(",{v:.4}"));
            }
            out.push('\n');
        }
        out
    }

    pub fn algorithm_index(&self, name: &str) -> Option<usize> {
        self.algorithms.iter().position(|a| a == name)
    }

    pub fn row(&self, name: &str) -> Option<&[f64]> {
        self.algorithm_index(name).map(|i| self.values[i].as_slice())
    }

    /// A copy without the named algorithms.
    pub fn without(&self, names: &[&str]) -> Result<Self> {
        for n in names {
            if self.algorithm_index(n).is_none() {
                return Err(contract(format!("unknown algorithm {n:?}")));
            }
        }
        let keep: Vec<usize> = (0..self.algorithms.len())
            .filter(|&i| !names.contains(&self.algorithms[i].as_str()))
            .collect();
        Self::new(
            keep.iter().map(|&i| self.algorithms[i].clone()).collect(),
            self.datasets.clone(),
            keep.iter().map(|&i| self.values[i].clone()).collect(),
        )
    }

    /// Keeps only the named datasets, in the given order.
    pub fn select_datasets(&self, names: &[String]) -> Result<Self> {
        let idx = names
            .iter()
            .map(|n| {
                self.datasets
                    .iter()
                    .position(|d| d == n)
                    .ok_or_else(|| contract(format!("unknown dataset {n:?}")))
            })
            .collect::<Result<Vec<usize>>>()?;
        Self::new(
            self.algorithms.clone(),
            names.to_vec(),
            self.values.iter().map(|row| idx.iter().map(|&d| row[d]).collect()).collect(),
        )
    }

    /// Adds or replaces one algorithm row.
    pub fn upsert(&mut self, name: &str, row: Vec<f64>) -> Result<()> {
        if row.len() != self.datasets.len() {
            return Err(contract("row length does not match dataset count"));
        }
        match self.algorithm_index(name) {
            Some(i) => self.values[i] = row,
            None => {
                self.algorithms.push(name.to_owned());
                self.values.push(row);
            }
        }
        Ok(())
    }

    /// Scores arranged dataset-major, as the Friedman test expects.
    pub fn by_dataset(&self) -> Vec<Vec<f64>> {
        (0..self.datasets.len())
            .map(|d| self.values.iter().map(|row| row[d]).collect())
            .collect()
    }

    pub fn friedman(&self) -> Result<TestOutcome> {
        if self.algorithms.len() < 2 || self.datasets.len() < 2 {
            return Err(contract("Friedman test needs at least two algorithms and two datasets"));
        }
        friedman_test(&self.by_dataset())
    }
}

fn csv_err(e: csv::Error) -> Error {
    let line = e.position().map_or(0, |p| p.line() as usize);
    Error::Parse { line, message: e.to_string() }
}

/// The shipped reference table.
pub fn published_table() -> AriTable {
    AriTable::from_csv_str(PUBLISHED_ARI_CSV).expect("bundled fixture parses")
}

/// Sign and signed-rank tests of one algorithm against another.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairwiseComparison {
    pub other: String,
    pub wins: u64,
    pub trials: u64,
    pub sign: TestOutcome,
    pub wilcoxon: Option<TestOutcome>,
}

/// Compares `target` with every other row, testing whether it scores higher.
/// Ties are dropped from both tests.
pub fn pairwise_report(table: &AriTable, target: &str) -> Result<Vec<PairwiseComparison>> {
    let t = table
        .row(target)
        .ok_or_else(|| contract(format!("unknown algorithm {target:?}")))?;
    table
        .algorithms
        .iter()
        .zip(&table.values)
        .filter(|(name, _)| name.as_str() != target)
        .map(|(name, row)| {
            let diffs: Vec<f64> = t.iter().zip(row).map(|(a, b)| a - b).collect();
            let wins = diffs.iter().filter(|&&d| d > 0.0).count() as u64;
            let trials = diffs.iter().filter(|&&d| d != 0.0).count() as u64;
            let sign = if trials == 0 {
                TestOutcome { statistic: 0.0, p_value: 1.0 }
            } else {
                sign_test(wins, trials)?
            };
            let wilcoxon = match wilcoxon_signed_rank(&diffs) {
                Ok(r) => Some(r),
                Err(Error::NoEvidence) => None,
                Err(e) => return Err(e),
            };
            Ok(PairwiseComparison { other: name.clone(), wins, trials, sign, wilcoxon })
        })
        .collect()
}
