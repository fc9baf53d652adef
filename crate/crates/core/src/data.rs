//! Dataset loading, synthetic generators and outlier injection.

use std::collections::HashMap;
use std::f64::consts::{FRAC_PI_2, PI};
use std::fs::File;
use std::io::Read;
use std::path::{Path, PathBuf};

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::domain::{Assignment, DataMatrix};
use crate::error::{contract, Error, Result};
use crate::rng::SeededRng;

pub const DEFAULT_POINTS_PER_QUADRANT: usize = 30;
/// Label text that marks an outlier row in CSV files.
pub const OUTLIER_LABEL: &str = "outlier";

/// A parsed CSV dataset.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub data: DataMatrix,
    pub labels: Option<Assignment>,
    /// Label names in order of first appearance; `class_names[j]` is cluster `j`.
    pub class_names: Vec<String>,
}

fn io_error(path: &Path, e: impl std::fmt::Display) -> Error {
    Error::Io { path: path.display().to_string(), message: e.to_string() }
}

/// Reads a numeric CSV file. `label_column` is zero-based and may hold any
/// text; distinct values become clusters in order of first appearance,
/// except [`OUTLIER_LABEL`], which becomes [`Assignment::OUTLIER`].
pub fn load_csv(path: impl AsRef<Path>, has_header: bool, label_column: Option<usize>) -> Result<Dataset> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| io_error(path, e))?;
    read_csv(file, has_header, label_column)
}

pub fn read_csv<R: Read>(reader: R, has_header: bool, label_column: Option<usize>) -> Result<Dataset> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(has_header)
        .flexible(true)
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_reader(reader);
    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut labels = Vec::new();
    let mut names: Vec<String> = Vec::new();
    let mut index: HashMap<String, usize> = HashMap::new();
    let mut width: Option<usize> = None;

    for record in reader.records() {
        let record = record.map_err(|e| Error::Parse {
            line: e.position().map_or(0, |p| p.line() as usize),
            message: e.to_string(),
        })?;
        let line = record.position().map_or(0, |p| p.line() as usize);
        if record.iter().all(str::is_empty) {
            continue;
        }
        match width {
            None => width = Some(record.len()),
            Some(w) if w != record.len() => {
                return Err(Error::Parse {
                    line,
                    message: format!("expected {w} fields, found {}", record.len()),
                })
            }
            _ => {}
        }
        if let Some(c) = label_column {
            if c >= record.len() {
                return Err(Error::Parse {
                    line,
                    message: format!("label column {c} out of range for {} fields", record.len()),
                });
            }
        }
        let mut features = Vec::with_capacity(record.len());
        for (j, cell) in record.iter().enumerate() {
            if Some(j) == label_column {
                if cell == OUTLIER_LABEL {
                    labels.push(Assignment::OUTLIER);
                    continue;
                }
                let id = *index.entry(cell.to_string()).or_insert_with(|| {
                    names.push(cell.to_string());
                    names.len() - 1
                });
                labels.push(id);
                continue;
            }
            let v: f64 = cell.parse().map_err(|_| Error::Parse {
                line,
                message: format!("column {j}: {cell:?} is not a number"),
            })?;
            if !v.is_finite() {
                return Err(Error::Parse { line, message: format!("column {j}: non-finite value") });
            }
            features.push(v);
        }
        if features.is_empty() {
            return Err(Error::Parse { line, message: "no feature columns".into() });
        }
        rows.push(features);
    }
    if rows.is_empty() {
        return Err(Error::EmptyData("no data rows".into()));
    }
    Ok(Dataset {
        data: DataMatrix::from_rows(&rows)?,
        labels: label_column.map(|_| Assignment::new(labels)),
        class_names: names,
    })
}

/// Writes `data` (and labels, as a trailing `label` column) as CSV.
/// Outlier rows get the label `outlier`.
pub fn write_csv(path: impl AsRef<Path>, data: &DataMatrix, labels: Option<&Assignment>) -> Result<()> {
    let path = path.as_ref();
    let mut w = csv::Writer::from_path(path).map_err(|e| io_error(path, e))?;
    let mut header: Vec<String> = (0..data.cols()).map(|j| format!("x{j}")).collect();
    if labels.is_some() {
        header.push("label".into());
    }
    w.write_record(&header).map_err(|e| io_error(path, e))?;
    for (i, row) in data.iter_rows().enumerate() {
        let mut rec: Vec<String> = row.iter().map(|v| v.to_string()).collect();
        if let Some(l) = labels {
            rec.push(if l.is_outlier(i) { OUTLIER_LABEL.into() } else { l.labels()[i].to_string() });
        }
        w.write_record(&rec).map_err(|e| io_error(path, e))?;
    }
    w.flush().map_err(|e| io_error(path, e))
}

/// Four clusters, one per quadrant: radius `R ~ U(0,1)` and angle uniform on
/// the quadrant's band with `pi/36` trimmed from each axis.
pub fn gen_quadrant(points_per_quadrant: usize, rng: &mut SeededRng) -> Result<(DataMatrix, Assignment)> {
    if points_per_quadrant == 0 {
        return Err(contract("at least one point per quadrant"));
    }
    let margin = PI / 36.0;
    let mut rows = Vec::with_capacity(4 * points_per_quadrant);
    let mut labels = Vec::with_capacity(4 * points_per_quadrant);
    for q in 0..4 {
        let lo = q as f64 * FRAC_PI_2 + margin;
        let hi = (q + 1) as f64 * FRAC_PI_2 - margin;
        for _ in 0..points_per_quadrant {
            let r: f64 = rng.random();
            let theta = rng.random_range(lo..hi);
            rows.push([r * theta.cos(), r * theta.sin()]);
            labels.push(q);
        }
    }
    Ok((DataMatrix::from_rows(&rows)?, Assignment::new(labels)))
}

/// Isotropic Gaussian clusters, `per_cluster` points around each mean.
pub fn gen_gaussian_mixture(
    means: &[Vec<f64>],
    sd: f64,
    per_cluster: usize,
    rng: &mut SeededRng,
) -> Result<(DataMatrix, Assignment)> {
    if means.is_empty() || per_cluster == 0 {
        return Err(contract("need at least one mean and one point per cluster"));
    }
    let p = means[0].len();
    if p == 0 || means.iter().any(|m| m.len() != p) {
        return Err(contract("means must share a non-zero dimension"));
    }
    let normal = Normal::new(0.0, sd).map_err(|e| contract(format!("bad sd {sd}: {e}")))?;
    let mut values = Vec::with_capacity(means.len() * per_cluster * p);
    let mut labels = Vec::with_capacity(means.len() * per_cluster);
    for (j, m) in means.iter().enumerate() {
        for _ in 0..per_cluster {
            values.extend(m.iter().map(|c| c + normal.sample(rng)));
            labels.push(j);
        }
    }
    Ok((DataMatrix::new(labels.len(), p, values)?, Assignment::new(labels)))
}

/// Appends `count` points drawn uniformly from the box `bounds` (per-dimension
/// `(lo, hi)`; defaults to the data's own range). Appended rows are labelled
/// [`Assignment::OUTLIER`].
pub fn inject_outliers(
    data: &DataMatrix,
    labels: &Assignment,
    count: usize,
    bounds: Option<&[(f64, f64)]>,
    rng: &mut SeededRng,
) -> Result<(DataMatrix, Assignment)> {
    if labels.len() != data.rows() {
        return Err(contract(format!("{} labels for {} rows", labels.len(), data.rows())));
    }
    let own;
    let bounds = match bounds {
        Some(b) => b,
        None => {
            own = data.column_bounds();
            &own
        }
    };
    if bounds.len() != data.cols() {
        return Err(Error::DimensionMismatch { expected: data.cols(), actual: bounds.len() });
    }
    if bounds.iter().any(|&(lo, hi)| !(lo.is_finite() && hi.is_finite() && lo <= hi)) {
        return Err(contract("outlier bounds must be finite with lo <= hi"));
    }
    if count == 0 {
        return Ok((data.clone(), labels.clone()));
    }
    let mut values = Vec::with_capacity(count * data.cols());
    for _ in 0..count {
        for &(lo, hi) in bounds {
            values.push(if lo == hi { lo } else { rng.random_range(lo..hi) });
        }
    }
    let extra = DataMatrix::new(count, data.cols(), values)?;
    let mut all = labels.labels().to_vec();
    all.extend(std::iter::repeat_n(Assignment::OUTLIER, count));
    Ok((data.vstack(&extra)?, Assignment::new(all)))
}

/// Bounds used for outliers on quadrant data.
pub const QUADRANT_OUTLIER_BOUNDS: [(f64, f64); 2] = [(-1.0, 1.0), (-1.0, 1.0)];

/// One entry of the dataset manifest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub name: String,
    /// Path relative to the manifest's directory.
    pub path: String,
    #[serde(default)]
    pub url: String,
    /// Lower-case hex SHA-256 of the file; empty when not pinned.
    #[serde(default)]
    pub sha256: String,
    pub has_header: bool,
    /// Zero-based label column.
    pub label_column: Option<usize>,
    pub n: usize,
    pub p: usize,
    pub k: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Manifest {
    pub root: PathBuf,
    pub entries: Vec<ManifestEntry>,
}

impl Manifest {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let mut reader = csv::ReaderBuilder::new()
            .comment(Some(b'#'))
            .trim(csv::Trim::All)
            .from_path(path)
            .map_err(|e| io_error(path, e))?;
        let entries = reader
            .deserialize()
            .enumerate()
            .map(|(i, r)| r.map_err(|e| Error::Parse { line: i + 2, message: e.to_string() }))
            .collect::<Result<Vec<ManifestEntry>>>()?;
        let root = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Ok(Self { root, entries })
    }

    pub fn get(&self, name: &str) -> Option<&ManifestEntry> {
        self.entries.iter().find(|e| e.name.eq_ignore_ascii_case(name))
    }

    pub fn file_path(&self, entry: &ManifestEntry) -> PathBuf {
        self.root.join(&entry.path)
    }

    /// Loads an entry, verifying its checksum (when pinned) and shape.
    pub fn load_entry(&self, entry: &ManifestEntry) -> Result<Dataset> {
        let path = self.file_path(entry);
        let bytes = std::fs::read(&path).map_err(|e| io_error(&path, e))?;
        if !entry.sha256.is_empty() {
            let actual = sha256_hex(&bytes);
            if !actual.eq_ignore_ascii_case(&entry.sha256) {
                return Err(Error::Io {
                    path: path.display().to_string(),
                    message: format!("checksum mismatch: expected {}, got {actual}", entry.sha256),
                });
            }
        }
        let ds = read_csv(bytes.as_slice(), entry.has_header, entry.label_column)?;
        if ds.data.rows() != entry.n || ds.data.cols() != entry.p {
            return Err(Error::DegenerateData(format!(
                "{}: expected {}x{}, found {}x{}",
                entry.name,
                entry.n,
                entry.p,
                ds.data.rows(),
                ds.data.cols()
            )));
        }
        Ok(ds)
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    use sha2::{Digest, Sha256};
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}
