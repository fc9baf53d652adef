//! File helpers shared by the commands.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use clap::Args;
use dpmom_core::data::{load_csv, Dataset};
use serde::Serialize;

/// Flags describing an input CSV file.
#[derive(Args, Debug, Clone)]
pub struct InputArgs {
    /// Input CSV file.
    #[arg(long = "in")]
    pub input: PathBuf,
    /// The file has no header row.
    #[arg(long)]
    pub no_header: bool,
    /// 1-based column holding ground-truth labels (excluded from features).
    #[arg(long = "label-col", alias = "labels-col")]
    pub label_col: Option<usize>,
}

impl InputArgs {
    pub fn load(&self) -> Result<Dataset> {
        let label = match self.label_col {
            Some(0) => return Err(crate::usage("--label-col is 1-based")),
            Some(c) => Some(c - 1),
            None => None,
        };
        load_csv(&self.input, !self.no_header, label)
            .with_context(|| format!("reading {}", self.input.display()))
    }
}

/// Writes `bytes` to `path` through a temporary file, so a failed run never
/// leaves a partial output behind.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    let tmp = path.with_extension("tmp~");
    fs::write(&tmp, bytes).with_context(|| format!("writing {}", tmp.display()))?;
    fs::rename(&tmp, path).with_context(|| format!("writing {}", path.display()))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    write_atomic(path, s.as_bytes())
}

/// `foo.json` -> `foo.timing.json`.
pub fn timing_path(path: &Path) -> PathBuf {
    let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    path.with_file_name(format!("{stem}.timing.json"))
}

pub fn ensure_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn timing_sidecar_name() {
        assert_eq!(timing_path(Path::new("out/fit.json")), PathBuf::from("out/fit.timing.json"));
    }

    #[test]
    fn atomic_write_leaves_no_temp_file() {
        let dir = tempfile::TempDir::new().unwrap();
        let path = dir.path().join("sub/x.txt");
        write_atomic(&path, b"hi").unwrap();
        assert_eq!(fs::read(&path).unwrap(), b"hi");
        assert_eq!(fs::read_dir(path.parent().unwrap()).unwrap().count(), 1);
    }
}
