use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::{Args, Subcommand};
use dpmom_core::data::{sha256_hex, Manifest};

use crate::io::write_atomic;
use crate::usage;

pub const DEFAULT_MANIFEST: &str = "data/manifest.csv";

#[derive(Args, Debug)]
pub struct DatasetsArgs {
    #[arg(long, default_value = DEFAULT_MANIFEST, global = true)]
    pub manifest: PathBuf,
    #[command(subcommand)]
    pub action: DatasetsAction,
}

#[derive(Subcommand, Debug)]
pub enum DatasetsAction {
    /// Show manifest entries and whether each file is present and verified.
    List,
    /// Download missing files that have a URL, then verify them.
    Fetch {
        /// Entries to fetch (default: all).
        names: Vec<String>,
    },
}

pub fn run(a: &DatasetsArgs) -> Result<()> {
    let m = Manifest::load(&a.manifest).with_context(|| format!("reading {}", a.manifest.display()))?;
    match &a.action {
        DatasetsAction::List => {
            for e in &m.entries {
                let status = if !m.file_path(e).exists() {
                    "missing"
                } else if m.load_entry(e).is_ok() {
                    if e.sha256.is_empty() { "present (unpinned)" } else { "verified" }
                } else {
                    "invalid"
                };
                println!("{:<12} n={:<5} p={:<5} k={:<3} {status}", e.name, e.n, e.p, e.k);
            }
            Ok(())
        }
        DatasetsAction::Fetch { names } => {
            for n in names {
                if m.get(n).is_none() {
                    return Err(usage(format!("{n:?} is not in {}", a.manifest.display())));
                }
            }
            let mut failed = 0;
            for e in m.entries.iter().filter(|e| names.is_empty() || names.iter().any(|n| n.eq_ignore_ascii_case(&e.name))) {
                let path = m.file_path(e);
                if path.exists() {
                    continue;
                }
                if e.url.is_empty() {
                    log::warn!("{}: no URL in the manifest; place the file at {}", e.name, path.display());
                    failed += 1;
                    continue;
                }
                eprintln!("fetching {} from {}", e.name, e.url);
                let bytes = ureq::get(&e.url)
                    .call()
                    .and_then(|mut r| r.body_mut().with_config().limit(256 << 20).read_to_vec())
                    .with_context(|| format!("downloading {}", e.url))?;
                if !e.sha256.is_empty() && sha256_hex(&bytes) != e.sha256.to_ascii_lowercase() {
                    bail!(dpmom_core::Error::Io {
                        path: e.url.clone(),
                        message: "downloaded file does not match the pinned checksum".into()
                    });
                }
                write_atomic(&path, &bytes)?;
                m.load_entry(e).with_context(|| format!("checking {}", path.display()))?;
            }
            if failed > 0 {
                bail!(dpmom_core::Error::Io {
                    path: a.manifest.display().to_string(),
                    message: format!("{failed} dataset(s) could not be fetched"),
                });
            }
            Ok(())
        }
    }
}
