use std::path::PathBuf;

use anyhow::{Context, Result};
use clap::{Args, Subcommand};
use dpmom_core::data::{
    gen_gaussian_mixture, gen_quadrant, inject_outliers, write_csv, DEFAULT_POINTS_PER_QUADRANT,
    QUADRANT_OUTLIER_BOUNDS,
};
use dpmom_core::SeededRng;

use crate::usage;

#[derive(Args, Debug)]
pub struct GenArgs {
    #[command(subcommand)]
    pub kind: GenKind,
}

#[derive(Args, Debug, Clone)]
pub struct CommonGen {
    /// Uniform outliers to append (label "outlier").
    #[arg(long, default_value_t = 0)]
    pub outliers: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Subcommand, Debug)]
pub enum GenKind {
    /// Four angular clusters in the unit disc; outliers on [-1, 1]^2.
    Quadrant {
        /// Points per quadrant.
        #[arg(long, default_value_t = DEFAULT_POINTS_PER_QUADRANT)]
        per: usize,
        #[command(flatten)]
        common: CommonGen,
    },
    /// Isotropic Gaussian blobs; outliers over the data's range.
    Blobs {
        /// Cluster centres, e.g. "0,0;20,0".
        #[arg(long, default_value = "0,0;20,0")]
        centers: String,
        #[arg(long, default_value_t = 1.0)]
        sd: f64,
        /// Points per blob.
        #[arg(long, default_value_t = 20)]
        per: usize,
        #[command(flatten)]
        common: CommonGen,
    },
}

pub fn parse_centers(s: &str) -> Result<Vec<Vec<f64>>> {
    s.split(';')
        .map(|c| {
            c.split(',')
                .map(|v| v.trim().parse::<f64>().map_err(|_| usage(format!("bad centre coordinate {v:?}"))))
                .collect()
        })
        .collect()
}

pub fn run(args: &GenArgs) -> Result<()> {
    let (data, labels, common, bounds) = match &args.kind {
        GenKind::Quadrant { per, common } => {
            let mut rng = SeededRng::new(common.seed).derive(&[0]);
            let (d, l) = gen_quadrant(*per, &mut rng)?;
            (d, l, common, Some(QUADRANT_OUTLIER_BOUNDS.to_vec()))
        }
        GenKind::Blobs { centers, sd, per, common } => {
            let mut rng = SeededRng::new(common.seed).derive(&[0]);
            let (d, l) = gen_gaussian_mixture(&parse_centers(centers)?, *sd, *per, &mut rng)?;
            (d, l, common, None)
        }
    };
    let mut rng = SeededRng::new(common.seed).derive(&[1]);
    let (data, labels) = inject_outliers(&data, &labels, common.outliers, bounds.as_deref(), &mut rng)?;
    write_csv(&common.out, &data, Some(&labels)).with_context(|| format!("writing {}", common.out.display()))?;
    log::info!("wrote {} rows to {}", data.rows(), common.out.display());
    Ok(())
}
