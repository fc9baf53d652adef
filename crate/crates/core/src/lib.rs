//! Robust, nonparametric centroid clustering.
//!
//! DP-MoM combines Dirichlet-process style cluster spawning, where the
//! number of clusters is governed by a per-cluster penalty `lambda`, with a
//! median-of-means objective whose centroids are fitted by AdaGrad. The
//! crate also ships the baselines, the grid-search tuning protocol,
//! synthetic generators, agreement metrics and nonparametric tests used to
//! evaluate it.

// `!(x > 0.0)` style guards are used on purpose so NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod baselines;
pub mod data;
pub mod domain;
pub mod dpmom;
pub mod error;
pub mod metrics;
pub mod mom;
pub mod objective;
pub mod partition;
pub mod result;
pub mod rng;
pub mod theoryprobe;
pub mod tuning;

pub use domain::{Assignment, CentroidSet, DataMatrix};
pub use dpmom::{fit, DpMomConfig};
pub use error::{Error, Result};
pub use mom::BucketPartition;
pub use result::{AlgorithmConfig, ClusteringResult};
pub use rng::SeededRng;
