use serde::{Deserialize, Serialize};

use crate::domain::{Assignment, CentroidSet};
use crate::dpmom::DpMomConfig;

/// Parameters that produced a [`ClusteringResult`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "algorithm", rename_all = "kebab-case")]
pub enum AlgorithmConfig {
    DpMom(DpMomConfig),
    DpMeans { lambda: f64, t_max: usize, delta: f64 },
    Kmeans { k: usize, t_max: usize, delta: f64, seed: Option<u64> },
}

/// Output of any clustering routine in the crate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusteringResult {
    pub labels: Assignment,
    pub centroids: CentroidSet,
    pub k: usize,
    /// Objective value recorded at the end of every iteration.
    pub objective_trace: Vec<f64>,
    pub converged: bool,
    pub iterations: usize,
    pub config: AlgorithmConfig,
    pub seed: Option<u64>,
}

impl ClusteringResult {
    pub fn cluster_sizes(&self) -> Vec<usize> {
        self.labels.cluster_sizes(self.k)
    }
}
