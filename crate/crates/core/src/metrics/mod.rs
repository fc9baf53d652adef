//! Agreement scores between labelings and nonparametric tests for comparing
//! algorithms across datasets.

mod ari;
mod hypothesis;
mod table;

pub use ari::{ari, ari_inliers, contingency, Contingency};
pub use hypothesis::{
    average_ranks, friedman_test, sign_test, wilcoxon_signed_rank, TestOutcome,
    WSR_EXACT_MAX_N,
};
pub use table::{pairwise_report, published_table, AriTable, PairwiseComparison, PUBLISHED_ARI_CSV};
