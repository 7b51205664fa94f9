//! Regression and ranking metrics, overall and within cell types.

mod report;
mod stats;

pub use report::{
    evaluate, per_family_ranking, Averaging, EvalRow, FamilyRanking, MetricsReport, TargetMetrics,
    TypeRanking,
};
pub use stats::{
    average_ranks, kendall_tau, mape, pearson, r_squared, spearman_rho, Mape, MAPE_EPS,
};
