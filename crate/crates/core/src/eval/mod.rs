//! Imputation metrics, rank aggregation, the inverse-propensity diagnostic
//! and report emission.

pub mod ips;
pub mod metrics;
pub mod rank;
pub mod report;

pub use ips::{inverse_weight_mean, ips_diagnostic, Estimate, IpsDiagnostic, PROPENSITY_FLOOR};
pub use metrics::{
    imputation_accuracy, level_accuracy, r_squared, rmse_metrics, split_ground_truth, ColumnMetric,
    ImputationMetrics,
};
pub use rank::{average_ranks, rank_aggregate, Direction, RankSummary, Scored};
pub use report::{read_reports, write_reports, MetricsReport, ReportFormat};
