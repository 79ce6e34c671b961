//! Downstream evaluation: dimensionality reduction, predictive models,
//! clustering, rank metrics, and the proximity probe.

pub mod downstream;
pub mod forest;
pub mod kmeans;
pub mod linalg;
pub mod metrics;
pub mod pca;
pub mod regression;
pub mod proximity;

pub use downstream::{
    downstream_eval, AttributeTable, DownstreamConfig, DownstreamReport, ModelKind, ReportRow,
    METRICS,
};
pub use forest::{forest_fit, Forest, ForestConfig};
pub use kmeans::{kmeans, KmeansResult};
pub use metrics::{kendall_tau, mean_absolute_error, r2_score, spearman_rho};
pub use pca::{pca_fit_transform, Pca};
pub use proximity::{proximity_probe, ProximityPair, ProximityResult};
pub use regression::{ridge_fit, RidgeModel};
