//! Feasible limit theory and Monte Carlo validation.

pub mod clt;
pub mod montecarlo;
pub mod normal;
pub mod stats;

pub use clt::{ci_functional, feasible_t_stat, CltStat, Interval, DEGENERACY_FLOOR};
pub use montecarlo::{
    coverage_experiment, lln_experiment, replicate, replication_seed, EstimatorKind, FunctionalSummary, McReport,
    McRow, Model, ModelFactory, RawStat,
};
pub use normal::{normal_cdf, normal_quantile};
pub use stats::{convergence_rate_fit, mean_and_se, normality_diagnostics, sample_variance, NormalityReport, RateFit};
