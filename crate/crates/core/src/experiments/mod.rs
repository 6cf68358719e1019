//! Experiment harness: configs, replicated runs, fits, assertions and reports.

mod assertion;
mod audit;
mod bridges;
mod config;
mod fit;
mod integrals;
mod rate;
mod regression;
mod report;

pub use assertion::{all_passed, Assertion};
pub use config::{CoherenceSection, ErrorMeasure, ExperimentConfig, ExperimentKind, ScalingSection};
pub use fit::{fit_line, geometric_checkpoints, loglog_fit, mean, median, LinearFit, CHECKPOINT_RATIO};
pub use rate::{
    bridge_seminorm_max, convergence_experiment, finite_epoch_envelope, n_scaling_experiment, rate_envelope, run_replicate,
    Checkpoint, ProblemConstants, RateFits, RateReport, ReplicateResult, ScalingReport, RATE_GAIN, RATE_OFFSET,
};
pub use regression::{
    discrete_vs_continuous, limit_covariance, ols_covariance_check, population_second_moment, regression_limit_law, sample_moments,
    CoherenceReplicate, CoherenceReport, LimitLawReport, MomentCheck, OlsReport, RegressionModel, MOMENT_Z,
};
pub use bridges::{
    admissible_bound, b_star, bridge_max_validation, seminorm_refinement, tail_bound_check, tail_variance, BridgeMaxReport,
    RefinementReport, TailReport, TailRow,
};
pub use integrals::{
    asymptotic_bound_checks, integrate, lipschitz_sum, simpson_pair, sum_integral_defect, weighted_integral_ratio, IntegralCheck,
    IntegralReport, EPSILON, QUADRATURE_STEP, RICHARDSON_TOLERANCE,
};
pub use audit::{constants_audit, AuditReport, AuditRow, AUDIT_A, AUDIT_ALPHA, AUDIT_TOLERANCE};
pub use report::{emit_report, Format, LogLogPlot, Named, Report, Series, Style};
