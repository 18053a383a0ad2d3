//! Error metrics, reference forecasts and the fold × seed experiment grid.

mod baselines;
mod experiment;
mod metrics;
mod report;

pub use baselines::{nwp_forecast, persistence_forecast};
pub use experiment::{
    baseline_predictions, layout_for, run_experiment, score_predictions, write_predictions, CovariateMode, DumpRow,
    Experiment, ExperimentSetup, ModelKind, ModelSpec,
};
pub use metrics::{amae, angle_difference, namae, rmse, rrse};
pub use report::{Aggregate, Cell, Metric, MetricReport, Score, REPORT_VARIABLES};
